//! Least-squares fit of the error model to coincidence-count records.

use std::f64::consts::FRAC_PI_2;

use crate::error::{FpbError, Result};
use crate::error_model::{predict_outcome_probs, ErrorModelParams, OutcomeProbs, N_PARAMS};
use crate::montecarlo::{estimate_probabilities, CountsRecord, Weighting};
use crate::probe::ProbeConfig;
use crate::simplex::{self, SimplexOptions};

/// Number of data values in the full experimental design:
/// 4 Alice states x 2 Bob bases x 3 pe values x 4 outcomes.
pub const FULL_DESIGN_VALUES: usize = 96;

/// Box constraint on every parameter, radians.
pub const PARAM_BOUND: f64 = FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_evals: usize,
    /// Simplex diameter tolerance, radians.
    pub x_tol: f64,
    /// Objective spread tolerance.
    pub f_tol: f64,
    /// Starting simplex edge, radians.
    pub initial_step: f64,
    pub max_restarts: usize,
    pub weighting: Weighting,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_evals: 50_000,
            x_tol: 1e-6,
            f_tol: 1e-12,
            initial_step: 5f64.to_radians(),
            max_restarts: 5,
            weighting: Weighting::Equal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ErrorModelParams,
    /// Objective value at `params`.
    pub residual: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Non-fatal observations about the data set.
    pub warnings: Vec<String>,
}

/// One record prepared for repeated objective evaluation.
#[derive(Debug, Clone)]
struct Datum {
    record: CountsRecord,
    cfg: ProbeConfig,
    estimate: OutcomeProbs,
    weight: f64,
}

/// Prepared, canonically ordered data set for the fit objective.
#[derive(Debug, Clone)]
pub struct FitData {
    data: Vec<Datum>,
}

impl FitData {
    pub fn new(records: &[CountsRecord], weighting: Weighting) -> Result<Self> {
        let mut sorted = records.to_vec();
        // Canonical order makes the objective independent of input order.
        sorted.sort_by(|a, b| {
            (a.alice, a.bob_basis)
                .cmp(&(b.alice, b.bob_basis))
                .then(a.pe_nominal.total_cmp(&b.pe_nominal))
                .then(a.counts.cmp(&b.counts))
        });
        let mean_total =
            sorted.iter().map(|r| r.total() as f64).sum::<f64>() / sorted.len().max(1) as f64;
        let data = sorted
            .into_iter()
            .map(|record| {
                let cfg = ProbeConfig::new(record.pe_nominal)?;
                let estimate = estimate_probabilities(&record)?;
                let weight = match weighting {
                    Weighting::Equal => 1.0,
                    Weighting::Counts => record.total() as f64 / mean_total,
                };
                Ok(Datum {
                    record,
                    cfg,
                    estimate,
                    weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Weighted sum of squared differences between estimated and predicted
    /// probabilities over all records and outcomes.
    pub fn objective(&self, params: &ErrorModelParams) -> Result<f64> {
        let mut total = 0.0;
        for d in &self.data {
            let pred = predict_outcome_probs(params, d.record.alice, d.record.bob_basis, &d.cfg)?;
            let sq: f64 = pred
                .0
                .iter()
                .zip(d.estimate.0.iter())
                .map(|(p, e)| (e - p) * (e - p))
                .sum();
            total += d.weight * sq;
        }
        Ok(total)
    }
}

/// Objective value for `params` against `records`.
pub fn fit_objective(
    records: &[CountsRecord],
    params: &ErrorModelParams,
    weighting: Weighting,
) -> Result<f64> {
    FitData::new(records, weighting)?.objective(params)
}

/// Fits the ten error-model parameters by simplex descent.
///
/// Returns the canonical (`alpha >= 0`) representative of the optimum.
/// Running out of evaluations is not an error: the best point found is
/// returned with `converged = false`.
pub fn fit_parameters(
    records: &[CountsRecord],
    init: &ErrorModelParams,
    options: &FitOptions,
) -> Result<FitResult> {
    if records.is_empty() {
        return Err(FpbError::InsufficientData("no records".into()));
    }
    for r in records {
        r.validate()?;
        if r.total() == 0 {
            return Err(FpbError::ZeroCounts(format!(
                "{}/{} pe={}",
                r.alice, r.bob_basis, r.pe_nominal
            )));
        }
    }
    let n_values = 4 * records.len();
    if n_values < N_PARAMS {
        return Err(FpbError::InsufficientData(format!(
            "{n_values} data values for {N_PARAMS} parameters"
        )));
    }
    let mut pes: Vec<f64> = records.iter().map(|r| r.pe_nominal).collect();
    pes.sort_by(f64::total_cmp);
    pes.dedup();
    if pes.len() < 2 {
        return Err(FpbError::InsufficientData(
            "records must span at least two pe values".into(),
        ));
    }
    if !init.is_finite() || init.to_array().iter().any(|x| x.abs() >= PARAM_BOUND) {
        return Err(FpbError::InvalidArgument(
            "initial parameters must be finite and within +-90 degrees".into(),
        ));
    }

    let mut warnings = Vec::new();
    if n_values < FULL_DESIGN_VALUES {
        let msg = format!(
            "{n_values} data values, fewer than the {FULL_DESIGN_VALUES} of the full design; \
             some parameters may be unconstrained"
        );
        warnings.push(msg);
    }

    let data = FitData::new(records, options.weighting)?;
    let edge = PARAM_BOUND - 1e-9;
    let penalized = |x: &[f64]| -> f64 {
        let mut clamped = [0.0; N_PARAMS];
        let mut excess = 0.0;
        for (c, v) in clamped.iter_mut().zip(x) {
            *c = v.clamp(-edge, edge);
            excess += (v - *c) * (v - *c);
        }
        let p = ErrorModelParams::from_array(clamped);
        data.objective(&p).unwrap_or(f64::INFINITY) + 1e3 * excess
    };

    let sopts = SimplexOptions {
        max_evals: options.max_evals,
        x_tol: options.x_tol,
        f_tol: options.f_tol,
        initial_step: options.initial_step,
        max_restarts: options.max_restarts,
    };
    let min = simplex::minimize(penalized, &init.to_array(), &sopts);
    let mut best = [0.0; N_PARAMS];
    for (b, v) in best.iter_mut().zip(&min.x) {
        *b = v.clamp(-edge, edge);
    }
    settle_flat_directions(&data, &mut best, &init.to_array(), options.f_tol)?;
    let params = ErrorModelParams::from_array(best).canonical();
    let residual = data.objective(&params)?;
    Ok(FitResult {
        params,
        residual,
        evaluations: min.evaluations,
        converged: min.converged,
        warnings,
    })
}

/// Returns parameters the data cannot see to their initial values.
///
/// With `alpha = 0` the P-CNOT phase has no effect, and records missing a
/// state or basis leave its offsets free; the simplex would otherwise leave
/// them wherever it drifted.
fn settle_flat_directions(
    data: &FitData,
    x: &mut [f64; N_PARAMS],
    init: &[f64; N_PARAMS],
    f_tol: f64,
) -> Result<()> {
    let mut current = data.objective(&ErrorModelParams::from_array(*x))?;
    for i in 0..N_PARAMS {
        if x[i] == init[i] {
            continue;
        }
        let mut trial = *x;
        trial[i] = init[i];
        let f = data.objective(&ErrorModelParams::from_array(trial))?;
        if f <= current + f_tol {
            *x = trial;
            current = current.min(f);
        }
    }
    Ok(())
}
