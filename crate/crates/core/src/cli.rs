//! `fpb-sim` command-line front end.
//!
//! Every subcommand has a pure `cmd_*` function returning typed rows, and a
//! renderer producing CSV (6 significant digits, one header line per table)
//! or JSON. Exit codes: 0 success, 1 usage/parse/domain error, 2 fit did
//! not converge.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::error::{FpbError, Result};
use crate::error_model::{self, ErrorModelParams};
use crate::fit::{self, FitOptions, FitResult};
use crate::io as fileio;
use crate::montecarlo::{self, CountsRecord, RngSeed, Weighting};
use crate::probe::{self, Bb84State, ProbeConfig, SiftBasis};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "fpb-sim",
    version,
    about = "Simulate the CNOT entangling-probe attack on BB84, estimate Eve's Renyi information and fit the physical error model"
)]
pub struct Cli {
    /// Error-model parameter document (JSON, degrees). Omitted: ideal model.
    #[arg(long, global = true, value_name = "PATH")]
    pub params: Option<PathBuf>,

    /// Use the ideal model explicitly.
    #[arg(long, global = true, conflicts_with = "params")]
    pub ideal: bool,

    /// Output path (default: standard output).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Output format (default: json for fit, csv otherwise).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Renyi information versus error probability.
    Curve(CurveArgs),
    /// Outcome-probability table per (Alice state, pe).
    Table(TableArgs),
    /// Synthesize coincidence-count records.
    Simulate(SimulateArgs),
    /// Estimate probabilities, Renyi information and error rates from counts.
    Estimate(EstimateArgs),
    /// Fit the error model to counts.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, default_value = "0", value_parser = parse_pe)]
    pub pe_min: f64,
    #[arg(long, default_value = "1/3", value_parser = parse_pe)]
    pub pe_max: f64,
    /// Number of grid intervals between pe-min and pe-max.
    #[arg(long, default_value_t = 30)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Comma-separated pe values (fractions such as 1/3 accepted).
    #[arg(long, default_value = "0,0.1,1/3", value_parser = parse_pe_list)]
    pub pe: PeList,
    #[arg(long, default_value = "D,A", value_parser = parse_state_list)]
    pub states: StateList,
    /// Bob's basis: `same` as Alice, or HV / DA for every row.
    #[arg(long, default_value = "same", value_parser = parse_bob_basis)]
    pub bob_basis: BobBasis,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "0,0.1,1/3", value_parser = parse_pe_list)]
    pub pe: PeList,
    #[arg(long, default_value = "H,V,D,A", value_parser = parse_state_list)]
    pub states: StateList,
    /// Bob bases to simulate for every state.
    #[arg(long, default_value = "HV,DA", value_parser = parse_basis_list)]
    pub bob_bases: BasisList,
    /// Detected pairs per record.
    #[arg(long, default_value_t = 50_000)]
    pub pairs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Emit rounded expected counts instead of sampling.
    #[arg(long)]
    pub noise_free: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Counts file (CSV)
    #[arg(long, value_name = "PATH")]
    pub counts: PathBuf,
    #[arg(long, value_enum, default_value_t = Weighting::Equal)]
    pub weighting: Weighting,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Counts file (CSV)
    #[arg(long, value_name = "PATH")]
    pub counts: PathBuf,
    /// Starting parameters (JSON, degrees). Default: all zero.
    #[arg(long, value_name = "PATH")]
    pub init: Option<PathBuf>,
    #[arg(long, default_value_t = 50_000)]
    pub max_evals: usize,
    #[arg(long, value_enum, default_value_t = Weighting::Equal)]
    pub weighting: Weighting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeList(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct StateList(pub Vec<Bb84State>);

#[derive(Debug, Clone, PartialEq)]
pub struct BasisList(pub Vec<SiftBasis>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BobBasis {
    Same,
    Fixed(SiftBasis),
}

impl BobBasis {
    fn for_state(self, alice: Bb84State) -> SiftBasis {
        match self {
            BobBasis::Same => alice.basis(),
            BobBasis::Fixed(b) => b,
        }
    }
}

/// Parses a decimal or a fraction `a/b`.
pub fn parse_pe(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let n: f64 = num
                .trim()
                .parse()
                .map_err(|_| format!("invalid number '{s}'"))?;
            let d: f64 = den
                .trim()
                .parse()
                .map_err(|_| format!("invalid number '{s}'"))?;
            if d == 0.0 {
                return Err(format!("zero denominator in '{s}'"));
            }
            n / d
        }
        None => s.parse().map_err(|_| format!("invalid number '{s}'"))?,
    };
    if !value.is_finite() {
        return Err(format!("'{s}' is not finite"));
    }
    Ok(value)
}

fn parse_pe_list(s: &str) -> std::result::Result<PeList, String> {
    s.split(',')
        .map(parse_pe)
        .collect::<std::result::Result<_, _>>()
        .map(PeList)
}

fn parse_state_list(s: &str) -> std::result::Result<StateList, String> {
    s.split(',')
        .map(|t| t.parse::<Bb84State>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()
        .map(StateList)
}

fn parse_basis_list(s: &str) -> std::result::Result<BasisList, String> {
    s.split(',')
        .map(|t| t.parse::<SiftBasis>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()
        .map(BasisList)
}

fn parse_bob_basis(s: &str) -> std::result::Result<BobBasis, String> {
    if s.trim().eq_ignore_ascii_case("same") {
        Ok(BobBasis::Same)
    } else {
        s.parse::<SiftBasis>()
            .map(BobBasis::Fixed)
            .map_err(|e| e.to_string())
    }
}

/// Formats with 6 significant digits in fixed notation.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let decimals = |v: f64| (5 - v.abs().log10().floor() as i32).max(0) as usize;
    let mut d = decimals(x);
    let mut s = format!("{:.*}", d, x);
    // Rounding can carry into a new leading digit (9.999996 -> 10.00000).
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded != 0.0 && decimals(rounded) < d {
        d = decimals(rounded);
        s = format!("{:.*}", d, x);
    }
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s.remove(0);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub pe: f64,
    pub renyi_hv: f64,
    pub renyi_da: f64,
    pub renyi_ideal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub alice: Bb84State,
    pub bob_basis: SiftBasis,
    pub pe: f64,
    /// `(1,0), (1,1), (0,1), (0,0)` cell order.
    pub probs: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub alice: Bb84State,
    pub bob_basis: SiftBasis,
    pub pe: f64,
    pub total: u64,
    pub probs: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiftSummary {
    pub basis: SiftBasis,
    pub pe: f64,
    pub renyi: f64,
    pub sifted_error_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub records: Vec<EstimateRow>,
    pub summaries: Vec<SiftSummary>,
    pub warnings: Vec<String>,
}

/// `steps + 1` evenly spaced points from `min` to `max`.
pub fn pe_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if min > max {
        return Err(FpbError::InvalidArgument(format!(
            "pe-min {min} exceeds pe-max {max}"
        )));
    }
    if steps == 0 {
        return Ok(vec![min]);
    }
    Ok((0..=steps)
        .map(|k| {
            if k == steps {
                max
            } else {
                min + (max - min) * k as f64 / steps as f64
            }
        })
        .collect())
}

fn row_context<T>(row: usize, pe: f64, r: Result<T>) -> Result<T> {
    r.map_err(|e| FpbError::InvalidArgument(format!("row {} (pe={pe}): {e}", row + 1)))
}

pub fn cmd_curve(grid: &[f64], model: &ErrorModelParams) -> Result<Vec<CurveRow>> {
    grid.iter()
        .enumerate()
        .map(|(i, &pe)| {
            row_context(
                i,
                pe,
                (|| {
                    let cfg = ProbeConfig::new(pe)?;
                    Ok(CurveRow {
                        pe,
                        renyi_hv: error_model::model_renyi(model, SiftBasis::HV, &cfg)?,
                        renyi_da: error_model::model_renyi(model, SiftBasis::DA, &cfg)?,
                        renyi_ideal: probe::renyi_closed_form(pe)?,
                    })
                })(),
            )
        })
        .collect()
}

pub fn cmd_table(
    pes: &[f64],
    states: &[Bb84State],
    bob: BobBasis,
    model: &ErrorModelParams,
) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for &alice in states {
        for (i, &pe) in pes.iter().enumerate() {
            let bob_basis = bob.for_state(alice);
            let probs = row_context(
                i,
                pe,
                (|| {
                    let cfg = ProbeConfig::new(pe)?;
                    error_model::predict_outcome_probs(model, alice, bob_basis, &cfg)
                })(),
            )?;
            rows.push(TableRow {
                alice,
                bob_basis,
                pe,
                probs: probs.0,
            });
        }
    }
    Ok(rows)
}

/// Records for every (pe, state, Bob basis) combination, sampled in that
/// nesting order from one generator seeded with `seed`.
pub fn cmd_simulate(
    pes: &[f64],
    states: &[Bb84State],
    bases: &[SiftBasis],
    n_pairs: u64,
    seed: RngSeed,
    noise_free: bool,
    model: &ErrorModelParams,
) -> Result<Vec<CountsRecord>> {
    let mut rng = seed.rng();
    let mut out = Vec::new();
    for (i, &pe) in pes.iter().enumerate() {
        let cfg = row_context(i, pe, ProbeConfig::new(pe))?;
        for &alice in states {
            for &basis in bases {
                let probs = error_model::predict_outcome_probs(model, alice, basis, &cfg)?;
                let counts = if noise_free {
                    if n_pairs == 0 {
                        return Err(FpbError::InvalidArgument("pairs must be at least 1".into()));
                    }
                    montecarlo::noise_free_counts(&probs, n_pairs)
                } else {
                    montecarlo::simulate_counts_with(&probs, n_pairs, &mut rng)?
                };
                out.push(CountsRecord::new(alice, basis, pe, counts));
            }
        }
    }
    Ok(out)
}

pub fn cmd_estimate(records: &[CountsRecord], weighting: Weighting) -> Result<EstimateReport> {
    let rows = records
        .iter()
        .map(|r| {
            Ok(EstimateRow {
                alice: r.alice,
                bob_basis: r.bob_basis,
                pe: r.pe_nominal,
                total: r.total(),
                probs: montecarlo::estimate_probabilities(r)?.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summaries = Vec::new();
    let mut warnings = Vec::new();
    for (key, group) in montecarlo::group_sift_records(records) {
        let summary = montecarlo::measured_renyi(&group, weighting).and_then(|renyi| {
            Ok(SiftSummary {
                basis: key.basis,
                pe: key.pe(),
                renyi,
                sifted_error_rate: montecarlo::sifted_error_rate(&group, weighting)?,
            })
        });
        match summary {
            Ok(s) => summaries.push(s),
            Err(e) => warnings.push(format!(
                "skipping basis {} at pe={}: {e}",
                key.basis,
                key.pe()
            )),
        }
    }
    Ok(EstimateReport {
        records: rows,
        summaries,
        warnings,
    })
}

pub fn cmd_fit(
    records: &[CountsRecord],
    init: &ErrorModelParams,
    options: &FitOptions,
) -> Result<FitResult> {
    fit::fit_parameters(records, init, options)
}

pub fn render_curve(rows: &[CurveRow], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = String::from("pe,renyi_hv,renyi_da,renyi_ideal\n");
            for r in rows {
                s += &format!(
                    "{},{},{},{}\n",
                    fmt_sig(r.pe),
                    fmt_sig(r.renyi_hv),
                    fmt_sig(r.renyi_da),
                    fmt_sig(r.renyi_ideal)
                );
            }
            s
        }
        Format::Json => to_json_string(&rows),
    }
}

const CELL_COLUMNS: &str = "p10,p11,p01,p00";

fn probs_csv(p: &[f64; 4]) -> String {
    p.iter().map(|x| fmt_sig(*x)).collect::<Vec<_>>().join(",")
}

pub fn render_table(rows: &[TableRow], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = format!("alice,bob_basis,pe,{CELL_COLUMNS}\n");
            for r in rows {
                s += &format!(
                    "{},{},{},{}\n",
                    r.alice,
                    r.bob_basis,
                    fmt_sig(r.pe),
                    probs_csv(&r.probs)
                );
            }
            s
        }
        Format::Json => to_json_string(&rows),
    }
}

pub fn render_counts(records: &[CountsRecord], format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => {
            let mut buf = Vec::new();
            fileio::write_counts(&mut buf, records)?;
            String::from_utf8(buf).expect("counts file is ASCII")
        }
        Format::Json => to_json_string(&records),
    })
}

pub fn render_estimate(report: &EstimateReport, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = format!("alice,bob_basis,pe,total,{CELL_COLUMNS}\n");
            for r in &report.records {
                s += &format!(
                    "{},{},{},{},{}\n",
                    r.alice,
                    r.bob_basis,
                    fmt_sig(r.pe),
                    r.total,
                    probs_csv(&r.probs)
                );
            }
            s += "\nbasis,pe,renyi,sifted_error_rate\n";
            for m in &report.summaries {
                s += &format!(
                    "{},{},{},{}\n",
                    m.basis,
                    fmt_sig(m.pe),
                    fmt_sig(m.renyi),
                    fmt_sig(m.sifted_error_rate)
                );
            }
            s
        }
        Format::Json => to_json_string(report),
    }
}

pub fn render_fit(result: &FitResult, format: Format) -> String {
    match format {
        Format::Json => to_json_string(&Value::Object(fileio::fit_result_to_json(result))),
        Format::Csv => {
            let mut s = String::from("key,value\n");
            for (k, v) in error_model::PARAM_KEYS
                .iter()
                .zip(result.params.to_degrees())
            {
                s += &format!("{k},{}\n", fmt_sig(v));
            }
            s += &format!("residual,{}\n", fmt_sig(result.residual));
            s += &format!("evaluations,{}\n", result.evaluations);
            s += &format!("converged,{}\n", result.converged);
            s
        }
    }
}

fn to_json_string<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn model_from(cli: &Cli) -> Result<ErrorModelParams> {
    match &cli.params {
        Some(path) => fileio::read_params(path),
        None => Ok(ErrorModelParams::zero()),
    }
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => File::create(path)?.write_all(text.as_bytes())?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Runs a parsed command line, returning the process exit code.
pub fn execute(cli: &Cli) -> Result<i32> {
    let format = cli.format.unwrap_or(match cli.command {
        Command::Fit(_) => Format::Json,
        _ => Format::Csv,
    });
    match &cli.command {
        Command::Curve(a) => {
            let model = model_from(cli)?;
            let grid = pe_grid(a.pe_min, a.pe_max, a.steps)?;
            emit(cli, &render_curve(&cmd_curve(&grid, &model)?, format))?;
        }
        Command::Table(a) => {
            let model = model_from(cli)?;
            let rows = cmd_table(&a.pe.0, &a.states.0, a.bob_basis, &model)?;
            emit(cli, &render_table(&rows, format))?;
        }
        Command::Simulate(a) => {
            let model = model_from(cli)?;
            let records = cmd_simulate(
                &a.pe.0,
                &a.states.0,
                &a.bob_bases.0,
                a.pairs,
                RngSeed(a.seed),
                a.noise_free,
                &model,
            )?;
            emit(cli, &render_counts(&records, format)?)?;
        }
        Command::Estimate(a) => {
            let records = fileio::read_counts(&a.counts)?;
            let report = cmd_estimate(&records, a.weighting)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            emit(cli, &render_estimate(&report, format))?;
        }
        Command::Fit(a) => {
            let records = fileio::read_counts(&a.counts)?;
            let init = match &a.init {
                Some(p) => fileio::read_params(p)?,
                None => ErrorModelParams::zero(),
            };
            let options = FitOptions {
                max_evals: a.max_evals,
                weighting: a.weighting,
                ..FitOptions::default()
            };
            let result = cmd_fit(&records, &init, &options)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            emit(cli, &render_fit(&result, format))?;
            if !result.converged {
                eprintln!(
                    "warning: fit did not converge within {} evaluations",
                    result.evaluations
                );
                return Ok(EXIT_NOT_CONVERGED);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.480329), "0.480329");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333");
        assert_eq!(fmt_sig(1.0), "1.00000");
        assert_eq!(fmt_sig(0.0), "0.00000");
        assert_eq!(fmt_sig(12.3), "12.3000");
        assert_eq!(fmt_sig(-1.8), "-1.80000");
        assert_eq!(fmt_sig(9.9999996), "10.0000");
        assert_eq!(fmt_sig(0.000123456789), "0.000123457");
        assert_eq!(fmt_sig(-1e-7), "-0.000000100000");
        assert_eq!(fmt_sig(-1e-12 * 0.0), "0.00000");
        assert_eq!(fmt_sig(123456789.0), "123456789");
    }

    #[test]
    fn pe_parsing() {
        assert_abs_diff_eq!(parse_pe("1/3").unwrap(), 1.0 / 3.0);
        assert_eq!(parse_pe(" 0.1 ").unwrap(), 0.1);
        assert!(parse_pe("1/0").is_err());
        assert!(parse_pe("abc").is_err());
        assert_eq!(parse_pe_list("0,0.1").unwrap().0, vec![0.0, 0.1]);
    }

    #[test]
    fn grid_endpoints() {
        let g = pe_grid(0.0, 1.0 / 3.0, 3).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g[3], 1.0 / 3.0);
        assert_eq!(pe_grid(0.2, 0.2, 0).unwrap(), vec![0.2]);
        assert!(pe_grid(0.3, 0.2, 4).is_err());
    }

    #[test]
    fn curve_ideal_endpoints() {
        let rows = cmd_curve(&[0.0, 1.0 / 3.0], &ErrorModelParams::zero()).unwrap();
        assert_eq!(rows[0].renyi_ideal, 0.0);
        assert_abs_diff_eq!(rows[0].renyi_hv, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[1].renyi_ideal, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[1].renyi_da, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn curve_domain_error_names_row() {
        let err = cmd_curve(&[0.1, 0.7], &ErrorModelParams::zero()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn table_expected_rows() {
        let rows = cmd_table(
            &[0.0, 0.1],
            &[Bb84State::D, Bb84State::A],
            BobBasis::Same,
            &ErrorModelParams::zero(),
        )
        .unwrap();
        let expect = [
            [0.0, 0.0, 0.5, 0.5],
            [0.050, 0.050, 0.167, 0.733],
            [0.5, 0.5, 0.0, 0.0],
            [0.167, 0.733, 0.050, 0.050],
        ];
        for (r, e) in rows.iter().zip(expect) {
            for (x, y) in r.probs.iter().zip(e) {
                assert_abs_diff_eq!(*x, y, epsilon = 5e-4);
            }
        }
    }

    #[test]
    fn simulate_ideal_pe_zero_has_no_errors() {
        let recs = cmd_simulate(
            &[0.0],
            &Bb84State::ALL,
            &SiftBasis::ALL,
            40_000,
            RngSeed(3),
            false,
            &ErrorModelParams::zero(),
        )
        .unwrap();
        assert_eq!(recs.len(), 8);
        for r in recs.iter().filter(|r| r.is_sifted()) {
            let wrong = 1 - r.alice.bit();
            assert_eq!(r.get(wrong, 0) + r.get(wrong, 1), 0, "{r:?}");
        }
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(["fpb-sim", "curve", "--bogus"]), EXIT_USAGE);
        assert_eq!(
            run(["fpb-sim", "table", "--ideal", "--params", "x.json"]),
            EXIT_USAGE
        );
    }
}
