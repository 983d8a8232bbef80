//! Non-ideal forward model of the probe experiment.
//!
//! Ten parameters perturb the ideal circuit: a residual probe phase, a
//! residual phase and per-state angle offsets on Alice's qubit, an
//! imbalance/phase pair on the polarization-controlled NOT, and per-basis
//! angle offsets of Bob's analyzer. Eve always projects the target onto
//! its computational basis.

use std::f64::consts::FRAC_PI_8;

use num_complex::Complex64;

use crate::error::Result;
use crate::probe::{self, Bb84State, JointDistribution, ProbeConfig, SiftBasis};
use crate::qmath::{self, StateVec2, Unitary4};

/// Number of free parameters in [`ErrorModelParams`].
pub const N_PARAMS: usize = 10;

/// Parameter names in vector order, as used in parameter documents.
pub const PARAM_KEYS: [&str; N_PARAMS] = [
    "d_xi",
    "d_chi",
    "d_theta_a_h",
    "d_theta_a_d",
    "d_theta_a_v",
    "d_theta_a_a",
    "alpha",
    "delta",
    "d_theta_b_hv",
    "d_theta_b_da",
];

/// Error-model parameters, all in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorModelParams {
    /// Residual phase on the probe's `|1>_T` amplitude.
    pub d_xi: f64,
    /// Residual phase on Alice's `|1>_C` amplitude.
    pub d_chi: f64,
    /// Offsets of Alice's preparation angle, indexed H, D, V, A.
    pub d_theta_a: [f64; 4],
    /// P-CNOT imbalance.
    pub alpha: f64,
    /// P-CNOT phase.
    pub delta: f64,
    /// Offsets of Bob's analyzer angle, indexed HV, DA.
    pub d_theta_b: [f64; 2],
}

impl ErrorModelParams {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds parameters from degrees, in [`PARAM_KEYS`] order.
    pub fn from_degrees(values: [f64; N_PARAMS]) -> Self {
        Self::from_array(values.map(f64::to_radians))
    }

    pub fn to_degrees(&self) -> [f64; N_PARAMS] {
        self.to_array().map(f64::to_degrees)
    }

    /// Parameters fitted to the laboratory data set (degrees):
    /// d_xi 3, d_chi -11, d_theta_a (H, D, V, A) 3.2, 0.9, -0.7, -2.3,
    /// alpha 12.3, delta 3.6, d_theta_b (HV, DA) -1.8, 0.
    pub fn reference_fit() -> Self {
        Self::from_degrees([3.0, -11.0, 3.2, 0.9, -0.7, -2.3, 12.3, 3.6, -1.8, 0.0])
    }

    /// Flat vector in [`PARAM_KEYS`] order.
    pub fn to_array(&self) -> [f64; N_PARAMS] {
        [
            self.d_xi,
            self.d_chi,
            self.d_theta_a[0],
            self.d_theta_a[1],
            self.d_theta_a[2],
            self.d_theta_a[3],
            self.alpha,
            self.delta,
            self.d_theta_b[0],
            self.d_theta_b[1],
        ]
    }

    pub fn from_array(v: [f64; N_PARAMS]) -> Self {
        Self {
            d_xi: v[0],
            d_chi: v[1],
            d_theta_a: [v[2], v[3], v[4], v[5]],
            alpha: v[6],
            delta: v[7],
            d_theta_b: [v[8], v[9]],
        }
    }

    pub fn d_theta_a_for(&self, state: Bb84State) -> f64 {
        match state {
            Bb84State::H => self.d_theta_a[0],
            Bb84State::D => self.d_theta_a[1],
            Bb84State::V => self.d_theta_a[2],
            Bb84State::A => self.d_theta_a[3],
        }
    }

    pub fn d_theta_b_for(&self, basis: SiftBasis) -> f64 {
        match basis {
            SiftBasis::HV => self.d_theta_b[0],
            SiftBasis::DA => self.d_theta_b[1],
        }
    }

    /// Representative with `alpha >= 0`.
    ///
    /// Every analyzer and readout ket is real, so conjugating the whole
    /// circuit leaves all outcome probabilities unchanged. Conjugation maps
    /// `(d_xi, d_chi, alpha, delta)` to their negatives.
    pub fn canonical(&self) -> Self {
        if self.alpha >= 0.0 {
            return *self;
        }
        Self {
            d_xi: -self.d_xi,
            d_chi: -self.d_chi,
            alpha: -self.alpha,
            delta: -self.delta,
            ..*self
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Outcome probabilities of one configuration, ordered by (Bob bit, Eve
/// bit) as `(1,0), (1,1), (0,1), (0,0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeProbs(pub [f64; 4]);

/// Cell order shared by outcome probabilities and count records.
pub const CELL_ORDER: [(usize, usize); 4] = [(1, 0), (1, 1), (0, 1), (0, 0)];

/// Position of the `(bob_bit, eve_bit)` cell in [`CELL_ORDER`].
pub fn cell_index(bob_bit: usize, eve_bit: usize) -> usize {
    match (bob_bit, eve_bit) {
        (1, 0) => 0,
        (1, 1) => 1,
        (0, 1) => 2,
        (0, 0) => 3,
        _ => panic!("bits must be 0 or 1, got ({bob_bit}, {eve_bit})"),
    }
}

impl OutcomeProbs {
    pub fn get(&self, bob_bit: usize, eve_bit: usize) -> f64 {
        self.0[cell_index(bob_bit, eve_bit)]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// `cos(theta_in)|0> + e^{i d_xi} sin(theta_in)|1>`.
pub fn nonideal_probe_state(cfg: &ProbeConfig, d_xi: f64) -> StateVec2 {
    let theta = cfg.theta_in();
    StateVec2::new(
        Complex64::new(theta.cos(), 0.0),
        Complex64::from_polar(theta.sin(), d_xi),
    )
}

/// `cos(theta_A + d_theta)|0>_C + e^{i d_chi} sin(theta_A + d_theta)|1>_C`.
pub fn nonideal_alice_state(alice: Bb84State, d_theta: f64, d_chi: f64) -> StateVec2 {
    let theta = alice.control_angle() + d_theta;
    StateVec2::new(
        Complex64::new(theta.cos(), 0.0),
        Complex64::from_polar(theta.sin(), d_chi),
    )
}

/// Polarization-controlled NOT with imbalance `alpha` and phase `delta`;
/// reduces to the ideal CNOT at `(0, 0)`.
pub fn nonideal_pcnot(alpha: f64, delta: f64) -> Unitary4 {
    let c = Complex64::new(alpha.cos(), 0.0);
    let s = alpha.sin();
    let i = Complex64::i();
    let plus = i * Complex64::from_polar(s, delta);
    let minus = i * Complex64::from_polar(s, -delta);
    let zero = Complex64::new(0.0, 0.0);
    Unitary4::new_unchecked([
        [c, minus, zero, zero],
        [plus, c, zero, zero],
        [zero, zero, -plus, c],
        [zero, zero, c, -minus],
    ])
}

/// Bob's analyzed states `[bit 0, bit 1]` in the control frame, for an
/// analyzer set at `nominal(basis) + d_theta_b` (nominal +-22.5 degrees).
pub fn bob_analyzer(basis: SiftBasis, d_theta_b: f64) -> [StateVec2; 2] {
    let nominal = match basis {
        SiftBasis::HV => FRAC_PI_8,
        SiftBasis::DA => -FRAC_PI_8,
    };
    let theta = nominal + d_theta_b;
    let (s, c) = theta.sin_cos();
    [StateVec2::real(c, -s), StateVec2::real(s, c)]
}

/// Outcome probabilities for one (Alice state, Bob basis, pe) setting.
pub fn predict_outcome_probs(
    params: &ErrorModelParams,
    alice: Bb84State,
    bob_basis: SiftBasis,
    cfg: &ProbeConfig,
) -> Result<OutcomeProbs> {
    let input = qmath::tensor(
        &nonideal_alice_state(alice, params.d_theta_a_for(alice), params.d_chi),
        &nonideal_probe_state(cfg, params.d_xi),
    );
    let out = qmath::apply_unitary(&nonideal_pcnot(params.alpha, params.delta), &input)?;
    let bob = bob_analyzer(bob_basis, params.d_theta_b_for(bob_basis));
    let mut probs = [0.0; 4];
    for (slot, &(b, e)) in probs.iter_mut().zip(CELL_ORDER.iter()) {
        *slot = qmath::overlap_prob(&out, &bob[b], &StateVec2::basis(e));
    }
    Ok(OutcomeProbs(probs))
}

/// Bob/Eve joint distribution on error-free sifts under the model, Alice's
/// two basis states equiprobable.
pub fn model_joint_distribution(
    params: &ErrorModelParams,
    basis: SiftBasis,
    cfg: &ProbeConfig,
) -> Result<JointDistribution> {
    let mut raw = [[0.0; 2]; 2];
    for alice in basis.states() {
        let probs = predict_outcome_probs(params, alice, basis, cfg)?;
        let b = alice.bit();
        for (e, cell) in raw[b].iter_mut().enumerate() {
            *cell = probs.get(b, e);
        }
    }
    JointDistribution::from_weights(raw)
}

/// Renyi information Eve obtains under the model.
pub fn model_renyi(params: &ErrorModelParams, basis: SiftBasis, cfg: &ProbeConfig) -> Result<f64> {
    Ok(probe::renyi_information(&model_joint_distribution(
        params, basis, cfg,
    )?))
}

/// Fraction of sift events on which Bob's bit differs from Alice's,
/// averaged over Alice's two states.
pub fn model_sifted_error_rate(
    params: &ErrorModelParams,
    basis: SiftBasis,
    cfg: &ProbeConfig,
) -> Result<f64> {
    let mut acc = 0.0;
    for alice in basis.states() {
        let probs = predict_outcome_probs(params, alice, basis, cfg)?;
        let wrong = 1 - alice.bit();
        acc += (probs.get(wrong, 0) + probs.get(wrong, 1)) / probs.total();
    }
    Ok(acc / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{control_frame, renyi_closed_form};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn cfg(pe: f64) -> ProbeConfig {
        ProbeConfig::new(pe).unwrap()
    }

    #[test]
    fn probe_state_phase() {
        let s = nonideal_probe_state(&cfg(0.1), 0.0);
        assert_abs_diff_eq!(s.a0().re, 0.948683, epsilon = 1e-6);
        assert_abs_diff_eq!(s.a1().re, 0.316228, epsilon = 1e-6);
        assert_eq!(s.a1().im, 0.0);
        let s = nonideal_probe_state(&cfg(0.1), FRAC_PI_2);
        assert_abs_diff_eq!(s.a1().re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.a1().im, 1.0 / 10f64.sqrt(), epsilon = 1e-12);
        for phi in [-1.0, 0.3, 2.0] {
            assert_abs_diff_eq!(
                nonideal_probe_state(&cfg(0.2), phi).norm_sqr(),
                1.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn alice_state_offsets() {
        let d = nonideal_alice_state(Bb84State::D, 0.0, 0.0);
        assert_eq!(d, control_frame(Bb84State::D));
        let h = nonideal_alice_state(Bb84State::H, 3.2f64.to_radians(), 0.0);
        let theta = (-19.3f64).to_radians();
        assert_abs_diff_eq!(h.a0().re, theta.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(h.a1().re, theta.sin(), epsilon = 1e-12);
        for s in Bb84State::ALL {
            assert_abs_diff_eq!(
                nonideal_alice_state(s, 0.1, -0.7).norm_sqr(),
                1.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn pcnot_reduces_to_cnot() {
        assert_eq!(nonideal_pcnot(0.0, 0.0), Unitary4::cnot());
        let u = nonideal_pcnot(12.3f64.to_radians(), 3.6f64.to_radians());
        assert!(u.unitarity_deviation() < 1e-12);
    }

    #[test]
    fn pcnot_full_imbalance() {
        // alpha = pi/2: the control-0 block is i times a bit flip.
        let u = nonideal_pcnot(FRAC_PI_2, 0.0);
        let e = u.entries();
        let i = Complex64::i();
        assert_abs_diff_eq!(e[0][0].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((e[0][1] - i).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((e[1][0] - i).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e[1][1].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn analyzer_nominal_states() {
        let [h, v] = bob_analyzer(SiftBasis::HV, 0.0);
        assert_abs_diff_eq!(
            (h.a0() - control_frame(Bb84State::H).a0()).norm(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            (h.a1() - control_frame(Bb84State::H).a1()).norm(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            v.inner(&control_frame(Bb84State::V)).norm(),
            1.0,
            epsilon = 1e-15
        );
        let [d, a] = bob_analyzer(SiftBasis::DA, 0.0);
        assert_abs_diff_eq!(
            d.inner(&control_frame(Bb84State::D)).re,
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            a.inner(&control_frame(Bb84State::A)).re,
            1.0,
            epsilon = 1e-15
        );

        // Offset -1.8 deg moves the HV analyzer to 20.7 deg.
        let [h, _] = bob_analyzer(SiftBasis::HV, (-1.8f64).to_radians());
        let theta = 20.7f64.to_radians();
        assert_abs_diff_eq!(h.a0().re, theta.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(h.a1().re, -theta.sin(), epsilon = 1e-12);
    }

    #[test]
    fn ideal_expected_rows() {
        let z = ErrorModelParams::zero();
        let p = predict_outcome_probs(&z, Bb84State::D, SiftBasis::DA, &cfg(0.1)).unwrap();
        for (x, e) in p.0.iter().zip([0.050, 0.050, 0.167, 0.733]) {
            assert_abs_diff_eq!(*x, e, epsilon = 5e-4);
        }
        let p = predict_outcome_probs(&z, Bb84State::A, SiftBasis::DA, &cfg(1.0 / 3.0)).unwrap();
        for (x, e) in p.0.iter().zip([0.0, 0.667, 0.167, 0.167]) {
            assert_abs_diff_eq!(*x, e, epsilon = 5e-4);
        }
    }

    #[test]
    fn reference_fit_tracks_measured_row() {
        let p = predict_outcome_probs(
            &ErrorModelParams::reference_fit(),
            Bb84State::D,
            SiftBasis::DA,
            &cfg(0.1),
        )
        .unwrap();
        for (x, e) in p.0.iter().zip([0.058, 0.086, 0.196, 0.661]) {
            assert!((x - e).abs() < 0.05, "{x} vs {e}");
        }
    }

    #[test]
    fn zero_params_renyi_is_closed_form() {
        for k in 0..=20 {
            let pe = k as f64 / 60.0;
            for basis in SiftBasis::ALL {
                let r = model_renyi(&ErrorModelParams::zero(), basis, &cfg(pe)).unwrap();
                assert_abs_diff_eq!(r, renyi_closed_form(pe).unwrap(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn reference_fit_renyi() {
        let fit = ErrorModelParams::reference_fit();
        let mean = (model_renyi(&fit, SiftBasis::HV, &cfg(1.0 / 3.0)).unwrap()
            + model_renyi(&fit, SiftBasis::DA, &cfg(1.0 / 3.0)).unwrap())
            / 2.0;
        assert!((mean - 0.90).abs() <= 0.07, "mean I_R at 1/3 = {mean}");
        for basis in SiftBasis::ALL {
            assert!(model_renyi(&fit, basis, &cfg(0.0)).unwrap() > 0.0);
        }
    }

    #[test]
    fn canonical_preserves_predictions() {
        let fit = ErrorModelParams::reference_fit();
        let mirrored = ErrorModelParams {
            d_xi: -fit.d_xi,
            d_chi: -fit.d_chi,
            alpha: -fit.alpha,
            delta: -fit.delta,
            ..fit
        };
        assert_eq!(mirrored.canonical(), fit);
        for s in Bb84State::ALL {
            for b in SiftBasis::ALL {
                let p = predict_outcome_probs(&fit, s, b, &cfg(0.1)).unwrap();
                let q = predict_outcome_probs(&mirrored, s, b, &cfg(0.1)).unwrap();
                for (x, y) in p.0.iter().zip(q.0.iter()) {
                    assert_abs_diff_eq!(x, y, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn degree_round_trip() {
        let fit = ErrorModelParams::reference_fit();
        let deg = fit.to_degrees();
        assert_abs_diff_eq!(deg[6], 12.3, epsilon = 1e-12);
        assert_abs_diff_eq!(deg[8], -1.8, epsilon = 1e-12);
        assert_eq!(fit.d_theta_a_for(Bb84State::V), (-0.7f64).to_radians());
    }
}
