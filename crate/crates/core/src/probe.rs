//! The ideal CNOT entangling probe against BB84.
//!
//! Eve's CNOT uses a control basis rotated by pi/8 from the H-V basis, so
//! every BB84 polarization is a real ket `cos(theta_A)|0>_C + sin(theta_A)|1>_C`
//! in that frame. Her probe (the CNOT target) is prepared according to the
//! error probability she is willing to induce, and she reads it out in the
//! computational basis after Alice and Bob reveal their bases.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FpbError, Result};
use crate::qmath::{self, StateVec2, StateVec4, Unitary4};

/// Upper bound of the error probability the probe is designed for.
pub const PE_MAX: f64 = 0.5;

/// Above this the eavesdropper already has full information.
pub const PE_FULL_INFORMATION: f64 = 1.0 / 3.0;

/// One of the four BB84 polarization states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bb84State {
    H,
    V,
    D,
    A,
}

impl Bb84State {
    pub const ALL: [Bb84State; 4] = [Bb84State::H, Bb84State::V, Bb84State::D, Bb84State::A];

    /// Polar angle in the CNOT control frame, radians.
    pub fn control_angle(self) -> f64 {
        match self {
            Bb84State::H => -FRAC_PI_8,
            Bb84State::D => FRAC_PI_8,
            Bb84State::V => 3.0 * FRAC_PI_8,
            Bb84State::A => 5.0 * FRAC_PI_8,
        }
    }

    pub fn basis(self) -> SiftBasis {
        match self {
            Bb84State::H | Bb84State::V => SiftBasis::HV,
            Bb84State::D | Bb84State::A => SiftBasis::DA,
        }
    }

    /// Key bit encoded by this state within its own basis (H, D -> 0).
    pub fn bit(self) -> usize {
        match self {
            Bb84State::H | Bb84State::D => 0,
            Bb84State::V | Bb84State::A => 1,
        }
    }

    /// The state carrying the complementary bit in the same basis.
    pub fn partner(self) -> Bb84State {
        match self {
            Bb84State::H => Bb84State::V,
            Bb84State::V => Bb84State::H,
            Bb84State::D => Bb84State::A,
            Bb84State::A => Bb84State::D,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Bb84State::H => "H",
            Bb84State::V => "V",
            Bb84State::D => "D",
            Bb84State::A => "A",
        }
    }
}

impl fmt::Display for Bb84State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Bb84State {
    type Err = FpbError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" => Ok(Bb84State::H),
            "V" | "v" => Ok(Bb84State::V),
            "D" | "d" => Ok(Bb84State::D),
            "A" | "a" => Ok(Bb84State::A),
            other => Err(FpbError::InvalidArgument(format!(
                "unknown BB84 state '{other}' (expected H, V, D or A)"
            ))),
        }
    }
}

/// Measurement basis shared by Alice and Bob on a sift event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SiftBasis {
    HV,
    DA,
}

impl SiftBasis {
    pub const ALL: [SiftBasis; 2] = [SiftBasis::HV, SiftBasis::DA];

    /// `[bit-0 state, bit-1 state]`.
    pub fn states(self) -> [Bb84State; 2] {
        match self {
            SiftBasis::HV => [Bb84State::H, Bb84State::V],
            SiftBasis::DA => [Bb84State::D, Bb84State::A],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SiftBasis::HV => "HV",
            SiftBasis::DA => "DA",
        }
    }
}

impl fmt::Display for SiftBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SiftBasis {
    type Err = FpbError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HV" => Ok(SiftBasis::HV),
            "DA" => Ok(SiftBasis::DA),
            other => Err(FpbError::InvalidArgument(format!(
                "unknown basis '{other}' (expected HV or DA)"
            ))),
        }
    }
}

/// Probe design parameters derived from the target error probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pe: f64,
    c: f64,
    s: f64,
    theta_in: f64,
}

impl ProbeConfig {
    pub fn new(pe: f64) -> Result<Self> {
        if !(0.0..=PE_MAX).contains(&pe) {
            return Err(FpbError::PeOutOfRange(pe));
        }
        let c = (1.0 - 2.0 * pe).sqrt();
        let s = (2.0 * pe).sqrt();
        let theta_in = (c - s).atan2(c + s);
        Ok(Self { pe, c, s, theta_in })
    }

    pub fn pe(&self) -> f64 {
        self.pe
    }

    /// `sqrt(1 - 2 pe)`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// `sqrt(2 pe)`.
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Probe preparation angle: `cos(theta_in) = (C + S) / sqrt 2`.
    pub fn theta_in(&self) -> f64 {
        self.theta_in
    }
}

/// Unnormalized probe output components.
///
/// `t0`/`t1` accompany an error-free sift of bit 0/1, `te` an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTriple {
    pub t0: StateVec2,
    pub t1: StateVec2,
    pub te: StateVec2,
}

/// Joint distribution of Bob's and Eve's bits on error-free sift events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    /// `p[b][e]`.
    pub p: [[f64; 2]; 2],
    pub prior_b: [f64; 2],
    pub prior_e: [f64; 2],
}

impl JointDistribution {
    /// Normalizes a nonnegative 2x2 table indexed `[b][e]`.
    pub fn from_weights(raw: [[f64; 2]; 2]) -> Result<Self> {
        if raw.iter().flatten().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(FpbError::DegenerateDistribution(format!(
                "table entries must be finite and nonnegative: {raw:?}"
            )));
        }
        let total: f64 = raw.iter().flatten().sum();
        if total < 1e-15 {
            return Err(FpbError::DegenerateDistribution(
                "error-free sift events have zero probability".into(),
            ));
        }
        let p = raw.map(|row| row.map(|x| x / total));
        let prior_b = [p[0][0] + p[0][1], p[1][0] + p[1][1]];
        let prior_e = [p[0][0] + p[1][0], p[0][1] + p[1][1]];
        Ok(Self {
            p,
            prior_b,
            prior_e,
        })
    }

    /// `P(b | e)`, or `None` when `P(e) = 0`.
    pub fn conditional_b_given_e(&self, b: usize, e: usize) -> Option<f64> {
        let pe = self.prior_e[e];
        (pe > 0.0).then(|| self.p[b][e] / pe)
    }

    /// Probability that Eve's bit differs from Bob's.
    pub fn disagreement(&self) -> f64 {
        self.p[0][1] + self.p[1][0]
    }
}

/// Kets of the BB84 states in the CNOT control frame.
pub fn control_frame(state: Bb84State) -> StateVec2 {
    StateVec2::from_angle(state.control_angle())
}

/// Eve's initial probe `((C+S)|0>_T + (C-S)|1>_T) / sqrt 2`.
pub fn probe_state(cfg: &ProbeConfig) -> StateVec2 {
    StateVec2::real(
        (cfg.c + cfg.s) * FRAC_1_SQRT_2,
        (cfg.c - cfg.s) * FRAC_1_SQRT_2,
    )
}

pub fn target_triple(cfg: &ProbeConfig) -> TargetTriple {
    let a = cfg.c * FRAC_1_SQRT_2;
    let b = cfg.s / 2.0;
    TargetTriple {
        t0: StateVec2::real(a + b, a - b),
        t1: StateVec2::real(a - b, a + b),
        te: StateVec2::real(b, -b),
    }
}

/// Joint state after Eve's ideal CNOT acts on Alice's photon and the probe.
pub fn attack_output(alice: Bb84State, cfg: &ProbeConfig) -> StateVec4 {
    let input = qmath::tensor(&control_frame(alice), &probe_state(cfg));
    qmath::apply_unitary(&Unitary4::cnot(), &input).expect("ideal CNOT is unitary")
}

/// Closed-form decomposition of [`attack_output`]: the sent polarization
/// paired with `T0`/`T1`, plus the complementary polarization paired
/// with `TE` (with a minus sign in the diagonal basis).
pub fn analytic_attack_output(alice: Bb84State, cfg: &ProbeConfig) -> StateVec4 {
    let t = target_triple(cfg);
    let keep = match alice.bit() {
        0 => t.t0,
        _ => t.t1,
    };
    let same = qmath::tensor(&control_frame(alice), &keep);
    let flipped = qmath::tensor(&control_frame(alice.partner()), &t.te);
    match alice.basis() {
        SiftBasis::HV => same.add(&flipped),
        SiftBasis::DA => same.sub(&flipped),
    }
}

/// Probability that Bob, measuring in Alice's basis, reads the wrong bit.
pub fn error_probability(alice: Bb84State, cfg: &ProbeConfig) -> f64 {
    let out = attack_output(alice, cfg);
    let wrong = control_frame(alice.partner());
    (0..2)
        .map(|e| qmath::overlap_prob(&out, &wrong, &StateVec2::basis(e)))
        .sum()
}

/// Bob/Eve joint distribution on error-free sift events in `basis`, with
/// Alice's two states equiprobable.
pub fn sift_joint_distribution(basis: SiftBasis, cfg: &ProbeConfig) -> Result<JointDistribution> {
    let mut raw = [[0.0; 2]; 2];
    for alice in basis.states() {
        let out = attack_output(alice, cfg);
        let bob = control_frame(alice);
        let b = alice.bit();
        for (e, cell) in raw[b].iter_mut().enumerate() {
            *cell = qmath::overlap_prob(&out, &bob, &StateVec2::basis(e));
        }
    }
    JointDistribution::from_weights(raw)
}

/// Order-2 Renyi information (bits) Eve holds about Bob's bit.
///
/// Terms with `P(e) = 0` contribute nothing.
pub fn renyi_information(dist: &JointDistribution) -> f64 {
    let collision_b: f64 = dist.prior_b.iter().map(|p| p * p).sum();
    let mut info = -collision_b.log2();
    for e in 0..2 {
        let pe = dist.prior_e[e];
        if pe <= 0.0 {
            continue;
        }
        let collision: f64 = (0..2)
            .map(|b| {
                let q = dist.p[b][e] / pe;
                q * q
            })
            .sum();
        info += pe * collision.log2();
    }
    info
}

/// `log2(1 + 4 pe (1 - 2 pe) / (1 - pe)^2)`.
pub fn renyi_closed_form(pe: f64) -> Result<f64> {
    if !(0.0..=PE_MAX).contains(&pe) {
        return Err(FpbError::PeOutOfRange(pe));
    }
    if pe > PE_FULL_INFORMATION + 1e-12 {
        log::warn!("pe = {pe} is above 1/3, beyond the probe's useful operating range");
    }
    let q = 1.0 - pe;
    Ok((1.0 + 4.0 * pe * (1.0 - 2.0 * pe) / (q * q)).log2())
}
