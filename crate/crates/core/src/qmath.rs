//! Complex linear algebra for one- and two-qubit pure states.
//!
//! Two-qubit amplitudes are ordered control-major: index `2 * c + t`, i.e.
//! `|0>_C|0>_T, |0>_C|1>_T, |1>_C|0>_T, |1>_C|1>_T`.

use num_complex::Complex64;

use crate::error::{FpbError, Result};

/// A complex probability amplitude.
pub type ComplexAmp = Complex64;

/// Tolerance used by [`Unitary4::new`] for `U^dagger U = I`.
pub const UNITARITY_TOL: f64 = 1e-12;

/// Tolerance used when comparing states up to a global phase.
pub const PHASE_EQ_TOL: f64 = 1e-9;

const ZERO: ComplexAmp = Complex64::new(0.0, 0.0);
const ONE: ComplexAmp = Complex64::new(1.0, 0.0);

/// Single-qubit ket on an ordered two-element basis.
///
/// Not necessarily normalized: the probe output components carry their
/// physical weight in the norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVec2(pub [ComplexAmp; 2]);

impl StateVec2 {
    pub fn new(a0: ComplexAmp, a1: ComplexAmp) -> Self {
        Self([a0, a1])
    }

    pub fn real(a0: f64, a1: f64) -> Self {
        Self([Complex64::new(a0, 0.0), Complex64::new(a1, 0.0)])
    }

    /// `cos(theta)|0> + sin(theta)|1>`.
    pub fn from_angle(theta: f64) -> Self {
        Self::real(theta.cos(), theta.sin())
    }

    /// Computational basis ket `|bit>`.
    pub fn basis(bit: usize) -> Self {
        match bit {
            0 => Self([ONE, ZERO]),
            1 => Self([ZERO, ONE]),
            _ => panic!("qubit basis index must be 0 or 1, got {bit}"),
        }
    }

    pub fn a0(&self) -> ComplexAmp {
        self.0[0]
    }

    pub fn a1(&self) -> ComplexAmp {
        self.0[1]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVec2) -> ComplexAmp {
        self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1]
    }

    pub fn scale(&self, k: ComplexAmp) -> Self {
        Self([self.0[0] * k, self.0[1] * k])
    }

    pub fn add(&self, other: &StateVec2) -> Self {
        Self([self.0[0] + other.0[0], self.0[1] + other.0[1]])
    }

    /// Returns a unit-norm copy. Zero vectors are returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            *self
        } else {
            self.scale(Complex64::new(1.0 / n, 0.0))
        }
    }
}

/// Joint control-target ket, control-major ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVec4(pub [ComplexAmp; 4]);

impl StateVec4 {
    pub fn amplitudes(&self) -> &[ComplexAmp; 4] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn add(&self, other: &StateVec4) -> Self {
        let mut out = self.0;
        for (o, b) in out.iter_mut().zip(other.0.iter()) {
            *o += b;
        }
        Self(out)
    }

    pub fn sub(&self, other: &StateVec4) -> Self {
        let mut out = self.0;
        for (o, b) in out.iter_mut().zip(other.0.iter()) {
            *o -= b;
        }
        Self(out)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVec4) -> ComplexAmp {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Largest per-amplitude deviation from `other` after removing the
    /// global phase that best aligns the two states.
    pub fn phase_aligned_distance(&self, other: &StateVec4) -> f64 {
        let overlap = self.inner(other);
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        // phase = e^{i phi} with <self|other> real and nonnegative after
        // multiplying self by it.
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a * phase - b).norm())
            .fold(0.0, f64::max)
    }

    /// Equality up to global phase within [`PHASE_EQ_TOL`] per amplitude.
    pub fn approx_eq_up_to_phase(&self, other: &StateVec4) -> bool {
        self.phase_aligned_distance(other) <= PHASE_EQ_TOL
    }
}

/// 4x4 unitary acting on a [`StateVec4`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary4 {
    entries: [[ComplexAmp; 4]; 4],
}

impl Unitary4 {
    /// Builds a unitary, rejecting matrices that fail `U^dagger U = I`
    /// entrywise within [`UNITARITY_TOL`].
    pub fn new(entries: [[ComplexAmp; 4]; 4]) -> Result<Self> {
        let deviation = unitarity_deviation(&entries);
        if deviation > UNITARITY_TOL {
            return Err(FpbError::NotUnitary { deviation });
        }
        Ok(Self { entries })
    }

    /// Wraps entries without checking unitarity.
    pub fn new_unchecked(entries: [[ComplexAmp; 4]; 4]) -> Self {
        Self { entries }
    }

    pub fn identity() -> Self {
        let mut e = [[ZERO; 4]; 4];
        for (i, row) in e.iter_mut().enumerate() {
            row[i] = ONE;
        }
        Self { entries: e }
    }

    /// Ideal CNOT: identity on control 0, bit flip of the target on control 1.
    pub fn cnot() -> Self {
        let mut e = [[ZERO; 4]; 4];
        e[0][0] = ONE;
        e[1][1] = ONE;
        e[2][3] = ONE;
        e[3][2] = ONE;
        Self { entries: e }
    }

    pub fn entries(&self) -> &[[ComplexAmp; 4]; 4] {
        &self.entries
    }

    /// Max entrywise deviation of `U^dagger U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.entries)
    }
}

fn unitarity_deviation(u: &[[ComplexAmp; 4]; 4]) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = ZERO;
            for row in u.iter() {
                acc += row[i].conj() * row[j];
            }
            let target = if i == j { ONE } else { ZERO };
            let dev = (acc - target).norm();
            if !dev.is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max(dev);
        }
    }
    worst
}

/// `control ⊗ target` with `out[2c + t] = control[c] * target[t]`.
pub fn tensor(control: &StateVec2, target: &StateVec2) -> StateVec4 {
    let mut out = [ZERO; 4];
    for c in 0..2 {
        for t in 0..2 {
            out[2 * c + t] = control.0[c] * target.0[t];
        }
    }
    StateVec4(out)
}

/// Matrix-vector product `u |psi>`. Non-unitary `u` is rejected.
pub fn apply_unitary(u: &Unitary4, psi: &StateVec4) -> Result<StateVec4> {
    let deviation = u.unitarity_deviation();
    if deviation > UNITARITY_TOL {
        return Err(FpbError::NotUnitary { deviation });
    }
    Ok(apply_unchecked(u, psi))
}

pub(crate) fn apply_unchecked(u: &Unitary4, psi: &StateVec4) -> StateVec4 {
    let mut out = [ZERO; 4];
    for (o, row) in out.iter_mut().zip(u.entries.iter()) {
        *o = row.iter().zip(psi.0.iter()).map(|(m, a)| m * a).sum();
    }
    StateVec4(out)
}

/// `|(<c| ⊗ <t|) |psi>|^2`.
pub fn overlap_prob(psi: &StateVec4, bra_control: &StateVec2, bra_target: &StateVec2) -> f64 {
    let bra = tensor(bra_control, bra_target);
    bra.inner(psi).norm_sqr()
}
