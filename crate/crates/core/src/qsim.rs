//! Single-qubit statevector simulator.
//!
//! Just enough quantum mechanics for a superposition QRNG: prepare `|0⟩`,
//! apply a Hadamard gate, measure. Measurement draws from an injected
//! [`UniformRealProvider`] that stands in for physical indeterminacy.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use thiserror::Error;

/// Tolerance on `|amp0|² + |amp1|² = 1` accepted from callers.
pub const INPUT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum QsimError {
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
}

/// Source of `u ∈ [0, 1)` consumed by measurement.
pub trait UniformRealProvider {
    fn next_unit(&mut self) -> f64;
}

/// Replays a fixed list of uniforms, then repeats from the start.
#[derive(Debug, Clone)]
pub struct SequenceProvider {
    values: Vec<f64>,
    pos: usize,
}

impl SequenceProvider {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "sequence provider needs at least one value");
        Self { values, pos: 0 }
    }
}

impl UniformRealProvider for SequenceProvider {
    fn next_unit(&mut self) -> f64 {
        let u = self.values[self.pos % self.values.len()];
        self.pos += 1;
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub amp0: Complex64,
    pub amp1: Complex64,
}

impl QubitState {
    pub const ZERO: QubitState = QubitState { amp0: Complex64::new(1.0, 0.0), amp1: Complex64::new(0.0, 0.0) };
    pub const ONE: QubitState = QubitState { amp0: Complex64::new(0.0, 0.0), amp1: Complex64::new(1.0, 0.0) };

    pub fn new(amp0: Complex64, amp1: Complex64) -> Result<Self, QsimError> {
        let state = Self { amp0, amp1 };
        state.check()?;
        Ok(state)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    pub fn prob_zero(&self) -> f64 {
        self.amp0.norm_sqr()
    }

    pub fn prob_one(&self) -> f64 {
        self.amp1.norm_sqr()
    }

    fn check(&self) -> Result<(), QsimError> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > INPUT_NORM_TOLERANCE || !n.is_finite() {
            Err(QsimError::NotNormalized(n))
        } else {
            Ok(())
        }
    }

    pub fn max_abs_diff(&self, other: &QubitState) -> f64 {
        (self.amp0 - other.amp0).norm().max((self.amp1 - other.amp1).norm())
    }
}

/// 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateMatrix(pub [[Complex64; 2]; 2]);

impl GateMatrix {
    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        GateMatrix([[o, z], [z, o]])
    }

    /// `(1/√2)·[[1, 1], [1, −1]]`
    pub fn hadamard() -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        GateMatrix([[h, h], [h, -h]])
    }

    pub fn apply(&self, s: &QubitState) -> QubitState {
        let m = &self.0;
        QubitState { amp0: m[0][0] * s.amp0 + m[0][1] * s.amp1, amp1: m[1][0] * s.amp0 + m[1][1] * s.amp1 }
    }

    pub fn mul(&self, rhs: &GateMatrix) -> GateMatrix {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        GateMatrix(out)
    }

    pub fn adjoint(&self) -> GateMatrix {
        let m = &self.0;
        GateMatrix([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn max_abs_diff(&self, other: &GateMatrix) -> f64 {
        self.0.iter().flatten().zip(other.0.iter().flatten()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.mul(&self.adjoint()).max_abs_diff(&GateMatrix::identity()) <= tol
    }
}

pub fn hadamard(state: &QubitState) -> Result<QubitState, QsimError> {
    state.check()?;
    Ok(GateMatrix::hadamard().apply(state))
}

/// Projective measurement in the computational basis: bit 1 iff `u < |amp1|²`.
pub fn measure<P: UniformRealProvider + ?Sized>(
    state: &QubitState,
    physical: &mut P,
) -> Result<(u8, QubitState), QsimError> {
    state.check()?;
    let u = physical.next_unit();
    if u < state.prob_one() {
        Ok((1, QubitState::ONE))
    } else {
        Ok((0, QubitState::ZERO))
    }
}

/// One QRNG cycle: `H` on `|0⟩`, then measure.
pub fn qrng_bit<P: UniformRealProvider + ?Sized>(physical: &mut P) -> u8 {
    let plus = GateMatrix::hadamard().apply(&QubitState::ZERO);
    let (bit, _) = measure(&plus, physical).expect("H|0> is normalized");
    bit
}
