//! Two-qubit superdense coding, the discrete counterpart of the lidar
//! protocol (see the table in [`crate::bsi`]).
//!
//! Basis order is `|00>, |01>, |10>, |11>` with qubit A first.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const TOL: f64 = 1e-12;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    amplitudes: DVector<C64>,
}

impl TwoQubitState {
    pub fn new(amplitudes: [C64; 4]) -> Result<Self> {
        let v = DVector::from_row_slice(&amplitudes);
        if (v.norm() - 1.0).abs() > TOL {
            return Err(Error::InvalidParams(format!("state norm {} is not 1", v.norm())));
        }
        Ok(TwoQubitState { amplitudes: v })
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    /// Probability that qubit A is found in `|->`.
    pub fn prob_a_minus(&self) -> f64 {
        let a = &self.amplitudes;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // components of (<-| (x) I) psi for B = 0 and B = 1
        ((a[0] - a[2]) * s).norm_sqr() + ((a[1] - a[3]) * s).norm_sqr()
    }

    /// Probability that qubit B is found in `|1>`.
    pub fn prob_b_one(&self) -> f64 {
        self.amplitudes[1].norm_sqr() + self.amplitudes[3].norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitGate {
    unitary: DMatrix<C64>,
}

fn pauli_x() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

fn pauli_z() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

fn power(m: DMatrix<C64>, bit: u8) -> DMatrix<C64> {
    if bit == 1 {
        m
    } else {
        DMatrix::identity(2, 2)
    }
}

impl TwoQubitGate {
    pub fn new(unitary: DMatrix<C64>) -> Result<Self> {
        if unitary.shape() != (4, 4) {
            return Err(Error::DimensionMismatch(format!("gate is {:?}, expected 4x4", unitary.shape())));
        }
        let err = (unitary.adjoint() * &unitary - DMatrix::<C64>::identity(4, 4))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if err > TOL {
            return Err(Error::InvalidParams(format!("gate is not unitary (error {err:e})")));
        }
        Ok(TwoQubitGate { unitary })
    }

    fn local(a: DMatrix<C64>, b: DMatrix<C64>) -> Self {
        TwoQubitGate { unitary: a.kronecker(&b) }
    }

    /// Control A, target B.
    pub fn cnot_ab() -> Self {
        let mut u = DMatrix::zeros(4, 4);
        for (row, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            u[(row, col)] = c(1.0);
        }
        TwoQubitGate { unitary: u }
    }

    pub fn z_a() -> Self {
        Self::local(pauli_z(), DMatrix::identity(2, 2))
    }

    pub fn x_a() -> Self {
        Self::local(pauli_x(), DMatrix::identity(2, 2))
    }

    pub fn x_b() -> Self {
        Self::local(DMatrix::identity(2, 2), pauli_x())
    }

    /// Alice's encoding `Z_A^b2 X_A^b1`.
    pub fn encoding(b1: u8, b2: u8) -> Self {
        Self::local(power(pauli_z(), b2) * power(pauli_x(), b1), DMatrix::identity(2, 2))
    }

    pub fn unitary(&self) -> &DMatrix<C64> {
        &self.unitary
    }

    /// `self` after `first`.
    pub fn after(&self, first: &TwoQubitGate) -> Self {
        TwoQubitGate { unitary: &self.unitary * &first.unitary }
    }

    pub fn apply(&self, s: &TwoQubitState) -> TwoQubitState {
        TwoQubitState { amplitudes: &self.unitary * &s.amplitudes }
    }
}

fn check_bits(b1: u8, b2: u8) -> Result<()> {
    if b1 > 1 || b2 > 1 {
        return Err(Error::InvalidParams(format!("bits must be 0 or 1, got ({b1}, {b2})")));
    }
    Ok(())
}

/// Outcome of one protocol run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdcOutcome {
    pub bits: (u8, u8),
    /// `(P(B = 1), P(A = -))`; each is 0 or 1 for a deterministic decode.
    pub probabilities: (f64, f64),
}

/// Prepare `|+>|0>`, CNOT, encode, CNOT, then read B in the computational
/// basis (giving `b1`) and A in the `+/-` basis (giving `b2`).
pub fn sdc_run(b1: u8, b2: u8) -> Result<SdcOutcome> {
    check_bits(b1, b2)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let start = TwoQubitState::new([c(s), c(0.0), c(s), c(0.0)])?;
    let cnot = TwoQubitGate::cnot_ab();
    let out = cnot.apply(&TwoQubitGate::encoding(b1, b2).apply(&cnot.apply(&start)));
    let (p1, p2) = (out.prob_b_one(), out.prob_a_minus());
    Ok(SdcOutcome {
        bits: (u8::from(p1 > 0.5), u8::from(p2 > 0.5)),
        probabilities: (p1, p2),
    })
}

pub fn sdc_encode_decode(b1: u8, b2: u8) -> Result<(u8, u8)> {
    Ok(sdc_run(b1, b2)?.bits)
}

/// `max |CNOT (Z^b2 X^b1 (x) I) CNOT - e^{i phi} (Z^b2 X^b1) (x) X^b1|` with
/// `phi` taken from the largest-magnitude entry.
pub fn sdc_operator_identity(b1: u8, b2: u8) -> Result<f64> {
    check_bits(b1, b2)?;
    let cnot = TwoQubitGate::cnot_ab();
    let lhs = cnot.after(&TwoQubitGate::encoding(b1, b2).after(&cnot));
    let rhs = TwoQubitGate::local(power(pauli_z(), b2) * power(pauli_x(), b1), power(pauli_x(), b1));
    let (lu, ru) = (lhs.unitary(), rhs.unitary());
    let k = ru
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
        .map(|(k, _)| k)
        .expect("nonempty matrix");
    let ratio = lu[k] / ru[k];
    let phase = ratio / ratio.norm();
    Ok((lu - ru * phase).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIRS: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

    #[test]
    fn gates_are_unitary() {
        for g in [TwoQubitGate::cnot_ab(), TwoQubitGate::z_a(), TwoQubitGate::x_a(), TwoQubitGate::x_b()] {
            assert!(TwoQubitGate::new(g.unitary().clone()).is_ok());
        }
        let bad = DMatrix::from_element(4, 4, c(0.5));
        assert!(TwoQubitGate::new(bad).is_err());
    }

    #[test]
    fn decodes_all_pairs_deterministically() {
        for (b1, b2) in PAIRS {
            let out = sdc_run(b1, b2).unwrap();
            assert_eq!(out.bits, (b1, b2));
            let (p1, p2) = out.probabilities;
            assert!((p1 - b1 as f64).abs() < 1e-12 && (p2 - b2 as f64).abs() < 1e-12);
        }
        assert_eq!(sdc_encode_decode(0, 0).unwrap(), (0, 0));
        assert!(sdc_encode_decode(2, 0).is_err());
    }

    #[test]
    fn operator_identity_holds() {
        assert_eq!(sdc_operator_identity(0, 0).unwrap(), 0.0);
        for (b1, b2) in PAIRS {
            assert!(sdc_operator_identity(b1, b2).unwrap() < 1e-12);
        }
        let xx = TwoQubitGate::x_a().after(&TwoQubitGate::x_b());
        let cnot = TwoQubitGate::cnot_ab();
        assert_eq!(cnot.after(&TwoQubitGate::x_a().after(&cnot)), xx);
    }

    #[test]
    fn state_norm_is_checked() {
        assert!(TwoQubitState::new([c(1.0), c(1.0), c(0.0), c(0.0)]).is_err());
    }
}
