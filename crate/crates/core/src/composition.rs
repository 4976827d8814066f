//! Composition of process and error matrices.

use crate::error::{invalid, Error, Result};
use crate::error_matrix::{conjugate, w_matrix, Convention, ErrorMatrix};
use crate::linalg::{c, max_abs_diff, Mat, ZERO};
use crate::pauli_basis::product_table;
use crate::process_matrix::ProcessMatrix;

/// Exact composition: `first` acts, then `second`.
pub fn compose_exact(second: &ProcessMatrix, first: &ProcessMatrix) -> Result<ProcessMatrix> {
    if second.n_qubits != first.n_qubits {
        return Err(Error::Dimension { expected: first.d2(), got: second.d2() });
    }
    let n_q = first.n_qubits;
    let d2 = first.d2();
    let table = product_table(n_q);
    let (c1, c2) = (&first.entries, &second.entries);
    let mut out = Mat::zeros(d2, d2);
    // E_p E_m rho E_n^dagger E_q^dagger collapses onto a single pair (a, b).
    for p in 0..d2 {
        for m in 0..d2 {
            let (a, ph_pm) = table[p * d2 + m];
            for q in 0..d2 {
                let x2 = c2[(p, q)];
                if x2 == ZERO {
                    continue;
                }
                let left = x2 * ph_pm;
                for n in 0..d2 {
                    let x1 = c1[(m, n)];
                    if x1 == ZERO {
                        continue;
                    }
                    let (b, ph_qn) = table[q * d2 + n];
                    out[(a, b)] += left * x1 * ph_qn.conj();
                }
            }
        }
    }
    Ok(ProcessMatrix { n_qubits: n_q, entries: out })
}

fn check_aligned(err1: &ErrorMatrix, err2: &ErrorMatrix) -> Result<()> {
    if err1.convention != err2.convention {
        return invalid("error matrices use different conventions");
    }
    if err1.n_qubits() != err2.n_qubits() {
        return Err(Error::Dimension { expected: err1.chi.d2(), got: err2.chi.d2() });
    }
    if max_abs_diff(&err1.reference_unitary, &err2.reference_unitary) > 1e-10 {
        return invalid("error matrices refer to different unitaries; align them with jump_over first");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstOrderRule {
    /// `F2 chi1 + F1 chi2` off the diagonal, interference term on the diagonal.
    Weighted,
    /// `chi1 + chi2 - chi^I`.
    Additive,
}

/// First-order composition of two aligned error matrices. Symmetric in its arguments.
pub fn compose_errors_first_order(err1: &ErrorMatrix, err2: &ErrorMatrix) -> Result<ErrorMatrix> {
    compose_errors_first_order_with(err1, err2, FirstOrderRule::Weighted)
}

pub fn compose_errors_first_order_with(
    err1: &ErrorMatrix,
    err2: &ErrorMatrix,
    rule: FirstOrderRule,
) -> Result<ErrorMatrix> {
    check_aligned(err1, err2)?;
    let (x1, x2) = (&err1.chi.entries, &err2.chi.entries);
    let d2 = x1.nrows();
    let mut out = Mat::zeros(d2, d2);
    match rule {
        FirstOrderRule::Additive => {
            out = x1 + x2;
            out[(0, 0)] -= c(1.0, 0.0);
        }
        FirstOrderRule::Weighted => {
            let (f1, f2) = (err1.fidelity(), err2.fidelity());
            for m in 0..d2 {
                for n in 0..d2 {
                    out[(m, n)] = x1[(m, n)] * f2 + x2[(m, n)] * f1;
                }
            }
            let mut interference = 0.0;
            for n in 1..d2 {
                let t = 2.0 * x1[(0, n)].im * x2[(0, n)].im;
                out[(n, n)] = c(out[(n, n)].re + t, 0.0);
                interference += t;
            }
            out[(0, 0)] = c(f1 * f2 - interference, 0.0);
        }
    }
    Ok(ErrorMatrix {
        chi: ProcessMatrix { n_qubits: err1.n_qubits(), entries: out },
        convention: err1.convention,
        reference_unitary: err1.reference_unitary.clone(),
    })
}

/// Exact fidelity of the composition of two aligned error processes: `sum_mn chi1_mn chi2_mn`.
pub fn composed_fidelity_exact(err1: &ErrorMatrix, err2: &ErrorMatrix) -> Result<f64> {
    check_aligned(err1, err2)?;
    Ok(err1.chi.entries.iter().zip(err2.chi.entries.iter()).map(|(a, b)| a * b).sum::<num_complex::Complex64>().re)
}

/// Moves an after-gate error past the later unitary `u`: `W chi W^dagger`.
pub fn jump_over(err: &ErrorMatrix, u: &Mat) -> Result<ErrorMatrix> {
    if err.convention != Convention::ErrorAfter {
        return invalid("jump_over expects an error_after matrix");
    }
    let w = w_matrix(u)?;
    Ok(ErrorMatrix {
        chi: conjugate(&w, &err.chi),
        convention: Convention::ErrorAfter,
        reference_unitary: u * &err.reference_unitary,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateWithError {
    pub desired: Mat,
    pub error: ErrorMatrix,
}

impl GateWithError {
    pub fn new(desired: Mat, error: ErrorMatrix) -> Result<Self> {
        if error.convention != Convention::ErrorAfter {
            return invalid("gate errors are stored in the error_after convention");
        }
        if max_abs_diff(&desired, &error.reference_unitary) > 1e-10 {
            return invalid("error reference unitary differs from the desired gate");
        }
        Ok(Self { desired, error })
    }

    pub fn perfect(u: Mat) -> Self {
        Self { error: ErrorMatrix::perfect(u.clone(), Convention::ErrorAfter), desired: u }
    }

    pub fn fidelity(&self) -> f64 {
        self.error.fidelity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComposeMode {
    Exact,
    FirstOrder,
    Additive,
}

impl ComposeMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ComposeMode::Exact),
            "first-order" | "first_order" => Ok(ComposeMode::FirstOrder),
            "additive" => Ok(ComposeMode::Additive),
            _ => invalid(format!("unknown compose mode {s:?}")),
        }
    }
}

/// `first` then `second`: desired `U2 U1`, error of `first` moved past `U2` before composing.
pub fn compose_gates(first: &GateWithError, second: &GateWithError, mode: ComposeMode) -> Result<GateWithError> {
    let desired = &second.desired * &first.desired;
    let mut e1 = jump_over(&first.error, &second.desired)?;
    e1.reference_unitary = desired.clone();
    let mut e2 = second.error.clone();
    e2.reference_unitary = desired.clone();
    let error = match mode {
        ComposeMode::Exact => ErrorMatrix {
            chi: compose_exact(&e2.chi, &e1.chi)?,
            convention: Convention::ErrorAfter,
            reference_unitary: desired.clone(),
        },
        ComposeMode::FirstOrder => compose_errors_first_order(&e1, &e2)?,
        ComposeMode::Additive => compose_errors_first_order_with(&e1, &e2, FirstOrderRule::Additive)?,
    };
    Ok(GateWithError { desired, error })
}

/// Left fold of [`compose_gates`] over a gate sequence in time order.
pub fn compose_sequence(gates: &[GateWithError], mode: ComposeMode) -> Result<GateWithError> {
    let Some(first) = gates.first() else {
        return invalid("empty gate sequence");
    };
    gates[1..].iter().try_fold(first.clone(), |acc, g| compose_gates(&acc, g, mode))
}
