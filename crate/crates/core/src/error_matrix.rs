//! Error matrices: the residual process once the desired unitary is factored out.

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, eigh, Mat, Vector, ZERO};
use crate::pauli_basis::{cached_basis, expand_in_pauli, reconstruct, PauliCoefficients};
use crate::process_matrix::{check_unitary, ProcessMatrix};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// `chi^err`: error applied after the desired unitary.
    ErrorAfter,
    /// `chi~^err`: error applied before the desired unitary.
    ErrorBefore,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::ErrorAfter => "error_after",
            Convention::ErrorBefore => "error_before",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "error_after" | "after" => Ok(Convention::ErrorAfter),
            "error_before" | "before" => Ok(Convention::ErrorBefore),
            _ => invalid(format!("unknown convention {s:?}")),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Convention::ErrorAfter => Convention::ErrorBefore,
            Convention::ErrorBefore => Convention::ErrorAfter,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    pub chi: ProcessMatrix,
    pub convention: Convention,
    pub reference_unitary: Mat,
}

impl ErrorMatrix {
    pub fn new(chi: ProcessMatrix, convention: Convention, reference_unitary: Mat) -> Result<Self> {
        if reference_unitary.nrows() != chi.dim() {
            return Err(Error::Dimension { expected: chi.dim(), got: reference_unitary.nrows() });
        }
        Ok(Self { chi, convention, reference_unitary })
    }

    /// Error matrix of a perfect gate `u`.
    pub fn perfect(u: Mat, convention: Convention) -> Self {
        let n = linalg::qubits_for_dim(u.nrows()).expect("2^N square");
        Self { chi: ProcessMatrix::identity(n), convention, reference_unitary: u }
    }

    pub fn n_qubits(&self) -> usize {
        self.chi.n_qubits
    }

    /// Process fidelity, the `(0,0)` element.
    pub fn fidelity(&self) -> f64 {
        self.chi.entries[(0, 0)].re
    }

    pub fn entry(&self, m: usize, n: usize) -> num_complex::Complex64 {
        self.chi.entries[(m, n)]
    }
}

/// Matrix whose column `n` holds the Pauli coefficients of `f(E_n)`.
fn superop_in_pauli(n_qubits: usize, f: impl Fn(&Mat) -> Mat) -> Mat {
    let basis = cached_basis(n_qubits).expect("validated");
    let d2 = basis.len();
    let mut out = Mat::zeros(d2, d2);
    for (n, e) in basis.operators.iter().enumerate() {
        let col = expand_in_pauli(&f(e), basis).expect("square");
        out.set_column(n, &col);
    }
    out
}

/// `V_mn = Tr(E_m^dagger E_n U^dagger)/d`.
pub fn v_matrix(u: &Mat) -> Result<Mat> {
    let n = check_unitary(u)?;
    let ud = u.adjoint();
    Ok(superop_in_pauli(n, |e| e * &ud))
}

/// `V~_mn = Tr(E_m^dagger U^dagger E_n)/d`.
pub fn v_tilde_matrix(u: &Mat) -> Result<Mat> {
    let n = check_unitary(u)?;
    let ud = u.adjoint();
    Ok(superop_in_pauli(n, |e| &ud * e))
}

/// `W_mn = Tr(E_m^dagger U E_n U^dagger)/d`. Row and column 0 are set to `delta_0n` exactly.
pub fn w_matrix(u: &Mat) -> Result<Mat> {
    let n = check_unitary(u)?;
    let ud = u.adjoint();
    let mut w = superop_in_pauli(n, |e| u * e * &ud);
    for k in 0..w.nrows() {
        w[(0, k)] = ZERO;
        w[(k, 0)] = ZERO;
    }
    w[(0, 0)] = linalg::ONE;
    Ok(w)
}

pub(crate) fn conjugate(t: &Mat, chi: &ProcessMatrix) -> ProcessMatrix {
    ProcessMatrix { n_qubits: chi.n_qubits, entries: t * &chi.entries * t.adjoint() }
}

pub fn to_error_matrix(chi: &ProcessMatrix, u_des: &Mat, convention: Convention) -> Result<ErrorMatrix> {
    if u_des.nrows() != chi.dim() {
        return Err(Error::Dimension { expected: chi.dim(), got: u_des.nrows() });
    }
    let t = match convention {
        Convention::ErrorAfter => v_matrix(u_des)?,
        Convention::ErrorBefore => v_tilde_matrix(u_des)?,
    };
    Ok(ErrorMatrix { chi: conjugate(&t, chi), convention, reference_unitary: u_des.clone() })
}

/// Rebuilds the full process matrix `chi` from an error matrix.
pub fn to_process_matrix(err: &ErrorMatrix) -> Result<ProcessMatrix> {
    let t = match err.convention {
        Convention::ErrorAfter => v_matrix(&err.reference_unitary)?,
        Convention::ErrorBefore => v_tilde_matrix(&err.reference_unitary)?,
    };
    Ok(conjugate(&t.adjoint(), &err.chi))
}

pub fn convert_convention(err: &ErrorMatrix) -> Result<ErrorMatrix> {
    let w = w_matrix(&err.reference_unitary)?;
    let chi = match err.convention {
        Convention::ErrorBefore => conjugate(&w, &err.chi),
        Convention::ErrorAfter => conjugate(&w.adjoint(), &err.chi),
    };
    Ok(ErrorMatrix { chi, convention: err.convention.other(), reference_unitary: err.reference_unitary.clone() })
}

#[derive(Debug, Clone)]
pub struct KrausDecomposition {
    pub n_qubits: usize,
    /// Eigenvalues in descending order.
    pub weights: Vec<f64>,
    /// Unit-norm Pauli coefficient vectors; each operator has Hilbert-Schmidt norm `sqrt(d)`.
    pub operators: Vec<PauliCoefficients>,
}

impl KrausDecomposition {
    pub fn operator_matrix(&self, k: usize) -> Mat {
        reconstruct(&self.operators[k], cached_basis(self.n_qubits).expect("validated"))
    }

    pub fn reconstruct(&self) -> ProcessMatrix {
        let d2 = self.operators[0].len();
        let mut m = Mat::zeros(d2, d2);
        for (w, a) in self.weights.iter().zip(&self.operators) {
            m += linalg::outer(a, a).scale(*w);
        }
        ProcessMatrix { n_qubits: self.n_qubits, entries: m }
    }
}

/// Multiplies by a phase so the largest-magnitude entry (lowest index on ties) is real positive.
pub fn fix_eigenvector_phase(v: &Vector) -> Vector {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > best_abs + 1e-12 {
            best = i;
            best_abs = z.norm();
        }
    }
    if best_abs <= 0.0 {
        return v.clone();
    }
    let rot = v[best].conj() / best_abs;
    let mut out = v * rot;
    out[best] = c(out[best].re, 0.0);
    out
}

pub fn kraus_decompose(err: &ErrorMatrix) -> Result<KrausDecomposition> {
    let (vals, vecs) = eigh(&err.chi.entries);
    let bound = tol::get(tol::KRAUS_NEGATIVE);
    if let Some(&min) = vals.last() {
        if min < -bound {
            return Err(Error::NotPositive { value: min, tol: bound });
        }
    }
    let operators = (0..vals.len()).map(|k| fix_eigenvector_phase(&vecs.column(k).into_owned())).collect();
    Ok(KrausDecomposition { n_qubits: err.n_qubits(), weights: vals, operators })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitVariant {
    /// `lambda_0 ~ F/(1 - sum |chi_0n|^2)`, `a_n = chi_n0/lambda_0`.
    #[default]
    Lambda0,
    /// `chi^coh_mn ~ chi_m0 chi_n0^*` on the interior, column and row copied.
    Simplified,
}

#[derive(Debug, Clone)]
pub struct CoherentSplit {
    pub lambda0: f64,
    pub a0: PauliCoefficients,
    pub chi_coh: ProcessMatrix,
    pub chi_dec: ProcessMatrix,
    /// Unitary error `sum_{n>0} |u^err_n|^2`.
    pub unitary_error: f64,
    /// Decoherence error `1 - lambda_0`.
    pub decoherence_error: f64,
    /// Set when `1 - F > 0.2`, where the estimates degrade.
    pub warning: bool,
}

pub const SPLIT_WARN_INFIDELITY: f64 = 0.2;

pub fn coherent_split(err: &ErrorMatrix, variant: SplitVariant) -> Result<CoherentSplit> {
    let chi = &err.chi.entries;
    let d2 = chi.nrows();
    let f = err.fidelity();
    let s: f64 = (1..d2).map(|n| chi[(0, n)].norm_sqr()).sum();
    let denom = 1.0 - s;
    if denom <= 0.0 || f <= 0.0 {
        return Err(Error::Numerical(format!("coherent split undefined: F = {f}, 1 - sum|chi_0n|^2 = {denom}")));
    }
    let lambda0 = f / denom;
    let mut a0 = Vector::zeros(d2);
    a0[0] = c((f / lambda0).sqrt(), 0.0);
    for n in 1..d2 {
        a0[n] = chi[(n, 0)] / lambda0;
    }
    let coh = match variant {
        SplitVariant::Lambda0 => linalg::outer(&a0, &a0).scale(lambda0),
        SplitVariant::Simplified => {
            let col = chi.column(0).into_owned();
            let mut m = linalg::outer(&col, &col);
            for n in 1..d2 {
                m[(n, 0)] = chi[(n, 0)];
                m[(0, n)] = chi[(0, n)];
            }
            m[(0, 0)] = c(f, 0.0);
            m
        }
    };
    let u = extract_unitary_error(err)?;
    let unitary_error = (1..d2).map(|n| u[n].norm_sqr()).sum();
    let n_q = err.n_qubits();
    Ok(CoherentSplit {
        lambda0,
        a0,
        chi_dec: ProcessMatrix { n_qubits: n_q, entries: chi - &coh },
        chi_coh: ProcessMatrix { n_qubits: n_q, entries: coh },
        unitary_error,
        decoherence_error: 1.0 - lambda0,
        warning: 1.0 - f > SPLIT_WARN_INFIDELITY,
    })
}

/// First-order unitary imperfection: `u_0 = 1`, `u_n = i Im(chi_n0)/F`.
pub fn extract_unitary_error(err: &ErrorMatrix) -> Result<PauliCoefficients> {
    let f = err.fidelity();
    if f <= 0.0 {
        return Err(Error::Numerical(format!("fidelity {f} is not positive")));
    }
    let d2 = err.chi.d2();
    let mut u = Vector::from_element(d2, ZERO);
    u[0] = linalg::ONE;
    for n in 1..d2 {
        u[n] = c(0.0, err.chi.entries[(n, 0)].im / f);
    }
    Ok(u)
}
