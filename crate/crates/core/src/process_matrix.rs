//! Process matrices in the Pauli basis and the fidelities defined on them.

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, eigh, is_unitary, max_abs_diff, qubits_for_dim, Mat, ONE};
use crate::pauli_basis::{cached_basis, expand_in_pauli, pauli_product, phase_fix};
use crate::tol;

/// `rho_fin = sum_mn chi_mn E_m rho E_n^dagger`, indexed by Pauli label pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    pub n_qubits: usize,
    pub entries: Mat,
}

impl ProcessMatrix {
    pub fn new(n_qubits: usize, entries: Mat) -> Result<Self> {
        cached_basis(n_qubits)?;
        let d2 = 1 << (2 * n_qubits);
        if entries.nrows() != d2 || entries.ncols() != d2 {
            return Err(Error::Dimension { expected: d2, got: entries.nrows() });
        }
        Ok(Self { n_qubits, entries })
    }

    /// The memory (do-nothing) operation: only the `II..I` entry is 1.
    pub fn identity(n_qubits: usize) -> Self {
        let d2 = 1 << (2 * n_qubits);
        let mut entries = Mat::zeros(d2, d2);
        entries[(0, 0)] = ONE;
        Self { n_qubits, entries }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn d2(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.entries).re
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.entries).0
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::is_hermitian(&self.entries, tol)
    }

    /// Checks that the minimum eigenvalue is at least `-rel_tol * Tr(chi)`.
    pub fn validate_positive(&self, rel_tol: f64) -> Result<()> {
        let ev = self.eigenvalues();
        let min = *ev.last().unwrap();
        let bound = rel_tol * self.trace().abs().max(f64::MIN_POSITIVE);
        if min < -bound {
            return Err(Error::NotPositive { value: min, tol: bound });
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &ProcessMatrix) -> f64 {
        max_abs_diff(&self.entries, &other.entries)
    }

    pub fn sub(&self, other: &ProcessMatrix) -> Mat {
        &self.entries - &other.entries
    }
}

pub fn check_unitary(u: &Mat) -> Result<usize> {
    let n = qubits_for_dim(u.nrows()).filter(|_| u.is_square());
    let Some(n) = n else {
        return invalid(format!("operator shape {:?} is not 2^N square", u.shape()));
    };
    if !is_unitary(u, tol::get(tol::UNITARY)) {
        return invalid("operator is not unitary");
    }
    Ok(n)
}

pub fn check_density(rho: &Mat) -> Result<()> {
    let t = tol::get(tol::HERMITIAN);
    if !linalg::is_hermitian(rho, t) {
        return invalid("density matrix is not Hermitian");
    }
    if (linalg::trace(rho) - ONE).norm() > t {
        return invalid("density matrix trace differs from 1");
    }
    let (ev, _) = eigh(rho);
    if *ev.last().unwrap() < -t {
        return Err(Error::NotPositive { value: *ev.last().unwrap(), tol: t });
    }
    Ok(())
}

pub fn chi_from_unitary(u: &Mat) -> Result<ProcessMatrix> {
    let n = check_unitary(u)?;
    let basis = cached_basis(n)?;
    let (coeffs, _) = phase_fix(&expand_in_pauli(u, basis)?);
    Ok(ProcessMatrix { n_qubits: n, entries: linalg::outer(&coeffs, &coeffs) })
}

/// `chi_mn = sum_k w_k a_m^(k) (a_n^(k))^*`. Completeness is enforced unless `allow_non_tp`.
pub fn chi_from_kraus(terms: &[(f64, Mat)], allow_non_tp: bool) -> Result<ProcessMatrix> {
    let Some((_, first)) = terms.first() else {
        return invalid("empty Kraus list");
    };
    let d = first.nrows();
    let Some(n) = qubits_for_dim(d) else {
        return invalid("Kraus operator dimension is not a power of two");
    };
    let basis = cached_basis(n)?;
    let mut entries = Mat::zeros(d * d, d * d);
    let mut completeness = Mat::zeros(d, d);
    for (w, a) in terms {
        if *w < 0.0 {
            return invalid("negative Kraus weight");
        }
        if a.shape() != (d, d) {
            return Err(Error::Dimension { expected: d, got: a.nrows() });
        }
        let v = expand_in_pauli(a, basis)?;
        entries += linalg::outer(&v, &v).scale(*w);
        completeness += (a.adjoint() * a).scale(*w);
    }
    if !allow_non_tp && max_abs_diff(&completeness, &linalg::eye(d)) > tol::get(tol::COMPLETENESS) {
        return invalid("Kraus operators are not complete");
    }
    Ok(ProcessMatrix { n_qubits: n, entries })
}

pub fn apply(chi: &ProcessMatrix, rho: &Mat) -> Result<Mat> {
    let d = chi.dim();
    if rho.shape() != (d, d) {
        return Err(Error::Dimension { expected: d, got: rho.nrows() });
    }
    let basis = cached_basis(chi.n_qubits)?;
    let d2 = chi.d2();
    let left: Vec<Mat> = basis.operators.iter().map(|e| e * rho).collect();
    let mut out = Mat::zeros(d, d);
    for n in 0..d2 {
        let mut acc = Mat::zeros(d, d);
        for m in 0..d2 {
            let w = chi.entries[(m, n)];
            if w != linalg::ZERO {
                acc += &left[m] * w;
            }
        }
        out += acc * &basis.operators[n];
    }
    Ok(out)
}

/// `sum_mn chi_mn E_n^dagger E_m` as a dense matrix.
pub fn completeness_operator(chi: &ProcessMatrix) -> Mat {
    let basis = cached_basis(chi.n_qubits).expect("validated");
    let d2 = chi.d2();
    let mut coeffs = linalg::Vector::zeros(d2);
    for m in 0..d2 {
        for n in 0..d2 {
            let (k, ph) = pauli_product(n, m, chi.n_qubits);
            coeffs[k] += chi.entries[(m, n)] * ph;
        }
    }
    crate::pauli_basis::reconstruct(&coeffs, basis)
}

pub fn is_trace_preserving(chi: &ProcessMatrix, tol: f64) -> bool {
    max_abs_diff(&completeness_operator(chi), &linalg::eye(chi.dim())) <= tol
}

/// Process matrix of a superoperator acting on column-stacked density matrices,
/// `S = sum_mn chi_mn conj(E_n) (x) E_m`.
pub fn chi_from_superop(s: &Mat) -> Result<ProcessMatrix> {
    let d2 = s.nrows();
    let d = (d2 as f64).sqrt().round() as usize;
    let Some(n) = qubits_for_dim(d).filter(|_| d * d == d2 && s.is_square()) else {
        return invalid("superoperator is not d^2 x d^2 for a qubit register");
    };
    let monos: Vec<_> = (0..d2).map(|k| crate::pauli_basis::monomial(k, n)).collect();
    let mut chi = Mat::zeros(d2, d2);
    let scale = 1.0 / d2 as f64;
    for m in 0..d2 {
        let em = &monos[m];
        for nn in 0..d2 {
            let en = &monos[nn];
            let mut acc = linalg::ZERO;
            for j1 in 0..d {
                let i1 = j1 ^ en.flip;
                for j2 in 0..d {
                    let i2 = j2 ^ em.flip;
                    acc += en.phases[j1] * em.phases[j2].conj() * s[(i1 * d + i2, j1 * d + j2)];
                }
            }
            chi[(m, nn)] = acc * scale;
        }
    }
    Ok(ProcessMatrix { n_qubits: n, entries: chi })
}

/// Column-stacked superoperator of a process matrix.
pub fn superop_from_chi(chi: &ProcessMatrix) -> Mat {
    let basis = cached_basis(chi.n_qubits).expect("validated");
    let d2 = chi.d2();
    let mut s = Mat::zeros(d2, d2);
    for m in 0..d2 {
        for n in 0..d2 {
            let w = chi.entries[(m, n)];
            if w != linalg::ZERO {
                s += linalg::kron(&basis.operators[n].map(|z| z.conj()), &basis.operators[m]) * w;
            }
        }
    }
    s
}

/// Column-stacking `vec(rho)`.
pub fn vec_of(rho: &Mat) -> linalg::Vector {
    linalg::Vector::from_column_slice(rho.as_slice())
}

pub fn unvec(v: &linalg::Vector, d: usize) -> Mat {
    Mat::from_column_slice(d, d, v.as_slice())
}

/// Fits the superoperator mapping `inputs[i]` to `outputs[i]` by least squares.
pub fn superop_from_pairs(inputs: &[Mat], outputs: &[Mat]) -> Result<Mat> {
    if inputs.is_empty() || inputs.len() != outputs.len() {
        return invalid("input and output state lists differ in length");
    }
    let d = inputs[0].nrows();
    let mut r = Mat::zeros(d * d, inputs.len());
    let mut o = Mat::zeros(d * d, inputs.len());
    for (k, (a, b)) in inputs.iter().zip(outputs).enumerate() {
        r.set_column(k, &vec_of(a));
        o.set_column(k, &vec_of(b));
    }
    let (rp, rank) = linalg::pinv(&r, 1e-10);
    if rank < d * d {
        return Err(Error::RankDeficient { directions: vec![format!("input span has rank {rank} < {}", d * d)] });
    }
    Ok(o * rp)
}

fn clamp_unit(x: f64) -> f64 {
    if (-1e-10..0.0).contains(&x) {
        0.0
    } else if x > 1.0 && x <= 1.0 + 1e-10 {
        1.0
    } else {
        x
    }
}

/// `Tr(chi_des chi)`; the desired process must be rank one.
pub fn process_fidelity(chi: &ProcessMatrix, chi_des: &ProcessMatrix) -> Result<f64> {
    if chi.d2() != chi_des.d2() {
        return Err(Error::Dimension { expected: chi_des.d2(), got: chi.d2() });
    }
    let ev = chi_des.eigenvalues();
    if ev.len() > 1 && ev[1].abs() > 1e-8 * chi_des.trace().abs() {
        return invalid("desired process is not rank one; use uhlmann_fidelity");
    }
    Ok(clamp_unit(trace_product(chi, chi_des)))
}

/// Real part of `Tr(a b)`, symmetric in its arguments.
pub fn trace_product(a: &ProcessMatrix, b: &ProcessMatrix) -> f64 {
    a.entries.transpose().dot(&b.entries).re
}

pub fn uhlmann_fidelity(chi: &ProcessMatrix, chi_des: &ProcessMatrix) -> Result<f64> {
    if chi.d2() != chi_des.d2() {
        return Err(Error::Dimension { expected: chi_des.d2(), got: chi.d2() });
    }
    let rel = tol::get(tol::POSITIVITY_REL);
    chi.validate_positive(rel)?;
    chi_des.validate_positive(rel)?;
    let s = linalg::sqrtm_psd(&chi.entries);
    let inner = &s * &chi_des.entries * &s;
    let (ev, _) = eigh(&inner);
    let root: f64 = linalg::clip_eigenvalues(&ev).iter().map(|v| v.sqrt()).sum();
    Ok(clamp_unit(root * root))
}

pub fn average_fidelity(f_chi: f64, d: usize) -> Result<f64> {
    if !(-1e-12..=1.0 + 1e-12).contains(&f_chi) || d < 2 {
        return invalid(format!("process fidelity {f_chi} or dimension {d} out of range"));
    }
    let df = d as f64;
    Ok(1.0 - (1.0 - f_chi) * df / (df + 1.0))
}

pub fn pure_density(psi: &linalg::Vector) -> Mat {
    linalg::outer(psi, psi)
}

pub fn ket(amps: &[(f64, f64)]) -> linalg::Vector {
    linalg::Vector::from_iterator(amps.len(), amps.iter().map(|&(r, i)| c(r, i)))
}
