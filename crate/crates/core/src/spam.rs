//! State-preparation and measurement errors: forward model, identification from
//! calibration tomography, and subtraction from measured error matrices.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::composition::compose_exact;
use crate::error::{invalid, Error, Result};
use crate::error_matrix::{conjugate, convert_convention, w_matrix, Convention, ErrorMatrix};
use crate::gates;
use crate::linalg::{self, kron, Mat, ONE};
use crate::pauli_basis;
use crate::process_matrix::{is_trace_preserving, ProcessMatrix};

/// Which side receives the deviations that calibration with local gates cannot resolve:
/// per qubit support, the part proportional to the identity on that support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepolarizingSplit {
    #[default]
    Measurement,
}

impl DepolarizingSplit {
    pub fn as_str(self) -> &'static str {
        "meas"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpamModel {
    pub chi_prep: ProcessMatrix,
    pub chi_meas: ProcessMatrix,
    pub depolarizing_split: DepolarizingSplit,
}

impl SpamModel {
    pub fn new(chi_prep: ProcessMatrix, chi_meas: ProcessMatrix) -> Result<Self> {
        if chi_prep.n_qubits != chi_meas.n_qubits {
            return Err(Error::Dimension { expected: chi_prep.d2(), got: chi_meas.d2() });
        }
        for (name, chi) in [("prep", &chi_prep), ("meas", &chi_meas)] {
            if chi.entries[(0, 0)].re < 0.5 {
                return invalid(format!("chi_{name} is too far from identity (chi_00 < 0.5)"));
            }
            if !is_trace_preserving(chi, crate::tol::get(crate::tol::COMPLETENESS)) {
                return invalid(format!("chi_{name} is not trace preserving"));
            }
        }
        Ok(Self { chi_prep, chi_meas, depolarizing_split: DepolarizingSplit::Measurement })
    }

    pub fn trivial(n_qubits: usize) -> Self {
        Self {
            chi_prep: ProcessMatrix::identity(n_qubits),
            chi_meas: ProcessMatrix::identity(n_qubits),
            depolarizing_split: DepolarizingSplit::Measurement,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.chi_prep.n_qubits
    }

    pub fn delta_prep(&self) -> Mat {
        self.chi_prep.sub(&ProcessMatrix::identity(self.n_qubits()))
    }

    pub fn delta_meas(&self) -> Mat {
        self.chi_meas.sub(&ProcessMatrix::identity(self.n_qubits()))
    }

    /// Negative eigenvalues of the two channels, below `-tol`.
    pub fn validity(&self, tol: f64) -> SpamValidity {
        let neg = |chi: &ProcessMatrix| chi.eigenvalues().into_iter().filter(|&v| v < -tol).collect();
        SpamValidity { prep_negative: neg(&self.chi_prep), meas_negative: neg(&self.chi_meas) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpamValidity {
    pub prep_negative: Vec<f64>,
    pub meas_negative: Vec<f64>,
}

impl SpamValidity {
    pub fn is_positive(&self) -> bool {
        self.prep_negative.is_empty() && self.meas_negative.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForwardMode {
    #[default]
    FirstOrder,
    Exact,
}

/// Error matrix that tomography would report for `err_true` bracketed by `spam`.
pub fn spam_forward(err_true: &ErrorMatrix, spam: &SpamModel, mode: ForwardMode) -> Result<ErrorMatrix> {
    if err_true.n_qubits() != spam.n_qubits() {
        return Err(Error::Dimension { expected: err_true.chi.d2(), got: spam.chi_prep.d2() });
    }
    let w = w_matrix(&err_true.reference_unitary)?;
    let n = spam.n_qubits();
    let chi = match (mode, err_true.convention) {
        (ForwardMode::FirstOrder, Convention::ErrorAfter) => {
            let mut e = err_true.chi.entries.clone();
            e += &w * spam.delta_prep() * w.adjoint() + spam.delta_meas();
            ProcessMatrix { n_qubits: n, entries: e }
        }
        (ForwardMode::FirstOrder, Convention::ErrorBefore) => {
            let mut e = err_true.chi.entries.clone();
            e += spam.delta_prep() + w.adjoint() * spam.delta_meas() * &w;
            ProcessMatrix { n_qubits: n, entries: e }
        }
        (ForwardMode::Exact, Convention::ErrorAfter) => {
            let moved = conjugate(&w, &spam.chi_prep);
            compose_exact(&spam.chi_meas, &compose_exact(&err_true.chi, &moved)?)?
        }
        (ForwardMode::Exact, Convention::ErrorBefore) => {
            let moved = conjugate(&w.adjoint(), &spam.chi_meas);
            compose_exact(&moved, &compose_exact(&err_true.chi, &spam.chi_prep)?)?
        }
    };
    ErrorMatrix::new(chi, err_true.convention, err_true.reference_unitary.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationEntry {
    pub label: String,
    pub unitary: Mat,
    pub err_exp: ErrorMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    pub entries: Vec<CalibrationEntry>,
}

impl CalibrationSet {
    /// Builds a set from measured error matrices; unitaries come from the labels.
    pub fn from_measurements(measured: Vec<(String, ErrorMatrix)>) -> Result<Self> {
        let mut entries = Vec::with_capacity(measured.len());
        for (label, err) in measured {
            let unitary = calibration_unitary(&label)?;
            if unitary.nrows() != err.chi.dim() {
                return Err(Error::Dimension { expected: err.chi.dim(), got: unitary.nrows() });
            }
            if linalg::max_abs_diff(&unitary, &err.reference_unitary) > 1e-10 {
                return invalid(format!("gate {label}: reference unitary does not match the label"));
            }
            entries.push(CalibrationEntry { label, unitary, err_exp: err });
        }
        let set = Self { entries };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.entries.first() else {
            return invalid("calibration set is empty");
        };
        let n = first.err_exp.n_qubits();
        let mut has_identity = false;
        for e in &self.entries {
            if e.err_exp.n_qubits() != n {
                return Err(Error::Dimension { expected: first.err_exp.chi.d2(), got: e.err_exp.chi.d2() });
            }
            if !linalg::is_unitary(&e.unitary, crate::tol::get(crate::tol::UNITARY)) {
                return invalid(format!("calibration gate {} is not unitary", e.label));
            }
            has_identity |= linalg::max_abs_diff(&e.unitary, &linalg::eye(e.unitary.nrows())) < 1e-12;
        }
        if !has_identity {
            return invalid("calibration set must contain the identity gate");
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.entries[0].err_exp.n_qubits()
    }
}

/// All `5^N` tensor-product labels such as `X⊗SY`, identity first.
pub fn calibration_labels(n_qubits: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    for _ in 0..n_qubits {
        out = out
            .iter()
            .flat_map(|p| {
                gates::CALIBRATION_LABELS
                    .iter()
                    .map(move |g| if p.is_empty() { g.to_string() } else { format!("{p}⊗{g}") })
            })
            .collect();
    }
    out
}

/// Unitary of a label like `X⊗SY` (also accepts `,` separators and `√X`).
pub fn calibration_unitary(label: &str) -> Result<Mat> {
    let mut u = Mat::from_element(1, 1, ONE);
    for part in label.split(['⊗', ',']) {
        let name = part.trim().replace('√', "S");
        u = kron(&u, &gates::calibration_gate(&name)?);
    }
    Ok(u)
}

/// Synthetic calibration data from `spam`, treating the calibration gates as perfect.
pub fn synthetic_calibration(spam: &SpamModel, labels: &[String], mode: ForwardMode) -> Result<CalibrationSet> {
    let measured = labels
        .iter()
        .map(|l| {
            let u = calibration_unitary(l)?;
            let err = spam_forward(&ErrorMatrix::perfect(u, Convention::ErrorAfter), spam, mode)?;
            Ok((l.clone(), err))
        })
        .collect::<Result<Vec<_>>>()?;
    CalibrationSet::from_measurements(measured)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpamIdentification {
    pub model: SpamModel,
    /// Frobenius norm of the least-squares residual over all gates.
    pub residual: f64,
    /// Number of calibration gates used.
    pub gates_used: usize,
    pub labels: Vec<String>,
}

/// Relative singular-value cutoff of the least-squares solve.
pub const PINV_CUTOFF: f64 = 1e-10;

fn vec_m(m: &Mat) -> linalg::Vector {
    linalg::Vector::from_column_slice(m.as_slice())
}

fn unvec_m(v: &linalg::Vector, n: usize) -> Mat {
    Mat::from_column_slice(n, n, v.as_slice())
}

/// Directions every calibration set of local gates leaves open: `E_00` and, for each
/// non-empty qubit support, the identity on the Paulis with exactly that support.
fn known_null(n_q: usize) -> Mat {
    let d2 = 1usize << (2 * n_q);
    let supports = 1usize << n_q;
    let mut k = Mat::zeros(d2 * d2, supports);
    k[(0, 0)] = ONE;
    let support_of = |j: usize| (0..n_q).fold(0, |acc, q| acc | (usize::from((j >> (2 * q)) & 3 != 0) << q));
    for s in 1..supports {
        let members: Vec<usize> = (1..d2).filter(|&j| support_of(j) == s).collect();
        let w = 1.0 / (members.len() as f64).sqrt();
        for j in members {
            k[(j * d2 + j, s)] = linalg::c(w, 0.0);
        }
    }
    k
}

/// Least-squares identification of `chi_prep` and `chi_meas` from the calibration set.
pub fn identify_spam(cal: &CalibrationSet) -> Result<SpamIdentification> {
    cal.validate()?;
    let n_q = cal.n_qubits();
    let d2 = 1usize << (2 * n_q);
    let dim = d2 * d2;
    let g = cal.entries.len() as f64;
    let id = ProcessMatrix::identity(n_q);
    // D_g = K_g p + m with K_g = conj(W_g) (x) W_g unitary. Eliminating m leaves
    // (G - S^dagger S / G) p = sum K_g^dagger D_g - S^dagger (sum D_g) / G with S = sum K_g.
    let mut s = Mat::zeros(dim, dim);
    let mut kd = linalg::Vector::zeros(dim);
    let mut dsum = linalg::Vector::zeros(dim);
    let mut ks = Vec::with_capacity(cal.entries.len());
    let mut ds = Vec::with_capacity(cal.entries.len());
    for e in &cal.entries {
        let after = match e.err_exp.convention {
            Convention::ErrorAfter => e.err_exp.clone(),
            Convention::ErrorBefore => convert_convention(&e.err_exp)?,
        };
        let w = w_matrix(&e.unitary)?;
        let k = kron(&w.map(|z| z.conj()), &w);
        let dvec = vec_m(&after.chi.sub(&id));
        kd += k.adjoint() * &dvec;
        dsum += &dvec;
        s += &k;
        ks.push(k);
        ds.push(dvec);
    }
    let schur = linalg::eye(dim).scale(g) - (s.adjoint() * &s).scale(1.0 / g);
    let rhs = kd - s.adjoint() * &dsum / linalg::c(g, 0.0);
    let (sp, rank) = linalg::pinv_hermitian(&schur, PINV_CUTOFF);
    let expected_rank = dim - (1usize << n_q);
    if rank < expected_rank {
        return Err(Error::RankDeficient { directions: unresolved_directions(&schur, n_q) });
    }
    let p = sp * rhs;
    let mut m = dsum.clone();
    for k in &ks {
        m -= k * &p;
    }
    m /= linalg::c(g, 0.0);
    let mut residual = 0.0;
    for (k, dvec) in ks.iter().zip(&ds) {
        residual += (k * &p + &m - dvec).norm_squared();
    }
    // Move the unresolved part of the prep deviation onto the measurement side.
    let kn = known_null(n_q);
    let shift = &kn * (kn.adjoint() * &p);
    let p = p - &shift;
    let m = m + shift;
    let chi_prep = ProcessMatrix { n_qubits: n_q, entries: linalg::hermitian_part(&(unvec_m(&p, d2) + &id.entries)) };
    let chi_meas = ProcessMatrix { n_qubits: n_q, entries: linalg::hermitian_part(&(unvec_m(&m, d2) + &id.entries)) };
    Ok(SpamIdentification {
        model: SpamModel { chi_prep, chi_meas, depolarizing_split: DepolarizingSplit::Measurement },
        residual: residual.sqrt(),
        gates_used: cal.entries.len(),
        labels: cal.entries.iter().map(|e| e.label.clone()).collect(),
    })
}

fn unresolved_directions(schur: &Mat, n_q: usize) -> Vec<String> {
    let d2 = 1usize << (2 * n_q);
    let null = linalg::null_space(schur, PINV_CUTOFF);
    let kn = known_null(n_q);
    // Projector onto the null space with the always-open directions removed.
    let proj = &null * null.adjoint() - &kn * kn.adjoint();
    let mut out = Vec::new();
    for col in 0..d2 {
        for row in 0..d2 {
            let idx = col * d2 + row;
            if proj[(idx, idx)].re > 1e-6 {
                out.push(format!(
                    "{},{}",
                    pauli_basis::label(row, n_q),
                    pauli_basis::label(col, n_q)
                ));
            }
        }
    }
    out
}

/// Identification from a seeded random subset of the calibration gates; the identity is always kept.
pub fn identify_spam_subset(cal: &CalibrationSet, subset_seed: u64, subset_size: usize) -> Result<SpamIdentification> {
    cal.validate()?;
    if subset_size == 0 || subset_size > cal.entries.len() {
        return invalid(format!("subset size must be in 1..={}", cal.entries.len()));
    }
    let dim = cal.entries[0].unitary.nrows();
    let id_pos = cal
        .entries
        .iter()
        .position(|e| linalg::max_abs_diff(&e.unitary, &linalg::eye(dim)) < 1e-12)
        .expect("validated");
    let mut rest: Vec<usize> = (0..cal.entries.len()).filter(|&i| i != id_pos).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(subset_seed);
    rest.shuffle(&mut rng);
    let mut chosen = vec![id_pos];
    chosen.extend(rest.into_iter().take(subset_size - 1));
    chosen.sort_unstable();
    let subset = CalibrationSet { entries: chosen.into_iter().map(|i| cal.entries[i].clone()).collect() };
    identify_spam(&subset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubtractMode {
    /// Removes both channels.
    #[default]
    Full,
    /// Preparation error neglected: subtracts the identity-gate deviation in the error-after form.
    PrepNegligible,
    /// Measurement error neglected: subtracts the identity-gate deviation in the error-before form.
    MeasNegligible,
}

impl SubtractMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "prep-negligible" => Ok(Self::PrepNegligible),
            "meas-negligible" => Ok(Self::MeasNegligible),
            _ => invalid(format!("unknown subtraction mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpamSubtraction {
    pub err: ErrorMatrix,
    pub warnings: Vec<String>,
}

/// Magnitude of negative diagonal entries that are set to zero.
pub const CLAMP_LIMIT: f64 = 1e-8;

/// Removes `spam` from a measured error matrix; the result keeps the input convention.
pub fn subtract_spam(err_exp: &ErrorMatrix, spam: &SpamModel, mode: SubtractMode) -> Result<SpamSubtraction> {
    if err_exp.n_qubits() != spam.n_qubits() {
        return Err(Error::Dimension { expected: err_exp.chi.d2(), got: spam.chi_prep.d2() });
    }
    let n = spam.n_qubits();
    let identity_dev = spam.delta_prep() + spam.delta_meas();
    let (work_conv, shortcut) = match mode {
        SubtractMode::Full => (err_exp.convention, None),
        SubtractMode::PrepNegligible => (Convention::ErrorAfter, Some(identity_dev)),
        SubtractMode::MeasNegligible => (Convention::ErrorBefore, Some(identity_dev)),
    };
    let work = if err_exp.convention == work_conv { err_exp.clone() } else { convert_convention(err_exp)? };
    let mut e = work.chi.entries.clone();
    match shortcut {
        Some(dev) => e -= dev,
        None => {
            let w = w_matrix(&work.reference_unitary)?;
            match work_conv {
                Convention::ErrorAfter => e -= &w * spam.delta_prep() * w.adjoint() + spam.delta_meas(),
                Convention::ErrorBefore => e -= spam.delta_prep() + w.adjoint() * spam.delta_meas() * &w,
            }
        }
    }
    let mut warnings = Vec::new();
    for k in 0..e.nrows() {
        let v = e[(k, k)].re;
        if v < 0.0 {
            let lbl = pauli_basis::label(k, n);
            if -v <= CLAMP_LIMIT {
                e[(k, k)] = linalg::ZERO;
                warnings.push(format!("clamped diagonal {lbl} from {v:.3e} to 0"));
            } else {
                warnings.push(format!("diagonal {lbl} is negative ({v:.3e}) after subtraction"));
            }
        }
    }
    let mut out = ErrorMatrix::new(ProcessMatrix { n_qubits: n, entries: e }, work_conv, work.reference_unitary)?;
    if out.convention != err_exp.convention {
        out = convert_convention(&out)?;
    }
    Ok(SpamSubtraction { err: out, warnings })
}

/// `F_exp / F_identity`, clamped to `[0, 1]` with a warning.
pub fn spam_fidelity_ratio(f_exp: f64, f_identity: f64) -> Result<(f64, Option<String>)> {
    if f_identity == 0.0 {
        return Err(Error::Numerical("identity-gate fidelity is zero".into()));
    }
    if !(f_identity > 0.0 && f_identity <= 1.0) {
        return invalid(format!("identity-gate fidelity {f_identity} is outside (0, 1]"));
    }
    let r = f_exp / f_identity;
    if r > 1.0 {
        Ok((1.0, Some(format!("ratio {r} exceeds 1; clamped"))))
    } else if r < 0.0 {
        Ok((0.0, Some(format!("ratio {r} is negative; clamped"))))
    } else {
        Ok((r, None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_matrix::chi_from_kraus;

    fn small_spam() -> SpamModel {
        let prep = chi_from_kraus(
            &[
                (1.0, crate::gates::pauli_rotation("Y", 0.05).unwrap().scale(0.99f64.sqrt())),
                (1.0, crate::pauli_basis::single(1).scale(0.01f64.sqrt())),
            ],
            false,
        )
        .unwrap();
        let meas = crate::lindblad::analytic_channel(crate::lindblad::AnalyticChannel::Relaxation {
            t: 0.02,
            t1: 1.0,
            e_over_t: 3.0,
        })
        .unwrap();
        SpamModel::new(prep, meas).unwrap()
    }

    #[test]
    fn labels_and_unitaries() {
        let l = calibration_labels(2);
        assert_eq!(l.len(), 25);
        assert_eq!(l[0], "I⊗I");
        assert_eq!(calibration_unitary("X⊗√Y").unwrap(), kron(&gates::x(), &gates::sqrt_y()));
    }

    #[test]
    fn trivial_spam_is_noop() {
        let err = ErrorMatrix::perfect(gates::cz(), Convention::ErrorAfter);
        let s = SpamModel::trivial(2);
        assert_eq!(spam_forward(&err, &s, ForwardMode::FirstOrder).unwrap(), err);
        assert_eq!(subtract_spam(&err, &s, SubtractMode::Full).unwrap().err, err);
    }

    #[test]
    fn single_qubit_round_trip() {
        let spam = small_spam();
        let cal = synthetic_calibration(&spam, &calibration_labels(1), ForwardMode::FirstOrder).unwrap();
        let id = identify_spam(&cal).unwrap();
        assert!(id.residual < 1e-12);
        let u = gates::hadamard();
        let e = ErrorMatrix::perfect(u, Convention::ErrorAfter);
        let a = spam_forward(&e, &spam, ForwardMode::FirstOrder).unwrap();
        let b = spam_forward(&e, &id.model, ForwardMode::FirstOrder).unwrap();
        assert!(a.chi.max_abs_diff(&b.chi) < 1e-12);
    }

    #[test]
    fn x_only_subset_is_rank_deficient() {
        let cal = synthetic_calibration(&small_spam(), &["I".into(), "X".into()], ForwardMode::FirstOrder).unwrap();
        match identify_spam(&cal) {
            Err(Error::RankDeficient { directions }) => {
                assert!(directions.contains(&"Y,Y".to_string()));
                assert!(directions.contains(&"Z,Z".to_string()));
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn fidelity_ratio() {
        assert_eq!(spam_fidelity_ratio(0.95, 1.0).unwrap().0, 0.95);
        assert!((spam_fidelity_ratio(0.90, 0.95).unwrap().0 - 0.9 / 0.95).abs() < 1e-15);
        assert!(spam_fidelity_ratio(0.9, 0.0).is_err());
        assert!(spam_fidelity_ratio(0.99, 0.95).unwrap().1.is_some());
    }
}
