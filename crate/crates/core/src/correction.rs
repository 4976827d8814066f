//! Unitary corrections estimated from the left column of an error matrix.

use crate::composition::{compose_errors_first_order, compose_exact, GateWithError};
use crate::error::{invalid, Error, Result};
use crate::error_matrix::{convert_convention, to_error_matrix, Convention, ErrorMatrix};
use crate::linalg::{self, c, expm, Mat, Vector, I, ONE};
use crate::pauli_basis::{cached_basis, expand_in_pauli, index_of, phase_fix, PauliCoefficients};
use crate::process_matrix::{chi_from_unitary, ProcessMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    AfterGate,
    BeforeGate,
}

impl Placement {
    pub fn convention(self) -> Convention {
        match self {
            Placement::AfterGate => Convention::ErrorAfter,
            Placement::BeforeGate => Convention::ErrorBefore,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorrectionPlan {
    pub n_qubits: usize,
    /// Pauli coefficients of the correction; `u_0 = 1` for a single estimate.
    pub u_corr: PauliCoefficients,
    pub correctable_set: Vec<usize>,
    pub predicted_gain: f64,
    pub placement: Placement,
    /// The unitary actually applied.
    pub unitary: Mat,
}

/// Largest generator norm accepted when exponentiating a correction vector.
pub const MAX_CORRECTION_NORM: f64 = std::f64::consts::FRAC_PI_2;

fn check_set(set: &[usize], d2: usize) -> Result<()> {
    if set.is_empty() {
        return invalid("empty correctable set");
    }
    if let Some(&bad) = set.iter().find(|&&n| n == 0 || n >= d2) {
        return invalid(format!("index {bad} cannot be corrected"));
    }
    Ok(())
}

pub fn parse_set(labels: &str) -> Result<Vec<usize>> {
    labels.split(',').map(|s| index_of(s.trim())).collect()
}

/// `U = exp(iH)` with `H = sum_n (u_n / i) E_n` over the correctable set.
pub fn unitarize(u_corr: &PauliCoefficients, set: &[usize], n_qubits: usize) -> Result<Mat> {
    let basis = cached_basis(n_qubits)?;
    let d = basis.dim;
    let mut h = Mat::zeros(d, d);
    for &n in set {
        let coef = u_corr[n] / I;
        h += &basis.operators[n] * c(coef.re, 0.0);
    }
    let norm = linalg::eigh(&h).0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm > MAX_CORRECTION_NORM {
        return Err(Error::Numerical(format!("correction generator norm {norm:.3} is too large to unitarize")));
    }
    Ok(expm(&(h * I)))
}

/// `u_n = -i Im(chi_n0)/F` on the correctable set; the placement follows the error convention.
pub fn suggest_correction(err: &ErrorMatrix, correctable_set: &[usize]) -> Result<CorrectionPlan> {
    let d2 = err.chi.d2();
    check_set(correctable_set, d2)?;
    let f = err.fidelity();
    if f <= 0.0 {
        return Err(Error::Numerical(format!("fidelity {f} is not positive")));
    }
    let mut u = Vector::zeros(d2);
    u[0] = ONE;
    let mut gain = 0.0;
    for &n in correctable_set {
        let im = err.chi.entries[(n, 0)].im;
        u[n] = c(0.0, -im / f);
        gain += im * im / f;
    }
    let placement = match err.convention {
        Convention::ErrorAfter => Placement::AfterGate,
        Convention::ErrorBefore => Placement::BeforeGate,
    };
    let unitary = unitarize(&u, correctable_set, err.n_qubits())?;
    Ok(CorrectionPlan {
        n_qubits: err.n_qubits(),
        u_corr: u,
        correctable_set: correctable_set.to_vec(),
        predicted_gain: gain,
        placement,
        unitary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionMode {
    Exact,
    FirstOrder,
}

/// Composes the plan's unitary with the gate; the desired unitary is unchanged.
pub fn apply_correction(gate: &GateWithError, plan: &CorrectionPlan, mode: CorrectionMode) -> Result<GateWithError> {
    let n = gate.error.n_qubits();
    if plan.n_qubits != n {
        return Err(Error::Dimension { expected: gate.error.chi.d2(), got: plan.u_corr.len() });
    }
    let corr = ErrorMatrix {
        chi: chi_from_unitary(&plan.unitary)?,
        convention: plan.placement.convention(),
        reference_unitary: gate.desired.clone(),
    };
    let err = match plan.placement {
        Placement::AfterGate => gate.error.clone(),
        Placement::BeforeGate => convert_convention(&gate.error)?,
    };
    let combined = match (mode, plan.placement) {
        (CorrectionMode::Exact, Placement::AfterGate) => ErrorMatrix {
            chi: compose_exact(&corr.chi, &err.chi)?,
            ..err.clone()
        },
        (CorrectionMode::Exact, Placement::BeforeGate) => ErrorMatrix {
            chi: compose_exact(&err.chi, &corr.chi)?,
            ..err.clone()
        },
        (CorrectionMode::FirstOrder, _) => compose_errors_first_order(&err, &corr)?,
    };
    let error = match plan.placement {
        Placement::AfterGate => combined,
        Placement::BeforeGate => convert_convention(&combined)?,
    };
    Ok(GateWithError { desired: gate.desired.clone(), error })
}

fn max_im_residual(err: &ErrorMatrix, set: &[usize]) -> f64 {
    set.iter().map(|&n| err.chi.entries[(n, 0)].im.abs()).fold(0.0, f64::max)
}

/// Repeats estimate then exact composition until the corrected imaginary column entries drop
/// below `tol`, or until an iteration gains less than `tol` in fidelity.
pub fn iterate_correction(
    chi: &ProcessMatrix,
    u_des: &Mat,
    correctable_set: &[usize],
    placement: Placement,
    max_iters: usize,
    tol: f64,
) -> Result<CorrectionPlan> {
    if max_iters == 0 {
        return invalid("max_iters must be at least 1");
    }
    check_set(correctable_set, chi.d2())?;
    let conv = placement.convention();
    let f_start = to_error_matrix(chi, u_des, conv)?.fidelity();
    let mut current = chi.clone();
    let mut total = linalg::eye(chi.dim());
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let err = to_error_matrix(&current, u_des, conv)?;
        residual = max_im_residual(&err, correctable_set);
        if residual <= tol {
            return Ok(accumulated_plan(&total, correctable_set, placement, err.fidelity() - f_start));
        }
        let step = suggest_correction(&err, correctable_set)?;
        let step_chi = chi_from_unitary(&step.unitary)?;
        let f_before = err.fidelity();
        match placement {
            Placement::AfterGate => {
                current = compose_exact(&step_chi, &current)?;
                total = &step.unitary * &total;
            }
            Placement::BeforeGate => {
                current = compose_exact(&current, &step_chi)?;
                total = &total * &step.unitary;
            }
        }
        let err_after = to_error_matrix(&current, u_des, conv)?;
        if (err_after.fidelity() - f_before).abs() < tol {
            return Ok(accumulated_plan(&total, correctable_set, placement, err_after.fidelity() - f_start));
        }
    }
    let err = to_error_matrix(&current, u_des, conv)?;
    let final_residual = max_im_residual(&err, correctable_set);
    if final_residual <= tol {
        return Ok(accumulated_plan(&total, correctable_set, placement, err.fidelity() - f_start));
    }
    Err(Error::NoConvergence { iterations: max_iters, residual: final_residual.min(residual) })
}

fn accumulated_plan(total: &Mat, set: &[usize], placement: Placement, gain: f64) -> CorrectionPlan {
    let n = linalg::qubits_for_dim(total.nrows()).expect("2^N square");
    let basis = cached_basis(n).expect("validated");
    let (u, _) = phase_fix(&expand_in_pauli(total, basis).expect("square"));
    CorrectionPlan {
        n_qubits: n,
        u_corr: u,
        correctable_set: set.to_vec(),
        predicted_gain: gain,
        placement,
        unitary: total.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzPhaseCorrection {
    pub phi1: f64,
    pub phi2: f64,
    pub phi_cz: f64,
    /// Predicted fidelity gain over the compensated entries.
    pub predicted_gain: f64,
    /// Set when any angle exceeds the small-angle regime.
    pub warning: bool,
}

pub const CZ_ANGLE_WARN: f64 = 0.5;

impl CzPhaseCorrection {
    pub fn phi3(&self) -> f64 {
        self.phi1 + self.phi2 + self.phi_cz
    }

    /// `diag(1, e^{i phi1}, e^{i phi2}, e^{i phi3})` in Kronecker order with the phase making
    /// the identity coefficient real. `phi1` acts on the second (rightmost) qubit.
    pub fn unitary(&self) -> Mat {
        let p3 = self.phi3();
        let global = C64::from_polar(1.0, -(self.phi1 + self.phi2 + p3) / 4.0);
        let mut u = Mat::zeros(4, 4);
        u[(0, 0)] = global;
        u[(1, 1)] = global * C64::from_polar(1.0, self.phi1);
        u[(2, 2)] = global * C64::from_polar(1.0, self.phi2);
        u[(3, 3)] = global * C64::from_polar(1.0, p3);
        u
    }
}

type C64 = num_complex::Complex64;

const IZ: usize = 3;
const ZI: usize = 12;
const ZZ: usize = 15;

/// Single-qubit Z corrections (and optionally the CZ angle) for a two-qubit CZ-like gate.
pub fn cz_corrections(err: &ErrorMatrix, correct_cz_angle: bool) -> Result<CzPhaseCorrection> {
    if err.n_qubits() != 2 {
        return invalid("CZ corrections need a two-qubit error matrix");
    }
    let f = err.fidelity();
    if f <= 0.0 {
        return Err(Error::Numerical(format!("fidelity {f} is not positive")));
    }
    let x = &err.chi.entries;
    let (iz, zi, zz) = (x[(IZ, 0)].im, x[(ZI, 0)].im, x[(ZZ, 0)].im);
    let (phi1, phi2, phi_cz, gain) = if correct_cz_angle {
        (2.0 * (iz + zz) / f, 2.0 * (zi + zz) / f, -4.0 * zz / f, (iz * iz + zi * zi + zz * zz) / f)
    } else {
        (2.0 * iz / f, 2.0 * zi / f, 0.0, (iz * iz + zi * zi) / f)
    };
    let warning = [phi1, phi2, phi_cz].iter().any(|a| a.abs() > CZ_ANGLE_WARN);
    Ok(CzPhaseCorrection { phi1, phi2, phi_cz, predicted_gain: gain, warning })
}

/// Applies a CZ phase correction after the gate (it commutes with CZ).
pub fn apply_cz_correction(gate: &GateWithError, corr: &CzPhaseCorrection) -> Result<GateWithError> {
    let plan = CorrectionPlan {
        n_qubits: 2,
        u_corr: expand_in_pauli(&corr.unitary(), cached_basis(2)?)?,
        correctable_set: vec![IZ, ZI, ZZ],
        predicted_gain: corr.predicted_gain,
        placement: Placement::AfterGate,
        unitary: corr.unitary(),
    };
    apply_correction(gate, &plan, CorrectionMode::Exact)
}
