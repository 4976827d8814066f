//! Built-in gate library.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{invalid, Result};
use crate::linalg::{c, kron, Mat, I, ONE, ZERO};
use crate::pauli_basis::{index_of, pauli_matrix, single};

pub fn identity(n_qubits: usize) -> Mat {
    Mat::identity(1 << n_qubits, 1 << n_qubits)
}

pub fn x() -> Mat {
    single(1)
}

pub fn y() -> Mat {
    single(2)
}

pub fn z() -> Mat {
    single(3)
}

/// Rotation by pi/2 about x: `(I - iX)/sqrt(2)`.
pub fn sqrt_x() -> Mat {
    (single(0) - single(1) * I).scale(FRAC_1_SQRT_2)
}

/// Rotation by pi/2 about y: `(I - iY)/sqrt(2)`.
pub fn sqrt_y() -> Mat {
    (single(0) - single(2) * I).scale(FRAC_1_SQRT_2)
}

pub fn hadamard() -> Mat {
    (single(1) + single(3)).scale(FRAC_1_SQRT_2)
}

/// `diag(1, e^{i phi})`.
pub fn z_phase(phi: f64) -> Mat {
    Mat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, phi)])
}

type C64 = num_complex::Complex64;

/// `exp(-i phi/2 P)` for a Pauli string label such as `"X"` or `"ZI"`.
pub fn pauli_rotation(label: &str, phi: f64) -> Result<Mat> {
    let idx = index_of(label)?;
    let p = pauli_matrix(idx, label.len());
    let d = p.nrows();
    Ok(Mat::identity(d, d).scale((phi / 2.0).cos()) - p * c(0.0, (phi / 2.0).sin()))
}

/// `diag(1, 1, 1, e^{i theta})`.
pub fn controlled_phase(theta: f64) -> Mat {
    let mut u = Mat::identity(4, 4);
    u[(3, 3)] = C64::from_polar(1.0, theta);
    u
}

pub fn cz() -> Mat {
    controlled_phase(std::f64::consts::PI)
}

/// Control on the first (leftmost) qubit.
pub fn cnot() -> Mat {
    let p0 = (single(0) + single(3)).scale(0.5);
    let p1 = (single(0) - single(3)).scale(0.5);
    kron(&p0, &single(0)) + kron(&p1, &single(1))
}

/// `(2+sqrt2)/4 II + (2-sqrt2)/4 ZZ - i sqrt2/4 (XX + YY)`.
pub fn sqrt_iswap() -> Mat {
    let s = 2f64.sqrt();
    let xx = kron(&single(1), &single(1));
    let yy = kron(&single(2), &single(2));
    let zz = kron(&single(3), &single(3));
    Mat::identity(4, 4).scale((2.0 + s) / 4.0) + zz.scale((2.0 - s) / 4.0) - (xx + yy) * c(0.0, s / 4.0)
}

/// Single-qubit calibration gates, in the order used for calibration sets.
pub const CALIBRATION_LABELS: [&str; 5] = ["I", "X", "Y", "SX", "SY"];

pub fn calibration_gate(label: &str) -> Result<Mat> {
    match label {
        "I" => Ok(single(0)),
        "X" => Ok(x()),
        "Y" => Ok(y()),
        "SX" => Ok(sqrt_x()),
        "SY" => Ok(sqrt_y()),
        _ => invalid(format!("unknown calibration gate {label:?}")),
    }
}

/// Looks up a gate by name. Parametrized gates use `name(value)`, e.g. `zphase(0.3)`.
pub fn by_name(name: &str) -> Result<Mat> {
    let lower = name.trim().to_ascii_lowercase();
    if let Some((head, rest)) = lower.split_once('(') {
        let arg: f64 = rest
            .trim_end_matches(')')
            .trim()
            .parse()
            .map_err(|_| crate::error::Error::Validation(format!("bad gate argument in {name:?}")))?;
        return match head {
            "zphase" | "z" => Ok(z_phase(arg)),
            "cphase" | "controlled_phase" => Ok(controlled_phase(arg)),
            _ => invalid(format!("unknown parametrized gate {name:?}")),
        };
    }
    match lower.as_str() {
        "i" | "id" => Ok(identity(1)),
        "ii" => Ok(identity(2)),
        "x" => Ok(x()),
        "y" => Ok(y()),
        "z" => Ok(z()),
        "sx" | "sqrtx" => Ok(sqrt_x()),
        "sy" | "sqrty" => Ok(sqrt_y()),
        "h" => Ok(hadamard()),
        "cz" => Ok(cz()),
        "cnot" | "cx" => Ok(cnot()),
        "sqrtiswap" | "sqrt_iswap" => Ok(sqrt_iswap()),
        _ => invalid(format!("unknown gate {name:?}")),
    }
}
