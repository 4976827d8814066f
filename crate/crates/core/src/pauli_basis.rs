//! N-qubit Pauli operator basis.
//!
//! Operators are indexed in base 4 with `I=0, X=1, Y=2, Z=3` and the leftmost
//! letter (first tensor factor) as the most significant digit, so `"ZX"` is 13.

use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};
use crate::linalg::{c, kron, Mat, Vector, I, ONE, ZERO};

pub const DEFAULT_MAX_QUBITS: usize = 4;

/// Coefficients of an operator expanded in the Pauli basis.
pub type PauliCoefficients = Vector;

const LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliLabel {
    letters: String,
}

impl PauliLabel {
    pub fn parse(s: &str) -> Result<Self> {
        if s.is_empty() || !s.chars().all(|ch| LETTERS.contains(&ch)) {
            return invalid(format!("bad Pauli label {s:?}"));
        }
        Ok(Self { letters: s.to_string() })
    }

    pub fn from_index(index: usize, n_qubits: usize) -> Self {
        let mut letters = String::with_capacity(n_qubits);
        for q in (0..n_qubits).rev() {
            letters.push(LETTERS[(index >> (2 * q)) & 3]);
        }
        Self { letters }
    }

    pub fn index(&self) -> usize {
        self.letters
            .chars()
            .fold(0, |acc, ch| 4 * acc + LETTERS.iter().position(|&l| l == ch).unwrap())
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn as_str(&self) -> &str {
        &self.letters
    }
}

impl std::fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.letters)
    }
}

pub fn label(index: usize, n_qubits: usize) -> String {
    PauliLabel::from_index(index, n_qubits).letters
}

pub fn index_of(label: &str) -> Result<usize> {
    Ok(PauliLabel::parse(label)?.index())
}

/// Single-qubit Pauli matrix for letter index 0..4.
pub fn single(k: usize) -> Mat {
    match k {
        0 => Mat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
        1 => Mat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => Mat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => Mat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("Pauli letter index out of range: {k}"),
    }
}

/// Dense matrix of the Pauli string with the given index.
pub fn pauli_matrix(index: usize, n_qubits: usize) -> Mat {
    let mut m = Mat::from_element(1, 1, ONE);
    for q in (0..n_qubits).rev() {
        m = kron(&m, &single((index >> (2 * q)) & 3));
    }
    m
}

/// A Pauli string as a signed permutation: `E |j> = phases[j] |j ^ flip>`.
#[derive(Debug, Clone)]
pub struct Monomial {
    pub flip: usize,
    pub phases: Vec<num_complex::Complex64>,
}

pub fn monomial(index: usize, n_qubits: usize) -> Monomial {
    let d = 1usize << n_qubits;
    let mut flip = 0;
    for q in 0..n_qubits {
        // qubit q counted from the left is bit (n_qubits - 1 - q) of the state index
        let letter = (index >> (2 * (n_qubits - 1 - q))) & 3;
        if letter == 1 || letter == 2 {
            flip |= 1 << (n_qubits - 1 - q);
        }
    }
    let phases = (0..d)
        .map(|j| {
            let mut ph = ONE;
            for q in 0..n_qubits {
                let letter = (index >> (2 * (n_qubits - 1 - q))) & 3;
                let bit = (j >> (n_qubits - 1 - q)) & 1;
                ph *= match (letter, bit) {
                    (2, 0) => I,
                    (2, _) => -I,
                    (3, 1) => -ONE,
                    _ => ONE,
                };
            }
            ph
        })
        .collect();
    Monomial { flip, phases }
}

#[derive(Debug, Clone)]
pub struct PauliBasis {
    pub n_qubits: usize,
    pub dim: usize,
    pub operators: Vec<Mat>,
}

pub fn build_basis(n_qubits: usize) -> Result<PauliBasis> {
    build_basis_capped(n_qubits, DEFAULT_MAX_QUBITS)
}

pub fn build_basis_capped(n_qubits: usize, max_qubits: usize) -> Result<PauliBasis> {
    if n_qubits == 0 || n_qubits > max_qubits {
        return invalid(format!("n_qubits must be in 1..={max_qubits}, got {n_qubits}"));
    }
    let dim = 1 << n_qubits;
    let operators = (0..dim * dim).map(|k| pauli_matrix(k, n_qubits)).collect();
    Ok(PauliBasis { n_qubits, dim, operators })
}

static CACHE: [OnceLock<PauliBasis>; DEFAULT_MAX_QUBITS + 1] =
    [const { OnceLock::new() }; DEFAULT_MAX_QUBITS + 1];

/// Shared basis for `n_qubits` within the default cap.
pub fn cached_basis(n_qubits: usize) -> Result<&'static PauliBasis> {
    if n_qubits == 0 || n_qubits > DEFAULT_MAX_QUBITS {
        return invalid(format!("n_qubits must be in 1..={DEFAULT_MAX_QUBITS}, got {n_qubits}"));
    }
    Ok(CACHE[n_qubits].get_or_init(|| build_basis(n_qubits).expect("within cap")))
}

impl PauliBasis {
    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn label(&self, index: usize) -> String {
        label(index, self.n_qubits)
    }

    pub fn product(&self, m: usize, n: usize) -> (usize, num_complex::Complex64) {
        pauli_product(m, n, self.n_qubits)
    }
}

/// `(letter, power of i)` for the single-qubit product `sigma_a sigma_b`.
fn single_product(a: usize, b: usize) -> (usize, u8) {
    if a == 0 {
        return (b, 0);
    }
    if b == 0 || a == b {
        return (a ^ b, 0);
    }
    let c = 6 - a - b;
    if (b + 3 - a) % 3 == 1 {
        (c, 1)
    } else {
        (c, 3)
    }
}

const PHASES: [num_complex::Complex64; 4] = [ONE, I, c_neg_one(), c_neg_i()];

const fn c_neg_one() -> num_complex::Complex64 {
    num_complex::Complex64 { re: -1.0, im: 0.0 }
}

const fn c_neg_i() -> num_complex::Complex64 {
    num_complex::Complex64 { re: 0.0, im: -1.0 }
}

/// `E_m E_n = phase * E_result`, computed factor by factor.
pub fn pauli_product(m: usize, n: usize, n_qubits: usize) -> (usize, num_complex::Complex64) {
    let (idx, k) = pauli_product_pow(m, n, n_qubits);
    (idx, PHASES[k as usize])
}

/// Same as [`pauli_product`] with the phase given as a power of `i` (0..4).
pub fn pauli_product_pow(m: usize, n: usize, n_qubits: usize) -> (usize, u8) {
    let mut idx = 0;
    let mut pow = 0u8;
    for q in 0..n_qubits {
        let (l, p) = single_product((m >> (2 * q)) & 3, (n >> (2 * q)) & 3);
        idx |= l << (2 * q);
        pow = (pow + p) & 3;
    }
    (idx, pow)
}

/// Product phase table over all pairs, `table[m * d2 + n] = (index, phase)`.
pub fn product_table(n_qubits: usize) -> Vec<(usize, num_complex::Complex64)> {
    let d2 = 1 << (2 * n_qubits);
    let mut t = Vec::with_capacity(d2 * d2);
    for m in 0..d2 {
        for n in 0..d2 {
            t.push(pauli_product(m, n, n_qubits));
        }
    }
    t
}

pub fn expand_in_pauli(m: &Mat, basis: &PauliBasis) -> Result<PauliCoefficients> {
    if m.nrows() != basis.dim || m.ncols() != basis.dim {
        return Err(Error::Dimension { expected: basis.dim, got: m.nrows() });
    }
    let inv_d = 1.0 / basis.dim as f64;
    Ok(Vector::from_iterator(
        basis.len(),
        basis.operators.iter().map(|e| e.dotc(m) * inv_d),
    ))
}

pub fn reconstruct(coeffs: &PauliCoefficients, basis: &PauliBasis) -> Mat {
    let mut out = Mat::zeros(basis.dim, basis.dim);
    for (k, e) in basis.operators.iter().enumerate() {
        if coeffs[k] != ZERO {
            out += e * coeffs[k];
        }
    }
    out
}

/// Rotates the global phase so that the identity coefficient is real and non-negative.
/// The flag is set (and the input returned unchanged) when that coefficient vanishes.
pub fn phase_fix(coeffs: &PauliCoefficients) -> (PauliCoefficients, bool) {
    let u0 = coeffs[0];
    if u0.norm() < 1e-12 {
        return (coeffs.clone(), true);
    }
    let rot = u0.conj() / u0.norm();
    let mut out = coeffs * rot;
    out[0] = c(out[0].re, 0.0);
    (out, false)
}
