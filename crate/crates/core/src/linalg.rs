//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C = Complex64;
pub type Mat = DMatrix<C>;
pub type Vector = DVector<C>;

pub const ZERO: C = C::new(0.0, 0.0);
pub const ONE: C = C::new(1.0, 0.0);
pub const I: C = C::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn eye(d: usize) -> Mat {
    Mat::identity(d, d)
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn trace(m: &Mat) -> C {
    m.diagonal().iter().sum()
}

pub fn hermitian_part(m: &Mat) -> Mat {
    (m + m.adjoint()).scale(0.5)
}

pub fn is_hermitian(m: &Mat, tol: f64) -> bool {
    m.is_square() && max_abs_diff(m, &m.adjoint()) <= tol
}

pub fn is_unitary(u: &Mat, tol: f64) -> bool {
    u.is_square() && max_abs_diff(&(u.adjoint() * u), &eye(u.nrows())) <= tol
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn outer(a: &Vector, b: &Vector) -> Mat {
    a * b.adjoint()
}

/// Hermitian eigendecomposition, eigenvalues in descending order.
pub fn eigh(m: &Mat) -> (Vec<f64>, Mat) {
    let h = hermitian_part(m);
    let eig = SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Eigenvalues at or below `EIG_FLOOR * lambda_max` count as zero when taking roots.
pub const EIG_FLOOR: f64 = 1e-13;

pub fn clip_eigenvalues(vals: &[f64]) -> Vec<f64> {
    let top = vals.iter().cloned().fold(0.0, f64::max);
    vals.iter().map(|&v| if v <= EIG_FLOOR * top { 0.0 } else { v }).collect()
}

/// Square root of a positive semidefinite matrix; eigenvalues near or below zero are clipped.
pub fn sqrtm_psd(m: &Mat) -> Mat {
    let (vals, vecs) = eigh(m);
    let vals = clip_eigenvalues(&vals);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for k in 0..n {
        let s = vals[k].sqrt();
        for r in 0..n {
            scaled[(r, k)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

pub fn expm(m: &Mat) -> Mat {
    m.clone().exp()
}

/// Moore-Penrose pseudo-inverse with singular values below `rel_cutoff * sigma_max` dropped.
/// Also returns the numerical rank.
pub fn pinv(a: &Mat, rel_cutoff: f64) -> (Mat, usize) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = rel_cutoff * smax;
    let mut out = Mat::zeros(a.ncols(), a.nrows());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            let v = vt.row(k).adjoint();
            let uk = u.column(k).adjoint();
            out += (v * uk).scale(1.0 / s);
        }
    }
    (out, rank)
}

/// Pseudo-inverse of a Hermitian matrix through its eigendecomposition, with the numerical rank.
pub fn pinv_hermitian(a: &Mat, rel_cutoff: f64) -> (Mat, usize) {
    let (vals, vecs) = eigh(a);
    let top = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut out = Mat::zeros(a.nrows(), a.ncols());
    let mut rank = 0;
    for (k, &v) in vals.iter().enumerate() {
        if v.abs() > rel_cutoff * top && v != 0.0 {
            rank += 1;
            let col = vecs.column(k);
            out += (&col * col.adjoint()).scale(1.0 / v);
        }
    }
    (out, rank)
}

/// Orthonormal basis (as columns) of the numerical null space of `a`.
pub fn null_space(a: &Mat, rel_cutoff: f64) -> Mat {
    let n = a.ncols();
    // Work with the Gram matrix so that wide and tall inputs are handled alike.
    let g = a.adjoint() * a;
    let (vals, vecs) = eigh(&g);
    let smax = vals.first().cloned().unwrap_or(0.0).max(0.0);
    let cut = (rel_cutoff * smax.sqrt()).powi(2);
    let cols: Vec<usize> = (0..n).filter(|&k| vals[k] <= cut).collect();
    let mut out = Mat::zeros(n, cols.len());
    for (j, &k) in cols.iter().enumerate() {
        out.set_column(j, &vecs.column(k));
    }
    out
}

pub fn qubits_for_dim(d: usize) -> Option<usize> {
    if d.is_power_of_two() && d >= 2 {
        Some(d.trailing_zeros() as usize)
    } else {
        None
    }
}
