#![allow(dead_code)]

use chi::lindblad::{dephasing_channel, relaxation_channel, GateSchedule, LindbladChannel, Segment};
use chi::linalg::{self, c, expm, Mat};
use chi::process_matrix::{chi_from_kraus, chi_from_unitary};
use chi::ProcessMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ginibre(rng: &mut ChaCha8Rng, d: usize) -> Mat {
    Mat::from_fn(d, d, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Mat {
    let g = ginibre(rng, d);
    (&g + g.adjoint()).scale(0.5 * scale)
}

pub fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> Mat {
    expm(&(random_hermitian(rng, d, 2.0) * c(0.0, 1.0)))
}

pub fn small_unitary(rng: &mut ChaCha8Rng, d: usize, eps: f64) -> Mat {
    expm(&(random_hermitian(rng, d, eps) * c(0.0, 1.0)))
}

/// Random CPTP map from `k` Ginibre Kraus operators.
pub fn random_channel(rng: &mut ChaCha8Rng, n_qubits: usize, k: usize) -> ProcessMatrix {
    let d = 1 << n_qubits;
    let ks: Vec<Mat> = (0..k).map(|_| ginibre(rng, d)).collect();
    let s = ks.iter().fold(Mat::zeros(d, d), |acc, a| acc + a.adjoint() * a);
    let (vals, vecs) = linalg::eigh(&s);
    let inv_sqrt = &vecs
        * Mat::from_diagonal(&linalg::Vector::from_iterator(d, vals.iter().map(|v| c(1.0 / v.sqrt(), 0.0))))
        * vecs.adjoint();
    let terms: Vec<(f64, Mat)> = ks.iter().map(|a| (1.0, a * &inv_sqrt)).collect();
    chi_from_kraus(&terms, false).unwrap()
}

/// `(1 - p) chi_U + p chi_random` with `U` a small random unitary.
pub fn near_identity_channel(rng: &mut ChaCha8Rng, n_qubits: usize, eps: f64, p: f64) -> ProcessMatrix {
    let d = 1 << n_qubits;
    let u = chi_from_unitary(&small_unitary(rng, d, eps)).unwrap();
    let r = random_channel(rng, n_qubits, 2);
    ProcessMatrix { n_qubits, entries: u.entries.scale(1.0 - p) + r.entries.scale(p) }
}

/// Relaxation and dephasing on every qubit with `sum Gamma t_G` equal to `budget`.
pub fn decoherence_channels(rng: &mut ChaCha8Rng, n_qubits: usize, t_g: f64, budget: f64) -> Vec<LindbladChannel> {
    let weights: Vec<f64> = (0..2 * n_qubits).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::new();
    for q in 0..n_qubits {
        let g1 = budget * weights[2 * q] / total / t_g;
        let gphi = budget * weights[2 * q + 1] / total / t_g;
        out.push(relaxation_channel(1.0 / g1, q, n_qubits));
        out.push(dephasing_channel(1.0 / (2.0 * gphi), q, n_qubits));
    }
    out
}

/// Piecewise schedule with random Hamiltonians of norm up to `h_scale / t_G` and the given decoherence budget.
pub fn random_schedule(rng: &mut ChaCha8Rng, n_qubits: usize, n_seg: usize, h_scale: f64, budget: f64) -> GateSchedule {
    let d = 1 << n_qubits;
    let t_g = 1.0;
    let cuts: Vec<f64> = (0..n_seg).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = cuts.iter().sum();
    let channels = decoherence_channels(rng, n_qubits, t_g, budget);
    let segments = cuts
        .iter()
        .map(|w| Segment {
            duration: t_g * w / total,
            hamiltonian: random_hermitian(rng, d, h_scale / t_g),
            channels: channels.clone(),
        })
        .collect();
    GateSchedule::new(segments).unwrap()
}

pub fn max_abs(m: &Mat) -> f64 {
    linalg::max_abs(m)
}
