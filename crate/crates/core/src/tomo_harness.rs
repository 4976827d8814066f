//! Simulated process tomography: input states, Pauli measurement settings, finite-shot
//! sampling, and linear-inversion reconstruction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::composition::compose_exact;
use crate::error::{invalid, Error, Result};
use crate::error_matrix::{to_error_matrix, Convention, ErrorMatrix};
use crate::linalg::{self, c, kron, Mat, Vector, ONE, ZERO};
use crate::lindblad::{exact_channel_chi, GateSchedule};
use crate::pauli_basis::{self, pauli_matrix};
use crate::process_matrix::{
    apply, chi_from_kraus, chi_from_superop, chi_from_unitary, completeness_operator, is_trace_preserving,
    superop_from_pairs, ProcessMatrix,
};
use crate::spam::SpamModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Finite(u64),
    Infinite,
}

impl Shots {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "inf" | "infinite" | "∞" => Ok(Self::Infinite),
            _ => match s.parse::<u64>() {
                Ok(n) if n > 0 => Ok(Self::Finite(n)),
                _ => invalid(format!("shots must be a positive integer or 'inf', got {s:?}")),
            },
        }
    }
}

/// Single-qubit input kets `|0>, |1>, |+>, |+i>`.
fn single_inputs() -> [Vector; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        Vector::from_vec(vec![ONE, ZERO]),
        Vector::from_vec(vec![ZERO, ONE]),
        Vector::from_vec(vec![c(h, 0.0), c(h, 0.0)]),
        Vector::from_vec(vec![c(h, 0.0), c(0.0, h)]),
    ]
}

/// The `4^N` product input kets, leftmost qubit most significant.
pub fn input_kets(n_qubits: usize) -> Vec<Vector> {
    let singles = single_inputs();
    let mut out = vec![Vector::from_element(1, ONE)];
    for _ in 0..n_qubits {
        out = out
            .iter()
            .flat_map(|a| singles.iter().map(move |b| a.kronecker(b)))
            .collect();
    }
    out
}

/// The `3^N` measurement settings as strings over `X`, `Y`, `Z`.
pub fn measurement_settings(n_qubits: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    for _ in 0..n_qubits {
        out = out.iter().flat_map(|p| ["X", "Y", "Z"].map(|g| format!("{p}{g}"))).collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographySetup {
    pub n_qubits: usize,
    pub input_states: Vec<Mat>,
    pub settings: Vec<String>,
    pub shots: Shots,
}

impl TomographySetup {
    pub fn new(n_qubits: usize, shots: Shots) -> Result<Self> {
        if n_qubits == 0 || n_qubits > pauli_basis::DEFAULT_MAX_QUBITS {
            return invalid(format!("n_qubits must be in 1..={}", pauli_basis::DEFAULT_MAX_QUBITS));
        }
        let input_states = input_kets(n_qubits).iter().map(|k| linalg::outer(k, k)).collect();
        Ok(Self { n_qubits, input_states, settings: measurement_settings(n_qubits), shots })
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }
}

/// Projector for outcome `k` of `setting`: bit `q` of `k` (leftmost qubit most significant) set means eigenvalue -1.
fn outcome_projectors(setting: &str) -> Vec<Mat> {
    let n = setting.len();
    let ops: Vec<Mat> = setting
        .chars()
        .map(|ch| pauli_basis::single(match ch {
            'X' => 1,
            'Y' => 2,
            _ => 3,
        }))
        .collect();
    (0..1usize << n)
        .map(|k| {
            let mut p = Mat::from_element(1, 1, ONE);
            for (q, op) in ops.iter().enumerate() {
                let bit = (k >> (n - 1 - q)) & 1;
                let sign = if bit == 0 { 1.0 } else { -1.0 };
                p = kron(&p, &((linalg::eye(2) + op.scale(sign)).scale(0.5)));
            }
            p
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub input: usize,
    pub setting: usize,
    /// Raw counts; absent for infinite shots.
    pub counts: Option<Vec<u64>>,
    pub frequencies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyDataset {
    pub n_qubits: usize,
    pub records: Vec<Record>,
    pub shots: Shots,
    pub seed: u64,
}

/// Multinomial draw by chained binomials.
fn multinomial(rng: &mut ChaCha8Rng, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut left = n;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        if k + 1 == probs.len() {
            out.push(left);
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let x = if left == 0 || q == 0.0 { 0 } else { Binomial::new(left, q).expect("valid p").sample(rng) };
        out.push(x);
        left -= x;
        mass -= p;
    }
    out
}

/// Simulates every (input, setting) record of `channel` bracketed by `spam`.
pub fn simulate_dataset(
    channel: &ProcessMatrix,
    spam: &SpamModel,
    setup: &TomographySetup,
    rng_seed: u64,
) -> Result<TomographyDataset> {
    if channel.n_qubits != setup.n_qubits || spam.n_qubits() != setup.n_qubits {
        return Err(Error::Dimension { expected: setup.dim(), got: channel.dim() });
    }
    if !is_trace_preserving(channel, crate::tol::get(crate::tol::COMPLETENESS)) {
        return invalid("channel is not trace preserving");
    }
    let outputs = setup
        .input_states
        .iter()
        .map(|rho| apply(&spam.chi_meas, &apply(channel, &apply(&spam.chi_prep, rho)?)?))
        .collect::<Result<Vec<_>>>()?;
    let projectors: Vec<Vec<Mat>> = setup.settings.iter().map(|s| outcome_projectors(s)).collect();
    let n_set = setup.settings.len();
    let records = (0..outputs.len() * n_set)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n_set, idx % n_set);
            let probs: Vec<f64> = projectors[j]
                .iter()
                .map(|p| linalg::trace(&(p * &outputs[i])).re.max(0.0))
                .collect();
            let total: f64 = probs.iter().sum();
            let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
            match setup.shots {
                Shots::Infinite => Record { input: i, setting: j, counts: None, frequencies: probs },
                Shots::Finite(n) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
                    rng.set_stream(idx as u64);
                    let counts = multinomial(&mut rng, n, &probs);
                    let frequencies = counts.iter().map(|&k| k as f64 / n as f64).collect();
                    Record { input: i, setting: j, counts: Some(counts), frequencies }
                }
            }
        })
        .collect();
    Ok(TomographyDataset { n_qubits: setup.n_qubits, records, shots: setup.shots, seed: rng_seed })
}

/// Output density matrices estimated from Pauli expectation values, one per input.
pub fn estimate_outputs(dataset: &TomographyDataset, setup: &TomographySetup) -> Result<Vec<Mat>> {
    let n = setup.n_qubits;
    let d = setup.dim();
    let d2 = d * d;
    let n_in = setup.input_states.len();
    let n_set = setup.settings.len();
    let mut sums = vec![vec![0.0; d2]; n_in];
    let mut hits = vec![vec![0usize; d2]; n_in];
    let mut seen = vec![false; n_in * n_set];
    for r in &dataset.records {
        if r.input >= n_in || r.setting >= n_set || r.frequencies.len() != d {
            return invalid("dataset record does not match the setup");
        }
        seen[r.input * n_set + r.setting] = true;
        let setting = setup.settings[r.setting].as_bytes();
        // Every Pauli string whose non-identity letters agree with the setting.
        for p in 0..d2 {
            let mut ok = true;
            let mut mask = 0usize;
            for q in 0..n {
                let letter = (p >> (2 * (n - 1 - q))) & 3;
                if letter == 0 {
                    continue;
                }
                if b"?XYZ"[letter] != setting[q] {
                    ok = false;
                    break;
                }
                mask |= 1 << (n - 1 - q);
            }
            if !ok {
                continue;
            }
            let ev: f64 = r
                .frequencies
                .iter()
                .enumerate()
                .map(|(k, f)| if (k & mask).count_ones() % 2 == 0 { *f } else { -*f })
                .sum();
            sums[r.input][p] += ev;
            hits[r.input][p] += 1;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::RankDeficient { directions: vec!["dataset is missing (input, setting) records".into()] });
    }
    Ok((0..n_in)
        .map(|i| {
            let mut rho = Mat::zeros(d, d);
            for p in 0..d2 {
                rho += pauli_matrix(p, n).scale(sums[i][p] / hits[i][p] as f64);
            }
            rho.scale(1.0 / d as f64)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reconstruction {
    #[default]
    LinearInversion,
    /// Linear inversion, then negative eigenvalues clipped and trace preservation restored.
    Projected,
}

pub fn reconstruct_chi(dataset: &TomographyDataset, setup: &TomographySetup) -> Result<ProcessMatrix> {
    reconstruct_chi_with(dataset, setup, Reconstruction::LinearInversion)
}

pub fn reconstruct_chi_with(
    dataset: &TomographyDataset,
    setup: &TomographySetup,
    mode: Reconstruction,
) -> Result<ProcessMatrix> {
    let outputs = estimate_outputs(dataset, setup)?;
    let chi = chi_from_pairs(&setup.input_states, &outputs)?;
    match mode {
        Reconstruction::LinearInversion => Ok(chi),
        Reconstruction::Projected => project_cptp(&chi),
    }
}

fn chi_from_pairs(inputs: &[Mat], outputs: &[Mat]) -> Result<ProcessMatrix> {
    let mut chi = chi_from_superop(&superop_from_pairs(inputs, outputs)?)?;
    chi.entries = linalg::hermitian_part(&chi.entries);
    Ok(chi)
}

/// Clips negative eigenvalues, then right-multiplies every Kraus operator by `C^{-1/2}`
/// with `C` the completeness operator so the result is trace preserving.
pub fn project_cptp(chi: &ProcessMatrix) -> Result<ProcessMatrix> {
    let (vals, vecs) = linalg::eigh(&chi.entries);
    let mut clipped = Mat::zeros(chi.d2(), chi.d2());
    for (k, v) in vals.iter().enumerate() {
        if *v > 0.0 {
            let col = vecs.column(k).into_owned();
            clipped += linalg::outer(&col, &col).scale(*v);
        }
    }
    let clipped = ProcessMatrix { n_qubits: chi.n_qubits, entries: clipped };
    let comp = linalg::hermitian_part(&completeness_operator(&clipped));
    let (cv, cvecs) = linalg::eigh(&comp);
    if cv.iter().any(|&v| v <= 1e-12 * cv[0].max(1e-300)) {
        return Err(Error::Numerical("completeness operator is singular after clipping".into()));
    }
    let inv_sqrt = &cvecs * Mat::from_diagonal(&Vector::from_iterator(cv.len(), cv.iter().map(|v| c(1.0 / v.sqrt(), 0.0)))) * cvecs.adjoint();
    let fix = chi_from_kraus(&[(1.0, inv_sqrt)], true)?;
    let mut out = compose_exact(&clipped, &fix)?;
    out.entries = linalg::hermitian_part(&out.entries);
    Ok(out)
}

#[derive(Debug, Clone)]
pub enum GateSource {
    Unitary(Mat),
    Schedule(GateSchedule),
    Channel(ProcessMatrix),
}

impl GateSource {
    pub fn channel(&self) -> Result<ProcessMatrix> {
        match self {
            Self::Unitary(u) => chi_from_unitary(u),
            Self::Schedule(s) => exact_channel_chi(s),
            Self::Channel(c) => Ok(c.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtractionRoute {
    /// Reconstruct `chi`, then factor the desired unitary out.
    #[default]
    TransformChi,
    /// Undo the desired unitary on the states, then reconstruct the error matrix directly.
    TransformRho,
}

/// Simulate, reconstruct and convert to an error matrix.
pub fn run_qpt_experiment(
    gate: &GateSource,
    u_des: &Mat,
    spam: &SpamModel,
    setup: &TomographySetup,
    seed: u64,
    convention: Convention,
    route: ExtractionRoute,
) -> Result<ErrorMatrix> {
    let channel = gate.channel()?;
    if u_des.nrows() != setup.dim() {
        return Err(Error::Dimension { expected: setup.dim(), got: u_des.nrows() });
    }
    let data = simulate_dataset(&channel, spam, setup, seed)?;
    match route {
        ExtractionRoute::TransformChi => to_error_matrix(&reconstruct_chi(&data, setup)?, u_des, convention),
        ExtractionRoute::TransformRho => {
            let outputs = estimate_outputs(&data, setup)?;
            let ud = u_des.adjoint();
            let (inputs, outputs): (Vec<Mat>, Vec<Mat>) = match convention {
                Convention::ErrorAfter => (
                    setup.input_states.iter().map(|r| u_des * r * &ud).collect(),
                    outputs,
                ),
                Convention::ErrorBefore => (
                    setup.input_states.clone(),
                    outputs.iter().map(|r| &ud * r * u_des).collect(),
                ),
            };
            ErrorMatrix::new(chi_from_pairs(&inputs, &outputs)?, convention, u_des.clone())
        }
    }
}
