//! Lindblad master equation over piecewise-constant schedules, the first-order error
//! pattern it produces, closed-form decoherence channels, and a jump/no-jump
//! trajectory sampler used as an independent check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::error_matrix::{to_error_matrix, w_matrix, Convention, ErrorMatrix};
use crate::linalg::{self, c, expm, kron, Mat, Vector, I, ONE, ZERO};
use crate::pauli_basis::{cached_basis, expand_in_pauli, PauliCoefficients};
use crate::process_matrix::{chi_from_superop, superop_from_pairs, unvec, vec_of, ProcessMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladChannel {
    pub rate: f64,
    pub operator: Mat,
}

impl LindbladChannel {
    pub fn new(rate: f64, operator: Mat) -> Self {
        Self { rate, operator }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub duration: f64,
    pub hamiltonian: Mat,
    pub channels: Vec<LindbladChannel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateSchedule {
    pub segments: Vec<Segment>,
}

impl GateSchedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let s = Self { segments };
        s.validate()?;
        Ok(s)
    }

    /// One segment with constant `h` and `channels`.
    pub fn constant(duration: f64, h: Mat, channels: Vec<LindbladChannel>) -> Result<Self> {
        Self::new(vec![Segment { duration, hamiltonian: h, channels }])
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.segments.first() else {
            return invalid("schedule has no segments");
        };
        let d = first.hamiltonian.nrows();
        for seg in &self.segments {
            if !(seg.duration > 0.0 && seg.duration.is_finite()) {
                return invalid("segment durations must be positive");
            }
            if seg.hamiltonian.shape() != (d, d) {
                return Err(Error::Dimension { expected: d, got: seg.hamiltonian.nrows() });
            }
            if !linalg::is_hermitian(&seg.hamiltonian, 1e-12) {
                return invalid("segment Hamiltonian is not Hermitian");
            }
            for ch in &seg.channels {
                if !(ch.rate >= 0.0 && ch.rate.is_finite()) {
                    return invalid("channel rates must be non-negative");
                }
                if ch.operator.shape() != (d, d) {
                    return Err(Error::Dimension { expected: d, got: ch.operator.nrows() });
                }
                if ch.operator.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return invalid("channel operator is not finite");
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.segments[0].hamiltonian.nrows()
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Time-ordered unitary of the Hamiltonian part.
    pub fn unitary(&self) -> Mat {
        let d = self.dim();
        self.segments.iter().fold(linalg::eye(d), |acc, s| segment_unitary(&s.hamiltonian, s.duration) * acc)
    }

    /// Same schedule with every Hamiltonian replaced by `h(segment index)`.
    pub fn with_hamiltonians(&self, h: impl Fn(usize) -> Mat) -> Self {
        let segments = self
            .segments
            .iter()
            .enumerate()
            .map(|(k, s)| Segment { hamiltonian: h(k), ..s.clone() })
            .collect();
        Self { segments }
    }

    /// Zeroes every identity component `b_0` and adds the compensating Hamiltonian.
    pub fn normalized(&self) -> Self {
        let segments = self
            .segments
            .iter()
            .map(|s| {
                let mut h = s.hamiltonian.clone();
                let channels = s
                    .channels
                    .iter()
                    .map(|ch| {
                        let (b, ha) = normalize_channel(ch);
                        h += ha;
                        b
                    })
                    .collect();
                Segment { duration: s.duration, hamiltonian: h, channels }
            })
            .collect();
        Self { segments }
    }
}

fn segment_unitary(h: &Mat, t: f64) -> Mat {
    if linalg::max_abs(h) == 0.0 {
        return linalg::eye(h.nrows());
    }
    expm(&(h * c(0.0, -t)))
}

/// `B -> B - b_0` with `H_a = i (Gamma/2)(b_0^* B - b_0 B^dagger)`.
pub fn normalize_channel(ch: &LindbladChannel) -> (LindbladChannel, Mat) {
    let d = ch.operator.nrows();
    let b0 = linalg::trace(&ch.operator) / d as f64;
    let ha = (&ch.operator * b0.conj() - ch.operator.adjoint() * b0) * c(0.0, ch.rate / 2.0);
    let b = &ch.operator - linalg::eye(d) * b0;
    (LindbladChannel { rate: ch.rate, operator: b }, ha)
}

/// Embeds a single-qubit operator on `qubit` (0 = leftmost) of an `n_qubits` register.
pub fn embed(op: &Mat, qubit: usize, n_qubits: usize) -> Mat {
    let mut m = Mat::from_element(1, 1, ONE);
    for q in 0..n_qubits {
        let f = if q == qubit { op.clone() } else { linalg::eye(2) };
        m = kron(&m, &f);
    }
    m
}

/// `|0><1|`.
pub fn lowering() -> Mat {
    Mat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
}

/// Energy relaxation at rate `1/T1`.
pub fn relaxation_channel(t1: f64, qubit: usize, n_qubits: usize) -> LindbladChannel {
    LindbladChannel::new(1.0 / t1, embed(&lowering(), qubit, n_qubits))
}

/// Pure dephasing `B = Z` at rate `1/(2 T_phi)`.
pub fn dephasing_channel(t_phi: f64, qubit: usize, n_qubits: usize) -> LindbladChannel {
    LindbladChannel::new(1.0 / (2.0 * t_phi), embed(&crate::pauli_basis::single(3), qubit, n_qubits))
}

/// Downward and upward rates `1/(T1 (1 + e^{-E/T}))`, `1/(T1 (1 + e^{E/T}))`.
pub fn thermal_rates(t1: f64, e_over_t: f64) -> (f64, f64) {
    if e_over_t.is_infinite() && e_over_t > 0.0 {
        return (1.0 / t1, 0.0);
    }
    (1.0 / (t1 * (1.0 + (-e_over_t).exp())), 1.0 / (t1 * (1.0 + e_over_t.exp())))
}

pub fn thermal_channels(t1: f64, e_over_t: f64, qubit: usize, n_qubits: usize) -> Vec<LindbladChannel> {
    let (down, up) = thermal_rates(t1, e_over_t);
    vec![
        LindbladChannel::new(down, embed(&lowering(), qubit, n_qubits)),
        LindbladChannel::new(up, embed(&lowering().transpose(), qubit, n_qubits)),
    ]
}

/// Column-stacked Lindbladian for constant `h` and `channels`.
pub fn lindbladian(h: &Mat, channels: &[LindbladChannel]) -> Mat {
    let d = h.nrows();
    let id = linalg::eye(d);
    let mut l = (kron(&id, h) - kron(&h.transpose(), &id)) * c(0.0, -1.0);
    for ch in channels {
        if ch.rate == 0.0 {
            continue;
        }
        let b = &ch.operator;
        let bdb = b.adjoint() * b;
        let term = kron(&b.map(|z| z.conj()), b) - (kron(&id, &bdb) + kron(&bdb.transpose(), &id)).scale(0.5);
        l += term.scale(ch.rate);
    }
    l
}

/// Right-hand side of the master equation for constant `h` and `channels`.
pub fn lindblad_rhs(h: &Mat, channels: &[LindbladChannel], rho: &Mat) -> Mat {
    let mut out = (h * rho - rho * h) * c(0.0, -1.0);
    for ch in channels {
        let b = &ch.operator;
        let bdb = b.adjoint() * b;
        out += (b * rho * b.adjoint() - (&bdb * rho + rho * &bdb).scale(0.5)).scale(ch.rate);
    }
    out
}

/// Superoperator of the whole schedule, each segment exponentiated exactly.
pub fn schedule_superop(schedule: &GateSchedule) -> Mat {
    let d = schedule.dim();
    schedule.segments.iter().fold(linalg::eye(d * d), |acc, s| {
        expm(&lindbladian(&s.hamiltonian, &s.channels).scale(s.duration)) * acc
    })
}

pub fn propagate_density(schedule: &GateSchedule, rho0: &Mat) -> Result<Mat> {
    schedule.validate()?;
    let d = schedule.dim();
    if rho0.shape() != (d, d) {
        return Err(Error::Dimension { expected: d, got: rho0.nrows() });
    }
    let out = unvec(&(schedule_superop(schedule) * vec_of(rho0)), d);
    Ok(linalg::hermitian_part(&out))
}

pub fn exact_channel_chi(schedule: &GateSchedule) -> Result<ProcessMatrix> {
    schedule.validate()?;
    if linalg::qubits_for_dim(schedule.dim()).is_none() {
        return invalid("process matrices need a qubit register");
    }
    let mut chi = chi_from_superop(&schedule_superop(schedule))?;
    chi.entries = linalg::hermitian_part(&chi.entries);
    Ok(chi)
}

/// Pauli coefficients `b_n = Tr(B E_n)/d`.
fn coeffs(m: &Mat) -> PauliCoefficients {
    let n = linalg::qubits_for_dim(m.nrows()).expect("qubit register");
    expand_in_pauli(m, cached_basis(n).expect("within cap")).expect("square")
}

/// `B_mn = b_m b_n^* - (c_m delta_n0 + c_n^* delta_m0)/2` for one jump operator.
pub fn b_pattern(b: &Mat) -> Mat {
    let bv = coeffs(b);
    let cv = coeffs(&(b.adjoint() * b));
    let mut m = linalg::outer(&bv, &bv);
    let d2 = m.nrows();
    for k in 0..d2 {
        m[(k, 0)] -= cv[k] * 0.5;
        m[(0, k)] -= cv[k].conj() * 0.5;
    }
    m
}

/// First-order pattern of `-i[H, rho]`: `-i h_m` down column 0, `+i h_n` along row 0.
pub fn hamiltonian_pattern(h: &Mat) -> Mat {
    let hv = coeffs(h);
    let d2 = hv.len();
    let mut m = Mat::zeros(d2, d2);
    for k in 0..d2 {
        m[(k, 0)] += hv[k] * c(0.0, -1.0);
        m[(0, k)] += hv[k].conj() * I;
    }
    m
}

/// Largest sub-step `Gamma dt` in the first-order quadrature.
pub const QUADRATURE_RATE_STEP: f64 = 1e-3;
/// Largest sub-step `||H|| dt` in the first-order quadrature.
pub const QUADRATURE_PHASE_STEP: f64 = 0.02;

fn spectral_radius(h: &Mat) -> f64 {
    linalg::eigh(h).0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn substeps(seg: &Segment) -> usize {
    let rate: f64 = seg.channels.iter().map(|c| c.rate).fold(0.0, f64::max);
    let by_rate = (rate * seg.duration / QUADRATURE_RATE_STEP).ceil();
    let by_phase = (spectral_radius(&seg.hamiltonian) * seg.duration / QUADRATURE_PHASE_STEP).ceil();
    by_rate.max(by_phase).max(1.0) as usize
}

/// Midpoint samples `(U(t), dt, segment index)` over the schedule.
fn midpoints(schedule: &GateSchedule) -> Vec<(Mat, f64, usize)> {
    let d = schedule.dim();
    let mut out = Vec::new();
    let mut start = linalg::eye(d);
    for (k, seg) in schedule.segments.iter().enumerate() {
        let n = substeps(seg);
        let dt = seg.duration / n as f64;
        for j in 0..n {
            let u = segment_unitary(&seg.hamiltonian, (j as f64 + 0.5) * dt) * &start;
            out.push((u, dt, k));
        }
        start = segment_unitary(&seg.hamiltonian, seg.duration) * start;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FirstOrderOptions {
    /// Adds `chi_m0 chi_n0^*` to the entries with `m, n != 0`.
    pub second_order_patch: bool,
}

/// `chi^I + int Gamma W_rem B W_rem^dagger dt` (after) or `chi^I + int Gamma W^dagger B W dt` (before).
pub fn first_order_error(schedule: &GateSchedule, convention: Convention) -> Result<ErrorMatrix> {
    first_order_error_with(schedule, convention, FirstOrderOptions::default())
}

pub fn first_order_error_with(
    schedule: &GateSchedule,
    convention: Convention,
    opts: FirstOrderOptions,
) -> Result<ErrorMatrix> {
    schedule.validate()?;
    let d = schedule.dim();
    let Some(n_q) = linalg::qubits_for_dim(d) else {
        return invalid("error matrices need a qubit register");
    };
    let norm = schedule.normalized();
    // Per-segment generator in the Pauli representation, before transport.
    let gens: Vec<Mat> = schedule
        .segments
        .iter()
        .zip(&norm.segments)
        .map(|(raw, n)| {
            let mut g = Mat::zeros(d * d, d * d);
            for ch in &n.channels {
                if ch.rate != 0.0 {
                    g += b_pattern(&ch.operator).scale(ch.rate);
                }
            }
            let ha = &n.hamiltonian - &raw.hamiltonian;
            if linalg::max_abs(&ha) > 0.0 {
                g += hamiltonian_pattern(&ha);
            }
            g
        })
        .collect();
    let u_total = schedule.unitary();
    let mut acc = Mat::zeros(d * d, d * d);
    for (u, dt, k) in midpoints(schedule) {
        if linalg::max_abs(&gens[k]) == 0.0 {
            continue;
        }
        let term = match convention {
            Convention::ErrorAfter => {
                let w = w_matrix(&(&u_total * u.adjoint()))?;
                &w * &gens[k] * w.adjoint()
            }
            Convention::ErrorBefore => {
                let w = w_matrix(&u)?;
                w.adjoint() * &gens[k] * &w
            }
        };
        acc += term.scale(dt);
    }
    acc[(0, 0)] += ONE;
    if opts.second_order_patch {
        let col = acc.column(0).into_owned();
        let d2 = d * d;
        for m in 1..d2 {
            for n in 1..d2 {
                acc[(m, n)] += col[m] * col[n].conj();
            }
        }
    }
    let chi = ProcessMatrix { n_qubits: n_q, entries: linalg::hermitian_part(&acc) };
    ErrorMatrix::new(chi, convention, u_total)
}

/// Same integral evaluated by transforming the jump operators, `B(t) = U_rem B U_rem^dagger`.
pub fn first_order_error_transformed_operators(schedule: &GateSchedule, convention: Convention) -> Result<ErrorMatrix> {
    schedule.validate()?;
    let d = schedule.dim();
    let Some(n_q) = linalg::qubits_for_dim(d) else {
        return invalid("error matrices need a qubit register");
    };
    let norm = schedule.normalized();
    let u_total = schedule.unitary();
    let mut acc = Mat::zeros(d * d, d * d);
    for (u, dt, k) in midpoints(schedule) {
        let t = match convention {
            Convention::ErrorAfter => &u_total * u.adjoint(),
            Convention::ErrorBefore => u.adjoint(),
        };
        let move_op = |m: &Mat| &t * m * t.adjoint();
        for ch in &norm.segments[k].channels {
            if ch.rate != 0.0 {
                acc += b_pattern(&move_op(&ch.operator)).scale(ch.rate * dt);
            }
        }
        let ha = &norm.segments[k].hamiltonian - &schedule.segments[k].hamiltonian;
        if linalg::max_abs(&ha) > 0.0 {
            acc += hamiltonian_pattern(&move_op(&ha)).scale(dt);
        }
    }
    acc[(0, 0)] += ONE;
    ErrorMatrix::new(ProcessMatrix { n_qubits: n_q, entries: acc }, convention, u_total)
}

/// `1 - int Gamma sum_{n != 0} |b_n|^2 dt`. Reads only rates, durations and jump operators.
pub fn first_order_fidelity(schedule: &GateSchedule) -> Result<f64> {
    schedule.validate()?;
    let mut loss = 0.0;
    for seg in &schedule.segments {
        for ch in &seg.channels {
            let b = coeffs(&ch.operator);
            let s: f64 = b.iter().skip(1).map(|z| z.norm_sqr()).sum();
            loss += ch.rate * seg.duration * s;
        }
    }
    Ok(1.0 - loss)
}

/// Exact error matrix of the schedule relative to its own Hamiltonian evolution.
pub fn exact_error_matrix(schedule: &GateSchedule, convention: Convention) -> Result<ErrorMatrix> {
    to_error_matrix(&exact_channel_chi(schedule)?, &schedule.unitary(), convention)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub final_state: Vector,
    /// `(time, channel index within its segment)` for every jump.
    pub jumps: Vec<(f64, usize)>,
}

/// Bound on the total jump probability of a single step.
pub const MAX_STEP_JUMP_PROBABILITY: f64 = 0.9e-3;
/// Refuses schedules that would need more steps than this per segment.
pub const MAX_TRAJECTORY_STEPS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, Default)]
pub struct TrajectoryOptions {
    /// Fails when the top basis level of a truncated space exceeds [`LEAKAGE_LIMIT`].
    pub monitor_top_level: bool,
}

pub const LEAKAGE_LIMIT: f64 = 1e-6;

struct SegmentPlan {
    steps: usize,
    dt: f64,
    unitary: Option<Mat>,
    jumps: Vec<(f64, Mat)>,
    no_jump: Mat,
}

fn operator_norm_sq(b: &Mat) -> f64 {
    linalg::eigh(&(b.adjoint() * b)).0[0].max(0.0)
}

fn plan_segments(schedule: &GateSchedule) -> Result<Vec<SegmentPlan>> {
    let d = schedule.dim();
    schedule
        .segments
        .iter()
        .map(|seg| {
            let bound: f64 = seg.channels.iter().map(|ch| ch.rate * operator_norm_sq(&ch.operator)).sum();
            let steps = ((bound * seg.duration / MAX_STEP_JUMP_PROBABILITY).ceil() as usize).max(1);
            if steps > MAX_TRAJECTORY_STEPS {
                return Err(Error::Numerical(format!(
                    "rates too large: {steps} steps needed to keep jump probabilities below {MAX_STEP_JUMP_PROBABILITY}"
                )));
            }
            let dt = seg.duration / steps as f64;
            let unitary = (linalg::max_abs(&seg.hamiltonian) > 0.0).then(|| segment_unitary(&seg.hamiltonian, dt));
            let mut no_jump = linalg::eye(d);
            for ch in &seg.channels {
                no_jump -= (ch.operator.adjoint() * &ch.operator).scale(0.5 * dt * ch.rate);
            }
            let jumps = seg.channels.iter().map(|ch| (ch.rate * dt, ch.operator.clone())).collect();
            Ok(SegmentPlan { steps, dt, unitary, jumps, no_jump })
        })
        .collect()
}

/// Per-step operators of one segment's trajectory integration.
#[derive(Debug, Clone)]
pub struct StepKraus {
    pub steps: usize,
    pub dt: f64,
    /// `sqrt(Gamma dt) B` for each channel.
    pub jumps: Vec<Mat>,
    /// `1 - dt/2 sum Gamma B^dagger B`, applied before renormalization.
    pub no_jump: Mat,
}

pub fn step_kraus(schedule: &GateSchedule) -> Result<Vec<StepKraus>> {
    schedule.validate()?;
    Ok(plan_segments(schedule)?
        .into_iter()
        .map(|p| StepKraus {
            steps: p.steps,
            dt: p.dt,
            jumps: p.jumps.iter().map(|(w, b)| b.scale(w.sqrt())).collect(),
            no_jump: p.no_jump,
        })
        .collect())
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run_trajectory(
    plans: &[SegmentPlan],
    psi0: &Vector,
    rng: &mut ChaCha8Rng,
    opts: TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    let mut psi = psi0.clone();
    let mut tmp = psi0.clone();
    let mut jumps = Vec::new();
    let mut t = 0.0;
    let top = psi.len() - 1;
    for plan in plans {
        for _ in 0..plan.steps {
            let r: f64 = rng.random();
            let mut cum = 0.0;
            let mut jumped = false;
            for (k, (w, b)) in plan.jumps.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                tmp.gemv(ONE, b, &psi, ZERO);
                cum += w * tmp.norm_squared();
                if r < cum {
                    jumps.push((t + plan.dt, k));
                    jumped = true;
                    break;
                }
            }
            if !jumped {
                tmp.gemv(ONE, &plan.no_jump, &psi, ZERO);
            }
            let n = tmp.norm();
            tmp.unscale_mut(n);
            match &plan.unitary {
                Some(u) => psi.gemv(ONE, u, &tmp, ZERO),
                None => std::mem::swap(&mut psi, &mut tmp),
            }
            t += plan.dt;
            if opts.monitor_top_level && psi[top].norm_sqr() > LEAKAGE_LIMIT {
                return Err(Error::Numerical(format!(
                    "population {:.3e} in the top truncated level at t = {t}",
                    psi[top].norm_sqr()
                )));
            }
        }
    }
    Ok(TrajectoryRecord { final_state: psi, jumps })
}

pub fn trajectory_sample(schedule: &GateSchedule, psi0: &Vector, rng_seed: u64) -> Result<TrajectoryRecord> {
    trajectory_sample_with(schedule, psi0, rng_seed, 0, TrajectoryOptions::default())
}

/// Samples trajectory number `stream` of the ChaCha stream family keyed by `rng_seed`.
pub fn trajectory_sample_with(
    schedule: &GateSchedule,
    psi0: &Vector,
    rng_seed: u64,
    stream: u64,
    opts: TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    schedule.validate()?;
    check_ket(psi0, schedule.dim())?;
    let plans = plan_segments(schedule)?;
    if opts.monitor_top_level && psi0[psi0.len() - 1].norm_sqr() > LEAKAGE_LIMIT {
        return Err(Error::Numerical("initial state populates the top truncated level".into()));
    }
    run_trajectory(&plans, psi0, &mut rng_for(rng_seed, stream), opts)
}

fn check_ket(psi: &Vector, d: usize) -> Result<()> {
    if psi.len() != d {
        return Err(Error::Dimension { expected: d, got: psi.len() });
    }
    if (psi.norm() - 1.0).abs() > 1e-10 {
        return invalid("initial state is not normalized");
    }
    Ok(())
}

const CHUNK: usize = 1024;

/// Average of `|psi><psi|` over `n_traj` trajectories, streams `offset..offset + n_traj`.
pub fn trajectory_density(
    schedule: &GateSchedule,
    psi0: &Vector,
    n_traj: usize,
    rng_seed: u64,
    offset: u64,
    opts: TrajectoryOptions,
) -> Result<Mat> {
    schedule.validate()?;
    check_ket(psi0, schedule.dim())?;
    if n_traj == 0 {
        return invalid("n_traj must be at least 1");
    }
    let plans = plan_segments(schedule)?;
    let d = schedule.dim();
    let n_chunks = n_traj.div_ceil(CHUNK);
    let partial: Vec<Result<Mat>> = (0..n_chunks)
        .into_par_iter()
        .map(|ch| {
            let mut acc = Mat::zeros(d, d);
            for i in ch * CHUNK..((ch + 1) * CHUNK).min(n_traj) {
                let rec = run_trajectory(&plans, psi0, &mut rng_for(rng_seed, offset + i as u64), opts)?;
                acc += linalg::outer(&rec.final_state, &rec.final_state);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Mat::zeros(d, d);
    for p in partial {
        total += p?;
    }
    Ok(total.scale(1.0 / n_traj as f64))
}

/// Monte-Carlo estimate of the schedule's process matrix from `n_traj` trajectories per input state.
pub fn trajectory_channel_estimate(schedule: &GateSchedule, n_traj: usize, rng_seed: u64) -> Result<ProcessMatrix> {
    schedule.validate()?;
    let d = schedule.dim();
    let Some(n_q) = linalg::qubits_for_dim(d) else {
        return invalid("process matrices need a qubit register");
    };
    let kets = crate::tomo_harness::input_kets(n_q);
    let mut inputs = Vec::with_capacity(kets.len());
    let mut outputs = Vec::with_capacity(kets.len());
    for (k, psi) in kets.iter().enumerate() {
        let offset = (k as u64) << 40;
        outputs.push(trajectory_density(schedule, psi, n_traj, rng_seed, offset, TrajectoryOptions::default())?);
        inputs.push(linalg::outer(psi, psi));
    }
    let mut chi = chi_from_superop(&superop_from_pairs(&inputs, &outputs)?)?;
    chi.entries = linalg::hermitian_part(&chi.entries);
    Ok(chi)
}

/// `d^2` kets whose projectors span the operator space: `|j>`, `(|j> + |k>)/sqrt 2`, `(|j> + i|k>)/sqrt 2`.
pub fn spanning_kets(d: usize) -> Vec<Vector> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        let mut v = Vector::zeros(d);
        v[j] = ONE;
        out.push(v);
    }
    for j in 0..d {
        for k in j + 1..d {
            for ph in [ONE, I] {
                let mut v = Vector::zeros(d);
                v[j] = c(h, 0.0);
                v[k] = ph * h;
                out.push(v);
            }
        }
    }
    out
}

/// Monte-Carlo estimate of the column-stacked superoperator for any dimension.
pub fn trajectory_superop_estimate(
    schedule: &GateSchedule,
    n_traj: usize,
    rng_seed: u64,
    opts: TrajectoryOptions,
) -> Result<Mat> {
    schedule.validate()?;
    let kets = spanning_kets(schedule.dim());
    let mut inputs = Vec::with_capacity(kets.len());
    let mut outputs = Vec::with_capacity(kets.len());
    for (k, psi) in kets.iter().enumerate() {
        outputs.push(trajectory_density(schedule, psi, n_traj, rng_seed, (k as u64) << 40, opts)?);
        inputs.push(linalg::outer(psi, psi));
    }
    superop_from_pairs(&inputs, &outputs)
}

/// Closed-form single-qubit decoherence channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticChannel {
    /// Random Z rotation with the given averages.
    Dephasing { cos_avg: f64, sin_avg: f64 },
    /// Relaxation toward temperature `T` for time `t`; `e_over_t = inf` is zero temperature.
    Relaxation { t: f64, t1: f64, e_over_t: f64 },
    /// Relaxation followed by symmetric dephasing.
    Combined { t: f64, t1: f64, e_over_t: f64, cos_avg: f64 },
    /// Combined channel to first order in `t/T1`.
    ShortTime { t: f64, t1: f64, e_over_t: f64, cos_avg: f64 },
    /// Two-qubit controlled phase with `theta = pi + delta`, averaged with `<cos delta>` (symmetric noise).
    CzAngleFluctuation { cos_avg: f64 },
}

/// `<cos phi> = exp(-t/T_fast) exp(-(t/T_slow)^2)`.
pub fn nonexponential_cos_avg(t: f64, t_fast: f64, t_slow: f64) -> f64 {
    (-t / t_fast).exp() * (-(t / t_slow).powi(2)).exp()
}

fn check_cos(cos_avg: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&cos_avg) {
        return invalid(format!("<cos phi> = {cos_avg} is outside [-1, 1]"));
    }
    Ok(())
}

fn check_time(t: f64, t1: f64) -> Result<()> {
    if t < 0.0 || t1 <= 0.0 || !t.is_finite() {
        return invalid("times must be non-negative and T1 positive");
    }
    Ok(())
}

fn set(m: &mut Mat, a: &str, b: &str, v: num_complex::Complex64) {
    let (i, j) = (crate::pauli_basis::index_of(a).unwrap(), crate::pauli_basis::index_of(b).unwrap());
    m[(i, j)] = v;
}

fn relaxation_entries(t: f64, t1: f64, e_over_t: f64) -> Mat {
    let (down, up) = thermal_rates(t1, e_over_t);
    let (ed, eu) = ((-down * t).exp(), (-up * t).exp());
    let (hd, hu) = ((-down * t / 2.0).exp(), (-up * t / 2.0).exp());
    let mut m = Mat::zeros(4, 4);
    let xx = ((1.0 - ed) + (1.0 - eu)) / 4.0;
    set(&mut m, "X", "X", c(xx, 0.0));
    set(&mut m, "Y", "Y", c(xx, 0.0));
    set(&mut m, "X", "Y", c(0.0, -(eu - ed) / 4.0));
    set(&mut m, "Y", "X", c(0.0, (eu - ed) / 4.0));
    set(&mut m, "I", "I", c((hu + hd).powi(2) / 4.0, 0.0));
    set(&mut m, "Z", "Z", c((hu - hd).powi(2) / 4.0, 0.0));
    set(&mut m, "I", "Z", c((eu - ed) / 4.0, 0.0));
    set(&mut m, "Z", "I", c((eu - ed) / 4.0, 0.0));
    m
}

pub fn analytic_channel(kind: AnalyticChannel) -> Result<ProcessMatrix> {
    let entries = match kind {
        AnalyticChannel::Dephasing { cos_avg, sin_avg } => {
            check_cos(cos_avg)?;
            check_cos(sin_avg)?;
            let mut m = Mat::zeros(4, 4);
            let zz = (1.0 - cos_avg) / 2.0;
            set(&mut m, "Z", "Z", c(zz, 0.0));
            set(&mut m, "I", "I", c(1.0 - zz, 0.0));
            set(&mut m, "I", "Z", c(0.0, sin_avg / 2.0));
            set(&mut m, "Z", "I", c(0.0, -sin_avg / 2.0));
            m
        }
        AnalyticChannel::Relaxation { t, t1, e_over_t } => {
            check_time(t, t1)?;
            relaxation_entries(t, t1, e_over_t)
        }
        AnalyticChannel::Combined { t, t1, e_over_t, cos_avg } => {
            check_time(t, t1)?;
            check_cos(cos_avg)?;
            let mut m = relaxation_entries(t, t1, e_over_t);
            let (zz_d, ii_d) = ((1.0 - cos_avg) / 2.0, (1.0 + cos_avg) / 2.0);
            let (ii_r, zz_r) = (m[(0, 0)].re, m[(3, 3)].re);
            m[(3, 3)] = c(zz_d * ii_r + zz_r * ii_d, 0.0);
            m[(0, 0)] = c(ii_d * ii_r + zz_d * zz_r, 0.0);
            m
        }
        AnalyticChannel::ShortTime { t, t1, e_over_t, cos_avg } => {
            check_time(t, t1)?;
            check_cos(cos_avg)?;
            let r = t / (4.0 * t1);
            let th = if e_over_t.is_infinite() { e_over_t.signum() } else { (e_over_t / 2.0).tanh() };
            let zz = (1.0 - cos_avg) / 2.0;
            let mut m = Mat::zeros(4, 4);
            set(&mut m, "X", "X", c(r, 0.0));
            set(&mut m, "Y", "Y", c(r, 0.0));
            set(&mut m, "Z", "Z", c(zz, 0.0));
            set(&mut m, "I", "I", c(1.0 - t / (2.0 * t1) - zz, 0.0));
            set(&mut m, "X", "Y", c(0.0, -r * th));
            set(&mut m, "Y", "X", c(0.0, r * th));
            set(&mut m, "I", "Z", c(r * th, 0.0));
            set(&mut m, "Z", "I", c(r * th, 0.0));
            m
        }
        AnalyticChannel::CzAngleFluctuation { cos_avg } => {
            check_cos(cos_avg)?;
            let bb = (1.0 + cos_avg) / 8.0;
            let cc = (5.0 - 3.0 * cos_avg) / 8.0;
            let mut m = Mat::zeros(16, 16);
            set(&mut m, "II", "II", c(cc, 0.0));
            for (a, b, s) in [
                ("ZZ", "ZZ", 1.0),
                ("IZ", "IZ", 1.0),
                ("ZI", "ZI", 1.0),
                ("IZ", "ZI", 1.0),
                ("ZI", "IZ", 1.0),
                ("IZ", "II", 1.0),
                ("ZI", "II", 1.0),
                ("II", "IZ", 1.0),
                ("II", "ZI", 1.0),
                ("ZZ", "IZ", -1.0),
                ("ZZ", "ZI", -1.0),
                ("IZ", "ZZ", -1.0),
                ("ZI", "ZZ", -1.0),
                ("ZZ", "II", -1.0),
                ("II", "ZZ", -1.0),
            ] {
                set(&mut m, a, b, c(s * bb, 0.0));
            }
            return ProcessMatrix::new(2, m);
        }
    };
    ProcessMatrix::new(1, entries)
}

/// Kraus operators of the finite-temperature relaxation channel (down, up, no jump).
pub fn relaxation_kraus(t: f64, t1: f64, e_over_t: f64) -> Vec<(f64, Mat)> {
    let (down, up) = thermal_rates(t1, e_over_t);
    let a_down = lowering().scale((1.0 - (-down * t).exp()).sqrt());
    let a_up = lowering().transpose().scale((1.0 - (-up * t).exp()).sqrt());
    let a_no = Mat::from_row_slice(2, 2, &[c((-up * t / 2.0).exp(), 0.0), ZERO, ZERO, c((-down * t / 2.0).exp(), 0.0)]);
    vec![(1.0, a_down), (1.0, a_up), (1.0, a_no)]
}

/// `P(|1>) = 1/2 + 1/2 e^{-t/2T1} <cos phi> cos(phi_R)`.
pub fn ramsey_signal(t: f64, t1: f64, cos_avg: f64, phi_r: f64) -> f64 {
    0.5 + 0.5 * (-t / (2.0 * t1)).exp() * cos_avg * phi_r.cos()
}

/// Inverse of [`ramsey_signal`] for `<cos phi>`.
pub fn ramsey_cos_avg(p: f64, t: f64, t1: f64, phi_r: f64) -> Result<f64> {
    let denom = 0.5 * (-t / (2.0 * t1)).exp() * phi_r.cos();
    if denom.abs() < 1e-15 {
        return Err(Error::Numerical("cos(phi_R) = 0: the Ramsey signal carries no dephasing information".into()));
    }
    Ok((p - 0.5) / denom)
}

/// Annihilation operator on a Fock space truncated at `n_max` (dimension `n_max + 1`).
pub fn annihilation(n_max: usize) -> Mat {
    let d = n_max + 1;
    let mut a = Mat::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    a
}

/// Truncated coherent state `|alpha>`, renormalized after truncation.
pub fn coherent_state(alpha: num_complex::Complex64, n_max: usize) -> Vector {
    let mut v = Vector::zeros(n_max + 1);
    let mut amp = c((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..=n_max {
        if n > 0 {
            amp *= alpha / (n as f64).sqrt();
        }
        v[n] = amp;
    }
    let norm = v.norm();
    v / c(norm, 0.0)
}

/// Three-level relaxation with separate `1->0` (rate `1/T1`) and `2->1` (rate `gamma21`) jumps.
pub fn three_level_two_channel(t1: f64, gamma21: f64) -> Vec<LindbladChannel> {
    let mut b10 = Mat::zeros(3, 3);
    b10[(0, 1)] = ONE;
    let mut b21 = Mat::zeros(3, 3);
    b21[(1, 2)] = ONE;
    vec![LindbladChannel::new(1.0 / t1, b10), LindbladChannel::new(gamma21, b21)]
}

/// Three-level relaxation with a single oscillator-like `a` jump at rate `1/T1`.
pub fn three_level_single_a(t1: f64) -> Vec<LindbladChannel> {
    vec![LindbladChannel::new(1.0 / t1, annihilation(2))]
}
