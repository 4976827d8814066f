mod common;

use chi::composition::{compose_exact, GateWithError};
use chi::correction::*;
use chi::error_matrix::{convert_convention, to_error_matrix};
use chi::gates;
use chi::lindblad::{analytic_channel, AnalyticChannel};
use chi::linalg::{self, c, kron, Mat};
use chi::process_matrix::chi_from_unitary;
use chi::{Convention, ErrorMatrix, ProcessMatrix};
use proptest::prelude::*;

fn err_of(chi: ProcessMatrix) -> ErrorMatrix {
    let d = chi.dim();
    ErrorMatrix::new(chi, Convention::ErrorAfter, linalg::eye(d)).unwrap()
}

fn rotation(label: &str, eps: f64) -> ProcessMatrix {
    chi_from_unitary(&gates::pauli_rotation(label, eps).unwrap()).unwrap()
}

fn diag_phases(a1: f64, a2: f64, a3: f64) -> Mat {
    let mut u = linalg::eye(4);
    u[(1, 1)] = num_complex::Complex64::from_polar(1.0, a1);
    u[(2, 2)] = num_complex::Complex64::from_polar(1.0, a2);
    u[(3, 3)] = num_complex::Complex64::from_polar(1.0, a3);
    u
}

fn cz_gate(actual: &ProcessMatrix) -> GateWithError {
    let err = to_error_matrix(actual, &gates::cz(), Convention::ErrorAfter).unwrap();
    GateWithError::new(gates::cz(), err).unwrap()
}

#[test]
fn perfect_gate_needs_no_correction() {
    let plan = suggest_correction(&ErrorMatrix::perfect(linalg::eye(2), Convention::ErrorAfter), &[1, 2, 3]).unwrap();
    assert!(plan.u_corr.iter().skip(1).all(|z| z.norm() == 0.0));
    assert_eq!(plan.predicted_gain, 0.0);
    assert!(linalg::max_abs_diff(&plan.unitary, &linalg::eye(2)) < 1e-15);
    let g = GateWithError::perfect(gates::sqrt_x());
    let out = apply_correction(&g, &plan, CorrectionMode::Exact).unwrap();
    assert!(out.error.chi.max_abs_diff(&g.error.chi) < 1e-15);
    assert!(suggest_correction(&g.error, &[]).is_err());
}

#[test]
fn z_rotation_correction() {
    let eps: f64 = 0.02;
    let err = err_of(rotation("Z", eps));
    let plan = suggest_correction(&err, &[3]).unwrap();
    let f = err.fidelity();
    let want = (eps / 2.0).sin() * (eps / 2.0).cos() / f;
    assert!((plan.u_corr[3] - c(0.0, want)).norm() < 1e-15);
    assert!((plan.u_corr[3].im - eps / 2.0).abs() < eps.powi(3));
    let im = err.chi.entries[(3, 0)].im;
    assert!((plan.predicted_gain - im * im / f).abs() < 1e-18);
    let g = GateWithError::new(linalg::eye(2), err.clone()).unwrap();
    let out = apply_correction(&g, &plan, CorrectionMode::Exact).unwrap();
    // net rotation angle eps - 2 tan(eps/2), third order
    let net = eps - 2.0 * (eps / 2.0).tan();
    let residual = out.error.chi.entries[(3, 0)].im;
    assert!((residual - (-(net / 2.0).sin() * (net / 2.0).cos())).abs() < 1e-15);
    assert!(residual.abs() < eps.powi(3));
    let gained = out.fidelity() - f;
    assert!((gained - plan.predicted_gain).abs() < (1.0 - f).powi(2));
    let it = iterate_correction(&rotation("Z", eps), &linalg::eye(2), &[3], Placement::AfterGate, 5, 1e-12).unwrap();
    let fin = to_error_matrix(&compose_exact(&chi_from_unitary(&it.unitary).unwrap(), &rotation("Z", eps)).unwrap(), &linalg::eye(2), Convention::ErrorAfter).unwrap();
    assert!(fin.chi.entries[(3, 0)].im.abs() < 1e-12);
}

#[test]
fn decoherence_only_is_untouched() {
    let rel = analytic_channel(AnalyticChannel::Relaxation { t: 0.05, t1: 1.0, e_over_t: f64::INFINITY }).unwrap();
    let g = GateWithError::new(linalg::eye(2), err_of(rel)).unwrap();
    let plan = suggest_correction(&g.error, &[1, 2, 3]).unwrap();
    assert!(plan.predicted_gain.abs() < 1e-20);
    let out = apply_correction(&g, &plan, CorrectionMode::Exact).unwrap();
    assert!((out.fidelity() - g.fidelity()).abs() <= 1e-10);
}

#[test]
fn before_gate_placement() {
    let u = gates::hadamard();
    let actual = compose_exact(&chi_from_unitary(&u).unwrap(), &rotation("X", 0.03)).unwrap();
    let before = to_error_matrix(&actual, &u, Convention::ErrorBefore).unwrap();
    let plan = suggest_correction(&before, &[1]).unwrap();
    assert_eq!(plan.placement, Placement::BeforeGate);
    let g = GateWithError::new(u.clone(), convert_convention(&before).unwrap()).unwrap();
    let out = apply_correction(&g, &plan, CorrectionMode::Exact).unwrap();
    assert!(1.0 - out.fidelity() < 1e-8);
}

#[test]
fn iteration_examples() {
    let small = rotation("Z", 1e-3);
    let plan = iterate_correction(&small, &linalg::eye(2), &[3], Placement::AfterGate, 1, 1e-10).unwrap();
    assert!(plan.predicted_gain > 0.0);

    let gross = rotation("Z", 0.8);
    let plan = iterate_correction(&gross, &linalg::eye(2), &[3], Placement::AfterGate, 5, 1e-10).unwrap();
    let corrected = to_error_matrix(
        &compose_exact(&chi_from_unitary(&plan.unitary).unwrap(), &gross).unwrap(),
        &linalg::eye(2),
        Convention::ErrorAfter,
    )
    .unwrap();
    assert!(corrected.chi.entries[(3, 0)].im.abs() < 1e-10);
    let want = chi_from_unitary(&gates::pauli_rotation("Z", -0.8).unwrap()).unwrap();
    assert!(chi_from_unitary(&plan.unitary).unwrap().max_abs_diff(&want) < 1e-9);

    // relaxation plus a residual rotation: stops once the gain stalls
    let rel = analytic_channel(AnalyticChannel::Relaxation { t: 0.05, t1: 1.0, e_over_t: f64::INFINITY }).unwrap();
    let mixed = compose_exact(&rotation("X", 0.05), &rel).unwrap();
    let plan = iterate_correction(&mixed, &linalg::eye(2), &[1, 2, 3], Placement::AfterGate, 20, 1e-9).unwrap();
    assert!(plan.predicted_gain > 0.0);
    assert!(iterate_correction(&mixed, &linalg::eye(2), &[1], Placement::AfterGate, 0, 1e-9).is_err());
}

#[test]
fn oversized_correction_refused() {
    let err = err_of(rotation("X", 2.6));
    assert!(suggest_correction(&err, &[1]).is_err());
}

#[test]
fn cz_examples() {
    let zero = cz_corrections(&ErrorMatrix::perfect(gates::cz(), Convention::ErrorAfter), true).unwrap();
    assert_eq!((zero.phi1, zero.phi2, zero.phi_cz), (0.0, 0.0, 0.0));

    let actual = chi_from_unitary(&(diag_phases(0.1, -0.05, 0.05) * gates::cz())).unwrap();
    let g = cz_gate(&actual);
    let corr = cz_corrections(&g.error, true).unwrap();
    assert!((corr.phi1 + 0.1).abs() < 0.1f64.powi(2));
    assert!((corr.phi2 - 0.05).abs() < 0.1f64.powi(2));
    assert!(corr.phi_cz.abs() < 0.1f64.powi(2));
    assert!(!corr.warning);
    let x = &g.error.chi.entries;
    let (iz, zi, zz) = (x[(3, 0)].im, x[(12, 0)].im, x[(15, 0)].im);
    assert!((corr.predicted_gain - (iz * iz + zi * zi + zz * zz) / g.fidelity()).abs() < 1e-15);
    let two = cz_corrections(&g.error, false).unwrap();
    assert_eq!(two.phi_cz, 0.0);
    assert!((two.phi1 - 2.0 * iz / g.fidelity()).abs() < 1e-15);
    assert!(cz_corrections(&ErrorMatrix::perfect(linalg::eye(2), Convention::ErrorAfter), true).is_err());

    let fixed = apply_cz_correction(&g, &corr).unwrap();
    assert!(fixed.fidelity() > g.fidelity());
    assert!(1.0 - fixed.fidelity() < 1e-4);
}

#[test]
fn cz_unitary_carries_phase_convention() {
    let corr = CzPhaseCorrection { phi1: 0.1, phi2: -0.2, phi_cz: 0.05, predicted_gain: 0.0, warning: false };
    let u = corr.unitary();
    let p3 = corr.phi3();
    assert!((p3 - (-0.05)).abs() < 1e-15);
    let global = num_complex::Complex64::from_polar(1.0, -(0.1 - 0.2 + p3) / 4.0);
    assert!((u[(0, 0)] - global).norm() < 1e-15);
    assert!((u[(1, 1)] / u[(0, 0)] - num_complex::Complex64::from_polar(1.0, 0.1)).norm() < 1e-15);
    let cz = gates::cz();
    assert_eq!(&u * &cz, &cz * &u);
}

#[test]
fn parse_set_labels() {
    assert_eq!(parse_set("IZ,ZI,ZZ").unwrap(), vec![3, 12, 15]);
    assert!(parse_set("IQ").is_err());
}

fn cz_decoherence(t: f64) -> Mat {
    let rel = analytic_channel(AnalyticChannel::Relaxation { t, t1: 1.0, e_over_t: f64::INFINITY }).unwrap();
    kron(&rel.entries, &rel.entries)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn full_set_correction_leaves_second_order(seed in any::<u64>(), n in 1usize..=2, eps in 0.001f64..0.1) {
        let mut r = common::rng(seed);
        let d = 1 << n;
        let u = common::small_unitary(&mut r, d, eps);
        let err = err_of(chi_from_unitary(&u).unwrap());
        let set: Vec<usize> = (1..d * d).collect();
        let plan = suggest_correction(&err, &set).unwrap();
        let g = GateWithError::new(linalg::eye(d), err.clone()).unwrap();
        let out = apply_correction(&g, &plan, CorrectionMode::Exact).unwrap();
        let infid = 1.0 - err.fidelity();
        prop_assert!(1.0 - out.fidelity() <= 10.0 * infid * infid + 1e-15);
    }

    #[test]
    fn predicted_gain_when_decoherence_dominates(seed in any::<u64>(), n in 1usize..=2) {
        let mut r = common::rng(seed);
        let d = 1 << n;
        let noise = common::near_identity_channel(&mut r, n, 0.0, 0.03);
        let coherent = chi_from_unitary(&common::small_unitary(&mut r, d, 0.02)).unwrap();
        let chi = compose_exact(&coherent, &noise).unwrap();
        let err = err_of(chi);
        prop_assume!(1.0 - err.fidelity() <= 0.05);
        let set: Vec<usize> = (1..d * d).collect();
        let plan = suggest_correction(&err, &set).unwrap();
        prop_assume!(plan.predicted_gain < 0.5 * (1.0 - err.fidelity()));
        let g = GateWithError::new(linalg::eye(d), err.clone()).unwrap();
        let realized = apply_correction(&g, &plan, CorrectionMode::Exact).unwrap().fidelity() - err.fidelity();
        prop_assert!((realized - plan.predicted_gain).abs() <= 0.2 * plan.predicted_gain, "{} vs {}", realized, plan.predicted_gain);
    }

    #[test]
    fn cz_corrections_ignore_convention(seed in any::<u64>(), t in 0.0f64..0.05) {
        let mut r = common::rng(seed);
        let phases = diag_phases(r_angle(&mut r), r_angle(&mut r), r_angle(&mut r));
        let unitary = chi_from_unitary(&(phases * gates::cz())).unwrap();
        let noise = ProcessMatrix::new(2, cz_decoherence(t)).unwrap();
        let actual = compose_exact(&noise, &unitary).unwrap();
        for with_cz in [true, false] {
            let a = cz_corrections(&to_error_matrix(&actual, &gates::cz(), Convention::ErrorAfter).unwrap(), with_cz).unwrap();
            let b = cz_corrections(&to_error_matrix(&actual, &gates::cz(), Convention::ErrorBefore).unwrap(), with_cz).unwrap();
            prop_assert!((a.phi1 - b.phi1).abs() < 1e-12);
            prop_assert!((a.phi2 - b.phi2).abs() < 1e-12);
            prop_assert!((a.phi_cz - b.phi_cz).abs() < 1e-12);
            let u = a.unitary();
            prop_assert_eq!(&u * gates::cz(), gates::cz() * &u);
        }
    }
}

fn r_angle(r: &mut rand_chacha::ChaCha8Rng) -> f64 {
    rand::Rng::random_range(r, -0.2..0.2)
}
