mod common;

use chi::error::Error;
use chi::error_matrix::{to_error_matrix, Convention};
use chi::gates;
use chi::lindblad::{analytic_channel, exact_channel_chi, relaxation_channel, AnalyticChannel, GateSchedule};
use chi::linalg::{c, Mat};
use chi::pauli_basis::index_of;
use chi::process_matrix::{chi_from_unitary, completeness_operator, ProcessMatrix};
use chi::spam::{spam_forward, ForwardMode, SpamModel};
use chi::tomo_harness::*;
use common::*;

fn frequencies(chi: &ProcessMatrix, input: usize, setting: &str) -> Vec<f64> {
    let setup = TomographySetup::new(chi.n_qubits, Shots::Infinite).unwrap();
    let data = simulate_dataset(chi, &SpamModel::trivial(chi.n_qubits), &setup, 0).unwrap();
    let j = setup.settings.iter().position(|s| s == setting).unwrap();
    data.records.iter().find(|r| r.input == input && r.setting == j).unwrap().frequencies.clone()
}

fn round_trip(chi: &ProcessMatrix) -> f64 {
    let setup = TomographySetup::new(chi.n_qubits, Shots::Infinite).unwrap();
    let data = simulate_dataset(chi, &SpamModel::trivial(chi.n_qubits), &setup, 0).unwrap();
    reconstruct_chi(&data, &setup).unwrap().max_abs_diff(chi)
}

fn czz_schedule(t1: f64) -> GateSchedule {
    // exp(-i pi |11><11|) is CZ.
    let mut h = Mat::zeros(4, 4);
    h[(3, 3)] = c(std::f64::consts::PI, 0.0);
    let ch = vec![relaxation_channel(t1, 0, 2), relaxation_channel(t1, 1, 2)];
    GateSchedule::constant(1.0, h, ch).unwrap()
}

#[test]
fn setup_shape() {
    let s = TomographySetup::new(2, Shots::Infinite).unwrap();
    assert_eq!(s.input_states.len(), 16);
    assert_eq!(s.settings.len(), 9);
    assert!(TomographySetup::new(0, Shots::Infinite).is_err());
    assert_eq!(Shots::parse("inf").unwrap(), Shots::Infinite);
    assert_eq!(Shots::parse("2000").unwrap(), Shots::Finite(2000));
    assert!(Shots::parse("0").is_err());
}

#[test]
fn born_probabilities() {
    assert!((frequencies(&ProcessMatrix::identity(1), 0, "Z")[0] - 1.0).abs() < 1e-15);
    let z = chi_from_unitary(&gates::z_phase(std::f64::consts::FRAC_PI_2)).unwrap();
    // |+> rotated by pi/2 about Z points along +Y.
    assert!((frequencies(&z, 2, "Y")[0] - 1.0).abs() < 1e-14);
    let deph = analytic_channel(AnalyticChannel::Dephasing { cos_avg: 0.5, sin_avg: 0.0 }).unwrap();
    assert!((frequencies(&deph, 2, "X")[0] - 0.75).abs() < 1e-14);
}

#[test]
fn frequencies_are_normalized() {
    let mut r = rng(1);
    let chi = random_channel(&mut r, 2, 3);
    for shots in [Shots::Infinite, Shots::Finite(777)] {
        let setup = TomographySetup::new(2, shots).unwrap();
        let data = simulate_dataset(&chi, &SpamModel::trivial(2), &setup, 5).unwrap();
        assert_eq!(data.records.len(), 16 * 9);
        for rec in &data.records {
            assert!((rec.frequencies.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn identity_and_cnot_reconstruction() {
    assert!(round_trip(&ProcessMatrix::identity(1)) < 1e-10);
    let setup = TomographySetup::new(2, Shots::Infinite).unwrap();
    let data = simulate_dataset(&chi_from_unitary(&gates::cnot()).unwrap(), &SpamModel::trivial(2), &setup, 0).unwrap();
    let chi = reconstruct_chi(&data, &setup).unwrap();
    let k = |s: &str| index_of(s).unwrap();
    let table = [
        ("II", "II", 0.25),
        ("IX", "IX", 0.25),
        ("ZI", "ZI", 0.25),
        ("ZX", "ZX", 0.25),
        ("II", "IX", 0.25),
        ("II", "ZI", 0.25),
        ("IX", "II", 0.25),
        ("ZI", "II", 0.25),
        ("II", "ZX", -0.25),
        ("ZX", "II", -0.25),
        ("IX", "ZI", 0.25),
        ("ZI", "IX", 0.25),
        ("IX", "ZX", -0.25),
        ("ZI", "ZX", -0.25),
        ("ZX", "IX", -0.25),
        ("ZX", "ZI", -0.25),
    ];
    let mut expect = Mat::zeros(16, 16);
    for (a, b, v) in table {
        expect[(k(a), k(b))] = c(v, 0.0);
    }
    assert!(max_abs(&(&chi.entries - expect)) < 1e-10);
}

#[test]
fn noiseless_round_trip_single_qubit() {
    // Every Pauli unitary, rotations about each axis, and random channels.
    for p in 0..4 {
        assert!(round_trip(&chi_from_unitary(&chi::pauli_basis::single(p)).unwrap()) < 1e-10);
    }
    for axis in ["X", "Y", "Z"] {
        for phi in [0.1, 1.0, 2.5] {
            assert!(round_trip(&chi_from_unitary(&gates::pauli_rotation(axis, phi).unwrap()).unwrap()) < 1e-10);
        }
    }
    let mut r = rng(2);
    for k in 1..=4 {
        for _ in 0..20 {
            assert!(round_trip(&random_channel(&mut r, 1, k)) < 1e-10);
        }
    }
}

#[test]
fn noiseless_round_trip_two_qubits() {
    let mut r = rng(3);
    for k in 1..=3 {
        for _ in 0..10 {
            assert!(round_trip(&random_channel(&mut r, 2, k)) < 1e-10);
        }
    }
    for u in [gates::cz(), gates::sqrt_iswap(), random_unitary(&mut r, 4)] {
        assert!(round_trip(&chi_from_unitary(&u).unwrap()) < 1e-10);
    }
}

#[test]
fn extraction_routes_agree() {
    let mut r = rng(4);
    for n in [1usize, 2] {
        let spam = SpamModel::new(near_identity_channel(&mut r, n, 0.05, 0.02), near_identity_channel(&mut r, n, 0.05, 0.02))
            .unwrap();
        let setup = TomographySetup::new(n, Shots::Infinite).unwrap();
        for _ in 0..5 {
            let u = random_unitary(&mut r, 1 << n);
            let gate = GateSource::Channel(random_channel(&mut r, n, 2));
            for conv in [Convention::ErrorAfter, Convention::ErrorBefore] {
                let a = run_qpt_experiment(&gate, &u, &spam, &setup, 0, conv, ExtractionRoute::TransformChi).unwrap();
                let b = run_qpt_experiment(&gate, &u, &spam, &setup, 0, conv, ExtractionRoute::TransformRho).unwrap();
                assert_eq!(a.convention, conv);
                assert!(a.chi.max_abs_diff(&b.chi) < 1e-10);
            }
        }
    }
}

#[test]
fn perfect_gate_gives_identity_error() {
    let setup = TomographySetup::new(2, Shots::Infinite).unwrap();
    let u = gates::sqrt_iswap();
    let err = run_qpt_experiment(
        &GateSource::Unitary(u.clone()),
        &u,
        &SpamModel::trivial(2),
        &setup,
        0,
        Convention::ErrorAfter,
        ExtractionRoute::TransformChi,
    )
    .unwrap();
    assert!(err.chi.max_abs_diff(&ProcessMatrix::identity(2)) < 1e-10);
}

#[test]
fn cz_with_relaxation_matches_direct_pipeline() {
    let sched = czz_schedule(30.0);
    let direct = to_error_matrix(&exact_channel_chi(&sched).unwrap(), &gates::cz(), Convention::ErrorAfter).unwrap();
    let setup = TomographySetup::new(2, Shots::Infinite).unwrap();
    for route in [ExtractionRoute::TransformChi, ExtractionRoute::TransformRho] {
        let err = run_qpt_experiment(
            &GateSource::Schedule(sched.clone()),
            &gates::cz(),
            &SpamModel::trivial(2),
            &setup,
            0,
            Convention::ErrorAfter,
            route,
        )
        .unwrap();
        assert!(err.chi.max_abs_diff(&direct.chi) < 1e-10);
    }
    assert!(direct.fidelity() < 0.99);
}

#[test]
fn injected_spam_matches_forward_model() {
    let mut r = rng(5);
    let spam = SpamModel::new(near_identity_channel(&mut r, 2, 0.05, 0.02), near_identity_channel(&mut r, 2, 0.05, 0.02))
        .unwrap();
    let sched = czz_schedule(50.0);
    let truth = to_error_matrix(&exact_channel_chi(&sched).unwrap(), &gates::cz(), Convention::ErrorAfter).unwrap();
    let setup = TomographySetup::new(2, Shots::Infinite).unwrap();
    let measured = run_qpt_experiment(
        &GateSource::Schedule(sched),
        &gates::cz(),
        &spam,
        &setup,
        0,
        Convention::ErrorAfter,
        ExtractionRoute::TransformChi,
    )
    .unwrap();
    let exact = spam_forward(&truth, &spam, ForwardMode::Exact).unwrap();
    assert!(measured.chi.max_abs_diff(&exact.chi) < 1e-10);
    let first = spam_forward(&truth, &spam, ForwardMode::FirstOrder).unwrap();
    let infid = 1.0 - measured.fidelity();
    assert!(measured.chi.max_abs_diff(&first.chi) <= 5.0 * infid * infid);
}

#[test]
fn finite_shot_sampling_is_seeded() {
    let setup = TomographySetup::new(1, Shots::Finite(300)).unwrap();
    let mut r = rng(6);
    let chi = random_channel(&mut r, 1, 2);
    let spam = SpamModel::trivial(1);
    let a = simulate_dataset(&chi, &spam, &setup, 11).unwrap();
    assert_eq!(a, simulate_dataset(&chi, &spam, &setup, 11).unwrap());
    assert_ne!(a, simulate_dataset(&chi, &spam, &setup, 12).unwrap());
    for rec in &a.records {
        assert_eq!(rec.counts.as_ref().unwrap().iter().sum::<u64>(), 300);
    }
}

#[test]
fn finite_shot_reconstruction_is_unbiased() {
    let n_seeds = 200;
    let setup = TomographySetup::new(1, Shots::Finite(400)).unwrap();
    let mut r = rng(7);
    let chi = near_identity_channel(&mut r, 1, 0.3, 0.2);
    let spam = SpamModel::trivial(1);
    let samples: Vec<Vec<f64>> = (0..n_seeds)
        .map(|seed| {
            let est = reconstruct_chi(&simulate_dataset(&chi, &spam, &setup, seed).unwrap(), &setup).unwrap();
            est.entries.iter().flat_map(|z| [z.re, z.im]).collect()
        })
        .collect();
    let truth: Vec<f64> = chi.entries.iter().flat_map(|z| [z.re, z.im]).collect();
    for (k, &t) in truth.iter().enumerate() {
        let xs: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        let mean = xs.iter().sum::<f64>() / n_seeds as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_seeds - 1) as f64;
        let sem = (var / n_seeds as f64).sqrt();
        if sem == 0.0 {
            assert!((mean - t).abs() < 1e-12);
        } else {
            assert!((mean - t).abs() <= 3.0 * sem, "component {k}: {mean} vs {t}, sem {sem}");
        }
    }
}

#[test]
fn statistical_error_scales_as_inverse_sqrt_shots() {
    let mut r = rng(8);
    let chi = random_channel(&mut r, 1, 2);
    let spam = SpamModel::trivial(1);
    let shots = [500u64, 2000, 8000, 32000];
    let rms: Vec<f64> = shots
        .iter()
        .map(|&n| {
            let setup = TomographySetup::new(1, Shots::Finite(n)).unwrap();
            let sq: f64 = (0..40)
                .map(|seed| {
                    let est = reconstruct_chi(&simulate_dataset(&chi, &spam, &setup, seed).unwrap(), &setup).unwrap();
                    (&est.entries - &chi.entries).norm_squared()
                })
                .sum();
            (sq / 40.0).sqrt()
        })
        .collect();
    // Least-squares slope of log(rms) against log(shots).
    let xs: Vec<f64> = shots.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = rms.iter().map(|v| v.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() < 0.1, "slope {slope}, rms {rms:?}");
}

#[test]
fn projection_is_positive_and_trace_preserving() {
    let mut r = rng(9);
    for n in [1usize, 2] {
        let chi = near_identity_channel(&mut r, n, 0.1, 0.05);
        let setup = TomographySetup::new(n, Shots::Finite(200)).unwrap();
        for seed in 0..5 {
            let data = simulate_dataset(&chi, &SpamModel::trivial(n), &setup, seed).unwrap();
            let raw = reconstruct_chi(&data, &setup).unwrap();
            let proj = reconstruct_chi_with(&data, &setup, Reconstruction::Projected).unwrap();
            assert!(proj.eigenvalues().iter().all(|&v| v > -1e-10));
            let comp = completeness_operator(&proj);
            assert!(max_abs(&(comp - Mat::identity(1 << n, 1 << n))) < 1e-10);
            if n == 2 {
                // low-shot two-qubit estimates are not positive
                assert!(raw.eigenvalues().iter().any(|&v| v < -1e-6));
            }
        }
    }
    let valid = random_channel(&mut r, 1, 2);
    assert!(project_cptp(&valid).unwrap().max_abs_diff(&valid) < 1e-10);
}

#[test]
fn incomplete_dataset_is_rank_deficient() {
    let setup = TomographySetup::new(1, Shots::Infinite).unwrap();
    let mut data = simulate_dataset(&ProcessMatrix::identity(1), &SpamModel::trivial(1), &setup, 0).unwrap();
    data.records.retain(|r| r.setting != 0);
    assert!(matches!(reconstruct_chi(&data, &setup), Err(Error::RankDeficient { .. })));
}

#[test]
fn non_trace_preserving_channel_rejected() {
    let setup = TomographySetup::new(1, Shots::Infinite).unwrap();
    let mut chi = ProcessMatrix::identity(1);
    chi.entries[(0, 0)] = c(0.5, 0.0);
    assert!(simulate_dataset(&chi, &SpamModel::trivial(1), &setup, 0).is_err());
}
