use minimax_core::dynamics::{run_discrete, AlgorithmKind, Trajectory, TrajectoryMeta, VectorField};
use minimax_core::lab::{
    batch_study, classify_limit, classify_limit_with, cycle_radius, grid, run_grid, sweep_csv, window_radius_stats,
    LimitThresholds,
};
use minimax_core::problem::{make_bilinear, make_dirac_gan, make_quadratic, make_quartic_coupled, ProblemInstance};
use minimax_core::stability::certify_default;
use minimax_core::{BatchSize, GradientOracle, LimitKind, Verdict};
use nalgebra::{DMatrix, DVector};

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_vec(xs.to_vec())
}

fn zero() -> DVector<f64> {
    DVector::zeros(2)
}

fn xy() -> ProblemInstance {
    make_bilinear(&DMatrix::from_element(1, 1, 1.0)).unwrap()
}

fn run(p: &ProblemInstance, kind: AlgorithmKind, z0: &[f64], s: f64, n: usize) -> Trajectory {
    run_discrete(p, kind, &v(z0), s, n, &GradientOracle::full()).unwrap()
}

fn synthetic(points: impl Iterator<Item = DVector<f64>>) -> Trajectory {
    let meta = TrajectoryMeta::new(AlgorithmKind::Gda, 0.1, 0.0, &GradientOracle::full(), &zero());
    let mut t = Trajectory::new(meta);
    for (k, z) in points.enumerate() {
        t.push_step(k as u64, z);
    }
    t
}

#[test]
fn dirac_gda_without_regularization_does_not_converge() {
    let t = run(&make_dirac_gan(0.0), AlgorithmKind::Gda, &[1.0, 1.0], 0.2, 5000);
    let verdict = classify_limit(&t, &zero(), 0.25).unwrap();
    assert_ne!(verdict.kind, LimitKind::Converge);
}

#[test]
fn egm_on_bilinear_converges() {
    let t = run(&xy(), AlgorithmKind::Egm, &[1.0, 0.0], 0.2, 2000);
    let verdict = classify_limit(&t, &zero(), 0.25).unwrap();
    assert_eq!(verdict.kind, LimitKind::Converge);
    assert_eq!(verdict.steps_used, 2000);
}

#[test]
fn constant_trajectory_at_the_stationary_point() {
    let t = synthetic(std::iter::repeat_n(zero(), 300));
    let verdict = classify_limit(&t, &zero(), 0.25).unwrap();
    assert_eq!(verdict.kind, LimitKind::Converge);
    assert_eq!(verdict.final_radius, 0.0);
}

#[test]
fn synthetic_circle() {
    let t = synthetic((0..400).map(|k| {
        let th = 0.37 * k as f64;
        v(&[th.cos(), th.sin()])
    }));
    let verdict = classify_limit(&t, &zero(), 0.25).unwrap();
    assert_eq!(verdict.kind, LimitKind::Cycle);
    let (mean, spread) = cycle_radius(&t, &zero()).unwrap();
    assert!((mean - 1.0).abs() < 1e-12 && spread < 1e-12);
    assert_eq!(verdict.cycle_radius, Some(mean));
}

#[test]
fn invalid_inputs() {
    let short = synthetic(std::iter::repeat_n(v(&[1.0, 0.0]), 150));
    assert!(classify_limit(&short, &zero(), 0.25).is_err());
    let ok = synthetic(std::iter::repeat_n(v(&[1.0, 0.0]), 250));
    assert!(classify_limit(&ok, &zero(), 0.0).is_err());
    assert!(classify_limit(&ok, &DVector::zeros(3), 0.25).is_err());
    let conv = run(&xy(), AlgorithmKind::Egm, &[1.0, 0.0], 0.2, 2000);
    assert!(cycle_radius(&conv, &zero()).is_err());
    assert!(batch_study(&xy(), AlgorithmKind::Gda, 0.2, 0.0, &zero(), &[BatchSize::Samples(1)], 10, &[0]).is_err());
}

#[test]
fn dirac_window_radius_decreases_in_alpha() {
    let means: Vec<f64> = [0.0, 0.1, 0.2]
        .iter()
        .map(|&a| {
            let t = run(&make_dirac_gan(a), AlgorithmKind::Gda, &[1.0, 1.0], 0.2, 5000);
            window_radius_stats(&t, &zero(), 0.25).0
        })
        .collect();
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn agda_batches_never_converge() {
    let p = make_dirac_gan(0.0);
    let batches = [1, 10, 100].map(BatchSize::Samples);
    let rows = batch_study(&p, AlgorithmKind::Agda, 0.2, 0.0, &v(&[1.0, 1.0]), &batches, 500, &[0, 1, 2]).unwrap();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        assert!(matches!(r.verdict.kind, LimitKind::Cycle | LimitKind::Undecided), "{:?}", r.verdict);
        assert!(r.noise_level > 0.0);
    }
}

#[test]
fn egm_noise_ball_shrinks_with_batch() {
    let p = make_dirac_gan(0.4);
    let batches = [1, 10, 100].map(BatchSize::Samples);
    let seeds: Vec<u64> = (0..8).collect();
    let rows = batch_study(&p, AlgorithmKind::Egm, 0.2, 0.4, &v(&[1.0, 1.0]), &batches, 2000, &seeds).unwrap();
    let mean = |b: BatchSize| {
        let sel: Vec<f64> = rows.iter().filter(|r| r.batch == b).map(|r| r.verdict.final_radius).collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    };
    let radii: Vec<f64> = batches.iter().map(|&b| mean(b)).collect();
    assert!(radii[0] > radii[1] && radii[1] > radii[2], "{radii:?}");
    let noise: Vec<f64> = batches
        .iter()
        .map(|&b| rows.iter().filter(|r| r.batch == b).map(|r| r.noise_level).sum::<f64>())
        .collect();
    assert!(noise[0] > noise[1] && noise[1] > noise[2], "{noise:?}");
}

#[test]
fn full_batch_matches_the_deterministic_run() {
    let p = make_dirac_gan(0.3);
    for kind in [AlgorithmKind::Gda, AlgorithmKind::Agda, AlgorithmKind::Egm] {
        let rows = batch_study(&p, kind, 0.2, 0.3, &v(&[1.0, 1.0]), &[BatchSize::Full], 400, &[5]).unwrap();
        let det = run(&p, kind, &[1.0, 1.0], 0.2, 400);
        assert_eq!(rows[0].trajectory.states, det.states);
        assert_eq!(rows[0].noise_level, 0.0);
    }
}

#[test]
fn grids_are_deterministic_across_pool_sizes() {
    let p = make_dirac_gan(0.0);
    let cells = grid(&[0.0, 0.2, 0.4], &[1, 2], &[BatchSize::Samples(4), BatchSize::Full]);
    assert_eq!(cells.len(), 12);
    assert_eq!((cells[1].alpha, cells[1].seed, cells[1].batch), (0.0, 1, BatchSize::Full));
    let go = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            run_grid(&p, AlgorithmKind::Egm, 0.2, &v(&[1.0, 1.0]), &zero(), 300, &cells, &LimitThresholds::default())
                .unwrap()
        })
    };
    let (a, b) = (go(1), go(4));
    assert_eq!(sweep_csv(&a), sweep_csv(&b));
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.trajectory, y.trajectory);
        assert_eq!(x.alpha, y.alpha);
    }
    let csv = sweep_csv(&a);
    assert!(csv.starts_with("alpha,seed,batch,kind,final_radius,slope,cycle_radius,spread,steps_used,noise_level,diverged\n"));
    assert_eq!(csv.lines().count(), 13);
}

/// The discrete regime runs used for the regime-boundary check.
fn regime_runs() -> Vec<(Trajectory, bool)> {
    let mut out = Vec::new();
    for (a, conv) in [(0.0, false), (0.25, false), (0.325, true), (0.4, true)] {
        out.push((run(&make_dirac_gan(a), AlgorithmKind::Gda, &[1.0, 1.0], 0.2, 5000), conv));
    }
    for (a, conv) in [(150.0, false), (180.0, true)] {
        out.push((run(&make_quartic_coupled(1, a), AlgorithmKind::Egm, &[1.0, 1.0], 0.002, 20000), conv));
    }
    out
}

#[test]
fn verdicts_are_robust_to_the_window() {
    for (t, conv) in regime_runs() {
        let base = classify_limit(&t, &zero(), 0.25).unwrap().kind;
        assert_eq!(base == LimitKind::Converge, conv, "α {}", t.meta.alpha);
        for frac in [0.15, 0.2, 0.3, 0.35] {
            assert_eq!(classify_limit(&t, &zero(), frac).unwrap().kind, base, "α {} window {frac}", t.meta.alpha);
        }
    }
}

#[test]
fn verdicts_cohere_with_certificates() {
    let shifted = make_quadratic(
        &DMatrix::from_row_slice(2, 2, &[1.5, 0.3, 0.3, 1.0]),
        &DMatrix::from_row_slice(2, 2, &[0.4, -0.7, 0.2, 0.9]),
        &DMatrix::from_row_slice(2, 2, &[1.2, -0.1, -0.1, 0.8]),
    )
    .unwrap();
    let cases: Vec<(ProblemInstance, AlgorithmKind, f64, Vec<f64>, usize)> = vec![
        (xy(), AlgorithmKind::Egm, 0.2, vec![1.0, 0.0], 2000),
        (xy(), AlgorithmKind::Gda, 0.2, vec![1.0, 0.0], 2000),
        (make_quartic_coupled(1, 180.0), AlgorithmKind::Egm, 0.002, vec![1.0, 1.0], 20000),
        (make_dirac_gan(0.0), AlgorithmKind::Gda, 0.2, vec![1.0, 1.0], 5000),
        (shifted, AlgorithmKind::Gda, 0.05, vec![0.5, -0.5, 0.2, 0.1], 3000),
    ];
    let mut seen = (0, 0);
    for (p, kind, s, z0, n) in cases {
        let z_star = DVector::zeros(p.dim());
        let cert = certify_default(&VectorField::new(kind.ode(), p.clone(), s).unwrap(), &z_star).unwrap();
        let t = run_discrete(&p, kind, &DVector::from_vec(z0), s, n, &GradientOracle::full()).unwrap();
        let verdict = classify_limit_with(&t, &z_star, &LimitThresholds::default()).unwrap();
        if cert.verdict == Verdict::Attractor && cert.lambda_max_s <= -0.05 * s {
            assert_eq!(verdict.kind, LimitKind::Converge, "{} {kind}", p.name());
            seen.0 += 1;
        } else if cert.verdict == Verdict::NotAttractor && cert.lambda_max_s >= 0.05 * s {
            assert_ne!(verdict.kind, LimitKind::Converge, "{} {kind}", p.name());
            seen.1 += 1;
        }
    }
    assert!(seen.0 >= 3 && seen.1 >= 2, "{seen:?}");
}

#[test]
fn verdict_json_shape() {
    let t = run(&xy(), AlgorithmKind::Gda, &[1.0, 0.0], 0.2, 2000);
    let verdict = classify_limit(&t, &zero(), 0.25).unwrap();
    assert_eq!(verdict.kind, LimitKind::Diverge);
    let j = serde_json::to_value(verdict).unwrap();
    assert_eq!(j["kind"], "DIVERGE");
    for key in ["final_radius", "slope", "cycle_radius", "spread", "steps_used"] {
        assert!(j.get(key).is_some(), "{key}");
    }
}
