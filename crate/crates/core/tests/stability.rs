use minimax_core::dynamics::{integrate_strided, run_discrete, stationary_jacobian, AlgorithmKind, VectorField};
use minimax_core::linalg;
use minimax_core::problem::{
    make_bilinear, make_dirac_gan, make_gaussian_gan_with_nodes, make_quadratic, make_quartic_coupled,
    make_symmetric_polynomial, gaussian_gan_origin_jacobian, GradientOracle, ProblemInstance,
};
use minimax_core::stability::{
    certify, certify_default, conditions_from_blocks, gaussian_gan_threshold, closed_form_conditions,
    verify_discrete_attractor, verify_discrete_attractor_in, AttractorTrials, NormMatrix, NormProvenance,
};
use minimax_core::{Error, Verdict};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ODES: [AlgorithmKind; 4] = [AlgorithmKind::Gf, AlgorithmKind::GdaOde, AlgorithmKind::AgdaOde, AlgorithmKind::EgmOde];

fn m1(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

fn origin(d: usize) -> DVector<f64> {
    DVector::zeros(d)
}

fn xy() -> ProblemInstance {
    make_bilinear(&m1(1.0)).unwrap()
}

/// Seeded quadratic with n = m = 2 and entries in (−1, 1).
fn fixture(seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sym = |rng: &mut ChaCha8Rng| {
        let (p, q, r) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        DMatrix::from_row_slice(2, 2, &[p, q, q, r])
    };
    let a = sym(&mut rng);
    let c = sym(&mut rng);
    let b = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
    make_quadratic(&a, &b, &c).unwrap()
}

/// Like [`fixture`] with `1.5·I` added to both diagonal blocks, so most dynamics certify.
fn fixture_pd(seed: u64) -> ProblemInstance {
    let hb = fixture(seed).blocks(&origin(4)).unwrap();
    let shift = DMatrix::identity(2, 2) * 1.5;
    make_quadratic(&(&hb.a + &shift), &hb.b, &(&hb.c + &shift)).unwrap()
}

/// Solves `JᵀP + PJ = −I` through the Kronecker form.
fn lyapunov(j: &DMatrix<f64>) -> DMatrix<f64> {
    let n = j.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let jt = j.transpose();
    let k = eye.kronecker(&jt) + jt.kronecker(&eye);
    let rhs = -DVector::from_column_slice(eye.as_slice());
    let vec_p = k.lu().solve(&rhs).unwrap();
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    (&p + p.transpose()) * 0.5
}

fn cert(kind: AlgorithmKind, p: &ProblemInstance, s: f64) -> minimax_core::StabilityReport {
    certify_default(&VectorField::new(kind, p.clone(), s).unwrap(), &origin(p.dim())).unwrap()
}

#[test]
fn gf_on_decoupled_quadratic() {
    let p = make_quadratic(&m1(1.0), &m1(0.0), &m1(1.0)).unwrap();
    let r = certify(&VectorField::new(AlgorithmKind::Gf, p, 0.0).unwrap(), &origin(2), &NormMatrix::identity(2)).unwrap();
    assert_eq!(r.verdict, Verdict::Attractor);
    assert!((r.lambda_max_s + 1.0).abs() < 1e-15);
}

#[test]
fn bilinear_trichotomy() {
    let gda = cert(AlgorithmKind::GdaOde, &xy(), 0.2);
    assert_eq!(gda.verdict, Verdict::NotAttractor);
    assert!((gda.lambda_max_s - 0.1).abs() <= 1e-12);
    let egm = cert(AlgorithmKind::EgmOde, &xy(), 0.2);
    assert_eq!(egm.verdict, Verdict::Attractor);
    assert!((egm.lambda_max_s + 0.1).abs() <= 1e-12);
    let agda = cert(AlgorithmKind::AgdaOde, &xy(), 0.2);
    assert_eq!(agda.norm, NormProvenance::AgdaScaled);
    assert_eq!(agda.verdict, Verdict::Boundary);
    assert!(agda.lambda_max_s.abs() <= 1e-12);
    assert!(agda.symmetrized.amax() <= 1e-15);
    let closed = closed_form_conditions(&xy(), &origin(2), 0.2).unwrap();
    assert_eq!(closed.agda.as_ref().unwrap().symmetrized, DMatrix::zeros(2, 2));
    assert_eq!(closed.agda.unwrap().verdict, Verdict::Boundary);
}

#[test]
fn certify_rejects_bad_inputs() {
    let vf = VectorField::new(AlgorithmKind::GdaOde, xy(), 0.2).unwrap();
    assert!(matches!(certify_default(&vf, &DVector::from_vec(vec![1.0, 0.0])), Err(Error::NotStationary(_))));
    assert!(NormMatrix::user(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    assert!(NormMatrix::user(DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0])).is_err());
    assert!(certify(&vf, &origin(2), &NormMatrix::identity(3)).is_err());
    let hb = xy().blocks(&origin(2)).unwrap();
    assert!(NormMatrix::agda_scaled(&hb, 2.0).is_err());
    assert!(NormMatrix::agda_scaled(&hb, 1.9).is_ok());
}

#[test]
fn quartic_boundaries_sit_at_alpha_squared_20400() {
    let root = 20400f64.sqrt();
    // Attractive above the root for quartic-w under EGM, below it for quartic-m under GDA.
    let (a, n) = (Verdict::Attractor, Verdict::NotAttractor);
    for (sign, kind, below, above) in [(1i8, AlgorithmKind::EgmOde, n, a), (-1, AlgorithmKind::GdaOde, a, n)] {
        for (alpha, want) in [(root - 1e-3, below), (root + 1e-3, above)] {
            let p = make_quartic_coupled(sign, alpha);
            let c = closed_form_conditions(&p, &origin(2), 0.002).unwrap();
            let set = c.for_kind(kind).unwrap();
            assert_eq!(set.verdict, want, "sign {sign} α {alpha}");
            assert_eq!(cert(kind, &p, 0.002).verdict, want);
        }
    }
    // EGM xx-condition −20 − 0.001(400 − α²), read at α = 150 and 135.
    for alpha in [150.0f64, 135.0] {
        let c = closed_form_conditions(&make_quartic_coupled(1, alpha), &origin(2), 0.002).unwrap();
        let want = -20.0 - 0.001 * (400.0 - alpha * alpha);
        assert!((c.egm.condition_min_eigs[0] - want).abs() < 1e-10);
    }
    assert_eq!(cert(AlgorithmKind::EgmOde, &make_quartic_coupled(1, 150.0), 0.002).verdict, Verdict::Attractor);
    assert_eq!(cert(AlgorithmKind::EgmOde, &make_quartic_coupled(1, 135.0), 0.002).verdict, Verdict::NotAttractor);
}

#[test]
fn closed_form_matches_certificate_on_random_quadratics() {
    let s = 0.1;
    let mut decided = 0;
    for seed in 0..50 {
        let p = fixture(seed);
        for kind in ODES {
            let r = cert(kind, &p, s);
            let set = r.conditions.as_ref().unwrap().for_kind(kind).unwrap();
            let scale = r.symmetrized.amax().max(1.0);
            assert!((&set.symmetrized - &r.symmetrized).amax() <= 1e-12 * scale, "seed {seed} {kind}");
            if r.lambda_max_s.abs() > 1e-6 {
                decided += 1;
                assert_eq!(set.verdict, r.verdict, "seed {seed} {kind}");
                let all_pos = set.condition_min_eigs.iter().all(|&e| e > 0.0);
                assert_eq!(all_pos, r.verdict == Verdict::Attractor, "seed {seed} {kind}");
            }
        }
    }
    assert!(decided >= 150);
}

#[test]
fn gda_and_egm_are_dual_in_the_stepsize() {
    for seed in 0..50 {
        let p = fixture(seed);
        let hb = p.blocks(&origin(4)).unwrap();
        let s = 0.1 + 0.01 * seed as f64;
        let (j, m) = (hb.jacobian(), hb.agda_matrix());
        assert_eq!(stationary_jacobian(AlgorithmKind::GdaOde, &j, &m, s), stationary_jacobian(AlgorithmKind::EgmOde, &j, &m, -s));
        let plus = conditions_from_blocks(&hb, s).unwrap();
        let minus = conditions_from_blocks(&hb, -s).unwrap();
        assert_eq!(plus.gda.symmetrized, minus.egm.symmetrized);
        assert_eq!(plus.egm.symmetrized, minus.gda.symmetrized);
    }
}

#[test]
fn not_attractor_certificates_show_growth_within_fifty_steps() {
    let mut checked = 0;
    for s in [0.1, 0.05] {
        for seed in 0..50 {
            let p = fixture(seed);
            for kind in ODES.iter().filter_map(|k| k.discrete()) {
                let r = cert(kind.ode(), &p, s);
                if r.verdict != Verdict::NotAttractor || r.lambda_max_s <= 1e-3 {
                    continue;
                }
                let hb = p.blocks(&origin(4)).unwrap();
                let norm = NormMatrix::default_for(kind, &hb, s).unwrap();
                let v = linalg::top_eigenvector(&r.symmetrized).unwrap();
                for sign in [1.0, -1.0] {
                    let z0 = &v * (1e-3 * sign);
                    let t = run_discrete(&p, kind, &z0, s, 50, &GradientOracle::full()).unwrap();
                    let d0 = norm.norm(&z0);
                    let grew = t.states[1..].iter().any(|st| norm.norm(&st.z) > d0);
                    assert!(grew, "seed {seed} {kind} s {s}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn sufficiency_transfers_to_discrete_methods() {
    let bilinear = verify_discrete_attractor(
        &xy(),
        AlgorithmKind::Egm,
        &origin(2),
        0.2,
        &AttractorTrials { radius: 0.5, ..AttractorTrials::default() },
    )
    .unwrap();
    assert!(bilinear.passed, "{:?}", bilinear.failed_seeds);
    assert_eq!(bilinear.trials.len(), 20);
    // The Dirac origin is spectrally stable but non-normal: the identity norm does not certify it,
    // a Lyapunov norm of the linearization does.
    let dirac = make_dirac_gan(0.4);
    let opts = AttractorTrials::default();
    let refused = verify_discrete_attractor(&dirac, AlgorithmKind::Gda, &origin(2), 0.2, &opts);
    assert!(matches!(refused, Err(Error::Precondition(_))));
    let vf = VectorField::new(AlgorithmKind::GdaOde, dirac.clone(), 0.2).unwrap();
    let norm = NormMatrix::user(lyapunov(&vf.jacobian_at_stationary(&origin(2)).unwrap())).unwrap();
    let rep = verify_discrete_attractor_in(&dirac, AlgorithmKind::Gda, &origin(2), 0.2, &norm, &opts).unwrap();
    assert!(rep.passed, "{:?}", rep.failed_seeds);
    let refused = verify_discrete_attractor(&xy(), AlgorithmKind::Gda, &origin(2), 0.2, &AttractorTrials::default());
    assert!(matches!(refused, Err(Error::Precondition(_))));
}

#[test]
fn sufficiency_on_the_zoo_with_margin() {
    let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
    let mut cases: Vec<(ProblemInstance, f64, usize)> = vec![
        (xy(), 0.05, 20),
        (make_dirac_gan(0.4), 0.05, 20),
        (make_quartic_coupled(1, 180.0), 0.002, 20),
        (make_quartic_coupled(-1, 100.0), 0.002, 20),
        (make_symmetric_polynomial(&[0.0, 0.0, 1.0, 0.5, 2.0], 1.0).unwrap(), 0.05, 20),
        (make_gaussian_gan_with_nodes(&sigma, &DMatrix::identity(2, 2), 1.0, 256).unwrap(), 0.05, 4),
    ];
    cases.extend((0..20).map(|seed| (fixture_pd(seed), 0.05, 20)));
    let mut checked = 0;
    for (p, s, n_trials) in cases {
        let z = origin(p.dim());
        for kind in [AlgorithmKind::Gda, AlgorithmKind::Agda, AlgorithmKind::Egm] {
            let r = cert(kind.ode(), &p, s);
            if r.verdict != Verdict::Attractor || r.lambda_max_s > -0.05 * s {
                continue;
            }
            let opts = AttractorTrials { n_trials, ..AttractorTrials::default() };
            let rep = verify_discrete_attractor(&p, kind, &z, s, &opts).unwrap();
            assert!(rep.passed, "{} {kind}: {:?}", p.name(), rep.failed_seeds);
            checked += 1;
        }
    }
    assert!(checked >= 20, "{checked}");
}

#[test]
fn p_norm_is_monotone_along_certified_flows() {
    let mut checked = 0;
    for seed in 0..20 {
        let p = fixture_pd(seed);
        for kind in ODES {
            let r = cert(kind, &p, 0.1);
            if r.verdict != Verdict::Attractor {
                continue;
            }
            let hb = p.blocks(&origin(4)).unwrap();
            let norm = NormMatrix::default_for(kind, &hb, 0.1).unwrap();
            let vf = VectorField::new(kind, p.clone(), 0.1).unwrap();
            let t = integrate_strided(&vf, &DVector::from_vec(vec![0.3, -0.2, 0.1, 0.4]), 1e-3, 5.0, 10).unwrap();
            for w in t.states.windows(2) {
                assert!(norm.norm(&w[1].z) <= norm.norm(&w[0].z) + 1e-9, "seed {seed} {kind}");
            }
            checked += 1;
        }
    }
    assert!(checked > 10);
    let vf = VectorField::new(AlgorithmKind::GdaOde, make_dirac_gan(0.4), 0.2).unwrap();
    let norm = NormMatrix::user(lyapunov(&vf.jacobian_at_stationary(&origin(2)).unwrap())).unwrap();
    assert_eq!(certify(&vf, &origin(2), &norm).unwrap().verdict, Verdict::Attractor);
    let t = integrate_strided(&vf, &DVector::from_vec(vec![0.03, -0.02]), 1e-2, 20.0, 1).unwrap();
    for w in t.states.windows(2) {
        assert!(norm.norm(&w[1].z) <= norm.norm(&w[0].z) + 1e-9);
    }
}

#[test]
fn gaussian_threshold() {
    let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
    let th = gaussian_gan_threshold(&sigma, &DMatrix::identity(2, 2), 0.01).unwrap();
    assert!(th.repulsive_at_zero);
    let alpha = th.empirical_threshold.unwrap();
    assert!(alpha > 0.0 && alpha <= 0.75, "{alpha}");
    assert!((th.theoretical_bound - 0.25).abs() < 1e-12);

    let eye = DMatrix::identity(2, 2);
    let same = gaussian_gan_threshold(&eye, &eye, 0.01).unwrap();
    assert!((same.abscissa_at_zero - 0.01 / 8.0).abs() < 1e-12);
    let j = gaussian_gan_origin_jacobian(&eye, &eye, 0.0, 0.01);
    for i in 0..4 {
        assert!((j[(i, i)] - 0.01 / 8.0).abs() < 1e-15);
    }

    for alpha in [10.0, 100.0] {
        let a = linalg::spectral_abscissa(&gaussian_gan_origin_jacobian(&sigma, &eye, alpha, 0.01)).unwrap();
        assert!(a < -0.9 * alpha * alpha * 0.01 / 2.0, "{alpha}: {a}");
    }
    assert!(gaussian_gan_threshold(&eye, &sigma, 0.01).is_err());
}

#[test]
fn spectrum_examples() {
    let w = 1.7;
    let ev = linalg::eigenvalues(&DMatrix::from_row_slice(2, 2, &[0.0, -w, w, 0.0])).unwrap();
    assert!((ev[0].im - w).abs() < 1e-14 && ev[0].re.abs() < 1e-14);
    assert!((ev[1].im + w).abs() < 1e-14 && ev[1].re.abs() < 1e-14);
    assert_eq!(linalg::lambda_max_sym(&DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0]))).unwrap(), 3.0);
}

#[test]
fn report_json_shape() {
    let r = cert(AlgorithmKind::EgmOde, &xy(), 0.2);
    let v = serde_json::to_value(&r).unwrap();
    for key in ["algorithm", "z_star", "s", "lambda_max_S", "eigenvalues", "verdict", "conditions"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["verdict"], "ATTRACTOR");
    assert_eq!(v["algorithm"], "egm-ode");
    for key in ["gf", "gda", "egm", "agda"] {
        assert!(v["conditions"].get(key).is_some());
    }
    assert!(v["eigenvalues"][0].get("re").is_some());
}
