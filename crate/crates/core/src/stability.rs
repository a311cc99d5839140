//! Linear-attractor certificates at stationary points.
//!
//! The numeric certificate symmetrizes `∇G(z*)` in a norm `P` and reads the
//! verdict off `λ_max(½(∇GᵀP + P∇G))`. The closed-form block conditions are
//! an independent route through the Hessian blocks and must agree with it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run_discrete, AlgorithmKind, VectorField};
use crate::error::{Error, Result};
use crate::linalg::{self, block2};
use crate::problem::{GaussianGan, GradientOracle, HessianBlocks, ProblemInstance};

pub const DEFAULT_TOL_BOUNDARY: f64 = 1e-9;
/// Largest `‖F(z*)‖` accepted as stationary.
pub const STATIONARY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Attractor,
    NotAttractor,
    Boundary,
}

impl Verdict {
    pub fn from_lambda(lambda_max: f64, tol_boundary: f64) -> Self {
        if lambda_max < -tol_boundary {
            Verdict::Attractor
        } else if lambda_max > tol_boundary {
            Verdict::NotAttractor
        } else {
            Verdict::Boundary
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NormProvenance {
    Identity,
    AgdaScaled,
    User,
}

/// Symmetric positive-definite matrix defining `‖v‖_P = √(vᵀPv)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormMatrix {
    p: DMatrix<f64>,
    provenance: NormProvenance,
}

impl NormMatrix {
    pub fn identity(dim: usize) -> Self {
        Self { p: DMatrix::identity(dim, dim), provenance: NormProvenance::Identity }
    }

    /// `[[I, −(s/2)Bᵀ], [−(s/2)B, I]]`, the quadratic form conserved by
    /// alternating updates on bilinear problems. Requires `s‖B‖₂ < 2`.
    pub fn agda_scaled(blocks: &HessianBlocks, s: f64) -> Result<Self> {
        let (n, m) = (blocks.dim_x(), blocks.dim_y());
        let nb = linalg::spectral_norm(&blocks.b);
        if (s * nb).is_nan() || s * nb >= 2.0 {
            return Err(Error::NotPositiveDefinite(format!("s·‖B‖₂ = {} must be below 2", s * nb)));
        }
        let k = -0.5 * s;
        let p = block2(
            &DMatrix::identity(n, n),
            &(blocks.b.transpose() * k),
            &(&blocks.b * k),
            &DMatrix::identity(m, m),
        );
        Ok(Self { p, provenance: NormProvenance::AgdaScaled })
    }

    pub fn user(p: DMatrix<f64>) -> Result<Self> {
        if !p.is_square() || !p.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("norm matrix must be square and finite".into()));
        }
        if (&p - p.transpose()).amax() > 1e-12 * p.amax().max(1.0) {
            return Err(Error::NotPositiveDefinite("norm matrix is not symmetric".into()));
        }
        if linalg::lambda_min_sym(&p)? <= 0.0 {
            return Err(Error::NotPositiveDefinite("norm matrix has a non-positive eigenvalue".into()));
        }
        Ok(Self { p, provenance: NormProvenance::User })
    }

    /// The conventional norm for a dynamic: scaled for AGDA, Euclidean otherwise.
    pub fn default_for(kind: AlgorithmKind, blocks: &HessianBlocks, s: f64) -> Result<Self> {
        if kind.ode() == AlgorithmKind::AgdaOde {
            Self::agda_scaled(blocks, s)
        } else {
            Ok(Self::identity(blocks.dim_x() + blocks.dim_y()))
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn provenance(&self) -> NormProvenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.p * v)).max(0.0).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

/// Closed-form block conditions for one dynamic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionSet {
    /// Minimum eigenvalue of each condition matrix; all positive means attractor.
    pub condition_min_eigs: Vec<f64>,
    #[serde(rename = "lambda_max_S")]
    pub lambda_max_s: f64,
    pub verdict: Verdict,
    /// Symmetrized certificate matrix assembled from the blocks.
    #[serde(skip)]
    pub symmetrized: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosedFormConditions {
    pub gf: ConditionSet,
    pub gda: ConditionSet,
    pub egm: ConditionSet,
    /// Absent when the scaled norm is not positive definite (`s‖B‖₂ ≥ 2`).
    pub agda: Option<ConditionSet>,
}

impl ClosedFormConditions {
    pub fn for_kind(&self, kind: AlgorithmKind) -> Option<&ConditionSet> {
        match kind.ode() {
            AlgorithmKind::Gf => Some(&self.gf),
            AlgorithmKind::GdaOde => Some(&self.gda),
            AlgorithmKind::EgmOde => Some(&self.egm),
            AlgorithmKind::AgdaOde => self.agda.as_ref(),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub algorithm: AlgorithmKind,
    pub z_star: Vec<f64>,
    pub s: f64,
    #[serde(rename = "lambda_max_S")]
    pub lambda_max_s: f64,
    /// Spectrum of `∇G(z*)`.
    pub eigenvalues: Vec<ComplexValue>,
    pub verdict: Verdict,
    pub norm: NormProvenance,
    pub conditions: Option<ClosedFormConditions>,
    #[serde(skip)]
    pub symmetrized: DMatrix<f64>,
    #[serde(skip)]
    pub jacobian: DMatrix<f64>,
}

fn sym_product(j: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::symmetrize(&(p * j))
}

fn require_stationary(p: &ProblemInstance, z: &DVector<f64>) -> Result<()> {
    let r = p.field(z)?.norm();
    if r > STATIONARY_TOL {
        return Err(Error::NotStationary(r));
    }
    Ok(())
}

/// Numeric certificate with the default boundary band.
pub fn certify(vf: &VectorField, z_star: &DVector<f64>, norm: &NormMatrix) -> Result<StabilityReport> {
    certify_with_tol(vf, z_star, norm, DEFAULT_TOL_BOUNDARY)
}

pub fn certify_with_tol(
    vf: &VectorField,
    z_star: &DVector<f64>,
    norm: &NormMatrix,
    tol_boundary: f64,
) -> Result<StabilityReport> {
    let p = vf.problem();
    if norm.dim() != p.dim() {
        return Err(Error::InvalidInput("norm matrix dimension does not match the problem".into()));
    }
    require_stationary(p, z_star)?;
    let jac = vf.jacobian_at_stationary(z_star)?;
    let sym = sym_product(&jac, norm.matrix());
    let lambda_max_s = linalg::lambda_max_sym(&sym)?;
    let eigenvalues = linalg::eigenvalues(&jac)?.into_iter().map(|c| ComplexValue { re: c.re, im: c.im }).collect();
    let conditions = closed_form_conditions(p, z_star, vf.s()).ok();
    Ok(StabilityReport {
        algorithm: vf.kind(),
        z_star: z_star.iter().copied().collect(),
        s: vf.s(),
        lambda_max_s,
        eigenvalues,
        verdict: Verdict::from_lambda(lambda_max_s, tol_boundary),
        norm: norm.provenance(),
        conditions,
        symmetrized: sym,
        jacobian: jac,
    })
}

/// Certificate in the conventional norm of the dynamic.
pub fn certify_default(vf: &VectorField, z_star: &DVector<f64>) -> Result<StabilityReport> {
    let hb = vf.problem().blocks(z_star)?;
    let norm = NormMatrix::default_for(vf.kind(), &hb, vf.s())?;
    certify(vf, z_star, &norm)
}

fn condition_set(mats: Vec<DMatrix<f64>>, symmetrized: DMatrix<f64>) -> Result<ConditionSet> {
    let condition_min_eigs = mats.iter().map(linalg::lambda_min_sym).collect::<Result<Vec<_>>>()?;
    let lambda_max_s = linalg::lambda_max_sym(&symmetrized)?;
    Ok(ConditionSet {
        condition_min_eigs,
        lambda_max_s,
        verdict: Verdict::from_lambda(lambda_max_s, DEFAULT_TOL_BOUNDARY),
        symmetrized,
    })
}

/// `A + (σ/2)(A² − BᵀB)` and `C + (σ/2)(C² − BBᵀ)`; σ = s for GDA, −s for EGM.
fn gda_like(hb: &HessianBlocks, sigma: f64) -> Result<ConditionSet> {
    let (a, b, c) = (&hb.a, &hb.b, &hb.c);
    let h = 0.5 * sigma;
    let mx = linalg::symmetrize(&(a + (a * a - b.transpose() * b) * h));
    let my = linalg::symmetrize(&(c + (c * c - b * b.transpose()) * h));
    let zero_xy = DMatrix::zeros(a.nrows(), c.nrows());
    let s = block2(&-&mx, &zero_xy, &zero_xy.transpose(), &-&my);
    condition_set(vec![mx, my], s)
}

/// Symmetrization of `∇G` in the scaled norm, expanded in the blocks.
pub fn agda_symmetrized(hb: &HessianBlocks, s: f64) -> DMatrix<f64> {
    let (a, b, c) = (&hb.a, &hb.b, &hb.c);
    let bt = b.transpose();
    let (h, q, e) = (0.5 * s, 0.25 * s, s * s / 8.0);
    let btb = &bt * b;
    let bbt = b * &bt;
    let sxx = -a - a * a * h + (&btb * a + a * &btb) * e - &bt * c * b * (2.0 * e);
    let syy = -c - c * c * h + b * a * &bt * (2.0 * e) + (&bbt * c + c * &bbt) * e;
    let sxy = -(a * &bt - &bt * c) * q + (a * a * &bt + &bt * c * c) * e;
    linalg::symmetrize(&block2(&sxx, &sxy, &sxy.transpose(), &syy))
}

/// Closed-form conditions for all four dynamics at a stationary point.
pub fn closed_form_conditions(p: &ProblemInstance, z_star: &DVector<f64>, s: f64) -> Result<ClosedFormConditions> {
    require_stationary(p, z_star)?;
    let hb = p.blocks(z_star)?;
    conditions_from_blocks(&hb, s)
}

pub fn conditions_from_blocks(hb: &HessianBlocks, s: f64) -> Result<ClosedFormConditions> {
    let (a, c) = (&hb.a, &hb.c);
    let zero_xy = DMatrix::zeros(a.nrows(), c.nrows());
    let gf = condition_set(vec![a.clone(), c.clone()], block2(&-a, &zero_xy, &zero_xy.transpose(), &-c))?;
    let agda = if s * linalg::spectral_norm(&hb.b) < 2.0 {
        let sym = agda_symmetrized(hb, s);
        Some(condition_set(vec![-&sym], sym)?)
    } else {
        None
    };
    Ok(ClosedFormConditions { gf, gda: gda_like(hb, s)?, egm: gda_like(hb, -s)?, agda })
}

/// Options for [`verify_discrete_attractor`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractorTrials {
    pub n_trials: usize,
    pub radius: f64,
    pub n_steps: usize,
    /// Required per-step contraction of the geometric envelope.
    pub contraction_factor: f64,
    pub seed: u64,
}

impl Default for AttractorTrials {
    fn default() -> Self {
        Self { n_trials: 20, radius: 0.1, n_steps: 2000, contraction_factor: (-1e-4f64).exp(), seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub initial_radius: f64,
    pub final_radius: f64,
    /// Fitted slope of `log‖z_k − z*‖_P` per step; `-inf` when the run hit the roundoff floor.
    pub slope: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteAttractorReport {
    pub passed: bool,
    pub trials: Vec<TrialOutcome>,
    pub failed_seeds: Vec<u64>,
}

/// Least-squares slope of `ys` against their index.
pub fn log_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Runs the discrete method from random starts in the P-ball around `z*` and
/// checks geometric contraction over the second half of each run.
pub fn verify_discrete_attractor(
    p: &ProblemInstance,
    kind: AlgorithmKind,
    z_star: &DVector<f64>,
    s: f64,
    opts: &AttractorTrials,
) -> Result<DiscreteAttractorReport> {
    if !kind.is_discrete() {
        return Err(Error::InvalidInput(format!("'{kind}' is not a discrete algorithm")));
    }
    let hb = p.blocks(z_star)?;
    let norm = NormMatrix::default_for(kind, &hb, s)?;
    verify_discrete_attractor_in(p, kind, z_star, s, &norm, opts)
}

/// As [`verify_discrete_attractor`], certifying and measuring in a caller-chosen norm.
pub fn verify_discrete_attractor_in(
    p: &ProblemInstance,
    kind: AlgorithmKind,
    z_star: &DVector<f64>,
    s: f64,
    norm: &NormMatrix,
    opts: &AttractorTrials,
) -> Result<DiscreteAttractorReport> {
    if !kind.is_discrete() {
        return Err(Error::InvalidInput(format!("'{kind}' is not a discrete algorithm")));
    }
    let vf = VectorField::new(kind.ode(), p.clone(), s)?;
    let cert = certify(&vf, z_star, norm)?;
    if cert.verdict != Verdict::Attractor {
        return Err(Error::Precondition(format!(
            "the {} certificate is {:?} (λ_max(S) = {:e})",
            kind.ode(),
            cert.verdict,
            cert.lambda_max_s
        )));
    }
    let chol = norm
        .matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("norm matrix".into()))?;
    let lt = chol.l().transpose();
    let d = p.dim();
    let threshold = opts.contraction_factor.ln();
    let mut trials = Vec::with_capacity(opts.n_trials);
    for i in 0..opts.n_trials {
        let seed = opts.seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dir = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let len = dir.norm();
        if len > 0.0 {
            dir /= len;
        }
        let rho = opts.radius * rng.gen::<f64>().powf(1.0 / d as f64);
        let w = dir * rho;
        let offset = lt
            .solve_upper_triangular(&w)
            .ok_or_else(|| Error::NotPositiveDefinite("norm factor".into()))?;
        let z0 = z_star + offset;
        let traj = run_discrete(p, kind, &z0, s, opts.n_steps, &GradientOracle::full())?;
        let dists: Vec<f64> = traj.states.iter().map(|st| norm.norm(&(&st.z - z_star))).collect();
        let d0 = dists[0];
        let floor = (1e-12 * d0).max(1e-14);
        let final_radius = *dists.last().unwrap();
        let (slope, passed) = if traj.diverged() {
            (f64::INFINITY, false)
        } else if d0 == 0.0 || dists.iter().any(|&r| r <= floor) {
            (f64::NEG_INFINITY, true)
        } else {
            let tail: Vec<f64> = dists[dists.len() / 2..].iter().map(|r| r.ln()).collect();
            let slope = log_slope(&tail);
            (slope, slope < threshold)
        };
        trials.push(TrialOutcome { seed, initial_radius: d0, final_radius, slope, passed });
    }
    let failed_seeds: Vec<u64> = trials.iter().filter(|t| !t.passed).map(|t| t.seed).collect();
    Ok(DiscreteAttractorReport { passed: failed_seeds.is_empty(), trials, failed_seeds })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianThreshold {
    /// Spectral abscissa of the closed-form `∇G(0, 0)` at α = 0.
    pub abscissa_at_zero: f64,
    pub repulsive_at_zero: bool,
    /// Smallest grid α with every eigenvalue in the open left half-plane.
    pub empirical_threshold: Option<f64>,
    /// `λ_max(Σ − Σ′)/4`.
    pub theoretical_bound: f64,
    pub grid_step: f64,
}

/// Scans α on a 0.01 grid through the closed-form GDA-ODE Jacobian at the origin.
pub fn gaussian_gan_threshold(sigma: &DMatrix<f64>, sigma_prime: &DMatrix<f64>, s: f64) -> Result<GaussianThreshold> {
    GaussianGan::new(sigma, sigma_prime, 0.0, 2)?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidInput("stepsize must be non-negative".into()));
    }
    let step = 0.01;
    let bound = linalg::lambda_max_sym(&(sigma - sigma_prime))? / 4.0;
    let abscissa = |alpha: f64| linalg::spectral_abscissa(&crate::problem::gaussian_gan_origin_jacobian(sigma, sigma_prime, alpha, s));
    let at_zero = abscissa(0.0)?;
    let max_k = ((bound + 10.0) / step).ceil() as usize;
    let mut threshold = None;
    for k in 0..=max_k {
        let alpha = k as f64 * step;
        if abscissa(alpha)? < 0.0 {
            threshold = Some(alpha);
            break;
        }
    }
    Ok(GaussianThreshold {
        abscissa_at_zero: at_zero,
        repulsive_at_zero: at_zero > 0.0,
        empirical_threshold: threshold,
        theoretical_bound: bound,
        grid_step: step,
    })
}
