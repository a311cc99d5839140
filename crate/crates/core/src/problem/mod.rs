//! Minimax problem zoo with uniform derivative oracles.
//!
//! Every problem is `min_x max_y L(x, y)` and is exposed through its
//! gradient field `F = (∇ₓL, −∇ᵧL)` and Hessian blocks `A = ∇²ₓₓL`,
//! `C = −∇²ᵧᵧL`, `B = ∂(∇ᵧL)/∂x` (shape m×n).

mod dirac;
mod gaussian;
mod oracle;
mod polynomial;
mod quadratic;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{self, block2};

pub use dirac::DiracGan;
pub use gaussian::{gaussian_gan_origin_jacobian, qmc_normal_nodes, GaussianGan, DEFAULT_QMC_NODES};
pub use oracle::{BatchSize, GradientOracle, OracleStream};
pub use polynomial::SymmetricPolynomial;
pub use quadratic::Quadratic;

/// Smooth minimax objective with derivative oracles.
///
/// Implementors only need `value` and `field`; `blocks` falls back to
/// central differences of the field.
pub trait Minimax: Send + Sync + fmt::Debug {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn value(&self, z: &DVector<f64>) -> Result<f64>;
    /// Gradient field `F(z)` with exact expectations.
    fn field(&self, z: &DVector<f64>) -> Result<DVector<f64>>;
    fn blocks(&self, z: &DVector<f64>) -> Result<HessianBlocks> {
        fd_hessian_blocks(self, z)
    }
    /// Unbiased minibatch estimate of `F(z)`. Deterministic problems return `field`.
    fn sample_field(&self, z: &DVector<f64>, _batch: usize, _rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        self.field(z)
    }
    fn is_stochastic(&self) -> bool {
        false
    }
    /// `(f″(0), f‴(0), f⁗(0))` for problems of the form `f(x) + αxy − f(y)`.
    fn symmetric_derivatives(&self) -> Option<[f64; 3]> {
        None
    }
}

/// Second-order blocks of `L` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianBlocks {
    /// `∇²ₓₓL`, n×n.
    pub a: DMatrix<f64>,
    /// `∂(∇ᵧL)/∂x`, m×n.
    pub b: DMatrix<f64>,
    /// `−∇²ᵧᵧL`, m×m.
    pub c: DMatrix<f64>,
    pub z: DVector<f64>,
}

impl HessianBlocks {
    pub fn dim_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim_y(&self) -> usize {
        self.c.nrows()
    }

    /// `∇F = [[A, Bᵀ], [−B, C]]`.
    pub fn jacobian(&self) -> DMatrix<f64> {
        block2(&self.a, &self.b.transpose(), &(-&self.b), &self.c)
    }

    /// The alternating correction matrix `[[A, Bᵀ], [B, C]]`.
    pub fn agda_matrix(&self) -> DMatrix<f64> {
        block2(&self.a, &self.b.transpose(), &self.b, &self.c)
    }
}

/// Central-difference Hessian blocks from the gradient field.
pub fn fd_hessian_blocks<M: Minimax + ?Sized>(p: &M, z: &DVector<f64>) -> Result<HessianBlocks> {
    let (n, m) = (p.dim_x(), p.dim_y());
    let d = n + m;
    let h = 1e-5 * z.norm().max(1.0);
    let mut jac = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[j] += h;
        zm[j] -= h;
        let col = (p.field(&zp)? - p.field(&zm)?) / (2.0 * h);
        jac.set_column(j, &col);
    }
    let a = linalg::symmetrize(&jac.view((0, 0), (n, n)).into_owned());
    let c = linalg::symmetrize(&jac.view((n, n), (m, m)).into_owned());
    let b = (jac.view((0, n), (n, m)).transpose() - jac.view((n, 0), (m, n))) * 0.5;
    Ok(HessianBlocks { a, b, c, z: z.clone() })
}

/// Serializable problem identity: `{name, dim_x, dim_y, alpha, params}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescriptor {
    pub name: String,
    pub dim_x: usize,
    pub dim_y: usize,
    pub alpha: f64,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

/// A problem together with its descriptor. Cheap to clone and shareable
/// across threads.
#[derive(Clone)]
pub struct ProblemInstance {
    descriptor: ProblemDescriptor,
    model: Arc<dyn Minimax>,
}

impl fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("descriptor", &self.descriptor)
            .field("model", &self.model)
            .finish()
    }
}

/// Registry names accepted by [`ProblemInstance::build`].
pub const REGISTRY: &[&str] = &[
    "bilinear",
    "quadratic",
    "quartic-w",
    "quartic-m",
    "symmetric-poly",
    "dirac-gan",
    "gaussian-gan",
];

impl ProblemInstance {
    /// Wraps a user-defined model. Its Hessian blocks default to finite differences.
    pub fn custom(name: &str, alpha: f64, model: Arc<dyn Minimax>) -> Self {
        let descriptor = ProblemDescriptor {
            name: name.to_string(),
            dim_x: model.dim_x(),
            dim_y: model.dim_y(),
            alpha,
            params: BTreeMap::new(),
        };
        Self { descriptor, model }
    }

    fn registered(name: &str, alpha: f64, params: BTreeMap<String, Value>, model: Arc<dyn Minimax>) -> Self {
        let descriptor = ProblemDescriptor {
            name: name.to_string(),
            dim_x: model.dim_x(),
            dim_y: model.dim_y(),
            alpha,
            params,
        };
        Self { descriptor, model }
    }

    /// Builds a registry problem from its name, α and parameters.
    pub fn build(name: &str, alpha: f64, params: &BTreeMap<String, Value>) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidInput("alpha must be finite".into()));
        }
        let known: &[&str] = match name {
            "bilinear" => &["b"],
            "quadratic" => &["a", "b", "c"],
            "quartic-w" | "quartic-m" | "dirac-gan" => &[],
            "symmetric-poly" => &["coeffs"],
            "gaussian-gan" => &["sigma", "sigma_prime", "nodes"],
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown problem '{other}' (known: {})",
                    REGISTRY.join(", ")
                )))
            }
        };
        if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::InvalidInput(format!("problem '{name}' has no parameter '{k}'")));
        }
        match name {
            "bilinear" => {
                let b = match params.get("b") {
                    Some(v) => matrix_param("b", v)?,
                    None => DMatrix::from_element(1, 1, 1.0),
                };
                make_bilinear(&b)
            }
            "quadratic" => {
                let get = |k: &str| {
                    params
                        .get(k)
                        .ok_or_else(|| Error::InvalidInput(format!("quadratic needs parameter '{k}'")))
                        .and_then(|v| matrix_param(k, v))
                };
                make_quadratic(&get("a")?, &get("b")?, &get("c")?)
            }
            "quartic-w" => Ok(make_quartic_coupled(1, alpha)),
            "quartic-m" => Ok(make_quartic_coupled(-1, alpha)),
            "symmetric-poly" => {
                let coeffs: Vec<f64> = params
                    .get("coeffs")
                    .and_then(|v| serde_json::from_value(v.clone()).ok())
                    .ok_or_else(|| Error::InvalidInput("symmetric-poly needs a 'coeffs' number list".into()))?;
                make_symmetric_polynomial(&coeffs, alpha)
            }
            "dirac-gan" => Ok(make_dirac_gan(alpha)),
            "gaussian-gan" => {
                let get = |k: &str| {
                    params
                        .get(k)
                        .ok_or_else(|| Error::InvalidInput(format!("gaussian-gan needs parameter '{k}'")))
                        .and_then(|v| matrix_param(k, v))
                };
                let nodes = match params.get("nodes") {
                    Some(v) => v
                        .as_u64()
                        .filter(|&n| n >= 2)
                        .ok_or_else(|| Error::InvalidInput("'nodes' must be an integer >= 2".into()))?
                        as usize,
                    None => DEFAULT_QMC_NODES,
                };
                make_gaussian_gan_with_nodes(&get("sigma")?, &get("sigma_prime")?, alpha, nodes)
            }
            _ => unreachable!(),
        }
    }

    /// Rebuilds a problem from a descriptor; the stored dimensions must match.
    pub fn from_descriptor(d: &ProblemDescriptor) -> Result<Self> {
        let p = Self::build(&d.name, d.alpha, &d.params)?;
        if p.dim_x() != d.dim_x || p.dim_y() != d.dim_y {
            return Err(Error::InvalidInput(format!(
                "descriptor dimensions ({}, {}) do not match problem '{}' ({}, {})",
                d.dim_x,
                d.dim_y,
                d.name,
                p.dim_x(),
                p.dim_y()
            )));
        }
        Ok(p)
    }

    /// Same registry problem at a different α.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !REGISTRY.contains(&self.descriptor.name.as_str()) {
            return Err(Error::InvalidInput(format!(
                "custom problem '{}' cannot be re-parameterized",
                self.descriptor.name
            )));
        }
        Self::build(&self.descriptor.name, alpha, &self.descriptor.params)
    }

    pub fn descriptor(&self) -> &ProblemDescriptor {
        &self.descriptor
    }

    pub fn name(&self) -> &str {
        &self.descriptor.name
    }

    pub fn alpha(&self) -> f64 {
        self.descriptor.alpha
    }

    pub fn dim_x(&self) -> usize {
        self.model.dim_x()
    }

    pub fn dim_y(&self) -> usize {
        self.model.dim_y()
    }

    pub fn dim(&self) -> usize {
        self.dim_x() + self.dim_y()
    }

    pub fn model(&self) -> &dyn Minimax {
        self.model.as_ref()
    }

    pub fn is_stochastic(&self) -> bool {
        self.model.is_stochastic()
    }

    pub fn symmetric_derivatives(&self) -> Option<[f64; 3]> {
        self.model.symmetric_derivatives()
    }

    fn check_point(&self, z: &DVector<f64>) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "point has dimension {}, problem '{}' expects {}",
                z.len(),
                self.name(),
                self.dim()
            )));
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("non-finite point".into()));
        }
        Ok(())
    }

    pub fn value(&self, z: &DVector<f64>) -> Result<f64> {
        self.check_point(z)?;
        let v = self.model.value(z)?;
        if !v.is_finite() {
            return Err(Error::Domain(format!("objective is not finite at {z:?}")));
        }
        Ok(v)
    }

    /// Exact gradient field `F(z)`.
    pub fn field(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(z)?;
        finite_vector(self.model.field(z)?, "gradient field")
    }

    pub fn sample_field(&self, z: &DVector<f64>, batch: usize, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        self.check_point(z)?;
        finite_vector(self.model.sample_field(z, batch, rng)?, "sampled gradient field")
    }

    pub fn blocks(&self, z: &DVector<f64>) -> Result<HessianBlocks> {
        self.check_point(z)?;
        let hb = self.model.blocks(z)?;
        let finite = hb.a.iter().chain(hb.b.iter()).chain(hb.c.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("Hessian blocks are not finite".into()));
        }
        Ok(hb)
    }
}

fn finite_vector(v: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{what} is not finite")))
    }
}

/// Accepts a number (1×1) or a nested list of rows.
pub fn matrix_param(key: &str, v: &Value) -> Result<DMatrix<f64>> {
    if let Some(x) = v.as_f64() {
        return Ok(DMatrix::from_element(1, 1, x));
    }
    if let Ok(row) = serde_json::from_value::<Vec<f64>>(v.clone()) {
        return linalg::matrix_from_rows(&[row]);
    }
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone())
        .map_err(|_| Error::InvalidInput(format!("parameter '{key}' must be a number, a row or a list of rows")))?;
    linalg::matrix_from_rows(&rows)
}

fn matrix_value(m: &DMatrix<f64>) -> Value {
    serde_json::to_value(linalg::matrix_to_rows(m)).expect("matrix rows serialize")
}

fn require_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

/// `L(x, y) = yᵀBx` with `B` of shape m×n.
pub fn make_bilinear(b: &DMatrix<f64>) -> Result<ProblemInstance> {
    require_finite(b, "B")?;
    let params = BTreeMap::from([("b".to_string(), matrix_value(b))]);
    let model = Quadratic::new(
        DMatrix::zeros(b.ncols(), b.ncols()),
        b.clone(),
        DMatrix::zeros(b.nrows(), b.nrows()),
    );
    Ok(ProblemInstance::registered("bilinear", 0.0, params, Arc::new(model)))
}

/// `L(x, y) = ½xᵀax + yᵀbx − ½yᵀcy`.
pub fn make_quadratic(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<ProblemInstance> {
    for (m, what) in [(a, "a"), (b, "b"), (c, "c")] {
        require_finite(m, what)?;
    }
    if !a.is_square() || !c.is_square() || b.nrows() != c.nrows() || b.ncols() != a.nrows() {
        return Err(Error::InvalidInput("quadratic needs a: n×n, b: m×n, c: m×m".into()));
    }
    for (m, what) in [(a, "a"), (c, "c")] {
        if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
            return Err(Error::InvalidInput(format!("{what} must be symmetric")));
        }
    }
    let params = BTreeMap::from([
        ("a".to_string(), matrix_value(a)),
        ("b".to_string(), matrix_value(b)),
        ("c".to_string(), matrix_value(c)),
    ]);
    let model = Quadratic::new(a.clone(), b.clone(), c.clone());
    Ok(ProblemInstance::registered("quadratic", 0.0, params, Arc::new(model)))
}

/// `f(x) + αxy − f(y)` with `f(x) = (x+3)(x+1)(x−1)(x−3)` for `sign = +1`,
/// and the same with `f` replaced by `−f` for `sign = −1`.
pub fn make_quartic_coupled(sign: i8, alpha: f64) -> ProblemInstance {
    let s = if sign >= 0 { 1.0 } else { -1.0 };
    let coeffs: Vec<f64> = [9.0, 0.0, -10.0, 0.0, 1.0].iter().map(|c| s * c).collect();
    let name = if sign >= 0 { "quartic-w" } else { "quartic-m" };
    let model = SymmetricPolynomial::new(coeffs, alpha);
    ProblemInstance::registered(name, alpha, BTreeMap::new(), Arc::new(model))
}

/// `f(x) + αxy − f(y)` for a polynomial `f` given by ascending coefficients.
pub fn make_symmetric_polynomial(coeffs: &[f64], alpha: f64) -> Result<ProblemInstance> {
    if coeffs.is_empty() || !coeffs.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidInput("polynomial coefficients must be finite and non-empty".into()));
    }
    let params = BTreeMap::from([("coeffs".to_string(), serde_json::to_value(coeffs)?)]);
    let model = SymmetricPolynomial::new(coeffs.to_vec(), alpha);
    Ok(ProblemInstance::registered("symmetric-poly", alpha, params, Arc::new(model)))
}

/// Two-atom regularized GAN; see [`DiracGan`] for the sign convention.
pub fn make_dirac_gan(alpha: f64) -> ProblemInstance {
    ProblemInstance::registered("dirac-gan", alpha, BTreeMap::new(), Arc::new(DiracGan::new(alpha)))
}

/// Regularized linear-generator GAN on Gaussian data with the default node count.
pub fn make_gaussian_gan(sigma: &DMatrix<f64>, sigma_prime: &DMatrix<f64>, alpha: f64) -> Result<ProblemInstance> {
    make_gaussian_gan_with_nodes(sigma, sigma_prime, alpha, DEFAULT_QMC_NODES)
}

pub fn make_gaussian_gan_with_nodes(
    sigma: &DMatrix<f64>,
    sigma_prime: &DMatrix<f64>,
    alpha: f64,
    nodes: usize,
) -> Result<ProblemInstance> {
    let model = GaussianGan::new(sigma, sigma_prime, alpha, nodes)?;
    let mut params = BTreeMap::from([
        ("sigma".to_string(), matrix_value(sigma)),
        ("sigma_prime".to_string(), matrix_value(sigma_prime)),
    ]);
    if nodes != DEFAULT_QMC_NODES {
        params.insert("nodes".to_string(), Value::from(nodes as u64));
    }
    Ok(ProblemInstance::registered("gaussian-gan", alpha, params, Arc::new(model)))
}

/// `F(z)` through the given oracle. Stochastic oracles draw from the stream
/// seeded by `oracle.seed`, so repeated calls are reproducible.
pub fn gradient_field(p: &ProblemInstance, z: &DVector<f64>, oracle: &GradientOracle) -> Result<DVector<f64>> {
    oracle.stream().eval(p, z)
}

pub fn hessian_blocks(p: &ProblemInstance, z: &DVector<f64>) -> Result<HessianBlocks> {
    p.blocks(z)
}

/// Damped Newton iteration on `F(z) = 0`.
pub fn find_stationary(p: &ProblemInstance, z0: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let mut z = z0.clone();
    let mut f = p.field(&z)?;
    for _ in 0..100 {
        let res = f.norm();
        if res <= tol {
            return Ok(z);
        }
        let jac = p.blocks(&z)?.jacobian();
        let step = jac
            .clone()
            .lu()
            .solve(&f)
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::SingularJacobian(format!("at {:?}", z.as_slice())))?;
        let mut t = 1.0;
        let (mut z_new, mut f_new) = (z.clone(), f.clone());
        for _ in 0..30 {
            let trial = &z - &step * t;
            match p.field(&trial) {
                Ok(ft) if ft.norm() < res => {
                    z_new = trial;
                    f_new = ft;
                    break;
                }
                _ => t *= 0.5,
            }
        }
        if z_new == z {
            // No decrease found: take the full step and let the residual decide.
            z_new = &z - &step;
            f_new = p.field(&z_new)?;
        }
        z = z_new;
        f = f_new;
    }
    if f.norm() <= tol {
        Ok(z)
    } else {
        Err(Error::NonConvergence(format!(
            "Newton iteration left |F| = {:e} after 100 iterations",
            f.norm()
        )))
    }
}

/// Canonical stationary point of the zoo members (the origin).
pub fn canonical_stationary(p: &ProblemInstance) -> DVector<f64> {
    DVector::zeros(p.dim())
}

/// Parses `"1,0.5"` into a vector.
pub fn parse_point(text: &str) -> Result<DVector<f64>> {
    let v: Vec<f64> = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad coordinate '{}'", t.trim())))
        })
        .collect::<Result<_>>()?;
    Ok(DVector::from_vec(v))
}

/// Numerically stable `ln(1 + eᵗ)`.
pub(crate) fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn sigmoid_prime(t: f64) -> f64 {
    let s = sigmoid(t);
    s * (1.0 - s)
}
