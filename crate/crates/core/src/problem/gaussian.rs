use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{sigmoid, sigmoid_prime, softplus, HessianBlocks, Minimax};
use crate::error::{Error, Result};
use crate::linalg::{self, block2};

pub const DEFAULT_QMC_NODES: usize = 16384;

/// Regularized GAN with a linear generator `g + Σ′^{1/2}s′`, data
/// `Σ^{1/2}s` and logistic discriminator `D(u) = 1/(1 + e^{dᵀu})`:
///
/// `L(g, d) = E sp(dᵀΣ^{1/2}s) − E sp(−dᵀ(Σ′^{1/2}s′ + g)) + (α/2)‖g‖² − (α/2)‖d‖²`.
///
/// At the origin `∇F = [[αI, ½I], [−½I, αI − ¼(Σ − Σ′)]]`. The exact
/// expectation is replaced by a fixed antithetic quasi-Monte-Carlo node set.
#[derive(Clone, Debug)]
pub struct GaussianGan {
    sigma: DMatrix<f64>,
    sigma_prime: DMatrix<f64>,
    root: DMatrix<f64>,
    root_prime: DMatrix<f64>,
    alpha: f64,
    /// `Σ^{1/2}s_k` and `Σ′^{1/2}s_k` for the node set.
    data_nodes: Vec<DVector<f64>>,
    noise_nodes: Vec<DVector<f64>>,
}

fn validate_cov(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidInput(format!("{what} must be a non-empty square matrix")));
    }
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InvalidInput(format!("{what} must be symmetric")));
    }
    Ok(())
}

impl GaussianGan {
    pub fn new(sigma: &DMatrix<f64>, sigma_prime: &DMatrix<f64>, alpha: f64, nodes: usize) -> Result<Self> {
        validate_cov(sigma, "Sigma")?;
        validate_cov(sigma_prime, "SigmaPrime")?;
        if sigma.shape() != sigma_prime.shape() {
            return Err(Error::InvalidInput("Sigma and SigmaPrime must have the same shape".into()));
        }
        let tol = 1e-12 * sigma.amax().max(1.0);
        if linalg::lambda_min_sym(sigma_prime)? < -tol {
            return Err(Error::InvalidInput("SigmaPrime is not positive semidefinite".into()));
        }
        if linalg::lambda_min_sym(&(sigma - sigma_prime))? < -tol {
            return Err(Error::InvalidInput("Sigma - SigmaPrime is not positive semidefinite".into()));
        }
        let root = linalg::sqrt_psd(sigma)?;
        let root_prime = linalg::sqrt_psd(sigma_prime)?;
        let base = qmc_normal_nodes(sigma.nrows(), nodes);
        let data_nodes = base.iter().map(|s| &root * s).collect();
        let noise_nodes = base.iter().map(|s| &root_prime * s).collect();
        Ok(Self {
            sigma: sigma.clone(),
            sigma_prime: sigma_prime.clone(),
            root,
            root_prime,
            alpha,
            data_nodes,
            noise_nodes,
        })
    }

    fn n(&self) -> usize {
        self.sigma.nrows()
    }

    fn split(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.n();
        (z.rows(0, n).into_owned(), z.rows(n, n).into_owned())
    }

    fn field_with(&self, z: &DVector<f64>, data: &[DVector<f64>], noise: &[DVector<f64>]) -> DVector<f64> {
        let (g, d) = self.split(z);
        let n = self.n();
        let mut w_mean = 0.0;
        let mut grad_d = DVector::zeros(n);
        for e in noise {
            let v = e + &g;
            let w = sigmoid(-d.dot(&v));
            w_mean += w;
            grad_d.axpy(w, &v, 1.0);
        }
        w_mean /= noise.len() as f64;
        grad_d /= noise.len() as f64;
        let mut data_sum = DVector::zeros(n);
        for u in data {
            data_sum.axpy(sigmoid(d.dot(u)), u, 1.0);
        }
        grad_d += data_sum / data.len() as f64;
        let fx = &d * w_mean + &g * self.alpha;
        let fy = -(grad_d - &d * self.alpha);
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&fx);
        out.rows_mut(n, n).copy_from(&fy);
        out
    }

    /// Exact `∇G(0, 0)` of the GDA ODE at stepsize `s`.
    pub fn gda_ode_jacobian_at_origin(&self, s: f64) -> DMatrix<f64> {
        gaussian_gan_origin_jacobian(&self.sigma, &self.sigma_prime, self.alpha, s)
    }

    pub fn sigma_root(&self) -> &DMatrix<f64> {
        &self.root
    }

    pub fn sigma_prime_root(&self) -> &DMatrix<f64> {
        &self.root_prime
    }
}

/// `−J − (s/2)J²` with `J = [[αI, ½I], [−½I, αI − ¼(Σ − Σ′)]]`.
pub fn gaussian_gan_origin_jacobian(sigma: &DMatrix<f64>, sigma_prime: &DMatrix<f64>, alpha: f64, s: f64) -> DMatrix<f64> {
    let n = sigma.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let k = (sigma - sigma_prime) * 0.25;
    let j = block2(&(&eye * alpha), &(&eye * 0.5), &(&eye * -0.5), &(&eye * alpha - k));
    -&j - (&j * &j) * (0.5 * s)
}

/// Antithetic standard-normal node set from a rank-1 Kronecker lattice.
pub fn qmc_normal_nodes(dim: usize, count: usize) -> Vec<DVector<f64>> {
    // Generalized golden ratio: the positive root of x^{d+1} = x + 1.
    let mut phi: f64 = 2.0;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    let steps: Vec<f64> = (1..=dim).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let half = (count / 2).max(1);
    let mut out = Vec::with_capacity(2 * half);
    for k in 1..=half {
        let s = DVector::from_iterator(
            dim,
            steps.iter().map(|a| {
                let t = (0.5 + k as f64 * a).fract().clamp(1e-16, 1.0 - 1e-16);
                normal.inverse_cdf(t)
            }),
        );
        out.push(-&s);
        out.push(s);
    }
    out
}

impl Minimax for GaussianGan {
    fn dim_x(&self) -> usize {
        self.n()
    }

    fn dim_y(&self) -> usize {
        self.n()
    }

    fn value(&self, z: &DVector<f64>) -> Result<f64> {
        let (g, d) = self.split(z);
        let data: f64 = self.data_nodes.iter().map(|u| softplus(d.dot(u))).sum::<f64>() / self.data_nodes.len() as f64;
        let fake: f64 =
            self.noise_nodes.iter().map(|e| softplus(-d.dot(&(e + &g)))).sum::<f64>() / self.noise_nodes.len() as f64;
        Ok(data - fake + 0.5 * self.alpha * (g.norm_squared() - d.norm_squared()))
    }

    fn field(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.field_with(z, &self.data_nodes, &self.noise_nodes))
    }

    fn blocks(&self, z: &DVector<f64>) -> Result<HessianBlocks> {
        let (g, d) = self.split(z);
        let n = self.n();
        let eye = DMatrix::<f64>::identity(n, n);
        let nn = self.noise_nodes.len() as f64;
        let (mut sp_mean, mut s_mean) = (0.0, 0.0);
        let mut vd = DMatrix::zeros(n, n);
        let mut vv = DMatrix::zeros(n, n);
        for e in &self.noise_nodes {
            let v = e + &g;
            let t = -d.dot(&v);
            let sp = sigmoid_prime(t);
            sp_mean += sp;
            s_mean += sigmoid(t);
            vd += &v * d.transpose() * sp;
            vv += &v * v.transpose() * sp;
        }
        let mut uu = DMatrix::zeros(n, n);
        for u in &self.data_nodes {
            uu += u * u.transpose() * sigmoid_prime(d.dot(u));
        }
        uu /= self.data_nodes.len() as f64;
        let (sp_mean, s_mean, vd, vv) = (sp_mean / nn, s_mean / nn, vd / nn, vv / nn);
        let a = &eye * self.alpha - &d * d.transpose() * sp_mean;
        let b = &eye * s_mean - vd;
        let c = -(uu - vv - &eye * self.alpha);
        Ok(HessianBlocks { a: linalg::symmetrize(&a), b, c: linalg::symmetrize(&c), z: z.clone() })
    }

    fn sample_field(&self, z: &DVector<f64>, batch: usize, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        let n = self.n();
        let mut draw = |root: &DMatrix<f64>| -> Vec<DVector<f64>> {
            (0..batch)
                .map(|_| {
                    let s = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut *rng)));
                    root * s
                })
                .collect()
        };
        let data = draw(&self.root);
        let noise = draw(&self.root_prime);
        Ok(self.field_with(z, &data, &noise))
    }

    fn is_stochastic(&self) -> bool {
        true
    }
}
