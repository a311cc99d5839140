use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use super::{sigmoid, sigmoid_prime, softplus, HessianBlocks, Minimax};
use crate::error::Result;

const ATOMS: [f64; 2] = [1.0, -1.0];

/// Regularized GAN with data and latent noise both uniform on {−1, +1},
/// generator `G(ε) = g + ε` and discriminator `D(t) = 1/(1 + e^{d·t})`.
///
/// The generator `g` plays x and ascends the GAN value while the
/// discriminator `d` descends it:
///
/// `L(g, d) = E[−log D(σ)] + E[−log(1 − D(g + ε))] + (α/2)g² − (α/2)d²`
/// `        = ½Σ sp(dσ) + ½Σ sp(−d(g + ε)) + (α/2)g² − (α/2)d²`
///
/// where `sp` is softplus. With this orientation the GDA ODE at s = 0.2 has
/// its Hopf point at α* ≈ 0.26872.
#[derive(Clone, Debug)]
pub struct DiracGan {
    alpha: f64,
}

impl DiracGan {
    pub fn new(alpha: f64) -> Self {
        Self { alpha }
    }

    fn field_with(&self, g: f64, d: f64, data: &[f64], latent: &[f64]) -> DVector<f64> {
        let (nd, nl) = (data.len() as f64, latent.len() as f64);
        let mut dg = 0.0;
        let mut dd = 0.0;
        for &e in latent {
            let v = g + e;
            let w = sigmoid(-d * v);
            dg -= w * d;
            dd -= w * v;
        }
        dg /= nl;
        dd /= nl;
        let data_term: f64 = data.iter().map(|&s| sigmoid(d * s) * s).sum::<f64>() / nd;
        dd += data_term;
        DVector::from_vec(vec![dg + self.alpha * g, -(dd - self.alpha * d)])
    }
}

impl Minimax for DiracGan {
    fn dim_x(&self) -> usize {
        1
    }

    fn dim_y(&self) -> usize {
        1
    }

    fn value(&self, z: &DVector<f64>) -> Result<f64> {
        let (g, d) = (z[0], z[1]);
        let data: f64 = ATOMS.iter().map(|&s| softplus(d * s)).sum::<f64>() / 2.0;
        let fake: f64 = ATOMS.iter().map(|&e| softplus(-d * (g + e))).sum::<f64>() / 2.0;
        Ok(data + fake + 0.5 * self.alpha * (g * g - d * d))
    }

    fn field(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.field_with(z[0], z[1], &ATOMS, &ATOMS))
    }

    fn blocks(&self, z: &DVector<f64>) -> Result<HessianBlocks> {
        let (g, d) = (z[0], z[1]);
        let (mut lgg, mut lgd, mut ldd) = (0.0, 0.0, 0.0);
        for &e in &ATOMS {
            let v = g + e;
            let t = -d * v;
            let (s, sp) = (sigmoid(t), sigmoid_prime(t));
            lgg += sp * d * d;
            lgd += sp * v * d - s;
            ldd += sp * v * v;
        }
        for &s in &ATOMS {
            ldd += sigmoid_prime(d * s) * s * s;
        }
        Ok(HessianBlocks {
            a: DMatrix::from_element(1, 1, lgg / 2.0 + self.alpha),
            b: DMatrix::from_element(1, 1, lgd / 2.0),
            c: DMatrix::from_element(1, 1, -(ldd / 2.0 - self.alpha)),
            z: z.clone(),
        })
    }

    fn sample_field(&self, z: &DVector<f64>, batch: usize, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect() };
        let data = draw(batch);
        let latent = draw(batch);
        Ok(self.field_with(z[0], z[1], &data, &latent))
    }

    fn is_stochastic(&self) -> bool {
        true
    }
}
