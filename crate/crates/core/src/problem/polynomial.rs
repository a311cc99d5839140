use nalgebra::{DMatrix, DVector};

use super::{HessianBlocks, Minimax};
use crate::error::Result;

/// `L(x, y) = f(x) + αxy − f(y)` for scalar `x`, `y` and polynomial `f`.
#[derive(Clone, Debug)]
pub struct SymmetricPolynomial {
    /// Ascending coefficients of `f`.
    coeffs: Vec<f64>,
    alpha: f64,
}

impl SymmetricPolynomial {
    pub fn new(coeffs: Vec<f64>, alpha: f64) -> Self {
        Self { coeffs, alpha }
    }

    /// `f⁽ᵏ⁾(x)` by Horner on the differentiated coefficients.
    pub fn derivative(&self, order: usize, x: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate().skip(order).rev() {
            let falling: f64 = (i + 1 - order..=i).map(|j| j as f64).product();
            acc = acc * x + c * falling;
        }
        acc
    }
}

impl Minimax for SymmetricPolynomial {
    fn dim_x(&self) -> usize {
        1
    }

    fn dim_y(&self) -> usize {
        1
    }

    fn value(&self, z: &DVector<f64>) -> Result<f64> {
        let (x, y) = (z[0], z[1]);
        Ok(self.derivative(0, x) + self.alpha * x * y - self.derivative(0, y))
    }

    fn field(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let (x, y) = (z[0], z[1]);
        Ok(DVector::from_vec(vec![
            self.derivative(1, x) + self.alpha * y,
            self.derivative(1, y) - self.alpha * x,
        ]))
    }

    fn blocks(&self, z: &DVector<f64>) -> Result<HessianBlocks> {
        let (x, y) = (z[0], z[1]);
        Ok(HessianBlocks {
            a: DMatrix::from_element(1, 1, self.derivative(2, x)),
            b: DMatrix::from_element(1, 1, self.alpha),
            c: DMatrix::from_element(1, 1, self.derivative(2, y)),
            z: z.clone(),
        })
    }

    fn symmetric_derivatives(&self) -> Option<[f64; 3]> {
        Some([self.derivative(2, 0.0), self.derivative(3, 0.0), self.derivative(4, 0.0)])
    }
}
