use nalgebra::{DMatrix, DVector};

use super::{HessianBlocks, Minimax};
use crate::error::Result;

/// `L(x, y) = ½xᵀax + yᵀbx − ½yᵀcy`; the bilinear problem is `a = c = 0`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl Quadratic {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Self {
        Self { a, b, c }
    }

    fn split(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.a.nrows();
        (z.rows(0, n).into_owned(), z.rows(n, self.c.nrows()).into_owned())
    }
}

impl Minimax for Quadratic {
    fn dim_x(&self) -> usize {
        self.a.nrows()
    }

    fn dim_y(&self) -> usize {
        self.c.nrows()
    }

    fn value(&self, z: &DVector<f64>) -> Result<f64> {
        let (x, y) = self.split(z);
        Ok(0.5 * x.dot(&(&self.a * &x)) + y.dot(&(&self.b * &x)) - 0.5 * y.dot(&(&self.c * &y)))
    }

    fn field(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let (x, y) = self.split(z);
        let fx = &self.a * &x + self.b.tr_mul(&y);
        let fy = &self.c * &y - &self.b * &x;
        let mut out = DVector::zeros(z.len());
        out.rows_mut(0, x.len()).copy_from(&fx);
        out.rows_mut(x.len(), y.len()).copy_from(&fy);
        Ok(out)
    }

    fn blocks(&self, z: &DVector<f64>) -> Result<HessianBlocks> {
        Ok(HessianBlocks { a: self.a.clone(), b: self.b.clone(), c: self.c.clone(), z: z.clone() })
    }
}
