//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

/// Full complex spectrum of a square matrix, sorted by real part then
/// imaginary part, both descending.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !m.is_square() {
        return Err(Error::InvalidInput("eigenvalues of a non-square matrix".into()));
    }
    check_finite(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NonConvergence("Schur decomposition".into()))?;
    let mut ev: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(ev)
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.first().map_or(f64::NEG_INFINITY, |e| e.re))
}

fn check_symmetric(s: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !s.is_square() {
        return Err(Error::InvalidInput("symmetric matrix must be square".into()));
    }
    check_finite(s)?;
    let scale = s.amax().max(1.0);
    if (s - s.transpose()).amax() > tol * scale {
        return Err(Error::InvalidInput("matrix is not symmetric".into()));
    }
    Ok(())
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(s: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(s, 1e-10)?;
    let sym = symmetrize(s);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NonConvergence("symmetric eigensolver".into()))?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub fn lambda_max_sym(s: &DMatrix<f64>) -> Result<f64> {
    Ok(*symmetric_eigenvalues(s)?.last().unwrap_or(&f64::NEG_INFINITY))
}

pub fn lambda_min_sym(s: &DMatrix<f64>) -> Result<f64> {
    Ok(*symmetric_eigenvalues(s)?.first().unwrap_or(&f64::INFINITY))
}

/// Unit eigenvector for the largest eigenvalue of a symmetric matrix.
pub fn top_eigenvector(s: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_symmetric(s, 1e-10)?;
    let eig = SymmetricEigen::new(symmetrize(s));
    let (i, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::InvalidInput("empty matrix".into()))?;
    Ok(eig.eigenvectors.column(i).into_owned())
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Principal square root of a symmetric positive semidefinite matrix.
pub fn sqrt_psd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(s, 1e-12)?;
    let eig = SymmetricEigen::new(symmetrize(s));
    let scale = s.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
        return Err(Error::InvalidInput("matrix is not positive semidefinite".into()));
    }
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&root) * q.transpose())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Builds the block matrix [[a, b], [c, d]].
pub fn block2(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), d.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((0, n), (n, m)).copy_from(b);
    out.view_mut((n, 0), (m, n)).copy_from(c);
    out.view_mut((n, n), (m, m)).copy_from(d);
    out
}

/// Parses a matrix literal: rows separated by `;`, entries by `,`.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("bad matrix entry '{}'", v.trim())))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    matrix_from_rows(&rows)
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput("ragged or empty matrix".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
