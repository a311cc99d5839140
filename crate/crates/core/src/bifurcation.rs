//! Hopf bifurcations of 2-D dynamics in the regularization parameter α.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{AlgorithmKind, VectorField};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{canonical_stationary, find_stationary, ProblemInstance};

pub const DEFAULT_TOL_L1: f64 = 1e-6;
pub const DEFAULT_FD_STEP: f64 = 1e-3;
pub const DEFAULT_BISECTION_TOL: f64 = 1e-10;

/// `α ↦ problem`.
pub type Family<'a> = &'a dyn Fn(f64) -> Result<ProblemInstance>;
/// `problem ↦ stationary point`.
pub type Tracker<'a> = &'a dyn Fn(&ProblemInstance) -> Result<DVector<f64>>;

/// Newton from the origin, the canonical stationary point of every zoo family.
pub fn origin_tracker(p: &ProblemInstance) -> Result<DVector<f64>> {
    find_stationary(p, &canonical_stationary(p), 1e-12)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalAlpha {
    pub alpha_star: f64,
    /// Spectral abscissa of `∇G(z*)` at `alpha_star`.
    pub mu_residual: f64,
    pub bracket: [f64; 2],
}

/// Spectral abscissa `μ(α)` of the dynamic at the tracked stationary point.
pub fn spectral_abscissa_at(family: Family, kind: AlgorithmKind, s: f64, tracker: Tracker, alpha: f64) -> Result<f64> {
    let p = family(alpha)?;
    let z = tracker(&p)?;
    let vf = VectorField::new(kind.ode(), p, s)?;
    linalg::spectral_abscissa(&vf.jacobian_at_stationary(&z)?)
}

/// Bisection on `μ(α)` until the bracket is narrower than `tol`.
pub fn find_critical_alpha(
    family: Family,
    kind: AlgorithmKind,
    s: f64,
    tracker: Tracker,
    alpha_lo: f64,
    alpha_hi: f64,
    tol: f64,
) -> Result<CriticalAlpha> {
    if tol.is_nan() || tol <= 0.0 || alpha_lo.is_nan() || alpha_hi.is_nan() || alpha_lo >= alpha_hi {
        return Err(Error::InvalidInput("need alpha_lo < alpha_hi and tol > 0".into()));
    }
    let mu = |a: f64| spectral_abscissa_at(family, kind, s, tracker, a);
    let (mut lo, mut hi) = (alpha_lo, alpha_hi);
    let mu_lo = mu(lo)?;
    let mu_hi = mu(hi)?;
    if mu_lo.signum() == mu_hi.signum() || mu_lo == 0.0 || mu_hi == 0.0 {
        if mu_lo == 0.0 {
            return Ok(CriticalAlpha { alpha_star: lo, mu_residual: 0.0, bracket: [alpha_lo, alpha_hi] });
        }
        if mu_hi == 0.0 {
            return Ok(CriticalAlpha { alpha_star: hi, mu_residual: 0.0, bracket: [alpha_lo, alpha_hi] });
        }
        return Err(Error::NoSignChange { lo: alpha_lo, hi: alpha_hi });
    }
    let lo_positive = mu_lo > 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = mu(mid)?;
        if m == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (m > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha_star = 0.5 * (lo + hi);
    Ok(CriticalAlpha { alpha_star, mu_residual: mu(alpha_star)?, bracket: [alpha_lo, alpha_hi] })
}

/// Second and third partials of the transformed nonlinearity at the origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Partials {
    pub p_xx: f64,
    pub p_xy: f64,
    pub p_yy: f64,
    pub q_xx: f64,
    pub q_xy: f64,
    pub q_yy: f64,
    pub p_xxx: f64,
    pub p_xyy: f64,
    pub q_xxy: f64,
    pub q_yyy: f64,
}

/// A 2-D field in the coordinates `x = T(z − z*)` where its linear part is
/// `[[0, −w], [w, 0]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalForm2D {
    pub w: f64,
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    /// `T∇G(z*)T⁻¹`.
    pub linear_part: DMatrix<f64>,
    pub partials: Partials,
    pub fd_step: f64,
}

/// Eigenvector of `+iw`, with phase fixed so that `vᵀv` is real and positive
/// (real and imaginary parts orthogonal), `‖v‖² = 2` and `Re v₁ ≥ 0`. For a
/// pure rotation `vᵀv` vanishes and `v₁` is made real instead.
fn hopf_eigenvector(m: &DMatrix<f64>, lambda: Complex<f64>) -> [Complex<f64>; 2] {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let c1 = [Complex::new(b, 0.0), lambda - a];
    let c2 = [lambda - d, Complex::new(c, 0.0)];
    let norm2 = |v: &[Complex<f64>; 2]| v[0].norm_sqr() + v[1].norm_sqr();
    let mut v = if norm2(&c1) >= norm2(&c2) { c1 } else { c2 };
    let q = v[0] * v[0] + v[1] * v[1];
    let phase = if q.norm() > 1e-8 * norm2(&v) {
        Complex::from_polar(1.0, -0.5 * q.arg())
    } else {
        v[0].conj() / v[0].norm()
    };
    let scale = (2.0 / norm2(&v)).sqrt();
    for e in v.iter_mut() {
        *e *= phase * scale;
    }
    if v[0].re < 0.0 {
        v = [-v[0], -v[1]];
    }
    v
}

/// Change of coordinates to the rotation normal form plus FD partials
/// (central differences, one Richardson halving from `fd_step`).
pub fn to_normal_form(vf: &VectorField, z_star: &DVector<f64>) -> Result<NormalForm2D> {
    to_normal_form_with_step(vf, z_star, DEFAULT_FD_STEP)
}

pub fn to_normal_form_with_step(vf: &VectorField, z_star: &DVector<f64>, fd_step: f64) -> Result<NormalForm2D> {
    if vf.problem().dim() != 2 || z_star.len() != 2 {
        return Err(Error::InvalidInput("normal form requires a 2-dimensional system".into()));
    }
    let m = vf.jacobian_at_stationary(z_star)?;
    let tr = m.trace();
    let scale = m.norm();
    if tr.abs() > 1e-6 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHopf(format!("trace {tr:e} is not zero relative to ‖∇G‖ = {scale:e}")));
    }
    let disc = m.determinant() - 0.25 * tr * tr;
    if disc.is_nan() || disc <= 0.0 {
        return Err(Error::NotHopf(format!("eigenvalues are real (det − tr²/4 = {disc:e})")));
    }
    let w = disc.sqrt();
    let v = hopf_eigenvector(&m, Complex::new(0.5 * tr, w));
    let t_inv = DMatrix::from_row_slice(2, 2, &[v[0].re, -v[0].im, v[1].re, -v[1].im]);
    let t = t_inv
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotHopf("defective Jacobian".into()))?;
    let linear_part = &t * &m * &t_inv;
    let h = |x: f64, y: f64| -> Result<DVector<f64>> {
        let z = z_star + &t_inv * DVector::from_vec(vec![x, y]);
        Ok(&t * vf.rhs(&z)?)
    };
    let coarse = fd_partials(&h, fd_step)?;
    let fine = fd_partials(&h, 0.5 * fd_step)?;
    let r = |c: f64, f: f64| (4.0 * f - c) / 3.0;
    let partials = Partials {
        p_xx: r(coarse.p_xx, fine.p_xx),
        p_xy: r(coarse.p_xy, fine.p_xy),
        p_yy: r(coarse.p_yy, fine.p_yy),
        q_xx: r(coarse.q_xx, fine.q_xx),
        q_xy: r(coarse.q_xy, fine.q_xy),
        q_yy: r(coarse.q_yy, fine.q_yy),
        p_xxx: r(coarse.p_xxx, fine.p_xxx),
        p_xyy: r(coarse.p_xyy, fine.p_xyy),
        q_xxy: r(coarse.q_xxy, fine.q_xxy),
        q_yyy: r(coarse.q_yyy, fine.q_yyy),
    };
    Ok(NormalForm2D { w, t, t_inv, linear_part, partials, fd_step })
}

fn fd_partials(h: &dyn Fn(f64, f64) -> Result<DVector<f64>>, s: f64) -> Result<Partials> {
    let mut grid = [[[0.0; 2]; 5]; 5];
    for (i, row) in grid.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let (dx, dy) = (i as i32 - 2, j as i32 - 2);
            // Only the axes and the inner ring are needed.
            if (dx.abs() == 2 && dy != 0) || (dy.abs() == 2 && dx != 0) {
                continue;
            }
            let v = h(dx as f64 * s, dy as f64 * s)?;
            *cell = [v[0], v[1]];
        }
    }
    let at = |dx: i32, dy: i32, c: usize| grid[(dx + 2) as usize][(dy + 2) as usize][c];
    let (s2, s3) = (s * s, s * s * s);
    let xx = |c| (at(1, 0, c) - 2.0 * at(0, 0, c) + at(-1, 0, c)) / s2;
    let yy = |c| (at(0, 1, c) - 2.0 * at(0, 0, c) + at(0, -1, c)) / s2;
    let xy = |c| (at(1, 1, c) - at(1, -1, c) - at(-1, 1, c) + at(-1, -1, c)) / (4.0 * s2);
    let xxx = |c| (at(2, 0, c) - 2.0 * at(1, 0, c) + 2.0 * at(-1, 0, c) - at(-2, 0, c)) / (2.0 * s3);
    let yyy = |c| (at(0, 2, c) - 2.0 * at(0, 1, c) + 2.0 * at(0, -1, c) - at(0, -2, c)) / (2.0 * s3);
    let xxy = |c| {
        ((at(1, 1, c) - 2.0 * at(0, 1, c) + at(-1, 1, c)) - (at(1, -1, c) - 2.0 * at(0, -1, c) + at(-1, -1, c)))
            / (2.0 * s3)
    };
    let xyy = |c| {
        ((at(1, 1, c) - 2.0 * at(1, 0, c) + at(1, -1, c)) - (at(-1, 1, c) - 2.0 * at(-1, 0, c) + at(-1, -1, c)))
            / (2.0 * s3)
    };
    Ok(Partials {
        p_xx: xx(0),
        p_xy: xy(0),
        p_yy: yy(0),
        q_xx: xx(1),
        q_xy: xy(1),
        q_yy: yy(1),
        p_xxx: xxx(0),
        p_xyy: xyy(0),
        q_xxy: xxy(1),
        q_yyy: yyy(1),
    })
}

/// First Lyapunov coefficient of the normal form.
pub fn lyapunov_coefficient(nf: &NormalForm2D) -> Result<f64> {
    let w = nf.w;
    if w == 0.0 || !w.is_finite() {
        return Err(Error::InvalidInput("rotation frequency must be non-zero".into()));
    }
    let p = &nf.partials;
    Ok((p.p_xxx + p.p_xyy + p.q_xxy + p.q_yyy) / (8.0 * w)
        + (p.p_xy * (p.p_xx + p.p_yy) - p.q_xy * (p.q_xx + p.q_yy) - p.p_xx * p.q_xx + p.p_yy * p.q_yy) / (8.0 * w * w))
}

/// `(w, l₁)` for `f(x) + αxy − f(y)` at its critical α, from the derivatives
/// of `f` at 0. Exact when `f‴(0) = 0`.
pub fn closed_form_lyapunov(f2: f64, f3: f64, f4: f64, alpha: f64, s: f64, kind: AlgorithmKind) -> Result<(f64, f64)> {
    let (w, l1) = match kind.ode() {
        AlgorithmKind::Gf => (alpha, -f4 / (4.0 * alpha)),
        AlgorithmKind::GdaOde => {
            let q = 1.0 + s * f2;
            let w = alpha * q;
            let l1 = -f4 / (4.0 * alpha * q) - s * (4.0 * f4 * f2 + 3.0 * f3 * f3) / (8.0 * alpha * q)
                + (2.0 * s * f3 * f3 + 3.0 * s * s * f3 * f3 * f2) / (16.0 * alpha * q * q);
            (w, l1)
        }
        AlgorithmKind::EgmOde => {
            let q = 1.0 - s * f2;
            let w = alpha * q;
            let l1 = -f4 / (4.0 * alpha * q) + s * (4.0 * f4 * f2 + 3.0 * f3 * f3) / (8.0 * alpha * q)
                - (2.0 * s * f3 * f3 - 3.0 * s * s * f3 * f3 * f2) / (16.0 * alpha * q * q);
            (w, l1)
        }
        k => return Err(Error::InvalidInput(format!("no closed form for '{k}'"))),
    };
    if w == 0.0 || !l1.is_finite() {
        return Err(Error::InvalidInput("rotation frequency vanishes".into()));
    }
    Ok((w, l1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HopfClassification {
    Supercritical,
    Subcritical,
    Degenerate,
}

impl HopfClassification {
    pub fn from_l1(l1: f64, tol_l1: f64) -> Self {
        if l1 < -tol_l1 {
            HopfClassification::Supercritical
        } else if l1 > tol_l1 {
            HopfClassification::Subcritical
        } else {
            HopfClassification::Degenerate
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    GenericFd,
    ClosedForm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormValues {
    pub w: f64,
    pub l1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub bracket: [f64; 2],
    pub mu_residual: f64,
    pub fd_step: f64,
    pub partials: Partials,
    /// Present for the symmetric polynomial class.
    pub closed_form: Option<ClosedFormValues>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub algorithm: AlgorithmKind,
    pub s: f64,
    pub alpha_star: f64,
    pub w: f64,
    pub l1: f64,
    pub classification: HopfClassification,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationOptions {
    pub tol: f64,
    pub tol_l1: f64,
    pub fd_step: f64,
    /// Allowed absolute gap between the FD and closed-form `(w, l₁)`.
    pub closed_form_tol: f64,
}

impl Default for BifurcationOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_BISECTION_TOL, tol_l1: DEFAULT_TOL_L1, fd_step: DEFAULT_FD_STEP, closed_form_tol: 1e-3 }
    }
}

/// Locates α*, builds the normal form, evaluates l₁ and classifies. For the
/// symmetric polynomial class the closed form is evaluated as well and must
/// agree with the FD path.
pub fn classify_bifurcation(
    family: Family,
    kind: AlgorithmKind,
    s: f64,
    bracket: (f64, f64),
    tracker: Tracker,
    opts: &BifurcationOptions,
) -> Result<BifurcationReport> {
    let kind = kind.ode();
    let crit = find_critical_alpha(family, kind, s, tracker, bracket.0, bracket.1, opts.tol)?;
    let p = family(crit.alpha_star)?;
    let z = tracker(&p)?;
    let vf = VectorField::new(kind, p.clone(), s)?;
    let nf = to_normal_form_with_step(&vf, &z, opts.fd_step)?;
    let l1 = lyapunov_coefficient(&nf)?;
    let closed_form = match (p.symmetric_derivatives(), kind) {
        (Some([f2, f3, f4]), AlgorithmKind::Gf | AlgorithmKind::GdaOde | AlgorithmKind::EgmOde) => {
            let (wc, lc) = closed_form_lyapunov(f2, f3, f4, crit.alpha_star, s, kind)?;
            if (wc - nf.w).abs() > opts.closed_form_tol || (lc - l1).abs() > opts.closed_form_tol {
                return Err(Error::ClosedFormMismatch(format!(
                    "finite differences give (w, l1) = ({}, {}), closed form gives ({wc}, {lc})",
                    nf.w, l1
                )));
            }
            Some(ClosedFormValues { w: wc, l1: lc })
        }
        _ => None,
    };
    Ok(BifurcationReport {
        algorithm: kind,
        s,
        alpha_star: crit.alpha_star,
        w: nf.w,
        l1,
        classification: HopfClassification::from_l1(l1, opts.tol_l1),
        method: Method::GenericFd,
        diagnostics: Diagnostics {
            bracket: crit.bracket,
            mu_residual: crit.mu_residual,
            fd_step: nf.fd_step,
            partials: nf.partials,
            closed_form,
        },
    })
}
