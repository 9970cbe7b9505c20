//! Hyperbolic functional calculus on the pair-excitation kernel.
//!
//! For a symmetric kernel `k` the transform kernels are the series
//! `sh(k) = k + (k o conj(k)) o k / 3! + (k o conj(k))^2 o k / 5! + ...` and
//! `ch(k) = delta + (conj(k) o k) / 2! + (conj(k) o k)^2 / 4! + ...`,
//! truncated where the factorial tail of the operator-norm bound drops
//! below the requested tolerance.

use crate::error::{HfbError, Result};
use crate::grid::Grid;
use crate::kernel::{self, add, axpy, compose, Kernel2, Symmetry};
use crate::linalg;
use num_complex::Complex64;

/// A validated pair-excitation kernel with its series metadata.
#[derive(Clone, Debug)]
pub struct PairKernel {
    pub k: Kernel2,
    pub series_tol: f64,
    /// Rigorous upper bound on the operator norm of `k`.
    pub op_norm_bound: f64,
}

impl PairKernel {
    pub fn new(grid: &Grid, k: Kernel2, series_tol: f64) -> Result<PairKernel> {
        let (sym, _) = k.symmetry_residuals();
        let scale = k.max_abs().max(1e-300);
        if sym > 1e-10 * scale {
            return Err(HfbError::Numeric(format!(
                "pair kernel must be symmetric; residual {sym:.3e} vs scale {scale:.3e}"
            )));
        }
        let bound = k.op_norm_bound(grid);
        if !bound.is_finite() {
            return Err(HfbError::Numeric("pair kernel operator-norm bound not finite".into()));
        }
        Ok(PairKernel { k, series_tol, op_norm_bound: bound })
    }
}

/// Smallest depth `m` such that `b^(2m+1) / (2m+1)! < tol`, capped at 60.
fn series_depth(bound: f64, tol: f64) -> usize {
    let mut tail = bound; // b^1 / 1!
    let mut m = 0usize;
    while tail >= tol && m < 60 {
        m += 1;
        tail *= bound * bound / ((2 * m) as f64 * (2 * m + 1) as f64);
    }
    m
}

/// `sh(k)` by truncated series; output symmetric for symmetric input.
pub fn sh(grid: &Grid, pk: &PairKernel) -> Result<Kernel2> {
    let depth = series_depth(pk.op_norm_bound, pk.series_tol);
    let kbar = kernel::conj(&pk.k);
    let mut out = pk.k.clone();
    let mut term = pk.k.clone();
    for m in 1..=depth {
        // term_m = (k o conj(k)) o term_{m-1} / ((2m)(2m+1))
        let t = compose(grid, &kbar, &term)?;
        term = compose(grid, &pk.k, &t)?;
        let f = 1.0 / ((2 * m) as f64 * (2 * m + 1) as f64);
        kernel::scale(&mut term, Complex64::new(f, 0.0));
        axpy(&mut out, Complex64::new(1.0, 0.0), &term);
    }
    out.symmetry = out.measure_symmetry();
    Ok(out)
}

/// `ch(k)` by truncated series; hermitian, bounded below by delta.
pub fn ch(grid: &Grid, pk: &PairKernel) -> Result<Kernel2> {
    let depth = series_depth(pk.op_norm_bound, pk.series_tol);
    let kbar = kernel::conj(&pk.k);
    let mut out = Kernel2::delta(grid);
    let mut term = Kernel2::delta(grid);
    for m in 1..=depth {
        // term_m = (conj(k) o k) o term_{m-1} / ((2m-1)(2m))
        let t = compose(grid, &pk.k, &term)?;
        term = compose(grid, &kbar, &t)?;
        let f = 1.0 / ((2 * m - 1) as f64 * (2 * m) as f64);
        kernel::scale(&mut term, Complex64::new(f, 0.0));
        axpy(&mut out, Complex64::new(1.0, 0.0), &term);
    }
    out.symmetry = out.measure_symmetry();
    Ok(out)
}

/// `sh(2k)`.
pub fn sh2k(grid: &Grid, pk: &PairKernel) -> Result<Kernel2> {
    let mut k2 = pk.k.clone();
    kernel::scale(&mut k2, Complex64::new(2.0, 0.0));
    let pk2 = PairKernel { k: k2, series_tol: pk.series_tol, op_norm_bound: 2.0 * pk.op_norm_bound };
    sh(grid, &pk2)
}

/// Inverse of `ch(k)` as a kernel, with a conditioning report.
/// `ch` is bounded below by delta so this always exists; conditioning above
/// 1e12 is rejected as a numeric failure.
pub fn ch_inverse(grid: &Grid, pk: &PairKernel) -> Result<Kernel2> {
    let c = ch(grid, pk)?;
    let nd = c.nd;
    let (inv_mat, cond) = linalg::invert(&c.values, nd)?;
    if cond > 1e12 {
        return Err(HfbError::Numeric(format!("ch(k) inversion ill-conditioned: {cond:.3e}")));
    }
    // Operator inverse: compose(X, ch) = delta requires X = inv(C) / h^(2d).
    let q = grid.quad();
    let values = inv_mat.into_iter().map(|z| z / (q * q)).collect();
    let mut out = Kernel2 { nd, values, symmetry: Symmetry::None };
    out.symmetry = out.measure_symmetry();
    Ok(out)
}

/// Derived pair densities:
/// `Lambda_p = sh(2k) / (2N)`, `p2 = conj(sh(k)) o sh(k)`, `Gamma_p = p2 / N`.
pub struct PairDensities {
    pub lam_p: Kernel2,
    pub gam_p: Kernel2,
    pub p2: Kernel2,
    pub sh2k: Kernel2,
}

pub fn pair_densities(grid: &Grid, pk: &PairKernel, n_particles: f64) -> Result<PairDensities> {
    if n_particles < 1.0 {
        return Err(HfbError::Config("pair densities need N >= 1".into()));
    }
    let s = sh(grid, pk)?;
    let s2 = sh2k(grid, pk)?;
    let p2 = compose(grid, &kernel::conj(&s), &s)?;
    let mut lam_p = s2.clone();
    kernel::scale(&mut lam_p, Complex64::new(0.5 / n_particles, 0.0));
    let mut gam_p = p2.clone();
    kernel::scale(&mut gam_p, Complex64::new(1.0 / n_particles, 0.0));
    lam_p.symmetry = lam_p.measure_symmetry();
    gam_p.symmetry = gam_p.measure_symmetry();
    Ok(PairDensities { lam_p, gam_p, p2, sh2k: s2 })
}

/// Scalar-mode pair kernel `k = c * delta`: useful identities reduce to
/// plain sinh/cosh of `c`. Exposed for oracle tests.
pub fn scalar_pair(grid: &Grid, c: f64, tol: f64) -> Result<PairKernel> {
    let mut k = Kernel2::delta(grid);
    kernel::scale(&mut k, Complex64::new(c, 0.0));
    PairKernel::new(grid, k, tol)
}

/// Convenience: `delta + a*K` (used in tests).
pub fn delta_plus(grid: &Grid, a: f64, k: &Kernel2) -> Kernel2 {
    let mut d = Kernel2::delta(grid);
    let mut ka = k.clone();
    kernel::scale(&mut ka, Complex64::new(a, 0.0));
    d = add(&d, &ka);
    d.symmetry = d.measure_symmetry();
    d
}
