//! Dyadic frequency decomposition (smooth bands, exact telescoping).
//!
//! Band 0 is the base low-pass `profile(|v|)` itself; band `k >= 1` is the
//! difference `profile(|v| / 2^k) - profile(|v| / 2^(k-1))`. Partial sums
//! telescope to `profile(|v| / 2^l)` identically, so reconstruction is exact
//! (to roundoff) on any input whose spectrum lies where that plateau is 1.

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::Grid;
use crate::kernel::{Field1, Kernel2, Symmetry};
use crate::spectral::{lowpass_profile, transform_all, Dir, SpaceAxis};

/// Smooth dyadic band weight at scaled radius `s >= 0`.
pub fn band_profile(s: f64, k: usize) -> f64 {
    if k == 0 {
        lowpass_profile(s)
    } else {
        let pk = 2.0f64.powi(k as i32);
        lowpass_profile(s / pk) - lowpass_profile(s / (pk / 2.0))
    }
}

/// Dyadic stack on one frequency axis of a field or kernel.
#[derive(Clone, Debug)]
pub struct LPStack {
    pub axis: SpaceAxis,
    pub depth: usize,
}

impl LPStack {
    pub fn new(axis: SpaceAxis, depth: usize) -> LPStack {
        LPStack { axis, depth }
    }

    /// Band weight at combined frequency (xi, eta).
    pub fn weight(&self, xi: &[f64], eta: &[f64], k: usize) -> f64 {
        let mut v = [0.0f64; 3];
        self.axis.combine(xi, eta, &mut v);
        let s = v[..xi.len()].iter().map(|x| x * x).sum::<f64>().sqrt();
        band_profile(s, k)
    }
}

/// Projects a field onto band `k` (axis must be X).
pub fn project_field(grid: &Grid, f: &Field1, stack: &LPStack, k: usize) -> Field1 {
    let mut spec = f.values.clone();
    transform_all(grid, &mut spec, grid.d, Dir::Fwd);
    let mut xi = [0.0f64; 3];
    for (flat, v) in spec.iter_mut().enumerate() {
        grid.freq_vec(flat, &mut xi);
        *v *= stack.weight(&xi[..grid.d], &[], k);
    }
    transform_all(grid, &mut spec, grid.d, Dir::Inv);
    Field1 { values: spec }
}

/// Projects a kernel onto band `k` of the stack's axis.
pub fn project_kernel(grid: &Grid, a: &Kernel2, stack: &LPStack, k: usize) -> Kernel2 {
    let nd = grid.points();
    let mut spec = a.values.clone();
    transform_all(grid, &mut spec, 2 * grid.d, Dir::Fwd);
    scale_band(grid, &mut spec, stack, k);
    transform_all(grid, &mut spec, 2 * grid.d, Dir::Inv);
    Kernel2 { nd, values: spec, symmetry: Symmetry::None }
}

fn scale_band(grid: &Grid, spec: &mut [Complex64], stack: &LPStack, k: usize) {
    let nd = grid.points();
    let mut xi = [0.0f64; 3];
    let mut eta = [0.0f64; 3];
    for kx in 0..nd {
        grid.freq_vec(kx, &mut xi);
        let row = &mut spec[kx * nd..(kx + 1) * nd];
        for (ky, v) in row.iter_mut().enumerate() {
            grid.freq_vec(ky, &mut eta);
            *v *= stack.weight(&xi[..grid.d], &eta[..grid.d], k);
        }
    }
}

/// Sum of bands `0..=depth` of a field: equals the low-pass at scale
/// `2^depth` exactly, hence the identity on data band-limited under it.
pub fn reconstruct_field(grid: &Grid, f: &Field1, stack: &LPStack) -> Field1 {
    let mut out = Field1::zeros(grid);
    for k in 0..=stack.depth {
        let p = project_field(grid, f, stack, k);
        for (o, v) in out.values.iter_mut().zip(p.values.iter()) {
            *o += v;
        }
    }
    out
}

/// Pointwise square function `(sum_k |P_k f|^2)^(1/2)` over bands
/// `0..=depth`.
pub fn square_function_field(grid: &Grid, f: &Field1, stack: &LPStack) -> Vec<f64> {
    let nd = grid.points();
    let mut acc = vec![0.0f64; nd];
    for k in 0..=stack.depth {
        let p = project_field(grid, f, stack, k);
        for (a, v) in acc.iter_mut().zip(p.values.iter()) {
            *a += v.norm_sqr();
        }
    }
    acc.into_iter().map(f64::sqrt).collect()
}

/// Pointwise double square function of a kernel with independent stacks on
/// the difference and sum frequency axes:
/// `(sum_{j,k} |P^diff_j P^sum_k A|^2(x,y))^(1/2)`.
pub fn double_square(
    grid: &Grid,
    a: &Kernel2,
    diff: &LPStack,
    sum: &LPStack,
) -> Result<Vec<f64>> {
    let nd = grid.points();
    let mut base = a.values.clone();
    transform_all(grid, &mut base, 2 * grid.d, Dir::Fwd);
    let mut acc = vec![0.0f64; nd * nd];
    for j in 0..=diff.depth {
        for k in 0..=sum.depth {
            let mut spec = base.clone();
            scale_band(grid, &mut spec, diff, j);
            scale_band(grid, &mut spec, sum, k);
            transform_all(grid, &mut spec, 2 * grid.d, Dir::Inv);
            for (slot, v) in acc.iter_mut().zip(spec.iter()) {
                *slot += v.norm_sqr();
            }
        }
    }
    Ok(acc.into_iter().map(f64::sqrt).collect())
}

/// `L^2(dx dy)` ratio of the double square function against the kernel.
pub fn double_square_ratio(
    grid: &Grid,
    a: &Kernel2,
    diff: &LPStack,
    sum: &LPStack,
) -> Result<f64> {
    let ds = double_square(grid, a, diff, sum)?;
    let num = (grid.quad().powi(2) * ds.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let den = a.l2(grid);
    Ok(num / den.max(1e-300))
}

/// Derivative-gain ratio on one band:
/// `||<grad>^alpha P_k f||_2 / (2^(alpha k) ||P_k f||_2)`.
/// Returns `None` when the band carries no energy.
pub fn bernstein_ratio(
    grid: &Grid,
    f: &Field1,
    stack: &LPStack,
    k: usize,
    alpha: f64,
) -> Option<f64> {
    let p = project_field(grid, f, stack, k);
    let den = p.l2(grid);
    if den < 1e-14 {
        return None;
    }
    let mut spec = p.values.clone();
    transform_all(grid, &mut spec, grid.d, Dir::Fwd);
    let mut xi = [0.0f64; 3];
    for (flat, v) in spec.iter_mut().enumerate() {
        grid.freq_vec(flat, &mut xi);
        let w2 = xi[..grid.d].iter().map(|x| x * x).sum::<f64>();
        *v *= (1.0 + w2).powf(alpha / 2.0);
    }
    transform_all(grid, &mut spec, grid.d, Dir::Inv);
    let num = Field1 { values: spec }.l2(grid);
    Some(num / (2.0f64.powf(alpha * k as f64) * den))
}
