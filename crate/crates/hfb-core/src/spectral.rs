//! Spectral transforms and Fourier multipliers.
//!
//! Normalization: the forward transform is the plain unnormalized DFT sum,
//! the inverse divides by `n` per transformed axis. Plancherel then reads
//! `h^d * sum |f|^2 = (h^d / n^d) * sum |fhat|^2` for one-point fields.

use num_complex::Complex64;
use std::sync::Arc;

use crate::error::{HfbError, Result};
use crate::grid::Grid;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Dir {
    Fwd,
    Inv,
}

/// In-place DFT along the given axes of a rank-`rank` array of extent `n`
/// per axis (row-major, axis 0 outermost). `data.len()` must equal `n^rank`.
pub fn transform_axes(grid: &Grid, data: &mut [Complex64], rank: usize, axes: &[usize], dir: Dir) {
    let n = grid.n;
    assert_eq!(data.len(), n.pow(rank as u32), "data length vs rank mismatch");
    let plan = match dir {
        Dir::Fwd => Arc::clone(&grid.fwd),
        Dir::Inv => Arc::clone(&grid.inv),
    };
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
    let mut line = vec![Complex64::default(); n];
    let total = data.len();
    for &axis in axes {
        assert!(axis < rank, "axis out of range");
        let stride = n.pow((rank - 1 - axis) as u32);
        let block = n * stride;
        for base_block in (0..total).step_by(block) {
            for off in 0..stride {
                let base = base_block + off;
                for t in 0..n {
                    line[t] = data[base + t * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for t in 0..n {
                    data[base + t * stride] = line[t];
                }
            }
        }
        if dir == Dir::Inv {
            let scale = 1.0 / n as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }
}

/// In-place DFT over all axes.
pub fn transform_all(grid: &Grid, data: &mut [Complex64], rank: usize, dir: Dir) {
    let axes: Vec<usize> = (0..rank).collect();
    transform_axes(grid, data, rank, &axes, dir);
}

/// Frequency axis a multiplier symbol reads.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SpaceAxis {
    X,
    Y,
    Diff,
    Sum,
}

impl SpaceAxis {
    /// Combined frequency vector for this axis, given (xi, eta).
    pub fn combine(self, xi: &[f64], eta: &[f64], out: &mut [f64; 3]) {
        let d = xi.len();
        for a in 0..d {
            out[a] = match self {
                SpaceAxis::X => xi[a],
                SpaceAxis::Y => eta[a],
                SpaceAxis::Diff => xi[a] - eta[a],
                SpaceAxis::Sum => xi[a] + eta[a],
            };
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SpaceAxis::X => "x",
            SpaceAxis::Y => "y",
            SpaceAxis::Diff => "x-y",
            SpaceAxis::Sum => "x+y",
        }
    }
}

type Symbol = Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>;

/// A Fourier multiplier. The symbol receives the signed frequency vectors
/// (xi, eta); for one-point fields eta is empty.
#[derive(Clone)]
pub struct Multiplier {
    pub name: String,
    pub axis: SpaceAxis,
    symbol: Symbol,
}

fn norm2(v: &[f64; 3], d: usize) -> f64 {
    v[..d].iter().map(|x| x * x).sum()
}

/// C-infinity plateau profile: 1 for |s| <= a, 0 for |s| >= b, smooth
/// exp-of-rational transition in between.
pub fn smooth_plateau(s: f64, a: f64, b: f64) -> f64 {
    let s = s.abs();
    if s <= a {
        return 1.0;
    }
    if s >= b {
        return 0.0;
    }
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let up = f((b - s) / (b - a));
    let dn = f((s - a) / (b - a));
    up / (up + dn)
}

/// The standard low-pass profile: 1 on |s| <= 1, 0 on |s| >= 2.
pub fn lowpass_profile(s: f64) -> f64 {
    smooth_plateau(s, 1.0, 2.0)
}

impl Multiplier {
    pub fn new(name: impl Into<String>, axis: SpaceAxis, symbol: Symbol) -> Multiplier {
        Multiplier { name: name.into(), axis, symbol }
    }

    /// Inhomogeneous derivative weight `(1 + |v|^2)^(alpha/2)` on `axis`.
    pub fn bessel(axis: SpaceAxis, alpha: f64) -> Multiplier {
        let sym: Symbol = Arc::new(move |xi: &[f64], eta: &[f64]| {
            let mut v = [0.0; 3];
            axis.combine(xi, eta, &mut v);
            Complex64::new((1.0 + norm2(&v, xi.len())).powf(alpha / 2.0), 0.0)
        });
        Multiplier::new(format!("<grad_{}>^{}", axis.label(), alpha), axis, sym)
    }

    /// Homogeneous weight `|v|^alpha` on `axis`.
    pub fn frac_abs(axis: SpaceAxis, alpha: f64) -> Multiplier {
        let sym: Symbol = Arc::new(move |xi: &[f64], eta: &[f64]| {
            let mut v = [0.0; 3];
            axis.combine(xi, eta, &mut v);
            Complex64::new(norm2(&v, xi.len()).sqrt().powf(alpha), 0.0)
        });
        Multiplier::new(format!("|grad_{}|^{}", axis.label(), alpha), axis, sym)
    }

    /// Smooth low-pass cutoff at scale `m` on `axis`: profile(|v|/m).
    pub fn low_pass(axis: SpaceAxis, m: f64) -> Multiplier {
        let sym: Symbol = Arc::new(move |xi: &[f64], eta: &[f64]| {
            let mut v = [0.0; 3];
            axis.combine(xi, eta, &mut v);
            Complex64::new(lowpass_profile(norm2(&v, xi.len()).sqrt() / m), 0.0)
        });
        Multiplier::new(format!("P_{{|{}|<{}}}", axis.label(), m), axis, sym)
    }

    /// Pointwise product of two multipliers.
    pub fn product(&self, other: &Multiplier) -> Multiplier {
        let a = Arc::clone(&self.symbol);
        let b = Arc::clone(&other.symbol);
        let sym: Symbol = Arc::new(move |xi: &[f64], eta: &[f64]| a(xi, eta) * b(xi, eta));
        Multiplier::new(format!("{}*{}", self.name, other.name), self.axis, sym)
    }

    pub fn eval(&self, xi: &[f64], eta: &[f64]) -> Complex64 {
        (self.symbol)(xi, eta)
    }

    /// Applies the multiplier to a one-point field in place.
    pub fn apply_field(&self, grid: &Grid, values: &mut [Complex64]) -> Result<()> {
        if self.axis != SpaceAxis::X {
            return Err(HfbError::Shape(format!(
                "multiplier {} reads axis {}, not meaningful for a one-point field",
                self.name,
                self.axis.label()
            )));
        }
        if values.len() != grid.points() {
            return Err(HfbError::Shape("field length vs grid mismatch".into()));
        }
        transform_all(grid, values, grid.d, Dir::Fwd);
        let mut xi = [0.0; 3];
        for (flat, v) in values.iter_mut().enumerate() {
            grid.freq_vec(flat, &mut xi);
            *v *= (self.symbol)(&xi[..grid.d], &[]);
        }
        transform_all(grid, values, grid.d, Dir::Inv);
        Ok(())
    }

    /// Applies the multiplier to a two-point kernel in place.
    pub fn apply_kernel(&self, grid: &Grid, values: &mut [Complex64]) -> Result<()> {
        let nd = grid.points();
        if values.len() != nd * nd {
            return Err(HfbError::Shape("kernel length vs grid mismatch".into()));
        }
        transform_all(grid, values, 2 * grid.d, Dir::Fwd);
        self.scale_kernel_spectrum(grid, values);
        transform_all(grid, values, 2 * grid.d, Dir::Inv);
        Ok(())
    }

    /// Multiplies an already-transformed kernel spectrum by the symbol.
    pub fn scale_kernel_spectrum(&self, grid: &Grid, spec: &mut [Complex64]) {
        let nd = grid.points();
        let mut xi = [0.0; 3];
        let mut eta = [0.0; 3];
        for kx in 0..nd {
            grid.freq_vec(kx, &mut xi);
            let row = &mut spec[kx * nd..(kx + 1) * nd];
            for (ky, v) in row.iter_mut().enumerate() {
                grid.freq_vec(ky, &mut eta);
                *v *= (self.symbol)(&xi[..grid.d], &eta[..grid.d]);
            }
        }
    }
}

/// Free-flow block type for the exact kinetic propagators. `Pair` evolves by
/// the pair operator (phase `-t(|xi|^2+|eta|^2)`), `Density` by the density
/// sector's conjugated difference operator (phase `+t(|xi|^2-|eta|^2)`);
/// the `*Conj` variants carry the opposite phases and drive the conjugate
/// blocks of the matrix form.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FreeFlow {
    Pair,
    PairConj,
    Density,
    DensityConj,
}

impl FreeFlow {
    /// Spectral phase rate: the propagator multiplies each Fourier
    /// coefficient by `exp(i * rate * t)`.
    pub fn rate(self, xi2: f64, eta2: f64) -> f64 {
        match self {
            FreeFlow::Pair => -(xi2 + eta2),
            FreeFlow::PairConj => xi2 + eta2,
            FreeFlow::Density => xi2 - eta2,
            FreeFlow::DensityConj => -(xi2 - eta2),
        }
    }
}

/// Exact free propagation of a kernel by time `t` under the given block type.
pub fn propagate_kernel(grid: &Grid, values: &mut [Complex64], kind: FreeFlow, t: f64) {
    let nd = grid.points();
    assert_eq!(values.len(), nd * nd);
    transform_all(grid, values, 2 * grid.d, Dir::Fwd);
    let mut xi = [0.0; 3];
    let mut eta = [0.0; 3];
    for kx in 0..nd {
        grid.freq_vec(kx, &mut xi);
        let xi2: f64 = xi[..grid.d].iter().map(|v| v * v).sum();
        let row = &mut values[kx * nd..(kx + 1) * nd];
        for (ky, v) in row.iter_mut().enumerate() {
            grid.freq_vec(ky, &mut eta);
            let eta2: f64 = eta[..grid.d].iter().map(|v| v * v).sum();
            *v *= Complex64::from_polar(1.0, kind.rate(xi2, eta2) * t);
        }
    }
    transform_all(grid, values, 2 * grid.d, Dir::Inv);
}

/// Exact free propagation of the condensate: phase `-t|xi|^2`.
pub fn propagate_field(grid: &Grid, values: &mut [Complex64], t: f64) {
    assert_eq!(values.len(), grid.points());
    transform_all(grid, values, grid.d, Dir::Fwd);
    let mut xi = [0.0; 3];
    for (flat, v) in values.iter_mut().enumerate() {
        grid.freq_vec(flat, &mut xi);
        let xi2: f64 = xi[..grid.d].iter().map(|x| x * x).sum();
        *v *= Complex64::from_polar(1.0, -xi2 * t);
    }
    transform_all(grid, values, grid.d, Dir::Inv);
}
