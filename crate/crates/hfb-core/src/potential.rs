//! The scaled interaction potential and its frequency split.
//!
//! The base profile `v` is a nonnegative, radially nonincreasing C-infinity
//! bump supported in `|x| < r0`. The interaction at particle number `N`
//! is `V_N(x) = N^(d*beta) * v(N^beta * x)`, which keeps the integral of
//! `V_N` independent of `N` in every dimension. The per-particle variant
//! is `v_M = V_N / N`, and its frequency split cuts the spectrum with a
//! smooth plateau profile at the scale `M = N^(beta+eps)`.

use num_complex::Complex64;

use crate::error::{HfbError, Result};
use crate::grid::Grid;
use crate::spectral::{self, smooth_plateau, Dir};

/// Base profile plus scaling parameters.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    /// Amplitude of the bump profile.
    pub c: f64,
    /// Support radius of the bump profile.
    pub r0: f64,
    /// Mean-field scaling exponent, in (0, 1).
    pub beta: f64,
    /// Particle-number parameter.
    pub n_particles: f64,
    /// Frequency-split exponent, > 0.
    pub epsilon: f64,
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(HfbError::Config(format!("beta must be in (0,1), got {}", self.beta)));
        }
        if self.n_particles < 1.0 {
            return Err(HfbError::Config("N must be >= 1".into()));
        }
        if self.c < 0.0 || self.r0 <= 0.0 {
            return Err(HfbError::Config("potential profile needs c >= 0, r0 > 0".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(HfbError::Config("epsilon must be > 0".into()));
        }
        Ok(())
    }

    /// Base profile value at radius `r`.
    pub fn profile(&self, r: f64) -> f64 {
        let s = r.abs() / self.r0;
        if s < 1.0 {
            self.c * (-1.0 / (1.0 - s * s)).exp()
        } else {
            0.0
        }
    }

    /// Frequency-split scale `M = N^(beta+eps)`.
    pub fn m_scale(&self) -> f64 {
        self.n_particles.powf(self.beta + self.epsilon)
    }
}

/// The potential realized on a grid. `vn` is `V_N` sampled on the torus as
/// a function of the difference variable (flat `n^d` layout), `spectrum` its
/// DFT (real, since the profile is even).
#[derive(Clone, Debug)]
pub struct PotentialSampled {
    pub spec: PotentialSpec,
    pub vn: Vec<f64>,
    spectrum: Vec<Complex64>,
    /// `h^d * sum V_N`, the realized mass.
    pub mass: f64,
}

/// Samples `V_N` on the torus. The scaled support must fit inside a
/// half-period so periodization does not self-overlap.
pub fn sample_vn(grid: &Grid, spec: &PotentialSpec) -> Result<PotentialSampled> {
    spec.validate()?;
    let nb = spec.n_particles.powf(spec.beta);
    let support = spec.r0 / nb;
    if support >= grid.l / 2.0 {
        return Err(HfbError::Config(format!(
            "scaled potential support {support:.3} does not fit inside half-period {:.3}",
            grid.l / 2.0
        )));
    }
    let amp = spec.n_particles.powf(grid.d as f64 * spec.beta);
    let nd = grid.points();
    let mut vn = vec![0.0f64; nd];
    let mut idx = [0usize; 3];
    for (flat, slot) in vn.iter_mut().enumerate() {
        grid.decode(flat, &mut idx);
        let mut r2 = 0.0;
        for a in 0..grid.d {
            let s = grid.signed_coord_at(idx[a]);
            r2 += s * s;
        }
        *slot = amp * spec.profile(nb * r2.sqrt());
    }
    let mass = grid.quad() * vn.iter().sum::<f64>();
    let mut spectrum: Vec<Complex64> = vn.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    spectral::transform_all(grid, &mut spectrum, grid.d, Dir::Fwd);
    Ok(PotentialSampled { spec: spec.clone(), vn, spectrum, mass })
}

impl PotentialSampled {
    /// Periodic convolution `(V_N * rho)(x)` for a real density, via spectra.
    pub fn convolve_density(&self, grid: &Grid, rho: &[f64]) -> Result<Vec<f64>> {
        let nd = grid.points();
        if rho.len() != nd {
            return Err(HfbError::Shape("density length vs grid mismatch".into()));
        }
        let mut spec: Vec<Complex64> = rho.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spectral::transform_all(grid, &mut spec, grid.d, Dir::Fwd);
        for (s, v) in spec.iter_mut().zip(self.spectrum.iter()) {
            *s *= v;
        }
        spectral::transform_all(grid, &mut spec, grid.d, Dir::Inv);
        // Discrete convolution sum carries the quadrature weight.
        let q = grid.quad();
        Ok(spec.into_iter().map(|z| z.re * q).collect())
    }

    /// Frequency split of the per-particle potential `v_M = V_N / N`:
    /// the main part keeps `|xi| <= 0.2*M` via a plateau profile equal to 1
    /// on `|xi| <= 0.1*M`, the tail is the remainder. Returns
    /// `(v1_M, v2_M, sup |v2_M|)`.
    pub fn split_main_tail(&self, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let m = self.spec.m_scale();
        if 0.2 * m > grid.nyquist() {
            return Err(HfbError::Config(format!(
                "split cutoff 0.2*M = {:.2} exceeds grid Nyquist {:.2}",
                0.2 * m,
                grid.nyquist()
            )));
        }
        let nd = grid.points();
        let inv_n = 1.0 / self.spec.n_particles;
        let mut spec_main: Vec<Complex64> =
            self.spectrum.iter().map(|&v| v * inv_n).collect();
        let mut xi = [0.0f64; 3];
        for (flat, s) in spec_main.iter_mut().enumerate() {
            grid.freq_vec(flat, &mut xi);
            let r: f64 = xi[..grid.d].iter().map(|x| x * x).sum::<f64>().sqrt();
            *s *= smooth_plateau(r / m, 0.1, 0.2);
        }
        spectral::transform_all(grid, &mut spec_main, grid.d, Dir::Inv);
        let v1: Vec<f64> = spec_main.into_iter().map(|z| z.re).collect();
        let mut v2 = vec![0.0f64; nd];
        let mut sup = 0.0f64;
        for i in 0..nd {
            v2[i] = self.vn[i] * inv_n - v1[i];
            sup = sup.max(v2[i].abs());
        }
        Ok((v1, v2, sup))
    }
}
