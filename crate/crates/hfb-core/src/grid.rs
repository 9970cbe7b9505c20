//! Periodic torus discretization and its frequency lattice.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{HfbError, Result};

/// Uniform periodic grid on `[0, L)^d` with `n` points per axis.
///
/// Frequencies follow the usual DFT layout: index `j` on an axis carries
/// `xi_j = 2*pi*j'/L` with `j' = j` for `j < ceil(n/2)` and `j' = j - n`
/// otherwise, so for even `n` the unpaired Nyquist mode is treated as a
/// negative frequency. Quadrature uses the weight `h^d` per point.
#[derive(Clone)]
pub struct Grid {
    pub d: usize,
    pub n: usize,
    pub l: f64,
    pub h: f64,
    freq: Arc<[f64]>,
    pub(crate) fwd: Arc<dyn Fft<f64>>,
    pub(crate) inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("d", &self.d)
            .field("n", &self.n)
            .field("l", &self.l)
            .finish()
    }
}

impl Grid {
    pub fn make(d: usize, n: usize, l: f64) -> Result<Grid> {
        if !(1..=3).contains(&d) {
            return Err(HfbError::Grid(format!("d must be 1, 2, or 3, got {d}")));
        }
        if n < 4 {
            return Err(HfbError::Grid(format!("n must be >= 4, got {n}")));
        }
        if !l.is_finite() || l <= 0.0 {
            return Err(HfbError::Grid(format!("L must be finite and positive, got {l}")));
        }
        let h = l / n as f64;
        let half = n.div_ceil(2);
        let freq: Vec<f64> = (0..n)
            .map(|j| {
                let js = if j < half { j as i64 } else { j as i64 - n as i64 };
                2.0 * std::f64::consts::PI * js as f64 / l
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Grid { d, n, l, h, freq: freq.into(), fwd, inv })
    }

    /// Number of points of a one-point field, `n^d`.
    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Quadrature weight per grid point, `h^d`.
    pub fn quad(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Signed frequency carried by axis index `j`.
    pub fn freq_at(&self, j: usize) -> f64 {
        self.freq[j]
    }

    /// Coordinate of axis index `j` in `[0, L)`.
    pub fn coord_at(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    /// Signed torus coordinate in `[-L/2, L/2)` for axis index `j`.
    pub fn signed_coord_at(&self, j: usize) -> f64 {
        let x = self.coord_at(j);
        if x >= self.l / 2.0 { x - self.l } else { x }
    }

    /// Decomposes a flat `n^d` index into per-axis indices (axis 0 outermost).
    pub fn decode(&self, flat: usize, out: &mut [usize; 3]) {
        let mut rem = flat;
        for a in (0..self.d).rev() {
            out[a] = rem % self.n;
            rem /= self.n;
        }
    }

    /// Signed frequency vector at a flat index.
    pub fn freq_vec(&self, flat: usize, out: &mut [f64; 3]) {
        let mut idx = [0usize; 3];
        self.decode(flat, &mut idx);
        for a in 0..self.d {
            out[a] = self.freq[idx[a]];
        }
    }

    /// Largest |xi| on the lattice (Nyquist magnitude).
    pub fn nyquist(&self) -> f64 {
        self.freq.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }
}
