//! Conserved quantities and per-frame structural health checks.

use num_complex::Complex64;

use crate::evolution::StateHFB;
use crate::grid::Grid;
use crate::kernel::{self, Kernel2};
use crate::potential::PotentialSampled;
use crate::spectral::{transform_all, Dir};

/// One row of the monitor log.
#[derive(Clone, Copy, Debug)]
pub struct MonitorRow {
    pub t: f64,
    pub trace: f64,
    pub energy: f64,
    pub sym_residual: f64,
    pub herm_residual: f64,
    pub min_eig_gamma_p: f64,
}

/// Total particle density `tr Gamma = |phi|_2^2 + tr Gamma_p`, conserved by
/// the flow and normalized to 1 by the initial data.
pub fn trace_gamma(grid: &Grid, state: &StateHFB) -> f64 {
    let phi2 = grid.quad() * state.phi.values.iter().map(|v| v.norm_sqr()).sum::<f64>();
    phi2 + state.gam_p.trace(grid).re
}

/// Kinetic pairing `tr(grad_x . grad_y A)` evaluated spectrally:
/// `(h^d / n^d) sum_k |xi_k|^2 Ahat(k, neg k)` where both kernel axes are
/// transformed forward and `neg k` is the reflected lattice frequency.
/// Exact on the grid; real for hermitian `A` up to roundoff.
pub fn kinetic_pairing(grid: &Grid, a: &Kernel2) -> f64 {
    let nd = grid.points();
    let n = grid.n;
    let d = grid.d;
    let mut spec = a.values.clone();
    transform_all(grid, &mut spec, 2, Dir::Fwd);
    let mut idx = [0usize; 3];
    let mut acc = Complex64::default();
    for k in 0..nd {
        grid.decode(k, &mut idx);
        let mut xi2 = 0.0f64;
        let mut negk = 0usize;
        for a_ in 0..d {
            let f = grid.freq_at(idx[a_]);
            xi2 += f * f;
            negk = negk * n + (n - idx[a_]) % n;
        }
        acc += xi2 * spec[k * nd + negk];
    }
    (grid.quad() / nd as f64) * acc.re
}

/// Total energy of the state:
///
/// ```text
/// E = tr(grad_x . grad_y Gamma)
///   + 1/2 iint V_N(x-y) |Lambda(x,y)|^2
///   + 1/2 iint V_N(x-y) (|Gamma(x,y)|^2 + rho(x) rho(y))
///   -     iint V_N(x-y) |phi(x)|^2 |phi(y)|^2
/// ```
///
/// with `Lambda = Lambda_c + Lambda_p`, `Gamma = Gamma_c + Gamma_p`. For a
/// pure condensate this collapses to
/// `int |grad phi|^2 + 1/2 iint V_N |phi(x)|^2 |phi(y)|^2`.
pub fn energy(grid: &Grid, pot: &PotentialSampled, state: &StateHFB) -> f64 {
    let nd = grid.points();
    let n = grid.n;
    let d = grid.d;
    let lam = state.lam(grid);
    let gam = state.gam(grid);
    let rho = state.rho(grid);

    let kin = kinetic_pairing(grid, &gam);

    let mut pair = 0.0f64;
    let mut dens = 0.0f64;
    let mut cond = 0.0f64;
    let mut xi = [0usize; 3];
    let mut yi = [0usize; 3];
    for x in 0..nd {
        grid.decode(x, &mut xi);
        let phix2 = state.phi.values[x].norm_sqr();
        for y in 0..nd {
            grid.decode(y, &mut yi);
            let mut flat = 0usize;
            for a_ in 0..d {
                flat = flat * n + (xi[a_] + n - yi[a_]) % n;
            }
            let v = pot.vn[flat];
            if v == 0.0 {
                continue;
            }
            let e = x * nd + y;
            pair += v * lam.values[e].norm_sqr();
            dens += v * (gam.values[e].norm_sqr() + rho[x] * rho[y]);
            cond += v * phix2 * state.phi.values[y].norm_sqr();
        }
    }
    let w2 = grid.quad() * grid.quad();
    kin + w2 * (0.5 * pair + 0.5 * dens - cond)
}

/// Full monitor row for one frame.
pub fn monitor(grid: &Grid, pot: &PotentialSampled, state: &StateHFB) -> MonitorRow {
    let (sym, _) = state.lam_p.symmetry_residuals();
    let (_, herm) = state.gam_p.symmetry_residuals();
    MonitorRow {
        t: state.t,
        trace: trace_gamma(grid, state),
        energy: energy(grid, pot, state),
        sym_residual: sym,
        herm_residual: herm,
        min_eig_gamma_p: state.gam_p.min_eig(grid),
    }
}

/// Worst-case drifts over a monitor log: returns
/// `(max |trace - trace0|, max |energy - energy0| / max(|energy0|, eps))`.
pub fn drifts(rows: &[MonitorRow]) -> (f64, f64) {
    if rows.is_empty() {
        return (0.0, 0.0);
    }
    let t0 = rows[0].trace;
    let e0 = rows[0].energy;
    let mut dt = 0.0f64;
    let mut de = 0.0f64;
    for r in rows {
        dt = dt.max((r.trace - t0).abs());
        de = de.max((r.energy - e0).abs());
    }
    (dt, de / e0.abs().max(1e-300))
}

/// Pure-condensate reference energy
/// `int |grad phi|^2 + 1/2 iint V_N |phi(x)|^2 |phi(y)|^2`, used by the
/// degenerate-data checks.
pub fn condensate_energy(grid: &Grid, pot: &PotentialSampled, phi: &kernel::Field1) -> f64 {
    let nd = grid.points();
    let n = grid.n;
    let d = grid.d;
    // |grad phi|^2 spectrally.
    let mut spec = phi.values.clone();
    transform_all(grid, &mut spec, 1, Dir::Fwd);
    let mut idx = [0usize; 3];
    let mut kin = 0.0f64;
    for k in 0..nd {
        grid.decode(k, &mut idx);
        let mut xi2 = 0.0f64;
        for a_ in 0..d {
            let f = grid.freq_at(idx[a_]);
            xi2 += f * f;
        }
        kin += xi2 * spec[k].norm_sqr();
    }
    kin *= grid.quad() / nd as f64;

    let mut cond = 0.0f64;
    let mut xi = [0usize; 3];
    let mut yi = [0usize; 3];
    for x in 0..nd {
        grid.decode(x, &mut xi);
        let px = phi.values[x].norm_sqr();
        for y in 0..nd {
            grid.decode(y, &mut yi);
            let mut flat = 0usize;
            for a_ in 0..d {
                flat = flat * n + (xi[a_] + n - yi[a_]) % n;
            }
            cond += pot.vn[flat] * px * phi.values[y].norm_sqr();
        }
    }
    kin + 0.5 * grid.quad() * grid.quad() * cond
}
