//! Mixed space-time norms on kernel trajectories.
//!
//! Conventions:
//! - The difference/sum axes carry the directional derivative symbols:
//!   `grad_{x-y} = grad_x - grad_y` (symbol `xi - eta`) and
//!   `grad_{x+y} = grad_x + grad_y` (symbol `xi + eta`).
//! - Rotated integration axes use the lattice change of variables of
//!   [`crate::kernel::rotate`] (odd `n` only). Its constant Jacobian factor
//!   is left in place; every consumer compares rotated quantities with
//!   rotated quantities.
//! - Time integrals are left-endpoint Riemann sums over the frame grid with
//!   weight `frame_dt`; `p = inf` takes the sup over frames.
//!
//! Two evaluation orders appear:
//! - standard: `L^p(dt) L^q(outer) L^2(inner)` with time outermost,
//! - collapsing: `L^q(outer) L^p(dt) L^2(inner)` where the outer spatial
//!   variable is taken outside the time integral. With `q = inf`, `p = 2`
//!   and outer = x-y this is the collapsed estimate norm
//!   `sup_{x-y} ( int dt int d(x+y) |A|^2 )^(1/2)`.

use num_complex::Complex64;

use crate::error::{HfbError, Result};
use crate::evolution::Trajectory;
use crate::grid::Grid;
use crate::kernel::{self, Kernel2};
use crate::spectral::{transform_all, Dir, Multiplier, SpaceAxis};

pub const INF: f64 = f64::INFINITY;

/// Half-open time window in seconds; `end <= start` means the full range.
#[derive(Clone, Copy, Debug)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn full() -> TimeWindow {
        TimeWindow { start: 0.0, end: -1.0 }
    }

    /// Frame index range selected by this window.
    pub fn select(&self, n_frames: usize, frame_dt: f64) -> (usize, usize) {
        if self.end <= self.start {
            return (0, n_frames);
        }
        let lo = (self.start / frame_dt).ceil().max(0.0) as usize;
        let hi = ((self.end / frame_dt).floor() as usize + 1).min(n_frames);
        (lo.min(n_frames), hi)
    }
}

/// Weighted little-l^q reduction. `q = inf` is the max.
fn lq(vals: &[f64], weight: f64, q: f64) -> f64 {
    if q.is_infinite() {
        return vals.iter().fold(0.0f64, |m, v| m.max(*v));
    }
    (weight * vals.iter().map(|v| v.powf(q)).sum::<f64>()).powf(1.0 / q)
}

/// Which spatial index is the outer integration variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outer {
    Row,
    Col,
}

/// Evaluation order of the three integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    /// `L^p(dt) L^q(outer) L^2(inner)`.
    Standard,
    /// `L^q(outer) L^p(dt) L^2(inner)`.
    Collapsing,
}

/// Inner-L^2 profile per frame: `g[t][o] = (h^d sum_inner |B|^2)^(1/2)`.
fn inner_l2(grid: &Grid, frames: &[Kernel2], outer: Outer) -> Vec<Vec<f64>> {
    let nd = grid.points();
    let w = grid.quad();
    frames
        .iter()
        .map(|k| {
            let mut g = vec![0.0f64; nd];
            match outer {
                Outer::Row => {
                    for o in 0..nd {
                        let row = &k.values[o * nd..(o + 1) * nd];
                        g[o] = (w * row.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt();
                    }
                }
                Outer::Col => {
                    for o in 0..nd {
                        let mut acc = 0.0f64;
                        for i in 0..nd {
                            acc += k.values[i * nd + o].norm_sqr();
                        }
                        g[o] = (w * acc).sqrt();
                    }
                }
            }
            g
        })
        .collect()
}

/// Mixed norm of a kernel trajectory slice. Returns `None` when the frame
/// window is empty.
pub fn mixed_norm(
    grid: &Grid,
    frames: &[Kernel2],
    frame_dt: f64,
    outer: Outer,
    p: f64,
    q: f64,
    order: Order,
) -> Option<f64> {
    if frames.is_empty() {
        return None;
    }
    let g = inner_l2(grid, frames, outer);
    let nd = grid.points();
    let wq = grid.quad();
    match order {
        Order::Standard => {
            let per_t: Vec<f64> = g.iter().map(|gt| lq(gt, wq, q)).collect();
            Some(lq(&per_t, frame_dt, p))
        }
        Order::Collapsing => {
            let mut per_o = vec![0.0f64; nd];
            for (o, slot) in per_o.iter_mut().enumerate() {
                let series: Vec<f64> = g.iter().map(|gt| gt[o]).collect();
                *slot = lq(&series, frame_dt, p);
            }
            Some(lq(&per_o, wq, q))
        }
    }
}

/// Admissible exponent pairs `2/p + d/q = d/2` used by the mixed-norm
/// batteries, largest p first.
pub fn admissible_family(d: usize) -> Vec<(f64, f64)> {
    match d {
        1 => vec![(4.0, INF), (6.0, 6.0), (8.0, 4.0), (INF, 2.0)],
        2 => vec![(4.0, 4.0), (6.0, 3.0), (8.0, 8.0 / 3.0), (INF, 2.0)],
        3 => vec![(2.0, 6.0), (8.0 / 3.0, 4.0), (4.0, 3.0), (INF, 2.0)],
        _ => Vec::new(),
    }
}

/// Checks the admissibility identity for a pair.
pub fn is_admissible(d: usize, p: f64, q: f64) -> bool {
    let lhs = if p.is_infinite() { 0.0 } else { 2.0 / p }
        + if q.is_infinite() { 0.0 } else { d as f64 / q };
    (lhs - d as f64 / 2.0).abs() < 1e-12
}

/// Applies a list of multipliers to every frame (cloning the inputs).
pub fn apply_multipliers(
    grid: &Grid,
    frames: &[Kernel2],
    mults: &[Multiplier],
) -> Result<Vec<Kernel2>> {
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let mut k = f.clone();
        if !mults.is_empty() {
            let mut spec = k.values;
            transform_all(grid, &mut spec, 2 * grid.d, Dir::Fwd);
            for m in mults {
                m.scale_kernel_spectrum(grid, &mut spec);
            }
            transform_all(grid, &mut spec, 2 * grid.d, Dir::Inv);
            k = Kernel2 { nd: f.nd, values: spec, symmetry: crate::kernel::Symmetry::None };
        }
        out.push(k);
    }
    Ok(out)
}

/// Rotates every frame to difference/sum coordinates.
pub fn rotate_frames(grid: &Grid, frames: &[Kernel2]) -> Result<Vec<Kernel2>> {
    frames.iter().map(|f| kernel::rotate(grid, f)).collect()
}

/// The sup-type mixed-norm family: largest value of the standard-order
/// norm over all admissible pairs and both orderings of the straight axes.
/// With `rotated` frames supplied, the difference/sum orderings join the sup.
pub fn strichartz_sup(
    grid: &Grid,
    frames: &[Kernel2],
    rotated: Option<&[Kernel2]>,
    frame_dt: f64,
) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (p, q) in admissible_family(grid.d) {
        for outer in [Outer::Row, Outer::Col] {
            if let Some(v) = mixed_norm(grid, frames, frame_dt, outer, p, q, Order::Standard) {
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
            if let Some(rot) = rotated {
                if let Some(v) = mixed_norm(grid, rot, frame_dt, outer, p, q, Order::Standard) {
                    best = Some(best.map_or(v, |b: f64| b.max(v)));
                }
            }
        }
    }
    best
}

/// Sampled stand-in for the dual-exponent norm: the smallest standard-order
/// mixed norm over the dual pairs `(p', q')` of the admissible pairs with
/// `2 < p < inf`, both orderings.
pub fn dual_sampled_inf(grid: &Grid, frames: &[Kernel2], frame_dt: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (p, q) in admissible_family(grid.d) {
        if p <= 2.0 || p.is_infinite() {
            continue;
        }
        let pd = p / (p - 1.0);
        let qd = if q.is_infinite() { 1.0 } else { q / (q - 1.0) };
        for outer in [Outer::Row, Outer::Col] {
            if let Some(v) = mixed_norm(grid, frames, frame_dt, outer, pd, qd, Order::Standard) {
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    }
    best
}

// ---- fractional time derivative, two routes ----

/// Raised-cosine (Tukey) window of length `n` with taper fraction `r` per
/// side; `r = 0` is the rectangular window.
pub fn tukey(n: usize, r: f64) -> Vec<f64> {
    let mut w = vec![1.0f64; n];
    if n < 2 || r <= 0.0 {
        return w;
    }
    let ramp = ((r * (n as f64 - 1.0) / 2.0).floor() as usize).max(1);
    for t in 0..ramp.min(n) {
        let c = 0.5 * (1.0 - (std::f64::consts::PI * t as f64 / ramp as f64).cos());
        w[t] = c;
        w[n - 1 - t] = c;
    }
    w
}

/// `|d_t|^k` of one complex time series by the Fourier route: subtract the
/// window mean, taper, zero-pad by `pad`x, multiply `|tau|^k`, transform
/// back, truncate. The mean subtraction is exact for the seminorm route
/// (differences are shift-invariant), so both routes see the same signal.
pub fn fractional_time_deriv(
    series: &[Complex64],
    dt: f64,
    k: f64,
    taper: f64,
    pad: usize,
) -> Vec<Complex64> {
    let f = series.len();
    if f == 0 {
        return Vec::new();
    }
    let mean = series.iter().sum::<Complex64>() / (f as f64);
    let win = tukey(f, taper);
    let v: Vec<Complex64> = (0..f).map(|t| (series[t] - mean) * win[t]).collect();
    fractional_deriv_raw(&v, dt, k, pad)
}

/// The spectral core: zero-pad, transform, multiply `|tau|^k`, transform
/// back, truncate. No centering or tapering; the input is assumed windowed.
pub fn fractional_deriv_raw(v: &[Complex64], dt: f64, k: f64, pad: usize) -> Vec<Complex64> {
    let f = v.len();
    if f == 0 {
        return Vec::new();
    }
    let p = (f * pad.max(1)).max(f);
    let mut buf = vec![Complex64::default(); p];
    buf[..f].copy_from_slice(v);
    let mut planner = rustfft::FftPlanner::new();
    let fwd = planner.plan_fft_forward(p);
    let inv = planner.plan_fft_inverse(p);
    fwd.process(&mut buf);
    for (j, val) in buf.iter_mut().enumerate() {
        let js = if j < p.div_ceil(2) { j as f64 } else { j as f64 - p as f64 };
        let tau = 2.0 * std::f64::consts::PI * js / (p as f64 * dt);
        *val *= tau.abs().powf(k);
    }
    inv.process(&mut buf);
    let scale = 1.0 / p as f64;
    buf.truncate(f);
    for val in buf.iter_mut() {
        *val *= scale;
    }
    buf
}

/// Squared `L^2(dt)` norm of `|d_t|^k u` for one series, Fourier route.
pub fn fractional_deriv_l2_sq(
    series: &[Complex64],
    dt: f64,
    k: f64,
    taper: f64,
    pad: usize,
) -> f64 {
    let d = fractional_time_deriv(series, dt, k, taper, pad);
    dt * d.iter().map(|v| v.norm_sqr()).sum::<f64>()
}

/// Squared difference-quotient seminorm of one series:
/// `sum_{t != s} |u_t - u_s|^2 / |t - s|^(1 + 2k) * dt^2`.
/// Equal to `equiv_constant(k)` times the squared `L^2` norm of `|d_t|^k u`
/// in the continuum.
pub fn seminorm_sq(series: &[Complex64], dt: f64, k: f64) -> f64 {
    let f = series.len();
    if f < 2 {
        return 0.0;
    }
    // Gap powers depend only on the lag; hoist them out of the pair loop.
    let mut lag_w = vec![0.0f64; f];
    for (lag, w) in lag_w.iter_mut().enumerate().skip(1) {
        *w = (lag as f64 * dt).powf(-1.0 - 2.0 * k);
    }
    let mut acc = 0.0f64;
    // Integrand vanishes on the diagonal; pairs counted once, doubled.
    for t in 1..f {
        for s in 0..t {
            acc += (series[t] - series[s]).norm_sqr() * lag_w[t - s];
        }
    }
    2.0 * acc * dt * dt
}

/// The equivalence constant `K(k) = 4 int_0^inf (1 - cos s)/s^(1+2k) ds`
/// relating the two routes, by deterministic quadrature. Valid for
/// `0 < k < 1/2`. For `k = 1/4` this equals `4 sqrt(2 pi)`.
pub fn equiv_constant(k: f64) -> f64 {
    assert!(k > 0.0 && k < 0.5, "equivalence constant needs 0 < k < 1/2");
    // [0, 1] after s = t^2: integrand 2 (1 - cos t^2) t^(-1-4k), smooth at 0.
    let f1 = |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            2.0 * (1.0 - (t * t).cos()) * t.powf(-1.0 - 4.0 * k)
        }
    };
    let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize| {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let part1 = simpson(&f1, 0.0, 1.0, 2000);
    // [1, A] directly, A at a zero of sin for a clean tail estimate.
    let a_end = 2.0 * std::f64::consts::PI * 10_000.0;
    let f2 = |s: f64| (1.0 - s.cos()) * s.powf(-1.0 - 2.0 * k);
    let part2 = simpson(&f2, 1.0, a_end, 1_200_000);
    // Tail: int_A^inf s^(-1-2k) ds = A^(-2k)/(2k); the oscillatory part is
    // O(A^(-1-2k)) after integration by parts and is negligible here.
    let tail = a_end.powf(-2.0 * k) / (2.0 * k);
    4.0 * (part1 + part2 + tail)
}

/// Analytic continuation of the difference integral outside the sample
/// window, for a series that vanishes beyond it (true after tapering):
/// `2 sum_t dt |v_t|^2 * (a_left^(-2k) + a_right^(-2k)) / (2k)` where
/// `a_left/right` are the distances to the window edges. Without this term
/// the windowed double sum undercounts the seminorm of a compactly
/// supported signal.
pub fn window_tail_correction(v: &[Complex64], dt: f64, k: f64) -> f64 {
    let f = v.len();
    let w = f as f64 * dt;
    let mut acc = 0.0f64;
    for (j, val) in v.iter().enumerate() {
        let m = val.norm_sqr();
        if m == 0.0 {
            continue;
        }
        let a_l = (j as f64 * dt).max(dt);
        let a_r = (w - j as f64 * dt).max(dt);
        acc += m * (a_l.powf(-2.0 * k) + a_r.powf(-2.0 * k));
    }
    2.0 * acc * dt / (2.0 * k)
}

/// Squared `L^2` norms of `|d_t|^k` across a trajectory of flattened
/// spatial slices, by both routes applied to the same windowed signal
/// `v = (u - mean) * taper`. Returns `(multiplier_sq, seminorm_sq)`, each
/// `sum_slots slot_weight * ||.||^2_{L^2(dt)}`; the seminorm route divides
/// by the equivalence constant `K(k)` and includes the out-of-window tail.
pub fn quarter_paths_sq(
    frames: &[Vec<Complex64>],
    dt: f64,
    k: f64,
    taper: f64,
    pad: usize,
    slot_weight: f64,
) -> (f64, f64) {
    let f = frames.len();
    if f == 0 {
        return (0.0, 0.0);
    }
    let slots = frames[0].len();
    let kk = equiv_constant(k);
    let win = tukey(f, taper);
    let mut mult = 0.0f64;
    let mut semi = 0.0f64;
    let mut series = vec![Complex64::default(); f];
    let mut v = vec![Complex64::default(); f];
    for j in 0..slots {
        for t in 0..f {
            series[t] = frames[t][j];
        }
        let mean = series.iter().sum::<Complex64>() / (f as f64);
        for t in 0..f {
            v[t] = (series[t] - mean) * win[t];
        }
        // Fourier route on v (already centered and tapered).
        let dv = fractional_deriv_raw(&v, dt, k, pad);
        mult += slot_weight * dt * dv.iter().map(|z| z.norm_sqr()).sum::<f64>();
        semi += slot_weight * (seminorm_sq(&v, dt, k) + window_tail_correction(&v, dt, k)) / kk;
    }
    (mult, semi)
}

/// Applies `|d_t|^k` across frames of flattened spatial slices. Input is
/// indexed `frames[t][slot]`; the derivative acts per slot.
pub fn fractional_deriv_frames(
    frames: &[Vec<Complex64>],
    dt: f64,
    k: f64,
    taper: f64,
    pad: usize,
) -> Vec<Vec<Complex64>> {
    let f = frames.len();
    if f == 0 {
        return Vec::new();
    }
    let slots = frames[0].len();
    let mut out = vec![vec![Complex64::default(); slots]; f];
    let mut series = vec![Complex64::default(); f];
    for j in 0..slots {
        for t in 0..f {
            series[t] = frames[t][j];
        }
        let d = fractional_time_deriv(&series, dt, k, taper, pad);
        for t in 0..f {
            out[t][j] = d[t];
        }
    }
    out
}

/// Morawetz-type quantity: `|| rho ||_{L^2(dt dx)}` over the window.
pub fn morawetz(grid: &Grid, traj: &Trajectory, window: TimeWindow) -> Option<f64> {
    let (lo, hi) = window.select(traj.frames.len(), traj.frame_dt());
    if lo >= hi {
        return None;
    }
    let mut acc = 0.0f64;
    for fr in &traj.frames[lo..hi] {
        let rho = fr.rho(grid);
        acc += rho.iter().map(|r| r * r).sum::<f64>();
    }
    Some((acc * traj.frame_dt() * grid.quad()).sqrt())
}

// ---- battery ----

/// One row of the norms table.
#[derive(Clone, Debug)]
pub struct NormRow {
    pub run_id: String,
    pub norm_name: String,
    pub axis: String,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub window_start: f64,
    pub window_end: f64,
    /// `None` renders as "degenerate" (empty window, or rotated axes on an
    /// even grid).
    pub value: Option<f64>,
}

/// Battery configuration.
#[derive(Clone, Debug)]
pub struct BatteryCfg {
    pub run_id: String,
    pub alpha: f64,
    pub j_max: usize,
    pub window: TimeWindow,
    pub taper: f64,
    pub pad: usize,
    pub n_particles: f64,
}

fn window_bounds(w: TimeWindow, traj: &Trajectory) -> (f64, f64) {
    if w.end <= w.start {
        let last = traj.frames.last().map(|f| f.t).unwrap_or(0.0);
        (traj.frames.first().map(|f| f.t).unwrap_or(0.0), last)
    } else {
        (w.start, w.end)
    }
}

/// Full norms battery over a trajectory. Row names and order are stable;
/// output is sorted lexicographically by the writer.
pub fn battery(grid: &Grid, traj: &Trajectory, cfg: &BatteryCfg) -> Result<Vec<NormRow>> {
    let mut rows = Vec::new();
    let frame_dt = traj.frame_dt();
    let (lo, hi) = cfg.window.select(traj.frames.len(), frame_dt);
    let (w0, w1) = window_bounds(cfg.window, traj);
    let odd = grid.n % 2 == 1;
    let in_window = &traj.frames[lo..hi];
    let mk = |name: &str, axis: &str, p: f64, q: f64, alpha: f64, value: Option<f64>| NormRow {
        run_id: cfg.run_id.clone(),
        norm_name: name.into(),
        axis: axis.into(),
        p,
        q,
        alpha,
        window_start: w0,
        window_end: w1,
        value,
    };

    let weight_xy = [
        Multiplier::bessel(SpaceAxis::X, cfg.alpha),
        Multiplier::bessel(SpaceAxis::Y, cfg.alpha),
    ];

    // Mixed-norm family rows per target kernel.
    let targets: [(&str, Box<dyn Fn(&crate::evolution::StateHFB) -> Kernel2 + '_>); 6] = [
        ("Lambda", Box::new(|s: &crate::evolution::StateHFB| s.lam(grid))),
        ("Gamma", Box::new(|s: &crate::evolution::StateHFB| s.gam(grid))),
        ("Lambda_p", Box::new(|s: &crate::evolution::StateHFB| s.lam_p.clone())),
        ("Gamma_p", Box::new(|s: &crate::evolution::StateHFB| s.gam_p.clone())),
        ("sh2k", {
            let n = cfg.n_particles;
            Box::new(move |s: &crate::evolution::StateHFB| {
                let mut k = s.lam_p.clone();
                kernel::scale(&mut k, Complex64::new(2.0 * n, 0.0));
                k
            })
        }),
        ("p2", {
            let n = cfg.n_particles;
            Box::new(move |s: &crate::evolution::StateHFB| {
                let mut k = s.gam_p.clone();
                kernel::scale(&mut k, Complex64::new(n, 0.0));
                k
            })
        }),
    ];

    for (tname, build) in targets.iter() {
        let raw: Vec<Kernel2> = in_window.iter().map(|s| build(s)).collect();
        let weighted = apply_multipliers(grid, &raw, &weight_xy)?;
        let rotated = if odd { Some(rotate_frames(grid, &weighted)?) } else { None };
        let name = format!("S[{tname}]");
        let mut sup: Option<f64> = None;
        for (p, q) in admissible_family(grid.d) {
            for (axis, outer, rot) in [
                ("x", Outer::Row, false),
                ("y", Outer::Col, false),
                ("x-y", Outer::Row, true),
                ("x+y", Outer::Col, true),
            ] {
                let value = if rot {
                    match &rotated {
                        Some(rk) => mixed_norm(grid, rk, frame_dt, outer, p, q, Order::Standard),
                        None => None,
                    }
                } else {
                    mixed_norm(grid, &weighted, frame_dt, outer, p, q, Order::Standard)
                };
                if let Some(v) = value {
                    sup = Some(sup.map_or(v, |b: f64| b.max(v)));
                }
                rows.push(mk(&name, axis, p, q, cfg.alpha, value));
            }
        }
        rows.push(mk(&name, "sup", 0.0, 0.0, cfg.alpha, sup));
        // Sampled dual norm on the straight axes.
        let dual = dual_sampled_inf(grid, &weighted, frame_dt);
        rows.push(mk(&format!("S_dual[{tname}]"), "inf", 0.0, 0.0, cfg.alpha, dual));
    }

    // Collapsed and standard-order estimates on the pairing kernel.
    {
        let raw: Vec<Kernel2> = in_window.iter().map(|s| s.lam(grid)).collect();
        let weighted =
            apply_multipliers(grid, &raw, &[Multiplier::bessel(SpaceAxis::Sum, cfg.alpha)])?;
        let rot = if odd { Some(rotate_frames(grid, &weighted)?) } else { None };
        let coll = rot
            .as_ref()
            .and_then(|rk| mixed_norm(grid, rk, frame_dt, Outer::Row, 2.0, INF, Order::Collapsing));
        rows.push(mk("collapsing[<grad_x+y>^a Lambda]", "x-y", 2.0, INF, cfg.alpha, coll));
        let std_ord = rot
            .as_ref()
            .and_then(|rk| mixed_norm(grid, rk, frame_dt, Outer::Row, 2.0, INF, Order::Standard));
        rows.push(mk("L2t_Linf_L2[<grad_x+y>^a Lambda]", "x-y", 2.0, INF, cfg.alpha, std_ord));

        // Quarter time derivative of Lambda, both norm shapes.
        let dt_rows = if in_window.len() >= 2 {
            let flat: Vec<Vec<Complex64>> =
                raw.iter().map(|k| k.values.clone()).collect();
            let deriv = fractional_deriv_frames(&flat, frame_dt, 0.25, cfg.taper, cfg.pad);
            let deriv_kernels: Vec<Kernel2> = deriv
                .into_iter()
                .map(|values| Kernel2 {
                    nd: raw[0].nd,
                    values,
                    symmetry: crate::kernel::Symmetry::None,
                })
                .collect();
            let rotd = if odd { Some(rotate_frames(grid, &deriv_kernels)?) } else { None };
            let coll = rotd.as_ref().and_then(|rk| {
                mixed_norm(grid, rk, frame_dt, Outer::Row, 2.0, INF, Order::Collapsing)
            });
            let std_ord = rotd.as_ref().and_then(|rk| {
                mixed_norm(grid, rk, frame_dt, Outer::Row, 2.0, INF, Order::Standard)
            });
            (coll, std_ord)
        } else {
            (None, None)
        };
        rows.push(mk("collapsing[|dt|^1/4 Lambda]", "x-y", 2.0, INF, 0.25, dt_rows.0));
        rows.push(mk("L2t_Linf_L2[|dt|^1/4 Lambda]", "x-y", 2.0, INF, 0.25, dt_rows.1));
    }

    // Collapsed estimates on the density kernel, fractional and integer
    // sum-axis derivatives.
    {
        let raw: Vec<Kernel2> = in_window.iter().map(|s| s.gam(grid)).collect();
        let mut orders: Vec<f64> = vec![cfg.alpha];
        orders.extend((1..=cfg.j_max).map(|j| j as f64));
        for a in orders {
            let weighted =
                apply_multipliers(grid, &raw, &[Multiplier::frac_abs(SpaceAxis::Sum, a)])?;
            let rot = if odd { Some(rotate_frames(grid, &weighted)?) } else { None };
            let coll = rot.as_ref().and_then(|rk| {
                mixed_norm(grid, rk, frame_dt, Outer::Row, 2.0, INF, Order::Collapsing)
            });
            rows.push(mk("collapsing[|grad_x+y|^a Gamma]", "x-y", 2.0, INF, a, coll));
        }
    }

    // Morawetz-type diagonal quantity.
    rows.push(mk(
        "morawetz_rho_L2tx",
        "diag",
        2.0,
        2.0,
        0.0,
        morawetz(grid, traj, cfg.window),
    ));

    Ok(rows)
}

/// Convenience: the battery value map keyed by `(norm_name, axis, p, q, alpha)`.
pub fn battery_index(rows: &[NormRow]) -> std::collections::BTreeMap<String, Option<f64>> {
    rows.iter()
        .map(|r| {
            (
                format!("{}|{}|{}|{}|{}", r.norm_name, r.axis, fmt_f(r.p), fmt_f(r.q), fmt_f(r.alpha)),
                r.value,
            )
        })
        .collect()
}

/// Canonical float formatting shared by the CSV writers: shortest
/// round-trip, infinity as "inf".
pub fn fmt_f(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// Validates that the admissible families satisfy the scaling identity.
pub fn family_identity_defect(d: usize) -> f64 {
    admissible_family(d)
        .iter()
        .map(|(p, q)| {
            let lhs = if p.is_infinite() { 0.0 } else { 2.0 / p }
                + if q.is_infinite() { 0.0 } else { d as f64 / q };
            (lhs - d as f64 / 2.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Guard used by config validation: the derivative weight must exceed 1/2
/// for the collapsed sup-type estimates to be meaningful.
pub fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.5) {
        return Err(HfbError::Config(format!(
            "analysis.alpha must be > 1/2, got {alpha}"
        )));
    }
    Ok(())
}
