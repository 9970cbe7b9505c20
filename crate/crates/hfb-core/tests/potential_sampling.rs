//! Quadrature oracles for the scaled interaction potential. The bump mass
//! has a closed-form one-dimensional value (computed here independently by
//! Simpson's rule and frozen as a literal), the mean-field scaling leaves
//! the mass invariant, and the periodic convolution matches a direct sum.

use hfb_core::grid::Grid;
use hfb_core::potential::{self, PotentialSpec};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// `int_{-1}^{1} exp(-1/(1-s^2)) ds`, Simpson value frozen 2026-08.
const BUMP_MASS_1D: f64 = 0.4439938161680794;

fn spec(c: f64, r0: f64, beta: f64, n: f64) -> PotentialSpec {
    PotentialSpec { c, r0, beta, n_particles: n, epsilon: 0.25 }
}

fn simpson_bump_mass(intervals: usize) -> f64 {
    // The integrand is smooth and vanishes to all orders at the endpoints,
    // so plain Simpson converges fast despite the essential singularity.
    let f = |s: f64| {
        let d = 1.0 - s * s;
        if d > 0.0 { (-1.0 / d).exp() } else { 0.0 }
    };
    let h = 2.0 / intervals as f64;
    let mut acc = 0.0;
    for i in 0..intervals {
        let a = -1.0 + i as f64 * h;
        acc += h / 6.0 * (f(a) + 4.0 * f(a + h / 2.0) + f(a + h));
    }
    acc
}

#[test]
fn frozen_bump_mass_agrees_with_fresh_quadrature() {
    let fresh = simpson_bump_mass(40_000);
    assert!(
        (fresh - BUMP_MASS_1D).abs() < 1e-12,
        "frozen 1d bump mass {BUMP_MASS_1D} vs Simpson {fresh}"
    );
}

#[test]
fn unscaled_mass_matches_continuum_value() {
    // N = 1 removes all scaling; a fine lattice resolves the bump so the
    // trapezoid mass converges spectrally to c * r0 * BUMP_MASS_1D.
    // 256 points still leave ~2e-8 relative error; 1024 crush it.
    let grid = Grid::make(1, 1024, TAU).unwrap();
    let sp = spec(1.3, 1.0, 0.5, 1.0);
    let pot = potential::sample_vn(&grid, &sp).unwrap();
    let want = 1.3 * BUMP_MASS_1D;
    assert!(
        (pot.mass - want).abs() < 1e-10 * want,
        "lattice mass {} vs continuum {want}",
        pot.mass
    );
}

#[test]
fn mean_field_scaling_preserves_mass() {
    // vn(x) = N^(d b) * profile(N^b |x|): the amplitude factor exactly
    // cancels the support shrinkage in the integral.
    let grid = Grid::make(1, 2048, TAU).unwrap();
    let m1 = potential::sample_vn(&grid, &spec(1.0, 1.0, 0.5, 1.0)).unwrap().mass;
    let m16 = potential::sample_vn(&grid, &spec(1.0, 1.0, 0.5, 16.0)).unwrap().mass;
    assert!(
        (m1 - m16).abs() < 1e-8 * m1,
        "mass must be scaling-invariant: N=1 gives {m1}, N=16 gives {m16}"
    );
}

#[test]
fn peak_value_carries_the_amplitude_factor() {
    let grid = Grid::make(1, 64, TAU).unwrap();
    let sp = spec(0.7, 1.0, 0.5, 16.0);
    let pot = potential::sample_vn(&grid, &sp).unwrap();
    // x = 0 is the first lattice point; profile(0) = exp(-1).
    let want = 16.0f64.powf(0.5) * 0.7 * (-1.0f64).exp();
    assert!((pot.vn[0] - want).abs() < 1e-12 * want);
}

#[test]
fn oversized_support_is_rejected() {
    let grid = Grid::make(1, 64, TAU).unwrap();
    let err = potential::sample_vn(&grid, &spec(1.0, 4.0, 0.5, 1.0)).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("support"), "unexpected message: {msg}");
}

#[test]
fn spec_validation_rejects_bad_parameters() {
    assert!(spec(1.0, 1.0, 0.0, 16.0).validate().is_err(), "beta = 0");
    assert!(spec(1.0, 1.0, 1.0, 16.0).validate().is_err(), "beta = 1");
    assert!(spec(1.0, 1.0, 0.5, 0.5).validate().is_err(), "N < 1");
    assert!(spec(-1.0, 1.0, 0.5, 16.0).validate().is_err(), "negative amplitude");
    assert!(spec(1.0, 0.0, 0.5, 16.0).validate().is_err(), "zero radius");
    assert!(spec(1.0, 1.0, 0.5, 16.0).validate().is_ok());
}

#[test]
fn convolution_matches_direct_periodic_sum() {
    let grid = Grid::make(1, 32, TAU).unwrap();
    let sp = spec(1.0, 1.0, 0.5, 16.0);
    let pot = potential::sample_vn(&grid, &sp).unwrap();
    let rho: Vec<f64> = (0..32).map(|i| 0.2 + (i as f64 * 0.37).sin().powi(2)).collect();
    let got = pot.convolve_density(&grid, &rho).unwrap();
    let h = grid.l / 32.0;
    for x in 0..32usize {
        let mut want = 0.0;
        for z in 0..32usize {
            want += pot.vn[(x + 32 - z) % 32] * rho[z];
        }
        want *= h;
        assert!(
            (got[x] - want).abs() < 1e-11 * want.abs().max(1.0),
            "convolution at {x}: got {}, want {want}",
            got[x]
        );
    }
}

#[test]
fn two_dimensional_mass_is_the_square_structure() {
    // d = 2 uses the radial bump, not a product, so only positivity and
    // scaling invariance are structural; check both.
    let grid = Grid::make(2, 128, TAU).unwrap();
    let m1 = potential::sample_vn(&grid, &spec(1.0, 1.0, 0.5, 1.0)).unwrap();
    let m4 = potential::sample_vn(&grid, &spec(1.0, 1.0, 0.5, 4.0)).unwrap();
    assert!(m1.mass > 0.0);
    assert!(
        (m1.mass - m4.mass).abs() < 1e-4 * m1.mass,
        "2d masses: N=1 {} vs N=4 {}",
        m1.mass,
        m4.mass
    );
}

#[test]
fn frequency_split_reassembles_the_potential() {
    let grid = Grid::make(1, 64, TAU).unwrap();
    let sp = spec(1.0, 1.0, 0.5, 16.0);
    let pot = potential::sample_vn(&grid, &sp).unwrap();
    let (main, tail, sup_tail) = pot.split_main_tail(&grid).unwrap();
    let mut worst = 0.0f64;
    let mut sup = 0.0f64;
    for i in 0..64 {
        let whole = pot.vn[i] / sp.n_particles;
        worst = worst.max((main[i] + tail[i] - whole).abs());
        sup = sup.max(tail[i].abs());
    }
    assert!(worst < 1e-12, "main + tail must reassemble v_N / N, off by {worst}");
    assert!((sup - sup_tail).abs() < 1e-12);
}
