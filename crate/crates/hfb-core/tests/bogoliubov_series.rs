//! Oracles for the hyperbolic kernel series. Scalar multiples of the delta
//! collapse every series to plain sinh/cosh values; generic symmetric
//! kernels must satisfy the hyperbolic relation ch^2 - conj(sh) o sh = delta,
//! which the series code never uses directly; and the derived pair
//! densities are fixed rescalings of those series.

use num_complex::Complex64;

use hfb_core::bogoliubov::{self, PairKernel};
use hfb_core::config::RunConfig;
use hfb_core::evolution;
use hfb_core::grid::Grid;
use hfb_core::kernel::{self, Kernel2, Symmetry};

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn max_abs_diff(a: &Kernel2, b: &Kernel2) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn seeded_kernel(grid: &Grid, seed: u64, scale: f64) -> Kernel2 {
    let cfg = RunConfig { seed, seed_bandwidth: 5.0, seed_scale: scale, ..RunConfig::default() };
    evolution::make_seed_kernel(grid, &cfg).unwrap()
}

#[test]
fn scalar_kernels_reduce_to_sinh_cosh() {
    let grid = Grid::make(1, 16, TAU).unwrap();
    let peak = 16.0 / grid.l; // delta peak 1/h
    for c in [0.1, 0.9, 2.3] {
        let pk = bogoliubov::scalar_pair(&grid, c, 1e-14).unwrap();
        let cases = [
            (bogoliubov::sh(&grid, &pk).unwrap(), c.sinh()),
            (bogoliubov::ch(&grid, &pk).unwrap(), c.cosh()),
            (bogoliubov::sh2k(&grid, &pk).unwrap(), (2.0 * c).sinh()),
            (bogoliubov::ch_inverse(&grid, &pk).unwrap(), 1.0 / c.cosh()),
        ];
        for (kern, scalar) in cases {
            let mut want = Kernel2::delta(&grid);
            kernel::scale(&mut want, Complex64::new(scalar, 0.0));
            let rel = max_abs_diff(&kern, &want) / (peak * scalar.abs());
            assert!(rel < 1e-12, "scalar series at c={c}: rel deviation {rel}");
        }
    }
}

#[test]
fn hyperbolic_identity_holds_for_generic_kernels() {
    // ch(k) o ch(k) - conj(sh(k)) o sh(k) = delta. The series never encode
    // this relation, so it is an independent consistency oracle.
    let grid = Grid::make(1, 24, TAU).unwrap();
    let peak = 24.0 / grid.l;
    for seed in [3u64, 17, 90] {
        let k = seeded_kernel(&grid, seed, 0.8);
        let pk = PairKernel::new(&grid, k, 1e-13).unwrap();
        let s = bogoliubov::sh(&grid, &pk).unwrap();
        let c = bogoliubov::ch(&grid, &pk).unwrap();
        let cc = kernel::compose(&grid, &c, &c).unwrap();
        let ss = kernel::compose(&grid, &kernel::conj(&s), &s).unwrap();
        let mut resid = cc.clone();
        kernel::axpy(&mut resid, Complex64::new(-1.0, 0.0), &ss);
        kernel::axpy(&mut resid, Complex64::new(-1.0, 0.0), &Kernel2::delta(&grid));
        let rel = resid.max_abs() / peak;
        assert!(rel < 1e-10, "seed {seed}: hyperbolic identity residual {rel}");
    }
}

#[test]
fn ch_inverse_is_a_two_sided_inverse() {
    let grid = Grid::make(1, 24, TAU).unwrap();
    let peak = 24.0 / grid.l;
    let k = seeded_kernel(&grid, 4, 0.9);
    let pk = PairKernel::new(&grid, k, 1e-13).unwrap();
    let c = bogoliubov::ch(&grid, &pk).unwrap();
    let cinv = bogoliubov::ch_inverse(&grid, &pk).unwrap();
    let d = Kernel2::delta(&grid);
    let left = kernel::compose(&grid, &cinv, &c).unwrap();
    let right = kernel::compose(&grid, &c, &cinv).unwrap();
    assert!(max_abs_diff(&left, &d) / peak < 1e-10);
    assert!(max_abs_diff(&right, &d) / peak < 1e-10);
}

#[test]
fn series_output_symmetries_match_their_classes() {
    let grid = Grid::make(1, 24, TAU).unwrap();
    let k = seeded_kernel(&grid, 11, 0.7);
    let pk = PairKernel::new(&grid, k, 1e-13).unwrap();
    assert_eq!(bogoliubov::sh(&grid, &pk).unwrap().measure_symmetry(), Symmetry::Symmetric);
    assert_eq!(bogoliubov::sh2k(&grid, &pk).unwrap().measure_symmetry(), Symmetry::Symmetric);
    let c = bogoliubov::ch(&grid, &pk).unwrap();
    assert!(matches!(c.measure_symmetry(), Symmetry::Hermitian | Symmetry::Symmetric));
    // ch is bounded below by the delta, so it is strictly positive.
    assert!(c.min_eig(&grid) > 0.9);
}

#[test]
fn asymmetric_kernels_are_rejected() {
    let grid = Grid::make(1, 8, TAU).unwrap();
    let mut k = Kernel2::zeros(&grid);
    k.values[1] = Complex64::new(1.0, 0.0); // (0,1) without (1,0)
    let err = PairKernel::new(&grid, k, 1e-12).unwrap_err();
    assert!(err.to_string().contains("symmetric"), "got: {err}");
}

#[test]
fn pair_densities_are_fixed_rescalings_of_the_series() {
    let grid = Grid::make(1, 24, TAU).unwrap();
    let k = seeded_kernel(&grid, 21, 0.8);
    let pk = PairKernel::new(&grid, k, 1e-13).unwrap();
    let n_particles = 32.0;
    let pd = bogoliubov::pair_densities(&grid, &pk, n_particles).unwrap();

    // Lambda_p = sh(2k) / (2N).
    let mut want_lam = bogoliubov::sh2k(&grid, &pk).unwrap();
    kernel::scale(&mut want_lam, Complex64::new(0.5 / n_particles, 0.0));
    assert!(max_abs_diff(&pd.lam_p, &want_lam) < 1e-12);

    // p2 = conj(sh) o sh and Gamma_p = p2 / N.
    let s = bogoliubov::sh(&grid, &pk).unwrap();
    let want_p2 = kernel::compose(&grid, &kernel::conj(&s), &s).unwrap();
    assert!(max_abs_diff(&pd.p2, &want_p2) < 1e-12);
    let mut want_gam = want_p2;
    kernel::scale(&mut want_gam, Complex64::new(1.0 / n_particles, 0.0));
    assert!(max_abs_diff(&pd.gam_p, &want_gam) < 1e-12);

    // Gamma_p is positive semidefinite and hermitian by construction.
    assert!(pd.gam_p.min_eig(&grid) > -1e-12);
    let (_, herm) = pd.gam_p.symmetry_residuals();
    assert!(herm < 1e-12);
    // Lambda_p is symmetric.
    let (sym, _) = pd.lam_p.symmetry_residuals();
    assert!(sym < 1e-12);
}

#[test]
fn pair_densities_require_at_least_one_particle() {
    let grid = Grid::make(1, 8, TAU).unwrap();
    let pk = bogoliubov::scalar_pair(&grid, 0.3, 1e-13).unwrap();
    assert!(bogoliubov::pair_densities(&grid, &pk, 0.0).is_err());
    assert!(bogoliubov::pair_densities(&grid, &pk, 1.0).is_ok());
}

#[test]
fn delta_plus_offsets_the_identity() {
    let grid = Grid::make(1, 8, TAU).unwrap();
    let pk = bogoliubov::scalar_pair(&grid, 0.5, 1e-13).unwrap();
    let s = bogoliubov::sh(&grid, &pk).unwrap();
    let out = bogoliubov::delta_plus(&grid, 2.0, &s);
    let mut want = Kernel2::delta(&grid);
    let mut s2 = s;
    kernel::scale(&mut s2, Complex64::new(2.0, 0.0));
    want = kernel::add(&want, &s2);
    assert!(max_abs_diff(&out, &want) < 1e-12);
}

#[test]
fn large_kernels_still_converge_sinh_is_entire() {
    // Operator norm 3 is far outside any contraction regime; the factorial
    // series must still converge because sinh/cosh are entire.
    let grid = Grid::make(1, 16, TAU).unwrap();
    let peak = 16.0 / grid.l;
    let pk = bogoliubov::scalar_pair(&grid, 3.0, 1e-14).unwrap();
    let s = bogoliubov::sh(&grid, &pk).unwrap();
    let mut want = Kernel2::delta(&grid);
    kernel::scale(&mut want, Complex64::new(3.0f64.sinh(), 0.0));
    assert!(max_abs_diff(&s, &want) / (peak * 3.0f64.sinh()) < 1e-12);
}
