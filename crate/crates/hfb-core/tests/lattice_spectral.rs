//! First-principles oracles for the lattice transforms: an O(n^2) DFT
//! written from the definition, Plancherel bookkeeping, plane-wave lines,
//! the low-pass plateau, and unitarity of the free-flow phases.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hfb_core::grid::Grid;
use hfb_core::kernel::{Field1, Kernel2};
use hfb_core::spectral::{self, lowpass_profile, Dir, FreeFlow};

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn naive_dft(vals: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = vals.len();
    (0..n)
        .map(|k| {
            (0..n)
                .map(|x| vals[x] * Complex64::new(0.0, sign * TAU * (k * x) as f64 / n as f64).exp())
                .sum()
        })
        .collect()
}

fn random_values(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
}

fn max_dev(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn forward_transform_matches_naive_dft() {
    let grid = Grid::make(1, 12, TAU).unwrap();
    let vals = random_values(12, 5);
    let want = naive_dft(&vals, -1.0);
    let mut got = vals.clone();
    spectral::transform_all(&grid, &mut got, 1, Dir::Fwd);
    assert!(max_dev(&got, &want) < 1e-12, "forward convention is exp(-i k x), unnormalized");
}

#[test]
fn inverse_transform_matches_naive_dft_normalized() {
    let grid = Grid::make(1, 12, TAU).unwrap();
    let vals = random_values(12, 6);
    let want: Vec<Complex64> = naive_dft(&vals, 1.0).into_iter().map(|z| z / 12.0).collect();
    let mut got = vals.clone();
    spectral::transform_all(&grid, &mut got, 1, Dir::Inv);
    assert!(max_dev(&got, &want) < 1e-12, "inverse convention is exp(+i k x) / n");
}

#[test]
fn round_trip_restores_input() {
    let grid = Grid::make(1, 16, 5.0).unwrap();
    let vals = random_values(16, 7);
    let mut got = vals.clone();
    spectral::transform_all(&grid, &mut got, 1, Dir::Fwd);
    spectral::transform_all(&grid, &mut got, 1, Dir::Inv);
    assert!(max_dev(&got, &vals) < 1e-13);
}

#[test]
fn plane_wave_transforms_to_single_line() {
    let grid = Grid::make(1, 16, TAU).unwrap();
    let m = 3usize;
    let f = Field1::from_fn(&grid, |j| Complex64::new(0.0, m as f64 * grid.coord_at(j)).exp());
    let mut spec = f.values.clone();
    spectral::transform_all(&grid, &mut spec, 1, Dir::Fwd);
    for (k, v) in spec.iter().enumerate() {
        let want = if k == m { Complex64::new(16.0, 0.0) } else { Complex64::default() };
        assert!(
            (v - want).norm() < 1e-11,
            "mode {m} must land at spectral index {m}: index {k} holds {v}"
        );
    }
    // The indexed frequency of that line matches freq_at.
    assert!((grid.freq_at(m) - m as f64).abs() < 1e-15);
    // Negative modes wrap to the upper half.
    assert!((grid.freq_at(16 - 2) - (-2.0)).abs() < 1e-15);
}

#[test]
fn plancherel_identity_holds() {
    let grid = Grid::make(1, 20, TAU).unwrap();
    let vals = random_values(20, 8);
    let phys: f64 = vals.iter().map(|v| v.norm_sqr()).sum();
    let mut spec = vals;
    spectral::transform_all(&grid, &mut spec, 1, Dir::Fwd);
    let freq: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
    assert!((freq - 20.0 * phys).abs() < 1e-12 * freq.max(1.0));
}

#[test]
fn rank2_transform_factorizes_over_tensor_products() {
    let grid = Grid::make(1, 10, TAU).unwrap();
    let a = random_values(10, 9);
    let b = random_values(10, 10);
    let mut prod = vec![Complex64::default(); 100];
    for x in 0..10 {
        for y in 0..10 {
            prod[x * 10 + y] = a[x] * b[y];
        }
    }
    spectral::transform_all(&grid, &mut prod, 2, Dir::Fwd);
    let fa = naive_dft(&a, -1.0);
    let fb = naive_dft(&b, -1.0);
    for x in 0..10 {
        for y in 0..10 {
            assert!((prod[x * 10 + y] - fa[x] * fb[y]).norm() < 1e-10);
        }
    }
}

#[test]
fn transform_axes_touches_only_requested_axis() {
    let grid = Grid::make(1, 8, TAU).unwrap();
    let vals = random_values(64, 11);
    let mut got = vals.clone();
    spectral::transform_axes(&grid, &mut got, 2, &[1], Dir::Fwd);
    // Oracle: DFT each row independently.
    for x in 0..8 {
        let row: Vec<Complex64> = vals[x * 8..(x + 1) * 8].to_vec();
        let want = naive_dft(&row, -1.0);
        assert!(max_dev(&got[x * 8..(x + 1) * 8], &want) < 1e-12);
    }
}

#[test]
fn lowpass_profile_has_unit_plateau_and_compact_support() {
    assert_eq!(lowpass_profile(0.0), 1.0);
    assert_eq!(lowpass_profile(0.7), 1.0);
    assert_eq!(lowpass_profile(1.0), 1.0);
    assert_eq!(lowpass_profile(2.0), 0.0);
    assert_eq!(lowpass_profile(5.3), 0.0);
    let mut prev = 1.0;
    for i in 0..=40 {
        let s = 1.0 + i as f64 * 0.025;
        let v = lowpass_profile(s);
        assert!((0.0..=1.0).contains(&v));
        assert!(v <= prev + 1e-15, "profile must not increase past the plateau");
        prev = v;
    }
}

#[test]
fn free_flow_preserves_l2_and_composes_in_time() {
    let grid = Grid::make(1, 8, TAU).unwrap();
    let vals = random_values(64, 12);
    let k = Kernel2 { nd: 8, values: vals.clone(), symmetry: hfb_core::kernel::Symmetry::None };
    let l2 = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for kind in [FreeFlow::Pair, FreeFlow::PairConj, FreeFlow::Density, FreeFlow::DensityConj] {
        let mut once = k.values.clone();
        spectral::propagate_kernel(&grid, &mut once, kind, 0.34);
        assert!((l2(&once) - l2(&k.values)).abs() < 1e-12, "phases must be unimodular");

        let mut twice = k.values.clone();
        spectral::propagate_kernel(&grid, &mut twice, kind, 0.17);
        spectral::propagate_kernel(&grid, &mut twice, kind, 0.17);
        assert!(max_dev(&once, &twice) < 1e-12, "propagation must be a one-parameter group");

        let mut back = once.clone();
        spectral::propagate_kernel(&grid, &mut back, kind, -0.34);
        assert!(max_dev(&back, &k.values) < 1e-12, "propagation must invert cleanly");
    }
    let f = random_values(8, 13);
    let mut once = f.clone();
    spectral::propagate_field(&grid, &mut once, 0.34);
    assert!((l2(&once) - l2(&f)).abs() < 1e-12);
    let mut back = once;
    spectral::propagate_field(&grid, &mut back, -0.34);
    assert!(max_dev(&back, &f) < 1e-12);
}

#[test]
fn density_flow_is_pair_flow_with_reversed_second_axis_weight() {
    // Pair phases use xi^2 + eta^2, density phases xi^2 - eta^2; on a
    // tensor product of plane waves the two differ by the sign carried by
    // the second factor, which the conjugate pair encodes. Cross-check the
    // four kinds against each other on one product state.
    let grid = Grid::make(1, 8, TAU).unwrap();
    let f = Field1::from_fn(&grid, |j| Complex64::new(0.0, 2.0 * grid.coord_at(j)).exp());
    let g = Field1::from_fn(&grid, |j| Complex64::new(0.0, -3.0 * grid.coord_at(j)).exp());
    let k0 = Kernel2::tensor(&grid, &f, &g);
    let t = 0.21;
    let mut pair = k0.values.clone();
    let mut pair_conj = k0.values.clone();
    spectral::propagate_kernel(&grid, &mut pair, FreeFlow::Pair, t);
    spectral::propagate_kernel(&grid, &mut pair_conj, FreeFlow::PairConj, t);
    // PairConj must be the exact inverse flow of Pair.
    spectral::propagate_kernel(&grid, &mut pair, FreeFlow::PairConj, t);
    assert!(max_dev(&pair, &k0.values) < 1e-12);
    spectral::propagate_kernel(&grid, &mut pair_conj, FreeFlow::Pair, t);
    assert!(max_dev(&pair_conj, &k0.values) < 1e-12);
    let mut den = k0.values.clone();
    let mut den_conj = k0.values.clone();
    spectral::propagate_kernel(&grid, &mut den, FreeFlow::Density, t);
    spectral::propagate_kernel(&grid, &mut den_conj, FreeFlow::DensityConj, t);
    spectral::propagate_kernel(&grid, &mut den, FreeFlow::DensityConj, t);
    assert!(max_dev(&den, &k0.values) < 1e-12);
    spectral::propagate_kernel(&grid, &mut den_conj, FreeFlow::Density, t);
    assert!(max_dev(&den_conj, &k0.values) < 1e-12);
}
