//! Structural oracles for the integrators: initial-data normalization, the
//! product rule tying the condensate-tensor equations to the condensate
//! equation, local order of the splitting, the closed-form phase rotation
//! of a uniform condensate, frame sampling, and the abort path.

use num_complex::Complex64;

use hfb_core::config::RunConfig;
use hfb_core::evolution::{self, MatrixState};
use hfb_core::grid::Grid;
use hfb_core::kernel::{self, Field1, Kernel2, Symmetry};
use hfb_core::potential;

fn max_abs_diff(a: &Kernel2, b: &Kernel2) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn small_cfg(seed: u64) -> RunConfig {
    RunConfig { n: 16, seed, dt: 1e-3, t_final: 0.1, stride: 10, ..RunConfig::default() }
}

fn setup(cfg: &RunConfig) -> (Grid, potential::PotentialSampled, evolution::StateHFB) {
    let grid = Grid::make(cfg.d, cfg.n, cfg.l).unwrap();
    let pot = potential::sample_vn(&grid, &cfg.potential_spec()).unwrap();
    let s = evolution::make_initial_data(&grid, &pot, cfg).unwrap();
    (grid, pot, s)
}

#[test]
fn initial_data_has_unit_trace_and_clean_symmetries() {
    for seed in [1u64, 2, 3, 40] {
        let cfg = small_cfg(seed);
        let (grid, _pot, s) = setup(&cfg);
        let tr = s.gam(&grid).trace(&grid);
        assert!((tr.re - 1.0).abs() < 1e-12, "seed {seed}: trace {tr}");
        assert!(tr.im.abs() < 1e-12);
        let (sym, _) = s.lam_p.symmetry_residuals();
        let (_, herm) = s.gam_p.symmetry_residuals();
        assert!(sym < 1e-12 && herm < 1e-12);
        assert!(s.gam_p.min_eig(&grid) > -1e-12, "pair density must start PSD");
        let tr_p = s.gam_p.trace(&grid).re;
        assert!((0.0..1.0).contains(&tr_p));
        assert!((s.phi.l2(&grid).powi(2) - (1.0 - tr_p)).abs() < 1e-12);
    }
}

#[test]
fn condensate_tensor_derivatives_obey_the_product_rule() {
    // The pairing tensor phi (x) phi and density tensor conj(phi) (x) phi
    // must differentiate by the product rule applied to the condensate
    // equation; the tensor equations are assembled independently, so this
    // pins their coupling coefficients.
    let cfg = small_cfg(9);
    let (grid, pot, s) = setup(&cfg);
    let d = evolution::rhs_component(&grid, &pot, &s).unwrap();
    let phibar = Field1 { values: s.phi.values.iter().map(|z| z.conj()).collect() };
    let dphibar = Field1 { values: d.d_phi.values.iter().map(|z| z.conj()).collect() };

    let mut want_lam = Kernel2::tensor(&grid, &d.d_phi, &s.phi);
    let second = Kernel2::tensor(&grid, &s.phi, &d.d_phi);
    kernel::axpy(&mut want_lam, Complex64::new(1.0, 0.0), &second);
    let scale = want_lam.max_abs().max(1.0);
    assert!(
        max_abs_diff(&d.d_lam_c, &want_lam) < 1e-12 * scale,
        "pairing tensor derivative must equal dphi(x)phi + phi(x)dphi"
    );

    let mut want_gam = Kernel2::tensor(&grid, &dphibar, &s.phi);
    let second = Kernel2::tensor(&grid, &phibar, &d.d_phi);
    kernel::axpy(&mut want_gam, Complex64::new(1.0, 0.0), &second);
    assert!(
        max_abs_diff(&d.d_gam_c, &want_gam) < 1e-12 * scale,
        "density tensor derivative must equal conj(dphi)(x)phi + conj(phi)(x)dphi"
    );
}

#[test]
fn derivatives_preserve_class_symmetries() {
    let cfg = small_cfg(13);
    let (grid, pot, s) = setup(&cfg);
    let d = evolution::rhs_component(&grid, &pot, &s).unwrap();
    let (sym, _) = d.d_lam_p.symmetry_residuals();
    let (_, herm) = d.d_gam_p.symmetry_residuals();
    let scale = d.d_lam_p.max_abs().max(d.d_gam_p.max_abs()).max(1.0);
    assert!(sym < 1e-13 * scale, "pairing derivative must stay symmetric");
    assert!(herm < 1e-13 * scale, "density derivative must stay hermitian");
    // The trace of the full density derivative vanishes: particle number
    // is conserved before any time discretization.
    let mut tr = d.d_gam_p.trace(&grid);
    tr += d.d_gam_c.trace(&grid);
    assert!(tr.norm() < 1e-12, "density derivative trace {tr}");
}

#[test]
fn splitting_has_third_order_local_defect() {
    let cfg = small_cfg(5);
    let (grid, pot, s) = setup(&cfg);
    let defect = |dt: f64| {
        let full = evolution::step_strang(&grid, &pot, &s, dt).unwrap();
        let half = evolution::step_strang(&grid, &pot, &s, dt / 2.0).unwrap();
        let halves = evolution::step_strang(&grid, &pot, &half, dt / 2.0).unwrap();
        max_abs_diff(&full.lam_p, &halves.lam_p)
            .max(max_abs_diff(&full.gam_p, &halves.gam_p))
            .max(
                full.phi
                    .values
                    .iter()
                    .zip(&halves.phi.values)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max),
            )
    };
    let d1 = defect(2e-3);
    let d2 = defect(1e-3);
    assert!(d1 > 1e-13, "defect too small to resolve the order");
    let ratio = d1 / d2;
    assert!(
        (5.0..12.0).contains(&ratio),
        "halving the step must cut the local defect about 8x, got {ratio:.2} ({d1:.3e} -> {d2:.3e})"
    );
}

#[test]
fn uniform_condensate_depletes_into_pairs_translation_invariantly() {
    // A pure condensate is not an equilibrium: the pairing equation carries
    // a (V . Lambda_c)/N source, so excitations appear at the mean-field
    // scale while the density pair block, fed only through Lambda_p, lags
    // one order behind. With uniform data the whole flow is translation
    // invariant, so the condensate modulus must stay spatially flat even as
    // particles migrate out of it.
    let run_at = |n_part: f64| {
        let cfg = RunConfig {
            phi_profile: "uniform".into(),
            pure_condensate: true,
            pot_n: n_part,
            n: 32,
            dt: 1e-3,
            t_final: 0.1,
            stride: 100,
            ..RunConfig::default()
        };
        let bundle = evolution::run(&cfg).unwrap();
        assert!(bundle.aborted.is_none());
        let (trace_drift, _) = hfb_core::monitors::drifts(&bundle.monitors);
        assert!(trace_drift < 1e-10, "N = {n_part}: total trace drift {trace_drift}");
        (bundle.grid, bundle.traj.frames.last().unwrap().clone())
    };

    let (grid, s) = run_at(16.0);
    let lam = s.lam_p.l2(&grid);
    assert!(lam > 1e-6, "pair production must actually happen, got {lam}");
    // Depletion is real: pairs carry positive trace, the condensate shrank
    // by the same amount (total trace already checked above).
    let tr_p = s.gam_p.trace(&grid).re;
    assert!(tr_p > 0.0);
    assert!(s.phi.l2(&grid).powi(2) < 1.0);
    // Gamma_p is quadratic in the produced pairs: far below Lambda_p.
    assert!(s.gam_p.l2(&grid) < 0.05 * lam, "density pair block came in at first order");
    // Translation invariance survives: flat modulus, difference kernel.
    let amps: Vec<f64> = s.phi.values.iter().map(|z| z.norm()).collect();
    let spread = amps.iter().cloned().fold(0.0f64, f64::max)
        - amps.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 1e-10, "modulus must stay spatially uniform, spread {spread}");
    let n = grid.n;
    for x in 0..n {
        for y in 0..n {
            let shifted = s.lam_p.at((x + 1) % n, (y + 1) % n);
            assert!(
                (s.lam_p.at(x, y) - shifted).norm() < 1e-10,
                "pairing kernel must be a function of x - y"
            );
        }
    }
    // The condensate phase genuinely rotates under the mean field.
    assert!(s.phi.values[0].arg().abs() > 1e-3);

    // More particles, weaker production: the 1/N source must win against
    // the mildly growing potential peak.
    let (grid64, s64) = run_at(64.0);
    let lam64 = s64.lam_p.l2(&grid64);
    assert!(
        lam > 1.5 * lam64,
        "pair production must be suppressed with N: {lam} vs {lam64}"
    );
}

#[test]
fn matrix_state_round_trips_the_blocks() {
    let cfg = small_cfg(30);
    let (grid, _pot, s) = setup(&cfg);
    let m = MatrixState::from_state(&grid, &s);
    let (lam_p, gam_p) = m.extract_pair();
    assert!(max_abs_diff(&lam_p, &s.lam_p) < 1e-14);
    assert!(max_abs_diff(&gam_p, &s.gam_p) < 1e-14);
    let (lam_c, gam_c) = m.extract_cond();
    assert!(max_abs_diff(&lam_c, &s.lam_c(&grid)) < 1e-14);
    assert!(max_abs_diff(&gam_c, &s.gam_c(&grid)) < 1e-14);
    let resid = m.block_consistency();
    assert!(resid < 1e-12, "block redundancy residual {resid}");
}

#[test]
fn run_samples_frames_on_the_stride() {
    let cfg = RunConfig {
        n: 16,
        dt: 1e-3,
        t_final: 0.02,
        stride: 4,
        ..RunConfig::default()
    };
    let bundle = evolution::run(&cfg).unwrap();
    assert!(bundle.aborted.is_none());
    assert_eq!(cfg.steps(), 20);
    assert_eq!(bundle.traj.frames.len(), 6, "frames at steps 0,4,8,12,16,20");
    for (i, f) in bundle.traj.frames.iter().enumerate() {
        let want = i as f64 * 4.0 * 1e-3;
        assert!((f.t - want).abs() < 1e-12);
    }
    assert_eq!(bundle.monitors.len(), bundle.traj.frames.len());
    assert!((bundle.traj.frame_dt() - 4e-3).abs() < 1e-15);
}

#[test]
fn short_run_conserves_trace_and_energy() {
    let bundle = evolution::run(&small_cfg(77)).unwrap();
    assert!(bundle.aborted.is_none());
    let (trace_drift, energy_drift) = hfb_core::monitors::drifts(&bundle.monitors);
    assert!(trace_drift < 1e-10, "trace drift {trace_drift}");
    assert!(energy_drift < 1e-6, "energy drift {energy_drift}");
}

#[test]
fn blowup_aborts_but_keeps_sampled_frames() {
    // A gigantic step makes the explicit midpoint update overflow within a
    // few iterations; the runner must flush what it sampled and report why.
    let cfg = RunConfig {
        n: 16,
        dt: 5e3,
        t_final: 5e4,
        stride: 1,
        ..RunConfig::default()
    };
    let bundle = evolution::run(&cfg).unwrap();
    let msg = bundle.aborted.expect("run must abort on non-finite state");
    assert!(!msg.is_empty());
    assert!(!bundle.traj.frames.is_empty(), "frame 0 must survive the abort");
    for f in &bundle.traj.frames {
        assert!(f.is_finite(), "flushed frames must all be finite");
    }
}

#[test]
fn seed_changes_the_excitation_but_not_the_shape() {
    let cfg = small_cfg(100);
    let grid = Grid::make(cfg.d, cfg.n, cfg.l).unwrap();
    let a = setup(&cfg).2;
    let b = setup(&small_cfg(101)).2;
    assert!(max_abs_diff(&a.lam_p, &b.lam_p) > 1e-6, "different seeds, different data");
    assert!((a.gam(&grid).trace(&grid).re - 1.0).abs() < 1e-12);
    assert!((b.gam(&grid).trace(&grid).re - 1.0).abs() < 1e-12);
}

#[test]
fn pure_condensate_flag_zeroes_the_pair_sector() {
    let cfg = RunConfig { pure_condensate: true, n: 16, ..RunConfig::default() };
    let (grid, _pot, s) = setup(&cfg);
    assert_eq!(s.lam_p.max_abs(), 0.0);
    assert_eq!(s.gam_p.max_abs(), 0.0);
    assert_eq!(s.lam_p.symmetry, Symmetry::Symmetric);
    assert!((s.phi.l2(&grid).powi(2) - 1.0).abs() < 1e-12);
}
