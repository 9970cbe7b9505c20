//! Config-language and on-disk format contracts: every rejection names the
//! offending key, the echo is reparseable, and both the binary container
//! and the CSV tables round-trip exactly.

use hfb_core::config::RunConfig;
use hfb_core::error::HfbError;
use hfb_core::evolution::{self, Trajectory};
use hfb_core::io::{
    self, monitors_csv, norms_csv, parse_monitors_csv, parse_norms_csv, read_trajectory,
    write_trajectory, TrajMeta,
};
use hfb_core::norms::{NormRow, INF};

fn tiny_cfg() -> RunConfig {
    RunConfig { n: 8, dt: 1e-3, t_final: 0.01, stride: 5, ..RunConfig::default() }
}

#[test]
fn defaults_validate_and_steps_round_cleanly() {
    let cfg = RunConfig::default();
    cfg.validate().unwrap();
    assert_eq!(cfg.steps(), 1000);
    // 0.3 / 1e-3 is not exactly 300 in floats; rounding must absorb that.
    let cfg = RunConfig { t_final: 0.3, stride: 3, ..RunConfig::default() };
    cfg.validate().unwrap();
    assert_eq!(cfg.steps(), 300);
}

#[test]
fn parse_applies_keys_comments_and_whitespace() {
    let cfg = RunConfig::parse(
        "# full-line comment\n\
         \n\
         run.id = demo\n\
         grid.n=33   # trailing comment\n\
         stepping.t   =   0.5\n\
         data.pure_condensate = yes\n\
         seeds.main = 42\n",
    )
    .unwrap();
    assert_eq!(cfg.run_id, "demo");
    assert_eq!(cfg.n, 33);
    assert_eq!(cfg.t_final, 0.5);
    assert!(cfg.pure_condensate);
    assert_eq!(cfg.seed, 42);
    // Untouched keys keep their defaults.
    assert_eq!(cfg.d, RunConfig::default().d);
}

fn expect_config_err(text: &str, needle: &str) {
    match RunConfig::parse(text) {
        Err(HfbError::Config(msg)) => {
            assert!(msg.contains(needle), "message {msg:?} must mention {needle:?}");
        }
        other => panic!("expected a config error mentioning {needle:?}, got {other:?}"),
    }
}

#[test]
fn parse_rejections_name_the_offending_key() {
    expect_config_err("grid.m = 3\n", "grid.m");
    expect_config_err("grid.n = 8\ngrid.n = 9\n", "duplicate");
    expect_config_err("grid.n = eight\n", "grid.n");
    expect_config_err("grid.n 8\n", "key = value");
    expect_config_err("data.pure_condensate = maybe\n", "boolean");
}

#[test]
fn structural_validation_names_each_limit() {
    let cases: &[(RunConfig, &str)] = &[
        (RunConfig { d: 5, ..RunConfig::default() }, "grid.d"),
        (RunConfig { n: 3, ..RunConfig::default() }, "grid.n"),
        (RunConfig { l: 0.0, ..RunConfig::default() }, "grid.l"),
        (RunConfig { phi_profile: "square".into(), ..RunConfig::default() }, "phi_profile"),
        (RunConfig { phi_width: 0.0, ..RunConfig::default() }, "phi_width"),
        (RunConfig { seed_scale: 1.0, ..RunConfig::default() }, "seed_scale"),
        (RunConfig { dt: 0.0, ..RunConfig::default() }, "stepping"),
        (RunConfig { t_final: 0.00123, ..RunConfig::default() }, "whole number"),
        (RunConfig { stride: 7, ..RunConfig::default() }, "stride"),
        (RunConfig { alpha: 0.5, ..RunConfig::default() }, "alpha"),
        (RunConfig { taper: 0.6, ..RunConfig::default() }, "taper"),
        (RunConfig { pad: 0, ..RunConfig::default() }, "pad"),
        (RunConfig { series_tol: 0.0, ..RunConfig::default() }, "tol"),
    ];
    for (cfg, needle) in cases {
        match cfg.validate() {
            Err(e) => {
                let msg = e.to_string();
                assert!(msg.contains(needle), "{msg:?} must mention {needle:?}");
            }
            Ok(()) => panic!("config violating {needle:?} must not validate"),
        }
    }
}

#[test]
fn render_echo_reparses_to_the_same_configuration() {
    let cfg = RunConfig {
        run_id: "echo-check".into(),
        n: 33,
        pot_n: 24.0,
        seed: 99,
        window_end: 0.75,
        ..RunConfig::default()
    };
    let echo = cfg.render();
    let back = RunConfig::parse(&echo).unwrap();
    assert_eq!(back.render(), echo, "render -> parse -> render must be a fixed point");
    assert_eq!(back.run_id, "echo-check");
    assert_eq!(back.pot_n, 24.0);
}

#[test]
fn trajectory_container_round_trips_bit_exactly() {
    let cfg = tiny_cfg();
    let bundle = evolution::run(&cfg).unwrap();
    assert!(bundle.aborted.is_none());
    let meta = TrajMeta::from_run(&cfg, &bundle.traj);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.hfb1");
    write_trajectory(&path, &meta, &bundle.traj).unwrap();

    let (meta2, traj2) = read_trajectory(&path).unwrap();
    assert_eq!(meta, meta2);
    assert_eq!(traj2.frames.len(), bundle.traj.frames.len());
    assert_eq!(traj2.steps, bundle.traj.steps);
    for (a, b) in bundle.traj.frames.iter().zip(&traj2.frames) {
        for (x, y) in a.phi.values.iter().zip(&b.phi.values) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
        for (x, y) in a.lam_p.values.iter().zip(&b.lam_p.values) {
            assert_eq!((x.re.to_bits(), x.im.to_bits()), (y.re.to_bits(), y.im.to_bits()));
        }
        for (x, y) in a.gam_p.values.iter().zip(&b.gam_p.values) {
            assert_eq!((x.re.to_bits(), x.im.to_bits()), (y.re.to_bits(), y.im.to_bits()));
        }
    }
    // The reader restores the measured symmetry tags.
    assert_eq!(traj2.frames[0].lam_p.symmetry, bundle.traj.frames[0].lam_p.symmetry);

    // Writing the same trajectory again produces identical bytes.
    let path2 = dir.path().join("traj_again.hfb1");
    write_trajectory(&path2, &meta, &bundle.traj).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

#[test]
fn container_rejects_corruption() {
    let cfg = tiny_cfg();
    let bundle = evolution::run(&cfg).unwrap();
    let meta = TrajMeta::from_run(&cfg, &bundle.traj);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.hfb1");
    write_trajectory(&path, &meta, &bundle.traj).unwrap();
    let good = std::fs::read(&path).unwrap();

    // Wrong magic.
    let mut bad = good.clone();
    bad[0] = b'X';
    let p = dir.path().join("magic.hfb1");
    std::fs::write(&p, &bad).unwrap();
    match read_trajectory(&p) {
        Err(HfbError::Format(msg)) => assert!(msg.contains("magic")),
        other => panic!("expected a format error, got {other:?}"),
    }

    // Truncated mid-frame.
    let p = dir.path().join("short.hfb1");
    std::fs::write(&p, &good[..good.len() - 10]).unwrap();
    assert!(matches!(read_trajectory(&p), Err(HfbError::Io(_))));

    // Trailing junk after the last frame.
    let mut long = good.clone();
    long.push(0u8);
    let p = dir.path().join("long.hfb1");
    std::fs::write(&p, &long).unwrap();
    match read_trajectory(&p) {
        Err(HfbError::Format(msg)) => assert!(msg.contains("trailing")),
        other => panic!("expected a format error, got {other:?}"),
    }

    // Absurd header length field.
    let mut huge = Vec::new();
    huge.extend_from_slice(io::MAGIC);
    huge.extend_from_slice(&(1u64 << 40).to_le_bytes());
    let p = dir.path().join("huge.hfb1");
    std::fs::write(&p, &huge).unwrap();
    match read_trajectory(&p) {
        Err(HfbError::Format(msg)) => assert!(msg.contains("header length")),
        other => panic!("expected a format error, got {other:?}"),
    }

    // Future schema version.
    let mut future_meta = meta.clone();
    future_meta.schema = 99;
    future_meta.frames = 0;
    let empty = Trajectory { frames: Vec::new(), dt: meta.dt, stride: meta.stride, steps: 0 };
    let p = dir.path().join("future.hfb1");
    write_trajectory(&p, &future_meta, &empty).unwrap();
    match read_trajectory(&p) {
        Err(HfbError::Format(msg)) => assert!(msg.contains("schema")),
        other => panic!("expected a format error, got {other:?}"),
    }

    // Missing file surfaces as io.
    assert!(matches!(
        read_trajectory(&dir.path().join("nope.hfb1")),
        Err(HfbError::Io(_))
    ));
}

#[test]
fn monitor_table_round_trips_through_csv() {
    let cfg = tiny_cfg();
    let bundle = evolution::run(&cfg).unwrap();
    assert!(bundle.monitors.len() >= 2);
    let text = monitors_csv(&bundle.monitors);
    assert!(text.starts_with("t,trace,energy,"));
    let back = parse_monitors_csv(&text).unwrap();
    assert_eq!(back.len(), bundle.monitors.len());
    for (a, b) in bundle.monitors.iter().zip(&back) {
        assert_eq!(a.t.to_bits(), b.t.to_bits(), "shortest float formatting round-trips");
        assert_eq!(a.trace.to_bits(), b.trace.to_bits());
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
        assert_eq!(a.min_eig_gamma_p.to_bits(), b.min_eig_gamma_p.to_bits());
    }
    assert!(parse_monitors_csv("t,trace\n1,2\n").is_err(), "bad arity must fail");
}

#[test]
fn norm_table_round_trips_degenerate_and_infinite_fields() {
    let rows = vec![
        NormRow {
            run_id: "io".into(),
            norm_name: "S[Lambda]".into(),
            axis: "x".into(),
            p: 4.0,
            q: INF,
            alpha: 0.6,
            window_start: 0.0,
            window_end: 0.2,
            value: Some(1.25e-3),
        },
        NormRow {
            run_id: "io".into(),
            norm_name: "S[Lambda]".into(),
            axis: "x-y".into(),
            p: INF,
            q: 2.0,
            alpha: 0.6,
            window_start: 0.0,
            window_end: 0.2,
            value: None,
        },
    ];
    let text = norms_csv(&rows);
    assert!(text.contains(",inf,"), "infinite exponents spelled out");
    assert!(text.contains("degenerate"), "missing values spelled out");
    let back = parse_norms_csv(&text).unwrap();
    assert_eq!(back.len(), 2);
    // The writer sorts rows; find by axis.
    let by_axis = |axis: &str| back.iter().find(|r| r.axis == axis).unwrap();
    let a = by_axis("x");
    assert_eq!(a.p, 4.0);
    assert!(a.q.is_infinite());
    assert_eq!(a.value, Some(1.25e-3));
    let b = by_axis("x-y");
    assert!(b.p.is_infinite());
    assert_eq!(b.value, None);

    assert!(parse_norms_csv("h\nonly,three,fields\n").is_err());
}

#[test]
fn norms_csv_output_is_sorted_and_deterministic() {
    let mk = |name: &str| NormRow {
        run_id: "z".into(),
        norm_name: name.into(),
        axis: "x".into(),
        p: 2.0,
        q: 2.0,
        alpha: 0.6,
        window_start: 0.0,
        window_end: 1.0,
        value: Some(1.0),
    };
    let a = norms_csv(&[mk("b"), mk("a")]);
    let b = norms_csv(&[mk("a"), mk("b")]);
    assert_eq!(a, b, "row order in memory must not leak into the file");
    let lines: Vec<&str> = a.lines().collect();
    assert!(lines[1] < lines[2]);
}

#[test]
fn metadata_reflects_the_run_configuration() {
    let cfg = RunConfig { run_id: "meta".into(), ..tiny_cfg() };
    let bundle = evolution::run(&cfg).unwrap();
    let meta = TrajMeta::from_run(&cfg, &bundle.traj);
    assert_eq!(meta.schema, io::SCHEMA_VERSION);
    assert_eq!(meta.run_id, "meta");
    assert_eq!(meta.n, cfg.n);
    assert_eq!(meta.n_particles, cfg.pot_n);
    assert_eq!(meta.frames, bundle.traj.frames.len());
    assert_eq!(meta.seed, cfg.seed);
}
