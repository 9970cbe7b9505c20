//! Flat dotted-key run configuration.
//!
//! Format: one `key = value` pair per line; `#` starts a comment; blank
//! lines are ignored. Unknown or duplicate keys are errors that name the
//! key. All keys have defaults, so the empty string parses to the reference
//! configuration.

use crate::error::{HfbError, Result};
use crate::norms::validate_alpha;
use crate::potential::PotentialSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub run_id: String,
    pub d: usize,
    pub n: usize,
    pub l: f64,
    pub pot_c: f64,
    pub pot_r0: f64,
    pub pot_beta: f64,
    pub pot_n: f64,
    pub pot_epsilon: f64,
    pub phi_profile: String,
    pub phi_center: f64,
    pub phi_width: f64,
    pub seed_scale: f64,
    pub seed_bandwidth: f64,
    pub pure_condensate: bool,
    pub dt: f64,
    pub t_final: f64,
    pub stride: usize,
    pub alpha: f64,
    pub lp_depth: usize,
    pub j_max: usize,
    pub window_start: f64,
    pub window_end: f64,
    pub taper: f64,
    pub pad: usize,
    pub seed: u64,
    pub series_tol: f64,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            run_id: "run".into(),
            d: 1,
            n: 64,
            l: 2.0 * std::f64::consts::PI,
            pot_c: 1.0,
            pot_r0: 1.0,
            pot_beta: 0.5,
            pot_n: 16.0,
            pot_epsilon: 0.25,
            phi_profile: "gaussian".into(),
            phi_center: std::f64::consts::PI,
            phi_width: 0.8,
            seed_scale: 0.4,
            seed_bandwidth: 3.0,
            pure_condensate: false,
            dt: 1e-3,
            t_final: 1.0,
            stride: 10,
            alpha: 0.6,
            lp_depth: 5,
            j_max: 2,
            window_start: 0.0,
            window_end: -1.0,
            taper: 0.1,
            pad: 4,
            seed: 1,
            series_tol: 1e-12,
        }
    }
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| {
        HfbError::Config(format!("config key {key}: cannot parse value {value:?}"))
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(HfbError::Config(format!(
            "config key {key}: expected a boolean, got {value:?}"
        ))),
    }
}

impl RunConfig {
    /// Parses the flat key format on top of the defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HfbError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(HfbError::Config(format!("duplicate config key {key}")));
            }
            match key {
                "run.id" => cfg.run_id = value.to_string(),
                "grid.d" => cfg.d = parse_as(key, value)?,
                "grid.n" => cfg.n = parse_as(key, value)?,
                "grid.l" => cfg.l = parse_as(key, value)?,
                "potential.c" => cfg.pot_c = parse_as(key, value)?,
                "potential.r0" => cfg.pot_r0 = parse_as(key, value)?,
                "potential.beta" => cfg.pot_beta = parse_as(key, value)?,
                "potential.n" => cfg.pot_n = parse_as(key, value)?,
                "potential.epsilon" => cfg.pot_epsilon = parse_as(key, value)?,
                "data.phi_profile" => cfg.phi_profile = value.to_string(),
                "data.phi_center" => cfg.phi_center = parse_as(key, value)?,
                "data.phi_width" => cfg.phi_width = parse_as(key, value)?,
                "data.seed_scale" => cfg.seed_scale = parse_as(key, value)?,
                "data.seed_bandwidth" => cfg.seed_bandwidth = parse_as(key, value)?,
                "data.pure_condensate" => cfg.pure_condensate = parse_bool(key, value)?,
                "stepping.dt" => cfg.dt = parse_as(key, value)?,
                "stepping.t" => cfg.t_final = parse_as(key, value)?,
                "stepping.stride" => cfg.stride = parse_as(key, value)?,
                "analysis.alpha" => cfg.alpha = parse_as(key, value)?,
                "analysis.lp_depth" => cfg.lp_depth = parse_as(key, value)?,
                "analysis.j_max" => cfg.j_max = parse_as(key, value)?,
                "analysis.window_start" => cfg.window_start = parse_as(key, value)?,
                "analysis.window_end" => cfg.window_end = parse_as(key, value)?,
                "analysis.taper" => cfg.taper = parse_as(key, value)?,
                "analysis.pad" => cfg.pad = parse_as(key, value)?,
                "seeds.main" => cfg.seed = parse_as(key, value)?,
                "bogoliubov.tol" => cfg.series_tol = parse_as(key, value)?,
                _ => {
                    return Err(HfbError::Config(format!("unknown config key {key}")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural validation; called by `parse` and before every run.
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(HfbError::Config(format!("grid.d must be 1..=3, got {}", self.d)));
        }
        if self.n < 4 {
            return Err(HfbError::Config(format!("grid.n must be >= 4, got {}", self.n)));
        }
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(HfbError::Config(format!("grid.l must be positive, got {}", self.l)));
        }
        self.potential_spec().validate()?;
        match self.phi_profile.as_str() {
            "gaussian" | "uniform" => {}
            other => {
                return Err(HfbError::Config(format!(
                    "data.phi_profile must be gaussian or uniform, got {other:?}"
                )));
            }
        }
        if self.phi_width <= 0.0 {
            return Err(HfbError::Config("data.phi_width must be positive".into()));
        }
        if self.seed_scale < 0.0 || self.seed_scale >= 1.0 {
            return Err(HfbError::Config(format!(
                "data.seed_scale must lie in [0, 1), got {}",
                self.seed_scale
            )));
        }
        if self.dt <= 0.0 || self.t_final <= 0.0 {
            return Err(HfbError::Config("stepping.dt and stepping.t must be positive".into()));
        }
        let steps = (self.t_final / self.dt).round();
        if steps < 1.0 || (steps * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
            return Err(HfbError::Config(
                "stepping.t must be a whole number of steps of stepping.dt".into(),
            ));
        }
        if self.stride == 0 || (steps as usize) % self.stride != 0 {
            return Err(HfbError::Config(format!(
                "stepping.stride must divide the step count {}",
                steps as usize
            )));
        }
        validate_alpha(self.alpha)?;
        if !(0.0..=0.5).contains(&self.taper) {
            return Err(HfbError::Config("analysis.taper must lie in [0, 0.5]".into()));
        }
        if self.pad == 0 {
            return Err(HfbError::Config("analysis.pad must be >= 1".into()));
        }
        if !(self.series_tol > 0.0) {
            return Err(HfbError::Config("bogoliubov.tol must be positive".into()));
        }
        Ok(())
    }

    pub fn potential_spec(&self) -> PotentialSpec {
        PotentialSpec {
            c: self.pot_c,
            r0: self.pot_r0,
            beta: self.pot_beta,
            n_particles: self.pot_n,
            epsilon: self.pot_epsilon,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Canonical echo of the resolved configuration, parseable by `parse`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("run.id", self.run_id.clone());
        kv("grid.d", self.d.to_string());
        kv("grid.n", self.n.to_string());
        kv("grid.l", format!("{}", self.l));
        kv("potential.c", format!("{}", self.pot_c));
        kv("potential.r0", format!("{}", self.pot_r0));
        kv("potential.beta", format!("{}", self.pot_beta));
        kv("potential.n", format!("{}", self.pot_n));
        kv("potential.epsilon", format!("{}", self.pot_epsilon));
        kv("data.phi_profile", self.phi_profile.clone());
        kv("data.phi_center", format!("{}", self.phi_center));
        kv("data.phi_width", format!("{}", self.phi_width));
        kv("data.seed_scale", format!("{}", self.seed_scale));
        kv("data.seed_bandwidth", format!("{}", self.seed_bandwidth));
        kv("data.pure_condensate", self.pure_condensate.to_string());
        kv("stepping.dt", format!("{}", self.dt));
        kv("stepping.t", format!("{}", self.t_final));
        kv("stepping.stride", self.stride.to_string());
        kv("analysis.alpha", format!("{}", self.alpha));
        kv("analysis.lp_depth", self.lp_depth.to_string());
        kv("analysis.j_max", self.j_max.to_string());
        kv("analysis.window_start", format!("{}", self.window_start));
        kv("analysis.window_end", format!("{}", self.window_end));
        kv("analysis.taper", format!("{}", self.taper));
        kv("analysis.pad", self.pad.to_string());
        kv("seeds.main", self.seed.to_string());
        kv("bogoliubov.tol", format!("{}", self.series_tol));
        s
    }
}
