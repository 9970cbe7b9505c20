//! On-disk formats: the trajectory container and the CSV tables.
//!
//! Trajectory container ("HFB1"): magic bytes `HFB1`, an 8-byte
//! little-endian length, that many bytes of JSON metadata, then the frames.
//! Each frame is phi, Lambda_p, Gamma_p in that order, row-major with the x
//! index outermost, every complex number as two little-endian f64s
//! (re, im). All writers are byte-deterministic for a given input.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{HfbError, Result};
use crate::evolution::{StateHFB, Trajectory};
use crate::kernel::{Field1, Kernel2};
use crate::monitors::MonitorRow;
use crate::norms::{fmt_f, NormRow};

pub const MAGIC: &[u8; 4] = b"HFB1";
pub const SCHEMA_VERSION: u32 = 1;

/// JSON header of the trajectory container.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrajMeta {
    pub schema: u32,
    pub run_id: String,
    pub d: usize,
    pub n: usize,
    pub l: f64,
    pub dt: f64,
    pub stride: usize,
    pub steps: usize,
    pub frames: usize,
    pub n_particles: f64,
    pub beta: f64,
    pub alpha: f64,
    pub potential_c: f64,
    pub potential_r0: f64,
    pub potential_epsilon: f64,
    pub seed: u64,
}

impl TrajMeta {
    pub fn from_run(cfg: &RunConfig, traj: &Trajectory) -> TrajMeta {
        TrajMeta {
            schema: SCHEMA_VERSION,
            run_id: cfg.run_id.clone(),
            d: cfg.d,
            n: cfg.n,
            l: cfg.l,
            dt: traj.dt,
            stride: traj.stride,
            steps: traj.steps,
            frames: traj.frames.len(),
            n_particles: cfg.pot_n,
            beta: cfg.pot_beta,
            alpha: cfg.alpha,
            potential_c: cfg.pot_c,
            potential_r0: cfg.pot_r0,
            potential_epsilon: cfg.pot_epsilon,
            seed: cfg.seed,
        }
    }
}

fn write_complex_slice(w: &mut impl Write, vals: &[Complex64]) -> Result<()> {
    for v in vals {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_complex_slice(r: &mut impl Read, count: usize) -> Result<Vec<Complex64>> {
    let mut buf = vec![0u8; count * 16];
    r.read_exact(&mut buf)?;
    let mut out = Vec::with_capacity(count);
    for c in buf.chunks_exact(16) {
        let re = f64::from_le_bytes(c[..8].try_into().unwrap());
        let im = f64::from_le_bytes(c[8..].try_into().unwrap());
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

/// Writes the trajectory container.
pub fn write_trajectory(path: &Path, meta: &TrajMeta, traj: &Trajectory) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let header = serde_json::to_string(meta)
        .map_err(|e| HfbError::Format(format!("metadata encode: {e}")))?;
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    for frame in &traj.frames {
        write_complex_slice(&mut w, &frame.phi.values)?;
        write_complex_slice(&mut w, &frame.lam_p.values)?;
        write_complex_slice(&mut w, &frame.gam_p.values)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory container back.
pub fn read_trajectory(path: &Path) -> Result<(TrajMeta, Trajectory)> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(HfbError::Format(format!(
            "bad magic {:?}, expected {:?}",
            magic, MAGIC
        )));
    }
    let mut lenb = [0u8; 8];
    r.read_exact(&mut lenb)?;
    let hlen = u64::from_le_bytes(lenb) as usize;
    if hlen > 1 << 24 {
        return Err(HfbError::Format(format!("unreasonable header length {hlen}")));
    }
    let mut hbuf = vec![0u8; hlen];
    r.read_exact(&mut hbuf)?;
    let meta: TrajMeta = serde_json::from_slice(&hbuf)
        .map_err(|e| HfbError::Format(format!("metadata decode: {e}")))?;
    if meta.schema != SCHEMA_VERSION {
        return Err(HfbError::Format(format!(
            "unsupported schema version {}",
            meta.schema
        )));
    }
    let nd = meta.n.pow(meta.d as u32);
    let mut frames = Vec::with_capacity(meta.frames);
    let frame_dt = meta.dt * meta.stride as f64;
    for fi in 0..meta.frames {
        let phi = Field1 { values: read_complex_slice(&mut r, nd)? };
        let lam = read_complex_slice(&mut r, nd * nd)?;
        let gam = read_complex_slice(&mut r, nd * nd)?;
        let mut lam_p = Kernel2 { nd, values: lam, symmetry: crate::kernel::Symmetry::None };
        lam_p.symmetry = lam_p.measure_symmetry();
        let mut gam_p = Kernel2 { nd, values: gam, symmetry: crate::kernel::Symmetry::None };
        gam_p.symmetry = gam_p.measure_symmetry();
        frames.push(StateHFB { t: fi as f64 * frame_dt, phi, lam_p, gam_p });
    }
    // Exactly at end of file?
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(HfbError::Format("trailing bytes after final frame".into()));
    }
    Ok((
        meta.clone(),
        Trajectory { frames, dt: meta.dt, stride: meta.stride, steps: meta.steps },
    ))
}

/// Renders the monitor log as CSV.
pub fn monitors_csv(rows: &[MonitorRow]) -> String {
    let mut s = String::from("t,trace,energy,sym_residual,herm_residual,min_eig_gamma_p\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f(r.t),
            fmt_f(r.trace),
            fmt_f(r.energy),
            fmt_f(r.sym_residual),
            fmt_f(r.herm_residual),
            fmt_f(r.min_eig_gamma_p)
        ));
    }
    s
}

/// Parses the monitor CSV back into rows.
pub fn parse_monitors_csv(text: &str) -> Result<Vec<MonitorRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(HfbError::Format(format!("monitor CSV line {}: bad arity", i + 1)));
        }
        let f = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| HfbError::Format(format!("monitor CSV line {}: bad float", i + 1)))
        };
        rows.push(MonitorRow {
            t: f(parts[0])?,
            trace: f(parts[1])?,
            energy: f(parts[2])?,
            sym_residual: f(parts[3])?,
            herm_residual: f(parts[4])?,
            min_eig_gamma_p: f(parts[5])?,
        });
    }
    Ok(rows)
}

/// Renders the norms table as CSV in canonical (lexicographic) row order.
pub fn norms_csv(rows: &[NormRow]) -> String {
    let mut lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.run_id,
                r.norm_name,
                r.axis,
                fmt_f(r.p),
                fmt_f(r.q),
                fmt_f(r.alpha),
                fmt_f(r.window_start),
                fmt_f(r.window_end),
                match r.value {
                    Some(v) => fmt_f(v),
                    None => "degenerate".into(),
                }
            )
        })
        .collect();
    lines.sort();
    let mut s = String::from(
        "run_id,norm_name,axis,p,q,alpha,window_start,window_end,value\n",
    );
    for l in lines {
        s.push_str(&l);
        s.push('\n');
    }
    s
}

fn parse_float_field(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse::<f64>()
            .map_err(|_| HfbError::Format(format!("bad float field {s:?}"))),
    }
}

/// Parses the norms CSV back into rows.
pub fn parse_norms_csv(text: &str) -> Result<Vec<NormRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 9 {
            return Err(HfbError::Format(format!("norms CSV line {}: bad arity", i + 1)));
        }
        rows.push(NormRow {
            run_id: parts[0].into(),
            norm_name: parts[1].into(),
            axis: parts[2].into(),
            p: parse_float_field(parts[3])?,
            q: parse_float_field(parts[4])?,
            alpha: parse_float_field(parts[5])?,
            window_start: parse_float_field(parts[6])?,
            window_end: parse_float_field(parts[7])?,
            value: match parts[8] {
                "degenerate" => None,
                v => Some(parse_float_field(v)?),
            },
        });
    }
    Ok(rows)
}
