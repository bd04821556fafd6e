//! CSV and JSON writers for transfer functions, statistics and run manifests.
//!
//! Numbers are written with 9 significant digits; every row ends in `\n`.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ValidatedConfig;
use crate::ctf::CtfGrid;
use crate::real::Real;
use crate::stats::{CorrelationCurve, DopplerMoments, DopplerSpectrum};

pub const SUMMARY_SCHEMA: &str = include_str!("../schemas/summary.schema.json");

pub fn num<T: Real>(x: T) -> String {
    format!("{x:.8e}")
}

/// Long-form CTF table: `t_s,f_hz,component,re,im` with components
/// `d`, `r`, `f` and `total`.
pub fn write_ctf_csv<T: Real, W: Write>(grid: &CtfGrid<T>, mut w: W) -> io::Result<()> {
    writeln!(w, "t_s,f_hz,component,re,im")?;
    let parts = [
        ("d", &grid.h_d),
        ("r", &grid.h_r),
        ("f", &grid.h_f),
        ("total", &grid.h_total),
    ];
    for (k, &t) in grid.times_s.iter().enumerate() {
        for (m, &f) in grid.freq_offsets_hz.iter().enumerate() {
            for (name, h) in &parts {
                let z = h[[k, m]];
                writeln!(w, "{},{},{},{},{}", num(t), num(f), name, num(z.re), num(z.im))?;
            }
        }
    }
    Ok(())
}

/// Axes and provenance of a CTF table.
pub fn ctf_header_json<T: Real>(grid: &CtfGrid<T>, config_digest: &str, realization: usize) -> Value {
    json!({
        "carrier_freq_hz": grid.carrier_freq_hz.as_f64(),
        "times_s": grid.times_s.iter().map(|t| t.as_f64()).collect::<Vec<_>>(),
        "freq_offsets_hz": grid.freq_offsets_hz.iter().map(|f| f.as_f64()).collect::<Vec<_>>(),
        "components": ["d", "r", "f", "total"],
        "realization": realization,
        "config_digest": config_digest,
    })
}

/// Correlation curves with columns
/// `condition,anchor_t_s,anchor_f_hz,dt_s,df_hz,re,im,abs,std_err`.
pub fn write_correlation_csv<T: Real, W: Write>(
    curves: &[(String, &CorrelationCurve<T>)],
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "condition,anchor_t_s,anchor_f_hz,dt_s,df_hz,re,im,abs,std_err")?;
    for (label, c) in curves {
        let se = c.normalized_std_err();
        let n_df = c.df_lags_hz.len();
        for (i, &dt) in c.dt_lags_s.iter().enumerate() {
            for (j, &df) in c.df_lags_hz.iter().enumerate() {
                let k = i * n_df + j;
                let v = c.values[k];
                writeln!(
                    w,
                    "{label},{},{},{},{},{},{},{},{}",
                    num(c.anchor_t_s),
                    num(c.anchor_f_hz),
                    num(dt),
                    num(df),
                    num(v.re),
                    num(v.im),
                    num(v.norm()),
                    num(se[k])
                )?;
            }
        }
    }
    Ok(())
}

/// Doppler spectra with columns `condition,nu_hz,psd`.
pub fn write_psd_csv<T: Real, W: Write>(spectra: &[(String, &DopplerSpectrum<T>)], mut w: W) -> io::Result<()> {
    writeln!(w, "condition,nu_hz,psd")?;
    for (label, s) in spectra {
        for (&nu, &p) in s.nu_hz.iter().zip(&s.psd) {
            writeln!(w, "{label},{},{}", num(nu), num(p))?;
        }
    }
    Ok(())
}

/// One analysed (time, carrier) condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult<T> {
    pub time_s: T,
    pub carrier_freq_hz: T,
    pub moments: DopplerMoments<T>,
    pub coherence_time_s: T,
}

impl<T: Real> ConditionResult<T> {
    /// Short label such as `0s 20kHz`.
    pub fn label(&self) -> String {
        format!(
            "{}s {}kHz",
            trim(self.time_s.as_f64()),
            trim(self.carrier_freq_hz.as_f64() / 1000.0)
        )
    }
}

fn trim(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Results table laid out as conditions by quantities. Infinite coherence
/// times are written as `null`.
pub fn summary_json<T: Real>(cfg: &ValidatedConfig<T>, results: &[ConditionResult<T>]) -> Value {
    let p = cfg.power();
    let conditions: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "label": r.label(),
                "time_s": r.time_s.as_f64(),
                "carrier_freq_hz": r.carrier_freq_hz.as_f64(),
            })
        })
        .collect();
    let row = |f: &dyn Fn(&ConditionResult<T>) -> f64| results.iter().map(|r| finite_or_null(f(r))).collect::<Vec<_>>();
    json!({
        "parameters": {
            "k_factor": p.k_factor.as_f64(),
            "s_d": p.s_d.as_f64(),
            "s_r": p.s_r.as_f64(),
            "s_f": p.s_f.as_f64(),
            "coherence_threshold": cfg.analysis().coherence_threshold.as_f64(),
            "n_realizations": cfg.grid().n_realizations,
            "seed": cfg.grid().seed,
        },
        "conditions": conditions,
        "results": {
            "Average Doppler shift (Hz)": row(&|r| r.moments.mean_shift_hz.as_f64()),
            "RMS Doppler spread (Hz)": row(&|r| r.moments.rms_spread_hz.as_f64()),
            "Coherence time (s)": row(&|r| r.coherence_time_s.as_f64()),
        },
        "config_digest": cfg.digest(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Record of one run: what was computed from which config, and what was
/// written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_digest: String,
    pub seed: u64,
    pub n_realizations: usize,
    pub created_utc: String,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config_digest: String, seed: u64, n_realizations: usize) -> Self {
        Self {
            tool: "uwa-qdchan".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config_digest,
            seed,
            n_realizations,
            created_utc: timestamp(),
            outputs: Vec::new(),
        }
    }

    /// Adds a written file, hashing its contents. Paths are stored relative
    /// to `root`.
    pub fn record(&mut self, root: &Path, file: &Path) -> io::Result<()> {
        let data = std::fs::read(file)?;
        let rel: PathBuf = file.strip_prefix(root).unwrap_or(file).to_path_buf();
        self.outputs.push(OutputEntry {
            path: rel.to_string_lossy().replace('\\', "/"),
            bytes: data.len() as u64,
            sha256: hex::encode(Sha256::digest(&data)),
        });
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// RFC 3339 time of the run, taken from `SOURCE_DATE_EPOCH` when set so
/// repeated runs can be byte-identical.
fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    fixed
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
