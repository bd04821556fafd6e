//! BELLHOP-style ASCII arrival files.
//!
//! The accepted grammar is a single-geometry simplification of BELLHOP's
//! `.arr` output:
//!
//! ```text
//! FREQ_HZ TX_DEPTH_M RX_DEPTH_M RANGE_M
//! N_ARRIVALS
//! AMPLITUDE PHASE_RAD DELAY_S SRC_ANGLE_DEG RCV_ANGLE_DEG N_TOP N_BOT   (N_ARRIVALS lines)
//! ```
//!
//! Tokens are separated by whitespace and `#` starts a comment that runs to
//! the end of the line. Blank and comment-only lines are skipped.

use std::fmt::Write as _;

use thiserror::Error;

use crate::config::Environment;
use crate::dray::{self, Boundary, DRay, GainModel};
use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Structural(String),
    #[error("line {line}: {message}")]
    Semantic { line: usize, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("LoS ray required for K-factor indexing")]
    MissingLos,
    #[error("arrival files disagree: {0}")]
    Mismatch(String),
    #[error("no arrival files given")]
    NoFiles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalRecord<T> {
    pub amplitude: T,
    pub phase_rad: T,
    pub delay_s: T,
    pub src_angle_deg: T,
    pub rcv_angle_deg: T,
    pub n_top_bounce: u32,
    pub n_bottom_bounce: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalFile<T> {
    pub freq_hz: T,
    pub tx_depth_m: T,
    pub rx_depth_m: T,
    pub range_m: T,
    pub arrivals: Vec<ArrivalRecord<T>>,
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

/// Splits a line into tokens with 1-based byte columns, dropping comments.
fn tokenize(line: &str) -> Vec<Token<'_>> {
    let body = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in body.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &body[s..i],
                    column: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &body[s..],
            column: s + 1,
        });
    }
    out
}

fn number<T: Real>(tok: &Token<'_>, line: usize, what: &str) -> Result<T, ParseError> {
    tok.text
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .and_then(T::from_f64)
        .ok_or_else(|| ParseError::Syntax {
            line,
            column: tok.column,
            message: format!("malformed {what} '{}'", tok.text),
        })
}

fn count(tok: &Token<'_>, line: usize, what: &str) -> Result<u32, ParseError> {
    tok.text.parse::<u32>().map_err(|_| ParseError::Syntax {
        line,
        column: tok.column,
        message: format!("malformed {what} '{}'", tok.text),
    })
}

fn expect_len(tokens: &[Token<'_>], n: usize, line: usize, what: &str) -> Result<(), ParseError> {
    if tokens.len() == n {
        return Ok(());
    }
    if tokens.len() > n {
        let extra = &tokens[n];
        return Err(ParseError::Syntax {
            line,
            column: extra.column,
            message: format!("unexpected token '{}' after {what}", extra.text),
        });
    }
    Err(ParseError::Syntax {
        line,
        column: tokens.last().map(|t| t.column + t.text.len()).unwrap_or(1),
        message: format!("{what} needs {n} fields, found {}", tokens.len()),
    })
}

/// Parses an arrival file. Reports the first syntax error with its line and
/// column.
pub fn parse_arrival_file<T: Real>(text: &str) -> Result<ArrivalFile<T>, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, tokenize(l)))
        .filter(|(_, toks)| !toks.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| ParseError::Structural("missing header".into()))?;
    if header.len() > 4 {
        return Err(ParseError::Structural(format!(
            "line {hline}: multi-geometry arrival files are not supported (header has {} fields, expected 4)",
            header.len()
        )));
    }
    expect_len(&header, 4, hline, "header")?;
    let freq_hz: T = number(&header[0], hline, "frequency")?;
    let tx_depth_m: T = number(&header[1], hline, "source depth")?;
    let rx_depth_m: T = number(&header[2], hline, "receiver depth")?;
    let range_m: T = number(&header[3], hline, "range")?;
    for (v, name) in [
        (freq_hz, "frequency"),
        (tx_depth_m, "source depth"),
        (rx_depth_m, "receiver depth"),
        (range_m, "range"),
    ] {
        if !(v > T::zero()) {
            return Err(ParseError::Semantic {
                line: hline,
                message: format!("{name} must be positive, got {v}"),
            });
        }
    }

    let (cline, ctoks) = lines
        .next()
        .ok_or_else(|| ParseError::Structural("missing arrival count".into()))?;
    expect_len(&ctoks, 1, cline, "arrival count")?;
    let declared = count(&ctoks[0], cline, "arrival count")? as usize;

    let mut arrivals = Vec::with_capacity(declared);
    for (line, toks) in lines {
        expect_len(&toks, 7, line, "arrival")?;
        let rec = ArrivalRecord {
            amplitude: number(&toks[0], line, "amplitude")?,
            phase_rad: number(&toks[1], line, "phase")?,
            delay_s: number(&toks[2], line, "delay")?,
            src_angle_deg: number(&toks[3], line, "source angle")?,
            rcv_angle_deg: number(&toks[4], line, "receiver angle")?,
            n_top_bounce: count(&toks[5], line, "surface bounce count")?,
            n_bottom_bounce: count(&toks[6], line, "bottom bounce count")?,
        };
        if rec.amplitude < T::zero() {
            return Err(ParseError::Semantic {
                line,
                message: format!("negative amplitude {}", rec.amplitude),
            });
        }
        if rec.delay_s < T::zero() {
            return Err(ParseError::Semantic {
                line,
                message: format!("negative delay {}", rec.delay_s),
            });
        }
        if rec.delay_s == T::zero() {
            return Err(ParseError::Semantic {
                line,
                message: "delay must be positive".into(),
            });
        }
        arrivals.push(rec);
    }

    if arrivals.len() != declared {
        return Err(ParseError::Structural(format!(
            "header declares {declared} arrivals but {} were found",
            arrivals.len()
        )));
    }
    if arrivals.is_empty() {
        return Err(ParseError::Structural("file contains no arrivals".into()));
    }
    Ok(ArrivalFile {
        freq_hz,
        tx_depth_m,
        rx_depth_m,
        range_m,
        arrivals,
    })
}

/// Renders a file in the accepted grammar with `sig_digits` significant
/// digits per number, or the shortest round-trip representation when
/// `sig_digits` is `None`.
pub fn serialize_arrival_file<T: Real>(file: &ArrivalFile<T>, sig_digits: Option<usize>) -> String {
    let fmt = |x: T| match sig_digits {
        Some(d) => format!("{:.*e}", d.saturating_sub(1), x),
        None => format!("{x:e}"),
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {} {}",
        fmt(file.freq_hz),
        fmt(file.tx_depth_m),
        fmt(file.rx_depth_m),
        fmt(file.range_m)
    );
    let _ = writeln!(out, "{}", file.arrivals.len());
    for a in &file.arrivals {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            fmt(a.amplitude),
            fmt(a.phase_rad),
            fmt(a.delay_s),
            fmt(a.src_angle_deg),
            fmt(a.rcv_angle_deg),
            a.n_top_bounce,
            a.n_bottom_bounce
        );
    }
    out
}

/// Builds an arrival file from traced rays, with amplitudes and phases taken
/// from the loss kernels at `freq_hz`.
pub fn arrivals_from_rays<T: Real>(
    rays: &[DRay<T>],
    env: &Environment<T>,
    freq_hz: T,
) -> Result<ArrivalFile<T>, dray::RayError> {
    let arrivals = rays
        .iter()
        .map(|r| {
            let g = r.gain(freq_hz, env)?;
            Ok(ArrivalRecord {
                amplitude: g.norm(),
                phase_rad: g.arg(),
                delay_s: r.delay_s,
                src_angle_deg: r.theta_rad.to_degrees(),
                rcv_angle_deg: -r.theta_rad.to_degrees(),
                n_top_bounce: r.surface_bounces,
                n_bottom_bounce: r.bottom_bounces,
            })
        })
        .collect::<Result<Vec<_>, dray::RayError>>()?;
    Ok(ArrivalFile {
        freq_hz,
        tx_depth_m: env.tx_depth_m,
        rx_depth_m: env.rx_depth_m,
        range_m: env.range_m,
        arrivals,
    })
}

/// Ingested rays plus any non-fatal findings.
#[derive(Debug, Clone)]
pub struct IngestedRays<T> {
    pub rays: Vec<DRay<T>>,
    pub warnings: Vec<String>,
}

fn record_to_ray<T: Real>(
    rec: &ArrivalRecord<T>,
    env: &Environment<T>,
    gain_model: GainModel<T>,
    warnings: &mut Vec<String>,
    position: usize,
) -> DRay<T> {
    let s = rec.n_top_bounce;
    let b = rec.n_bottom_bounce;
    if !dray::within_bounce_budget(s, b) {
        warnings.push(format!(
            "arrival {position}: {s} surface + {b} bottom bounces exceed the 2s+2b <= 8 budget"
        ));
    }
    let theta = rec.src_angle_deg.to_radians();
    let n = s + b;
    let (first_xy, last_xy) = if n == 0 {
        (None, None)
    } else {
        let first = if theta > T::zero() {
            Boundary::Surface
        } else {
            Boundary::Bottom
        };
        let expected = match first {
            Boundary::Surface => (n.div_ceil(2), n / 2),
            Boundary::Bottom => (n / 2, n.div_ceil(2)),
        };
        if expected != (s, b) {
            warnings.push(format!(
                "arrival {position}: bounce counts {s}/{b} do not alternate from a {first:?}-first launch"
            ));
        }
        let tan = theta.abs().tan();
        if tan > T::zero() {
            let (a, z) = dray::reflected_ray(env, first, n, tan);
            (Some(a), Some(z))
        } else {
            warnings.push(format!(
                "arrival {position}: horizontal launch with bounces; reflection points unknown"
            ));
            (None, None)
        }
    };
    DRay {
        index: 0,
        delay_s: rec.delay_s,
        path_len_m: rec.delay_s * env.c_water_mps,
        surface_bounces: s,
        bottom_bounces: b,
        theta_rad: theta,
        first_refl_xy_m: first_xy,
        last_refl_xy_m: last_xy,
        gain_model,
    }
}

fn geometry_warnings<T: Real>(file: &ArrivalFile<T>, env: &Environment<T>) -> Vec<String> {
    let mut w = Vec::new();
    for (name, got, want) in [
        ("source depth", file.tx_depth_m, env.tx_depth_m),
        ("receiver depth", file.rx_depth_m, env.rx_depth_m),
        ("range", file.range_m, env.range_m),
    ] {
        if ((got - want) / want).abs() > T::lit(1e-6) {
            w.push(format!(
                "arrival file {name} {got} differs from environment {want}"
            ));
        }
    }
    w
}

/// Orders rays by delay (stable) with the earliest zero-bounce ray forced to
/// index 1, then assigns indices.
fn order_rays<T: Real>(mut rays: Vec<DRay<T>>) -> Result<Vec<DRay<T>>, IngestError> {
    rays.sort_by(|a, b| a.delay_s.partial_cmp(&b.delay_s).unwrap());
    let los = rays
        .iter()
        .position(DRay::is_los)
        .ok_or(IngestError::MissingLos)?;
    let los_ray = rays.remove(los);
    rays.insert(0, los_ray);
    for (k, r) in rays.iter_mut().enumerate() {
        r.index = k + 1;
    }
    Ok(rays)
}

/// Converts parsed arrivals into D-rays with frequency-flat gains taken
/// verbatim from the file (amplitude and phase).
pub fn to_drays<T: Real>(
    file: &ArrivalFile<T>,
    env: &Environment<T>,
) -> Result<IngestedRays<T>, IngestError> {
    let mut warnings = geometry_warnings(file, env);
    let rays = file
        .arrivals
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            let gain = GainModel::Arrival {
                amplitude: rec.amplitude,
                phase_rad: rec.phase_rad,
            };
            record_to_ray(rec, env, gain, &mut warnings, k + 1)
        })
        .collect();
    let rays = order_rays(rays)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(IngestedRays { rays, warnings })
}

/// Combines files traced at several frequencies into rays whose gain is
/// interpolated across those frequencies. Arrivals are matched by position,
/// so every file must list the same rays in the same order.
pub fn to_drays_multi<T: Real>(
    files: &[ArrivalFile<T>],
    env: &Environment<T>,
) -> Result<IngestedRays<T>, IngestError> {
    let mut sorted: Vec<&ArrivalFile<T>> = files.iter().collect();
    sorted.sort_by(|a, b| a.freq_hz.partial_cmp(&b.freq_hz).unwrap());
    let base = *sorted.first().ok_or(IngestError::NoFiles)?;
    for f in &sorted[1..] {
        if f.arrivals.len() != base.arrivals.len() {
            return Err(IngestError::Mismatch(format!(
                "{} arrivals at {} Hz vs {} at {} Hz",
                f.arrivals.len(),
                f.freq_hz,
                base.arrivals.len(),
                base.freq_hz
            )));
        }
        for (k, (a, b)) in f.arrivals.iter().zip(&base.arrivals).enumerate() {
            if a.n_top_bounce != b.n_top_bounce || a.n_bottom_bounce != b.n_bottom_bounce {
                return Err(IngestError::Mismatch(format!(
                    "arrival {} changes bounce counts between frequencies",
                    k + 1
                )));
            }
        }
        if f.freq_hz == base.freq_hz {
            return Err(IngestError::Mismatch(format!(
                "duplicate frequency {} Hz",
                f.freq_hz
            )));
        }
    }
    let mut warnings = geometry_warnings(base, env);
    let freqs: Vec<T> = sorted.iter().map(|f| f.freq_hz).collect();
    let rays = base
        .arrivals
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            let gain = GainModel::Tabulated {
                freqs_hz: freqs.clone(),
                amplitudes: sorted.iter().map(|f| f.arrivals[k].amplitude).collect(),
                phases_rad: sorted.iter().map(|f| f.arrivals[k].phase_rad).collect(),
            };
            record_to_ray(rec, env, gain, &mut warnings, k + 1)
        })
        .collect();
    let rays = order_rays(rays)?;
    Ok(IngestedRays { rays, warnings })
}
