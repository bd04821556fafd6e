//! Ensemble correlation estimators, coherence time and Doppler spectra.

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PowerPartition;
use crate::ctf::CtfGrid;
use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("ensemble needs at least 2 members, got {0}")]
    TooFewMembers(usize),
    #[error("ensemble members have different grids")]
    GridMismatch,
    #[error("{axis} value {value} is not on the sampled grid")]
    OffGrid { axis: &'static str, value: f64 },
    #[error("zero power at the anchor point")]
    ZeroPower,
    #[error("curve has no zero frequency-lag slice")]
    NoTimeSlice,
    #[error("lags must be uniform, symmetric about 0 and odd in number")]
    BadLagAxis,
    #[error("threshold must lie in (0, 1], got {0}")]
    BadThreshold(f64),
    #[error("spectrum has no positive mass")]
    ZeroMass,
}

/// Lag window applied before the Doppler transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Taper {
    /// Cosine roll-off over the outer 10% of lags on each side.
    #[default]
    RaisedCosine,
    Rectangular,
}

impl Taper {
    /// Weights for lags `-L..=L`.
    pub fn weights<T: Real>(self, half: usize) -> Vec<T> {
        let n = 2 * half + 1;
        match self {
            Taper::Rectangular => vec![T::one(); n],
            Taper::RaisedCosine => {
                let m = ((half as f64) * 0.1).ceil().max(1.0) as usize;
                let flat = half.saturating_sub(m);
                (0..n)
                    .map(|i| {
                        let k = i.abs_diff(half);
                        if k <= flat {
                            T::one()
                        } else {
                            let x = (k - flat) as f64 / m as f64;
                            T::lit(0.5 * (1.0 + (std::f64::consts::PI * x).cos()))
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Normalized correlation over a (Δt × Δf) lag grid, row-major in Δt.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct CorrelationCurve<T> {
    pub anchor_t_s: T,
    pub anchor_f_hz: T,
    pub dt_lags_s: Vec<T>,
    pub df_lags_hz: Vec<T>,
    /// `raw / zero_lag_power`.
    pub values: Vec<Complex<T>>,
    pub raw: Vec<Complex<T>>,
    /// Standard error of each raw entry.
    pub std_err: Vec<T>,
    pub zero_lag_power: T,
    pub n_members: usize,
}

impl<T: Real> CorrelationCurve<T> {
    pub fn value(&self, i_dt: usize, i_df: usize) -> Complex<T> {
        self.values[i_dt * self.df_lags_hz.len() + i_df]
    }

    /// Standard error of the normalized values.
    pub fn normalized_std_err(&self) -> Vec<T> {
        self.std_err.iter().map(|&s| s / self.zero_lag_power).collect()
    }

    /// The `Δf = 0` slice as `(Δt, value, normalized std err)` rows.
    pub fn time_slice(&self) -> Result<Vec<(T, Complex<T>, T)>, StatsError> {
        let j = self
            .df_lags_hz
            .iter()
            .position(|&df| df == T::zero())
            .ok_or(StatsError::NoTimeSlice)?;
        let n_df = self.df_lags_hz.len();
        Ok(self
            .dt_lags_s
            .iter()
            .enumerate()
            .map(|(i, &dt)| {
                let k = i * n_df + j;
                (dt, self.values[k], self.std_err[k] / self.zero_lag_power)
            })
            .collect())
    }

    /// Builds a curve directly from time-lag samples, e.g. a closed-form
    /// correlation. Values are normalized by the sample at `Δt = 0`.
    pub fn from_time_samples(dt_lags_s: Vec<T>, raw: Vec<Complex<T>>) -> Result<Self, StatsError> {
        let zero = dt_lags_s
            .iter()
            .position(|&t| t == T::zero())
            .ok_or(StatsError::OffGrid { axis: "dt", value: 0.0 })?;
        let p = raw[zero].re;
        if !(p > T::zero()) {
            return Err(StatsError::ZeroPower);
        }
        Ok(Self {
            anchor_t_s: T::zero(),
            anchor_f_hz: T::zero(),
            values: raw.iter().map(|&r| r / p).collect(),
            std_err: vec![T::zero(); raw.len()],
            raw,
            dt_lags_s,
            df_lags_hz: vec![T::zero()],
            zero_lag_power: p,
            n_members: 0,
        })
    }
}

/// Unnormalized per-component estimates on the same lag grid as the total.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct ComponentCorrelation<T> {
    pub raw: Vec<Complex<T>>,
    pub std_err: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct TfCorrelation<T> {
    pub total: CorrelationCurve<T>,
    pub d: ComponentCorrelation<T>,
    pub r: ComponentCorrelation<T>,
    pub f: ComponentCorrelation<T>,
}

impl<T: Real> TfCorrelation<T> {
    /// `S_D·R_D + S_R·R_R + S_F·R_F`, comparable to `total.raw`.
    pub fn recombined(&self, power: &PowerPartition<T>) -> Vec<Complex<T>> {
        self.d
            .raw
            .iter()
            .zip(&self.r.raw)
            .zip(&self.f.raw)
            .map(|((&d, &r), &f)| d * power.s_d + r * power.s_r + f * power.s_f)
            .collect()
    }
}

/// Index of `v` on a sorted axis, within a small fraction of the spacing.
fn locate<T: Real>(axis: &[T], v: T, name: &'static str) -> Result<usize, StatsError> {
    let spacing = axis
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(T::infinity(), T::min);
    let tol = if spacing.is_finite() {
        spacing * T::lit(1e-6)
    } else {
        T::lit(1e-9) * v.abs().max(T::one())
    };
    let i = axis.partition_point(|&x| x < v);
    [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter(|&k| k < axis.len())
        .find(|&k| (axis[k] - v).abs() <= tol)
        .ok_or(StatsError::OffGrid {
            axis: name,
            value: v.as_f64(),
        })
}

struct Accum<T> {
    sum: Vec<Complex<T>>,
    sum_sq: Vec<T>,
}

fn mean_and_se<T: Real>(samples: &[Vec<Complex<T>>], n_lags: usize) -> (Vec<Complex<T>>, Vec<T>) {
    let n = T::from_usize_lossy(samples.len());
    let mut acc = Accum {
        sum: vec![Complex::new(T::zero(), T::zero()); n_lags],
        sum_sq: vec![T::zero(); n_lags],
    };
    for s in samples {
        for (a, &z) in acc.sum.iter_mut().zip(s) {
            *a = *a + z;
        }
    }
    let mean: Vec<_> = acc.sum.iter().map(|&s| s / n).collect();
    for s in samples {
        for ((q, &z), &m) in acc.sum_sq.iter_mut().zip(s).zip(&mean) {
            *q = *q + (z - m).norm_sqr();
        }
    }
    let se = acc
        .sum_sq
        .iter()
        .map(|&q| (q / (n - T::one()) / n).sqrt())
        .collect();
    (mean, se)
}

/// Ensemble estimate of `E{conj(H(t,f))·H(t+Δt, f+Δf)}` for the total and
/// each component, with the total normalized by its zero-lag power.
pub fn tf_correlation<T: Real>(
    ensemble: &[CtfGrid<T>],
    anchor_t: T,
    anchor_f: T,
    dt_lags: &[T],
    df_lags: &[T],
) -> Result<TfCorrelation<T>, StatsError> {
    if ensemble.len() < 2 {
        return Err(StatsError::TooFewMembers(ensemble.len()));
    }
    let first = &ensemble[0];
    if ensemble
        .iter()
        .any(|g| g.times_s != first.times_s || g.freq_offsets_hz != first.freq_offsets_hz)
    {
        return Err(StatsError::GridMismatch);
    }
    let times = &first.times_s;
    let freqs = &first.freq_offsets_hz;
    let it = locate(times, anchor_t, "anchor time")?;
    let jf = locate(freqs, anchor_f, "anchor frequency")?;
    let mut cells = Vec::with_capacity(dt_lags.len() * df_lags.len());
    for &dt in dt_lags {
        let k = locate(times, times[it] + dt, "time lag")?;
        for &df in df_lags {
            cells.push((k, locate(freqs, freqs[jf] + df, "frequency lag")?));
        }
    }
    let n_lags = cells.len();

    let estimate = |pick: &dyn Fn(&CtfGrid<T>) -> &ndarray::Array2<Complex<T>>| {
        let samples: Vec<Vec<Complex<T>>> = ensemble
            .iter()
            .map(|g| {
                let h = pick(g);
                let h0 = h[[it, jf]].conj();
                cells.iter().map(|&(k, m)| h0 * h[[k, m]]).collect()
            })
            .collect();
        mean_and_se(&samples, n_lags)
    };

    let (raw, std_err) = estimate(&|g| &g.h_total);
    let n = T::from_usize_lossy(ensemble.len());
    let zero_lag_power = ensemble.iter().map(|g| g.h_total[[it, jf]].norm_sqr()).sum::<T>() / n;
    if !(zero_lag_power > T::zero()) {
        return Err(StatsError::ZeroPower);
    }
    let values = raw.iter().map(|&r| r / zero_lag_power).collect();
    let comp = |(raw, std_err)| ComponentCorrelation { raw, std_err };
    Ok(TfCorrelation {
        total: CorrelationCurve {
            anchor_t_s: times[it],
            anchor_f_hz: freqs[jf],
            dt_lags_s: dt_lags.to_vec(),
            df_lags_hz: df_lags.to_vec(),
            values,
            raw,
            std_err,
            zero_lag_power,
            n_members: ensemble.len(),
        },
        d: comp(estimate(&|g| &g.h_d)),
        r: comp(estimate(&|g| &g.h_r)),
        f: comp(estimate(&|g| &g.h_f)),
    })
}

/// Lags `-L·step ..= L·step`.
pub fn symmetric_lags<T: Real>(step: T, half: usize) -> Vec<T> {
    (0..=2 * half)
        .map(|i| (T::from_usize_lossy(i) - T::from_usize_lossy(half)) * step)
        .collect()
}

/// Temporal ACF at one anchor over symmetric lags.
pub fn acf<T: Real>(
    ensemble: &[CtfGrid<T>],
    anchor_t: T,
    anchor_f: T,
    step: T,
    half: usize,
) -> Result<TfCorrelation<T>, StatsError> {
    tf_correlation(ensemble, anchor_t, anchor_f, &symmetric_lags(step, half), &[T::zero()])
}

/// First positive lag where `|R|` falls below `threshold`, linearly
/// interpolated. Returns `+∞` when the curve never crosses.
pub fn coherence_time<T: Real>(curve: &CorrelationCurve<T>, threshold: T) -> Result<T, StatsError> {
    if !(threshold > T::zero() && threshold <= T::one()) {
        return Err(StatsError::BadThreshold(threshold.as_f64()));
    }
    let mut pts: Vec<(T, T)> = curve
        .time_slice()?
        .into_iter()
        .filter(|(dt, _, _)| *dt >= T::zero())
        .map(|(dt, v, _)| (dt, v.norm()))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    if pts.first().is_none_or(|p| p.0 > T::zero()) {
        pts.insert(0, (T::zero(), T::one()));
    }
    for w in pts.windows(2) {
        let ((t0, r0), (t1, r1)) = (w[0], w[1]);
        if r1 < threshold {
            let frac = if r0 > r1 { ((r0 - threshold) / (r0 - r1)).max(T::zero()) } else { T::zero() };
            return Ok(t0 + frac * (t1 - t0));
        }
    }
    Ok(T::infinity())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct DopplerSpectrum<T> {
    pub nu_hz: Vec<T>,
    pub psd: Vec<T>,
    pub bin_width_hz: T,
    /// Standard deviation of each PSD value propagated from the ACF
    /// standard errors; zero for noise-free curves.
    pub noise_std: T,
}

/// Bins within this many noise deviations of zero are left out of the
/// moment integrals.
pub const NOISE_GATE_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct DopplerMoments<T> {
    pub mean_shift_hz: T,
    pub rms_spread_hz: T,
}

/// `φ(ν_k) = Δ·Σ_n w_n R(nΔ) e^{-j2π ν_k nΔ}` on `ν_k = k/(NΔ)`,
/// `k = -L..=L`, real part kept.
pub fn doppler_psd<T: Real>(curve: &CorrelationCurve<T>, taper: Taper) -> Result<DopplerSpectrum<T>, StatsError> {
    let mut rows = curve.time_slice()?;
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let n = rows.len();
    if n < 3 || n % 2 == 0 {
        return Err(StatsError::BadLagAxis);
    }
    let half = n / 2;
    let step = rows[half + 1].0 - rows[half].0;
    if !(step > T::zero()) {
        return Err(StatsError::BadLagAxis);
    }
    let tol = step * T::lit(1e-6);
    for (i, r) in rows.iter().enumerate() {
        let expect = (T::from_usize_lossy(i) - T::from_usize_lossy(half)) * step;
        if (r.0 - expect).abs() > tol {
            return Err(StatsError::BadLagAxis);
        }
    }
    let w: Vec<T> = taper.weights(half);
    let noise_var: T = rows
        .iter()
        .zip(&w)
        .map(|(r, &wi)| (wi * r.2).powi(2))
        .sum::<T>()
        * T::lit(0.5);
    // Lag n sits at buffer index n mod N.
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for (i, (r, &wi)) in rows.iter().zip(&w).enumerate() {
        let slot = (i + n - half) % n;
        buf[slot] = r.1 * wi;
    }
    FftPlanner::<T>::new().plan_fft_forward(n).process(&mut buf);
    let nn = T::from_usize_lossy(n);
    let bin = T::one() / (nn * step);
    let (nu_hz, psd) = (0..n)
        .map(|i| {
            let k = T::from_usize_lossy(i) - T::from_usize_lossy(half);
            let slot = (i + n - half) % n;
            (k * bin, buf[slot].re * step)
        })
        .unzip();
    Ok(DopplerSpectrum {
        nu_hz,
        psd,
        bin_width_hz: bin,
        noise_std: noise_var.sqrt() * step,
    })
}

fn trapezoid<T: Real>(x: &[T], y: impl Fn(usize) -> T) -> T {
    x.windows(2)
        .enumerate()
        .map(|(i, w)| (w[1] - w[0]) * (y(i) + y(i + 1)) * T::lit(0.5))
        .sum()
}

/// Mean shift and RMS spread by trapezoidal quadrature of the signed
/// spectrum.
///
/// Bins indistinguishable from zero (within [`NOISE_GATE_SIGMAS`] noise
/// deviations) are dropped first; otherwise the `ν²` weight lets estimator
/// noise far from the carrier dominate the spread. Negative sidelobes that
/// survive the gate are kept so taper leakage cancels. A slightly negative
/// variance is clamped to 0.
pub fn doppler_moments<T: Real>(spec: &DopplerSpectrum<T>) -> Result<DopplerMoments<T>, StatsError> {
    let nu = &spec.nu_hz;
    let gate = spec.noise_std * T::lit(NOISE_GATE_SIGMAS);
    let p: Vec<T> = spec
        .psd
        .iter()
        .map(|&v| if v.abs() > gate { v } else { T::zero() })
        .collect();
    let mass = trapezoid(nu, |i| p[i]);
    if !(mass > T::zero()) {
        return Err(StatsError::ZeroMass);
    }
    let mean = trapezoid(nu, |i| nu[i] * p[i]) / mass;
    let var = trapezoid(nu, |i| (nu[i] - mean).powi(2) * p[i]) / mass;
    Ok(DopplerMoments {
        mean_shift_hz: mean,
        rms_spread_hz: var.max(T::zero()).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn exp_curve(nu0: f64, step: f64, half: usize) -> CorrelationCurve<f64> {
        let lags = symmetric_lags(step, half);
        let raw = lags.iter().map(|&t| Complex::from_polar(1.0, TAU * nu0 * t)).collect();
        CorrelationCurve::from_time_samples(lags, raw).unwrap()
    }

    fn grid_from(times: Vec<f64>, h: Vec<Complex<f64>>) -> CtfGrid<f64> {
        let n = times.len();
        let a = Array2::from_shape_vec((n, 1), h).unwrap();
        let zero = Array2::from_elem((n, 1), Complex::new(0.0, 0.0));
        CtfGrid {
            carrier_freq_hz: 20_000.0,
            times_s: times,
            freq_offsets_hz: vec![0.0],
            h_d: a.clone(),
            h_r: zero.clone(),
            h_f: zero,
            h_total: a,
        }
    }

    #[test]
    fn taper_shapes() {
        let w: Vec<f64> = Taper::RaisedCosine.weights(100);
        assert_eq!(w.len(), 201);
        assert_eq!(w[100], 1.0);
        assert_eq!(w[10], 1.0);
        assert!(w[0].abs() < 1e-15 && w[200].abs() < 1e-15);
        assert!(w[5] > 0.0 && w[5] < 1.0);
        assert!(Taper::Rectangular.weights::<f64>(3).iter().all(|&x| x == 1.0));
        assert_eq!(serde_json::to_string(&Taper::RaisedCosine).unwrap(), "\"raised-cosine\"");
    }

    #[test]
    fn static_path_correlates_perfectly() {
        let times = symmetric_lags(0.01, 50);
        let ens: Vec<_> = (0..4)
            .map(|i| grid_from(times.clone(), vec![Complex::from_polar(1.0 + i as f64, 0.3 * i as f64); times.len()]))
            .collect();
        let c = acf(&ens, 0.0, 0.0, 0.01, 20).unwrap().total;
        assert_eq!(c.value(20, 0), Complex::new(1.0, 0.0));
        for v in &c.values {
            assert!((v - Complex::new(1.0, 0.0)).norm() < 1e-12);
        }
        assert_eq!(coherence_time(&c, 0.5).unwrap(), f64::INFINITY);
    }

    #[test]
    fn constant_doppler_path_rotates_at_a_fc() {
        let a = 1e-4;
        let fc = 20_000.0;
        let times = symmetric_lags(0.005, 400);
        let ens: Vec<_> = (0..3)
            .map(|i| {
                let h = times
                    .iter()
                    .map(|&t| Complex::from_polar(1.0, TAU * a * fc * t + i as f64))
                    .collect();
                grid_from(times.clone(), h)
            })
            .collect();
        let c = acf(&ens, 0.0, 0.0, 0.005, 200).unwrap().total;
        for (dt, v, _) in c.time_slice().unwrap() {
            assert!((v.norm() - 1.0).abs() < 1e-9);
            assert!((v - Complex::from_polar(1.0, TAU * 2.0 * dt)).norm() < 1e-9);
        }
    }

    #[test]
    fn off_grid_requests_fail() {
        let times = symmetric_lags(0.01, 10);
        let ens = vec![grid_from(times.clone(), vec![Complex::new(1.0, 0.0); 21]); 2];
        assert!(matches!(
            tf_correlation(&ens, 0.005, 0.0, &[0.0], &[0.0]),
            Err(StatsError::OffGrid { .. })
        ));
        assert!(matches!(
            tf_correlation(&ens, 0.0, 0.0, &[0.5], &[0.0]),
            Err(StatsError::OffGrid { .. })
        ));
        assert!(matches!(
            tf_correlation(&ens[..1], 0.0, 0.0, &[0.0], &[0.0]),
            Err(StatsError::TooFewMembers(1))
        ));
    }

    #[test]
    fn exponential_decay_coherence_time() {
        let tau0 = 0.37;
        let lags = symmetric_lags(0.01, 200);
        let raw = lags.iter().map(|&t: &f64| Complex::new((-t.abs() / tau0).exp(), 0.0)).collect();
        let c = CorrelationCurve::from_time_samples(lags, raw).unwrap();
        let tc = coherence_time(&c, (-1.0f64).exp()).unwrap();
        assert!((tc - tau0).abs() < 0.01);
        let first = coherence_time(&c, 1.0).unwrap();
        assert!(first.abs() < 1e-12);
        assert!(coherence_time(&c, 0.0).is_err());
        assert!(coherence_time(&c, 1.5).is_err());
    }

    #[test]
    fn delta_line_peak_and_moments() {
        let c = exp_curve(2.0, 0.005, 400);
        let s = doppler_psd(&c, Taper::RaisedCosine).unwrap();
        let peak = s
            .psd
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| s.nu_hz[i])
            .unwrap();
        assert!((peak - 2.0).abs() <= s.bin_width_hz);
        let m = doppler_moments(&s).unwrap();
        assert!((m.mean_shift_hz - 2.0).abs() <= s.bin_width_hz);
        assert!(m.rms_spread_hz < s.bin_width_hz);
    }

    #[test]
    fn psd_matches_direct_sum() {
        let c = exp_curve(1.3, 0.01, 30);
        let s = doppler_psd(&c, Taper::RaisedCosine).unwrap();
        let w: Vec<f64> = Taper::RaisedCosine.weights(30);
        for (k, &nu) in s.nu_hz.iter().enumerate() {
            let direct: Complex<f64> = c
                .dt_lags_s
                .iter()
                .zip(&c.values)
                .zip(&w)
                .map(|((&t, &r), &wi)| r * wi * Complex::from_polar(0.01, -TAU * nu * t))
                .sum();
            assert!((direct.re - s.psd[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn even_acf_gives_symmetric_spectrum_and_parseval() {
        let lags = symmetric_lags(0.005, 400);
        let raw = lags
            .iter()
            .map(|&t: &f64| Complex::new((-(t / 0.3).powi(2)).exp() * (TAU * 3.0 * t).cos(), 0.0))
            .collect();
        let c = CorrelationCurve::from_time_samples(lags, raw).unwrap();
        let s = doppler_psd(&c, Taper::RaisedCosine).unwrap();
        let n = s.psd.len();
        for k in 0..n {
            assert!((s.psd[k] - s.psd[n - 1 - k]).abs() < 1e-9);
        }
        let m = doppler_moments(&s).unwrap();
        assert!(m.mean_shift_hz.abs() < 1e-9);
        let total = trapezoid(&s.nu_hz, |i| s.psd[i]);
        assert!((total - 1.0).abs() < 0.01);
    }

    #[test]
    fn two_lines_spread() {
        let lags = symmetric_lags(0.005, 400);
        let raw = lags
            .iter()
            .map(|&t: &f64| Complex::from_polar(0.5, TAU * 5.0 * t) + Complex::from_polar(0.5, -TAU * 5.0 * t))
            .collect();
        let c = CorrelationCurve::from_time_samples(lags, raw).unwrap();
        let m = doppler_moments(&doppler_psd(&c, Taper::RaisedCosine).unwrap()).unwrap();
        assert!(m.mean_shift_hz.abs() < 1e-9);
        assert!((m.rms_spread_hz - 5.0).abs() < 0.25);
    }

    #[test]
    fn bad_lag_axes_and_empty_mass() {
        let lags = vec![-0.02, -0.01, 0.0, 0.01, 0.03];
        let raw = vec![Complex::new(1.0, 0.0); 5];
        let c = CorrelationCurve::from_time_samples(lags, raw).unwrap();
        assert_eq!(doppler_psd(&c, Taper::Rectangular), Err(StatsError::BadLagAxis));
        let even = CorrelationCurve::from_time_samples(vec![0.0, 0.01], vec![Complex::new(1.0, 0.0); 2]).unwrap();
        assert_eq!(doppler_psd(&even, Taper::Rectangular), Err(StatsError::BadLagAxis));
        let flat = DopplerSpectrum {
            nu_hz: vec![-1.0, 0.0, 1.0],
            psd: vec![0.0; 3],
            bin_width_hz: 1.0,
            noise_std: 0.0,
        };
        let buried = DopplerSpectrum {
            psd: vec![0.01, 0.02, 0.01],
            noise_std: 0.1,
            ..flat.clone()
        };
        assert_eq!(doppler_moments(&buried), Err(StatsError::ZeroMass));
        assert_eq!(doppler_moments(&flat), Err(StatsError::ZeroMass));
    }

    proptest! {
        #[test]
        fn single_line_mean_tracks_a_fc(a in -1e-3_f64..1e-3) {
            let fc = 20_000.0;
            let c = exp_curve(a * fc, 0.005, 400);
            let s = doppler_psd(&c, Taper::RaisedCosine).unwrap();
            let m = doppler_moments(&s).unwrap();
            prop_assert!((m.mean_shift_hz - a * fc).abs() <= s.bin_width_hz);
        }

        #[test]
        fn spread_is_shift_invariant(shift in -20.0_f64..20.0) {
            let nu: Vec<f64> = (-200..=200).map(|k| k as f64 * 0.25).collect();
            let shape = |x: f64| (-(x / 3.0).powi(2)).exp() + 0.5 * (-((x - 4.0) / 1.5).powi(2)).exp();
            let base = DopplerSpectrum { psd: nu.iter().map(|&x| shape(x)).collect(), nu_hz: nu.clone(), bin_width_hz: 0.25, noise_std: 0.0 };
            let moved = DopplerSpectrum { psd: nu.iter().map(|&x| shape(x - shift)).collect(), nu_hz: nu.clone(), bin_width_hz: 0.25, noise_std: 0.0 };
            let shifted_axis = DopplerSpectrum { nu_hz: nu.iter().map(|&x| x + shift).collect(), ..base.clone() };
            let a = doppler_moments(&base).unwrap();
            let b = doppler_moments(&shifted_axis).unwrap();
            prop_assert!((a.rms_spread_hz - b.rms_spread_hz).abs() < 1e-9);
            prop_assert!((b.mean_shift_hz - a.mean_shift_hz - shift).abs() < 1e-9);
            prop_assert!(doppler_moments(&moved).unwrap().rms_spread_hz > 0.0);
        }

        #[test]
        fn normalized_correlation_is_bounded(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let times = symmetric_lags(0.01, 10);
            let ens: Vec<_> = (0..8).map(|_| {
                let h = (0..21).map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
                grid_from(times.clone(), h)
            }).collect();
            let c = acf(&ens, 0.0, 0.0, 0.01, 5).unwrap().total;
            prop_assert!((c.value(5, 0) - Complex::new(1.0, 0.0)).norm() < 1e-12);
            // Cauchy-Schwarz bounds the cross term by the two powers, not by R(0) alone.
            for (i, v) in c.values.iter().enumerate() {
                let k = i + 5;
                let p1 = ens.iter().map(|g| g.h_total[[k, 0]].norm_sqr()).sum::<f64>() / 8.0;
                prop_assert!(v.norm() <= (p1 / c.zero_lag_power).sqrt() + 1e-9);
            }
        }
    }
}
