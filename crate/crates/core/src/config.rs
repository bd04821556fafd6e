//! Scenario configuration, power partition and validation.
//!
//! Every downstream stage is a pure function of one [`ValidatedConfig`] plus a
//! seed. Config files are flat key-value documents (TOML or JSON) read into
//! [`ConfigFile`], whose keys mirror the fields of the typed sections below.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::real::Real;
use crate::stats::Taper;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("power coefficients must sum to 1, got s_d + s_r + s_f = {sum}")]
    PowerSum { sum: f64 },
    #[error("time_samples must be strictly increasing (violated at index {index})")]
    TimeNotIncreasing { index: usize },
    #[error("{field} must not be empty")]
    Empty { field: &'static str },
    #[error("correction factors need at least 2 rays, got {0}")]
    TooFewRays(usize),
    #[error("cannot read config: {0}")]
    Io(String),
    #[error("cannot parse config: {0}")]
    Parse(String),
}

/// Flat waveguide geometry and media constants. Depth is measured downward
/// from the surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Environment<T> {
    pub water_depth_m: T,
    pub range_m: T,
    pub tx_depth_m: T,
    pub rx_depth_m: T,
    pub c_water_mps: T,
    pub c_bottom_mps: T,
    pub rho_water: T,
    pub rho_bottom: T,
    pub spreading_beta: T,
    /// Largest surface + bottom bounce count traced per eigenray.
    pub max_total_bounces: usize,
}

impl<T: Real> Default for Environment<T> {
    /// 100 m deep channel, 1500 m range, Tx at 40 m and Rx at 60 m.
    fn default() -> Self {
        Self {
            water_depth_m: T::lit(100.0),
            range_m: T::lit(1500.0),
            tx_depth_m: T::lit(40.0),
            rx_depth_m: T::lit(60.0),
            c_water_mps: T::lit(1500.0),
            c_bottom_mps: T::lit(1600.0),
            rho_water: T::lit(1000.0),
            rho_bottom: T::lit(1500.0),
            spreading_beta: T::lit(2.0),
            max_total_bounces: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PowerPartition<T> {
    /// Ricean-like K factor splitting D-ray power between LoS and reflections.
    pub k_factor: T,
    pub s_d: T,
    pub s_r: T,
    pub s_f: T,
}

impl<T: Real> Default for PowerPartition<T> {
    fn default() -> Self {
        Self {
            k_factor: T::lit(1.6),
            s_d: T::lit(0.4),
            s_r: T::lit(0.4),
            s_f: T::lit(0.2),
        }
    }
}

/// Terminal drift and sea-surface motion.
///
/// Drift speeds are sinusoids `amp·sin(2π·freq·t + phase)`. Directions and
/// phases left as `None` are drawn per realization, uniform on `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MotionConfig<T> {
    pub tx_drift_amp: T,
    pub rx_drift_amp: T,
    pub tx_drift_freq: T,
    pub rx_drift_freq: T,
    pub theta_t: Option<T>,
    pub theta_r: Option<T>,
    pub tx_drift_phase: Option<T>,
    pub rx_drift_phase: Option<T>,
    pub wave_amp_m: T,
    pub wave_freq_hz: T,
}

impl<T: Real> Default for MotionConfig<T> {
    fn default() -> Self {
        Self {
            tx_drift_amp: T::lit(0.1),
            rx_drift_amp: T::lit(0.02),
            tx_drift_freq: T::lit(0.1),
            rx_drift_freq: T::lit(0.1),
            theta_t: None,
            theta_r: None,
            tx_drift_phase: None,
            rx_drift_phase: None,
            wave_amp_m: T::lit(0.1),
            wave_freq_hz: T::lit(0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StochasticConfig<T> {
    pub sigma_x_m: T,
    pub sigma_y_m: T,
    pub sigma_d: T,
    /// Diffuse rays per reflected D-ray.
    pub n_scatter_rays: usize,
    /// Rays per in-water twin cluster.
    pub n_fray_scatter: usize,
    pub lambda_g: T,
    pub lambda_r: T,
    pub dc_scenario_m: T,
    pub tau_clink_mean_s: T,
}

impl<T: Real> Default for StochasticConfig<T> {
    fn default() -> Self {
        Self {
            sigma_x_m: T::one(),
            sigma_y_m: T::one(),
            sigma_d: T::lit(0.1),
            n_scatter_rays: 20,
            n_fray_scatter: 20,
            lambda_g: T::lit(80.0),
            lambda_r: T::lit(4.0),
            dc_scenario_m: T::lit(30.0),
            tau_clink_mean_s: T::lit(1e-3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SimulationGrid<T> {
    pub carrier_freq_hz: T,
    pub time_samples: Vec<T>,
    /// Baseband offsets `f` added to the carrier.
    pub freq_offsets_hz: Vec<T>,
    pub n_realizations: usize,
    pub seed: u64,
}

impl<T: Real> SimulationGrid<T> {
    /// `count` instants `start + k·step`.
    pub fn uniform_times(start: T, step: T, count: usize) -> Vec<T> {
        (0..count)
            .map(|k| start + step * T::from_usize_lossy(k))
            .collect()
    }

    /// `count` offsets evenly spread over `[-B/2, B/2]`; a single offset is 0.
    pub fn band_offsets(bandwidth_hz: T, count: usize) -> Vec<T> {
        match count {
            0 => Vec::new(),
            1 => vec![T::zero()],
            _ => {
                let half = bandwidth_hz / T::lit(2.0);
                let step = bandwidth_hz / T::from_usize_lossy(count - 1);
                (0..count)
                    .map(|k| -half + step * T::from_usize_lossy(k))
                    .collect()
            }
        }
    }
}

/// Where and how the correlation statistics are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AnalysisConfig<T> {
    pub anchor_times_s: Vec<T>,
    pub anchor_freq_hz: T,
    pub max_lag_s: T,
    pub coherence_threshold: T,
    pub taper: Taper,
}

impl<T: Real> Default for AnalysisConfig<T> {
    fn default() -> Self {
        Self {
            anchor_times_s: vec![T::zero(), T::lit(2.0)],
            anchor_freq_hz: T::zero(),
            max_lag_s: T::lit(2.0),
            coherence_threshold: T::lit(0.5),
            taper: Taper::RaisedCosine,
        }
    }
}

impl<T: Real> AnalysisConfig<T> {
    /// Uniform time grid covering every anchor ± `max_lag_s`.
    pub fn covering_time_grid(&self, step: T) -> Vec<T> {
        let lo = self
            .anchor_times_s
            .iter()
            .copied()
            .fold(T::infinity(), T::min);
        let hi = self
            .anchor_times_s
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        if !lo.is_finite() || !(step > T::zero()) {
            return Vec::new();
        }
        let start = lo - self.max_lag_s;
        let span = hi + self.max_lag_s - start;
        let count = (span / step).round().to_usize().unwrap_or(0) + 1;
        SimulationGrid::uniform_times(start, step, count)
    }

    /// Number of lag steps on each side of an anchor.
    pub fn lag_steps(&self, step: T) -> usize {
        (self.max_lag_s / step).round().to_usize().unwrap_or(0)
    }
}

/// A configuration whose invariants have all been checked. Only
/// [`validate_config`] and [`ValidatedConfig::with_analysis`] construct one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct ValidatedConfig<T> {
    env: Environment<T>,
    power: PowerPartition<T>,
    motion: MotionConfig<T>,
    stoch: StochasticConfig<T>,
    grid: SimulationGrid<T>,
    analysis: AnalysisConfig<T>,
}

impl<T: Real> ValidatedConfig<T> {
    pub fn env(&self) -> &Environment<T> {
        &self.env
    }
    pub fn power(&self) -> &PowerPartition<T> {
        &self.power
    }
    pub fn motion(&self) -> &MotionConfig<T> {
        &self.motion
    }
    pub fn stoch(&self) -> &StochasticConfig<T> {
        &self.stoch
    }
    pub fn grid(&self) -> &SimulationGrid<T> {
        &self.grid
    }
    pub fn analysis(&self) -> &AnalysisConfig<T> {
        &self.analysis
    }

    pub fn into_parts(
        self,
    ) -> (
        Environment<T>,
        PowerPartition<T>,
        MotionConfig<T>,
        StochasticConfig<T>,
        SimulationGrid<T>,
    ) {
        (self.env, self.power, self.motion, self.stoch, self.grid)
    }

    pub fn with_analysis(mut self, analysis: AnalysisConfig<T>) -> Result<Self, ConfigError> {
        check_analysis(&analysis)?;
        self.analysis = analysis;
        Ok(self)
    }

    /// Re-runs validation on a modified grid (e.g. a different carrier).
    pub fn with_grid(self, grid: SimulationGrid<T>) -> Result<Self, ConfigError> {
        let analysis = self.analysis.clone();
        validate_config(self.env, self.power, self.motion, self.stoch, grid)?.with_analysis(analysis)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.grid.seed = seed;
        self
    }

    pub fn with_realizations(mut self, n: usize) -> Result<Self, ConfigError> {
        if n < 1 {
            return Err(out_of_range("n_realizations", n as f64));
        }
        self.grid.n_realizations = n;
        Ok(self)
    }

    /// Stable SHA-256 over the canonical serialization of the validated
    /// values; independent of the key order in the source file.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

fn out_of_range(field: &'static str, value: f64) -> ConfigError {
    ConfigError::OutOfRange { field, value }
}

fn require<T: Real>(ok: bool, field: &'static str, value: T) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(out_of_range(field, value.as_f64()))
    }
}

fn positive<T: Real>(field: &'static str, value: T) -> Result<(), ConfigError> {
    require(value > T::zero() && value.is_finite(), field, value)
}

fn non_negative<T: Real>(field: &'static str, value: T) -> Result<(), ConfigError> {
    require(value >= T::zero() && value.is_finite(), field, value)
}

/// Maps an angle into `[0, 2π)`.
pub fn normalize_angle<T: Real>(theta: T) -> T {
    let tau = T::TAU();
    let r = theta % tau;
    let r = if r < T::zero() { r + tau } else { r };
    if r >= tau {
        T::zero()
    } else {
        r
    }
}

/// Checks every invariant of the five configuration sections and normalizes
/// drift directions into `[0, 2π)`. Reports the first violation found.
pub fn validate_config<T: Real>(
    env: Environment<T>,
    power: PowerPartition<T>,
    mut motion: MotionConfig<T>,
    stoch: StochasticConfig<T>,
    grid: SimulationGrid<T>,
) -> Result<ValidatedConfig<T>, ConfigError> {
    positive("water_depth_m", env.water_depth_m)?;
    positive("range_m", env.range_m)?;
    require(
        env.tx_depth_m > T::zero() && env.tx_depth_m < env.water_depth_m,
        "tx_depth_m",
        env.tx_depth_m,
    )?;
    require(
        env.rx_depth_m > T::zero() && env.rx_depth_m < env.water_depth_m,
        "rx_depth_m",
        env.rx_depth_m,
    )?;
    positive("c_water_mps", env.c_water_mps)?;
    positive("c_bottom_mps", env.c_bottom_mps)?;
    positive("rho_water", env.rho_water)?;
    positive("rho_bottom", env.rho_bottom)?;
    positive("spreading_beta", env.spreading_beta)?;

    non_negative("k_factor", power.k_factor)?;
    non_negative("s_d", power.s_d)?;
    non_negative("s_r", power.s_r)?;
    non_negative("s_f", power.s_f)?;
    let sum = power.s_d.as_f64() + power.s_r.as_f64() + power.s_f.as_f64();
    // f32 cannot represent 0.4 + 0.4 + 0.2 to 1e-9.
    let sum_tol = if std::mem::size_of::<T>() < 8 { 1e-6 } else { 1e-9 };
    if (sum - 1.0).abs() > sum_tol {
        return Err(ConfigError::PowerSum { sum });
    }

    non_negative("tx_drift_amp", motion.tx_drift_amp)?;
    non_negative("rx_drift_amp", motion.rx_drift_amp)?;
    non_negative("tx_drift_freq", motion.tx_drift_freq)?;
    non_negative("rx_drift_freq", motion.rx_drift_freq)?;
    non_negative("wave_amp_m", motion.wave_amp_m)?;
    non_negative("wave_freq_hz", motion.wave_freq_hz)?;
    for (field, angle) in [
        ("theta_t", &mut motion.theta_t),
        ("theta_r", &mut motion.theta_r),
        ("tx_drift_phase", &mut motion.tx_drift_phase),
        ("rx_drift_phase", &mut motion.rx_drift_phase),
    ] {
        if let Some(a) = angle {
            require(a.is_finite(), field, *a)?;
            *a = normalize_angle(*a);
        }
    }

    positive("sigma_x_m", stoch.sigma_x_m)?;
    positive("sigma_y_m", stoch.sigma_y_m)?;
    positive("sigma_d", stoch.sigma_d)?;
    if stoch.n_scatter_rays < 1 {
        return Err(out_of_range("n_scatter_rays", 0.0));
    }
    if stoch.n_fray_scatter < 1 {
        return Err(out_of_range("n_fray_scatter", 0.0));
    }
    positive("lambda_g", stoch.lambda_g)?;
    positive("lambda_r", stoch.lambda_r)?;
    positive("dc_scenario_m", stoch.dc_scenario_m)?;
    non_negative("tau_clink_mean_s", stoch.tau_clink_mean_s)?;

    positive("carrier_freq_hz", grid.carrier_freq_hz)?;
    if grid.time_samples.is_empty() {
        return Err(ConfigError::Empty { field: "time_samples" });
    }
    for (k, t) in grid.time_samples.iter().enumerate() {
        require(t.is_finite(), "time_samples", *t)?;
        if k > 0 && !(grid.time_samples[k - 1] < *t) {
            return Err(ConfigError::TimeNotIncreasing { index: k });
        }
    }
    if grid.freq_offsets_hz.is_empty() {
        return Err(ConfigError::Empty {
            field: "freq_offsets_hz",
        });
    }
    for f in &grid.freq_offsets_hz {
        require(f.is_finite(), "freq_offsets_hz", *f)?;
    }
    if grid.n_realizations < 1 {
        return Err(out_of_range("n_realizations", 0.0));
    }

    Ok(ValidatedConfig {
        env,
        power,
        motion,
        stoch,
        grid,
        analysis: AnalysisConfig::default(),
    })
}

fn check_analysis<T: Real>(a: &AnalysisConfig<T>) -> Result<(), ConfigError> {
    if a.anchor_times_s.is_empty() {
        return Err(ConfigError::Empty {
            field: "anchor_times_s",
        });
    }
    for t in &a.anchor_times_s {
        require(t.is_finite(), "anchor_times_s", *t)?;
    }
    require(a.anchor_freq_hz.is_finite(), "anchor_freq_hz", a.anchor_freq_hz)?;
    non_negative("max_lag_s", a.max_lag_s)?;
    require(
        a.coherence_threshold > T::zero() && a.coherence_threshold <= T::one(),
        "coherence_threshold",
        a.coherence_threshold,
    )
}

/// Per-ray amplitude weights for the D-ray sum: `sqrt(K/(K+1))` for the LoS
/// ray and `sqrt(1/((N-1)(K+1)))` for each of the other `N-1` rays.
pub fn correction_factors<T: Real>(k_factor: T, n_rays: usize) -> Result<Vec<T>, ConfigError> {
    if n_rays < 2 {
        return Err(ConfigError::TooFewRays(n_rays));
    }
    non_negative("k_factor", k_factor)?;
    let kp1 = k_factor + T::one();
    let los = (k_factor / kp1).sqrt();
    let other = (T::one() / (T::from_usize_lossy(n_rays - 1) * kp1)).sqrt();
    let mut w = vec![other; n_rays];
    w[0] = los;
    Ok(w)
}

/// Flat on-disk configuration. Every key is optional; missing keys take the
/// defaults of the typed sections.
///
/// When `time_samples` is absent the time grid is built from the analysis
/// anchors ± `max_lag_s` at `time_step_s`. When `freq_offsets_hz` is absent,
/// `n_freq` offsets span `[-bandwidth_hz/2, bandwidth_hz/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct ConfigFile<T> {
    pub water_depth_m: T,
    pub range_m: T,
    pub tx_depth_m: T,
    pub rx_depth_m: T,
    pub c_water_mps: T,
    pub c_bottom_mps: T,
    pub rho_water: T,
    pub rho_bottom: T,
    pub spreading_beta: T,
    pub max_total_bounces: usize,

    pub k_factor: T,
    pub s_d: T,
    pub s_r: T,
    pub s_f: T,

    pub tx_drift_amp: T,
    pub rx_drift_amp: T,
    pub tx_drift_freq: T,
    pub rx_drift_freq: T,
    pub theta_t: Option<T>,
    pub theta_r: Option<T>,
    pub tx_drift_phase: Option<T>,
    pub rx_drift_phase: Option<T>,
    pub wave_amp_m: T,
    pub wave_freq_hz: T,

    pub sigma_x_m: T,
    pub sigma_y_m: T,
    pub sigma_d: T,
    pub n_scatter_rays: usize,
    pub n_fray_scatter: usize,
    pub lambda_g: T,
    pub lambda_r: T,
    pub dc_scenario_m: T,
    pub tau_clink_mean_s: T,

    pub carrier_freq_hz: T,
    pub time_samples: Option<Vec<T>>,
    pub time_step_s: T,
    pub freq_offsets_hz: Option<Vec<T>>,
    pub bandwidth_hz: T,
    pub n_freq: usize,
    pub n_realizations: usize,
    pub seed: u64,

    pub anchor_times_s: Vec<T>,
    pub anchor_freq_hz: T,
    pub max_lag_s: T,
    pub coherence_threshold: T,
    pub taper: Taper,
}

impl<T: Real> Default for ConfigFile<T> {
    fn default() -> Self {
        let env = Environment::<T>::default();
        let power = PowerPartition::<T>::default();
        let motion = MotionConfig::<T>::default();
        let stoch = StochasticConfig::<T>::default();
        let analysis = AnalysisConfig::<T>::default();
        Self {
            water_depth_m: env.water_depth_m,
            range_m: env.range_m,
            tx_depth_m: env.tx_depth_m,
            rx_depth_m: env.rx_depth_m,
            c_water_mps: env.c_water_mps,
            c_bottom_mps: env.c_bottom_mps,
            rho_water: env.rho_water,
            rho_bottom: env.rho_bottom,
            spreading_beta: env.spreading_beta,
            max_total_bounces: env.max_total_bounces,
            k_factor: power.k_factor,
            s_d: power.s_d,
            s_r: power.s_r,
            s_f: power.s_f,
            tx_drift_amp: motion.tx_drift_amp,
            rx_drift_amp: motion.rx_drift_amp,
            tx_drift_freq: motion.tx_drift_freq,
            rx_drift_freq: motion.rx_drift_freq,
            theta_t: motion.theta_t,
            theta_r: motion.theta_r,
            tx_drift_phase: motion.tx_drift_phase,
            rx_drift_phase: motion.rx_drift_phase,
            wave_amp_m: motion.wave_amp_m,
            wave_freq_hz: motion.wave_freq_hz,
            sigma_x_m: stoch.sigma_x_m,
            sigma_y_m: stoch.sigma_y_m,
            sigma_d: stoch.sigma_d,
            n_scatter_rays: stoch.n_scatter_rays,
            n_fray_scatter: stoch.n_fray_scatter,
            lambda_g: stoch.lambda_g,
            lambda_r: stoch.lambda_r,
            dc_scenario_m: stoch.dc_scenario_m,
            tau_clink_mean_s: stoch.tau_clink_mean_s,
            carrier_freq_hz: T::lit(20_000.0),
            time_samples: None,
            time_step_s: T::lit(0.005),
            freq_offsets_hz: None,
            bandwidth_hz: T::lit(5000.0),
            n_freq: 1,
            n_realizations: 500,
            seed: 0,
            anchor_times_s: analysis.anchor_times_s,
            anchor_freq_hz: analysis.anchor_freq_hz,
            max_lag_s: analysis.max_lag_s,
            coherence_threshold: analysis.coherence_threshold,
            taper: analysis.taper,
        }
    }
}

impl<T: Real> ConfigFile<T> {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn analysis(&self) -> AnalysisConfig<T> {
        AnalysisConfig {
            anchor_times_s: self.anchor_times_s.clone(),
            anchor_freq_hz: self.anchor_freq_hz,
            max_lag_s: self.max_lag_s,
            coherence_threshold: self.coherence_threshold,
            taper: self.taper,
        }
    }

    pub fn validate(&self) -> Result<ValidatedConfig<T>, ConfigError> {
        let analysis = self.analysis();
        check_analysis(&analysis)?;
        let time_samples = match &self.time_samples {
            Some(t) => t.clone(),
            None => {
                positive("time_step_s", self.time_step_s)?;
                analysis.covering_time_grid(self.time_step_s)
            }
        };
        let freq_offsets_hz = match &self.freq_offsets_hz {
            Some(f) => f.clone(),
            None => {
                non_negative("bandwidth_hz", self.bandwidth_hz)?;
                SimulationGrid::band_offsets(self.bandwidth_hz, self.n_freq)
            }
        };
        let env = Environment {
            water_depth_m: self.water_depth_m,
            range_m: self.range_m,
            tx_depth_m: self.tx_depth_m,
            rx_depth_m: self.rx_depth_m,
            c_water_mps: self.c_water_mps,
            c_bottom_mps: self.c_bottom_mps,
            rho_water: self.rho_water,
            rho_bottom: self.rho_bottom,
            spreading_beta: self.spreading_beta,
            max_total_bounces: self.max_total_bounces,
        };
        let power = PowerPartition {
            k_factor: self.k_factor,
            s_d: self.s_d,
            s_r: self.s_r,
            s_f: self.s_f,
        };
        let motion = MotionConfig {
            tx_drift_amp: self.tx_drift_amp,
            rx_drift_amp: self.rx_drift_amp,
            tx_drift_freq: self.tx_drift_freq,
            rx_drift_freq: self.rx_drift_freq,
            theta_t: self.theta_t,
            theta_r: self.theta_r,
            tx_drift_phase: self.tx_drift_phase,
            rx_drift_phase: self.rx_drift_phase,
            wave_amp_m: self.wave_amp_m,
            wave_freq_hz: self.wave_freq_hz,
        };
        let stoch = StochasticConfig {
            sigma_x_m: self.sigma_x_m,
            sigma_y_m: self.sigma_y_m,
            sigma_d: self.sigma_d,
            n_scatter_rays: self.n_scatter_rays,
            n_fray_scatter: self.n_fray_scatter,
            lambda_g: self.lambda_g,
            lambda_r: self.lambda_r,
            dc_scenario_m: self.dc_scenario_m,
            tau_clink_mean_s: self.tau_clink_mean_s,
        };
        let grid = SimulationGrid {
            carrier_freq_hz: self.carrier_freq_hz,
            time_samples,
            freq_offsets_hz,
            n_realizations: self.n_realizations,
            seed: self.seed,
        };
        validate_config(env, power, motion, stoch, grid)?.with_analysis(analysis)
    }
}
