//! End-to-end orchestration: rays, ensembles and per-condition statistics.

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, ValidatedConfig};
use crate::ctf::{ctf_grid, realize_channel, ChannelRealization, CtfError, CtfGrid};
use crate::dray::{trace_eigenrays, DRay};
use crate::export::ConditionResult;
use crate::real::Real;
use crate::stats::{acf, coherence_time, doppler_moments, doppler_psd, CorrelationCurve, DopplerSpectrum, StatsError, TfCorrelation};

/// Carrier frequencies swept by the reproduction preset.
pub const REPRO_CARRIERS_HZ: [f64; 3] = [20_000.0, 30_000.0, 50_000.0];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ctf(#[from] CtfError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("time grid must be uniform with at least 2 samples")]
    TimeGrid,
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// A validated scenario bound to its deterministic rays.
#[derive(Debug, Clone)]
pub struct Simulator<T> {
    cfg: ValidatedConfig<T>,
    drays: Vec<DRay<T>>,
}

impl<T: Real> Simulator<T> {
    /// Uses image-method eigenrays of the configured geometry.
    pub fn new_traced(cfg: ValidatedConfig<T>) -> Self {
        let drays = trace_eigenrays(cfg.env(), cfg.env().max_total_bounces);
        Self { cfg, drays }
    }

    /// Uses externally supplied rays, e.g. from an arrival file.
    pub fn with_drays(cfg: ValidatedConfig<T>, drays: Vec<DRay<T>>) -> Self {
        Self { cfg, drays }
    }

    pub fn config(&self) -> &ValidatedConfig<T> {
        &self.cfg
    }

    pub fn drays(&self) -> &[DRay<T>] {
        &self.drays
    }

    pub fn realize(&self, index: usize) -> Result<ChannelRealization<T>, CtfError> {
        realize_channel(&self.cfg, &self.drays, index)
    }

    pub fn synthesize(&self, index: usize) -> Result<CtfGrid<T>, CtfError> {
        ctf_grid(&self.realize(index)?, &self.cfg)
    }

    /// All configured realizations, in index order. `threads = None` lets the
    /// pool pick its size; the result does not depend on it.
    pub fn ensemble(&self, threads: Option<usize>) -> Result<Vec<CtfGrid<T>>, PipelineError> {
        let n = self.cfg.grid().n_realizations;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or(0))
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?;
        let grids = pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| self.synthesize(i))
                .collect::<Result<Vec<_>, _>>()
        })?;
        Ok(grids)
    }

    /// ACF, Doppler spectrum and summary numbers at every analysis anchor.
    pub fn analyze(&self, ensemble: &[CtfGrid<T>]) -> Result<Vec<ConditionAnalysis<T>>, PipelineError> {
        analyze_conditions(&self.cfg, ensemble)
    }
}

/// Statistics of one (anchor time, carrier) condition.
#[derive(Debug, Clone)]
pub struct ConditionAnalysis<T> {
    pub correlation: TfCorrelation<T>,
    pub spectrum: DopplerSpectrum<T>,
    pub result: ConditionResult<T>,
}

impl<T: Real> ConditionAnalysis<T> {
    pub fn acf(&self) -> &CorrelationCurve<T> {
        &self.correlation.total
    }
}

/// Uniform step of the time grid.
pub fn time_step<T: Real>(times: &[T]) -> Result<T, PipelineError> {
    if times.len() < 2 {
        return Err(PipelineError::TimeGrid);
    }
    let step = times[1] - times[0];
    let tol = step.abs() * T::lit(1e-6);
    if !(step > T::zero()) || times.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > tol) {
        return Err(PipelineError::TimeGrid);
    }
    Ok(step)
}

pub fn analyze_conditions<T: Real>(
    cfg: &ValidatedConfig<T>,
    ensemble: &[CtfGrid<T>],
) -> Result<Vec<ConditionAnalysis<T>>, PipelineError> {
    let analysis = cfg.analysis();
    let step = time_step(&cfg.grid().time_samples)?;
    let half = analysis.lag_steps(step);
    analysis
        .anchor_times_s
        .iter()
        .map(|&t| {
            let correlation = acf(ensemble, t, analysis.anchor_freq_hz, step, half)?;
            let spectrum = doppler_psd(&correlation.total, analysis.taper)?;
            let moments = doppler_moments(&spectrum)?;
            let coherence_time_s = coherence_time(&correlation.total, analysis.coherence_threshold)?;
            Ok(ConditionAnalysis {
                result: ConditionResult {
                    time_s: t,
                    carrier_freq_hz: cfg.grid().carrier_freq_hz,
                    moments,
                    coherence_time_s,
                },
                correlation,
                spectrum,
            })
        })
        .collect()
}

/// One carrier of the reproduction sweep.
#[derive(Debug, Clone)]
pub struct CarrierRun<T> {
    pub carrier_freq_hz: T,
    pub conditions: Vec<ConditionAnalysis<T>>,
}

/// Runs the full ensemble and analysis at each carrier, keeping everything
/// else in `base` fixed.
pub fn repro<T: Real>(
    base: &ValidatedConfig<T>,
    carriers_hz: &[T],
    threads: Option<usize>,
) -> Result<Vec<CarrierRun<T>>, PipelineError> {
    carriers_hz
        .iter()
        .map(|&fc| {
            let mut grid = base.grid().clone();
            grid.carrier_freq_hz = fc;
            let sim = Simulator::new_traced(base.clone().with_grid(grid)?);
            let ensemble = sim.ensemble(threads)?;
            Ok(CarrierRun {
                carrier_freq_hz: fc,
                conditions: sim.analyze(&ensemble)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigFile;

    fn small() -> ValidatedConfig<f64> {
        let file = ConfigFile::<f64> {
            n_realizations: 6,
            anchor_times_s: vec![0.0],
            max_lag_s: 0.1,
            time_step_s: 0.01,
            ..ConfigFile::default()
        };
        file.validate().unwrap()
    }

    #[test]
    fn ensemble_is_independent_of_thread_count() {
        let sim = Simulator::new_traced(small());
        let a = sim.ensemble(Some(1)).unwrap();
        let b = sim.ensemble(Some(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[2], sim.synthesize(2).unwrap());
    }

    #[test]
    fn analysis_produces_one_condition_per_anchor() {
        let sim = Simulator::new_traced(small());
        let ens = sim.ensemble(None).unwrap();
        let out = sim.analyze(&ens).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].acf().dt_lags_s.len(), 21);
        assert_eq!(out[0].spectrum.nu_hz.len(), 21);
        assert!(out[0].result.moments.rms_spread_hz >= 0.0);
    }

    #[test]
    fn irregular_time_grid_is_rejected() {
        assert!(matches!(time_step(&[0.0, 0.1, 0.3]), Err(PipelineError::TimeGrid)));
        assert!(matches!(time_step(&[0.0]), Err(PipelineError::TimeGrid)));
        assert!((time_step(&[0.0_f64, 0.1, 0.2]).unwrap() - 0.1).abs() < 1e-15);
    }
}
