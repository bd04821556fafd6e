//! Channel realizations and their time-frequency transfer functions.

use ndarray::Array2;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::acoustics::AcousticsError;
use crate::config::{correction_factors, ConfigError, ValidatedConfig};
use crate::doppler::{drift_doppler, DopplerState};
use crate::dray::{DRay, RayError};
use crate::fray::{evolve_clusters, fray_delay_gain, initial_clusters, ClusterError, ClusterSet, TwinCluster};
use crate::real::{cycles_to_phase, Real};
use crate::rray::{rray_gain, rray_geometry, sample_scatterers, RRayPath, ScatterError, ScatterPair};

#[derive(Debug, Error)]
pub enum CtfError {
    #[error("channel has no deterministic rays")]
    NoRays,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ray(#[from] RayError),
    #[error(transparent)]
    Scatter(#[from] ScatterError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Kernel(#[from] AcousticsError),
}

/// Lifetime of one cluster on the time grid: alive at samples
/// `birth_step..death_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTrack<T> {
    pub cluster: TwinCluster<T>,
    pub birth_step: usize,
    pub death_step: usize,
}

impl<T> ClusterTrack<T> {
    pub fn alive_at(&self, step: usize) -> bool {
        (self.birth_step..self.death_step).contains(&step)
    }
}

/// Every random draw of one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    pub index: usize,
    pub seed: u64,
    pub drays: Vec<DRay<T>>,
    /// Scatter pairs per D-ray, in ray order; empty for the LoS ray.
    pub scatter_pairs: Vec<Vec<ScatterPair<T>>>,
    /// Geometry of the pairs above, same layout.
    pub rray_paths: Vec<Vec<RRayPath<T>>>,
    /// Every cluster that was alive at some grid time, indexed by id.
    pub clusters: Vec<ClusterTrack<T>>,
    pub doppler: DopplerState<T>,
    /// Number of diffuse rays whose middle segment was clamped to zero.
    pub clamp_count: usize,
}

impl<T: Real> ChannelRealization<T> {
    /// Clusters alive at time sample `step`.
    pub fn clusters_at(&self, step: usize) -> impl Iterator<Item = &TwinCluster<T>> {
        self.clusters
            .iter()
            .filter(move |c| c.alive_at(step))
            .map(|c| &c.cluster)
    }

    /// Snapshot of the cluster population at every time sample.
    pub fn cluster_history(&self, times: &[T]) -> Vec<ClusterSet<T>> {
        times
            .iter()
            .enumerate()
            .map(|(k, &t)| ClusterSet {
                time_s: t,
                clusters: self.clusters_at(k).cloned().collect(),
                next_id: self.clusters.len() as u64,
            })
            .collect()
    }
}

/// Random stream of realization `index`: one ChaCha stream per index, so
/// members can be generated in any order or extended later.
pub fn realization_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws realization `index` around the given D-rays.
///
/// Draw order: Doppler state, scatterers of every reflected ray in ray
/// order, then the cluster process along the time grid.
pub fn realize_channel<T: Real>(
    cfg: &ValidatedConfig<T>,
    drays: &[DRay<T>],
    index: usize,
) -> Result<ChannelRealization<T>, CtfError> {
    if drays.is_empty() {
        return Err(CtfError::NoRays);
    }
    let env = cfg.env();
    let stoch = cfg.stoch();
    let motion = cfg.motion();
    let times = &cfg.grid().time_samples;
    let seed = cfg.grid().seed;
    let mut rng = realization_rng(seed, index);

    let doppler = DopplerState::sample(drays, motion, &mut rng);

    let mut scatter_pairs = Vec::with_capacity(drays.len());
    let mut rray_paths = Vec::with_capacity(drays.len());
    let mut clamp_count = 0;
    for ray in drays {
        if ray.first_refl_xy_m.is_none() {
            scatter_pairs.push(Vec::new());
            rray_paths.push(Vec::new());
            continue;
        }
        let pairs = sample_scatterers(ray, stoch, &mut rng)?;
        let paths = pairs
            .iter()
            .map(|p| rray_geometry(ray, p, env.c_water_mps))
            .collect::<Result<Vec<_>, _>>()?;
        clamp_count += paths.iter().filter(|p| p.clamped).count();
        scatter_pairs.push(pairs);
        rray_paths.push(paths);
    }

    let mut clusters: Vec<ClusterTrack<T>> = Vec::new();
    let n_t = times.len();
    if let Some(&t0) = times.first() {
        let mut set = initial_clusters(t0, stoch, env, &mut rng);
        record_births(&mut clusters, &set, 0, n_t);
        for k in 1..n_t {
            let dt = times[k] - times[k - 1];
            let (v_t, v_r) = doppler.drift_speeds(motion, times[k - 1]);
            let before = set.next_id;
            set = evolve_clusters(set, dt, v_t, v_r, stoch, env, &mut rng)?;
            let mut survivors = set.clusters.iter().filter(|c| c.id < before).map(|c| c.id);
            let mut next = survivors.next();
            for track in clusters.iter_mut().filter(|c| c.death_step == n_t) {
                if Some(track.cluster.id) == next {
                    next = survivors.next();
                } else {
                    track.death_step = k;
                }
            }
            record_births(&mut clusters, &set, k, n_t);
        }
    }

    Ok(ChannelRealization {
        index,
        seed,
        drays: drays.to_vec(),
        scatter_pairs,
        rray_paths,
        clusters,
        doppler,
        clamp_count,
    })
}

fn record_births<T: Real>(tracks: &mut Vec<ClusterTrack<T>>, set: &ClusterSet<T>, step: usize, n_t: usize) {
    let known = tracks.len();
    for c in set.clusters.iter().filter(|c| c.id as usize >= known) {
        tracks.push(ClusterTrack {
            cluster: c.clone(),
            birth_step: step,
            death_step: n_t,
        });
    }
}

/// Component and total transfer functions on a (time × frequency) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CtfGrid<T> {
    pub carrier_freq_hz: T,
    pub times_s: Vec<T>,
    pub freq_offsets_hz: Vec<T>,
    pub h_d: Array2<Complex<T>>,
    pub h_r: Array2<Complex<T>>,
    pub h_f: Array2<Complex<T>>,
    pub h_total: Array2<Complex<T>>,
}

/// `e^{-j2π(f_c+f)τ}` with the cycle count reduced before scaling by 2π.
fn delay_phasor<T: Real>(f_abs: T, delay: T) -> Complex<T> {
    Complex::from_polar(T::one(), -cycles_to_phase(f_abs * delay))
}

/// `e^{j2π a f_c t}`.
fn doppler_phasor<T: Real>(a: T, fc: T, t: T) -> Complex<T> {
    Complex::from_polar(T::one(), cycles_to_phase(a * fc * t))
}

/// Per-frequency static sum, multiplied by one Doppler phasor per time.
struct Term<T> {
    spectrum: Vec<Complex<T>>,
}

/// Evaluates the D, R and F transfer functions of a realization on the
/// configured grid and combines them with the power partition.
pub fn ctf_grid<T: Real>(real: &ChannelRealization<T>, cfg: &ValidatedConfig<T>) -> Result<CtfGrid<T>, CtfError> {
    let drays = &real.drays;
    if drays.is_empty() {
        return Err(CtfError::NoRays);
    }
    let env = cfg.env();
    let motion = cfg.motion();
    let power = cfg.power();
    let grid = cfg.grid();
    let fc = grid.carrier_freq_hz;
    let c = env.c_water_mps;
    let times = &grid.time_samples;
    let freqs = &grid.freq_offsets_hz;
    let (n_t, n_f) = (times.len(), freqs.len());
    let abs_freqs: Vec<T> = freqs.iter().map(|&f| fc + f).collect();
    let khz = T::lit(1000.0);

    let weights = if drays.len() == 1 {
        vec![T::one()]
    } else {
        correction_factors(power.k_factor, drays.len())?
    };

    let mut d_terms = Vec::with_capacity(drays.len());
    for (ray, &k) in drays.iter().zip(&weights) {
        let spectrum = abs_freqs
            .iter()
            .map(|&fa| Ok(ray.gain(fa, env)? * delay_phasor(fa, ray.delay_s) * k))
            .collect::<Result<Vec<_>, CtfError>>()?;
        d_terms.push(Term { spectrum });
    }

    let mut r_terms = Vec::with_capacity(drays.len());
    for (ray, paths) in drays.iter().zip(&real.rray_paths) {
        let norm = if paths.is_empty() {
            T::zero()
        } else {
            T::one() / T::from_usize_lossy(paths.len()).sqrt()
        };
        let mut spectrum = vec![Complex::new(T::zero(), T::zero()); n_f];
        for path in paths {
            for (s, &fa) in spectrum.iter_mut().zip(&abs_freqs) {
                let g = rray_gain(path, ray, fa / khz, env)?;
                *s = *s + delay_phasor(fa, path.delay_s) * g;
            }
        }
        r_terms.push(Term {
            spectrum: spectrum.into_iter().map(|s| s * norm).collect(),
        });
    }

    let mut f_terms = Vec::with_capacity(real.clusters.len());
    for track in &real.clusters {
        let cl = &track.cluster;
        let m = cl.jitter.len().max(1);
        let norm = T::one() / T::from_usize_lossy(m).sqrt();
        let mut spectrum = vec![Complex::new(T::zero(), T::zero()); n_f];
        for j in 1..=m {
            for (s, &fa) in spectrum.iter_mut().zip(&abs_freqs) {
                let (delay, g) = fray_delay_gain(cl, j, fa / khz, env)?;
                *s = *s + delay_phasor(fa, delay) * g;
            }
        }
        f_terms.push(Term {
            spectrum: spectrum.into_iter().map(|s| s * norm).collect(),
        });
    }

    let zero = Complex::new(T::zero(), T::zero());
    let mut h_d = Array2::from_elem((n_t, n_f), zero);
    let mut h_r = Array2::from_elem((n_t, n_f), zero);
    let mut h_f = Array2::from_elem((n_t, n_f), zero);
    let st = real.doppler.theta_t;
    let sr = real.doppler.theta_r;
    for (k, &t) in times.iter().enumerate() {
        for (i, ray) in drays.iter().enumerate() {
            let a = real.doppler.ray_factor(i, ray, motion, t, c);
            let ph = doppler_phasor(a, fc, t);
            let (d, r) = (&d_terms[i].spectrum, &r_terms[i].spectrum);
            for m in 0..n_f {
                h_d[[k, m]] = h_d[[k, m]] + d[m] * ph;
                h_r[[k, m]] = h_r[[k, m]] + r[m] * ph;
            }
        }
        let (v_t, v_r) = real.doppler.drift_speeds(motion, t);
        for (track, term) in real.clusters.iter().zip(&f_terms) {
            if !track.alive_at(k) {
                continue;
            }
            let a = drift_doppler(v_t, v_r, st, sr, track.cluster.angle_tx_rad, c);
            let ph = doppler_phasor(a, fc, t);
            for m in 0..n_f {
                h_f[[k, m]] = h_f[[k, m]] + term.spectrum[m] * ph;
            }
        }
    }

    let (wd, wr, wf) = (power.s_d.sqrt(), power.s_r.sqrt(), power.s_f.sqrt());
    let h_total = ndarray::Zip::from(&h_d)
        .and(&h_r)
        .and(&h_f)
        .map_collect(|&d, &r, &f| d * wd + r * wr + f * wf);

    Ok(CtfGrid {
        carrier_freq_hz: fc,
        times_s: times.clone(),
        freq_offsets_hz: freqs.clone(),
        h_d,
        h_r,
        h_f,
        h_total,
    })
}
