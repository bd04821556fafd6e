//! In-water twin clusters under a birth-death process, and the rays that pass
//! through them.
//!
//! Each cluster pairs a Tx-side and an Rx-side scattering region joined by a
//! virtual link. Over an interval `Δt` every cluster survives independently
//! with probability `P_s(Δt)`, and a Poisson number of new clusters with mean
//! `(λ_G/λ_R)(1 - P_s)` is born.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use thiserror::Error;

use crate::acoustics::{self, AcousticsError};
use crate::config::{Environment, StochasticConfig};
use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("time interval must be non-negative, got {0} s")]
    NegativeInterval(f64),
    #[error("cluster {0} is not alive")]
    DeadCluster(u64),
    #[error("ray index {index} outside 1..={count}")]
    RayIndex { index: usize, count: usize },
    #[error(transparent)]
    Kernel(#[from] AcousticsError),
}

/// Per-ray Gaussian jitter around the two cluster centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterJitter<T> {
    pub tx_xy_m: [T; 2],
    pub rx_xy_m: [T; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinCluster<T> {
    pub id: u64,
    /// Elevation of the Tx-side cluster seen from Tx, positive toward the
    /// surface; range direction points at Rx.
    pub angle_tx_rad: T,
    pub dist_tx_m: T,
    /// Elevation of the Rx-side cluster seen from Rx; range direction points
    /// at Tx.
    pub angle_rx_rad: T,
    pub dist_rx_m: T,
    pub inter_cluster_dist_m: T,
    pub tau_clink_s: T,
    pub birth_time_s: T,
    pub alive: bool,
    pub jitter: Vec<ClusterJitter<T>>,
}

impl<T: Real> TwinCluster<T> {
    /// Tx-side center relative to Tx as (range, depth) offsets.
    pub fn tx_offset(&self) -> [T; 2] {
        [
            self.dist_tx_m * self.angle_tx_rad.cos(),
            -self.dist_tx_m * self.angle_tx_rad.sin(),
        ]
    }

    /// Rx-side center relative to Rx as (range, depth) offsets.
    pub fn rx_offset(&self) -> [T; 2] {
        [
            -self.dist_rx_m * self.angle_rx_rad.cos(),
            -self.dist_rx_m * self.angle_rx_rad.sin(),
        ]
    }

    pub fn tx_position(&self, env: &Environment<T>) -> [T; 2] {
        let o = self.tx_offset();
        [o[0], env.tx_depth_m + o[1]]
    }

    pub fn rx_position(&self, env: &Environment<T>) -> [T; 2] {
        let o = self.rx_offset();
        [env.range_m + o[0], env.rx_depth_m + o[1]]
    }
}

/// Alive clusters at one instant. Ids come from a counter that never
/// rewinds, so an id is never reused within a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet<T> {
    pub time_s: T,
    pub clusters: Vec<TwinCluster<T>>,
    pub next_id: u64,
}

impl<T: Real> ClusterSet<T> {
    pub fn empty(time_s: T) -> Self {
        Self {
            time_s,
            clusters: Vec::new(),
            next_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// Joint survival probability `P_s^T · P_s^R` with
/// `P_s^{T(R)} = exp(-λ_R·Δt·|v|/D_c)`.
pub fn survival_probability<T: Real>(
    dt_s: T,
    v_t_mps: T,
    v_r_mps: T,
    stoch: &StochasticConfig<T>,
) -> Result<T, ClusterError> {
    if !(dt_s >= T::zero()) {
        return Err(ClusterError::NegativeInterval(dt_s.as_f64()));
    }
    let side = |v: T| (-stoch.lambda_r * (dt_s * v.abs() / stoch.dc_scenario_m)).exp();
    Ok(side(v_t_mps) * side(v_r_mps))
}

/// Mean number of clusters born while survival is `p_s`.
pub fn expected_new_clusters<T: Real>(p_s: T, stoch: &StochasticConfig<T>) -> T {
    stoch.lambda_g / stoch.lambda_r * (T::one() - p_s)
}

const MAX_PLACEMENT_TRIES: usize = 10_000;

/// Draws a point at exponential distance (mean `D_c`) and uniform elevation in
/// the forward half plane of a terminal at `depth`, rejecting draws outside
/// the water column.
fn place<T: Real, R: Rng + ?Sized>(
    depth: T,
    stoch: &StochasticConfig<T>,
    env: &Environment<T>,
    rng: &mut R,
) -> (T, T) {
    let exp = Exp::new(1.0 / stoch.dc_scenario_m.as_f64()).expect("positive correlation distance");
    let half_pi = std::f64::consts::FRAC_PI_2;
    let h = env.water_depth_m.as_f64();
    let z0 = depth.as_f64();
    let mut last = (0.0, 0.0);
    for _ in 0..MAX_PLACEMENT_TRIES {
        let angle = rng.random_range(-half_pi..half_pi);
        let dist: f64 = exp.sample(rng);
        last = (angle, dist);
        let z = z0 - dist * angle.sin();
        if dist > 0.0 && (0.0..=h).contains(&z) {
            return (T::lit(angle), T::lit(dist));
        }
    }
    // Pull an unlucky draw back inside the column along its own bearing.
    let (angle, dist) = last;
    let room = if angle > 0.0 { z0 } else { h - z0 };
    let dist = dist.min(room / angle.sin().abs().max(f64::MIN_POSITIVE)).max(1e-3);
    (T::lit(angle), T::lit(dist))
}

/// Creates a cluster born at `time_s` with the given id.
pub fn spawn_cluster<T: Real, R: Rng + ?Sized>(
    id: u64,
    time_s: T,
    stoch: &StochasticConfig<T>,
    env: &Environment<T>,
    rng: &mut R,
) -> TwinCluster<T> {
    let (angle_tx_rad, dist_tx_m) = place(env.tx_depth_m, stoch, env, rng);
    let (angle_rx_rad, dist_rx_m) = place(env.rx_depth_m, stoch, env, rng);
    let tau_clink_s = if stoch.tau_clink_mean_s > T::zero() {
        let exp = Exp::new(1.0 / stoch.tau_clink_mean_s.as_f64()).expect("positive mean");
        T::lit(exp.sample(rng))
    } else {
        T::zero()
    };
    let nx = Normal::new(0.0, stoch.sigma_x_m.as_f64()).expect("validated sigma");
    let ny = Normal::new(0.0, stoch.sigma_y_m.as_f64()).expect("validated sigma");
    let jitter = (0..stoch.n_fray_scatter)
        .map(|_| ClusterJitter {
            tx_xy_m: [T::lit(nx.sample(rng)), T::lit(ny.sample(rng))],
            rx_xy_m: [T::lit(nx.sample(rng)), T::lit(ny.sample(rng))],
        })
        .collect();
    let mut cluster = TwinCluster {
        id,
        angle_tx_rad,
        dist_tx_m,
        angle_rx_rad,
        dist_rx_m,
        inter_cluster_dist_m: T::zero(),
        tau_clink_s,
        birth_time_s: time_s,
        alive: true,
        jitter,
    };
    let p = cluster.tx_position(env);
    let q = cluster.rx_position(env);
    cluster.inter_cluster_dist_m = (q[0] - p[0]).hypot(q[1] - p[1]);
    cluster
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
    } else {
        0
    }
}

/// Equilibrium start: a Poisson number of clusters with mean `λ_G/λ_R`.
pub fn initial_clusters<T: Real, R: Rng + ?Sized>(
    time_s: T,
    stoch: &StochasticConfig<T>,
    env: &Environment<T>,
    rng: &mut R,
) -> ClusterSet<T> {
    let mut set = ClusterSet::empty(time_s);
    let n = poisson((stoch.lambda_g / stoch.lambda_r).as_f64(), rng);
    for _ in 0..n {
        let id = set.next_id;
        set.next_id += 1;
        set.clusters.push(spawn_cluster(id, time_s, stoch, env, rng));
    }
    set
}

/// Advances the set by `dt_s` at drift speeds `v_t`, `v_r`. Survivors keep
/// their ids; newborns get fresh ones.
#[allow(clippy::too_many_arguments)]
pub fn evolve_clusters<T: Real, R: Rng + ?Sized>(
    set: ClusterSet<T>,
    dt_s: T,
    v_t_mps: T,
    v_r_mps: T,
    stoch: &StochasticConfig<T>,
    env: &Environment<T>,
    rng: &mut R,
) -> Result<ClusterSet<T>, ClusterError> {
    let p_s = survival_probability(dt_s, v_t_mps, v_r_mps, stoch)?;
    let time_s = set.time_s + dt_s;
    if p_s >= T::one() {
        return Ok(ClusterSet { time_s, ..set });
    }
    let p = p_s.as_f64();
    let mut next_id = set.next_id;
    let mut clusters: Vec<_> = set
        .clusters
        .into_iter()
        .filter(|_| rng.random::<f64>() < p)
        .collect();
    let births = poisson(expected_new_clusters(p_s, stoch).as_f64(), rng);
    for _ in 0..births {
        clusters.push(spawn_cluster(next_id, time_s, stoch, env, rng));
        next_id += 1;
    }
    Ok(ClusterSet {
        time_s,
        clusters,
        next_id,
    })
}

/// Distance of ray `j` (1-based) through a cluster:
/// `d_A + d_Z + c·(d̃/c + τ_link)`.
pub fn fray_distance<T: Real>(
    cluster: &TwinCluster<T>,
    j: usize,
    c_water_mps: T,
) -> Result<T, ClusterError> {
    if !cluster.alive {
        return Err(ClusterError::DeadCluster(cluster.id));
    }
    let jit = match j.checked_sub(1).and_then(|k| cluster.jitter.get(k)) {
        Some(jit) => *jit,
        None if cluster.jitter.is_empty() && j == 1 => ClusterJitter {
            tx_xy_m: [T::zero(); 2],
            rx_xy_m: [T::zero(); 2],
        },
        None => {
            return Err(ClusterError::RayIndex {
                index: j,
                count: cluster.jitter.len(),
            })
        }
    };
    let a = cluster.tx_offset();
    let z = cluster.rx_offset();
    let d_a = (a[0] + jit.tx_xy_m[0]).hypot(a[1] + jit.tx_xy_m[1]);
    let d_z = (z[0] + jit.rx_xy_m[0]).hypot(z[1] + jit.rx_xy_m[1]);
    let virtual_delay = cluster.inter_cluster_dist_m / c_water_mps + cluster.tau_clink_s;
    Ok(d_a + d_z + virtual_delay * c_water_mps)
}

/// Delay and amplitude `L_S(d)·L_A(d, f)` of ray `j` through a cluster.
pub fn fray_delay_gain<T: Real>(
    cluster: &TwinCluster<T>,
    j: usize,
    f_khz: T,
    env: &Environment<T>,
) -> Result<(T, T), ClusterError> {
    let d = fray_distance(cluster, j, env.c_water_mps)?;
    let gain = acoustics::spreading_loss(d, env.spreading_beta)? * acoustics::absorption_loss(d, f_khz)?;
    Ok((d / env.c_water_mps, gain))
}

/// Debug export of cluster histories with columns
/// `time_s,cluster_id,alive,tx_x_m,tx_depth_m,rx_x_m,rx_depth_m`.
pub fn write_cluster_history_csv<T: Real, W: Write>(
    history: &[ClusterSet<T>],
    env: &Environment<T>,
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "time_s,cluster_id,alive,tx_x_m,tx_depth_m,rx_x_m,rx_depth_m")?;
    for set in history {
        for c in &set.clusters {
            let p = c.tx_position(env);
            let q = c.rx_position(env);
            writeln!(
                w,
                "{:.8e},{},{},{:.8e},{:.8e},{:.8e},{:.8e}",
                set.time_s, c.id, c.alive, p[0], p[1], q[0], q[1]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stoch() -> StochasticConfig<f64> {
        StochasticConfig::default()
    }

    #[test]
    fn survival_examples() {
        let s = stoch();
        assert_eq!(survival_probability(0.0, 0.05, 0.05, &s).unwrap(), 1.0);
        let p = survival_probability(2.0, 0.05, 0.05, &s).unwrap();
        assert!((p - 0.973_685_749_353_145).abs() < 1e-12);
        let one_side = survival_probability(2.0, 0.05, 0.0, &s).unwrap();
        assert!((one_side - 0.986_755_161_807_195_7).abs() < 1e-12);
        assert!(survival_probability(-1.0, 0.05, 0.05, &s).is_err());
        let later = survival_probability(3.0, 0.05, 0.05, &s).unwrap();
        assert!(later < p);
    }

    #[test]
    fn expected_births() {
        let s = stoch();
        assert_eq!(expected_new_clusters(1.0, &s), 0.0);
        assert!((expected_new_clusters(0.9737, &s) - 0.526).abs() < 1e-12);
        let slope = expected_new_clusters(0.5, &s) - expected_new_clusters(0.6, &s);
        assert!((slope / 0.1 - 20.0).abs() < 1e-9);
    }

    #[test]
    fn zero_interval_changes_nothing() {
        let env = Environment::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = initial_clusters(0.0, &stoch(), &env, &mut rng);
        let before = set.clone();
        let after = evolve_clusters(set, 0.0, 0.1, 0.1, &stoch(), &env, &mut rng).unwrap();
        assert_eq!(after, before);
    }

    #[test]
    fn clusters_stay_in_water_and_ids_are_fresh() {
        let env = Environment::default();
        let s = stoch();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut set = initial_clusters(0.0, &s, &env, &mut rng);
        let mut seen = std::collections::HashSet::new();
        let mut retired = std::collections::HashSet::new();
        for _ in 0..500 {
            let ids: std::collections::HashSet<u64> = set.clusters.iter().map(|c| c.id).collect();
            for id in &seen {
                if !ids.contains(id) {
                    retired.insert(*id);
                }
            }
            for c in &set.clusters {
                assert!(!retired.contains(&c.id), "id {} reused", c.id);
                seen.insert(c.id);
                assert!(c.alive && c.dist_tx_m > 0.0 && c.dist_rx_m > 0.0 && c.tau_clink_s >= 0.0);
                for p in [c.tx_position(&env), c.rx_position(&env)] {
                    assert!((0.0..=100.0).contains(&p[1]), "{p:?}");
                }
            }
            set = evolve_clusters(set, 0.5, 0.5, 0.3, &s, &env, &mut rng).unwrap();
        }
    }

    fn cluster(dist_tx: f64, dist_rx: f64, link: f64, tau: f64) -> TwinCluster<f64> {
        TwinCluster {
            id: 0,
            angle_tx_rad: 0.3,
            dist_tx_m: dist_tx,
            angle_rx_rad: -0.2,
            dist_rx_m: dist_rx,
            inter_cluster_dist_m: link,
            tau_clink_s: tau,
            birth_time_s: 0.0,
            alive: true,
            jitter: vec![ClusterJitter {
                tx_xy_m: [0.0; 2],
                rx_xy_m: [0.0; 2],
            }],
        }
    }

    #[test]
    fn distance_examples() {
        let env = Environment::default();
        let (delay, gain) = fray_delay_gain(&cluster(400.0, 700.0, 150.0, 1e-3), 1, 20.0, &env).unwrap();
        assert!((delay * 1500.0 - 1251.5).abs() < 1e-9);
        assert!((delay - 0.834_333_333_333_333_3).abs() < 1e-12);
        assert!(gain > 0.0);
        let (delay, _) = fray_delay_gain(&cluster(400.0, 700.0, 0.0, 0.0), 1, 20.0, &env).unwrap();
        assert!((delay * 1500.0 - 1100.0).abs() < 1e-9);
    }

    #[test]
    fn dead_cluster_and_bad_index_rejected() {
        let env = Environment::default();
        let mut c = cluster(10.0, 10.0, 1.0, 0.0);
        assert!(matches!(
            fray_delay_gain(&c, 2, 20.0, &env),
            Err(ClusterError::RayIndex { index: 2, count: 1 })
        ));
        c.alive = false;
        assert_eq!(
            fray_delay_gain(&c, 1, 20.0, &env).unwrap_err(),
            ClusterError::DeadCluster(0)
        );
    }

    #[test]
    fn link_only_adds_delay() {
        let env = Environment::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let set = initial_clusters(0.0, &stoch(), &env, &mut rng);
        for c in &set.clusters {
            let a = c.tx_offset();
            let z = c.rx_offset();
            for j in 1..=c.jitter.len() {
                let jit = c.jitter[j - 1];
                let floor = (a[0] + jit.tx_xy_m[0]).hypot(a[1] + jit.tx_xy_m[1])
                    + (z[0] + jit.rx_xy_m[0]).hypot(z[1] + jit.rx_xy_m[1]);
                let (delay, _) = fray_delay_gain(c, j, 20.0, &env).unwrap();
                assert!(delay >= floor / 1500.0);
            }
        }
    }

    #[test]
    fn history_csv_has_one_row_per_cluster() {
        let env = Environment::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let set = initial_clusters(0.0, &stoch(), &env, &mut rng);
        let mut buf = Vec::new();
        write_cluster_history_csv(std::slice::from_ref(&set), &env, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), set.len() + 1);
    }
}
