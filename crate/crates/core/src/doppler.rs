//! Per-ray Doppler factors from terminal drift and sea-surface motion.

use rand::Rng;

use crate::config::MotionConfig;
use crate::dray::DRay;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    D,
    R,
    F,
}

/// Random phases and directions drawn once per realization.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerState<T> {
    /// `psi[k]` holds one phase in `[-π, π]` per surface bounce of ray `k`
    /// (position in the ray list, not the 1-based ray index).
    pub psi: Vec<Vec<T>>,
    pub tx_drift_phase: T,
    pub rx_drift_phase: T,
    pub theta_t: T,
    pub theta_r: T,
}

impl<T: Real> DopplerState<T> {
    /// Draws surface phases for every surface bounce, drift phases and drift
    /// directions. Values fixed in `motion` override the draws, which are
    /// still consumed so the stream layout does not depend on the config.
    pub fn sample<R: Rng + ?Sized>(rays: &[DRay<T>], motion: &MotionConfig<T>, rng: &mut R) -> Self {
        let pi = std::f64::consts::PI;
        let tau = std::f64::consts::TAU;
        let psi = rays
            .iter()
            .map(|r| {
                (0..r.surface_bounces)
                    .map(|_| T::lit(rng.random_range(-pi..=pi)))
                    .collect()
            })
            .collect();
        let mut angle = || T::lit(rng.random_range(0.0..tau));
        let theta_t = angle();
        let theta_r = angle();
        let tx_phase = angle();
        let rx_phase = angle();
        Self {
            psi,
            tx_drift_phase: motion.tx_drift_phase.unwrap_or(tx_phase),
            rx_drift_phase: motion.rx_drift_phase.unwrap_or(rx_phase),
            theta_t: motion.theta_t.unwrap_or(theta_t),
            theta_r: motion.theta_r.unwrap_or(theta_r),
        }
    }

    /// Drift speeds `(v_t(t), v_r(t))` of the two terminals.
    pub fn drift_speeds(&self, motion: &MotionConfig<T>, t: T) -> (T, T) {
        let v_t = motion.tx_drift_amp * (T::TAU() * motion.tx_drift_freq * t + self.tx_drift_phase).sin();
        let v_r = motion.rx_drift_amp * (T::TAU() * motion.rx_drift_freq * t + self.rx_drift_phase).sin();
        (v_t, v_r)
    }

    /// Combined drift plus surface factor of ray `k` at time `t`.
    pub fn ray_factor(&self, k: usize, ray: &DRay<T>, motion: &MotionConfig<T>, t: T, c: T) -> T {
        let (v_t, v_r) = self.drift_speeds(motion, t);
        let a_d = drift_doppler(v_t, v_r, self.theta_t, self.theta_r, ray.theta_rad, c);
        let a_sp = surface_doppler(ray.theta_rad, &self.psi[k], motion, t, c);
        total_doppler(Component::D, a_d, a_sp)
    }
}

/// `a_d = [v_t·cos(θ_i - θ_t) - v_r·cos(θ_i + θ_r)] / c`.
pub fn drift_doppler<T: Real>(v_t: T, v_r: T, theta_t: T, theta_r: T, theta_i: T, c: T) -> T {
    (v_t * (theta_i - theta_t).cos() - v_r * (theta_i + theta_r).cos()) / c
}

/// Surface-motion factor `2·v_w·sin θ_i·Σ_j sin(ψ_j + 2π f_w t) / c` with
/// `v_w = 2π f_w A_w`, one term per surface bounce (one entry of `psi`).
pub fn surface_doppler<T: Real>(theta_i: T, psi: &[T], motion: &MotionConfig<T>, t: T, c: T) -> T {
    if psi.is_empty() {
        return T::zero();
    }
    let v_w = T::TAU() * motion.wave_freq_hz * motion.wave_amp_m;
    let wt = T::TAU() * motion.wave_freq_hz * t;
    let sum: T = psi.iter().map(|&p| (p + wt).sin()).sum();
    T::lit(2.0) * v_w * theta_i.sin() * sum / c
}

/// D- and R-rays see drift and surface motion; F-rays see drift only.
pub fn total_doppler<T: Real>(component: Component, a_d: T, a_sp: T) -> T {
    match component {
        Component::D | Component::R => a_d + a_sp,
        Component::F => a_d,
    }
}
