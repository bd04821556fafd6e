//! Diffuse scattering rays around the boundary reflection points of each
//! reflected D-ray.
//!
//! Scatterers are drawn once per realization and stay frozen over time; any
//! time variation of these rays comes from the parent ray's Doppler phase.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::acoustics::{AcousticsError, LossFactors};
use crate::config::{Environment, StochasticConfig};
use crate::dray::DRay;
use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatterError {
    #[error("ray {0} has no reflection point to scatter around")]
    NoReflection(usize),
    #[error("invalid scatter spread: {0}")]
    Spread(String),
}

/// Gaussian offsets of one diffuse ray around the parent's first (A) and
/// last (Z) reflection points, plus the log-scale perturbation of the middle
/// segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPair<T> {
    pub parent_index: usize,
    pub ray_index: usize,
    pub offset_a_xy_m: [T; 2],
    pub offset_z_xy_m: [T; 2],
    pub delta_d: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RRayPath<T> {
    pub parent_index: usize,
    pub ray_index: usize,
    pub dist_first_m: T,
    pub dist_last_m: T,
    pub dist_mid_m: T,
    pub delay_s: T,
    /// Set when `D_i - d_A - d_Z` went negative and the middle segment was
    /// clamped to zero.
    pub clamped: bool,
}

impl<T: Real> RRayPath<T> {
    pub fn total_m(&self) -> T {
        self.dist_first_m + self.dist_last_m + self.dist_mid_m
    }
}

fn normal(sigma: f64) -> Result<Normal<f64>, ScatterError> {
    Normal::new(0.0, sigma).map_err(|e| ScatterError::Spread(format!("{e} (sigma = {sigma})")))
}

/// Draws `n_scatter_rays` scatter pairs for a reflected ray.
pub fn sample_scatterers<T: Real, R: Rng + ?Sized>(
    dray: &DRay<T>,
    stoch: &StochasticConfig<T>,
    rng: &mut R,
) -> Result<Vec<ScatterPair<T>>, ScatterError> {
    if dray.first_refl_xy_m.is_none() || dray.last_refl_xy_m.is_none() {
        return Err(ScatterError::NoReflection(dray.index));
    }
    let nx = normal(stoch.sigma_x_m.as_f64())?;
    let ny = normal(stoch.sigma_y_m.as_f64())?;
    let nd = normal(stoch.sigma_d.as_f64())?;
    let mut draw = |d: &Normal<f64>| T::lit(d.sample(rng));
    Ok((1..=stoch.n_scatter_rays)
        .map(|j| {
            let offset_a_xy_m = [draw(&nx), draw(&ny)];
            let offset_z_xy_m = [draw(&nx), draw(&ny)];
            let delta_d = draw(&nd);
            ScatterPair {
                parent_index: dray.index,
                ray_index: j,
                offset_a_xy_m,
                offset_z_xy_m,
                delta_d,
            }
        })
        .collect())
}

/// Three-segment path of one diffuse ray: Tx to the scatterer near A, the
/// scatterer near Z to Rx, and (for multi-bounce parents) the perturbed
/// remainder `(D_i - d_A - d_Z)·e^{Δd}`.
pub fn rray_geometry<T: Real>(
    dray: &DRay<T>,
    pair: &ScatterPair<T>,
    c_water_mps: T,
) -> Result<RRayPath<T>, ScatterError> {
    let (a, z) = match (dray.first_refl_xy_m, dray.last_refl_xy_m) {
        (Some(a), Some(z)) => (a, z),
        _ => return Err(ScatterError::NoReflection(dray.index)),
    };
    let dist_first_m = (a[0] + pair.offset_a_xy_m[0]).hypot(a[1] + pair.offset_a_xy_m[1]);
    let dist_last_m = (z[0] + pair.offset_z_xy_m[0]).hypot(z[1] + pair.offset_z_xy_m[1]);
    let (dist_mid_m, clamped) = if dray.total_bounces() == 1 {
        (T::zero(), false)
    } else {
        let base = dray.path_len_m - dist_first_m - dist_last_m;
        if base < T::zero() {
            (T::zero(), true)
        } else {
            (base * pair.delta_d.exp(), false)
        }
    };
    let total = dist_first_m + dist_last_m + dist_mid_m;
    Ok(RRayPath {
        parent_index: dray.index,
        ray_index: pair.ray_index,
        dist_first_m,
        dist_last_m,
        dist_mid_m,
        delay_s: total / c_water_mps,
        clamped,
    })
}

/// Signed amplitude `L_S(d)·L_A(d, f)·L_B(φ_i)^b·(-1)^s` of a diffuse ray,
/// with the parent's bounce counts and incidence angle.
pub fn rray_gain<T: Real>(
    path: &RRayPath<T>,
    parent: &DRay<T>,
    f_khz: T,
    env: &Environment<T>,
) -> Result<T, AcousticsError> {
    let losses = LossFactors::evaluate(path.total_m(), f_khz, parent.incidence_rad(), env)?;
    Ok(losses.path_amplitude(parent.surface_bounces, parent.bottom_bounces))
}
