//! Scalar loss kernels shared by all ray families.
//!
//! Frequencies passed to these kernels are in kHz and distances in meters.

use num_complex::Complex;
use thiserror::Error;

use crate::config::Environment;
use crate::real::Real;

/// Amplitude factor applied at each specular surface reflection.
pub const SURFACE_REFLECTION: f64 = -1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcousticsError {
    #[error("frequency must be non-negative, got {0} kHz")]
    NegativeFrequency(f64),
    #[error("distance must be non-negative, got {0} m")]
    NegativeDistance(f64),
    #[error("spreading loss needs a positive distance, got {0} m")]
    NonPositiveDistance(f64),
    #[error("incidence angle must lie in [0, pi/2], got {0} rad")]
    AngleOutOfRange(f64),
}

/// Per-path loss factors, all dimensionless amplitude multipliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossFactors<T> {
    pub spreading: T,
    pub absorption: T,
    pub bottom_refl_mag: T,
    pub surface_refl: T,
}

impl<T: Real> LossFactors<T> {
    /// Evaluates every factor for a path of `d_m` meters at `f_khz` hitting
    /// the bottom at incidence `phi_rad`.
    pub fn evaluate(
        d_m: T,
        f_khz: T,
        phi_rad: T,
        env: &Environment<T>,
    ) -> Result<Self, AcousticsError> {
        Ok(Self {
            spreading: spreading_loss(d_m, env.spreading_beta)?,
            absorption: absorption_loss(d_m, f_khz)?,
            bottom_refl_mag: bottom_reflection(phi_rad, env)?,
            surface_refl: T::lit(SURFACE_REFLECTION),
        })
    }

    /// `L_S · L_A · L_B^bottom · L_R^surface`.
    pub fn path_amplitude(&self, surface_bounces: u32, bottom_bounces: u32) -> T {
        self.spreading
            * self.absorption
            * self.bottom_refl_mag.powi(bottom_bounces as i32)
            * self.surface_refl.powi(surface_bounces as i32)
    }
}

/// Thorp absorption coefficient in dB/km for `f_khz` in kHz.
pub fn thorp_alpha<T: Real>(f_khz: T) -> Result<T, AcousticsError> {
    if !(f_khz >= T::zero()) {
        return Err(AcousticsError::NegativeFrequency(f_khz.as_f64()));
    }
    let f2 = f_khz * f_khz;
    Ok(T::lit(0.11) * f2 / (T::one() + f2)
        + T::lit(44.0) * f2 / (T::lit(4100.0) + f2)
        + T::lit(2.75e-4) * f2
        + T::lit(0.003))
}

/// Amplitude factor `10^(-d·α(f)/20000)` over `d_m` meters.
pub fn absorption_loss<T: Real>(d_m: T, f_khz: T) -> Result<T, AcousticsError> {
    if !(d_m >= T::zero()) {
        return Err(AcousticsError::NegativeDistance(d_m.as_f64()));
    }
    let alpha = thorp_alpha(f_khz)?;
    Ok(absorption_with_alpha(d_m, alpha))
}

/// Same as [`absorption_loss`] with a precomputed Thorp coefficient.
#[inline]
pub(crate) fn absorption_with_alpha<T: Real>(d_m: T, alpha_db_per_km: T) -> T {
    T::lit(10.0).powf(-d_m * alpha_db_per_km / T::lit(20_000.0))
}

/// Geometric spreading amplitude `1/sqrt(d^β)`.
pub fn spreading_loss<T: Real>(d_m: T, beta: T) -> Result<T, AcousticsError> {
    if !(d_m > T::zero()) {
        return Err(AcousticsError::NonPositiveDistance(d_m.as_f64()));
    }
    Ok(T::one() / d_m.powf(beta).sqrt())
}

/// Magnitude of the fluid-fluid bottom reflection coefficient at incidence
/// `phi_rad` measured from the vertical.
///
/// Past the critical angle `arcsin(c_w/c_b)` the radicand goes negative and
/// the coefficient has unit modulus.
pub fn bottom_reflection<T: Real>(phi_rad: T, env: &Environment<T>) -> Result<T, AcousticsError> {
    reflection_magnitude(
        phi_rad,
        env.rho_bottom / env.rho_water,
        env.c_water_mps / env.c_bottom_mps,
    )
}

/// [`bottom_reflection`] with explicit density ratio `ρ_b/ρ_w` and speed
/// ratio `c_w/c_b`.
pub fn reflection_magnitude<T: Real>(
    phi_rad: T,
    density_ratio: T,
    speed_ratio: T,
) -> Result<T, AcousticsError> {
    if !(phi_rad >= T::zero() && phi_rad <= T::FRAC_PI_2()) {
        return Err(AcousticsError::AngleOutOfRange(phi_rad.as_f64()));
    }
    let (sin_phi, cos_phi) = phi_rad.sin_cos();
    let radicand = Complex::new(speed_ratio * speed_ratio - sin_phi * sin_phi, T::zero());
    let root = radicand.sqrt();
    let a = Complex::new(density_ratio * cos_phi, T::zero());
    let den = (a + root).norm();
    if den == T::zero() {
        return Ok(T::one());
    }
    Ok((a - root).norm() / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn thorp_values() {
        assert_eq!(thorp_alpha(0.0_f64).unwrap(), 0.003);
        assert!(rel(thorp_alpha(10.0_f64).unwrap(), 1.187_029_938_708_156_7) < 1e-12);
        assert!(rel(thorp_alpha(50.0_f64).unwrap(), 17.467_122_684_259_63) < 1e-12);
        assert!(thorp_alpha(-1.0_f64).is_err());
    }

    #[test]
    fn thorp_increasing_on_band() {
        let mut prev = thorp_alpha(0.0_f64).unwrap();
        for k in 1..=10_000 {
            let a = thorp_alpha(k as f64 * 0.01).unwrap();
            assert!(a > prev, "not increasing at {} kHz", k as f64 * 0.01);
            prev = a;
        }
    }

    #[test]
    fn absorption_values() {
        assert_eq!(absorption_loss(0.0_f64, 37.0).unwrap(), 1.0);
        assert!(rel(absorption_loss(1000.0_f64, 10.0).unwrap(), 0.872_265_113_453_954_2) < 1e-12);
        assert!(absorption_loss(-1.0_f64, 10.0).is_err());
        assert!(absorption_loss(200.0_f64, 10.0).unwrap() < absorption_loss(100.0, 10.0).unwrap());
    }

    #[test]
    fn spreading_values() {
        assert_eq!(spreading_loss(1.0_f64, 1.7).unwrap(), 1.0);
        assert!((spreading_loss(100.0_f64, 2.0).unwrap() - 0.01).abs() < 1e-15);
        assert!((spreading_loss(100.0_f64, 1.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(spreading_loss(0.0_f64, 2.0).is_err());
    }

    #[test]
    fn bottom_reflection_values() {
        let env = Environment::<f64>::default();
        let normal = bottom_reflection(0.0, &env).unwrap();
        assert!((normal - 0.5625 / 2.4375).abs() < 1e-15);
        let oblique = bottom_reflection(std::f64::consts::FRAC_PI_4, &env).unwrap();
        assert!((oblique - 0.265_542_834_280_529_5).abs() < 1e-12);
        assert!(bottom_reflection(-0.1, &env).is_err());
        assert!(bottom_reflection(1.6, &env).is_err());
        let grazing = bottom_reflection(std::f64::consts::FRAC_PI_2, &env).unwrap();
        assert!((grazing - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_factors_compose() {
        let env = Environment::<f64>::default();
        let lf = LossFactors::evaluate(1200.0, 20.0, 1.2, &env).unwrap();
        let a = lf.path_amplitude(1, 2);
        let expected = -spreading_loss(1200.0, 2.0).unwrap()
            * absorption_loss(1200.0, 20.0).unwrap()
            * bottom_reflection(1.2, &env).unwrap().powi(2);
        assert!((a - expected).abs() < 1e-18);
    }

    #[test]
    fn f32_kernels_track_f64() {
        let a32 = thorp_alpha(10.0_f32).unwrap() as f64;
        assert!(rel(a32, thorp_alpha(10.0_f64).unwrap()) < 1e-6);
    }

    proptest! {
        #[test]
        fn beyond_critical_is_total(frac in 0.0_f64..=1.0) {
            let env = Environment::<f64>::default();
            let crit = (env.c_water_mps / env.c_bottom_mps).asin();
            let phi = crit + 1e-9 + frac * (std::f64::consts::FRAC_PI_2 - crit - 1e-9);
            let m = bottom_reflection(phi, &env).unwrap();
            prop_assert!((m - 1.0).abs() < 1e-12);
        }

        #[test]
        fn reflection_in_unit_interval(phi in 0.0_f64..=std::f64::consts::FRAC_PI_2,
                                       rho in 0.5_f64..3.0, ratio in 0.5_f64..1.5) {
            let m = reflection_magnitude(phi, rho, ratio).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&m));
        }

        #[test]
        fn absorption_is_multiplicative(d1 in 0.0_f64..5000.0, d2 in 0.0_f64..5000.0, f in 0.0_f64..100.0) {
            let lhs = absorption_loss(d1 + d2, f).unwrap();
            let rhs = absorption_loss(d1, f).unwrap() * absorption_loss(d2, f).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn spreading_inverts_power(d in 1e-3_f64..1e5, beta in 0.5_f64..3.0) {
            let l = spreading_loss(d, beta).unwrap();
            prop_assert!((l * l * d.powf(beta) - 1.0).abs() < 1e-12);
        }
    }
}
