//! Deterministic eigenrays of the flat, constant-speed waveguide.
//!
//! Boundary reflections are unfolded into straight lines (image method), so
//! every eigenray is exact: for `n` bounces there is one surface-first and
//! one bottom-first path, alternating between the two boundaries.
//!
//! Coordinates live in the vertical range-depth plane with depth positive
//! downward. Elevation angles are positive toward the surface.

use std::io::{self, Write};

use num_complex::Complex;
use thiserror::Error;

use crate::acoustics::{AcousticsError, LossFactors};
use crate::config::Environment;
use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RayError {
    #[error(transparent)]
    Kernel(#[from] AcousticsError),
    #[error("tabulated gain needs at least one frequency")]
    EmptyGainTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Surface,
    Bottom,
}

impl Boundary {
    fn other(self) -> Self {
        match self {
            Boundary::Surface => Boundary::Bottom,
            Boundary::Bottom => Boundary::Surface,
        }
    }
}

/// How a ray's amplitude is obtained at a query frequency.
#[derive(Debug, Clone, PartialEq)]
pub enum GainModel<T> {
    /// Spreading, absorption, bottom and surface losses along the path.
    Kernel,
    /// Fixed complex amplitude from an external arrival record.
    Arrival { amplitude: T, phase_rad: T },
    /// Arrival amplitudes at several frequencies, linearly interpolated in
    /// amplitude and phase and held constant outside the table.
    Tabulated {
        freqs_hz: Vec<T>,
        amplitudes: Vec<T>,
        phases_rad: Vec<T>,
    },
}

/// One deterministic eigenray.
#[derive(Debug, Clone, PartialEq)]
pub struct DRay<T> {
    /// 1-based; 1 is the line-of-sight ray.
    pub index: usize,
    pub delay_s: T,
    pub path_len_m: T,
    pub surface_bounces: u32,
    pub bottom_bounces: u32,
    /// Launch elevation from horizontal, positive toward the surface.
    pub theta_rad: T,
    /// First reflection point relative to Tx as (range, depth) offsets.
    pub first_refl_xy_m: Option<[T; 2]>,
    /// Last reflection point relative to Rx as (range, depth) offsets.
    pub last_refl_xy_m: Option<[T; 2]>,
    pub gain_model: GainModel<T>,
}

impl<T: Real> DRay<T> {
    pub fn total_bounces(&self) -> u32 {
        self.surface_bounces + self.bottom_bounces
    }

    pub fn is_los(&self) -> bool {
        self.total_bounces() == 0
    }

    /// Boundary hit first, read from the launch direction.
    pub fn first_boundary(&self) -> Option<Boundary> {
        if self.is_los() {
            None
        } else if self.theta_rad > T::zero() {
            Some(Boundary::Surface)
        } else {
            Some(Boundary::Bottom)
        }
    }

    /// Characteristic bottom incidence angle from the vertical, `π/2 - |θ|`.
    pub fn incidence_rad(&self) -> T {
        (T::FRAC_PI_2() - self.theta_rad.abs()).max(T::zero())
    }

    /// First reflection point in absolute (range, depth) coordinates.
    pub fn first_refl_abs(&self, env: &Environment<T>) -> Option<[T; 2]> {
        self.first_refl_xy_m
            .map(|[x, y]| [x, env.tx_depth_m + y])
    }

    /// Last reflection point in absolute (range, depth) coordinates.
    pub fn last_refl_abs(&self, env: &Environment<T>) -> Option<[T; 2]> {
        self.last_refl_xy_m
            .map(|[x, y]| [env.range_m + x, env.rx_depth_m + y])
    }

    /// Complex amplitude at absolute frequency `f_hz`.
    pub fn gain(&self, f_hz: T, env: &Environment<T>) -> Result<Complex<T>, RayError> {
        match &self.gain_model {
            GainModel::Kernel => Ok(Complex::new(
                dray_gain(self, f_hz / T::lit(1000.0), env)?,
                T::zero(),
            )),
            GainModel::Arrival {
                amplitude,
                phase_rad,
            } => Ok(Complex::from_polar(*amplitude, *phase_rad)),
            GainModel::Tabulated {
                freqs_hz,
                amplitudes,
                phases_rad,
            } => {
                let (a, p) = interpolate_table(freqs_hz, amplitudes, phases_rad, f_hz)?;
                Ok(Complex::from_polar(a, p))
            }
        }
    }
}

fn interpolate_table<T: Real>(
    freqs: &[T],
    amps: &[T],
    phases: &[T],
    f: T,
) -> Result<(T, T), RayError> {
    let n = freqs.len();
    if n == 0 {
        return Err(RayError::EmptyGainTable);
    }
    if f <= freqs[0] {
        return Ok((amps[0], phases[0]));
    }
    if f >= freqs[n - 1] {
        return Ok((amps[n - 1], phases[n - 1]));
    }
    let hi = freqs.partition_point(|x| *x <= f);
    let lo = hi - 1;
    let w = (f - freqs[lo]) / (freqs[hi] - freqs[lo]);
    Ok((
        amps[lo] + w * (amps[hi] - amps[lo]),
        phases[lo] + w * (phases[hi] - phases[lo]),
    ))
}

/// Signed real amplitude of a ray at `f_khz` built from the loss kernels:
/// `L_S(D)·L_A(D, f)·L_B(φ)^b·(-1)^s`.
///
/// The ray's stored gain model is ignored; this always evaluates the kernels.
pub fn dray_gain<T: Real>(ray: &DRay<T>, f_khz: T, env: &Environment<T>) -> Result<T, AcousticsError> {
    let losses = LossFactors::evaluate(ray.path_len_m, f_khz, ray.incidence_rad(), env)?;
    Ok(losses.path_amplitude(ray.surface_bounces, ray.bottom_bounces))
}

/// Vertical distance from a terminal at `depth` to `boundary`.
fn leg<T: Real>(boundary: Boundary, depth: T, env: &Environment<T>) -> T {
    match boundary {
        Boundary::Surface => depth,
        Boundary::Bottom => env.water_depth_m - depth,
    }
}

fn boundary_offset<T: Real>(boundary: Boundary, depth: T, env: &Environment<T>) -> T {
    match boundary {
        Boundary::Surface => -depth,
        Boundary::Bottom => env.water_depth_m - depth,
    }
}

fn bounce_counts(first: Boundary, n: u32) -> (u32, u32) {
    let (lead, trail) = (n.div_ceil(2), n / 2);
    match first {
        Boundary::Surface => (lead, trail),
        Boundary::Bottom => (trail, lead),
    }
}

/// Builds an `n`-bounce eigenray from its launch boundary and unfolded
/// geometry. `theta_abs` is the magnitude of the elevation angle.
pub(crate) fn reflected_ray<T: Real>(
    env: &Environment<T>,
    first: Boundary,
    n: u32,
    tan_theta_abs: T,
) -> ([T; 2], [T; 2]) {
    let last = if n % 2 == 1 { first } else { first.other() };
    let x_a = leg(first, env.tx_depth_m, env) / tan_theta_abs;
    let x_z = leg(last, env.rx_depth_m, env) / tan_theta_abs;
    (
        [x_a, boundary_offset(first, env.tx_depth_m, env)],
        [-x_z, boundary_offset(last, env.rx_depth_m, env)],
    )
}

/// Line-of-sight ray plus, for every bounce count `1..=max_total_bounces`,
/// the surface-first and bottom-first eigenrays. Sorted by delay with ties
/// resolved surface-first; indices are assigned after sorting.
pub fn trace_eigenrays<T: Real>(env: &Environment<T>, max_total_bounces: usize) -> Vec<DRay<T>> {
    let range = env.range_m;
    let c = env.c_water_mps;
    let mut rays = Vec::with_capacity(1 + 2 * max_total_bounces);

    let los_len = range.hypot(env.rx_depth_m - env.tx_depth_m);
    rays.push((
        0u8,
        DRay {
            index: 0,
            delay_s: los_len / c,
            path_len_m: los_len,
            surface_bounces: 0,
            bottom_bounces: 0,
            theta_rad: (env.tx_depth_m - env.rx_depth_m).atan2(range),
            first_refl_xy_m: None,
            last_refl_xy_m: None,
            gain_model: GainModel::Kernel,
        },
    ));

    for n in 1..=max_total_bounces as u32 {
        for (order, first) in [(1u8, Boundary::Surface), (2u8, Boundary::Bottom)] {
            let last = if n % 2 == 1 { first } else { first.other() };
            let dz = leg(first, env.tx_depth_m, env)
                + T::from_u32(n - 1).unwrap() * env.water_depth_m
                + leg(last, env.rx_depth_m, env);
            let len = range.hypot(dz);
            let theta = dz.atan2(range);
            let (first_xy, last_xy) = {
                let x_a = range * leg(first, env.tx_depth_m, env) / dz;
                let x_z = range * leg(last, env.rx_depth_m, env) / dz;
                (
                    [x_a, boundary_offset(first, env.tx_depth_m, env)],
                    [-x_z, boundary_offset(last, env.rx_depth_m, env)],
                )
            };
            let (s, b) = bounce_counts(first, n);
            rays.push((
                order,
                DRay {
                    index: 0,
                    delay_s: len / c,
                    path_len_m: len,
                    surface_bounces: s,
                    bottom_bounces: b,
                    theta_rad: match first {
                        Boundary::Surface => theta,
                        Boundary::Bottom => -theta,
                    },
                    first_refl_xy_m: Some(first_xy),
                    last_refl_xy_m: Some(last_xy),
                    gain_model: GainModel::Kernel,
                },
            ));
        }
    }

    rays.sort_by(|(oa, a), (ob, b)| a.delay_s.partial_cmp(&b.delay_s).unwrap().then(oa.cmp(ob)));
    rays.into_iter()
        .enumerate()
        .map(|(k, (_, mut r))| {
            r.index = k + 1;
            r
        })
        .collect()
}

fn fmt_opt<T: Real>(v: Option<T>) -> String {
    v.map(|x| format!("{x:.8e}")).unwrap_or_default()
}

/// Writes the ray table as CSV with columns
/// `index,delay_s,s_i,b_i,theta_rad,path_len_m,x_A,y_A,x_Z,y_Z`. Reflection
/// point cells are empty for the line-of-sight ray.
pub fn write_rays_csv<T: Real, W: Write>(rays: &[DRay<T>], mut w: W) -> io::Result<()> {
    writeln!(w, "index,delay_s,s_i,b_i,theta_rad,path_len_m,x_A,y_A,x_Z,y_Z")?;
    for r in rays {
        writeln!(
            w,
            "{},{:.8e},{},{},{:.8e},{:.8e},{},{},{},{}",
            r.index,
            r.delay_s,
            r.surface_bounces,
            r.bottom_bounces,
            r.theta_rad,
            r.path_len_m,
            fmt_opt(r.first_refl_xy_m.map(|p| p[0])),
            fmt_opt(r.first_refl_xy_m.map(|p| p[1])),
            fmt_opt(r.last_refl_xy_m.map(|p| p[0])),
            fmt_opt(r.last_refl_xy_m.map(|p| p[1])),
        )?;
    }
    Ok(())
}

/// Largest `|s - b|` on an alternating bounce sequence.
pub fn alternates(surface: u32, bottom: u32) -> bool {
    surface.abs_diff(bottom) <= 1
}

/// `2s + 2b ≤ 8`, the bounce budget observed in shallow-water trials.
pub fn within_bounce_budget(surface: u32, bottom: u32) -> bool {
    2 * surface + 2 * bottom <= 8
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Environment<f64> {
        Environment::default()
    }

    #[test]
    fn default_scenario_has_nine_rays() {
        let rays = trace_eigenrays(&env(), 4);
        assert_eq!(rays.len(), 9);
        assert!(rays[0].is_los());
        assert!((rays[0].delay_s - 1.000_088_884_938_622_7).abs() < 1e-12);
        for (k, r) in rays.iter().enumerate() {
            assert_eq!(r.index, k + 1);
            assert!((r.delay_s - r.path_len_m / 1500.0).abs() < 1e-12);
            assert!(within_bounce_budget(r.surface_bounces, r.bottom_bounces));
            assert!(alternates(r.surface_bounces, r.bottom_bounces));
            assert!(r.theta_rad.abs() < std::f64::consts::FRAC_PI_2);
        }
    }

    #[test]
    fn single_bounce_tie_breaks_surface_first() {
        let rays = trace_eigenrays(&env(), 4);
        let (a, b) = (&rays[1], &rays[2]);
        assert_eq!((a.surface_bounces, a.bottom_bounces), (1, 0));
        assert_eq!((b.surface_bounces, b.bottom_bounces), (0, 1));
        assert_eq!(a.delay_s, b.delay_s);
        assert!((a.path_len_m - 1_503.329_637_837_290_9).abs() < 1e-9);
        assert!((a.delay_s - 1.002_219_758_558_194).abs() < 1e-12);
    }

    #[test]
    fn reflection_points_sit_on_boundaries() {
        let e = env();
        for r in trace_eigenrays(&e, 4).iter().skip(1) {
            let a = r.first_refl_abs(&e).unwrap();
            let z = r.last_refl_abs(&e).unwrap();
            assert!(a[1] == 0.0 || a[1] == e.water_depth_m, "{a:?}");
            assert!(z[1] == 0.0 || z[1] == e.water_depth_m, "{z:?}");
            assert!(a[0] > 0.0 && a[0] <= z[0] && z[0] < e.range_m);
            match r.first_boundary().unwrap() {
                Boundary::Surface => assert_eq!(a[1], 0.0),
                Boundary::Bottom => assert_eq!(a[1], e.water_depth_m),
            }
        }
    }

    #[test]
    fn single_bounce_points_coincide() {
        let e = env();
        let rays = trace_eigenrays(&e, 1);
        for r in &rays[1..] {
            let a = r.first_refl_abs(&e).unwrap();
            let z = r.last_refl_abs(&e).unwrap();
            assert!((a[0] - z[0]).abs() < 1e-9);
            let d_a = r.first_refl_xy_m.unwrap();
            let d_z = r.last_refl_xy_m.unwrap();
            let total = d_a[0].hypot(d_a[1]) + d_z[0].hypot(d_z[1]);
            assert!((total - r.path_len_m).abs() < 1e-9);
        }
    }

    #[test]
    fn los_gain_matches_kernel_composition() {
        let e = env();
        let los = &trace_eigenrays(&e, 4)[0];
        let g = dray_gain(los, 0.0, &e).unwrap();
        assert!((g - 6.662_621_170_055_54e-4).abs() < 1e-15);
    }

    #[test]
    fn surface_bounce_flips_sign() {
        let e = env();
        for r in trace_eigenrays(&e, 4) {
            let g = dray_gain(&r, 20.0, &e).unwrap();
            let expected_sign = if r.surface_bounces % 2 == 1 { -1.0 } else { 1.0 };
            assert_eq!(g.signum(), expected_sign);
        }
    }

    #[test]
    fn gain_magnitude_falls_with_frequency() {
        let e = env();
        for r in trace_eigenrays(&e, 4) {
            let mut prev = f64::INFINITY;
            for k in 0..50 {
                let g = dray_gain(&r, k as f64 * 2.0, &e).unwrap().abs();
                assert!(g < prev);
                prev = g;
            }
        }
    }

    #[test]
    fn no_bounces_means_los_only() {
        let rays = trace_eigenrays(&env(), 0);
        assert_eq!(rays.len(), 1);
        assert!(rays[0].is_los());
    }

    #[test]
    fn tabulated_gain_interpolates() {
        let mut r = trace_eigenrays(&env(), 0).remove(0);
        r.gain_model = GainModel::Tabulated {
            freqs_hz: vec![10_000.0, 20_000.0],
            amplitudes: vec![1.0, 3.0],
            phases_rad: vec![0.0, 0.5],
        };
        let g = r.gain(15_000.0, &env()).unwrap();
        assert!((g - Complex::from_polar(2.0, 0.25)).norm() < 1e-15);
        let g = r.gain(5_000.0, &env()).unwrap();
        assert!((g - Complex::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn csv_rows() {
        let rays = trace_eigenrays(&env(), 4);
        let mut buf = Vec::new();
        write_rays_csv(&rays, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 10);
        assert!(lines[1].ends_with(",,,,"));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn f32_tracer_agrees() {
        let e32 = Environment::<f32>::default();
        let r32 = trace_eigenrays(&e32, 4);
        let r64 = trace_eigenrays(&env(), 4);
        for (a, b) in r32.iter().zip(&r64) {
            assert!(((a.delay_s as f64) - b.delay_s).abs() < 1e-6);
        }
    }
}
