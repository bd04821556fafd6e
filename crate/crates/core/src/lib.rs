//! Quasi-deterministic channel simulator for shallow-water underwater
//! acoustic links.
//!
//! The channel transfer function is the power-weighted superposition of three
//! ray families:
//!
//! * **D-rays**: deterministic eigenrays (line of sight plus surface/bottom
//!   reflections), traced by the image method in [`dray`] or ingested from
//!   BELLHOP-style arrival files in [`arrivals`].
//! * **R-rays**: diffuse rays scattered around the first and last reflection
//!   points of each D-ray ([`rray`]).
//! * **F-rays**: rays through in-water twin clusters that appear and vanish
//!   under a birth-death process ([`fray`]).
//!
//! Doppler factors from terminal drift and surface motion ([`doppler`]) give
//! each ray a time-varying phase. [`ctf`] assembles `H(t, f)` on a grid and
//! [`stats`] estimates the temporal ACF, coherence time, Doppler PSD and
//! Doppler moments over Monte-Carlo ensembles.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below name the common instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod acoustics;
pub mod arrivals;
pub mod config;
pub mod ctf;
pub mod doppler;
pub mod dray;
pub mod export;
pub mod fray;
pub mod pipeline;
pub mod real;
pub mod rray;
pub mod stats;

pub use num_complex::Complex;

pub use crate::config::{
    correction_factors, validate_config, AnalysisConfig, ConfigError, ConfigFile, Environment,
    MotionConfig, PowerPartition, SimulationGrid, StochasticConfig, ValidatedConfig,
};
pub use crate::ctf::{ChannelRealization, CtfGrid};
pub use crate::dray::{trace_eigenrays, DRay};
pub use crate::pipeline::Simulator;
pub use crate::real::Real;
pub use crate::stats::{CorrelationCurve, DopplerMoments, DopplerSpectrum, Taper};

pub type Environment64 = Environment<f64>;
pub type Environment32 = Environment<f32>;
pub type ValidatedConfig64 = ValidatedConfig<f64>;
pub type ValidatedConfig32 = ValidatedConfig<f32>;
pub type ConfigFile64 = ConfigFile<f64>;
pub type DRay64 = DRay<f64>;
pub type DRay32 = DRay<f32>;
pub type CtfGrid64 = CtfGrid<f64>;
pub type CtfGrid32 = CtfGrid<f32>;
pub type Simulator64 = Simulator<f64>;
pub type Simulator32 = Simulator<f32>;
pub type CorrelationCurve64 = CorrelationCurve<f64>;
pub type DopplerSpectrum64 = DopplerSpectrum<f64>;
pub type DopplerMoments64 = DopplerMoments<f64>;
pub type Complex64 = Complex<f64>;
pub type Complex32 = Complex<f32>;
