//! Occurrence-time measures for detector effects and the scattering time delay.
//!
//! Units: ħ = 1 throughout; the particle mass is configurable. Quantities live
//! on a uniform [`EnergyGrid`] whose Nyquist time `T* = π/h` bounds every
//! time integral.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod bessel;
pub mod delay;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod povm;
pub mod radial;
pub mod shell;
pub mod stencil;

pub use error::{Error, Result};
pub use delay::{DelayExperiment, DelayReport, TimeAxis, WavePacket};
pub use grid::{inner_product, EnergyGrid, KernelOperator, Section};
pub use povm::{Connection, EffectKernel, IntervalMeasureKernel, NormalizedKernel, TimeInterval, TimeWindow};
pub use radial::{PhaseShiftTable, PotentialKind, PotentialSpec, RadialSettings};
pub use shell::{OutgoingSelector, ShellSpec, SignConvention};
