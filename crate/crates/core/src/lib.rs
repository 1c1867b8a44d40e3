//! Adaptive symmetric Zassenhaus splitting for the one-dimensional
//! semiclassical Schrödinger equation
//!
//! ```text
//! ∂ₜψ = i ε ∂ₓ²ψ − i ε⁻¹ V(x) ψ,   x ∈ [a, b) periodic,
//! ```
//!
//! discretized by Fourier collocation. The step is a palindromic product of
//! exponentials of step-independent generators; local errors are estimated
//! from the classical or the symmetrized defect and drive the step size.
//!
//! All numerics are generic over [`Real`] (`f32`/`f64`); the aliases at the
//! crate root fix `f64`.

pub mod controller;
pub mod error;
pub mod expo;
pub mod grid;
pub mod operators;
pub mod problems;
pub mod reference;
pub mod scalar;
pub mod stepper;

#[cfg(test)]
mod testutil;

pub use controller::{
    integrate, integrate_fixed, local_error_estimate, propose_step, ControllerConfig, DefectKind, NullSink, RecordSink,
    StepRecord, Summary,
};
pub use error::{Error, Result};
pub use expo::{lanczos_expv, ExpCounter, KrylovStrategy, LanczosConfig};
pub use grid::{PeriodicGrid, WaveFunction};
pub use operators::{apply_symmetrized, Generator, PotentialSource, PotentialTable, SemiclassicalProblem};
pub use problems::{wave_packet, PresetName, ProblemPreset, WavePacketParams};
pub use reference::{reference_solve, DenseExponential, ReferenceOracle, ORACLE_MAX_POINTS};
pub use scalar::{Cplx, Real};
pub use stepper::{
    classical_defect, step, step_derivative, symmetrized_defect, SchemeName, SchemeSpec, Stage, StepWorkspace,
};

pub type Grid = PeriodicGrid<f64>;
pub type Wave = WaveFunction<f64>;
pub type Potential = PotentialTable<f64>;
pub type Problem = SemiclassicalProblem<f64>;
pub type Grid32 = PeriodicGrid<f32>;
pub type Wave32 = WaveFunction<f32>;
pub type Problem32 = SemiclassicalProblem<f32>;
