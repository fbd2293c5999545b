//! Nonnegativity auditing and pseudo-spectral simulation for systems
//!
//! ```text
//! u_t = A Δ³u + Σᵢ Γⁱ ∂u/∂xᵢ − F(u),   u: ℝᵈ → ℝᴺ,
//! ```
//!
//! on a periodic box. See the README for the layout of each module.

pub mod audit;
pub mod error;
pub mod exec;
pub mod expm;
pub mod field;
pub mod grid;
pub mod matrix;
pub mod ode;
pub mod probes;
pub mod spectral;
pub mod stepper;
pub mod system;

pub use audit::{audit, AuditReport, SignSampler};
pub use error::{Error, Result};
pub use exec::Exec;
pub use field::Field;
pub use grid::Grid;
pub use matrix::MatrixN;
pub use spectral::{build_propagator, forward, inverse, ModePropagator, SpectrumField};
pub use stepper::{run, RunConfig, TimeSeries};
pub use system::{load_system, serialize_system, ReactionSpec, SystemSpec};
