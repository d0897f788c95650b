//! Hausdorff dimensions of infinitely generated, non-stationary Moran
//! fractals.
//!
//! The dimension of such a fractal is the unique zero of a pressure function
//! `P(t) = Σ_i η_i log Σ_j γ_ij^t`, where `η` is the digit-frequency vector of
//! a driving sequence and `Ψ_i = (γ_i1, γ_i2, …)` are infinite contraction
//! vectors. The crate covers the full pipeline:
//!
//! - [`expansion`]: digits of reals under m-ary, β, continued-fraction,
//!   Bolyai–Rényi and generic f-expansions, with certified extraction.
//! - [`family`]: contraction vectors and their series with tail bounds.
//! - [`pressure`]: pressure evaluation, root finding, truncation ladders.
//! - [`formulas`]: closed-form dimensions and the analytic dimension map.
//! - [`measures`]: Gauss and Parry measures, Ulam discretizations.
//! - [`moran`]: a 1-D geometric realization used as an independent oracle.

pub mod error;
pub mod expansion;
pub mod family;
pub mod formulas;
pub mod frequency;
pub mod measures;
pub mod moran;
pub mod numeric;
pub mod pressure;

pub use error::{Error, Result};
pub use expansion::{DigitSequence, DigitStats, ExpansionKind};
pub use family::{ContractionFamily, SeriesValue};
pub use frequency::FrequencyVector;
pub use pressure::{PressureProblem, PressureValue};
