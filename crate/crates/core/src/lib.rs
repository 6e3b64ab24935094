//! Pseudospectral fixed-point solver for the nonlocal reaction-diffusion-transport
//! equation
//!
//! ```text
//! ∂u/∂t = -(-∂²/∂x²)^α u + b ∂u/∂x + a u + ∫ G(x-y) F(u(y,t), y) dy,   u(x,0) = u₀(x)
//! ```
//!
//! on a periodic box, together with numerical checks of the contraction
//! certificate `C = Q·l·√(T²e^{2aT}(1+2[a+|b|+1]²)+1) < 1` that makes the
//! Duhamel map a strict contraction in `W^{1,2,2}`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod duhamel;
pub mod error;
pub mod kernel;
pub mod nonlinearity;
pub mod oracle;
pub mod picard;
pub mod quadrature;
pub mod random_fields;
pub mod spectral;

pub use duhamel::{ProblemSpec, SpaceTimeField, TimeWindow};
pub use error::{Error, Result};
pub use kernel::{KernelKind, KernelSpec};
pub use picard::{
    ContractionCertificate, InitialGuess, Nontriviality, Solution, SolveConfig, SolveReport, Verdict,
};
pub use nonlinearity::{NonlinearitySpec, RateKind, SourceProfile, URange};
pub use spectral::{Complex, Grid, SpectralField, Symbol};
