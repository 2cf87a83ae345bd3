//! Numerical scattering for the time-decaying harmonic oscillator
//! `H0(t) = p^2/2 + k(t) x^2/2` perturbed by a short-range potential.
//!
//! The crate builds the free propagators from exact quadratic factors,
//! evolves probe wavepackets through the interaction window by Strang
//! splitting, extracts high-velocity scattering data, and inverts the
//! resulting X-ray sinogram by filtered backprojection.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gauss;
pub mod grid;
pub mod interprop;
pub mod io;
pub mod model;
pub mod quad_prop;
pub mod quadrature;
pub mod recon;
pub mod scatter;

pub use error::{Error, Result};
pub use gauss::{GaussianState, SymplecticMap};
pub use grid::{GridSpec, Space, WaveFunction};
pub use model::{DecayParams, PotentialComponent, PotentialSpec};
pub use num_complex::Complex64;
