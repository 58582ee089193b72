//! Numerical toolkit for the non-linear Fourier transform of real Dirac
//! systems.
//!
//! The pipeline runs potential → [`propagator`] → [`scattering`] data, then
//! branches into the spectral diagnostics ([`spectral`]), resonance dynamics
//! ([`zeros`]) and the convergence experiments ([`convergence`]). All reports
//! are [`report::DiagnosticReport`] values that serialize through [`io`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod error;
pub mod extended;
pub mod free_case;
pub mod io;
pub mod potential;
pub mod propagator;
pub mod quadrature;
pub mod report;
pub mod scattering;
pub mod spectral;
pub mod zeros;

pub use num_complex::Complex64;

pub use error::{NlftError, Result};
pub use potential::{Potential, PotentialKind, Preset, Segment};
pub use propagator::{propagate, step_exact, transfer, Propagation, PropagationOptions, TransferMatrix};
pub use report::{Check, CheckKind, DiagnosticReport};
pub use scattering::{ab_coefficients, hermite_biehler, nlft_partial, ABPair, ScatteringPair};
pub use spectral::{estimate_w, SpectralWeight, SquareBox};
pub use zeros::{locate_zeros, track_zero, Rect, ZeroTrajectory};
