use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, NlftError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NlftError {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("|a|^2 - |b|^2 deviates from 1 by {deviation:e} at s = {s}")]
    NonUnimodularIdentityViolation { s: f64, deviation: f64 },

    #[error("tail of the s-integral did not converge before S = {cutoff}")]
    TailNotConverged { cutoff: f64 },

    #[error("E(t, z) vanishes (|E| = {modulus:e}) at z = {z}")]
    PoleAtEvaluationPoint { z: Complex64, modulus: f64 },

    #[error("contour passes through a zero of E after {retries} dilations")]
    ContourThroughZero { retries: usize },

    #[error("phase unwrapping exceeded its refinement budget")]
    PhaseStepTooLarge,

    #[error("Newton iteration diverged from {start}")]
    NewtonDiverged { start: Complex64 },

    #[error("zero tracking lost at t = {t}")]
    TrackingLost { t: f64 },

    #[error("tracked zero left the search rectangle at t = {t} (z = {z})")]
    ZeroEscaped { t: f64, z: Complex64 },

    #[error("no zero of E in the box around s = {s}")]
    NoZeroInBox { s: f64 },

    #[error("box around s = {s} contains {count} zero(s) of E")]
    ZeroInBox { s: f64, count: usize },

    #[error("time {t} is not a node of the trajectory")]
    NodeNotOnTrajectory { t: f64 },

    #[error("sine fit error {sup_error:e} exceeds bound {bound:e}")]
    FitQualityTooLow { sup_error: f64, bound: f64 },
}
