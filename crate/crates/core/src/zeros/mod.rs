//! Resonances: zeros of `E(t, ·)` in the lower half-plane, the inner
//! function `θ = E♯/E` whose zeros are their conjugates, and the laws that
//! govern their motion in `t`.

mod contour;
mod detect;
mod fit;
mod inner;
mod locate;
mod oracle;
mod track;

pub use contour::{winding_count, Rect, DEFAULT_CONTOUR_POINTS};
pub use detect::{lemma1_detect, lemma1_detect_with, Ball, DEFAULT_EPS0};
pub use fit::{exp_fit, sine_fit, ExpFit, GammaScale, SineFit};
pub use inner::{
    newton_zero, theta_eval, theta_ode_residual, BlaschkeProduct, InnerFunctionValue, NewtonOutcome, DEFAULT_POLE_TOL,
};
pub use locate::{locate_zeros, Anomaly, LocatedZeros, DEFAULT_NEWTON_TOL};
pub use oracle::grid_minimum_zeros;
pub use track::{
    increments, riccati_residual, track_zero, velocity_residual, zero_velocity, BoxStatus, TrackConfig, ZeroTrajectory,
};
