//! Experiment drivers built on the chain, the diffusion and the expansion.

pub mod decay;
pub mod descent;
pub mod fit;
pub mod stats;
pub mod wasserstein;
pub mod weak;

pub use decay::{expansion_decay, DecayReport, DECAY_GRID_POINTS, RATE_FRACTION};
pub use descent::{descent_steps, descent_time_experiment, f_gap_curve, DescentRow, DescentTable};
pub use fit::{decay_rate, least_squares, log2_slope, LineFit};
pub use stats::{ks_distance_uniform, median};
pub use wasserstein::{w2_decay_experiment, w2_empirical_1d, W2DecayCurve};
pub use weak::{
    fit_weak_error_points, steps_for_horizon, uniformity_check, weak_error_experiment, UniformityReport,
    WeakErrorCurve, WeakErrorPoint, WeakErrorSettings, NOISE_FLOOR_SIGMAS,
};
