//! The MUSIC update rule.
//!
//! Each step minimizes
//! `(1-g)||W_S A_S dz||^2 + g||W_T (B_T dz - b)||^2 + l||dz||^2`,
//! trading preservation of the activations in `S` against the requested
//! changes `b` of the targets in `T`. The modes differ only in how `S`, `T`
//! and `b` are chosen; trajectories relinearize after every step.

mod config;
mod modes;
mod solve;
mod trajectory;

pub use config::{MusicConfig, PreserveScope, Subsample, TargetChange, TrustRegion, WeightScheme};
pub use modes::{
    cluster_step, draw_targets, free_step, identity_drift, informed_step, radial_baseline_step,
    targeted_step, StepResult,
};
pub use solve::{lambda_scan, log_grid, music_solve, music_solve_svd, stack_system, LambdaPoint};
pub use trajectory::{run_trajectory, Mode, Trajectory};
