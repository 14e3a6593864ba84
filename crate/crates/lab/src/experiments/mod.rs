//! The desk-scale experiments. Every function is deterministic for a given
//! config: work items draw from their own random stream, and parallel
//! results are collected in item order.

pub mod baseline;
pub mod gmm;
pub mod inversion;
pub mod mnist;
pub mod trajectories;

pub use baseline::{
    baseline_compare, run_baseline_experiment, BaselineConfig, BaselineExperimentConfig,
    BaselineReport, BaselineRun,
};
pub use gmm::{GmmBench, GmmBenchConfig};
pub use inversion::{
    inversion_vs_n, mse_identity, noise_scaling, run_inversion_vs_n, InversionRow,
    InversionVsNConfig, MseIdentityConfig, MseRow, NoiseBin, NoiseScalingConfig,
    NoiseScalingReport, NoiseTrial,
};
pub use mnist::{build_map, load_split, mnist_transition, MnistConfig, MnistMap, MnistTransition};
pub use trajectories::{
    compare_regimes, gmm_trajectories, informed_convergence, run_gmm_trajectories,
    ConvergenceConfig, ConvergenceReport, GmmTrajectoriesConfig, GmmTrajectoriesReport, Regime,
    RegimeComparison, RegimeConfig, RegimeRun,
};
