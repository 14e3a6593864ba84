//! Trajectory regimes on the synthetic benchmark.

use music_core::metrics::{MetricsSummary, Path, TrajectoryMetrics};
use music_core::music::{run_trajectory, Mode, MusicConfig, Subsample, Trajectory, TrustRegion};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmm::{sq_dist, GmmBench, GmmBenchConfig};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Every trajectory is attracted to the prototype nearest one mixture
    /// mean.
    InformedConvergence,
    /// Each step targets one prototype drawn at random from the units of one
    /// mixture component.
    ClusterExploration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeConfig {
    pub trajectories: usize,
    pub steps: usize,
    /// Mixture component holding the target(s).
    pub component: usize,
    pub music: MusicConfig,
    /// Start points are mixture draws under this seed; trajectory `i` runs
    /// with MUSIC seed `seed + i`, so equal seeds pair runs across regimes.
    pub seed: u64,
}

impl RegimeConfig {
    /// Both regimes share ridge, trust radius and step noise. The prototypes
    /// of this benchmark hug a plane, which leaves most off-plane directions
    /// unconstrained by preservation; a unit ridge damps those modes, which
    /// otherwise make the clipped steps zigzag. Exploration removes a larger
    /// fraction of the drawn target's activation so its steps fill the trust
    /// radius.
    pub fn for_regime(regime: Regime) -> Self {
        let shared = MusicConfig {
            lambda: 1.0,
            trust: TrustRegion::Absolute(0.15),
            sigma_z: 0.005,
            ..MusicConfig::default()
        };
        let music = match regime {
            Regime::InformedConvergence => shared,
            Regime::ClusterExploration => MusicConfig {
                eta: 0.5,
                subsample: Subsample::SingleRandom,
                ..shared
            },
        };
        Self {
            trajectories: 30,
            steps: 200,
            component: 0,
            music,
            seed: 100,
        }
    }
}

impl Default for RegimeConfig {
    fn default() -> Self {
        Self::for_regime(Regime::InformedConvergence)
    }
}

#[derive(Debug, Clone)]
pub struct RegimeRun {
    pub regime: Regime,
    pub mode: Mode,
    pub trajectories: Vec<Trajectory>,
    pub metrics: Vec<TrajectoryMetrics>,
    pub summary: MetricsSummary,
}

pub fn regime_mode(bench: &GmmBench, regime: Regime, component: usize) -> Mode {
    match regime {
        Regime::InformedConvergence => Mode::Informed {
            target: bench.unit_near_mean(component),
        },
        Regime::ClusterExploration => Mode::Cluster {
            targets: bench.component_units(component),
        },
    }
}

/// Runs `cfg.trajectories` trajectories from mixture draws of every
/// component and aggregates their metrics.
pub fn gmm_trajectories(bench: &GmmBench, regime: Regime, cfg: &RegimeConfig) -> Result<RegimeRun> {
    let mode = regime_mode(bench, regime, cfg.component);
    let (starts, _) = bench.sample(cfg.trajectories, cfg.seed)?;
    let trajectories: Vec<Trajectory> = starts
        .par_iter()
        .enumerate()
        .map(|(i, z0)| {
            let music = MusicConfig {
                seed: cfg.music.seed.wrapping_add(cfg.seed).wrapping_add(i as u64),
                ..cfg.music.clone()
            };
            run_trajectory(z0, &bench.protos, &mode, &music, cfg.steps)
        })
        .collect::<std::result::Result<_, _>>()?;
    let metrics: Vec<TrajectoryMetrics> = trajectories
        .iter()
        .map(|t| TrajectoryMetrics::compute(&Path::from(t)))
        .collect();
    let summary = MetricsSummary::aggregate(&metrics);
    Ok(RegimeRun {
        regime,
        mode,
        trajectories,
        metrics,
        summary,
    })
}

/// Fraction of pairs in which `better(informed, cluster)` holds; pairs where
/// either side is undefined count as losses.
fn win_rate(
    informed: &[TrajectoryMetrics],
    cluster: &[TrajectoryMetrics],
    better: impl Fn(&TrajectoryMetrics, &TrajectoryMetrics) -> Option<bool>,
) -> f64 {
    let wins = informed
        .iter()
        .zip(cluster)
        .filter(|(i, c)| better(i, c).unwrap_or(false))
        .count();
    wins as f64 / informed.len().max(1) as f64
}

/// Paired comparison of the two regimes from identical start points and
/// seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeComparison {
    pub informed: MetricsSummary,
    pub cluster: MetricsSummary,
    /// Pairs with a lower transition rate under informed convergence.
    pub transition_win_rate: f64,
    /// Pairs with a longer median dwell under informed convergence.
    pub dwell_win_rate: f64,
    /// Pairs with a higher geodesic efficiency under informed convergence.
    pub efficiency_win_rate: f64,
}

pub fn compare_regimes(informed: &RegimeRun, cluster: &RegimeRun) -> RegimeComparison {
    let (i, c) = (&informed.metrics, &cluster.metrics);
    RegimeComparison {
        informed: informed.summary.clone(),
        cluster: cluster.summary.clone(),
        transition_win_rate: win_rate(i, c, |a, b| Some(a.transition_rate < b.transition_rate)),
        dwell_win_rate: win_rate(i, c, |a, b| Some(a.dwell.median > b.dwell.median)),
        efficiency_win_rate: win_rate(i, c, |a, b| {
            Some(a.geodesic_efficiency? > b.geodesic_efficiency?)
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub runs: usize,
    pub steps: usize,
    pub component: usize,
    /// Noise channels are switched off before running.
    pub music: MusicConfig,
    pub seed: u64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            runs: 100,
            steps: 100,
            component: 0,
            music: RegimeConfig::for_regime(Regime::InformedConvergence).music,
            seed: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub target: usize,
    /// Distance to the target prototype along each run.
    pub distances: Vec<Vec<f64>>,
    /// Runs whose distance strictly decreases at every step.
    pub monotone: usize,
}

impl ConvergenceReport {
    pub fn monotone_fraction(&self) -> f64 {
        self.monotone as f64 / self.distances.len().max(1) as f64
    }
}

/// Noise-free informed runs from mixture draws toward one prototype.
pub fn informed_convergence(
    bench: &GmmBench,
    cfg: &ConvergenceConfig,
) -> Result<ConvergenceReport> {
    let target = bench.unit_near_mean(cfg.component);
    let mode = Mode::Informed { target };
    let music = cfg.music.noiseless();
    let (starts, _) = bench.sample(cfg.runs, cfg.seed)?;
    let w = bench.protos.weight(target);
    let distances: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|z0| {
            let traj = run_trajectory(z0, &bench.protos, &mode, &music, cfg.steps)?;
            Ok(traj.states.iter().map(|z| sq_dist(z, w).sqrt()).collect())
        })
        .collect::<Result<_>>()?;
    let monotone = distances
        .iter()
        .filter(|d| d.windows(2).all(|p| p[1] < p[0]))
        .count();
    Ok(ConvergenceReport {
        target,
        distances,
        monotone,
    })
}

/// Both regimes plus the noise-free convergence check on one benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmTrajectoriesConfig {
    pub bench: GmmBenchConfig,
    pub informed: RegimeConfig,
    pub cluster: RegimeConfig,
    pub convergence: ConvergenceConfig,
}

impl Default for GmmTrajectoriesConfig {
    fn default() -> Self {
        Self {
            bench: GmmBenchConfig::default(),
            informed: RegimeConfig::for_regime(Regime::InformedConvergence),
            cluster: RegimeConfig::for_regime(Regime::ClusterExploration),
            convergence: ConvergenceConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmTrajectoriesReport {
    pub informed: RegimeRun,
    pub cluster: RegimeRun,
    pub comparison: RegimeComparison,
    pub convergence: ConvergenceReport,
}

pub fn run_gmm_trajectories(cfg: &GmmTrajectoriesConfig) -> Result<GmmTrajectoriesReport> {
    let bench = GmmBench::build(&cfg.bench)?;
    let informed = gmm_trajectories(&bench, Regime::InformedConvergence, &cfg.informed)?;
    let cluster = gmm_trajectories(&bench, Regime::ClusterExploration, &cfg.cluster)?;
    let comparison = compare_regimes(&informed, &cluster);
    let convergence = informed_convergence(&bench, &cfg.convergence)?;
    Ok(GmmTrajectoriesReport {
        informed,
        cluster,
        comparison,
        convergence,
    })
}
