//! Free evolution under random single-prototype perturbations: MUSIC
//! directions against unconstrained radial moves of the same length.

use music_core::geometry::activation_jacobian;
use music_core::music::{identity_drift, music_solve, radial_baseline_step};
use music_core::{stream_rng, PrototypeSet};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmm::{sq_dist, GmmBench, GmmBenchConfig};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub seeds: usize,
    pub steps: usize,
    /// Common length of every step in both conditions.
    pub step_len: f64,
    /// Size of the preserved set: the prototypes nearest the start point.
    pub preserve: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            seeds: 50,
            steps: 50,
            step_len: 0.01,
            preserve: 4,
            gamma: 0.85,
            lambda: 1e-4,
            seed: 300,
        }
    }
}

/// Drift of the preserved activations after every step, both conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub music_drift: Vec<f64>,
    pub baseline_drift: Vec<f64>,
    /// Largest per-step gap between the two step norms.
    pub max_norm_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub preserved: Vec<usize>,
    pub runs: Vec<BaselineRun>,
}

impl BaselineReport {
    /// Seeds whose MUSIC drift ends below the baseline drift.
    pub fn win_fraction(&self) -> f64 {
        let wins = self
            .runs
            .iter()
            .filter(|r| r.music_drift.last() < r.baseline_drift.last())
            .count();
        wins as f64 / self.runs.len().max(1) as f64
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn nearest_units(z: &[f64], protos: &PrototypeSet, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..protos.len()).collect();
    order.sort_by(|&i, &j| sq_dist(z, protos.weight(i)).total_cmp(&sq_dist(z, protos.weight(j))));
    order.truncate(k);
    order
}

/// Unit-length MUSIC direction changing `a_target` with sign `sign` while
/// holding the `preserve` activations.
fn music_direction(
    z: &[f64],
    protos: &PrototypeSet,
    preserve: &[usize],
    target: usize,
    sign: f64,
    cfg: &BaselineConfig,
) -> Result<Vec<f64>> {
    let a_s = activation_jacobian(z, protos, preserve, true)?;
    let b_t = activation_jacobian(z, protos, &[target], true)?;
    let dz = music_solve(
        &a_s.rows,
        &b_t.rows,
        &[sign],
        &vec![1.0; preserve.len()],
        &[1.0],
        cfg.gamma,
        cfg.lambda,
    )?;
    let n = norm(&dz);
    if n == 0.0 {
        return Err(LabError::Setup("MUSIC direction vanished".into()));
    }
    Ok(dz.iter().map(|v| v / n).collect())
}

/// Paired runs from `z0`: at each step both conditions draw the same
/// random non-preserved prototype and the same sign of squared-distance
/// change, then move by `step_len` along their own direction.
pub fn baseline_compare(
    z0: &[f64],
    protos: &PrototypeSet,
    cfg: &BaselineConfig,
) -> Result<BaselineReport> {
    let preserved = nearest_units(z0, protos, cfg.preserve);
    let pool: Vec<usize> = (0..protos.len())
        .filter(|j| !preserved.contains(j))
        .collect();
    if pool.is_empty() {
        return Err(LabError::Setup("no prototype left to perturb".into()));
    }
    let runs = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(cfg.seed, s);
            let (mut zm, mut zb) = (z0.to_vec(), z0.to_vec());
            let mut run = BaselineRun {
                music_drift: vec![0.0],
                baseline_drift: vec![0.0],
                max_norm_gap: 0.0,
            };
            for _ in 0..cfg.steps {
                let target = pool[rng.random_range(0..pool.len())];
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let dm: Vec<f64> = music_direction(&zm, protos, &preserved, target, sign, cfg)?
                    .iter()
                    .map(|v| v * cfg.step_len)
                    .collect();
                let db = radial_baseline_step(&zb, protos, target, sign * cfg.step_len)?;
                run.max_norm_gap = run.max_norm_gap.max((norm(&dm) - norm(&db)).abs());
                zm.iter_mut().zip(&dm).for_each(|(z, d)| *z += d);
                zb.iter_mut().zip(&db).for_each(|(z, d)| *z += d);
                run.music_drift
                    .push(identity_drift(&zm, z0, protos, &preserved)?);
                run.baseline_drift
                    .push(identity_drift(&zb, z0, protos, &preserved)?);
            }
            Ok(run)
        })
        .collect::<Result<_>>()?;
    Ok(BaselineReport { preserved, runs })
}

/// Baseline comparison from one mixture draw on the synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineExperimentConfig {
    pub bench: GmmBenchConfig,
    /// Seed of the single start-point draw.
    pub start_seed: u64,
    pub run: BaselineConfig,
}

impl Default for BaselineExperimentConfig {
    fn default() -> Self {
        Self {
            bench: GmmBenchConfig::default(),
            start_seed: 5,
            run: BaselineConfig::default(),
        }
    }
}

pub fn run_baseline_experiment(cfg: &BaselineExperimentConfig) -> Result<BaselineReport> {
    let bench = GmmBench::build(&cfg.bench)?;
    let (start, _) = bench.sample(1, cfg.start_seed)?;
    baseline_compare(&start[0], &bench.protos, &cfg.run)
}
