//! Static inversion experiments: error against subset size, error against
//! conditioning, and the expected-MSE identity.

use music_core::geometry::activation;
use music_core::inversion::{
    build_anchored_system, expected_reconstruction_mse, solve_inversion, NoiseModel,
};
use music_core::som::bmu;
use music_core::stats::{linear_fit, mean, median, Spread};
use music_core::{stream_rng, PrototypeSet, Rng};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmm::{sq_dist, GmmBench, GmmBenchConfig};
use crate::error::Result;

fn gaussian(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn gaussian_scalar(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn error_norm(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// One point of the error-versus-subset-size curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionRow {
    /// Number of difference rows, i.e. prototypes besides the anchor.
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Inverts clean activations of every point from growing prototype
/// subsets.
///
/// For each point the anchor is its BMU and the subset adds the `n`
/// prototypes nearest to that BMU, so `n` counts the rows of the anchored
/// system. Reported errors are `||z - z_hat||` quantiles across points.
pub fn inversion_vs_n(
    protos: &PrototypeSet,
    points: &[Vec<f64>],
    ns: &[usize],
) -> Result<Vec<InversionRow>> {
    let per_point: Vec<Vec<f64>> = points
        .par_iter()
        .map(|z| -> Result<Vec<f64>> {
            let a = activation(z, protos)?;
            let r = bmu(z, protos)?;
            let wr = protos.weight(r);
            let mut others: Vec<usize> = (0..protos.len()).filter(|&j| j != r).collect();
            others.sort_by(|&i, &j| {
                sq_dist(protos.weight(i), wr)
                    .total_cmp(&sq_dist(protos.weight(j), wr))
                    .then(i.cmp(&j))
            });
            ns.iter()
                .map(|&n| {
                    let mut subset = vec![r];
                    subset.extend(others.iter().take(n));
                    let sys = build_anchored_system(protos, &a, r, &subset)?;
                    Ok(error_norm(&solve_inversion(&sys).0, z))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok(ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let errs: Vec<f64> = per_point.iter().map(|e| e[i]).collect();
            let s = Spread::of(&errs).expect("at least one point");
            InversionRow {
                n,
                median: s.median,
                q1: s.q1,
                q3: s.q3,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseScalingConfig {
    pub dim: usize,
    /// Prototypes per random geometry.
    pub prototypes: usize,
    pub trials: usize,
    /// Standard deviation of the i.i.d. activation noise.
    pub sigma: f64,
    /// Decades of squeeze applied to one axis of each geometry, so that
    /// `sigma_min(B)` spans a range wide enough to fit a slope.
    pub squeeze_decades: f64,
    pub bins: usize,
    /// Bins with fewer trials are left out of the fit.
    pub min_bin_count: usize,
    pub seed: u64,
}

impl Default for NoiseScalingConfig {
    fn default() -> Self {
        Self {
            dim: 10,
            prototypes: 15,
            trials: 20_000,
            sigma: 1e-3,
            squeeze_decades: 3.0,
            bins: 12,
            min_bin_count: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrial {
    pub sigma_min: f64,
    /// Error from noisy activations.
    pub error: f64,
    /// Error from the same activations without noise.
    pub clean_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBin {
    /// Median `sigma_min` of the trials in the bin.
    pub sigma_min: f64,
    pub median_error: f64,
    pub mean_error: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseScalingReport {
    pub trials: Vec<NoiseTrial>,
    pub bins: Vec<NoiseBin>,
    /// Slope of `log10(median error)` against `log10(sigma_min)` over the
    /// retained bins.
    pub slope: f64,
    pub intercept: f64,
    pub max_clean_error: f64,
}

fn noise_trial(cfg: &NoiseScalingConfig, rng: &mut Rng) -> Result<NoiseTrial> {
    let d = cfg.dim;
    let squeeze = 10f64.powf(-cfg.squeeze_decades * rng.random::<f64>());
    let axis = rng.random_range(0..d);
    let points: Vec<Vec<f64>> = (0..cfg.prototypes)
        .map(|_| {
            let mut w = gaussian(rng, d);
            w[axis] *= squeeze;
            w
        })
        .collect();
    let protos = PrototypeSet::from_points(&points)?;
    let z = gaussian(rng, d);
    let clean = activation(&z, &protos)?;
    let noisy: Vec<f64> = clean
        .iter()
        .map(|a| a + cfg.sigma * gaussian_scalar(rng))
        .collect();
    let all: Vec<usize> = (0..protos.len()).collect();
    let clean_sys = build_anchored_system(&protos, &clean, 0, &all)?;
    let (z_clean, diag) = solve_inversion(&clean_sys);
    let noisy_sys = build_anchored_system(&protos, &noisy, 0, &all)?;
    let (z_noisy, _) = solve_inversion(&noisy_sys);
    Ok(NoiseTrial {
        sigma_min: diag.sigma_min,
        error: error_norm(&z_noisy, &z),
        clean_error: error_norm(&z_clean, &z),
    })
}

/// Random geometries with noisy activations, binned by `sigma_min(B)` on a
/// log scale.
pub fn noise_scaling(cfg: &NoiseScalingConfig) -> Result<NoiseScalingReport> {
    let trials: Vec<NoiseTrial> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| noise_trial(cfg, &mut stream_rng(cfg.seed, i)))
        .collect::<Result<_>>()?;

    let logs: Vec<f64> = trials.iter().map(|t| t.sigma_min.log10()).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / cfg.bins as f64).max(f64::MIN_POSITIVE);
    let mut members: Vec<Vec<&NoiseTrial>> = vec![Vec::new(); cfg.bins];
    for (t, l) in trials.iter().zip(&logs) {
        let b = (((l - lo) / width) as usize).min(cfg.bins - 1);
        members[b].push(t);
    }
    let bins: Vec<NoiseBin> = members
        .iter()
        .filter(|m| !m.is_empty())
        .map(|m| {
            let s: Vec<f64> = m.iter().map(|t| t.sigma_min).collect();
            let e: Vec<f64> = m.iter().map(|t| t.error).collect();
            NoiseBin {
                sigma_min: median(&s).expect("non-empty"),
                median_error: median(&e).expect("non-empty"),
                mean_error: mean(&e).expect("non-empty"),
                count: m.len(),
            }
        })
        .collect();
    let fitted: Vec<&NoiseBin> = bins
        .iter()
        .filter(|b| b.count >= cfg.min_bin_count)
        .collect();
    let xs: Vec<f64> = fitted.iter().map(|b| b.sigma_min.log10()).collect();
    let ys: Vec<f64> = fitted.iter().map(|b| b.median_error.log10()).collect();
    let (slope, intercept) = linear_fit(&xs, &ys).unwrap_or((f64::NAN, f64::NAN));
    let max_clean_error = trials.iter().map(|t| t.clean_error).fold(0.0, f64::max);
    Ok(NoiseScalingReport {
        trials,
        bins,
        slope,
        intercept,
        max_clean_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MseIdentityConfig {
    pub dim: usize,
    pub prototypes: usize,
    pub geometries: usize,
    pub draws: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for MseIdentityConfig {
    fn default() -> Self {
        Self {
            dim: 10,
            prototypes: 15,
            geometries: 20,
            draws: 10_000,
            sigma: 1e-2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub predicted: f64,
    pub empirical: f64,
}

impl MseRow {
    pub fn relative_error(&self) -> f64 {
        (self.empirical - self.predicted).abs() / self.predicted
    }
}

/// Monte-Carlo mean of `||z_hat - z||^2` under i.i.d. right-hand-side
/// noise against `sigma^2 tr((B^T B)^-1)`, one row per random geometry.
pub fn mse_identity(cfg: &MseIdentityConfig) -> Result<Vec<MseRow>> {
    (0..cfg.geometries as u64)
        .into_par_iter()
        .map(|g| {
            let mut rng = stream_rng(cfg.seed, g);
            let points: Vec<Vec<f64>> = (0..cfg.prototypes)
                .map(|_| gaussian(&mut rng, cfg.dim))
                .collect();
            let protos = PrototypeSet::from_points(&points)?;
            let z = gaussian(&mut rng, cfg.dim);
            let a = activation(&z, &protos)?;
            let all: Vec<usize> = (0..protos.len()).collect();
            let sys = build_anchored_system(&protos, &a, 0, &all)?;
            let predicted = expected_reconstruction_mse(&sys, cfg.sigma, NoiseModel::RightHandSide)
                .ok_or_else(|| {
                    crate::error::LabError::Setup("rank-deficient random geometry".into())
                })?;
            let mut total = 0.0;
            let mut noisy = sys.clone();
            for _ in 0..cfg.draws {
                for i in 0..sys.c.len() {
                    noisy.c[i] = sys.c[i] + cfg.sigma * gaussian_scalar(&mut rng);
                }
                total += sq_dist(&solve_inversion(&noisy).0, &z);
            }
            Ok(MseRow {
                predicted,
                empirical: total / cfg.draws as f64,
            })
        })
        .collect()
}

/// The subset-size sweep on the synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionVsNConfig {
    pub bench: GmmBenchConfig,
    pub test_points: usize,
    /// Largest row count; defaults to `D + 20`.
    pub n_max: Option<usize>,
    /// Seed of the test draws.
    pub seed: u64,
}

impl Default for InversionVsNConfig {
    fn default() -> Self {
        Self {
            bench: GmmBenchConfig::default(),
            test_points: 1500,
            n_max: None,
            seed: 7,
        }
    }
}

pub fn run_inversion_vs_n(cfg: &InversionVsNConfig) -> Result<Vec<InversionRow>> {
    let bench = GmmBench::build(&cfg.bench)?;
    let (points, _) = bench.sample(cfg.test_points, cfg.seed)?;
    let n_max = cfg
        .n_max
        .unwrap_or(cfg.bench.dim + 20)
        .min(bench.protos.len() - 1);
    let ns: Vec<usize> = (1..=n_max).collect();
    inversion_vs_n(&bench.protos, &points, &ns)
}
