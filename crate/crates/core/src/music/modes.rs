use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::Float;
use rand::Rng as _;

use super::config::{MusicConfig, PreserveScope, Subsample, TargetChange, WeightScheme};
use super::solve::{smallest_eigenvalue, solve_factored};
use crate::error::{Error, Result};
use crate::geometry::{activation, activation_jacobian, JacobianBlock};
use crate::som::PrototypeSet;
use crate::stats::{median, norm, sq_dist, standard_normal};
use crate::Rng;

/// Outcome of one MUSIC update.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepResult {
    /// Final step after noise and trust clipping.
    pub dz: Vec<f64>,
    /// Solution of the normal equations, before step noise and clipping.
    pub dz_deterministic: Vec<f64>,
    pub selected_targets: Vec<usize>,
    /// Smallest eigenvalue of the normal matrix, when tracked.
    pub h_sigma_min: Option<f64>,
    /// Whether the trust region shortened the step.
    pub clipped: bool,
}

impl StepResult {
    fn zero(dim: usize, selected_targets: Vec<usize>) -> Self {
        Self {
            dz: alloc::vec![0.0; dim],
            dz_deterministic: alloc::vec![0.0; dim],
            selected_targets,
            h_sigma_min: None,
            clipped: false,
        }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.dz)
    }
}

/// Rescales `v` onto the ball of radius `tau`; reports whether it had to.
fn clip(v: &mut [f64], tau: f64) -> bool {
    let n = norm(v);
    if n > tau {
        let s = tau / n;
        v.iter_mut().for_each(|x| *x *= s);
        true
    } else {
        false
    }
}

fn gaussian_vec(rng: &mut Rng, dim: usize, sigma: f64) -> Vec<f64> {
    (0..dim).map(|_| sigma * standard_normal(rng)).collect()
}

fn jitter_rows(block: &mut JacobianBlock, eps: f64, rng: &mut Rng) {
    if eps <= 0.0 {
        return;
    }
    let d = block.rows.ncols();
    for i in 0..block.rows.nrows() {
        let g = gaussian_vec(rng, d, 1.0);
        let n = norm(&g);
        if n > 0.0 {
            for k in 0..d {
                block.rows[(i, k)] += eps * g[k] / n;
            }
        }
    }
}

fn block(
    z: &[f64],
    protos: &PrototypeSet,
    units: &[usize],
    normalize: bool,
) -> Result<JacobianBlock> {
    if units.is_empty() {
        Ok(JacobianBlock::empty(protos.dim()))
    } else {
        activation_jacobian(z, protos, units, normalize)
    }
}

/// Diagonal weights for `units` under the configured scheme.
fn row_weights(scheme: WeightScheme, act: &[f64], units: &[usize]) -> Vec<f64> {
    match scheme {
        WeightScheme::Uniform => alloc::vec![1.0; units.len()],
        WeightScheme::GaussianDistance => {
            let dists: Vec<f64> = act.iter().map(|a| a.sqrt()).collect();
            let h = median(&dists).unwrap_or(0.0);
            if h == 0.0 {
                return alloc::vec![1.0; units.len()];
            }
            units
                .iter()
                .map(|&j| Float::exp(-act[j] / (2.0 * h * h)))
                .collect()
        }
    }
}

/// Units to preserve: the lattice ring around the BMU or everything,
/// in both cases minus `exclude`.
fn preservation_set(
    z: &[f64],
    protos: &PrototypeSet,
    scope: PreserveScope,
    exclude: &[usize],
) -> Vec<usize> {
    let pool: Vec<usize> = match scope {
        PreserveScope::AllNonTargets => (0..protos.len()).collect(),
        PreserveScope::Ring(r) => protos.lattice().neighborhood(protos.nearest(z).0, r),
    };
    pool.into_iter().filter(|j| !exclude.contains(j)).collect()
}

/// MUSIC step with explicit preservation and target sets.
///
/// Order within a step: target noise, solve, step
/// noise, trust clip. Jacobian jitter is drawn before the target noise.
pub fn targeted_step(
    z: &[f64],
    protos: &PrototypeSet,
    preserve: &[usize],
    targets: &[usize],
    cfg: &MusicConfig,
    rng: &mut Rng,
) -> Result<StepResult> {
    cfg.validate()?;
    protos.check_input(z)?;
    if targets.is_empty() {
        return Err(Error::EmptySubset);
    }
    let tau = cfg.trust.resolve(z, protos)?;
    let act = activation(z, protos)?;

    let mut a_s = block(z, protos, preserve, cfg.normalize_rows)?;
    let mut b_t = block(z, protos, targets, cfg.normalize_rows)?;
    jitter_rows(&mut a_s, cfg.jitter, rng);
    jitter_rows(&mut b_t, cfg.jitter, rng);

    let mut b: Vec<f64> = targets
        .iter()
        .map(|&t| match cfg.target_change {
            TargetChange::SquaredDistance => -cfg.eta * act[t],
            TargetChange::Distance => -cfg.eta * act[t].sqrt(),
        })
        .collect();
    if cfg.sigma_b > 0.0 {
        for bi in b.iter_mut() {
            *bi += cfg.sigma_b * standard_normal(rng);
        }
    }

    let w_s = row_weights(cfg.weight_scheme, &act, preserve);
    let w_t = row_weights(cfg.weight_scheme, &act, targets);
    let (solution, chol) =
        solve_factored(&a_s.rows, &b_t.rows, &b, &w_s, &w_t, cfg.gamma, cfg.lambda)?;
    let dz_deterministic: Vec<f64> = solution.iter().copied().collect();

    let mut dz = dz_deterministic.clone();
    if cfg.sigma_z > 0.0 {
        for (v, n) in dz.iter_mut().zip(gaussian_vec(rng, z.len(), cfg.sigma_z)) {
            *v += n;
        }
    }
    let clipped = clip(&mut dz, tau);
    Ok(StepResult {
        dz,
        dz_deterministic,
        selected_targets: targets.to_vec(),
        h_sigma_min: cfg.track_conditioning.then(|| smallest_eigenvalue(&chol)),
        clipped,
    })
}

/// Least disruptive step: `tau * q_min` of
/// `C = (W_S A_S)^T (W_S A_S) + lambda I` over all units, plus clipped
/// step noise.
pub fn free_step(
    z: &[f64],
    protos: &PrototypeSet,
    cfg: &MusicConfig,
    rng: &mut Rng,
) -> Result<StepResult> {
    cfg.validate()?;
    protos.check_input(z)?;
    let tau = cfg.trust.resolve(z, protos)?;
    let act = activation(z, protos)?;
    let preserve = preservation_set(z, protos, cfg.preserve_scope, &[]);
    let mut a_s = block(z, protos, &preserve, cfg.normalize_rows)?;
    jitter_rows(&mut a_s, cfg.jitter, rng);
    let w = row_weights(cfg.weight_scheme, &act, &preserve);

    let d = protos.dim();
    let mut wa = a_s.rows.clone();
    for (i, &wi) in w.iter().enumerate() {
        wa.row_mut(i).scale_mut(wi);
    }
    let c = wa.tr_mul(&wa) + DMatrix::identity(d, d) * cfg.lambda;
    let eig = SymmetricEigen::new(c);
    let (imin, lmin) =
        eig.eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |best, (i, v)| if v < best.1 { (i, v) } else { best },
            );
    let mut q: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
    // Round-off can leave exact zeros slightly signed; ignore them.
    if let Some(first) = q.iter().find(|v| v.abs() > 1e-10) {
        if *first < 0.0 {
            q.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let dz_deterministic: Vec<f64> = q.iter().map(|v| tau * v).collect();

    let mut dz = dz_deterministic.clone();
    if cfg.sigma_z > 0.0 {
        let mut xi = gaussian_vec(rng, d, cfg.sigma_z);
        clip(&mut xi, tau);
        for (v, n) in dz.iter_mut().zip(&xi) {
            *v += n;
        }
    }
    let clipped = clip(&mut dz, tau);
    Ok(StepResult {
        dz,
        dz_deterministic,
        selected_targets: Vec::new(),
        h_sigma_min: cfg.track_conditioning.then_some(lmin),
        clipped,
    })
}

/// Single-target step: attract toward `target` while preserving the rest.
///
/// Returns a zero step when `z` already sits on the target prototype.
pub fn informed_step(
    z: &[f64],
    protos: &PrototypeSet,
    target: usize,
    cfg: &MusicConfig,
    rng: &mut Rng,
) -> Result<StepResult> {
    protos.check_input(z)?;
    protos.check_unit(target)?;
    if sq_dist(z, protos.weight(target)) == 0.0 {
        return Ok(StepResult::zero(z.len(), alloc::vec![target]));
    }
    let preserve = preservation_set(z, protos, cfg.preserve_scope, &[target]);
    targeted_step(z, protos, &preserve, &[target], cfg, rng)
}

/// Draws the active targets of one pass.
pub fn draw_targets(targets: &[usize], rule: Subsample, rng: &mut Rng) -> Result<Vec<usize>> {
    if targets.is_empty() {
        return Err(Error::EmptySubset);
    }
    if targets.len() == 1 {
        return Ok(targets.to_vec());
    }
    Ok(match rule {
        Subsample::All => targets.to_vec(),
        Subsample::FixedK(k) => {
            if k > targets.len() {
                return Err(Error::InvalidConfig(
                    "fixed-k subsample larger than the target set",
                ));
            }
            let mut idx = rand::seq::index::sample(rng, targets.len(), k).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| targets[i]).collect()
        }
        Subsample::Bernoulli(p) => {
            for _ in 0..8 {
                let kept: Vec<usize> = targets
                    .iter()
                    .copied()
                    .filter(|_| rng.random_bool(p))
                    .collect();
                if !kept.is_empty() {
                    return Ok(kept);
                }
            }
            targets.to_vec()
        }
        Subsample::SingleRandom => alloc::vec![targets[rng.random_range(0..targets.len())]],
    })
}

/// Multi-target step toward the cluster `targets` with random sub-sampling.
///
/// Multi-target draws preserve everything outside the full target set; the
/// single-random rule preserves every unit but the drawn one. Targets the
/// input already sits on are dropped from the drawn set.
pub fn cluster_step(
    z: &[f64],
    protos: &PrototypeSet,
    targets: &[usize],
    cfg: &MusicConfig,
    rng: &mut Rng,
) -> Result<StepResult> {
    protos.check_input(z)?;
    for &t in targets {
        protos.check_unit(t)?;
    }
    let drawn = draw_targets(targets, cfg.subsample, rng)?;
    let active: Vec<usize> = drawn
        .iter()
        .copied()
        .filter(|&t| sq_dist(z, protos.weight(t)) > 0.0)
        .collect();
    if active.is_empty() {
        return Ok(StepResult::zero(z.len(), drawn));
    }
    let exclude: &[usize] = match cfg.subsample {
        Subsample::SingleRandom => &drawn,
        _ => targets,
    };
    let preserve = preservation_set(z, protos, cfg.preserve_scope, exclude);
    let mut step = targeted_step(z, protos, &preserve, &active, cfg, rng)?;
    step.selected_targets = drawn;
    Ok(step)
}

/// Unconstrained radial move of length `|step_len|`: away from `w_j` when
/// positive, toward it when negative.
pub fn radial_baseline_step(
    z: &[f64],
    protos: &PrototypeSet,
    j: usize,
    step_len: f64,
) -> Result<Vec<f64>> {
    protos.check_input(z)?;
    protos.check_unit(j)?;
    let x: Vec<f64> = z.iter().zip(protos.weight(j)).map(|(a, b)| a - b).collect();
    let n = norm(&x);
    if n == 0.0 {
        return Err(Error::UndefinedRadial { unit: j });
    }
    Ok(x.iter().map(|v| step_len * v / n).collect())
}

/// Cumulative change of the anchor activations: `sum_j |a_j(z) - a_j(z0)|`.
pub fn identity_drift(
    z: &[f64],
    z0: &[f64],
    protos: &PrototypeSet,
    anchors: &[usize],
) -> Result<f64> {
    protos.check_input(z)?;
    protos.check_input(z0)?;
    let mut total = 0.0;
    for &j in anchors {
        protos.check_unit(j)?;
        let w = protos.weight(j);
        total += (sq_dist(z, w) - sq_dist(z0, w)).abs();
    }
    Ok(total)
}
