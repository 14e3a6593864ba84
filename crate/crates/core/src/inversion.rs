//! Exact recovery of an input from its squared-distance activations.
//!
//! Subtracting the anchor activation `a_r` from every other activation
//! removes the quadratic term `||z||^2`, leaving the affine system `B z = c`
//! with rows `2 (w_r - w_j)^T` and `c_j = a_j - a_r + ||w_r||^2 - ||w_j||^2`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::som::PrototypeSet;
use crate::stats::dot;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// The anchored linear system together with the units it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchoredSystem {
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
    pub anchor: usize,
    /// Anchor first, then the unit behind each row of `b` in order.
    pub used_units: Vec<usize>,
    /// Translation removed from the prototypes before building `b` and `c`;
    /// solutions are shifted back by it.
    pub offset: Option<Vec<f64>>,
}

impl AnchoredSystem {
    /// Wraps a hand-built system, e.g. for diagnostics on a synthetic `B`.
    pub fn from_parts(b: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        if b.nrows() != c.len() {
            return Err(Error::DimensionMismatch {
                expected: b.nrows(),
                found: c.len(),
            });
        }
        Ok(Self {
            used_units: (0..=b.nrows()).collect(),
            b,
            c,
            anchor: 0,
            offset: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.b.nrows()
    }

    pub fn dim(&self) -> usize {
        self.b.ncols()
    }
}

/// Conditioning summary of an anchored system.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InversionDiagnostics {
    pub rank: usize,
    /// Smallest of the `D` singular values; zero when `B` has fewer rows than
    /// columns.
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `tr((B^T B)^-1)`, present only for full column rank.
    pub trace_inv: Option<f64>,
    /// `sigma * sqrt(K - 1) / sigma_min(B)`: worst-case error for activation
    /// noise of per-entry size `sigma`.
    pub lipschitz_bound: f64,
}

impl InversionDiagnostics {
    pub fn is_full_rank(&self, dim: usize) -> bool {
        self.rank == dim
    }
}

/// How noise enters the system when predicting reconstruction error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// Independent noise of variance `sigma^2` on each entry of `c`.
    RightHandSide,
    /// Independent noise on every activation, the anchor included. The
    /// shared anchor term correlates the entries of `c`.
    Activations,
}

/// Builds `B z = c` from the units in `subset` with `anchor` as reference.
pub fn build_anchored_system(
    protos: &PrototypeSet,
    activations: &[f64],
    anchor: usize,
    subset: &[usize],
) -> Result<AnchoredSystem> {
    build(protos, activations, anchor, subset, false)
}

/// Same as [`build_anchored_system`] but with the prototypes of `subset`
/// translated to zero mean first.
///
/// `B` is translation invariant; centering only shrinks the magnitudes that
/// cancel inside `c`, which reduces round-off for far-off-origin maps.
pub fn build_anchored_system_centered(
    protos: &PrototypeSet,
    activations: &[f64],
    anchor: usize,
    subset: &[usize],
) -> Result<AnchoredSystem> {
    build(protos, activations, anchor, subset, true)
}

fn build(
    protos: &PrototypeSet,
    activations: &[f64],
    anchor: usize,
    subset: &[usize],
    center: bool,
) -> Result<AnchoredSystem> {
    if activations.len() != protos.len() {
        return Err(Error::DimensionMismatch {
            expected: protos.len(),
            found: activations.len(),
        });
    }
    for &j in subset {
        protos.check_unit(j)?;
    }
    if !subset.contains(&anchor) {
        return Err(Error::AnchorNotInSubset(anchor));
    }
    if subset.len() < 2 {
        return Err(Error::SubsetTooSmall);
    }
    let d = protos.dim();
    let offset = center.then(|| {
        let mut m = alloc::vec![0.0; d];
        for &j in subset {
            for (mk, wk) in m.iter_mut().zip(protos.weight(j)) {
                *mk += wk;
            }
        }
        m.iter_mut().for_each(|v| *v /= subset.len() as f64);
        m
    });
    let shifted = |j: usize| -> Vec<f64> {
        match &offset {
            Some(m) => protos.weight(j).iter().zip(m).map(|(w, o)| w - o).collect(),
            None => protos.weight(j).to_vec(),
        }
    };

    let wr = shifted(anchor);
    let wr_sq = dot(&wr, &wr);
    let others: Vec<usize> = subset.iter().copied().filter(|&j| j != anchor).collect();
    let mut b = DMatrix::zeros(others.len(), d);
    let mut c = DVector::zeros(others.len());
    for (i, &j) in others.iter().enumerate() {
        let wj = shifted(j);
        for k in 0..d {
            b[(i, k)] = 2.0 * (wr[k] - wj[k]);
        }
        c[i] = activations[j] - activations[anchor] + wr_sq - dot(&wj, &wj);
    }
    let mut used_units = Vec::with_capacity(subset.len());
    used_units.push(anchor);
    used_units.extend(others);
    Ok(AnchoredSystem {
        b,
        c,
        anchor,
        used_units,
        offset,
    })
}

/// All `D` singular values of `b` in descending order; missing ones (fewer
/// rows than columns) are reported as zero.
fn singular_values(b: &DMatrix<f64>) -> Vec<f64> {
    let d = b.ncols();
    let mut s: Vec<f64> = if b.nrows() == 0 || d == 0 {
        Vec::new()
    } else {
        b.clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect()
    };
    s.sort_by(|x, y| y.total_cmp(x));
    s.resize(d, 0.0);
    s
}

fn rank_of(sv: &[f64]) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * smax).count()
}

/// Rank, extreme singular values, `tr((B^T B)^-1)` and the worst-case error
/// bound for activation noise of size `sigma`.
pub fn noise_diagnostics(sys: &AnchoredSystem, sigma: f64) -> InversionDiagnostics {
    let sv = singular_values(&sys.b);
    let rank = rank_of(&sv);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    let full = rank == sys.dim() && rank > 0;
    let trace_inv = full.then(|| sv.iter().map(|s| 1.0 / (s * s)).sum());
    let lipschitz_bound = if sigma == 0.0 {
        0.0
    } else if full {
        sigma * (sys.rows() as f64).sqrt() / sigma_min
    } else {
        f64::INFINITY
    };
    InversionDiagnostics {
        rank,
        sigma_min,
        sigma_max,
        trace_inv,
        lipschitz_bound,
    }
}

/// Least-squares solution of `B z = c`.
///
/// Full column rank uses Householder QR; otherwise the minimum-norm solution
/// from a truncated SVD is returned and the deficiency shows in the
/// diagnostics.
pub fn solve_inversion(sys: &AnchoredSystem) -> (Vec<f64>, InversionDiagnostics) {
    let diag = noise_diagnostics(sys, 0.0);
    let d = sys.dim();
    let z = if diag.rank == d && d > 0 {
        let qr = sys.b.clone().qr();
        let qtc = qr.q().transpose() * &sys.c;
        qr.r()
            .solve_upper_triangular(&qtc)
            .expect("full-rank R has a nonzero diagonal")
    } else if diag.rank == 0 {
        DVector::zeros(d)
    } else {
        let svd = sys.b.clone().svd(true, true);
        let eps = RANK_TOLERANCE * diag.sigma_max;
        svd.solve(&sys.c, eps).expect("both factors were requested")
    };
    let mut z: Vec<f64> = z.iter().copied().collect();
    if let Some(m) = &sys.offset {
        for (zi, mi) in z.iter_mut().zip(m) {
            *zi += mi;
        }
    }
    (z, diag)
}

/// Generalized least squares: minimizes `(Bz - c)^T Sigma^-1 (Bz - c)`.
///
/// With `Sigma = L L^T` the problem is the ordinary one for `L^-1 B` and
/// `L^-1 c`.
pub fn solve_inversion_weighted(sys: &AnchoredSystem, sigma: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = sys.rows();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: sigma.nrows(),
        });
    }
    let scale = sigma.amax().max(f64::MIN_POSITIVE);
    if (sigma - sigma.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = sigma.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let b = l
        .solve_lower_triangular(&sys.b)
        .ok_or(Error::NotPositiveDefinite)?;
    let c = l
        .solve_lower_triangular(&sys.c)
        .ok_or(Error::NotPositiveDefinite)?;
    let whitened = AnchoredSystem {
        b,
        c,
        anchor: sys.anchor,
        used_units: sys.used_units.clone(),
        offset: sys.offset.clone(),
    };
    Ok(solve_inversion(&whitened).0)
}

/// Expected `||z_hat - z||^2` of the least-squares solution under additive
/// zero-mean noise of standard deviation `sigma`. `None` when `B` is rank
/// deficient.
///
/// For noise on `c` this is `sigma^2 tr((B^T B)^-1)`. For noise on the
/// activations the entries of `c` share the anchor noise, giving covariance
/// `sigma^2 (I + 1 1^T)` and `sigma^2 (||B^+||_F^2 + ||B^+ 1||^2)`.
pub fn expected_reconstruction_mse(
    sys: &AnchoredSystem,
    sigma: f64,
    model: NoiseModel,
) -> Option<f64> {
    let diag = noise_diagnostics(sys, 0.0);
    let trace = diag.trace_inv?;
    let s2 = sigma * sigma;
    match model {
        NoiseModel::RightHandSide => Some(s2 * trace),
        NoiseModel::Activations => {
            let pinv = sys
                .b
                .clone()
                .pseudo_inverse(RANK_TOLERANCE * diag.sigma_max)
                .ok()?;
            let ones = DVector::from_element(sys.rows(), 1.0);
            Some(s2 * (trace + (pinv * ones).norm_squared()))
        }
    }
}

/// Convenience wrapper: anchor at the smallest activation in `subset` and
/// solve.
pub fn invert_activations(
    protos: &PrototypeSet,
    activations: &[f64],
    subset: &[usize],
) -> Result<(Vec<f64>, InversionDiagnostics)> {
    let anchor = *subset
        .iter()
        .min_by(|&&i, &&j| {
            let (ai, aj) = (activations.get(i), activations.get(j));
            ai.partial_cmp(&aj)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        })
        .ok_or(Error::EmptySubset)?;
    let sys = build_anchored_system(protos, activations, anchor, subset)?;
    Ok(solve_inversion(&sys))
}
