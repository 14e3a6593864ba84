//! Squared-distance activations, their Jacobians and the analytic
//! radial/tangential single-cell perturbation.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::som::PrototypeSet;
use crate::stats::{dot, norm, sq_dist};

/// `a_j(z) = ||z - w_j||^2` for every prototype.
pub fn activation(z: &[f64], protos: &PrototypeSet) -> Result<Vec<f64>> {
    protos.check_input(z)?;
    Ok(protos.iter().map(|w| sq_dist(z, w)).collect())
}

/// Stacked activation gradients for a subset of units.
///
/// Row `i` belongs to unit `row_indices[i]`; its raw value is
/// `2 (z - w_j)^T`. When `normalized` is set every row has been divided by
/// the norm recorded in `row_norms`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlock {
    pub rows: DMatrix<f64>,
    pub row_indices: Vec<usize>,
    pub normalized: bool,
    pub row_norms: Vec<f64>,
}

impl JacobianBlock {
    pub fn len(&self) -> usize {
        self.row_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_indices.is_empty()
    }

    /// A block with no rows, used when a preservation or target set is empty.
    pub fn empty(dim: usize) -> Self {
        Self {
            rows: DMatrix::zeros(0, dim),
            row_indices: Vec::new(),
            normalized: false,
            row_norms: Vec::new(),
        }
    }
}

/// Jacobian rows of the activation map at `z` for the units in `subset`.
///
/// Normalizing a row whose prototype coincides with `z` is an error naming
/// that unit.
pub fn activation_jacobian(
    z: &[f64],
    protos: &PrototypeSet,
    subset: &[usize],
    normalize: bool,
) -> Result<JacobianBlock> {
    protos.check_input(z)?;
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let d = protos.dim();
    let mut rows = DMatrix::zeros(subset.len(), d);
    let mut row_norms = Vec::with_capacity(subset.len());
    for (i, &j) in subset.iter().enumerate() {
        protos.check_unit(j)?;
        let w = protos.weight(j);
        let mut sq = 0.0;
        for k in 0..d {
            let g = 2.0 * (z[k] - w[k]);
            rows[(i, k)] = g;
            sq += g * g;
        }
        let n = sq.sqrt();
        if normalize {
            if n == 0.0 {
                return Err(Error::DegenerateRow { unit: j });
            }
            for k in 0..d {
                rows[(i, k)] /= n;
            }
        }
        row_norms.push(n);
    }
    Ok(JacobianBlock {
        rows,
        row_indices: subset.to_vec(),
        normalized: normalize,
        row_norms,
    })
}

/// Uniform unit direction orthogonal to `x`.
///
/// A standard Gaussian vector with its `x` component removed is isotropic in
/// the orthogonal complement, so normalizing it gives a uniform point on the
/// tangential sphere. Returns `None` when the complement is trivial
/// (`dim <= 1`) or `x` is zero.
pub fn sample_tangent_direction<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Option<Vec<f64>> {
    let xx = dot(x, x);
    if x.len() <= 1 || xx == 0.0 {
        return None;
    }
    loop {
        let mut g: Vec<f64> = (0..x.len()).map(|_| StandardNormal.sample(rng)).collect();
        let proj = dot(&g, x) / xx;
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi -= proj * xi;
        }
        let n = norm(&g);
        if n > 1e-12 {
            g.iter_mut().for_each(|v| *v /= n);
            return Some(g);
        }
    }
}

/// Change of the squared distance when a distance `d` moves by `delta_d`.
pub fn squared_distance_change(d: f64, delta_d: f64) -> f64 {
    (d + delta_d) * (d + delta_d) - d * d
}

/// Smallest first-order perturbation that moves the distance to prototype `k`
/// by `delta_d`, widened by a random tangential component.
///
/// With `x = z - w_k` and `c = ((d + delta_d)^2 - d^2) / 2` the radial part is
/// `(c / ||x||^2) x`. The total norm is `r_scale` times the radial norm; the
/// remainder goes into a direction drawn uniformly from the unit sphere
/// orthogonal to `x` using `tangent_seed`.
pub fn radial_tangential_step(
    z: &[f64],
    protos: &PrototypeSet,
    k: usize,
    delta_d: f64,
    r_scale: f64,
    tangent_seed: u64,
) -> Result<Vec<f64>> {
    protos.check_input(z)?;
    protos.check_unit(k)?;
    if !(r_scale >= 1.0) {
        return Err(Error::InvalidAmplitude(r_scale));
    }
    let x: Vec<f64> = z.iter().zip(protos.weight(k)).map(|(a, b)| a - b).collect();
    let xx = dot(&x, &x);
    if xx == 0.0 {
        return Err(Error::UndefinedRadial { unit: k });
    }
    if x.len() == 1 && r_scale != 1.0 {
        return Err(Error::InvalidAmplitude(r_scale));
    }
    let c = 0.5 * squared_distance_change(xx.sqrt(), delta_d);
    let alpha = c / xx;
    let mut dz: Vec<f64> = x.iter().map(|v| alpha * v).collect();
    let parallel = alpha.abs() * xx.sqrt();
    let r = r_scale * parallel;
    let tangential = (r * r - parallel * parallel).max(0.0).sqrt();
    if tangential > 0.0 {
        let mut rng = crate::seeded_rng(tangent_seed);
        if let Some(u) = sample_tangent_direction(&x, &mut rng) {
            for (v, ui) in dz.iter_mut().zip(&u) {
                *v += tangential * ui;
            }
        }
    }
    Ok(dz)
}
