//! Synthetic data and input preprocessing: Gaussian mixtures, per-feature
//! standardization and PCA whitening.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::distr::Distribution;
use rand_distr::{weighted::WeightedIndex, StandardNormal};

use crate::error::{Error, Result};

/// A finite Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmSpec {
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    pub weights: Vec<f64>,
}

impl GmmSpec {
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    /// Checks shapes, weights and positive definiteness; returns the
    /// Cholesky factor of every covariance.
    pub fn validate(&self) -> Result<Vec<Cholesky<f64, Dyn>>> {
        let k = self.means.len();
        let d = self.dim();
        if k == 0 || d == 0 {
            return Err(Error::InvalidConfig("mixture needs at least one component"));
        }
        if self.covariances.len() != k || self.weights.len() != k {
            return Err(Error::InvalidConfig(
                "means, covariances and weights disagree in count",
            ));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidConfig("mixture weights must be non-negative"));
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("mixture weights must sum to one"));
        }
        let mut factors = Vec::with_capacity(k);
        for (mean, cov) in self.means.iter().zip(&self.covariances) {
            if mean.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: mean.len(),
                });
            }
            if cov.nrows() != d || cov.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: cov.nrows(),
                });
            }
            if (cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
                return Err(Error::NotPositiveDefinite);
            }
            factors.push(Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite)?);
        }
        Ok(factors)
    }
}

/// Draws `n` i.i.d. samples and the index of the component behind each.
pub fn gmm_sample(spec: &GmmSpec, n: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1"));
    }
    let factors = spec.validate()?;
    let picker = WeightedIndex::new(&spec.weights)
        .map_err(|_| Error::InvalidConfig("mixture weights are degenerate"))?;
    let d = spec.dim();
    let mut rng = crate::seeded_rng(seed);
    let mut data = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let k = picker.sample(&mut rng);
        let e = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let x = factors[k].l() * e;
        data.push(
            spec.means[k]
                .iter()
                .zip(x.iter())
                .map(|(m, v)| m + v)
                .collect(),
        );
        labels.push(k);
    }
    Ok((data, labels))
}

/// Shape of the three-component benchmark mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleGmm {
    /// Side length of the equilateral triangle of means.
    pub side: f64,
    /// Variance of each component in the triangle plane.
    pub plane_variance: f64,
    /// Variance in every remaining coordinate.
    pub off_plane_variance: f64,
}

impl Default for TriangleGmm {
    fn default() -> Self {
        Self {
            side: 6.0,
            plane_variance: 1.0,
            off_plane_variance: 0.05,
        }
    }
}

/// Equal-weight three-component mixture whose means form an equilateral
/// triangle (centred at the origin) in the first two coordinates.
pub fn triangle_gmm_spec(dim: usize) -> Result<GmmSpec> {
    triangle_gmm_spec_with(dim, TriangleGmm::default())
}

pub fn triangle_gmm_spec_with(dim: usize, shape: TriangleGmm) -> Result<GmmSpec> {
    if dim < 2 {
        return Err(Error::InvalidConfig(
            "triangle mixture needs at least two dimensions",
        ));
    }
    let radius = shape.side / 3.0.sqrt();
    let means = (0..3)
        .map(|k| {
            let angle = core::f64::consts::FRAC_PI_2 + k as f64 * 2.0 * core::f64::consts::PI / 3.0;
            let mut m = vec![0.0; dim];
            m[0] = radius * angle.cos();
            m[1] = radius * angle.sin();
            m
        })
        .collect();
    let cov = DMatrix::from_fn(dim, dim, |i, j| match (i == j, i < 2) {
        (true, true) => shape.plane_variance,
        (true, false) => shape.off_plane_variance,
        _ => 0.0,
    });
    Ok(GmmSpec {
        means,
        covariances: vec![cov; 3],
        weights: vec![1.0 / 3.0; 3],
    })
}

fn check_rows(data: &[Vec<f64>]) -> Result<usize> {
    let d = data.first().map(Vec::len).ok_or(Error::EmptyData)?;
    for (i, row) in data.iter().enumerate() {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i });
        }
    }
    Ok(d)
}

fn column_means(data: &[Vec<f64>], d: usize) -> Vec<f64> {
    let m = data.len() as f64;
    let mut mean = vec![0.0; d];
    for row in data {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    mean
}

/// Per-feature z-scoring with statistics frozen at fit time.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Sample standard deviation; constant features keep scale 1.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &[Vec<f64>]) -> Result<Self> {
        let d = check_rows(data)?;
        let mean = column_means(data, d);
        let denom = (data.len().max(2) - 1) as f64;
        let mut var = vec![0.0; d];
        for row in data {
            for k in 0..d {
                var[k] += (row[k] - mean[k]).powi(2) / denom;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply_all(&self, data: &[Vec<f64>]) -> Vec<Vec<f64>> {
        data.iter().map(|x| self.apply(x)).collect()
    }

    pub fn invert(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Full-dimensional PCA whitening `y = diag(1/sqrt(l_k)) V^T (x - mean)`.
///
/// Principal axes are ordered by decreasing variance. Eigenvalues below the
/// floor `eps` are raised to it, so those directions come out with variance
/// `l_k / eps` instead of one.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningTransform {
    pub mean: Vec<f64>,
    pub forward: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    pub eps: f64,
    /// Sample-covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

impl WhiteningTransform {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Whether principal direction `k` was raised to the floor.
    pub fn is_floored(&self, k: usize) -> bool {
        self.eigenvalues[k] < self.eps
    }

    pub fn apply(&self, x: &[f64], direction: Direction) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let out = match direction {
            Direction::Forward => {
                let centered =
                    DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(v, m)| v - m));
                (&self.forward * centered).iter().copied().collect()
            }
            Direction::Inverse => {
                let y = DVector::from_column_slice(x);
                (&self.inverse * y)
                    .iter()
                    .zip(&self.mean)
                    .map(|(v, m)| v + m)
                    .collect()
            }
        };
        Ok(out)
    }

    pub fn apply_all(&self, data: &[Vec<f64>], direction: Direction) -> Result<Vec<Vec<f64>>> {
        data.iter().map(|x| self.apply(x, direction)).collect()
    }
}

/// Fits a whitening transform to the sample covariance of `data`.
///
/// With `eps <= 0` any zero-variance direction is an error.
pub fn pca_whiten_fit(data: &[Vec<f64>], eps: f64) -> Result<WhiteningTransform> {
    let d = check_rows(data)?;
    if data.len() < 2 {
        return Err(Error::InvalidConfig("whitening needs at least two samples"));
    }
    let mean = column_means(data, d);
    let centered = DMatrix::from_fn(data.len(), d, |i, k| data[i][k] - mean[k]);
    let cov = centered.tr_mul(&centered) / (data.len() - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let top = eigenvalues[0];
    if eps <= 0.0
        && eigenvalues
            .iter()
            .any(|&l| l <= 1e-12 * top.max(f64::MIN_POSITIVE))
    {
        return Err(Error::InvalidConfig(
            "zero-variance direction needs a positive eigenvalue floor",
        ));
    }
    let floor = eps.max(0.0);
    let mut forward = DMatrix::zeros(d, d);
    let mut inverse = DMatrix::zeros(d, d);
    for (row, &idx) in order.iter().enumerate() {
        let l = eigenvalues[row].max(floor);
        let s = l.sqrt();
        let v = eig.eigenvectors.column(idx);
        for k in 0..d {
            forward[(row, k)] = v[k] / s;
            inverse[(k, row)] = v[k] * s;
        }
    }
    Ok(WhiteningTransform {
        mean,
        forward,
        inverse,
        eps: floor,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cov(data: &[Vec<f64>]) -> DMatrix<f64> {
        let d = data[0].len();
        let mean = column_means(data, d);
        let x = DMatrix::from_fn(data.len(), d, |i, k| data[i][k] - mean[k]);
        x.tr_mul(&x) / (data.len() - 1) as f64
    }

    #[test]
    fn tiny_single_component_collapses_to_mean() {
        let spec = GmmSpec {
            means: vec![vec![1.0, -2.0, 3.0]],
            covariances: vec![DMatrix::identity(3, 3) * 1e-20],
            weights: vec![1.0],
        };
        let (data, labels) = gmm_sample(&spec, 50, 1).unwrap();
        assert!(labels.iter().all(|&k| k == 0));
        for x in &data {
            for (v, m) in x.iter().zip(&spec.means[0]) {
                assert!((v - m).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn equal_weights_give_balanced_counts() {
        let spec = triangle_gmm_spec(4).unwrap();
        let (_, labels) = gmm_sample(&spec, 30_000, 7).unwrap();
        // Binomial(30000, 1/3): sd = 81.6, so +-300 is a 3.7 sigma band.
        for k in 0..3 {
            let n = labels.iter().filter(|&&c| c == k).count();
            assert!((n as i64 - 10_000).abs() <= 300, "component {k}: {n}");
        }
    }

    #[test]
    fn isotropic_component_covariance_matches() {
        let spec = GmmSpec {
            means: vec![vec![0.0; 3]],
            covariances: vec![DMatrix::identity(3, 3) * 2.0],
            weights: vec![1.0],
        };
        let (data, _) = gmm_sample(&spec, 100_000, 11).unwrap();
        let cov = sample_cov(&data);
        for i in 0..3 {
            assert!((cov[(i, i)] - 2.0).abs() < 0.1, "{cov}");
            for j in 0..3 {
                if i != j {
                    assert!(cov[(i, j)].abs() < 0.1);
                }
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = triangle_gmm_spec(3).unwrap();
        spec.weights = vec![0.5, 0.5, 0.5];
        assert!(gmm_sample(&spec, 10, 0).is_err());
        let mut spec = triangle_gmm_spec(3).unwrap();
        spec.covariances[1][(0, 0)] = -1.0;
        assert_eq!(gmm_sample(&spec, 10, 0), Err(Error::NotPositiveDefinite));
        assert!(gmm_sample(&triangle_gmm_spec(3).unwrap(), 0, 0).is_err());
    }

    #[test]
    fn triangle_is_equilateral_and_planar() {
        for d in [2, 5, 10] {
            let spec = triangle_gmm_spec(d).unwrap();
            assert_eq!(spec.dim(), d);
            let dist =
                |a: usize, b: usize| crate::stats::sq_dist(&spec.means[a], &spec.means[b]).sqrt();
            for (a, b) in [(0, 1), (1, 2), (0, 2)] {
                assert!((dist(a, b) - 6.0).abs() < 1e-12);
            }
            for m in &spec.means {
                assert!(m[2..].iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn standardizer_round_trips() {
        let data = vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]];
        let s = Standardizer::fit(&data).unwrap();
        assert_eq!(s.mean, vec![3.0, 5.0]);
        assert_eq!(s.scale, vec![2.0, 1.0]);
        assert_eq!(s.apply(&[5.0, 6.0]), vec![1.0, 1.0]);
        assert_eq!(s.invert(&[1.0, 1.0]), vec![5.0, 6.0]);
    }

    #[test]
    fn whitening_scales_one_dimensional_variance() {
        // Values +-1, +-3 have sample variance 20/3; rescale it to exactly 4.
        let k = (4.0 / (20.0 / 3.0f64)).sqrt();
        let data: Vec<Vec<f64>> = [1.0, -1.0, 3.0, -3.0]
            .iter()
            .map(|&v| vec![v * k])
            .collect();
        let t = pca_whiten_fit(&data, 1e-9).unwrap();
        assert!((t.forward[(0, 0)].abs() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn whitened_covariance_is_identity_and_inverse_round_trips() {
        let spec = GmmSpec {
            means: vec![vec![1.0, 2.0, 3.0]],
            covariances: vec![DMatrix::from_row_slice(
                3,
                3,
                &[4.0, 1.0, 0.5, 1.0, 2.0, 0.3, 0.5, 0.3, 1.0],
            )],
            weights: vec![1.0],
        };
        let (data, _) = gmm_sample(&spec, 2000, 5).unwrap();
        let t = pca_whiten_fit(&data, 1e-9).unwrap();
        let white = t.apply_all(&data, Direction::Forward).unwrap();
        let cov = sample_cov(&white);
        assert!((cov - DMatrix::identity(3, 3)).amax() < 1e-6);
        for x in data.iter().take(50) {
            let back = t
                .apply(&t.apply(x, Direction::Forward).unwrap(), Direction::Inverse)
                .unwrap();
            assert!(crate::stats::sq_dist(x, &back).sqrt() < 1e-8);
        }
        assert!((&t.forward * &t.inverse - DMatrix::identity(3, 3)).amax() < 1e-8);
    }

    #[test]
    fn white_data_gives_orthogonal_transform() {
        let spec = GmmSpec {
            means: vec![vec![0.0; 4]],
            covariances: vec![DMatrix::identity(4, 4)],
            weights: vec![1.0],
        };
        let (data, _) = gmm_sample(&spec, 50_000, 2).unwrap();
        let t = pca_whiten_fit(&data, 1e-9).unwrap();
        let gram = &t.forward * t.forward.transpose();
        assert!((gram - DMatrix::identity(4, 4)).amax() < 0.05);
    }

    #[test]
    fn zero_variance_needs_floor() {
        let data = vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]];
        assert!(pca_whiten_fit(&data, 0.0).is_err());
        let t = pca_whiten_fit(&data, 1e-3).unwrap();
        assert!(t.is_floored(1) && !t.is_floored(0));
    }
}
