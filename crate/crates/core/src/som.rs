//! Self-Organizing Maps: lattice geometry, prototype storage, online
//! training, best-matching-unit queries and majority-label annotation.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::stats::sq_dist;

/// Boundary handling of the unit grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "lowercase")
)]
pub enum Topology {
    Rectangular,
    /// Opposite edges are glued together.
    Toroidal,
}

/// A `rows x cols` grid of units, numbered row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    rows: usize,
    cols: usize,
    topology: Topology,
}

impl Lattice {
    pub fn new(rows: usize, cols: usize, topology: Topology) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig("lattice sides must be positive"));
        }
        Ok(Self {
            rows,
            cols,
            topology,
        })
    }

    pub fn rectangular(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, Topology::Rectangular)
    }

    pub fn toroidal(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, Topology::Toroidal)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Number of units.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid coordinate `(row, col)` of a unit.
    pub fn coords(&self, unit: usize) -> (usize, usize) {
        (unit / self.cols, unit % self.cols)
    }

    pub fn unit(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    fn axis_offset(&self, a: usize, b: usize, extent: usize) -> usize {
        let d = a.abs_diff(b);
        match self.topology {
            Topology::Rectangular => d,
            Topology::Toroidal => d.min(extent - d),
        }
    }

    fn offsets(&self, i: usize, j: usize) -> (usize, usize) {
        let (ri, ci) = self.coords(i);
        let (rj, cj) = self.coords(j);
        (
            self.axis_offset(ri, rj, self.rows),
            self.axis_offset(ci, cj, self.cols),
        )
    }

    /// Ring distance (max of the per-axis offsets), wrapping on a torus.
    pub fn chebyshev_distance(&self, i: usize, j: usize) -> usize {
        let (dr, dc) = self.offsets(i, j);
        dr.max(dc)
    }

    /// Squared Euclidean grid distance, wrapping on a torus.
    pub fn distance_sq(&self, i: usize, j: usize) -> f64 {
        let (dr, dc) = self.offsets(i, j);
        (dr * dr + dc * dc) as f64
    }

    /// All units within ring distance `radius` of `center`, sorted.
    pub fn neighborhood(&self, center: usize, radius: usize) -> Vec<usize> {
        let (rc, cc) = self.coords(center);
        let r = radius.min(self.rows.max(self.cols)) as isize;
        let mut units = Vec::new();
        for dr in -r..=r {
            for dc in -r..=r {
                let row = rc as isize + dr;
                let col = cc as isize + dc;
                let cell = match self.topology {
                    Topology::Rectangular => {
                        if row < 0
                            || col < 0
                            || row >= self.rows as isize
                            || col >= self.cols as isize
                        {
                            continue;
                        }
                        (row as usize, col as usize)
                    }
                    Topology::Toroidal => (
                        row.rem_euclid(self.rows as isize) as usize,
                        col.rem_euclid(self.cols as isize) as usize,
                    ),
                };
                units.push(self.unit(cell.0, cell.1));
            }
        }
        units.sort_unstable();
        units.dedup();
        units
    }
}

/// Prototype vectors of a map together with the lattice they live on.
///
/// Weights are stored row-major, one row of length `dim` per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    lattice: Lattice,
    dim: usize,
    weights: Vec<f64>,
}

impl PrototypeSet {
    pub fn new(lattice: Lattice, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("prototype dimension must be positive"));
        }
        if weights.len() != lattice.len() * dim {
            return Err(Error::LatticeMismatch {
                rows: lattice.rows(),
                cols: lattice.cols(),
                units: weights.len() / dim,
            });
        }
        if let Some(pos) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite { row: pos / dim });
        }
        Ok(Self {
            lattice,
            dim,
            weights,
        })
    }

    pub fn from_rows(lattice: Lattice, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptyData)?;
        let mut weights = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            weights.extend_from_slice(row);
        }
        Self::new(lattice, dim, weights)
    }

    /// Loose point cloud on a `1 x N` rectangular lattice.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let lattice = Lattice::rectangular(1, points.len().max(1))?;
        Self::from_rows(lattice, points)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Number of prototypes `N`.
    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Input dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self, unit: usize) -> &[f64] {
        &self.weights[unit * self.dim..(unit + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> core::slice::ChunksExact<'_, f64> {
        self.weights.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    pub(crate) fn weight_mut(&mut self, unit: usize) -> &mut [f64] {
        &mut self.weights[unit * self.dim..(unit + 1) * self.dim]
    }

    pub(crate) fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: z.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_unit(&self, unit: usize) -> Result<()> {
        if unit >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: unit,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// Nearest prototype; assumes `z` has the right length.
    pub(crate) fn nearest(&self, z: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, w) in self.iter().enumerate() {
            let d = sq_dist(z, w);
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }
}

/// Best-matching unit: `argmin_j ||z - w_j||`, ties going to the lowest index.
pub fn bmu(z: &[f64], protos: &PrototypeSet) -> Result<usize> {
    protos.check_input(z)?;
    Ok(protos.nearest(z).0)
}

/// Units within ring distance `radius` of `center` on the map lattice.
pub fn lattice_neighborhood(
    center: usize,
    radius: usize,
    protos: &PrototypeSet,
) -> Result<Vec<usize>> {
    protos.check_unit(center)?;
    Ok(protos.lattice().neighborhood(center, radius))
}

/// Mean distance from each sample to its best-matching prototype.
pub fn quantization_error(protos: &PrototypeSet, data: &[Vec<f64>]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut total = 0.0;
    for x in data {
        protos.check_input(x)?;
        total += protos.nearest(x).1.sqrt();
    }
    Ok(total / data.len() as f64)
}

/// Majority label of the samples each unit wins.
///
/// Units that win no sample get `None`; ties go to the smallest label.
pub fn label_prototypes(
    protos: &PrototypeSet,
    data: &[Vec<f64>],
    labels: &[u32],
) -> Result<Vec<Option<u32>>> {
    if data.len() != labels.len() {
        return Err(Error::LabelMismatch {
            labels: labels.len(),
            rows: data.len(),
        });
    }
    let mut counts: Vec<BTreeMap<u32, usize>> = vec![BTreeMap::new(); protos.len()];
    for (x, &label) in data.iter().zip(labels) {
        protos.check_input(x)?;
        let unit = protos.nearest(x).0;
        *counts[unit].entry(label).or_default() += 1;
    }
    Ok(counts
        .iter()
        .map(|c| {
            let mut best: Option<(u32, usize)> = None;
            for (&label, &n) in c {
                if best.is_none_or(|(_, m)| n > m) {
                    best = Some((label, n));
                }
            }
            best.map(|(label, _)| label)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "kebab-case")
)]
pub enum Decay {
    /// Geometric interpolation between the initial and final values.
    Exponential,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "kebab-case")
)]
pub enum Init {
    /// Prototypes start at randomly chosen data rows.
    RandomSample,
    /// Prototypes start on a grid spanning the two leading principal axes.
    PcaPlane,
}

/// Online training schedule.
///
/// Rates and radii move from their initial to their final values over the
/// whole run (all epochs), one update per presented sample. Radii are in
/// lattice units.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default)
)]
pub struct SomTrainConfig {
    pub epochs: usize,
    pub learning_rate_initial: f64,
    pub learning_rate_final: f64,
    pub radius_initial: f64,
    pub radius_final: f64,
    pub decay: Decay,
    pub seed: u64,
    pub init: Init,
}

impl Default for SomTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate_initial: 0.5,
            learning_rate_final: 0.01,
            radius_initial: 3.0,
            radius_final: 0.5,
            decay: Decay::Exponential,
            seed: 0,
            init: Init::RandomSample,
        }
    }
}

impl SomTrainConfig {
    /// Defaults with the starting radius set to half the longer lattice side.
    pub fn for_lattice(lattice: &Lattice) -> Self {
        Self {
            radius_initial: (lattice.rows().max(lattice.cols()) as f64 / 2.0).max(1.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1"));
        }
        if !(self.learning_rate_initial > 0.0 && self.learning_rate_final > 0.0) {
            return Err(Error::InvalidConfig("learning rates must be positive"));
        }
        if self.learning_rate_final > self.learning_rate_initial {
            return Err(Error::InvalidConfig("learning rate must be non-increasing"));
        }
        if !(self.radius_initial >= 0.0 && self.radius_final >= 0.0) {
            return Err(Error::InvalidConfig("radii must be non-negative"));
        }
        if self.radius_final > self.radius_initial {
            return Err(Error::InvalidConfig("radius must be non-increasing"));
        }
        Ok(())
    }
}

/// Per-epoch diagnostics of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Quantization error measured after each epoch.
    pub quantization_error: Vec<f64>,
}

// Below this radius the kernel only touches the winning unit.
const MIN_RADIUS: f64 = 1e-2;
// Units with exp(-d^2 / 2 sigma^2) < exp(-CUTOFF / 2) are skipped.
const KERNEL_CUTOFF: f64 = 32.0;

fn schedule(start: f64, end: f64, progress: f64, decay: Decay) -> f64 {
    match decay {
        Decay::Linear => start + (end - start) * progress,
        Decay::Exponential => {
            let start = start.max(MIN_RADIUS.min(start));
            if start <= 0.0 {
                return 0.0;
            }
            let end = end.max(MIN_RADIUS.min(start));
            start * (end / start).powf(progress)
        }
    }
}

fn check_data(data: &[Vec<f64>]) -> Result<usize> {
    let dim = data.first().map(Vec::len).ok_or(Error::EmptyData)?;
    if dim == 0 {
        return Err(Error::InvalidConfig("data rows must be non-empty"));
    }
    for (i, row) in data.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i });
        }
    }
    Ok(dim)
}

fn init_random_sample(
    lattice: Lattice,
    data: &[Vec<f64>],
    rng: &mut crate::Rng,
) -> Result<PrototypeSet> {
    let n = lattice.len();
    let rows: Vec<Vec<f64>> = if data.len() >= n {
        rand::seq::index::sample(rng, data.len(), n)
            .into_iter()
            .map(|i| data[i].clone())
            .collect()
    } else {
        (0..n)
            .map(|_| data[rng.random_range(0..data.len())].clone())
            .collect()
    };
    PrototypeSet::from_rows(lattice, &rows)
}

fn init_pca_plane(lattice: Lattice, data: &[Vec<f64>], dim: usize) -> Result<PrototypeSet> {
    let m = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in data {
        for (acc, v) in mean.iter_mut().zip(x) {
            *acc += v / m;
        }
    }
    let centered = DMatrix::from_fn(data.len(), dim, |i, k| data[i][k] - mean[k]);
    let cov = centered.tr_mul(&centered) / m.max(1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let axis = |k: usize| -> (Vec<f64>, f64) {
        match order.get(k) {
            Some(&idx) => (
                eig.eigenvectors.column(idx).iter().copied().collect(),
                eig.eigenvalues[idx].max(0.0).sqrt(),
            ),
            None => (vec![0.0; dim], 0.0),
        }
    };
    let (v1, s1) = axis(0);
    let (v2, s2) = axis(1);
    let span = |i: usize, extent: usize| -> f64 {
        if extent <= 1 {
            0.0
        } else {
            2.0 * (i as f64 / (extent - 1) as f64) - 1.0
        }
    };
    let mut weights = Vec::with_capacity(lattice.len() * dim);
    for unit in 0..lattice.len() {
        let (r, c) = lattice.coords(unit);
        let a = 2.0 * s1 * span(r, lattice.rows());
        let b = 2.0 * s2 * span(c, lattice.cols());
        weights.extend((0..dim).map(|k| mean[k] + a * v1[k] + b * v2[k]));
    }
    PrototypeSet::new(lattice, dim, weights)
}

/// Trains a map with the classic online rule.
///
/// Each presented sample pulls every unit toward it with strength
/// `rate * exp(-latdist^2 / (2 radius^2))`, where `latdist` is the Euclidean
/// lattice distance to the winner (wrapping on a torus). Samples are visited
/// in a fresh random order each epoch. The result is a pure function of the
/// data, lattice and config.
pub fn train_som(
    data: &[Vec<f64>],
    lattice: Lattice,
    cfg: &SomTrainConfig,
) -> Result<PrototypeSet> {
    train_som_with_report(data, lattice, cfg).map(|(protos, _)| protos)
}

pub fn train_som_with_report(
    data: &[Vec<f64>],
    lattice: Lattice,
    cfg: &SomTrainConfig,
) -> Result<(PrototypeSet, TrainReport)> {
    cfg.validate()?;
    let dim = check_data(data)?;
    let mut rng = crate::seeded_rng(cfg.seed);
    let mut protos = match cfg.init {
        Init::RandomSample => init_random_sample(lattice, data, &mut rng)?,
        Init::PcaPlane => init_pca_plane(lattice, data, dim)?,
    };

    let total = cfg.epochs * data.len();
    let denom = total.saturating_sub(1).max(1) as f64;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut qe = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let progress = step as f64 / denom;
            let rate = schedule(
                cfg.learning_rate_initial,
                cfg.learning_rate_final,
                progress,
                cfg.decay,
            );
            let radius = schedule(cfg.radius_initial, cfg.radius_final, progress, cfg.decay);
            let x = &data[i];
            let winner = protos.nearest(x).0;
            let two_var = 2.0 * radius * radius;
            for unit in 0..lattice.len() {
                let d2 = lattice.distance_sq(winner, unit);
                let h = if unit == winner {
                    1.0
                } else if two_var <= 0.0 || d2 > KERNEL_CUTOFF * radius * radius {
                    continue;
                } else {
                    (-d2 / two_var).exp()
                };
                let g = rate * h;
                for (w, v) in protos.weight_mut(unit).iter_mut().zip(x) {
                    *w += g * (v - *w);
                }
            }
            step += 1;
        }
        qe.push(quantization_error(&protos, data)?);
    }
    Ok((
        protos,
        TrainReport {
            quantization_error: qe,
        },
    ))
}
