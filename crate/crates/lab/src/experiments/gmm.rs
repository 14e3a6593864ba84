//! The synthetic benchmark: a SOM trained on the three-component triangle
//! mixture.

use music_core::data::{gmm_sample, triangle_gmm_spec, GmmSpec};
use music_core::som::{train_som, Decay, Init, SomTrainConfig};
use music_core::{Lattice, PrototypeSet, Topology};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmBenchConfig {
    pub dim: usize,
    pub train_size: usize,
    pub rows: usize,
    pub cols: usize,
    /// Rectangular by default, matching the synthetic setup.
    pub topology: Topology,
    pub som: SomTrainConfig,
    /// Seed of the training sample; the SOM has its own seed in `som`.
    pub seed: u64,
}

impl Default for GmmBenchConfig {
    fn default() -> Self {
        Self {
            dim: 10,
            train_size: 3000,
            rows: 20,
            cols: 20,
            topology: Topology::Rectangular,
            som: SomTrainConfig {
                epochs: 20,
                learning_rate_initial: 0.5,
                learning_rate_final: 0.01,
                radius_initial: 10.0,
                radius_final: 0.5,
                decay: Decay::Exponential,
                seed: 1,
                init: Init::PcaPlane,
            },
            seed: 0,
        }
    }
}

/// Trained map plus the mixture it was trained on.
#[derive(Debug, Clone)]
pub struct GmmBench {
    pub spec: GmmSpec,
    pub protos: PrototypeSet,
    /// Mixture component whose mean is nearest to each prototype.
    pub unit_component: Vec<usize>,
}

impl GmmBench {
    pub fn build(cfg: &GmmBenchConfig) -> Result<Self> {
        let spec = triangle_gmm_spec(cfg.dim)?;
        let (data, _) = gmm_sample(&spec, cfg.train_size, cfg.seed)?;
        let lattice = Lattice::new(cfg.rows, cfg.cols, cfg.topology)?;
        let protos = train_som(&data, lattice, &cfg.som)?;
        let unit_component = protos
            .iter()
            .map(|w| nearest_index(w, &spec.means))
            .collect::<Vec<_>>();
        for c in 0..spec.components() {
            if !unit_component.contains(&c) {
                return Err(LabError::Setup(format!(
                    "no prototype is assigned to component {c}"
                )));
            }
        }
        Ok(Self {
            spec,
            protos,
            unit_component,
        })
    }

    /// Fresh mixture draws, independent of the training sample for any
    /// `seed` other than the training seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
        Ok(gmm_sample(&self.spec, n, seed)?)
    }

    pub fn component_units(&self, component: usize) -> Vec<usize> {
        (0..self.protos.len())
            .filter(|&j| self.unit_component[j] == component)
            .collect()
    }

    /// Prototype closest to the mean of `component`.
    pub fn unit_near_mean(&self, component: usize) -> usize {
        let rows = self.protos.to_rows();
        nearest_index(&self.spec.means[component], &rows)
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn nearest_index(x: &[f64], candidates: &[Vec<f64>]) -> usize {
    candidates
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| sq_dist(x, a).total_cmp(&sq_dist(x, b)))
        .map(|(i, _)| i)
        .expect("non-empty candidates")
}
