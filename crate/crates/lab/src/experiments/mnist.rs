//! Digit-to-digit transition on a toroidal map of whitened MNIST.

use std::path::Path as FsPath;

use music_core::data::{pca_whiten_fit, Direction, WhiteningTransform};
use music_core::metrics::{global_continuity, step_continuity, Path};
use music_core::music::{informed_step, Mode, MusicConfig, Trajectory};
use music_core::som::{bmu, label_prototypes, train_som, Decay, Init, SomTrainConfig};
use music_core::{seeded_rng, Lattice, PrototypeSet, Topology};
use serde::{Deserialize, Serialize};

use super::gmm::{nearest_index, sq_dist};
use crate::error::{LabError, Result};
use crate::idx::{load_mnist_idx, split_paths, MnistSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MnistConfig {
    /// Use only the first `n` training images.
    pub train_limit: Option<usize>,
    /// Absolute eigenvalue floor of the whitening, in squared pixel units.
    pub eigen_floor: f64,
    pub rows: usize,
    pub cols: usize,
    pub topology: Topology,
    pub som: SomTrainConfig,
    pub source_label: u8,
    pub target_label: u8,
    /// Which test image of the source class to start from.
    pub source_index: usize,
    pub max_steps: usize,
    pub music: MusicConfig,
}

impl Default for MnistConfig {
    fn default() -> Self {
        Self {
            train_limit: None,
            eigen_floor: 1e-2,
            rows: 32,
            cols: 32,
            topology: Topology::Toroidal,
            som: SomTrainConfig {
                epochs: 10,
                learning_rate_initial: 0.5,
                learning_rate_final: 0.01,
                radius_initial: 16.0,
                radius_final: 0.5,
                decay: Decay::Exponential,
                seed: 0,
                init: Init::PcaPlane,
            },
            source_label: 0,
            target_label: 1,
            source_index: 0,
            max_steps: 500,
            music: MusicConfig {
                track_conditioning: false,
                ..MusicConfig::default()
            },
        }
    }
}

pub fn load_split(dir: &FsPath, train: bool) -> Result<MnistSet> {
    let (images, labels) = split_paths(dir, train);
    Ok(load_mnist_idx(&images, &labels)?)
}

/// Whitening plus the labelled map trained in whitened space.
#[derive(Debug, Clone)]
pub struct MnistMap {
    pub whitening: WhiteningTransform,
    pub protos: PrototypeSet,
    pub labels: Vec<Option<u32>>,
    /// Whitened mean of each digit class in the training data.
    pub class_means: Vec<Vec<f64>>,
}

pub fn build_map(train: &MnistSet, cfg: &MnistConfig) -> Result<MnistMap> {
    let n = cfg
        .train_limit
        .unwrap_or(train.data.len())
        .min(train.data.len());
    let data = &train.data[..n];
    let labels: Vec<u32> = train.labels[..n].iter().map(|&l| u32::from(l)).collect();
    let whitening = pca_whiten_fit(data, cfg.eigen_floor)?;
    let white = whitening.apply_all(data, Direction::Forward)?;
    let lattice = Lattice::new(cfg.rows, cfg.cols, cfg.topology)?;
    let protos = train_som(&white, lattice, &cfg.som)?;
    let unit_labels = label_prototypes(&protos, &white, &labels)?;
    let d = whitening.dim();
    let class_means = (0..10u32)
        .map(|c| {
            let members: Vec<&Vec<f64>> = white
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(x, _)| x)
                .collect();
            let mut m = vec![0.0; d];
            for x in &members {
                m.iter_mut().zip(x.iter()).for_each(|(a, b)| *a += b);
            }
            m.iter_mut().for_each(|a| *a /= members.len().max(1) as f64);
            m
        })
        .collect();
    Ok(MnistMap {
        whitening,
        protos,
        labels: unit_labels,
        class_means,
    })
}

impl MnistMap {
    /// Unit labelled `label` whose prototype is closest to that class mean.
    pub fn class_unit(&self, label: u8) -> Result<usize> {
        let mean = &self.class_means[usize::from(label)];
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(u32::from(label)))
            .map(|(j, _)| j)
            .min_by(|&i, &j| {
                sq_dist(self.protos.weight(i), mean)
                    .total_cmp(&sq_dist(self.protos.weight(j), mean))
            })
            .ok_or_else(|| LabError::Setup(format!("no prototype carries label {label}")))
    }

    /// Maps whitened states back to pixel space.
    pub fn decode(&self, states: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.whitening.apply_all(states, Direction::Inverse)?)
    }
}

#[derive(Debug, Clone)]
pub struct MnistTransition {
    /// Index into the test split of the starting image.
    pub source_image: usize,
    pub target_unit: usize,
    pub trajectory: Trajectory,
    /// First state index whose BMU is the target unit.
    pub reached_at: Option<usize>,
    /// `cos(dz_t, dz_{t+1})` over consecutive nonzero steps.
    pub step_continuity: Vec<f64>,
    /// `cos(dz_t, dz_0)` for every nonzero step.
    pub global_continuity: Vec<f64>,
}

/// Informed trajectory from a source-class test image to the target-class
/// unit, stopped as soon as it enters the target's Voronoi cell.
pub fn mnist_transition(
    map: &MnistMap,
    test: &MnistSet,
    cfg: &MnistConfig,
) -> Result<MnistTransition> {
    let source_image = test
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == cfg.source_label)
        .map(|(i, _)| i)
        .nth(cfg.source_index)
        .ok_or_else(|| {
            LabError::Setup(format!(
                "no test image #{} of class {}",
                cfg.source_index, cfg.source_label
            ))
        })?;
    let target_unit = map.class_unit(cfg.target_label)?;
    let z0 = map
        .whitening
        .apply(&test.data[source_image], Direction::Forward)?;
    let protos = &map.protos;

    let mut rng = seeded_rng(cfg.music.seed);
    let mut z = z0.clone();
    let mut states = vec![z0];
    let mut bmus = vec![bmu(&z, protos)?];
    let mut steps = Vec::new();
    let mut reached_at = (bmus[0] == target_unit).then_some(0);
    while reached_at.is_none() && steps.len() < cfg.max_steps {
        let step = informed_step(&z, protos, target_unit, &cfg.music, &mut rng)?;
        z.iter_mut().zip(&step.dz).for_each(|(a, b)| *a += b);
        let unit = bmu(&z, protos)?;
        states.push(z.clone());
        bmus.push(unit);
        steps.push(step);
        if unit == target_unit {
            reached_at = Some(steps.len());
        }
    }
    let trajectory = Trajectory {
        states,
        steps,
        bmus,
        mode: Mode::Informed {
            target: target_unit,
        },
        config: cfg.music.clone(),
    };
    let path = Path::from(&trajectory);
    Ok(MnistTransition {
        source_image,
        target_unit,
        step_continuity: step_continuity(&path),
        global_continuity: global_continuity(&path).unwrap_or_default(),
        reached_at,
        trajectory,
    })
}

/// Nearest class mean in whitened space, a crude readout of what a state
/// looks like.
pub fn nearest_class(map: &MnistMap, z: &[f64]) -> usize {
    nearest_index(z, &map.class_means)
}
