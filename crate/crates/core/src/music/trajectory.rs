use alloc::boxed::Box;
use alloc::vec::Vec;

use super::config::MusicConfig;
use super::modes::{cluster_step, free_step, informed_step, radial_baseline_step, StepResult};
use crate::error::{Error, Result};
use crate::som::PrototypeSet;

/// What drives a trajectory.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case", tag = "mode"))]
pub enum Mode {
    Free,
    Informed {
        target: usize,
    },
    Cluster {
        targets: Vec<usize>,
    },
    /// Radial moves away from (positive length) or toward (negative length)
    /// `units[t % units.len()]` at step `t`, without any preservation.
    Baseline {
        units: Vec<usize>,
        step_len: f64,
    },
}

/// Recorded states, steps and best-matching units of one run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub steps: Vec<StepResult>,
    pub bmus: Vec<usize>,
    pub mode: Mode,
    pub config: MusicConfig,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states
            .last()
            .expect("a trajectory holds at least its start")
    }
}

/// Iterates `steps` outer updates from `z0`, relinearizing after every pass.
///
/// Each of the `cfg.passes` passes of an outer step is recorded as its own
/// step, so the trajectory holds `steps * passes` steps. All randomness comes
/// from a generator seeded with `cfg.seed`. A failing step is reported with
/// its index.
pub fn run_trajectory(
    z0: &[f64],
    protos: &PrototypeSet,
    mode: &Mode,
    cfg: &MusicConfig,
    steps: usize,
) -> Result<Trajectory> {
    protos.check_input(z0)?;
    cfg.validate()?;
    match mode {
        Mode::Cluster { targets } if targets.is_empty() => return Err(Error::EmptySubset),
        Mode::Baseline { units, .. } if units.is_empty() => return Err(Error::EmptySubset),
        _ => {}
    }
    let mut rng = crate::seeded_rng(cfg.seed);
    let total = steps * cfg.passes;
    let mut states = Vec::with_capacity(total + 1);
    let mut records = Vec::with_capacity(total);
    let mut bmus = Vec::with_capacity(total + 1);
    let mut z = z0.to_vec();
    bmus.push(protos.nearest(&z).0);
    states.push(z.clone());

    for step in 0..total {
        let outer = step / cfg.passes;
        let result = match mode {
            Mode::Free => free_step(&z, protos, cfg, &mut rng),
            Mode::Informed { target } => informed_step(&z, protos, *target, cfg, &mut rng),
            Mode::Cluster { targets } => cluster_step(&z, protos, targets, cfg, &mut rng),
            Mode::Baseline { units, step_len } => {
                let j = units[outer % units.len()];
                radial_baseline_step(&z, protos, j, *step_len).map(|dz| StepResult {
                    dz_deterministic: dz.clone(),
                    dz,
                    selected_targets: alloc::vec![j],
                    h_sigma_min: None,
                    clipped: false,
                })
            }
        }
        .map_err(|e| Error::Step {
            step,
            source: Box::new(e),
        })?;
        for (zi, di) in z.iter_mut().zip(&result.dz) {
            *zi += di;
        }
        bmus.push(protos.nearest(&z).0);
        states.push(z.clone());
        records.push(result);
    }
    Ok(Trajectory {
        states,
        steps: records,
        bmus,
        mode: mode.clone(),
        config: cfg.clone(),
    })
}
