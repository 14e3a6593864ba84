#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::som::PrototypeSet;

/// Per-step cap on `||dz||`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TrustRegion {
    /// Fixed radius `tau`.
    Absolute(f64),
    /// `tau = rho * ||z - w_BMU||`, shrinking as the input nears a prototype.
    BmuRelative(f64),
}

impl TrustRegion {
    /// Radius at `z`; a zero radius is an error because no step could be taken.
    pub fn resolve(&self, z: &[f64], protos: &PrototypeSet) -> Result<f64> {
        let tau = match *self {
            TrustRegion::Absolute(tau) => tau,
            TrustRegion::BmuRelative(rho) => {
                protos.check_input(z)?;
                rho * protos.nearest(z).1.sqrt()
            }
        };
        if tau > 0.0 {
            Ok(tau)
        } else {
            Err(Error::ZeroTrustRadius)
        }
    }
}

/// Random choice of the active targets in cluster exploration.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Subsample {
    /// Every target in every pass.
    All,
    /// `k` targets drawn without replacement.
    FixedK(usize),
    /// Each target kept independently with probability `p`.
    Bernoulli(f64),
    /// One target drawn uniformly; preservation then covers every other unit.
    SingleRandom,
}

/// Diagonal row weights `W_S`, `W_T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum WeightScheme {
    Uniform,
    /// `exp(-d_j^2 / (2 h^2))` with `h` the median current distance.
    GaussianDistance,
}

/// Which units are held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PreserveScope {
    AllNonTargets,
    /// Lattice ring of the given Chebyshev radius around the current BMU.
    Ring(usize),
}

/// Units of the requested target change `b_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TargetChange {
    /// `b_t = -eta * a_t(z)`.
    SquaredDistance,
    /// `b_t = -eta * d_t(z)`.
    Distance,
}

/// Hyperparameters of one MUSIC run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MusicConfig {
    /// Attraction weight in `[0, 1]`; preservation gets `1 - gamma`.
    pub gamma: f64,
    /// Tikhonov ridge, strictly positive.
    pub lambda: f64,
    /// Fraction of the target activation to remove per step, in `(0, 1]`.
    pub eta: f64,
    pub trust: TrustRegion,
    /// Standard deviation of the input-space step noise.
    pub sigma_z: f64,
    /// Standard deviation of the target noise added to `b`.
    pub sigma_b: f64,
    /// Norm of the random perturbation added to every Jacobian row.
    pub jitter: f64,
    /// Relinearization passes per outer step.
    pub passes: usize,
    pub subsample: Subsample,
    pub weight_scheme: WeightScheme,
    pub preserve_scope: PreserveScope,
    pub target_change: TargetChange,
    pub normalize_rows: bool,
    /// Estimate the smallest eigenvalue of the normal matrix each step.
    pub track_conditioning: bool,
    pub seed: u64,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self {
            gamma: 0.85,
            lambda: 1e-4,
            eta: 0.04,
            trust: TrustRegion::BmuRelative(0.02),
            sigma_z: 0.0,
            sigma_b: 0.0,
            jitter: 0.0,
            passes: 1,
            subsample: Subsample::All,
            weight_scheme: WeightScheme::Uniform,
            preserve_scope: PreserveScope::AllNonTargets,
            target_change: TargetChange::SquaredDistance,
            normalize_rows: true,
            track_conditioning: true,
            seed: 0,
        }
    }
}

impl MusicConfig {
    /// Copy with every noise channel switched off.
    pub fn noiseless(&self) -> Self {
        Self {
            sigma_z: 0.0,
            sigma_b: 0.0,
            jitter: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig("gamma must lie in [0, 1]"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be positive"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidConfig("eta must lie in (0, 1]"));
        }
        match self.trust {
            TrustRegion::Absolute(v) | TrustRegion::BmuRelative(v)
                if !(v > 0.0 && v.is_finite()) =>
            {
                return Err(Error::InvalidConfig("trust radius must be positive"));
            }
            _ => {}
        }
        for v in [self.sigma_z, self.sigma_b, self.jitter] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig("noise scales must be non-negative"));
            }
        }
        if self.passes == 0 {
            return Err(Error::InvalidConfig("passes must be at least 1"));
        }
        match self.subsample {
            Subsample::FixedK(0) => {
                return Err(Error::InvalidConfig("fixed-k subsample needs k >= 1"))
            }
            Subsample::Bernoulli(p) if !(p > 0.0 && p <= 1.0) => {
                return Err(Error::InvalidConfig(
                    "bernoulli keep-probability must lie in (0, 1]",
                ));
            }
            _ => {}
        }
        Ok(())
    }
}
