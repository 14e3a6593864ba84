//! Continuity and topology-aware statistics of recorded trajectories.
//!
//! Steps of exactly zero length carry no direction: they are left out of
//! every cosine and curvature but still count as time spent in a cell.

use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::music::Trajectory;
use crate::stats::{dot, median, norm, Spread};

/// Borrowed view of a path: states and the best-matching unit of each.
#[derive(Debug, Clone, Copy)]
pub struct Path<'a> {
    states: &'a [Vec<f64>],
    bmus: &'a [usize],
}

impl<'a> Path<'a> {
    pub fn new(states: &'a [Vec<f64>], bmus: &'a [usize]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyData);
        }
        if states.len() != bmus.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                found: bmus.len(),
            });
        }
        let d = states[0].len();
        if let Some(bad) = states.iter().find(|s| s.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Ok(Self { states, bmus })
    }

    pub fn states(&self) -> &'a [Vec<f64>] {
        self.states
    }

    pub fn bmus(&self) -> &'a [usize] {
        self.bmus
    }

    /// Number of steps `T`.
    pub fn len(&self) -> usize {
        self.states.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn step(&self, t: usize) -> Vec<f64> {
        self.states[t + 1]
            .iter()
            .zip(&self.states[t])
            .map(|(b, a)| b - a)
            .collect()
    }

    fn steps(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|t| self.step(t)).collect()
    }
}

impl<'a> From<&'a Trajectory> for Path<'a> {
    fn from(t: &'a Trajectory) -> Self {
        Self {
            states: &t.states,
            bmus: &t.bmus,
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    (dot(a, b) / (norm(a) * norm(b))).clamp(-1.0, 1.0)
}

/// Indices of the nonzero steps.
fn moving(steps: &[Vec<f64>]) -> Vec<usize> {
    (0..steps.len())
        .filter(|&t| norm(&steps[t]) > 0.0)
        .collect()
}

/// Cosine between each nonzero step and the next nonzero one. Each entry is
/// paired with the index of its earlier step.
fn continuity_pairs(steps: &[Vec<f64>]) -> Vec<(usize, f64)> {
    moving(steps)
        .windows(2)
        .map(|w| (w[0], cosine(&steps[w[0]], &steps[w[1]])))
        .collect()
}

/// `C_t = cos(dz_t, dz_{t+1})` over consecutive nonzero steps. Empty when
/// fewer than two steps move.
pub fn step_continuity(path: &Path) -> Vec<f64> {
    continuity_pairs(&path.steps())
        .into_iter()
        .map(|(_, c)| c)
        .collect()
}

/// `cos(dz_t, dz_0)` for every nonzero step; `None` when the first step has
/// zero length.
pub fn global_continuity(path: &Path) -> Option<Vec<f64>> {
    let steps = path.steps();
    let first = steps.first()?;
    if norm(first) == 0.0 {
        return None;
    }
    Some(
        moving(&steps)
            .into_iter()
            .map(|t| cosine(&steps[t], first))
            .collect(),
    )
}

/// Fraction of steps after which the BMU differs. Zero for a path without
/// steps.
pub fn transition_rate(path: &Path) -> f64 {
    if path.is_empty() {
        return 0.0;
    }
    let changes = path.bmus.windows(2).filter(|w| w[0] != w[1]).count();
    changes as f64 / path.len() as f64
}

/// Lengths of the maximal runs of constant BMU over the states.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DwellStats {
    pub lengths: Vec<usize>,
    pub median: f64,
    pub iqr: f64,
}

/// Run lengths of the BMU sequence; they sum to the number of states.
pub fn dwell_stats(path: &Path) -> DwellStats {
    let lengths = run_lengths(path.bmus);
    let values: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    let spread = Spread::of(&values).expect("a path has at least one state");
    DwellStats {
        lengths,
        median: spread.median,
        iqr: spread.iqr(),
    }
}

fn run_lengths(bmus: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < bmus.len() {
        let start = i;
        while i < bmus.len() && bmus[i] == bmus[start] {
            i += 1;
        }
        out.push(i - start);
    }
    out
}

/// Turning angle per unit step length, split by whether the BMU changes
/// across the step.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Curvature {
    pub within: Vec<f64>,
    pub trans: Vec<f64>,
    pub median_within: Option<f64>,
    pub median_trans: Option<f64>,
}

/// `kappa_t = arccos(C_t) / ||dz_t||`, labelled "trans" when
/// `BMU(z_{t+1}) != BMU(z_t)` and "within" otherwise.
pub fn curvature(path: &Path) -> Curvature {
    let steps = path.steps();
    let mut within = Vec::new();
    let mut trans = Vec::new();
    for (t, c) in continuity_pairs(&steps) {
        let kappa = Float::acos(c) / norm(&steps[t]);
        if path.bmus[t + 1] != path.bmus[t] {
            trans.push(kappa);
        } else {
            within.push(kappa);
        }
    }
    Curvature {
        median_within: median(&within),
        median_trans: median(&trans),
        within,
        trans,
    }
}

/// Net displacement over path length; `None` for a path that never moves.
pub fn geodesic_efficiency(path: &Path) -> Option<f64> {
    let total: f64 = path.steps().iter().map(|s| norm(s)).sum();
    if total == 0.0 {
        return None;
    }
    let first = &path.states[0];
    let last = &path.states[path.len()];
    let net = norm(
        &last
            .iter()
            .zip(first)
            .map(|(b, a)| b - a)
            .collect::<Vec<_>>(),
    );
    Some((net / total).min(1.0))
}

/// Mean step continuity inside each dwell segment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SegmentedContinuity {
    pub means: Vec<f64>,
    pub median: Option<f64>,
    pub iqr: Option<f64>,
}

/// For every run of constant BMU, the mean of `C_t` over consecutive nonzero
/// steps that stay inside it. Runs with fewer than two such steps are
/// skipped.
pub fn segmented_continuity(path: &Path) -> SegmentedContinuity {
    let steps = path.steps();
    let mut means = Vec::new();
    let mut start = 0;
    for len in run_lengths(path.bmus) {
        // States start..start+len share a BMU; steps start..start+len-1 join them.
        let inner: Vec<Vec<f64>> = steps[start..start + len - 1].to_vec();
        let cs: Vec<f64> = continuity_pairs(&inner)
            .into_iter()
            .map(|(_, c)| c)
            .collect();
        if !cs.is_empty() {
            means.push(cs.iter().sum::<f64>() / cs.len() as f64);
        }
        start += len;
    }
    let spread = Spread::of(&means);
    SegmentedContinuity {
        median: spread.map(|s| s.median),
        iqr: spread.map(|s| s.iqr()),
        means,
    }
}

/// Every statistic of one trajectory.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryMetrics {
    pub steps: usize,
    pub step_continuity: Vec<f64>,
    pub global_continuity: Option<Vec<f64>>,
    pub transition_rate: f64,
    pub dwell: DwellStats,
    pub curvature: Curvature,
    pub geodesic_efficiency: Option<f64>,
    pub segmented_continuity: SegmentedContinuity,
}

impl TrajectoryMetrics {
    pub fn compute(path: &Path) -> Self {
        Self {
            steps: path.len(),
            step_continuity: step_continuity(path),
            global_continuity: global_continuity(path),
            transition_rate: transition_rate(path),
            dwell: dwell_stats(path),
            curvature: curvature(path),
            geodesic_efficiency: geodesic_efficiency(path),
            segmented_continuity: segmented_continuity(path),
        }
    }

    pub fn step_continuity_median(&self) -> Option<f64> {
        median(&self.step_continuity)
    }
}

/// Median and quartiles of each per-trajectory statistic across a batch,
/// in the layout of a regime comparison table. A field is `None` when no
/// trajectory defines it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsSummary {
    pub trajectories: usize,
    pub step_continuity: Option<Spread>,
    pub transition_rate: Option<Spread>,
    pub dwell_median: Option<Spread>,
    pub curvature_within: Option<Spread>,
    pub curvature_trans: Option<Spread>,
    pub geodesic_efficiency: Option<Spread>,
    pub segmented_continuity: Option<Spread>,
}

impl MetricsSummary {
    /// Reduces each trajectory to its median statistic, then summarizes
    /// across trajectories.
    pub fn aggregate(batch: &[TrajectoryMetrics]) -> Self {
        let collect = |f: &dyn Fn(&TrajectoryMetrics) -> Option<f64>| {
            let v: Vec<f64> = batch.iter().filter_map(f).collect();
            Spread::of(&v)
        };
        Self {
            trajectories: batch.len(),
            step_continuity: collect(&|m| m.step_continuity_median()),
            transition_rate: collect(&|m| Some(m.transition_rate)),
            dwell_median: collect(&|m| Some(m.dwell.median)),
            curvature_within: collect(&|m| m.curvature.median_within),
            curvature_trans: collect(&|m| m.curvature.median_trans),
            geodesic_efficiency: collect(&|m| m.geodesic_efficiency),
            segmented_continuity: collect(&|m| m.segmented_continuity.median),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::{FRAC_PI_2, PI};

    /// States from a start point and a list of steps.
    fn walk(steps: &[[f64; 2]]) -> Vec<Vec<f64>> {
        let mut z = vec![0.0, 0.0];
        let mut out = vec![z.clone()];
        for s in steps {
            z = vec![z[0] + s[0], z[1] + s[1]];
            out.push(z.clone());
        }
        out
    }

    fn same_bmu(n: usize) -> Vec<usize> {
        vec![0; n]
    }

    #[test]
    fn step_continuity_examples() {
        let s = walk(&[[1.0, 0.0]; 4]);
        let b = same_bmu(5);
        assert_eq!(step_continuity(&Path::new(&s, &b).unwrap()), vec![1.0; 3]);

        let s = walk(&[[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]]);
        assert_eq!(step_continuity(&Path::new(&s, &b).unwrap()), vec![-1.0; 3]);

        let s = walk(&[[1.0, 0.0], [0.0, 1.0]]);
        let b3 = same_bmu(3);
        assert_eq!(step_continuity(&Path::new(&s, &b3).unwrap()), vec![0.0]);

        let s = walk(&[[0.0, 0.0], [0.0, 0.0]]);
        assert!(step_continuity(&Path::new(&s, &b3).unwrap()).is_empty());
    }

    #[test]
    fn zero_steps_are_skipped() {
        let s = walk(&[[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]);
        let b = same_bmu(4);
        let p = Path::new(&s, &b).unwrap();
        assert_eq!(step_continuity(&p), vec![1.0]);
        assert_eq!(dwell_stats(&p).lengths, vec![4]);
    }

    #[test]
    fn global_continuity_examples() {
        let b = same_bmu(5);
        let s = walk(&[[0.5, 0.0]; 4]);
        assert_eq!(
            global_continuity(&Path::new(&s, &b).unwrap()).unwrap(),
            vec![1.0; 4]
        );

        let s = walk(&[[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [-1.0, 0.0]]);
        assert_eq!(
            global_continuity(&Path::new(&s, &b).unwrap()).unwrap(),
            vec![1.0, 1.0, -1.0, -1.0]
        );

        let s = walk(&[[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]);
        assert!(global_continuity(&Path::new(&s, &b).unwrap()).is_none());
    }

    #[test]
    fn quarter_circle_decays_toward_zero() {
        let n = 16;
        let states: Vec<Vec<f64>> = (0..=n)
            .map(|k| {
                let a = FRAC_PI_2 * k as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let b = same_bmu(n + 1);
        let g = global_continuity(&Path::new(&states, &b).unwrap()).unwrap();
        for w in g.windows(2) {
            assert!(w[1] < w[0]);
        }
        // Chord k has direction angle (2k + 1) pi / (4n) + pi / 2.
        let expected_last = (FRAC_PI_2 * (n - 1) as f64 / n as f64).cos();
        assert!((g[n - 1] - expected_last).abs() < 1e-12);
        assert!(g[n - 1] < 0.1);
    }

    #[test]
    fn transition_rate_examples() {
        let s = walk(&[[1.0, 0.0]; 3]);
        for (bmus, expected) in [
            ([1, 1, 1, 1], 0.0),
            ([1, 2, 3, 4], 1.0),
            ([1, 1, 2, 2], 1.0 / 3.0),
        ] {
            assert_eq!(transition_rate(&Path::new(&s, &bmus).unwrap()), expected);
        }
    }

    #[test]
    fn dwell_examples() {
        let s = walk(&[[1.0, 0.0]; 2]);
        let d = dwell_stats(&Path::new(&s, &[1, 1, 2]).unwrap());
        assert_eq!(d.lengths, vec![2, 1]);
        assert_eq!(d.median, 1.5);

        let s = walk(&[[1.0, 0.0]; 5]);
        assert_eq!(
            dwell_stats(&Path::new(&s, &[4; 6]).unwrap()).lengths,
            vec![6]
        );
        assert_eq!(
            dwell_stats(&Path::new(&s, &[1, 2, 1, 2, 1, 2]).unwrap()).lengths,
            vec![1; 6]
        );
    }

    #[test]
    fn curvature_examples() {
        let s = walk(&[[1.0, 0.0]; 4]);
        let c = curvature(&Path::new(&s, &same_bmu(5)).unwrap());
        assert_eq!(c.median_within, Some(0.0));
        assert_eq!(c.median_trans, None);

        let s = walk(&[[0.5, 0.0], [0.0, 0.5]]);
        let c = curvature(&Path::new(&s, &same_bmu(3)).unwrap());
        assert!((c.median_within.unwrap() - PI).abs() < 1e-15);

        let c = curvature(&Path::new(&s, &[0, 1, 1]).unwrap());
        assert!((c.median_trans.unwrap() - PI).abs() < 1e-15);
        assert!(c.within.is_empty());
    }

    #[test]
    fn geodesic_efficiency_examples() {
        let s = walk(&[[1.0, 0.0]; 3]);
        assert_eq!(
            geodesic_efficiency(&Path::new(&s, &same_bmu(4)).unwrap()),
            Some(1.0)
        );

        let s = walk(&[[1.0, 0.0], [0.0, 1.0]]);
        let e = geodesic_efficiency(&Path::new(&s, &same_bmu(3)).unwrap()).unwrap();
        assert!((e - 2f64.sqrt() / 2.0).abs() < 1e-15);

        let s = walk(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]);
        assert_eq!(
            geodesic_efficiency(&Path::new(&s, &same_bmu(5)).unwrap()),
            Some(0.0)
        );

        let s = walk(&[[0.0, 0.0]]);
        assert_eq!(
            geodesic_efficiency(&Path::new(&s, &same_bmu(2)).unwrap()),
            None
        );
    }

    #[test]
    fn segmented_continuity_examples() {
        let s = walk(&[[1.0, 0.0]; 3]);
        let seg = segmented_continuity(&Path::new(&s, &same_bmu(4)).unwrap());
        assert_eq!(seg.means, vec![1.0]);

        // Straight inside cell 0, zig-zag inside cell 1; the crossing step
        // belongs to neither.
        let s = walk(&[
            [1.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 0.0],
            [-1.0, 0.0],
            [1.0, 0.0],
        ]);
        let b = [0, 0, 0, 1, 1, 1, 1];
        let seg = segmented_continuity(&Path::new(&s, &b).unwrap());
        assert_eq!(seg.means, vec![1.0, -1.0]);

        let s = walk(&[[1.0, 0.0]; 3]);
        let seg = segmented_continuity(&Path::new(&s, &[0, 1, 2, 3]).unwrap());
        assert!(seg.means.is_empty() && seg.median.is_none());
    }

    #[test]
    fn random_walk_segment_is_incoherent() {
        use rand::SeedableRng;
        let mut rng = crate::Rng::seed_from_u64(1);
        let mut z = vec![0.0; 10];
        let mut states = vec![z.clone()];
        for _ in 0..1000 {
            for v in z.iter_mut() {
                *v += crate::stats::standard_normal(&mut rng);
            }
            states.push(z.clone());
        }
        let b = same_bmu(1001);
        let seg = segmented_continuity(&Path::new(&states, &b).unwrap());
        assert!(seg.means[0].abs() < 0.2);
    }

    #[test]
    fn path_validation() {
        let s = walk(&[[1.0, 0.0]]);
        assert!(Path::new(&s, &[0]).is_err());
        assert!(Path::new(&[], &[]).is_err());
        let ragged = vec![vec![0.0, 0.0], vec![1.0]];
        assert!(Path::new(&ragged, &[0, 0]).is_err());
    }
}
