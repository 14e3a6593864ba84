//! Tangential moves are near-isometries: a uniform unit direction `u`
//! orthogonal to `x = z - w_k` has `E[(v^T u)^2] = 1 / (D - 1)` for any unit
//! `v` orthogonal to `x`, and the largest offset projection obeys a
//! union-bound tail.

use music_core::geometry::sample_tangent_direction;
use music_core::seeded_rng;
use rand::distr::Distribution;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut music_core::Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_out(v: &[f64], x: &[f64]) -> Vec<f64> {
    let s = dot(v, x) / dot(x, x);
    v.iter().zip(x).map(|(a, b)| a - s * b).collect()
}

#[test]
fn squared_projection_has_variance_one_over_d_minus_one() {
    for d in [5usize, 20, 100] {
        let mut rng = seeded_rng(d as u64);
        let x = gaussian(&mut rng, d);
        let mut v = project_out(&gaussian(&mut rng, d), &x);
        let n = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|c| *c /= n);

        let draws = 20_000;
        let mean = (0..draws)
            .map(|_| {
                let u = sample_tangent_direction(&x, &mut rng).unwrap();
                dot(&v, &u).powi(2)
            })
            .sum::<f64>()
            / draws as f64;
        let expected = 1.0 / (d as f64 - 1.0);
        assert!(
            (mean / expected - 1.0).abs() < 0.05,
            "D={d}: {mean} vs {expected}"
        );
    }
}

#[test]
fn max_offset_projection_respects_union_bound() {
    let delta = 0.05;
    for d in [5usize, 20, 100] {
        let n = 30;
        let trials = 2_000;
        let mut rng = seeded_rng(100 + d as u64);
        let mut violations = 0;
        for _ in 0..trials {
            let z = gaussian(&mut rng, d);
            let w: Vec<Vec<f64>> = (0..n).map(|_| gaussian(&mut rng, d)).collect();
            let x: Vec<f64> = z.iter().zip(&w[0]).map(|(a, b)| a - b).collect();
            let c_perp: Vec<Vec<f64>> = w
                .iter()
                .map(|wj| {
                    let c: Vec<f64> = w[0].iter().zip(wj).map(|(a, b)| a - b).collect();
                    project_out(&c, &x)
                })
                .collect();
            let c_max = c_perp.iter().map(|c| dot(c, c).sqrt()).fold(0.0, f64::max);
            let bound = c_max * (2.0 * (2.0 * n as f64 / delta).ln() / (d as f64 - 2.0)).sqrt();
            let u = sample_tangent_direction(&x, &mut rng).unwrap();
            let worst = c_perp.iter().map(|c| dot(c, &u).abs()).fold(0.0, f64::max);
            if worst > bound {
                violations += 1;
            }
        }
        assert!(
            violations as f64 <= delta * trials as f64,
            "D={d}: {violations} violations"
        );
    }
}
