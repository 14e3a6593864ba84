use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

fn check_weights(w: &[f64], rows: usize) -> Result<()> {
    if w.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            found: w.len(),
        });
    }
    if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidConfig("row weights must be non-negative"));
    }
    Ok(())
}

fn check_problem(
    a_s: &DMatrix<f64>,
    b_t: &DMatrix<f64>,
    b: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<()> {
    if a_s.ncols() != b_t.ncols() {
        return Err(Error::DimensionMismatch {
            expected: b_t.ncols(),
            found: a_s.ncols(),
        });
    }
    if b.len() != b_t.nrows() {
        return Err(Error::DimensionMismatch {
            expected: b_t.nrows(),
            found: b.len(),
        });
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidConfig("gamma must lie in [0, 1]"));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig("lambda must be positive"));
    }
    Ok(())
}

fn scale_rows(m: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, &wi) in w.iter().enumerate() {
        out.row_mut(i).scale_mut(wi);
    }
    out
}

/// Minimizer of `(1-g)||W_S A_S dz||^2 + g||W_T (B_T dz - b)||^2 + l||dz||^2`
/// together with the Cholesky factor of its normal matrix.
pub(crate) fn solve_factored(
    a_s: &DMatrix<f64>,
    b_t: &DMatrix<f64>,
    b: &[f64],
    w_s: &[f64],
    w_t: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<(DVector<f64>, Cholesky<f64, Dyn>)> {
    check_problem(a_s, b_t, b, gamma, lambda)?;
    check_weights(w_s, a_s.nrows())?;
    check_weights(w_t, b_t.nrows())?;
    let d = b_t.ncols();
    let wa = scale_rows(a_s, w_s);
    let wb = scale_rows(b_t, w_t);
    let wbv = DVector::from_iterator(b.len(), b.iter().zip(w_t).map(|(bi, wi)| bi * wi));

    let mut h = DMatrix::identity(d, d) * lambda;
    if a_s.nrows() > 0 {
        h += wa.tr_mul(&wa) * (1.0 - gamma);
    }
    if b_t.nrows() > 0 {
        h += wb.tr_mul(&wb) * gamma;
    }
    let rhs = if b_t.nrows() > 0 {
        wb.tr_mul(&wbv) * gamma
    } else {
        DVector::zeros(d)
    };
    let chol = h.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let dz = chol.solve(&rhs);
    Ok((dz, chol))
}

/// Solves the MUSIC normal equations
/// `[(1-g)(W_S A_S)^T(W_S A_S) + g(W_T B_T)^T(W_T B_T) + l I] dz = g (W_T B_T)^T (W_T b)`
/// by Cholesky. Weights are the diagonals of `W_S` and `W_T`.
pub fn music_solve(
    a_s: &DMatrix<f64>,
    b_t: &DMatrix<f64>,
    b: &[f64],
    w_s: &[f64],
    w_t: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    let (dz, _) = solve_factored(a_s, b_t, b, w_s, w_t, gamma, lambda)?;
    Ok(dz.iter().copied().collect())
}

/// Stacks the weighted blocks into `M = [sqrt(1-g) W_S A_S; sqrt(g) W_T B_T]`
/// and `y = [0; sqrt(g) W_T b]`, so that the MUSIC step is the ridge
/// solution of `M dz ~ y`.
pub fn stack_system(
    a_s: &DMatrix<f64>,
    b_t: &DMatrix<f64>,
    b: &[f64],
    w_s: &[f64],
    w_t: &[f64],
    gamma: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_problem(a_s, b_t, b, gamma, 1.0)?;
    check_weights(w_s, a_s.nrows())?;
    check_weights(w_t, b_t.nrows())?;
    let (ns, nt, d) = (a_s.nrows(), b_t.nrows(), b_t.ncols());
    let mut m = DMatrix::zeros(ns + nt, d);
    let mut y = DVector::zeros(ns + nt);
    let sp = (1.0 - gamma).sqrt();
    let st = gamma.sqrt();
    for i in 0..ns {
        m.row_mut(i).copy_from(&(a_s.row(i) * (sp * w_s[i])));
    }
    for i in 0..nt {
        m.row_mut(ns + i).copy_from(&(b_t.row(i) * (st * w_t[i])));
        y[ns + i] = st * w_t[i] * b[i];
    }
    Ok((m, y))
}

/// Spectral-filter form of the step:
/// `dz = sum_k s_k / (s_k^2 + l) <y, u_k> v_k` over the SVD of `M`.
pub fn music_solve_svd(m: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<Vec<f64>> {
    if m.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: y.len(),
        });
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig("lambda must be positive"));
    }
    let d = m.ncols();
    let mut dz = DVector::zeros(d);
    if m.nrows() == 0 || d == 0 {
        return Ok(dz.iter().copied().collect());
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested");
    let vt = svd.v_t.as_ref().expect("requested");
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let coef = s / (s * s + lambda) * u.column(k).dot(y);
        dz += vt.row(k).transpose() * coef;
    }
    Ok(dz.iter().copied().collect())
}

/// One point of a ridge scan: step size against target misfit.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LambdaPoint {
    pub lambda: f64,
    pub step_norm: f64,
    /// `||W_T (B_T dz - b)||`.
    pub residual: f64,
}

/// Solves the same problem for every `lambda` and reports the raw L-curve
/// pairs; choosing a corner is left to the caller.
pub fn lambda_scan(
    a_s: &DMatrix<f64>,
    b_t: &DMatrix<f64>,
    b: &[f64],
    w_s: &[f64],
    w_t: &[f64],
    gamma: f64,
    lambdas: &[f64],
) -> Result<Vec<LambdaPoint>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let (dz, _) = solve_factored(a_s, b_t, b, w_s, w_t, gamma, lambda)?;
            let r = b_t * &dz;
            let residual = r
                .iter()
                .zip(b)
                .zip(w_t)
                .map(|((ri, bi), wi)| (wi * (ri - bi)).powi(2))
                .sum::<f64>()
                .sqrt();
            Ok(LambdaPoint {
                lambda,
                step_norm: dz.norm(),
                residual,
            })
        })
        .collect()
}

/// `count` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let (a, b) = (Float::ln(lo), Float::ln(hi));
            (0..count)
                .map(|i| Float::exp(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    }
}

/// Smallest eigenvalue of the SPD matrix behind `chol` by inverse iteration.
pub(crate) fn smallest_eigenvalue(chol: &Cholesky<f64, Dyn>) -> f64 {
    let d = chol.l_dirty().nrows();
    let mut v = DVector::from_fn(d, |i, _| 1.0 + (i as f64) * 1e-3);
    v /= v.norm();
    let mut estimate = f64::INFINITY;
    for _ in 0..200 {
        let w = chol.solve(&v);
        let n = w.norm();
        let next = 1.0 / n;
        v = w / n;
        if (estimate - next).abs() <= 1e-12 * next {
            return next;
        }
        estimate = next;
    }
    estimate
}
