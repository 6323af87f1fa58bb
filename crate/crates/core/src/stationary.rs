//! The stationary direction `Z` of the projective chain, sampled through
//! backward products `Y_1 ⋯ Y_n`, plus the contraction rate κ and an
//! invariance test for empirical samples.
//!
//! The image `Y_1⋯Y_n·B̄` is the convex hull of the normalized columns of the
//! product, and its `d`-diameter is the largest pairwise distance between
//! those columns.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::PositiveMatrix;
use crate::projective::{act_unchecked, SimplexPoint};
use crate::rng::{domain, SeedStream};
use crate::sampler::MatrixSampler;
use crate::stats::{ks_two_sample, linear_fit, mean, std_dev};
use crate::walk::LogProduct;

/// Number of trailing diameters kept for error reports.
const TRACE_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySample {
    pub point: SimplexPoint,
    pub iterations: usize,
    pub final_diameter: f64,
}

/// Normalized columns of a row-major `q×q` matrix.
pub fn normalized_columns(q: usize, m: &[f64]) -> Vec<Vec<f64>> {
    (0..q)
        .map(|j| {
            let col: Vec<f64> = (0..q).map(|i| m[i * q + j]).collect();
            let s: f64 = col.iter().sum();
            col.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// `d`-diameter of `m·B̄` for an allowable `m`.
pub fn image_diameter(q: usize, m: &[f64]) -> f64 {
    let mut sums = [0.0f64; 16];
    let mut heap;
    let sums: &mut [f64] = if q <= 16 {
        &mut sums[..q]
    } else {
        heap = vec![0.0; q];
        &mut heap
    };
    for i in 0..q {
        for (j, s) in sums.iter_mut().enumerate() {
            *s += m[i * q + j];
        }
    }
    let mut d = 0.0f64;
    for a in 0..q {
        for b in (a + 1)..q {
            let u = one_minus_m_cols(q, m, a, b, sums[a], sums[b]);
            let v = one_minus_m_cols(q, m, b, a, sums[b], sums[a]);
            let one_minus_s = u + v - u * v;
            d = d.max((one_minus_s / (2.0 - one_minus_s)).clamp(0.0, 1.0));
        }
    }
    d
}

/// `1 - m(x, y)` for the normalized columns `x = m_·a / sa`, `y = m_·b / sb`.
fn one_minus_m_cols(q: usize, m: &[f64], a: usize, b: usize, sa: f64, sb: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..q {
        let yb = m[i * q + b] * sa;
        if yb > 0.0 {
            worst = worst.max((yb - m[i * q + a] * sb) / yb);
        }
    }
    worst.min(1.0)
}

/// One draw of `Z` by backward iteration, stopped once the image diameter
/// is below `tol`.
pub fn sample_z<R: Rng + ?Sized>(
    sampler: &MatrixSampler,
    tol: f64,
    max_iter: usize,
    rng: &mut R,
) -> Result<StationarySample> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let base = sampler.projective_part();
    let q = base.dim();
    let mut prod = LogProduct::identity(q);
    let mut trace = Vec::with_capacity(TRACE_LEN);
    for k in 1..=max_iter {
        let y = base.draw_adjoint(rng);
        prod.right_multiply(0.0, &y.matrix);
        let diam = image_diameter(q, prod.normalized_slice());
        if trace.len() == TRACE_LEN {
            trace.remove(0);
        }
        trace.push(diam);
        if diam < tol {
            let col = normalized_columns(q, prod.normalized_slice()).swap_remove(0);
            return Ok(StationarySample {
                point: SimplexPoint::new(col)?,
                iterations: k,
                final_diameter: diam,
            });
        }
    }
    Err(Error::MaxIterExceeded { max_iter, trace })
}

/// Fails with [`Error::Degenerate`] when the support violates (C), where
/// backward iteration could only run into its step limit.
pub fn ensure_contracting(sampler: &MatrixSampler) -> Result<()> {
    if sampler.condition_c()?.holds {
        Ok(())
    } else {
        Err(Error::Degenerate)
    }
}

/// `n` independent draws of `Z`; draw `i` uses stream `(seed, STATIONARY, i)`.
pub fn sample_stationary(
    sampler: &MatrixSampler,
    n: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<StationarySample>> {
    ensure_contracting(sampler)?;
    let stream = SeedStream::new(seed);
    (0..n)
        .into_par_iter()
        .map(|i| sample_z(sampler, tol, max_iter, &mut stream.rng(domain::STATIONARY, i as u64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    /// Largest KS statistic over the tested functionals.
    pub statistic: f64,
    /// Smallest p-value over the tested functionals.
    pub p_value: f64,
    /// `p_value` times the number of functionals, capped at 1.
    pub p_bonferroni: f64,
    pub functionals: usize,
    pub per_functional: Vec<(f64, f64)>,
}

/// Compares the cloud `samples` with its image under one step of the chain,
/// `z ↦ Y·z`, by KS on each coordinate and on one random linear functional.
pub fn invariance_test(samples: &[SimplexPoint], sampler: &MatrixSampler, seed: u64) -> Result<InvarianceReport> {
    const MIN_SAMPLES: usize = 1000;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let base = sampler.projective_part();
    let q = base.dim();
    if let Some(bad) = samples.iter().find(|s| s.dim() != q) {
        return Err(Error::DimensionMismatch {
            expected: q,
            found: bad.dim(),
        });
    }
    let stream = SeedStream::new(seed);
    let pushed: Vec<SimplexPoint> = samples
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let mut rng = stream.rng(domain::INVARIANCE, i as u64);
            act_unchecked(&base.draw_adjoint(&mut rng).matrix, z)
        })
        .collect();
    let mut dir_rng = stream.rng(domain::INVARIANCE, u64::MAX);
    let direction: Vec<f64> = (0..q).map(|_| dir_rng.random::<f64>() - 0.5).collect();

    let mut functionals: Vec<Box<dyn Fn(&SimplexPoint) -> f64>> = Vec::new();
    for i in 0..q {
        functionals.push(Box::new(move |p: &SimplexPoint| p.coords()[i]));
    }
    let dir = direction.clone();
    functionals.push(Box::new(move |p: &SimplexPoint| p.coords().iter().zip(&dir).map(|(a, b)| a * b).sum()));

    let per_functional: Vec<(f64, f64)> = functionals
        .iter()
        .map(|f| {
            let a: Vec<f64> = samples.iter().map(f).collect();
            let b: Vec<f64> = pushed.iter().map(f).collect();
            let r = ks_two_sample(&a, &b);
            (r.statistic, r.p_value)
        })
        .collect();
    let statistic = per_functional.iter().map(|r| r.0).fold(0.0, f64::max);
    let p_value = per_functional.iter().map(|r| r.1).fold(1.0, f64::min);
    let k = per_functional.len();
    Ok(InvarianceReport {
        statistic,
        p_value,
        p_bonferroni: (p_value * k as f64).min(1.0),
        functionals: k,
        per_functional,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub value: f64,
    pub stderr: f64,
    pub per_path_slopes: SlopeSummary,
    /// Decay rate of the mean diameter, `lim (E diam)^{1/k}`. Never below
    /// `value` up to noise, since the mean of logs is at most the log of means.
    pub mean_rate: Option<f64>,
}

/// Diameters below this are dominated by rounding and end a path's fit.
const DIAMETER_FLOOR: f64 = 1e-13;

/// `ln` diameter of `Y_1⋯Y_k·B̄` for `k = 1..=n`, stopping early at the floor.
pub fn diameter_trace<R: Rng + ?Sized>(sampler: &MatrixSampler, n: usize, rng: &mut R) -> Vec<f64> {
    let base = sampler.projective_part();
    let q = base.dim();
    let mut prod = LogProduct::identity(q);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let y = base.draw_adjoint(rng);
        prod.right_multiply(0.0, &y.matrix);
        let d = image_diameter(q, prod.normalized_slice());
        out.push(d);
        if d < DIAMETER_FLOOR {
            break;
        }
    }
    out
}

/// Estimates κ as `exp` of the mean per-path slope of `ln diameter` against
/// `k`, fitted from the first step where the diameter drops below 1. The
/// decay rate of the mean diameter is reported alongside.
pub fn kappa_estimate(sampler: &MatrixSampler, n: usize, n_paths: usize, seed: u64) -> Result<KappaEstimate> {
    if n_paths < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n_paths });
    }
    let stream = SeedStream::new(seed);
    let traces: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| diameter_trace(sampler, n, &mut stream.rng(domain::KAPPA, p as u64)))
        .collect();
    let slopes: Vec<f64> = traces.iter().filter_map(|t| path_slope(t)).collect();
    if slopes.len() < 2 {
        return Err(Error::Degenerate);
    }
    let m = mean(&slopes);
    let value = m.exp().min(1.0);
    let se = std_dev(&slopes) / (slopes.len() as f64).sqrt();
    Ok(KappaEstimate {
        value,
        stderr: value * se,
        per_path_slopes: SlopeSummary {
            mean: m,
            min: slopes.iter().copied().fold(f64::INFINITY, f64::min),
            max: slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            paths: slopes.len(),
        },
        mean_rate: mean_rate(&traces, n),
    })
}

/// Slope of `ln` of the across-path mean diameter, over the steps where the
/// mean sits in `[1e-10, 1)`. A finished trace keeps its last value.
fn mean_rate(traces: &[Vec<f64>], n: usize) -> Option<f64> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for k in 0..n {
        let m = traces
            .iter()
            .map(|t| t.get(k).or(t.last()).copied().unwrap_or(1.0))
            .sum::<f64>()
            / traces.len() as f64;
        if m < 1e-10 {
            break;
        }
        if m < 1.0 {
            x.push(k as f64);
            y.push(m.ln());
        }
    }
    (x.len() >= 3).then(|| linear_fit(&x, &y).slope.exp().min(1.0))
}

/// Decay slope of one diameter trace, or `None` if it never leaves 1.
fn path_slope(trace: &[f64]) -> Option<f64> {
    let first = trace.iter().position(|&d| d < 1.0)?;
    let pts: Vec<(f64, f64)> = trace[first..]
        .iter()
        .enumerate()
        .filter(|(_, &d)| d >= DIAMETER_FLOOR)
        .map(|(k, &d)| ((first + k) as f64, d.ln()))
        .collect();
    if pts.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        return Some(linear_fit(&x, &y).slope);
    }
    // Collapse within a couple of steps: chord down to the floor.
    let end = trace.len() - 1;
    if end == first {
        return Some(DIAMETER_FLOOR.ln());
    }
    let start_ln = trace[first].max(DIAMETER_FLOOR).ln();
    let end_ln = trace[end].max(DIAMETER_FLOOR).ln();
    Some((end_ln - start_ln) / (end - first) as f64)
}

/// Exact diameter sequence for a single matrix `g` (the law `δ_g`), used as
/// the deterministic reference for κ.
pub fn single_matrix_diameters(g: &PositiveMatrix, n: usize) -> Vec<f64> {
    let q = g.dim();
    let y = g.adjoint();
    let mut prod = LogProduct::identity(q);
    (0..n)
        .map(|_| {
            prod.right_multiply(0.0, &y);
            image_diameter(q, prod.normalized_slice())
        })
        .collect()
}
