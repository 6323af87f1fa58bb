//! Tail checks for `ln N₁` and `ln V₁`, the scaling sequence `a_n` and the
//! centering `b_n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, SeedStream};
use crate::sampler::MatrixSampler;
use crate::slowly_varying::SlowlyVaryingSpec;
use crate::stats::wilson_interval;

/// Hypothesized tail `c± L(u) / u^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailHypothesis {
    pub alpha: f64,
    #[serde(default)]
    pub slowly_varying: SlowlyVaryingSpec,
    pub c_plus: f64,
    pub c_minus: f64,
}

impl TailHypothesis {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::SpecInvalid(format!("alpha must lie in (0, 2], got {}", self.alpha)));
        }
        if !(self.c_plus >= 0.0 && self.c_minus >= 0.0 && self.c_plus + self.c_minus > 0.0) {
            return Err(Error::SpecInvalid("tail constants must be nonnegative with positive sum".into()));
        }
        self.slowly_varying.validate()
    }

    /// `u^α / L(u)`.
    pub fn scale(&self, u: f64) -> f64 {
        (self.alpha * u.ln() - self.slowly_varying.ln_eval_at_log(u.ln())).exp()
    }
}

/// A scaled tail probability with its 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledEstimate {
    pub u: f64,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub hits: usize,
}

const Z95: f64 = 1.959963984540054;

/// `u^α/L(u) · P̂[s > u]` (upper) or `u^α/L(u) · P̂[s <= -u]` (lower) on `u_grid`.
pub fn scaled_tail(samples: &[f64], hyp: &TailHypothesis, u_grid: &[f64], upper: bool) -> Vec<ScaledEstimate> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    u_grid
        .iter()
        .map(|&u| {
            let hits = if upper {
                n - sorted.partition_point(|&s| s <= u)
            } else {
                sorted.partition_point(|&s| s <= -u)
            };
            let k = hyp.scale(u);
            let (lo, hi) = wilson_interval(hits, n, Z95);
            ScaledEstimate {
                u,
                value: k * hits as f64 / n as f64,
                lo: k * lo,
                hi: k * hi,
                hits,
            }
        })
        .collect()
}

/// True when the intervals on the upper half of the grid share a point.
pub fn stabilizes(est: &[ScaledEstimate]) -> bool {
    let window = &est[est.len() / 2..];
    let lo = window.iter().map(|e| e.lo).fold(f64::NEG_INFINITY, f64::max);
    let hi = window.iter().map(|e| e.hi).fold(f64::INFINITY, f64::min);
    lo <= hi
}

/// True when the estimates do not grow over the grid: the last lower bound
/// stays below twice the largest upper bound on the lower half.
pub fn stays_bounded(est: &[ScaledEstimate]) -> bool {
    let head = &est[..est.len().div_ceil(2)];
    let cap = head.iter().map(|e| e.hi).fold(0.0, f64::max);
    est.last().map(|e| e.lo <= 2.0 * cap).unwrap_or(true)
}

/// Intervals on the upper half of the grid all contain `target`.
pub fn window_contains(est: &[ScaledEstimate], target: f64) -> bool {
    est[est.len() / 2..].iter().all(|e| e.lo <= target && target <= e.hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub hypothesis: TailHypothesis,
    pub n_samples: usize,
    pub u_grid: Vec<f64>,
    pub c_plus_hat: Vec<ScaledEstimate>,
    pub c_minus_hat: Vec<ScaledEstimate>,
    pub v1_bound_hat: Vec<ScaledEstimate>,
    pub c_plus_stabilizes: bool,
    pub c_minus_stabilizes: bool,
    pub v1_bounded: bool,
}

/// Minimum expected number of tail hits at the largest grid point.
pub const MIN_TAIL_HITS: f64 = 20.0;

fn check_grid(u_grid: &[f64]) -> Result<()> {
    if u_grid.len() < 2 || u_grid.windows(2).any(|w| !(w[0] < w[1])) || u_grid[0] <= 0.0 {
        return Err(Error::InvalidArgument("u grid must be positive and strictly increasing with at least two points".into()));
    }
    Ok(())
}

/// Errors when the hypothesis predicts fewer than [`MIN_TAIL_HITS`] hits
/// at the top of the grid.
pub fn ensure_tail_mass(hyp: &TailHypothesis, u_grid: &[f64], n_samples: usize) -> Result<()> {
    let u = *u_grid.last().expect("grid checked nonempty");
    let c = hyp.c_plus.max(hyp.c_minus);
    let expected = n_samples as f64 * c / hyp.scale(u);
    if expected < MIN_TAIL_HITS {
        return Err(Error::InsufficientTailMass {
            u,
            expected,
            needed: MIN_TAIL_HITS,
        });
    }
    Ok(())
}

/// Draws `(ln N₁, ln V₁)` for `n_samples` matrices; draw `i` uses stream
/// `(seed, TAILS, i)`.
pub fn size_samples(sampler: &MatrixSampler, n_samples: usize, seed: u64) -> Vec<(f64, f64)> {
    let stream = SeedStream::new(seed);
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let d = sampler.draw(&mut stream.rng(domain::TAILS, i as u64));
            let n1: f64 = d.matrix.as_slice().iter().sum();
            let v1 = d.matrix.row_sums().into_iter().fold(f64::INFINITY, f64::min);
            (d.log_scale + n1.ln(), d.log_scale + v1.ln())
        })
        .collect()
}

pub fn check_conditions(
    sampler: &MatrixSampler,
    hyp: &TailHypothesis,
    u_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<TailReport> {
    hyp.validate()?;
    check_grid(u_grid)?;
    ensure_tail_mass(hyp, u_grid, n_samples)?;
    let (ln_n1, ln_v1): (Vec<f64>, Vec<f64>) = size_samples(sampler, n_samples, seed).into_iter().unzip();
    let c_plus_hat = scaled_tail(&ln_n1, hyp, u_grid, true);
    let c_minus_hat = scaled_tail(&ln_n1, hyp, u_grid, false);
    let v1_bound_hat = scaled_tail(&ln_v1, hyp, u_grid, false);
    Ok(TailReport {
        hypothesis: *hyp,
        n_samples,
        u_grid: u_grid.to_vec(),
        c_plus_stabilizes: stabilizes(&c_plus_hat),
        c_minus_stabilizes: stabilizes(&c_minus_hat),
        v1_bounded: stays_bounded(&v1_bound_hat),
        c_plus_hat,
        c_minus_hat,
        v1_bound_hat,
    })
}

/// Solves `n L(a) / a^α = 1` for the largest root `a`.
///
/// For constant `L = c` the root is `(n c)^{1/α}` in closed form. Otherwise
/// the equation is solved in `y = ln a`, where
/// `f(y) = ln n + ln L(e^y) - α y` is eventually decreasing.
pub fn scaling_sequence(alpha: f64, l: &SlowlyVaryingSpec, n: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    l.validate()?;
    let ln_n = (n as f64).ln();
    if let SlowlyVaryingSpec::Constant { value } = *l {
        return Ok(if value == 1.0 {
            (n as f64).powf(1.0 / alpha)
        } else {
            ((ln_n + value.ln()) / alpha).exp()
        });
    }
    let f = |y: f64| ln_n + l.ln_eval_at_log(y) - alpha * y;

    // Grow the upper end until f is negative and decreasing.
    let mut hi = 2.0f64;
    while !(f(hi) < 0.0 && f(hi * 2.0) < f(hi)) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::BracketFailure(format!("no sign change of the scaling equation below ln a = {hi}")));
        }
    }
    // Largest grid point with f >= 0; f(-1) = ln n + α > 0.
    const SCAN: usize = 4096;
    let lo_start = -1.0;
    let step = (hi - lo_start) / SCAN as f64;
    let mut lo = None;
    for k in (0..SCAN).rev() {
        let y = lo_start + k as f64 * step;
        if f(y) >= 0.0 {
            lo = Some(y);
            break;
        }
    }
    let mut lo = lo.ok_or_else(|| Error::BracketFailure("scaling equation is negative on the whole scan".into()))?;
    let mut hi = lo + step;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    Ok(y.exp())
}

/// `|n L(a)/a^α - 1|`.
pub fn scaling_residual(alpha: f64, l: &SlowlyVaryingSpec, n: u64, a: f64) -> f64 {
    ((n as f64).ln() + l.ln_eval_at_log(a.ln()) - alpha * a.ln()).exp_m1().abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenteringConvention {
    /// `b_n = 0`.
    Zero,
    /// `b_n = n · mean(Ξ)`.
    Mean,
    /// `b_n = n a_n · mean(sin(Ξ / a_n))`.
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub b_n: f64,
    pub convention: CenteringConvention,
}

pub fn centering(alpha: f64, xi_samples: &[f64], a_n: f64, n: u64) -> Result<Centering> {
    if alpha < 1.0 {
        return Ok(Centering {
            b_n: 0.0,
            convention: CenteringConvention::Zero,
        });
    }
    if xi_samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: xi_samples.len(),
        });
    }
    let len = xi_samples.len() as f64;
    let nf = n as f64;
    Ok(if alpha == 1.0 {
        Centering {
            b_n: nf * a_n * xi_samples.iter().map(|x| (x / a_n).sin()).sum::<f64>() / len,
            convention: CenteringConvention::Sine,
        }
    } else {
        Centering {
            b_n: nf * xi_samples.iter().sum::<f64>() / len,
            convention: CenteringConvention::Mean,
        }
    })
}

/// Running means of `ℓ(X)^β` at the sample-size checkpoints `n/8, n/4, n/2, n`.
/// A finite moment shows up as a settling sequence.
pub fn log_size_moment(sampler: &MatrixSampler, beta: f64, n_samples: usize, seed: u64) -> Vec<(usize, f64)> {
    let stream = SeedStream::new(seed);
    let ell: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let d = sampler.draw(&mut stream.rng(domain::TAILS, i as u64));
            let cols = d.matrix.col_sums();
            let op = cols.iter().copied().fold(0.0, f64::max).ln() + d.log_scale;
            let vmin = cols.iter().copied().fold(f64::INFINITY, f64::min).ln() + d.log_scale;
            (op.abs() + vmin.abs()).powf(beta)
        })
        .collect();
    [8, 4, 2, 1]
        .iter()
        .map(|&k| {
            let m = n_samples / k;
            (m, ell[..m].iter().sum::<f64>() / m as f64)
        })
        .collect()
}
