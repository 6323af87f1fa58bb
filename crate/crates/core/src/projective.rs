//! The unit simplex, the projective action of allowable matrices on it, the
//! bounded distance `d`, and the log-norm cocycle.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::PositiveMatrix;
use crate::rng::{domain, SeedStream};

/// Negative coordinates down to this magnitude are treated as rounding noise.
pub const NEGATIVE_CLAMP: f64 = 1e-14;

/// A point of the closed unit simplex (nonnegative, unit ℓ1 norm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint {
    coords: Vec<f64>,
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexPoint::new(v)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Self {
        p.coords
    }
}

impl SimplexPoint {
    /// Renormalizes `coords` onto the simplex. Negative entries in
    /// `[-1e-14, 0)` are clamped to zero; anything more negative is rejected.
    pub fn new(mut coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidPoint("empty coordinate vector".into()));
        }
        for c in coords.iter_mut() {
            if !c.is_finite() {
                return Err(Error::InvalidPoint(format!("non-finite coordinate {c}")));
            }
            if *c < 0.0 {
                if *c >= -NEGATIVE_CLAMP {
                    *c = 0.0;
                } else {
                    return Err(Error::InvalidPoint(format!("negative coordinate {c}")));
                }
            }
        }
        let total: f64 = coords.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroVector);
        }
        for c in coords.iter_mut() {
            *c /= total;
        }
        Ok(Self { coords })
    }

    /// Wraps coordinates already known to lie on the simplex.
    pub(crate) fn from_normalized_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!((coords.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { coords }
    }

    /// Barycenter `(1/q, ..., 1/q)`.
    pub fn barycenter(dim: usize) -> Self {
        Self {
            coords: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn vertex(dim: usize, i: usize) -> Self {
        let mut coords = vec![0.0; dim];
        coords[i] = 1.0;
        Self { coords }
    }

    /// Uniform draw (flat Dirichlet).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Self {
        let mut coords: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = coords.iter().sum();
        for c in coords.iter_mut() {
            *c /= total;
        }
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn is_interior(&self) -> bool {
        self.coords.iter().all(|&c| c > 0.0)
    }
}

/// Normalizes a nonnegative nonzero vector onto the simplex.
pub fn project(v: &[f64]) -> Result<SimplexPoint> {
    SimplexPoint::new(v.to_vec())
}

/// Projective action `g·x = gx / ‖gx‖₁`.
pub fn act(g: &PositiveMatrix, x: &SimplexPoint) -> Result<SimplexPoint> {
    check_dims(g, x)?;
    g.ensure_allowable()?;
    Ok(act_unchecked(g, x))
}

pub(crate) fn act_unchecked(g: &PositiveMatrix, x: &SimplexPoint) -> SimplexPoint {
    let mut v = g.apply(&x.coords);
    let total: f64 = v.iter().sum();
    for c in v.iter_mut() {
        *c /= total;
    }
    SimplexPoint { coords: v }
}

/// Cocycle `ξ(g, x) = ln ‖g x‖₁`.
pub fn xi(g: &PositiveMatrix, x: &SimplexPoint) -> Result<f64> {
    check_dims(g, x)?;
    g.ensure_allowable()?;
    Ok(xi_unchecked(g, x))
}

pub(crate) fn xi_unchecked(g: &PositiveMatrix, x: &SimplexPoint) -> f64 {
    g.apply(&x.coords).iter().sum::<f64>().ln()
}

fn check_dims(g: &PositiveMatrix, x: &SimplexPoint) -> Result<()> {
    if g.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: x.dim(),
        });
    }
    Ok(())
}

/// `1 - m(x, y)` computed as a maximum of difference ratios, which keeps
/// full relative accuracy when `x` and `y` are close.
fn one_minus_m(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .filter(|(_, &yi)| yi > 0.0)
        .map(|(&xi, &yi)| (yi - xi) / yi)
        .fold(0.0, f64::max)
        .min(1.0)
}

/// `m(x, y) = min { x_i / y_i : y_i > 0 }`.
pub fn m_coeff(x: &SimplexPoint, y: &SimplexPoint) -> f64 {
    x.coords
        .iter()
        .zip(&y.coords)
        .filter(|(_, &yi)| yi > 0.0)
        .map(|(&xi, &yi)| xi / yi)
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
}

/// Bounded projective distance `d(x, y) = φ(m(x,y) m(y,x))` with
/// `φ(s) = (1 - s) / (1 + s)`.
pub fn dist(x: &SimplexPoint, y: &SimplexPoint) -> f64 {
    dist_slices(&x.coords, &y.coords)
}

pub(crate) fn dist_slices(x: &[f64], y: &[f64]) -> f64 {
    let a = one_minus_m(x, y);
    let b = one_minus_m(y, x);
    // 1 - (1-a)(1-b) without cancellation
    let one_minus_s = a + b - a * b;
    let one_plus_s = 2.0 - one_minus_s;
    (one_minus_s / one_plus_s).clamp(0.0, 1.0)
}

/// Bounds on the contraction coefficient `c(g)` of `g` for `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionEstimate {
    /// Maximum ratio over a deterministic candidate set; a lower bound for `c(g)`.
    pub lower: f64,
    /// Maximum over `lower` and the random pairs.
    pub estimate: f64,
}

fn ratio(g: &PositiveMatrix, x: &[f64], y: &[f64]) -> Option<f64> {
    let dxy = dist_slices(x, y);
    if dxy <= 0.0 {
        return None;
    }
    let gx = normalized_image(g, x);
    let gy = normalized_image(g, y);
    Some(dist_slices(&gx, &gy) / dxy)
}

fn normalized_image(g: &PositiveMatrix, x: &[f64]) -> Vec<f64> {
    let mut v = g.apply(x);
    let total: f64 = v.iter().sum();
    for c in v.iter_mut() {
        *c /= total;
    }
    v
}

/// Estimates `c(g) = sup d(g·x, g·y) / d(x, y)`.
///
/// The deterministic candidates are all vertex pairs and all pairs of
/// normalized columns of `g`; the random candidates are `n_pairs` uniform
/// pairs drawn from `seed`.
pub fn contraction_coeff(g: &PositiveMatrix, n_pairs: usize, seed: u64) -> Result<ContractionEstimate> {
    g.ensure_allowable()?;
    let q = g.dim();
    let mut candidates: Vec<Vec<f64>> = (0..q).map(|i| SimplexPoint::vertex(q, i).coords).collect();
    let cols = g.col_sums();
    for j in 0..q {
        let col: Vec<f64> = (0..q).map(|i| g.get(i, j) / cols[j]).collect();
        candidates.push(col);
    }
    let mut lower = 0.0f64;
    for a in 0..candidates.len() {
        for b in (a + 1)..candidates.len() {
            if let Some(r) = ratio(g, &candidates[a], &candidates[b]) {
                lower = lower.max(r);
            }
        }
    }
    let mut estimate = lower;
    let mut rng = SeedStream::new(seed).rng(domain::PAIRS, 0);
    for _ in 0..n_pairs {
        let x = SimplexPoint::random(&mut rng, q);
        let y = SimplexPoint::random(&mut rng, q);
        if let Some(r) = ratio(g, &x.coords, &y.coords) {
            estimate = estimate.max(r);
        }
    }
    Ok(ContractionEstimate {
        lower: lower.min(1.0),
        estimate: estimate.min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> SimplexPoint {
        SimplexPoint::new(v.to_vec()).unwrap()
    }

    fn mat(rows: &[&[f64]]) -> PositiveMatrix {
        PositiveMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn project_examples() {
        assert_eq!(project(&[1.0, 3.0]).unwrap().coords(), &[0.25, 0.75]);
        assert_eq!(project(&[2.0, 0.0, 0.0]).unwrap().coords(), &[1.0, 0.0, 0.0]);
        assert_eq!(project(&[1.0; 4]).unwrap().coords(), &[0.25; 4]);
        assert_eq!(project(&[0.0, 0.0]), Err(Error::ZeroVector));
    }

    #[test]
    fn construction_clamps_tiny_negatives_only() {
        let x = SimplexPoint::new(vec![1.0, -5e-15]).unwrap();
        assert_eq!(x.coords(), &[1.0, 0.0]);
        assert!(!x.is_interior());
        assert!(SimplexPoint::new(vec![1.0, -1e-10]).is_err());
        assert!(SimplexPoint::new(vec![0.5, 0.5]).unwrap().is_interior());
    }

    #[test]
    fn act_examples() {
        let x = p(&[0.3, 0.7]);
        assert_eq!(act(&PositiveMatrix::identity(2), &x).unwrap(), x);
        let g = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(act(&g, &p(&[1.0, 0.0])).unwrap().coords(), &[0.25, 0.75]);
        let bad = mat(&[&[1.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(act(&bad, &x), Err(Error::NotAllowable));
    }

    #[test]
    fn m_coeff_examples() {
        let x = p(&[0.2, 0.8]);
        assert_eq!(m_coeff(&x, &x), 1.0);
        assert_eq!(m_coeff(&p(&[1.0, 0.0]), &p(&[0.0, 1.0])), 0.0);
        assert!((m_coeff(&p(&[0.5, 0.5]), &p(&[0.25, 0.75])) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dist_examples() {
        let x = p(&[0.2, 0.8]);
        assert_eq!(dist(&x, &x), 0.0);
        assert_eq!(dist(&p(&[1.0, 0.0]), &p(&[0.3, 0.7])), 1.0);
        assert!((dist(&p(&[0.5, 0.5]), &p(&[0.25, 0.75])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dist_keeps_relative_accuracy_near_zero() {
        let eps = 1e-13;
        let x = p(&[0.5, 0.5]);
        let y = p(&[0.5 + eps, 0.5 - eps]);
        // m(x,y) = 1/(1+2eps/...) so d ≈ 2 eps for this pair.
        let d = dist(&x, &y);
        assert!((d / (2.0 * eps) - 1.0).abs() < 1e-2, "d = {d:e}");
    }

    #[test]
    fn xi_examples() {
        let x = p(&[0.3, 0.7]);
        assert_eq!(xi(&PositiveMatrix::identity(2), &x).unwrap(), 0.0);
        let g = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert!((xi(&g, &p(&[1.0, 0.0])).unwrap() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn contraction_examples() {
        let c = contraction_coeff(&PositiveMatrix::identity(2), 100, 1).unwrap();
        assert_eq!((c.lower, c.estimate), (1.0, 1.0));

        let rank_one = mat(&[&[1.0, 2.0], &[3.0, 6.0]]);
        let c = contraction_coeff(&rank_one, 100, 1).unwrap();
        assert!(c.lower < 1e-12 && c.estimate < 1e-12, "{c:?}");

        let g = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let c = contraction_coeff(&g, 2000, 1).unwrap();
        assert!(c.estimate > 0.0 && c.estimate < 1.0);
        // Brute-force oracle over a 200x200 grid of pairs.
        let mut best = 0.0f64;
        for a in 0..200 {
            for b in 0..200 {
                let (s, t) = (a as f64 / 199.0, b as f64 / 199.0);
                let (x, y) = (p(&[s, 1.0 - s]), p(&[t, 1.0 - t]));
                let dxy = dist(&x, &y);
                if dxy > 0.0 {
                    let r = dist(&act(&g, &x).unwrap(), &act(&g, &y).unwrap()) / dxy;
                    best = best.max(r);
                }
            }
        }
        assert!((c.estimate - best).abs() <= 0.02, "{} vs {}", c.estimate, best);
    }
}
