//! Laws of the i.i.d. matrices `X_n`.
//!
//! Draws are returned in log-scaled form `X = e^s · G`, because the scalar
//! factor of a heavy-tailed law routinely exceeds the `f64` range. The
//! projective action only sees `G`, and `ξ(e^s G, x) = s + ξ(G, x)`.

use std::borrow::Cow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::PositiveMatrix;
use crate::pattern::{check_condition_c, BooleanPattern, ConditionC};
use crate::slowly_varying::SlowlyVaryingSpec;

/// Scalar law of `W` with regularly varying two-sided tails:
/// `P[W > u] = c₊ L(u)/u^α` and `P[W < -u] = c₋ L(u)/u^α` for `u >= u_min`,
/// uniform on `[-u_min, u_min]` in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavyTailLaw {
    pub alpha: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    #[serde(default)]
    pub slowly_varying: SlowlyVaryingSpec,
    #[serde(default = "default_u_min")]
    pub u_min: f64,
}

fn default_u_min() -> f64 {
    1.0
}

impl HeavyTailLaw {
    /// Symmetric law with `P[|W| > u] = u^-α` for `u >= 1`.
    pub fn symmetric_pareto(alpha: f64) -> Self {
        Self {
            alpha,
            c_plus: 0.5,
            c_minus: 0.5,
            slowly_varying: SlowlyVaryingSpec::default(),
            u_min: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::SpecInvalid(format!("alpha must lie in (0, 2], got {}", self.alpha)));
        }
        if !(self.c_plus >= 0.0 && self.c_minus >= 0.0 && self.c_plus + self.c_minus > 0.0) {
            return Err(Error::SpecInvalid("tail constants must be nonnegative with positive sum".into()));
        }
        if !(self.u_min > 0.0 && self.u_min.is_finite()) {
            return Err(Error::SpecInvalid(format!("u_min must be positive, got {}", self.u_min)));
        }
        self.slowly_varying.validate()?;
        let (p_plus, p_minus) = self.tail_masses();
        if p_plus + p_minus > 1.0 + 1e-12 {
            return Err(Error::SpecInvalid(format!(
                "tail masses at u_min sum to {} > 1; increase u_min",
                p_plus + p_minus
            )));
        }
        // Inverse-CDF sampling needs L(u)/u^α nonincreasing beyond u_min.
        let y0 = self.u_min.ln();
        let mut prev = self.ln_tail_at_log(y0);
        for k in 1..=4000 {
            let y = y0 + k as f64 * 0.01 * (1.0 + y0.abs());
            let cur = self.ln_tail_at_log(y);
            if cur > prev + 1e-12 {
                return Err(Error::SpecInvalid(format!(
                    "L(u)/u^alpha increases near u = e^{y:.3}; raise u_min"
                )));
            }
            prev = cur;
        }
        Ok(())
    }

    /// `ln(L(u)/u^α)` as a function of `ln u`.
    fn ln_tail_at_log(&self, ln_u: f64) -> f64 {
        self.slowly_varying.ln_eval_at_log(ln_u) - self.alpha * ln_u
    }

    /// Probabilities of the upper and lower tail regions `|W| > u_min`.
    pub fn tail_masses(&self) -> (f64, f64) {
        let t = self.ln_tail_at_log(self.u_min.ln()).exp();
        (self.c_plus * t, self.c_minus * t)
    }

    /// Exact `P[W > u]`.
    pub fn survival(&self, u: f64) -> f64 {
        let (p_plus, p_minus) = self.tail_masses();
        let middle = (1.0 - p_plus - p_minus).max(0.0);
        if u >= self.u_min {
            self.c_plus * self.ln_tail_at_log(u.ln()).exp()
        } else if u >= -self.u_min {
            p_plus + middle * (self.u_min - u) / (2.0 * self.u_min)
        } else {
            1.0 - self.c_minus * self.ln_tail_at_log((-u).ln()).exp()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (p_plus, p_minus) = self.tail_masses();
        let u: f64 = rng.random();
        if u < p_plus {
            self.tail_quantile(1.0 - u / p_plus)
        } else if u < p_plus + p_minus {
            -self.tail_quantile(1.0 - (u - p_plus) / p_minus)
        } else {
            let v: f64 = rng.random();
            self.u_min * (2.0 * v - 1.0)
        }
    }

    /// Solves `L(u)/u^α = v · L(u_min)/u_min^α` for `u >= u_min`, `v ∈ (0, 1]`.
    fn tail_quantile(&self, v: f64) -> f64 {
        let v = v.max(f64::MIN_POSITIVE);
        if let SlowlyVaryingSpec::Constant { .. } = self.slowly_varying {
            return self.u_min * v.powf(-1.0 / self.alpha);
        }
        let y0 = self.u_min.ln();
        let target = self.ln_tail_at_log(y0) + v.ln();
        let h = |y: f64| self.ln_tail_at_log(y) - target;
        let mut lo = y0;
        let mut step = 1.0;
        let mut hi = y0 + step;
        while h(hi) > 0.0 {
            lo = hi;
            step *= 2.0;
            hi = y0 + step;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.abs().max(1.0) {
                break;
            }
        }
        (0.5 * (lo + hi)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedMatrix {
    pub weight: f64,
    pub matrix: PositiveMatrix,
}

/// Serializable description of a matrix law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    /// Finitely supported law.
    FiniteMixture { atoms: Vec<WeightedMatrix> },
    /// `X = e^W · G` with `G` from `base` and independent scalar `W`.
    LogScaled { base: Box<SamplerSpec>, scalar: HeavyTailLaw },
    /// Entries i.i.d. uniform on `[low, high]`, each zeroed with probability
    /// `zero_prob`, conditioned on the result being allowable.
    EntrywiseRandom { dim: usize, low: f64, high: f64, zero_prob: f64 },
}

/// A draw `e^log_scale · matrix`.
#[derive(Debug, Clone)]
pub struct ScaledDraw<'a> {
    pub log_scale: f64,
    pub matrix: Cow<'a, PositiveMatrix>,
}

impl ScaledDraw<'_> {
    /// Dense matrix, when the scale fits in `f64`.
    pub fn to_dense(&self) -> Result<PositiveMatrix> {
        let f = self.log_scale.exp();
        if !f.is_finite() || f == 0.0 {
            return Err(Error::InvalidEntries(format!(
                "scale e^{} is outside the f64 range",
                self.log_scale
            )));
        }
        self.matrix.scaled(f)
    }
}

/// Validated matrix law, ready for sampling.
#[derive(Debug, Clone)]
pub struct MatrixSampler {
    spec: SamplerSpec,
    kind: Kind,
    dim: usize,
}

#[derive(Debug, Clone)]
enum Kind {
    Mixture {
        cumulative: Vec<f64>,
        atoms: Vec<PositiveMatrix>,
        adjoints: Vec<PositiveMatrix>,
        weights: Vec<f64>,
    },
    LogScaled {
        base: Box<MatrixSampler>,
        scalar: HeavyTailLaw,
    },
    Entrywise {
        low: f64,
        high: f64,
        zero_prob: f64,
    },
}

impl MatrixSampler {
    pub fn new(spec: SamplerSpec) -> Result<Self> {
        let (kind, dim) = match &spec {
            SamplerSpec::FiniteMixture { atoms } => {
                let first = atoms
                    .first()
                    .ok_or_else(|| Error::SpecInvalid("finite mixture needs at least one atom".into()))?;
                let dim = first.matrix.dim();
                let mut total = 0.0;
                let mut cumulative = Vec::with_capacity(atoms.len());
                for (i, a) in atoms.iter().enumerate() {
                    if !(a.weight > 0.0 && a.weight.is_finite()) {
                        return Err(Error::SpecInvalid(format!("atom {i} has non-positive weight {}", a.weight)));
                    }
                    if a.matrix.dim() != dim {
                        return Err(Error::SpecInvalid(format!("atom {i} has dimension {}", a.matrix.dim())));
                    }
                    if !a.matrix.is_allowable() {
                        return Err(Error::SpecInvalid(format!("atom {i} is not allowable")));
                    }
                    total += a.weight;
                    cumulative.push(total);
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::SpecInvalid(format!("mixture weights sum to {total}, expected 1")));
                }
                let atoms_m: Vec<PositiveMatrix> = atoms.iter().map(|a| a.matrix.clone()).collect();
                (
                    Kind::Mixture {
                        cumulative,
                        adjoints: atoms_m.iter().map(PositiveMatrix::adjoint).collect(),
                        atoms: atoms_m,
                        weights: atoms.iter().map(|a| a.weight).collect(),
                    },
                    dim,
                )
            }
            SamplerSpec::LogScaled { base, scalar } => {
                scalar.validate()?;
                let base = MatrixSampler::new((**base).clone())?;
                let dim = base.dim;
                (
                    Kind::LogScaled {
                        base: Box::new(base),
                        scalar: *scalar,
                    },
                    dim,
                )
            }
            SamplerSpec::EntrywiseRandom {
                dim,
                low,
                high,
                zero_prob,
            } => {
                if *dim == 0 {
                    return Err(Error::SpecInvalid("dimension must be positive".into()));
                }
                if !(*low >= 0.0 && high > low && high.is_finite()) {
                    return Err(Error::SpecInvalid(format!("need 0 <= low < high, got [{low}, {high}]")));
                }
                if !(0.0..=0.9).contains(zero_prob) {
                    return Err(Error::SpecInvalid(format!("zero_prob must lie in [0, 0.9], got {zero_prob}")));
                }
                (
                    Kind::Entrywise {
                        low: *low,
                        high: *high,
                        zero_prob: *zero_prob,
                    },
                    *dim,
                )
            }
        };
        Ok(Self { spec, kind, dim })
    }

    pub fn single(matrix: PositiveMatrix) -> Result<Self> {
        Self::mixture(vec![(1.0, matrix)])
    }

    pub fn mixture(atoms: Vec<(f64, PositiveMatrix)>) -> Result<Self> {
        Self::new(SamplerSpec::FiniteMixture {
            atoms: atoms
                .into_iter()
                .map(|(weight, matrix)| WeightedMatrix { weight, matrix })
                .collect(),
        })
    }

    pub fn log_scaled(base: SamplerSpec, scalar: HeavyTailLaw) -> Result<Self> {
        Self::new(SamplerSpec::LogScaled {
            base: Box::new(base),
            scalar,
        })
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The scalar tail law, if the sampler is log-scaled.
    pub fn scalar_law(&self) -> Option<&HeavyTailLaw> {
        match &self.kind {
            Kind::LogScaled { scalar, .. } => Some(scalar),
            _ => None,
        }
    }

    /// Draws `X`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ScaledDraw<'_> {
        self.draw_oriented(rng, false)
    }

    /// Draws `Y = X*`, consuming randomness exactly like [`Self::draw`].
    pub fn draw_adjoint<R: Rng + ?Sized>(&self, rng: &mut R) -> ScaledDraw<'_> {
        self.draw_oriented(rng, true)
    }

    fn draw_oriented<R: Rng + ?Sized>(&self, rng: &mut R, adjoint: bool) -> ScaledDraw<'_> {
        match &self.kind {
            Kind::Mixture {
                cumulative,
                atoms,
                adjoints,
                ..
            } => {
                let i = if atoms.len() == 1 {
                    0
                } else {
                    let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                    cumulative.partition_point(|&c| c <= u).min(atoms.len() - 1)
                };
                let m = if adjoint { &adjoints[i] } else { &atoms[i] };
                ScaledDraw {
                    log_scale: 0.0,
                    matrix: Cow::Borrowed(m),
                }
            }
            Kind::LogScaled { base, scalar } => {
                let mut d = base.draw_oriented(rng, adjoint);
                d.log_scale += scalar.sample(rng);
                d
            }
            Kind::Entrywise { low, high, zero_prob } => {
                let q = self.dim;
                loop {
                    let data: Vec<f64> = (0..q * q)
                        .map(|_| {
                            let z: f64 = rng.random();
                            let v: f64 = rng.random();
                            if z < *zero_prob {
                                0.0
                            } else {
                                low + (high - low) * v
                            }
                        })
                        .collect();
                    let m = PositiveMatrix::from_row_major(q, data).expect("entries are nonnegative");
                    if m.is_allowable() {
                        let m = if adjoint { m.adjoint() } else { m };
                        return ScaledDraw {
                            log_scale: 0.0,
                            matrix: Cow::Owned(m),
                        };
                    }
                }
            }
        }
    }

    /// Atoms of the law of `X` when it is finitely supported.
    pub fn support(&self) -> Option<Vec<(f64, PositiveMatrix)>> {
        match &self.kind {
            Kind::Mixture { atoms, weights, .. } => {
                Some(weights.iter().copied().zip(atoms.iter().cloned()).collect())
            }
            _ => None,
        }
    }

    /// Atoms of the law `μ` of `Y = X*` when it is finitely supported.
    pub fn adjoint_support(&self) -> Option<Vec<(f64, PositiveMatrix)>> {
        self.support()
            .map(|s| s.into_iter().map(|(w, m)| (w, m.adjoint())).collect())
    }

    /// Base matrix law with any scalar factor removed. The projective action
    /// of a draw depends only on this part.
    pub fn projective_part(&self) -> &MatrixSampler {
        match &self.kind {
            Kind::LogScaled { base, .. } => base.projective_part(),
            _ => self,
        }
    }

    /// Decides condition (C) from the support patterns. Entrywise-random
    /// laws give the all-ones pattern positive probability, so it holds.
    pub fn condition_c(&self) -> Result<ConditionC> {
        match &self.kind {
            Kind::Mixture { atoms, .. } => {
                let mut patterns: Vec<BooleanPattern> = Vec::new();
                for a in atoms {
                    let p = a.pattern();
                    if !patterns.contains(&p) {
                        patterns.push(p);
                    }
                }
                check_condition_c(&patterns)
            }
            Kind::LogScaled { base, .. } => base.condition_c(),
            Kind::Entrywise { .. } => Ok(ConditionC {
                holds: true,
                witness_length: Some(1),
                witness: None,
                closure_size: 0,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn mat(rows: &[&[f64]]) -> PositiveMatrix {
        PositiveMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn single_atom_always_returned() {
        let g = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let s = MatrixSampler::single(g.clone()).unwrap();
        let mut rng = SeedStream::new(1).rng(0, 0);
        for _ in 0..10 {
            let d = s.draw(&mut rng);
            assert_eq!(d.log_scale, 0.0);
            assert_eq!(*d.matrix, g);
            assert_eq!(*s.draw_adjoint(&mut rng).matrix, g.adjoint());
        }
    }

    #[test]
    fn scaling_keeps_matrix_part_and_class() {
        let g = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let unscaled = ScaledDraw {
            log_scale: 0.0,
            matrix: Cow::Borrowed(&g),
        };
        assert_eq!(unscaled.to_dense().unwrap(), g);
        let base = MatrixSampler::single(g.clone()).unwrap().spec().clone();
        let s = MatrixSampler::log_scaled(base, HeavyTailLaw::symmetric_pareto(1.5)).unwrap();
        let mut rng = SeedStream::new(2).rng(0, 0);
        for _ in 0..100 {
            let d = s.draw(&mut rng);
            assert_eq!(*d.matrix, g);
            assert_ne!(d.log_scale, 0.0);
        }
        let huge = ScaledDraw {
            log_scale: 1e4,
            matrix: Cow::Borrowed(&g),
        };
        assert!(huge.to_dense().is_err());
    }

    #[test]
    fn mixture_validation() {
        let g = PositiveMatrix::ones(2);
        assert!(MatrixSampler::mixture(vec![(0.5, g.clone())]).is_err());
        assert!(MatrixSampler::mixture(vec![(1.0, mat(&[&[1.0, 0.0], &[1.0, 0.0]]))]).is_err());
        assert!(MatrixSampler::mixture(vec![(0.5, g.clone()), (0.5, PositiveMatrix::ones(3))]).is_err());
        assert!(MatrixSampler::mixture(vec![(0.5, g.clone()), (0.5, g)]).is_ok());
    }

    #[test]
    fn mixture_frequencies() {
        let s = MatrixSampler::mixture(vec![
            (0.25, PositiveMatrix::ones(2)),
            (0.75, PositiveMatrix::identity(2)),
        ])
        .unwrap();
        let mut rng = SeedStream::new(3).rng(0, 0);
        let n = 40_000;
        let hits = (0..n)
            .filter(|_| *s.draw(&mut rng).matrix == PositiveMatrix::ones(2))
            .count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / n as f64).sqrt());
    }

    #[test]
    fn heavy_tail_law_validation() {
        assert!(HeavyTailLaw::symmetric_pareto(1.5).validate().is_ok());
        assert!(HeavyTailLaw::symmetric_pareto(2.5).validate().is_err());
        let mut w = HeavyTailLaw::symmetric_pareto(1.0);
        w.c_plus = 1.0;
        assert!(w.validate().is_err(), "tail masses exceed 1");
        w.u_min = 4.0;
        assert!(w.validate().is_ok());
    }

    #[test]
    fn survival_is_continuous_and_matches_samples() {
        let w = HeavyTailLaw {
            alpha: 1.2,
            c_plus: 0.3,
            c_minus: 0.2,
            slowly_varying: SlowlyVaryingSpec::LogPower { beta: 1.0 },
            u_min: 2.0,
        };
        w.validate().unwrap();
        for u in [-2.0, 2.0] {
            let left = w.survival(u - 1e-9);
            let right = w.survival(u + 1e-9);
            assert!((left - right).abs() < 1e-7, "jump at {u}");
        }
        let mut rng = SeedStream::new(4).rng(0, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| w.sample(&mut rng)).collect();
        for u in [-10.0, -2.5, 0.0, 1.0, 3.0, 20.0] {
            let emp = xs.iter().filter(|&&x| x > u).count() as f64 / n as f64;
            let p = w.survival(u);
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((emp - p).abs() < 5.0 * sd + 1e-6, "u={u}: {emp} vs {p}");
        }
    }

    #[test]
    fn pareto_log_tail_shift() {
        // ln N₁(e^W G) = W + ln N₁(G): the tail of ln N₁ is the tail of W
        // shifted by the constant ln N₁(G).
        let g = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let w = HeavyTailLaw::symmetric_pareto(1.5);
        let s = MatrixSampler::log_scaled(MatrixSampler::single(g.clone()).unwrap().spec().clone(), w).unwrap();
        let shift = g.size_functionals().unwrap().n1.ln();
        let mut rng = SeedStream::new(5).rng(0, 0);
        let n = 400_000;
        let ln_n1: Vec<f64> = (0..n)
            .map(|_| {
                let d = s.draw(&mut rng);
                d.log_scale + d.matrix.size_functionals().unwrap().n1.ln()
            })
            .collect();
        for u in [10.0, 30.0] {
            let emp = ln_n1.iter().filter(|&&x| x > u).count() as f64 / n as f64;
            let exact = w.survival(u - shift);
            let sd = (exact / n as f64).sqrt();
            assert!((emp - exact).abs() < 5.0 * sd, "u={u}: {emp} vs {exact}");
            // and the scaled tail approaches c₊ = 0.5
            let scaled = exact * u.powf(1.5);
            assert!((scaled - 0.5 * (u / (u - shift)).powf(1.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn condition_c_from_support() {
        let swap = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(!MatrixSampler::single(swap).unwrap().condition_c().unwrap().holds);
        let u = mat(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let l = mat(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let s = MatrixSampler::mixture(vec![(0.5, u), (0.5, l)]).unwrap();
        assert_eq!(s.condition_c().unwrap().witness_length, Some(2));
    }

    #[test]
    fn entrywise_draws_are_allowable() {
        let s = MatrixSampler::new(SamplerSpec::EntrywiseRandom {
            dim: 3,
            low: 0.0,
            high: 1.0,
            zero_prob: 0.5,
        })
        .unwrap();
        let mut rng = SeedStream::new(6).rng(0, 0);
        for _ in 0..1000 {
            assert!(s.draw(&mut rng).matrix.is_allowable());
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let json = r#"{"kind":"log_scaled","base":{"kind":"finite_mixture","atoms":[{"weight":1.0,"matrix":[[1.0,2.0],[3.0,4.0]]}]},"scalar":{"alpha":1.5,"c_plus":0.5,"c_minus":0.5}}"#;
        let spec: SamplerSpec = serde_json::from_str(json).unwrap();
        let s = MatrixSampler::new(spec.clone()).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.scalar_law().unwrap().u_min, 1.0);
        let back: SamplerSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
