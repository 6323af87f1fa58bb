//! The renormalized left random walk and the observables of the product
//! `X⁽ⁿ⁾ = X_n ⋯ X_1`.
//!
//! The walk state carries the direction `Ỹ⁽ᵏ⁾·y₀` and the accumulated log
//! norm `ln ‖Ỹ⁽ᵏ⁾ y₀‖`, updated through the cocycle
//! `ln ‖Ỹ⁽ⁿ⁾y‖ = Σ ξ(Y_k, Ỹ⁽ᵏ⁻¹⁾·y)`. Nothing is ever exponentiated, so
//! heavy-tailed scalars cannot overflow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{mul_into, PositiveMatrix};
use crate::pattern::BooleanPattern;
use crate::projective::{act_unchecked, xi_unchecked, SimplexPoint};
use crate::rng::{domain, SeedStream};
use crate::sampler::MatrixSampler;

#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    pub k: usize,
    pub direction: SimplexPoint,
    pub log_norm: f64,
    /// Zero pattern of `X⁽ᵏ⁾`; `None` before the first step.
    pub pattern: Option<BooleanPattern>,
    /// First `k` at which the pattern became all-ones.
    pub t_hit: Option<usize>,
}

impl WalkState {
    pub fn start(y0: SimplexPoint) -> Self {
        Self {
            k: 0,
            direction: y0,
            log_norm: 0.0,
            pattern: None,
            t_hit: None,
        }
    }

    /// One step with `g = Y_{k+1}`.
    pub fn step(&self, g: &PositiveMatrix) -> Result<WalkState> {
        self.step_scaled(0.0, g)
    }

    /// One step with `Y_{k+1} = e^log_scale · g`.
    pub fn step_scaled(&self, log_scale: f64, g: &PositiveMatrix) -> Result<WalkState> {
        if g.dim() != self.direction.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.direction.dim(),
                found: g.dim(),
            });
        }
        g.ensure_allowable()?;
        let mut next = self.clone();
        next.advance(log_scale, g);
        Ok(next)
    }

    fn advance(&mut self, log_scale: f64, g: &PositiveMatrix) {
        self.log_norm += log_scale + xi_unchecked(g, &self.direction);
        self.direction = act_unchecked(g, &self.direction);
        self.k += 1;
        // X⁽ᵏ⁾ = X_k X⁽ᵏ⁻¹⁾ and X_k = g*, so the pattern is g*·pattern.
        let gp = g.adjoint().pattern();
        let pattern = match self.pattern {
            Some(p) => gp.product(&p),
            None => gp,
        };
        if self.t_hit.is_none() && pattern.is_all_ones() {
            self.t_hit = Some(self.k);
        }
        self.pattern = Some(pattern);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub path: usize,
    pub n: usize,
    pub log_norm: f64,
    pub t_hit: Option<usize>,
}

/// Starting direction of a path, possibly depending on `n` and the path index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StartRule {
    Fixed { point: SimplexPoint },
    /// Vertex `e_{(n + path) mod q}`.
    AlternatingVertices,
}

impl StartRule {
    pub fn point(&self, q: usize, n: usize, path: usize) -> SimplexPoint {
        match self {
            StartRule::Fixed { point } => point.clone(),
            StartRule::AlternatingVertices => SimplexPoint::vertex(q, (n + path) % q),
        }
    }
}

/// Runs `n_paths` independent walks of length `n`. Path `i` uses the random
/// stream `(seed, PATHS, i)`, so results are independent of thread count.
pub fn simulate_paths(
    sampler: &MatrixSampler,
    start: &StartRule,
    n: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<PathSample>> {
    let q = sampler.dim();
    if let StartRule::Fixed { point } = start {
        if point.dim() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: point.dim(),
            });
        }
    }
    let stream = SeedStream::new(seed);
    Ok((0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = stream.rng(domain::PATHS, path as u64);
            let mut state = WalkState::start(start.point(q, n, path));
            for _ in 0..n {
                let d = sampler.draw_adjoint(&mut rng);
                state.advance(d.log_scale, &d.matrix);
            }
            PathSample {
                path,
                n,
                log_norm: state.log_norm,
                t_hit: state.t_hit,
            }
        })
        .collect())
}

/// Path samples of `ln Λ_n`, the log spectral radius of `X⁽ⁿ⁾`.
pub fn simulate_log_perron(sampler: &MatrixSampler, n: usize, n_paths: usize, seed: u64) -> Result<Vec<f64>> {
    let stream = SeedStream::new(seed);
    (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = stream.rng(domain::PATHS, path as u64);
            let mut prod = LogProduct::identity(sampler.dim());
            for _ in 0..n {
                let d = sampler.draw(&mut rng);
                prod.left_multiply(d.log_scale, &d.matrix);
            }
            prod.log_perron()
        })
        .collect()
}

/// `X = e^log_scale · M̂` with `max M̂ = 1`, built by left multiplication.
#[derive(Debug, Clone)]
pub struct LogProduct {
    dim: usize,
    normalized: Vec<f64>,
    log_scale: f64,
    scratch: Vec<f64>,
}

impl LogProduct {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            normalized: PositiveMatrix::identity(dim).as_slice().to_vec(),
            log_scale: 0.0,
            scratch: vec![0.0; dim * dim],
        }
    }

    /// `X ← e^s g X`.
    pub fn left_multiply(&mut self, log_scale: f64, g: &PositiveMatrix) {
        mul_into(self.dim, g.as_slice(), &self.normalized, &mut self.scratch);
        self.absorb(log_scale);
    }

    /// `X ← X e^s g`.
    pub fn right_multiply(&mut self, log_scale: f64, g: &PositiveMatrix) {
        mul_into(self.dim, &self.normalized, g.as_slice(), &mut self.scratch);
        self.absorb(log_scale);
    }

    fn absorb(&mut self, log_scale: f64) {
        std::mem::swap(&mut self.normalized, &mut self.scratch);
        let max = self.normalized.iter().copied().fold(0.0, f64::max);
        for v in self.normalized.iter_mut() {
            *v /= max;
        }
        self.log_scale += log_scale + max.ln();
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn normalized(&self) -> PositiveMatrix {
        PositiveMatrix::from_row_major(self.dim, self.normalized.clone()).expect("product entries are nonnegative")
    }

    pub fn normalized_slice(&self) -> &[f64] {
        &self.normalized
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.normalized.iter().all(|&v| v > 0.0)
    }

    pub fn log_perron(&self) -> Result<f64> {
        let p = self.normalized().perron(PERRON_TOL)?;
        Ok(p.lambda.ln() + self.log_scale)
    }
}

const PERRON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub n: usize,
    /// `1_{T<=n} ln ⟨y_n, X⁽ⁿ⁾ x_n⟩`.
    pub log_scalar: f64,
    /// `ln Λ_n`.
    pub log_perron: f64,
    /// `ln ‖Y⁽ⁿ⁾ y_n‖`.
    pub log_norm_adjoint: f64,
    pub d_n: f64,
    pub d_tilde_n: f64,
    /// Largest value of the `D_n` objective over the random probe points;
    /// never exceeds `d_n`.
    pub d_n_probe_max: f64,
    pub t_hit: Option<usize>,
}

/// Sequences `(x_n)` and `(y_n)` of unit vectors used by [`observables`].
pub trait DirectionSequence: Sync {
    fn at(&self, n: usize) -> SimplexPoint;
}

impl DirectionSequence for SimplexPoint {
    fn at(&self, _n: usize) -> SimplexPoint {
        self.clone()
    }
}

/// `e_{n mod q}`.
#[derive(Debug, Clone, Copy)]
pub struct AlternatingSequence {
    pub dim: usize,
}

impl DirectionSequence for AlternatingSequence {
    fn at(&self, n: usize) -> SimplexPoint {
        SimplexPoint::vertex(self.dim, n % self.dim)
    }
}

/// Observables of one path of the explicit product `X⁽ⁿ⁾`, for `n = 1..=n_max`.
///
/// `D_n` is evaluated exactly: for fixed `y`, with `z = Y⁽ⁿ⁾y`,
/// `sup_x |ln⟨z, x⟩ - ln‖z‖| = ln(‖z‖ / min_j z_j)`, and the outer supremum
/// over `y` of this quasi-convex objective sits at a vertex. The reduction is
/// cross-checked against `n_probes` random `y` per step.
pub fn observables(
    sampler: &MatrixSampler,
    xs: &dyn DirectionSequence,
    ys: &dyn DirectionSequence,
    n_max: usize,
    n_probes: usize,
    seed: u64,
    path: usize,
) -> Result<Vec<ObservableRecord>> {
    let q = sampler.dim();
    let stream = SeedStream::new(seed);
    let mut rng = stream.rng(domain::OBSERVABLES, path as u64);
    let mut probe_rng = stream.rng(domain::PROBES, path as u64);
    let mut prod = LogProduct::identity(q);
    let mut t_hit = None;
    let chi = SimplexPoint::barycenter(q);
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let d = sampler.draw(&mut rng);
        prod.left_multiply(d.log_scale, &d.matrix);
        if t_hit.is_none() && prod.is_strictly_positive() {
            t_hit = Some(n);
        }
        let hit = t_hit.is_some();
        let m = prod.normalized_slice();
        let s = prod.log_scale();
        let (x, y) = (xs.at(n), ys.at(n));
        if x.dim() != q || y.dim() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: x.dim().min(y.dim()),
            });
        }
        // z = M̂ᵀ y, so ⟨y, M̂ x⟩ = ⟨z, x⟩ and ‖Y⁽ⁿ⁾y‖ = e^s ‖z‖.
        let z = adjoint_apply(q, m, y.coords());
        let zx: f64 = z.iter().zip(x.coords()).map(|(a, b)| a * b).sum();
        let log_scalar = if hit { zx.ln() + s } else { 0.0 };
        let log_norm_adjoint = z.iter().sum::<f64>().ln() + s;

        let objective = |y: &[f64]| -> f64 {
            let z = adjoint_apply(q, m, y);
            let norm: f64 = z.iter().sum();
            if hit {
                let zmin = z.iter().copied().fold(f64::INFINITY, f64::min);
                (norm / zmin).ln()
            } else {
                (norm.ln() + s).abs()
            }
        };
        let d_n = (0..q)
            .map(|i| objective(SimplexPoint::vertex(q, i).coords()))
            .fold(0.0, f64::max);
        let d_n_probe_max = (0..n_probes)
            .map(|_| objective(SimplexPoint::random(&mut probe_rng, q).coords()))
            .fold(0.0, f64::max);

        let log_perron = prod.log_perron()?;
        let z_chi = adjoint_apply(q, m, chi.coords());
        let d_tilde_n = (log_perron - (z_chi.iter().sum::<f64>().ln() + s)).abs();
        out.push(ObservableRecord {
            n,
            log_scalar,
            log_perron,
            log_norm_adjoint,
            d_n,
            d_tilde_n,
            d_n_probe_max,
            t_hit,
        });
    }
    Ok(out)
}

fn adjoint_apply(q: usize, m: &[f64], y: &[f64]) -> Vec<f64> {
    (0..q).map(|j| (0..q).map(|i| m[i * q + j] * y[i]).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projective::{act, xi};

    fn mat(rows: &[&[f64]]) -> PositiveMatrix {
        PositiveMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn p(v: &[f64]) -> SimplexPoint {
        SimplexPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn identity_step_is_neutral() {
        let s = WalkState::start(p(&[0.3, 0.7]));
        let t = s.step(&PositiveMatrix::identity(2)).unwrap();
        assert_eq!(t.direction, s.direction);
        assert_eq!(t.log_norm, 0.0);
        assert_eq!(t.k, 1);
        assert_eq!(t.t_hit, None);
    }

    #[test]
    fn two_steps_equal_one_product_step() {
        let g1 = mat(&[&[1.0, 2.0], &[0.5, 4.0]]);
        let g2 = mat(&[&[3.0, 0.2], &[1.0, 1.0]]);
        let s = WalkState::start(p(&[0.6, 0.4]));
        let two = s.step(&g1).unwrap().step(&g2).unwrap();
        let one = s.step(&g2.multiply(&g1).unwrap()).unwrap();
        assert!((two.log_norm - one.log_norm).abs() < 1e-14);
        for (a, b) in two.direction.coords().iter().zip(one.direction.coords()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(act(&g2, &act(&g1, &s.direction).unwrap()).unwrap(), two.direction);
        assert_eq!(
            xi(&g1, &s.direction).unwrap() + xi(&g2, &act(&g1, &s.direction).unwrap()).unwrap(),
            two.log_norm
        );
    }

    #[test]
    fn all_ones_step_example() {
        let s = WalkState::start(p(&[1.0, 0.0]));
        let t = s.step(&PositiveMatrix::ones(2)).unwrap();
        assert_eq!(t.direction.coords(), &[0.5, 0.5]);
        assert!((t.log_norm - 2f64.ln()).abs() < 1e-15);
        assert_eq!(t.t_hit, Some(1));
    }

    #[test]
    fn t_hit_never_changes_and_pattern_stays_full() {
        let u = mat(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let l = mat(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let mut s = WalkState::start(p(&[0.5, 0.5]));
        s = s.step(&u).unwrap();
        assert_eq!(s.t_hit, None);
        s = s.step(&l).unwrap();
        assert_eq!(s.t_hit, Some(2));
        for g in [&u, &l, &PositiveMatrix::identity(2), &u] {
            s = s.step(g).unwrap();
            assert_eq!(s.t_hit, Some(2));
            assert!(s.pattern.unwrap().is_all_ones());
        }
    }

    #[test]
    fn step_rejects_bad_matrices() {
        let s = WalkState::start(p(&[0.5, 0.5]));
        assert_eq!(s.step(&mat(&[&[1.0, 0.0], &[1.0, 0.0]])), Err(Error::NotAllowable));
        assert!(matches!(s.step(&PositiveMatrix::ones(3)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_matrix_paths_match_direct_powers() {
        // Oracle: explicit renormalized powers of g applied to y₀.
        let g = mat(&[&[1.0, 2.0], &[0.5, 1.5]]);
        let x_atom = g.adjoint(); // the sampler draws X; the walk uses Y = X*
        let sampler = MatrixSampler::single(x_atom).unwrap();
        let y0 = p(&[0.2, 0.8]);
        let n = 40;
        let out = simulate_paths(&sampler, &StartRule::Fixed { point: y0.clone() }, n, 3, 9).unwrap();
        let mut v = y0.coords().to_vec();
        let mut log = 0.0;
        for _ in 0..n {
            v = g.apply(&v);
            let s: f64 = v.iter().sum();
            log += s.ln();
            v.iter_mut().for_each(|c| *c /= s);
        }
        for s in out {
            assert!((s.log_norm - log).abs() < 1e-10 * log.abs());
            assert_eq!(s.t_hit, Some(1));
        }
    }

    #[test]
    fn scalar_case_sums_w_exactly() {
        use crate::sampler::{HeavyTailLaw, SamplerSpec};
        use rand::SeedableRng;
        let base = MatrixSampler::single(PositiveMatrix::identity(1)).unwrap().spec().clone();
        let sampler = MatrixSampler::new(SamplerSpec::LogScaled {
            base: Box::new(base),
            scalar: HeavyTailLaw::symmetric_pareto(1.5),
        })
        .unwrap();
        let out = simulate_paths(&sampler, &StartRule::Fixed { point: p(&[1.0]) }, 25, 4, 11).unwrap();
        for s in &out {
            let mut rng = SeedStream::new(11).rng(domain::PATHS, s.path as u64);
            let total: f64 = (0..25).map(|_| sampler.draw_adjoint(&mut rng).log_scale).sum();
            assert_eq!(s.log_norm, total);
        }
        let _ = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    }

    #[test]
    fn permutation_support_never_hits() {
        let swap = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let sampler = MatrixSampler::mixture(vec![(0.5, swap), (0.5, PositiveMatrix::identity(2))]).unwrap();
        let out = simulate_paths(&sampler, &StartRule::AlternatingVertices, 50, 20, 1).unwrap();
        assert!(out.iter().all(|s| s.t_hit.is_none()));
    }

    #[test]
    fn all_ones_observables_closed_form() {
        let sampler = MatrixSampler::single(PositiveMatrix::ones(2)).unwrap();
        let x = p(&[0.3, 0.7]);
        let y = p(&[0.9, 0.1]);
        let rec = observables(&sampler, &x, &y, 50, 100, 1, 0).unwrap();
        for r in rec {
            let n = r.n as f64;
            assert!((r.d_n - 2f64.ln()).abs() < 1e-10, "n={} d_n={}", r.n, r.d_n);
            assert!(r.d_tilde_n < 1e-10);
            assert!((r.log_perron - n * 2f64.ln()).abs() < 1e-9);
            // ⟨y, 2^{n-1} ones x⟩ = 2^{n-1}
            assert!((r.log_scalar - (n - 1.0) * 2f64.ln()).abs() < 1e-9);
            assert!(r.d_n_probe_max <= r.d_n + 1e-12);
        }
    }

    #[test]
    fn single_matrix_log_perron_is_linear() {
        let g = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let sampler = MatrixSampler::single(g).unwrap();
        let chi = SimplexPoint::barycenter(2);
        let rec = observables(&sampler, &chi, &chi, 30, 0, 1, 0).unwrap();
        for r in rec {
            assert!((r.log_perron - r.n as f64 * 3f64.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn log_product_matches_direct_product() {
        let a = mat(&[&[0.3, 1.7], &[2.1, 0.4]]);
        let b = mat(&[&[1.2, 0.1], &[0.6, 0.9]]);
        let mut lp = LogProduct::identity(2);
        let mut direct = PositiveMatrix::identity(2);
        for k in 0..20 {
            let g = if k % 3 == 0 { &a } else { &b };
            lp.left_multiply(0.0, g);
            direct = g.multiply(&direct).unwrap();
        }
        let scale = lp.log_scale().exp();
        for (x, y) in lp.normalized_slice().iter().zip(direct.as_slice()) {
            assert!((x * scale - y).abs() <= 1e-9 * y.abs());
        }
    }

    #[test]
    fn before_hit_d_n_uses_row_sums() {
        // Non-contracting diagonal walk: T = ∞, D_n = max_i |ln rowsum_i(X⁽ⁿ⁾)|.
        let g = PositiveMatrix::diagonal(&[2.0, 0.5]).unwrap();
        let sampler = MatrixSampler::single(g).unwrap();
        let chi = SimplexPoint::barycenter(2);
        let rec = observables(&sampler, &chi, &chi, 10, 200, 3, 0).unwrap();
        for r in rec {
            assert_eq!(r.t_hit, None);
            assert_eq!(r.log_scalar, 0.0);
            assert!((r.d_n - r.n as f64 * 2f64.ln()).abs() < 1e-10);
            assert!(r.d_n_probe_max <= r.d_n + 1e-12);
        }
    }
}
