//! Grid discretization of the transition operator `P` and the Fourier
//! kernels `P_t` for finitely supported `μ` on 2×2 matrices.
//!
//! A point of the one-dimensional simplex is `(s, 1 - s)`; nodes are
//! `s_j = j / (m - 1)`. Row `j` of the discretized `P_t` is
//! `Σ_i w_i e^{itξ(g_i, x_j)} · (linear interpolation weights at g_i·x_j)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::PositiveMatrix;
use crate::projective::{act_unchecked, xi_unchecked, SimplexPoint};
use crate::rng::{domain, SeedStream};
use crate::sampler::MatrixSampler;
use crate::stable::empirical_cf;
use crate::stats::linear_fit;
use crate::walk::{simulate_paths, StartRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m: usize,
}

impl GridSpec {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!("grid needs at least two nodes, got {m}")));
        }
        Ok(Self { m })
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / (self.m - 1) as f64
    }

    pub fn point(&self, j: usize) -> SimplexPoint {
        let s = self.node(j);
        SimplexPoint::new(vec![s, 1.0 - s]).expect("grid nodes lie on the simplex")
    }

    /// Grid with every other node shared with this one.
    pub fn refined(&self) -> GridSpec {
        GridSpec { m: 2 * self.m - 1 }
    }
}

/// Law `μ` of `Y = X*`, required to be finitely supported.
pub fn mu_support(sampler: &MatrixSampler) -> Result<Vec<(f64, PositiveMatrix)>> {
    sampler
        .adjoint_support()
        .ok_or_else(|| Error::SpecInvalid("the spectral lab needs a finitely supported law".into()))
}

fn check_support(support: &[(f64, PositiveMatrix)]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::SpecInvalid("empty support".into()));
    }
    let total: f64 = support.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-9 || support.iter().any(|(w, _)| !(*w > 0.0)) {
        return Err(Error::SpecInvalid(format!("weights must be positive and sum to 1, got {total}")));
    }
    for (_, g) in support {
        if g.dim() != 2 {
            return Err(Error::UnsupportedDim(g.dim()));
        }
        g.ensure_allowable()?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedKernel {
    pub t: f64,
    pub grid: GridSpec,
    /// Sparse rows: `(column, value)`.
    pub rows: Vec<Vec<(usize, Complex64)>>,
    pub support: Vec<(f64, PositiveMatrix)>,
}

pub fn discretize(support: &[(f64, PositiveMatrix)], grid: GridSpec, t: f64) -> Result<DiscretizedKernel> {
    check_support(support)?;
    let m = grid.m;
    let rows = (0..m)
        .into_par_iter()
        .map(|j| {
            let x = grid.point(j);
            let mut row = Vec::with_capacity(2 * support.len());
            for (w, g) in support {
                let phase = Complex64::new(0.0, t * xi_unchecked(g, &x)).exp() * *w;
                let s = act_unchecked(g, &x).coords()[0];
                let pos = s * (m - 1) as f64;
                let k = (pos.floor() as usize).min(m - 2);
                let frac = pos - k as f64;
                row.push((k, phase * (1.0 - frac)));
                if frac > 0.0 {
                    row.push((k + 1, phase * frac));
                }
            }
            row
        })
        .collect();
    Ok(DiscretizedKernel {
        t,
        grid,
        rows,
        support: support.to_vec(),
    })
}

impl DiscretizedKernel {
    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(k, v)| v * f[k]).sum())
            .collect()
    }

    pub fn apply_real(&self, f: &[f64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(k, v)| v * f[k]).sum())
            .collect()
    }

    /// Row vector times the kernel.
    pub fn apply_left(&self, pi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.m];
        for (j, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                out[k] += pi[j] * v;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<Complex64> {
        self.rows.iter().map(|r| r.iter().map(|&(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let m = self.grid.m;
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![Complex64::new(0.0, 0.0); m];
                for &(k, v) in row {
                    dense[k] += v;
                }
                dense
            })
            .collect()
    }

    /// Stationary row vector of the `t = 0` kernel, via the lazy chain
    /// `(I + P)/2` so periodic supports converge too.
    pub fn stationary_vector(&self) -> Vec<f64> {
        let m = self.grid.m;
        let mut pi = vec![Complex64::new(1.0 / m as f64, 0.0); m];
        for _ in 0..1_000_000 {
            let next: Vec<Complex64> = self
                .apply_left(&pi)
                .iter()
                .zip(&pi)
                .map(|(a, b)| (a + b) * 0.5)
                .collect();
            let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).norm()).sum();
            pi = next;
            if change < 1e-15 {
                break;
            }
        }
        let total: f64 = pi.iter().map(|c| c.re).sum();
        pi.iter().map(|c| c.re / total).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantEigen {
    pub lambda: Complex64,
    pub vector: Vec<Complex64>,
    pub iterations: usize,
    pub residual: f64,
}

pub const EIGEN_MAX_ITER: usize = 100_000;

/// Power iteration from the constant function; the iterate is scaled so its
/// largest component is 1.
pub fn dominant_eigenvalue(k: &DiscretizedKernel, tol: f64) -> Result<DominantEigen> {
    let m = k.grid.m;
    let mut v = vec![Complex64::new(1.0, 0.0); m];
    let mut best = f64::INFINITY;
    for it in 1..=EIGEN_MAX_ITER {
        let w = k.apply(&v);
        let i = argmax_norm(&v);
        let lambda = w[i] / v[i];
        let residual = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).norm()).fold(0.0, f64::max);
        best = best.min(residual);
        if residual <= tol {
            return Ok(DominantEigen {
                lambda,
                vector: v,
                iterations: it,
                residual,
            });
        }
        let j = argmax_norm(&w);
        let scale = w[j];
        if scale.norm() == 0.0 {
            return Err(Error::NoGap {
                t: k.t,
                iterations: it,
                residual: best,
            });
        }
        v = w.iter().map(|c| c / scale).collect();
    }
    Err(Error::NoGap {
        t: k.t,
        iterations: EIGEN_MAX_ITER,
        residual: best,
    })
}

fn argmax_norm(v: &[Complex64]) -> usize {
    let mut best = 0;
    for (i, c) in v.iter().enumerate() {
        if c.norm() > v[best].norm() {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub nu_f: f64,
    /// `sup_j |Pⁿf(x_j) - ν(f)|` for `n = 0..=n_max`.
    pub errors: Vec<f64>,
    pub rate: f64,
    pub kappa_hat: Option<f64>,
    pub tolerance: f64,
    pub passed: Option<bool>,
}

/// Errors below this are rounding noise and are left out of the rate fit.
const ERGODIC_FLOOR: f64 = 1e-13;

/// Geometric decay of `Pⁿf - ν(f)` for the `t = 0` kernel.
pub fn ergodicity_check(
    k0: &DiscretizedKernel,
    f: &dyn Fn(f64) -> f64,
    n_max: usize,
    kappa_hat: Option<f64>,
    tolerance: f64,
) -> Result<ErgodicityReport> {
    if k0.t != 0.0 {
        return Err(Error::InvalidArgument("ergodicity check needs the t = 0 kernel".into()));
    }
    let grid = k0.grid;
    let pi = k0.stationary_vector();
    let mut v: Vec<f64> = (0..grid.m).map(|j| f(grid.node(j))).collect();
    let nu_f: f64 = pi.iter().zip(&v).map(|(a, b)| a * b).sum();
    let mut errors = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            v = k0.apply_real(&v).into_iter().map(|c| c.re).collect();
        }
        errors.push(v.iter().map(|x| (x - nu_f).abs()).fold(0.0, f64::max));
    }
    let rate = decay_rate(&errors);
    let passed = kappa_hat.map(|k| rate <= k + tolerance);
    Ok(ErgodicityReport {
        nu_f,
        errors,
        rate,
        kappa_hat,
        tolerance,
        passed,
    })
}

/// `exp` of the OLS slope of `ln e_n` over the points above the floor,
/// skipping `n = 0`.
pub fn decay_rate(errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .enumerate()
        .skip(1)
        .take_while(|(_, &e)| e > ERGODIC_FLOOR)
        .map(|(n, &e)| (n as f64, e.ln()))
        .collect();
    if pts.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&x, &y).slope.exp()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonEstimate {
    pub t: f64,
    pub value: f64,
    /// Zero for the exact finite-support sum.
    pub stderr: f64,
}

/// `ε(t) = E[min(|t| ℓ(Y), 2)]`: exact for finite support, Monte Carlo with
/// `n_samples` draws otherwise.
pub fn epsilon_of_t(sampler: &MatrixSampler, t: f64, n_samples: usize, seed: u64) -> Result<EpsilonEstimate> {
    if let Some(support) = sampler.adjoint_support() {
        let mut value = 0.0;
        for (w, g) in &support {
            value += w * (t.abs() * g.size_functionals()?.ell).min(2.0);
        }
        return Ok(EpsilonEstimate { t, value, stderr: 0.0 });
    }
    if n_samples < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n_samples });
    }
    let stream = SeedStream::new(seed);
    let vals: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let d = sampler.draw_adjoint(&mut stream.rng(domain::EPSILON, i as u64));
            let cols = d.matrix.col_sums();
            let op = cols.iter().copied().fold(0.0, f64::max).ln() + d.log_scale;
            let vmin = cols.iter().copied().fold(f64::INFINITY, f64::min).ln() + d.log_scale;
            (t.abs() * (op.abs() + vmin.abs())).min(2.0)
        })
        .collect();
    Ok(EpsilonEstimate {
        t,
        value: crate::stats::mean(&vals),
        stderr: crate::stats::std_dev(&vals) / (n_samples as f64).sqrt(),
    })
}

/// `μ⊗ν(e^{itξ})` with `ν` replaced by the stationary vector of the grid chain.
pub fn quadrature_cf(support: &[(f64, PositiveMatrix)], grid: GridSpec, pi: &[f64], t: f64) -> Complex64 {
    (0..grid.m)
        .map(|j| {
            let x = grid.point(j);
            let inner: Complex64 = support
                .iter()
                .map(|(w, g)| Complex64::new(0.0, t * xi_unchecked(g, &x)).exp() * *w)
                .sum();
            inner * pi[j]
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub t: f64,
    pub lambda: Complex64,
    pub cf_quadrature: Complex64,
    pub cf_monte_carlo: Complex64,
    /// Standard error of the Monte Carlo cf.
    pub cf_sigma: f64,
    pub bound: f64,
    pub diff_quadrature: f64,
    pub diff_monte_carlo: f64,
    pub ratio_quadrature: f64,
    /// `(|λ - cf_mc| - 3σ)⁺ / bound²`.
    pub ratio_monte_carlo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub rows: Vec<ExpansionRow>,
    /// Log–log slope of the quadrature difference against the bound.
    pub slope: f64,
    pub max_ratio: f64,
    pub cap: f64,
    pub min_slope: f64,
    pub passed: bool,
}

/// Compares `λ(t)` with `μ⊗ν(e^{itξ})` for `t` decreasing to 0, against the
/// proxy `ε(t) + |t|` for `‖P_t - P‖`.
pub fn expansion_check(
    sampler: &MatrixSampler,
    grid: GridSpec,
    t_grid: &[f64],
    xi_samples: &[f64],
    cap: f64,
    min_slope: f64,
) -> Result<ExpansionReport> {
    let support = mu_support(sampler)?;
    let pi = discretize(&support, grid, 0.0)?.stationary_vector();
    let cf_mc = empirical_cf(xi_samples, t_grid);
    let n = xi_samples.len() as f64;
    let rows = t_grid
        .iter()
        .zip(cf_mc)
        .map(|(&t, mc)| {
            let k = discretize(&support, grid, t)?;
            let lambda = dominant_eigenvalue(&k, 1e-14)?.lambda;
            let quad = quadrature_cf(&support, grid, &pi, t);
            let var: f64 = xi_samples
                .iter()
                .map(|&x| {
                    let z = Complex64::new(0.0, t * x).exp();
                    (z - mc).norm_sqr()
                })
                .sum::<f64>()
                / (n - 1.0);
            let cf_sigma = (var / n).sqrt();
            let eps = epsilon_of_t(sampler, t, 0, 0)?.value;
            let bound = eps + t.abs();
            let diff_quadrature = (lambda - quad).norm();
            let diff_monte_carlo = (lambda - mc).norm();
            Ok(ExpansionRow {
                t,
                lambda,
                cf_quadrature: quad,
                cf_monte_carlo: mc,
                cf_sigma,
                bound,
                diff_quadrature,
                diff_monte_carlo,
                ratio_quadrature: diff_quadrature / (bound * bound),
                ratio_monte_carlo: (diff_monte_carlo - 3.0 * cf_sigma).max(0.0) / (bound * bound),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.bound.ln(), r.diff_quadrature.ln())).unzip();
    let slope = if rows.len() >= 3 { linear_fit(&x, &y).slope } else { f64::NAN };
    let max_ratio = rows
        .iter()
        .map(|r| r.ratio_quadrature.max(r.ratio_monte_carlo))
        .fold(0.0, f64::max);
    Ok(ExpansionReport {
        passed: max_ratio <= cap && slope >= min_slope,
        rows,
        slope,
        max_ratio,
        cap,
        min_slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub t: f64,
    pub n: usize,
    pub discretized: Complex64,
    pub discretized_fine: Complex64,
    /// Richardson estimate `4/3 |v_m - v_fine|` of the coarse-grid error.
    pub interpolation_error: f64,
    pub monte_carlo: Complex64,
    pub sigma: f64,
    pub difference: f64,
    pub allowed: f64,
    pub ok: bool,
}

/// Checks `P_tⁿ1(y) = E[e^{it ln‖Ỹ⁽ⁿ⁾y‖}]` at the grid node `y_index`, with
/// the right side from `n_paths` simulated walks.
pub fn fourier_identity_check(
    sampler: &MatrixSampler,
    grid: GridSpec,
    y_index: usize,
    t_values: &[f64],
    n_max: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<IdentityRow>> {
    let support = mu_support(sampler)?;
    let fine = grid.refined();
    let y = grid.point(y_index);
    let stream = SeedStream::new(seed);
    let mut out = Vec::new();
    for (ti, &t) in t_values.iter().enumerate() {
        let k = discretize(&support, grid, t)?;
        let kf = discretize(&support, fine, t)?;
        let mut v = vec![Complex64::new(1.0, 0.0); grid.m];
        let mut vf = vec![Complex64::new(1.0, 0.0); fine.m];
        for n in 1..=n_max {
            v = k.apply(&v);
            vf = kf.apply(&vf);
            let d = v[y_index];
            let df = vf[2 * y_index];
            let samples: Vec<f64> = simulate_paths(
                sampler,
                &StartRule::Fixed { point: y.clone() },
                n,
                n_paths,
                stream.child(domain::PATHS, (ti * 1000 + n) as u64).seed(),
            )?
            .into_iter()
            .map(|s| s.log_norm)
            .collect();
            let mc = empirical_cf(&samples, &[t])[0];
            let var: f64 = samples
                .iter()
                .map(|&x| (Complex64::new(0.0, t * x).exp() - mc).norm_sqr())
                .sum::<f64>()
                / (n_paths as f64 - 1.0);
            let sigma = (var / n_paths as f64).sqrt();
            let interpolation_error = 4.0 / 3.0 * (d - df).norm();
            let difference = (d - mc).norm();
            let allowed = interpolation_error + 3.0 * sigma;
            out.push(IdentityRow {
                t,
                n,
                discretized: d,
                discretized_fine: df,
                interpolation_error,
                monte_carlo: mc,
                sigma,
                difference,
                allowed,
                ok: difference <= allowed,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> PositiveMatrix {
        PositiveMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn two_atoms() -> Vec<(f64, PositiveMatrix)> {
        vec![
            (0.5, mat(&[&[0.5, 0.4], &[0.3, 0.9]])),
            (0.5, mat(&[&[1.0, 0.2], &[0.3, 0.6]])),
        ]
    }

    #[test]
    fn identity_atom_maps_nodes_to_themselves() {
        let k = discretize(&[(1.0, PositiveMatrix::identity(2))], GridSpec::new(9).unwrap(), 0.0).unwrap();
        for (j, row) in k.rows.iter().enumerate() {
            let total: Complex64 = row.iter().filter(|(c, _)| *c == j).map(|&(_, v)| v).sum();
            assert!((total - 1.0).norm() < 1e-12, "row {j}: {row:?}");
        }
    }

    #[test]
    fn rank_one_rows_are_identical() {
        let k = discretize(&[(1.0, mat(&[&[1.0, 2.0], &[2.0, 4.0]]))], GridSpec::new(17).unwrap(), 0.0).unwrap();
        let d = k.to_dense();
        for row in &d[1..] {
            for (a, b) in row.iter().zip(&d[0]) {
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn stochastic_at_zero_and_bounded_otherwise() {
        let g = GridSpec::new(64).unwrap();
        let k0 = discretize(&two_atoms(), g, 0.0).unwrap();
        assert!(k0.row_sums().iter().all(|s| (s - 1.0).norm() < 1e-12));
        let k = discretize(&two_atoms(), g, 0.7).unwrap();
        assert!(k.row_sums().iter().all(|s| s.norm() <= 1.0 + 1e-12));
    }

    #[test]
    fn kernel_matches_monte_carlo_on_lipschitz_probe() {
        let support = two_atoms();
        let g = GridSpec::new(257).unwrap();
        let k = discretize(&support, g, 0.0).unwrap();
        let f = |s: f64| (3.0 * s).sin();
        let pf = k.apply_real(&(0..g.m).map(|j| f(g.node(j))).collect::<Vec<_>>());
        for j in [0, 40, 128, 256] {
            let x = g.point(j);
            let exact: f64 = support.iter().map(|(w, a)| w * f(act_unchecked(a, &x).coords()[0])).sum();
            // linear interpolation error of sin(3s) is at most 9/8 h²
            assert!((pf[j].re - exact).abs() < 9.0 / 8.0 / 256f64.powi(2), "{j}");
        }
    }

    #[test]
    fn eigenvalue_at_zero_is_one() {
        let k = discretize(&two_atoms(), GridSpec::new(128).unwrap(), 0.0).unwrap();
        let e = dominant_eigenvalue(&k, 1e-13).unwrap();
        assert!((e.lambda - 1.0).norm() < 1e-12);
        assert!(e.vector.iter().all(|v| (v - 1.0).norm() < 1e-12));
    }

    #[test]
    fn hermitian_symmetry_and_modulus() {
        let g = GridSpec::new(128).unwrap();
        for t in [0.1, 0.5, 1.0] {
            let a = dominant_eigenvalue(&discretize(&two_atoms(), g, t).unwrap(), 1e-13).unwrap().lambda;
            let b = dominant_eigenvalue(&discretize(&two_atoms(), g, -t).unwrap(), 1e-13).unwrap().lambda;
            assert!((a - b.conj()).norm() < 1e-10);
            assert!(a.norm() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn grid_refinement_converges_at_second_order() {
        let g = GridSpec::new(65).unwrap();
        let (g2, g4) = (g.refined(), g.refined().refined());
        let lam = |g| dominant_eigenvalue(&discretize(&two_atoms(), g, 0.1).unwrap(), 1e-14).unwrap().lambda;
        let (a, b, c) = (lam(g), lam(g2), lam(g4));
        let ratio = (a - b).norm() / (b - c).norm();
        assert!(ratio >= 3.0, "{ratio}");
    }

    #[test]
    fn ergodicity_examples() {
        let g = GridSpec::new(129).unwrap();
        let probe = |s: f64| s;
        let rank_one = discretize(&[(1.0, mat(&[&[1.0, 2.0], &[2.0, 4.0]]))], g, 0.0).unwrap();
        let r = ergodicity_check(&rank_one, &probe, 20, None, 0.05).unwrap();
        assert!(r.errors[1] < 1e-14 && r.rate == 0.0, "{r:?}");

        let swap = discretize(&[(1.0, mat(&[&[0.0, 1.0], &[1.0, 0.0]]))], g, 0.0).unwrap();
        let r = ergodicity_check(&swap, &probe, 20, None, 0.05).unwrap();
        assert!((r.rate - 1.0).abs() < 1e-9, "{r:?}");

        let k0 = discretize(&two_atoms(), g, 0.0).unwrap();
        let r = ergodicity_check(&k0, &probe, 40, None, 0.05).unwrap();
        assert!(r.rate < 1.0 && r.errors[40] < r.errors[1] * 1e-3, "{r:?}");
    }

    #[test]
    fn epsilon_examples() {
        let g = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let s = MatrixSampler::single(g.clone()).unwrap();
        assert_eq!(epsilon_of_t(&s, 0.0, 0, 0).unwrap().value, 0.0);
        let ell = g.adjoint().size_functionals().unwrap().ell;
        assert!((epsilon_of_t(&s, 0.1, 0, 0).unwrap().value - 0.1 * ell).abs() < 1e-15);
        assert_eq!(epsilon_of_t(&s, 2.0 / ell + 1.0, 0, 0).unwrap().value, 2.0);
    }

    #[test]
    fn rejects_larger_dimensions() {
        assert_eq!(
            discretize(&[(1.0, PositiveMatrix::identity(3))], GridSpec::new(8).unwrap(), 0.0).unwrap_err(),
            Error::UnsupportedDim(3)
        );
    }
}
