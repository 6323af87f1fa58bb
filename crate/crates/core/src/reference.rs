//! Fixed matrix laws used by the acceptance suite and the example configs.

use crate::matrix::PositiveMatrix;
use crate::sampler::{HeavyTailLaw, MatrixSampler, SamplerSpec, WeightedMatrix};
use crate::slowly_varying::SlowlyVaryingSpec;
use crate::tail::TailHypothesis;

fn m(rows: [[f64; 2]; 2]) -> PositiveMatrix {
    PositiveMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).expect("reference matrices are valid")
}

fn mixture(atoms: Vec<(f64, PositiveMatrix)>) -> SamplerSpec {
    SamplerSpec::FiniteMixture {
        atoms: atoms
            .into_iter()
            .map(|(weight, matrix)| WeightedMatrix { weight, matrix })
            .collect(),
    }
}

/// Two strictly positive 2×2 atoms with equal weight; `ln ‖g x‖` stays
/// within roughly `[-0.25, 0.3]`.
pub fn two_atom_spec() -> SamplerSpec {
    mixture(vec![
        (0.5, m([[0.5, 0.3], [0.4, 0.9]])),
        (0.5, m([[1.0, 0.3], [0.2, 0.6]])),
    ])
}

pub fn two_atom() -> MatrixSampler {
    MatrixSampler::new(two_atom_spec()).expect("valid reference law")
}

/// `e^W` times a draw of [`two_atom`], `W` symmetric Pareto-log with index `alpha`.
pub fn heavy_tailed_spec(alpha: f64) -> SamplerSpec {
    SamplerSpec::LogScaled {
        base: Box::new(two_atom_spec()),
        scalar: HeavyTailLaw::symmetric_pareto(alpha),
    }
}

pub fn heavy_tailed(alpha: f64) -> MatrixSampler {
    MatrixSampler::new(heavy_tailed_spec(alpha)).expect("valid reference law")
}

pub fn symmetric_hypothesis(alpha: f64) -> TailHypothesis {
    TailHypothesis {
        alpha,
        slowly_varying: SlowlyVaryingSpec::default(),
        c_plus: 0.5,
        c_minus: 0.5,
    }
}

/// Non-strictly-positive law satisfying the contraction condition through
/// the product of the two triangular atoms.
pub fn triangular_spec() -> SamplerSpec {
    mixture(vec![
        (0.6, m([[1.0, 0.0], [0.0, 2.0]])),
        (0.2, m([[1.0, 1.0], [0.0, 1.0]])),
        (0.2, m([[1.0, 0.0], [1.0, 1.0]])),
    ])
}

pub fn triangular() -> MatrixSampler {
    MatrixSampler::new(triangular_spec()).expect("valid reference law")
}

pub fn permutation_spec() -> SamplerSpec {
    mixture(vec![
        (0.5, m([[0.0, 1.0], [1.0, 0.0]])),
        (0.5, m([[1.0, 0.0], [0.0, 1.0]])),
    ])
}

/// `X = e^W` on `q = 1`.
pub fn scalar_spec(alpha: f64) -> SamplerSpec {
    SamplerSpec::LogScaled {
        base: Box::new(mixture(vec![(1.0, PositiveMatrix::identity(1))])),
        scalar: HeavyTailLaw::symmetric_pareto(alpha),
    }
}
