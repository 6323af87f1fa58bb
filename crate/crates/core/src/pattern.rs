//! Zero patterns and the decision procedure for the contraction condition.
//!
//! The condition holds for a finitely supported law iff some finite product of
//! the support patterns (any order, repetitions allowed) is all-ones. That is
//! a reachability question in the finite semigroup of boolean matrices
//! generated by the patterns, answered here by breadth-first closure.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension whose pattern fits the 128-bit representation.
pub const MAX_PATTERN_DIM: usize = 11;

/// Hard ceiling on explored states, on top of the `2^(q²)` bound.
pub const MAX_CLOSURE_STATES: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BooleanPattern {
    dim: usize,
    bits: u128,
}

impl BooleanPattern {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(
            (1..=MAX_PATTERN_DIM).contains(&dim),
            "pattern dimension {dim} outside 1..={MAX_PATTERN_DIM}"
        );
        let mut bits = 0u128;
        for i in 0..dim {
            for j in 0..dim {
                if f(i, j) {
                    bits |= 1u128 << (i * dim + j);
                }
            }
        }
        Self { dim, bits }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || dim > MAX_PATTERN_DIM {
            return Err(Error::InvalidArgument(format!(
                "pattern dimension {dim} outside 1..={MAX_PATTERN_DIM}"
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    pub fn all_ones(dim: usize) -> Self {
        Self::from_fn(dim, |_, _| true)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| i == j)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits >> (i * self.dim + j) & 1 == 1
    }

    fn row(&self, i: usize) -> u128 {
        let mask = (1u128 << self.dim) - 1;
        (self.bits >> (i * self.dim)) & mask
    }

    pub fn is_all_ones(&self) -> bool {
        self.bits.count_ones() as usize == self.dim * self.dim
    }

    pub fn is_allowable(&self) -> bool {
        let q = self.dim;
        let mut cols = 0u128;
        for i in 0..q {
            let r = self.row(i);
            if r == 0 {
                return false;
            }
            cols |= r;
        }
        cols == (1u128 << q) - 1
    }

    /// Boolean product: `(a b)_ij = OR_k a_ik AND b_kj`.
    pub fn product(&self, other: &BooleanPattern) -> BooleanPattern {
        debug_assert_eq!(self.dim, other.dim);
        let q = self.dim;
        let mut bits = 0u128;
        for i in 0..q {
            let a = self.row(i);
            let mut out = 0u128;
            for k in 0..q {
                if a >> k & 1 == 1 {
                    out |= other.row(k);
                }
            }
            bits |= out << (i * q);
        }
        BooleanPattern { dim: q, bits }
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

impl Serialize for BooleanPattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BooleanPattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<bool>>::deserialize(d)?;
        BooleanPattern::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionC {
    pub holds: bool,
    /// Length of a shortest strictly positive product.
    pub witness_length: Option<usize>,
    /// Generator indices of a shortest witness, leftmost factor first.
    pub witness: Option<Vec<usize>>,
    /// Number of distinct patterns in the explored closure.
    pub closure_size: usize,
}

/// Decides whether some finite product of `patterns` is all-ones.
pub fn check_condition_c(patterns: &[BooleanPattern]) -> Result<ConditionC> {
    let first = patterns
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty pattern list".into()))?;
    let q = first.dim();
    for (index, p) in patterns.iter().enumerate() {
        if p.dim() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: p.dim(),
            });
        }
        if !p.is_allowable() {
            return Err(Error::PatternNotAllowable { index });
        }
    }
    let limit = if q * q < 63 {
        (1usize << (q * q)).min(MAX_CLOSURE_STATES)
    } else {
        MAX_CLOSURE_STATES
    };

    // parent[state] = (previous state, generator appended on the right)
    let mut parent: HashMap<BooleanPattern, Option<(BooleanPattern, usize)>> = HashMap::new();
    let mut frontier = Vec::new();
    for (g, p) in patterns.iter().enumerate() {
        if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(*p) {
            e.insert(None);
            frontier.push((*p, g));
        }
    }
    let mut length = 1;
    loop {
        if let Some(hit) = frontier.iter().find(|(p, _)| p.is_all_ones()) {
            let witness = reconstruct(&parent, hit.0, patterns);
            return Ok(ConditionC {
                holds: true,
                witness_length: Some(length),
                witness: Some(witness),
                closure_size: parent.len(),
            });
        }
        let mut next = Vec::new();
        for (p, _) in &frontier {
            for (g, gen) in patterns.iter().enumerate() {
                let prod = p.product(gen);
                if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(prod) {
                    e.insert(Some((*p, g)));
                    next.push((prod, g));
                    if parent.len() > limit {
                        return Err(Error::StateLimit { limit });
                    }
                }
            }
        }
        if next.is_empty() {
            return Ok(ConditionC {
                holds: false,
                witness_length: None,
                witness: None,
                closure_size: parent.len(),
            });
        }
        frontier = next;
        length += 1;
    }
}

fn reconstruct(
    parent: &HashMap<BooleanPattern, Option<(BooleanPattern, usize)>>,
    mut state: BooleanPattern,
    patterns: &[BooleanPattern],
) -> Vec<usize> {
    let mut word = Vec::new();
    loop {
        match parent[&state] {
            Some((prev, g)) => {
                word.push(g);
                state = prev;
            }
            None => {
                let g = patterns.iter().position(|p| *p == state).expect("root is a generator");
                word.push(g);
                break;
            }
        }
    }
    word.reverse();
    word
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(rows: &[&[u8]]) -> BooleanPattern {
        let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect();
        BooleanPattern::from_rows(&rows).unwrap()
    }

    #[test]
    fn product_matches_definition() {
        let u = pat(&[&[1, 1], &[0, 1]]);
        let l = pat(&[&[1, 0], &[1, 1]]);
        assert!(u.product(&l).is_all_ones());
        let swap = pat(&[&[0, 1], &[1, 0]]);
        assert_eq!(swap.product(&swap), BooleanPattern::identity(2));
    }

    #[test]
    fn condition_examples() {
        let r = check_condition_c(&[BooleanPattern::all_ones(2)]).unwrap();
        assert!(r.holds);
        assert_eq!(r.witness_length, Some(1));

        let u = pat(&[&[1, 1], &[0, 1]]);
        let l = pat(&[&[1, 0], &[1, 1]]);
        let r = check_condition_c(&[u, l]).unwrap();
        assert!(r.holds);
        assert_eq!(r.witness_length, Some(2));
        let w = r.witness.unwrap();
        let prod = w[1..].iter().fold([u, l][w[0]], |acc, &g| acc.product(&[u, l][g]));
        assert!(prod.is_all_ones());

        let swap = pat(&[&[0, 1], &[1, 0]]);
        let r = check_condition_c(&[swap]).unwrap();
        assert!(!r.holds);
        assert_eq!(r.witness_length, None);
        assert_eq!(r.closure_size, 2);
    }

    #[test]
    fn rejects_non_allowable_patterns() {
        let bad = pat(&[&[1, 0], &[1, 0]]);
        assert_eq!(
            check_condition_c(&[BooleanPattern::all_ones(2), bad]),
            Err(Error::PatternNotAllowable { index: 1 })
        );
        assert!(check_condition_c(&[]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let u = pat(&[&[1, 1], &[0, 1]]);
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, "[[true,true],[false,true]]");
        assert_eq!(serde_json::from_str::<BooleanPattern>(&s).unwrap(), u);
    }
}
