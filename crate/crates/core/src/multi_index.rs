//! Multi-indices and the graded-lexicographic monomial basis.

use std::collections::HashMap;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

/// Exponent vector `α ∈ ℕⁿ` of the monomial `x^α`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// `e_i`, the exponent of the coordinate monomial `x_i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    /// The multi-index of `x_i^k`.
    pub fn axis_power(n: usize, i: usize, k: u32) -> Self {
        let mut e = vec![0; n];
        e[i] = k;
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// Evaluates `x^α` at a point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl Add for &MultiIndex {
    type Output = MultiIndex;

    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), rhs.dim());
        MultiIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// `binomial(n + d, n)`, the number of monomials of degree at most `d` in `n` variables.
pub fn basis_size(n: usize, d: usize) -> usize {
    let mut acc: u128 = 1;
    for i in 1..=n as u128 {
        acc = acc * (d as u128 + i) / i;
    }
    acc as usize
}

/// Bijection between `ℕⁿ_d` and `0..s(d)` in graded lexicographic order.
///
/// Multi-indices are sorted by total degree; within a degree, larger
/// exponents of earlier coordinates come first, so for `n = 2, d = 1` the
/// order is `1, x₁, x₂`.
#[derive(Debug, Clone)]
pub struct BasisIndexer {
    n: usize,
    d: usize,
    order: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

impl PartialEq for BasisIndexer {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.d == other.d
    }
}

fn push_degree(n: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() == n - 1 {
        prefix.push(remaining);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    for e in (0..=remaining).rev() {
        prefix.push(e);
        push_degree(n, remaining - e, prefix, out);
        prefix.pop();
    }
}

/// Enumerates `ℕⁿ_d` in graded lexicographic order.
pub fn enumerate_basis(n: usize, d: usize) -> BasisIndexer {
    assert!(n >= 1, "dimension must be at least 1");
    let mut order = Vec::with_capacity(basis_size(n, d));
    let mut prefix = Vec::with_capacity(n);
    for k in 0..=d {
        push_degree(n, k as u32, &mut prefix, &mut order);
    }
    let lookup = order.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
    BasisIndexer { n, d, order, lookup }
}

impl BasisIndexer {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn get(&self, i: usize) -> &MultiIndex {
        &self.order[i]
    }

    pub fn index_of(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.order.iter()
    }

    /// Number of basis elements of degree at most `k` (a prefix of the ordering).
    pub fn prefix_len(&self, k: usize) -> usize {
        basis_size(self.n, k.min(self.d))
    }

    /// Monomial vector `v_d(x)` evaluated at `x`.
    pub fn monomials(&self, x: &[f64]) -> Vec<f64> {
        self.order.iter().map(|a| a.eval(x)).collect()
    }
}
