//! Truncated moment sequences, moment matrices and the Riesz functional.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::multi_index::{enumerate_basis, BasisIndexer, MultiIndex};

/// Dense truncated moment sequence `(z_α)` for `|α| ≤ D`.
///
/// Values are stored in the graded-lex order of the degree-`D` basis.
#[derive(Debug, Clone)]
pub struct MomentSequence {
    indexer: BasisIndexer,
    values: Vec<f64>,
    label: String,
}

impl PartialEq for MomentSequence {
    fn eq(&self, other: &Self) -> bool {
        self.indexer == other.indexer && self.values == other.values
    }
}

impl MomentSequence {
    pub fn new(n: usize, max_degree: usize, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        let indexer = enumerate_basis(n, max_degree);
        if values.len() != indexer.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} moments for n={n}, D={max_degree}, got {}",
                indexer.len(),
                values.len()
            )));
        }
        Ok(MomentSequence { indexer, values, label: label.into() })
    }

    /// Builds a sequence by evaluating `f` on every multi-index of degree at most `max_degree`.
    pub fn from_fn(
        n: usize,
        max_degree: usize,
        label: impl Into<String>,
        mut f: impl FnMut(&MultiIndex) -> f64,
    ) -> Self {
        let indexer = enumerate_basis(n, max_degree);
        let values = indexer.iter().map(&mut f).collect();
        MomentSequence { indexer, values, label: label.into() }
    }

    pub fn zeros(n: usize, max_degree: usize) -> Self {
        Self::from_fn(n, max_degree, "zero", |_| 0.0)
    }

    /// Moments of the atomic measure `Σ wᵢ δ_{xᵢ}`.
    pub fn atomic(points: &[Vec<f64>], weights: &[f64], max_degree: usize) -> Self {
        let n = points.first().map_or(1, Vec::len);
        Self::from_fn(n, max_degree, "atomic", |a| {
            points.iter().zip(weights).map(|(x, w)| w * a.eval(x)).sum()
        })
    }

    pub fn dim(&self) -> usize {
        self.indexer.dim()
    }

    pub fn max_degree(&self) -> usize {
        self.indexer.degree()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn indexer(&self) -> &BasisIndexer {
        &self.indexer
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total mass `z₀`.
    pub fn mass(&self) -> f64 {
        self.values[0]
    }

    pub fn get(&self, alpha: &MultiIndex) -> Option<f64> {
        self.indexer.index_of(alpha).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.indexer.iter().zip(self.values.iter().copied())
    }

    /// Restriction to moments of degree at most `degree`.
    pub fn truncate(&self, degree: usize) -> Result<Self> {
        if degree > self.max_degree() {
            return Err(Error::DegreeTooLow { required: degree, available: self.max_degree() });
        }
        let len = self.indexer.prefix_len(degree);
        MomentSequence::new(self.dim(), degree, self.values[..len].to_vec(), self.label.clone())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        MomentSequence {
            indexer: self.indexer.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            label: self.label.clone(),
        }
    }

    /// `z / z₀`; a zero-mass sequence is returned unchanged.
    pub fn normalized(&self) -> Self {
        let m = self.mass();
        if m == 0.0 {
            self.clone()
        } else {
            self.scaled(1.0 / m)
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &MomentSequence, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(MomentSequence {
            indexer: self.indexer.clone(),
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
            label: self.label.clone(),
        })
    }

    pub(crate) fn check_compatible(&self, other: &MomentSequence) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        if self.max_degree() != other.max_degree() {
            return Err(Error::DegreeTooLow {
                required: self.max_degree(),
                available: other.max_degree(),
            });
        }
        Ok(())
    }

    pub(crate) fn require_degree(&self, degree: usize) -> Result<()> {
        if self.max_degree() < degree {
            Err(Error::DegreeTooLow { required: degree, available: self.max_degree() })
        } else {
            Ok(())
        }
    }
}

/// Symmetric moment matrix `M_d(z)` with entry `(α, β) = z_{α+β}`.
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    indexer: BasisIndexer,
    entries: DMatrix<f64>,
}

impl MomentMatrix {
    pub fn degree(&self) -> usize {
        self.indexer.degree()
    }

    pub fn indexer(&self) -> &BasisIndexer {
        &self.indexer
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        crate::linalg::sorted_eigenvalues(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }
}

/// Builds `M_d(z)`; needs moments up to degree `2d`.
pub fn build_moment_matrix(z: &MomentSequence, d: usize) -> Result<MomentMatrix> {
    z.require_degree(2 * d)?;
    let indexer = enumerate_basis(z.dim(), d);
    let s = indexer.len();
    let mut entries = DMatrix::zeros(s, s);
    for i in 0..s {
        for j in i..s {
            let sum = indexer.get(i) + indexer.get(j);
            let k = z.indexer().index_of(&sum).expect("degree checked above");
            entries[(i, j)] = z.values()[k];
            entries[(j, i)] = z.values()[k];
        }
    }
    Ok(MomentMatrix { indexer, entries })
}

/// The 0/1 matrices `B_α`, `|α| ≤ 2d`, with `v_d(x)v_d(x)ᵀ = Σ_α B_α x^α`.
///
/// Stored sparsely: for each `α` (in graded-lex order of degree `2d`) the
/// list of positions `(β, β′)` of the degree-`d` basis with `β + β′ = α`.
#[derive(Debug, Clone)]
pub struct BasisExpansion {
    row_basis: BasisIndexer,
    moment_basis: BasisIndexer,
    support: Vec<Vec<(usize, usize)>>,
}

pub fn basis_expansion_matrices(n: usize, d: usize) -> BasisExpansion {
    let row_basis = enumerate_basis(n, d);
    let moment_basis = enumerate_basis(n, 2 * d);
    let mut support = vec![Vec::new(); moment_basis.len()];
    for i in 0..row_basis.len() {
        for j in 0..row_basis.len() {
            let k = moment_basis
                .index_of(&(row_basis.get(i) + row_basis.get(j)))
                .expect("sum of degree-d indices has degree ≤ 2d");
            support[k].push((i, j));
        }
    }
    BasisExpansion { row_basis, moment_basis, support }
}

impl BasisExpansion {
    pub fn row_basis(&self) -> &BasisIndexer {
        &self.row_basis
    }

    pub fn moment_basis(&self) -> &BasisIndexer {
        &self.moment_basis
    }

    /// Number of matrices, `s(2d)`.
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Matrix size, `s(d)`.
    pub fn size(&self) -> usize {
        self.row_basis.len()
    }

    pub fn support(&self, k: usize) -> &[(usize, usize)] {
        &self.support[k]
    }

    pub fn dense(&self, k: usize) -> DMatrix<f64> {
        let s = self.size();
        let mut m = DMatrix::zeros(s, s);
        for &(i, j) in &self.support[k] {
            m[(i, j)] = 1.0;
        }
        m
    }

    /// `Σ_α z_α B_α`.
    pub fn assemble(&self, z: &[f64]) -> DMatrix<f64> {
        let s = self.size();
        let mut m = DMatrix::zeros(s, s);
        for (k, pos) in self.support.iter().enumerate() {
            for &(i, j) in pos {
                m[(i, j)] += z[k];
            }
        }
        m
    }

    /// `(⟨B_α, G⟩)_α`: the coefficients of the polynomial with Gram matrix `G`.
    pub fn contract(&self, gram: &DMatrix<f64>) -> Vec<f64> {
        self.support
            .iter()
            .map(|pos| pos.iter().map(|&(i, j)| gram[(i, j)]).sum())
            .collect()
    }
}

/// Polynomial in the monomial basis, as a sparse coefficient map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::monomial(MultiIndex::zero(n), c)
    }

    pub fn monomial(alpha: MultiIndex, c: f64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(alpha, c);
        Polynomial { terms }
    }

    /// Polynomial from a dense coefficient vector in a basis ordering.
    pub fn from_coefficients(basis: &BasisIndexer, coeffs: &[f64]) -> Self {
        let terms = basis
            .iter()
            .zip(coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(a, &c)| (a.clone(), c))
            .collect();
        Polynomial { terms }
    }

    pub fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        *self.terms.entry(alpha).or_insert(0.0) += c;
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(a, &c)| (a, c))
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(MultiIndex::total_degree).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (a, c) in other.terms() {
            out.add_term(a.clone(), c);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::new();
        for (a, c) in self.terms() {
            for (b, e) in other.terms() {
                out.add_term(a + b, c * e);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms().map(|(a, c)| c * a.eval(x)).sum()
    }
}

/// Riesz functional `L_z(f) = Σ_α f_α z_α`.
pub fn riesz(z: &MomentSequence, poly: &Polynomial) -> Result<f64> {
    z.require_degree(poly.degree())?;
    let mut acc = 0.0;
    for (a, c) in poly.terms() {
        if a.dim() != z.dim() {
            return Err(Error::DimensionMismatch { expected: z.dim(), found: a.dim() });
        }
        acc += c * z.get(a).expect("degree checked");
    }
    Ok(acc)
}

/// Partial sums `Σ_{k=1}^{K} L_z(x_i^{2k})^{-1/(2k)}` for each coordinate `i`.
///
/// A non-positive even moment contributes `+∞`.
pub fn carleman_diagnostic(z: &MomentSequence, terms: usize) -> Result<Vec<Vec<f64>>> {
    z.require_degree(2 * terms)?;
    let n = z.dim();
    Ok((0..n)
        .map(|i| {
            let mut acc = 0.0;
            (1..=terms)
                .map(|k| {
                    let m = z.get(&MultiIndex::axis_power(n, i, 2 * k as u32)).expect("degree checked");
                    acc += if m > 0.0 { m.powf(-1.0 / (2 * k) as f64) } else { f64::INFINITY };
                    acc
                })
                .collect()
        })
        .collect())
}

/// Outcome of checking `M_d(ν) ⪯ γ M_d(λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityBound {
    pub holds: bool,
    pub min_eig: f64,
}

/// Checks `γ M_d(λ) − M_d(ν) ⪰ −ε_psd`.
pub fn density_bound_check(
    nu: &MomentSequence,
    lambda: &MomentSequence,
    gamma: f64,
    d: usize,
    eps_psd: f64,
) -> Result<DensityBound> {
    if nu.dim() != lambda.dim() {
        return Err(Error::DimensionMismatch { expected: nu.dim(), found: lambda.dim() });
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let mn = build_moment_matrix(nu, d)?;
    let ml = build_moment_matrix(lambda, d)?;
    let diff = ml.entries() * gamma - mn.entries();
    let min_eig = crate::linalg::min_eigenvalue(&diff);
    Ok(DensityBound { holds: min_eig >= -eps_psd, min_eig })
}

/// `⟨f, M f⟩` for a coefficient vector.
pub fn quadratic_form(m: &DMatrix<f64>, f: &[f64]) -> f64 {
    let v = DVector::from_column_slice(f);
    v.dot(&(m * &v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform01(d: usize) -> MomentSequence {
        MomentSequence::from_fn(1, d, "uniform", |a| 1.0 / (a.total_degree() as f64 + 1.0))
    }

    #[test]
    fn dirac_moment_matrix() {
        let z = MomentSequence::from_fn(1, 2, "dirac", |a| 0.4f64.powi(a.total_degree() as i32));
        let m = build_moment_matrix(&z, 1).unwrap();
        assert_eq!(m.entries()[(0, 0)], 1.0);
        assert_eq!(m.entries()[(0, 1)], 0.4);
        assert_eq!(m.entries()[(1, 0)], 0.4);
        assert!((m.entries()[(1, 1)] - 0.16).abs() < 1e-15);
    }

    #[test]
    fn dirac_at_origin() {
        let z = MomentSequence::new(1, 2, vec![1.0, 0.0, 0.0], "").unwrap();
        let m = build_moment_matrix(&z, 1).unwrap();
        assert_eq!(m.entries(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn degree_too_low() {
        let z = uniform01(3);
        assert!(matches!(build_moment_matrix(&z, 2), Err(Error::DegreeTooLow { required: 4, available: 3 })));
        let p = Polynomial::monomial(MultiIndex::new(vec![4]), 1.0);
        assert!(riesz(&z, &p).is_err());
        assert!(carleman_diagnostic(&z, 2).is_err());
    }

    #[test]
    fn expansion_univariate_degree_one() {
        let b = basis_expansion_matrices(1, 1);
        assert_eq!(b.len(), 3);
        assert_eq!(b.dense(0), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(b.dense(1), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(b.dense(2), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn expansion_matches_moment_matrix() {
        let z = uniform01(6);
        let b = basis_expansion_matrices(1, 3);
        assert_eq!(b.assemble(z.values()), *build_moment_matrix(&z, 3).unwrap().entries());
    }

    #[test]
    fn expansion_entries_are_indicator_of_sums() {
        let b = basis_expansion_matrices(2, 2);
        for k in 0..b.len() {
            let m = b.dense(k);
            let alpha = b.moment_basis().get(k);
            for i in 0..b.size() {
                for j in 0..b.size() {
                    let hit = &(b.row_basis().get(i) + b.row_basis().get(j)) == alpha;
                    assert_eq!(m[(i, j)], if hit { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn riesz_examples() {
        let u = uniform01(2);
        let x = Polynomial::monomial(MultiIndex::new(vec![1]), 1.0);
        assert_eq!(riesz(&u, &x).unwrap(), 0.5);

        let d = MomentSequence::atomic(&[vec![1.0, 2.0]], &[1.0], 2);
        let xy = Polynomial::monomial(MultiIndex::new(vec![1, 1]), 1.0);
        assert_eq!(riesz(&d, &xy).unwrap(), 2.0);
    }

    #[test]
    fn carleman_uniform() {
        let u = uniform01(6);
        let sums = carleman_diagnostic(&u, 3).unwrap();
        let t1 = 3f64.sqrt();
        let t2 = t1 + 5f64.powf(0.25);
        let t3 = t2 + 7f64.powf(1.0 / 6.0);
        assert!((sums[0][0] - t1).abs() < 1e-12);
        assert!((sums[0][1] - t2).abs() < 1e-12);
        assert!((sums[0][2] - t3).abs() < 1e-12);
    }

    #[test]
    fn carleman_dirac_at_zero_is_infinite() {
        let z = MomentSequence::atomic(&[vec![0.0]], &[1.0], 8);
        let sums = carleman_diagnostic(&z, 4).unwrap();
        assert!(sums[0].iter().all(|s| s.is_infinite()));
    }

    #[test]
    fn density_bound_identical_measures() {
        let u = uniform01(6);
        let r = density_bound_check(&u, &u, 1.0, 3, 1e-8).unwrap();
        assert!(r.holds);
        assert_eq!(r.min_eig, 0.0);
    }

    #[test]
    fn density_bound_half_uniform() {
        let u = uniform01(8);
        let half = u.scaled(0.5);
        let r = density_bound_check(&half, &u, 0.5, 4, 1e-8).unwrap();
        assert!(r.holds);
        assert!(r.min_eig.abs() < 1e-12);
    }

    #[test]
    fn density_bound_dimension_mismatch() {
        let u = uniform01(6);
        let v = MomentSequence::zeros(2, 6);
        assert!(matches!(density_bound_check(&u, &v, 1.0, 3, 1e-8), Err(Error::DimensionMismatch { .. })));
    }
}
