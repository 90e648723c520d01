//! Change to the basis of polynomials orthonormal with respect to `λ`.
//!
//! With `L` the inverse Cholesky factor of `M_d(λ)`, row `α` of `L` holds the
//! monomial coefficients of the orthonormal polynomial `ℒ_α`, and every moment
//! matrix block `B` becomes `L B Lᵀ`. Hankel-type moment matrices lose about
//! `log₁₀ cond` digits in plain double arithmetic, so the factorization and the
//! congruence products are carried out in double-double arithmetic.

use nalgebra::DMatrix;

use crate::dd::{self, DdMatrix};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, sorted_eigenvalues, symmetric_condition};
use crate::moments::{build_moment_matrix, MomentSequence};
use crate::multi_index::BasisIndexer;
use crate::solver::{ConicProgram, LmiBlock};

/// Default positive-definiteness threshold, relative to the largest eigenvalue.
pub const DEFAULT_EPS_PD: f64 = 1e-15;
pub const DEFAULT_EPS_ORTH: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    indexer: BasisIndexer,
    l: DMatrix<f64>,
    source: String,
}

impl OrthonormalBasis {
    pub fn degree(&self) -> usize {
        self.indexer.degree()
    }

    pub fn indexer(&self) -> &BasisIndexer {
        &self.indexer
    }

    /// Lower-triangular change of basis; row `α` = coefficients of `ℒ_α`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// The identity basis of size `s(d)`.
    pub fn identity(indexer: BasisIndexer) -> Self {
        let s = indexer.len();
        OrthonormalBasis { indexer, l: DMatrix::identity(s, s), source: "identity".into() }
    }

    /// `L B Lᵀ`, accumulated in double-double.
    pub fn congruence(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        dd::congruence(&self.l, &DdMatrix::from_f64(b)).to_f64()
    }

    /// `max |L M_d(λ) Lᵀ − I|`, evaluated in double-double.
    pub fn orthonormality_error(&self, lambda: &MomentSequence) -> Result<f64> {
        let m = build_moment_matrix(lambda, self.degree())?;
        let t = self.congruence(m.entries());
        let s = t.nrows();
        Ok((0..s)
            .flat_map(|i| (0..s).map(move |j| (i, j)))
            .map(|(i, j)| (t[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max))
    }
}

/// Inverse Cholesky factor of `M_d(λ)`, computed in double-double.
pub fn orthonormal_basis(lambda: &MomentSequence, d: usize, eps_pd: f64) -> Result<OrthonormalBasis> {
    let m = build_moment_matrix(lambda, d)?;
    let ev = sorted_eigenvalues(m.entries());
    let (lo, hi) = (ev[0], *ev.last().expect("non-empty"));
    if !(lo > eps_pd * hi.max(1.0)) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
    }
    let l = dd::inverse_cholesky(&DdMatrix::from_f64(m.entries()))
        .ok_or(Error::NotPositiveDefinite { min_eigenvalue: lo })?;
    Ok(OrthonormalBasis { indexer: m.indexer().clone(), l, source: lambda.label().to_string() })
}

/// Applies the congruence `B ↦ L B Lᵀ` to every matrix of every block.
///
/// The decision vector is unchanged, so the feasible set and the optimum are too.
pub fn transform_program(prog: &ConicProgram, basis: &OrthonormalBasis) -> Result<ConicProgram> {
    let s = basis.matrix().nrows();
    let mut blocks = Vec::with_capacity(prog.blocks.len());
    for b in &prog.blocks {
        if b.size() != s {
            return Err(Error::DimensionMismatch { expected: s, found: b.size() });
        }
        blocks.push(LmiBlock {
            constant: basis.congruence(&b.constant),
            coefficients: b.coefficients.iter().map(|a| basis.congruence(a)).collect(),
        });
    }
    Ok(ConicProgram { objective: prog.objective.clone(), blocks, labels: prog.labels.clone() })
}

/// 2-norm condition numbers of each block's constant term.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

pub fn condition_report(prog: &ConicProgram, transformed: &ConicProgram) -> ConditionReport {
    let cond = |p: &ConicProgram| p.blocks.iter().map(|b| symmetric_condition(&b.constant)).collect();
    ConditionReport { before: cond(prog), after: cond(transformed) }
}

/// Smallest eigenvalue of `M_d(λ)`; convenient for error messages.
pub fn moment_matrix_min_eigenvalue(lambda: &MomentSequence, d: usize) -> Result<f64> {
    Ok(min_eigenvalue(build_moment_matrix(lambda, d)?.entries()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{exact_moments, MeasureSpec};

    #[test]
    fn hilbert_matrix_orthonormalizes_at_degree_nine() {
        let lam = exact_moments(&MeasureSpec::UniformInterval { a: 0.0, b: 1.0 }, 18).unwrap();
        let basis = orthonormal_basis(&lam, 9, DEFAULT_EPS_PD).unwrap();
        let err = basis.orthonormality_error(&lam).unwrap();
        assert!(err < DEFAULT_EPS_ORTH, "{err:e}");
        let l = basis.matrix();
        for i in 0..l.nrows() {
            assert!(l[(i, i)] > 0.0);
            for j in i + 1..l.ncols() {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn identity_moment_matrix_gives_identity() {
        // moments of (δ₋₁ + δ₁)/2 have M₁ = I
        let z = MomentSequence::atomic(&[vec![-1.0], vec![1.0]], &[0.5, 0.5], 2);
        let b = orthonormal_basis(&z, 1, DEFAULT_EPS_PD).unwrap();
        assert_eq!(b.matrix(), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn dirac_is_rejected() {
        let z = exact_moments(&MeasureSpec::Dirac { point: vec![0.4] }, 2).unwrap();
        assert!(matches!(orthonormal_basis(&z, 1, DEFAULT_EPS_PD), Err(Error::NotPositiveDefinite { .. })));
    }
}
