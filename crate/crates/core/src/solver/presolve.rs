//! Congruence preconditioning around a strictly feasible point.
//!
//! Given `x₀` with every slack `S_j(x₀) ≻ 0`, each block is transformed by
//! `T_j = chol(S_j(x₀))⁻¹`, so the slacks at `x₀` become identities, and the
//! variables are changed to coordinates in which the stacked transformed
//! coefficient matrices are orthonormal. For moment-matrix blocks this is the
//! orthonormal-polynomial basis of the measure the block currently
//! represents, which keeps every block well scaled along the central path.
//!
//! All transformations are carried out in double-double; the rounded result
//! is an exactly equivalent program up to `f64` rounding of `O(1)` data.

use nalgebra::DMatrix;

use super::{ConicProgram, LmiBlock};
use crate::dd::{self, Dd, DdMatrix};

pub(crate) struct Preconditioned {
    pub program: ConicProgram,
    /// Upper-triangular `R` (row-major), reduced variables `x̂ = R x`.
    r: Vec<Dd>,
    /// Orthonormal stacked `svec`s of the transformed coefficient matrices.
    q: Vec<Vec<Dd>>,
    /// Reduced objective `R⁻ᵀ c`, unrounded.
    objective: Vec<Dd>,
    congruences: Vec<DMatrix<f64>>,
}

impl Preconditioned {
    pub fn to_original(&self, reduced: &[f64]) -> Vec<f64> {
        dd::upper_solve(&self.r, reduced)
    }

    pub fn to_reduced(&self, original: &[f64]) -> Vec<f64> {
        dd::upper_mul(&self.r, original)
    }

    /// `Z_j = T_jᵀ Z̃_j T_j`, after projecting the reduced duals onto their
    /// equality constraints.
    ///
    /// The map back multiplies residuals of the reduced dual equations by
    /// `Rᵀ`, which is large, so the solver's stopping accuracy alone would
    /// leave visible residuals in the original equations. The reduced
    /// constraint columns are orthonormal, so the least-norm projection is a
    /// single pass, done together with the map back in double-double.
    pub fn duals_to_original(&self, duals: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        let mut z: Vec<Dd> = duals.iter().flat_map(|zj| dd::svec(&DdMatrix::from_f64(zj))).collect();
        for (qk, ck) in self.q.iter().zip(&self.objective) {
            let excess = dd::dot(qk, &z) - *ck;
            for (zt, qt) in z.iter_mut().zip(qk) {
                *zt -= excess * *qt;
            }
        }
        let mut offset = 0;
        duals
            .iter()
            .zip(&self.congruences)
            .map(|(zj, t)| {
                let s = zj.nrows();
                let len = dd::svec_len(s);
                let block = dd::unsvec_dd(&z[offset..offset + len], s);
                offset += len;
                dd::congruence(&t.transpose(), &block).to_f64()
            })
            .collect()
    }
}

/// `None` when `x₀` is not strictly feasible or the transformed constraint
/// matrices are numerically dependent.
pub(crate) fn precondition(prog: &ConicProgram, x0: &[f64]) -> Option<Preconditioned> {
    let m = prog.num_vars();
    if x0.len() != m || m == 0 {
        return None;
    }
    let congruences: Vec<DMatrix<f64>> = prog
        .blocks
        .iter()
        .map(|b| dd::inverse_cholesky(&dd::affine_combination(&b.constant, &b.coefficients, x0)))
        .collect::<Option<_>>()?;

    let cols: Vec<Vec<Dd>> = (0..m)
        .map(|i| {
            prog.blocks
                .iter()
                .zip(&congruences)
                .flat_map(|(b, t)| dd::svec(&dd::congruence(t, &DdMatrix::from_f64(&b.coefficients[i]))))
                .collect()
        })
        .collect();
    let (q, r) = dd::gram_schmidt(cols, 1e-13).ok()?;

    let mut offset = 0;
    let blocks = prog
        .blocks
        .iter()
        .zip(&congruences)
        .map(|(b, t)| {
            let s = b.size();
            let len = dd::svec_len(s);
            let coefficients = q.iter().map(|qk| dd::unsvec(&qk[offset..offset + len], s)).collect();
            offset += len;
            LmiBlock { constant: dd::congruence(t, &DdMatrix::from_f64(&b.constant)).to_f64(), coefficients }
        })
        .collect();
    let objective = dd::upper_transpose_solve_dd(&r, &prog.objective);
    let program = ConicProgram {
        objective: objective.iter().map(|&c| c.into()).collect(),
        blocks,
        labels: (0..m).map(|k| format!("q{k}")).collect(),
    };
    Some(Preconditioned { program, r, q, objective, congruences })
}
