//! LMI-block conic programs and the interior-point solver.
//!
//! Programs have the form
//!
//! ```text
//! max  c·x   s.t.  S_j := G_j − Σᵢ xᵢ A_ij ⪰ 0,   j = 1..m
//! ```
//!
//! with dual `min Σ_j ⟨G_j, Z_j⟩  s.t.  Σ_j ⟨A_ij, Z_j⟩ = cᵢ, Z_j ⪰ 0`.

mod ipm;
mod presolve;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_inner, max_asymmetry, min_eigenvalue};

pub use ipm::InteriorPoint;

/// One constraint `G − Σᵢ xᵢ Aᵢ ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub constant: DMatrix<f64>,
    pub coefficients: Vec<DMatrix<f64>>,
}

impl LmiBlock {
    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    /// `G − Σᵢ xᵢ Aᵢ`.
    pub fn slack(&self, x: &[f64]) -> DMatrix<f64> {
        let mut s = self.constant.clone();
        for (a, &xi) in self.coefficients.iter().zip(x) {
            if xi != 0.0 {
                s -= a * xi;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub objective: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
    /// Per-variable labels, e.g. the multi-index a moment variable stands for.
    pub labels: Vec<String>,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.num_vars();
        if self.labels.len() != m {
            return Err(Error::InvalidArgument(format!("{} labels for {m} variables", self.labels.len())));
        }
        for (j, b) in self.blocks.iter().enumerate() {
            let n = b.size();
            if b.constant.ncols() != n {
                return Err(Error::InvalidArgument(format!("block {j}: constant term is not square")));
            }
            if b.coefficients.len() != m {
                return Err(Error::InvalidArgument(format!(
                    "block {j}: {} coefficient matrices for {m} variables",
                    b.coefficients.len()
                )));
            }
            for a in std::iter::once(&b.constant).chain(&b.coefficients) {
                if a.nrows() != n || a.ncols() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: a.nrows() });
                }
                let asym = max_asymmetry(a);
                if asym > 1e-12 {
                    return Err(Error::NotSymmetric(asym));
                }
            }
        }
        Ok(())
    }

    /// Writes the program as self-describing JSON for cross-checking with
    /// external solvers. Matrices are flattened row-major lower triangles.
    pub fn to_json(&self) -> serde_json::Value {
        let blocks: Vec<ProgramDumpBlock> = self
            .blocks
            .iter()
            .map(|b| ProgramDumpBlock {
                size: b.size(),
                constant: lower_triangle(&b.constant),
                coefficients: b.coefficients.iter().map(lower_triangle).collect(),
            })
            .collect();
        serde_json::to_value(ProgramDump {
            form: "max c'x s.t. G_j - sum_i x_i A_ij psd".into(),
            layout: "row-major lower triangle".into(),
            num_vars: self.num_vars(),
            objective: self.objective.clone(),
            labels: self.labels.clone(),
            blocks,
        })
        .expect("plain data serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let dump: ProgramDump = serde_json::from_value(value.clone())?;
        let blocks = dump
            .blocks
            .iter()
            .map(|b| {
                Ok(LmiBlock {
                    constant: from_lower_triangle(b.size, &b.constant)?,
                    coefficients: b
                        .coefficients
                        .iter()
                        .map(|a| from_lower_triangle(b.size, a))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        let prog = ConicProgram { objective: dump.objective, blocks, labels: dump.labels };
        prog.validate()?;
        Ok(prog)
    }
}

#[derive(Serialize, Deserialize)]
struct ProgramDump {
    form: String,
    layout: String,
    num_vars: usize,
    objective: Vec<f64>,
    labels: Vec<String>,
    blocks: Vec<ProgramDumpBlock>,
}

#[derive(Serialize, Deserialize)]
struct ProgramDumpBlock {
    size: usize,
    constant: Vec<f64>,
    coefficients: Vec<Vec<f64>>,
}

fn lower_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn from_lower_triangle(n: usize, v: &[f64]) -> Result<DMatrix<f64>> {
    if v.len() != n * (n + 1) / 2 {
        return Err(Error::InvalidArgument(format!("expected {} lower-triangle entries, got {}", n * (n + 1) / 2, v.len())));
    }
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative primal and dual infeasibility tolerance.
    pub eps_feas: f64,
    /// Relative duality gap tolerance.
    pub eps_gap: f64,
    pub max_iters: usize,
    /// Fraction of the step to the cone boundary that is taken.
    pub step_fraction: f64,
    /// Initial iterate `S_j = Z_j = initial_scale · I`.
    pub initial_scale: f64,
    /// Ridge added to the scaled constraint matrix before its QR factorization,
    /// relative to its largest column norm.
    pub regularization: f64,
    /// Re-parametrize the variables so the stacked constraint columns are orthonormal.
    pub orthonormalize: bool,
    /// With a strictly feasible starting point, precondition every block by
    /// the congruence that maps its starting slack to the identity.
    pub presolve: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            eps_feas: 1e-7,
            eps_gap: 1e-6,
            max_iters: 200,
            step_fraction: 0.99,
            initial_scale: 1.0,
            regularization: 1e-14,
            orthonormalize: true,
            presolve: true,
        }
    }
}

/// Per-iteration trace, used for the interior and monotonicity checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub mu: f64,
    pub gap: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub min_slack_eig: f64,
    pub min_dual_eig: f64,
    pub primal_step: f64,
    pub dual_step: f64,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    /// Dual multipliers `Z_j`, one per block.
    pub duals: Vec<DMatrix<f64>>,
    pub status: SolveStatus,
    pub primal_res: f64,
    pub dual_res: f64,
    /// Relative duality gap `|dual − primal| / (1 + |primal| + |dual|)`.
    pub gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
}

/// Anything that can solve a [`ConicProgram`] with the [`ConicSolution`] contract.
///
/// The built-in [`InteriorPoint`] is the default; adapters to external conic
/// solvers implement this trait and are passed where a backend is accepted.
pub trait ConicBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, prog: &ConicProgram, settings: &SolverSettings) -> ConicSolution;

    /// Like [`solve`](Self::solve), starting from `x0`. Backends that cannot
    /// use a starting point ignore it. A strictly feasible `x0` lets the
    /// built-in solver keep every iterate primal feasible.
    fn solve_from(&self, prog: &ConicProgram, settings: &SolverSettings, x0: &[f64]) -> ConicSolution {
        let _ = x0;
        self.solve(prog, settings)
    }
}

/// Solves with the built-in primal–dual interior-point method.
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> ConicSolution {
    InteriorPoint.solve(prog, settings)
}

/// Residuals recomputed from `(x, Z)` alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    /// `max(0, −λ_min(S_j))` over blocks.
    pub primal_res: f64,
    /// `max_i |cᵢ − Σ_j ⟨A_ij, Z_j⟩|`.
    pub dual_res: f64,
    /// `max(0, −λ_min(Z_j))` over blocks.
    pub dual_cone_res: f64,
    /// `Σ_j ⟨S_j, Z_j⟩`.
    pub complementarity: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `dual_objective − primal_objective`.
    pub gap: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.primal_res
            .max(self.dual_res)
            .max(self.dual_cone_res)
            .max(self.complementarity.abs())
            .max(self.gap.abs())
    }
}

pub fn kkt_report(prog: &ConicProgram, x: &[f64], duals: &[DMatrix<f64>]) -> KktReport {
    let mut primal_res = 0.0f64;
    let mut dual_cone_res = 0.0f64;
    let mut complementarity = 0.0;
    let mut dual_objective = 0.0;
    for (b, z) in prog.blocks.iter().zip(duals) {
        let s = b.slack(x);
        primal_res = primal_res.max(-min_eigenvalue(&s));
        dual_cone_res = dual_cone_res.max(-min_eigenvalue(z));
        complementarity += frobenius_inner(&s, z);
        dual_objective += frobenius_inner(&b.constant, z);
    }
    let dual_res = (0..prog.num_vars())
        .map(|i| {
            let lhs: f64 = prog.blocks.iter().zip(duals).map(|(b, z)| frobenius_inner(&b.coefficients[i], z)).sum();
            (prog.objective[i] - lhs).abs()
        })
        .fold(0.0f64, f64::max);
    let primal_objective: f64 = prog.objective.iter().zip(x).map(|(c, v)| c * v).sum();
    KktReport {
        primal_res: primal_res.max(0.0),
        dual_res,
        dual_cone_res: dual_cone_res.max(0.0),
        complementarity,
        primal_objective,
        dual_objective,
        gap: dual_objective - primal_objective,
    }
}

impl ConicSolution {
    pub fn kkt_report(&self, prog: &ConicProgram) -> KktReport {
        kkt_report(prog, &self.x, &self.duals)
    }
}
