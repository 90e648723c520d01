//! Infeasible-start primal–dual path following with Nesterov–Todd scaling
//! and Mehrotra predictor–corrector steps.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::presolve::precondition;
use super::{ConicBackend, ConicProgram, ConicSolution, IterationRecord, SolveStatus, SolverSettings};
use crate::linalg::frobenius_inner;

/// The built-in dense interior-point backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl ConicBackend for InteriorPoint {
    fn name(&self) -> &str {
        "interior-point"
    }

    fn solve(&self, prog: &ConicProgram, settings: &SolverSettings) -> ConicSolution {
        Workspace::new(prog, settings.orthonormalize).run(settings, None)
    }

    fn solve_from(&self, prog: &ConicProgram, settings: &SolverSettings, x0: &[f64]) -> ConicSolution {
        if settings.presolve {
            if let Some(pre) = precondition(prog, x0) {
                let start = pre.to_reduced(x0);
                let mut sol = Workspace::new(&pre.program, settings.orthonormalize).run(settings, Some(&start));
                sol.x = pre.to_original(&sol.x);
                sol.duals = pre.duals_to_original(&sol.duals);
                return sol;
            }
        }
        Workspace::new(prog, settings.orthonormalize).run(settings, Some(x0))
    }
}

struct Block {
    n: usize,
    g: DMatrix<f64>,
    /// Column i is vec(A_i) (column-major), scaled by the variable scaling.
    a: DMatrix<f64>,
}

impl Block {
    /// `Σᵢ xᵢ Aᵢ`.
    fn apply(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let v = &self.a * x;
        DMatrix::from_column_slice(self.n, self.n, v.as_slice())
    }

    /// `(⟨Aᵢ, M⟩)ᵢ`.
    fn adjoint(&self, m: &DMatrix<f64>) -> DVector<f64> {
        self.a.tr_mul(&DVector::from_column_slice(m.as_slice()))
    }
}

/// NT scaling of one block: `G` with `Gᵀ S G = G⁻¹ Z G⁻ᵀ = D` diagonal, so
/// `W = G Gᵀ` satisfies `W Z W = S`.
struct Scaling {
    g: DMatrix<f64>,
    d: Vec<f64>,
}

fn nt_scaling(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let ls = Cholesky::new(s.clone())?.l();
    let lz = Cholesky::new(z.clone())?.l();
    let svd = (ls.transpose() * &lz).svd(true, true);
    let v = svd.v_t.as_ref()?.transpose();
    let d: Vec<f64> = svd.singular_values.iter().copied().collect();
    if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return None;
    }
    let n = s.nrows();
    let dm_half_inv = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / d[i].sqrt() } else { 0.0 });
    let g = &lz * &v * dm_half_inv;
    Some(Scaling { g, d })
}

/// `Some(ms)` if every matrix admits a Cholesky factorization.
fn positive_definite(ms: Vec<DMatrix<f64>>) -> Option<Vec<DMatrix<f64>>> {
    ms.iter().all(|m| Cholesky::new(m.clone()).is_some()).then_some(ms)
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        0.0
    } else {
        SymmetricEigen::new(m.clone()).eigenvalues.min()
    }
}

struct Workspace {
    blocks: Vec<Block>,
    c: DVector<f64>,
    /// Variable scaling: original `xᵢ = colscale[i] · (R⁻¹ x̂)ᵢ`.
    colscale: Vec<f64>,
    /// Triangular factor of the column orthonormalization, if applied.
    r: Option<DMatrix<f64>>,
    g_norm: f64,
    c_norm: f64,
    /// Cholesky factor of `Σ_j ⟨A_ij, A_kj⟩`.
    gram: Cholesky<f64, nalgebra::Dyn>,
}

impl Workspace {
    fn new(prog: &ConicProgram, orthonormalize: bool) -> Self {
        let m = prog.num_vars();
        let mut colscale = vec![1.0; m];
        for (i, cs) in colscale.iter_mut().enumerate() {
            let norm2: f64 = prog.blocks.iter().map(|b| b.coefficients[i].norm_squared()).sum();
            if norm2 > 0.0 {
                *cs = 1.0 / norm2.sqrt();
            }
        }
        let blocks = prog
            .blocks
            .iter()
            .map(|b| {
                let n = b.size();
                let mut a = DMatrix::zeros(n * n, m);
                for (i, ai) in b.coefficients.iter().enumerate() {
                    let col = ai * colscale[i];
                    a.column_mut(i).copy_from_slice(col.as_slice());
                }
                Block { n, g: b.constant.clone(), a }
            })
            .collect::<Vec<_>>();
        let mut blocks = blocks;
        let mut c = DVector::from_iterator(m, prog.objective.iter().zip(&colscale).map(|(c, s)| c * s));
        let r = if orthonormalize { orthonormalize_columns(&mut blocks, &mut c) } else { None };
        let g_norm = blocks.iter().map(|b| b.g.norm()).fold(0.0, f64::max);
        let c_norm = c.norm();
        let m = c.len();
        let mut gram = DMatrix::zeros(m, m);
        for b in &blocks {
            gram += b.a.tr_mul(&b.a);
        }
        let shift = 1e-14 * gram.diagonal().max().max(1e-300);
        let gram = Cholesky::new(gram.clone())
            .or_else(|| Cholesky::new(gram + DMatrix::identity(m, m) * shift))
            .unwrap_or_else(|| Cholesky::new(DMatrix::identity(m, m)).expect("identity is positive definite"));
        Workspace { blocks, c, colscale, r, g_norm, c_norm, gram }
    }

    fn original_x(&self, x: &DVector<f64>) -> Vec<f64> {
        let x = match &self.r {
            Some(r) => r.solve_upper_triangular(x).unwrap_or_else(|| x.clone()),
            None => x.clone(),
        };
        x.iter().zip(&self.colscale).map(|(v, s)| v * s).collect()
    }

    /// Internal coordinates of an original-space point.
    fn internal_x(&self, x: &[f64]) -> Option<DVector<f64>> {
        if x.len() != self.c.len() {
            return None;
        }
        let v = DVector::from_iterator(x.len(), x.iter().zip(&self.colscale).map(|(v, s)| v / s));
        Some(match &self.r {
            Some(r) => r * v,
            None => v,
        })
    }

    /// Slacks `G − Σ xᵢ Aᵢ` if all of them are positive definite.
    fn interior_slacks(&self, x: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        self.blocks
            .iter()
            .map(|b| {
                let s = sym(&b.g - b.apply(x));
                Cholesky::new(s.clone()).map(|_| s)
            })
            .collect()
    }

    fn run(&self, settings: &SolverSettings, x0: Option<&[f64]>) -> ConicSolution {
        let m = self.c.len();
        let total_dim: usize = self.blocks.iter().map(|b| b.n).sum::<usize>().max(1);
        let identity =
            || self.blocks.iter().map(|b| DMatrix::identity(b.n, b.n) * settings.initial_scale).collect::<Vec<_>>();
        let warm = x0.and_then(|x0| self.internal_x(x0)).and_then(|x| self.interior_slacks(&x).map(|s| (x, s)));
        // A strictly feasible start keeps the slacks tied to x exactly.
        let feasible = warm.is_some();
        let (mut x, mut s) = warm.unwrap_or_else(|| (DVector::zeros(m), identity()));
        let mut z = self.feasible_dual_start(settings.initial_scale).unwrap_or_else(identity);
        let mut history = Vec::new();
        let mut iterations = 0;

        let mut status = loop {
            let res = self.residuals(&x, &s, &z, total_dim);
            let converged =
                res.primal <= settings.eps_feas && res.dual <= settings.eps_feas && res.gap <= settings.eps_gap;
            if converged {
                break SolveStatus::Optimal;
            }
            if iterations >= settings.max_iters {
                break SolveStatus::MaxIters;
            }

            let Some(step) = self.step(settings, &s, &z, &res) else {
                break SolveStatus::NumericalFailure;
            };
            iterations += 1;
            // The step lengths come from the scaled space; backtrack if the
            // rounded update in the original space leaves the cone.
            let mut alpha_p = step.alpha_p;
            let mut moved = None;
            while alpha_p > 1e-14 {
                let trial = &x + &step.dx * alpha_p;
                let slacks = if feasible {
                    self.interior_slacks(&trial)
                } else {
                    positive_definite(s.iter().zip(&step.ds).map(|(sj, dsj)| sym(sj + dsj * alpha_p)).collect())
                };
                if let Some(st) = slacks {
                    moved = Some((trial, st));
                    break;
                }
                alpha_p *= 0.5;
            }
            match moved {
                Some((nx, ns)) => {
                    x = nx;
                    s = ns;
                }
                None => alpha_p = 0.0,
            }
            let mut alpha_d = step.alpha_d;
            loop {
                if alpha_d <= 1e-14 {
                    alpha_d = 0.0;
                    break;
                }
                let trial = positive_definite(z.iter().zip(&step.dz).map(|(zj, dzj)| sym(zj + dzj * alpha_d)).collect());
                if let Some(nz) = trial {
                    z = nz;
                    break;
                }
                alpha_d *= 0.5;
            }
            let after = self.residuals(&x, &s, &z, total_dim);
            history.push(IterationRecord {
                mu: after.mu,
                gap: after.gap,
                primal_res: after.primal,
                dual_res: after.dual,
                min_slack_eig: s.iter().map(min_eig).fold(f64::INFINITY, f64::min),
                min_dual_eig: z.iter().map(min_eig).fold(f64::INFINITY, f64::min),
                primal_step: alpha_p,
                dual_step: alpha_d,
            });
            if alpha_p < 1e-12 && alpha_d < 1e-12 {
                break SolveStatus::NumericalFailure;
            }
        };

        let res = self.residuals(&x, &s, &z, total_dim);
        if status != SolveStatus::Optimal
            && res.primal <= settings.eps_feas
            && res.dual <= settings.eps_feas
            && res.gap <= settings.eps_gap
        {
            status = SolveStatus::Optimal;
        }
        let x_orig = self.original_x(&x);
        ConicSolution {
            x: x_orig,
            duals: z,
            status,
            primal_res: res.primal,
            dual_res: res.dual,
            gap: res.gap,
            primal_objective: res.pobj,
            dual_objective: res.dobj,
            iterations,
            history,
        }
    }

    /// `t·I` projected onto the dual equality constraints, for the smallest
    /// `t = scale·10ᵏ` at which the projection stays positive definite.
    fn feasible_dual_start(&self, scale: f64) -> Option<Vec<DMatrix<f64>>> {
        let project = |t: f64| {
            let z: Vec<DMatrix<f64>> = self.blocks.iter().map(|b| DMatrix::identity(b.n, b.n) * t).collect();
            let mut err = self.c.clone();
            for (b, zj) in self.blocks.iter().zip(&z) {
                err -= b.adjoint(zj);
            }
            let w = self.gram.solve(&err);
            positive_definite(self.blocks.iter().zip(z).map(|(b, zj)| sym(zj + b.apply(&w))).collect())
        };
        (0..8).find_map(|k| project(scale * 10f64.powi(k)))
    }

    fn residuals(&self, x: &DVector<f64>, s: &[DMatrix<f64>], z: &[DMatrix<f64>], total_dim: usize) -> Residuals {
        let mut rp = Vec::with_capacity(self.blocks.len());
        let mut rd = self.c.clone();
        let mut primal = 0.0f64;
        let mut dobj = 0.0;
        let mut comp = 0.0;
        for (j, b) in self.blocks.iter().enumerate() {
            let r = &b.g - &s[j] - b.apply(x);
            primal = primal.max(r.norm());
            rp.push(r);
            rd -= b.adjoint(&z[j]);
            dobj += frobenius_inner(&b.g, &z[j]);
            comp += frobenius_inner(&s[j], &z[j]);
        }
        let pobj = self.c.dot(x);
        let scale = 1.0 + pobj.abs() + dobj.abs();
        Residuals {
            primal: primal / (1.0 + self.g_norm),
            dual: rd.norm() / (1.0 + self.c_norm),
            gap: (dobj - pobj).abs().max(comp.abs()) / scale,
            mu: comp / total_dim as f64,
            pobj,
            dobj,
            rp,
            rd,
        }
    }

    fn step(
        &self,
        settings: &SolverSettings,
        s: &[DMatrix<f64>],
        z: &[DMatrix<f64>],
        res: &Residuals,
    ) -> Option<Step> {
        let m = self.c.len();
        let scalings: Vec<Scaling> = s.iter().zip(z).map(|(s, z)| nt_scaling(s, z)).collect::<Option<_>>()?;

        // Everything below works in the NT-scaled space, where S̃ = Z̃ = D is
        // diagonal and the directions are well scaled even when W is not:
        // Ã_k = Gᵀ A_k G, ΔS̃ = Gᵀ ΔS G, ΔZ̃ = G⁻¹ ΔZ G⁻ᵀ.
        let rows: usize = self.blocks.iter().map(|b| b.n * b.n).sum();
        let mut scaled = DMatrix::zeros(rows + m, m);
        let mut offset = 0;
        for (b, sc) in self.blocks.iter().zip(&scalings) {
            let gt = sc.g.transpose();
            for k in 0..m {
                let ak = DMatrix::from_column_slice(b.n, b.n, b.a.column(k).as_slice());
                let t = sym(&gt * ak * &sc.g);
                scaled.view_mut((offset, k), (b.n * b.n, 1)).copy_from_slice(t.as_slice());
            }
            offset += b.n * b.n;
        }
        // Schur complement H = ÃᵀÃ, factored through a QR of Ã so that
        // cond(R) = √cond(H); a small ridge keeps R invertible.
        let col_max = (0..m).map(|k| scaled.column(k).norm_squared()).fold(0.0f64, f64::max);
        let reg = settings.regularization * col_max.sqrt();
        for k in 0..m {
            scaled[(rows + k, k)] = reg;
        }
        let r = scaled.clone().qr().r();
        if r.diagonal().iter().any(|v| !(v.abs() > 0.0) || !v.is_finite()) {
            return None;
        }
        let a_scaled = scaled.rows(0, rows).into_owned();
        let factor_solve = |rhs: &DVector<f64>| -> Option<DVector<f64>> {
            let w = r.transpose().solve_lower_triangular(rhs)?;
            r.solve_upper_triangular(&w)
        };
        let rp_scaled: Vec<DMatrix<f64>> =
            scalings.iter().zip(&res.rp).map(|(sc, rp)| sym(sc.g.transpose() * rp * &sc.g)).collect();
        let stack = |ms: &[DMatrix<f64>]| {
            let mut v = DVector::zeros(rows);
            let mut offset = 0;
            for mj in ms {
                let len = mj.len();
                v.rows_mut(offset, len).copy_from_slice(mj.as_slice());
                offset += len;
            }
            v
        };
        let unstack = |v: &DVector<f64>| {
            let mut out = Vec::with_capacity(self.blocks.len());
            let mut offset = 0;
            for b in &self.blocks {
                let len = b.n * b.n;
                out.push(sym(DMatrix::from_column_slice(b.n, b.n, &v.as_slice()[offset..offset + len])));
                offset += len;
            }
            out
        };

        // Given the scaled complementarity right-hand side R̃c per block,
        // returns (Δx, ΔS̃, ΔZ̃).
        let solve_dir = |rc: &[DMatrix<f64>]| -> Option<(DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
            let diff: Vec<DMatrix<f64>> = rc.iter().zip(&rp_scaled).map(|(a, b)| a - b).collect();
            let rhs = &res.rd - a_scaled.tr_mul(&stack(&diff));
            let mut dx = factor_solve(&rhs)?;
            for _ in 0..3 {
                let resid = &rhs - a_scaled.tr_mul(&(&a_scaled * &dx));
                if resid.norm() <= 1e-15 * rhs.norm() {
                    break;
                }
                dx += factor_solve(&resid)?;
            }
            let ds = unstack(&(stack(&rp_scaled) - &a_scaled * &dx));
            let dz: Vec<DMatrix<f64>> = rc.iter().zip(&ds).map(|(a, b)| a - b).collect();
            Some((dx, ds, dz))
        };
        let diag = |sc: &Scaling| DMatrix::from_diagonal(&DVector::from_column_slice(&sc.d));
        let scaled_step = |dm: &[DMatrix<f64>]| {
            scalings.iter().zip(dm).map(|(sc, d)| max_step_diag(&sc.d, d)).fold(f64::INFINITY, f64::min)
        };
        let total_dim: usize = self.blocks.iter().map(|b| b.n).sum::<usize>().max(1);

        // predictor: R̃c = −D
        let rc_aff: Vec<DMatrix<f64>> = scalings.iter().map(|sc| -diag(sc)).collect();
        let (_, ds_a, dz_a) = solve_dir(&rc_aff)?;
        let ap = scaled_step(&ds_a).min(1.0);
        let ad = scaled_step(&dz_a).min(1.0);
        let mu_aff: f64 = scalings
            .iter()
            .zip(ds_a.iter().zip(&dz_a))
            .map(|(sc, (dsj, dzj))| frobenius_inner(&(diag(sc) + dsj * ap), &(diag(sc) + dzj * ad)))
            .sum::<f64>()
            / total_dim as f64;
        let mu = res.mu.max(0.0);
        let sigma = if mu > 0.0 { (mu_aff.max(0.0) / mu).powi(3).clamp(0.0, 1.0) } else { 0.0 };

        // Mehrotra corrector: D∘(ΔS̃ + ΔZ̃) = σμI − D² − sym(ΔZ̃ₐΔS̃ₐ), solved
        // entrywise for the symmetrized product with the diagonal D.
        let rc: Vec<DMatrix<f64>> = scalings
            .iter()
            .enumerate()
            .map(|(j, sc)| {
                let n = sc.d.len();
                let prod = &dz_a[j] * &ds_a[j];
                let cross = (&prod + prod.transpose()) * 0.5;
                DMatrix::from_fn(n, n, |k, l| {
                    let mut r = -cross[(k, l)];
                    if k == l {
                        r += sigma * mu - sc.d[k] * sc.d[k];
                    }
                    2.0 * r / (sc.d[k] + sc.d[l])
                })
            })
            .collect();
        let (dx, ds_t, dz_t) = solve_dir(&rc)?;
        if !dx.iter().all(|v| v.is_finite()) {
            return None;
        }
        let ap = scaled_step(&ds_t);
        let ad = scaled_step(&dz_t);
        let alpha_p = (settings.step_fraction * ap).min(1.0);
        let alpha_d = (settings.step_fraction * ad).min(1.0);

        // back to the original space; ΔS from the primal equation directly
        let ds: Vec<DMatrix<f64>> =
            self.blocks.iter().zip(&res.rp).map(|(b, rp)| sym(rp - b.apply(&dx))).collect();
        let mut dz: Vec<DMatrix<f64>> =
            scalings.iter().zip(&dz_t).map(|(sc, d)| sym(&sc.g * d * sc.g.transpose())).collect();
        // Least-norm correction so that Σ⟨Aᵢ, ΔZ⟩ = r_d holds to rounding.
        let mut err = res.rd.clone();
        for (j, b) in self.blocks.iter().enumerate() {
            err -= b.adjoint(&dz[j]);
        }
        let w = self.gram.solve(&err);
        for (j, b) in self.blocks.iter().enumerate() {
            dz[j] = sym(&dz[j] + b.apply(&w));
        }
        Some(Step { dx, ds, dz, alpha_p, alpha_d })
    }
}

/// Largest `α` keeping `diag(d) + α·M ⪰ 0` (`∞` if unbounded).
fn max_step_diag(d: &[f64], m: &DMatrix<f64>) -> f64 {
    let n = d.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let t = DMatrix::from_fn(n, n, |i, j| m[(i, j)] / (d[i] * d[j]).sqrt());
    let min = SymmetricEigen::new(sym(t)).eigenvalues.min();
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

/// Replaces the stacked coefficient columns by an orthonormal basis `Q` of
/// their span (`A = Q R`), so the Schur complement is as well conditioned as
/// the scaling matrices allow. Returns `R`, or `None` when the columns are
/// numerically dependent.
fn orthonormalize_columns(blocks: &mut [Block], c: &mut DVector<f64>) -> Option<DMatrix<f64>> {
    let m = c.len();
    let rows: usize = blocks.iter().map(|b| b.a.nrows()).sum();
    if m == 0 || rows < m {
        return None;
    }
    let mut stacked = DMatrix::zeros(rows, m);
    let mut offset = 0;
    for b in blocks.iter() {
        stacked.rows_mut(offset, b.a.nrows()).copy_from(&b.a);
        offset += b.a.nrows();
    }
    let qr = stacked.qr();
    let r = qr.r();
    let rmax = r.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if r.diagonal().iter().any(|v| !(v.abs() > 1e-13 * rmax)) {
        return None;
    }
    let q = qr.q();
    let c_hat = r.transpose().solve_lower_triangular(c)?;
    let mut offset = 0;
    for b in blocks.iter_mut() {
        let len = b.a.nrows();
        b.a = q.rows(offset, len).into_owned();
        offset += len;
    }
    *c = c_hat;
    Some(r)
}

struct Residuals {
    primal: f64,
    dual: f64,
    gap: f64,
    mu: f64,
    pobj: f64,
    dobj: f64,
    rp: Vec<DMatrix<f64>>,
    rd: DVector<f64>,
}

struct Step {
    dx: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    alpha_p: f64,
    alpha_d: f64,
}
