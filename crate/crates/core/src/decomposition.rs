//! The truncated decomposition problem and its semidefinite relaxations.
//!
//! For order `d` the relaxation is
//!
//! ```text
//! ρ_d = max y₀   s.t.  M_d(y) ⪰ 0,  M_d(μ) − M_d(y) ⪰ 0,  γ M_d(λ) − M_d(y) ⪰ 0
//! ```
//!
//! with `v = μ − y` and `u = γλ − y` eliminated. Its dual asks for SOS
//! polynomials `p, q, σ` with `p + q − 1 = σ` minimizing `∫p dμ + γ∫q dλ`.

use nalgebra::DMatrix;

use crate::basis::{orthonormal_basis, transform_program, OrthonormalBasis, DEFAULT_EPS_PD};
use crate::dd::{self, Dd, DdMatrix};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, min_eigenvalue};
use crate::moments::{basis_expansion_matrices, build_moment_matrix, BasisExpansion, MomentSequence};
use crate::multi_index::MultiIndex;
use crate::solver::{ConicBackend, ConicProgram, InteriorPoint, LmiBlock, SolveStatus, SolverSettings};

/// Numerical tolerances shared by the decomposition checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub eps_feas: f64,
    pub eps_gap: f64,
    pub eps_psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eps_feas: 1e-7, eps_gap: 1e-6, eps_psd: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct DecompositionProblem {
    mu: MomentSequence,
    lambda: MomentSequence,
    gamma: f64,
    order: usize,
}

impl DecompositionProblem {
    /// `μ` is rescaled to a probability measure when `normalize_mu` is set; `λ` never is.
    pub fn new(
        mu: &MomentSequence,
        lambda: &MomentSequence,
        gamma: f64,
        order: usize,
        normalize_mu: bool,
    ) -> Result<Self> {
        if mu.dim() != lambda.dim() {
            return Err(Error::DimensionMismatch { expected: mu.dim(), found: lambda.dim() });
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        let mu = mu.truncate(2 * order)?;
        let lambda = lambda.truncate(2 * order)?;
        if !(lambda.mass() > 0.0) {
            return Err(Error::InvalidArgument(format!("reference mass λ₀ must be positive, got {}", lambda.mass())));
        }
        if !(mu.mass() > 0.0) {
            return Err(Error::InvalidArgument(format!("mass μ₀ must be positive, got {}", mu.mass())));
        }
        let mu = if normalize_mu { mu.normalized() } else { mu };
        Ok(DecompositionProblem { mu, lambda, gamma, order })
    }

    pub fn mu(&self) -> &MomentSequence {
        &self.mu
    }

    pub fn lambda(&self) -> &MomentSequence {
        &self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }
}

/// Assembles the relaxation as three LMI blocks affine in `y ∈ ℝ^{s(2d)}`:
/// `M_d(y)`, `M_d(μ) − M_d(y)` and `γM_d(λ) − M_d(y)`.
pub fn build_primal(problem: &DecompositionProblem) -> ConicProgram {
    let d = problem.order;
    let expansion = basis_expansion_matrices(problem.dim(), d);
    let m = expansion.len();
    let s = expansion.size();
    let b: Vec<DMatrix<f64>> = (0..m).map(|k| expansion.dense(k)).collect();
    let mu_block = expansion.assemble(problem.mu.values());
    let lambda_block = expansion.assemble(problem.lambda.values()) * problem.gamma;
    let mut objective = vec![0.0; m];
    objective[0] = 1.0;
    ConicProgram {
        objective,
        blocks: vec![
            LmiBlock { constant: DMatrix::zeros(s, s), coefficients: b.iter().map(|x| -x).collect() },
            LmiBlock { constant: mu_block, coefficients: b.clone() },
            LmiBlock { constant: lambda_block, coefficients: b },
        ],
        labels: expansion.moment_basis().iter().map(MultiIndex::to_string).collect(),
    }
}

/// Gram matrices of the SOS multipliers, in the monomial basis.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub gram_p: DMatrix<f64>,
    pub gram_q: DMatrix<f64>,
    pub gram_sigma: DMatrix<f64>,
    /// `∫p dμ + γ∫q dλ`.
    pub dual_value: f64,
    /// Largest coefficient residual of `p + q − 1 = σ` before the rounded
    /// Grams were reconciled (see [`reconcile_identity`]).
    pub rounding_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    /// Relative duality gap reported by the solver.
    pub gap: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone)]
pub struct DecompositionSolution {
    pub order: usize,
    pub gamma: f64,
    /// Moments of the absolutely continuous part.
    pub y: MomentSequence,
    /// Moments of the remainder `μ − y`.
    pub v: MomentSequence,
    /// Moments of the slack `γλ − y`.
    pub u: MomentSequence,
    pub rho: f64,
    pub dual: DualCertificate,
    pub stats: SolveStats,
    pub conditioned: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub solver: SolverSettings,
    pub tolerances: Tolerances,
    /// Solve in the `λ`-orthonormal basis.
    pub condition: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        let tolerances = Tolerances::default();
        // The solver runs two orders tighter than the acceptance checks: the
        // moments and Grams lose digits on the way back from its scaled
        // coordinates.
        SolveOptions {
            solver: SolverSettings { eps_feas: 1e-9, eps_gap: 1e-9, ..Default::default() },
            tolerances,
            condition: false,
        }
    }
}

pub fn solve_decomposition(problem: &DecompositionProblem, options: &SolveOptions) -> Result<DecompositionSolution> {
    solve_decomposition_with(problem, options, &InteriorPoint)
}

pub fn solve_decomposition_with(
    problem: &DecompositionProblem,
    options: &SolveOptions,
    backend: &dyn ConicBackend,
) -> Result<DecompositionSolution> {
    let d = problem.order;
    let prog = build_primal(problem);
    let basis = if options.condition {
        orthonormal_basis(&problem.lambda, d, DEFAULT_EPS_PD)?
    } else {
        OrthonormalBasis::identity(build_moment_matrix(&problem.lambda, d)?.indexer().clone())
    };
    let prog = if options.condition { transform_program(&prog, &basis)? } else { prog };
    let sol = match interior_start(problem) {
        Some(x0) => backend.solve_from(&prog, &options.solver, &x0),
        None => backend.solve(&prog, &options.solver),
    };
    if sol.status != SolveStatus::Optimal {
        return Err(Error::SolverFailure {
            status: sol.status,
            iterations: sol.iterations,
            primal_res: sol.primal_res,
            dual_res: sol.dual_res,
            gap: sol.gap,
            last_iterate: sol.x,
        });
    }

    let n = problem.dim();
    let y = MomentSequence::new(n, 2 * d, sol.x.clone(), "y")?;
    let v = problem.mu.combine(1.0, &y, -1.0)?.with_label("v");
    let u = problem.lambda.combine(problem.gamma, &y, -1.0)?.with_label("u");

    // Grams back in the monomial basis: Lᵀ Z L
    let lt = basis.matrix().transpose();
    let to_monomial = |z: &DMatrix<f64>| {
        let g = if options.condition { dd::congruence(&lt, &DdMatrix::from_f64(z)).to_f64() } else { z.clone() };
        (&g + g.transpose()) * 0.5
    };
    let mut gram_sigma = to_monomial(&sol.duals[0]);
    let mut gram_p = to_monomial(&sol.duals[1]);
    let mut gram_q = to_monomial(&sol.duals[2]);
    let expansion = basis_expansion_matrices(n, d);
    let rounding_residual = reconcile_identity(&expansion, &mut gram_p, &mut gram_q, &mut gram_sigma);
    // Rounding the Grams also moves ∫p dμ + γ∫q dλ; shifting p and σ by the
    // same constant restores the solver's dual objective and keeps the identity.
    let mu0 = problem.mu.mass();
    for _ in 0..2 {
        let value = certificate_value(&gram_p, &gram_q, &problem.mu, &problem.lambda, problem.gamma, d)?;
        let shift = (sol.dual_objective - value) / mu0;
        gram_p[(0, 0)] += shift;
        gram_sigma[(0, 0)] += shift;
        reconcile_identity(&expansion, &mut gram_p, &mut gram_q, &mut gram_sigma);
    }
    let dual_value = certificate_value(&gram_p, &gram_q, &problem.mu, &problem.lambda, problem.gamma, d)?;

    Ok(DecompositionSolution {
        order: d,
        gamma: problem.gamma,
        rho: y.mass(),
        y,
        v,
        u,
        dual: DualCertificate { gram_p, gram_q, gram_sigma, dual_value, rounding_residual },
        stats: SolveStats {
            iterations: sol.iterations,
            primal_res: sol.primal_res,
            dual_res: sol.dual_res,
            gap: sol.gap,
            status: sol.status,
        },
        conditioned: options.condition,
    })
}

/// A strictly feasible point `y = t·μ`: with `t ≤ 1/2` and
/// `t·λ_max(M(λ)^{-1/2} M(μ) M(λ)^{-1/2}) ≤ γ/2` every block is positive
/// definite whenever `M_d(μ)` and `M_d(λ)` are. `None` if they are not.
pub fn interior_start(problem: &DecompositionProblem) -> Option<Vec<f64>> {
    let d = problem.order;
    let mu_m = build_moment_matrix(&problem.mu, d).ok()?;
    let la_m = build_moment_matrix(&problem.lambda, d).ok()?;
    let l = dd::inverse_cholesky(&DdMatrix::from_f64(la_m.entries()))?;
    let whitened = dd::congruence(&l, &DdMatrix::from_f64(mu_m.entries())).to_f64();
    let top = crate::linalg::sorted_eigenvalues(&whitened).last().copied()?;
    if !(top > 0.0) {
        return None;
    }
    let t = 0.5 * (problem.gamma / top).min(1.0);
    Some(problem.mu.values().iter().map(|v| v * t).collect())
}

/// `τ₁ = max(μ₀, maxᵢ ∫xᵢ^{2d}dμ)` and `τ₂ = γ·max(λ₀, maxᵢ ∫xᵢ^{2d}dλ)`.
pub fn bound_constants(mu: &MomentSequence, lambda: &MomentSequence, gamma: f64, d: usize) -> Result<(f64, f64)> {
    mu.require_degree(2 * d)?;
    lambda.require_degree(2 * d)?;
    let tau = |z: &MomentSequence| {
        let n = z.dim();
        (0..n)
            .map(|i| z.get(&MultiIndex::axis_power(n, i, 2 * d as u32)).expect("degree checked"))
            .fold(z.mass(), f64::max)
    };
    Ok((tau(mu), gamma * tau(lambda)))
}

/// Invariant residuals of a solution, recomputed from its moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    /// `max_α |y_α + v_α − μ_α|`.
    pub mu_residual: f64,
    /// `max_α |y_α + u_α − γλ_α|`.
    pub lambda_residual: f64,
    pub min_eig_y: f64,
    pub min_eig_v: f64,
    pub min_eig_u: f64,
    /// Largest excess of `|y_α|, |v_α|` over `τ₁` and of `|u_α|` over `τ₂`.
    pub bound_excess: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl InvariantReport {
    /// All invariants within `tol`; PSD checks are relative to each matrix's norm.
    pub fn holds(&self, tol: &Tolerances, scale: f64) -> bool {
        let psd = -tol.eps_psd * scale.max(1.0);
        self.mu_residual <= tol.eps_feas
            && self.lambda_residual <= tol.eps_feas
            && self.min_eig_y >= psd
            && self.min_eig_v >= psd
            && self.min_eig_u >= psd
            && self.bound_excess <= tol.eps_feas
    }
}

impl DecompositionSolution {
    pub fn check_invariants(&self, problem: &DecompositionProblem) -> Result<InvariantReport> {
        let d = self.order;
        let mu = problem.mu();
        let lambda = problem.lambda();
        let residual = |a: &MomentSequence, b: &MomentSequence, target: &MomentSequence, scale: f64| {
            a.values()
                .iter()
                .zip(b.values())
                .zip(target.values())
                .map(|((x, y), t)| (x + y - scale * t).abs())
                .fold(0.0, f64::max)
        };
        let (tau1, tau2) = bound_constants(mu, lambda, problem.gamma(), d)?;
        let excess = |z: &MomentSequence, tau: f64| max_abs(z.values()) - tau;
        Ok(InvariantReport {
            mu_residual: residual(&self.y, &self.v, mu, 1.0),
            lambda_residual: residual(&self.y, &self.u, lambda, problem.gamma()),
            min_eig_y: build_moment_matrix(&self.y, d)?.min_eigenvalue(),
            min_eig_v: build_moment_matrix(&self.v, d)?.min_eigenvalue(),
            min_eig_u: build_moment_matrix(&self.u, d)?.min_eigenvalue(),
            bound_excess: excess(&self.y, tau1).max(excess(&self.v, tau1)).max(excess(&self.u, tau2)).max(0.0),
            tau1,
            tau2,
        })
    }
}

/// Result of checking the dual certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateReport {
    /// `max_α |p_α + q_α − δ_{α0} − σ_α|`.
    pub identity_residual: f64,
    pub min_eig_p: f64,
    pub min_eig_q: f64,
    pub min_eig_sigma: f64,
    /// `dual_value − ρ_d`.
    pub gap: f64,
    pub identity_ok: bool,
    pub psd_ok: bool,
    pub gap_ok: bool,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.identity_ok && self.psd_ok && self.gap_ok
    }
}

/// Checks `p + q − 1 = σ`, PSD-ness of the three Grams and the duality gap.
///
/// `identity_tol` bounds the coefficient residual; PSD checks use
/// `eps_psd` relative to each Gram's largest eigenvalue.
pub fn verify_certificate(
    cert: &DualCertificate,
    rho: f64,
    mu: &MomentSequence,
    lambda: &MomentSequence,
    gamma: f64,
    d: usize,
    identity_tol: f64,
    tol: &Tolerances,
) -> Result<CertificateReport> {
    let expansion = basis_expansion_matrices(mu.dim(), d);
    let s = expansion.size();
    for g in [&cert.gram_p, &cert.gram_q, &cert.gram_sigma] {
        if g.nrows() != s || g.ncols() != s {
            return Err(Error::DimensionMismatch { expected: s, found: g.nrows() });
        }
    }
    let identity_residual = identity_residuals(&expansion, &cert.gram_p, &cert.gram_q, &cert.gram_sigma)
        .into_iter()
        .map(|r| f64::from(r).abs())
        .fold(0.0, f64::max);
    let dual_value = certificate_value(&cert.gram_p, &cert.gram_q, mu, lambda, gamma, d)?;
    let min_eig_p = min_eigenvalue(&cert.gram_p);
    let min_eig_q = min_eigenvalue(&cert.gram_q);
    let min_eig_sigma = min_eigenvalue(&cert.gram_sigma);
    let psd_ok = [(&cert.gram_p, min_eig_p), (&cert.gram_q, min_eig_q), (&cert.gram_sigma, min_eig_sigma)]
        .iter()
        .all(|(g, e)| *e >= -tol.eps_psd * g.norm().max(1.0));
    let gap = dual_value - rho;
    Ok(CertificateReport {
        identity_residual,
        min_eig_p,
        min_eig_q,
        min_eig_sigma,
        gap,
        identity_ok: identity_residual <= identity_tol,
        psd_ok,
        gap_ok: gap.abs() <= tol.eps_gap,
    })
}

/// `p_α + q_α − δ_{α0} − σ_α` for every `α`, summed in double-double so the
/// result reflects the Grams themselves rather than the summation.
fn identity_residuals(expansion: &BasisExpansion, gp: &DMatrix<f64>, gq: &DMatrix<f64>, gs: &DMatrix<f64>) -> Vec<Dd> {
    (0..expansion.len()).map(|k| identity_residual_at(expansion, k, gp, gq, gs)).collect()
}

fn identity_residual_at(expansion: &BasisExpansion, k: usize, gp: &DMatrix<f64>, gq: &DMatrix<f64>, gs: &DMatrix<f64>) -> Dd {
    let mut r = if k == 0 { dd::dd(-1.0) } else { dd::dd(0.0) };
    for &(i, j) in expansion.support(k) {
        r += gp[(i, j)];
        r += gq[(i, j)];
        r -= gs[(i, j)];
    }
    r
}

/// Makes rounded Grams satisfy `p + q − 1 = σ` to the last representable
/// digit.
///
/// Grams mapped back to the monomial basis can have entries many orders of
/// magnitude above one, and a residual that is tiny relative to them can still
/// be large in absolute terms. Each residual is first spread evenly over the
/// anti-diagonal of `σ` (the least-norm correction), and what rounding leaves
/// of it is moved onto the smallest entry of that anti-diagonal in any of
/// the three Grams. PSD-ness is not enforced here; check it afterwards. Returns the
/// largest residual before adjustment.
pub fn reconcile_identity(expansion: &BasisExpansion, gp: &mut DMatrix<f64>, gq: &mut DMatrix<f64>, gs: &mut DMatrix<f64>) -> f64 {
    let before = identity_residuals(expansion, gp, gq, gs).into_iter().map(|r| f64::from(r).abs()).fold(0.0, f64::max);
    for k in 0..expansion.len() {
        // least-norm correction of σ first: spread evenly over the anti-diagonal
        let r = f64::from(identity_residual_at(expansion, k, gp, gq, gs));
        let share = r / expansion.support(k).len() as f64;
        for &(i, j) in expansion.support(k) {
            gs[(i, j)] += share;
        }
        // then the remainder onto the smallest entry among all three Grams,
        // which is a multiple of every granularity in the sum and so exact
        for _ in 0..4 {
            let r = f64::from(identity_residual_at(expansion, k, gp, gq, gs));
            if r == 0.0 {
                break;
            }
            let candidates = expansion.support(k).iter().filter(|(i, j)| i <= j).flat_map(|&(i, j)| {
                [(0, i, j, gp[(i, j)]), (1, i, j, gq[(i, j)]), (2, i, j, gs[(i, j)])]
            });
            let (which, i, j, _) =
                candidates.min_by(|a, b| a.3.abs().total_cmp(&b.3.abs())).expect("every coefficient has a position");
            let step = if i == j { r } else { 0.5 * r };
            let (target, sign): (&mut DMatrix<f64>, f64) = match which {
                0 => (&mut *gp, -1.0),
                1 => (&mut *gq, -1.0),
                _ => (&mut *gs, 1.0),
            };
            target[(i, j)] += sign * step;
            target[(j, i)] = target[(i, j)];
        }
    }
    before
}

/// `⟨M_d(μ), G_p⟩ + γ⟨M_d(λ), G_q⟩` in double-double.
fn certificate_value(
    gp: &DMatrix<f64>,
    gq: &DMatrix<f64>,
    mu: &MomentSequence,
    lambda: &MomentSequence,
    gamma: f64,
    d: usize,
) -> Result<f64> {
    let mu_m = build_moment_matrix(mu, d)?;
    let la_m = build_moment_matrix(lambda, d)?;
    let inner = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
        a.iter().zip(b.iter()).fold(dd::dd(0.0), |acc, (x, y)| acc + dd::TwoFloat::new_mul(*x, *y))
    };
    Ok((inner(mu_m.entries(), gp) + inner(la_m.entries(), gq) * gamma).into())
}

impl DecompositionSolution {
    pub fn verify_certificate(&self, problem: &DecompositionProblem, tol: &Tolerances) -> Result<CertificateReport> {
        verify_certificate(
            &self.dual,
            self.rho,
            problem.mu(),
            problem.lambda(),
            problem.gamma(),
            self.order,
            tol.eps_gap,
            tol,
        )
    }
}

/// One level of a hierarchy run.
#[derive(Debug)]
pub struct HierarchyLevel {
    pub order: usize,
    pub result: Result<DecompositionSolution>,
}

#[derive(Debug)]
pub struct HierarchyReport {
    pub levels: Vec<HierarchyLevel>,
    /// Pairs `(d, d′)`, `d < d′`, with `ρ_d < ρ_{d′} − ε_gap`.
    pub monotonicity_violations: Vec<(usize, usize)>,
}

impl HierarchyReport {
    pub fn is_monotone(&self) -> bool {
        self.monotonicity_violations.is_empty()
    }

    pub fn rhos(&self) -> Vec<(usize, Option<f64>)> {
        self.levels.iter().map(|l| (l.order, l.result.as_ref().ok().map(|s| s.rho))).collect()
    }
}

/// Solves the relaxation at every order in `orders`, levels in parallel.
///
/// A failing level is reported in place; remaining levels still run.
pub fn solve_hierarchy(
    mu: &MomentSequence,
    lambda: &MomentSequence,
    gamma: f64,
    orders: &[usize],
    normalize_mu: bool,
    options: &SolveOptions,
) -> HierarchyReport {
    let mut sorted = orders.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let levels: Vec<HierarchyLevel> = std::thread::scope(|scope| {
        let handles: Vec<_> = sorted
            .iter()
            .map(|&d| {
                scope.spawn(move || {
                    let result = DecompositionProblem::new(mu, lambda, gamma, d, normalize_mu)
                        .and_then(|p| solve_decomposition(&p, options));
                    HierarchyLevel { order: d, result }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("hierarchy level panicked")).collect()
    });
    let mut monotonicity_violations = Vec::new();
    for (i, a) in levels.iter().enumerate() {
        for b in &levels[i + 1..] {
            if let (Ok(sa), Ok(sb)) = (&a.result, &b.result) {
                if sa.rho < sb.rho - options.tolerances.eps_gap {
                    monotonicity_violations.push((a.order, b.order));
                }
            }
        }
    }
    HierarchyReport { levels, monotonicity_violations }
}
