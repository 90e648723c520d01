//! Run reports: normalized moment tables, relative errors against reference
//! moments, certificate and solver statistics, as JSON and aligned text.

use std::fmt::Write as _;

use serde::Serialize;

use crate::atoms::{candidate_atoms, flatness_scan, ExtractOptions};
use crate::decomposition::{DecompositionProblem, DecompositionSolution, Tolerances};
use crate::error::Result;
use crate::moments::{riesz, MomentSequence, Polynomial};
use crate::multi_index::MultiIndex;
use crate::solver::SolveStatus;

/// `|approx − reference| / |reference|`, undefined for a zero reference.
pub fn relative_error(approx: f64, reference: f64) -> Option<f64> {
    (reference != 0.0).then(|| (approx - reference).abs() / reference.abs())
}

/// `L_z((x₁² + x₂² − 1)²)`: zero for any measure on the unit circle.
pub fn circle_residual(z: &MomentSequence) -> Result<f64> {
    let sq = |i: usize| Polynomial::monomial(MultiIndex::axis_power(2, i, 2), 1.0);
    let f = sq(0).add(&sq(1)).add(&Polynomial::constant(2, -1.0));
    riesz(z, &f.mul(&f))
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportInputs {
    pub mu_label: String,
    pub lambda_label: String,
    pub dimension: usize,
    pub gamma: f64,
    pub order: usize,
    pub conditioned: bool,
    pub eps_feas: f64,
    pub eps_gap: f64,
    pub eps_psd: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentRow {
    pub alpha: Vec<u32>,
    /// `y_α / y₀`.
    pub y: f64,
    pub nu_reference: Option<f64>,
    pub nu_rel_error: Option<f64>,
    /// `v_α / v₀`, absent when no singular part was detected.
    pub v: Option<f64>,
    pub psi_reference: Option<f64>,
    pub psi_rel_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub identity_residual: f64,
    pub min_eig_p: f64,
    pub min_eig_q: f64,
    pub min_eig_sigma: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantSummary {
    pub mu_residual: f64,
    pub lambda_residual: f64,
    pub min_eig_y: f64,
    pub min_eig_v: f64,
    pub min_eig_u: f64,
    pub bound_excess: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSummary {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub gap: f64,
}

/// Candidate atoms of the singular part. The extraction may succeed on a
/// rank condition met before the hierarchy has converged, so the residual
/// is always reported alongside.
#[derive(Debug, Clone, Serialize)]
pub struct AtomReport {
    pub threshold_p: u32,
    pub flat_order: Option<usize>,
    pub rank: Option<usize>,
    pub points: Vec<Vec<f64>>,
    /// Normalized to sum to one, like the moments `v/v₀`.
    pub weights: Vec<f64>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub inputs: ReportInputs,
    pub rho: f64,
    pub y_mass: f64,
    pub v_mass: f64,
    pub singular_part_detected: bool,
    pub rows: Vec<MomentRow>,
    pub max_nu_rel_error: Option<f64>,
    pub max_psi_rel_error: Option<f64>,
    /// `L_{v/v₀}((x₁²+x₂²−1)²)` for two-dimensional problems.
    pub circle_residual: Option<f64>,
    pub certificate: CertificateSummary,
    pub invariants: InvariantSummary,
    pub atoms: Option<AtomReport>,
    pub solver: SolverSummary,
}

/// What to put into a report beyond the solution itself.
#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// Highest total degree of the tabulated moments (default 4).
    pub table_order: Option<usize>,
    /// Moments of the normalized absolutely continuous part.
    pub reference_nu: Option<MomentSequence>,
    /// Moments of the normalized singular part.
    pub reference_psi: Option<MomentSequence>,
    /// Run the flatness scan and atom extraction with this threshold exponent.
    pub atoms: Option<u32>,
    pub extract: ExtractOptions,
}

/// Singular mass below this fraction of `μ₀` counts as absent.
pub const SINGULAR_MASS_TOL: f64 = 1e-6;

pub fn build_report(
    problem: &DecompositionProblem,
    sol: &DecompositionSolution,
    tol: &Tolerances,
    options: &ReportOptions,
) -> Result<RunReport> {
    let table_order = options.table_order.unwrap_or(4).min(2 * sol.order);
    let y0 = sol.y.mass();
    let v0 = sol.v.mass();
    let singular = v0 > SINGULAR_MASS_TOL * problem.mu().mass();
    let lookup = |r: &Option<MomentSequence>, a: &MultiIndex| r.as_ref().and_then(|z| z.get(a));
    let rows: Vec<MomentRow> = sol
        .y
        .iter()
        .filter(|(a, _)| a.total_degree() <= table_order)
        .map(|(a, yv)| {
            let y = yv / y0;
            let v = singular.then(|| sol.v.get(a).expect("same basis") / v0);
            let nu_reference = lookup(&options.reference_nu, a);
            let psi_reference = lookup(&options.reference_psi, a);
            MomentRow {
                alpha: a.exponents().to_vec(),
                y,
                nu_reference,
                nu_rel_error: nu_reference.and_then(|r| relative_error(y, r)),
                v,
                psi_reference,
                psi_rel_error: v.zip(psi_reference).and_then(|(v, r)| relative_error(v, r)),
            }
        })
        .collect();
    let max_of = |f: fn(&MomentRow) -> Option<f64>| rows.iter().filter_map(f).reduce(f64::max);
    let max_nu_rel_error = max_of(|r| r.nu_rel_error);
    let max_psi_rel_error = max_of(|r| r.psi_rel_error);

    let circle = if problem.dim() == 2 && singular && sol.v.max_degree() >= 4 {
        Some(circle_residual(&sol.v.scaled(1.0 / v0))?)
    } else {
        None
    };

    let cert = sol.verify_certificate(problem, tol)?;
    let inv = sol.check_invariants(problem)?;
    let scale = problem.mu().mass().max(problem.gamma() * problem.lambda().mass());

    let atoms = match options.atoms {
        Some(p) if singular => Some(atom_report(&sol.v, sol.order, p, &options.extract)?),
        Some(p) => Some(AtomReport {
            threshold_p: p,
            flat_order: None,
            rank: Some(0),
            points: Vec::new(),
            weights: Vec::new(),
            residual: None,
            error: None,
        }),
        None => None,
    };

    Ok(RunReport {
        inputs: ReportInputs {
            mu_label: problem.mu().label().to_string(),
            lambda_label: problem.lambda().label().to_string(),
            dimension: problem.dim(),
            gamma: problem.gamma(),
            order: sol.order,
            conditioned: sol.conditioned,
            eps_feas: tol.eps_feas,
            eps_gap: tol.eps_gap,
            eps_psd: tol.eps_psd,
        },
        rho: sol.rho,
        y_mass: y0,
        v_mass: v0,
        singular_part_detected: singular,
        rows,
        max_nu_rel_error,
        max_psi_rel_error,
        circle_residual: circle,
        certificate: CertificateSummary {
            identity_residual: cert.identity_residual,
            min_eig_p: cert.min_eig_p,
            min_eig_q: cert.min_eig_q,
            min_eig_sigma: cert.min_eig_sigma,
            dual_value: sol.dual.dual_value,
            gap: cert.gap,
            passed: cert.passed(),
        },
        invariants: InvariantSummary {
            mu_residual: inv.mu_residual,
            lambda_residual: inv.lambda_residual,
            min_eig_y: inv.min_eig_y,
            min_eig_v: inv.min_eig_v,
            min_eig_u: inv.min_eig_u,
            bound_excess: inv.bound_excess,
            holds: inv.holds(tol, scale),
        },
        atoms,
        solver: SolverSummary {
            status: sol.stats.status,
            iterations: sol.stats.iterations,
            primal_res: sol.stats.primal_res,
            dual_res: sol.stats.dual_res,
            gap: sol.stats.gap,
        },
    })
}

fn atom_report(v: &MomentSequence, d: usize, p: u32, extract: &ExtractOptions) -> Result<AtomReport> {
    let flat = flatness_scan(v, d, p)?;
    let mut report = AtomReport {
        threshold_p: p,
        flat_order: flat.map(|f| f.0),
        rank: flat.map(|f| f.1),
        points: Vec::new(),
        weights: Vec::new(),
        residual: None,
        error: None,
    };
    match candidate_atoms(v, d, p, extract) {
        Ok(Some(atoms)) => {
            let mass: f64 = atoms.weights.iter().sum();
            report.weights = atoms.weights.iter().map(|w| w / mass).collect();
            report.points = atoms.points;
            report.residual = Some(atoms.residual);
        }
        Ok(None) => report.error = Some("no flat order found".into()),
        Err(e) => report.error = Some(e.to_string()),
    }
    Ok(report)
}

fn fmt_opt(x: Option<f64>, f: impl Fn(f64) -> String) -> String {
    x.map_or_else(|| "-".to_string(), f)
}

fn pct(x: f64) -> String {
    format!("{:.3}%", 100.0 * x)
}

fn alpha_str(a: &[u32]) -> String {
    MultiIndex::new(a.to_vec()).to_string()
}

impl RunReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned-column text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let i = &self.inputs;
        let _ = writeln!(out, "mu: {}   lambda: {}   n = {}", i.mu_label, i.lambda_label, i.dimension);
        let _ = writeln!(
            out,
            "gamma = {}   d = {}   basis = {}   eps_feas = {:e}   eps_gap = {:e}   eps_psd = {:e}",
            i.gamma,
            i.order,
            if i.conditioned { "lambda-orthonormal" } else { "monomial" },
            i.eps_feas,
            i.eps_gap,
            i.eps_psd
        );
        let _ = writeln!(out, "rho_d = {:.6}   v_0 = {:.6}", self.rho, self.v_mass);
        if !self.singular_part_detected {
            let _ = writeln!(out, "no singular part detected");
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<10} {:>12} {:>12} {:>10} {:>12} {:>12} {:>10}",
            "alpha", "y/y0", "nu ref", "rel.err", "v/v0", "psi ref", "rel.err"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:>12.5} {:>12} {:>10} {:>12} {:>12} {:>10}",
                alpha_str(&r.alpha),
                r.y,
                fmt_opt(r.nu_reference, |x| format!("{x:.5}")),
                fmt_opt(r.nu_rel_error, pct),
                fmt_opt(r.v, |x| format!("{x:.5}")),
                fmt_opt(r.psi_reference, |x| format!("{x:.5}")),
                fmt_opt(r.psi_rel_error, pct),
            );
        }
        if let Some(e) = self.max_nu_rel_error {
            let _ = writeln!(out, "max relative error (nu): {}", pct(e));
        }
        if let Some(e) = self.max_psi_rel_error {
            let _ = writeln!(out, "max relative error (psi): {}", pct(e));
        }
        if let Some(c) = self.circle_residual {
            let _ = writeln!(out, "L_(v/v0)((x1^2+x2^2-1)^2) = {c:.5}");
        }
        if let Some(a) = &self.atoms {
            let _ = writeln!(out);
            match (&a.error, a.residual) {
                (None, Some(res)) => {
                    let _ = writeln!(
                        out,
                        "candidate atoms (p = {}, flat at k = {}, rank {}), moment residual {res:.3e}:",
                        a.threshold_p,
                        a.flat_order.unwrap_or(0),
                        a.rank.unwrap_or(0)
                    );
                    for (x, w) in a.points.iter().zip(&a.weights) {
                        let coords: Vec<String> = x.iter().map(|c| format!("{c:.6}")).collect();
                        let _ = writeln!(out, "  ({})  weight {w:.6}", coords.join(", "));
                    }
                }
                (Some(e), _) => {
                    let _ = writeln!(out, "candidate atoms: none ({e})");
                }
                (None, None) => {
                    let _ = writeln!(out, "candidate atoms: none");
                }
            }
        }
        let c = &self.certificate;
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "certificate: {}   identity residual {:.2e}   dual value {:.9}   gap {:.2e}",
            if c.passed { "ok" } else { "FAILED" },
            c.identity_residual,
            c.dual_value,
            c.gap
        );
        let v = &self.invariants;
        let _ = writeln!(
            out,
            "invariants: {}   feasibility {:.2e}/{:.2e}   min eig y/v/u {:.2e}/{:.2e}/{:.2e}",
            if v.holds { "ok" } else { "FAILED" },
            v.mu_residual,
            v.lambda_residual,
            v.min_eig_y,
            v.min_eig_v,
            v.min_eig_u
        );
        let s = &self.solver;
        let _ = writeln!(
            out,
            "solver: {:?} after {} iterations   primal {:.2e}   dual {:.2e}   gap {:.2e}",
            s.status, s.iterations, s.primal_res, s.dual_res, s.gap
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_follows_table_convention() {
        assert!((relative_error(0.39662, 0.4).unwrap() - 0.00845).abs() < 1e-12);
        assert_eq!(relative_error(1.0, 0.0), None);
    }

    #[test]
    fn circle_residual_vanishes_on_points_of_the_circle() {
        let z = MomentSequence::atomic(&[vec![0.6, 0.8], vec![-1.0, 0.0]], &[0.3, 0.7], 4);
        assert!(circle_residual(&z).unwrap().abs() < 1e-15);
        let off = MomentSequence::atomic(&[vec![0.0, 0.0]], &[1.0], 4);
        assert_eq!(circle_residual(&off).unwrap(), 1.0);
    }
}
