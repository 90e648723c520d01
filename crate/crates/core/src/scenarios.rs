//! The five reference decompositions used throughout the documentation and
//! the reproduction command, with their known ground truth.
//!
//! | id  | n | absolutely continuous part | singular part          | λ      | default d |
//! |-----|---|----------------------------|------------------------|--------|-----------|
//! | ex1 | 1 | uniform on [0.1, 0.7]      | δ₀.₄                   | [0, 1] | 9         |
//! | ex2 | 1 | uniform on [0.1, 0.7]      | (δ₀.₄ + δ₀.₅)/2        | [0, 1] | 9         |
//! | ex3 | 2 | Gaussian                   | δ₍₁,₂₎                 | 2·ν    | 9         |
//! | ex4 | 2 | Gaussian                   | (δ₍₁,₂₎ + δ₍₋₂,₁₎)/2   | ν      | 9         |
//! | ex5 | 2 | Gaussian                   | uniform on the circle  | ν      | 7         |
//!
//! In every case `μ = p·ν + (1 − p)·ψ` and `γ = 2p`.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::decomposition::{solve_decomposition, DecompositionProblem, DecompositionSolution, SolveOptions};
use crate::error::{Error, Result};
use crate::measures::{exact_moments, GroundTruth, MeasureSpec};
use crate::multi_index::MultiIndex;
use crate::report::{build_report, relative_error, ReportOptions, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
    Ex5,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ex1" => Ok(Scenario::Ex1),
            "ex2" => Ok(Scenario::Ex2),
            "ex3" => Ok(Scenario::Ex3),
            "ex4" => Ok(Scenario::Ex4),
            "ex5" => Ok(Scenario::Ex5),
            other => Err(Error::InvalidArgument(format!("unknown example '{other}' (expected ex1..ex5)"))),
        }
    }
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [Scenario::Ex1, Scenario::Ex2, Scenario::Ex3, Scenario::Ex4, Scenario::Ex5];

    pub fn id(self) -> &'static str {
        match self {
            Scenario::Ex1 => "ex1",
            Scenario::Ex2 => "ex2",
            Scenario::Ex3 => "ex3",
            Scenario::Ex4 => "ex4",
            Scenario::Ex5 => "ex5",
        }
    }

    pub fn default_order(self) -> usize {
        match self {
            Scenario::Ex5 => 7,
            _ => 9,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Scenario::Ex1 | Scenario::Ex2 => 1,
            _ => 2,
        }
    }

    /// Ground truth and reference measure `λ` for weight `p`.
    pub fn setup(self, p: f64) -> Result<(GroundTruth, MeasureSpec)> {
        let dirac = |x: Vec<f64>| MeasureSpec::Dirac { point: x };
        let half = |a: MeasureSpec, b: MeasureSpec| MeasureSpec::mixture(vec![(0.5, a), (0.5, b)]);
        let interval = MeasureSpec::UniformInterval { a: 0.1, b: 0.7 };
        let unit = MeasureSpec::UniformInterval { a: 0.0, b: 1.0 };
        let gauss = MeasureSpec::GaussianProduct { n: 2 };
        let (nu, psi, lambda) = match self {
            Scenario::Ex1 => (interval, dirac(vec![0.4]), unit),
            Scenario::Ex2 => (interval, half(dirac(vec![0.4]), dirac(vec![0.5])), unit),
            Scenario::Ex3 => (gauss.clone(), dirac(vec![1.0, 2.0]), MeasureSpec::scaled(2.0, gauss)),
            Scenario::Ex4 => (gauss.clone(), half(dirac(vec![1.0, 2.0]), dirac(vec![-2.0, 1.0])), gauss),
            Scenario::Ex5 => (gauss.clone(), MeasureSpec::UniformCircle, gauss),
        };
        Ok((GroundTruth::new(nu, psi, p, 2.0 * p)?, lambda))
    }

    /// The decomposition problem at order `d` (μ normalized).
    pub fn problem(self, p: f64, d: usize) -> Result<DecompositionProblem> {
        let (truth, lambda) = self.setup(p)?;
        let mu = exact_moments(&truth.mu(), 2 * d)?.with_label(truth.mu().to_string());
        let lambda = exact_moments(&lambda, 2 * d)?.with_label(lambda.to_string());
        DecompositionProblem::new(&mu, &lambda, truth.gamma, d, true)
    }
}

/// A solved scenario with its report against the ground truth.
#[derive(Debug, Clone)]
pub struct Reproduction {
    pub scenario: Scenario,
    pub p: f64,
    pub problem: DecompositionProblem,
    pub solution: DecompositionSolution,
    pub report: RunReport,
}

/// Solves `scenario` at weight `p` and order `d` (its default when `None`).
/// `atoms` runs the atom extraction with that threshold exponent.
pub fn reproduce(
    scenario: Scenario,
    p: f64,
    order: Option<usize>,
    options: &SolveOptions,
    atoms: Option<u32>,
) -> Result<Reproduction> {
    let d = order.unwrap_or(scenario.default_order());
    let (truth, _) = scenario.setup(p)?;
    let problem = scenario.problem(p, d)?;
    let solution = solve_decomposition(&problem, options)?;
    let report_options = ReportOptions {
        table_order: Some(4),
        reference_nu: Some(exact_moments(&truth.nu, 4)?),
        reference_psi: Some(exact_moments(&truth.psi, 4)?),
        atoms,
        ..Default::default()
    };
    let report = build_report(&problem, &solution, &options.tolerances, &report_options)?;
    Ok(Reproduction { scenario, p, problem, solution, report })
}

fn moment_ratio(sol: &DecompositionSolution, which: &str, alpha: &[u32]) -> f64 {
    let z = if which == "v" { &sol.v } else { &sol.y };
    z.get(&MultiIndex::new(alpha.to_vec())).expect("degree ≥ 4") / z.mass()
}

impl Reproduction {
    /// Largest relative error of `v/v₀` against the singular part's moments
    /// up to order 4, over moments with a nonzero reference.
    pub fn psi_max_error(&self) -> Option<f64> {
        self.report.max_psi_rel_error
    }

    /// Largest relative error of the second-order moments `x₁²`, `x₂²` of
    /// `y/y₀` against the absolutely continuous part.
    pub fn nu_second_order_error(&self) -> Option<f64> {
        let n = self.problem.dim();
        let (truth, _) = self.scenario.setup(self.p).ok()?;
        (0..n)
            .filter_map(|i| {
                let a = MultiIndex::axis_power(n, i, 2);
                relative_error(moment_ratio(&self.solution, "y", a.exponents()), truth.nu.moment(&a))
            })
            .reduce(f64::max)
    }

    /// Relative errors of `v/v₀` on `x₁²`, `x₁⁴`, `x₁²x₂²`.
    pub fn circle_moment_errors(&self) -> [f64; 3] {
        let (truth, _) = self.scenario.setup(self.p).expect("validated at construction");
        [[2, 0], [4, 0], [2, 2]].map(|e| {
            let reference = truth.psi.moment(&MultiIndex::new(e.to_vec()));
            relative_error(moment_ratio(&self.solution, "v", &e), reference).unwrap_or(f64::NAN)
        })
    }

    /// The result in the layout of the corresponding published table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let sol = &self.solution;
        let _ = writeln!(out, "{} p = {} d = {} gamma = {}", self.scenario.id(), self.p, sol.order, sol.gamma);
        match self.scenario {
            Scenario::Ex1 | Scenario::Ex2 => {
                let psi: Vec<Option<f64>> = self.report.rows.iter().map(|r| r.psi_rel_error).collect();
                let nu: Vec<Option<f64>> = self.report.rows.iter().map(|r| r.nu_rel_error).collect();
                for (title, which, errors) in [("psi* (v/v0)", "v", psi), ("nu* (y/y0)", "y", nu)] {
                    let _ = writeln!(out, "{title}");
                    let vals: Vec<String> =
                        (0..=4u32).map(|k| format!("{:>9.5}", moment_ratio(sol, which, &[k]))).collect();
                    let _ = writeln!(out, "  {}", vals.join(" "));
                    let errs: Vec<String> = errors
                        .iter()
                        .map(|e| format!("{:>9}", e.map_or("-".into(), |e| format!("{:.2}%", 100.0 * e))))
                        .collect();
                    let _ = writeln!(out, "  {}", errs.join(" "));
                }
            }
            Scenario::Ex3 | Scenario::Ex4 => {
                let pct = |e: Option<f64>| e.map_or("-".into(), |e| format!("{:.2}%", 100.0 * e));
                let _ = writeln!(out, "{:<8} {:>9}", "psi*", pct(self.psi_max_error()));
                let _ = writeln!(out, "{:<8} {:>9}", "nu*", pct(self.nu_second_order_error()));
                let _ = writeln!(out, "{:<8} {:>9.4}", format!("rho_{}", sol.order), sol.rho);
            }
            Scenario::Ex5 => {
                let [a, b, c] = self.circle_moment_errors();
                let _ = writeln!(out, "{:>9} {:>9} {:>9} {:>26}", "x1^2", "x1^4", "x1^2x2^2", "L_(v/v0)((x1^2+x2^2-1)^2)");
                let _ = writeln!(
                    out,
                    "{:>9} {:>9} {:>9} {:>26.4}",
                    format!("{:.2}%", 100.0 * a),
                    format!("{:.2}%", 100.0 * b),
                    format!("{:.2}%", 100.0 * c),
                    self.report.circle_residual.unwrap_or(f64::NAN)
                );
            }
        }
        if let Some(a) = &self.report.atoms {
            match &a.error {
                None => {
                    let _ = writeln!(out, "candidate atoms (moment residual {:.2e}):", a.residual.unwrap_or(f64::NAN));
                    for (x, w) in a.points.iter().zip(&a.weights) {
                        let coords: Vec<String> = x.iter().map(|c| format!("{c:.5}")).collect();
                        let _ = writeln!(out, "  ({})  weight {w:.5}", coords.join(", "));
                    }
                }
                Some(e) => {
                    let _ = writeln!(out, "candidate atoms: none ({e})");
                }
            }
        }
        out
    }
}
