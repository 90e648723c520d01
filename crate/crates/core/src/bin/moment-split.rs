use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use moment_split::atoms::{seed_from_env, ExtractOptions, DEFAULT_RANK_P};
use moment_split::decomposition::{solve_decomposition, DecompositionProblem, SolveOptions};
use moment_split::io::{read_moment_file, to_json_string, write_moment_file};
use moment_split::measures::{exact_moments, parse_measure};
use moment_split::moments::{density_bound_check, MomentSequence};
use moment_split::report::{build_report, ReportOptions};
use moment_split::scenarios::{reproduce, Scenario};
use moment_split::{Error, Result};

/// Lebesgue decomposition of a measure from its moments.
#[derive(Parser)]
#[command(name = "moment-split", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the moments of a measure to a moment file.
    GenMoments {
        /// Measure specification (e.g. "uniform:0.1:0.7", "mix:0.5=dirac:0.4,0.5=dirac:0.5",
        /// "gaussian2"), or a file containing one.
        #[arg(long)]
        spec: String,
        /// Highest total degree.
        #[arg(long)]
        degree: usize,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split μ into a part dominated by γλ and a remainder.
    Decompose {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        lambda: PathBuf,
        #[arg(long)]
        gamma: f64,
        /// Relaxation order d (moments up to 2d are used).
        #[arg(long)]
        order: usize,
        /// Solve in the basis of polynomials orthonormal with respect to λ.
        #[arg(long)]
        condition: bool,
        /// Look for atoms in the singular part.
        #[arg(long)]
        atoms: bool,
        /// Eigenvalues more than this many decades below the kept ones count as zero.
        #[arg(long, default_value_t = DEFAULT_RANK_P)]
        rank_p: u32,
        /// Reference moments of the normalized absolutely continuous part (file or spec).
        #[arg(long)]
        ref_nu: Option<String>,
        /// Reference moments of the normalized singular part (file or spec).
        #[arg(long)]
        ref_psi: Option<String>,
        /// Keep μ as given instead of rescaling it to unit mass.
        #[arg(long)]
        no_normalize: bool,
        /// JSON report file; the text report always goes to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one of the built-in reference examples and print its table.
    Reproduce {
        /// ex1 … ex5.
        #[arg(long)]
        example: String,
        /// Weight of the absolutely continuous part, in (0, 1).
        #[arg(long)]
        p: f64,
        /// Relaxation order; 9 for ex1–ex4 and 7 for ex5 by default.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        atoms: bool,
        #[arg(long, default_value_t = DEFAULT_RANK_P)]
        rank_p: u32,
        /// Print the full JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Check M_k(ν) ⪯ γ M_k(λ) for every k up to the order.
    CheckDensityBound {
        #[arg(long)]
        nu: PathBuf,
        #[arg(long)]
        lambda: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        order: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            if let Error::SolverFailure { status, iterations, primal_res, dual_res, gap, .. } = &e {
                body["status"] = serde_json::json!(status);
                body["iterations"] = serde_json::json!(iterations);
                body["primal_res"] = serde_json::json!(primal_res);
                body["dual_res"] = serde_json::json!(dual_res);
                body["gap"] = serde_json::json!(gap);
            }
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// A spec given inline or as the path of a file holding one.
fn spec_text(arg: &str) -> Result<String> {
    let path = Path::new(arg);
    if path.is_file() {
        Ok(std::fs::read_to_string(path)?.trim().to_string())
    } else {
        Ok(arg.to_string())
    }
}

/// Reference moments from a moment file, or from a measure spec.
fn reference(arg: &str, degree: usize) -> Result<MomentSequence> {
    let path = Path::new(arg);
    if path.is_file() {
        if let Ok(z) = read_moment_file(path) {
            return Ok(z.normalized());
        }
    }
    let spec = parse_measure(&spec_text(arg)?)?;
    Ok(exact_moments(&spec, degree)?.with_label(spec.to_string()).normalized())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenMoments { spec, degree, out } => {
            let text = spec_text(&spec)?;
            let measure = parse_measure(&text)?;
            let z = exact_moments(&measure, degree)?.with_label(text);
            match out {
                Some(path) => write_moment_file(path, &z)?,
                None => print!("{}", to_json_string(&z)),
            }
        }
        Command::Decompose {
            mu,
            lambda,
            gamma,
            order,
            condition,
            atoms,
            rank_p,
            ref_nu,
            ref_psi,
            no_normalize,
            out,
        } => {
            let mu = read_moment_file(mu)?;
            let lambda = read_moment_file(lambda)?;
            let problem = DecompositionProblem::new(&mu, &lambda, gamma, order, !no_normalize)?;
            let options = SolveOptions { condition, ..Default::default() };
            let solution = solve_decomposition(&problem, &options)?;
            let table_order = 4.min(2 * order);
            let report_options = ReportOptions {
                table_order: Some(table_order),
                reference_nu: ref_nu.as_deref().map(|r| reference(r, table_order)).transpose()?,
                reference_psi: ref_psi.as_deref().map(|r| reference(r, table_order)).transpose()?,
                atoms: atoms.then_some(rank_p),
                extract: ExtractOptions { seed: seed_from_env(), ..Default::default() },
            };
            let report = build_report(&problem, &solution, &options.tolerances, &report_options)?;
            if let Some(path) = out {
                std::fs::write(path, report.to_json_pretty() + "\n")?;
            }
            print!("{}", report.to_text());
        }
        Command::Reproduce { example, p, order, atoms, rank_p, json } => {
            let scenario: Scenario = example.parse()?;
            let options = SolveOptions::default();
            let result = reproduce(scenario, p, order, &options, atoms.then_some(rank_p))?;
            if json {
                println!("{}", result.report.to_json_pretty());
            } else {
                print!("{}", result.table());
            }
        }
        Command::CheckDensityBound { nu, lambda, gamma, order } => {
            let nu = read_moment_file(nu)?;
            let lambda = read_moment_file(lambda)?;
            let eps_psd = moment_split::decomposition::Tolerances::default().eps_psd;
            let mut all = true;
            for k in 0..=order {
                let check = density_bound_check(&nu, &lambda, gamma, k, eps_psd)?;
                all &= check.holds;
                println!("d = {k:<3} {:<6} min eigenvalue {:.6e}", if check.holds { "holds" } else { "fails" }, check.min_eig);
            }
            println!("{}", if all { "bound holds at every order" } else { "bound fails" });
        }
    }
    Ok(())
}
