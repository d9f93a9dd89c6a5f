//! Thin command-line wrapper over the library: each subcommand loads JSON
//! documents, calls one library entry point, and emits canonical artifacts.
//!
//! Exit codes: 0 success, 1 certification failure, 2 input errors,
//! 3 numerical infeasibility.

use clap::{Parser, Subcommand};
use rcr_design::criteria::evaluate;
use rcr_design::error::Error;
use rcr_design::io::{canonical_json, load_designs, load_problem, write_atomic, DesignInput};
use rcr_design::model::CompoundProblem;
use rcr_design::solver::{equivalence_gap, round_to_exact, solve, SolveStatus};
use rcr_design::straightline::{reproduce_table, write_table_csv};
use rcr_design::verify::verify;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "rcr-design",
    version,
    about = "Optimal approximate designs for multiple-group random coefficient regression",
    after_help = "Exit codes: 0 success, 1 certification failure, 2 input error, 3 numerical infeasibility."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem document for jointly optimal group designs.
    Solve {
        /// Problem document (JSON).
        #[arg(long)]
        problem: PathBuf,
        /// Write the solve report here (default: print to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the document's algorithm: vertex-direction,
        /// multiplicative, or projected-gradient.
        #[arg(long)]
        algorithm: Option<String>,
        /// Override the document's equivalence-gap tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Override the document's restart seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Certify a candidate design tuple by the equivalence theorem.
    Verify {
        /// Problem document (JSON).
        #[arg(long)]
        problem: PathBuf,
        /// Design document: weights, counts, or a solve report.
        #[arg(long)]
        design: PathBuf,
        /// Certification tolerance on normalized slacks and support residuals.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Also write the verification report here (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print criterion value, covariance, and per-point sensitivities.
    Eval {
        /// Problem document (JSON).
        #[arg(long)]
        problem: PathBuf,
        /// Design document: weights, counts, or a solve report.
        #[arg(long)]
        design: PathBuf,
    },
    /// Re-solve the published two-group straight-line tables.
    Tables {
        /// Which table to reproduce: 1, 2, or all.
        #[arg(long, default_value = "all")]
        which: String,
        /// Write table{N}.csv and table{N}.json into this directory
        /// (default: print CSV to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo check: empirical estimator covariance vs the design
    /// criterion covariance on an exact design.
    Simulate {
        /// Problem document (JSON).
        #[arg(long)]
        problem: PathBuf,
        /// Design document; counts are used directly, weights are rounded
        /// to an exact design first.
        #[arg(long)]
        design: PathBuf,
        /// Number of replications.
        #[arg(long)]
        reps: usize,
        /// Seed for the deterministic replication stream.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the simulation summary here (default: print to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the equivalence gap of a design tuple and nothing else.
    Gap {
        /// Problem document (JSON).
        #[arg(long)]
        problem: PathBuf,
        /// Design document: weights, counts, or a solve report.
        #[arg(long)]
        design: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", render_error(&e));
            exit_code(&e)
        }
    };
    std::process::exit(code);
}

// input problems are the caller's to fix (2); singular or infeasible
// numerics are properties of the problem instance (3)
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotPositiveDefinite { .. }
        | Error::NotPositiveSemidefinite { .. }
        | Error::Infeasible { .. }
        | Error::NoFeasibleStart { .. }
        | Error::RankDeficient { .. }
        | Error::NonFinite => 3,
        _ => 2,
    }
}

fn render_error(e: &Error) -> String {
    match e {
        Error::NotPositiveDefinite { .. } => "infeasible: singular moment matrix".into(),
        // the display of Infeasible already carries the prefix
        Error::Infeasible { .. } => e.to_string(),
        e if exit_code(e) == 3 => format!("infeasible: {e}"),
        e => format!("error: {e}"),
    }
}

// a downstream pipe closing early (`… | head`) ends output, not the run
fn write_stdout(text: &str) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(Error::InvalidData(format!("cannot write to stdout: {e}")))
        }
        _ => Ok(()),
    }
}

fn emit(artifact: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => write_atomic(path, artifact.as_bytes()),
        None => write_stdout(artifact),
    }
}

fn run(cmd: Command) -> Result<i32, Error> {
    match cmd {
        Command::Solve { problem, out, algorithm, tol, seed } => {
            let (prob, mut config) = load_problem(&problem)?;
            if let Some(a) = algorithm {
                config.algorithm = a.parse().map_err(Error::InvalidData)?;
            }
            if let Some(t) = tol {
                if !(t.is_finite() && t > 0.0) {
                    return Err(Error::DomainError { name: "tol", value: t, domain: "(0, inf)" });
                }
                config.gap_tol = t;
            }
            if let Some(s) = seed {
                config.seed = s;
            }
            let report = solve(&prob, &config)?;
            emit(&canonical_json(&report)?, out.as_deref())?;
            match report.status {
                SolveStatus::Converged => Ok(0),
                SolveStatus::NotAttained { group } => {
                    eprintln!(
                        "infeasible: optimum not attained (group {group} design degenerates)"
                    );
                    Ok(3)
                }
                SolveStatus::MaxItersExceeded => {
                    eprintln!(
                        "infeasible: iteration limit reached at gap {:.3e} (tolerance {:.3e})",
                        report.gap, config.gap_tol
                    );
                    Ok(3)
                }
            }
        }
        Command::Verify { problem, design, tol, out } => {
            let (prob, _) = load_problem(&problem)?;
            let input = load_designs(&design, &prob)?;
            let report = verify(&prob, &input.designs, tol)?;
            if let Some(path) = &out {
                write_atomic(path, canonical_json(&report)?.as_bytes())?;
            }
            write_stdout(&render_verification(&report))?;
            Ok(if report.certified { 0 } else { 1 })
        }
        Command::Eval { problem, design } => {
            let (prob, _) = load_problem(&problem)?;
            let input = load_designs(&design, &prob)?;
            write_stdout(&render_evaluation(&prob, &input)?)?;
            Ok(0)
        }
        Command::Tables { which, out } => {
            let ids: Vec<u8> = match which.as_str() {
                "1" => vec![1],
                "2" => vec![2],
                "all" => vec![1, 2],
                other => {
                    return Err(Error::InvalidData(format!(
                        "--which must be 1, 2, or all, got {other:?}"
                    )))
                }
            };
            for id in ids {
                let rows = reproduce_table(id)?;
                let mut csv_bytes = Vec::new();
                write_table_csv(&rows, &mut csv_bytes)?;
                match &out {
                    Some(dir) => {
                        std::fs::create_dir_all(dir).map_err(|e| {
                            Error::InvalidData(format!(
                                "cannot create {}: {e}",
                                dir.display()
                            ))
                        })?;
                        write_atomic(dir.join(format!("table{id}.csv")), &csv_bytes)?;
                        write_atomic(
                            dir.join(format!("table{id}.json")),
                            canonical_json(&rows)?.as_bytes(),
                        )?;
                    }
                    None => {
                        write_stdout(&String::from_utf8_lossy(&csv_bytes))?;
                    }
                }
            }
            Ok(0)
        }
        Command::Simulate { problem, design, reps, seed, out } => {
            let (prob, _) = load_problem(&problem)?;
            let input = load_designs(&design, &prob)?;
            let counts = match input.counts {
                Some(c) => c,
                None => input
                    .designs
                    .iter()
                    .zip(prob.groups())
                    .map(|(d, g)| round_to_exact(d, g.m()))
                    .collect(),
            };
            let beta0 = vec![0.0; prob.p()];
            let sim =
                rcr_design::estimate::simulate_covariance(&prob, &counts, &beta0, reps, seed)?;
            emit(&canonical_json(&sim)?, out.as_deref())?;
            Ok(0)
        }
        Command::Gap { problem, design } => {
            let (prob, _) = load_problem(&problem)?;
            let input = load_designs(&design, &prob)?;
            let gap = equivalence_gap(&prob, &input.designs)?;
            write_stdout(&format!("{gap:.12e}\n"))?;
            Ok(0)
        }
    }
}

fn render_verification(report: &rcr_design::verify::VerificationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "value {:.12e}   tolerance {:.3e}   certified: {}",
        report.value,
        report.tolerance,
        if report.certified { "yes" } else { "no" }
    );
    let _ = writeln!(
        s,
        "max violation {:.3e}   max support residual {:.3e}",
        report.max_violation, report.max_support_residual
    );
    for group in &report.per_group {
        let _ = writeln!(
            s,
            "group {} (max violation {:.3e}, max support residual {:.3e})",
            group.group, group.max_violation, group.max_support_residual
        );
        let _ = writeln!(
            s,
            "  {:<12} {:>14} {:>14} {:>14} {:>14}  {}",
            "point", "weight", "lhs", "rhs", "slack", "support"
        );
        for pt in &group.points {
            let _ = writeln!(
                s,
                "  {:<12} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}  {}",
                pt.label,
                pt.weight,
                pt.lhs,
                pt.rhs,
                pt.slack,
                if pt.supported { "*" } else { "" }
            );
        }
    }
    s
}

fn render_evaluation(prob: &CompoundProblem, input: &DesignInput) -> Result<String, Error> {
    let ev = evaluate(prob, &input.designs)?;
    let mut s = String::new();
    let _ = writeln!(s, "criterion value {:.12e}", ev.value());
    let _ = writeln!(s, "covariance:");
    let cov = ev.covariance();
    for r in 0..cov.rows() {
        let row: Vec<String> = (0..cov.cols()).map(|c| format!("{:>14.6e}", cov.get(r, c))).collect();
        let _ = writeln!(s, "  [{}]", row.join(", "));
    }
    for (i, g) in prob.groups().iter().enumerate() {
        let _ = writeln!(
            s,
            "group {i} sensitivities (optimal iff lhs <= rhs with equality on support):"
        );
        let _ = writeln!(s, "  {:<12} {:>14} {:>14} {:>14}", "point", "weight", "lhs", "rhs");
        for t in 0..g.k() {
            let (lhs, rhs) = ev.sensitivity(i, t)?;
            let _ = writeln!(
                s,
                "  {:<12} {:>14.6e} {:>14.6e} {:>14.6e}",
                g.points()[t].label,
                input.designs[i].weights()[t],
                lhs,
                rhs
            );
        }
    }
    Ok(s)
}
