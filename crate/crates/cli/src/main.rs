//! `fcpmp`: solve, certify, compare against solve-then-filter, and export data.

mod artifacts;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use fcpmp::certificate::{certify, CertificateReport};
use fcpmp::models::{filter_baseline, trajectory_report, TrajectoryReport};
use fcpmp::problem::total_cost;
use fcpmp::solver::{solve, Diagnostics, Solution};
use fcpmp::spectrum::BannedBinSet;
use fcpmp::{Error, ProblemSpec};
use serde::Serialize;

use config::{Model, RunConfig};

const OUT_DIR_ENV: &str = "FCPMP_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "fcpmp",
    version,
    about = "Frequency-constrained optimal control with maximum-principle certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// Model to run; overrides `model` in the config file.
    #[arg(long, value_enum)]
    model: Option<Model>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set pendulum.horizon=120`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; overrides the environment variable and the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for solver and certificate sampling; overrides `seed` in the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve, certify, and write every artifact.
    Solve(Common),
    /// Certify a stored solution (or a fresh one) and write `certificate.txt`.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Directory holding `trajectory.csv` and `multipliers.csv`.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Compare the constrained solution with the solve-then-filter baseline.
    FilterCompare(Common),
    /// Write spectra and phase data for a stored (or fresh) trajectory.
    Export {
        #[command(flatten)]
        common: Common,
        /// Directory holding `trajectory.csv`.
        #[arg(long)]
        from: Option<PathBuf>,
    },
}

/// Failure classes, each with its own exit status.
#[derive(Debug)]
enum Failure {
    Config(String),
    Solver(String),
    Certificate,
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Certificate => 3,
            Failure::Config(_) => 4,
        }
    }
}

fn solver_failure(e: Error) -> Failure {
    match e {
        Error::NotConverged { .. } | Error::Infeasible(_) => Failure::Solver(e.to_string()),
        Error::InvalidProblem(_) | Error::AsymmetricBins { .. } | Error::ModelConsistency(_) => {
            Failure::Config(e.to_string())
        }
        e => Failure::Other(e.to_string()),
    }
}

struct Run {
    cfg: RunConfig,
    spec: ProblemSpec,
    out: PathBuf,
}

impl Run {
    fn setup(common: &Common) -> Result<Self, Failure> {
        let text = match &common.config {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?),
            None => None,
        };
        let mut cfg = RunConfig::resolve(text.as_deref(), &common.overrides).map_err(Failure::Config)?;
        if let Some(m) = common.model {
            cfg.model = m;
        }
        let seed = common.seed.unwrap_or(cfg.seed);
        let cfg = cfg.with_seed(seed);
        let spec = cfg.build_problem().map_err(Failure::Config)?;
        let out = common
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| cfg.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("fcpmp-out"));
        std::fs::create_dir_all(&out).map_err(|e| Failure::Other(format!("{}: {e}", out.display())))?;
        Ok(Self { cfg, spec, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn solve(&self, timings: &mut Timings) -> Result<Solution, Failure> {
        let start = Instant::now();
        let sol = solve(&self.spec, &self.cfg.solver).map_err(solver_failure)?;
        timings.solve_seconds = Some(start.elapsed().as_secs_f64());
        Ok(sol)
    }

    fn certify(&self, sol: &Solution, timings: &mut Timings) -> Result<CertificateReport, Failure> {
        let start = Instant::now();
        let report = certify(&self.spec, sol, &self.cfg.certificate).map_err(|e| Failure::Other(e.to_string()))?;
        timings.certify_seconds = Some(start.elapsed().as_secs_f64());
        artifacts::write_text(&self.path("certificate.txt"), &report.to_text()).map_err(Failure::Other)?;
        Ok(report)
    }

    /// Read `trajectory.csv` and `multipliers.csv` from `dir` into a solution of this problem.
    fn import(&self, dir: &Path) -> Result<Solution, Failure> {
        let trajectory = artifacts::read_trajectory(&dir.join("trajectory.csv")).map_err(Failure::Config)?;
        let template = fcpmp::lift::Multipliers::zeros(&self.spec);
        let multipliers =
            artifacts::read_multipliers(&dir.join("multipliers.csv"), &template).map_err(Failure::Config)?;
        let objective = total_cost(&self.spec, &trajectory).map_err(|e| Failure::Config(e.to_string()))?;
        Ok(Solution {
            trajectory,
            multipliers,
            objective,
            diagnostics: Diagnostics {
                method: "imported".into(),
                ..Diagnostics::default()
            },
        })
    }

    fn write_data(&self, traj: &fcpmp::Trajectory) -> Result<(), Failure> {
        artifacts::write_spectrum(&self.path("spectrum_u.csv"), &traj.controls).map_err(Failure::Other)?;
        artifacts::write_spectrum(&self.path("spectrum_x.csv"), &traj.states).map_err(Failure::Other)?;
        artifacts::write_phase(&self.path("phase.csv"), traj, self.cfg.phase_pair()).map_err(Failure::Other)
    }

    fn summary<'a>(
        &'a self,
        command: &'a str,
        sol: &'a Solution,
        report: Option<&CertificateReport>,
    ) -> Result<Summary<'a>, Failure> {
        Ok(Summary {
            command,
            model: self.cfg.model,
            seed: self.cfg.seed,
            horizon: self.spec.horizon,
            state_dim: self.spec.state_dim,
            control_dim: self.spec.control_dim,
            lifted_dim: self.spec.lifted_dim(),
            objective: sol.objective,
            solver: &sol.diagnostics,
            trajectory: trajectory_report(&self.spec, &sol.trajectory).map_err(|e| Failure::Other(e.to_string()))?,
            certificate: report.map(CertificateSummary::from),
            config: &self.cfg,
        })
    }
}

#[derive(Default, Serialize)]
struct Timings {
    solve_seconds: Option<f64>,
    certify_seconds: Option<f64>,
}

#[derive(Serialize)]
struct RecordSummary {
    name: String,
    passed: bool,
    residual: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct CertificateSummary {
    passed: bool,
    records: Vec<RecordSummary>,
}

impl From<&CertificateReport> for CertificateSummary {
    fn from(r: &CertificateReport) -> Self {
        Self {
            passed: r.passed,
            records: r
                .records
                .iter()
                .map(|c| RecordSummary {
                    name: c.name.clone(),
                    passed: c.passed,
                    residual: c.residual,
                    tolerance: c.tolerance,
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    model: Model,
    seed: u64,
    horizon: usize,
    state_dim: usize,
    control_dim: usize,
    lifted_dim: usize,
    objective: f64,
    solver: &'a Diagnostics,
    trajectory: TrajectoryReport,
    certificate: Option<CertificateSummary>,
    config: &'a RunConfig,
}

fn finish(run: &Run, summary: &Summary, timings: &Timings) -> Result<(), Failure> {
    artifacts::write_json(&run.path("summary.json"), summary).map_err(Failure::Other)?;
    artifacts::write_json(&run.path("timings.json"), timings).map_err(Failure::Other)
}

fn print_report(report: &CertificateReport) {
    for r in &report.records {
        let verdict = if r.passed { "pass" } else { "FAIL" };
        println!(
            "{:<22} {verdict}  residual {:.3e}  tolerance {:.1e}",
            r.name, r.residual, r.tolerance
        );
    }
}

fn cmd_solve(common: &Common) -> Result<(), Failure> {
    let run = Run::setup(common)?;
    let mut timings = Timings::default();
    let sol = run.solve(&mut timings)?;
    let report = run.certify(&sol, &mut timings)?;
    artifacts::write_trajectory(&run.path("trajectory.csv"), &sol.trajectory).map_err(Failure::Other)?;
    artifacts::write_multipliers(&run.path("multipliers.csv"), &sol.multipliers).map_err(Failure::Other)?;
    run.write_data(&sol.trajectory)?;
    finish(&run, &run.summary("solve", &sol, Some(&report))?, &timings)?;
    println!("objective {:.10e} ({})", sol.objective, sol.diagnostics.method);
    print_report(&report);
    println!("artifacts written to {}", run.out.display());
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Certificate)
    }
}

fn cmd_certify(common: &Common, from: Option<&Path>) -> Result<(), Failure> {
    let run = Run::setup(common)?;
    let mut timings = Timings::default();
    let sol = match from {
        Some(dir) => run.import(dir)?,
        None => run.solve(&mut timings)?,
    };
    let report = run.certify(&sol, &mut timings)?;
    finish(&run, &run.summary("certify", &sol, Some(&report))?, &timings)?;
    print_report(&report);
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Certificate)
    }
}

fn banned_control_bins(cfg: &RunConfig) -> Option<BannedBinSet> {
    match cfg.model {
        Model::Pendulum => Some(cfg.pendulum.banned_bins()),
        Model::CustomLinear if !cfg.custom_linear.banned_control_bins.is_empty() => {
            let m = cfg.custom_linear.b.first().map_or(0, Vec::len);
            let bins = cfg.custom_linear.banned_control_bins.iter().copied();
            Some(BannedBinSet::uniform(cfg.custom_linear.horizon, m, bins))
        }
        _ => None,
    }
}

fn cmd_filter_compare(common: &Common) -> Result<(), Failure> {
    let run = Run::setup(common)?;
    let banned = banned_control_bins(&run.cfg)
        .ok_or_else(|| Failure::Config("filter-compare needs a model with banned control bins".into()))?;
    let mut timings = Timings::default();
    let sol = run.solve(&mut timings)?;
    let baseline = filter_baseline(&run.spec, &banned, &run.cfg.solver).map_err(solver_failure)?;
    let pmp = trajectory_report(&run.spec, &sol.trajectory).map_err(|e| Failure::Other(e.to_string()))?;
    let filt = &baseline.filtered_report;
    let rows = [
        ("max_abs_u", pmp.max_abs_control, filt.max_abs_control),
        (
            "control_bound_violation",
            pmp.control_set_violation,
            filt.control_set_violation,
        ),
        ("terminal_miss", pmp.terminal_miss, filt.terminal_miss),
        ("worst_state_slack", pmp.worst_state_slack, filt.worst_state_slack),
    ];
    artifacts::write_comparison(&run.path("comparison.csv"), &rows).map_err(Failure::Other)?;
    artifacts::write_trajectory(&run.path("trajectory.csv"), &sol.trajectory).map_err(Failure::Other)?;
    artifacts::write_trajectory(&run.path("filtered_trajectory.csv"), &baseline.filtered).map_err(Failure::Other)?;
    finish(&run, &run.summary("filter-compare", &sol, None)?, &timings)?;
    println!("{:<24} {:>24} {:>24}", "metric", "pmp", "filtered");
    for (k, a, b) in rows {
        println!("{k:<24} {a:>24.6e} {b:>24.6e}");
    }
    Ok(())
}

fn cmd_export(common: &Common, from: Option<&Path>) -> Result<(), Failure> {
    let run = Run::setup(common)?;
    let traj = match from {
        Some(dir) => artifacts::read_trajectory(&dir.join("trajectory.csv")).map_err(Failure::Config)?,
        None => {
            let sol = run.solve(&mut Timings::default())?;
            artifacts::write_trajectory(&run.path("trajectory.csv"), &sol.trajectory).map_err(Failure::Other)?;
            sol.trajectory
        }
    };
    run.write_data(&traj)?;
    println!("spectra and phase data written to {}", run.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(c) => cmd_solve(c),
        Command::Certify { common, from } => cmd_certify(common, from.as_deref()),
        Command::FilterCompare(c) => cmd_filter_compare(c),
        Command::Export { common, from } => cmd_export(common, from.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(msg) => eprintln!("config error: {msg}"),
                Failure::Solver(msg) => eprintln!("solver error: {msg}"),
                Failure::Certificate => eprintln!("certificate failed"),
                Failure::Other(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
