//! `formation`: plan, replay and check formation scenarios.
//!
//! Exit codes: 0 success, 1 configuration or assumption error, 2 safety
//! gate failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use formation_core::export::{write_run_outputs, OutputFormat};
use formation_core::scenario::Scenario;
use formation_core::sim::RunSummary;
use formation_core::{check_eigenvalues, contains_leader, polar_decompose, run, verify, Error, RunConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_UNSAFE: u8 = 2;

#[derive(Parser)]
#[command(name = "formation", version, about = "Affine formation planner and replay tool")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the planned Jacobian and its strain at one instant.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        /// Time in seconds.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        at: f64,
    },
    /// Replay the scenario and write trajectory, safety and summary files.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Abort at the first unsafe timestep.
        #[arg(long)]
        strict: bool,
    },
    /// Run the property checks on a scenario.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan { scenario, at } => cmd_plan(&scenario, at),
        Command::Run {
            scenario,
            out,
            format,
            strict,
        } => cmd_run(&scenario, &out, format.into(), strict),
        Command::Verify { scenario } => cmd_verify(&scenario),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_configuration() { EXIT_CONFIG } else { EXIT_UNSAFE })
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, Error> {
    Scenario::load(path)?.run_config()
}

fn cmd_plan(path: &Path, t: f64) -> Result<u8, Error> {
    if !t.is_finite() {
        return Err(Error::InvalidConfig(format!("--at must be finite, got {t}")));
    }
    let cfg = load(path)?;
    let q = cfg.mission.jacobian_at(t)?;
    let dec = polar_decompose(&q)?;
    let bp = cfg.mission.boundary_at(t);
    let contained = contains_leader(&cfg.mission.formation_at(t)?).unwrap_or(false);
    let gate = check_eigenvalues(&dec, &cfg.safety);

    println!("t = {t} s");
    println!(
        "boundary: l2 = {:.6} m, l3 = {:.6} m, theta2 = {:.6} rad, theta3 = {:.6} rad",
        bp.l_2, bp.l_3, bp.theta_2, bp.theta_3
    );
    println!("Q = [[{:.6}, {:.6}],", q.q11, q.q12);
    println!("     [{:.6}, {:.6}]]", q.q21, q.q22);
    println!("psi_r    = {:.6} rad", dec.psi_r);
    println!("lambda_1 = {:.6}", dec.lambda_1);
    println!("lambda_2 = {:.6}", dec.lambda_2);
    println!("psi_d    = {:.6} rad", dec.psi_d);
    println!("leader inside boundary triangle: {}", if contained { "yes" } else { "no" });
    if gate {
        println!("verdict: SAFE (lambda_2 >= lambda_min = {})", cfg.safety.lambda_min);
        Ok(0)
    } else {
        println!("verdict: UNSAFE (lambda_2 < lambda_min = {})", cfg.safety.lambda_min);
        Ok(EXIT_UNSAFE)
    }
}

fn cmd_run(path: &Path, out: &Path, format: OutputFormat, strict: bool) -> Result<u8, Error> {
    let mut cfg = load(path)?;
    cfg.strict |= strict;
    let log = run(&cfg)?;
    let files = write_run_outputs(&log, out, format)?;
    let summary = log.summary();
    print_summary(&summary, &cfg);
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(if summary.violation_steps == 0 { 0 } else { EXIT_UNSAFE })
}

fn print_summary(s: &RunSummary, cfg: &RunConfig) {
    let mark = |ok: bool| if ok { "ok" } else { "VIOLATED" };
    println!("mode: {}, steps: {}, dt: {} s", s.mode.name(), s.steps, cfg.dt);
    println!("safety");
    println!(
        "  min lambda_2            {:.6}  (lambda_min {})  {}",
        s.min_lambda_2,
        cfg.safety.lambda_min,
        mark(s.min_lambda_2 >= cfg.safety.lambda_min)
    );
    println!(
        "  containment fraction    {:.6}  {}",
        s.containment_fraction,
        mark(s.containment_fraction == 1.0)
    );
    println!(
        "  min pairwise distance   {:.6} m  (min_separation {} m)  {}",
        s.min_pairwise_distance,
        cfg.safety.min_separation,
        mark(s.min_pairwise_distance >= cfg.safety.min_separation)
    );
    if let Some(c) = s.corridor_fraction {
        println!("  corridor clearance      {:.6}  {}", c, mark(c == 1.0));
    }
    match s.first_violation_time {
        Some(t) => println!("  unsafe steps            {} (first at t = {t:.3} s)", s.violation_steps),
        None => println!("  unsafe steps            0"),
    }
    println!("tracking");
    println!("  max tracking error      {:.6} m", s.max_tracking_error);
}

fn cmd_verify(path: &Path) -> Result<u8, Error> {
    let cfg = load(path)?;
    let report = verify(&cfg)?;
    for c in &report.checks {
        println!("{c}");
    }
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        println!("all {} checks passed", report.checks.len());
        return Ok(0);
    }
    println!("failed: {}", failed.join(", "));
    Ok(if failed.contains(&"stability") { EXIT_CONFIG } else { EXIT_UNSAFE })
}
