use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dgfric::cli_io::{self, exit_code, RunConfig};
use dgfric::Result;

/// Adaptive LDG solver for the scalar Tresca friction problem.
///
/// Settings come from the TOML file given by --config, then from
/// DGFRIC_<SECTION>_<KEY> environment variables (e.g. DGFRIC_SOLVER_TOL=1e-9),
/// then from the flags below.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Mesh file (`dgmesh 1` format) replacing the benchmark mesh.
    #[arg(long, global = true)]
    mesh: Option<PathBuf>,

    /// Built-in problem: stick, slip, lshape or affine.
    #[arg(long, global = true)]
    benchmark: Option<String>,

    /// Bulk marking parameter in (0, 1).
    #[arg(long, global = true)]
    theta: Option<f64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve once and write VTK plus a summary.
    Solve,
    /// Run the adaptive loop.
    Afem,
    /// Uniform refinement study written as CSV.
    Study,
    /// Numerical checks of the estimator's analytical ingredients.
    Verify,
    /// Print statistics of the starting mesh.
    MeshInfo,
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(m) = &cli.mesh {
        cfg.problem.mesh = Some(m.clone());
    }
    if let Some(b) = &cli.benchmark {
        cfg.problem.benchmark = b.clone();
    }
    if let Some(t) = cli.theta {
        cfg.afem.theta = t;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(n) = cli.threads {
        cfg.output.threads = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = resolve(cli)?;
    cli_io::configure_threads(cfg.output.threads);
    let stdout = std::io::stdout();
    let mut log = stdout.lock();
    let ok = match cli.command {
        Command::Solve => cli_io::run_solve(&cfg, &mut log).map(|_| true)?,
        Command::Afem => cli_io::run_afem(&cfg, &mut log).map(|_| true)?,
        Command::Study => cli_io::run_study(&cfg, &mut log).map(|_| true)?,
        Command::Verify => cli_io::run_verify(&cfg, &mut log)?.iter().all(|c| c.passed),
        Command::MeshInfo => cli_io::run_mesh_info(&cfg, &mut log).map(|_| true)?,
    };
    log.flush()?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
