//! Command-line front end: declarative scenarios in, deterministic JSON and
//! CSV out.
//!
//! Exit codes: 0 when every check passes, 2 for unreadable input, 3 for
//! scenarios that parse but do not validate, 4 for numerical failures.

pub mod error;
pub mod model;
pub mod run;
pub mod scenario;
pub mod sweep;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use ptqm_core::golden;
use ptqm_core::io::to_json_string;
use ptqm_core::Tolerances;

pub use error::{CliError, EXIT_NUMERIC, EXIT_OK, EXIT_PARSE, EXIT_VALIDATION};
use scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "ptqm", version, about = "Geometric phases and tensors for PT-symmetric quantum mechanics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Directory for all written files.
    #[arg(long, global = true, default_value = "ptqm-out")]
    pub out_dir: PathBuf,

    /// Seed for the random-state checks; overrides the scenario's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads.
    #[arg(long, global = true, env = "PTQM_THREADS")]
    pub threads: Option<usize>,

    /// Multiply every tolerance by this factor.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tol_scale: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write its result bundle.
    Run { config: PathBuf },
    /// Repeat a scenario over values of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        vary: String,
        /// Comma-separated values; may be empty.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Parse and validate a scenario without running it.
    Validate { config: PathBuf },
    /// Run the built-in acceptance suite.
    Golden {
        /// Restrict to these criteria (1 to 11).
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    execute(&cli)
}

pub fn execute(cli: &Cli) -> i32 {
    let started = Instant::now();
    let result = thread_pool(cli.threads).and_then(|pool| pool.install(|| dispatch(cli)));
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Numeric { residuals, .. } = &e {
                eprint!("{}", error::residual_table(residuals));
            }
            e.exit_code()
        }
    };
    eprintln!("wall time: {:.3} s", started.elapsed().as_secs_f64());
    code
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Io(format!("cannot start worker threads: {e}")))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn check_scale(cli: &Cli) -> Result<(), CliError> {
    if cli.tol_scale.is_finite() && cli.tol_scale > 0.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!("--tol-scale must be positive, got {}", cli.tol_scale)))
    }
}

/// Parse, then apply the command-line overrides.
fn load(cli: &Cli, path: &Path) -> Result<Scenario, CliError> {
    let mut s = scenario::parse(&read(path)?)?;
    check_scale(cli)?;
    s.run.tolerances = s.run.tolerances.scaled(cli.tol_scale);
    if cli.seed.is_some() {
        s.seed = cli.seed;
    }
    Ok(s)
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Validate { config } => {
            let s = load(cli, config)?;
            s.validate(&cli.out_dir)?;
            println!("{}: valid ({} model, {} path, {} outputs)", config.display(), s.model.name, s.path.type_name(), s.outputs.len());
            Ok(EXIT_OK)
        }
        Command::Run { config } => run_command(cli, config),
        Command::Sweep { config, vary, values } => sweep_command(cli, config, vary, values),
        Command::Golden { criteria } => golden_command(cli, criteria),
    }
}

fn run_command(cli: &Cli, config: &Path) -> Result<i32, CliError> {
    let s = load(cli, config)?;
    s.validate(&cli.out_dir)?;
    log::info!("running {} with {} steps", s.model.name, s.run.steps);
    let bundle = run::compute(&s)?;
    let files = run::render_outputs(&bundle);
    run::write_files(&cli.out_dir, &files)?;
    let report = &bundle.phases.report;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "alpha = {:.12}  beta = {:.12}  gamma = {:.12}",
        report.alpha, report.beta, report.gamma
    );
    for (name, _) in &files {
        let _ = writeln!(stdout, "wrote {}", cli.out_dir.join(name).display());
    }
    if bundle.pass {
        let _ = writeln!(stdout, "all {} checks pass", bundle.residuals.len());
        Ok(EXIT_OK)
    } else {
        eprintln!("numerical consistency failure:");
        eprint!("{}", error::residual_table(&bundle.residuals));
        Ok(EXIT_NUMERIC)
    }
}

fn sweep_command(cli: &Cli, config: &Path, vary: &str, values: &str) -> Result<i32, CliError> {
    let text = read(config)?;
    let mut base = scenario::parse_value(&text)?;
    let mut s = scenario::parse(&text)?;
    check_scale(cli)?;
    s.run.tolerances = s.run.tolerances.scaled(cli.tol_scale);
    if cli.seed.is_some() {
        s.seed = cli.seed;
    }
    base["run"] = serde_json::to_value(&s.run).expect("run settings serialize");
    if let Some(seed) = s.seed {
        base["seed"] = seed.into();
    }
    let values = sweep::parse_values(values)?;
    let rows = sweep::sweep(&base, vary, &values, &cli.out_dir)?;
    let table = sweep::table(vary, &rows);
    let name = sweep::file_name(vary);
    run::write_files(&cli.out_dir, &[(name.clone(), table.clone())])?;
    print!("{table}");
    let failed = rows.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        eprintln!("{failed} of {} sweep rows failed", rows.len());
        for r in rows.iter().filter(|r| !r.passed()) {
            match &r.outcome {
                Ok(b) => {
                    eprintln!("row {}:", r.value);
                    eprint!("{}", error::residual_table(&b.residuals));
                }
                Err(e) => eprintln!("row {}: {e}", r.value),
            }
        }
        return Ok(EXIT_NUMERIC);
    }
    Ok(EXIT_OK)
}

fn golden_command(cli: &Cli, criteria: &[u8]) -> Result<i32, CliError> {
    check_scale(cli)?;
    let tol = Tolerances::default().scaled(cli.tol_scale);
    let ids: Vec<u8> = if criteria.is_empty() { (1..=11).collect() } else { criteria.to_vec() };
    if let Some(bad) = ids.iter().find(|&&id| !(1..=11).contains(&id)) {
        return Err(CliError::Validation(format!("no criterion {bad}; criteria are numbered 1 to 11")));
    }
    let mut outcomes = Vec::new();
    for id in ids {
        let o = golden::run_criterion(id, &tol);
        println!("{o}");
        outcomes.push(o);
    }
    run::write_files(&cli.out_dir, &[("golden.json".to_string(), to_json_string(&outcomes))])?;
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("{} of {} criteria pass", outcomes.len() - failed, outcomes.len());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_NUMERIC })
}
