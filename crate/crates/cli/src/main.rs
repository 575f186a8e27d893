//! `nlp`: runs the verification suites from a TOML scenario.
//!
//! Exit status: 0 when every report passes (expected failures included),
//! 1 when a check fails, 2 for usage, configuration or setup errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nlp_core::config::ScenarioConfig;
use nlp_core::exec;
use nlp_core::field::io::{field_info, write_trajectory};
use nlp_core::report::{write_reports, VerificationReport};
use nlp_core::suites::{run_equivalence_suite, Suite};
use nlp_core::Error;

#[derive(Parser)]
#[command(name = "nlp", version, about = "Verification suites for the local pressure expansion and mild solutions")]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true, env = "NLP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Report directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one check suite: kernel, riesz, pressure, semigroup or mollify.
    Check {
        suite: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Mild against distributional formulation on the Picard solution.
    Equivalence {
        #[command(flatten)]
        run: RunArgs,
        /// Nodes per axis of the base grid, overriding the config.
        #[arg(long)]
        grid: Option<usize>,
        /// Also write the velocity trajectory and pressure as field files.
        #[arg(long)]
        dump_fields: bool,
    },
    /// Inspect field files.
    Field {
        #[command(subcommand)]
        command: FieldCommand,
    },
}

#[derive(Subcommand)]
enum FieldCommand {
    /// Print the header and value range of a field file.
    Info { file: PathBuf },
}

enum Failure {
    Checks,
    Setup(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Setup(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    exec::configure_threads(threads);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Setup(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::NoConvergence { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Check { suite, run } => {
            let suite: Suite = suite.parse()?;
            let cfg = ScenarioConfig::load(&run.config)?;
            let start = Instant::now();
            let reports = suite.run(&cfg)?;
            finish(&reports, &out_dir(&run, &cfg), suite.name(), start)
        }
        Command::Equivalence { run, grid, dump_fields } => {
            let mut cfg = ScenarioConfig::load(&run.config)?;
            if let Some(n) = grid {
                cfg.grid.n = n;
                cfg.validate()?;
            }
            let dir = out_dir(&run, &cfg);
            let start = Instant::now();
            let result = run_equivalence_suite(&cfg)?;
            if dump_fields {
                let fields = dir.join("fields");
                let manifest = write_trajectory(&fields, "velocity", &result.velocity)?;
                let sidecar = result.pressure.write(&fields, "lpe")?;
                println!("fields: {} {}", manifest.display(), sidecar.display());
            }
            finish(&result.reports, &dir, "equivalence", start)
        }
        Command::Field { command: FieldCommand::Info { file } } => {
            let info = field_info(&file)?;
            let h = &info.header;
            println!("format     {} v{}", h.format, h.version);
            println!("rank       {:?} ({} components)", h.rank, h.rank.components());
            println!("counts     {:?}", h.spec.counts);
            println!("origin     {:?}", h.spec.origin);
            println!("spacing    {}", h.spec.spacing);
            match h.spec.time {
                Some(t) => println!("time       {} steps from {} by {}", t.nt, t.t0, t.dt),
                None => println!("time       static"),
            }
            println!("samples    {}", h.sample_count());
            println!("range      [{:e}, {:e}]", info.min, info.max);
            println!("max |v|    {:e}", info.max_magnitude);
            println!("finite     {}", info.finite);
            Ok(())
        }
    }
}

fn out_dir(run: &RunArgs, cfg: &ScenarioConfig) -> PathBuf {
    run.out.clone().unwrap_or_else(|| cfg.output_dir.clone())
}

fn finish(reports: &[VerificationReport], dir: &Path, stem: &str, start: Instant) -> Result<(), Failure> {
    for r in reports {
        println!("{:<36} {:>13.6e} {:>13.6e}  {}", r.name, r.value, r.bound, r.status.label());
    }
    write_reports(dir, stem, reports)?;
    let failed = reports.iter().filter(|r| !r.acceptable()).count();
    println!(
        "{} reports, {} failed, {:.1}s on {} thread(s); wrote {}",
        reports.len(),
        failed,
        start.elapsed().as_secs_f64(),
        exec::threads(),
        dir.join(format!("{stem}.csv")).display()
    );
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}
