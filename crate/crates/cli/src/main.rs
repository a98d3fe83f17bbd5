use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use teamtrack::commands::{self, Console, SynthSource};
use teamtrack::config::RunConfig;
use teamtrack::{CliResult, Failure};

#[derive(Parser)]
#[command(name = "teamtrack", version, about = "Team-aware player tracking on synthetic football scenes")]
struct Cli {
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene to PPM frames plus ground truth.
    Synth {
        /// Built-in scene: light, heavy or longterm.
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        preset: Option<String>,
        /// Scenario description in JSON.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Track the prompted players of a run configuration.
    Track {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Score a track log against ground truth.
    Eval {
        /// Path to track.jsonl; events.jsonl and run.json are read from the same directory.
        log: PathBuf,
        /// Path to gt.jsonl.
        gt: PathBuf,
        /// Report path; defaults to report.json next to the log.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in scene end to end and check its criteria.
    Repro {
        /// light, heavy or longterm.
        scenario: String,
        /// Working directory; defaults to runs/<scenario>.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let console = Console { quiet: cli.quiet };
    match cli.command {
        Command::Synth { preset, spec, out } => {
            let source = match (preset, spec) {
                (Some(p), _) => SynthSource::Preset(p),
                (None, Some(s)) => SynthSource::Spec(s),
                (None, None) => unreachable!("clap requires one source"),
            };
            commands::synth(&source, &out, console).map(|_| ())
        }
        Command::Track { config, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(out) = out {
                cfg.output = out;
            }
            commands::track(&cfg, console).map(|_| ())
        }
        Command::Eval { log, gt, out } => {
            let out = out.unwrap_or_else(|| commands::default_report_path(&log));
            commands::eval(&log, &gt, &out, console).map(|_| ())
        }
        Command::Repro { scenario, out } => {
            let out = out.unwrap_or_else(|| PathBuf::from("runs").join(&scenario));
            let outcome = commands::repro(&scenario, &out, console)?;
            commands::repro_exit(&outcome)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => report(failure),
    }
}

fn report(failure: Failure) -> ExitCode {
    eprintln!("error: {failure}");
    failure.exit_code()
}
