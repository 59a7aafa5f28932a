use std::path::PathBuf;
use std::process::ExitCode;

use chimera_core::experiment::{exit_code, run, ExperimentConfig, FigurePreset, Overrides, WORKERS_ENV};
use chimera_core::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chimera", version, about = "Run weak-chimera experiments and write their artifacts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a trajectory and write phases, order parameters and the co-rotating frame.
    Simulate(Common),
    /// Maximal Lyapunov exponent with its convergence history.
    Lyapunov(Common),
    /// Lyapunov exponent and frequency ranges over a grid of coupling strengths.
    Sweep(Common),
    /// Frequency report and weak-chimera verdict for an ensemble.
    Classify(Common),
    /// Absorbing-region margin and admissible perturbation size.
    Bounds(Common),
    /// Run a figure preset.
    Figure {
        /// One of fig1, fig2, fig3a, fig3b, fig4a, fig4b.
        id: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's output_dir, else ./out/<job>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps; 0 uses all cores.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Override the coupling strength (a sweep is reduced to this single value).
    #[arg(long)]
    eps: Option<f64>,
    /// Override the integration time.
    #[arg(long)]
    duration: Option<f64>,
}

fn load(job: &str, common: &Common, preset: Option<FigurePreset>) -> Result<ExperimentConfig, Error> {
    let base = match (&common.config, preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        (None, Some(p)) => p.config(common.seed.unwrap_or(0)),
        (None, None) => return Err(Error::Config(format!("{job} needs --config"))),
    };
    if preset.is_none() && base.job.name() != job {
        return Err(Error::Config(format!(
            "config describes a {} job, not {job}",
            base.job.name()
        )));
    }
    let ov = Overrides {
        seed: common.seed,
        eps: common.eps,
        duration: common.duration,
        workers: common.workers,
    };
    base.resolve(&ov)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common, preset) = match &cli.command {
        Command::Simulate(c) => ("simulate", c, None),
        Command::Lyapunov(c) => ("lyapunov", c, None),
        Command::Sweep(c) => ("sweep", c, None),
        Command::Classify(c) => ("classify", c, None),
        Command::Bounds(c) => ("bounds", c, None),
        Command::Figure { id, common } => match id.parse::<FigurePreset>() {
            Ok(p) => ("figure", common, Some(p)),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
    };
    let cfg = match load(name, common, preset) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    let default_dir = match (preset, &cfg.job) {
        (Some(p), _) => PathBuf::from("out").join(p.id()),
        (None, job) => PathBuf::from("out").join(job.name()),
    };
    let out = common.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or(default_dir);
    match run(&cfg, &out) {
        Ok(outcome) => {
            for f in &outcome.manifest.files {
                println!("{}  {}", f.sha256, out.join(&f.path).display());
            }
            match outcome.failure {
                None => ExitCode::SUCCESS,
                Some(e) => {
                    eprintln!("error: sweep incomplete: {e}");
                    ExitCode::from(exit_code(&e) as u8)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
