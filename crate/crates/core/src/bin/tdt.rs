use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tdt::cli::{self, GlobalOpts};
use tdt::Result;

/// Build and run targeted digital twins.
#[derive(Parser)]
#[command(name = "tdt", version)]
struct Args {
    /// JSON config (generation or training, depending on the subcommand).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Validate and report the plan without computing.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Worker threads for full-DT generation.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Config override, `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full DT and write trajectory and burst dataset files.
    Generate,
    /// Train a flow map on a dataset file.
    Train {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Predict from an initial window CSV of n_M + 1 rows.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        window: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare a prediction CSV with a reference CSV.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Columns are Fourier coefficients (a0, a1..aN, b1..bN).
        #[arg(long)]
        fourier: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Ranked spectral peaks of a series CSV.
    Spectrum {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        column: Option<String>,
        #[arg(long, default_value_t = 4)]
        top: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a config and file headers without writing anything.
    Validate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
}

fn run(args: Args) -> Result<()> {
    let opts = GlobalOpts {
        config: args.config,
        seed: args.seed,
        dry_run: args.dry_run,
        workers: args.workers,
        out: args.out,
        overrides: args
            .overrides
            .iter()
            .map(|s| cli::parse_override(s))
            .collect::<Result<_>>()?,
    };
    match args.command {
        Command::Generate => println!("{}", cli::cmd_generate(&opts)?),
        Command::Train { dataset } => println!("{}", cli::cmd_train(&opts, &dataset)?),
        Command::Predict { model, window, horizon, output } => {
            let out = cli::output_path(&opts, output.as_deref(), cli::PREDICTION_FILE);
            let t = cli::cmd_predict(&model, &window, horizon, &out)?;
            println!(
                "{} rows, t = {} .. {} -> {}",
                t.len(),
                t.t.first().unwrap_or(&0.0),
                t.t.last().unwrap_or(&0.0),
                out.display()
            );
        }
        Command::Evaluate { pred, reference, fourier, output } => {
            let out = cli::output_path(&opts, output.as_deref(), cli::METRICS_FILE);
            let m = cli::cmd_evaluate(&pred, &reference, fourier, &out)?;
            for c in &m.components {
                println!("{}: rms {:e}, max {:e}", c.name, c.rms, c.max_abs);
            }
            if let Some(s) = &m.l2_surface {
                println!("e2: mean {:e}, max {:e}", s.e2_mean, s.e2_max);
            }
        }
        Command::Spectrum { input, column, top, output } => {
            let out = cli::output_path(&opts, output.as_deref(), cli::SPECTRUM_FILE);
            for c in cli::cmd_spectrum(&input, column.as_deref(), top, &out)? {
                let f: Vec<String> = c.peaks.iter().map(|p| format!("{:.4}", p.frequency)).collect();
                println!("{}: {}", c.name, f.join(" "));
            }
        }
        Command::Validate { dataset, model, trajectories } => {
            for line in cli::cmd_validate(&opts, dataset.as_deref(), model.as_deref(), trajectories.as_deref())? {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
