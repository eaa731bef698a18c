use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use pbrnn::assessment::DEFAULT_MIN_PER_STRATUM;
use pbrnn::commands::{self, AssessInput};
use pbrnn::config::{Mode, RunConfig};
use pbrnn::error::Result;
use pbrnn::raster::MaskPolicy;

#[derive(Parser, Debug)]
#[command(name = "pbrnn", version, about = "Patch-based recurrent land-cover classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic multi-temporal site with ground truth
    Synth {
        /// Key-value spec file; defaults apply to unspecified keys
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory for scenes, manifest and truth map
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Convert every scene of a manifest to TOA reflectance caches
    Import {
        #[arg(long)]
        manifest: PathBuf,
        /// Treat snow pixels as contaminated too
        #[arg(long)]
        snow_is_contaminated: bool,
    },
    /// Extract the configured mode's samples into a sample cache
    MakeSamples {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's mode
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the holdout samples here
        #[arg(long)]
        holdout_out: Option<PathBuf>,
    },
    /// Train the configured mode; writes a checkpoint and loss log
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        /// Train on this sample cache instead of extracting samples
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Classify a whole series with a checkpoint
    Classify {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Label map output (`.raw`, with a `.txt` sidecar)
        #[arg(long)]
        out: PathBuf,
        /// Color preview as a binary PPM
        #[arg(long)]
        preview: Option<PathBuf>,
    },
    /// Accuracy assessment by stratified sampling, or of a given matrix
    Assess {
        #[arg(long, required_unless_present = "matrix")]
        classified: Option<PathBuf>,
        #[arg(long, required_unless_present = "matrix")]
        reference: Option<PathBuf>,
        /// Read the error matrix from this CSV instead of sampling maps
        #[arg(long, conflicts_with_all = ["classified", "reference"])]
        matrix: Option<PathBuf>,
        /// Total sample size spread by stratum area
        #[arg(long)]
        total: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MIN_PER_STRATUM)]
        min_per_stratum: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "Error matrix")]
        title: String,
    },
    /// Recompute the bundled published error matrices and diff the statistics
    VerifyTables,
    /// Train and assess all six systems on one split; writes a summary table
    CompareAll {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &PathBuf, mode: Option<Mode>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(m) = mode {
        cfg.mode = m;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { spec, out, seed } => {
            let o = commands::synth(spec.as_deref(), &out, seed)?;
            println!("{} scenes, manifest {}", o.scenes, o.manifest.display());
            println!("ground truth {}", o.truth.display());
            println!("run configuration {}", o.config.display());
        }
        Command::Import {
            manifest,
            snow_is_contaminated,
        } => {
            for s in commands::import(&manifest, MaskPolicy { snow_is_contaminated })? {
                println!("{}\t{}\t{} contaminated pixels", s.scene_id, s.dir.display(), s.contaminated);
            }
        }
        Command::MakeSamples {
            config,
            mode,
            out,
            holdout_out,
        } => {
            let cfg = load_config(&config, mode)?;
            let o = commands::make_samples(&cfg, &out, holdout_out.as_deref())?;
            println!(
                "{} training samples ({} holdout) of {}x{}",
                o.train, o.holdout, o.seq_len, o.input_dim
            );
        }
        Command::Train { config, mode, samples } => {
            let cfg = load_config(&config, mode)?;
            let o = commands::train(&cfg, samples.as_deref())?;
            println!("checkpoint {}", o.checkpoint.display());
            println!("loss log {}", o.loss_log.display());
            println!("final mean loss {:.6}", o.final_loss);
            if let Some(a) = o.holdout_accuracy {
                println!("holdout accuracy {:.2}%", 100.0 * a);
            }
        }
        Command::Classify {
            checkpoint,
            manifest,
            out,
            preview,
        } => {
            let map = commands::classify(&checkpoint, &manifest, &out, preview.as_deref())?;
            println!("{}x{} map written to {}", map.width, map.height, out.display());
        }
        Command::Assess {
            classified,
            reference,
            matrix,
            total,
            min_per_stratum,
            seed,
            out,
            title,
        } => {
            let input = match matrix {
                Some(m) => AssessInput::Matrix(m),
                None => AssessInput::Maps {
                    classified: classified.expect("required by clap"),
                    reference: reference.expect("required by clap"),
                    total,
                    min_per_stratum,
                    seed,
                },
            };
            let o = commands::assess(&input, &out, &title)?;
            print!("{}", o.report.render(&o.matrix, &title));
        }
        Command::VerifyTables => {
            for c in commands::verify_tables()? {
                println!("{}", c.summary_line());
            }
        }
        Command::CompareAll { config } => {
            let cfg = RunConfig::load(&config)?;
            let o = commands::compare_all(&cfg)?;
            print!("{}", o.summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
