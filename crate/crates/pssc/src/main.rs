use clap::{Parser, Subcommand};
use pssc::config::{KvConfig, RunConfig};
use pssc::error::PsscError;
use pssc::pipeline;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pssc", about = "Pseudo-supervised deep subspace clustering", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic union-of-subspaces dataset as a labeled CSV.
    Synth {
        /// Flat key = value config file (k, q, d, per_cluster, sigma, seed).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Root seed; overrides the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (receives dataset.csv).
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Train the model on a dataset and spectral-cluster the affinity.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the affinity matrix as affinity.matbin.
        #[arg(long)]
        dump_affinity: bool,
        /// The last CSV column holds true labels.
        #[arg(long)]
        labels_col: bool,
    },
    /// Train on a core subsample and label the rest out-of-sample.
    Largescale {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        dump_affinity: bool,
        #[arg(long)]
        labels_col: bool,
    },
    /// Score a predicted labels.csv against a reference labels.csv.
    Eval {
        /// Predicted labels CSV.
        pred: PathBuf,
        /// True labels CSV.
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(
    path: Option<&PathBuf>,
    seed: Option<u64>,
    labels_col: bool,
) -> pssc::Result<RunConfig> {
    let cfg = match path {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::from_kv(KvConfig::default())?,
    };
    cfg.with_overrides(seed, labels_col)
}

fn real_main(cli: Cli) -> pssc::Result<()> {
    match cli.command {
        Command::Synth { config, seed, out } => {
            let cfg = load_config(config.as_ref(), seed, false)?;
            let path = pipeline::cmd_synth(&cfg, &out)?;
            println!("dataset = {}", path.display());
        }
        Command::Run {
            config,
            seed,
            out,
            dump_affinity,
            labels_col,
        } => {
            let cfg = load_config(Some(&config), seed, labels_col)?;
            let arts = pipeline::cmd_run(&cfg, &out, dump_affinity)?;
            for (k, v) in &arts.report {
                println!("{k} = {v}");
            }
        }
        Command::Largescale {
            config,
            seed,
            out,
            dump_affinity,
            labels_col,
        } => {
            let cfg = load_config(Some(&config), seed, labels_col)?;
            let arts = pipeline::cmd_largescale(&cfg, &out, dump_affinity)?;
            for (k, v) in &arts.report {
                println!("{k} = {v}");
            }
        }
        Command::Eval { pred, truth, out } => {
            let m = pipeline::cmd_eval(&pred, &truth, out.as_deref())?;
            println!("acc = {:.6}", m.acc);
            println!("nmi = {:.6}", m.nmi);
            println!("purity = {:.6}", m.purity);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            // bad flags/arguments are configuration errors
            eprintln!("{e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(PsscError::exit_code(&e)).unwrap_or(2))
        }
    }
}
