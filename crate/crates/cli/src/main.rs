use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use xmodal::data::{generate_synthetic, load_dataset, save_dataset, split_identity_disjoint, SynthConfig};
use xmodal::eval::EvalProtocol;
use xmodal::harness::{
    default_components, evaluate, load_checkpoint, run_ablation, run_gradcheck, save_checkpoint, train,
    AblationDataConfig, RunReport, TrainConfig,
};
use xmodal::{Corpus, Error, ErrorKind, Modality, Params};

/// Cross-modality metric learning: synthetic data, training, evaluation,
/// ablations and gradient checks.
#[derive(Parser)]
#[command(name = "xmodal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-modality corpus.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a dataset into identity-disjoint train and test files.
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
    /// Train an encoder and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        timing: Timing,
    },
    /// Evaluate a checkpoint on a test set.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// V or T. Both directions are evaluated when omitted.
        #[arg(long)]
        query_modality: Option<Modality>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long)]
        single_shot: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "1,10,20")]
        ranks: Vec<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        timing: Timing,
    },
    /// Train and evaluate the baseline, DMTL, MFI and EDFL arms over several seeds.
    Ablation {
        #[arg(long)]
        data_config: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Finite-difference check of every layer, loss and the full model.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Scale the named component's analytic gradient by 1.01 (negative control).
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

#[derive(Args)]
struct Timing {
    /// Record wall-clock seconds in the report (makes reports run-dependent).
    #[arg(long)]
    record_time: bool,
}

enum Outcome {
    Done,
    VerificationFailed,
}

fn write_report(path: &Option<PathBuf>, json: String) -> xmodal::Result<()> {
    if let Some(path) = path {
        std::fs::write(path, json).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn run(command: Command) -> xmodal::Result<Outcome> {
    match command {
        Command::Synth { config, out } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::Io {
                path: config.clone(),
                source: e,
            })?;
            let synth: SynthConfig = toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let dataset: Corpus = generate_synthetic(&synth)?;
            save_dataset(&dataset, &out)?;
            println!(
                "wrote {} samples ({} identities, dim {}) to {}",
                dataset.len(),
                dataset.identities().len(),
                dataset.dim(),
                out.display()
            );
        }
        Command::Split {
            data,
            train_fraction,
            seed,
            train_out,
            test_out,
        } => {
            let dataset: Corpus = load_dataset(&data)?;
            let (train_set, test_set) = split_identity_disjoint(&dataset, train_fraction, seed)?;
            save_dataset(&train_set, &train_out)?;
            save_dataset(&test_set, &test_out)?;
            println!(
                "train: {} identities, {} samples; test: {} identities, {} samples",
                train_set.identities().len(),
                train_set.len(),
                test_set.identities().len(),
                test_set.len()
            );
        }
        Command::Train {
            data,
            config,
            out,
            report,
            timing,
        } => {
            let config = TrainConfig::load(&config)?;
            let dataset: Corpus = load_dataset(&data)?;
            let start = Instant::now();
            let (params, mut run_report) = train(&dataset, &config)?;
            let seconds = start.elapsed().as_secs_f64();
            log::info!("training took {seconds:.2} s");
            if timing.record_time {
                run_report.wall_clock_seconds = Some(seconds);
            }
            save_checkpoint(&params, &out)?;
            print!("{}", run_report.to_table());
            write_report(&report, run_report.to_json())?;
        }
        Command::Eval {
            checkpoint,
            data,
            query_modality,
            trials,
            single_shot,
            seed,
            ranks,
            report,
            timing,
        } => {
            let params: Params = load_checkpoint(&checkpoint)?;
            let dataset: Corpus = load_dataset(&data)?;
            let directions = match query_modality {
                Some(m) => vec![m],
                None => Modality::BOTH.to_vec(),
            };
            let start = Instant::now();
            let mut metrics = Vec::new();
            for q in directions {
                let protocol = EvalProtocol {
                    trials,
                    single_shot,
                    seed,
                    ranks_reported: ranks.clone(),
                    ..EvalProtocol::new(q)
                };
                protocol.validate()?;
                metrics.push(evaluate(&params, &dataset, &protocol)?);
            }
            let run_report = RunReport {
                train_config: None,
                encoder: params.config.clone(),
                seed,
                history: Vec::new(),
                metrics,
                wall_clock_seconds: timing.record_time.then(|| start.elapsed().as_secs_f64()),
            };
            print!("{}", run_report.to_table());
            write_report(&report, run_report.to_json())?;
        }
        Command::Ablation {
            data_config,
            config,
            seeds,
            report,
        } => {
            let data = AblationDataConfig::load(&data_config)?;
            let base = TrainConfig::load(&config)?;
            let result = run_ablation(&data, &base, &seeds)?;
            print!("{}", result.to_table());
            write_report(&report, result.to_json())?;
        }
        Command::Gradcheck {
            trials,
            seed,
            report,
            inject_fault,
        } => {
            if trials == 0 {
                return Err(Error::InvalidConfig("trials must be at least 1".into()));
            }
            let mut components = default_components();
            if let Some(name) = inject_fault {
                let i = components
                    .iter()
                    .position(|c| c.name == name)
                    .ok_or_else(|| Error::InvalidConfig(format!("no gradcheck component named {name}")))?;
                let c = components.remove(i);
                components.insert(i, c.corrupted(1.01));
            }
            let result = run_gradcheck(&components, trials, seed);
            print!("{}", result.to_table());
            write_report(
                &report,
                serde_json::to_string_pretty(&result).expect("gradcheck report serializes") + "\n",
            )?;
            if !result.passed() {
                return Ok(Outcome::VerificationFailed);
            }
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            })
        }
    }
}
