//! `wugnet` command-line runner. Exit codes: 0 success, 1 invalid config or
//! input data, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wugnet::datastore::FreqMode;
use wugnet::harness::{self, ExperimentConfig, HarnessError, Overrides};

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated seed list, e.g. 1,2,3.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Samples per seed and item for `aggregate`.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// type, token or log-token.
    #[arg(long = "freq-mode", global = true)]
    freq_mode: Option<FreqMode>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train every seed and save epoch checkpoints.
    Train,
    /// Accuracy, correlations, CR@5 and second-place agreement per seed.
    Evaluate,
    /// Pool sampled productions over seeds and compare with humans.
    Aggregate,
    /// Correlation and confidence at every saved epoch.
    EpochSweep,
    /// Rule-based baseline scored like the neural models.
    Rules,
    /// Encoder and phoneme representation analyses.
    Probe,
    /// Write the synthetic corpus and nonce files.
    Synth,
}

#[derive(Parser, Debug)]
#[command(name = "wugnet", version, about = "Train encoder-decoder past-tense models and evaluate them against wug-test data")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn config(c: &Common) -> Result<ExperimentConfig, HarnessError> {
    let base = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    base.with_overrides(Overrides {
        seeds: c.seeds.clone(),
        epochs: c.epochs,
        samples: c.samples,
        freq_mode: c.freq_mode,
        out_dir: c.out.clone(),
    })
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let cfg = config(&cli.common)?;
    match cli.command {
        Command::Train => {
            let s = harness::cmd_train(&cfg)?;
            for (seed, log) in &s.logs {
                if let Some(a) = log.last().and_then(|l| l.accuracy.as_ref()) {
                    println!("seed {seed}: final training accuracy {:.2}%", a.overall);
                }
            }
            println!("{} checkpoints under {}", s.checkpoints.len(), cfg.out_dir.display());
        }
        Command::Evaluate => {
            let r = harness::cmd_evaluate(&cfg)?;
            for s in &r.seeds {
                let rho = s.correlations.first();
                println!(
                    "seed {}: accuracy {:.2}%, CR@5 {:.3}, rho regular {}, rho irregular {}",
                    s.seed,
                    s.accuracy.overall,
                    s.cr5.value,
                    wugnet::wugeval::format_correlation(rho.and_then(|c| c.regular)),
                    wugnet::wugeval::format_correlation(rho.and_then(|c| c.irregular)),
                );
            }
        }
        Command::Aggregate => {
            let r = harness::cmd_aggregate(&cfg, cfg.samples)?;
            let c = &r.spearman.correlation;
            println!(
                "aggregate over {} seeds: rho regular {}, rho irregular {}, irregular preferred on {} items (humans {})",
                r.table.seeds.len(),
                wugnet::wugeval::format_correlation(c.regular),
                wugnet::wugeval::format_correlation(c.irregular),
                r.spearman.model_irregular_preferred(),
                r.spearman.human_irregular_preferred()
            );
        }
        Command::EpochSweep => {
            let rows = harness::cmd_epoch_sweep(&cfg)?;
            println!("{} sweep rows written under {}", rows.len(), cfg.out_dir.join("sweep").display());
        }
        Command::Rules => {
            let r = harness::cmd_rules(&cfg)?;
            println!("{} rules induced", r.grammar.rules.len());
        }
        Command::Probe => {
            let r = harness::cmd_probe(&cfg)?;
            println!(
                "seed {}: kNN last-phoneme agreement {:.3} (chance {:.3}); reversed model first-phoneme agreement {:.3} (chance {:.3})",
                r.seed, r.encoder.trailing, r.encoder.trailing_chance, r.reversed.leading, r.reversed.leading_chance
            );
        }
        Command::Synth => {
            let (c, n) = harness::cmd_synth(&cfg)?;
            println!("{}\n{}", c.display(), n.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
