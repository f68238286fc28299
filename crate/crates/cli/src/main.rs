use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reranklab::config::PipelineConfig;
use reranklab::io;
use reranklab::pipeline::{self, Method, ReportRow, RunDir, Stage, StageOutcome, CONFIG_FILE};
use reranklab::Result;

/// Experience-score-driven reranking experiments on a synthetic search
/// simulator.
///
/// Every command works on one run directory (--out). Configuration comes
/// from --config, else <out>/config.json if present, else defaults; then
/// RERANKLAB_<SECTION>__<FIELD> environment variables, then --seed.
#[derive(Parser)]
#[command(name = "reranklab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration JSON.
    #[arg(long, env = "RERANKLAB_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed; re-derives every stage seed.
    #[arg(long, env = "RERANKLAB_SEED")]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, env = "RERANKLAB_OUT", default_value = "run")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate sessions.jsonl, pairs.jsonl and simconfig.json.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Train one stage: scorer, base, pretrain (Stage I) or grpo (Stage II).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = "RERANKLAB_STAGE")]
        stage: Stage,
    },
    /// Write top-K lists of one method for the evaluation split.
    Rerank {
        #[command(flatten)]
        common: Common,
        /// exposure, ctr, scorer, base, s1 or s1s2.
        #[arg(long)]
        method: Method,
        /// List length (defaults to eval.list_k).
        #[arg(long, env = "RERANKLAB_K")]
        k: Option<usize>,
    },
    /// Score every lists_<method>.jsonl in the run directory into report.csv.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated nDCG cutoffs (defaults to eval.ks).
        #[arg(long, env = "RERANKLAB_K", value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// Oracle Good/Same/Bad comparison of list file A against list file B.
    Gsb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// nDCG cutoff for the judge (defaults to eval.list_k).
        #[arg(long, env = "RERANKLAB_K")]
        k: Option<usize>,
    },
    /// simulate, train all stages, rerank all methods, evaluate and GSB.
    Run {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let saved = common.out.join(CONFIG_FILE);
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None if saved.is_file() => PipelineConfig::load(&saved)?,
        None => PipelineConfig::default(),
    };
    cfg = cfg.with_env_overrides(std::env::vars())?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(rows: &[ReportRow]) {
    println!("{:<9} {:<18} {:<11} {:>3} {:>8} {:>6}", "method", "metric", "labels", "k", "value", "n");
    for r in rows {
        println!(
            "{:<9} {:<18} {:<11} {:>3} {:>8.4} {:>6}",
            r.method, r.metric, r.label_kind, r.k, r.value, r.n_queries
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => {
            let cfg = load_config(&common)?;
            let stats = pipeline::cmd_simulate(&cfg, &RunDir::new(&common.out))?;
            println!(
                "queries={} candidates={} pairs={} avg_pairs_per_query={:.2} avg_clicks_per_query={:.2} long_tail_fraction={:.3}",
                stats.queries,
                stats.candidates,
                stats.pairs,
                stats.avg_pairs_per_query,
                stats.avg_clicks_per_query,
                stats.long_tail_fraction
            );
        }
        Command::Train { common, stage } => {
            let cfg = load_config(&common)?;
            match pipeline::cmd_train(stage, &cfg, &RunDir::new(&common.out))? {
                StageOutcome::Scorer(r) => {
                    let acc = r.held_out_accuracy.map_or("n/a".to_owned(), |a| format!("{a:.4}"));
                    println!(
                        "scorer: final_loss={:.6} held_out_accuracy={acc} train_pairs={} held_out_pairs={}",
                        r.final_loss, r.n_train, r.n_held_out
                    );
                }
                StageOutcome::Policy(r) => println!("{}: final_nll={:.6}", stage.as_str(), r.final_nll),
                StageOutcome::Grpo(trace) => {
                    if let Some(last) = trace.last() {
                        println!(
                            "grpo: steps={} mean_reward={:.4} mean_ndcg={:.4} mean_behavioral={:.4}",
                            trace.len(),
                            last.mean_reward,
                            last.mean_ndcg,
                            last.mean_behavioral
                        );
                    }
                }
            }
            println!("wrote {}", common.out.join(stage.checkpoint()).display());
        }
        Command::Rerank { common, method, k } => {
            let cfg = load_config(&common)?;
            let k = k.unwrap_or(cfg.eval.list_k);
            let path = pipeline::cmd_rerank(method, &cfg, &RunDir::new(&common.out), k)?;
            println!("wrote {}", path.display());
        }
        Command::Evaluate { common, k } => {
            let mut cfg = load_config(&common)?;
            if !k.is_empty() {
                cfg.eval.ks = k;
                cfg.validate()?;
            }
            let rows = pipeline::cmd_evaluate(&cfg, &RunDir::new(&common.out))?;
            print_report(&rows);
        }
        Command::Gsb { common, a, b, k } => {
            let cfg = load_config(&common)?;
            let k = k.unwrap_or(cfg.eval.list_k);
            let row = pipeline::cmd_gsb(&a, &b, &cfg, &RunDir::new(&common.out), k)?;
            let out = common.out.join(format!("gsb_{}.csv", row.method));
            io::write_csv(&out, std::slice::from_ref(&row))?;
            println!(
                "{} vs {}: good={} same={} bad={} adv={:+.2}%",
                display_name(&a),
                display_name(&b),
                row.good,
                row.same,
                row.bad,
                row.adv_percent
            );
        }
        Command::Run { common } => {
            let cfg = load_config(&common)?;
            let rows = pipeline::run(&cfg, &RunDir::new(&common.out))?;
            print_report(&rows);
            println!("wrote {}", common.out.display());
        }
    }
    Ok(())
}

fn display_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
