use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cto::encoder::{dump_embeddings, ranking_accuracy, SemanticEncoder};
use cto::harness::stages::{self, history_csv, BoxError};
use cto::harness::{load_config, run_experiment, RunConfig, Variant};
use cto::miner::mine_pairs;
use cto::policy::PolicyModel;
use cto::prefopt::{pair_loss, LossVariant, PairBatchItem};
use cto::records::{read_all, write_records, Candidate, PreferencePair, TranslationTask, TripletRecord};
use cto::reward::{annotate_pairs, score_candidates};

#[derive(Parser)]
#[command(name = "cto", about = "Syntax-guided, semantic-aware preference optimisation for code translation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration; unspecified keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set sft.epochs=6`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective configuration as TOML.
    ShowConfig,
    /// Generate training and held-out tasks into a directory.
    GenCorpus {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Supervised finetuning on task references; prints the loss history.
    Sft {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample candidate translations for every task.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill compile verdicts with the configured syntax oracle.
    CompileCheck {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mine the closest pass/fail pair per task.
    MinePairs {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build source-anchored triplets with labelled mutant negatives.
    Mutate {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the semantic encoder with InfoNCE; prints the loss history.
    TrainEncoder {
        #[arg(long)]
        triplets: PathBuf,
        /// Triplets for the ranking-accuracy line on stderr.
        #[arg(long)]
        heldout: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attach semantic rewards: annotate pairs, or score candidates.
    Score {
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        /// Pairs to annotate; without it the scored candidates are written.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Preference-train a copy of a reference policy.
    PrefTrain {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        /// One of dpo, wo_syntax, cto, ipo, simpo.
        #[arg(long, default_value = "cto")]
        variant: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// CA@1, CA@K and comparator metrics on held-out tasks (JSON on stdout).
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long, default_value = "sft")]
        variant: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write one embedding row per source and candidate as CSV.
    DumpEmbeddings {
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one preference loss on a hand-written item.
    LossProbe {
        /// One of cto, dpo, ipo, simpo.
        #[arg(long, default_value = "cto")]
        loss: String,
        #[arg(long, allow_hyphen_values = true)]
        policy_chosen: f64,
        #[arg(long, allow_hyphen_values = true)]
        policy_rejected: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        ref_chosen: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        ref_rejected: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        delta_reward: f64,
        #[arg(long)]
        len_chosen: Option<usize>,
        #[arg(long)]
        len_rejected: Option<usize>,
    },
    /// Run every stage for every seed and variant, then write the report.
    Experiment {
        #[arg(long)]
        out: PathBuf,
    },
}

fn variant(key: &str) -> Result<Variant, BoxError> {
    Variant::from_key(key).ok_or_else(|| format!("unknown variant `{key}`").into())
}

fn run(cli: Cli) -> Result<(), BoxError> {
    let cfg: RunConfig = load_config(cli.global.config.as_deref(), &cli.global.overrides)?;
    match cli.command {
        Command::ShowConfig => print!("{}", cfg.to_toml()),
        Command::GenCorpus { seed, out } => {
            std::fs::create_dir_all(&out)?;
            let (train, heldout) = stages::corpus(&cfg, seed);
            write_records(out.join("train.jsonl"), &train)?;
            write_records(out.join("heldout.jsonl"), &heldout)?;
            eprintln!("{} training and {} held-out tasks in {}", train.len(), heldout.len(), out.display());
        }
        Command::Sft { tasks, seed, out } => {
            let tasks: Vec<TranslationTask> = read_all(tasks)?;
            let (model, history) = stages::sft(&cfg, &tasks, seed)?;
            model.save(&out)?;
            print!("{}", history_csv(&history));
        }
        Command::Sample { model, tasks, seed, out } => {
            let model = PolicyModel::load(model)?;
            let tasks: Vec<TranslationTask> = read_all(tasks)?;
            let n = write_records(out, &stages::sample(&cfg, &model, &tasks, seed))?;
            eprintln!("{n} distinct candidates for {} tasks", tasks.len());
        }
        Command::CompileCheck { tasks, candidates, out } => {
            let tasks: Vec<TranslationTask> = read_all(tasks)?;
            let checked = stages::compile_check(&cfg, &tasks, read_all(candidates)?)?;
            let pass = checked.iter().filter(|c| c.syntactic_reward == Some(1.0)).count();
            write_records(out, &checked)?;
            eprintln!("{pass} of {} candidates pass", checked.len());
        }
        Command::MinePairs { candidates, out } => {
            let candidates: Vec<Candidate> = read_all(candidates)?;
            let (pairs, summary) = mine_pairs(&candidates, cfg.max_pairs_per_task);
            write_records(out, &pairs)?;
            eprintln!("{summary}");
        }
        Command::Mutate { tasks, seed, out } => {
            let tasks: Vec<TranslationTask> = read_all(tasks)?;
            let triplets = stages::triplets(&cfg, &tasks, seed);
            write_records(out, &triplets)?;
            eprintln!("{} triplets from {} tasks", triplets.len(), tasks.len());
        }
        Command::TrainEncoder { triplets, heldout, seed, out } => {
            let triplets: Vec<TripletRecord> = read_all(triplets)?;
            let (enc, history) = stages::train_encoder(&cfg, &triplets, seed)?;
            enc.save(&out)?;
            print!("{}", history_csv(&history));
            if let Some(path) = heldout {
                let held: Vec<TripletRecord> = read_all(path)?;
                eprintln!("held-out ranking accuracy {:.4}", ranking_accuracy(&enc, &held));
            }
        }
        Command::Score {
            encoder,
            tasks,
            candidates,
            pairs,
            out,
        } => {
            let enc = SemanticEncoder::load(encoder)?;
            let tasks: Vec<TranslationTask> = read_all(tasks)?;
            let mut candidates: Vec<Candidate> = read_all(candidates)?;
            match pairs {
                Some(p) => {
                    let pairs: Vec<PreferencePair> = read_all(p)?;
                    write_records(out, &annotate_pairs(&enc, &tasks, &candidates, &pairs)?)?;
                }
                None => {
                    score_candidates(&enc, &tasks, &mut candidates)?;
                    write_records(out, &candidates)?;
                }
            }
        }
        Command::PrefTrain {
            reference,
            tasks,
            pairs,
            variant: v,
            seed,
            out,
        } => {
            let v = variant(&v)?;
            let reference = PolicyModel::load(reference)?;
            let tasks: Vec<TranslationTask> = read_all(tasks)?;
            let pairs: Vec<PreferencePair> = read_all(pairs)?;
            let examples = stages::preference_examples(&tasks, &pairs, v);
            let (model, history) = stages::pref(&cfg, &reference, &examples, v, seed)?;
            model.save(&out)?;
            print!("{}", history_csv(&history));
        }
        Command::Eval {
            model,
            tasks,
            variant: v,
            seed,
        } => {
            let model = PolicyModel::load(model)?;
            let tasks: Vec<TranslationTask> = read_all(tasks)?;
            let result = stages::evaluate(&cfg, &model, &tasks, seed, variant(&v)?)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::DumpEmbeddings {
            encoder,
            tasks,
            candidates,
            out,
        } => {
            let enc = SemanticEncoder::load(encoder)?;
            let tasks: Vec<TranslationTask> = read_all(tasks)?;
            let candidates: Vec<Candidate> = match candidates {
                Some(p) => read_all(p)?,
                None => Vec::new(),
            };
            let rows = dump_embeddings(&enc, &tasks, &candidates, &out)?;
            eprintln!("{rows} rows");
        }
        Command::LossProbe {
            loss,
            policy_chosen,
            policy_rejected,
            ref_chosen,
            ref_rejected,
            delta_reward,
            len_chosen,
            len_rejected,
        } => {
            let lv = LossVariant::from_name(&loss).ok_or_else(|| format!("unknown loss `{loss}`"))?;
            let mut item = PairBatchItem::new((policy_chosen, policy_rejected), (ref_chosen, ref_rejected), delta_reward);
            if let (Some(a), Some(b)) = (len_chosen, len_rejected) {
                item = item.with_lengths(a, b);
            }
            let v = pair_loss(&item, &cfg.loss.params(lv))?;
            println!("loss {:.12}", v.loss);
            println!("d/d policy_chosen {:.12}", v.grad.policy_chosen);
            println!("d/d policy_rejected {:.12}", v.grad.policy_rejected);
            println!("d/d ref_chosen {:.12}", v.grad.ref_chosen);
            println!("d/d ref_rejected {:.12}", v.grad.ref_rejected);
        }
        Command::Experiment { out } => {
            let outcome = run_experiment(&cfg, &out)?;
            print!("{}", outcome.report.to_text());
            eprintln!("{} stages ran; report in {}", outcome.recomputed.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
