//! Command-line interface.
//!
//! Every subcommand is a pure function of its flags, the optional
//! `--config` key=value file and the seed: reruns with the same inputs
//! write byte-identical files and print byte-identical stdout. Anything
//! nondeterministic (wall-clock timings, warnings) goes to stderr.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use relis::corpus::{load_cluster_set, DocumentCluster};
use relis::features::{ClusterIndex, FEATURE_NAMES};
use relis::l2r::{self, LossKind, TrainConfig, TrainingSet};
use relis::pipeline::bound::{render_bound, verify_bound, BoundParams};
use relis::pipeline::config::{experiment_from_keys, KeyValues};
use relis::pipeline::synth::{synth_corpus, SynthParams};
use relis::pipeline::{
    self, evaluate_correlation, run_leave_one_out, summarise_with_model, summary_text,
};
use relis::rlmdp::{greedy_rollout, td_learn, RlConfig};
use relis::rouge::ground_truth_utility;
use relis::sampling::{
    build_pairwise_set, build_pointwise_set, read_preference_sets, stream_rng, stream_seed,
    write_preference_set, PreferenceSet,
};
use relis::{RelisError, Result};

#[derive(Parser)]
#[command(
    name = "relis",
    version,
    about = "Learned-reward extractive summarisation: cross-input reward learning plus input-specific reinforcement learning"
)]
struct Cli {
    /// Master random seed (overrides the `seed` config key).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Plain-text key=value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (overrides the `out` config key).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RewardChoice {
    /// Ground-truth utility against the references.
    Oracle,
    /// The coverage/redundancy/length heuristic (no learning).
    Heuristic,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus in the cluster directory layout.
    Synth {
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long)]
        docs: Option<usize>,
        #[arg(long)]
        sentences: Option<usize>,
        #[arg(long)]
        vocabulary: Option<usize>,
        #[arg(long)]
        skew: Option<f64>,
        #[arg(long)]
        length_budget: Option<usize>,
    },
    /// Draw scored random summaries (and preference pairs) per cluster.
    Sample {
        /// Directory of cluster directories.
        #[arg(long)]
        data: PathBuf,
        /// Pointwise samples per cluster.
        #[arg(long)]
        samples: Option<usize>,
        /// Preference pairs per cluster (0 disables pairs).
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        length_budget: Option<usize>,
    },
    /// Fit a utility model to sampled supervision.
    TrainReward {
        #[arg(long)]
        data: PathBuf,
        /// Samples file produced by `sample`.
        #[arg(long)]
        samples_file: PathBuf,
        #[arg(long)]
        loss: Option<LossKind>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        dev_fraction: Option<f64>,
        #[arg(long)]
        length_budget: Option<usize>,
    },
    /// Train a per-cluster policy and write one summary per cluster.
    Summarize {
        #[arg(long)]
        data: PathBuf,
        /// Learned utility model file.
        #[arg(long, conflicts_with = "reward")]
        model: Option<PathBuf>,
        /// Built-in reward instead of a model.
        #[arg(long, value_enum)]
        reward: Option<RewardChoice>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        rl_lr: Option<f64>,
        #[arg(long)]
        penalty: Option<f64>,
        #[arg(long)]
        length_budget: Option<usize>,
    },
    /// Rank-correlation of a model against oracle scores on sample sets.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        samples_file: PathBuf,
        #[arg(long)]
        length_budget: Option<usize>,
    },
    /// Check the near-optimality inequality on enumerable micro instances.
    VerifyBound {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        sample_size: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Full leave-one-out experiment from a config file.
    RunLoo,
    /// Debugging helpers for the feature registry.
    Features {
        #[command(subcommand)]
        command: FeaturesCommand,
    },
}

#[derive(Subcommand)]
enum FeaturesCommand {
    /// Print one feature row per sample in a samples file.
    Dump {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        samples_file: PathBuf,
        #[arg(long)]
        length_budget: Option<usize>,
    },
}

/// Flag > config key > default resolution.
struct Ctx {
    kv: KeyValues,
    seed: u64,
    out: Option<PathBuf>,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Ctx> {
        let kv = match &cli.config {
            Some(path) => KeyValues::load(path)?,
            None => KeyValues::default(),
        };
        let seed = match cli.seed {
            Some(s) => s,
            None => kv.get_u64("seed")?.unwrap_or(0),
        };
        let out = cli.out.clone().or_else(|| kv.get("out").map(PathBuf::from));
        Ok(Ctx { kv, seed, out })
    }

    fn usize(&self, flag: Option<usize>, key: &str, default: usize) -> Result<usize> {
        Ok(flag.or(self.kv.get_usize(key)?).unwrap_or(default))
    }

    fn f64(&self, flag: Option<f64>, key: &str, default: f64) -> Result<f64> {
        Ok(flag.or(self.kv.get_f64(key)?).unwrap_or(default))
    }

    fn out_dir(&self) -> Result<&Path> {
        let dir = self
            .out
            .as_deref()
            .ok_or_else(|| RelisError::Config("missing output directory (--out)".into()))?;
        fs::create_dir_all(dir)?;
        Ok(dir)
    }
}

fn load_data(ctx: &Ctx, data: &Path, flag: Option<usize>) -> Result<Vec<DocumentCluster>> {
    let budget = ctx.usize(flag, "budget", 100)?;
    let clusters = load_cluster_set(data, budget)?;
    if clusters.is_empty() {
        return Err(RelisError::Input(format!(
            "no clusters found under {}",
            data.display()
        )));
    }
    Ok(clusters)
}

fn sample_cluster_set(
    ctx: &Ctx,
    cluster: &DocumentCluster,
    samples: usize,
    pairs: usize,
) -> Result<PreferenceSet> {
    let mut rng = stream_rng(ctx.seed, &format!("sample/{}", cluster.cluster_id));
    let set = build_pointwise_set(
        cluster,
        samples,
        |y| ground_truth_utility(y, cluster),
        &mut rng,
    )?;
    if pairs > 0 {
        build_pairwise_set(set, pairs, &mut rng)
    } else {
        Ok(set)
    }
}

fn picks_text(picks: &[(usize, usize)]) -> String {
    picks
        .iter()
        .map(|(d, s)| format!("{d}.{s}"))
        .collect::<Vec<_>>()
        .join("+")
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli)?;
    let mut stdout = std::io::stdout().lock();

    match cli.command {
        Command::Synth {
            clusters,
            docs,
            sentences,
            vocabulary,
            skew,
            length_budget,
        } => {
            let defaults = SynthParams::default();
            let params = SynthParams {
                clusters: ctx.usize(clusters, "clusters", defaults.clusters)?,
                docs_per_cluster: ctx.usize(docs, "docs", defaults.docs_per_cluster)?,
                sentences_per_doc: ctx.usize(sentences, "sentences", defaults.sentences_per_doc)?,
                vocabulary: ctx.usize(vocabulary, "vocabulary", defaults.vocabulary)?,
                topic_skew: ctx.f64(skew, "skew", defaults.topic_skew)?,
                length_budget: ctx.usize(length_budget, "budget", defaults.length_budget)?,
                seed: ctx.seed,
            };
            let out = ctx.out_dir()?;
            let ids = synth_corpus(&params, out)?;
            for id in &ids {
                writeln!(stdout, "cluster\t{id}")?;
            }
            writeln!(stdout, "clusters\t{}", ids.len())?;
        }

        Command::Sample {
            data,
            samples,
            pairs,
            length_budget,
        } => {
            let clusters = load_data(&ctx, &data, length_budget)?;
            let n = ctx.usize(samples, "samples", 3000)?;
            let k = ctx.usize(pairs, "pairs", 100_000)?;
            let out = ctx.out_dir()?;
            let path = out.join("samples.jsonl");
            let mut file = std::io::BufWriter::new(fs::File::create(&path)?);
            for cluster in &clusters {
                let set = sample_cluster_set(&ctx, cluster, n, k)?;
                for warning in &set.warnings {
                    eprintln!("warning: {warning}");
                }
                write_preference_set(&set, &mut file)?;
                writeln!(
                    stdout,
                    "sampled\t{}\tsamples\t{}\tpairs\t{}",
                    set.cluster_id,
                    set.samples.len(),
                    set.pairs.len()
                )?;
            }
            file.flush()?;
            writeln!(stdout, "wrote\t{}", path.display())?;
        }

        Command::TrainReward {
            data,
            samples_file,
            loss,
            lr,
            epochs,
            batch,
            dev_fraction,
            length_budget,
        } => {
            let clusters = load_data(&ctx, &data, length_budget)?;
            let file = BufReader::new(fs::File::open(&samples_file)?);
            let sets = read_preference_sets(file, &clusters)?;
            let training: Vec<TrainingSet> = sets
                .iter()
                .map(|set| {
                    let cluster = clusters
                        .iter()
                        .find(|c| c.cluster_id == set.cluster_id)
                        .expect("validated by read_preference_sets");
                    TrainingSet::from_preferences(cluster, set)
                })
                .collect::<Result<_>>()?;

            let defaults = TrainConfig::default();
            let config = TrainConfig {
                loss_kind: match loss {
                    Some(l) => l,
                    None => ctx.kv.get_loss("loss")?.unwrap_or(defaults.loss_kind),
                },
                learning_rate: ctx.f64(lr, "lr", defaults.learning_rate)?,
                epochs: ctx.usize(epochs, "epochs", defaults.epochs)?,
                batch_size: ctx.usize(batch, "batch", defaults.batch_size)?,
                dev_fraction: ctx.f64(dev_fraction, "dev_fraction", defaults.dev_fraction)?,
                seed: ctx.seed,
            };
            let model = l2r::train(&training, &config)?;
            let out = ctx.out_dir()?;
            let path = out.join("model.json");
            l2r::save_model(&model, &path)?;
            writeln!(stdout, "loss\t{}", model.loss_kind)?;
            if let Some(meta) = &model.meta {
                writeln!(stdout, "best_epoch\t{}", meta.best_epoch)?;
                writeln!(stdout, "dev_rho\t{:.6}", meta.dev_rho)?;
            }
            writeln!(stdout, "wrote\t{}", path.display())?;
        }

        Command::Summarize {
            data,
            model,
            reward,
            episodes,
            rl_lr,
            penalty,
            length_budget,
        } => {
            let clusters = load_data(&ctx, &data, length_budget)?;
            let defaults = RlConfig::default();
            let episodes = ctx.usize(episodes, "episodes", defaults.episodes)?;
            let rl_lr = ctx.f64(rl_lr, "rl_lr", defaults.learning_rate)?;
            let penalty = ctx.f64(penalty, "penalty", defaults.over_length_penalty)?;
            let loaded = match (&model, reward) {
                (Some(path), None) => Some(l2r::load_model(path)?),
                (None, Some(_)) => None,
                (None, None) => {
                    return Err(RelisError::Config(
                        "choose a reward: --model <file> or --reward {oracle|heuristic}".into(),
                    ))
                }
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };

            let out = ctx.out_dir()?;
            let mut manifest = String::new();
            let started = std::time::Instant::now();
            for cluster in &clusters {
                let rl = RlConfig {
                    episodes,
                    learning_rate: rl_lr,
                    over_length_penalty: penalty,
                    seed: stream_seed(ctx.seed, &format!("rl/{}", cluster.cluster_id)),
                };
                let summary = match (&loaded, reward) {
                    (Some(m), _) => summarise_with_model(cluster, m, &rl)?,
                    (None, Some(RewardChoice::Oracle)) => {
                        let policy = td_learn(
                            cluster,
                            |y| ground_truth_utility(y, cluster).unwrap_or(0.0),
                            &rl,
                        )?;
                        greedy_rollout(&policy, cluster)
                    }
                    (None, Some(RewardChoice::Heuristic)) => {
                        let index = ClusterIndex::new(cluster);
                        let policy = td_learn(cluster, |y| index.reaper_score(y), &rl)?;
                        greedy_rollout(&policy, cluster)
                    }
                    (None, None) => unreachable!("checked above"),
                };
                fs::write(
                    out.join(format!("{}.txt", cluster.cluster_id)),
                    summary_text(cluster, &summary),
                )?;
                let line = format!(
                    "summary\t{}\twords\t{}\tpicks\t{}\tepisodes\t{episodes}\tseed\t{}\n",
                    cluster.cluster_id,
                    summary.word_count,
                    picks_text(&summary.picks),
                    rl.seed
                );
                manifest.push_str(&line);
                write!(stdout, "{line}")?;
            }
            fs::write(out.join("manifest.tsv"), &manifest)?;
            eprintln!(
                "summarised {} clusters in {:.2}s",
                clusters.len(),
                started.elapsed().as_secs_f64()
            );
        }

        Command::Evaluate {
            data,
            model,
            samples_file,
            length_budget,
        } => {
            let clusters = load_data(&ctx, &data, length_budget)?;
            let model = l2r::load_model(&model)?;
            let file = BufReader::new(fs::File::open(&samples_file)?);
            let sets = read_preference_sets(file, &clusters)?;
            let paired: Vec<(&DocumentCluster, &PreferenceSet)> = sets
                .iter()
                .map(|set| {
                    let cluster = clusters
                        .iter()
                        .find(|c| c.cluster_id == set.cluster_id)
                        .expect("validated by read_preference_sets");
                    (cluster, set)
                })
                .collect();
            let summary = evaluate_correlation(&model, &paired)?;
            let mut text = format!(
                "mean_rho\t{:.6}\nmean_ndcg\t{:.6}\nevaluated\t{}\n",
                summary.mean_rho, summary.mean_ndcg, summary.evaluated
            );
            for id in &summary.skipped {
                text.push_str(&format!("skipped\t{id}\n"));
            }
            write!(stdout, "{text}")?;
            if let Some(out) = &ctx.out {
                fs::create_dir_all(out)?;
                fs::write(out.join("evaluation.tsv"), text)?;
            }
        }

        Command::VerifyBound {
            trials,
            sample_size,
            episodes,
        } => {
            let defaults = BoundParams::default();
            let params = BoundParams {
                trials: ctx.usize(trials, "trials", defaults.trials)?,
                sample_size: ctx.usize(sample_size, "sample_size", defaults.sample_size)?,
                episodes: ctx.usize(episodes, "episodes", defaults.episodes)?,
                seed: ctx.seed,
                ..defaults
            };
            let report = verify_bound(&params)?;
            let text = render_bound(&report);
            write!(stdout, "{text}")?;
            if let Some(out) = &ctx.out {
                fs::create_dir_all(out)?;
                fs::write(out.join("bound.tsv"), text)?;
            }
            if report.violations > 0 {
                return Err(RelisError::Logic(format!(
                    "{} of {} trials violated the bound",
                    report.violations,
                    report.trials.len()
                )));
            }
        }

        Command::RunLoo => {
            let config = experiment_from_keys(&ctx.kv, cli.seed, cli.out.clone())?;
            let report = run_leave_one_out(&config)?;
            write!(stdout, "{}", pipeline::report::render_human(&report))?;
            eprint!("{}", pipeline::report::render_timings(&report));
            if !report.failures.is_empty() {
                return Err(RelisError::Logic(format!(
                    "{} of {} splits failed",
                    report.failures.len(),
                    report.failures.len() + report.blocks.len()
                )));
            }
        }

        Command::Features { command } => match command {
            FeaturesCommand::Dump {
                data,
                samples_file,
                length_budget,
            } => {
                let clusters = load_data(&ctx, &data, length_budget)?;
                let file = BufReader::new(fs::File::open(&samples_file)?);
                let sets = read_preference_sets(file, &clusters)?;
                writeln!(
                    stdout,
                    "columns\tcluster\tsample\t{}",
                    FEATURE_NAMES.join("\t")
                )?;
                for set in &sets {
                    let cluster = clusters
                        .iter()
                        .find(|c| c.cluster_id == set.cluster_id)
                        .expect("validated by read_preference_sets");
                    let index = ClusterIndex::new(cluster);
                    for (i, (summary, _)) in set.samples.iter().enumerate() {
                        let features = index.compute_features(summary);
                        let values: Vec<String> =
                            features.values.iter().map(|v| v.to_string()).collect();
                        writeln!(
                            stdout,
                            "features\t{}\t{i}\t{}",
                            set.cluster_id,
                            values.join("\t")
                        )?;
                    }
                }
            }
        },
    }
    Ok(())
}

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        // a downstream pager closing the pipe is not an error
        Err(RelisError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => {
            std::process::ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}
