//! Experiment orchestration: leave-one-out runs over named splits,
//! correlation evaluation of learned utilities, bound verification and
//! report writing.

pub mod bound;
pub mod config;
pub mod report;
pub mod synth;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::corpus::{load_cluster_set, DocumentCluster};
use crate::error::{RelisError, Result};
use crate::features::ClusterIndex;
use crate::l2r::{self, TrainConfig, TrainMeta, TrainingSet, UtilityModel};
use crate::ranking::{ndcg_top_fraction, spearman_from_scores};
use crate::rlmdp::{greedy_rollout, td_learn, RlConfig};
use crate::rouge::{ground_truth_utility, rouge_score};
use crate::sampling::{
    build_pairwise_set, build_pointwise_set, stream_rng, stream_seed, PreferenceSet, Summary,
};

/// Top fraction of candidates scored by the NDCG metric.
pub const NDCG_FRACTION: f64 = 0.01;

/// A full leave-one-out experiment: named splits of clusters, sampling
/// sizes, reward-training and RL hyperparameters, and where to write.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Named, disjoint cluster directories; each takes a turn as the
    /// held-out test split.
    pub splits: Vec<(String, PathBuf)>,
    pub length_budget: usize,
    /// Reward-learning settings (loss, rate, epochs, batching, dev split).
    pub train: TrainConfig,
    /// Pointwise samples drawn per cluster (N).
    pub samples_per_cluster: usize,
    /// Preference pairs drawn per cluster (K); used by pairwise losses.
    pub pairs_per_cluster: usize,
    /// Test-time RL settings.
    pub rl: RlConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.splits.len() < 2 {
            return Err(RelisError::Config(format!(
                "leave-one-out needs at least two splits, got {}",
                self.splits.len()
            )));
        }
        let mut names: Vec<&str> = self.splits.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.splits.len() {
            return Err(RelisError::Config("split names must be unique".into()));
        }
        for (name, path) in &self.splits {
            if !path.is_dir() {
                return Err(RelisError::Config(format!(
                    "split {name}: {} is not a directory",
                    path.display()
                )));
            }
        }
        if self.samples_per_cluster == 0 {
            return Err(RelisError::Config(
                "samples_per_cluster must be positive".into(),
            ));
        }
        if self.train.loss_kind.is_pairwise() && self.pairs_per_cluster == 0 {
            return Err(RelisError::Config(
                "pairs_per_cluster must be positive for a pairwise loss".into(),
            ));
        }
        Ok(())
    }
}

/// Result row for one test cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub cluster_id: String,
    pub picks: Vec<(usize, usize)>,
    pub word_count: usize,
    pub rouge1: f64,
    pub rouge2: f64,
    pub u_star: f64,
    /// Wall-clock seconds of test-time sampling + RL for this cluster.
    pub test_seconds: f64,
}

/// Results of one held-out block.
#[derive(Debug, Clone)]
pub struct SplitBlock {
    pub held_out: String,
    pub outcomes: Vec<ClusterOutcome>,
    pub mean_rho: f64,
    pub mean_ndcg: f64,
    /// Clusters excluded from the correlation means (zero variance).
    pub skipped: Vec<String>,
    pub train_meta: Option<TrainMeta>,
    /// Wall-clock seconds of sampling + reward training for this block.
    pub train_seconds: f64,
}

/// Everything a leave-one-out run produced.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub blocks: Vec<SplitBlock>,
    /// Splits whose block aborted, with the error text.
    pub failures: Vec<(String, String)>,
}

/// Correlation of a model's ranking against oracle scores on held-out
/// sample sets.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSummary {
    pub mean_rho: f64,
    pub mean_ndcg: f64,
    pub evaluated: usize,
    pub skipped: Vec<String>,
}

/// Mean Spearman ρ and NDCG@1% of the model's predicted ordering against
/// the oracle scores carried by each sample set. Zero-variance clusters
/// are excluded with a warning; it is an error if nothing remains.
pub fn evaluate_correlation(
    model: &UtilityModel,
    sets: &[(&DocumentCluster, &PreferenceSet)],
) -> Result<CorrelationSummary> {
    let mut rhos = Vec::new();
    let mut ndcgs = Vec::new();
    let mut skipped = Vec::new();
    for (cluster, set) in sets {
        let index = ClusterIndex::new(cluster);
        let truth: Vec<f64> = set.samples.iter().map(|(_, s)| *s).collect();
        let predicted: Vec<f64> = set
            .samples
            .iter()
            .map(|(y, _)| model.utility(&index.compute_features(y)))
            .collect();
        match spearman_from_scores(&predicted, &truth)? {
            Some(rho) => {
                rhos.push(rho);
                ndcgs.push(ndcg_top_fraction(&predicted, &truth, NDCG_FRACTION)?);
            }
            None => {
                log::warn!(
                    "cluster {}: zero-variance scores, excluded from correlation",
                    set.cluster_id
                );
                skipped.push(set.cluster_id.clone());
            }
        }
    }
    if rhos.is_empty() {
        return Err(RelisError::Input(
            "every sample set was degenerate; no correlation to report".into(),
        ));
    }
    Ok(CorrelationSummary {
        mean_rho: rhos.iter().sum::<f64>() / rhos.len() as f64,
        mean_ndcg: ndcgs.iter().sum::<f64>() / ndcgs.len() as f64,
        evaluated: rhos.len(),
        skipped,
    })
}

/// Train an input-specific policy against the model's utility and roll it
/// out into a summary for the cluster.
pub fn summarise_with_model(
    cluster: &DocumentCluster,
    model: &UtilityModel,
    rl: &RlConfig,
) -> Result<Summary> {
    let index = ClusterIndex::new(cluster);
    let policy = td_learn(cluster, |y| model.utility(&index.compute_features(y)), rl)?;
    Ok(greedy_rollout(&policy, cluster))
}

/// The summary's sentences as text, one per line, in pick order.
pub fn summary_text(cluster: &DocumentCluster, summary: &Summary) -> String {
    summary
        .picks
        .iter()
        .map(|&(d, s)| cluster.sentence(d, s).raw_tokens.join(" ") + "\n")
        .collect()
}

/// Draw the per-cluster sample set (pointwise, plus pairs when asked),
/// scored by the ground-truth oracle. Seeds derive from the master seed,
/// the split name and the cluster id, so results do not depend on which
/// block is being assembled or on scheduling.
fn sample_cluster(
    master_seed: u64,
    split: &str,
    cluster: &DocumentCluster,
    samples: usize,
    pairs: usize,
) -> Result<PreferenceSet> {
    let mut rng = stream_rng(
        master_seed,
        &format!("sample/{split}/{}", cluster.cluster_id),
    );
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

fn run_block(
    config: &ExperimentConfig,
    splits: &[(String, Vec<DocumentCluster>)],
    held: usize,
) -> Result<SplitBlock> {
    let held_name = &splits[held].0;
    let train_started = Instant::now();

    // sample and featurise every training cluster (clusters in parallel)
    let train_inputs: Vec<(&str, &DocumentCluster)> = splits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != held)
        .flat_map(|(_, (name, clusters))| clusters.iter().map(move |c| (name.as_str(), c)))
        .collect();
    let pair_quota = if config.train.loss_kind.is_pairwise() {
        config.pairs_per_cluster
    } else {
        0
    };
    let training_sets: Vec<TrainingSet> = train_inputs
        .par_iter()
        .map(|(split, cluster)| {
            let set = sample_cluster(
                config.seed,
                split,
                cluster,
                config.samples_per_cluster,
                pair_quota,
            )?;
            TrainingSet::from_preferences(cluster, &set)
        })
        .collect::<Result<_>>()?;

    let train_config = TrainConfig {
        seed: stream_seed(config.seed, &format!("train/{held_name}")),
        ..config.train.clone()
    };
    let model = l2r::train(&training_sets, &train_config)?;
    let train_seconds = train_started.elapsed().as_secs_f64();

    // held-out evaluation: per-cluster sampling, RL, ROUGE (in parallel)
    let test_clusters = &splits[held].1;
    let results: Vec<(ClusterOutcome, PreferenceSet, Summary)> = test_clusters
        .par_iter()
        .map(|cluster| {
            let test_started = Instant::now();
            let eval_set = sample_cluster(
                config.seed,
                held_name,
                cluster,
                config.samples_per_cluster,
                0,
            )?;
            let rl = RlConfig {
                seed: stream_seed(
                    config.seed,
                    &format!("rl/{held_name}/{}", cluster.cluster_id),
                ),
                ..config.rl.clone()
            };
            let summary = summarise_with_model(cluster, &model, &rl)?;
            let tokens = summary.concatenated_tokens(cluster);
            let rouge = rouge_score(&tokens, &cluster.references)?;
            let outcome = ClusterOutcome {
                cluster_id: cluster.cluster_id.clone(),
                picks: summary.picks.clone(),
                word_count: summary.word_count,
                rouge1: rouge.r1,
                rouge2: rouge.r2,
                u_star: ground_truth_utility(&summary, cluster)?,
                test_seconds: test_started.elapsed().as_secs_f64(),
            };
            Ok((outcome, eval_set, summary))
        })
        .collect::<Result<_>>()?;

    let sets: Vec<(&DocumentCluster, &PreferenceSet)> = test_clusters
        .iter()
        .zip(&results)
        .map(|(cluster, (_, set, _))| (cluster, set))
        .collect();
    let correlation = evaluate_correlation(&model, &sets)?;

    // persist the produced summaries (single writer, deterministic bytes)
    let dir = config.out_dir.join("summaries").join(held_name);
    std::fs::create_dir_all(&dir)?;
    for (cluster, (_, _, summary)) in test_clusters.iter().zip(&results) {
        std::fs::write(
            dir.join(format!("{}.txt", cluster.cluster_id)),
            summary_text(cluster, summary),
        )?;
    }

    let outcomes: Vec<ClusterOutcome> = results.into_iter().map(|(o, _, _)| o).collect();
    debug_assert_eq!(outcomes.len(), test_clusters.len());
    Ok(SplitBlock {
        held_out: held_name.clone(),
        outcomes,
        mean_rho: correlation.mean_rho,
        mean_ndcg: correlation.mean_ndcg,
        skipped: correlation.skipped,
        train_meta: model.meta.clone(),
        train_seconds,
    })
}

/// Run the full leave-one-out experiment: each split takes a turn as the
/// held-out test set while the others train the reward. A failing split is
/// recorded and the remaining splits still run. Reports and summaries are
/// written under the configured output directory; wall-clock timings stay
/// out of those files so reruns are byte-identical.
pub fn run_leave_one_out(config: &ExperimentConfig) -> Result<EvaluationReport> {
    config.validate()?;
    let splits: Vec<(String, Vec<DocumentCluster>)> = config
        .splits
        .iter()
        .map(|(name, path)| {
            let clusters = load_cluster_set(path, config.length_budget)?;
            if clusters.is_empty() {
                return Err(RelisError::Input(format!(
                    "split {name}: no clusters found"
                )));
            }
            Ok((name.clone(), clusters))
        })
        .collect::<Result<_>>()?;

    let mut blocks = Vec::new();
    let mut failures = Vec::new();
    for held in 0..splits.len() {
        match run_block(config, &splits, held) {
            Ok(block) => blocks.push(block),
            Err(e) => {
                log::warn!("held-out split {} failed: {e}", splits[held].0);
                failures.push((splits[held].0.clone(), e.to_string()));
            }
        }
    }
    let report = EvaluationReport { blocks, failures };
    report::write_report(&config.out_dir, &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FEATURE_COUNT;
    use crate::l2r::LossKind;
    use crate::pipeline::synth::{synth_corpus, SynthParams};
    use rand::Rng;
    use std::path::Path;

    /// A REAPER-only scorer expressed as a utility model: weight 1 on the
    /// heuristic feature, identity normalisation.
    fn reaper_model() -> UtilityModel {
        let mut w = [0.0; FEATURE_COUNT];
        w[3] = 1.0;
        UtilityModel::with_weights(LossKind::Mse, w, 0.0)
    }

    fn tiny_experiment(dir: &Path, out: &Path) -> ExperimentConfig {
        let mut splits = Vec::new();
        for (i, name) in ["alpha", "beta", "gamma"].iter().enumerate() {
            let split_dir = dir.join(name);
            synth_corpus(
                &SynthParams {
                    clusters: 4,
                    docs_per_cluster: 2,
                    sentences_per_doc: 6,
                    length_budget: 60,
                    seed: 100 + i as u64,
                    ..SynthParams::default()
                },
                &split_dir,
            )
            .unwrap();
            splits.push((name.to_string(), split_dir));
        }
        ExperimentConfig {
            splits,
            length_budget: 60,
            train: TrainConfig {
                loss_kind: LossKind::CrossEntropy,
                epochs: 3,
                ..TrainConfig::default()
            },
            samples_per_cluster: 40,
            pairs_per_cluster: 120,
            rl: RlConfig {
                episodes: 60,
                ..RlConfig::default()
            },
            seed: 7,
            out_dir: out.to_path_buf(),
        }
    }

    #[test]
    fn leave_one_out_produces_a_block_per_split() {
        let data = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let config = tiny_experiment(data.path(), out.path());
        let report = run_leave_one_out(&config).unwrap();

        assert!(report.failures.is_empty(), "{:?}", report.failures);
        assert_eq!(report.blocks.len(), 3);
        let mut summary_files = 0;
        for block in &report.blocks {
            assert_eq!(block.outcomes.len(), 4);
            assert!(block.mean_rho.is_finite());
            assert!(block.mean_ndcg.is_finite());
            for outcome in &block.outcomes {
                assert!(outcome.rouge1.is_finite() && outcome.rouge2.is_finite());
                assert!(outcome.word_count <= config.length_budget);
                let path = out
                    .path()
                    .join("summaries")
                    .join(&block.held_out)
                    .join(format!("{}.txt", outcome.cluster_id));
                assert!(path.is_file());
                summary_files += 1;
            }
        }
        assert_eq!(summary_files, 12);
        assert!(out.path().join("report.txt").is_file());
        assert!(out.path().join("report.tsv").is_file());
    }

    #[test]
    fn rerun_with_same_seed_is_byte_identical() {
        let data = tempfile::tempdir().unwrap();
        let out_a = tempfile::tempdir().unwrap();
        let out_b = tempfile::tempdir().unwrap();
        run_leave_one_out(&tiny_experiment(data.path(), out_a.path())).unwrap();
        run_leave_one_out(&tiny_experiment(data.path(), out_b.path())).unwrap();
        for file in ["report.txt", "report.tsv"] {
            let a = std::fs::read(out_a.path().join(file)).unwrap();
            let b = std::fs::read(out_b.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between reruns");
        }
        let a = std::fs::read(out_a.path().join("summaries/alpha/c00.txt")).unwrap();
        let b = std::fs::read(out_b.path().join("summaries/alpha/c00.txt")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_split_is_a_config_error() {
        let data = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let mut config = tiny_experiment(data.path(), out.path());
        config.splits.truncate(1);
        assert!(matches!(
            run_leave_one_out(&config).unwrap_err(),
            RelisError::Config(_)
        ));
    }

    #[test]
    fn order_preserving_model_scores_perfect_correlation() {
        let params = SynthParams {
            clusters: 1,
            ..SynthParams::default()
        };
        let synth = crate::pipeline::synth::synth_cluster(&params, 0).unwrap();
        let cluster = synth.cluster;
        let model = reaper_model();
        let index = ClusterIndex::new(&cluster);

        // oracle scores := strictly increasing function of the model's own
        // utility, so the predicted ordering matches the truth exactly
        let mut rng = stream_rng(1, "corr-test");
        let mut set =
            build_pointwise_set(&cluster, 50, |y| Ok(index.reaper_score(y)), &mut rng).unwrap();
        for (_, score) in &mut set.samples {
            *score = 2.0 * *score + 1.0;
        }
        let summary = evaluate_correlation(&model, &[(&cluster, &set)]).unwrap();
        assert!((summary.mean_rho - 1.0).abs() < 1e-12);
        assert!((summary.mean_ndcg - 1.0).abs() < 1e-12);
        assert_eq!(summary.evaluated, 1);

        // negating the oracle flips ρ to −1
        for (_, score) in &mut set.samples {
            *score = -*score;
        }
        let negated = evaluate_correlation(&model, &[(&cluster, &set)]).unwrap();
        assert!((negated.mean_rho + 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_model_on_random_scores_is_near_zero() {
        let params = SynthParams {
            clusters: 1,
            docs_per_cluster: 4,
            sentences_per_doc: 12,
            ..SynthParams::default()
        };
        let synth = crate::pipeline::synth::synth_cluster(&params, 0).unwrap();
        let cluster = synth.cluster;

        let mut rng = stream_rng(2, "null-test");
        let mut weights = [0.0; FEATURE_COUNT];
        for w in &mut weights {
            *w = rng.gen_range(-1.0..1.0);
        }
        let model = UtilityModel::with_weights(LossKind::Mse, weights, 0.0);
        let mut set = build_pointwise_set(&cluster, 3000, |_| Ok(0.0), &mut rng).unwrap();
        for (_, score) in &mut set.samples {
            *score = rng.gen_range(0.0..1.0);
        }
        let summary = evaluate_correlation(&model, &[(&cluster, &set)]).unwrap();
        assert!(
            summary.mean_rho.abs() < 0.1,
            "null ρ = {}",
            summary.mean_rho
        );
    }

    #[test]
    fn degenerate_sets_are_skipped_and_all_degenerate_errors() {
        let params = SynthParams {
            clusters: 1,
            ..SynthParams::default()
        };
        let synth = crate::pipeline::synth::synth_cluster(&params, 0).unwrap();
        let cluster = synth.cluster;
        let mut rng = stream_rng(3, "degenerate-test");
        // constant oracle scores: zero variance on the truth side
        let set = build_pointwise_set(&cluster, 20, |_| Ok(1.0), &mut rng).unwrap();
        let err = evaluate_correlation(&reaper_model(), &[(&cluster, &set)]).unwrap_err();
        assert!(matches!(err, RelisError::Input(_)));

        // alongside a healthy set, the degenerate one is merely skipped
        let index = ClusterIndex::new(&cluster);
        let mut healthy =
            build_pointwise_set(&cluster, 20, |y| Ok(index.reaper_score(y)), &mut rng).unwrap();
        healthy.cluster_id = "healthy".into();
        let summary =
            evaluate_correlation(&reaper_model(), &[(&cluster, &set), (&cluster, &healthy)])
                .unwrap();
        assert_eq!(summary.evaluated, 1);
        assert_eq!(summary.skipped, std::slice::from_ref(&cluster.cluster_id));
    }
}
