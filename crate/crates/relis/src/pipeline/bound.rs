//! Empirical verification of the near-optimality guarantee.
//!
//! For a policy trained against a learned ranking σ̂ whose maximum rank
//! deviation from the ground truth σ* is ε, and whose expected-reward gap
//! to the σ̂-optimal policy is δ, the summary it produces must satisfy
//!
//! ```text
//! σ*(y_n)  ≥  |Y_x| − δ̂ − ε
//! ```
//!
//! because the best candidate has ground-truth rank |Y_x| by the counting
//! definition. On micro instances the feasible set Y_x is enumerable, so
//! both ε (the max deviation over all candidates) and δ̂ (the σ̂-rank gap
//! between the enumeration optimum and the greedy rollout) are measured
//! exactly rather than bounded.

use rayon::prelude::*;

use crate::corpus::DocumentCluster;
use crate::error::{RelisError, Result};
use crate::features::ClusterIndex;
use crate::l2r::{fit_single_set, LossKind, TrainConfig, TrainingSet};
use crate::pipeline::synth::micro_cluster;
use crate::ranking::ranking_from_scores;
use crate::rlmdp::{enumerate_feasible, greedy_rollout, td_learn, RlConfig};
use crate::rouge::ground_truth_utility;
use crate::sampling::{build_pointwise_set, stream_rng, stream_seed, Summary};

/// Parameters of a bound-verification run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub trials: usize,
    /// Random summaries drawn to train the utility in each trial.
    pub sample_size: usize,
    pub loss_kind: LossKind,
    pub epochs: usize,
    pub learning_rate: f64,
    /// TD episodes per trial.
    pub episodes: usize,
    /// Hard ceiling on |Y_x|; larger instances are a capacity error.
    pub enumeration_cap: usize,
    pub seed: u64,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams {
            trials: 100,
            sample_size: 80,
            loss_kind: LossKind::Mse,
            epochs: 40,
            learning_rate: 0.05,
            episodes: 2000,
            enumeration_cap: 200,
            seed: 0,
        }
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundTrial {
    pub trial: usize,
    /// |Y_x| — also the ground-truth rank of the best candidate.
    pub candidate_count: usize,
    /// max_y |σ̂(y) − σ*(y)| over the whole feasible set.
    pub epsilon: usize,
    /// |Y_x| − σ̂(y_n): the σ̂-rank the rollout left on the table.
    pub delta_hat: usize,
    /// σ*(y_n) of the greedy rollout.
    pub achieved_rank: usize,
    /// Right-hand side |Y_x| − δ̂ − ε (may be negative).
    pub bound: i64,
    pub holds: bool,
}

/// Aggregate over all trials.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub trials: Vec<BoundTrial>,
    pub violations: usize,
    pub mean_epsilon: f64,
    pub mean_delta_hat: f64,
}

/// Check the inequality for one cluster given both rankings over its
/// enumerated feasible set. The TD policy is trained against σ̂ (the only
/// ranking available to it) and judged against σ*.
pub(crate) fn trial_core(
    trial: usize,
    cluster: &DocumentCluster,
    candidates: &[Summary],
    sigma_star: &[usize],
    sigma_hat: &[usize],
    episodes: usize,
    rl_seed: u64,
) -> Result<BoundTrial> {
    let n = candidates.len();
    let hat_of: std::collections::BTreeMap<Vec<(usize, usize)>, usize> = candidates
        .iter()
        .zip(sigma_hat)
        .map(|(y, &r)| (y.canonical_picks(), r))
        .collect();
    let star_of: std::collections::BTreeMap<Vec<(usize, usize)>, usize> = candidates
        .iter()
        .zip(sigma_star)
        .map(|(y, &r)| (y.canonical_picks(), r))
        .collect();

    let epsilon = sigma_star
        .iter()
        .zip(sigma_hat)
        .map(|(&s, &h)| s.abs_diff(h))
        .max()
        .ok_or_else(|| RelisError::Input("empty feasible set".into()))?;

    let rl = RlConfig {
        episodes,
        seed: rl_seed,
        ..RlConfig::default()
    };
    let policy = td_learn(cluster, |y| hat_of[&y.canonical_picks()] as f64, &rl)?;
    let rolled = greedy_rollout(&policy, cluster);
    let key = rolled.canonical_picks();

    let hat_rank = hat_of[&key];
    let achieved_rank = star_of[&key];
    let delta_hat = n - hat_rank;
    let bound = n as i64 - delta_hat as i64 - epsilon as i64;
    Ok(BoundTrial {
        trial,
        candidate_count: n,
        epsilon,
        delta_hat,
        achieved_rank,
        bound,
        holds: achieved_rank as i64 >= bound,
    })
}

/// Run one full trial: generate a micro instance, enumerate its feasible
/// set, rank it by U*, learn a utility from a random sample, and check the
/// inequality on the TD rollout.
fn run_trial(params: &BoundParams, trial: usize) -> Result<BoundTrial> {
    let cluster = micro_cluster(stream_seed(params.seed, &format!("bound/{trial}")));
    let candidates = enumerate_feasible(&cluster, params.enumeration_cap)?;
    let truth: Vec<f64> = candidates
        .iter()
        .map(|y| ground_truth_utility(y, &cluster))
        .collect::<Result<_>>()?;
    let sigma_star = ranking_from_scores(&truth)?.ranks;

    // learn σ̂ from a random pointwise sample of the instance
    let mut rng = stream_rng(params.seed, &format!("bound-sample/{trial}"));
    let set = build_pointwise_set(
        &cluster,
        params.sample_size,
        |y| ground_truth_utility(y, &cluster),
        &mut rng,
    )?;
    let training = TrainingSet::from_preferences(&cluster, &set)?;
    let model = fit_single_set(
        &training,
        &TrainConfig {
            loss_kind: params.loss_kind,
            learning_rate: params.learning_rate,
            epochs: params.epochs,
            seed: stream_seed(params.seed, &format!("bound-fit/{trial}")),
            ..TrainConfig::default()
        },
    )?;

    let index = ClusterIndex::new(&cluster);
    let predicted: Vec<crate::features::FeatureVector> = candidates
        .iter()
        .map(|y| index.compute_features(y))
        .collect();
    let sigma_hat = model.predict_ranking(&predicted)?.ranks;

    trial_core(
        trial,
        &cluster,
        &candidates,
        &sigma_star,
        &sigma_hat,
        params.episodes,
        stream_seed(params.seed, &format!("bound-rl/{trial}")),
    )
}

/// Run `params.trials` independent trials and count violations.
pub fn verify_bound(params: &BoundParams) -> Result<BoundReport> {
    if params.trials == 0 {
        return Err(RelisError::Input("trial count must be positive".into()));
    }
    let trials: Vec<BoundTrial> = (0..params.trials)
        .into_par_iter()
        .map(|t| run_trial(params, t))
        .collect::<Result<_>>()?;
    let violations = trials.iter().filter(|t| !t.holds).count();
    let mean =
        |f: &dyn Fn(&BoundTrial) -> f64| trials.iter().map(f).sum::<f64>() / trials.len() as f64;
    Ok(BoundReport {
        violations,
        mean_epsilon: mean(&|t| t.epsilon as f64),
        mean_delta_hat: mean(&|t| t.delta_hat as f64),
        trials,
    })
}

/// Line-oriented rendering (one line per trial plus a summary line).
pub fn render_bound(report: &BoundReport) -> String {
    let mut out = String::new();
    for t in &report.trials {
        out.push_str(&format!(
            "trial\t{}\tcandidates\t{}\tepsilon\t{}\tdelta_hat\t{}\tachieved\t{}\tbound\t{}\tholds\t{}\n",
            t.trial, t.candidate_count, t.epsilon, t.delta_hat, t.achieved_rank, t.bound, t.holds
        ));
    }
    out.push_str(&format!(
        "total\ttrials\t{}\tviolations\t{}\tmean_epsilon\t{:.6}\tmean_delta_hat\t{:.6}\n",
        report.trials.len(),
        report.violations,
        report.mean_epsilon,
        report.mean_delta_hat
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// σ* and the enumerated candidates of a micro instance.
    fn instance(seed: u64) -> (DocumentCluster, Vec<Summary>, Vec<usize>) {
        let cluster = micro_cluster(seed);
        let candidates = enumerate_feasible(&cluster, 200).unwrap();
        let truth: Vec<f64> = candidates
            .iter()
            .map(|y| ground_truth_utility(y, &cluster).unwrap())
            .collect();
        let sigma_star = ranking_from_scores(&truth).unwrap().ranks;
        (cluster, candidates, sigma_star)
    }

    #[test]
    fn oracle_ranking_makes_the_bound_tight() {
        // σ̂ = σ*: ε = 0; a converged policy also leaves δ̂ = 0, so the
        // inequality collapses to σ*(y_n) = |Y_x|
        let (cluster, candidates, sigma_star) = instance(5);
        let trial =
            trial_core(0, &cluster, &candidates, &sigma_star, &sigma_star, 4000, 12).unwrap();
        assert_eq!(trial.epsilon, 0);
        assert_eq!(trial.delta_hat, 0, "policy did not converge");
        assert_eq!(trial.achieved_rank, trial.candidate_count);
        assert_eq!(trial.bound, trial.candidate_count as i64);
        assert!(trial.holds);
    }

    #[test]
    fn corrupted_ranking_still_satisfies_the_inequality() {
        let (cluster, candidates, sigma_star) = instance(6);
        let n = candidates.len();
        // corrupt σ̂: demote the true best to rank 1 and promote the worst
        let best = sigma_star.iter().position(|&r| r == n).unwrap();
        let worst_rank = *sigma_star.iter().min().unwrap();
        let worst = sigma_star.iter().position(|&r| r == worst_rank).unwrap();
        let mut sigma_hat = sigma_star.clone();
        sigma_hat.swap(best, worst);
        let expected_epsilon = n - worst_rank;

        let trial = trial_core(0, &cluster, &candidates, &sigma_star, &sigma_hat, 2000, 3).unwrap();
        assert_eq!(trial.epsilon, expected_epsilon);
        assert!(trial.epsilon > 0);
        assert!(trial.holds, "{trial:?}");
    }

    #[test]
    fn small_run_reports_no_violations() {
        let params = BoundParams {
            trials: 6,
            episodes: 600,
            ..BoundParams::default()
        };
        let report = verify_bound(&params).unwrap();
        assert_eq!(report.trials.len(), 6);
        assert_eq!(report.violations, 0);
        assert!(report.mean_epsilon.is_finite());
        // every trial actually enumerated something and measured the pieces
        for t in &report.trials {
            assert!(t.candidate_count > 0 && t.candidate_count <= 200);
            assert!(t.achieved_rank >= 1 && t.achieved_rank <= t.candidate_count);
        }
    }

    #[test]
    fn zero_trials_is_input_error() {
        let params = BoundParams {
            trials: 0,
            ..BoundParams::default()
        };
        assert!(matches!(
            verify_bound(&params).unwrap_err(),
            RelisError::Input(_)
        ));
    }

    #[test]
    fn rendering_is_line_oriented_and_stable() {
        let params = BoundParams {
            trials: 2,
            episodes: 200,
            ..BoundParams::default()
        };
        let a = render_bound(&verify_bound(&params).unwrap());
        let b = render_bound(&verify_bound(&params).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 3);
        assert!(a.ends_with('\n'));
    }
}
