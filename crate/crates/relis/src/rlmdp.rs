//! The episodic summarisation MDP and an input-specific temporal-difference
//! agent trained against a supplied reward (learned utility, exact oracle
//! ranks, or a heuristic).
//!
//! States are drafts (partial summaries); actions add one unused sentence
//! or terminate into the absorbing state. All rewards are delayed: 0 unless
//! the transition terminates the episode, in which case the reward source
//! is queried once with the finished draft (or the over-length penalty is
//! paid).
//!
//! The agent is TD(0) with a linear state value over the draft's feature
//! vector, the draft-length/budget ratio, an intercept, and one membership
//! indicator per sentence of the input cluster. The indicators let the
//! value function learn each sentence's marginal worth for this particular
//! input — without them the value surface is too coarse to separate
//! near-optimal drafts, and greedy rollouts stall on a mediocre plateau.
//! Both the behaviour policy and the greedy rollout only take actions that
//! keep the draft within budget and terminate when nothing fits, so every
//! produced summary is a member of Y_x (properness by construction). In
//! greedy selection, terminating at draft `d` competes as the state value
//! of `d` itself — the estimate of what stopping here is worth — and loses
//! ties against additions.

use rand::Rng;

use crate::corpus::DocumentCluster;
use crate::error::{RelisError, Result};
use crate::features::{ClusterIndex, DraftFeatures, FEATURE_COUNT};
use crate::sampling::{stream_rng, Summary};

/// Clusters with at most this many sentences get an additional one-hot
/// indicator per non-empty sentence subset, so the state value is exact
/// (tabular) precisely in the regime where the candidate space is small
/// enough to enumerate and fine rank distinctions decide optimality.
/// Larger clusters keep the compact basis, whose cost grows linearly.
pub const TABULAR_LIMIT: usize = 8;

/// Number of state-value features for a cluster with `sentence_count`
/// sentences: the summary features, the length/budget ratio, an intercept,
/// one membership indicator per sentence, and — for clusters within
/// [`TABULAR_LIMIT`] — one indicator per non-empty sentence subset.
pub fn value_feature_count(sentence_count: usize) -> usize {
    let subsets = if sentence_count <= TABULAR_LIMIT {
        (1 << sentence_count) - 1
    } else {
        0
    };
    FEATURE_COUNT + 2 + sentence_count + subsets
}

/// Terminal status of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    NotTerminal,
    /// Reached by the terminate action; carries the finished draft.
    Absorbing,
    /// Entered by an addition that pushed the draft past the budget.
    OverLength,
}

/// One MDP state: the draft so far and its terminal status.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpState {
    pub draft: Summary,
    pub terminal: Terminal,
}

impl MdpState {
    /// The initial state: an empty draft.
    pub fn initial() -> Self {
        MdpState {
            draft: Summary {
                picks: Vec::new(),
                word_count: 0,
            },
            terminal: Terminal::NotTerminal,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal != Terminal::NotTerminal
    }
}

/// An agent action: extend the draft or finish the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Add(usize, usize),
    Terminate,
}

/// Reward semantics of the MDP: what a finished draft is worth, and the
/// penalty for overrunning the budget. All non-terminal transitions pay 0.
pub struct RewardSpec<'a> {
    pub terminal_reward: &'a dyn Fn(&Summary) -> f64,
    pub over_length_penalty: f64,
}

/// Default over-length penalty.
pub const DEFAULT_OVER_LENGTH_PENALTY: f64 = -1.0;

/// Apply an action to a state. Terminate always yields the absorbing
/// state; an addition extends the draft and marks it over-length when the
/// budget is exceeded.
pub fn transition(state: &MdpState, action: Action, cluster: &DocumentCluster) -> Result<MdpState> {
    if state.is_terminal() {
        return Err(RelisError::Logic(
            "action applied to a terminal state".into(),
        ));
    }
    match action {
        Action::Terminate => Ok(MdpState {
            draft: state.draft.clone(),
            terminal: Terminal::Absorbing,
        }),
        Action::Add(d, s) => {
            if state.draft.picks.contains(&(d, s)) {
                return Err(RelisError::Logic(format!(
                    "sentence ({d},{s}) is already in the draft"
                )));
            }
            if d >= cluster.documents.len() || s >= cluster.documents[d].sentences.len() {
                return Err(RelisError::Logic(format!(
                    "sentence ({d},{s}) out of range"
                )));
            }
            let mut picks = state.draft.picks.clone();
            picks.push((d, s));
            let word_count = state.draft.word_count + cluster.sentence(d, s).word_count();
            let terminal = if word_count > cluster.length_budget {
                Terminal::OverLength
            } else {
                Terminal::NotTerminal
            };
            Ok(MdpState {
                draft: Summary { picks, word_count },
                terminal,
            })
        }
    }
}

/// Reward of a transition triple: the terminal reward of the draft when
/// terminating, the penalty when entering the over-length state, else 0.
pub fn reward(state: &MdpState, action: Action, next: &MdpState, spec: &RewardSpec) -> f64 {
    match action {
        Action::Terminate => (spec.terminal_reward)(&state.draft),
        Action::Add(..) => {
            if next.terminal == Terminal::OverLength {
                spec.over_length_penalty
            } else {
                0.0
            }
        }
    }
}

/// TD hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RlConfig {
    /// Episodes to run (default 3000).
    pub episodes: usize,
    /// Base learning rate; decays harmonically to a tenth over the run.
    pub learning_rate: f64,
    pub over_length_penalty: f64,
    pub seed: u64,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            episodes: 3000,
            learning_rate: 1e-3,
            over_length_penalty: DEFAULT_OVER_LENGTH_PENALTY,
            seed: 0,
        }
    }
}

/// A trained input-specific policy: the linear state-value weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TdPolicy {
    pub value_weights: Vec<f64>,
    pub episode_count: usize,
    pub seed: u64,
}

/// State-value features of a draft for a cluster of `sentences` sentences.
fn value_features(draft: &DraftFeatures, budget: usize, sentences: usize) -> Vec<f64> {
    let summary = draft.evaluate();
    let mut x = vec![0.0; value_feature_count(sentences)];
    x[..FEATURE_COUNT].copy_from_slice(&summary.values);
    x[FEATURE_COUNT] = draft.word_count() as f64 / budget as f64;
    x[FEATURE_COUNT + 1] = 1.0;
    for &id in draft.members() {
        x[FEATURE_COUNT + 2 + id] = 1.0;
    }
    if sentences <= TABULAR_LIMIT && !draft.members().is_empty() {
        let mask: usize = draft.members().iter().map(|&id| 1 << id).sum();
        x[FEATURE_COUNT + 2 + sentences + (mask - 1)] = 1.0;
    }
    x
}

fn value_of(weights: &[f64], x: &[f64]) -> f64 {
    weights.iter().zip(x).map(|(w, v)| w * v).sum()
}

/// ε(t) = max(0.05, 1 − t/(0.8·episodes)).
fn epsilon_at(episode: usize, episodes: usize) -> f64 {
    f64::max(0.05, 1.0 - episode as f64 / (0.8 * episodes as f64))
}

/// Sentences not yet in the draft whose addition stays within budget,
/// in ascending flat-id order.
fn feasible_adds(index: &ClusterIndex, draft: &DraftFeatures, budget: usize) -> Vec<usize> {
    (0..index.sentence_count())
        .filter(|&id| {
            !draft.contains(id) && draft.word_count() + index.sentence_words(id) <= budget
        })
        .collect()
}

/// Greedy action over the current draft: the addition with the highest
/// next-state value, or terminate when stopping scores strictly higher
/// (ties prefer additions, and lower flat ids among additions).
fn greedy_action(
    weights: &[f64],
    index: &ClusterIndex,
    draft: &mut DraftFeatures,
    budget: usize,
) -> Option<usize> {
    let sentences = index.sentence_count();
    let adds = feasible_adds(index, draft, budget);
    let mut best: Option<(f64, usize)> = None;
    for id in adds {
        draft.push(id);
        let v = value_of(weights, &value_features(draft, budget, sentences));
        draft.pop();
        // strict improvement keeps the lowest id on ties
        if best.is_none_or(|(bv, _)| v > bv) {
            best = Some((v, id));
        }
    }
    match best {
        None => None, // nothing fits: terminate is forced
        Some((best_v, best_id)) => {
            if draft.members().is_empty() {
                return Some(best_id); // terminating on an empty draft is illegal
            }
            let stop_v = value_of(weights, &value_features(draft, budget, sentences));
            if stop_v > best_v {
                None
            } else {
                Some(best_id)
            }
        }
    }
}

fn summary_of_draft(index: &ClusterIndex, draft: &DraftFeatures) -> Summary {
    Summary {
        picks: draft
            .members()
            .iter()
            .map(|&id| index.pick_of(id))
            .collect(),
        word_count: draft.word_count(),
    }
}

/// Train an input-specific TD(0) policy against `reward_source`.
///
/// Behaviour is ε-greedy with a linearly decaying ε; the reward source is
/// queried once per episode, with the finished draft. The learning rate
/// decays harmonically from `learning_rate` to a tenth of it.
pub fn td_learn<F>(
    cluster: &DocumentCluster,
    reward_source: F,
    config: &RlConfig,
) -> Result<TdPolicy>
where
    F: Fn(&Summary) -> f64,
{
    if config.episodes == 0 {
        return Err(RelisError::Input("episode count must be positive".into()));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(RelisError::Input("learning rate must be positive".into()));
    }
    let budget = cluster.length_budget;
    let index = ClusterIndex::new(cluster);
    if !(0..index.sentence_count()).any(|id| index.sentence_words(id) <= budget) {
        return Err(RelisError::Input(format!(
            "cluster {}: no sentence fits the length budget",
            cluster.cluster_id
        )));
    }

    let sentences = index.sentence_count();
    let mut rng = stream_rng(config.seed, "td-learn");
    let mut weights = vec![0.0; value_feature_count(sentences)];
    let episodes = config.episodes;

    // Within TABULAR_LIMIT the subset indicator alone represents every
    // state exactly, so the update reduces to tabular TD(0) with the
    // classical per-state harmonic step size (robust to reward scale);
    // larger clusters use the dense gradient step with the configured
    // rate decaying harmonically over the run.
    let tabular = sentences <= TABULAR_LIMIT;
    let mut visits = vec![0u32; if tabular { (1 << sentences) - 1 } else { 0 }];
    let subset_base = FEATURE_COUNT + 2 + sentences;
    let apply = |weights: &mut Vec<f64>,
                 visits: &mut Vec<u32>,
                 alpha: f64,
                 delta: f64,
                 x: &[f64],
                 mask: usize| {
        if tabular {
            let step = 1.0 / (1.0 + visits[mask - 1] as f64);
            weights[subset_base + mask - 1] += step * delta;
            visits[mask - 1] += 1;
        } else {
            for (w, xi) in weights.iter_mut().zip(x) {
                *w += alpha * delta * xi;
            }
        }
    };

    for episode in 0..episodes {
        let alpha =
            config.learning_rate * episodes as f64 / (episodes as f64 + 9.0 * episode as f64);
        let epsilon = epsilon_at(episode, episodes);
        let mut draft = DraftFeatures::new(&index);
        // value features and member bitmask of the current draft; None
        // while the draft is empty (the empty state is never scored or
        // updated)
        let mut current: Option<(Vec<f64>, usize)> = None;

        loop {
            let adds = feasible_adds(&index, &draft, budget);
            let explore = rng.gen_bool(epsilon);
            let chosen: Option<usize> = if adds.is_empty() {
                None // terminate is forced
            } else if explore {
                // uniform over additions plus terminate (if legal)
                let terminate_legal = !draft.members().is_empty();
                let n = adds.len() + usize::from(terminate_legal);
                let at = rng.gen_range(0..n);
                if at < adds.len() {
                    Some(adds[at])
                } else {
                    None
                }
            } else {
                greedy_action(&weights, &index, &mut draft, budget)
            };

            match chosen {
                Some(id) => {
                    draft.push(id);
                    let next_x = value_features(&draft, budget, sentences);
                    let next_mask: usize = draft.members().iter().map(|&m| 1 << m).sum();
                    if let Some((x, mask)) = current {
                        // r = 0 mid-episode: δ = V(s') − V(s)
                        let delta = value_of(&weights, &next_x) - value_of(&weights, &x);
                        apply(&mut weights, &mut visits, alpha, delta, &x, mask);
                    }
                    current = Some((next_x, next_mask));
                }
                None => {
                    let summary = summary_of_draft(&index, &draft);
                    let r = reward_source(&summary);
                    let (x, mask) = current.expect("terminated on an empty draft");
                    let delta = r - value_of(&weights, &x);
                    apply(&mut weights, &mut visits, alpha, delta, &x, mask);
                    break;
                }
            }
        }
    }

    Ok(TdPolicy {
        value_weights: weights,
        episode_count: episodes,
        seed: config.seed,
    })
}

/// Roll the greedy policy out from the empty draft. Terminate is forced
/// when no addition fits, so the result always satisfies the budget.
pub fn greedy_rollout(policy: &TdPolicy, cluster: &DocumentCluster) -> Summary {
    let index = ClusterIndex::new(cluster);
    let budget = cluster.length_budget;
    let mut draft = DraftFeatures::new(&index);
    while let Some(id) = greedy_action(&policy.value_weights, &index, &mut draft, budget) {
        draft.push(id);
    }
    summary_of_draft(&index, &draft)
}

/// Exhaustively enumerate Y_x: every non-empty sentence subset within the
/// budget, in lexicographic pick order. Errors when more than `cap`
/// members exist.
pub fn enumerate_feasible(cluster: &DocumentCluster, cap: usize) -> Result<Vec<Summary>> {
    let indices = cluster.sentence_indices();
    let words: Vec<usize> = indices
        .iter()
        .map(|&(d, s)| cluster.sentence(d, s).word_count())
        .collect();
    let budget = cluster.length_budget;
    let mut out: Vec<Summary> = Vec::new();
    let mut picks: Vec<usize> = Vec::new();

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        at: usize,
        word_count: usize,
        indices: &[(usize, usize)],
        words: &[usize],
        budget: usize,
        cap: usize,
        picks: &mut Vec<usize>,
        out: &mut Vec<Summary>,
    ) -> Result<()> {
        for i in at..indices.len() {
            if word_count + words[i] > budget {
                continue;
            }
            picks.push(i);
            if out.len() == cap {
                return Err(RelisError::Capacity(format!(
                    "feasible set exceeds cap {cap}"
                )));
            }
            out.push(Summary {
                picks: picks.iter().map(|&j| indices[j]).collect(),
                word_count: word_count + words[i],
            });
            recurse(
                i + 1,
                word_count + words[i],
                indices,
                words,
                budget,
                cap,
                picks,
                out,
            )?;
            picks.pop();
        }
        Ok(())
    }

    recurse(0, 0, &indices, &words, budget, cap, &mut picks, &mut out)?;
    Ok(out)
}
