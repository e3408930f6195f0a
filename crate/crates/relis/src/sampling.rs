//! Candidate-summary sampling: random draws from Y_x and construction of
//! pointwise / pairwise training sets labelled by an oracle.
//!
//! Each cluster's sampling owns an independent random stream derived from
//! the master seed and the cluster id, so clusters can be processed in
//! parallel without sharing RNG state.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentCluster;
use crate::error::{RelisError, Result};

/// One candidate summary: the ordered (document, sentence) picks and the
/// cached total word count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub picks: Vec<(usize, usize)>,
    pub word_count: usize,
}

impl Summary {
    /// Build a summary from picks, validating indices and uniqueness and
    /// computing the word count.
    pub fn from_picks(cluster: &DocumentCluster, picks: Vec<(usize, usize)>) -> Result<Summary> {
        let mut seen = BTreeSet::new();
        let mut word_count = 0;
        for &(d, s) in &picks {
            if d >= cluster.documents.len() || s >= cluster.documents[d].sentences.len() {
                return Err(RelisError::Input(format!(
                    "pick ({d},{s}) out of range for cluster {}",
                    cluster.cluster_id
                )));
            }
            if !seen.insert((d, s)) {
                return Err(RelisError::Input(format!("duplicate pick ({d},{s})")));
            }
            word_count += cluster.sentence(d, s).word_count();
        }
        Ok(Summary { picks, word_count })
    }

    /// All tokens of the picked sentences, concatenated in pick order.
    pub fn concatenated_tokens(&self, cluster: &DocumentCluster) -> Vec<String> {
        let mut out = Vec::with_capacity(self.word_count);
        for &(d, s) in &self.picks {
            out.extend(cluster.sentence(d, s).tokens.iter().cloned());
        }
        out
    }

    /// Picks sorted ascending: the order-insensitive identity of the
    /// summary as a sentence set.
    pub fn canonical_picks(&self) -> Vec<(usize, usize)> {
        let mut p = self.picks.clone();
        p.sort_unstable();
        p
    }

    pub fn is_empty(&self) -> bool {
        self.picks.is_empty()
    }
}

/// A preference between two sampled summaries, stored as indices into the
/// owning [`PreferenceSet`]'s `samples` (the persisted form uses the same
/// indices). `preferred_first` is true iff the oracle strictly prefers
/// `samples[first]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub first: usize,
    pub second: usize,
    pub preferred_first: bool,
}

/// Sampled candidates for one cluster with oracle scores, plus optional
/// preference pairs over them.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceSet {
    pub cluster_id: String,
    pub samples: Vec<(Summary, f64)>,
    pub pairs: Vec<PreferencePair>,
    /// Non-fatal notes, e.g. when fewer than the requested N distinct
    /// summaries exist.
    pub warnings: Vec<String>,
}

/// FNV-1a over the master seed and a label; used to give every
/// (cluster, purpose) pair its own reproducible random stream.
pub fn stream_seed(master: u64, label: &str) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut h = OFFSET;
    for byte in master.to_le_bytes().iter().chain(label.as_bytes()) {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// A seeded RNG for the stream identified by (master seed, label).
pub fn stream_rng(master: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, label))
}

/// Draw one random summary: pick uniformly among unused sentences and stop
/// at the first pick that would exceed the length budget. The first pick is
/// redrawn among the remaining sentences instead of stopping, so the result
/// is never empty.
pub fn sample_random_summary<R: Rng>(cluster: &DocumentCluster, rng: &mut R) -> Result<Summary> {
    let budget = cluster.length_budget;
    let mut unused = cluster.sentence_indices();
    if !unused
        .iter()
        .any(|&(d, s)| cluster.sentence(d, s).word_count() <= budget)
    {
        return Err(RelisError::Input(format!(
            "cluster {}: no sentence fits the length budget {budget}",
            cluster.cluster_id
        )));
    }

    let mut picks = Vec::new();
    let mut word_count = 0;
    while !unused.is_empty() {
        let at = rng.gen_range(0..unused.len());
        let (d, s) = unused[at];
        let wc = cluster.sentence(d, s).word_count();
        if word_count + wc > budget {
            if picks.is_empty() {
                // cannot stop on an empty draft; drop this sentence and redraw
                unused.swap_remove(at);
                continue;
            }
            break;
        }
        unused.swap_remove(at);
        picks.push((d, s));
        word_count += wc;
    }
    Ok(Summary { picks, word_count })
}

/// Sample `n` summaries that are distinct as sentence sets and score each
/// with the oracle. Gives up after `10·n` draws and records a warning if
/// fewer distinct summaries were found.
pub fn build_pointwise_set<R, F>(
    cluster: &DocumentCluster,
    n: usize,
    oracle: F,
    rng: &mut R,
) -> Result<PreferenceSet>
where
    R: Rng,
    F: Fn(&Summary) -> Result<f64>,
{
    if n == 0 {
        return Err(RelisError::Input("sample count must be positive".into()));
    }
    let mut seen = BTreeSet::new();
    let mut samples = Vec::new();
    let mut warnings = Vec::new();
    let mut attempts = 0usize;
    while samples.len() < n && attempts < 10 * n {
        attempts += 1;
        let summary = sample_random_summary(cluster, rng)?;
        if seen.insert(summary.canonical_picks()) {
            let score = oracle(&summary)?;
            samples.push((summary, score));
        }
    }
    if samples.len() < n {
        let msg = format!(
            "cluster {}: only {} distinct summaries found after {} draws (requested {})",
            cluster.cluster_id,
            samples.len(),
            attempts,
            n
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(PreferenceSet {
        cluster_id: cluster.cluster_id.clone(),
        samples,
        pairs: Vec::new(),
        warnings,
    })
}

/// Count unordered sample pairs with distinct scores.
fn count_untied_pairs(scores: &[f64]) -> usize {
    // group equal scores: untied = C(n,2) − Σ_group C(m,2)
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let total = n * (n - 1) / 2;
    let mut tied = 0usize;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let m = j - i + 1;
        tied += m * (m - 1) / 2;
        i = j + 1;
    }
    total - tied
}

/// Populate `set.pairs` with `k` preference pairs drawn uniformly without
/// replacement from the unordered pairs of samples whose oracle scores
/// differ. Tied pairs are skipped and redrawn; `k` is capped at the number
/// of untied pairs. Errors when every pair is tied (no trainable signal).
pub fn build_pairwise_set<R: Rng>(
    mut set: PreferenceSet,
    k: usize,
    rng: &mut R,
) -> Result<PreferenceSet> {
    if k == 0 {
        return Err(RelisError::Input("pair count must be positive".into()));
    }
    let n = set.samples.len();
    if n < 2 {
        return Err(RelisError::Input(format!(
            "cluster {}: need at least two samples to draw pairs",
            set.cluster_id
        )));
    }
    let scores: Vec<f64> = set.samples.iter().map(|(_, s)| *s).collect();
    let untied = count_untied_pairs(&scores);
    if untied == 0 {
        return Err(RelisError::Format(format!(
            "cluster {}: all sampled summaries have tied oracle scores",
            set.cluster_id
        )));
    }
    let target = k.min(untied);
    let total = n * (n - 1) / 2;

    let mut pairs = Vec::with_capacity(target);
    if total <= 4 * target || total <= (1 << 16) {
        // dense regime: enumerate untied pairs and take a random prefix
        let mut all: Vec<(usize, usize)> = Vec::with_capacity(untied);
        for i in 0..n {
            for j in (i + 1)..n {
                if scores[i] != scores[j] {
                    all.push((i, j));
                }
            }
        }
        let (chosen, _) = all.partial_shuffle(rng, target);
        for &(i, j) in chosen.iter() {
            pairs.push(PreferencePair {
                first: i,
                second: j,
                preferred_first: scores[i] > scores[j],
            });
        }
    } else {
        // sparse regime: rejection-sample fresh pairs
        let mut seen = std::collections::HashSet::with_capacity(2 * target);
        while pairs.len() < target {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a == b {
                continue;
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((i, j)) || scores[i] == scores[j] {
                continue;
            }
            pairs.push(PreferencePair {
                first: i,
                second: j,
                preferred_first: scores[i] > scores[j],
            });
        }
    }
    set.pairs = pairs;
    Ok(set)
}

/// One line of the persisted sample/pair file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Record {
    Sample {
        cluster_id: String,
        picks: Vec<(usize, usize)>,
        score: f64,
    },
    Pair {
        cluster_id: String,
        i: usize,
        j: usize,
        preferred_first: bool,
    },
}

/// Write a preference set as line-delimited records: every sample
/// (`{cluster_id, picks, score}`) followed by every pair
/// (`{cluster_id, i, j, preferred_first}`).
pub fn write_preference_set<W: Write>(set: &PreferenceSet, out: &mut W) -> Result<()> {
    for (summary, score) in &set.samples {
        let record = Record::Sample {
            cluster_id: set.cluster_id.clone(),
            picks: summary.picks.clone(),
            score: *score,
        };
        serde_json::to_writer(&mut *out, &record)?;
        out.write_all(b"\n")?;
    }
    for pair in &set.pairs {
        let record = Record::Pair {
            cluster_id: set.cluster_id.clone(),
            i: pair.first,
            j: pair.second,
            preferred_first: pair.preferred_first,
        };
        serde_json::to_writer(&mut *out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read preference sets written by [`write_preference_set`], rebuilding
/// summaries against the given clusters (word counts are recomputed and
/// picks validated). Returns one set per cluster id present, in the order
/// cluster ids first appear in the file.
pub fn read_preference_sets<R: BufRead>(
    input: R,
    clusters: &[DocumentCluster],
) -> Result<Vec<PreferenceSet>> {
    let mut order: Vec<String> = Vec::new();
    let mut sets: std::collections::BTreeMap<String, PreferenceSet> = Default::default();
    let find_cluster = |id: &str| -> Result<&DocumentCluster> {
        clusters
            .iter()
            .find(|c| c.cluster_id == id)
            .ok_or_else(|| RelisError::Format(format!("unknown cluster id in samples file: {id}")))
    };
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| RelisError::Format(format!("samples file line {}: {e}", lineno + 1)))?;
        match record {
            Record::Sample {
                cluster_id,
                picks,
                score,
            } => {
                let cluster = find_cluster(&cluster_id)?;
                let summary = Summary::from_picks(cluster, picks)?;
                let entry = sets.entry(cluster_id.clone()).or_insert_with(|| {
                    order.push(cluster_id.clone());
                    PreferenceSet {
                        cluster_id,
                        samples: Vec::new(),
                        pairs: Vec::new(),
                        warnings: Vec::new(),
                    }
                });
                entry.samples.push((summary, score));
            }
            Record::Pair {
                cluster_id,
                i,
                j,
                preferred_first,
            } => {
                let entry = sets.entry(cluster_id.clone()).or_insert_with(|| {
                    order.push(cluster_id.clone());
                    PreferenceSet {
                        cluster_id,
                        samples: Vec::new(),
                        pairs: Vec::new(),
                        warnings: Vec::new(),
                    }
                });
                entry.pairs.push(PreferencePair {
                    first: i,
                    second: j,
                    preferred_first,
                });
            }
        }
    }
    for set in sets.values() {
        for pair in &set.pairs {
            if pair.first >= set.samples.len() || pair.second >= set.samples.len() {
                return Err(RelisError::Format(format!(
                    "cluster {}: pair ({}, {}) references missing samples",
                    set.cluster_id, pair.first, pair.second
                )));
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|id| sets.remove(&id).unwrap())
        .collect())
}
