//! Synthetic corpus generation.
//!
//! Real multi-document summarisation benchmarks are licence-restricted, so
//! experiments here run on generated clusters: each cluster draws most of
//! its content words from a cluster-specific, skew-weighted topic
//! vocabulary, mixes in shared filler words, stopwords and capitalised
//! two-token entities, and plants a reference summary made of the most
//! topical sentences. Everything is a pure function of the parameters and
//! seed, down to the bytes written on disk.

use std::fs;
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::*;

use crate::corpus::{parse_sentences, Document, DocumentCluster};
use crate::error::{RelisError, Result};
use crate::sampling::stream_rng;

/// Shape of a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub clusters: usize,
    pub docs_per_cluster: usize,
    pub sentences_per_doc: usize,
    /// Size of the shared filler vocabulary.
    pub vocabulary: usize,
    /// Zipf-like exponent of the per-cluster topic distribution; larger
    /// values concentrate content on fewer topic words.
    pub topic_skew: f64,
    pub length_budget: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            clusters: 4,
            docs_per_cluster: 3,
            sentences_per_doc: 10,
            vocabulary: 400,
            topic_skew: 1.1,
            length_budget: 100,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0
            || self.docs_per_cluster == 0
            || self.sentences_per_doc == 0
            || self.vocabulary == 0
            || self.length_budget == 0
        {
            return Err(RelisError::Config("corpus sizes must be positive".into()));
        }
        if !(self.topic_skew.is_finite() && self.topic_skew > 0.0) {
            return Err(RelisError::Config("topic skew must be positive".into()));
        }
        Ok(())
    }
}

/// Topic words per cluster.
const TOPIC_WORDS: usize = 24;
/// Entities per cluster.
const ENTITY_POOL: usize = 4;
/// Chance that a content slot draws a topic word over a filler word.
const TOPIC_RATE: f64 = 0.6;
/// Stopwords sprinkled into generated sentences.
const SPRINKLE: [&str; 8] = ["the", "of", "and", "in", "to", "for", "with", "on"];

/// A generated cluster plus the sentences its reference was planted from.
#[derive(Debug, Clone)]
pub struct SynthCluster {
    pub cluster: DocumentCluster,
    /// Picks whose sentences make up the reference, in cluster order.
    pub planted: Vec<(usize, usize)>,
}

/// Generate the `idx`-th cluster of a corpus (in memory).
pub fn synth_cluster(params: &SynthParams, idx: usize) -> Result<SynthCluster> {
    params.validate()?;
    let mut rng = stream_rng(params.seed, &format!("synth/{idx}"));

    let topic: Vec<String> = (0..TOPIC_WORDS).map(|k| format!("t{idx}w{k:02}")).collect();
    let weights: Vec<f64> = (0..TOPIC_WORDS)
        .map(|k| ((k + 1) as f64).powf(-params.topic_skew))
        .collect();
    let topic_dist = WeightedIndex::new(&weights)
        .map_err(|e| RelisError::Logic(format!("topic weights: {e}")))?;
    let entities: Vec<[String; 2]> = (0..ENTITY_POOL)
        .map(|e| [format!("Norin{idx}"), format!("Vale{e}")])
        .collect();

    let mut documents = Vec::new();
    for d in 0..params.docs_per_cluster {
        let mut lines = Vec::new();
        for _ in 0..params.sentences_per_doc {
            let len = rng.gen_range(7..=12);
            let mut words: Vec<String> = (0..len)
                .map(|_| {
                    if rng.gen_bool(TOPIC_RATE) {
                        topic[topic_dist.sample(&mut rng)].clone()
                    } else {
                        format!("filler{:03}", rng.gen_range(0..params.vocabulary))
                    }
                })
                .collect();
            if rng.gen_bool(0.35) {
                let at = rng.gen_range(0..=words.len());
                words.insert(at, SPRINKLE[rng.gen_range(0..SPRINKLE.len())].to_string());
            }
            if rng.gen_bool(0.25) {
                // keep entities off position 0 so the run is unambiguous
                let at = rng.gen_range(1..=words.len());
                let entity = &entities[rng.gen_range(0..entities.len())];
                words.insert(at, entity[1].clone());
                words.insert(at, entity[0].clone());
            }
            lines.push(words.join(" "));
        }
        let doc_id = format!("d{d}");
        let sentences = parse_sentences(&lines.join("\n"), &doc_id);
        documents.push(Document { doc_id, sentences });
    }

    // plant the reference: most topical sentences first, as many as fit
    let topic_weight = |raw: &str| -> f64 {
        raw.split_whitespace()
            .filter_map(|w| topic.iter().position(|t| t == &w.to_lowercase()))
            .map(|k| weights[k])
            .sum()
    };
    let mut scored: Vec<((usize, usize), f64, usize)> = Vec::new();
    for (d, doc) in documents.iter().enumerate() {
        for (s, sentence) in doc.sentences.iter().enumerate() {
            let raw = sentence.raw_tokens.join(" ");
            scored.push(((d, s), topic_weight(&raw), sentence.word_count()));
        }
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut planted = Vec::new();
    let mut ref_words = 0usize;
    for &(pick, _, wc) in &scored {
        if ref_words + wc <= params.length_budget {
            planted.push(pick);
            ref_words += wc;
        }
    }
    planted.sort_unstable();
    let reference: Vec<String> = planted
        .iter()
        .flat_map(|&(d, s)| documents[d].sentences[s].tokens.clone())
        .collect();

    let cluster = DocumentCluster {
        cluster_id: format!("c{idx:02}"),
        documents,
        references: vec![reference],
        length_budget: params.length_budget,
    };
    cluster.validate()?;
    Ok(SynthCluster { cluster, planted })
}

/// Generate a corpus on disk in the loader's layout
/// (`<out>/<cluster>/docs/*.txt`, `<out>/<cluster>/refs/*.txt`).
/// Returns the cluster ids written.
pub fn synth_corpus(params: &SynthParams, out_dir: &Path) -> Result<Vec<String>> {
    params.validate()?;
    let mut ids = Vec::new();
    for idx in 0..params.clusters {
        let synth = synth_cluster(params, idx)?;
        let cluster = &synth.cluster;
        let root = out_dir.join(&cluster.cluster_id);
        fs::create_dir_all(root.join("docs"))?;
        fs::create_dir_all(root.join("refs"))?;
        for doc in &cluster.documents {
            let text: String = doc
                .sentences
                .iter()
                .map(|s| s.raw_tokens.join(" ") + "\n")
                .collect();
            fs::write(root.join("docs").join(format!("{}.txt", doc.doc_id)), text)?;
        }
        // one reference sentence per line, in cluster order
        let ref_text: String = synth
            .planted
            .iter()
            .map(|&(d, s)| cluster.documents[d].sentences[s].raw_tokens.join(" ") + "\n")
            .collect();
        fs::write(root.join("refs").join("r0.txt"), ref_text)?;
        ids.push(cluster.cluster_id.clone());
    }
    Ok(ids)
}

/// A micro instance: a cluster small enough that its feasible set can be
/// enumerated exhaustively (2 docs × 3 sentences, budget 26, so at most 41
/// candidate summaries). Used by the bound verifier and optimality checks.
pub fn micro_cluster(seed: u64) -> DocumentCluster {
    let mut rng = stream_rng(seed, "micro");
    let topic: Vec<String> = (0..10).map(|k| format!("m{k}")).collect();
    let weights: Vec<f64> = (0..10).map(|k| 1.0 / (k + 1) as f64).collect();
    let topic_dist = WeightedIndex::new(&weights).expect("static weights");

    let mut documents = Vec::new();
    let mut all: Vec<(usize, usize, f64)> = Vec::new();
    for d in 0..2 {
        let mut sentences = Vec::new();
        for s in 0..3 {
            let len = rng.gen_range(8..=12);
            let mut words: Vec<String> = (0..len)
                .map(|_| {
                    if rng.gen_bool(0.7) {
                        topic[topic_dist.sample(&mut rng)].clone()
                    } else {
                        format!("pad{}", rng.gen_range(0..6))
                    }
                })
                .collect();
            if rng.gen_bool(0.3) {
                let at = rng.gen_range(1..=words.len());
                words.insert(at, format!("Point{}", rng.gen_range(0..2)));
                words.insert(at, "Haven".to_string());
            }
            let weight: f64 = words
                .iter()
                .filter_map(|w| topic.iter().position(|t| t == w))
                .map(|k| weights[k])
                .sum();
            all.push((d, s, weight));
            let mut parsed = parse_sentences(&words.join(" "), "micro");
            sentences.push(parsed.remove(0));
        }
        documents.push(Document {
            doc_id: format!("d{d}"),
            sentences,
        });
    }

    // reference: the two most topical sentences
    all.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap()
            .then((a.0, a.1).cmp(&(b.0, b.1)))
    });
    let reference: Vec<String> = all[..2]
        .iter()
        .flat_map(|&(d, s, _)| documents[d].sentences[s].tokens.clone())
        .collect();

    DocumentCluster {
        cluster_id: format!("micro{seed:08x}"),
        documents,
        references: vec![reference],
        length_budget: 26,
    }
}
