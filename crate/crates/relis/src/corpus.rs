//! Document clusters: loading, tokenisation, n-grams and heuristic named
//! entities.
//!
//! A cluster directory holds plain-text documents and reference summaries,
//! one sentence per line:
//!
//! ```text
//! <cluster_id>/docs/<doc_id>.txt
//! <cluster_id>/refs/<ref_id>.txt
//! ```
//!
//! Everything here is immutable after construction and safe to share across
//! threads.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{RelisError, Result};

/// Fixed English stopword list, one word per line, compiled into the binary.
const STOPWORD_DATA: &str = include_str!("../data/stopwords.txt");

/// True if `word` (already lowercased) is on the built-in stopword list.
pub fn is_stopword(word: &str) -> bool {
    STOPWORD_DATA.lines().any(|w| w == word)
}

/// One tokenised sentence. `tokens` are lowercased; `raw_tokens` keep the
/// original case for named-entity detection. Both have the same length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub raw_tokens: Vec<String>,
}

impl Sentence {
    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }
}

/// One source document: a dense list of sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
}

/// One input `x`: documents to summarise, reference summaries to score
/// against, and the word budget a summary must respect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentCluster {
    pub cluster_id: String,
    pub documents: Vec<Document>,
    /// Each reference as a flat lowercased token sequence.
    pub references: Vec<Vec<String>>,
    pub length_budget: usize,
}

impl DocumentCluster {
    /// Total number of sentences across all documents.
    pub fn sentence_count(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    pub fn sentence(&self, doc: usize, sent: usize) -> &Sentence {
        &self.documents[doc].sentences[sent]
    }

    /// All (document, sentence) index pairs in document order.
    pub fn sentence_indices(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.sentence_count());
        for (d, doc) in self.documents.iter().enumerate() {
            for s in 0..doc.sentences.len() {
                out.push((d, s));
            }
        }
        out
    }

    /// Validate the type invariants; used by loaders and synthetic builders.
    pub fn validate(&self) -> Result<()> {
        if self.length_budget == 0 {
            return Err(RelisError::Config("length_budget must be positive".into()));
        }
        if self.documents.is_empty() {
            return Err(RelisError::Format(format!(
                "cluster {}: no documents",
                self.cluster_id
            )));
        }
        if self.references.is_empty() {
            return Err(RelisError::Format(format!(
                "cluster {}: no references",
                self.cluster_id
            )));
        }
        for doc in &self.documents {
            if doc.sentences.is_empty() {
                return Err(RelisError::Format(format!(
                    "cluster {}: document {} has no sentences",
                    self.cluster_id, doc.doc_id
                )));
            }
            for s in &doc.sentences {
                if s.tokens.is_empty() || s.tokens.len() != s.raw_tokens.len() {
                    return Err(RelisError::Logic(format!(
                        "cluster {}: malformed sentence in {}",
                        self.cluster_id, doc.doc_id
                    )));
                }
            }
        }
        if self.references.iter().any(|r| r.is_empty()) {
            return Err(RelisError::Format(format!(
                "cluster {}: empty reference",
                self.cluster_id
            )));
        }
        Ok(())
    }
}

/// Strip leading/trailing non-alphanumeric characters from a raw token,
/// keeping internal hyphens and apostrophes. Returns `None` when nothing
/// alphanumeric is left.
fn trim_token(raw: &str) -> Option<&str> {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed)
    }
}

/// Tokenise one sentence of text: split on Unicode whitespace, strip
/// surrounding punctuation, lowercase. Returns (lowercased, original-case)
/// token lists of equal length. Idempotent: feeding the joined lowercased
/// output back in reproduces it.
pub fn tokenize_sentence(text: &str) -> (Vec<String>, Vec<String>) {
    let mut tokens = Vec::new();
    let mut raw_tokens = Vec::new();
    for piece in text.split_whitespace() {
        if let Some(core) = trim_token(piece) {
            tokens.push(core.to_lowercase());
            raw_tokens.push(core.to_string());
        }
    }
    (tokens, raw_tokens)
}

/// Parse a one-sentence-per-line text block into sentences, dropping lines
/// that tokenise to nothing (with a warning naming `origin`).
pub fn parse_sentences(text: &str, origin: &str) -> Vec<Sentence> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let (tokens, raw_tokens) = tokenize_sentence(line);
        if tokens.is_empty() {
            if !line.trim().is_empty() {
                log::warn!("{origin}: line {} tokenised to nothing, dropped", i + 1);
            }
            continue;
        }
        out.push(Sentence { tokens, raw_tokens });
    }
    out
}

/// Read all `.txt` files in a directory in lexicographic filename order.
fn read_text_files(dir: &Path) -> Result<Vec<(String, String)>> {
    let mut entries: Vec<_> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|e| e.path().extension().is_some_and(|x| x == "txt"))
        .collect();
    entries.sort_by_key(|e| e.file_name());
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.path();
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        out.push((stem, fs::read_to_string(&path)?));
    }
    Ok(out)
}

/// Load one cluster from `<path>/docs/*.txt` and `<path>/refs/*.txt`.
/// Files are read in filename order so identical bytes give identical
/// clusters.
pub fn load_cluster(path: &Path, length_budget: usize) -> Result<DocumentCluster> {
    if !path.is_dir() {
        return Err(RelisError::Input(format!(
            "cluster directory not found: {}",
            path.display()
        )));
    }
    let cluster_id = path
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("cluster")
        .to_string();

    let docs_dir = path.join("docs");
    let refs_dir = path.join("refs");
    if !docs_dir.is_dir() || !refs_dir.is_dir() {
        return Err(RelisError::Format(format!(
            "cluster {} must contain docs/ and refs/ directories",
            cluster_id
        )));
    }

    let mut documents = Vec::new();
    for (doc_id, text) in read_text_files(&docs_dir)? {
        let sentences = parse_sentences(&text, &format!("{cluster_id}/docs/{doc_id}"));
        if sentences.is_empty() {
            return Err(RelisError::Format(format!(
                "cluster {}: document {} has no usable sentences",
                cluster_id, doc_id
            )));
        }
        documents.push(Document { doc_id, sentences });
    }

    let mut references = Vec::new();
    for (ref_id, text) in read_text_files(&refs_dir)? {
        let sentences = parse_sentences(&text, &format!("{cluster_id}/refs/{ref_id}"));
        let tokens: Vec<String> = sentences.into_iter().flat_map(|s| s.tokens).collect();
        if tokens.is_empty() {
            return Err(RelisError::Format(format!(
                "cluster {}: reference {} is empty",
                cluster_id, ref_id
            )));
        }
        references.push(tokens);
    }

    let cluster = DocumentCluster {
        cluster_id,
        documents,
        references,
        length_budget,
    };
    cluster.validate()?;
    Ok(cluster)
}

/// Load every cluster found directly under `root`, sorted by directory name.
pub fn load_cluster_set(root: &Path, length_budget: usize) -> Result<Vec<DocumentCluster>> {
    if !root.is_dir() {
        return Err(RelisError::Input(format!(
            "corpus directory not found: {}",
            root.display()
        )));
    }
    let mut dirs: Vec<_> = fs::read_dir(root)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|e| e.path().is_dir())
        .collect();
    dirs.sort_by_key(|e| e.file_name());
    if dirs.is_empty() {
        return Err(RelisError::Format(format!(
            "no cluster directories under {}",
            root.display()
        )));
    }
    dirs.iter()
        .map(|d| load_cluster(&d.path(), length_budget))
        .collect()
}

/// An n-gram over lowercased tokens, stored as its tokens joined by a
/// single space (bigrams: `"w1 w2"`).
pub type Ngram = String;

/// Count n-grams (n ∈ {1,2}) in a token sequence. A sequence shorter than
/// `n` yields the empty multiset. The `BTreeMap` keeps iteration order
/// deterministic for float accumulation downstream.
pub fn extract_ngrams(tokens: &[String], n: usize) -> BTreeMap<Ngram, usize> {
    assert!(n == 1 || n == 2, "only unigrams and bigrams are supported");
    let mut counts = BTreeMap::new();
    if tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        let key = window.join(" ");
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

/// Named entities with occurrence counts. Keys are lowercased space-joined
/// token runs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NamedEntitySet {
    pub entities: BTreeMap<String, usize>,
}

impl NamedEntitySet {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Total occurrences across all entities.
    pub fn total_count(&self) -> usize {
        self.entities.values().sum()
    }
}

fn is_capitalized(token: &str) -> bool {
    token.chars().next().is_some_and(|c| c.is_uppercase())
}

/// Heuristic named-entity extraction over raw-case sentences: maximal runs
/// of capitalised tokens. A capitalised sentence-initial token is excluded
/// when it is a stopword or the run would be just that token (ordinary
/// sentence-case), but survives inside a longer run ("New York announced").
pub fn extract_named_entities<'a, I>(sentences: I) -> NamedEntitySet
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let mut set = NamedEntitySet::default();
    for sentence in sentences {
        let raw = &sentence.raw_tokens;
        let lower = &sentence.tokens;
        let mut i = 0;
        while i < raw.len() {
            if !is_capitalized(&raw[i]) {
                i += 1;
                continue;
            }
            let start = i;
            while i < raw.len() && is_capitalized(&raw[i]) {
                i += 1;
            }
            let mut lo = start;
            if start == 0 {
                let run_len = i - start;
                if is_stopword(&lower[0]) || run_len == 1 {
                    lo = start + 1;
                }
            }
            if lo < i {
                let key = lower[lo..i].join(" ");
                *set.entities.entry(key).or_insert(0) += 1;
            }
        }
    }
    set
}

/// Count how many tokens fall inside any named-entity span, using the same
/// run detection as [`extract_named_entities`].
pub fn named_entity_token_count(sentence: &Sentence) -> usize {
    let raw = &sentence.raw_tokens;
    let lower = &sentence.tokens;
    let mut covered = 0;
    let mut i = 0;
    while i < raw.len() {
        if !is_capitalized(&raw[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < raw.len() && is_capitalized(&raw[i]) {
            i += 1;
        }
        let mut lo = start;
        if start == 0 {
            let run_len = i - start;
            if is_stopword(&lower[0]) || run_len == 1 {
                lo = start + 1;
            }
        }
        covered += i.saturating_sub(lo);
    }
    covered
}
