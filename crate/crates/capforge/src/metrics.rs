//! Corpus-level caption metrics: BLEU-1..4, ROUGE-L, and CIDEr-D, following
//! the conventions of the COCO caption evaluation toolkit.
//!
//! * BLEU aggregates clipped n-gram precisions over the whole corpus and
//!   applies the brevity penalty on pooled lengths.
//! * ROUGE-L scores each item by the best longest-common-subsequence
//!   F-measure over its references (beta = 1.2) and averages.
//! * CIDEr-D represents sentences as tf-idf n-gram vectors (n = 1..4, idf
//!   from the reference corpus), takes count-clipped cosines against each
//!   reference with a Gaussian length penalty (sigma = 6), scales by 10,
//!   and averages over n, references, and items.
//!
//! An empty candidate scores zero everywhere rather than erroring, so a
//! degenerate model never aborts evaluation.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use crate::error::{Error, Result};

/// One evaluation item: a candidate caption and at least one reference.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub image_id: String,
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

/// The evaluation corpus. Construction enforces one or more references per
/// item; token lists are expected to come from [`crate::vocab::tokenize`].
#[derive(Debug, Clone)]
pub struct EvalCorpus {
    items: Vec<EvalItem>,
}

impl EvalCorpus {
    pub fn new(items: Vec<EvalItem>) -> Result<EvalCorpus> {
        for item in &items {
            if item.references.is_empty() {
                return Err(Error::parse(format!(
                    "item `{}` has no references",
                    item.image_id
                )));
            }
        }
        Ok(EvalCorpus { items })
    }

    pub fn items(&self) -> &[EvalItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Scores bundled by [`evaluate`]. BLEU and ROUGE-L live in [0, 1]; CIDEr-D
/// carries the toolkit's x10 factor (the results file scales it by a further
/// x100 to match the percentage convention of published tables).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub bleu: [f64; 4],
    pub rouge_l: f64,
    pub cider: f64,
}

/// Multiset of contiguous n-grams with multiplicities. Empty when the token
/// list is shorter than `n`.
pub fn ngram_counts(tokens: &[String], n: usize) -> HashMap<Vec<String>, usize> {
    assert!(n >= 1, "n must be >= 1");
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU-n for n = 1..4.
///
/// Each candidate n-gram count is clipped by the maximum count across the
/// item's references; matches and totals pool over all items. The brevity
/// penalty uses the reference length closest to each candidate's length
/// (ties to the shorter). A zero pooled precision zeroes every BLEU-n that
/// includes it.
pub fn bleu(corpus: &EvalCorpus) -> [f64; 4] {
    assert!(!corpus.is_empty(), "corpus must be non-empty");
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let mut candidate_len = 0usize;
    let mut reference_len = 0usize;

    for item in corpus.items() {
        let c = item.candidate.len();
        candidate_len += c;
        reference_len += item
            .references
            .iter()
            .map(|r| r.len())
            .min_by_key(|&len| (len.abs_diff(c), len))
            .expect("at least one reference");

        for (k, slot) in matches.iter_mut().enumerate() {
            let n = k + 1;
            let cand_counts = ngram_counts(&item.candidate, n);
            let ref_counts: Vec<HashMap<Vec<String>, usize>> = item
                .references
                .iter()
                .map(|r| ngram_counts(r, n))
                .collect();
            for (gram, &count) in &cand_counts {
                let clip = ref_counts
                    .iter()
                    .map(|rc| rc.get(gram).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                *slot += count.min(clip);
            }
            totals[k] += item.candidate.len().saturating_sub(n - 1);
        }
    }

    let brevity = if candidate_len == 0 {
        0.0
    } else if candidate_len < reference_len {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    } else {
        1.0
    };

    let precision: Vec<f64> = (0..4)
        .map(|k| {
            if totals[k] == 0 {
                0.0
            } else {
                matches[k] as f64 / totals[k] as f64
            }
        })
        .collect();

    let mut scores = [0.0; 4];
    for (n, score) in scores.iter_mut().enumerate() {
        if precision[..=n].contains(&0.0) {
            *score = 0.0;
        } else {
            let mean_log: f64 =
                precision[..=n].iter().map(|p| p.ln()).sum::<f64>() / (n + 1) as f64;
            *score = brevity * mean_log.exp();
        }
    }
    scores
}

/// Longest common subsequence length by dynamic programming.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut current = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            current[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(current[j])
            };
        }
        std::mem::swap(&mut prev, &mut current);
    }
    prev[b.len()]
}

const ROUGE_BETA: f64 = 1.2;

/// Mean over items of the best LCS F-measure against any reference, with
/// recall weighted by beta = 1.2.
pub fn rouge_l(corpus: &EvalCorpus) -> f64 {
    assert!(!corpus.is_empty(), "corpus must be non-empty");
    let beta_sq = ROUGE_BETA * ROUGE_BETA;
    let total: f64 = corpus
        .items()
        .iter()
        .map(|item| {
            item.references
                .iter()
                .map(|reference| {
                    let lcs = lcs_len(&item.candidate, reference);
                    if lcs == 0 || item.candidate.is_empty() || reference.is_empty() {
                        return 0.0;
                    }
                    let precision = lcs as f64 / item.candidate.len() as f64;
                    let recall = lcs as f64 / reference.len() as f64;
                    (1.0 + beta_sq) * precision * recall / (recall + beta_sq * precision)
                })
                .fold(0.0, f64::max)
        })
        .sum();
    total / corpus.len() as f64
}

const CIDER_SIGMA: f64 = 6.0;
const CIDER_MAX_N: usize = 4;

/// tf-idf vector per n plus its norm and the sentence length.
struct TfIdf {
    vecs: Vec<HashMap<Vec<String>, f64>>,
    norms: Vec<f64>,
    len: usize,
}

fn tf_idf(tokens: &[String], df: &[HashMap<Vec<String>, usize>], log_images: f64) -> TfIdf {
    let mut vecs = Vec::with_capacity(CIDER_MAX_N);
    let mut norms = Vec::with_capacity(CIDER_MAX_N);
    for (k, df_n) in df.iter().enumerate() {
        let counts = ngram_counts(tokens, k + 1);
        let mut vec = HashMap::with_capacity(counts.len());
        let mut norm_sq = 0.0;
        for (gram, count) in counts {
            let doc_freq = df_n.get(&gram).copied().unwrap_or(0).max(1) as f64;
            let idf = log_images - doc_freq.ln();
            let weight = count as f64 * idf;
            norm_sq += weight * weight;
            vec.insert(gram, weight);
        }
        vecs.push(vec);
        norms.push(norm_sq.sqrt());
    }
    TfIdf {
        vecs,
        norms,
        len: tokens.len(),
    }
}

/// CIDEr-D over the corpus: count-clipped tf-idf cosine per n with a
/// Gaussian length penalty, summed over references, scaled by 10 / |refs|,
/// then averaged over n and items. Needs at least two items so document
/// frequencies are meaningful.
pub fn cider(corpus: &EvalCorpus) -> Result<f64> {
    if corpus.len() < 2 {
        return Err(Error::CorpusTooSmall {
            size: corpus.len(),
            min: 2,
        });
    }

    // Document frequency: number of images whose reference set contains the
    // n-gram at least once.
    let mut df: Vec<HashMap<Vec<String>, usize>> = vec![HashMap::new(); CIDER_MAX_N];
    for item in corpus.items() {
        for (k, df_n) in df.iter_mut().enumerate() {
            let mut seen: HashSet<Vec<String>> = HashSet::new();
            for reference in &item.references {
                seen.extend(ngram_counts(reference, k + 1).into_keys());
            }
            for gram in seen {
                *df_n.entry(gram).or_insert(0) += 1;
            }
        }
    }
    let log_images = (corpus.len() as f64).ln();

    let mut corpus_total = 0.0;
    for item in corpus.items() {
        let cand = tf_idf(&item.candidate, &df, log_images);
        let mut per_n = [0.0f64; CIDER_MAX_N];
        for reference in &item.references {
            let reference = tf_idf(reference, &df, log_images);
            let delta = cand.len as f64 - reference.len as f64;
            let length_penalty = (-delta * delta / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
            for (k, slot) in per_n.iter_mut().enumerate() {
                if cand.norms[k] == 0.0 || reference.norms[k] == 0.0 {
                    continue;
                }
                let mut dot = 0.0;
                for (gram, &cand_weight) in &cand.vecs[k] {
                    if let Some(&ref_weight) = reference.vecs[k].get(gram) {
                        dot += cand_weight.min(ref_weight) * ref_weight;
                    }
                }
                *slot += length_penalty * dot / (cand.norms[k] * reference.norms[k]);
            }
        }
        let n_refs = item.references.len() as f64;
        let item_score: f64 = per_n
            .iter()
            .map(|sum| 10.0 * sum / n_refs)
            .sum::<f64>()
            / CIDER_MAX_N as f64;
        corpus_total += item_score;
    }
    Ok(corpus_total / corpus.len() as f64)
}

/// Bundles all metrics over one corpus.
pub fn evaluate(corpus: &EvalCorpus) -> Result<EvalResult> {
    if corpus.is_empty() {
        return Err(Error::CorpusTooSmall {
            size: 0,
            min: 1,
        });
    }
    Ok(EvalResult {
        bleu: bleu(corpus),
        rouge_l: rouge_l(corpus),
        cider: cider(corpus)?,
    })
}

/// Writes `metric<TAB>value` lines with four decimals. BLEU and ROUGE-L stay
/// in [0, 1]; CIDEr is scaled by 100 to match the percentage convention.
pub fn write_results<W: Write>(mut w: W, result: &EvalResult) -> std::io::Result<()> {
    for (k, score) in result.bleu.iter().enumerate() {
        writeln!(w, "Bleu_{}\t{score:.4}", k + 1)?;
    }
    writeln!(w, "ROUGE_L\t{:.4}", result.rouge_l)?;
    writeln!(w, "CIDEr\t{:.4}", result.cider * 100.0)
}
