//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).
//!
//! The criteria pin down the numeric heart of the pipeline: exact gradients
//! against finite differences, normalization invariants, a scaled-down
//! end-to-end overfit run, beam-search optimality against exhaustive
//! enumeration, metric agreement with independent oracles, the published
//! annotation-matrix shape, and bytewise training determinism.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use capforge::annotation::{
    build_annotation_set, AnnotationSet, BoundingBox, FeatureExtractor, ImageBuffer,
    SyntheticExtractor,
};
use capforge::decoder::{
    attend, forward_sequence, init_state, lstm_step, output_log_probs, DecoderDims, DecoderParams,
    DecoderState,
};
use capforge::decoding::{beam_search, greedy_decode, greedy_decode_scored, DecodeConfig};
use capforge::metrics::{bleu, cider, evaluate, rouge_l, EvalCorpus, EvalItem};
use capforge::training::{grad_check, train, TrainConfig, TrainExample};
use capforge::vocab::{CaptionRecord, Vocabulary};

use capforge_cli::{gradcheck_instance, parse_gradcheck_dims};

fn pass(criterion: &str, detail: String) {
    println!("PASS {criterion}: {detail}");
}

// --- criterion 1 -----------------------------------------------------------

#[test]
fn criterion_1_gradient_oracle() {
    let start = Instant::now();
    let dims = parse_gradcheck_dims("V=12,m=5,H=8,D=6,L=4,K=5").unwrap();
    let (params, example, end_id) = gradcheck_instance(&dims, 12345);
    let mut worst = 0.0f64;
    for lambda in [0.0, 5.0] {
        let err = grad_check(&params, &example, end_id, lambda, 1e-5).unwrap();
        assert!(
            err < 1e-4,
            "criterion 1 FAIL: lambda={lambda} max relative error {err:e} >= 1e-4"
        );
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(60),
        "criterion 1 FAIL: took {elapsed:?} (limit 60 s)"
    );
    pass(
        "criterion 1 (gradient oracle)",
        format!("max relative error {worst:.2e} over both lambdas in {elapsed:.2?}"),
    );
}

// --- criterion 2 -----------------------------------------------------------

#[test]
fn criterion_2_normalization_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let unit = Uniform::new_inclusive(-2.0f64, 2.0);
    let mut worst_alpha = 0.0f64;
    let mut worst_prob = 0.0f64;
    for instance in 0..1000u64 {
        let dims = DecoderDims::new(
            2 + (instance % 9) as usize,
            1 + (instance % 5) as usize,
            1 + (instance % 7) as usize,
            1 + (instance % 6) as usize,
            1 + (instance % 4) as usize,
        );
        let params = DecoderParams::init(dims, instance);
        let rows = 1 + (instance % 5) as usize;
        let annotations = AnnotationSet::from_rows(Array2::from_shape_fn(
            (rows, dims.annot),
            |_| unit.sample(&mut rng),
        ))
        .unwrap();
        let state = DecoderState {
            h: Array1::from_shape_fn(dims.hidden, |_| unit.sample(&mut rng)),
            c: Array1::from_shape_fn(dims.hidden, |_| unit.sample(&mut rng)),
        };
        let (alpha, ctx) = attend(&annotations, &state.h, &params).unwrap();
        worst_alpha = worst_alpha.max((alpha.sum() - 1.0).abs());
        assert!(
            (alpha.sum() - 1.0).abs() < 1e-10,
            "criterion 2 FAIL: attention mass {} at instance {instance}",
            alpha.sum()
        );
        let word = (instance % dims.vocab as u64) as usize;
        let log_probs = output_log_probs(word, &state, &ctx, &params).unwrap();
        let prob_sum: f64 = log_probs.mapv(f64::exp).sum();
        worst_prob = worst_prob.max((prob_sum - 1.0).abs());
        assert!(
            (prob_sum - 1.0).abs() < 1e-8,
            "criterion 2 FAIL: probability mass {prob_sum} at instance {instance}"
        );
    }
    pass(
        "criterion 2 (normalization)",
        format!(
            "1000 instances, worst |sum(alpha)-1| = {worst_alpha:.2e}, worst |sum(p)-1| = {worst_prob:.2e}"
        ),
    );
}

// --- criterion 3 -----------------------------------------------------------

#[test]
fn criterion_3_overfit_run() {
    let start = Instant::now();

    // 20 synthetic pairs: L=4 rows of D=16 synthetic features, captions of
    // 3-6 tokens over a 15-word pool.
    let words: Vec<String> = (0..15).map(|i| format!("w{i:02}")).collect();
    let noise = SyntheticExtractor::new(77, 200).extract(&ImageBuffer::new(1, 3, 1, 0.25));
    let mut cursor = 0;
    let mut next_unit = || {
        let v = (noise[cursor] + 1.0) / 2.0;
        cursor += 1;
        v
    };
    let mut records = Vec::new();
    for i in 0..20usize {
        let len = 3 + (next_unit() * 4.0) as usize % 4;
        let tokens: Vec<String> = (0..len)
            .map(|_| words[((next_unit() * 15.0) as usize).min(14)].clone())
            .collect();
        records.push(CaptionRecord {
            image_id: format!("img{i:02}"),
            tokens,
        });
    }
    let vocab = Vocabulary::build(&records, 1);
    assert_eq!(vocab.size(), 17, "15 words plus two specials");

    let feature_extractor = SyntheticExtractor::new(42, 16);
    let mut dataset = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let mut rows = Array2::zeros((4, 16));
        for r in 0..4 {
            let probe = ImageBuffer::new(1, 1, 2, (i * 4 + r) as f64);
            rows.row_mut(r).assign(&feature_extractor.extract(&probe));
        }
        dataset.push(TrainExample {
            annotations: AnnotationSet::from_rows(rows).unwrap(),
            target_ids: vocab.encode(&record.tokens, 50),
        });
    }

    // The published schedule, halving scaled down to every 2000 iterations.
    let config = TrainConfig {
        lr0: 0.01,
        momentum: 0.9,
        batch_size: 100,
        halve_every: 2000,
        lambda: 1.0,
        max_iters: 1500,
        seed: 1,
    };
    assert!(config.max_iters <= 5000);
    let params = DecoderParams::init(DecoderDims::new(vocab.size(), 32, 32, 16, 32), 1);
    let (trained, history) = train(&dataset, &config, params, vocab.end_id()).unwrap();

    let mut nll_sum = 0.0;
    let mut token_count = 0usize;
    for (i, example) in dataset.iter().enumerate() {
        let traces = forward_sequence(
            &example.annotations,
            &example.target_ids,
            &trained,
            vocab.end_id(),
        )
        .unwrap();
        for (trace, &w) in traces.iter().zip(&example.target_ids) {
            nll_sum += -trace.log_probs[w];
            token_count += 1;
        }
        let decoded = greedy_decode(&example.annotations, &trained, &vocab, 50).unwrap();
        let target_words = &example.target_ids[..example.target_ids.len() - 1];
        assert_eq!(
            decoded, target_words,
            "criterion 3 FAIL: caption {i} not reproduced"
        );
    }
    let per_token_nll = nll_sum / token_count as f64;
    assert!(
        per_token_nll < 0.05,
        "criterion 3 FAIL: mean per-token NLL {per_token_nll}"
    );

    let window_means: Vec<f64> = history
        .chunks(50)
        .map(|w| w.iter().map(|(_, l)| l).sum::<f64>() / w.len() as f64)
        .collect();
    for (i, pair) in window_means.windows(2).enumerate() {
        assert!(
            pair[1] <= pair[0],
            "criterion 3 FAIL: smoothed loss rises between windows {i} and {} ({} -> {})",
            i + 1,
            pair[0],
            pair[1]
        );
    }

    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(120),
        "criterion 3 FAIL: took {elapsed:?} (limit 2 min)"
    );
    pass(
        "criterion 3 (overfit run)",
        format!(
            "20/20 captions reproduced, per-token NLL {per_token_nll:.5}, {} iterations, {elapsed:.2?}",
            history.len()
        ),
    );
}

// --- criterion 4 -----------------------------------------------------------

fn toy_vocab(size: usize) -> Vocabulary {
    let tokens: Vec<String> = (0..size - 2).map(|i| format!("w{i:03}")).collect();
    let record = CaptionRecord {
        image_id: "img".into(),
        tokens,
    };
    let vocab = Vocabulary::build(std::slice::from_ref(&record), 1);
    assert_eq!(vocab.size(), size);
    vocab
}

fn random_annotations(annot: usize, rows: usize, seed: u64) -> AnnotationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new_inclusive(-1.0, 1.0);
    AnnotationSet::from_rows(Array2::from_shape_fn((rows, annot), |_| {
        unit.sample(&mut rng)
    }))
    .unwrap()
}

/// Exhaustive argmax over every caption: end-terminated sequences include
/// the end factor, sequences cut at `max_len` do not; ties go to the
/// lexicographically smaller sequence.
fn enumerate_best(
    annotations: &AnnotationSet,
    params: &DecoderParams,
    vocab: &Vocabulary,
    max_len: usize,
) -> (Vec<usize>, f64) {
    #[allow(clippy::too_many_arguments)]
    fn walk(
        annotations: &AnnotationSet,
        params: &DecoderParams,
        end: usize,
        max_len: usize,
        prefix: &mut Vec<usize>,
        state: &DecoderState,
        log_prob: f64,
        best: &mut Option<(Vec<usize>, f64)>,
    ) {
        let consider = |ids: &[usize], lp: f64, best: &mut Option<(Vec<usize>, f64)>| {
            let improves = match best {
                None => true,
                Some((ids_b, lp_b)) => lp > *lp_b || (lp == *lp_b && ids < ids_b.as_slice()),
            };
            if improves {
                *best = Some((ids.to_vec(), lp));
            }
        };
        if prefix.len() >= max_len {
            consider(prefix, log_prob, best);
            return;
        }
        let prev = prefix.last().copied().unwrap_or(end);
        let (_, ctx) = attend(annotations, &state.h, params).unwrap();
        let next_state = lstm_step(prev, state, &ctx, params).unwrap();
        let log_probs = output_log_probs(prev, &next_state, &ctx, params).unwrap();
        for token in 0..params.dims.vocab {
            if token == end {
                consider(prefix, log_prob + log_probs[token], best);
            } else {
                prefix.push(token);
                walk(
                    annotations,
                    params,
                    end,
                    max_len,
                    prefix,
                    &next_state,
                    log_prob + log_probs[token],
                    best,
                );
                prefix.pop();
            }
        }
    }
    let init = init_state(annotations, params).unwrap();
    let mut best = None;
    walk(
        annotations,
        params,
        vocab.end_id(),
        max_len,
        &mut Vec::new(),
        &init,
        0.0,
        &mut best,
    );
    best.unwrap()
}

#[test]
fn criterion_4_beam_search_oracles() {
    // Exhaustive optimality at V=4, max_len=4, width 256.
    let dims = DecoderDims::new(4, 3, 4, 3, 3);
    let vocab = toy_vocab(4);
    for seed in 0..50 {
        let params = DecoderParams::init(dims, 9000 + seed);
        let annotations = random_annotations(3, 3, 9500 + seed);
        let config = DecodeConfig {
            beam_width: 256,
            max_len: 4,
        };
        let (beam_ids, beam_lp) = beam_search(&annotations, &params, &vocab, &config).unwrap();
        let (best_ids, best_lp) = enumerate_best(&annotations, &params, &vocab, 4);
        assert_eq!(
            beam_ids, best_ids,
            "criterion 4 FAIL: beam != enumeration at seed {seed}"
        );
        assert!((beam_lp - best_lp).abs() < 1e-12);
    }

    // Width-1 equivalence with greedy on 100 random models, and beam-4
    // domination of greedy on the same models.
    let dims = DecoderDims::new(5, 3, 4, 3, 3);
    let vocab5 = toy_vocab(5);
    for seed in 0..100 {
        let params = DecoderParams::init(dims, 20_000 + seed);
        let annotations = random_annotations(3, 2 + (seed as usize % 3), 21_000 + seed);
        let (greedy_ids, greedy_lp) =
            greedy_decode_scored(&annotations, &params, &vocab5, 6).unwrap();
        let (w1_ids, w1_lp) = beam_search(
            &annotations,
            &params,
            &vocab5,
            &DecodeConfig {
                beam_width: 1,
                max_len: 6,
            },
        )
        .unwrap();
        assert_eq!(w1_ids, greedy_ids, "criterion 4 FAIL: width-1 != greedy at seed {seed}");
        assert!((w1_lp - greedy_lp).abs() < 1e-12);

        let (_, w4_lp) = beam_search(
            &annotations,
            &params,
            &vocab5,
            &DecodeConfig {
                beam_width: 4,
                max_len: 6,
            },
        )
        .unwrap();
        assert!(
            w4_lp >= greedy_lp - 1e-12,
            "criterion 4 FAIL: beam-4 {w4_lp} < greedy {greedy_lp} at seed {seed}"
        );
    }
    pass(
        "criterion 4 (beam search oracles)",
        "50/50 exhaustive matches, 100/100 width-1 = greedy, beam-4 never below greedy".into(),
    );
}

// --- criterion 5 -----------------------------------------------------------

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

fn eval_item(id: &str, cand: &str, refs: &[&str]) -> EvalItem {
    EvalItem {
        image_id: id.into(),
        candidate: toks(cand),
        references: refs.iter().map(|r| toks(r)).collect(),
    }
}

/// The frozen five-item fixture scored by every metric.
fn frozen_fixture() -> EvalCorpus {
    EvalCorpus::new(vec![
        eval_item(
            "1",
            "a brown dog runs across the green field",
            &[
                "a brown dog runs across a green field",
                "the dog is running over the grass",
            ],
        ),
        eval_item(
            "2",
            "two people sit on a wooden bench",
            &["two people are sitting on a bench", "a couple rests on the bench"],
        ),
        eval_item(
            "3",
            "a red bus parked near the station",
            &["a red bus is parked at the station", "the bus waits near a station"],
        ),
        eval_item(
            "4",
            "the cat sleeps",
            &["a cat is sleeping on the sofa", "the cat naps quietly"],
        ),
        eval_item(
            "5",
            "children play with a ball in the park",
            &[
                "children are playing ball at the park",
                "kids play with a ball outside",
                "a group of children play in the park",
            ],
        ),
    ])
    .unwrap()
}

/// Independent BLEU: window scans instead of count maps.
fn oracle_bleu(corpus: &EvalCorpus) -> [f64; 4] {
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let mut c_len = 0usize;
    let mut r_len = 0usize;
    for item in corpus.items() {
        c_len += item.candidate.len();
        r_len += item
            .references
            .iter()
            .map(|r| r.len())
            .min_by_key(|&len| (len.abs_diff(item.candidate.len()), len))
            .unwrap();
        for n in 1..=4usize {
            if item.candidate.len() < n {
                continue;
            }
            totals[n - 1] += item.candidate.len() - n + 1;
            let mut seen: Vec<&[String]> = Vec::new();
            for w in item.candidate.windows(n) {
                if seen.contains(&w) {
                    continue;
                }
                seen.push(w);
                let in_cand = item.candidate.windows(n).filter(|x| *x == w).count();
                let best_ref = item
                    .references
                    .iter()
                    .map(|r| {
                        if r.len() < n {
                            0
                        } else {
                            r.windows(n).filter(|x| *x == w).count()
                        }
                    })
                    .max()
                    .unwrap();
                matches[n - 1] += in_cand.min(best_ref);
            }
        }
    }
    let bp = if c_len == 0 {
        0.0
    } else if c_len < r_len {
        (1.0 - r_len as f64 / c_len as f64).exp()
    } else {
        1.0
    };
    let mut out = [0.0f64; 4];
    for n in 1..=4usize {
        let ps: Vec<f64> = (0..n)
            .map(|k| {
                if totals[k] == 0 {
                    0.0
                } else {
                    matches[k] as f64 / totals[k] as f64
                }
            })
            .collect();
        out[n - 1] = if ps.contains(&0.0) {
            0.0
        } else {
            bp * (ps.iter().map(|p| p.ln()).sum::<f64>() / n as f64).exp()
        };
    }
    out
}

/// Independent ROUGE-L with a plain recursive memoized LCS.
fn oracle_rouge_l(corpus: &EvalCorpus) -> f64 {
    fn lcs(a: &[String], b: &[String], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == 0 || j == 0 {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i - 1] == b[j - 1] {
            lcs(a, b, i - 1, j - 1, memo) + 1
        } else {
            lcs(a, b, i - 1, j, memo).max(lcs(a, b, i, j - 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    let beta_sq = 1.2f64 * 1.2;
    let mut total = 0.0;
    for item in corpus.items() {
        let mut best = 0.0f64;
        for reference in &item.references {
            let mut memo = HashMap::new();
            let l = lcs(
                &item.candidate,
                reference,
                item.candidate.len(),
                reference.len(),
                &mut memo,
            );
            if l == 0 || item.candidate.is_empty() {
                continue;
            }
            let p = l as f64 / item.candidate.len() as f64;
            let r = l as f64 / reference.len() as f64;
            best = best.max((1.0 + beta_sq) * p * r / (r + beta_sq * p));
        }
        total += best;
    }
    total / corpus.len() as f64
}

/// Independent CIDEr-D computed gram by gram.
fn oracle_cider(corpus: &EvalCorpus) -> f64 {
    let n_images = corpus.len() as f64;
    let df_of = |gram: &[String]| -> f64 {
        corpus
            .items()
            .iter()
            .filter(|item| {
                item.references
                    .iter()
                    .any(|r| r.len() >= gram.len() && r.windows(gram.len()).any(|w| w == gram))
            })
            .count() as f64
    };
    let weights = |tokens: &[String], n: usize| -> HashMap<Vec<String>, f64> {
        let mut tf: HashMap<Vec<String>, f64> = HashMap::new();
        if tokens.len() >= n {
            for w in tokens.windows(n) {
                *tf.entry(w.to_vec()).or_insert(0.0) += 1.0;
            }
        }
        for (gram, value) in tf.iter_mut() {
            *value *= n_images.ln() - df_of(gram).max(1.0).ln();
        }
        tf
    };
    let mut total = 0.0;
    for item in corpus.items() {
        let mut item_score = 0.0;
        for n in 1..=4usize {
            let hv = weights(&item.candidate, n);
            let hn = hv.values().map(|v| v * v).sum::<f64>().sqrt();
            let mut ref_sum = 0.0;
            for reference in &item.references {
                let rv = weights(reference, n);
                let rn = rv.values().map(|v| v * v).sum::<f64>().sqrt();
                if hn == 0.0 || rn == 0.0 {
                    continue;
                }
                let mut dot = 0.0;
                for (gram, hw) in &hv {
                    if let Some(rw) = rv.get(gram) {
                        dot += hw.min(*rw) * rw;
                    }
                }
                let delta = item.candidate.len() as f64 - reference.len() as f64;
                ref_sum += (-delta * delta / 72.0).exp() * dot / (hn * rn);
            }
            item_score += 10.0 * ref_sum / item.references.len() as f64;
        }
        total += item_score / 4.0;
    }
    total / n_images
}

#[test]
fn criterion_5_metric_oracles() {
    let corpus = frozen_fixture();

    let bleu_scores = bleu(&corpus);
    let bleu_oracle = oracle_bleu(&corpus);
    for (n, (a, e)) in bleu_scores.iter().zip(&bleu_oracle).enumerate() {
        assert!(
            (a - e).abs() < 1e-6,
            "criterion 5 FAIL: Bleu_{} {a} vs oracle {e}",
            n + 1
        );
    }
    let rouge = rouge_l(&corpus);
    let rouge_oracle = oracle_rouge_l(&corpus);
    assert!(
        (rouge - rouge_oracle).abs() < 1e-6,
        "criterion 5 FAIL: ROUGE_L {rouge} vs oracle {rouge_oracle}"
    );
    let cider_score = cider(&corpus).unwrap();
    let cider_oracle = oracle_cider(&corpus);
    assert!(
        (cider_score - cider_oracle).abs() < 1e-6,
        "criterion 5 FAIL: CIDEr {cider_score} vs oracle {cider_oracle}"
    );

    // Golden values frozen from the oracle implementations.
    let golden_bleu = [
        0.9090909090909091,
        0.742932064153952,
        0.5517675254655255,
        0.40905272449319574,
    ];
    let golden_rouge = 0.7123720200231339;
    let golden_cider = 2.451197268376558;
    for (a, g) in bleu_scores.iter().zip(&golden_bleu) {
        assert!((a - g).abs() < 1e-12, "golden BLEU drifted: {a} vs {g}");
    }
    assert!((rouge - golden_rouge).abs() < 1e-12);
    assert!((cider_score - golden_cider).abs() < 1e-12);

    // The classic clipping example: unigram precision exactly 2/7.
    let clip = EvalCorpus::new(vec![eval_item(
        "1",
        "the the the the the the the",
        &["the cat sat on the mat"],
    )])
    .unwrap();
    let clip_scores = bleu(&clip);
    assert!(
        (clip_scores[0] - 2.0 / 7.0).abs() < 1e-15,
        "criterion 5 FAIL: clipping example gave {}",
        clip_scores[0]
    );

    // Identical candidate/reference corpus scores 1 everywhere.
    let identical = EvalCorpus::new(vec![
        eval_item("1", "a dog runs across the field", &["a dog runs across the field"]),
        eval_item("2", "two people sit on a bench", &["two people sit on a bench"]),
    ])
    .unwrap();
    let result = evaluate(&identical).unwrap();
    for score in result.bleu {
        assert!((score - 1.0).abs() < 1e-12);
    }
    assert!((result.rouge_l - 1.0).abs() < 1e-12);

    pass(
        "criterion 5 (metric oracles)",
        format!(
            "fixture: Bleu_1 {:.4}, ROUGE_L {:.4}, CIDEr {:.4}; clip 2/7 exact; identity = 1",
            bleu_scores[0], rouge, cider_score
        ),
    );
}

// --- criterion 6 -----------------------------------------------------------

#[test]
fn criterion_6_annotation_shape() {
    let image = ImageBuffer::new(32, 32, 3, 0.25);
    let obj = SyntheticExtractor::new(1, 4096);
    let loc = SyntheticExtractor::new(2, 4096);
    let boxes: Vec<BoundingBox> = (0..5)
        .map(|i| BoundingBox {
            x: i * 4,
            y: i * 3,
            w: 10,
            h: 10,
            score: 1.0 - i as f64 * 0.1,
        })
        .collect();
    let set = build_annotation_set(&image, &boxes, 5, &obj, &loc, &[0.5, 0.5, 0.5]).unwrap();
    assert_eq!(
        (set.len(), set.width()),
        (6, 8192),
        "criterion 6 FAIL: got {}x{}",
        set.len(),
        set.width()
    );
    pass(
        "criterion 6 (annotation shape)",
        "top-5 boxes at d = t = 4096 yield a 6x8192 matrix".into(),
    );
}

// --- criterion 7 -----------------------------------------------------------

fn capforge_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_capforge"))
}

fn write_png(path: &Path, seed: u64) {
    let mut value = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
    let mut next = || {
        value ^= value << 13;
        value ^= value >> 7;
        value ^= value << 17;
        (value >> 32) as u8
    };
    let mut img = image::RgbImage::new(10, 10);
    for pixel in img.pixels_mut() {
        pixel.0 = [next(), next(), next()];
    }
    img.save(path).expect("write png");
}

#[test]
fn criterion_7_training_determinism() {
    let dir = TempDir::new().unwrap();
    let p = |name: &str| -> PathBuf { dir.path().join(name) };
    let a = |name: &str| -> String { p(name).display().to_string() };

    std::fs::create_dir(p("images")).unwrap();
    for (i, id) in ["img1", "img2", "img3"].iter().enumerate() {
        write_png(&p("images").join(format!("{id}.png")), i as u64 + 7);
    }
    std::fs::write(
        p("boxes.txt"),
        "img1 0 0 5 5 0.9\nimg1 2 2 5 5 0.4\nimg2 1 1 6 6 0.8\nimg3 0 3 7 5 0.7\nimg3 3 0 5 7 0.6\n",
    )
    .unwrap();
    std::fs::write(
        p("captions.tsv"),
        "img1\ta red dog runs\nimg2\tthe blue cat sits\nimg3\ta green bird flies\n",
    )
    .unwrap();
    std::fs::write(
        p("train.cfg"),
        "lr0 = 0.05\nmomentum = 0.9\nbatch_size = 3\nhalve_every = 50\nlambda = 1.0\nmax_iters = 60\nseed = 11\n",
    )
    .unwrap();

    let run = |cmd: &mut Command| {
        let out = cmd.output().expect("spawn capforge");
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    run(capforge_bin().args([
        "featurize",
        "--images",
        &a("images"),
        "--boxes",
        &a("boxes.txt"),
        "--synthetic-seed",
        "5",
        "--top-n",
        "2",
        "--feat-dim",
        "8",
        "--out",
        &a("feats.annot"),
    ]));
    run(capforge_bin().args([
        "build-vocab",
        "--captions",
        &a("captions.tsv"),
        "--min-count",
        "1",
        "--out",
        &a("vocab.txt"),
    ]));
    for round in ["one", "two"] {
        run(capforge_bin().args([
            "train",
            "--features",
            &a("feats.annot"),
            "--captions",
            &a("captions.tsv"),
            "--vocab",
            &a("vocab.txt"),
            "--config",
            &a("train.cfg"),
            "--embed-dim",
            "12",
            "--hidden-dim",
            "12",
            "--out",
            &a(&format!("model-{round}.ckpt")),
            "--loss-log",
            &a(&format!("loss-{round}.tsv")),
        ]));
    }
    let ckpt_one = std::fs::read(p("model-one.ckpt")).unwrap();
    let ckpt_two = std::fs::read(p("model-two.ckpt")).unwrap();
    assert_eq!(ckpt_one, ckpt_two, "criterion 7 FAIL: checkpoints differ");
    let loss_one = std::fs::read(p("loss-one.tsv")).unwrap();
    let loss_two = std::fs::read(p("loss-two.tsv")).unwrap();
    assert_eq!(loss_one, loss_two, "criterion 7 FAIL: loss logs differ");
    pass(
        "criterion 7 (training determinism)",
        format!(
            "two seeded runs: byte-identical checkpoint ({} bytes) and loss log ({} bytes)",
            ckpt_one.len(),
            loss_one.len()
        ),
    );
}

// --- criterion 8 -----------------------------------------------------------

/// Informational only: with the real COCO caption set (point
/// `CAPFORGE_COCO_CAPTIONS` at captions_train2014.json), the vocabulary at
/// min_count = 5 should land within 5% of the published 10020 unique words.
/// Tokenizer differences make exact reproduction unowed, so this never fails
/// the suite when the dataset is absent.
#[test]
fn criterion_8_coco_vocabulary_size_informational() {
    let Ok(path) = std::env::var("CAPFORGE_COCO_CAPTIONS") else {
        println!(
            "SKIP criterion 8 (informational): set CAPFORGE_COCO_CAPTIONS to a COCO captions JSON to run"
        );
        return;
    };
    let text = std::fs::read_to_string(&path).expect("read COCO captions");
    let records = capforge_cli::coco::import_coco_captions(&text).expect("parse COCO captions");
    let vocab = Vocabulary::build(&records, 5);
    let size = vocab.size() as f64;
    let reference = 10020.0;
    let deviation = (size - reference).abs() / reference;
    println!(
        "criterion 8 (informational): vocabulary {size} vs published {reference} ({:.2}% off)",
        deviation * 100.0
    );
    assert!(
        deviation <= 0.05,
        "criterion 8 (informational) outside 5%: {size}"
    );
}
