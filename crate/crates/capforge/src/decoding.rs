//! Caption generation: greedy decoding and beam search.
//!
//! Both decoders start from the init state, feed the end token as the
//! begin-of-sequence marker, and stop at the end token or after `max_len`
//! words. Scores are raw accumulated log-probabilities with no length
//! normalization; a caption that terminates naturally includes the end
//! token's log-probability in its score, a caption cut off at `max_len`
//! does not. All ties break deterministically (smaller id first,
//! lexicographic over sequences).

use ndarray::Array1;

use crate::annotation::AnnotationSet;
use crate::decoder::{
    attend, init_state, lstm_step, output_log_probs, DecoderParams, DecoderState,
};
use crate::error::Result;
use crate::vocab::Vocabulary;

/// Beam-search knobs.
#[derive(Debug, Clone, Copy)]
pub struct DecodeConfig {
    pub beam_width: usize,
    pub max_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_width: 4,
            max_len: 50,
        }
    }
}

/// A partial caption under construction: generated ids (including the end
/// token once finished), accumulated log-probability, and the decoder state
/// after consuming the last id.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub ids: Vec<usize>,
    pub log_prob: f64,
    pub state: DecoderState,
    pub finished: bool,
}

fn argmax_smallest_id(log_probs: &Array1<f64>) -> usize {
    let mut best = 0;
    for (id, &value) in log_probs.iter().enumerate() {
        if value > log_probs[best] {
            best = id;
        }
    }
    best
}

/// Greedy decoding plus its accumulated log-probability.
pub fn greedy_decode_scored(
    annotations: &AnnotationSet,
    params: &DecoderParams,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<(Vec<usize>, f64)> {
    assert!(max_len >= 1, "max_len must be >= 1");
    let end = vocab.end_id();
    let mut state = init_state(annotations, params)?;
    let mut prev = end; // begin-of-sequence marker
    let mut ids = Vec::new();
    let mut log_prob = 0.0;
    while ids.len() < max_len {
        let (_, ctx) = attend(annotations, &state.h, params)?;
        let next_state = lstm_step(prev, &state, &ctx, params)?;
        let log_probs = output_log_probs(prev, &next_state, &ctx, params)?;
        let best = argmax_smallest_id(&log_probs);
        log_prob += log_probs[best];
        if best == end {
            break;
        }
        ids.push(best);
        state = next_state;
        prev = best;
    }
    Ok((ids, log_prob))
}

/// Repeatedly takes the most probable next word (ties to the smaller id)
/// until the end token appears or `max_len` words have been emitted. The
/// end token is not part of the result.
pub fn greedy_decode(
    annotations: &AnnotationSet,
    params: &DecoderParams,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<usize>> {
    greedy_decode_scored(annotations, params, vocab, max_len).map(|(ids, _)| ids)
}

/// Sort key: higher log-probability first, ties by lexicographically smaller
/// id sequence.
fn better(a: &Hypothesis, b: &Hypothesis) -> std::cmp::Ordering {
    b.log_prob
        .partial_cmp(&a.log_prob)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then_with(|| a.ids.cmp(&b.ids))
}

/// Standard beam search with a finished pool.
///
/// Every live hypothesis expands by all vocabulary tokens; the best
/// `beam_width` expansions survive. Survivors that emitted the end token
/// retire to the finished pool; survivors that reached `max_len` words stop
/// expanding but remain eligible. The search ends when no live hypothesis
/// can still beat the best finished one (extensions only lower the score).
/// Returns the retired hypothesis with the highest total log-probability as
/// `(ids without the end token, accumulated log-probability)`.
pub fn beam_search(
    annotations: &AnnotationSet,
    params: &DecoderParams,
    vocab: &Vocabulary,
    config: &DecodeConfig,
) -> Result<(Vec<usize>, f64)> {
    assert!(config.beam_width >= 1, "beam_width must be >= 1");
    assert!(config.max_len >= 1, "max_len must be >= 1");
    let end = vocab.end_id();
    let vocab_size = params.dims.vocab;

    let mut live = vec![Hypothesis {
        ids: Vec::new(),
        log_prob: 0.0,
        state: init_state(annotations, params)?,
        finished: false,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut capped: Vec<Hypothesis> = Vec::new();

    while !live.is_empty() {
        if let Some(best_finished) = finished.iter().map(|h| h.log_prob).reduce(f64::max) {
            let best_live = live.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
            // Extensions only lower the score, so a live hypothesis at or
            // below the best finished score can never beat it.
            if best_live <= best_finished {
                break;
            }
        }

        let mut candidates: Vec<Hypothesis> = Vec::with_capacity(live.len() * vocab_size);
        for hyp in &live {
            let prev = hyp.ids.last().copied().unwrap_or(end);
            let (_, ctx) = attend(annotations, &hyp.state.h, params)?;
            let next_state = lstm_step(prev, &hyp.state, &ctx, params)?;
            let log_probs = output_log_probs(prev, &next_state, &ctx, params)?;
            for token in 0..vocab_size {
                let mut ids = hyp.ids.clone();
                ids.push(token);
                candidates.push(Hypothesis {
                    ids,
                    log_prob: hyp.log_prob + log_probs[token],
                    state: next_state.clone(),
                    finished: token == end,
                });
            }
        }
        candidates.sort_by(better);
        candidates.truncate(config.beam_width);

        live = Vec::new();
        for hyp in candidates {
            if hyp.finished {
                finished.push(hyp);
            } else if hyp.ids.len() >= config.max_len {
                capped.push(hyp);
            } else {
                live.push(hyp);
            }
        }
    }

    let best = finished
        .iter()
        .chain(&capped)
        .chain(&live)
        .min_by(|a, b| better(a, b))
        .expect("beam search always yields at least one hypothesis");
    let mut ids = best.ids.clone();
    if best.finished {
        ids.pop();
    }
    Ok((ids, best.log_prob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::DecoderDims;
    use crate::vocab::CaptionRecord;
    use ndarray::Array2;
    use rand::distributions::{Distribution, Uniform};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Vocabulary with exactly `size` entries (two specials plus filler words).
    fn toy_vocab(size: usize) -> Vocabulary {
        assert!(size >= 2);
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

    /// Exhaustive argmax over every possible caption: sequences that emit
    /// the end token within `max_len` words score with the end factor,
    /// sequences cut off at exactly `max_len` words score without it. Ties
    /// go to the lexicographically smaller id sequence.
    fn enumerate_best(
        annotations: &AnnotationSet,
        params: &DecoderParams,
        vocab: &Vocabulary,
        max_len: usize,
    ) -> (Vec<usize>, f64) {
        struct Walk<'a> {
            annotations: &'a AnnotationSet,
            params: &'a DecoderParams,
            end: usize,
            max_len: usize,
            best: Option<(Vec<usize>, f64)>,
        }
        impl Walk<'_> {
            fn consider(&mut self, ids: &[usize], log_prob: f64) {
                let better = match &self.best {
                    None => true,
                    Some((best_ids, best_lp)) => {
                        log_prob > *best_lp
                            || (log_prob == *best_lp && ids < best_ids.as_slice())
                    }
                };
                if better {
                    self.best = Some((ids.to_vec(), log_prob));
                }
            }
            fn go(&mut self, prefix: &mut Vec<usize>, state: &DecoderState, log_prob: f64) {
                if prefix.len() >= self.max_len {
                    self.consider(prefix, log_prob);
                    return;
                }
                let prev = prefix.last().copied().unwrap_or(self.end);
                let (_, ctx) = attend(self.annotations, &state.h, self.params).unwrap();
                let next_state = lstm_step(prev, state, &ctx, self.params).unwrap();
                let log_probs =
                    output_log_probs(prev, &next_state, &ctx, self.params).unwrap();
                for token in 0..self.params.dims.vocab {
                    if token == self.end {
                        self.consider(prefix, log_prob + log_probs[token]);
                    } else {
                        prefix.push(token);
                        self.go(prefix, &next_state, log_prob + log_probs[token]);
                        prefix.pop();
                    }
                }
            }
        }
        let mut walk = Walk {
            annotations,
            params,
            end: vocab.end_id(),
            max_len,
            best: None,
        };
        let init = init_state(annotations, params).unwrap();
        walk.go(&mut Vec::new(), &init, 0.0);
        walk.best.unwrap()
    }

    #[test]
    fn end_as_first_argmax_gives_empty_caption() {
        let dims = DecoderDims::new(4, 2, 2, 2, 2);
        let vocab = toy_vocab(4);
        let mut params = DecoderParams::zeros(dims);
        params.out_bias[vocab.end_id()] = 5.0;
        let a = random_annotations(2, 2, 1);
        assert!(greedy_decode(&a, &params, &vocab, 10).unwrap().is_empty());
        let (ids, _) = beam_search(&a, &params, &vocab, &DecodeConfig::default()).unwrap();
        assert!(ids.is_empty());
    }

    #[test]
    fn max_len_caps_a_model_that_never_stops() {
        let dims = DecoderDims::new(4, 2, 2, 2, 2);
        let vocab = toy_vocab(4);
        let mut params = DecoderParams::zeros(dims);
        params.out_bias[vocab.end_id()] = -5.0;
        params.out_bias[2] = 5.0;
        let a = random_annotations(2, 2, 2);
        let ids = greedy_decode(&a, &params, &vocab, 3).unwrap();
        assert_eq!(ids, vec![2, 2, 2]);
        let config = DecodeConfig {
            beam_width: 2,
            max_len: 3,
        };
        let (beam_ids, _) = beam_search(&a, &params, &vocab, &config).unwrap();
        assert_eq!(beam_ids, vec![2, 2, 2]);
    }

    #[test]
    fn greedy_matches_manual_argmax_trace() {
        let dims = DecoderDims::new(3, 3, 3, 3, 2);
        let vocab = toy_vocab(3);
        let params = DecoderParams::init(dims, 77);
        let a = random_annotations(3, 3, 78);
        let max_len = 6;

        // Manual simulation out of the primitive step operations.
        let mut expected = Vec::new();
        let mut state = init_state(&a, &params).unwrap();
        let mut prev = vocab.end_id();
        while expected.len() < max_len {
            let (_, ctx) = attend(&a, &state.h, &params).unwrap();
            let next = lstm_step(prev, &state, &ctx, &params).unwrap();
            let lp = output_log_probs(prev, &next, &ctx, &params).unwrap();
            let mut best = 0;
            for id in 1..dims.vocab {
                if lp[id] > lp[best] {
                    best = id;
                }
            }
            if best == vocab.end_id() {
                break;
            }
            expected.push(best);
            state = next;
            prev = best;
        }

        assert_eq!(greedy_decode(&a, &params, &vocab, max_len).unwrap(), expected);
    }

    #[test]
    fn width_one_beam_equals_greedy() {
        let dims = DecoderDims::new(5, 3, 4, 3, 3);
        let vocab = toy_vocab(5);
        for seed in 0..100 {
            let params = DecoderParams::init(dims, seed);
            let a = random_annotations(3, 2 + (seed as usize % 3), 1000 + seed);
            let config = DecodeConfig {
                beam_width: 1,
                max_len: 6,
            };
            let (greedy_ids, greedy_lp) =
                greedy_decode_scored(&a, &params, &vocab, config.max_len).unwrap();
            let (beam_ids, beam_lp) = beam_search(&a, &params, &vocab, &config).unwrap();
            assert_eq!(beam_ids, greedy_ids, "seed {seed}");
            assert!((beam_lp - greedy_lp).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn wide_beam_matches_exhaustive_enumeration() {
        let dims = DecoderDims::new(3, 2, 3, 2, 2);
        let vocab = toy_vocab(3);
        for seed in 0..25 {
            let params = DecoderParams::init(dims, 500 + seed);
            let a = random_annotations(2, 3, 600 + seed);
            let config = DecodeConfig {
                beam_width: 27,
                max_len: 3,
            };
            let (beam_ids, beam_lp) = beam_search(&a, &params, &vocab, &config).unwrap();
            let (best_ids, best_lp) = enumerate_best(&a, &params, &vocab, config.max_len);
            assert_eq!(beam_ids, best_ids, "seed {seed}");
            assert!((beam_lp - best_lp).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn beam_four_never_loses_to_greedy() {
        let dims = DecoderDims::new(5, 3, 4, 3, 3);
        let vocab = toy_vocab(5);
        for seed in 0..100 {
            let params = DecoderParams::init(dims, 2000 + seed);
            let a = random_annotations(3, 3, 3000 + seed);
            let (_, greedy_lp) = greedy_decode_scored(&a, &params, &vocab, 6).unwrap();
            let config = DecodeConfig {
                beam_width: 4,
                max_len: 6,
            };
            let (_, beam_lp) = beam_search(&a, &params, &vocab, &config).unwrap();
            assert!(
                beam_lp >= greedy_lp - 1e-12,
                "seed {seed}: beam {beam_lp} < greedy {greedy_lp}"
            );
        }
    }

    #[test]
    fn wider_beams_never_score_worse() {
        let dims = DecoderDims::new(4, 3, 3, 3, 2);
        let vocab = toy_vocab(4);
        for seed in 0..50 {
            let params = DecoderParams::init(dims, 4000 + seed);
            let a = random_annotations(3, 2, 5000 + seed);
            let mut last = f64::NEG_INFINITY;
            for width in 1..=4 {
                let config = DecodeConfig {
                    beam_width: width,
                    max_len: 4,
                };
                let (_, lp) = beam_search(&a, &params, &vocab, &config).unwrap();
                assert!(
                    lp >= last - 1e-12,
                    "seed {seed}: width {width} scored {lp} < {last}"
                );
                last = lp;
            }
        }
    }

    #[test]
    fn outputs_never_contain_the_end_token() {
        let dims = DecoderDims::new(5, 3, 4, 3, 3);
        let vocab = toy_vocab(5);
        for seed in 0..30 {
            let params = DecoderParams::init(dims, 6000 + seed);
            let a = random_annotations(3, 3, 7000 + seed);
            let ids = greedy_decode(&a, &params, &vocab, 8).unwrap();
            assert!(!ids.contains(&vocab.end_id()));
            let (beam_ids, _) =
                beam_search(&a, &params, &vocab, &DecodeConfig { beam_width: 4, max_len: 8 })
                    .unwrap();
            assert!(!beam_ids.contains(&vocab.end_id()));
        }
    }
}
