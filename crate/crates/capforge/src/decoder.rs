//! Soft-attention LSTM decoder: state initialization, per-row attention,
//! gated recurrence, output distribution, and exact gradients.
//!
//! One decoding step consumes the previous word id `w`, the previous state
//! `(h, c)`, and the annotation matrix `A`:
//!
//! * attention scores one annotation row at a time through a one-hidden-layer
//!   perceptron on `(A_i, h)`, normalizes them with a stable softmax into
//!   weights `alpha`, and mixes the rows into a context vector `z`;
//! * the four LSTM gates see the embedded word, the previous hidden state,
//!   and `z`; gates use the logistic sigmoid, the candidate cell uses tanh;
//! * the output layer forms `embed(w) + W_h h + W_z z`, projects it to
//!   vocabulary logits, and returns log-probabilities.
//!
//! [`backward_sequence`] derives the gradient of the training loss by hand,
//! step by step in reverse, including the paths through the attention
//! weights, the context vector, the recurrent state, and the init MLP. It is
//! checked coordinate-by-coordinate against central finite differences (see
//! [`crate::training::grad_check`] and the acceptance suite).

use ndarray::{Array1, Array2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::annotation::AnnotationSet;
use crate::error::{Error, Result};

/// Width of every tensor in the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderDims {
    /// Vocabulary size V.
    pub vocab: usize,
    /// Word embedding width m.
    pub embed: usize,
    /// Hidden/cell width H.
    pub hidden: usize,
    /// Annotation row width D.
    pub annot: usize,
    /// Attention MLP hidden width.
    pub attn: usize,
}

impl DecoderDims {
    pub fn new(vocab: usize, embed: usize, hidden: usize, annot: usize, attn: usize) -> Self {
        assert!(
            vocab >= 1 && embed >= 1 && hidden >= 1 && annot >= 1 && attn >= 1,
            "all decoder dimensions must be >= 1"
        );
        DecoderDims {
            vocab,
            embed,
            hidden,
            annot,
            attn,
        }
    }
}

/// One LSTM gate's weights: applied to the embedded previous word, the
/// previous hidden state, and the context vector, plus a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GateWeights {
    pub word: Array2<f64>,   // H x m
    pub hidden: Array2<f64>, // H x H
    pub ctx: Array2<f64>,    // H x D
    pub bias: Array1<f64>,   // H
}

impl GateWeights {
    fn zeros(dims: &DecoderDims) -> GateWeights {
        GateWeights {
            word: Array2::zeros((dims.hidden, dims.embed)),
            hidden: Array2::zeros((dims.hidden, dims.hidden)),
            ctx: Array2::zeros((dims.hidden, dims.annot)),
            bias: Array1::zeros(dims.hidden),
        }
    }

    fn preactivation(&self, x: &Array1<f64>, h: &Array1<f64>, z: &Array1<f64>) -> Array1<f64> {
        self.word.dot(x) + self.hidden.dot(h) + self.ctx.dot(z) + &self.bias
    }
}

/// Every learned tensor of the decoder. The same container holds gradients
/// and optimizer velocities, which share all shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub dims: DecoderDims,
    /// V x m word embedding.
    pub embedding: Array2<f64>,
    pub input_gate: GateWeights,
    pub forget_gate: GateWeights,
    pub cell_gate: GateWeights,
    pub output_gate: GateWeights,
    /// Attention MLP: annotation rows in, hidden state in, scalar score out.
    pub attn_annot: Array2<f64>,  // attn x D
    pub attn_hidden: Array2<f64>, // attn x H
    pub attn_bias: Array1<f64>,   // attn
    pub attn_score: Array1<f64>,  // attn
    /// Init MLP mapping the mean annotation row to the starting state.
    pub init_h: Array2<f64>, // H x D
    pub init_h_bias: Array1<f64>,
    pub init_c: Array2<f64>, // H x D
    pub init_c_bias: Array1<f64>,
    /// Output layer: logits = out_word (embed(w) + out_hidden h + out_ctx z) + out_bias.
    pub out_word: Array2<f64>,   // V x m
    pub out_hidden: Array2<f64>, // m x H
    pub out_ctx: Array2<f64>,    // m x D
    pub out_bias: Array1<f64>,   // V
}

/// Borrowed view of one named parameter tensor.
pub struct TensorView<'a> {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

/// Mutable counterpart of [`TensorView`].
pub struct TensorViewMut<'a> {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
}

macro_rules! visit_tensors {
    ($self:expr, $slice:ident) => {{
        let p = $self;
        vec![
            (p.embedding.$slice(), "embedding"),
            (p.input_gate.word.$slice(), "input_gate.word"),
            (p.input_gate.hidden.$slice(), "input_gate.hidden"),
            (p.input_gate.ctx.$slice(), "input_gate.ctx"),
            (p.input_gate.bias.$slice(), "input_gate.bias"),
            (p.forget_gate.word.$slice(), "forget_gate.word"),
            (p.forget_gate.hidden.$slice(), "forget_gate.hidden"),
            (p.forget_gate.ctx.$slice(), "forget_gate.ctx"),
            (p.forget_gate.bias.$slice(), "forget_gate.bias"),
            (p.cell_gate.word.$slice(), "cell_gate.word"),
            (p.cell_gate.hidden.$slice(), "cell_gate.hidden"),
            (p.cell_gate.ctx.$slice(), "cell_gate.ctx"),
            (p.cell_gate.bias.$slice(), "cell_gate.bias"),
            (p.output_gate.word.$slice(), "output_gate.word"),
            (p.output_gate.hidden.$slice(), "output_gate.hidden"),
            (p.output_gate.ctx.$slice(), "output_gate.ctx"),
            (p.output_gate.bias.$slice(), "output_gate.bias"),
            (p.attn_annot.$slice(), "attention.annot"),
            (p.attn_hidden.$slice(), "attention.hidden"),
            (p.attn_bias.$slice(), "attention.bias"),
            (p.attn_score.$slice(), "attention.score"),
            (p.init_h.$slice(), "init_h.weight"),
            (p.init_h_bias.$slice(), "init_h.bias"),
            (p.init_c.$slice(), "init_c.weight"),
            (p.init_c_bias.$slice(), "init_c.bias"),
            (p.out_word.$slice(), "output.word"),
            (p.out_hidden.$slice(), "output.hidden"),
            (p.out_ctx.$slice(), "output.ctx"),
            (p.out_bias.$slice(), "output.bias"),
        ]
    }};
}

impl DecoderParams {
    /// All-zero parameters; also the shape template for gradients and
    /// optimizer velocities.
    pub fn zeros(dims: DecoderDims) -> DecoderParams {
        DecoderParams {
            dims,
            embedding: Array2::zeros((dims.vocab, dims.embed)),
            input_gate: GateWeights::zeros(&dims),
            forget_gate: GateWeights::zeros(&dims),
            cell_gate: GateWeights::zeros(&dims),
            output_gate: GateWeights::zeros(&dims),
            attn_annot: Array2::zeros((dims.attn, dims.annot)),
            attn_hidden: Array2::zeros((dims.attn, dims.hidden)),
            attn_bias: Array1::zeros(dims.attn),
            attn_score: Array1::zeros(dims.attn),
            init_h: Array2::zeros((dims.hidden, dims.annot)),
            init_h_bias: Array1::zeros(dims.hidden),
            init_c: Array2::zeros((dims.hidden, dims.annot)),
            init_c_bias: Array1::zeros(dims.hidden),
            out_word: Array2::zeros((dims.vocab, dims.embed)),
            out_hidden: Array2::zeros((dims.embed, dims.hidden)),
            out_ctx: Array2::zeros((dims.embed, dims.annot)),
            out_bias: Array1::zeros(dims.vocab),
        }
    }

    /// Seeded initialization: every weight matrix is uniform in [-r, r] with
    /// r = sqrt(6 / (fan_in + fan_out)); biases start at zero. The attention
    /// score vector counts as a 1-row matrix.
    pub fn init(dims: DecoderDims, seed: u64) -> DecoderParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = DecoderParams::zeros(dims);
        for t in params.visit_mut() {
            let (fan_out, fan_in) = match t.shape.as_slice() {
                [rows, cols] => (*rows, *cols),
                [len] if t.name.ends_with("bias") => {
                    // Biases stay zero.
                    let _ = len;
                    continue;
                }
                [len] => (1, *len),
                _ => unreachable!("tensors are rank 1 or 2"),
            };
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for v in t.data.iter_mut() {
                *v = dist.sample(&mut rng);
            }
        }
        params
    }

    /// Named views of all 29 tensors, in a fixed order shared with
    /// [`visit_mut`](Self::visit_mut), the checkpoint format, and the
    /// optimizer.
    pub fn visit(&self) -> Vec<TensorView<'_>> {
        visit_tensors!(self, view_parts)
            .into_iter()
            .map(|((shape, data), name)| TensorView { name, shape, data })
            .collect()
    }

    pub fn visit_mut(&mut self) -> Vec<TensorViewMut<'_>> {
        visit_tensors!(self, view_parts_mut)
            .into_iter()
            .map(|((shape, data), name)| TensorViewMut { name, shape, data })
            .collect()
    }

    /// Total number of scalar coordinates.
    pub fn coordinate_count(&self) -> usize {
        self.visit().iter().map(|t| t.data.len()).sum()
    }

    /// First tensor containing a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.visit()
            .iter()
            .find(|t| t.data.iter().any(|v| !v.is_finite()))
            .map(|t| t.name)
    }
}

trait ViewParts {
    fn view_parts(&self) -> (Vec<usize>, &[f64]);
    fn view_parts_mut(&mut self) -> (Vec<usize>, &mut [f64]);
}

impl ViewParts for Array2<f64> {
    fn view_parts(&self) -> (Vec<usize>, &[f64]) {
        (
            self.shape().to_vec(),
            self.as_slice().expect("standard layout"),
        )
    }
    fn view_parts_mut(&mut self) -> (Vec<usize>, &mut [f64]) {
        (
            self.shape().to_vec(),
            self.as_slice_mut().expect("standard layout"),
        )
    }
}

impl ViewParts for Array1<f64> {
    fn view_parts(&self) -> (Vec<usize>, &[f64]) {
        (
            self.shape().to_vec(),
            self.as_slice().expect("standard layout"),
        )
    }
    fn view_parts_mut(&mut self) -> (Vec<usize>, &mut [f64]) {
        (
            self.shape().to_vec(),
            self.as_slice_mut().expect("standard layout"),
        )
    }
}

/// Hidden and cell vectors carried across time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

/// Everything one decoding step produced: attention weights, context vector,
/// the new state, and the log-probability vector over the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub alpha: Array1<f64>,
    pub ctx: Array1<f64>,
    pub state: DecoderState,
    pub log_probs: Array1<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Softmax with max-subtraction.
fn softmax(scores: &Array1<f64>) -> Array1<f64> {
    let max = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exp = scores.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// Log-softmax with max-subtraction.
fn log_softmax(scores: &Array1<f64>) -> Array1<f64> {
    let max = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let log_sum = scores.mapv(|v| (v - max).exp()).sum().ln();
    scores.mapv(|v| v - max - log_sum)
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

fn check_annot_width(annotations: &AnnotationSet, params: &DecoderParams) -> Result<()> {
    if annotations.width() != params.dims.annot {
        return Err(Error::DimMismatch {
            context: "annotation width vs decoder".into(),
            expected: params.dims.annot,
            got: annotations.width(),
        });
    }
    Ok(())
}

fn check_word_id(word: usize, params: &DecoderParams) -> Result<()> {
    if word >= params.dims.vocab {
        return Err(Error::IdOutOfRange {
            id: word,
            size: params.dims.vocab,
        });
    }
    Ok(())
}

/// Starting state from the mean annotation row, squashed through tanh.
pub fn init_state(annotations: &AnnotationSet, params: &DecoderParams) -> Result<DecoderState> {
    check_annot_width(annotations, params)?;
    let mean = annotations.mean_row();
    let h = (params.init_h.dot(&mean) + &params.init_h_bias).mapv(f64::tanh);
    let c = (params.init_c.dot(&mean) + &params.init_c_bias).mapv(f64::tanh);
    Ok(DecoderState { h, c })
}

/// Attention internals kept for the backward pass: the L x attn tanh hidden
/// activations alongside the weights and context vector.
pub(crate) struct AttendDetail {
    pub hidden: Array2<f64>, // L x attn
    pub alpha: Array1<f64>,  // L
    pub ctx: Array1<f64>,    // D
}

pub(crate) fn attend_detail(
    annotations: &AnnotationSet,
    h_prev: &Array1<f64>,
    params: &DecoderParams,
) -> AttendDetail {
    // u_i = tanh(W_annot A_i + W_hidden h + b), row-wise over A.
    let shift = params.attn_hidden.dot(h_prev) + &params.attn_bias;
    let mut hidden = annotations.rows().dot(&params.attn_annot.t());
    for mut row in hidden.rows_mut() {
        row += &shift;
    }
    hidden.mapv_inplace(f64::tanh);
    let scores = hidden.dot(&params.attn_score);
    let alpha = softmax(&scores);
    let ctx = annotations.rows().t().dot(&alpha);
    AttendDetail { hidden, alpha, ctx }
}

/// Scores every annotation row against the previous hidden state and returns
/// the normalized weights plus the weighted row mixture.
pub fn attend(
    annotations: &AnnotationSet,
    h_prev: &Array1<f64>,
    params: &DecoderParams,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_annot_width(annotations, params)?;
    if h_prev.len() != params.dims.hidden {
        return Err(Error::DimMismatch {
            context: "hidden state width vs decoder".into(),
            expected: params.dims.hidden,
            got: h_prev.len(),
        });
    }
    let detail = attend_detail(annotations, h_prev, params);
    Ok((detail.alpha, detail.ctx))
}

/// Post-activation gate values for one step.
pub(crate) struct GateActivations {
    pub input: Array1<f64>,
    pub forget: Array1<f64>,
    pub output: Array1<f64>,
    /// tanh candidate cell value.
    pub cell: Array1<f64>,
}

pub(crate) fn gate_activations(
    word: usize,
    state: &DecoderState,
    ctx: &Array1<f64>,
    params: &DecoderParams,
) -> GateActivations {
    let x = params.embedding.row(word).to_owned();
    GateActivations {
        input: params
            .input_gate
            .preactivation(&x, &state.h, ctx)
            .mapv(sigmoid),
        forget: params
            .forget_gate
            .preactivation(&x, &state.h, ctx)
            .mapv(sigmoid),
        output: params
            .output_gate
            .preactivation(&x, &state.h, ctx)
            .mapv(sigmoid),
        cell: params
            .cell_gate
            .preactivation(&x, &state.h, ctx)
            .mapv(f64::tanh),
    }
}

/// One gated recurrence step: sigmoid input/forget/output gates, tanh
/// candidate cell, `c' = f * c + in * g`, `h' = o * tanh(c')`.
pub fn lstm_step(
    word: usize,
    state: &DecoderState,
    ctx: &Array1<f64>,
    params: &DecoderParams,
) -> Result<DecoderState> {
    check_word_id(word, params)?;
    let gates = gate_activations(word, state, ctx, params);
    let c = &gates.forget * &state.c + &gates.input * &gates.cell;
    let h = &gates.output * &c.mapv(f64::tanh);
    Ok(DecoderState { h, c })
}

/// Log-probabilities of the next word: the embedded previous word, the new
/// hidden state, and the context vector combine into an embed-width vector
/// that the output matrix projects to logits.
pub fn output_log_probs(
    word: usize,
    state: &DecoderState,
    ctx: &Array1<f64>,
    params: &DecoderParams,
) -> Result<Array1<f64>> {
    check_word_id(word, params)?;
    let combined =
        params.embedding.row(word).to_owned() + params.out_hidden.dot(&state.h) + params.out_ctx.dot(ctx);
    let logits = params.out_word.dot(&combined) + &params.out_bias;
    Ok(log_softmax(&logits))
}

/// Teacher-forced forward pass over a target sequence. Step `j` consumes the
/// previous target word (`start_id` at the first step), attends, advances the
/// LSTM, and scores the vocabulary; one [`StepTrace`] per target id.
pub fn forward_sequence(
    annotations: &AnnotationSet,
    target_ids: &[usize],
    params: &DecoderParams,
    start_id: usize,
) -> Result<Vec<StepTrace>> {
    assert!(!target_ids.is_empty(), "target sequence must be non-empty");
    check_annot_width(annotations, params)?;
    let mut state = init_state(annotations, params)?;
    let mut traces = Vec::with_capacity(target_ids.len());
    for (j, &target) in target_ids.iter().enumerate() {
        check_word_id(target, params)?;
        let prev = if j == 0 { start_id } else { target_ids[j - 1] };
        let (alpha, ctx) = attend(annotations, &state.h, params)?;
        state = lstm_step(prev, &state, &ctx, params)?;
        let log_probs = output_log_probs(prev, &state, &ctx, params)?;
        traces.push(StepTrace {
            alpha,
            ctx,
            state: state.clone(),
            log_probs,
        });
    }
    Ok(traces)
}

/// Exact gradient of the regularized negative-log-likelihood loss (see
/// [`crate::training::loss`]) with respect to every parameter tensor.
///
/// `traces` must come from [`forward_sequence`] on the same inputs. Gate and
/// attention activations are recomputed from the stored states, which is
/// bit-identical to the forward pass. The embedding gradient accumulates over
/// every use of a row (gate path and output path at each step).
pub fn backward_sequence(
    annotations: &AnnotationSet,
    target_ids: &[usize],
    params: &DecoderParams,
    traces: &[StepTrace],
    start_id: usize,
    lambda: f64,
) -> Result<DecoderParams> {
    assert_eq!(
        traces.len(),
        target_ids.len(),
        "one trace per target id required"
    );
    check_annot_width(annotations, params)?;
    check_word_id(start_id, params)?;
    let dims = params.dims;
    let mut grads = DecoderParams::zeros(dims);

    // Attention mass per annotation row across the whole sequence; the
    // penalty lambda * sum_i (1 - mass_i)^2 contributes -2 lambda (1 - mass_i)
    // to every step's d alpha_i.
    let mut mass = Array1::zeros(annotations.len());
    for trace in traces {
        mass += &trace.alpha;
    }
    let penalty_dalpha = mass.mapv(|s| -2.0 * lambda * (1.0 - s));

    let init = init_state(annotations, params)?;
    let mut dh_next: Array1<f64> = Array1::zeros(dims.hidden);
    let mut dc_next: Array1<f64> = Array1::zeros(dims.hidden);

    for j in (0..target_ids.len()).rev() {
        let trace = &traces[j];
        let prev_word = if j == 0 { start_id } else { target_ids[j - 1] };
        let prev_state = if j == 0 { &init } else { &traces[j - 1].state };
        let x = params.embedding.row(prev_word).to_owned();
        let gates = gate_activations(prev_word, prev_state, &trace.ctx, params);
        let tanh_c = trace.state.c.mapv(f64::tanh);

        // Output layer. d logits = softmax - onehot(target).
        let mut d_logits = trace.log_probs.mapv(f64::exp);
        d_logits[target_ids[j]] -= 1.0;
        let combined = &x + &params.out_hidden.dot(&trace.state.h) + &params.out_ctx.dot(&trace.ctx);
        grads.out_word += &outer(&d_logits, &combined);
        grads.out_bias += &d_logits;
        let d_combined = params.out_word.t().dot(&d_logits);
        grads.out_hidden += &outer(&d_combined, &trace.state.h);
        grads.out_ctx += &outer(&d_combined, &trace.ctx);
        let mut d_x = d_combined.clone();
        let mut d_ctx = params.out_ctx.t().dot(&d_combined);
        let d_h = dh_next + params.out_hidden.t().dot(&d_combined);

        // h = o * tanh(c); c = f * c_prev + in * g.
        let d_out_gate = &d_h * &tanh_c;
        let d_c = dc_next + d_h * &gates.output * tanh_c.mapv(|t| 1.0 - t * t);
        let d_forget = &d_c * &prev_state.c;
        let d_input = &d_c * &gates.cell;
        let d_cell = &d_c * &gates.input;
        dc_next = &d_c * &gates.forget;

        // Through the gate nonlinearities to pre-activations: sigmoid gates
        // fold s(1-s), the tanh candidate folds 1-g^2.
        let sigmoid_back =
            |d: &Array1<f64>, s: &Array1<f64>| d * s * s.mapv(|v| 1.0 - v);
        let d_pre_input = sigmoid_back(&d_input, &gates.input);
        let d_pre_forget = sigmoid_back(&d_forget, &gates.forget);
        let d_pre_output = sigmoid_back(&d_out_gate, &gates.output);
        let d_pre_cell = &d_cell * &gates.cell.mapv(|g| 1.0 - g * g);

        let mut dh_prev: Array1<f64> = Array1::zeros(dims.hidden);
        let gate_paths = [
            (&params.input_gate, &mut grads.input_gate, d_pre_input),
            (&params.forget_gate, &mut grads.forget_gate, d_pre_forget),
            (&params.output_gate, &mut grads.output_gate, d_pre_output),
            (&params.cell_gate, &mut grads.cell_gate, d_pre_cell),
        ];
        for (gate, gate_grads, d_pre) in gate_paths {
            gate_grads.word += &outer(&d_pre, &x);
            gate_grads.hidden += &outer(&d_pre, &prev_state.h);
            gate_grads.ctx += &outer(&d_pre, &trace.ctx);
            gate_grads.bias += &d_pre;
            d_x += &gate.word.t().dot(&d_pre);
            dh_prev += &gate.hidden.t().dot(&d_pre);
            d_ctx += &gate.ctx.t().dot(&d_pre);
        }

        grads.embedding.row_mut(prev_word).scaled_add(1.0, &d_x);

        // Attention backward: ctx = A^T alpha, then softmax, then the MLP.
        let detail = attend_detail(annotations, &prev_state.h, params);
        let d_alpha = annotations.rows().dot(&d_ctx) + &penalty_dalpha;
        let alpha_dot = trace.alpha.dot(&d_alpha);
        let d_scores = &trace.alpha * &d_alpha.mapv(|v| v - alpha_dot);
        grads.attn_score += &detail.hidden.t().dot(&d_scores);
        // d hidden_i = d_score_i * score_vec, folded through tanh'.
        let d_pre_hidden =
            outer(&d_scores, &params.attn_score) * detail.hidden.mapv(|u| 1.0 - u * u);
        grads.attn_annot += &d_pre_hidden.t().dot(annotations.rows());
        let d_pre_sum = d_pre_hidden.sum_axis(Axis(0));
        grads.attn_hidden += &outer(&d_pre_sum, &prev_state.h);
        grads.attn_bias += &d_pre_sum;
        dh_prev += &params.attn_hidden.t().dot(&d_pre_sum);

        dh_next = dh_prev;
    }

    // Into the init MLP through the two tanh squashes.
    let mean = annotations.mean_row();
    let d_init_h = dh_next * init.h.mapv(|v| 1.0 - v * v);
    grads.init_h += &outer(&d_init_h, &mean);
    grads.init_h_bias += &d_init_h;
    let d_init_c = dc_next * init.c.mapv(|v| 1.0 - v * v);
    grads.init_c += &outer(&d_init_c, &mean);
    grads.init_c_bias += &d_init_c;

    Ok(grads)
}
