//! Conditional recurrent caption generator.
//!
//! One tanh cell of width `hidden`. The scene embedding `c` sets the initial
//! state through a learned projection and, when `context_every_step` is on,
//! is also added to the cell input at every step:
//!
//! ```text
//! h_0 = tanh(W_img c + b_img)
//! h_t = tanh(W_hh h_{t-1} + E[x_{t-1}] + b_h (+ W_ctx c))
//! p(x_t | x_<t, c) = softmax(W_out h_t + b_out)
//! ```
//!
//! Gradients are hand-derived backpropagation through time; every public
//! gradient path is checked against central finite differences in the tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::math;
use crate::synthworld::{Caption, Provenance, Scene, Token, BOS, EOS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PolicyConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub input_dim: usize,
    pub context_every_step: bool,
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 3 || self.hidden == 0 || self.input_dim == 0 {
            return Err(LabError::InvalidConfig(format!("policy shape {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    w_img: usize,
    b_img: usize,
    embed: usize,
    w_hh: usize,
    b_h: usize,
    w_ctx: usize,
    w_out: usize,
    b_out: usize,
    total: usize,
}

impl Layout {
    fn new(c: &PolicyConfig) -> Self {
        let (v, h, d) = (c.vocab_size, c.hidden, c.input_dim);
        let w_img = 0;
        let b_img = w_img + h * d;
        let embed = b_img + h;
        let w_hh = embed + v * h;
        let b_h = w_hh + h * h;
        let w_ctx = b_h + h;
        let w_out = w_ctx + if c.context_every_step { h * d } else { 0 };
        let b_out = w_out + v * h;
        let total = b_out + v;
        Self {
            w_img,
            b_img,
            embed,
            w_hh,
            b_h,
            w_ctx,
            w_out,
            b_out,
            total,
        }
    }
}

/// Flat parameter vector of the generator with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParameters {
    config: PolicyConfig,
    layout_total: usize,
    values: Vec<f64>,
    grad: Vec<f64>,
}

/// Result of scoring or decoding one caption.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub caption: Caption,
    pub log_prob: f64,
    pub per_token_log_probs: Vec<f64>,
}

struct Trace {
    /// h_0 … h_T
    hidden: Vec<Vec<f64>>,
    /// log-softmax at steps 1 … T
    log_probs: Vec<Vec<f64>>,
}

impl PolicyParameters {
    /// All-zero parameters: every next-token distribution is uniform.
    pub fn zeros(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        let n = Layout::new(&config).total;
        Ok(Self {
            config,
            layout_total: n,
            values: vec![0.0; n],
            grad: vec![0.0; n],
        })
    }

    /// Seeded Gaussian initialization.
    pub fn init(config: PolicyConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let l = p.layout();
        let (v, h, d) = (config.vocab_size, config.hidden, config.input_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |values: &mut [f64], std: f64| {
            let dist = Normal::new(0.0, std).expect("positive std");
            values.iter_mut().for_each(|x| *x = dist.sample(&mut rng));
        };
        fill(&mut p.values[l.w_img..l.w_img + h * d], 1.0);
        fill(&mut p.values[l.embed..l.embed + v * h], 0.5);
        fill(&mut p.values[l.w_hh..l.w_hh + h * h], 1.0 / (h as f64).sqrt());
        if config.context_every_step {
            fill(&mut p.values[l.w_ctx..l.w_ctx + h * d], 1.0);
        }
        fill(&mut p.values[l.w_out..l.w_out + v * h], 0.1 / (h as f64).sqrt());
        Ok(p)
    }

    /// Rebuilds parameters from a stored flat vector.
    pub fn from_values(config: PolicyConfig, values: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        if values.len() != p.layout_total {
            return Err(LabError::DimensionMismatch {
                expected: p.layout_total,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("policy checkpoint".into()));
        }
        p.values = values;
        Ok(p)
    }

    fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Output bias slice; handy for building hand-set policies.
    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let l = self.layout();
        &mut self.values[l.b_out..l.b_out + self.config.vocab_size]
    }

    /// Token-embedding row of `token`.
    pub fn embedding_row_mut(&mut self, token: Token) -> &mut [f64] {
        let l = self.layout();
        let h = self.config.hidden;
        let start = l.embed + token as usize * h;
        &mut self.values[start..start + h]
    }

    /// Output-projection row of `token`.
    pub fn output_row_mut(&mut self, token: Token) -> &mut [f64] {
        let l = self.layout();
        let h = self.config.hidden;
        let start = l.w_out + token as usize * h;
        &mut self.values[start..start + h]
    }

    /// SHA-256 of the shape and parameter bits.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        let c = &self.config;
        for x in [c.vocab_size, c.hidden, c.input_dim, c.context_every_step as usize] {
            hasher.update((x as u64).to_le_bytes());
        }
        for v in &self.values {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    fn check_context(&self, context: &[f64]) -> Result<()> {
        if context.len() != self.config.input_dim {
            return Err(LabError::DimensionMismatch {
                expected: self.config.input_dim,
                got: context.len(),
            });
        }
        Ok(())
    }

    fn check_caption(&self, tokens: &[Token]) -> Result<()> {
        if tokens.len() < 2 || tokens[0] != BOS {
            return Err(LabError::OutOfRange("caption must start with <bos> and contain a token".into()));
        }
        if let Some(t) = tokens.iter().find(|t| **t as usize >= self.config.vocab_size) {
            return Err(LabError::OutOfRange(format!("token id {t} outside vocabulary")));
        }
        Ok(())
    }

    fn initial_state(&self, context: &[f64]) -> Vec<f64> {
        let l = self.layout();
        let (h, d) = (self.config.hidden, self.config.input_dim);
        let mut pre = self.values[l.b_img..l.b_img + h].to_vec();
        math::gemv_add(&self.values[l.w_img..l.w_img + h * d], h, d, context, &mut pre);
        pre.iter_mut().for_each(|x| *x = x.tanh());
        pre
    }

    fn cell(&self, prev: &[f64], token: Token, context: &[f64]) -> Vec<f64> {
        let l = self.layout();
        let (h, d) = (self.config.hidden, self.config.input_dim);
        let e = l.embed + token as usize * h;
        let mut pre: Vec<f64> = self.values[e..e + h]
            .iter()
            .zip(&self.values[l.b_h..l.b_h + h])
            .map(|(a, b)| a + b)
            .collect();
        math::gemv_add(&self.values[l.w_hh..l.w_hh + h * h], h, h, prev, &mut pre);
        if self.config.context_every_step {
            math::gemv_add(&self.values[l.w_ctx..l.w_ctx + h * d], h, d, context, &mut pre);
        }
        pre.iter_mut().for_each(|x| *x = x.tanh());
        pre
    }

    fn next_log_probs(&self, state: &[f64]) -> Vec<f64> {
        let l = self.layout();
        let (v, h) = (self.config.vocab_size, self.config.hidden);
        let mut logits = self.values[l.b_out..l.b_out + v].to_vec();
        math::gemv_add(&self.values[l.w_out..l.w_out + v * h], v, h, state, &mut logits);
        math::log_softmax_in_place(&mut logits);
        logits
    }

    fn trace(&self, context: &[f64], tokens: &[Token]) -> Trace {
        let mut hidden = Vec::with_capacity(tokens.len());
        let mut log_probs = Vec::with_capacity(tokens.len() - 1);
        hidden.push(self.initial_state(context));
        for t in 1..tokens.len() {
            let h = self.cell(&hidden[t - 1], tokens[t - 1], context);
            log_probs.push(self.next_log_probs(&h));
            hidden.push(h);
        }
        Trace { hidden, log_probs }
    }

    /// Per-token log-probabilities of `tokens[1..]` given the context.
    pub fn token_log_probs(&self, context: &[f64], tokens: &[Token]) -> Result<Vec<f64>> {
        self.check_context(context)?;
        self.check_caption(tokens)?;
        let trace = self.trace(context, tokens);
        Ok(trace
            .log_probs
            .iter()
            .zip(&tokens[1..])
            .map(|(lp, &x)| lp[x as usize])
            .collect())
    }

    /// Next-token distributions along the caption (for diagnostics and tests).
    pub fn step_distributions(&self, context: &[f64], tokens: &[Token]) -> Result<Vec<Vec<f64>>> {
        self.check_context(context)?;
        self.check_caption(tokens)?;
        Ok(self
            .trace(context, tokens)
            .log_probs
            .into_iter()
            .map(|lp| lp.into_iter().map(f64::exp).collect())
            .collect())
    }

    /// `-log p(tokens | context)`.
    pub fn nll(&self, context: &[f64], tokens: &[Token]) -> Result<f64> {
        Ok(-self.token_log_probs(context, tokens)?.iter().sum::<f64>())
    }

    /// Adds `scale · ∇(-log p(tokens | context))` to the gradient buffer and
    /// returns the negative log-likelihood.
    pub fn accumulate_nll_gradient(&mut self, context: &[f64], tokens: &[Token], scale: f64) -> Result<f64> {
        self.check_context(context)?;
        self.check_caption(tokens)?;
        let trace = self.trace(context, tokens);
        let nll = -trace
            .log_probs
            .iter()
            .zip(&tokens[1..])
            .map(|(lp, &x)| lp[x as usize])
            .sum::<f64>();
        if scale == 0.0 {
            return Ok(nll);
        }
        let l = self.layout();
        let (v, h, d) = (self.config.vocab_size, self.config.hidden, self.config.input_dim);
        let values = &self.values;
        let grad = &mut self.grad;
        let steps = tokens.len() - 1;

        let mut dh_next = vec![0.0; h];
        let mut d_logits = vec![0.0; v];
        let mut dh = vec![0.0; h];
        for t in (1..=steps).rev() {
            let h_t = &trace.hidden[t];
            let h_prev = &trace.hidden[t - 1];
            for (dl, lp) in d_logits.iter_mut().zip(&trace.log_probs[t - 1]) {
                *dl = scale * lp.exp();
            }
            d_logits[tokens[t] as usize] -= scale;

            for (g, dl) in grad[l.b_out..l.b_out + v].iter_mut().zip(&d_logits) {
                *g += dl;
            }
            math::outer_add(&mut grad[l.w_out..l.w_out + v * h], &d_logits, h_t, 1.0);

            dh.copy_from_slice(&dh_next);
            math::gemv_t_add(&values[l.w_out..l.w_out + v * h], v, h, &d_logits, &mut dh);
            let d_pre: Vec<f64> = dh.iter().zip(h_t).map(|(g, y)| g * (1.0 - y * y)).collect();

            math::outer_add(&mut grad[l.w_hh..l.w_hh + h * h], &d_pre, h_prev, 1.0);
            let e = l.embed + tokens[t - 1] as usize * h;
            for (k, dp) in d_pre.iter().enumerate() {
                grad[l.b_h + k] += dp;
                grad[e + k] += dp;
            }
            if self.config.context_every_step {
                math::outer_add(&mut grad[l.w_ctx..l.w_ctx + h * d], &d_pre, context, 1.0);
            }
            dh_next.iter_mut().for_each(|x| *x = 0.0);
            math::gemv_t_add(&values[l.w_hh..l.w_hh + h * h], h, h, &d_pre, &mut dh_next);
        }
        let h0 = &trace.hidden[0];
        let d_pre0: Vec<f64> = dh_next.iter().zip(h0).map(|(g, y)| g * (1.0 - y * y)).collect();
        math::outer_add(&mut grad[l.w_img..l.w_img + h * d], &d_pre0, context, 1.0);
        for (g, dp) in grad[l.b_img..l.b_img + h].iter_mut().zip(&d_pre0) {
            *g += dp;
        }
        Ok(nll)
    }

    /// Plain gradient-descent step, then clears the buffer.
    pub fn apply_update(&mut self, learning_rate: f64) -> Result<()> {
        if let Some((i, g)) = self.grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            let n_bad = self.grad.iter().filter(|g| !g.is_finite()).count();
            return Err(LabError::NonFinite(format!(
                "policy gradient: {n_bad} non-finite entries, first at {i} = {g}"
            )));
        }
        if learning_rate != 0.0 {
            for (p, g) in self.values.iter_mut().zip(&self.grad) {
                *p -= learning_rate * g;
            }
        }
        self.zero_grad();
        Ok(())
    }

    /// Whether `token` may be emitted as the `step`-th generated token
    /// (1-based) with a horizon of `max_len` generated tokens: never `<bos>`,
    /// never `<eos>` first, and only `<eos>` at the horizon.
    fn allowed(token: Token, step: usize, max_len: usize) -> bool {
        if token == BOS {
            return false;
        }
        if step >= max_len {
            return token == EOS;
        }
        !(token == EOS && step == 1)
    }

    fn check_horizon(&self, max_len: usize) -> Result<()> {
        if max_len < 2 {
            return Err(LabError::OutOfRange(format!("max_len {max_len} < 2")));
        }
        Ok(())
    }

    /// Argmax decoding; ties go to the lower token id.
    pub fn greedy(&self, context: &[f64], max_len: usize) -> Result<(Vec<Token>, Vec<f64>)> {
        self.check_context(context)?;
        self.check_horizon(max_len)?;
        let mut tokens = vec![BOS];
        let mut per_token = Vec::new();
        let mut state = self.cell(&self.initial_state(context), BOS, context);
        for step in 1..=max_len {
            let lp = self.next_log_probs(&state);
            let mut best: Option<(Token, f64)> = None;
            for (t, &v) in lp.iter().enumerate() {
                let t = t as Token;
                if Self::allowed(t, step, max_len) && best.is_none_or(|(_, b)| v > b) {
                    best = Some((t, v));
                }
            }
            let (t, v) = best.expect("<eos> is always allowed past the first step");
            tokens.push(t);
            per_token.push(v);
            if t == EOS {
                break;
            }
            state = self.cell(&state, t, context);
        }
        Ok((tokens, per_token))
    }

    /// Beam search over cumulative log-probability without length
    /// normalization. Finished hypotheses leave the beam and compete on total
    /// log-probability; ties go to the lexicographically smaller sequence.
    pub fn beam(&self, context: &[f64], beam_size: usize, max_len: usize) -> Result<(Vec<Token>, Vec<f64>)> {
        self.check_context(context)?;
        self.check_horizon(max_len)?;
        if beam_size == 0 {
            return Err(LabError::OutOfRange("beam size must be at least 1".into()));
        }
        struct Hyp {
            tokens: Vec<Token>,
            per_token: Vec<f64>,
            log_prob: f64,
            state: Vec<f64>,
        }
        let mut live = vec![Hyp {
            tokens: vec![BOS],
            per_token: vec![],
            log_prob: 0.0,
            state: self.cell(&self.initial_state(context), BOS, context),
        }];
        let mut finished: Vec<(Vec<Token>, Vec<f64>, f64)> = Vec::new();
        for step in 1..=max_len {
            // (hypothesis index, token, total log-prob, token log-prob)
            let mut candidates: Vec<(usize, Token, f64, f64)> = Vec::new();
            for (i, hyp) in live.iter().enumerate() {
                let lp = self.next_log_probs(&hyp.state);
                for (t, &v) in lp.iter().enumerate() {
                    if Self::allowed(t as Token, step, max_len) {
                        candidates.push((i, t as Token, hyp.log_prob + v, v));
                    }
                }
            }
            candidates.sort_by(|a, b| {
                b.2.total_cmp(&a.2)
                    .then_with(|| live[a.0].tokens.cmp(&live[b.0].tokens))
                    .then_with(|| a.1.cmp(&b.1))
            });
            candidates.truncate(beam_size);

            let mut next = Vec::with_capacity(candidates.len());
            for (i, t, total, v) in candidates {
                let parent = &live[i];
                let mut tokens = parent.tokens.clone();
                tokens.push(t);
                let mut per_token = parent.per_token.clone();
                per_token.push(v);
                if t == EOS {
                    finished.push((tokens, per_token, total));
                } else {
                    let state = self.cell(&parent.state, t, context);
                    next.push(Hyp {
                        tokens,
                        per_token,
                        log_prob: total,
                        state,
                    });
                }
            }
            live = next;
            if live.is_empty() {
                break;
            }
            let best_live = live.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
            if finished.iter().any(|f| f.2 > best_live) {
                break;
            }
        }
        finished.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        let (tokens, per_token, _) = finished.into_iter().next().expect("horizon forces <eos>");
        Ok((tokens, per_token))
    }
}

fn decode_result(tokens: Vec<Token>, per_token: Vec<f64>, provenance: Provenance, scene_id: usize) -> DecodeResult {
    DecodeResult {
        log_prob: per_token.iter().sum(),
        per_token_log_probs: per_token,
        caption: Caption {
            tokens,
            provenance,
            scene_id,
        },
    }
}

/// Exact autoregressive log-likelihood of `caption` given the scene.
pub fn log_prob(caption: &Caption, scene: &Scene, params: &PolicyParameters) -> Result<DecodeResult> {
    let per_token = params.token_log_probs(scene.embedding()?.as_slice(), &caption.tokens)?;
    Ok(decode_result(caption.tokens.clone(), per_token, caption.provenance, caption.scene_id))
}

/// Mean teacher-forcing NLL over the batch; its gradient is accumulated.
pub fn teacher_forcing_loss(batch: &[(&Scene, &Caption)], params: &mut PolicyParameters) -> Result<f64> {
    if batch.is_empty() {
        return Err(LabError::Empty("teacher forcing batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for (scene, caption) in batch {
        total += params.accumulate_nll_gradient(scene.embedding()?.as_slice(), &caption.tokens, scale)?;
    }
    Ok(total * scale)
}

pub fn greedy_decode(scene: &Scene, params: &PolicyParameters, max_len: usize) -> Result<DecodeResult> {
    let (tokens, per_token) = params.greedy(scene.embedding()?.as_slice(), max_len)?;
    Ok(decode_result(tokens, per_token, Provenance::Greedy, scene.id))
}

pub fn beam_search(scene: &Scene, params: &PolicyParameters, beam_size: usize, max_len: usize) -> Result<DecodeResult> {
    let (tokens, per_token) = params.beam(scene.embedding()?.as_slice(), beam_size, max_len)?;
    Ok(decode_result(tokens, per_token, Provenance::Beam, scene.id))
}

/// Adds `-weight · ∇ log p(caption)` to the buffer. The weight is a constant.
pub fn policy_gradient_accumulate(
    caption: &Caption,
    scene: &Scene,
    weight: f64,
    params: &mut PolicyParameters,
) -> Result<()> {
    if !weight.is_finite() {
        return Err(LabError::NonFinite(format!("policy-gradient weight {weight}")));
    }
    params.accumulate_nll_gradient(scene.embedding()?.as_slice(), &caption.tokens, weight)?;
    Ok(())
}

pub fn apply_update(params: &mut PolicyParameters, learning_rate: f64) -> Result<()> {
    params.apply_update(learning_rate)
}

/// Gradient of `-log softmax(logits)[chosen]` with respect to the logits.
pub fn score_function_gradient(logits: &[f64], chosen: usize) -> Vec<f64> {
    let mut lp = logits.to_vec();
    math::log_softmax_in_place(&mut lp);
    let mut g: Vec<f64> = lp.into_iter().map(f64::exp).collect();
    g[chosen] -= 1.0;
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retriever::EmbeddingVector;

    fn small_config(context_every_step: bool) -> PolicyConfig {
        PolicyConfig {
            vocab_size: 7,
            hidden: 5,
            input_dim: 4,
            context_every_step,
        }
    }

    fn context() -> Vec<f64> {
        EmbeddingVector::normalized(vec![0.3, -0.2, 0.5, 0.1]).unwrap().as_slice().to_vec()
    }

    #[test]
    fn uniform_params_give_uniform_log_prob() {
        let p = PolicyParameters::zeros(small_config(false)).unwrap();
        let tokens = [BOS, 3, 4, 2, EOS];
        let lp: f64 = p.token_log_probs(&context(), &tokens).unwrap().iter().sum();
        assert!((lp - 4.0 * (1.0f64 / 7.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn two_token_score_function() {
        let g = score_function_gradient(&[0.0, 0.0], 0);
        assert_eq!(g, vec![-0.5, 0.5]);
    }

    #[test]
    fn single_step_bias_gradient_is_score_function() {
        let mut p = PolicyParameters::zeros(small_config(false)).unwrap();
        p.output_bias_mut().copy_from_slice(&[0.0, 0.4, -0.3, 0.2, 0.0, 1.0, -1.0]);
        p.accumulate_nll_gradient(&context(), &[BOS, 5], 1.0).unwrap();
        let expect = score_function_gradient(&[0.0, 0.4, -0.3, 0.2, 0.0, 1.0, -1.0], 5);
        let l = p.layout();
        for (g, e) in p.grad()[l.b_out..l.b_out + 7].iter().zip(&expect) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_leaves_buffer_unchanged() {
        let mut p = PolicyParameters::init(small_config(true), 1).unwrap();
        let scene = Scene {
            id: 0,
            attributes: [0; 6],
            embedding: Some(EmbeddingVector::normalized(context()).unwrap()),
        };
        let cap = Caption {
            tokens: vec![BOS, 2, 3, EOS],
            provenance: Provenance::Beam,
            scene_id: 0,
        };
        policy_gradient_accumulate(&cap, &scene, 0.0, &mut p).unwrap();
        assert!(p.grad().iter().all(|g| *g == 0.0));
        assert!(policy_gradient_accumulate(&cap, &scene, f64::NAN, &mut p).is_err());
    }

    #[test]
    fn apply_update_rejects_non_finite() {
        let mut p = PolicyParameters::init(small_config(false), 1).unwrap();
        p.grad[3] = f64::INFINITY;
        let err = p.apply_update(0.1).unwrap_err();
        assert!(err.to_string().contains("first at 3"));
    }

    #[test]
    fn decoding_respects_constraints() {
        let p = PolicyParameters::init(small_config(true), 9).unwrap();
        for max_len in 2..6 {
            let (g, lp) = p.greedy(&context(), max_len).unwrap();
            assert_eq!(g[0], BOS);
            assert_eq!(*g.last().unwrap(), EOS);
            assert!(g.len() <= max_len + 1);
            assert_ne!(g[1], EOS);
            assert!(g[1..].iter().all(|t| *t != BOS));
            assert_eq!(lp.len(), g.len() - 1);
        }
        assert!(p.greedy(&context(), 1).is_err());
        assert!(p.beam(&context(), 0, 5).is_err());
    }

    #[test]
    fn bad_tokens_are_rejected() {
        let p = PolicyParameters::init(small_config(false), 1).unwrap();
        assert!(p.nll(&context(), &[BOS, 9, EOS]).is_err());
        assert!(p.nll(&context(), &[3, EOS]).is_err());
        assert!(p.nll(&[0.0; 3], &[BOS, EOS]).is_err());
    }
}
