//! Toy discrete autoregressive policy: per-step logits are a linear function
//! of the prompt encoding, the previous token, and the position, sampled with
//! temperature and nucleus (top-p) truncation.

use serde::{Deserialize, Serialize};

use crate::domain::TokenSequence;
use crate::error::{Error, Result};
use crate::models::PromptEncoding;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArConfig {
    pub vocab_size: u32,
    pub max_len: usize,
    pub encoding_dim: usize,
    /// Sampling temperature; 0 means greedy argmax decoding.
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for ArConfig {
    fn default() -> Self {
        ArConfig {
            vocab_size: 64,
            max_len: 12,
            encoding_dim: 32,
            temperature: 1.0,
            top_p: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArPolicy {
    vocab_size: u32,
    max_len: usize,
    encoding_dim: usize,
    pub temperature: f64,
    pub top_p: f64,
    /// V x E prompt projection.
    w_prompt: Vec<f64>,
    /// (V + 1) x V previous-token table; row 0 is the start-of-sequence row.
    w_prev: Vec<f64>,
    /// T x V position table.
    w_pos: Vec<f64>,
    /// V bias.
    bias: Vec<f64>,
}

impl ArPolicy {
    pub fn new(cfg: &ArConfig, seed: u64) -> Result<Self> {
        if cfg.vocab_size == 0 || cfg.max_len == 0 || cfg.encoding_dim == 0 {
            return Err(Error::InvalidConfig(
                "policy dimensions must be positive".into(),
            ));
        }
        if !(cfg.temperature.is_finite() && cfg.temperature >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be finite and non-negative, got {}",
                cfg.temperature
            )));
        }
        if !(cfg.top_p > 0.0 && cfg.top_p <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "top_p must lie in (0, 1], got {}",
                cfg.top_p
            )));
        }
        let v = cfg.vocab_size as usize;
        let e = cfg.encoding_dim;
        let t = cfg.max_len;
        let mut rng = Rng::new(seed).split("ar-init");
        let scale_prompt = 1.0 / (e as f64).sqrt();
        let scale_tok = 1.0 / (v as f64).sqrt();
        Ok(ArPolicy {
            vocab_size: cfg.vocab_size,
            max_len: cfg.max_len,
            encoding_dim: cfg.encoding_dim,
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            w_prompt: (0..v * e).map(|_| rng.normal() * scale_prompt).collect(),
            w_prev: (0..(v + 1) * v).map(|_| rng.normal() * scale_tok).collect(),
            w_pos: (0..t * v).map(|_| rng.normal() * scale_tok).collect(),
            bias: (0..v).map(|_| rng.normal() * 0.1).collect(),
        })
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn encoding_dim(&self) -> usize {
        self.encoding_dim
    }

    /// Logits for step `t` given the previous token (`None` at step 0).
    pub fn step_logits(&self, enc: &PromptEncoding, prev: Option<u32>, t: usize) -> Vec<f64> {
        assert!(t < self.max_len, "step {t} beyond max_len {}", self.max_len);
        assert_eq!(enc.dim(), self.encoding_dim, "encoding width mismatch");
        let v = self.vocab_size as usize;
        let e = self.encoding_dim;
        let prev_row = match prev {
            None => 0,
            Some(p) => p as usize + 1,
        };
        let mut logits = self.bias.clone();
        for (tok, logit) in logits.iter_mut().enumerate() {
            let mut acc = 0.0;
            let row = &self.w_prompt[tok * e..(tok + 1) * e];
            for (&w, &x) in row.iter().zip(enc.values()) {
                acc += w * x;
            }
            *logit += acc + self.w_prev[prev_row * v + tok] + self.w_pos[t * v + tok];
        }
        logits
    }

    /// Draw `m` sequences of length `max_len` by ancestral sampling.
    pub fn sample(&self, enc: &PromptEncoding, m: usize, rng: &mut Rng) -> Vec<TokenSequence> {
        (0..m)
            .map(|_| {
                let mut tokens = Vec::with_capacity(self.max_len);
                let mut prev = None;
                for t in 0..self.max_len {
                    let logits = self.step_logits(enc, prev, t);
                    let tok = nucleus_sample(&logits, self.temperature, self.top_p, rng) as u32;
                    tokens.push(tok);
                    prev = Some(tok);
                }
                TokenSequence::new(tokens, self.vocab_size).expect("tokens in range")
            })
            .collect()
    }

    /// Deterministic greedy decode (argmax at every step).
    pub fn greedy(&self, enc: &PromptEncoding) -> TokenSequence {
        let mut tokens = Vec::with_capacity(self.max_len);
        let mut prev = None;
        for t in 0..self.max_len {
            let logits = self.step_logits(enc, prev, t);
            let tok = argmax(&logits) as u32;
            tokens.push(tok);
            prev = Some(tok);
        }
        TokenSequence::new(tokens, self.vocab_size).expect("tokens in range")
    }

    /// Log-probability of `z` at temperature 1 with no nucleus truncation.
    /// This is the training-time likelihood.
    pub fn sequence_log_prob(&self, enc: &PromptEncoding, z: &TokenSequence) -> Result<f64> {
        if z.vocab_size() != self.vocab_size {
            return Err(Error::TokenOutOfRange {
                token: z.vocab_size(),
                vocab: self.vocab_size,
            });
        }
        if z.len() > self.max_len {
            return Err(Error::InvalidConfig(format!(
                "sequence length {} exceeds policy max_len {}",
                z.len(),
                self.max_len
            )));
        }
        let mut lp = 0.0;
        let mut prev = None;
        for (t, &tok) in z.tokens().iter().enumerate() {
            let logits = self.step_logits(enc, prev, t);
            lp += logits[tok as usize] - log_sum_exp(&logits);
            prev = Some(tok);
        }
        Ok(lp)
    }

    /// Add `weight * d log pi(z | enc) / d theta` into `grads`; returns the
    /// log-probability as a by-product.
    pub fn accumulate_log_prob_grad(
        &self,
        enc: &PromptEncoding,
        z: &TokenSequence,
        weight: f64,
        grads: &mut [f64],
    ) -> Result<f64> {
        if grads.len() != self.param_count() {
            return Err(Error::DataLength {
                expected: self.param_count(),
                got: grads.len(),
            });
        }
        if z.vocab_size() != self.vocab_size {
            return Err(Error::TokenOutOfRange {
                token: z.vocab_size(),
                vocab: self.vocab_size,
            });
        }
        let v = self.vocab_size as usize;
        let e = self.encoding_dim;
        let (o_prompt, o_prev, o_pos, o_bias) = self.offsets();
        let mut lp = 0.0;
        let mut prev = None;
        for (t, &tok) in z.tokens().iter().enumerate() {
            let logits = self.step_logits(enc, prev, t);
            let lse = log_sum_exp(&logits);
            lp += logits[tok as usize] - lse;
            let prev_row = match prev {
                None => 0,
                Some(p) => p as usize + 1,
            };
            for (cand, &logit) in logits.iter().enumerate() {
                let p = (logit - lse).exp();
                let indicator = if cand == tok as usize { 1.0 } else { 0.0 };
                let delta = weight * (indicator - p);
                if delta == 0.0 {
                    continue;
                }
                let row = &mut grads[o_prompt + cand * e..o_prompt + (cand + 1) * e];
                for (g, &x) in row.iter_mut().zip(enc.values()) {
                    *g += delta * x;
                }
                grads[o_prev + prev_row * v + cand] += delta;
                grads[o_pos + t * v + cand] += delta;
                grads[o_bias + cand] += delta;
            }
            prev = Some(tok);
        }
        Ok(lp)
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let v = self.vocab_size as usize;
        let e = self.encoding_dim;
        let o_prompt = 0;
        let o_prev = o_prompt + v * e;
        let o_pos = o_prev + (v + 1) * v;
        let o_bias = o_pos + self.max_len * v;
        (o_prompt, o_prev, o_pos, o_bias)
    }

    pub fn param_count(&self) -> usize {
        self.w_prompt.len() + self.w_prev.len() + self.w_pos.len() + self.bias.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.w_prompt);
        out.extend_from_slice(&self.w_prev);
        out.extend_from_slice(&self.w_pos);
        out.extend_from_slice(&self.bias);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DataLength {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        if !params.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "policy parameters",
            });
        }
        let (_, o_prev, o_pos, o_bias) = self.offsets();
        self.w_prompt.copy_from_slice(&params[..o_prev]);
        self.w_prev.copy_from_slice(&params[o_prev..o_pos]);
        self.w_pos.copy_from_slice(&params[o_pos..o_bias]);
        self.bias.copy_from_slice(&params[o_bias..]);
        Ok(())
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Sample one token id from `logits` at the given temperature with nucleus
/// (top-p) truncation: keep the smallest probability-sorted prefix whose mass
/// reaches `top_p`, renormalize, and draw. Temperature 0 is greedy argmax.
pub fn nucleus_sample(logits: &[f64], temperature: f64, top_p: f64, rng: &mut Rng) -> usize {
    assert!(!logits.is_empty(), "empty logits");
    assert!(temperature >= 0.0, "negative temperature");
    assert!(top_p > 0.0 && top_p <= 1.0, "top_p out of range");
    if temperature == 0.0 {
        return argmax(logits);
    }
    let scaled: Vec<f64> = logits.iter().map(|&l| l / temperature).collect();
    let lse = log_sum_exp(&scaled);
    let probs: Vec<f64> = scaled.iter().map(|&l| (l - lse).exp()).collect();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        probs[b]
            .partial_cmp(&probs[a])
            .expect("finite probabilities")
            .then(a.cmp(&b))
    });
    let mut kept = 0;
    let mut mass = 0.0;
    for &idx in &order {
        kept += 1;
        mass += probs[idx];
        if mass >= top_p {
            break;
        }
    }
    // Draw within the kept prefix, renormalizing by its mass.
    let u = rng.next_f64() * mass;
    let mut cum = 0.0;
    for &idx in &order[..kept] {
        cum += probs[idx];
        if u < cum {
            return idx;
        }
    }
    order[kept - 1]
}
