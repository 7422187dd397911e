//! Preference-optimization objectives.
//!
//! Discrete DPO over sequence log-probabilities, continuous DPO over
//! isotropic-Gaussian feature likelihoods, its kernelized generalization over
//! arbitrary aggregation/distance combinations, and Monte-Carlo dropout
//! predictive estimation with an exact mask-enumeration oracle.
//!
//! All losses use `-log sigmoid(m) = softplus(-m)` so margins far on either
//! side stay finite.

use crate::domain::TokenSequence;
use crate::error::{Error, Result};
use crate::kernels::{kernel_distance, kernel_distance_grad, Aggregation, DistanceFn, KernelSpec};
use crate::matrix::{frobenius_sq_dist, FeatureMatrix};
use crate::models::{ArPolicy, DropoutNet, PromptEncoding};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

/// Shared preference-objective configuration: the DPO inverse temperature
/// `beta` and the isotropic feature standard deviation `sigma_bar`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpoConfig {
    pub beta: f64,
    pub sigma_bar: f64,
}

impl Default for DpoConfig {
    fn default() -> Self {
        DpoConfig {
            beta: 0.2,
            sigma_bar: 1.0,
        }
    }
}

impl DpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if !(self.sigma_bar.is_finite() && self.sigma_bar > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma_bar must be positive and finite, got {}",
                self.sigma_bar
            )));
        }
        Ok(())
    }

    /// Margin coefficient induced by the Gaussian likelihood: beta / (2 sigma_bar^2).
    pub fn gamma(&self) -> f64 {
        self.beta / (2.0 * self.sigma_bar * self.sigma_bar)
    }
}

/// Numerically stable `log(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One chosen/rejected sequence pair for a prompt context.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePair<E> {
    pub prompt: E,
    pub chosen: TokenSequence,
    pub rejected: TokenSequence,
}

/// Non-empty batch of discrete preference pairs; each pair has distinct
/// chosen and rejected sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePairBatch<E> {
    items: Vec<DiscretePair<E>>,
}

impl<E> DiscretePairBatch<E> {
    pub fn new(items: Vec<DiscretePair<E>>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyInput("discrete pair batch"));
        }
        if items.iter().any(|p| p.chosen == p.rejected) {
            return Err(Error::InvalidConfig(
                "a preference pair must have distinct chosen and rejected sequences".into(),
            ));
        }
        Ok(DiscretePairBatch { items })
    }

    pub fn items(&self) -> &[DiscretePair<E>] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Discrete DPO: mean over the batch of `softplus(-m)` where
/// `m = beta * ((log pi(zw) - log pi_ref(zw)) - (log pi(zl) - log pi_ref(zl)))`.
///
/// Returns the mean loss and the per-pair margins `m`.
pub fn discrete_dpo_loss<E>(
    cfg: &DpoConfig,
    batch: &DiscretePairBatch<E>,
    policy_log_prob: impl Fn(&E, &TokenSequence) -> f64,
    ref_log_prob: impl Fn(&E, &TokenSequence) -> f64,
) -> Result<(f64, Vec<f64>)> {
    cfg.validate()?;
    let mut margins = Vec::with_capacity(batch.len());
    let mut total = 0.0;
    for pair in batch.items() {
        let lp_w = policy_log_prob(&pair.prompt, &pair.chosen);
        let lp_l = policy_log_prob(&pair.prompt, &pair.rejected);
        let lr_w = ref_log_prob(&pair.prompt, &pair.chosen);
        let lr_l = ref_log_prob(&pair.prompt, &pair.rejected);
        if ![lp_w, lp_l, lr_w, lr_l].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "sequence log-probabilities",
            });
        }
        let margin = cfg.beta * ((lp_w - lr_w) - (lp_l - lr_l));
        margins.push(margin);
        total += softplus(-margin);
    }
    Ok((total / batch.len() as f64, margins))
}

/// Discrete DPO loss and its gradient with respect to the policy parameters,
/// with `sequence_log_prob` supplying both likelihood and score function.
pub fn discrete_dpo_grad(
    cfg: &DpoConfig,
    batch: &DiscretePairBatch<PromptEncoding>,
    policy: &ArPolicy,
    reference: &ArPolicy,
) -> Result<(f64, Vec<f64>)> {
    cfg.validate()?;
    let n = batch.len() as f64;
    let mut grads = vec![0.0; policy.param_count()];
    let mut total = 0.0;
    for pair in batch.items() {
        let lp_w = policy.sequence_log_prob(&pair.prompt, &pair.chosen)?;
        let lp_l = policy.sequence_log_prob(&pair.prompt, &pair.rejected)?;
        let lr_w = reference.sequence_log_prob(&pair.prompt, &pair.chosen)?;
        let lr_l = reference.sequence_log_prob(&pair.prompt, &pair.rejected)?;
        let margin = cfg.beta * ((lp_w - lr_w) - (lp_l - lr_l));
        total += softplus(-margin);
        // d softplus(-m)/d theta = -sigmoid(-m) * beta * (grad lp_w - grad lp_l).
        let weight = -sigmoid(-margin) * cfg.beta / n;
        policy.accumulate_log_prob_grad(&pair.prompt, &pair.chosen, weight, &mut grads)?;
        policy.accumulate_log_prob_grad(&pair.prompt, &pair.rejected, -weight, &mut grads)?;
    }
    Ok((total / n, grads))
}

/// Log-likelihood of a feature matrix under a rowwise isotropic Gaussian
/// centered at `mu`:
/// `-1/(2 sigma_bar^2) * sum_i ||h_i - mu_i||^2 - L * D/2 * log(2 pi sigma_bar^2)`.
pub fn gaussian_seq_log_lik(
    cfg: &DpoConfig,
    h: &FeatureMatrix,
    mu: &FeatureMatrix,
) -> Result<f64> {
    cfg.validate()?;
    let quad = frobenius_sq_dist(h, mu)?;
    let (l, d) = h.shape();
    let var = cfg.sigma_bar * cfg.sigma_bar;
    Ok(-quad / (2.0 * var)
        - (l as f64) * (d as f64 / 2.0) * (2.0 * std::f64::consts::PI * var).ln())
}

/// A policy/reference/chosen/rejected quadruple of feature matrices.
#[derive(Clone, Debug)]
pub struct ContinuousQuad {
    pub policy: FeatureMatrix,
    pub reference: FeatureMatrix,
    pub chosen: FeatureMatrix,
    pub rejected: FeatureMatrix,
}

impl ContinuousQuad {
    pub fn validate_shapes(&self) -> Result<()> {
        self.policy.same_shape(&self.reference)?;
        self.policy.same_shape(&self.chosen)?;
        self.policy.same_shape(&self.rejected)?;
        Ok(())
    }
}

fn loss_from_margin(margin: f64) -> f64 {
    softplus(-margin)
}

/// Margin shared by the continuous objectives:
/// `gamma * ((k(ref, w) - k(policy, w)) + (k(policy, l) - k(ref, l)))`.
///
/// The grouping is chosen so swapping chosen and rejected negates the margin
/// exactly in floating point.
fn margin_from_distances(gamma: f64, k_pw: f64, k_rw: f64, k_pl: f64, k_rl: f64) -> f64 {
    gamma * ((k_rw - k_pw) + (k_pl - k_rl))
}

/// Continuous DPO under the isotropic Gaussian likelihood: squared Frobenius
/// distances with margin coefficient `beta / (2 sigma_bar^2)`.
pub fn continuous_dpo_loss(cfg: &DpoConfig, quad: &ContinuousQuad) -> Result<f64> {
    cfg.validate()?;
    quad.validate_shapes()?;
    let k_pw = frobenius_sq_dist(&quad.policy, &quad.chosen)?;
    let k_rw = frobenius_sq_dist(&quad.reference, &quad.chosen)?;
    let k_pl = frobenius_sq_dist(&quad.policy, &quad.rejected)?;
    let k_rl = frobenius_sq_dist(&quad.reference, &quad.rejected)?;
    Ok(loss_from_margin(margin_from_distances(
        cfg.gamma(),
        k_pw,
        k_rw,
        k_pl,
        k_rl,
    )))
}

/// Gradient of `continuous_dpo_loss` with respect to the policy matrix.
pub fn continuous_dpo_policy_grad(cfg: &DpoConfig, quad: &ContinuousQuad) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let spec = KernelSpec {
        aggregation: Aggregation::None,
        distance: DistanceFn::Euclidean,
        gamma: cfg.gamma(),
    };
    kernel_dpo_policy_grad(&spec, quad)
}

/// Kernelized continuous DPO: the margin uses `kernel_distance` under an
/// arbitrary spec in place of the squared Frobenius distance.
pub fn kernel_dpo_loss(spec: &KernelSpec, quad: &ContinuousQuad) -> Result<f64> {
    spec.validate()?;
    quad.validate_shapes()?;
    let k_pw = kernel_distance(spec, &quad.policy, &quad.chosen)?;
    let k_rw = kernel_distance(spec, &quad.reference, &quad.chosen)?;
    let k_pl = kernel_distance(spec, &quad.policy, &quad.rejected)?;
    let k_rl = kernel_distance(spec, &quad.reference, &quad.rejected)?;
    Ok(loss_from_margin(margin_from_distances(
        spec.gamma, k_pw, k_rw, k_pl, k_rl,
    )))
}

/// Gradient of `kernel_dpo_loss` with respect to the policy matrix only; the
/// reference and both samples are treated as constants.
pub fn kernel_dpo_policy_grad(spec: &KernelSpec, quad: &ContinuousQuad) -> Result<FeatureMatrix> {
    spec.validate()?;
    quad.validate_shapes()?;
    let k_pw = kernel_distance(spec, &quad.policy, &quad.chosen)?;
    let k_rw = kernel_distance(spec, &quad.reference, &quad.chosen)?;
    let k_pl = kernel_distance(spec, &quad.policy, &quad.rejected)?;
    let k_rl = kernel_distance(spec, &quad.reference, &quad.rejected)?;
    let margin = margin_from_distances(spec.gamma, k_pw, k_rw, k_pl, k_rl);
    // loss = softplus(-m); dloss/dH = sigmoid(-m) * gamma * (g_w - g_l).
    let weight = sigmoid(-margin) * spec.gamma;
    let (g_w, _) = kernel_distance_grad(spec, &quad.policy, &quad.chosen)?;
    let (g_l, _) = kernel_distance_grad(spec, &quad.policy, &quad.rejected)?;
    g_w.zip_map(&g_l, |gw, gl| weight * (gw - gl))
}

/// Monte-Carlo dropout predictive estimate: sample mean of `m` stochastic
/// forwards and the pooled per-coordinate sample variance (Bessel-corrected,
/// averaged over coordinates). Uses Welford accumulation, so identical
/// samples (dropout rate zero) give a variance of exactly zero.
pub fn mc_dropout_estimate(
    net: &DropoutNet,
    enc: &PromptEncoding,
    m: usize,
    rng: &mut Rng,
) -> Result<(FeatureMatrix, f64)> {
    if m < 2 {
        return Err(Error::TooFewSamples(m));
    }
    let (rows, cols) = net.out_shape();
    let dim = rows * cols;
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    for k in 0..m {
        let sample = net.forward_stochastic(enc, rng);
        let inv = 1.0 / (k + 1) as f64;
        for (j, &x) in sample.as_slice().iter().enumerate() {
            let delta = x - mean[j];
            mean[j] += delta * inv;
            m2[j] += delta * (x - mean[j]);
        }
    }
    let pooled = m2.iter().sum::<f64>() / (m - 1) as f64 / dim as f64;
    Ok((FeatureMatrix::new(rows, cols, mean)?, pooled))
}

const MAX_ENUMERATED_UNITS: usize = 20;

/// Exact dropout predictive moments by enumerating all `2^k` masks over the
/// network's dropout units. Returns the exact mean, per-coordinate variances,
/// and the pooled variance. Refuses more than 20 units.
pub fn enumerate_dropout_moments(
    net: &DropoutNet,
    enc: &PromptEncoding,
) -> Result<(FeatureMatrix, FeatureMatrix, f64)> {
    let k = net.dropout_unit_count();
    if k > MAX_ENUMERATED_UNITS {
        return Err(Error::TooManyDropoutUnits {
            got: k,
            max: MAX_ENUMERATED_UNITS,
        });
    }
    let p = net.dropout_rate();
    let (rows, cols) = net.out_shape();
    let dim = rows * cols;
    let mut mean = vec![0.0; dim];
    let mut second = vec![0.0; dim];
    for bits in 0u64..(1u64 << k) {
        let dropped = bits.count_ones() as i32;
        let prob = p.powi(dropped) * (1.0 - p).powi(k as i32 - dropped);
        if prob == 0.0 {
            continue;
        }
        let mask = net.mask_from_bits(bits);
        let out = net.forward_masked(enc, &mask);
        for (j, &x) in out.as_slice().iter().enumerate() {
            mean[j] += prob * x;
            second[j] += prob * x * x;
        }
    }
    let var: Vec<f64> = (0..dim)
        .map(|j| (second[j] - mean[j] * mean[j]).max(0.0))
        .collect();
    let pooled = var.iter().sum::<f64>() / dim as f64;
    Ok((
        FeatureMatrix::new(rows, cols, mean)?,
        FeatureMatrix::new(rows, cols, var)?,
        pooled,
    ))
}

/// Exact dropout mean and pooled variance (the scalar-variance view of
/// `enumerate_dropout_moments`).
pub fn enumerate_dropout_exact(
    net: &DropoutNet,
    enc: &PromptEncoding,
) -> Result<(FeatureMatrix, f64)> {
    let (mean, _, pooled) = enumerate_dropout_moments(net, enc)?;
    Ok((mean, pooled))
}
