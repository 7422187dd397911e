//! Toy continuous generator: a tanh MLP whose trailing hidden layers carry
//! inference-time (inverted) dropout for diverse representation sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::models::PromptEncoding;
use crate::rng::Rng;

/// Whether training-time forwards keep dropout active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Deterministic,
    Stochastic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub dropout_rate: f64,
    /// How many trailing hidden layers carry dropout.
    pub dropout_last: usize,
    pub out_rows: usize,
    pub out_cols: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            input_dim: 32,
            hidden_width: 64,
            hidden_layers: 4,
            dropout_rate: 0.3,
            dropout_last: 2,
            out_rows: 8,
            out_cols: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Affine {
    out_dim: usize,
    in_dim: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Affine {
    fn init(out_dim: usize, in_dim: usize, rng: &mut Rng) -> Self {
        let scale = 1.0 / (in_dim as f64).sqrt();
        Affine {
            out_dim,
            in_dim,
            w: (0..out_dim * in_dim).map(|_| rng.normal() * scale).collect(),
            b: vec![0.0; out_dim],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut out = self.b.clone();
        for (o, row) in out.iter_mut().zip(self.w.chunks_exact(self.in_dim)) {
            let mut acc = 0.0;
            for (&wij, &xj) in row.iter().zip(x) {
                acc += wij * xj;
            }
            *o += acc;
        }
        out
    }

    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// One dropout decision per unit of each dropout-carrying layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DropoutMask {
    dropped: Vec<Vec<bool>>,
}

impl DropoutMask {
    pub fn layer(&self, k: usize) -> &[bool] {
        &self.dropped[k]
    }
}

/// Forward activations recorded for backpropagation.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Input to each affine layer, hidden layers first, output layer last.
    inputs: Vec<Vec<f64>>,
    /// Tanh outputs of each hidden layer, before dropout.
    tanh_out: Vec<Vec<f64>>,
    mask: Option<DropoutMask>,
    pub output: FeatureMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropoutNet {
    hidden: Vec<Affine>,
    output: Affine,
    /// Indices into `hidden` that carry dropout, ascending.
    dropout_layers: Vec<usize>,
    dropout_rate: f64,
    out_rows: usize,
    out_cols: usize,
    mode: Mode,
}

impl DropoutNet {
    pub fn new(cfg: &MlpConfig, seed: u64) -> Result<Self> {
        if cfg.input_dim == 0
            || cfg.hidden_width == 0
            || cfg.hidden_layers == 0
            || cfg.out_rows == 0
            || cfg.out_cols == 0
        {
            return Err(Error::InvalidConfig(
                "network dimensions must be positive".into(),
            ));
        }
        if cfg.dropout_last > cfg.hidden_layers {
            return Err(Error::InvalidConfig(format!(
                "dropout_last {} exceeds hidden layer count {}",
                cfg.dropout_last, cfg.hidden_layers
            )));
        }
        // Rate 1.0 is admissible: every unit drops with certainty and the
        // kept-unit rescale never executes.
        if !(0.0..=1.0).contains(&cfg.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate must lie in [0, 1], got {}",
                cfg.dropout_rate
            )));
        }
        let mut rng = Rng::new(seed).split("mlp-init");
        let mut hidden = Vec::with_capacity(cfg.hidden_layers);
        let mut in_dim = cfg.input_dim;
        for l in 0..cfg.hidden_layers {
            let mut layer_rng = rng.split_indexed("hidden", l as u64);
            hidden.push(Affine::init(cfg.hidden_width, in_dim, &mut layer_rng));
            in_dim = cfg.hidden_width;
        }
        let output = Affine::init(cfg.out_rows * cfg.out_cols, in_dim, &mut rng);
        let dropout_layers =
            (cfg.hidden_layers - cfg.dropout_last..cfg.hidden_layers).collect();
        Ok(DropoutNet {
            hidden,
            output,
            dropout_layers,
            dropout_rate: cfg.dropout_rate,
            out_rows: cfg.out_rows,
            out_cols: cfg.out_cols,
            mode: Mode::Deterministic,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn set_dropout_rate(&mut self, rate: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate must lie in [0, 1], got {rate}"
            )));
        }
        self.dropout_rate = rate;
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.hidden[0].in_dim
    }

    pub fn out_shape(&self) -> (usize, usize) {
        (self.out_rows, self.out_cols)
    }

    /// Total number of units that can drop, across all dropout layers.
    pub fn dropout_unit_count(&self) -> usize {
        self.dropout_layers
            .iter()
            .map(|&l| self.hidden[l].out_dim)
            .sum()
    }

    pub fn draw_mask(&self, rng: &mut Rng) -> DropoutMask {
        let dropped = self
            .dropout_layers
            .iter()
            .map(|&l| {
                (0..self.hidden[l].out_dim)
                    .map(|_| rng.next_f64() < self.dropout_rate)
                    .collect()
            })
            .collect();
        DropoutMask { dropped }
    }

    /// Build a mask from the low `dropout_unit_count()` bits of `bits`
    /// (layer-major, unit-minor; set bit = dropped).
    pub fn mask_from_bits(&self, bits: u64) -> DropoutMask {
        let mut unit = 0;
        let dropped = self
            .dropout_layers
            .iter()
            .map(|&l| {
                (0..self.hidden[l].out_dim)
                    .map(|_| {
                        let d = (bits >> unit) & 1 == 1;
                        unit += 1;
                        d
                    })
                    .collect()
            })
            .collect();
        DropoutMask { dropped }
    }

    fn walk(&self, enc: &PromptEncoding, mask: Option<&DropoutMask>) -> Trace {
        assert_eq!(
            enc.dim(),
            self.input_dim(),
            "encoding width {} does not match network input {}",
            enc.dim(),
            self.input_dim()
        );
        let mut inputs = Vec::with_capacity(self.hidden.len() + 1);
        let mut tanh_out = Vec::with_capacity(self.hidden.len());
        let mut x = enc.values().to_vec();
        for (l, layer) in self.hidden.iter().enumerate() {
            inputs.push(x.clone());
            let t: Vec<f64> = layer.apply(&x).into_iter().map(f64::tanh).collect();
            tanh_out.push(t.clone());
            x = match mask.and_then(|m| {
                self.dropout_layers
                    .iter()
                    .position(|&dl| dl == l)
                    .map(|k| m.layer(k))
            }) {
                Some(layer_mask) => t
                    .iter()
                    .zip(layer_mask)
                    .map(|(&v, &dropped)| {
                        if dropped {
                            0.0
                        } else {
                            v / (1.0 - self.dropout_rate)
                        }
                    })
                    .collect(),
                None => t,
            };
        }
        inputs.push(x.clone());
        let y = self.output.apply(&x);
        let output = FeatureMatrix::new(self.out_rows, self.out_cols, y)
            .expect("finite forward output");
        Trace {
            inputs,
            tanh_out,
            mask: mask.cloned(),
            output,
        }
    }

    /// Deterministic forward pass (dropout off). This is the predictive mean.
    pub fn forward(&self, enc: &PromptEncoding) -> FeatureMatrix {
        self.walk(enc, None).output
    }

    /// One stochastic forward pass with a freshly drawn dropout mask.
    pub fn forward_stochastic(&self, enc: &PromptEncoding, rng: &mut Rng) -> FeatureMatrix {
        let mask = self.draw_mask(rng);
        self.walk(enc, Some(&mask)).output
    }

    /// Forward pass under an explicit mask (used by exact enumeration).
    pub fn forward_masked(&self, enc: &PromptEncoding, mask: &DropoutMask) -> FeatureMatrix {
        self.walk(enc, Some(mask)).output
    }

    /// Forward pass recording activations for `backward`. Honors the
    /// configured mode: stochastic mode draws and records a dropout mask.
    pub fn forward_trace(&self, enc: &PromptEncoding, rng: &mut Rng) -> Trace {
        match self.mode {
            Mode::Deterministic => self.walk(enc, None),
            Mode::Stochastic => {
                let mask = self.draw_mask(rng);
                self.walk(enc, Some(&mask))
            }
        }
    }

    /// Draw `m` diverse representations by running independent stochastic
    /// forwards.
    pub fn sample_diverse(
        &self,
        enc: &PromptEncoding,
        m: usize,
        rng: &mut Rng,
    ) -> Vec<FeatureMatrix> {
        (0..m).map(|_| self.forward_stochastic(enc, rng)).collect()
    }

    /// Backpropagate a loss gradient on the output matrix into a flat
    /// parameter gradient, reusing the trace's activations and mask.
    pub fn backward(&self, trace: &Trace, grad_out: &FeatureMatrix) -> Result<Vec<f64>> {
        trace.output.same_shape(grad_out)?;
        let mut grads = vec![0.0; self.param_count()];
        let offsets = self.offsets();
        let mut delta: Vec<f64> = grad_out.as_slice().to_vec();

        // Output affine.
        {
            let x = trace.inputs.last().expect("trace records output input");
            let (wo, bo) = offsets[self.hidden.len()];
            accumulate_affine(&mut grads[wo..bo + self.output.out_dim], &self.output, x, &delta, bo - wo);
            delta = affine_backward(&self.output, &delta);
        }

        for l in (0..self.hidden.len()).rev() {
            if let Some(k) = self.dropout_layers.iter().position(|&dl| dl == l) {
                if let Some(mask) = &trace.mask {
                    for (d, &dropped) in delta.iter_mut().zip(mask.layer(k)) {
                        if dropped {
                            *d = 0.0;
                        } else {
                            *d /= 1.0 - self.dropout_rate;
                        }
                    }
                }
            }
            for (d, &t) in delta.iter_mut().zip(&trace.tanh_out[l]) {
                *d *= 1.0 - t * t;
            }
            let layer = &self.hidden[l];
            let (wo, bo) = offsets[l];
            accumulate_affine(&mut grads[wo..bo + layer.out_dim], layer, &trace.inputs[l], &delta, bo - wo);
            delta = affine_backward(layer, &delta);
        }
        Ok(grads)
    }

    fn offsets(&self) -> Vec<(usize, usize)> {
        // (weight offset, bias offset) per affine, hidden layers then output.
        let mut out = Vec::with_capacity(self.hidden.len() + 1);
        let mut cursor = 0;
        for layer in self.hidden.iter().chain(std::iter::once(&self.output)) {
            out.push((cursor, cursor + layer.w.len()));
            cursor += layer.param_count();
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.hidden
            .iter()
            .map(Affine::param_count)
            .sum::<usize>()
            + self.output.param_count()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in self.hidden.iter().chain(std::iter::once(&self.output)) {
            out.extend_from_slice(&layer.w);
            out.extend_from_slice(&layer.b);
        }
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
                context: "network parameters",
            });
        }
        let mut cursor = 0;
        for layer in self
            .hidden
            .iter_mut()
            .chain(std::iter::once(&mut self.output))
        {
            let w_len = layer.w.len();
            layer.w.copy_from_slice(&params[cursor..cursor + w_len]);
            cursor += w_len;
            let b_len = layer.b.len();
            layer.b.copy_from_slice(&params[cursor..cursor + b_len]);
            cursor += b_len;
        }
        Ok(())
    }
}

fn accumulate_affine(
    grads: &mut [f64],
    layer: &Affine,
    x: &[f64],
    delta: &[f64],
    w_len: usize,
) {
    let (gw, gb) = grads.split_at_mut(w_len);
    for (o, &d) in delta.iter().enumerate() {
        let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
        for (g, &xj) in row.iter_mut().zip(x) {
            *g += d * xj;
        }
        gb[o] += d;
    }
}

fn affine_backward(layer: &Affine, delta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; layer.in_dim];
    for (o, &d) in delta.iter().enumerate() {
        let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
        for (g, &wij) in out.iter_mut().zip(row) {
            *g += d * wij;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> MlpConfig {
        MlpConfig {
            input_dim: 3,
            hidden_width: 4,
            hidden_layers: 2,
            dropout_rate: 0.3,
            dropout_last: 1,
            out_rows: 2,
            out_cols: 3,
        }
    }

    fn enc(values: Vec<f64>) -> PromptEncoding {
        PromptEncoding::from_values(values).unwrap()
    }

    #[test]
    fn deterministic_forward_is_repeatable() {
        let net = DropoutNet::new(&small_cfg(), 5).unwrap();
        let e = enc(vec![0.3, -1.0, 0.5]);
        assert_eq!(net.forward(&e), net.forward(&e));
    }

    #[test]
    fn zero_rate_stochastic_equals_deterministic() {
        let mut cfg = small_cfg();
        cfg.dropout_rate = 0.0;
        let net = DropoutNet::new(&cfg, 5).unwrap();
        let e = enc(vec![0.3, -1.0, 0.5]);
        let mut rng = Rng::new(1);
        assert_eq!(net.forward_stochastic(&e, &mut rng), net.forward(&e));
    }

    #[test]
    fn zero_rate_diverse_samples_are_identical() {
        let mut cfg = small_cfg();
        cfg.dropout_rate = 0.0;
        let net = DropoutNet::new(&cfg, 5).unwrap();
        let e = enc(vec![0.1, 0.2, 0.3]);
        let mut rng = Rng::new(2);
        let samples = net.sample_diverse(&e, 8, &mut rng);
        assert!(samples.iter().all(|s| *s == samples[0]));
    }

    #[test]
    fn dropout_increases_dispersion_with_rate() {
        let e = enc(vec![0.4, -0.2, 0.9]);
        let pooled_var = |rate: f64| {
            let mut cfg = small_cfg();
            cfg.dropout_rate = rate;
            let net = DropoutNet::new(&cfg, 5).unwrap();
            let mut rng = Rng::new(3);
            let samples = net.sample_diverse(&e, 1000, &mut rng);
            let dim = 6;
            let mut var = 0.0;
            for j in 0..dim {
                // Welford, so identical samples give exactly zero.
                let mut mean = 0.0;
                let mut m2 = 0.0;
                for (k, s) in samples.iter().enumerate() {
                    let x = s.as_slice()[j];
                    let delta = x - mean;
                    mean += delta / (k + 1) as f64;
                    m2 += delta * (x - mean);
                }
                var += m2 / (samples.len() - 1) as f64;
            }
            var / dim as f64
        };
        let v0 = pooled_var(0.0);
        let v1 = pooled_var(0.05);
        let v2 = pooled_var(0.3);
        assert_eq!(v0, 0.0);
        assert!(v1 > v0 && v2 > v1, "{v0} {v1} {v2}");
    }

    #[test]
    fn rate_one_zeroes_the_dropout_layer() {
        let mut cfg = small_cfg();
        cfg.dropout_rate = 1.0;
        let net = DropoutNet::new(&cfg, 5).unwrap();
        let e = enc(vec![0.3, -1.0, 0.5]);
        let mut rng = Rng::new(4);
        let a = net.forward_stochastic(&e, &mut rng);
        let b = net.forward_masked(&e, &net.mask_from_bits(u64::MAX));
        assert_eq!(a, b);
    }

    #[test]
    fn params_round_trip() {
        let mut net = DropoutNet::new(&small_cfg(), 7).unwrap();
        let params = net.params();
        assert_eq!(params.len(), net.param_count());
        let bumped: Vec<f64> = params.iter().map(|p| p + 0.125).collect();
        net.set_params(&bumped).unwrap();
        assert_eq!(net.params(), bumped);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut net = DropoutNet::new(&small_cfg(), 11).unwrap();
        let e = enc(vec![0.3, -0.6, 0.2]);
        // Scalar objective: weighted sum of outputs, so dL/dout is the weights.
        let weights = FeatureMatrix::from_fn(2, 3, |i, j| 0.3 * i as f64 - 0.2 * j as f64 + 0.5);
        let mut rng = Rng::new(0);
        let trace = net.forward_trace(&e, &mut rng);
        let analytic = net.backward(&trace, &weights).unwrap();
        let params = net.params();
        let step = 1e-5;
        for idx in 0..params.len() {
            let mut up = params.clone();
            up[idx] += step;
            net.set_params(&up).unwrap();
            let fu: f64 = net
                .forward(&e)
                .as_slice()
                .iter()
                .zip(weights.as_slice())
                .map(|(&y, &w)| y * w)
                .sum();
            let mut dn = params.clone();
            dn[idx] -= step;
            net.set_params(&dn).unwrap();
            let fd: f64 = net
                .forward(&e)
                .as_slice()
                .iter()
                .zip(weights.as_slice())
                .map(|(&y, &w)| y * w)
                .sum();
            let numeric = (fu - fd) / (2.0 * step);
            let rel = (analytic[idx] - numeric).abs()
                / analytic[idx].abs().max(numeric.abs()).max(1.0);
            assert!(rel <= 1e-5, "param {idx}: {} vs {numeric}", analytic[idx]);
        }
        net.set_params(&params).unwrap();
    }

    #[test]
    fn stochastic_trace_backward_respects_the_mask() {
        let mut net = DropoutNet::new(&small_cfg(), 13).unwrap();
        net.set_mode(Mode::Stochastic);
        let e = enc(vec![0.5, 0.1, -0.4]);
        let mut rng = Rng::new(9);
        let trace = net.forward_trace(&e, &mut rng);
        let grad_out = trace.output.map(|_| 1.0);
        let analytic = net.backward(&trace, &grad_out).unwrap();
        // Recompute through the same mask by finite differences.
        let mask = trace.mask.clone().unwrap();
        let params = net.params();
        let step = 1e-5;
        for idx in (0..params.len()).step_by(7) {
            let mut up = params.clone();
            up[idx] += step;
            net.set_params(&up).unwrap();
            let fu: f64 = net.forward_masked(&e, &mask).as_slice().iter().sum();
            let mut dn = params.clone();
            dn[idx] -= step;
            net.set_params(&dn).unwrap();
            let fd: f64 = net.forward_masked(&e, &mask).as_slice().iter().sum();
            let numeric = (fu - fd) / (2.0 * step);
            let rel = (analytic[idx] - numeric).abs()
                / analytic[idx].abs().max(numeric.abs()).max(1.0);
            assert!(rel <= 1e-5, "param {idx}");
        }
        net.set_params(&params).unwrap();
    }

    #[test]
    fn mask_from_bits_is_layer_major() {
        let mut cfg = small_cfg();
        cfg.dropout_last = 2;
        let net = DropoutNet::new(&cfg, 1).unwrap();
        assert_eq!(net.dropout_unit_count(), 8);
        let mask = net.mask_from_bits(0b0000_0101);
        assert_eq!(mask.layer(0), &[true, false, true, false]);
        assert_eq!(mask.layer(1), &[false, false, false, false]);
    }
}
