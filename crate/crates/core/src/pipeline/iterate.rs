//! The improvement loop: sample diverse candidates, score them with
//! decompositional feedback, build preference pairs, optimize against the
//! frozen reference, then roll the reference forward.

use std::collections::BTreeMap;

use crate::domain::{Category, PromptSpec, Question, Scene, TokenSequence};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::losses::{
    discrete_dpo_grad, discrete_dpo_loss, kernel_dpo_loss, kernel_dpo_policy_grad, ContinuousQuad,
    DiscretePair, DiscretePairBatch,
};
use crate::matrix::FeatureMatrix;
use crate::models::{
    apply_grad_step, encode_prompt, AdamState, ArPolicy, DropoutNet, LrSchedule,
    Mode as ForwardMode, PromptEncoding,
};
use crate::pipeline::config::{Mode, RunConfig};
use crate::pipeline::eval::{build_decoder, evaluate_policy, EvalReport};
use crate::pipeline::metrics::MetricsLog;
use crate::pipeline::pairs::build_pair_indices;
use crate::pipeline::state::{EvalSummary, IterationState, IterationRecord, PolicyModel};
use crate::rng::Rng;
use crate::world::{
    decompose_questions, feedback_score, generate_prompts, ground_truth_score, DecoderSpec,
    TokenGrammar, WorldVocab,
};

/// Everything a full run produces: the final state, one evaluation per
/// completed round (index 0 is the untrained policy), and the metrics log.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub state: IterationState,
    pub evals: Vec<EvalReport>,
    pub metrics: MetricsLog,
}

/// Loss audit from one optimization pass: the deterministic corpus loss
/// before and after, plus every mini-batch loss in step order.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub loss_start: f64,
    pub loss_end: f64,
    pub train_losses: Vec<f64>,
}

impl TrainReport {
    /// Fold into the history entry for round `round`; evaluation is attached
    /// separately by the caller that runs it.
    pub fn into_record(self, round: usize, pair_count: usize) -> IterationRecord {
        IterationRecord {
            iteration: round,
            loss_start: self.loss_start,
            loss_end: self.loss_end,
            pair_count,
            train_losses: self.train_losses,
            eval: None,
        }
    }
}

/// Build iteration 0: a freshly seeded policy with the reference set to an
/// identical copy.
pub fn init_state(cfg: &RunConfig) -> Result<IterationState> {
    cfg.validate()?;
    let policy = match cfg.mode {
        Mode::Continuous => {
            let mut net = DropoutNet::new(&cfg.model.mlp, cfg.seeds.model)?;
            net.set_mode(train_mode(cfg));
            PolicyModel::Continuous(net)
        }
        Mode::Discrete => PolicyModel::Discrete(ArPolicy::new(&cfg.model.ar, cfg.seeds.model)?),
    };
    Ok(IterationState {
        iteration: 0,
        policy: policy.clone(),
        reference: policy,
        history: Vec::new(),
    })
}

fn train_mode(cfg: &RunConfig) -> ForwardMode {
    if cfg.train_forward_stochastic {
        ForwardMode::Stochastic
    } else {
        ForwardMode::Deterministic
    }
}

fn kernel_spec(cfg: &RunConfig) -> Result<&KernelSpec> {
    cfg.kernel.as_ref().ok_or_else(|| {
        Error::InvalidConfig("continuous mode requires a kernel spec".into())
    })
}

/// Root randomness stream for one round: prompt generation, candidate
/// sampling, and training batches all branch off it. Equals the stream
/// `run_iteration` derives when driven from `Rng::new(cfg.seeds.world)`.
pub fn iteration_stream(cfg: &RunConfig, iteration: usize) -> Rng {
    Rng::new(cfg.seeds.world).split_indexed("iteration", iteration as u64)
}

/// Feedback-noise stream for one round; per-prompt judges branch off it.
pub fn feedback_stream(cfg: &RunConfig, iteration: usize) -> Rng {
    Rng::new(cfg.seeds.judge).split_indexed("feedback", iteration as u64)
}

/// Fresh training prompts for one round, all categories.
fn round_prompts(cfg: &RunConfig, vocab: &WorldVocab, iter_rng: &Rng) -> Result<Vec<PromptSpec>> {
    let mut prompts = Vec::with_capacity(cfg.prompts_per_category * Category::ALL.len());
    for (k, &category) in Category::ALL.iter().enumerate() {
        prompts.extend(generate_prompts(
            vocab,
            category,
            cfg.prompts_per_category,
            &iter_rng.split_indexed("prompts", k as u64),
        )?);
    }
    Ok(prompts)
}

/// The prompts a given round trains on.
pub fn iteration_prompts(cfg: &RunConfig, iteration: usize) -> Result<Vec<PromptSpec>> {
    round_prompts(
        cfg,
        &WorldVocab::standard(),
        &iteration_stream(cfg, iteration),
    )
}

/// The held-out evaluation set; its stream is disjoint from every training
/// round's.
pub fn heldout_prompts(cfg: &RunConfig) -> Result<Vec<PromptSpec>> {
    let vocab = WorldVocab::standard();
    let heldout_root = Rng::new(cfg.seeds.world).split("heldout");
    let mut heldout = Vec::with_capacity(cfg.heldout_per_category * Category::ALL.len());
    for (k, &category) in Category::ALL.iter().enumerate() {
        heldout.extend(generate_prompts(
            &vocab,
            category,
            cfg.heldout_per_category,
            &heldout_root.split_indexed("category", k as u64),
        )?);
    }
    Ok(heldout)
}

/// Score every candidate scene of one prompt and emit its preference pairs.
fn prompt_pairs(
    cfg: &RunConfig,
    questions: &[Question],
    scenes: &[Scene],
    feedback_rng: &mut Rng,
) -> Result<Vec<(usize, usize)>> {
    let scores = scenes
        .iter()
        .map(|scene| feedback_score(cfg.feedback, &cfg.judge, scene, questions, feedback_rng))
        .collect::<Result<Vec<f64>>>()?;
    build_pair_indices(&cfg.pair_policy, &scores)
}

/// Advance the state by one round: returns the rolled-over state with one
/// new history record (its `eval` left empty for the caller to fill).
pub fn run_iteration(state: IterationState, cfg: &RunConfig, root: &Rng) -> Result<IterationState> {
    cfg.validate()?;
    let IterationState {
        iteration,
        policy,
        reference,
        mut history,
    } = state;
    let round = iteration + 1;
    let iter_rng = root.split_indexed("iteration", iteration as u64);
    let judge_root = Rng::new(cfg.seeds.judge).split_indexed("feedback", iteration as u64);
    let vocab = WorldVocab::standard();

    let prompts = round_prompts(cfg, &vocab, &iter_rng)?;
    let (policy, reference, record) = match (policy, reference) {
        (PolicyModel::Continuous(net), PolicyModel::Continuous(ref_net)) => {
            let decoder = build_decoder(cfg, &vocab)?;
            let (net, record) = continuous_round(
                cfg, &vocab, &decoder, net, &ref_net, &prompts, &iter_rng, &judge_root, round,
            )?;
            (
                PolicyModel::Continuous(net.clone()),
                PolicyModel::Continuous(net),
                record,
            )
        }
        (PolicyModel::Discrete(ar), PolicyModel::Discrete(ref_ar)) => {
            let grammar = TokenGrammar::standard(&vocab);
            let (ar, record) = discrete_round(
                cfg, &vocab, &grammar, ar, &ref_ar, &prompts, &iter_rng, &judge_root, round,
            )?;
            (
                PolicyModel::Discrete(ar.clone()),
                PolicyModel::Discrete(ar),
                record,
            )
        }
        _ => {
            return Err(Error::InvalidConfig(
                "policy and reference flavors differ".into(),
            ))
        }
    };
    history.push(record);
    Ok(IterationState {
        iteration: round,
        policy,
        reference,
        history,
    })
}

/// Draw batches from a reshuffled-every-epoch cursor over the pair corpus.
struct EpochSampler {
    order: Vec<usize>,
    cursor: usize,
}

impl EpochSampler {
    fn new(len: usize) -> Self {
        EpochSampler {
            order: (0..len).collect(),
            cursor: len,
        }
    }

    fn next_batch(&mut self, batch_size: usize, rng: &mut Rng) -> Vec<usize> {
        let take = batch_size.min(self.order.len());
        let mut batch = Vec::with_capacity(take);
        for _ in 0..take {
            if self.cursor >= self.order.len() {
                rng.shuffle(&mut self.order);
                self.cursor = 0;
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }
}

#[allow(clippy::too_many_arguments)]
fn continuous_round(
    cfg: &RunConfig,
    vocab: &WorldVocab,
    decoder: &DecoderSpec,
    net: DropoutNet,
    ref_net: &DropoutNet,
    prompts: &[PromptSpec],
    iter_rng: &Rng,
    judge_root: &Rng,
    round: usize,
) -> Result<(DropoutNet, IterationRecord)> {
    let m = cfg.pair_policy.samples_per_prompt;

    // Sample candidates, score them, and collect (prompt, chosen, rejected)
    // index triples.
    let mut encodings = Vec::with_capacity(prompts.len());
    let mut candidates: Vec<Vec<FeatureMatrix>> = Vec::with_capacity(prompts.len());
    let mut corpus: Vec<(usize, usize, usize)> = Vec::new();
    for (p, prompt) in prompts.iter().enumerate() {
        let enc = encode_prompt(prompt, net.input_dim(), cfg.seeds.embedding);
        let mut sample_rng = iter_rng.split_indexed("sampling", p as u64);
        let features = net.sample_diverse(&enc, m, &mut sample_rng);
        let scenes = features
            .iter()
            .map(|h| decoder.decode_continuous(h))
            .collect::<Result<Vec<Scene>>>()?;
        let questions = decompose_questions(vocab, prompt);
        let mut feedback_rng = judge_root.split_indexed("prompt", p as u64);
        for (w, l) in prompt_pairs(cfg, &questions, &scenes, &mut feedback_rng)? {
            corpus.push((p, w, l));
        }
        encodings.push(enc);
        candidates.push(features);
    }
    if corpus.is_empty() {
        return Err(Error::EmptyPairCorpus { iteration: round });
    }

    let mut train_rng = iter_rng.split("train");
    let pair_count = corpus.len();
    let (net, report) = train_continuous(
        cfg,
        net,
        ref_net,
        &encodings,
        &candidates,
        &corpus,
        &mut train_rng,
    )?;
    Ok((net, report.into_record(round, pair_count)))
}

fn check_pair_indices<T>(
    candidates: &[Vec<T>],
    pairs: &[(usize, usize, usize)],
    encoding_count: usize,
) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pair corpus"));
    }
    if candidates.len() != encoding_count {
        return Err(Error::InvalidConfig(format!(
            "{} candidate lists for {} encodings",
            candidates.len(),
            encoding_count
        )));
    }
    for &(p, w, l) in pairs {
        let m = candidates.get(p).map(Vec::len).unwrap_or(0);
        if p >= candidates.len() || w >= m || l >= m {
            return Err(Error::InvalidConfig(format!(
                "pair ({p}, {w}, {l}) is out of range for the candidate corpus"
            )));
        }
    }
    Ok(())
}

/// Optimize a feature policy against a frozen reference on a prepared pair
/// corpus. `pairs` holds (prompt, chosen, rejected) indices into
/// `candidates`; `train_rng` drives batch shuffling (and forward noise when
/// configured). `run_iteration` feeds this the corpus it just sampled, and
/// the staged command-line flow feeds it a corpus loaded from disk; both
/// paths produce bit-identical results because this is the only
/// implementation.
pub fn train_continuous(
    cfg: &RunConfig,
    mut net: DropoutNet,
    ref_net: &DropoutNet,
    encodings: &[PromptEncoding],
    candidates: &[Vec<FeatureMatrix>],
    pairs: &[(usize, usize, usize)],
    train_rng: &mut Rng,
) -> Result<(DropoutNet, TrainReport)> {
    let spec = kernel_spec(cfg)?;
    check_pair_indices(candidates, pairs, encodings.len())?;
    net.set_mode(train_mode(cfg));

    // Reference features are frozen for the whole pass; policy audit
    // features use the deterministic mean forward.
    let ref_features: Vec<FeatureMatrix> =
        encodings.iter().map(|enc| ref_net.forward(enc)).collect();
    let corpus_loss = |net: &DropoutNet| -> Result<f64> {
        let mut total = 0.0;
        for &(p, w, l) in pairs {
            let quad = ContinuousQuad {
                policy: net.forward(&encodings[p]),
                reference: ref_features[p].clone(),
                chosen: candidates[p][w].clone(),
                rejected: candidates[p][l].clone(),
            };
            total += kernel_dpo_loss(spec, &quad)?;
        }
        Ok(total / pairs.len() as f64)
    };
    let loss_start = corpus_loss(&net)?;

    let mut adam = AdamState::new(net.param_count());
    let schedule = LrSchedule {
        base_lr: cfg.optimizer.base_lr,
        warmup_steps: cfg.optimizer.warmup_steps as u64,
        total_steps: cfg.optimizer.steps as u64,
    };
    let mut sampler = EpochSampler::new(pairs.len());
    let mut train_losses = Vec::with_capacity(cfg.optimizer.steps);
    let (rows, cols) = net.out_shape();
    for step in 0..cfg.optimizer.steps {
        let batch = sampler.next_batch(cfg.optimizer.batch_size, train_rng);
        let inv = 1.0 / batch.len() as f64;
        let mut by_prompt: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for idx in batch {
            let (p, w, l) = pairs[idx];
            by_prompt.entry(p).or_default().push((w, l));
        }
        let mut grads = vec![0.0; net.param_count()];
        let mut step_loss = 0.0;
        for (&p, pair_group) in &by_prompt {
            let trace = net.forward_trace(&encodings[p], train_rng);
            let mut delta = FeatureMatrix::zeros(rows, cols);
            for &(w, l) in pair_group {
                let quad = ContinuousQuad {
                    policy: trace.output.clone(),
                    reference: ref_features[p].clone(),
                    chosen: candidates[p][w].clone(),
                    rejected: candidates[p][l].clone(),
                };
                step_loss += kernel_dpo_loss(spec, &quad)? * inv;
                let grad_h = kernel_dpo_policy_grad(spec, &quad)?;
                delta = delta.zip_map(&grad_h, |acc, g| acc + g * inv)?;
            }
            let prompt_grads = net.backward(&trace, &delta)?;
            for (acc, g) in grads.iter_mut().zip(&prompt_grads) {
                *acc += g;
            }
        }
        let mut params = net.params();
        apply_grad_step(&mut params, &grads, &mut adam, schedule.lr_at(step as u64))?;
        net.set_params(&params)?;
        train_losses.push(step_loss);
    }

    let loss_end = corpus_loss(&net)?;
    let report = TrainReport {
        loss_start,
        loss_end,
        train_losses,
    };
    Ok((net, report))
}

#[allow(clippy::too_many_arguments)]
fn discrete_round(
    cfg: &RunConfig,
    vocab: &WorldVocab,
    grammar: &TokenGrammar,
    ar: ArPolicy,
    ref_ar: &ArPolicy,
    prompts: &[PromptSpec],
    iter_rng: &Rng,
    judge_root: &Rng,
    round: usize,
) -> Result<(ArPolicy, IterationRecord)> {
    let m = cfg.pair_policy.samples_per_prompt;

    let mut encodings = Vec::with_capacity(prompts.len());
    let mut candidates: Vec<Vec<TokenSequence>> = Vec::with_capacity(prompts.len());
    let mut corpus: Vec<(usize, usize, usize)> = Vec::new();
    for (p, prompt) in prompts.iter().enumerate() {
        let enc = encode_prompt(prompt, ar.encoding_dim(), cfg.seeds.embedding);
        let mut sample_rng = iter_rng.split_indexed("sampling", p as u64);
        let sequences = ar.sample(&enc, m, &mut sample_rng);
        let scenes: Vec<Scene> = sequences.iter().map(|z| grammar.decode(z)).collect();
        let questions = decompose_questions(vocab, prompt);
        let mut feedback_rng = judge_root.split_indexed("prompt", p as u64);
        for (w, l) in prompt_pairs(cfg, &questions, &scenes, &mut feedback_rng)? {
            corpus.push((p, w, l));
        }
        encodings.push(enc);
        candidates.push(sequences);
    }
    if corpus.is_empty() {
        return Err(Error::EmptyPairCorpus { iteration: round });
    }

    let mut train_rng = iter_rng.split("train");
    let pair_count = corpus.len();
    let (ar, report) = train_discrete(
        cfg,
        ar,
        ref_ar,
        &encodings,
        &candidates,
        &corpus,
        &mut train_rng,
    )?;
    Ok((ar, report.into_record(round, pair_count)))
}

/// The token-sequence counterpart of [`train_continuous`]: optimize an
/// autoregressive policy against a frozen reference on a prepared pair
/// corpus of sampled sequences.
pub fn train_discrete(
    cfg: &RunConfig,
    mut ar: ArPolicy,
    ref_ar: &ArPolicy,
    encodings: &[PromptEncoding],
    candidates: &[Vec<TokenSequence>],
    pairs: &[(usize, usize, usize)],
    train_rng: &mut Rng,
) -> Result<(ArPolicy, TrainReport)> {
    check_pair_indices(candidates, pairs, encodings.len())?;
    // Sequences carry their vocab size and validate tokens at construction,
    // so a matching vocab is all the log-prob calls below need.
    for z in candidates.iter().flatten() {
        if z.vocab_size() != ar.vocab_size() || z.vocab_size() != ref_ar.vocab_size() {
            return Err(Error::TokenOutOfRange {
                token: z.vocab_size(),
                vocab: ar.vocab_size(),
            });
        }
    }

    let batch_of = |indices: &[usize]| -> Result<DiscretePairBatch<PromptEncoding>> {
        let items = indices
            .iter()
            .map(|&idx| {
                let (p, w, l) = pairs[idx];
                DiscretePair {
                    prompt: encodings[p].clone(),
                    chosen: candidates[p][w].clone(),
                    rejected: candidates[p][l].clone(),
                }
            })
            .collect();
        DiscretePairBatch::new(items)
    };
    // Every sequence was vocab-checked above, so the log-prob lookups
    // cannot fail.
    let corpus_loss = |ar: &ArPolicy| -> Result<f64> {
        let all: Vec<usize> = (0..pairs.len()).collect();
        let batch = batch_of(&all)?;
        let (loss, _) = discrete_dpo_loss(
            &cfg.dpo,
            &batch,
            |enc, z| ar.sequence_log_prob(enc, z).expect("vocab was checked"),
            |enc, z| {
                ref_ar
                    .sequence_log_prob(enc, z)
                    .expect("vocab was checked")
            },
        )?;
        Ok(loss)
    };
    let loss_start = corpus_loss(&ar)?;

    let mut adam = AdamState::new(ar.param_count());
    let schedule = LrSchedule {
        base_lr: cfg.optimizer.base_lr,
        warmup_steps: cfg.optimizer.warmup_steps as u64,
        total_steps: cfg.optimizer.steps as u64,
    };
    let mut sampler = EpochSampler::new(pairs.len());
    let mut train_losses = Vec::with_capacity(cfg.optimizer.steps);
    for step in 0..cfg.optimizer.steps {
        let batch_idx = sampler.next_batch(cfg.optimizer.batch_size, train_rng);
        let batch = batch_of(&batch_idx)?;
        let (loss, grads) = discrete_dpo_grad(&cfg.dpo, &batch, &ar, ref_ar)?;
        let mut params = ar.params();
        apply_grad_step(&mut params, &grads, &mut adam, schedule.lr_at(step as u64))?;
        ar.set_params(&params)?;
        train_losses.push(loss);
    }

    let loss_end = corpus_loss(&ar)?;
    let report = TrainReport {
        loss_start,
        loss_end,
        train_losses,
    };
    Ok((ar, report))
}

fn push_eval_rows(metrics: &mut MetricsLog, iteration: usize, report: &EvalReport) {
    for cat in &report.per_category {
        metrics.push_eval(iteration, cat.category.name(), "ground_truth", cat.mean_ground_truth);
        metrics.push_eval(iteration, cat.category.name(), "alignment", cat.mean_alignment);
    }
    metrics.push_eval(iteration, "overall", "ground_truth", report.overall_ground_truth);
    metrics.push_eval(iteration, "overall", "alignment", report.overall_alignment);
}

/// Run the configured number of rounds from a fresh policy, evaluating on a
/// held-out prompt set before training and after every round.
pub fn run_full(cfg: &RunConfig) -> Result<RunOutput> {
    run_full_with_scorer(cfg, &|prompt, scene| ground_truth_score(prompt, scene))
}

/// `run_full` with a caller-supplied held-out quality scorer. The scorer is
/// wired only into evaluation; the training path has no access to it, which
/// instrumentation tests exploit to prove feedback and ground truth stay
/// separate.
pub fn run_full_with_scorer(
    cfg: &RunConfig,
    scorer: &dyn Fn(&PromptSpec, &Scene) -> f64,
) -> Result<RunOutput> {
    cfg.validate()?;
    let heldout = heldout_prompts(cfg)?;
    let root = Rng::new(cfg.seeds.world);
    let mut state = init_state(cfg)?;
    let mut metrics = MetricsLog::new();
    let mut evals = Vec::with_capacity(cfg.iterations + 1);
    let initial = evaluate_policy(&state.policy, cfg, &heldout, scorer)?;
    push_eval_rows(&mut metrics, 0, &initial);
    evals.push(initial);

    for _ in 0..cfg.iterations {
        state = run_iteration(state, cfg, &root)?;
        let round = state.iteration;
        let report = evaluate_policy(&state.policy, cfg, &heldout, scorer)?;
        let record = state
            .history
            .last_mut()
            .expect("run_iteration always pushes a record");
        record.eval = Some(EvalSummary {
            mean_ground_truth: report.overall_ground_truth,
            mean_alignment: report.overall_alignment,
        });
        for (s, &loss) in record.train_losses.iter().enumerate() {
            metrics.push_train(round, s, loss);
        }
        push_eval_rows(&mut metrics, round, &report);
        let plateaued = match (cfg.plateau_delta, evals.last()) {
            (Some(delta), Some(prev)) => {
                (report.overall_ground_truth - prev.overall_ground_truth).abs() < delta
            }
            _ => false,
        };
        evals.push(report);
        if plateaued {
            break;
        }
    }
    Ok(RunOutput {
        state,
        evals,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ArConfig, MlpConfig};
    use crate::pipeline::config::OptimizerConfig;
    use crate::pipeline::pairs::PairPolicy;

    fn tiny_continuous() -> RunConfig {
        let mut cfg = RunConfig {
            prompts_per_category: 4,
            heldout_per_category: 3,
            iterations: 2,
            pair_policy: PairPolicy {
                samples_per_prompt: 6,
                top_n: 2,
                last_n: 2,
                negative_range: None,
            },
            optimizer: OptimizerConfig {
                steps: 8,
                warmup_steps: 2,
                base_lr: 1e-3,
                batch_size: 16,
            },
            ..RunConfig::default()
        };
        cfg.model.mlp = MlpConfig {
            input_dim: 16,
            hidden_width: 24,
            hidden_layers: 2,
            dropout_rate: 0.3,
            dropout_last: 1,
            out_rows: 4,
            out_cols: 8,
        };
        cfg
    }

    fn tiny_discrete() -> RunConfig {
        let mut cfg = RunConfig::discrete_default();
        cfg.prompts_per_category = 4;
        cfg.heldout_per_category = 3;
        cfg.iterations = 1;
        cfg.pair_policy = PairPolicy {
            samples_per_prompt: 6,
            top_n: 1,
            last_n: 1,
            negative_range: None,
        };
        cfg.optimizer = OptimizerConfig {
            steps: 5,
            warmup_steps: 1,
            base_lr: 1e-3,
            batch_size: 8,
        };
        cfg.model.ar = ArConfig {
            vocab_size: 62,
            max_len: 8,
            encoding_dim: 12,
            temperature: 1.0,
            top_p: 0.9,
        };
        cfg
    }

    const LN_2: f64 = std::f64::consts::LN_2;

    #[test]
    fn first_round_starts_at_the_ln2_loss_floor() {
        let cfg = tiny_continuous();
        let state = init_state(&cfg).unwrap();
        let root = Rng::new(cfg.seeds.world);
        let next = run_iteration(state, &cfg, &root).unwrap();
        let record = &next.history[0];
        assert!((record.loss_start - LN_2).abs() <= 1e-12);
        assert!(record.pair_count > 0);
    }

    #[test]
    fn rollover_restores_the_ln2_floor_on_the_next_round() {
        let cfg = tiny_continuous();
        let root = Rng::new(cfg.seeds.world);
        let state = run_iteration(init_state(&cfg).unwrap(), &cfg, &root).unwrap();
        assert_eq!(state.iteration, 1);
        let state = run_iteration(state, &cfg, &root).unwrap();
        assert!((state.history[1].loss_start - LN_2).abs() <= 1e-12);
    }

    #[test]
    fn zero_steps_rolls_the_reference_but_leaves_the_policy_alone() {
        let mut cfg = tiny_continuous();
        cfg.optimizer.steps = 0;
        let state = init_state(&cfg).unwrap();
        let before = state.policy.params();
        let root = Rng::new(cfg.seeds.world);
        let next = run_iteration(state, &cfg, &root).unwrap();
        assert_eq!(next.iteration, 1);
        assert_eq!(next.policy.params(), before);
        assert_eq!(next.reference.params(), before);
        let record = &next.history[0];
        assert_eq!(record.loss_start, record.loss_end);
        assert!(record.train_losses.is_empty());
    }

    #[test]
    fn training_reduces_loss_on_its_own_pair_corpus() {
        let mut cfg = tiny_continuous();
        cfg.optimizer.steps = 40;
        cfg.optimizer.warmup_steps = 5;
        cfg.optimizer.base_lr = 5e-3;
        let root = Rng::new(cfg.seeds.world);
        let state = run_iteration(init_state(&cfg).unwrap(), &cfg, &root).unwrap();
        let record = &state.history[0];
        assert!(
            record.loss_end <= record.loss_start,
            "loss went up: {} -> {}",
            record.loss_start,
            record.loss_end
        );
    }

    #[test]
    fn discrete_round_trains_and_rolls_over() {
        let cfg = tiny_discrete();
        let root = Rng::new(cfg.seeds.world);
        let state = run_iteration(init_state(&cfg).unwrap(), &cfg, &root).unwrap();
        let record = &state.history[0];
        assert!((record.loss_start - LN_2).abs() <= 1e-12);
        assert!(record.pair_count > 0);
        assert_eq!(record.train_losses.len(), 5);
        assert_eq!(state.policy.params(), state.reference.params());
    }

    #[test]
    fn zero_dropout_yields_identical_candidates_and_no_pairs() {
        let mut cfg = tiny_continuous();
        cfg.model.mlp.dropout_rate = 0.0;
        let state = init_state(&cfg).unwrap();
        let root = Rng::new(cfg.seeds.world);
        match run_iteration(state, &cfg, &root) {
            Err(Error::EmptyPairCorpus { iteration }) => assert_eq!(iteration, 1),
            other => panic!("expected EmptyPairCorpus, got {other:?}"),
        }
    }

    #[test]
    fn full_runs_are_bit_for_bit_deterministic() {
        let cfg = tiny_continuous();
        let a = run_full(&cfg).unwrap();
        let b = run_full(&cfg).unwrap();
        assert_eq!(a.metrics.to_csv(), b.metrics.to_csv());
        assert_eq!(a.state.policy.params(), b.state.policy.params());
        assert_eq!(a.evals, b.evals);
    }

    #[test]
    fn evaluation_scorer_cannot_influence_training() {
        let cfg = tiny_continuous();
        let honest = run_full(&cfg).unwrap();
        let poisoned = run_full_with_scorer(&cfg, &|_, _| -7.5).unwrap();
        assert_eq!(honest.state.policy.params(), poisoned.state.policy.params());
        for (a, b) in honest.state.history.iter().zip(&poisoned.state.history) {
            assert_eq!(a.train_losses, b.train_losses);
            assert_eq!(a.loss_start, b.loss_start);
            assert_eq!(a.loss_end, b.loss_end);
        }
        assert_eq!(poisoned.evals[0].overall_ground_truth, -7.5);
        assert_ne!(
            honest.evals[0].overall_ground_truth,
            poisoned.evals[0].overall_ground_truth
        );
    }

    #[test]
    fn history_and_evals_line_up_after_a_full_run() {
        let cfg = tiny_continuous();
        let out = run_full(&cfg).unwrap();
        assert_eq!(out.state.iteration, 2);
        assert_eq!(out.state.history.len(), 2);
        assert_eq!(out.evals.len(), 3);
        for (i, record) in out.state.history.iter().enumerate() {
            assert_eq!(record.iteration, i + 1);
            let summary = record.eval.as_ref().unwrap();
            assert_eq!(summary.mean_ground_truth, out.evals[i + 1].overall_ground_truth);
        }
    }

    #[test]
    fn a_generous_plateau_threshold_stops_after_one_round() {
        let mut cfg = tiny_continuous();
        cfg.plateau_delta = Some(10.0);
        let out = run_full(&cfg).unwrap();
        assert_eq!(out.state.iteration, 1);
        assert_eq!(out.evals.len(), 2);
    }

    #[test]
    fn prompt_helpers_are_deterministic_and_sized_by_config() {
        let cfg = tiny_continuous();
        let train0 = iteration_prompts(&cfg, 0).unwrap();
        let train1 = iteration_prompts(&cfg, 1).unwrap();
        let held = heldout_prompts(&cfg).unwrap();
        assert_eq!(train0.len(), 4 * Category::ALL.len());
        assert_eq!(held.len(), 3 * Category::ALL.len());
        assert_eq!(train0, iteration_prompts(&cfg, 0).unwrap());
        assert_ne!(train0, train1);
        let held_texts: Vec<&str> = held.iter().map(|p| p.text.as_str()).collect();
        assert!(train0.iter().all(|p| !held_texts.contains(&p.text.as_str())));
    }

    #[test]
    fn out_of_range_pairs_are_rejected_before_training() {
        let cfg = tiny_continuous();
        let state = init_state(&cfg).unwrap();
        let PolicyModel::Continuous(net) = state.policy else {
            panic!("continuous config")
        };
        let prompts = iteration_prompts(&cfg, 0).unwrap();
        let enc = encode_prompt(&prompts[0], net.input_dim(), cfg.seeds.embedding);
        let mut rng = Rng::new(9);
        let candidates = vec![net.sample_diverse(&enc, 3, &mut rng)];
        let bad = train_continuous(
            &cfg,
            net.clone(),
            &net,
            std::slice::from_ref(&enc),
            &candidates,
            &[(0, 0, 3)],
            &mut rng,
        );
        assert!(matches!(bad, Err(Error::InvalidConfig(_))));
        let empty = train_continuous(
            &cfg,
            net.clone(),
            &net,
            std::slice::from_ref(&enc),
            &candidates,
            &[],
            &mut rng,
        );
        assert!(matches!(empty, Err(Error::EmptyInput(_))));
    }

    #[test]
    fn metrics_rows_cover_initial_eval_training_and_round_evals() {
        let cfg = tiny_continuous();
        let out = run_full(&cfg).unwrap();
        let rows = out.metrics.rows();
        let eval_rows_iter0 = rows
            .iter()
            .filter(|r| r.iteration == 0 && r.metric.is_some())
            .count();
        // 4 categories x 2 metrics + 2 overall rows.
        assert_eq!(eval_rows_iter0, 10);
        let train_rows_round1 = rows
            .iter()
            .filter(|r| r.iteration == 1 && r.step.is_some())
            .count();
        assert_eq!(train_rows_round1, cfg.optimizer.steps);
        assert!(MetricsLog::parse_csv(&out.metrics.to_csv()).is_ok());
    }
}
