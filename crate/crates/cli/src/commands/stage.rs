//! The staged commands: one improvement round broken into resumable steps.
//!
//! `gen-prompts`, `sample`, `score`, `make-pairs`, and `train` exchange
//! records through the run directory but call the same library functions and
//! draw from the same derived random streams as `iterate`, so chaining them
//! reproduces a full round bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use alignlab_core::io::{
    check_schema, PairRecord, PromptRecord, Representation, SampleRecord, ScoreRecord,
    RECORD_SCHEMA_VERSION,
};
use alignlab_core::domain::TokenSequence;
use alignlab_core::matrix::FeatureMatrix;
use alignlab_core::models::encode_prompt;
use alignlab_core::pipeline::{
    build_decoder, build_pair_indices, feedback_stream, iteration_prompts, iteration_stream,
    train_continuous, train_discrete, IterationState, PolicyModel, RunConfig,
};
use alignlab_core::world::{decompose_questions, feedback_score, TokenGrammar, WorldVocab};
use anyhow::{anyhow, bail, Result};

use crate::store::{
    self, PAIRS_FILE, PROMPTS_FILE, SAMPLES_FILE, SCORES_FILE,
};

pub fn gen_prompts(cfg: &RunConfig, out: &Path) -> Result<()> {
    let state = store::load_state(out, cfg)?;
    let prompts = iteration_prompts(cfg, state.iteration)?;
    let records: Vec<PromptRecord> = prompts.into_iter().map(PromptRecord::new).collect();
    store::write_records(out, PROMPTS_FILE, &records)?;
    store::write_manifest(out, "gen-prompts", cfg, &[PROMPTS_FILE])?;
    println!(
        "wrote {} prompts for round {} to {}",
        records.len(),
        state.iteration + 1,
        out.join(PROMPTS_FILE).display()
    );
    Ok(())
}

pub fn sample(cfg: &RunConfig, out: &Path) -> Result<()> {
    let prompts = store::read_prompts(out)?;
    let state = store::load_state(out, cfg)?;
    let stream = iteration_stream(cfg, state.iteration);
    let m = cfg.pair_policy.samples_per_prompt;

    let mut records = Vec::with_capacity(prompts.len() * m);
    for (p, prompt) in prompts.iter().enumerate() {
        let mut rng = stream.split_indexed("sampling", p as u64);
        let representations: Vec<Representation> = match &state.policy {
            PolicyModel::Continuous(net) => {
                let enc = encode_prompt(prompt, net.input_dim(), cfg.seeds.embedding);
                net.sample_diverse(&enc, m, &mut rng)
                    .into_iter()
                    .map(Representation::Continuous)
                    .collect()
            }
            PolicyModel::Discrete(ar) => {
                let enc = encode_prompt(prompt, ar.encoding_dim(), cfg.seeds.embedding);
                ar.sample(&enc, m, &mut rng)
                    .into_iter()
                    .map(Representation::Discrete)
                    .collect()
            }
        };
        for (index, representation) in representations.into_iter().enumerate() {
            records.push(SampleRecord {
                schema: RECORD_SCHEMA_VERSION,
                prompt_id: prompt.id.clone(),
                index,
                representation,
            });
        }
    }
    store::write_records(out, SAMPLES_FILE, &records)?;
    store::write_manifest(out, "sample", cfg, &[SAMPLES_FILE])?;
    println!(
        "wrote {} candidates ({} per prompt) to {}",
        records.len(),
        m,
        out.join(SAMPLES_FILE).display()
    );
    Ok(())
}

pub fn score(cfg: &RunConfig, out: &Path) -> Result<()> {
    let prompts = store::read_prompts(out)?;
    let samples = store::samples_by_prompt(store::read_records(out, SAMPLES_FILE)?)?;
    let state = store::load_state(out, cfg)?;
    let vocab = WorldVocab::standard();
    let grammar = TokenGrammar::standard(&vocab);
    let decoder = match state.policy {
        PolicyModel::Continuous(_) => Some(build_decoder(cfg, &vocab)?),
        PolicyModel::Discrete(_) => None,
    };
    let judge_root = feedback_stream(cfg, state.iteration);

    let mut records = Vec::new();
    for (p, prompt) in prompts.iter().enumerate() {
        let candidates = samples
            .get(&prompt.id)
            .ok_or_else(|| anyhow!("{SAMPLES_FILE} has no rows for prompt {}", prompt.id))?;
        let questions = decompose_questions(&vocab, prompt);
        let mut rng = judge_root.split_indexed("prompt", p as u64);
        for candidate in candidates {
            let scene = match (&candidate.representation, &decoder) {
                (Representation::Continuous(h), Some(decoder)) => decoder.decode_continuous(h)?,
                (Representation::Discrete(z), None) => grammar.decode(z),
                _ => bail!("{SAMPLES_FILE} does not match the run's mode"),
            };
            let score = feedback_score(cfg.feedback, &cfg.judge, &scene, &questions, &mut rng)?;
            records.push(ScoreRecord {
                schema: RECORD_SCHEMA_VERSION,
                prompt_id: prompt.id.clone(),
                index: candidate.index,
                score,
            });
        }
    }
    store::write_records(out, SCORES_FILE, &records)?;
    store::write_manifest(out, "score", cfg, &[SCORES_FILE])?;
    println!(
        "scored {} candidates into {}",
        records.len(),
        out.join(SCORES_FILE).display()
    );
    Ok(())
}

pub fn make_pairs(cfg: &RunConfig, out: &Path) -> Result<()> {
    let prompts = store::read_prompts(out)?;
    let scores = store::scores_by_prompt(store::read_records(out, SCORES_FILE)?)?;

    let mut records = Vec::new();
    for prompt in &prompts {
        let rows = scores
            .get(&prompt.id)
            .ok_or_else(|| anyhow!("{SCORES_FILE} has no rows for prompt {}", prompt.id))?;
        let values: Vec<f64> = rows.iter().map(|r| r.score).collect();
        for (chosen, rejected) in build_pair_indices(&cfg.pair_policy, &values)? {
            records.push(PairRecord {
                schema: RECORD_SCHEMA_VERSION,
                prompt_id: prompt.id.clone(),
                chosen_index: chosen,
                rejected_index: rejected,
                chosen_score: values[chosen],
                rejected_score: values[rejected],
            });
        }
    }
    store::write_records(out, PAIRS_FILE, &records)?;
    store::write_manifest(out, "make-pairs", cfg, &[PAIRS_FILE])?;
    println!(
        "built {} preference pairs into {}",
        records.len(),
        out.join(PAIRS_FILE).display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let prompts = store::read_prompts(out)?;
    let samples = store::samples_by_prompt(store::read_records(out, SAMPLES_FILE)?)?;
    let pair_records: Vec<PairRecord> = store::read_records(out, PAIRS_FILE)?;

    let index_of: BTreeMap<&str, usize> = prompts
        .iter()
        .enumerate()
        .map(|(index, prompt)| (prompt.id.as_str(), index))
        .collect();
    let mut pairs = Vec::with_capacity(pair_records.len());
    for record in &pair_records {
        check_schema(record.schema, PAIRS_FILE)?;
        let p = *index_of.get(record.prompt_id.as_str()).ok_or_else(|| {
            anyhow!("{PAIRS_FILE} refers to unknown prompt {}", record.prompt_id)
        })?;
        pairs.push((p, record.chosen_index, record.rejected_index));
    }

    let state = store::load_state(out, cfg)?;
    let IterationState {
        iteration,
        policy,
        reference,
        mut history,
    } = state;
    let round = iteration + 1;
    let mut train_rng = iteration_stream(cfg, iteration).split("train");

    let (policy, reference, report) = match (policy, reference) {
        (PolicyModel::Continuous(net), PolicyModel::Continuous(ref_net)) => {
            let mut encodings = Vec::with_capacity(prompts.len());
            let mut candidates: Vec<Vec<FeatureMatrix>> = Vec::with_capacity(prompts.len());
            for prompt in &prompts {
                encodings.push(encode_prompt(prompt, net.input_dim(), cfg.seeds.embedding));
                candidates.push(continuous_candidates(&samples, &prompt.id)?);
            }
            let (net, report) =
                train_continuous(cfg, net, &ref_net, &encodings, &candidates, &pairs, &mut train_rng)?;
            (
                PolicyModel::Continuous(net.clone()),
                PolicyModel::Continuous(net),
                report,
            )
        }
        (PolicyModel::Discrete(ar), PolicyModel::Discrete(ref_ar)) => {
            let mut encodings = Vec::with_capacity(prompts.len());
            let mut candidates: Vec<Vec<TokenSequence>> = Vec::with_capacity(prompts.len());
            for prompt in &prompts {
                encodings.push(encode_prompt(prompt, ar.encoding_dim(), cfg.seeds.embedding));
                candidates.push(discrete_candidates(&samples, &prompt.id)?);
            }
            let (ar, report) =
                train_discrete(cfg, ar, &ref_ar, &encodings, &candidates, &pairs, &mut train_rng)?;
            (
                PolicyModel::Discrete(ar.clone()),
                PolicyModel::Discrete(ar),
                report,
            )
        }
        _ => bail!("checkpoint policy and reference flavors differ"),
    };

    let loss_start = report.loss_start;
    let loss_end = report.loss_end;
    let record = report.into_record(round, pairs.len());

    let mut metrics = store::load_metrics(out)?;
    for (step, &loss) in record.train_losses.iter().enumerate() {
        metrics.push_train(round, step, loss);
    }
    history.push(record);
    let state = IterationState {
        iteration: round,
        policy,
        reference,
        history,
    };
    store::save_metrics(out, &metrics)?;
    store::save_checkpoint(out, cfg, &state)?;
    store::write_manifest(
        out,
        "train",
        cfg,
        &[store::CHECKPOINT_FILE, store::METRICS_FILE],
    )?;
    println!(
        "round {round}: corpus loss {loss_start:.6} -> {loss_end:.6} on {} pairs; \
         checkpoint advanced to iteration {round}",
        pairs.len()
    );
    Ok(())
}

fn continuous_candidates(
    samples: &BTreeMap<String, Vec<SampleRecord>>,
    prompt_id: &str,
) -> Result<Vec<FeatureMatrix>> {
    let records = samples
        .get(prompt_id)
        .ok_or_else(|| anyhow!("{SAMPLES_FILE} has no rows for prompt {prompt_id}"))?;
    records
        .iter()
        .map(|record| match &record.representation {
            Representation::Continuous(h) => Ok(h.clone()),
            Representation::Discrete(_) => {
                bail!("{SAMPLES_FILE} holds token sequences but the run is continuous")
            }
        })
        .collect()
}

fn discrete_candidates(
    samples: &BTreeMap<String, Vec<SampleRecord>>,
    prompt_id: &str,
) -> Result<Vec<TokenSequence>> {
    let records = samples
        .get(prompt_id)
        .ok_or_else(|| anyhow!("{SAMPLES_FILE} has no rows for prompt {prompt_id}"))?;
    records
        .iter()
        .map(|record| match &record.representation {
            Representation::Discrete(z) => Ok(z.clone()),
            Representation::Continuous(_) => {
                bail!("{SAMPLES_FILE} holds feature matrices but the run is discrete")
            }
        })
        .collect()
}
