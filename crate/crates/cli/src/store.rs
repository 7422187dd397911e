//! Layout of a run directory and the files the commands exchange.
//!
//! Every mutating command takes an exclusive lock on the directory, writes
//! its outputs, and refreshes `manifest.json` so a directory always records
//! which command produced its current contents and under which config.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, ErrorKind, Write as _};
use std::path::{Path, PathBuf};

use alignlab_core::domain::PromptSpec;
use alignlab_core::io::{
    check_schema, read_jsonl, write_jsonl, PromptRecord, SampleRecord, ScoreRecord,
};
use alignlab_core::pipeline::{init_state, Checkpoint, IterationState, MetricsLog, RunConfig};
use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const PROMPTS_FILE: &str = "prompts.jsonl";
pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const EVAL_FILE: &str = "eval.json";
pub const SWEEP_FILE: &str = "sweep.json";
pub const MANIFEST_FILE: &str = "manifest.json";
const LOCK_FILE: &str = ".alignlab.lock";

/// Another process holds the run directory.
#[derive(Debug)]
pub struct LockedError {
    path: PathBuf,
}

impl fmt::Display for LockedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "run directory is locked by another command (delete {} if that command is gone)",
            self.path.display()
        )
    }
}

impl std::error::Error for LockedError {}

/// Exclusive marker file, removed on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(out: &Path) -> Result<DirLock> {
        fs::create_dir_all(out)
            .with_context(|| format!("creating run directory {}", out.display()))?;
        let path = out.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                let _ = writeln!(file, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(err) if err.kind() == ErrorKind::AlreadyExists => Err(LockedError { path }.into()),
            Err(err) => Err(err).with_context(|| format!("creating lock {}", path.display())),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn write_records<T: Serialize>(out: &Path, name: &str, records: &[T]) -> Result<()> {
    let path = out.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_jsonl(BufWriter::new(file), records)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_records<T: DeserializeOwned>(out: &Path, name: &str) -> Result<Vec<T>> {
    let path = out.join(name);
    let file = File::open(&path)
        .with_context(|| format!("opening {} (run the earlier stage first)", path.display()))?;
    read_jsonl(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_prompts(out: &Path) -> Result<Vec<PromptSpec>> {
    let records: Vec<PromptRecord> = read_records(out, PROMPTS_FILE)?;
    if records.is_empty() {
        bail!("{PROMPTS_FILE} is empty");
    }
    for record in &records {
        check_schema(record.schema, PROMPTS_FILE)?;
    }
    Ok(records.into_iter().map(|r| r.prompt).collect())
}

/// Group sample records by prompt id, sorted by sample index, and require
/// the indices to be dense so positions can double as candidate indices.
pub fn samples_by_prompt(
    records: Vec<SampleRecord>,
) -> Result<BTreeMap<String, Vec<SampleRecord>>> {
    group_dense(records, SAMPLES_FILE, |r| (r.schema, &r.prompt_id, r.index))
}

pub fn scores_by_prompt(records: Vec<ScoreRecord>) -> Result<BTreeMap<String, Vec<ScoreRecord>>> {
    group_dense(records, SCORES_FILE, |r| (r.schema, &r.prompt_id, r.index))
}

fn group_dense<T>(
    records: Vec<T>,
    file: &'static str,
    key: impl Fn(&T) -> (u32, &String, usize),
) -> Result<BTreeMap<String, Vec<T>>> {
    if records.is_empty() {
        bail!("{file} is empty");
    }
    let mut groups: BTreeMap<String, Vec<(usize, T)>> = BTreeMap::new();
    for record in records {
        let (schema, prompt_id, index) = key(&record);
        check_schema(schema, file)?;
        groups
            .entry(prompt_id.clone())
            .or_default()
            .push((index, record));
    }
    let mut out = BTreeMap::new();
    for (prompt_id, mut rows) in groups {
        rows.sort_by_key(|(index, _)| *index);
        for (position, (index, _)) in rows.iter().enumerate() {
            if *index != position {
                bail!("{file}: prompt {prompt_id} is missing sample index {position}");
            }
        }
        out.insert(prompt_id, rows.into_iter().map(|(_, r)| r).collect());
    }
    Ok(out)
}

pub fn save_checkpoint(out: &Path, cfg: &RunConfig, state: &IterationState) -> Result<()> {
    let checkpoint = Checkpoint::new(cfg.clone(), state.clone());
    let path = out.join(CHECKPOINT_FILE);
    let text = serde_json::to_string_pretty(&checkpoint).context("encoding checkpoint")?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_checkpoint(out: &Path) -> Result<Option<Checkpoint>> {
    let path = out.join(CHECKPOINT_FILE);
    match fs::read_to_string(&path) {
        Ok(text) => {
            let checkpoint = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            Ok(Some(checkpoint))
        }
        Err(err) if err.kind() == ErrorKind::NotFound => Ok(None),
        Err(err) => Err(err).with_context(|| format!("reading {}", path.display())),
    }
}

/// The state stored in the run directory, or a fresh round-zero state when
/// no checkpoint exists yet. A checkpoint written under a different config
/// is rejected: the random streams would no longer line up.
pub fn load_state(out: &Path, cfg: &RunConfig) -> Result<IterationState> {
    match read_checkpoint(out)? {
        Some(checkpoint) => {
            if checkpoint.config != *cfg {
                bail!(
                    "{CHECKPOINT_FILE} was written under a different config; \
                     pass the original config or start a fresh --out directory"
                );
            }
            Ok(checkpoint.state)
        }
        None => Ok(init_state(cfg)?),
    }
}

pub fn load_metrics(out: &Path) -> Result<MetricsLog> {
    let path = out.join(METRICS_FILE);
    match fs::read_to_string(&path) {
        Ok(text) => Ok(MetricsLog::parse_csv(&text)?),
        Err(err) if err.kind() == ErrorKind::NotFound => Ok(MetricsLog::new()),
        Err(err) => Err(err).with_context(|| format!("reading {}", path.display())),
    }
}

pub fn save_metrics(out: &Path, metrics: &MetricsLog) -> Result<()> {
    let path = out.join(METRICS_FILE);
    fs::write(&path, metrics.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Record what was last written here. Deliberately free of timestamps and
/// host details so identical runs leave byte-identical directories.
pub fn write_manifest(out: &Path, command: &str, cfg: &RunConfig, files: &[&str]) -> Result<()> {
    let manifest = serde_json::json!({
        "schema_version": 1,
        "command": command,
        "files": files,
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&manifest).context("encoding manifest")?;
    fs::write(out.join(MANIFEST_FILE), text + "\n").context("writing manifest")?;
    Ok(())
}

pub fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<()> {
    let path = out.join(name);
    let text = serde_json::to_string_pretty(value)
        .with_context(|| format!("encoding {}", path.display()))?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
