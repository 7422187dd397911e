//! Line-oriented record formats shared by the command-line tools. Every
//! record carries a schema version so stale files fail loudly instead of
//! deserializing into nonsense.

use crate::domain::{PromptSpec, TokenSequence};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const RECORD_SCHEMA_VERSION: u32 = 1;

fn record_schema_version() -> u32 {
    RECORD_SCHEMA_VERSION
}

/// One prompt per line in `prompts.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    #[serde(default = "record_schema_version")]
    pub schema: u32,
    pub prompt: PromptSpec,
}

impl PromptRecord {
    pub fn new(prompt: PromptSpec) -> Self {
        PromptRecord {
            schema: RECORD_SCHEMA_VERSION,
            prompt,
        }
    }
}

/// A sampled candidate in either representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Representation {
    Continuous(FeatureMatrix),
    Discrete(TokenSequence),
}

/// One candidate per line in `samples.jsonl`, keyed by prompt id and sample
/// index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    #[serde(default = "record_schema_version")]
    pub schema: u32,
    pub prompt_id: String,
    pub index: usize,
    pub representation: Representation,
}

/// One feedback score per candidate in `scores.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    #[serde(default = "record_schema_version")]
    pub schema: u32,
    pub prompt_id: String,
    pub index: usize,
    pub score: f64,
}

/// One preference pair per line in `pairs.jsonl`, referring back to sample
/// indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    #[serde(default = "record_schema_version")]
    pub schema: u32,
    pub prompt_id: String,
    pub chosen_index: usize,
    pub rejected_index: usize,
    pub chosen_score: f64,
    pub rejected_score: f64,
}

/// Serialize records as JSON Lines.
pub fn write_jsonl<T: Serialize>(mut writer: impl Write, records: &[T]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Read JSON Lines, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

/// Reject records whose schema version this build does not understand.
pub fn check_schema(schema: u32, file: &'static str) -> Result<()> {
    if schema == RECORD_SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{file} has record schema {schema}, this build reads {RECORD_SCHEMA_VERSION}"
        )))
    }
}
