//! Resolution of the effective run configuration.
//!
//! Precedence, lowest to highest: built-in defaults for the selected mode,
//! the `--config` file, `--override key.path=value` pairs, and finally
//! `--seed`, which rederives every stream seed from one master value.

use std::fs;
use std::path::Path;

use alignlab_core::pipeline::{RunConfig, Seeds};
use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

pub fn load(config: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<RunConfig> {
    let mut user = match config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let value: Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?;
            if !value.is_object() {
                bail!("config {} must be a JSON object", path.display());
            }
            value
        }
        None => Value::Object(Default::default()),
    };
    for entry in overrides {
        apply_override(&mut user, entry)?;
    }

    // The mode decides which default block fills the unspecified fields, so
    // it has to be read off the raw user value before the merge.
    let base = match user.get("mode") {
        Some(Value::String(mode)) if mode == "Discrete" => RunConfig::discrete_default(),
        _ => RunConfig::default(),
    };
    let mut merged = serde_json::to_value(&base).expect("default config serializes");
    deep_merge(&mut merged, user);
    let mut cfg: RunConfig =
        serde_json::from_value(merged).context("config does not match the run schema")?;
    if let Some(master) = seed {
        cfg.seeds = Seeds::from_master(master);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Set one dotted-path key. The value side is parsed as JSON when possible
/// (`0.15`, `true`, `null`, `[1,2]`) and kept as a string otherwise, so
/// `--override mode=Discrete` works without shell-quoted quotes.
fn apply_override(root: &mut Value, entry: &str) -> Result<()> {
    let Some((key, raw)) = entry.split_once('=') else {
        bail!("override '{entry}' must look like key.path=value");
    };
    let mut value = Some(serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into())));
    let segments: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for (i, segment) in segments.iter().enumerate() {
        if segment.is_empty() {
            bail!("override '{entry}' has an empty path segment");
        }
        let map = node
            .as_object_mut()
            .ok_or_else(|| anyhow!("override '{entry}' descends into a non-object value"))?;
        if i + 1 == segments.len() {
            map.insert(segment.to_string(), value.take().expect("set once"));
            return Ok(());
        }
        node = map
            .entry(segment.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one segment");
}

/// Recursively overlay `user` onto `base`. Objects merge key by key; any
/// other pairing, including `null`, replaces the base value outright.
fn deep_merge(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Object(base_map), Value::Object(user_map)) => {
            for (key, value) in user_map {
                match base_map.get_mut(&key) {
                    Some(slot) => deep_merge(slot, value),
                    None => {
                        base_map.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}
