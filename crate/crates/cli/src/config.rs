//! Pipeline configuration. Files are JSON objects with flat dotted keys,
//! e.g. `{"reader.hidden": 64, "tasks.conll.epochs": 2}`; keys not listed
//! keep their defaults and command-line flags override both.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use wikimrc::mrcgen::GenConfig;
use wikimrc::reader::ReaderConfig;

/// Fine-tuning settings for one downstream dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSettings {
    pub query_length: usize,
    pub input_length: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

const fn task(query_length: usize, input_length: usize, batch_size: usize, learning_rate: f64, epochs: usize) -> TaskSettings {
    TaskSettings {
        query_length,
        input_length,
        batch_size,
        learning_rate,
        epochs,
    }
}

/// Per-dataset fine-tuning settings of the published large model.
pub fn task_presets() -> BTreeMap<String, TaskSettings> {
    [
        ("xquad", task(64, 384, 8, 3e-5, 3)),
        ("mlqa", task(64, 384, 8, 3e-5, 3)),
        ("tydiqa", task(64, 384, 8, 2e-5, 10)),
        ("wikiann", task(32, 192, 16, 1e-5, 10)),
        ("conll", task(32, 192, 16, 1e-5, 10)),
        ("semeval16", task(32, 192, 32, 2e-5, 20)),
        ("pawsx", task(64, 192, 16, 5e-5, 10)),
        ("xnli", task(64, 192, 32, 3e-5, 3)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Languages to keep; empty keeps all.
    pub languages: BTreeSet<String>,
    pub gen: GenConfig,
    pub reader: ReaderConfig,
    pub tasks: BTreeMap<String, TaskSettings>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            languages: BTreeSet::new(),
            gen: GenConfig::default(),
            reader: ReaderConfig::default(),
            tasks: task_presets(),
        }
    }
}

fn insert_dotted(root: &mut Map<String, Value>, key: &str, value: Value) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|p| !p.is_empty()).ok_or_else(|| format!("empty key {key:?}"))?;
    let mut node = root;
    for part in parts {
        let entry = node.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        node = entry.as_object_mut().ok_or_else(|| format!("{key}: {part} is not a section"))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl PipelineConfig {
    /// Applies flat dotted keys on top of the defaults.
    pub fn from_flat(flat: &Map<String, Value>) -> Result<Self, String> {
        let Value::Object(mut root) = serde_json::to_value(Self::default()).map_err(|e| e.to_string())? else {
            unreachable!("config serializes to an object");
        };
        let defaults = Value::Object(root.clone());
        for (key, value) in flat {
            if value.is_object() {
                return Err(format!("{key}: nested objects are not allowed, use dotted keys"));
            }
            // New datasets may be added under `tasks`; anything else must
            // name an existing setting.
            let new_task = key.starts_with("tasks.") && key.split('.').count() == 3;
            if !new_task && defaults.pointer(&format!("/{}", key.replace('.', "/"))).is_none() {
                return Err(format!("unknown setting {key:?}"));
            }
            insert_dotted(&mut root, key, value.clone())?;
        }
        let config: Self = serde_json::from_value(Value::Object(root)).map_err(|e| e.to_string())?;
        config.reader.validate().map_err(|e| e.to_string())?;
        config.gen.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let flat: Map<String, Value> =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_flat(&flat).map_err(|e| format!("{}: {e}", path.display()))
    }
}
