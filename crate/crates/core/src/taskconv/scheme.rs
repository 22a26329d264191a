use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Eqa,
    Ner,
    Absa,
    Pair,
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eqa" => Ok(TaskKind::Eqa),
            "ner" => Ok(TaskKind::Ner),
            "absa" => Ok(TaskKind::Absa),
            "pair" => Ok(TaskKind::Pair),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDef {
    pub name: String,
    pub definition: String,
}

/// Query and context templates. Placeholders: `{name}`, `{definition}`,
/// `{sentence1}`, `{sentence2}`. Rendered templates are split on whitespace,
/// so they are stored pre-tokenized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    #[serde(default = "default_query")]
    pub query: String,
    #[serde(default = "default_context")]
    pub context: String,
    #[serde(default = "default_rationale_query")]
    pub rationale_query: String,
}

fn default_query() -> String {
    "\"{name}\" . {definition}".into()
}

fn default_context() -> String {
    "Hypothesis : {sentence1} Premise : {sentence2}".into()
}

fn default_rationale_query() -> String {
    "{name} {sentence1}".into()
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            query: default_query(),
            context: default_context(),
            rationale_query: default_rationale_query(),
        }
    }
}

/// Label set with definitions, loaded from a JSON scheme file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scheme {
    pub task: TaskKind,
    #[serde(default)]
    pub labels: Vec<LabelDef>,
    #[serde(default)]
    pub templates: Templates,
}

pub(crate) fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

impl Scheme {
    pub fn from_json(text: &str) -> Result<Self> {
        let scheme: Scheme = serde_json::from_str(text)?;
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.task != TaskKind::Eqa && self.labels.is_empty() {
            return Err(Error::Config("scheme has no labels".into()));
        }
        if let Some(l) = self.labels.iter().find(|l| l.definition.trim().is_empty()) {
            return Err(Error::Config(format!("label {:?} has an empty definition", l.name)));
        }
        Ok(())
    }

    pub fn label(&self, name: &str) -> Option<&LabelDef> {
        self.labels.iter().find(|l| l.name == name)
    }

    pub fn label_query(&self, label: &LabelDef) -> Vec<String> {
        render(
            &self.templates.query,
            &[("name", &label.name), ("definition", &label.definition)],
        )
        .split_whitespace()
        .map(String::from)
        .collect()
    }

    /// CoNLL-style named entities with the label definitions used for
    /// queries.
    pub fn conll() -> Self {
        Self::from_json(include_str!("../../data/schemes/conll.json")).expect("bundled scheme")
    }

    pub fn absa() -> Self {
        Self::from_json(include_str!("../../data/schemes/absa.json")).expect("bundled scheme")
    }

    pub fn pawsx() -> Self {
        Self::from_json(include_str!("../../data/schemes/pawsx.json")).expect("bundled scheme")
    }

    pub fn xnli() -> Self {
        Self::from_json(include_str!("../../data/schemes/xnli.json")).expect("bundled scheme")
    }

    pub fn eqa() -> Self {
        Self {
            task: TaskKind::Eqa,
            labels: Vec::new(),
            templates: Templates::default(),
        }
    }
}
