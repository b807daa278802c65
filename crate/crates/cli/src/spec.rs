//! Experiment specs: the JSON files accepted by `chroma run`.

use std::fmt;
use std::path::{Path, PathBuf};

use chroma_core::properties::lookup;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(field) = &self.field {
            write!(f, "field `{field}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for SpecError {}

impl SpecError {
    pub fn field(field: &str, message: impl Into<String>) -> Self {
        SpecError { line: None, field: Some(field.to_string()), message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format `{s}` (json or csv)")),
        }
    }
}

pub const COMMANDS: &[&str] = &[
    "extremal",
    "speed",
    "badpairs",
    "containers",
    "transfer",
    "typical",
    "goodness",
    "graphon-cutdist",
    "graphon-entropy",
    "graphon-weakreg",
    "graphon-sample",
    "graphon-homdensity",
    "graphon-count",
];

/// `n` as written in a spec: one order, an inclusive range `"a..b"`, or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Orders {
    One(usize),
    Range(String),
    List(Vec<usize>),
}

impl Orders {
    pub fn expand(&self) -> Result<Vec<usize>, String> {
        match self {
            Orders::One(n) => Ok(vec![*n]),
            Orders::List(v) if v.is_empty() => Err("empty list of orders".into()),
            Orders::List(v) => Ok(v.clone()),
            Orders::Range(s) => parse_range(s),
        }
    }
}

pub fn parse_range(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("expected N or A..B, got `{s}`");
    match s.split_once("..") {
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
        Some((a, b)) => {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if a > b {
                return Err(format!("empty range `{s}`"));
            }
            Ok((a..=b).collect())
        }
    }
}

/// A declared expectation on one reported quantity. With `n` unset it
/// applies to every row carrying that quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub quantity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Orders>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect: Vec<Expectation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    /// Directory relative paths in `params` resolve against; not serialised.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(command: &str, seed: u64) -> Self {
        ExperimentSpec {
            command: command.to_string(),
            property: None,
            n: None,
            seed,
            budget: None,
            parallel: false,
            params: Map::new(),
            expect: Vec::new(),
            output: None,
            format: Format::Json,
            base_dir: None,
        }
    }

    pub fn orders(&self) -> Result<Vec<usize>, SpecError> {
        self.n
            .as_ref()
            .ok_or_else(|| SpecError::field("n", "n required"))?
            .expand()
            .map_err(|e| SpecError::field("n", e))
    }

    pub fn param(&self, key: &str) -> Option<&Value> {
        self.params.get(key)
    }

    pub fn f64_param(&self, key: &str) -> Result<Option<f64>, SpecError> {
        match self.param(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| SpecError::field(&format!("params.{key}"), "expected a number")),
        }
    }

    pub fn u64_param(&self, key: &str) -> Result<Option<u64>, SpecError> {
        match self.param(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| SpecError::field(&format!("params.{key}"), "expected a nonnegative integer")),
        }
    }

    pub fn bool_param(&self, key: &str) -> Result<Option<bool>, SpecError> {
        match self.param(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_bool().map(Some).ok_or_else(|| SpecError::field(&format!("params.{key}"), "expected true or false")),
        }
    }

    pub fn str_param(&self, key: &str) -> Result<Option<&str>, SpecError> {
        match self.param(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_str().map(Some).ok_or_else(|| SpecError::field(&format!("params.{key}"), "expected a string")),
        }
    }

    pub fn path_param(&self, key: &str) -> Result<PathBuf, SpecError> {
        let raw = self.str_param(key)?.ok_or_else(|| SpecError::field(&format!("params.{key}"), "path required"))?;
        let p = Path::new(raw);
        Ok(match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        })
    }

    /// Checks ids and required fields that serde cannot.
    pub fn validate(&self) -> Result<(), SpecError> {
        if !COMMANDS.contains(&self.command.as_str()) {
            return Err(SpecError::field("command", format!("unknown command `{}`", self.command)));
        }
        if let Some(id) = &self.property {
            if lookup(id).is_err() {
                return Err(SpecError::field("property", format!("unknown property id `{id}`")));
            }
        }
        let needs_property = matches!(self.command.as_str(), "extremal" | "speed" | "badpairs" | "containers" | "transfer" | "typical");
        if needs_property && self.property.is_none() {
            return Err(SpecError::field("property", "property required"));
        }
        if let Some(n) = &self.n {
            n.expand().map_err(|e| SpecError::field("n", e))?;
        }
        for (i, e) in self.expect.iter().enumerate() {
            if e.value.is_none() && e.min.is_none() && e.max.is_none() {
                return Err(SpecError::field(&format!("expect[{i}]"), "needs value, min or max"));
            }
        }
        Ok(())
    }
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

pub fn parse_spec_str(text: &str) -> Result<ExperimentSpec, SpecError> {
    let raw: Value = serde_json::from_str(text)
        .map_err(|e| SpecError { line: Some(e.line()), field: None, message: format!("malformed JSON: {e}") })?;
    let Value::Object(obj) = &raw else {
        return Err(SpecError { line: Some(1), field: None, message: "spec must be a JSON object".into() });
    };
    if !obj.contains_key("seed") {
        return Err(SpecError { line: None, field: Some("seed".into()), message: "seed required".into() });
    }
    let known = ["command", "property", "n", "seed", "budget", "parallel", "params", "expect", "output", "format"];
    if let Some(k) = obj.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(SpecError { line: line_of(text, k), field: Some(k.clone()), message: "unknown field".into() });
    }
    let spec: ExperimentSpec = serde_json::from_value(raw.clone()).map_err(|e| {
        // serde reports the offending key inside the message; find its line
        let msg = e.to_string();
        let field = known.iter().find(|k| obj.contains_key(**k) && msg.contains(&format!("`{k}`"))).map(|s| s.to_string());
        SpecError { line: field.as_deref().and_then(|f| line_of(text, f)), field, message: msg }
    })?;
    spec.validate().map_err(|mut e| {
        if let Some(f) = &e.field {
            let key = f.split(['.', '[']).next_back().unwrap_or(f);
            e.line = line_of(text, key);
        }
        e
    })?;
    Ok(spec)
}

pub fn parse_spec(path: &Path) -> Result<ExperimentSpec, SpecError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SpecError { line: None, field: None, message: format!("cannot read {}: {e}", path.display()) })?;
    let mut spec = parse_spec_str(&text)?;
    spec.base_dir = path.parent().map(Path::to_path_buf);
    Ok(spec)
}
