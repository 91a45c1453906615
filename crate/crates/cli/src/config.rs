//! Flat experiment configs: `key = value` text with `#` comments, or a flat
//! JSON object. Keys are consumed by typed getters; anything left over after a
//! command has read its parameters is rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.key, self.line) {
            (Some(k), Some(l)) => write!(f, "line {l}: key `{k}`: {}", self.message),
            (Some(k), None) => write!(f, "key `{k}`: {}", self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

pub type ConfigResult<T> = Result<T, ConfigError>;

fn err(key: &str, line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: Some(key.to_string()),
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone)]
enum Raw {
    Text(String),
    Json(Value),
}

#[derive(Debug, Clone)]
struct Entry {
    raw: Raw,
    line: Option<usize>,
}

/// Parsed config with consumption tracking and the resolved parameter record.
#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
    resolved: Map<String, Value>,
}

impl Config {
    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            key: None,
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> ConfigResult<Self> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_text(text)
        }
    }

    fn parse_text(text: &str) -> ConfigResult<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let body = match line.find('#') {
                Some(p) => &line[..p],
                None => line,
            }
            .trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| ConfigError {
                key: None,
                line: Some(n),
                message: format!("expected `key = value`, got `{body}`"),
            })?;
            let key = k.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(err(key, Some(n), "malformed key"));
            }
            let value = v.trim().trim_matches('"').to_string();
            let entry = Entry {
                raw: Raw::Text(value),
                line: Some(n),
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(err(
                    key,
                    Some(n),
                    format!("duplicate key (first set on line {})", prev.line.unwrap_or(0)),
                ));
            }
        }
        Ok(Self {
            entries,
            resolved: Map::new(),
        })
    }

    fn parse_json(text: &str) -> ConfigResult<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigError {
            key: None,
            line: Some(e.line()),
            message: format!("invalid JSON: {e}"),
        })?;
        let Value::Object(map) = value else {
            return Err(ConfigError {
                key: None,
                line: Some(1),
                message: "JSON config must be an object".into(),
            });
        };
        let mut entries = BTreeMap::new();
        for (k, v) in map {
            let needle = format!("\"{k}\"");
            let line = text.lines().position(|l| l.contains(&needle)).map(|i| i + 1);
            if v.is_object() {
                return Err(err(&k, line, "nested objects are not supported"));
            }
            entries.insert(k, Entry { raw: Raw::Json(v), line });
        }
        Ok(Self {
            entries,
            resolved: Map::new(),
        })
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn record(&mut self, key: &str, v: Value) {
        self.resolved.insert(key.to_string(), v);
    }

    pub fn f64(&mut self, key: &str, default: f64) -> ConfigResult<f64> {
        let v = match self.take(key) {
            None => default,
            Some(e) => to_f64(key, &e)?,
        };
        self.record(key, json_f64(v));
        Ok(v)
    }

    /// `None` when absent or set to `auto`.
    pub fn opt_f64(&mut self, key: &str) -> ConfigResult<Option<f64>> {
        let v = match self.take(key) {
            None => None,
            Some(e) if is_auto(&e) => None,
            Some(e) => Some(to_f64(key, &e)?),
        };
        self.record(key, v.map_or(Value::String("auto".into()), json_f64));
        Ok(v)
    }

    pub fn usize(&mut self, key: &str, default: usize) -> ConfigResult<usize> {
        let v = match self.take(key) {
            None => default,
            Some(e) => to_u64(key, &e)? as usize,
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn opt_usize(&mut self, key: &str) -> ConfigResult<Option<usize>> {
        let v = match self.take(key) {
            None => None,
            Some(e) if is_auto(&e) => None,
            Some(e) => Some(to_u64(key, &e)? as usize),
        };
        self.record(key, v.map_or(Value::String("auto".into()), Value::from));
        Ok(v)
    }

    pub fn u64(&mut self, key: &str, default: u64) -> ConfigResult<u64> {
        let v = match self.take(key) {
            None => default,
            Some(e) => to_u64(key, &e)?,
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn bool(&mut self, key: &str, default: bool) -> ConfigResult<bool> {
        let v = match self.take(key) {
            None => default,
            Some(e) => match &e.raw {
                Raw::Json(Value::Bool(b)) => *b,
                Raw::Text(s) | Raw::Json(Value::String(s)) => match s.as_str() {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return Err(err(key, e.line, format!("expected a boolean, got `{s}`"))),
                },
                other => return Err(err(key, e.line, format!("expected a boolean, got {other:?}"))),
            },
        };
        self.record(key, Value::Bool(v));
        Ok(v)
    }

    pub fn string(&mut self, key: &str, default: &str) -> ConfigResult<String> {
        let v = match self.take(key) {
            None => default.to_string(),
            Some(e) => match e.raw {
                Raw::Text(s) | Raw::Json(Value::String(s)) => s,
                Raw::Json(other) => return Err(err(key, e.line, format!("expected a string, got {other}"))),
            },
        };
        self.record(key, Value::String(v.clone()));
        Ok(v)
    }

    /// One of `choices`; the first is the default.
    pub fn choice(&mut self, key: &str, choices: &[&str]) -> ConfigResult<String> {
        let line = self.entries.get(key).and_then(|e| e.line);
        let v = self.string(key, choices[0])?;
        if !choices.contains(&v.as_str()) {
            return Err(err(key, line, format!("expected one of {choices:?}, got `{v}`")));
        }
        Ok(v)
    }

    fn list_entries(&mut self, key: &str) -> Option<Vec<Entry>> {
        let e = self.take(key)?;
        Some(match &e.raw {
            Raw::Json(Value::Array(a)) => a
                .iter()
                .map(|x| Entry {
                    raw: Raw::Json(x.clone()),
                    line: e.line,
                })
                .collect(),
            Raw::Text(s) | Raw::Json(Value::String(s)) => s
                .split(',')
                .map(|x| Entry {
                    raw: Raw::Text(x.trim().to_string()),
                    line: e.line,
                })
                .collect(),
            Raw::Json(x) => vec![Entry {
                raw: Raw::Json(x.clone()),
                line: e.line,
            }],
        })
    }

    /// Comma-separated text or a JSON array.
    pub fn f64_list(&mut self, key: &str, default: &[f64]) -> ConfigResult<Vec<f64>> {
        let line = self.line_of(key);
        let v = match self.list_entries(key) {
            None => default.to_vec(),
            Some(items) => items.iter().map(|x| to_f64(key, x)).collect::<ConfigResult<Vec<_>>>()?,
        };
        if v.is_empty() {
            return Err(err(key, line, "list is empty"));
        }
        self.record(key, Value::Array(v.iter().map(|&x| json_f64(x)).collect()));
        Ok(v)
    }

    pub fn usize_list(&mut self, key: &str, default: &[usize]) -> ConfigResult<Vec<usize>> {
        let line = self.line_of(key);
        let v = match self.list_entries(key) {
            None => default.to_vec(),
            Some(items) => items
                .iter()
                .map(|x| to_u64(key, x).map(|n| n as usize))
                .collect::<ConfigResult<Vec<_>>>()?,
        };
        if v.is_empty() {
            return Err(err(key, line, "list is empty"));
        }
        self.record(key, Value::Array(v.iter().map(|&x| Value::from(x)).collect()));
        Ok(v)
    }

    /// Drops a key from the resolved parameter record (for values stored elsewhere).
    pub fn forget(&mut self, key: &str) {
        self.resolved.remove(key);
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).and_then(|e| e.line)
    }

    /// Error for a key that is recognized but invalid in context.
    pub fn invalid(&self, key: &str, line: Option<usize>, message: impl Into<String>) -> ConfigError {
        err(key, line, message)
    }

    /// Rejects keys nobody consumed, reporting the earliest one.
    pub fn finish(&self) -> ConfigResult<()> {
        let first = self
            .entries
            .iter()
            .min_by_key(|(k, e)| (e.line.unwrap_or(usize::MAX), (*k).clone()));
        match first {
            None => Ok(()),
            Some((k, e)) => Err(err(k, e.line, "unknown key")),
        }
    }

    pub fn resolved(&self) -> &Map<String, Value> {
        &self.resolved
    }
}

fn is_auto(e: &Entry) -> bool {
    matches!(&e.raw, Raw::Text(s) | Raw::Json(Value::String(s)) if s == "auto")
        || matches!(e.raw, Raw::Json(Value::Null))
}

fn to_f64(key: &str, e: &Entry) -> ConfigResult<f64> {
    match &e.raw {
        Raw::Json(Value::Number(n)) => n.as_f64().ok_or_else(|| err(key, e.line, "not representable as f64")),
        Raw::Text(s) | Raw::Json(Value::String(s)) => match s.as_str() {
            "inf" | "infinity" => Ok(f64::INFINITY),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(key, e.line, format!("expected a number, got `{s}`"))),
        },
        other => Err(err(key, e.line, format!("expected a number, got {other:?}"))),
    }
}

fn to_u64(key: &str, e: &Entry) -> ConfigResult<u64> {
    match &e.raw {
        Raw::Json(Value::Number(n)) => n
            .as_u64()
            .ok_or_else(|| err(key, e.line, format!("expected a non-negative integer, got {n}"))),
        Raw::Text(s) | Raw::Json(Value::String(s)) => {
            let s = s.replace('_', "");
            let parsed = match s.strip_prefix("0x") {
                Some(hex) => u64::from_str_radix(hex, 16).ok(),
                None => s.parse::<u64>().ok(),
            };
            parsed.ok_or_else(|| err(key, e.line, format!("expected a non-negative integer, got `{s}`")))
        }
        other => Err(err(key, e.line, format!("expected an integer, got {other:?}"))),
    }
}

/// Infinite values (zero temperature) are kept as the string `"inf"`.
fn json_f64(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String("inf".into()), Value::Number)
}
