//! Flat key=value configuration with dotted section prefixes.
//!
//! The format is line oriented: `model.kind=ma_q`, `experiment.n=250,500`.
//! Blank lines and `#` comments are skipped. Every key must be consumed by
//! the chosen subcommand; duplicates and unknown keys are errors that name
//! the offending key and line.

use std::collections::BTreeMap;
use std::fmt;

use qclt_core::marginal::Family;
use qclt_core::model::{Innovation, ModelConfig};

/// Configuration error; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Parsed key=value document with line provenance and consumption tracking.
#[derive(Debug)]
pub struct ConfigReader {
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigReader {
    pub fn parse(text: &str) -> Result<ConfigReader, ConfigError> {
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {line_no}: expected key=value, got '{line}'"));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return err(format!("line {line_no}: empty key"));
            }
            if let Some((_, first_line)) = entries.get(&key) {
                return err(format!(
                    "duplicate key '{key}' at lines {first_line} and {line_no}"
                ));
            }
            entries.insert(key, (value, line_no));
        }
        Ok(ConfigReader { entries })
    }

    fn take_raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn require_string(&mut self, key: &str) -> Result<String, ConfigError> {
        match self.take_raw(key) {
            Some((v, _)) => Ok(v),
            None => err(format!("missing required key '{key}'")),
        }
    }

    pub fn require_f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        let (v, line) = match self.take_raw(key) {
            Some(p) => p,
            None => return err(format!("missing required key '{key}'")),
        };
        parse_f64(key, &v, line)
    }

    pub fn optional_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take_raw(key) {
            Some((v, line)) => Ok(Some(parse_f64(key, &v, line)?)),
            None => Ok(None),
        }
    }

    pub fn require_u64(&mut self, key: &str) -> Result<u64, ConfigError> {
        let (v, line) = match self.take_raw(key) {
            Some(p) => p,
            None => return err(format!("missing required key '{key}'")),
        };
        match v.parse::<u64>() {
            Ok(x) => Ok(x),
            Err(_) => err(format!("{key}: malformed integer '{v}' (line {line})")),
        }
    }

    pub fn require_f64_list(&mut self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let (v, line) = match self.take_raw(key) {
            Some(p) => p,
            None => return err(format!("missing required key '{key}'")),
        };
        parse_f64_list(key, &v, line)
    }

    pub fn optional_f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.take_raw(key) {
            Some((v, line)) => Ok(Some(parse_f64_list(key, &v, line)?)),
            None => Ok(None),
        }
    }

    pub fn require_usize_list(&mut self, key: &str) -> Result<Vec<usize>, ConfigError> {
        let (v, line) = match self.take_raw(key) {
            Some(p) => p,
            None => return err(format!("missing required key '{key}'")),
        };
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<usize>().map_err(|_| {
                    ConfigError(format!("{key}: malformed integer '{s}' (line {line})"))
                })
            })
            .collect()
    }

    /// Rows separated by ';', entries by ','.
    pub fn require_matrix(&mut self, key: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
        let (v, line) = match self.take_raw(key) {
            Some(p) => p,
            None => return err(format!("missing required key '{key}'")),
        };
        v.split(';')
            .map(|row| parse_f64_list(key, row, line))
            .collect()
    }

    /// Fails on any key the subcommand did not consume.
    pub fn finish(self) -> Result<(), ConfigError> {
        if let Some((key, (_, line))) = self.entries.into_iter().next() {
            return err(format!(
                "unknown or unused key '{key}' (line {line}) for this subcommand"
            ));
        }
        Ok(())
    }
}

fn parse_f64(key: &str, v: &str, line: usize) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(format!("{key}: malformed number '{v}' (line {line})")),
    }
}

fn parse_f64_list(key: &str, v: &str, line: usize) -> Result<Vec<f64>, ConfigError> {
    if v.trim().is_empty() {
        return err(format!("{key}: empty list (line {line})"));
    }
    v.split(',').map(|s| parse_f64(key, s.trim(), line)).collect()
}

/// Reads the `model.*` block into a model configuration.
pub fn read_model(reader: &mut ConfigReader) -> Result<ModelConfig, ConfigError> {
    let kind = reader.require_string("model.kind")?;
    match kind.as_str() {
        "iid" => {
            let marginal = read_family(reader)?;
            Ok(ModelConfig::Iid { marginal })
        }
        "ma_q" => {
            let innovation = read_innovation(reader)?;
            let mu = reader.optional_f64("model.mu")?.unwrap_or(0.0);
            let coeffs = reader.optional_f64_list("model.c")?.unwrap_or_default();
            Ok(ModelConfig::MovingAverage {
                mu,
                coeffs,
                innovation,
            })
        }
        "window_fn" => {
            let innovation = read_innovation(reader)?;
            let width = reader.require_u64("model.window")? as usize;
            Ok(ModelConfig::WindowSum { width, innovation })
        }
        other => err(format!(
            "model.kind: unknown value '{other}' (expected iid, ma_q, or window_fn)"
        )),
    }
}

fn read_innovation(reader: &mut ConfigReader) -> Result<Innovation, ConfigError> {
    let name = reader.require_string("model.innovation")?;
    match name.as_str() {
        "standard-normal" => Ok(Innovation::StandardNormal),
        "cauchy" => Ok(Innovation::StandardCauchy),
        other => err(format!(
            "model.innovation: '{other}' has no closed-form marginal under dependence \
             (expected standard-normal or cauchy)"
        )),
    }
}

fn read_family(reader: &mut ConfigReader) -> Result<Family, ConfigError> {
    let name = reader.require_string("model.innovation")?;
    match name.as_str() {
        "standard-normal" => Ok(Family::StandardNormal),
        "normal" => Ok(Family::Normal {
            mean: reader.require_f64("model.mean")?,
            variance: reader.require_f64("model.var")?,
        }),
        "uniform" => Ok(Family::Uniform {
            a: reader.require_f64("model.a")?,
            b: reader.require_f64("model.b")?,
        }),
        "shifted-exponential" => {
            let rate = reader.require_f64("model.rate")?;
            Family::shifted_exponential_median(rate).map_err(|e| ConfigError(e.to_string()))
        }
        "beta21" => Ok(Family::Beta21),
        "cauchy" => Ok(Family::Cauchy {
            location: reader.optional_f64("model.location")?.unwrap_or(0.0),
            scale: reader.optional_f64("model.scale")?.unwrap_or(1.0),
        }),
        other => err(format!("model.innovation: unknown family '{other}'")),
    }
}
