//! Experiment configuration: flat key-value text with dotted sections, or a
//! JSON object carrying the same keys (nested objects flatten into dotted
//! keys).

use std::collections::BTreeMap;
use std::path::PathBuf;

use girg::{EdgeBudget, ModelParams, Profile};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    EscapeScan,
    AnnulusScan,
    OneArm,
    OracleValidate,
    RatioCheck,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::EscapeScan => "escape-scan",
            ExperimentKind::AnnulusScan => "annulus-scan",
            ExperimentKind::OneArm => "one-arm",
            ExperimentKind::OracleValidate => "oracle-validate",
            ExperimentKind::RatioCheck => "ratio-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub params: ModelParams,
    pub r_grid: Vec<f64>,
    pub big_r_grid: Vec<f64>,
    pub u_grid: Vec<f64>,
    pub k_grid: Vec<EdgeBudget>,
    pub trials: u64,
    pub master_seed: u64,
    pub window_factor: f64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Negative control for oracle validation: compare against an oracle
    /// computed at a deliberately doubled window and expect mismatches.
    pub oracle_mismatch_window: bool,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Num(f64),
    Bool(bool),
    List(Vec<Value>),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Num(_) => "number",
            Value::Bool(_) => "bool",
            Value::List(_) => "list",
        }
    }
}

fn bad(key: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("config key `{key}`: {why}"))
}

pub type ConfigMap = BTreeMap<String, Value>;

/// Parse either format, sniffing JSON by a leading `{`.
pub fn parse_config(text: &str) -> Result<ConfigMap, CliError> {
    if text.trim_start().starts_with('{') {
        json::parse_object(text)
    } else {
        parse_key_value(text)
    }
}

fn parse_atom(s: &str) -> Value {
    match s {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => match s.parse::<f64>() {
            Ok(x) => Value::Num(x),
            Err(_) => Value::Str(s.to_string()),
        },
    }
}

pub fn parse_key_value(text: &str) -> Result<ConfigMap, CliError> {
    let mut map = ConfigMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {}: expected key=value, got `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim();
        let parsed = if value.contains(',') {
            Value::List(value.split(',').map(|v| parse_atom(v.trim())).collect())
        } else {
            parse_atom(value)
        };
        if map.insert(key.clone(), parsed).is_some() {
            return Err(CliError::Config(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

mod json {
    //! Minimal JSON reader for the flat config schema: objects (nested ones
    //! flatten to dotted keys), arrays, numbers, strings, bools, null.

    use super::{ConfigMap, Value};
    use crate::CliError;

    pub fn parse_object(text: &str) -> Result<ConfigMap, CliError> {
        let mut p = Parser { bytes: text.as_bytes(), pos: 0 };
        p.skip_ws();
        let mut map = ConfigMap::new();
        p.object("", &mut map)?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.err("trailing content after the top-level object"));
        }
        Ok(map)
    }

    struct Parser<'a> {
        bytes: &'a [u8],
        pos: usize,
    }

    impl Parser<'_> {
        fn err(&self, msg: &str) -> CliError {
            CliError::Config(format!("json config at byte {}: {msg}", self.pos))
        }

        fn skip_ws(&mut self) {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
        }

        fn expect(&mut self, b: u8) -> Result<(), CliError> {
            self.skip_ws();
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b {
                self.pos += 1;
                Ok(())
            } else {
                Err(self.err(&format!("expected `{}`", b as char)))
            }
        }

        fn peek(&mut self) -> Option<u8> {
            self.skip_ws();
            self.bytes.get(self.pos).copied()
        }

        fn object(&mut self, prefix: &str, map: &mut ConfigMap) -> Result<(), CliError> {
            self.expect(b'{')?;
            if self.peek() == Some(b'}') {
                self.pos += 1;
                return Ok(());
            }
            loop {
                self.skip_ws();
                let key = self.string()?;
                let full = if prefix.is_empty() { key } else { format!("{prefix}.{key}") };
                self.expect(b':')?;
                if self.peek() == Some(b'{') {
                    self.object(&full, map)?;
                } else {
                    let value = self.value()?;
                    if map.insert(full.clone(), value).is_some() {
                        return Err(CliError::Config(format!("duplicate key `{full}`")));
                    }
                }
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b'}') => {
                        self.pos += 1;
                        return Ok(());
                    }
                    _ => return Err(self.err("expected `,` or `}`")),
                }
            }
        }

        fn value(&mut self) -> Result<Value, CliError> {
            match self.peek() {
                Some(b'"') => Ok(Value::Str(self.string()?)),
                Some(b'[') => {
                    self.pos += 1;
                    let mut items = Vec::new();
                    if self.peek() == Some(b']') {
                        self.pos += 1;
                        return Ok(Value::List(items));
                    }
                    loop {
                        items.push(self.value()?);
                        match self.peek() {
                            Some(b',') => self.pos += 1,
                            Some(b']') => {
                                self.pos += 1;
                                return Ok(Value::List(items));
                            }
                            _ => return Err(self.err("expected `,` or `]`")),
                        }
                    }
                }
                Some(b't') => self.keyword("true", Value::Bool(true)),
                Some(b'f') => self.keyword("false", Value::Bool(false)),
                Some(b'n') => self.keyword("null", Value::Str(String::new())),
                Some(_) => self.number(),
                None => Err(self.err("unexpected end of input")),
            }
        }

        fn keyword(&mut self, word: &str, value: Value) -> Result<Value, CliError> {
            if self.bytes[self.pos..].starts_with(word.as_bytes()) {
                self.pos += word.len();
                Ok(value)
            } else {
                Err(self.err("malformed keyword"))
            }
        }

        fn number(&mut self) -> Result<Value, CliError> {
            let start = self.pos;
            while self.pos < self.bytes.len()
                && matches!(self.bytes[self.pos], b'0'..=b'9' | b'-' | b'+' | b'.' | b'e' | b'E')
            {
                self.pos += 1;
            }
            std::str::from_utf8(&self.bytes[start..self.pos])
                .ok()
                .and_then(|s| s.parse::<f64>().ok())
                .map(Value::Num)
                .ok_or_else(|| self.err("malformed number"))
        }

        fn string(&mut self) -> Result<String, CliError> {
            self.expect(b'"')?;
            let mut out = String::new();
            loop {
                let Some(&b) = self.bytes.get(self.pos) else {
                    return Err(self.err("unterminated string"));
                };
                self.pos += 1;
                match b {
                    b'"' => return Ok(out),
                    b'\\' => {
                        let Some(&esc) = self.bytes.get(self.pos) else {
                            return Err(self.err("unterminated escape"));
                        };
                        self.pos += 1;
                        match esc {
                            b'"' => out.push('"'),
                            b'\\' => out.push('\\'),
                            b'/' => out.push('/'),
                            b'n' => out.push('\n'),
                            b't' => out.push('\t'),
                            b'r' => out.push('\r'),
                            b'b' => out.push('\u{8}'),
                            b'f' => out.push('\u{c}'),
                            b'u' => {
                                let hex = self
                                    .bytes
                                    .get(self.pos..self.pos + 4)
                                    .and_then(|h| std::str::from_utf8(h).ok())
                                    .and_then(|h| u32::from_str_radix(h, 16).ok())
                                    .and_then(char::from_u32)
                                    .ok_or_else(|| self.err("bad unicode escape"))?;
                                self.pos += 4;
                                out.push(hex);
                            }
                            _ => return Err(self.err("unsupported escape")),
                        }
                    }
                    _ => out.push(b as char),
                }
            }
        }
    }
}

struct MapReader<'a> {
    map: &'a ConfigMap,
}

impl MapReader<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.map.get(key)
    }

    fn num(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Num(x)) => Ok(Some(*x)),
            Some(v) => Err(bad(key, format!("expected a number, got {}", v.type_name()))),
        }
    }

    fn num_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn string(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Str(s)) => Ok(Some(s.clone())),
            Some(v) => Err(bad(key, format!("expected a string, got {}", v.type_name()))),
        }
    }

    fn boolean(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Bool(b)) => Ok(*b),
            Some(v) => Err(bad(key, format!("expected a bool, got {}", v.type_name()))),
        }
    }

    fn num_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let items = match self.get(key) {
            None => return Ok(Vec::new()),
            Some(Value::Num(x)) => return Ok(vec![*x]),
            Some(Value::List(items)) => items.clone(),
            Some(v) => {
                return Err(bad(key, format!("expected numbers, got {}", v.type_name())))
            }
        };
        items
            .into_iter()
            .map(|v| match v {
                Value::Num(x) => Ok(x),
                other => Err(bad(key, format!("expected numbers, got {}", other.type_name()))),
            })
            .collect()
    }

    fn budget_list(&self, key: &str) -> Result<Vec<EdgeBudget>, CliError> {
        let items = match self.get(key) {
            None => return Ok(Vec::new()),
            Some(Value::List(items)) => items.clone(),
            Some(single) => vec![single.clone()],
        };
        items
            .into_iter()
            .map(|v| match v {
                // "inf" round-trips through the float parser as infinity.
                Value::Num(x) if x.is_infinite() && x > 0.0 => Ok(EdgeBudget::Unbounded),
                Value::Num(x) if x >= 1.0 && x.is_finite() && x == x.trunc() => {
                    Ok(EdgeBudget::Limited(x as u32))
                }
                Value::Str(s) if s == "inf" || s == "unbounded" => Ok(EdgeBudget::Unbounded),
                other => Err(bad(
                    key,
                    format!("edge budgets are positive integers or `inf`, got {other:?}"),
                )),
            })
            .collect()
    }
}

impl ExperimentConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self, CliError> {
        let r = MapReader { map };

        let experiment = match r
            .string("experiment")?
            .ok_or_else(|| bad("experiment", "missing"))?
            .as_str()
        {
            "escape-scan" => ExperimentKind::EscapeScan,
            "annulus-scan" => ExperimentKind::AnnulusScan,
            "one-arm" => ExperimentKind::OneArm,
            "oracle-validate" => ExperimentKind::OracleValidate,
            "ratio-check" => ExperimentKind::RatioCheck,
            other => return Err(bad("experiment", format!("unknown experiment `{other}`"))),
        };

        let dim = r.num("model.d")?.ok_or_else(|| bad("model.d", "missing"))?;
        if dim < 1.0 || dim != dim.trunc() {
            return Err(bad("model.d", "dimension must be a positive integer"));
        }
        let lambda = r.num("model.lambda")?.ok_or_else(|| bad("model.lambda", "missing"))?;
        let gamma = r.num_or("model.gamma", 0.0)?;
        // delta is a number for the soft profile; the string "hard" (plus an
        // optional model.r0) encodes delta = infinity.
        let profile = match r.get("model.delta") {
            Some(Value::Num(delta)) if delta.is_finite() => {
                Profile::SoftPowerLaw { delta: *delta }
            }
            Some(Value::Num(delta)) if delta.is_infinite() && *delta > 0.0 => {
                Profile::Hard { r0: r.num_or("model.r0", 1.0)? }
            }
            Some(Value::Str(s)) if s == "hard" => {
                Profile::Hard { r0: r.num_or("model.r0", 1.0)? }
            }
            Some(v) => {
                return Err(bad("model.delta", format!("expected a number or `hard`, got {v:?}")))
            }
            None => return Err(bad("model.delta", "missing (a number, or `hard`)")),
        };
        let params = ModelParams::new(dim as u32, lambda, gamma, profile)
            .map_err(|e| CliError::Config(format!("model: {e}")))?;

        let trials = r.num_or("trials", 10_000.0)?;
        if trials < 1.0 || trials != trials.trunc() {
            return Err(bad("trials", "must be a positive integer"));
        }
        let master_seed = r.num_or("seed", 1.0)?;
        if master_seed < 0.0 || master_seed != master_seed.trunc() {
            return Err(bad("seed", "must be a non-negative integer"));
        }
        let window_factor = r.num_or("window_factor", 4.0)?;
        if !(window_factor >= 2.0) {
            return Err(bad("window_factor", "must be >= 2"));
        }
        let workers = r.num_or("workers", 0.0)?;
        if workers < 0.0 || workers != workers.trunc() {
            return Err(bad("workers", "must be a non-negative integer"));
        }
        let format = match r.string("format")?.as_deref() {
            None | Some("csv") => OutputFormat::Csv,
            Some("json") => OutputFormat::Json,
            Some(other) => return Err(bad("format", format!("unknown format `{other}`"))),
        };

        let config = ExperimentConfig {
            experiment,
            params,
            r_grid: r.num_list("scan.r")?,
            big_r_grid: r.num_list("scan.R")?,
            u_grid: r.num_list("scan.u")?,
            k_grid: r.budget_list("scan.k")?,
            trials: trials as u64,
            master_seed: master_seed as u64,
            window_factor,
            workers: workers as usize,
            out: r.string("out")?.map(PathBuf::from),
            format,
            oracle_mismatch_window: r.boolean("oracle.mismatch_window", false)?,
            ratio_min: r.num_or("ratio.min", 1.0)?,
            ratio_max: r.num_or("ratio.max", 10.0)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_str(text: &str) -> Result<Self, CliError> {
        Self::from_map(&parse_config(text)?)
    }

    fn validate(&self) -> Result<(), CliError> {
        let need = |name: &str, grid: &[f64]| -> Result<(), CliError> {
            if grid.is_empty() {
                return Err(CliError::Config(format!("scan.{name} grid must be non-empty")));
            }
            if grid.iter().any(|x| !(*x > 0.0)) {
                return Err(CliError::Config(format!("scan.{name} values must be positive")));
            }
            Ok(())
        };
        match self.experiment {
            ExperimentKind::EscapeScan => {
                need("R", &self.big_r_grid)?;
                need("u", &self.u_grid)?;
                for &u in &self.u_grid {
                    if u > 1.0 {
                        return Err(CliError::Config("scan.u marks must lie in (0, 1]".into()));
                    }
                }
            }
            ExperimentKind::AnnulusScan => {
                need("r", &self.r_grid)?;
                need("R", &self.big_r_grid)?;
                for (r, big_r) in self.annulus_pairs() {
                    if big_r < 2.0 * r {
                        return Err(CliError::Config(format!(
                            "annulus pair (r={r}, R={big_r}) violates R >= 2r"
                        )));
                    }
                }
            }
            ExperimentKind::OneArm => need("R", &self.big_r_grid)?,
            ExperimentKind::OracleValidate => {
                need("R", &self.big_r_grid)?;
                need("u", &self.u_grid)?;
            }
            ExperimentKind::RatioCheck => {
                need("r", &self.r_grid)?;
                if !self.big_r_grid.is_empty() && self.big_r_grid.len() != self.r_grid.len() {
                    return Err(CliError::Config(
                        "ratio-check scan.R must match scan.r in length (or be omitted)".into(),
                    ));
                }
                for (r, big_r) in self.ratio_pairs() {
                    if big_r < 2.0 * r {
                        return Err(CliError::Config(format!(
                            "ratio pair (r={r}, R={big_r}) violates R >= 2r"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Annulus grid points: positional pairs when the grids have equal
    /// length, the cross product otherwise.
    pub fn annulus_pairs(&self) -> Vec<(f64, f64)> {
        if self.r_grid.len() == self.big_r_grid.len() {
            self.r_grid.iter().copied().zip(self.big_r_grid.iter().copied()).collect()
        } else {
            let mut pairs = Vec::new();
            for &r in &self.r_grid {
                for &big_r in &self.big_r_grid {
                    pairs.push((r, big_r));
                }
            }
            pairs
        }
    }

    /// Ratio-check points: (r, 2r) unless an explicit R grid was given.
    pub fn ratio_pairs(&self) -> Vec<(f64, f64)> {
        if self.big_r_grid.is_empty() {
            self.r_grid.iter().map(|&r| (r, 2.0 * r)).collect()
        } else {
            self.r_grid.iter().copied().zip(self.big_r_grid.iter().copied()).collect()
        }
    }
}
