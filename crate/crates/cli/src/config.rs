//! Flat `key = value` run configuration.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mmconc::bounds::{condition_check, Condition, NRule, Trend};
use mmconc::Field;
use serde::Serialize;

use crate::error::ConfigError;
use crate::rule::parse_rule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Mbdist,
    Fullmeas,
    Prok,
    Lipschitz,
    Pushforward,
    Obsdiam,
    Bounds,
    DecompProps,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Mbdist,
        Experiment::Fullmeas,
        Experiment::Prok,
        Experiment::Lipschitz,
        Experiment::Pushforward,
        Experiment::Obsdiam,
        Experiment::Bounds,
        Experiment::DecompProps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Mbdist => "mbdist",
            Experiment::Fullmeas => "fullmeas",
            Experiment::Prok => "prok",
            Experiment::Lipschitz => "lipschitz",
            Experiment::Pushforward => "pushforward",
            Experiment::Obsdiam => "obsdiam",
            Experiment::Bounds => "bounds",
            Experiment::DecompProps => "decomp-props",
        }
    }

    /// Experiments that build an `eps_N` schedule and so need `n < N`.
    fn uses_schedule(self) -> bool {
        matches!(self, Experiment::Fullmeas | Experiment::Lipschitz | Experiment::Bounds)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                ConfigError::invalid("experiment", format!("unknown experiment `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    Ass,
    Condi,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    #[serde(rename = "field")]
    pub fields: Vec<Field>,
    #[serde(rename = "N")]
    pub big_n: Vec<u64>,
    #[serde(rename = "n")]
    pub n_rule_text: String,
    #[serde(rename = "n_rule")]
    pub rule: NRule,
    pub kappa: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub condition: ConditionKind,
    pub a: f64,
    pub a_prime: f64,
    pub epsilon: Option<f64>,
    pub l: usize,
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            fields: vec![Field::R],
            big_n: vec![100],
            n_rule_text: "const:1".into(),
            rule: NRule::Const(1),
            kappa: vec![0.5],
            samples: 10_000,
            seed: 0,
            condition: ConditionKind::Condi,
            a: 0.5,
            a_prime: 0.9,
            epsilon: None,
            l: 1,
            workers: None,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn condition(&self) -> Condition {
        match self.condition {
            ConditionKind::Ass => Condition::Ass {
                a: self.a,
                a_prime: self.a_prime,
            },
            ConditionKind::Condi => Condition::Condi { a_prime: self.a_prime },
        }
    }

    /// Canonical echo of every input that affects CSV bodies. `workers`
    /// and `out` are deliberately excluded.
    pub fn echo(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// `(N, n)` cells in list order, `n` from the rule.
    pub fn cells(&self) -> Vec<(u64, u64)> {
        self.big_n.iter().map(|&big_n| (big_n, self.rule.eval(big_n))).collect()
    }

    /// Cross-key checks once every key is known.
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.fields.is_empty() {
            return Err(ConfigError::invalid("field", "list is empty"));
        }
        if self.big_n.is_empty() {
            return Err(ConfigError::invalid("N", "list is empty"));
        }
        if self.kappa.is_empty() {
            return Err(ConfigError::invalid("kappa", "list is empty"));
        }
        let schedule = self.experiment.is_some_and(Experiment::uses_schedule);
        for (big_n, n) in self.cells() {
            if big_n < 2 || (schedule && big_n < 3) {
                return Err(ConfigError::invalid("N", format!("N = {big_n} is too small")));
            }
            let max = if schedule { big_n - 1 } else { big_n };
            if n > max {
                return Err(ConfigError::invalid(
                    "n",
                    format!("rule gives n = {n} at N = {big_n}; need n <= {max}"),
                ));
            }
            if self.experiment == Some(Experiment::Mbdist) && self.l as u64 > big_n {
                return Err(ConfigError::invalid("l", format!("l = {} exceeds N = {big_n}", self.l)));
            }
        }
        Ok(())
    }

    /// Non-fatal findings about the `n` rule against the growth condition.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let NRule::Power(p) | NRule::PowerLog(p) = self.rule {
            if p >= 1.0 / 3.0 {
                out.push(format!(
                    "n rule `{}`: exponent {p} is not below 1/3, so condition (*) is only guaranteed for p < 1/3",
                    self.n_rule_text
                ));
            }
        }
        let n_max = self.big_n.iter().copied().max().unwrap_or(0).max(1_000_000);
        let report = condition_check(&self.rule, n_max, self.condition());
        if report.trend == Trend::Increasing {
            out.push(format!(
                "n rule `{}`: the condition (*) expression keeps growing up to N = {n_max} (value {:.4} at N = {}); the supremum may diverge",
                self.n_rule_text, report.sup_value, report.sup_at
            ));
        }
        out
    }
}

const LIST_KEYS: [&str; 3] = ["field", "N", "kappa"];

/// Applies keys one at a time. The first occurrence of a list key within a
/// source replaces the default; later occurrences append.
#[derive(Clone, Debug)]
pub struct ConfigBuilder {
    cfg: RunConfig,
    touched: HashSet<&'static str>,
    base_dir: PathBuf,
}

impl Default for ConfigBuilder {
    fn default() -> Self {
        ConfigBuilder {
            cfg: RunConfig::default(),
            touched: HashSet::new(),
            base_dir: PathBuf::from("."),
        }
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| ConfigError::invalid(key, format!("`{value}` is not a valid number")))
}

fn unit_interval(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(ConfigError::invalid(key, format!("{v} must lie in (0, 1)")))
    }
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts a new source (file, then flags) so list keys replace again.
    pub fn next_source(&mut self) {
        self.touched.clear();
    }

    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let key = match key.trim() {
            "a-prime" => "a_prime",
            k => k,
        };
        let value = value.trim();
        if value.is_empty() {
            return Err(ConfigError::invalid(key, "empty value"));
        }
        if let Some(&k) = LIST_KEYS.iter().find(|&&k| k == key) {
            if self.touched.insert(k) {
                match k {
                    "field" => self.cfg.fields.clear(),
                    "N" => self.cfg.big_n.clear(),
                    _ => self.cfg.kappa.clear(),
                }
            }
        }
        let c = &mut self.cfg;
        match key {
            "experiment" => c.experiment = Some(value.parse()?),
            "field" => {
                for f in split_list(value) {
                    let field = Field::parse(f)
                        .ok_or_else(|| ConfigError::invalid("field", format!("`{f}` is not one of r, c, h")))?;
                    c.fields.push(field);
                }
            }
            "N" => {
                for v in split_list(value) {
                    c.big_n.push(parse_num("N", v)?);
                }
            }
            "n" => {
                c.rule = parse_rule(value, &self.base_dir)?;
                c.n_rule_text = value.to_string();
            }
            "kappa" => {
                for v in split_list(value) {
                    c.kappa.push(unit_interval("kappa", parse_num("kappa", v)?)?);
                }
            }
            "samples" => {
                c.samples = parse_num("samples", value)?;
                if c.samples == 0 {
                    return Err(ConfigError::invalid("samples", "must be positive"));
                }
            }
            "seed" => c.seed = parse_num("seed", value)?,
            "condition" => {
                c.condition = match value.to_ascii_lowercase().as_str() {
                    "ass" => ConditionKind::Ass,
                    "condi" => ConditionKind::Condi,
                    other => {
                        return Err(ConfigError::invalid("condition", format!("`{other}` is not ass or condi")))
                    }
                }
            }
            "a" => c.a = unit_interval("a", parse_num("a", value)?)?,
            "a_prime" => c.a_prime = unit_interval("a_prime", parse_num("a_prime", value)?)?,
            "epsilon" => c.epsilon = Some(unit_interval("epsilon", parse_num("epsilon", value)?)?),
            "l" => {
                c.l = parse_num("l", value)?;
                if c.l == 0 {
                    return Err(ConfigError::invalid("l", "must be positive"));
                }
            }
            "workers" => {
                let w: usize = parse_num("workers", value)?;
                if w == 0 {
                    return Err(ConfigError::invalid("workers", "must be positive"));
                }
                c.workers = Some(w);
            }
            "out" => c.out = PathBuf::from(value),
            other => {
                return Err(ConfigError::UnknownKey {
                    key: other.to_string(),
                    line,
                })
            }
        }
        Ok(())
    }

    /// Reads a config file; relative `table:` paths resolve against its
    /// directory.
    pub fn load_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let text = String::from_utf8(bytes).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?;
        let saved = std::mem::replace(
            &mut self.base_dir,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        );
        self.next_source();
        let result = self.load_str(&text);
        self.base_dir = saved;
        result
    }

    pub fn load_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = strip_comment(raw);
            let trimmed = body.trim();
            if trimmed.is_empty() {
                continue;
            }
            let indent = body.len() - body.trim_start().len();
            if trimmed.starts_with('[') {
                if !trimmed.ends_with(']') {
                    return Err(ConfigError::Syntax {
                        line,
                        column: indent + 1,
                        message: "unterminated section header".into(),
                    });
                }
                log::debug!("ignoring section header {trimmed} on line {line}");
                continue;
            }
            let eq = body.find('=').ok_or_else(|| ConfigError::Syntax {
                line,
                column: indent + 1,
                message: format!("expected `key = value`, got `{trimmed}`"),
            })?;
            let key = body[..eq].trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    column: eq + 1,
                    message: "missing key before `=`".into(),
                });
            }
            if key.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line,
                    column: indent + 1,
                    message: format!("malformed key `{key}`"),
                });
            }
            let value = body[eq + 1..].trim();
            if value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    column: eq + 2,
                    message: format!("missing value for `{key}`"),
                });
            }
            self.set(key, value, line)?;
        }
        Ok(())
    }

    pub fn build(self) -> Result<RunConfig, ConfigError> {
        self.cfg.check()?;
        Ok(self.cfg)
    }

    pub fn peek(&self) -> &RunConfig {
        &self.cfg
    }
}

/// Drops a `#` or `;` comment that starts the line or follows whitespace.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if (b == b'#' || b == b';') && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut b = ConfigBuilder::new();
    b.load_str(text)?;
    b.build()
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "OK")?;
        writeln!(f, "{}", self.config.echo())?;
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

pub fn validate(path: &Path) -> Result<ValidationReport, ConfigError> {
    let mut b = ConfigBuilder::new();
    b.load_file(path)?;
    let config = b.build()?;
    let warnings = config.warnings();
    Ok(ValidationReport { config, warnings })
}
