//! Run configuration and its flat `key = value` file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! family = fivestar
//! layout = conj_diag
//! rank = 32
//! optimizer = adagrad
//! learning_rate = 0.1
//! ```
//!
//! Every key is optional; omitted keys take their defaults. `reg_mode`
//! defaults to `shared_times_two` for conjugate layouts and `full_sum`
//! otherwise. Unknown and repeated keys are errors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::complex::{Family, Layout};
use crate::error::{Error, Result};
use crate::model::{RegMode, RegNorm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adagrad,
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [OptimizerKind::Adagrad, OptimizerKind::Adam, OptimizerKind::Sgd];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adagrad => "adagrad",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "adagrad" => Ok(OptimizerKind::Adagrad),
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(format!("unknown optimizer {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: Family,
    pub layout: Layout,
    pub rank: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub reg_coefficient: f64,
    pub reg_mode: RegMode,
    pub reg_norm: RegNorm,
    pub epochs: usize,
    pub seed: u64,
    pub init_std: f64,
    /// Validation interval in epochs for best-checkpoint selection.
    pub eval_every: usize,
    pub reciprocal: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::new(Family::ComplEx, Layout::Full)
    }
}

pub const KEYS: [&str; 14] = [
    "family",
    "layout",
    "rank",
    "optimizer",
    "learning_rate",
    "batch_size",
    "reg_coefficient",
    "reg_mode",
    "reg_norm",
    "epochs",
    "seed",
    "init_std",
    "eval_every",
    "reciprocal",
];

impl ModelConfig {
    pub fn new(family: Family, layout: Layout) -> Self {
        ModelConfig {
            family,
            layout,
            rank: 100,
            optimizer: OptimizerKind::Adagrad,
            learning_rate: 0.1,
            batch_size: 100,
            reg_coefficient: 5e-2,
            reg_mode: RegMode::default_for(layout),
            reg_norm: RegNorm::L2,
            epochs: 100,
            seed: 0,
            init_std: 1e-2,
            eval_every: 10,
            reciprocal: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.check(self.family, self.rank)?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            ));
        }
        if !(self.reg_coefficient >= 0.0 && self.reg_coefficient.is_finite()) {
            return bad(format!(
                "reg_coefficient must be finite and non-negative, got {}",
                self.reg_coefficient
            ));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return bad(format!("init_std must be positive, got {}", self.init_std));
        }
        Ok(())
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        match key {
            "family" => self.family = value.parse()?,
            "layout" => self.layout = value.parse()?,
            "rank" => self.rank = num(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "reg_coefficient" => self.reg_coefficient = num(key, value)?,
            "reg_mode" => self.reg_mode = value.parse()?,
            "reg_norm" => self.reg_norm = value.parse()?,
            "epochs" => self.epochs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "init_std" => self.init_std = num(key, value)?,
            "eval_every" => self.eval_every = num(key, value)?,
            "reciprocal" => self.reciprocal = num(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Parses a config document and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg = Self::parse_unvalidated(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without the semantic checks of [`ModelConfig::validate`].
    pub fn parse_unvalidated(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Config { line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key = value".to_owned()))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            cfg.set(key, value).map_err(err)?;
            seen.push(key);
        }
        if !seen.contains(&"reg_mode") {
            cfg.reg_mode = RegMode::default_for(cfg.layout);
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Short human-readable label such as `fivestar/conj_diag`.
    pub fn label(&self) -> String {
        let base = format!("{}/{}", self.family, self.layout);
        if self.reg_mode == RegMode::HalfOnly {
            format!("{base}+half_reg")
        } else {
            base
        }
    }
}

impl fmt::Display for ModelConfig {
    /// Canonical document with every key, in [`KEYS`] order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "family = {}", self.family)?;
        writeln!(f, "layout = {}", self.layout)?;
        writeln!(f, "rank = {}", self.rank)?;
        writeln!(f, "optimizer = {}", self.optimizer)?;
        writeln!(f, "learning_rate = {}", self.learning_rate)?;
        writeln!(f, "batch_size = {}", self.batch_size)?;
        writeln!(f, "reg_coefficient = {}", self.reg_coefficient)?;
        writeln!(f, "reg_mode = {}", self.reg_mode.name())?;
        writeln!(f, "reg_norm = {}", self.reg_norm.name())?;
        writeln!(f, "epochs = {}", self.epochs)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "init_std = {}", self.init_std)?;
        writeln!(f, "eval_every = {}", self.eval_every)?;
        writeln!(f, "reciprocal = {}", self.reciprocal)
    }
}
