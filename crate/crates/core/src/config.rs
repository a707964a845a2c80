//! Experiment configuration as flat `key = value` text.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptive_bandwidth::{DEFAULT_RUN_LIMIT, DEFAULT_TRAJ_LEN};
use crate::adaptive_size::{DEFAULT_Q_MAX, Q_MAX_LIMIT};
use crate::maps::{MapKind, DEFAULT_EVAL_WIDTH, MAX_PATTERN_BITS};
use crate::reliability::DEFAULT_PE_RES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// One real symbol per step from an adaptively sized quantizer.
    Size,
    /// One orthogonal dimension per pending bit.
    Bw,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Size => "size",
            Scheme::Bw => "bw",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "size" | "adaptive-size" => Ok(Scheme::Size),
            "bw" | "bandwidth" | "adaptive-bandwidth" => Ok(Scheme::Bw),
            other => Err(ConfigError::InvalidValue { key: "scheme".into(), value: other.into() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`")]
    InvalidValue { key: String, value: String },
    #[error("`{key}` out of range: {reason}")]
    OutOfRange { key: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub map: MapKind,
    /// Maps visited by a sweep.
    pub sweep_maps: Vec<MapKind>,
    pub sigma2: Vec<f64>,
    pub gamma0: f64,
    pub m_r: usize,
    /// Reference trajectory length `N` (bandwidth scheme).
    pub traj_len: usize,
    /// Bits used to evaluate one trajectory sample (`W`).
    pub eval_width: usize,
    pub block_len: usize,
    pub n_blocks: usize,
    pub pe_res: f64,
    pub d_max: usize,
    pub q_max: usize,
    pub t_flush: usize,
    pub master_seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scheme: Scheme::Size,
            map: MapKind::Bsm,
            sweep_maps: MapKind::ALL.to_vec(),
            sigma2: vec![0.5],
            gamma0: 2.0,
            m_r: DEFAULT_RUN_LIMIT,
            traj_len: DEFAULT_TRAJ_LEN,
            eval_width: DEFAULT_EVAL_WIDTH,
            block_len: 200,
            n_blocks: 10_000,
            pe_res: DEFAULT_PE_RES,
            d_max: 60,
            q_max: DEFAULT_Q_MAX,
            t_flush: 100,
            master_seed: 1,
            out: PathBuf::from("out"),
        }
    }
}

pub const KEYS: [&str; 16] = [
    "scheme",
    "map",
    "sweep_maps",
    "sigma2",
    "gamma0",
    "m_r",
    "N",
    "W",
    "block_len",
    "n_blocks",
    "pe_res",
    "d_max",
    "q_max",
    "t_flush",
    "master_seed",
    "out",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue { key: key.into(), value: value.into() })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| ConfigError::InvalidValue { key: key.into(), value: s.into() }))
        .collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Applies one assignment; `N` and `W` also accept `traj_len` and
    /// `eval_width`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key.trim() {
            "scheme" => self.scheme = value.parse()?,
            "map" => self.map = parse_num(key, value)?,
            "sweep_maps" => self.sweep_maps = parse_list(key, value)?,
            "sigma2" => self.sigma2 = parse_list(key, value)?,
            "gamma0" => self.gamma0 = parse_num(key, value)?,
            "m_r" | "mr" => self.m_r = parse_num(key, value)?,
            "N" | "traj_len" => self.traj_len = parse_num(key, value)?,
            "W" | "eval_width" => self.eval_width = parse_num(key, value)?,
            "block_len" => self.block_len = parse_num(key, value)?,
            "n_blocks" => self.n_blocks = parse_num(key, value)?,
            "pe_res" => self.pe_res = parse_num(key, value)?,
            "d_max" => self.d_max = parse_num(key, value)?,
            "q_max" => self.q_max = parse_num(key, value)?,
            "t_flush" => self.t_flush = parse_num(key, value)?,
            "master_seed" | "seed" => self.master_seed = parse_num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn serialize(&self) -> String {
        let values = [
            self.scheme.to_string(),
            self.map.to_string(),
            join(&self.sweep_maps),
            join(&self.sigma2),
            self.gamma0.to_string(),
            self.m_r.to_string(),
            self.traj_len.to_string(),
            self.eval_width.to_string(),
            self.block_len.to_string(),
            self.n_blocks.to_string(),
            self.pe_res.to_string(),
            self.d_max.to_string(),
            self.q_max.to_string(),
            self.t_flush.to_string(),
            self.master_seed.to_string(),
            self.out.display().to_string(),
        ];
        KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, reason: String| Err(ConfigError::OutOfRange { key: key.into(), reason });
        if self.sigma2.is_empty() {
            return bad("sigma2", "at least one value required".into());
        }
        if let Some(s) = self.sigma2.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return bad("sigma2", format!("{s} is not a positive finite variance"));
        }
        if self.sweep_maps.is_empty() {
            return bad("sweep_maps", "at least one map required".into());
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return bad("gamma0", format!("{} must be positive", self.gamma0));
        }
        if self.m_r == 0 || self.m_r > 60 {
            return bad("m_r", format!("{} not in 1..=60", self.m_r));
        }
        if self.eval_width == 0 || self.eval_width > MAX_PATTERN_BITS {
            return bad("W", format!("{} not in 1..={MAX_PATTERN_BITS}", self.eval_width));
        }
        if self.traj_len <= self.eval_width + 1 {
            return bad("N", format!("{} must exceed W + 1", self.traj_len));
        }
        if self.block_len == 0 {
            return bad("block_len", "must be positive".into());
        }
        if self.n_blocks == 0 {
            return bad("n_blocks", "must be positive".into());
        }
        if !(self.pe_res > 0.0 && self.pe_res < 0.5) {
            return bad("pe_res", format!("{} not in (0, 0.5)", self.pe_res));
        }
        if self.d_max == 0 || self.d_max > 64 {
            return bad("d_max", format!("{} not in 1..=64", self.d_max));
        }
        if self.q_max == 0 || self.q_max > Q_MAX_LIMIT {
            return bad("q_max", format!("{} not in 1..={Q_MAX_LIMIT}", self.q_max));
        }
        Ok(())
    }
}
