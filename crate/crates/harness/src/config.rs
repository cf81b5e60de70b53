//! Experiment configuration: a line-based `key = value` format.
//!
//! ```text
//! # Block length sweep, ten users 5 m away.
//! users = 10
//! user.*.task_bits = 10e3
//! sweep_var = T
//! sweep_values = 0.05, 0.1, 0.2
//! ```
//!
//! Keys mirror the fields of [`SystemParams`] and [`UserParams`]. Per-user
//! keys are `user.<i>.<field>` with `i` counted from 1, or `user.*.<field>`
//! for every user; an indexed key wins over the wildcard regardless of line
//! order. Units are SI throughout. Unknown or repeated keys are errors.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use wpmec_core::benchmarks::SchemeId;
use wpmec_core::model::{SystemParams, UserParams};
use wpmec_core::SolveOptions;

use crate::channels::{PATH_LOSS_EXPONENT, REFERENCE_GAIN};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    /// Block length.
    T,
    /// Number of users.
    K,
    /// Task size of every user.
    R,
    /// Bandwidth.
    B,
    /// Distance of user 2.
    D2,
    /// Task size of user 2.
    R2,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::T => "T",
            SweepVar::K => "K",
            SweepVar::R => "R",
            SweepVar::B => "B",
            SweepVar::D2 => "d2",
            SweepVar::R2 => "R2",
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [SweepVar::T, SweepVar::K, SweepVar::R, SweepVar::B, SweepVar::D2, SweepVar::R2]
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown sweep variable `{s}` (expected T, K, R, B, d2 or R2)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UserField {
    TaskBits,
    CyclesPerBit,
    Capacitance,
    CircuitPower,
    MaxFrequency,
    Distance,
}

impl UserField {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "task_bits" => UserField::TaskBits,
            "cycles_per_bit" => UserField::CyclesPerBit,
            "capacitance" => UserField::Capacitance,
            "circuit_power" => UserField::CircuitPower,
            "max_frequency" => UserField::MaxFrequency,
            "distance" => UserField::Distance,
            _ => return None,
        })
    }

    fn apply(self, user: &mut UserParams, value: f64) {
        let slot = match self {
            UserField::TaskBits => &mut user.task_bits,
            UserField::CyclesPerBit => &mut user.cycles_per_bit,
            UserField::Capacitance => &mut user.capacitance,
            UserField::CircuitPower => &mut user.circuit_power,
            UserField::MaxFrequency => &mut user.max_frequency,
            UserField::Distance => &mut user.distance,
        };
        *slot = value;
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// System at the base point; `users` holds the expanded per-user data.
    pub base: SystemParams,
    /// Parameters of users without an indexed override.
    pub user_template: UserParams,
    /// Indexed overrides, keyed by 0-based user index.
    pub user_overrides: BTreeMap<usize, Vec<(UserField, f64)>>,
    pub reference_gain: f64,
    pub path_loss_exponent: f64,
    pub sweep_var: SweepVar,
    pub sweep_values: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    pub schemes: Vec<SchemeId>,
    pub output: PathBuf,
    /// Ellipsoid tolerance of the dual solvers.
    pub tol: f64,
}

pub const DEFAULT_REALIZATIONS: usize = 100;

impl Default for ExperimentConfig {
    fn default() -> Self {
        let user = UserParams::with_task(10e3);
        Self {
            base: SystemParams::homogeneous(2, 0.1, user.clone()),
            user_template: user,
            user_overrides: BTreeMap::new(),
            reference_gain: REFERENCE_GAIN,
            path_loss_exponent: PATH_LOSS_EXPONENT,
            sweep_var: SweepVar::T,
            sweep_values: vec![0.1],
            realizations: DEFAULT_REALIZATIONS,
            seed: 0,
            schemes: SchemeId::ALL.to_vec(),
            output: PathBuf::from("results.csv"),
            tol: SolveOptions::default().tol,
        }
    }
}

fn config_err(line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        line,
        message: message.into(),
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| config_err(line, format!("`{key}` expects a number, got `{v}`")))
}

fn parse_count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| config_err(line, format!("`{key}` expects a non-negative integer, got `{v}`")))
}

/// Comma-separated scheme ids; an empty list is rejected.
pub fn parse_schemes(list: &str) -> std::result::Result<Vec<SchemeId>, String> {
    let ids = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<SchemeId>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if ids.is_empty() {
        return Err("scheme list is empty".into());
    }
    Ok(ids)
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(0, format!("{}: {e}", path.display())))?;
        text.parse()
    }

    /// Number of users at the base point.
    pub fn users(&self) -> usize {
        self.base.num_users()
    }

    /// Solver options for every scheme.
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            ..SolveOptions::default()
        }
    }

    fn expand_users(&self, k: usize) -> Vec<UserParams> {
        (0..k)
            .map(|i| {
                let mut u = self.user_template.clone();
                for &(field, value) in self.user_overrides.get(&i).into_iter().flatten() {
                    field.apply(&mut u, value);
                }
                u
            })
            .collect()
    }

    /// The system at one sweep value.
    pub fn params_at(&self, value: f64) -> Result<SystemParams> {
        let mut p = self.base.clone();
        fn second(p: &mut SystemParams, var: SweepVar) -> Result<&mut UserParams> {
            p.users
                .get_mut(1)
                .ok_or_else(|| HarnessError::Invalid(format!("sweeping {var} needs at least two users")))
        }
        match self.sweep_var {
            SweepVar::T => p.block_length = value,
            SweepVar::K => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(HarnessError::Invalid(format!("user count must be a positive integer, got {value}")));
                }
                p.users = self.expand_users(value as usize);
            }
            SweepVar::R => p.users.iter_mut().for_each(|u| u.task_bits = value),
            SweepVar::B => p.bandwidth = value,
            SweepVar::D2 => second(&mut p, self.sweep_var)?.distance = value,
            SweepVar::R2 => second(&mut p, self.sweep_var)?.task_bits = value,
        }
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep_values.is_empty() {
            return Err(HarnessError::Invalid("sweep_values is empty".into()));
        }
        if self.realizations == 0 {
            return Err(HarnessError::Invalid("realizations must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(HarnessError::Invalid("scheme list is empty".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(HarnessError::Invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.reference_gain > 0.0 && self.path_loss_exponent.is_finite()) {
            return Err(HarnessError::Invalid("invalid path-loss model".into()));
        }
        self.base.validate()?;
        for &v in &self.sweep_values {
            self.params_at(v)?;
        }
        Ok(())
    }
}

impl FromStr for ExperimentConfig {
    type Err = HarnessError;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut users = cfg.users();
        let mut seen = HashSet::new();
        let mut wildcard: Vec<(UserField, f64)> = Vec::new();
        let mut sweep_var_set = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| config_err(line, format!("expected `key = value`, got `{content}`")))?;
            if value.is_empty() {
                return Err(config_err(line, format!("`{key}` has no value")));
            }
            if !seen.insert(key.to_string()) {
                return Err(config_err(line, format!("`{key}` is set twice")));
            }
            let num = || parse_f64(line, key, value);
            match key {
                "antennas" => cfg.base.antennas = parse_count(line, key, value)?,
                "block_length" => cfg.base.block_length = num()?,
                "bandwidth" => cfg.base.bandwidth = num()?,
                "noise_power" => cfg.base.noise_power = num()?,
                "eh_efficiency" => cfg.base.eh_efficiency = num()?,
                "ap_energy_per_bit" => cfg.base.ap_energy_per_bit = num()?,
                "capacity_gap" => cfg.base.capacity_gap = num()?,
                "users" => users = parse_count(line, key, value)?,
                "reference_gain" => cfg.reference_gain = num()?,
                "path_loss_exponent" => cfg.path_loss_exponent = num()?,
                "sweep_var" => {
                    cfg.sweep_var = value.parse().map_err(|e: String| config_err(line, e))?;
                    sweep_var_set = true;
                }
                "sweep_values" => {
                    cfg.sweep_values = value
                        .split(',')
                        .map(|v| parse_f64(line, key, v.trim()))
                        .collect::<Result<_>>()?;
                }
                "realizations" => cfg.realizations = parse_count(line, key, value)?,
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| config_err(line, format!("`seed` expects a u64, got `{value}`")))?
                }
                "schemes" => cfg.schemes = parse_schemes(value).map_err(|e| config_err(line, e))?,
                "output" => cfg.output = PathBuf::from(value),
                "tol" => cfg.tol = num()?,
                _ => {
                    let parts: Vec<&str> = key.split('.').collect();
                    let [prefix, who, field] = parts[..] else {
                        return Err(config_err(line, format!("unknown key `{key}`")));
                    };
                    let field = match (prefix, UserField::parse(field)) {
                        ("user", Some(f)) => f,
                        _ => return Err(config_err(line, format!("unknown key `{key}`"))),
                    };
                    let v = num()?;
                    if who == "*" {
                        wildcard.push((field, v));
                    } else {
                        let i: usize = who
                            .parse()
                            .ok()
                            .filter(|i| *i >= 1)
                            .ok_or_else(|| config_err(line, format!("user index must be `*` or at least 1, got `{who}`")))?;
                        cfg.user_overrides.entry(i - 1).or_default().push((field, v));
                    }
                }
            }
        }
        for (field, v) in wildcard {
            field.apply(&mut cfg.user_template, v);
        }
        if let Some((&i, _)) = cfg.user_overrides.range(users..).next() {
            if cfg.sweep_var != SweepVar::K {
                return Err(config_err(0, format!("user.{} is set but there are only {users} users", i + 1)));
            }
        }
        cfg.base.users = cfg.expand_users(users);
        if !seen.contains("sweep_values") {
            if sweep_var_set {
                return Err(config_err(0, "sweep_var is set without sweep_values"));
            }
            cfg.sweep_values = vec![cfg.base.block_length];
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
