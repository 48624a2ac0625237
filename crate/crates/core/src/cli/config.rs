//! Flat `key = value` run configuration.
//!
//! Lines hold one assignment each, `#` starts a comment, and keys use dotted
//! sections (`grid.delta.min`). Angles may be written as multiples of pi:
//! `0.45pi`, `pi/3`, `2pi/3`, `-pi`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::dynamics::PopulationState;
use crate::error::{Error, Result};
use crate::model::{DetuningPoint, SystemParams};
use crate::oracle::OracleConfig;
use crate::sweep::{Axis, Curve, SweepGrid};

pub const KEYS: &[&str] = &[
    "gamma",
    "kappa",
    "g",
    "cooperativity",
    "omega_p_drive",
    "eta",
    "phi",
    "varphi",
    "d0",
    "point.delta",
    "point.delta_cav",
    "grid.delta.min",
    "grid.delta.max",
    "grid.delta.n",
    "grid.delta_cav.min",
    "grid.delta_cav.max",
    "grid.delta_cav.n",
    "profile.curve",
    "profile.delta",
    "profile.min",
    "profile.max",
    "profile.n",
    "evolve.initial_level",
    "evolve.initial_mean",
    "evolve.truncation",
    "evolve.t_end",
    "evolve.points",
    "oracle.n_cavity",
    "oracle.n_motion",
    "oracle.include_recoil",
    "oracle.recoil_factor",
    "oracle.tol",
    "oracle.exact_cosine",
    "oracle.max_hilbert_dim",
    "oracle.krylov_dim",
    "output.json",
    "output.csv",
    "output.meta",
    "output.trajectory",
    "output.profile",
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    /// Source line, 0 for command-line overrides.
    line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, Entry>,
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn check_key(key: &str, line: usize) -> Result<()> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(config_err(line, format!("unknown key `{key}`")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(config_err(line, format!("expected `key = value`, found `{body}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            check_key(key, line)?;
            if value.is_empty() {
                return Err(config_err(line, format!("missing value for `{key}`")));
            }
            if let Some(prev) = cfg.entries.get(key) {
                return Err(config_err(
                    line,
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
            cfg.entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
        Ok(cfg)
    }

    /// Applies `--key=value` flags, which replace values from the file.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, flags: &[S]) -> Result<()> {
        for flag in flags {
            let flag = flag.as_ref();
            let Some((key, value)) = flag.strip_prefix("--").and_then(|f| f.split_once('=')) else {
                return Err(config_err(0, format!("override `{flag}` is not of the form --key=value")));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        check_key(key, 0)?;
        if value.is_empty() {
            return Err(config_err(0, format!("missing value for `{key}`")));
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: 0,
            },
        );
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, e)| format!("{k} = {}\n", e.value))
            .collect()
    }

    /// Keys and raw values, without source lines.
    pub fn values(&self) -> BTreeMap<&str, &str> {
        self.entries
            .iter()
            .map(|(k, e)| (k.as_str(), e.value.as_str()))
            .collect()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn typed<T>(&self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .ok_or_else(|| config_err(e.line, format!("`{key}`: expected {what}, found `{}`", e.value))),
        }
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>> {
        self.typed(key, "a number", parse_number)
    }

    pub fn integer(&self, key: &str) -> Result<Option<usize>> {
        self.typed(key, "a non-negative integer", |s| s.parse().ok())
    }

    pub fn flag(&self, key: &str) -> Result<Option<bool>> {
        self.typed(key, "true or false", |s| s.parse().ok())
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn require<T>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| config_err(0, format!("missing required key `{key}`")))
    }

    pub fn params(&self) -> Result<SystemParams> {
        let d = SystemParams::default();
        let mut p = SystemParams {
            gamma: self.number("gamma")?.unwrap_or(d.gamma),
            kappa: self.number("kappa")?.unwrap_or(d.kappa),
            g: self.number("g")?.unwrap_or(d.g),
            omega_p_drive: self.number("omega_p_drive")?.unwrap_or(d.omega_p_drive),
            eta: self.number("eta")?.unwrap_or(d.eta),
            phi: self.number("phi")?.unwrap_or(d.phi),
            varphi: self.number("varphi")?.unwrap_or(d.varphi),
            d0: self.number("d0")?.unwrap_or(d.d0),
        };
        if let Some(c) = self.number("cooperativity")? {
            let line = self.line_of("cooperativity");
            if self.contains("g") {
                return Err(config_err(line, "set either `g` or `cooperativity`, not both"));
            }
            p = p
                .with_cooperativity(c)
                .map_err(|e| config_err(line, format!("`cooperativity`: {e}")))?;
        }
        p.validate().map_err(|e| config_err(0, e.to_string()))?;
        Ok(p)
    }

    pub fn point(&self) -> Result<DetuningPoint> {
        Ok(DetuningPoint::new(
            self.require("point.delta", self.number("point.delta")?)?,
            self.require("point.delta_cav", self.number("point.delta_cav")?)?,
        ))
    }

    fn axis(&self, prefix: &str) -> Result<Axis> {
        let key = |s: &str| format!("{prefix}.{s}");
        Ok(Axis::new(
            self.require(&key("min"), self.number(&key("min"))?)?,
            self.require(&key("max"), self.number(&key("max"))?)?,
            self.require(&key("n"), self.integer(&key("n"))?)?,
        ))
    }

    pub fn grid(&self) -> Result<SweepGrid> {
        let grid = SweepGrid {
            delta: self.axis("grid.delta")?,
            delta_cav: self.axis("grid.delta_cav")?,
            params: self.params()?,
        };
        grid.validate().map_err(|e| config_err(0, e.to_string()))?;
        Ok(grid)
    }

    /// Curve and Delta samples of the optional profile block.
    pub fn profile(&self) -> Result<Option<(Curve, Vec<f64>)>> {
        let Some(kind) = self.text("profile.curve") else {
            return Ok(None);
        };
        let curve = match kind {
            "resonance" => Curve::Resonance,
            "interference" => Curve::Interference,
            "fixed_delta" => Curve::FixedDelta(self.require("profile.delta", self.number("profile.delta")?)?),
            other => {
                return Err(config_err(
                    self.line_of("profile.curve"),
                    format!("`profile.curve`: expected resonance, interference or fixed_delta, found `{other}`"),
                ))
            }
        };
        let axis = self.axis("profile")?;
        if axis.n < 2 || !(axis.max > axis.min) {
            return Err(config_err(0, "profile needs n >= 2 and max > min"));
        }
        Ok(Some((curve, axis.values())))
    }

    /// Initial phonon distribution: thermal when `evolve.initial_mean` is
    /// set, otherwise the Fock state `evolve.initial_level` (default 5).
    pub fn initial_state(&self, mean_inf: Option<f64>) -> Result<PopulationState> {
        let mean = self.number("evolve.initial_mean")?;
        let level = self.integer("evolve.initial_level")?;
        if mean.is_some() && level.is_some() {
            return Err(config_err(
                self.line_of("evolve.initial_mean"),
                "set either `evolve.initial_mean` or `evolve.initial_level`, not both",
            ));
        }
        let m0 = mean.unwrap_or(level.unwrap_or(5) as f64);
        let truncation = match self.integer("evolve.truncation")? {
            Some(t) => t,
            None => crate::dynamics::default_truncation(m0, mean_inf),
        };
        let state = match mean {
            Some(m) => PopulationState::thermal(m, truncation),
            None => PopulationState::fock(level.unwrap_or(5), truncation),
        };
        state.map_err(|e| config_err(0, e.to_string()))
    }

    pub fn oracle(&self) -> Result<OracleConfig> {
        let d = OracleConfig::default();
        let include_recoil = self.flag("oracle.include_recoil")?.unwrap_or(d.include_recoil);
        let c = OracleConfig {
            n_cavity: self.integer("oracle.n_cavity")?.unwrap_or(d.n_cavity),
            n_motion: self.integer("oracle.n_motion")?.unwrap_or(d.n_motion),
            include_recoil,
            recoil_factor: self.number("oracle.recoil_factor")?.unwrap_or(d.recoil_factor),
            tol: self.number("oracle.tol")?.unwrap_or(d.tol),
            exact_cosine: self.flag("oracle.exact_cosine")?.unwrap_or(d.exact_cosine),
            max_hilbert_dim: self.integer("oracle.max_hilbert_dim")?.unwrap_or(d.max_hilbert_dim),
            krylov_dim: self.integer("oracle.krylov_dim")?.unwrap_or(d.krylov_dim),
        };
        c.validate().map_err(|e| config_err(0, e.to_string()))?;
        Ok(c)
    }
}

/// Parses a decimal number or a multiple of pi.
pub fn parse_number(s: &str) -> Option<f64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(at) = s.find("pi") else {
        return s.parse().ok();
    };
    let (head, tail) = (&s[..at], &s[at + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let coef = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().ok()?,
    };
    let div = match tail {
        "" => 1.0,
        t => t.strip_prefix('/')?.parse::<f64>().ok()?,
    };
    Some(coef * PI / div)
}
