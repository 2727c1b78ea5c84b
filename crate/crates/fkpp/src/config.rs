//! Plain-text `key=value` run configuration shared by the CLI commands.
//!
//! Recognized keys:
//!
//! ```text
//! drift=0.0                     # Lévy linear drift b
//! sigma=1.0                     # diffusion scale
//! jump_intensity=0.0            # Poisson jump rate
//! jumps=0.5:0.25,1.0:0.75       # size:prob pairs
//! theta_max=50.0                # cgf evaluation cap
//! offspring=0:0.25,2:0.75       # offspring pmf k:p pairs
//! x_min=-15.0  x_max=15.0  m=2001
//! t=1.0  x=0.0
//! tol=0.02  n_max=4096
//! n_paths=100000  j_steps=200
//! n_runs=100000  cap=1000000  t_long=30.0
//! seed=1
//! ```
//!
//! Lines starting with `#` and blank lines are ignored. Unknown keys are
//! rejected so typos fail loudly.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::GridFn;
use crate::levy::{self, LevyModel};
use crate::reaction::OffspringLaw;

const KNOWN_KEYS: &[&str] = &[
    "drift",
    "sigma",
    "jump_intensity",
    "jumps",
    "theta_max",
    "offspring",
    "x_min",
    "x_max",
    "m",
    "t",
    "x",
    "tol",
    "n_max",
    "n_paths",
    "j_steps",
    "n_runs",
    "cap",
    "t_long",
    "seed",
];

/// Parsed key–value configuration with typed accessors and defaults.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {line:?}", lineno + 1))
            })?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key {key:?}", lineno + 1)));
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(RunConfig { entries })
    }

    /// Flags win over file entries.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{key}={v}: not a number"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{key}={v}: not an integer"))),
        }
    }

    /// Lévy model from `drift`/`sigma`/`jump_intensity`/`jumps`/`theta_max`;
    /// defaults to standard Brownian motion.
    pub fn model(&self) -> Result<LevyModel> {
        let drift = self.f64_or("drift", 0.0)?;
        let sigma = self.f64_or("sigma", 1.0)?;
        let intensity = self.f64_or("jump_intensity", 0.0)?;
        let jumps = match self.entries.get("jumps") {
            None => Vec::new(),
            Some(v) => parse_pairs(v, "jumps")?,
        };
        let theta_max = self.f64_or("theta_max", levy::DEFAULT_THETA_MAX)?;
        LevyModel::new(drift, sigma, intensity, jumps)?.with_theta_max(theta_max)
    }

    /// Offspring law from `offspring=k:p,...`; defaults to dyadic.
    pub fn offspring(&self) -> Result<OffspringLaw> {
        match self.entries.get("offspring") {
            None => Ok(OffspringLaw::dyadic()),
            Some(v) => {
                let pairs = parse_pairs(v, "offspring")?;
                let pmf = pairs
                    .into_iter()
                    .map(|(k, p)| {
                        if k < 0.0 || k.fract() != 0.0 {
                            Err(Error::Config(format!(
                                "offspring count {k} must be a nonneg integer"
                            )))
                        } else {
                            Ok((k as u32, p))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                OffspringLaw::new(pmf)
            }
        }
    }

    /// Heaviside initial condition on the configured grid.
    pub fn grid(&self) -> Result<GridFn> {
        GridFn::heaviside(self.x_min()?, self.x_max()?, self.m()?)
    }

    pub fn x_min(&self) -> Result<f64> {
        self.f64_or("x_min", -15.0)
    }

    pub fn x_max(&self) -> Result<f64> {
        self.f64_or("x_max", 15.0)
    }

    pub fn m(&self) -> Result<usize> {
        self.usize_or("m", 2001)
    }

    pub fn t(&self) -> Result<f64> {
        self.f64_or("t", 1.0)
    }

    pub fn x(&self) -> Result<f64> {
        self.f64_or("x", 0.0)
    }

    pub fn tol(&self) -> Result<f64> {
        self.f64_or("tol", 0.02)
    }

    pub fn n_max(&self) -> Result<usize> {
        self.usize_or("n_max", 4096)
    }

    pub fn n_paths(&self) -> Result<usize> {
        self.usize_or("n_paths", 100_000)
    }

    pub fn j_steps(&self) -> Result<usize> {
        self.usize_or("j_steps", 200)
    }

    pub fn n_runs(&self) -> Result<usize> {
        self.usize_or("n_runs", 100_000)
    }

    pub fn cap(&self) -> Result<usize> {
        self.usize_or("cap", 1_000_000)
    }

    pub fn t_long(&self) -> Result<f64> {
        self.f64_or("t_long", 30.0)
    }

    pub fn seed(&self) -> Result<u64> {
        match self.entries.get("seed") {
            None => Ok(1),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("seed={v}: not an integer"))),
        }
    }
}

/// `a:b,c:d` pair list.
fn parse_pairs(text: &str, key: &str) -> Result<Vec<(f64, f64)>> {
    text.split(',')
        .map(|item| {
            let (a, b) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("{key}: expected a:b pairs, got {item:?}")))?;
            let a = a
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: bad number {a:?}")))?;
            let b = b
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: bad number {b:?}")))?;
            Ok((a, b))
        })
        .collect()
}
