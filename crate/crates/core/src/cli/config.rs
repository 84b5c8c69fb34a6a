//! Run configuration: a flat `key = value` file with dotted keys.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated. Every key has a default; [`RunConfig::canonical`] prints all of
//! them in a fixed order and is what the run hash is taken over.

use std::fmt::Write as _;
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::design::{KwConfig, SamplePolicy, Selection};
use crate::eligibility::TieRule;
use crate::error::{Error, Result};
use crate::model::constants::{A_HI, A_LO, E_HI, E_LO, THETA_BASELINE};
use crate::model::{ExternalModel, ModelDims, Oscillator, ParamBox, SimulationModel};
use crate::summary::{BandPair, FrequencyBand};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Oscillator,
    External {
        command: String,
        timeout_secs: f64,
        requirements: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub q_threshold: Option<f64>,
    pub tie_rule: TieRule,
    pub n2: usize,
    pub k: usize,
    pub bands: BandPair,
    pub a_lo: Vec<f64>,
    pub a_hi: Vec<f64>,
    pub e_lo: Vec<f64>,
    pub e_hi: Vec<f64>,
    pub seed: u64,
    pub model: ModelSpec,
    pub theta: Vec<f64>,
    pub kw: KwConfig,
    pub policy: SamplePolicy,
    pub study_sizes: Vec<usize>,
    pub study_seeds: Vec<u64>,
    pub generate_n1: usize,
    pub generate_e_true: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.05,
            q_threshold: None,
            tie_rule: TieRule::default(),
            n2: 1000,
            k: 1000,
            bands: BandPair::default(),
            a_lo: A_LO.to_vec(),
            a_hi: A_HI.to_vec(),
            e_lo: E_LO.to_vec(),
            e_hi: E_HI.to_vec(),
            seed: 0,
            model: ModelSpec::Oscillator,
            theta: THETA_BASELINE.to_vec(),
            kw: KwConfig::new(THETA_BASELINE.to_vec()),
            policy: SamplePolicy::FreshA,
            study_sizes: vec![10, 20, 40],
            study_seeds: vec![1, 2, 3],
            generate_n1: 50,
            generate_e_true: vec![1.2, 0.8, 0.9, 1.1],
        }
    }
}

pub const KEYS: &[&str] = &[
    "alpha",
    "q_threshold",
    "ties",
    "n2",
    "k",
    "bands.low.lo",
    "bands.low.hi",
    "bands.high.lo",
    "bands.high.hi",
    "box.a.lo",
    "box.a.hi",
    "box.e.lo",
    "box.e.hi",
    "seed",
    "model.name",
    "model.command",
    "model.timeout_secs",
    "model.requirements",
    "theta",
    "kw.c0",
    "kw.a0",
    "kw.n_max",
    "kw.exponent",
    "kw.selection",
    "kw.eps_report",
    "design.samples",
    "study.sizes",
    "study.seeds",
    "generate.n1",
    "generate.e_true",
];

fn bad(key: &str, value: &str, why: &str) -> Error {
    Error::invalid(format!("config key `{key}` = `{value}`: {why}"))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(key, v, "not a valid number"))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| num(key, s.trim())).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Defaults overlaid with a config file's contents.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("config line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::invalid(format!("config line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    /// Apply one `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("--set expects key=value, got `{kv}`")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "alpha" => self.alpha = num(key, v)?,
            "q_threshold" => {
                self.q_threshold = match v {
                    "auto" | "" => None,
                    _ => Some(num(key, v)?),
                }
            }
            "ties" => {
                self.tie_rule = match v {
                    "exact" => TieRule::Exact,
                    "sandwich" => TieRule::Sandwich,
                    _ => return Err(bad(key, v, "expected `exact` or `sandwich`")),
                }
            }
            "n2" => self.n2 = num(key, v)?,
            "k" => self.k = num(key, v)?,
            "bands.low.lo" => self.bands.low = FrequencyBand::new(num(key, v)?, self.bands.low.hi)?,
            "bands.low.hi" => self.bands.low = FrequencyBand::new(self.bands.low.lo, num(key, v)?)?,
            "bands.high.lo" => self.bands.high = FrequencyBand::new(num(key, v)?, self.bands.high.hi)?,
            "bands.high.hi" => self.bands.high = FrequencyBand::new(self.bands.high.lo, num(key, v)?)?,
            "box.a.lo" => self.a_lo = list(key, v)?,
            "box.a.hi" => self.a_hi = list(key, v)?,
            "box.e.lo" => self.e_lo = list(key, v)?,
            "box.e.hi" => self.e_hi = list(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "model.name" => match v {
                "oscillator" => self.model = ModelSpec::Oscillator,
                "external" => {
                    if self.model == ModelSpec::Oscillator {
                        self.model = ModelSpec::External {
                            command: String::new(),
                            timeout_secs: 30.0,
                            requirements: 1,
                        }
                    }
                }
                _ => return Err(bad(key, v, "expected `oscillator` or `external`")),
            },
            "model.command" | "model.timeout_secs" | "model.requirements" => {
                if let ModelSpec::Oscillator = self.model {
                    if v.is_empty() {
                        return Ok(());
                    }
                    return Err(bad(key, v, "set model.name = external first"));
                }
                if let ModelSpec::External {
                    command,
                    timeout_secs,
                    requirements,
                } = &mut self.model
                {
                    match key {
                        "model.command" => *command = v.to_string(),
                        "model.timeout_secs" => *timeout_secs = num(key, v)?,
                        _ => *requirements = num(key, v)?,
                    }
                }
            }
            "theta" => {
                self.theta = list(key, v)?;
                self.kw.theta_baseline = self.theta.clone();
            }
            "kw.c0" => self.kw.c0 = num(key, v)?,
            "kw.a0" => self.kw.a0 = num(key, v)?,
            "kw.n_max" => self.kw.n_max = num(key, v)?,
            "kw.exponent" => self.kw.exponent = num(key, v)?,
            "kw.selection" => {
                self.kw.selection = match v {
                    "last" => Selection::Last,
                    "best" => Selection::BestSeen,
                    _ => return Err(bad(key, v, "expected `last` or `best`")),
                }
            }
            "kw.eps_report" => self.kw.eps_report = num(key, v)?,
            "design.samples" => {
                self.policy = match v {
                    "frozen" => SamplePolicy::Frozen,
                    "fresh" => SamplePolicy::FreshA,
                    "recompute" => SamplePolicy::Recompute,
                    _ => return Err(bad(key, v, "expected `frozen`, `fresh` or `recompute`")),
                }
            }
            "study.sizes" => self.study_sizes = list(key, v)?,
            "study.seeds" => self.study_seeds = list(key, v)?,
            "generate.n1" => self.generate_n1 = num(key, v)?,
            "generate.e_true" => self.generate_e_true = list(key, v)?,
            _ => return Err(Error::invalid(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let (command, timeout, reqs) = match &self.model {
            ModelSpec::Oscillator => (String::new(), String::new(), String::new()),
            ModelSpec::External {
                command,
                timeout_secs,
                requirements,
            } => (command.clone(), timeout_secs.to_string(), requirements.to_string()),
        };
        Some(match key {
            "alpha" => self.alpha.to_string(),
            "q_threshold" => self.q_threshold.map_or("auto".into(), |q| q.to_string()),
            "ties" => match self.tie_rule {
                TieRule::Exact => "exact".into(),
                TieRule::Sandwich => "sandwich".into(),
            },
            "n2" => self.n2.to_string(),
            "k" => self.k.to_string(),
            "bands.low.lo" => self.bands.low.lo.to_string(),
            "bands.low.hi" => self.bands.low.hi.to_string(),
            "bands.high.lo" => self.bands.high.lo.to_string(),
            "bands.high.hi" => self.bands.high.hi.to_string(),
            "box.a.lo" => join(&self.a_lo),
            "box.a.hi" => join(&self.a_hi),
            "box.e.lo" => join(&self.e_lo),
            "box.e.hi" => join(&self.e_hi),
            "seed" => self.seed.to_string(),
            "model.name" => match self.model {
                ModelSpec::Oscillator => "oscillator".into(),
                ModelSpec::External { .. } => "external".into(),
            },
            "model.command" => command,
            "model.timeout_secs" => timeout,
            "model.requirements" => reqs,
            "theta" => join(&self.theta),
            "kw.c0" => self.kw.c0.to_string(),
            "kw.a0" => self.kw.a0.to_string(),
            "kw.n_max" => self.kw.n_max.to_string(),
            "kw.exponent" => self.kw.exponent.to_string(),
            "kw.selection" => match self.kw.selection {
                Selection::Last => "last".into(),
                Selection::BestSeen => "best".into(),
            },
            "kw.eps_report" => self.kw.eps_report.to_string(),
            "design.samples" => match self.policy {
                SamplePolicy::Frozen => "frozen".into(),
                SamplePolicy::FreshA => "fresh".into(),
                SamplePolicy::Recompute => "recompute".into(),
            },
            "study.sizes" => join(&self.study_sizes),
            "study.seeds" => join(&self.study_seeds),
            "generate.n1" => self.generate_n1.to_string(),
            "generate.e_true" => join(&self.generate_e_true),
            _ => return None,
        })
    }

    /// Every key with its value, in [`KEYS`] order.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n2 == 0 || self.k == 0 {
            return Err(Error::invalid("n2 and k must be >= 1"));
        }
        if let Some(q) = self.q_threshold {
            if !(q > 0.0) {
                return Err(Error::invalid(format!("q_threshold must be > 0, got {q}")));
            }
        }
        self.a_box()?;
        self.e_box()?;
        self.kw.validate()?;
        if let ModelSpec::External {
            command,
            timeout_secs,
            requirements,
        } = &self.model
        {
            if command.trim().is_empty() {
                return Err(Error::invalid("model.command is empty"));
            }
            if !(*timeout_secs > 0.0) || *requirements == 0 {
                return Err(Error::invalid("model.timeout_secs and model.requirements must be positive"));
            }
        }
        let dims = self.dims();
        if self.theta.len() != dims.theta {
            return Err(Error::invalid(format!(
                "theta has {} entries, the model expects {}",
                self.theta.len(),
                dims.theta
            )));
        }
        Ok(())
    }

    pub fn a_box(&self) -> Result<ParamBox> {
        ParamBox::new(self.a_lo.clone(), self.a_hi.clone())
    }

    pub fn e_box(&self) -> Result<ParamBox> {
        ParamBox::new(self.e_lo.clone(), self.e_hi.clone())
    }

    pub fn dims(&self) -> ModelDims {
        match &self.model {
            ModelSpec::Oscillator => Oscillator.dims(),
            ModelSpec::External { requirements, .. } => ModelDims {
                a: self.a_lo.len(),
                e: self.e_lo.len(),
                theta: self.theta.len(),
                requirements: *requirements,
            },
        }
    }

    pub fn build_model(&self, workers: usize) -> Result<Box<dyn SimulationModel>> {
        Ok(match &self.model {
            ModelSpec::Oscillator => Box::new(Oscillator),
            ModelSpec::External {
                command, timeout_secs, ..
            } => Box::new(ExternalModel::new(
                command,
                self.dims(),
                Duration::from_secs_f64(*timeout_secs),
                workers,
            )?),
        })
    }
}
