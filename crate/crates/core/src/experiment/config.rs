//! Experiment configuration.
//!
//! Files hold one `section.key = value` pair per line; `#` starts a comment.
//! Unknown and repeated keys are errors. `model.n_spins`, `model.coupling`,
//! `model.field` and `qpe.k` are required, everything else has a default:
//!
//! | key | default |
//! |-----|---------|
//! | `qpe.tier` | `analytic` |
//! | `wl.bins` | `min(2^k, 64)` |
//! | `wl.ln_f_init` | `1` |
//! | `wl.gamma` | `0.5` |
//! | `wl.flatness` | `0.8` |
//! | `wl.steps_per_check` | `10000` |
//! | `wl.max_rounds` | `18` |
//! | `wl.max_steps` | `100000000` |
//! | `wl.record_steps` | `false` |
//! | `metropolis.burn_in` | `5000` |
//! | `metropolis.total_steps` | `auto` (matched to the Wang-Landau budget) |
//! | `metropolis.beta_min` | `0.05` |
//! | `metropolis.beta_max` | `3` |
//! | `metropolis.beta_step` | `0.05` |
//! | `metropolis.beta_cutoff` | `metropolis.beta_max` |
//! | `metropolis.write_traces` | `false` |
//! | `run.runs` | `20` |
//! | `run.base_seed` | `1` |
//! | `run.output_dir` | `out` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metropolis::MetropolisConfig;
use crate::qpe::{QpeConfig, Tier, MAX_PHASE_QUBITS};
use crate::spin_hamiltonian::{energy_window, EnergyWindow, HamiltonianSpec, MAX_DENSE_SPINS};
use crate::statevector::MAX_QUBITS;
use crate::thermo::beta_grid;
use crate::wl_core::{BinSpec, WlConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct WlParams {
    pub bins: usize,
    pub ln_f_init: f64,
    pub gamma: f64,
    pub flatness: f64,
    pub steps_per_check: u64,
    pub max_rounds: u32,
    pub max_steps: u64,
    pub record_steps: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisParams {
    pub burn_in: u64,
    /// Steps per chain including burn-in; `None` matches the Wang-Landau budget.
    pub total_steps: Option<u64>,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_step: f64,
    pub beta_cutoff: f64,
    pub write_traces: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: HamiltonianSpec,
    pub k: usize,
    pub tier: Tier,
    pub wl: WlParams,
    pub metropolis: MetropolisParams,
    pub runs: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "model.n_spins",
    "model.coupling",
    "model.field",
    "qpe.k",
    "qpe.tier",
    "wl.bins",
    "wl.ln_f_init",
    "wl.gamma",
    "wl.flatness",
    "wl.steps_per_check",
    "wl.max_rounds",
    "wl.max_steps",
    "wl.record_steps",
    "metropolis.burn_in",
    "metropolis.total_steps",
    "metropolis.beta_min",
    "metropolis.beta_max",
    "metropolis.beta_step",
    "metropolis.beta_cutoff",
    "metropolis.write_traces",
    "run.runs",
    "run.base_seed",
    "run.output_dir",
];

/// Splits flat `key = value` text into a map, rejecting malformed lines and
/// repeated keys.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: repeated key '{key}'", lineno + 1)));
        }
    }
    Ok(map)
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::Config(format!("{key}: cannot parse '{v}': {e}"))),
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.take(key)?
            .ok_or_else(|| Error::Config(format!("{key}: required key missing")))
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults: four spins, `J = 2`, `h = 1`, `k = 8`, analytic tier.
    pub fn desk() -> Self {
        Self::parse("model.n_spins = 4\nmodel.coupling = 2\nmodel.field = 1\nqpe.k = 8\n")
            .expect("built-in configuration is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let map = parse_key_values(text)?;
        if let Some(bad) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key '{bad}'")));
        }
        let mut f = Fields(map);
        let model = HamiltonianSpec {
            n_spins: f.require("model.n_spins")?,
            coupling: f.require("model.coupling")?,
            field: f.require("model.field")?,
        };
        let k: usize = f.require("qpe.k")?;
        let tier = f.take("qpe.tier")?.unwrap_or(Tier::Analytic);
        let wl = WlParams {
            bins: f.take("wl.bins")?.unwrap_or_else(|| BinSpec::default_count(k)),
            ln_f_init: f.take("wl.ln_f_init")?.unwrap_or(1.0),
            gamma: f.take("wl.gamma")?.unwrap_or(0.5),
            flatness: f.take("wl.flatness")?.unwrap_or(0.8),
            steps_per_check: f.take("wl.steps_per_check")?.unwrap_or(10_000),
            max_rounds: f.take("wl.max_rounds")?.unwrap_or(18),
            max_steps: f.take("wl.max_steps")?.unwrap_or(100_000_000),
            record_steps: f.take("wl.record_steps")?.unwrap_or(false),
        };
        let total_steps = match f.take::<String>("metropolis.total_steps")? {
            None => None,
            Some(v) if v == "auto" => None,
            Some(v) => Some(v.parse::<u64>().map_err(|e| {
                Error::Config(format!("metropolis.total_steps: cannot parse '{v}': {e}"))
            })?),
        };
        let beta_max = f.take("metropolis.beta_max")?.unwrap_or(3.0);
        let metropolis = MetropolisParams {
            burn_in: f.take("metropolis.burn_in")?.unwrap_or(5000),
            total_steps,
            beta_min: f.take("metropolis.beta_min")?.unwrap_or(0.05),
            beta_max,
            beta_step: f.take("metropolis.beta_step")?.unwrap_or(0.05),
            beta_cutoff: f.take("metropolis.beta_cutoff")?.unwrap_or(beta_max),
            write_traces: f.take("metropolis.write_traces")?.unwrap_or(false),
        };
        let cfg = Self {
            model,
            k,
            tier,
            wl,
            metropolis,
            runs: f.take("run.runs")?.unwrap_or(20),
            base_seed: f.take("run.base_seed")?.unwrap_or(1),
            output_dir: f.take::<String>("run.output_dir")?.unwrap_or_else(|| "out".into()).into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model
            .validate()
            .map_err(|e| Error::Config(format!("model: {e}")))?;
        if self.model.n_spins > MAX_DENSE_SPINS {
            return Err(Error::Config(format!(
                "model.n_spins = {} exceeds the {MAX_DENSE_SPINS}-spin dense diagonalization guard",
                self.model.n_spins
            )));
        }
        if self.k == 0 || self.k > MAX_PHASE_QUBITS {
            return Err(Error::Config(format!(
                "qpe.k = {} must lie in 1..={MAX_PHASE_QUBITS}",
                self.k
            )));
        }
        let qubits = self.tier.qubits(self.model.n_spins, self.k);
        if self.tier != Tier::Analytic && qubits > MAX_QUBITS {
            return Err(Error::Config(format!(
                "qpe.tier = {} needs {qubits} qubits for N = {}, k = {}, above the {MAX_QUBITS}-qubit statevector guard",
                self.tier, self.model.n_spins, self.k
            )));
        }
        self.wl_config()?
            .validate()
            .map_err(|e| Error::Config(format!("wl: {e}")))?;
        let m = &self.metropolis;
        if let Some(total) = m.total_steps {
            if total <= m.burn_in {
                return Err(Error::Config(format!(
                    "metropolis.total_steps = {total} must exceed metropolis.burn_in = {}",
                    m.burn_in
                )));
            }
        }
        let grid = self.beta_grid()?;
        if m.beta_cutoff < grid[0] {
            return Err(Error::Config(format!(
                "metropolis.beta_cutoff = {} lies below metropolis.beta_min = {}",
                m.beta_cutoff, m.beta_min
            )));
        }
        if self.runs == 0 {
            return Err(Error::Config("run.runs must be positive".into()));
        }
        Ok(())
    }

    pub fn window(&self) -> EnergyWindow {
        energy_window(&self.model)
    }

    pub fn qpe_config(&self) -> Result<QpeConfig> {
        QpeConfig::new(self.k, self.window(), self.tier)
    }

    pub fn bins(&self) -> Result<BinSpec> {
        BinSpec::new(self.wl.bins, self.window()).map_err(|e| Error::Config(format!("wl.bins: {e}")))
    }

    pub fn wl_config(&self) -> Result<WlConfig> {
        let w = &self.wl;
        Ok(WlConfig {
            bins: self.bins()?,
            ln_f_init: w.ln_f_init,
            gamma: w.gamma,
            flatness: w.flatness,
            steps_per_check: w.steps_per_check,
            max_rounds: w.max_rounds,
            max_steps: w.max_steps,
            record_steps: w.record_steps,
        })
    }

    pub fn beta_grid(&self) -> Result<Vec<f64>> {
        let m = &self.metropolis;
        beta_grid(m.beta_min, m.beta_max, m.beta_step).map_err(|e| Error::Config(format!("metropolis: {e}")))
    }

    /// Chain settings at `beta` with `total_steps` per chain.
    pub fn metropolis_config(&self, beta: f64, total_steps: u64) -> Result<MetropolisConfig> {
        MetropolisConfig::new(beta, total_steps, self.metropolis.burn_in)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|r| self.base_seed + r).collect()
    }

    /// Every key with its resolved value, in the file grammar.
    pub fn to_text(&self) -> String {
        let m = &self.metropolis;
        let w = &self.wl;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("model.n_spins", self.model.n_spins.to_string());
        put("model.coupling", self.model.coupling.to_string());
        put("model.field", self.model.field.to_string());
        put("qpe.k", self.k.to_string());
        put("qpe.tier", self.tier.to_string());
        put("wl.bins", w.bins.to_string());
        put("wl.ln_f_init", w.ln_f_init.to_string());
        put("wl.gamma", w.gamma.to_string());
        put("wl.flatness", w.flatness.to_string());
        put("wl.steps_per_check", w.steps_per_check.to_string());
        put("wl.max_rounds", w.max_rounds.to_string());
        put("wl.max_steps", w.max_steps.to_string());
        put("wl.record_steps", w.record_steps.to_string());
        put("metropolis.burn_in", m.burn_in.to_string());
        put(
            "metropolis.total_steps",
            m.total_steps.map_or_else(|| "auto".to_string(), |t| t.to_string()),
        );
        put("metropolis.beta_min", m.beta_min.to_string());
        put("metropolis.beta_max", m.beta_max.to_string());
        put("metropolis.beta_step", m.beta_step.to_string());
        put("metropolis.beta_cutoff", m.beta_cutoff.to_string());
        put("metropolis.write_traces", m.write_traces.to_string());
        put("run.runs", self.runs.to_string());
        put("run.base_seed", self.base_seed.to_string());
        put("run.output_dir", self.output_dir.display().to_string());
        out
    }
}
