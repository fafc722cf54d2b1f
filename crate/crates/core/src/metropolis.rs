//! Metropolis chains over measured energies at fixed β.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::qpe::{EnergySampler, QpeConfig, QpeSampler};
use crate::spin_hamiltonian::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetropolisConfig {
    pub beta: f64,
    pub total_steps: u64,
    pub burn_in: u64,
}

impl MetropolisConfig {
    pub fn new(beta: f64, total_steps: u64, burn_in: u64) -> Result<Self> {
        let cfg = Self {
            beta,
            total_steps,
            burn_in,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("β must be finite and ≥ 0, got {}", self.beta)));
        }
        if self.total_steps == 0 || self.burn_in >= self.total_steps {
            return Err(Error::Config(format!(
                "need 0 ≤ burn_in < total_steps, got burn_in={} total_steps={}",
                self.burn_in, self.total_steps
            )));
        }
        Ok(())
    }

    pub fn recorded_steps(&self) -> u64 {
        self.total_steps - self.burn_in
    }
}

/// Post-burn-in energies and the eigenstate index behind each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyTrace {
    pub energies: Vec<f64>,
    pub eigen_indices: Vec<usize>,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// One energy per line under a `# beta seed` header.
    pub fn to_text(&self, beta: f64, seed: u64) -> String {
        let mut out = format!("# beta seed\n# {beta} {seed}\n");
        for e in &self.energies {
            let _ = writeln!(out, "{e}");
        }
        out
    }
}

/// `u < min(1, exp(−β(E_j − E_i)))`.
pub fn metro_accept(e_i: f64, e_j: f64, beta: f64, u: f64) -> bool {
    u < (-beta * (e_j - e_i)).exp().min(1.0)
}

pub fn run_metropolis_with<S: EnergySampler, R: Rng + ?Sized>(
    sampler: &S,
    cfg: &MetropolisConfig,
    rng: &mut R,
) -> Result<EnergyTrace> {
    cfg.validate()?;
    let mut current = sampler.sample(rng)?;
    let n = cfg.recorded_steps() as usize;
    let mut trace = EnergyTrace {
        energies: Vec::with_capacity(n),
        eigen_indices: Vec::with_capacity(n),
    };
    for step in 0..cfg.total_steps {
        let proposal = sampler.sample(rng)?;
        if metro_accept(current.energy, proposal.energy, cfg.beta, rng.random::<f64>()) {
            current = proposal;
        }
        if step >= cfg.burn_in {
            trace.energies.push(current.energy);
            trace.eigen_indices.push(current.eigen_index);
        }
    }
    Ok(trace)
}

pub fn run_quantum_metropolis<R: Rng + ?Sized>(
    spectrum: &Spectrum,
    qpe_cfg: &QpeConfig,
    cfg: &MetropolisConfig,
    rng: &mut R,
) -> Result<EnergyTrace> {
    let sampler = QpeSampler::new(spectrum, *qpe_cfg)?;
    run_metropolis_with(&sampler, cfg, rng)
}

/// `(U, Cv)` with `U = ⟨E⟩` and `Cv = β²(⟨E²⟩ − ⟨E⟩²)`.
pub fn moments(trace: &EnergyTrace, beta: f64) -> Result<(f64, f64)> {
    if trace.is_empty() {
        return Err(Error::invalid("empty energy trace"));
    }
    let n = trace.len() as f64;
    let u = trace.energies.iter().sum::<f64>() / n;
    let var = trace.energies.iter().map(|e| (e - u).powi(2)).sum::<f64>() / n;
    Ok((u, beta * beta * var))
}
