//! Phase estimation as an energy sampler.
//!
//! The evolution is `U = exp(+i(H − e_lo·I)t)` with
//! `t = 2π(1 − 2^{-k}) / (e_hi − e_lo)`, so an eigenvalue `E` in the window has
//! eigenphase `φ = (E − e_lo)(1 − 2^{-k}) / (e_hi − e_lo) ∈ [0, 1 − 2^{-k}]` and
//! there is no wraparound. Outcome `m` of the `k`-qubit phase register is read
//! back as `E = e_lo + (m / 2^k)(e_hi − e_lo) / (1 − 2^{-k})`, which puts `e_lo`
//! and `e_hi` exactly on the outcome lattice.
//!
//! Three tiers produce the same joint law of `(eigen_index, outcome)`:
//! - `pair_statevector`: system and copy registers in the maximally entangled
//!   state, controlled-`U^(2^j)` ladder on the system, inverse QFT, measurement;
//!   the eigen index is then read by measuring the system in the eigenbasis.
//! - `eigen_statevector`: a uniformly drawn eigenvector is loaded into the
//!   system register and the same circuit runs without the copy register.
//! - `analytic`: uniform eigen index, outcome drawn from the closed-form
//!   phase-estimation distribution.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::spin_hamiltonian::{EnergyWindow, Spectrum};
use crate::statevector::{Layout, StateVector, Unitary, MAX_QUBITS};

/// Largest phase register accepted by [`QpeConfig`].
pub const MAX_PHASE_QUBITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tier {
    PairStatevector,
    EigenStatevector,
    Analytic,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::PairStatevector, Tier::EigenStatevector, Tier::Analytic];

    pub fn name(&self) -> &'static str {
        match self {
            Tier::PairStatevector => "pair_statevector",
            Tier::EigenStatevector => "eigen_statevector",
            Tier::Analytic => "analytic",
        }
    }

    /// Qubits the tier simulates for `n_spins` spins and `k` phase qubits.
    pub fn qubits(&self, n_spins: usize, k: usize) -> usize {
        match self {
            Tier::PairStatevector => 2 * n_spins + k,
            Tier::EigenStatevector => n_spins + k,
            Tier::Analytic => 0,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tier::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown tier `{s}` (expected pair_statevector, eigen_statevector or analytic)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpeConfig {
    k: usize,
    window: EnergyWindow,
    tier: Tier,
}

impl QpeConfig {
    pub fn new(k: usize, window: EnergyWindow, tier: Tier) -> Result<Self> {
        if k == 0 || k > MAX_PHASE_QUBITS {
            return Err(Error::invalid(format!(
                "phase register width must be in 1..={MAX_PHASE_QUBITS}, got {k}"
            )));
        }
        Ok(Self { k, window, tier })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn window(&self) -> EnergyWindow {
        self.window
    }

    pub fn tier(&self) -> Tier {
        self.tier
    }

    pub fn with_tier(self, tier: Tier) -> Self {
        Self { tier, ..self }
    }

    pub fn outcomes(&self) -> usize {
        1 << self.k
    }

    fn margin(&self) -> f64 {
        1.0 - (self.k as f64).exp2().recip()
    }

    /// Evolution time `t` in radians per energy unit.
    pub fn evolution_time(&self) -> f64 {
        2.0 * PI * self.margin() / self.window.width()
    }

    /// Energy distance between neighbouring outcomes.
    pub fn lattice_spacing(&self) -> f64 {
        self.window.width() / (self.margin() * self.outcomes() as f64)
    }
}

/// One measured proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpeSample {
    pub outcome: usize,
    pub energy: f64,
    pub eigen_index: usize,
}

/// Eigenphase of `E` in turns.
pub fn phase_of_energy(energy: f64, cfg: &QpeConfig) -> Result<f64> {
    let w = cfg.window();
    let tol = 1e-9 * w.width().max(1.0);
    if !(energy >= w.e_lo - tol && energy <= w.e_hi + tol) {
        return Err(Error::OutsideWindow {
            energy,
            lo: w.e_lo,
            hi: w.e_hi,
        });
    }
    let e = energy.clamp(w.e_lo, w.e_hi);
    Ok((e - w.e_lo) * cfg.margin() / w.width())
}

/// Energy read from phase-register outcome `m`.
pub fn energy_of_outcome(m: usize, cfg: &QpeConfig) -> Result<f64> {
    if m >= cfg.outcomes() {
        return Err(Error::invalid(format!(
            "outcome {m} outside 0..{}",
            cfg.outcomes()
        )));
    }
    let w = cfg.window();
    if m == cfg.outcomes() - 1 {
        return Ok(w.e_hi);
    }
    Ok(w.e_lo + (m as f64 / cfg.outcomes() as f64) * w.width() / cfg.margin())
}

/// Closed-form outcome law of `k`-qubit phase estimation on eigenphase `phi`:
/// `P(m) = sin²(2^k π Δ) / (4^k sin²(π Δ))`, `Δ = φ − m/2^k`.
pub fn analytic_outcome_distribution(phi: f64, k: usize) -> Vec<f64> {
    let n = 1usize << k;
    let nf = n as f64;
    (0..n)
        .map(|m| {
            let delta = phi - m as f64 / nf;
            let den = (PI * delta).sin();
            if den.abs() < 1e-15 {
                1.0
            } else {
                let ratio = (nf * PI * delta).sin() / (nf * den);
                ratio * ratio
            }
        })
        .collect()
}

/// Anything that proposes a measured energy together with the eigenstate it
/// came from. The Wang-Landau and Metropolis drivers are generic over it.
pub trait EnergySampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<QpeSample>;
}

/// The controlled-`U^(2^j)` layer of phase estimation.
#[derive(Debug, Clone)]
pub enum EvolutionLadder {
    /// Dense powers of `U` built by repeated squaring, applied as controlled
    /// unitaries on the system register.
    Dense(Vec<Unitary>),
    /// The same ladder conjugated into the eigenbasis: `c-U^(2^j) = (I⊗V)
    /// c-D^(2^j) (I⊗V†)`. The inner `V V†` pairs cancel, leaving one basis
    /// change, `k` controlled diagonals, and a trailing `V` that is not applied
    /// because it acts on the system register only and cannot change phase
    /// register statistics. The system register is left in the eigenframe.
    EigenFrame {
        to_frame: Unitary,
        diagonals: Vec<Vec<Complex64>>,
    },
}

impl EvolutionLadder {
    pub fn dense(spectrum: &Spectrum, cfg: &QpeConfig) -> Result<Self> {
        let v = eigenvectors(spectrum)?;
        let t = cfg.evolution_time();
        let e_lo = cfg.window().e_lo;
        let vc = v.map(|x| Complex64::new(x, 0.0));
        // U = V e^{i(Λ - e_lo)t} Vᵀ
        let mut scaled = vc.clone();
        for (c, &e) in spectrum.eigenvalues.iter().enumerate() {
            let p = Complex64::from_polar(1.0, (e - e_lo) * t);
            scaled.column_mut(c).iter_mut().for_each(|z| *z *= p);
        }
        let u = Unitary::new(scaled * vc.adjoint())?;
        let mut powers = Vec::with_capacity(cfg.k());
        powers.push(u);
        for j in 1..cfg.k() {
            let next = powers[j - 1].squared()?;
            powers.push(next);
        }
        Ok(EvolutionLadder::Dense(powers))
    }

    pub fn eigen_frame(spectrum: &Spectrum, cfg: &QpeConfig) -> Result<Self> {
        let v = eigenvectors(spectrum)?;
        let t = cfg.evolution_time();
        let e_lo = cfg.window().e_lo;
        let diagonals = (0..cfg.k())
            .map(|j| {
                let power = (j as f64).exp2();
                spectrum
                    .eigenvalues
                    .iter()
                    .map(|&e| {
                        let angle = ((e - e_lo) * t * power).rem_euclid(2.0 * PI);
                        Complex64::from_polar(1.0, angle)
                    })
                    .collect()
            })
            .collect();
        Ok(EvolutionLadder::EigenFrame {
            to_frame: Unitary::from_real(&v.transpose())?,
            diagonals,
        })
    }

    pub fn apply(&self, state: &mut StateVector, system: usize, phase: usize) -> Result<()> {
        self.enter_frame(state, system)?;
        self.apply_controlled(state, system, phase)
    }

    /// The uncontrolled basis change on the system register; a no-op for `Dense`.
    pub fn enter_frame(&self, state: &mut StateVector, system: usize) -> Result<()> {
        if let EvolutionLadder::EigenFrame { to_frame, .. } = self {
            state.apply_unitary(system, to_frame)?;
        }
        Ok(())
    }

    /// The controlled gates alone, after [`EvolutionLadder::enter_frame`].
    pub fn apply_controlled(&self, state: &mut StateVector, system: usize, phase: usize) -> Result<()> {
        match self {
            EvolutionLadder::Dense(powers) => {
                for (j, u) in powers.iter().enumerate() {
                    let control = state.qubit(phase, j);
                    state.apply_controlled_unitary(control, system, u)?;
                }
            }
            EvolutionLadder::EigenFrame { diagonals, .. } => {
                for (j, d) in diagonals.iter().enumerate() {
                    let control = state.qubit(phase, j);
                    state.apply_controlled_diagonal(control, system, d)?;
                }
            }
        }
        Ok(())
    }
}

fn eigenvectors(spectrum: &Spectrum) -> Result<&DMatrix<f64>> {
    spectrum
        .eigenvectors
        .as_ref()
        .ok_or_else(|| Error::invalid("statevector tiers need eigenvectors in the spectrum"))
}

enum Engine {
    Pair {
        ladder: EvolutionLadder,
        to_eigenbasis: Unitary,
    },
    Eigen {
        ladder: EvolutionLadder,
        vectors: Vec<Vec<Complex64>>,
    },
    Analytic {
        cdfs: Vec<Vec<f64>>,
    },
}

/// Phase-estimation sampler over a fixed spectrum. All caches are built in
/// [`QpeSampler::new`] and read-only afterwards, so one sampler can serve
/// concurrent chains that each own their random stream.
pub struct QpeSampler<'a> {
    spectrum: &'a Spectrum,
    cfg: QpeConfig,
    engine: Engine,
}

impl<'a> QpeSampler<'a> {
    pub fn new(spectrum: &'a Spectrum, cfg: QpeConfig) -> Result<Self> {
        let n_spins = spectrum
            .n_spins()
            .ok_or_else(|| Error::invalid("spectrum dimension is not a power of two"))?;
        if let Some(&e) = spectrum
            .eigenvalues
            .iter()
            .find(|&&e| phase_of_energy(e, &cfg).is_err())
        {
            let w = cfg.window();
            return Err(Error::OutsideWindow {
                energy: e,
                lo: w.e_lo,
                hi: w.e_hi,
            });
        }
        let qubits = cfg.tier().qubits(n_spins, cfg.k());
        if qubits > MAX_QUBITS {
            return Err(Error::SizeGuard {
                what: "phase-estimation circuit",
                requested: qubits,
                limit: MAX_QUBITS,
            });
        }
        let engine = match cfg.tier() {
            Tier::PairStatevector => Engine::Pair {
                ladder: EvolutionLadder::dense(spectrum, &cfg)?,
                to_eigenbasis: Unitary::from_real(&eigenvectors(spectrum)?.transpose())?,
            },
            Tier::EigenStatevector => {
                let v = eigenvectors(spectrum)?;
                Engine::Eigen {
                    ladder: EvolutionLadder::eigen_frame(spectrum, &cfg)?,
                    vectors: (0..v.ncols())
                        .map(|c| v.column(c).iter().map(|&x| Complex64::new(x, 0.0)).collect())
                        .collect(),
                }
            }
            Tier::Analytic => Engine::Analytic {
                cdfs: spectrum
                    .eigenvalues
                    .iter()
                    .map(|&e| {
                        let phi = phase_of_energy(e, &cfg)?;
                        let mut acc = 0.0;
                        Ok(analytic_outcome_distribution(phi, cfg.k())
                            .into_iter()
                            .map(|p| {
                                acc += p;
                                acc
                            })
                            .collect())
                    })
                    .collect::<Result<_>>()?,
            },
        };
        Ok(Self {
            spectrum,
            cfg,
            engine,
        })
    }

    pub fn config(&self) -> &QpeConfig {
        &self.cfg
    }

    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum
    }

    fn n_spins(&self) -> usize {
        self.spectrum.dim().trailing_zeros() as usize
    }

    fn finish(&self, outcome: usize, eigen_index: usize) -> Result<QpeSample> {
        Ok(QpeSample {
            outcome,
            energy: energy_of_outcome(outcome, &self.cfg)?,
            eigen_index,
        })
    }

    /// Runs one phase estimation and returns the measured outcome.
    pub fn sample_energy<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<QpeSample> {
        let n = self.n_spins();
        let k = self.cfg.k();
        match &self.engine {
            Engine::Pair {
                ladder,
                to_eigenbasis,
            } => {
                let layout = Layout::new([("system", n), ("copy", n), ("phase", k)])?;
                let mut state = StateVector::zero(layout);
                state.prepare_maximally_entangled(0, 1)?;
                state.hadamard_register(2)?;
                ladder.apply(&mut state, 0, 2)?;
                state.inverse_qft(2)?;
                let outcome = state.measure_register(2, rng)?;
                // collapse bookkeeping: read which eigenstate the system holds
                state.apply_unitary(0, to_eigenbasis)?;
                let eigen_index = state.measure_register(0, rng)?;
                self.finish(outcome, eigen_index)
            }
            Engine::Eigen { ladder, vectors } => {
                let eigen_index = rng.random_range(0..self.spectrum.dim());
                let layout = Layout::new([("system", n), ("phase", k)])?;
                let mut state = StateVector::with_register_state(layout, 0, &vectors[eigen_index])?;
                // commutes with the phase Hadamards; before them it touches one block
                ladder.enter_frame(&mut state, 0)?;
                state.hadamard_register(1)?;
                ladder.apply_controlled(&mut state, 0, 1)?;
                state.inverse_qft(1)?;
                let outcome = state.measure_register(1, rng)?;
                self.finish(outcome, eigen_index)
            }
            Engine::Analytic { cdfs } => {
                let eigen_index = rng.random_range(0..self.spectrum.dim());
                let cdf = &cdfs[eigen_index];
                let total = *cdf.last().expect("non-empty distribution");
                let u = rng.random::<f64>() * total;
                let outcome = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                self.finish(outcome, eigen_index)
            }
        }
    }

    /// Exact outcome law for eigenstate `eigen_index`.
    pub fn outcome_distribution(&self, eigen_index: usize) -> Result<Vec<f64>> {
        let phi = phase_of_energy(self.spectrum.eigenvalues[eigen_index], &self.cfg)?;
        Ok(analytic_outcome_distribution(phi, self.cfg.k()))
    }
}

impl EnergySampler for QpeSampler<'_> {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<QpeSample> {
        self.sample_energy(rng)
    }
}

/// Mean over eigenstates of the expected `|E_measured − E_i|`, computed from the
/// exact outcome law.
pub fn mean_absolute_energy_error(spectrum: &Spectrum, cfg: &QpeConfig) -> Result<f64> {
    let energies: Vec<f64> = (0..cfg.outcomes())
        .map(|m| energy_of_outcome(m, cfg))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for &e in &spectrum.eigenvalues {
        let dist = analytic_outcome_distribution(phase_of_energy(e, cfg)?, cfg.k());
        total += dist
            .iter()
            .zip(&energies)
            .map(|(p, em)| p * (em - e).abs())
            .sum::<f64>();
    }
    Ok(total / spectrum.dim() as f64)
}
