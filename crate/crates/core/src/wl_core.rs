//! Wang-Landau bookkeeping and drivers.
//!
//! The density of states is indexed by energy bin. A step proposes an energy,
//! accepts it with probability `min(1, g(E_i)/g(E_j))`, then adds `ln f` to the
//! log-DOS of, and counts a visit to, whichever bin the walk now sits in. Every
//! `steps_per_check` steps the histogram is tested for flatness over the bins
//! visited so far; a flat histogram ends the round, clears the histogram and
//! replaces `ln f` by `γ·ln f`.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::qpe::{EnergySampler, QpeConfig, QpeSampler};
use crate::spin_hamiltonian::{EnergyWindow, Spectrum};
use crate::stats::log_sum_exp;

/// Fraction of a bin width below an upper edge that still counts as the upper
/// bin; keeps exactly degenerate eigenvalues sitting on an edge together.
const EDGE_SNAP: f64 = 1e-9;

/// `ell` equal-width bins over a window; bin `i` is
/// `[e_lo + i·w, e_lo + (i+1)·w)` and the last bin is closed above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    ell: usize,
    window: EnergyWindow,
}

impl BinSpec {
    pub fn new(ell: usize, window: EnergyWindow) -> Result<Self> {
        if ell == 0 {
            return Err(Error::invalid("number of bins must be positive"));
        }
        Ok(Self { ell, window })
    }

    /// One bin per phase-estimation outcome, capped at 64 bins.
    pub fn default_count(k: usize) -> usize {
        1usize << k.min(6)
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn window(&self) -> EnergyWindow {
        self.window
    }

    pub fn width(&self) -> f64 {
        self.window.width() / self.ell as f64
    }

    pub fn center(&self, bin: usize) -> f64 {
        self.window.e_lo + (bin as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.ell).map(|i| self.center(i)).collect()
    }

    /// Bin holding `energy`; energies within 1e-9 outside the window are
    /// clamped onto it.
    pub fn bin_of(&self, energy: f64) -> Result<usize> {
        let EnergyWindow { e_lo, e_hi } = self.window;
        if !(energy >= e_lo - 1e-9 && energy <= e_hi + 1e-9) {
            return Err(Error::OutsideWindow {
                energy,
                lo: e_lo,
                hi: e_hi,
            });
        }
        let x = ((energy - e_lo) / self.width() + EDGE_SNAP).floor();
        Ok((x.max(0.0) as usize).min(self.ell - 1))
    }
}

/// Running (unnormalized) log density of states.
#[derive(Debug, Clone, PartialEq)]
pub struct DosEstimate {
    pub ln_g: Vec<f64>,
    pub visited: Vec<bool>,
}

impl DosEstimate {
    pub fn new(ell: usize) -> Self {
        Self {
            ln_g: vec![0.0; ell],
            visited: vec![false; ell],
        }
    }

    /// Shifts `ln g` so that `Σ g` over visited bins equals `total_states`.
    pub fn normalized(&self, total_states: f64) -> Result<NormalizedDos> {
        NormalizedDos::from_log(&self.ln_g, &self.visited, total_states)
    }
}

/// Log density of states with `Σ g = total` over visited bins and `-inf` on
/// unvisited ones.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDos {
    ln_g: Vec<f64>,
    visited: Vec<bool>,
}

impl NormalizedDos {
    pub fn from_log(ln_g: &[f64], visited: &[bool], total_states: f64) -> Result<Self> {
        if ln_g.len() != visited.len() {
            return Err(Error::DimensionMismatch {
                expected: ln_g.len(),
                actual: visited.len(),
            });
        }
        if !(total_states > 0.0) {
            return Err(Error::invalid("total state count must be positive"));
        }
        let live = || {
            ln_g.iter()
                .zip(visited)
                .filter(|(_, &v)| v)
                .map(|(&x, _)| x)
        };
        if live().next().is_none() {
            return Err(Error::invalid("density of states has no visited bins"));
        }
        if live().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite ln g on a visited bin"));
        }
        let shift = total_states.ln() - log_sum_exp(live());
        Ok(Self {
            ln_g: ln_g
                .iter()
                .zip(visited)
                .map(|(&x, &v)| if v { x + shift } else { f64::NEG_INFINITY })
                .collect(),
            visited: visited.to_vec(),
        })
    }

    /// Exact counts as a normalized DOS; empty bins are unvisited.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        let ln_g: Vec<f64> = counts
            .iter()
            .map(|&c| if c > 0 { (c as f64).ln() } else { 0.0 })
            .collect();
        let visited: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
        Self::from_log(&ln_g, &visited, total as f64)
    }

    pub fn ln_g(&self) -> &[f64] {
        &self.ln_g
    }

    pub fn visited(&self) -> &[bool] {
        &self.visited
    }

    pub fn visited_bins(&self) -> impl Iterator<Item = usize> + '_ {
        self.visited
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| i)
    }

    /// `bin_index,e_center,ln_g_normalized,visited` rows.
    pub fn to_csv(&self, bins: &BinSpec) -> String {
        let mut out = String::from("bin_index,e_center,ln_g_normalized,visited\n");
        for (i, (&g, &v)) in self.ln_g.iter().zip(&self.visited).enumerate() {
            let _ = writeln!(out, "{i},{},{g},{v}", bins.center(i));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(ell: usize) -> Self {
        Self {
            counts: vec![0; ell],
        }
    }

    pub fn reset(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlConfig {
    pub bins: BinSpec,
    pub ln_f_init: f64,
    pub gamma: f64,
    pub flatness: f64,
    pub steps_per_check: u64,
    pub max_rounds: u32,
    /// Hard cap on steps; a chain that reaches it stops with fewer rounds.
    pub max_steps: u64,
    /// Keep one record per step in the trace.
    pub record_steps: bool,
}

impl WlConfig {
    pub fn new(bins: BinSpec) -> Self {
        Self {
            bins,
            ln_f_init: 1.0,
            gamma: 0.5,
            flatness: 0.8,
            steps_per_check: 10_000,
            max_rounds: 18,
            max_steps: 100_000_000,
            record_steps: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ln_f_init > 0.0 && self.ln_f_init.is_finite()) {
            return Err(Error::Config("wl.ln_f_init must be a positive number".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("wl.gamma must lie in (0, 1)".into()));
        }
        if !(self.flatness > 0.0 && self.flatness < 1.0) {
            return Err(Error::Config("wl.flatness must lie in (0, 1)".into()));
        }
        if self.steps_per_check == 0 || self.max_rounds == 0 || self.max_steps == 0 {
            return Err(Error::Config(
                "wl.steps_per_check, wl.max_rounds and wl.max_steps must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `ln f` in force during round `round`.
    pub fn ln_f_at(&self, round: u32) -> f64 {
        self.ln_f_init * self.gamma.powi(round as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub round: u32,
    pub bin: usize,
    pub energy: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub round: u32,
    pub ln_f: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WlTrace {
    pub steps: Option<Vec<StepRecord>>,
    pub rounds: Vec<RoundRecord>,
    pub rounds_completed: u32,
    pub total_steps: u64,
    pub final_ln_f: f64,
}

impl WlTrace {
    /// `step,round,bin,energy,accepted` rows; empty body when steps were not recorded.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,round,bin,energy,accepted\n");
        for r in self.steps.iter().flatten() {
            let _ = writeln!(out, "{},{},{},{},{}", r.step, r.round, r.bin, r.energy, r.accepted);
        }
        out
    }
}

/// `u < min(1, exp(ln_g_i − ln_g_j))`, strict.
pub fn wl_accept(ln_g_i: f64, ln_g_j: f64, u: f64) -> bool {
    u < (ln_g_i - ln_g_j).exp().min(1.0)
}

pub fn wl_update(dos: &mut DosEstimate, hist: &mut Histogram, bin: usize, ln_f: f64) {
    dos.ln_g[bin] += ln_f;
    dos.visited[bin] = true;
    hist.counts[bin] += 1;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flatness {
    Flat,
    NotFlat,
}

/// Flat when every visited bin satisfies `c·h̄ ≤ h ≤ (2 − c)·h̄`, `h̄` being the
/// mean count over visited bins.
pub fn check_histogram(hist: &Histogram, visited: &[bool], c: f64) -> Result<Flatness> {
    let live: Vec<f64> = hist
        .counts
        .iter()
        .zip(visited)
        .filter(|(_, &v)| v)
        .map(|(&h, _)| h as f64)
        .collect();
    if live.is_empty() {
        return Err(Error::invalid("flatness check with no visited bins"));
    }
    let mean = live.iter().sum::<f64>() / live.len() as f64;
    let violated = live.iter().any(|&h| h < c * mean || h > (2.0 - c) * mean);
    Ok(if violated {
        Flatness::NotFlat
    } else {
        Flatness::Flat
    })
}

/// A walk over states whose energies feed the Wang-Landau chain.
pub trait WlWalker {
    fn energy(&self) -> f64;
    /// Proposes a move and returns the energy of the proposed state.
    fn propose<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64>;
    fn accept(&mut self);
    fn reject(&mut self);
}

/// State of one Wang-Landau chain.
pub struct WangLandau<W> {
    walker: W,
    bins: BinSpec,
    dos: DosEstimate,
    hist: Histogram,
    current_bin: usize,
}

impl<W: WlWalker> WangLandau<W> {
    pub fn new(walker: W, bins: BinSpec) -> Result<Self> {
        let current_bin = bins.bin_of(walker.energy())?;
        Ok(Self {
            walker,
            bins,
            dos: DosEstimate::new(bins.ell()),
            hist: Histogram::new(bins.ell()),
            current_bin,
        })
    }

    /// Starts from a given log-DOS instead of all zeros.
    pub fn with_ln_g(mut self, ln_g: Vec<f64>) -> Result<Self> {
        if ln_g.len() != self.bins.ell() {
            return Err(Error::DimensionMismatch {
                expected: self.bins.ell(),
                actual: ln_g.len(),
            });
        }
        self.dos.ln_g = ln_g;
        Ok(self)
    }

    pub fn dos(&self) -> &DosEstimate {
        &self.dos
    }

    pub fn histogram(&self) -> &Histogram {
        &self.hist
    }

    pub fn current_bin(&self) -> usize {
        self.current_bin
    }

    pub fn walker(&self) -> &W {
        &self.walker
    }

    /// One proposal, acceptance decision and update with increment `ln_f`.
    pub fn step<R: Rng + ?Sized>(&mut self, ln_f: f64, rng: &mut R) -> Result<(usize, f64, bool)> {
        let proposed = self.walker.propose(rng)?;
        let bin_j = self.bins.bin_of(proposed)?;
        let u = rng.random::<f64>();
        let accepted = wl_accept(self.dos.ln_g[self.current_bin], self.dos.ln_g[bin_j], u);
        if accepted {
            self.walker.accept();
            self.current_bin = bin_j;
        } else {
            self.walker.reject();
        }
        wl_update(&mut self.dos, &mut self.hist, self.current_bin, ln_f);
        Ok((self.current_bin, self.walker.energy(), accepted))
    }

    /// Runs rounds until `max_rounds` flat histograms or `max_steps` steps.
    pub fn run<R: Rng + ?Sized>(&mut self, cfg: &WlConfig, rng: &mut R) -> Result<WlTrace> {
        cfg.validate()?;
        if cfg.bins != self.bins {
            return Err(Error::invalid("chain and configuration use different bins"));
        }
        let mut trace = WlTrace {
            steps: cfg.record_steps.then(Vec::new),
            ..WlTrace::default()
        };
        let mut round = 0u32;
        let mut round_steps = 0u64;
        let mut step = 0u64;
        while round < cfg.max_rounds && step < cfg.max_steps {
            let ln_f = cfg.ln_f_at(round);
            for _ in 0..cfg.steps_per_check {
                let (bin, energy, accepted) = self.step(ln_f, rng)?;
                if let Some(steps) = trace.steps.as_mut() {
                    steps.push(StepRecord {
                        step,
                        round,
                        bin,
                        energy,
                        accepted,
                    });
                }
                step += 1;
                round_steps += 1;
            }
            if check_histogram(&self.hist, &self.dos.visited, cfg.flatness)? == Flatness::Flat {
                trace.rounds.push(RoundRecord {
                    round,
                    ln_f,
                    steps: round_steps,
                });
                self.hist.reset();
                round += 1;
                round_steps = 0;
            }
        }
        trace.rounds_completed = round;
        trace.total_steps = step;
        trace.final_ln_f = cfg.ln_f_at(round);
        Ok(trace)
    }
}

/// Walker whose proposals are independent phase-estimation measurements.
pub struct QuantumWalker<'s, S> {
    sampler: &'s S,
    current: f64,
    pending: f64,
}

impl<'s, S: EnergySampler> QuantumWalker<'s, S> {
    /// Initial energy from one measurement.
    pub fn new<R: Rng + ?Sized>(sampler: &'s S, rng: &mut R) -> Result<Self> {
        let current = sampler.sample(rng)?.energy;
        Ok(Self {
            sampler,
            current,
            pending: current,
        })
    }
}

impl<S: EnergySampler> WlWalker for QuantumWalker<'_, S> {
    fn energy(&self) -> f64 {
        self.current
    }

    fn propose<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        self.pending = self.sampler.sample(rng)?.energy;
        Ok(self.pending)
    }

    fn accept(&mut self) {
        self.current = self.pending;
    }

    fn reject(&mut self) {}
}

/// Quantum Wang-Landau with an arbitrary energy sampler; the returned DOS is
/// normalized to `total_states`.
pub fn run_quantum_wl_with<S: EnergySampler, R: Rng + ?Sized>(
    sampler: &S,
    total_states: f64,
    cfg: &WlConfig,
    rng: &mut R,
) -> Result<(NormalizedDos, WlTrace)> {
    let walker = QuantumWalker::new(sampler, rng)?;
    let mut chain = WangLandau::new(walker, cfg.bins)?;
    let trace = chain.run(cfg, rng)?;
    Ok((chain.dos().normalized(total_states)?, trace))
}

/// Quantum Wang-Landau on `spectrum`, phase estimation per `qpe_cfg`, DOS
/// normalized to `2^N` states.
pub fn run_quantum_wl<R: Rng + ?Sized>(
    spectrum: &Spectrum,
    qpe_cfg: &QpeConfig,
    wl_cfg: &WlConfig,
    rng: &mut R,
) -> Result<(NormalizedDos, WlTrace)> {
    check_windows(qpe_cfg, &wl_cfg.bins)?;
    let sampler = QpeSampler::new(spectrum, *qpe_cfg)?;
    run_quantum_wl_with(&sampler, spectrum.dim() as f64, wl_cfg, rng)
}

/// Measured energies span the phase-estimation window; the bins must cover it.
pub fn check_windows(qpe_cfg: &QpeConfig, bins: &BinSpec) -> Result<()> {
    let (q, b) = (qpe_cfg.window(), bins.window());
    if q.e_lo < b.e_lo - 1e-9 || q.e_hi > b.e_hi + 1e-9 {
        return Err(Error::invalid(format!(
            "bins over [{}, {}] do not cover the phase-estimation window [{}, {}]",
            b.e_lo, b.e_hi, q.e_lo, q.e_hi
        )));
    }
    Ok(())
}

/// Classical model with single-site moves.
pub trait ClassicalModel {
    fn n_sites(&self) -> usize;
    fn energy(&self, spins: &[i8]) -> f64;
    /// Energy change from flipping `site`.
    fn flip_delta(&self, spins: &[i8], site: usize) -> f64;
}

/// Periodic classical Ising chain `E = J Σ s_i s_{i+1} + h Σ s_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingChain {
    pub n_sites: usize,
    pub coupling: f64,
    pub field: f64,
}

impl ClassicalModel for IsingChain {
    fn n_sites(&self) -> usize {
        self.n_sites
    }

    fn energy(&self, spins: &[i8]) -> f64 {
        let n = spins.len();
        (0..n)
            .map(|i| {
                let s = spins[i] as f64;
                self.coupling * s * spins[(i + 1) % n] as f64 + self.field * s
            })
            .sum()
    }

    fn flip_delta(&self, spins: &[i8], site: usize) -> f64 {
        let n = spins.len();
        let s = spins[site] as f64;
        let neighbours = spins[(site + 1) % n] as f64 + spins[(site + n - 1) % n] as f64;
        -2.0 * s * (self.coupling * neighbours + self.field)
    }
}

/// Walker over spin configurations; move `C_m` flips spin `m`, `M = N`.
pub struct ClassicalWalker<'m, M> {
    model: &'m M,
    spins: Vec<i8>,
    energy: f64,
    pending: Option<(usize, f64)>,
}

impl<'m, M: ClassicalModel> ClassicalWalker<'m, M> {
    /// Random initial configuration.
    pub fn new<R: Rng + ?Sized>(model: &'m M, rng: &mut R) -> Self {
        let spins: Vec<i8> = (0..model.n_sites())
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        let energy = model.energy(&spins);
        Self {
            model,
            spins,
            energy,
            pending: None,
        }
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }
}

impl<M: ClassicalModel> WlWalker for ClassicalWalker<'_, M> {
    fn energy(&self) -> f64 {
        self.energy
    }

    fn propose<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        let site = rng.random_range(0..self.spins.len());
        let e_new = self.energy + self.model.flip_delta(&self.spins, site);
        self.pending = Some((site, e_new));
        Ok(e_new)
    }

    fn accept(&mut self) {
        if let Some((site, e_new)) = self.pending.take() {
            self.spins[site] = -self.spins[site];
            self.energy = e_new;
        }
    }

    fn reject(&mut self) {
        self.pending = None;
    }
}

/// Classical Wang-Landau; the DOS is normalized to `2^N` configurations.
pub fn run_classical_wl<M: ClassicalModel, R: Rng + ?Sized>(
    model: &M,
    cfg: &WlConfig,
    rng: &mut R,
) -> Result<(NormalizedDos, WlTrace)> {
    if model.n_sites() == 0 || model.n_sites() > 62 {
        return Err(Error::invalid("classical model needs 1..=62 sites"));
    }
    let walker = ClassicalWalker::new(model, rng);
    let mut chain = WangLandau::new(walker, cfg.bins)?;
    let trace = chain.run(cfg, rng)?;
    let total = (model.n_sites() as f64).exp2();
    Ok((chain.dos().normalized(total)?, trace))
}
