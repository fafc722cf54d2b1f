//! Multi-run execution and aggregation.
//!
//! Run `r` uses seed `base_seed + r`. Wang-Landau chains draw from stream 0 of
//! that seed; the Metropolis chain at grid index `b` draws from stream `b + 1`.
//! Work items are independent, so the worker pool cannot change any result.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiment::config::ExperimentConfig;
use crate::metropolis::{moments, run_metropolis_with, EnergyTrace};
use crate::qpe::QpeSampler;
use crate::seeded_rng;
use crate::spin_hamiltonian::{build_tfim, diagonalize, exact_thermo, Spectrum};
use crate::thermo::{aggregate, entropy_from_cv, thermo_from_dos, ThermoCurves};
use crate::wl_core::{check_windows, run_quantum_wl_with, NormalizedDos, WlTrace};

pub fn exact_spectrum(cfg: &ExperimentConfig) -> Result<Spectrum> {
    diagonalize(&build_tfim(&cfg.model)?)
}

pub fn exact_curves(cfg: &ExperimentConfig, spectrum: &Spectrum) -> Result<ThermoCurves> {
    exact_thermo(spectrum, &cfg.beta_grid()?)
}

#[derive(Debug, Clone)]
pub struct WlRun {
    pub index: usize,
    pub seed: u64,
    pub dos: NormalizedDos,
    pub trace: WlTrace,
    pub curves: ThermoCurves,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct WlOutcome {
    pub runs: Vec<WlRun>,
    pub curves: ThermoCurves,
    pub total_steps: u64,
}

/// Every Wang-Landau run, failures included, in run order.
pub fn wl_runs(cfg: &ExperimentConfig, spectrum: &Spectrum) -> Result<Vec<Result<WlRun>>> {
    let qpe = cfg.qpe_config()?;
    let wl = cfg.wl_config()?;
    check_windows(&qpe, &wl.bins)?;
    let sampler = QpeSampler::new(spectrum, qpe)?;
    let grid = cfg.beta_grid()?;
    let total_states = spectrum.dim() as f64;
    let runs = cfg
        .seeds()
        .into_par_iter()
        .enumerate()
        .map(|(index, seed)| {
            let start = Instant::now();
            let mut rng = seeded_rng(seed, 0);
            let (dos, trace) = run_quantum_wl_with(&sampler, total_states, &wl, &mut rng)?;
            let curves = thermo_from_dos(&dos, &wl.bins, &grid)?;
            Ok(WlRun {
                index,
                seed,
                dos,
                trace,
                curves,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect();
    Ok(runs)
}

pub fn summarize_wl(runs: Vec<WlRun>) -> Result<WlOutcome> {
    let per_run: Vec<ThermoCurves> = runs.iter().map(|r| r.curves.clone()).collect();
    Ok(WlOutcome {
        curves: aggregate(&per_run)?,
        total_steps: runs.iter().map(|r| r.trace.total_steps).sum(),
        runs,
    })
}

/// `runs` independent Wang-Landau chains, aggregated; fails if any chain fails.
pub fn run_wl_experiment(cfg: &ExperimentConfig, spectrum: &Spectrum) -> Result<WlOutcome> {
    let runs = wl_runs(cfg, spectrum)?.into_iter().collect::<Result<Vec<_>>>()?;
    summarize_wl(runs)
}

/// Steps per Metropolis chain: burn-in plus enough recorded steps that all
/// chains together record at least `wl_total_steps`, exceeding it by less than
/// one step per chain.
pub fn metropolis_budget(wl_total_steps: u64, runs: usize, n_beta: usize, burn_in: u64) -> u64 {
    wl_total_steps.div_ceil((runs * n_beta) as u64) + burn_in
}

#[derive(Debug, Clone)]
pub struct MetropolisOutcome {
    pub per_run: Vec<ThermoCurves>,
    pub curves: ThermoCurves,
    pub steps_per_chain: u64,
    pub total_steps: u64,
    /// `traces[r][b]`, kept only when trace export is enabled.
    pub traces: Vec<Vec<EnergyTrace>>,
}

/// One chain per (run, β) with `steps_per_chain` steps each; entropy by
/// integrating `Cv/β` and `F = U − S/β` (undefined at `β = 0`).
pub fn run_metropolis_experiment(
    cfg: &ExperimentConfig,
    spectrum: &Spectrum,
    steps_per_chain: u64,
) -> Result<MetropolisOutcome> {
    let qpe = cfg.qpe_config()?;
    let sampler = QpeSampler::new(spectrum, qpe)?;
    let grid = cfg.beta_grid()?;
    let seeds = cfg.seeds();
    let keep = cfg.metropolis.write_traces;
    for &beta in &grid {
        cfg.metropolis_config(beta, steps_per_chain)?;
    }
    let items: Vec<(usize, usize)> = (0..seeds.len())
        .flat_map(|r| (0..grid.len()).map(move |b| (r, b)))
        .collect();
    let chains: Vec<(f64, f64, Option<EnergyTrace>)> = items
        .into_par_iter()
        .map(|(r, b)| {
            let m = cfg.metropolis_config(grid[b], steps_per_chain)?;
            let mut rng = seeded_rng(seeds[r], b as u64 + 1);
            let trace = run_metropolis_with(&sampler, &m, &mut rng)?;
            let (u, cv) = moments(&trace, grid[b])?;
            Ok((u, cv, keep.then_some(trace)))
        })
        .collect::<Result<_>>()?;

    let mut per_run = Vec::with_capacity(seeds.len());
    let mut traces = Vec::new();
    for run in chains.chunks(grid.len()) {
        let mut c = ThermoCurves::with_grid(grid.clone());
        c.u = run.iter().map(|x| x.0).collect();
        c.cv = run.iter().map(|x| x.1).collect();
        c.s = entropy_from_cv(&grid, &c.cv, cfg.metropolis.beta_cutoff)?;
        c.f = grid
            .iter()
            .zip(c.u.iter().zip(&c.s))
            .map(|(&b, (&u, &s))| if b > 0.0 { u - s / b } else { f64::NAN })
            .collect();
        per_run.push(c);
        if keep {
            traces.push(run.iter().filter_map(|x| x.2.clone()).collect());
        }
    }
    Ok(MetropolisOutcome {
        curves: aggregate(&per_run)?,
        per_run,
        steps_per_chain,
        total_steps: steps_per_chain * (seeds.len() * grid.len()) as u64,
        traces,
    })
}

/// Chain length from the configuration, or matched to `wl_total_steps`.
pub fn resolve_metropolis_steps(cfg: &ExperimentConfig, wl_total_steps: Option<u64>) -> Result<u64> {
    if let Some(t) = cfg.metropolis.total_steps {
        return Ok(t);
    }
    let wl = wl_total_steps.ok_or_else(|| {
        Error::Config(
            "metropolis.total_steps = auto needs a Wang-Landau step total; run `wl` first or set metropolis.total_steps"
                .into(),
        )
    })?;
    let n_beta = cfg.beta_grid()?.len();
    if wl == 0 {
        return Err(Error::Config("Wang-Landau step total is zero".into()));
    }
    Ok(metropolis_budget(wl, cfg.runs, n_beta, cfg.metropolis.burn_in))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig::parse(
            "model.n_spins = 2\nmodel.coupling = 2\nmodel.field = 1\nqpe.k = 6\n\
             wl.bins = 9\nwl.steps_per_check = 1000\nwl.max_rounds = 6\n\
             metropolis.burn_in = 100\nmetropolis.beta_min = 0.5\nmetropolis.beta_max = 1.5\nmetropolis.beta_step = 0.5\n\
             run.runs = 3\nrun.base_seed = 10\n",
        )
        .unwrap()
    }

    #[test]
    fn budget_rule() {
        for (w, runs, nb) in [(218_550_000u64, 20usize, 60usize), (7, 3, 2), (12_080_000 * 600, 20, 30)] {
            let per = metropolis_budget(w, runs, nb, 5000);
            let chains = (runs * nb) as u64;
            let recorded = (per - 5000) * chains;
            assert!(recorded >= w);
            assert!(recorded - w < chains);
            if w > 100_000_000 {
                assert!(((per * chains - w) as f64) < 0.05 * w as f64);
            }
        }
    }

    #[test]
    fn single_run_has_zero_bands() {
        let mut cfg = small();
        cfg.runs = 1;
        let sp = exact_spectrum(&cfg).unwrap();
        let out = run_wl_experiment(&cfg, &sp).unwrap();
        assert!(out.curves.sd.as_ref().unwrap().u.iter().all(|&x| x == 0.0));
        let m = run_metropolis_experiment(&cfg, &sp, 500).unwrap();
        assert!(m.curves.sd.unwrap().cv.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn seeds_change_traces_and_repeat_exactly() {
        let cfg = small();
        let sp = exact_spectrum(&cfg).unwrap();
        let a = run_wl_experiment(&cfg, &sp).unwrap();
        let b = run_wl_experiment(&cfg, &sp).unwrap();
        assert_eq!(a.curves, b.curves);
        let mut other = cfg.clone();
        other.base_seed = 99;
        let c = run_wl_experiment(&other, &sp).unwrap();
        assert_ne!(a.runs[0].dos, c.runs[0].dos);
        assert_eq!(a.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![10, 11, 12]);
        assert_eq!(a.total_steps, a.runs.iter().map(|r| r.trace.total_steps).sum::<u64>());
    }

    #[test]
    fn metropolis_shapes_and_budget() {
        let mut cfg = small();
        assert!(resolve_metropolis_steps(&cfg, None).is_err());
        let steps = resolve_metropolis_steps(&cfg, Some(9_001)).unwrap();
        assert_eq!(steps, 1101);
        cfg.metropolis.beta_max = 0.5;
        let sp = exact_spectrum(&cfg).unwrap();
        let m = run_metropolis_experiment(&cfg, &sp, 400).unwrap();
        assert_eq!(m.curves.len(), 1);
        assert_eq!(m.per_run.len(), 3);
        assert_eq!(m.total_steps, 1200);
        assert!(m.traces.is_empty());
        cfg.metropolis.total_steps = Some(300);
        assert_eq!(resolve_metropolis_steps(&cfg, None).unwrap(), 300);
    }
}
