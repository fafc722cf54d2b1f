//! Experiment orchestration: configuration, runs, artifacts and manifests.
//!
//! Each command writes into the configured output directory and records what
//! it wrote in `manifest_<command>.txt`.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod run;

use std::path::Path;

use crate::error::{Error, Result};
use crate::spin_hamiltonian::{brute_force_dos, Spectrum};
use crate::thermo::{error_curves, rmse_by_quantity, Quantity, ThermoCurves};
use crate::wl_core::NormalizedDos;

pub use config::ExperimentConfig;
pub use manifest::{read_manifest_value, Manifest, Status};
pub use plot::{emit_plots, CurveSet};
pub use run::{
    exact_curves, exact_spectrum, metropolis_budget, resolve_metropolis_steps, run_metropolis_experiment,
    run_wl_experiment, MetropolisOutcome, WlOutcome,
};

fn write_artifact(manifest: &mut Manifest, dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    manifest.artifact(name);
    Ok(())
}

/// Runs `body`, then finalizes the manifest as complete or failed.
fn with_manifest<T>(
    cfg: &ExperimentConfig,
    command: &str,
    body: impl FnOnce(&mut Manifest) -> Result<T>,
) -> Result<T> {
    let mut manifest = Manifest::start(cfg, command)?;
    match body(&mut manifest) {
        Ok(v) => {
            manifest.finish(Status::Complete)?;
            Ok(v)
        }
        Err(e) => {
            manifest.set("failure", e.to_string().replace('\n', " "));
            manifest.finish(Status::Failed)?;
            Err(e)
        }
    }
}

fn write_exact(cfg: &ExperimentConfig, m: &mut Manifest) -> Result<(Spectrum, ThermoCurves)> {
    let dir = &cfg.output_dir;
    let spectrum = exact_spectrum(cfg)?;
    let curves = exact_curves(cfg, &spectrum)?;
    let bins = cfg.bins()?;
    let dos = NormalizedDos::from_counts(&brute_force_dos(&spectrum, &bins)?)?;
    write_artifact(m, dir, "exact_spectrum.txt", &spectrum.to_fixture(&cfg.model))?;
    write_artifact(m, dir, "exact_curves.csv", &curves.to_csv())?;
    write_artifact(m, dir, "exact_dos.csv", &dos.to_csv(&bins))?;
    m.set("exact.ground_energy", spectrum.ground_energy());
    Ok((spectrum, curves))
}

fn write_wl(cfg: &ExperimentConfig, spectrum: &Spectrum, m: &mut Manifest) -> Result<WlOutcome> {
    let dir = &cfg.output_dir;
    let bins = cfg.bins()?;
    m.set(
        "seeds",
        cfg.seeds().iter().map(u64::to_string).collect::<Vec<_>>().join(","),
    );
    let results = run::wl_runs(cfg, spectrum)?;
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    let mut rounds = String::from("run,seed,rounds_completed,total_steps,final_ln_f\n");
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(run) => {
                let t = &run.trace;
                rounds.push_str(&format!(
                    "{r},{},{},{},{}\n",
                    run.seed, t.rounds_completed, t.total_steps, t.final_ln_f
                ));
                m.set(format!("run.{r}.rounds"), t.rounds_completed);
                m.set(format!("run.{r}.total_steps"), t.total_steps);
                m.set(format!("run.{r}.seconds"), format!("{:.3}", run.seconds));
                write_artifact(m, dir, &format!("wl_dos_run{r:03}.csv"), &run.dos.to_csv(&bins))?;
                if t.steps.is_some() {
                    write_artifact(m, dir, &format!("wl_trace_run{r:03}.csv"), &t.to_csv())?;
                }
                ok.push(run);
            }
            Err(e) => {
                m.set(format!("run.{r}.failure"), e.to_string());
                failures.push(format!("run {r}: {e}"));
            }
        }
    }
    write_artifact(m, dir, "wl_rounds.csv", &rounds)?;
    if !failures.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} of {} Wang-Landau runs failed; {}",
            failures.len(),
            cfg.runs,
            failures.join("; ")
        )));
    }
    let outcome = run::summarize_wl(ok)?;
    write_artifact(m, dir, "wl_curves.csv", &outcome.curves.to_csv())?;
    m.set("wl.total_steps", outcome.total_steps);
    Ok(outcome)
}

fn write_metropolis(
    cfg: &ExperimentConfig,
    spectrum: &Spectrum,
    wl_total_steps: Option<u64>,
    m: &mut Manifest,
) -> Result<MetropolisOutcome> {
    let dir = &cfg.output_dir;
    let steps = resolve_metropolis_steps(cfg, wl_total_steps)?;
    m.set("metropolis.steps_per_chain", steps);
    let outcome = run_metropolis_experiment(cfg, spectrum, steps)?;
    let grid = cfg.beta_grid()?;
    for (r, per_beta) in outcome.traces.iter().enumerate() {
        let seed = cfg.base_seed + r as u64;
        for (b, trace) in per_beta.iter().enumerate() {
            let name = format!("metropolis_trace_run{r:03}_beta{b:03}.txt");
            write_artifact(m, dir, &name, &trace.to_text(grid[b], seed))?;
        }
    }
    write_artifact(m, dir, "metropolis_curves.csv", &outcome.curves.to_csv())?;
    m.set("metropolis.total_steps", outcome.total_steps);
    Ok(outcome)
}

/// Exact spectrum, curves and binned DOS.
pub fn exact_command(cfg: &ExperimentConfig) -> Result<Spectrum> {
    with_manifest(cfg, "exact", |m| Ok(write_exact(cfg, m)?.0))
}

pub fn wl_command(cfg: &ExperimentConfig) -> Result<WlOutcome> {
    with_manifest(cfg, "wl", |m| {
        let spectrum = exact_spectrum(cfg)?;
        write_wl(cfg, &spectrum, m)
    })
}

/// Metropolis curves; an `auto` budget reads `wl.total_steps` from an earlier
/// `wl` or `compare` manifest in the output directory.
pub fn metropolis_command(cfg: &ExperimentConfig) -> Result<MetropolisOutcome> {
    let mut wl_total = None;
    if cfg.metropolis.total_steps.is_none() {
        for name in ["manifest_wl.txt", "manifest_compare.txt"] {
            if let Some(v) = read_manifest_value(&cfg.output_dir.join(name), "wl.total_steps")? {
                wl_total = Some(v.parse::<u64>().map_err(|e| {
                    Error::Config(format!("{name}: bad wl.total_steps '{v}': {e}"))
                })?);
                break;
            }
        }
    }
    with_manifest(cfg, "metropolis", |m| {
        let spectrum = exact_spectrum(cfg)?;
        if let Some(w) = wl_total {
            m.set("wl.total_steps", w);
        }
        write_metropolis(cfg, &spectrum, wl_total, m)
    })
}

/// RMSE over the β grid of each quantity for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub quantity: Quantity,
    pub wl: f64,
    pub metropolis: f64,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub exact: ThermoCurves,
    pub wl: WlOutcome,
    pub metropolis: MetropolisOutcome,
    pub rmse: Vec<RmseRow>,
}

/// Exact, Wang-Landau and budget-matched Metropolis curves with error curves,
/// RMSE table and plots.
pub fn compare_command(cfg: &ExperimentConfig) -> Result<CompareReport> {
    with_manifest(cfg, "compare", |m| {
        let dir = &cfg.output_dir;
        let (spectrum, exact) = write_exact(cfg, m)?;
        let wl = write_wl(cfg, &spectrum, m)?;
        let metropolis = write_metropolis(cfg, &spectrum, Some(wl.total_steps), m)?;
        let wl_err = error_curves(&wl.curves, &exact)?;
        let metro_err = error_curves(&metropolis.curves, &exact)?;
        write_artifact(m, dir, "error_wl.csv", &wl_err.to_csv())?;
        write_artifact(m, dir, "error_metropolis.csv", &metro_err.to_csv())?;
        let rmse: Vec<RmseRow> = rmse_by_quantity(&wl_err)
            .iter()
            .zip(rmse_by_quantity(&metro_err))
            .map(|(&(quantity, wl), (_, metropolis))| RmseRow {
                quantity,
                wl,
                metropolis,
            })
            .collect();
        let mut table = String::from("quantity,wl_rmse,metropolis_rmse\n");
        for r in &rmse {
            table.push_str(&format!("{},{},{}\n", r.quantity.name(), r.wl, r.metropolis));
        }
        write_artifact(m, dir, "rmse.csv", &table)?;
        let plots = emit_plots(
            dir,
            &exact,
            &[
                CurveSet {
                    label: "Wang-Landau",
                    curves: &wl.curves,
                },
                CurveSet {
                    label: "Metropolis",
                    curves: &metropolis.curves,
                },
            ],
        )?;
        for p in plots {
            m.artifact(p);
        }
        Ok(CompareReport {
            exact,
            wl,
            metropolis,
            rmse,
        })
    })
}
