//! Quick oracle battery behind the `validate` command.

use std::collections::HashMap;

use crate::error::Result;
use crate::metropolis::{run_quantum_metropolis, MetropolisConfig};
use crate::qpe::{QpeConfig, QpeSampler, Tier};
use crate::seeded_rng;
use crate::spin_hamiltonian::{
    brute_force_dos, build_tfim, diagonalize, energy_window, exact_thermo, EnergyWindow, HamiltonianSpec, Spectrum,
};
use crate::stats::total_variation;
use crate::wl_core::{run_classical_wl, run_quantum_wl, BinSpec, ClassicalModel, IsingChain, WlConfig};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn tfim(n: usize) -> Result<(HamiltonianSpec, Spectrum)> {
    let spec = HamiltonianSpec::new(n, 2.0, 1.0)?;
    Ok((spec, diagonalize(&build_tfim(&spec)?)?))
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Runs every check; a few seconds in an optimized build.
pub fn run_battery() -> Vec<Check> {
    vec![
        check("single-spin spectrum", || {
            let (_, sp) = tfim(1)?;
            let ok = (sp.eigenvalues[0] - 1.0).abs() < 1e-12 && (sp.eigenvalues[1] - 3.0).abs() < 1e-12;
            Ok((ok, format!("{:?}", sp.eigenvalues)))
        }),
        check("four-spin exact thermodynamics", || {
            let (_, sp) = tfim(4)?;
            let c = exact_thermo(&sp, &[3.0])?;
            let dg = (sp.ground_energy() + 8.543_116_820_279_43).abs();
            let du = (c.u[0] + 8.511_390_796_294_894).abs();
            Ok((dg < 1e-9 && du < 1e-9, format!("|ΔE0| = {dg:.1e}, |ΔU(3)| = {du:.1e}")))
        }),
        check("four-spin binned density of states", || {
            let (_, sp) = tfim(4)?;
            let bins = BinSpec::new(16, EnergyWindow::new(-12.0, 12.0)?)?;
            let counts = brute_force_dos(&sp, &bins)?;
            let want = [0, 0, 2, 0, 0, 0, 3, 1, 5, 3, 0, 0, 0, 2, 0, 0];
            Ok((counts == want, format!("{counts:?}")))
        }),
        check("phase-estimation tiers vs exact outcome law", || {
            let (spec, sp) = tfim(1)?;
            let base = QpeConfig::new(4, energy_window(&spec), Tier::Analytic)?;
            let exact_sampler = QpeSampler::new(&sp, base)?;
            let outcomes = base.outcomes();
            let mut exact = vec![0.0; sp.dim() * outcomes];
            for i in 0..sp.dim() {
                for (m, p) in exact_sampler.outcome_distribution(i)?.into_iter().enumerate() {
                    exact[i * outcomes + m] = p / sp.dim() as f64;
                }
            }
            let mut worst: f64 = 0.0;
            for tier in Tier::ALL {
                let s = QpeSampler::new(&sp, base.with_tier(tier))?;
                let mut rng = seeded_rng(2024, 0);
                let n = 20_000;
                let mut freq = vec![0.0; exact.len()];
                for _ in 0..n {
                    let x = s.sample_energy(&mut rng)?;
                    freq[x.eigen_index * outcomes + x.outcome] += 1.0 / n as f64;
                }
                worst = worst.max(total_variation(&freq, &exact));
            }
            Ok((worst < 0.03, format!("worst TV {worst:.4}")))
        }),
        check("quantum Wang-Landau on one spin", || {
            let (spec, sp) = tfim(1)?;
            let w = energy_window(&spec);
            let qpe = QpeConfig::new(10, w, Tier::Analytic)?;
            let mut cfg = WlConfig::new(BinSpec::new(4, w)?);
            cfg.max_rounds = 10;
            let (dos, _) = run_quantum_wl(&sp, &qpe, &cfg, &mut seeded_rng(7, 0))?;
            let dev = dos.ln_g()[2].abs().max(dos.ln_g()[3].abs());
            let ok = dos.visited() == [false, false, true, true] && dev < 0.1;
            Ok((ok, format!("max |ln g − 0| = {dev:.4}")))
        }),
        check("Metropolis Boltzmann occupation, two spins", || {
            let (spec, sp) = tfim(2)?;
            let beta = 1.0;
            let qpe = QpeConfig::new(10, energy_window(&spec), Tier::Analytic)?;
            let m = MetropolisConfig::new(beta, 205_000, 5000)?;
            let t = run_quantum_metropolis(&sp, &qpe, &m, &mut seeded_rng(8, 0))?;
            let mut freq = vec![0.0; sp.dim()];
            for &i in &t.eigen_indices {
                freq[i] += 1.0 / t.len() as f64;
            }
            let w: Vec<f64> = sp.eigenvalues.iter().map(|e| (-beta * e).exp()).collect();
            let z: f64 = w.iter().sum();
            let exact: Vec<f64> = w.iter().map(|x| x / z).collect();
            let tv = total_variation(&freq, &exact);
            Ok((tv < 0.02, format!("TV {tv:.4}")))
        }),
        check("classical Wang-Landau on six sites", || {
            let model = IsingChain {
                n_sites: 6,
                coupling: 2.0,
                field: 0.0,
            };
            let bins = BinSpec::new(4, EnergyWindow::new(-12.0, 12.0)?)?;
            let mut exact: HashMap<usize, u64> = HashMap::new();
            for c in 0u32..64 {
                let spins: Vec<i8> = (0..6).map(|i| if c >> i & 1 == 1 { 1 } else { -1 }).collect();
                *exact.entry(bins.bin_of(model.energy(&spins))?).or_default() += 1;
            }
            let mut cfg = WlConfig::new(bins);
            cfg.steps_per_check = 2000;
            cfg.max_rounds = 14;
            let (dos, _) = run_classical_wl(&model, &cfg, &mut seeded_rng(9, 0))?;
            let dev = exact
                .iter()
                .map(|(&b, &n)| (dos.ln_g()[b] - (n as f64).ln()).abs())
                .fold(0.0, f64::max);
            Ok((dev < 0.2, format!("max |Δ ln g| = {dev:.4}")))
        }),
    ]
}
