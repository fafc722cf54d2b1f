//! Periodic transverse-field Ising chain: construction, exact diagonalization
//! and the exact quantities every sampler is checked against.
//!
//! Sign convention: `σᶻ|0⟩ = +|0⟩`, so bit `i` of a basis label being 0 means
//! spin `i` points up. The periodic sum is taken literally, which makes the
//! two-site chain count its single bond twice and the one-site chain reduce to
//! `J·I + h·σˣ`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::thermo::ThermoCurves;
use crate::wl_core::BinSpec;

/// Largest chain accepted by [`build_tfim`]; a dense 2^13 matrix is 512 MiB.
pub const MAX_DENSE_SPINS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianSpec {
    pub n_spins: usize,
    /// `J`, coefficient of the `σᶻσᶻ` bonds.
    pub coupling: f64,
    /// `h`, coefficient of the transverse `σˣ` field.
    pub field: f64,
}

impl HamiltonianSpec {
    pub fn new(n_spins: usize, coupling: f64, field: f64) -> Result<Self> {
        let spec = Self {
            n_spins,
            coupling,
            field,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_spins == 0 {
            return Err(Error::invalid("n_spins must be at least 1"));
        }
        if !self.coupling.is_finite() || !self.field.is_finite() {
            return Err(Error::invalid("coupling and field must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins
    }
}

/// Closed energy interval known to contain the whole spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWindow {
    pub e_lo: f64,
    pub e_hi: f64,
}

impl EnergyWindow {
    pub fn new(e_lo: f64, e_hi: f64) -> Result<Self> {
        if !(e_lo.is_finite() && e_hi.is_finite() && e_lo < e_hi) {
            return Err(Error::invalid(format!(
                "energy window requires finite e_lo < e_hi, got [{e_lo}, {e_hi}]"
            )));
        }
        Ok(Self { e_lo, e_hi })
    }

    pub fn width(&self) -> f64 {
        self.e_hi - self.e_lo
    }

    pub fn contains(&self, energy: f64) -> bool {
        energy >= self.e_lo && energy <= self.e_hi
    }
}

/// Ascending eigenvalues and, when available, the matching orthonormal
/// eigenvectors stored as columns in the computational basis.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<DMatrix<f64>>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Number of spins, when the dimension is a power of two.
    pub fn n_spins(&self) -> Option<usize> {
        let d = self.dim();
        d.is_power_of_two().then(|| d.trailing_zeros() as usize)
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Groups eigenvalues closer than `tol` into levels; returns the level of
    /// every eigen index and the level energies.
    pub fn levels(&self, tol: f64) -> (Vec<usize>, Vec<f64>) {
        let mut level_of = Vec::with_capacity(self.dim());
        let mut energies: Vec<f64> = Vec::new();
        for &e in &self.eigenvalues {
            match energies.last() {
                Some(&last) if (e - last).abs() <= tol => {}
                _ => energies.push(e),
            }
            level_of.push(energies.len() - 1);
        }
        (level_of, energies)
    }

    /// Plain-text fixture: `# N J h` header, then one eigenvalue per line with
    /// 15 significant digits.
    pub fn to_fixture(&self, spec: &HamiltonianSpec) -> String {
        let mut out = format!("# {} {} {}\n", spec.n_spins, spec.coupling, spec.field);
        for &e in &self.eigenvalues {
            let _ = writeln!(out, "{}", format_significant(e, 15));
        }
        out
    }

    pub fn write_fixture(&self, spec: &HamiltonianSpec, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_fixture(spec)).map_err(|e| Error::io(path, e))
    }

    /// Parses a fixture back into an eigenvalue-only spectrum.
    pub fn from_fixture(text: &str) -> Result<(HamiltonianSpec, Spectrum)> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty spectrum fixture".into()))?;
        let fields: Vec<&str> = header
            .strip_prefix('#')
            .ok_or_else(|| Error::Config("fixture header must start with `#`".into()))?
            .split_whitespace()
            .collect();
        if fields.len() != 3 {
            return Err(Error::Config(format!("bad fixture header `{header}`")));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{s}` in fixture")))
        };
        let n_spins = fields[0]
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("bad spin count `{}`", fields[0])))?;
        let spec = HamiltonianSpec::new(n_spins, parse(fields[1])?, parse(fields[2])?)?;
        let eigenvalues = lines.map(|l| parse(l.trim())).collect::<Result<Vec<_>>>()?;
        if eigenvalues.len() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                actual: eigenvalues.len(),
            });
        }
        Ok((
            spec,
            Spectrum {
                eigenvalues,
                eigenvectors: None,
            },
        ))
    }
}

/// Decimal (non-exponent) rendering with `digits` significant digits.
pub(crate) fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return if value == 0.0 {
            format!("{:.*}", digits - 1, 0.0)
        } else {
            format!("{value}")
        };
    }
    let magnitude = value.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).clamp(0, 40) as usize;
    format!("{value:.decimals$}")
}

/// Dense Hamiltonian matrix of the periodic chain.
pub fn build_tfim(spec: &HamiltonianSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if spec.n_spins > MAX_DENSE_SPINS {
        return Err(Error::SizeGuard {
            what: "dense Hamiltonian",
            requested: spec.n_spins,
            limit: MAX_DENSE_SPINS,
        });
    }
    let n = spec.n_spins;
    let dim = spec.dim();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for s in 0..dim {
        let z = |i: usize| if (s >> i) & 1 == 0 { 1.0 } else { -1.0 };
        let bonds: f64 = (0..n).map(|i| z(i) * z((i + 1) % n)).sum();
        h[(s, s)] = spec.coupling * bonds;
        for i in 0..n {
            h[(s ^ (1 << i), s)] += spec.field;
        }
    }
    Ok(h)
}

/// Full eigendecomposition of a real symmetric matrix, eigenvalues ascending.
pub fn diagonalize(h: &DMatrix<f64>) -> Result<Spectrum> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            actual: h.ncols(),
        });
    }
    let deviation = (h - h.transpose()).amax();
    if deviation > 1e-10 {
        return Err(Error::NotHermitian { deviation });
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(h.nrows(), h.ncols(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: Some(eigenvectors),
    })
}

/// Triangle bound on the operator norm: `N(|J| + |h|)`. A chain with no
/// couplings at all gets the unit window `[-1, 1]` so the window stays proper.
pub fn energy_window(spec: &HamiltonianSpec) -> EnergyWindow {
    let bound = spec.n_spins as f64 * (spec.coupling.abs() + spec.field.abs());
    let bound = if bound > 0.0 { bound } else { 1.0 };
    EnergyWindow {
        e_lo: -bound,
        e_hi: bound,
    }
}

/// Canonical-ensemble quantities of the exact spectrum on `beta_grid`.
///
/// Partition sums are shifted by `max(-βE_i)`; `F` is undefined (NaN) at `β = 0`.
pub fn exact_thermo(spectrum: &Spectrum, beta_grid: &[f64]) -> Result<ThermoCurves> {
    if beta_grid.is_empty() {
        return Err(Error::invalid("empty β grid"));
    }
    if spectrum.eigenvalues.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    let mut curves = ThermoCurves::with_grid(beta_grid.to_vec());
    for (idx, &beta) in beta_grid.iter().enumerate() {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("β must be finite and ≥ 0, got {beta}")));
        }
        let shift = spectrum
            .eigenvalues
            .iter()
            .map(|&e| -beta * e)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut z, mut e1, mut e2) = (0.0, 0.0, 0.0);
        for &e in &spectrum.eigenvalues {
            let w = (-beta * e - shift).exp();
            z += w;
            e1 += w * e;
            e2 += w * e * e;
        }
        let u = e1 / z;
        let ln_z = z.ln() + shift;
        let s = ln_z + beta * u;
        curves.u[idx] = u;
        curves.cv[idx] = (beta * beta * (e2 / z - u * u)).max(0.0);
        curves.s[idx] = s;
        curves.f[idx] = if beta > 0.0 { u - s / beta } else { f64::NAN };
    }
    Ok(curves)
}

/// Exact eigenvalue count per bin; the counts sum to the spectrum dimension.
pub fn brute_force_dos(spectrum: &Spectrum, bins: &BinSpec) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; bins.ell()];
    for &e in &spectrum.eigenvalues {
        counts[bins.bin_of(e)?] += 1;
    }
    Ok(counts)
}
