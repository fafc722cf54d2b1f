//! Canonical thermodynamics from a density of states or a heat-capacity curve.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::stats::{log_sum_exp, mean, rmse, sample_sd};
use crate::wl_core::{BinSpec, NormalizedDos};

/// Per-point standard deviations across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Bands {
    pub u: Vec<f64>,
    pub cv: Vec<f64>,
    pub s: Vec<f64>,
    pub f: Vec<f64>,
}

/// `U`, `Cv`, `S` and `F` on an ascending β grid. `F` is NaN at `β = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoCurves {
    pub beta: Vec<f64>,
    pub u: Vec<f64>,
    pub cv: Vec<f64>,
    pub s: Vec<f64>,
    pub f: Vec<f64>,
    pub sd: Option<Bands>,
}

impl ThermoCurves {
    /// Zero curves on `beta`.
    pub fn with_grid(beta: Vec<f64>) -> Self {
        let n = beta.len();
        Self {
            beta,
            u: vec![0.0; n],
            cv: vec![0.0; n],
            s: vec![0.0; n],
            f: vec![0.0; n],
            sd: None,
        }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// Curve for `quantity`, one of `U`, `Cv`, `S`, `F`.
    pub fn quantity(&self, quantity: Quantity) -> &[f64] {
        match quantity {
            Quantity::U => &self.u,
            Quantity::Cv => &self.cv,
            Quantity::S => &self.s,
            Quantity::F => &self.f,
        }
    }

    pub fn band(&self, quantity: Quantity) -> Option<&[f64]> {
        self.sd.as_ref().map(|b| match quantity {
            Quantity::U => b.u.as_slice(),
            Quantity::Cv => b.cv.as_slice(),
            Quantity::S => b.s.as_slice(),
            Quantity::F => b.f.as_slice(),
        })
    }

    /// `beta,U,U_sd,Cv,Cv_sd,S,S_sd,F,F_sd`; standard deviations are 0 without bands.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta,U,U_sd,Cv,Cv_sd,S,S_sd,F,F_sd\n");
        for i in 0..self.len() {
            let _ = write!(out, "{}", self.beta[i]);
            for q in Quantity::ALL {
                let sd = self.band(q).map_or(0.0, |b| b[i]);
                let _ = write!(out, ",{},{}", self.quantity(q)[i], sd);
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`ThermoCurves::to_csv`] output.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "beta,U,U_sd,Cv,Cv_sd,S,S_sd,F,F_sd" => {}
            _ => return Err(Error::invalid("missing thermodynamics CSV header")),
        }
        let mut rows: Vec<[f64; 9]> = Vec::new();
        for line in lines {
            let vals: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::invalid(format!("bad CSV value in '{line}': {e}")))?;
            let row: [f64; 9] = vals
                .try_into()
                .map_err(|_| Error::invalid(format!("expected 9 columns in '{line}'")))?;
            rows.push(row);
        }
        let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
        Ok(Self {
            beta: col(0),
            u: col(1),
            cv: col(3),
            s: col(5),
            f: col(7),
            sd: Some(Bands {
                u: col(2),
                cv: col(4),
                s: col(6),
                f: col(8),
            }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    U,
    Cv,
    S,
    F,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Quantity::U, Quantity::Cv, Quantity::S, Quantity::F];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::U => "U",
            Quantity::Cv => "Cv",
            Quantity::S => "S",
            Quantity::F => "F",
        }
    }
}

fn check_grid(beta_grid: &[f64]) -> Result<()> {
    if beta_grid.is_empty() {
        return Err(Error::invalid("empty β grid"));
    }
    if beta_grid.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(Error::invalid("β grid entries must be finite and ≥ 0"));
    }
    if beta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("β grid must be strictly ascending"));
    }
    Ok(())
}

/// Observables of a normalized binned DOS, each bin represented by its centre.
pub fn thermo_from_dos(dos: &NormalizedDos, bins: &BinSpec, beta_grid: &[f64]) -> Result<ThermoCurves> {
    check_grid(beta_grid)?;
    if dos.ln_g().len() != bins.ell() {
        return Err(Error::DimensionMismatch {
            expected: bins.ell(),
            actual: dos.ln_g().len(),
        });
    }
    let levels: Vec<(f64, f64)> = dos
        .visited_bins()
        .map(|i| (dos.ln_g()[i], bins.center(i)))
        .collect();
    let mut curves = ThermoCurves::with_grid(beta_grid.to_vec());
    for (idx, &beta) in beta_grid.iter().enumerate() {
        let ln_z = log_sum_exp(levels.iter().map(|&(g, e)| g - beta * e));
        let (mut e1, mut e2) = (0.0, 0.0);
        for &(g, e) in &levels {
            let w = (g - beta * e - ln_z).exp();
            e1 += w * e;
            e2 += w * e * e;
        }
        let s = ln_z + beta * e1;
        curves.u[idx] = e1;
        curves.cv[idx] = (beta * beta * (e2 - e1 * e1)).max(0.0);
        curves.s[idx] = s;
        curves.f[idx] = if beta > 0.0 { -ln_z / beta } else { f64::NAN };
    }
    Ok(curves)
}

/// `S(β) = ∫_β^∞ Cv/β' dβ'` by the trapezoidal rule over grid points up to
/// `beta_cutoff`, plus one trapezoid from `Cv(β_c)` down to zero one grid
/// interval past the cutoff. Points above the cutoff get `S = 0`.
pub fn entropy_from_cv(beta_grid: &[f64], cv: &[f64], beta_cutoff: f64) -> Result<Vec<f64>> {
    check_grid(beta_grid)?;
    if cv.len() != beta_grid.len() {
        return Err(Error::DimensionMismatch {
            expected: beta_grid.len(),
            actual: cv.len(),
        });
    }
    if cv.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("heat capacity must be finite"));
    }
    let Some(c) = beta_grid.iter().rposition(|&b| b <= beta_cutoff + 1e-12) else {
        return Err(Error::invalid(format!(
            "β cutoff {beta_cutoff} lies below the grid start {}",
            beta_grid[0]
        )));
    };
    // Cv ~ β² near β = 0, so Cv/β → 0 there
    let integrand = |i: usize| {
        if beta_grid[i] > 0.0 {
            cv[i] / beta_grid[i]
        } else {
            0.0
        }
    };
    let spacing = if c > 0 {
        beta_grid[c] - beta_grid[c - 1]
    } else {
        beta_grid[c]
    };
    let mut s = vec![0.0; beta_grid.len()];
    s[c] = 0.5 * spacing * integrand(c);
    for i in (0..c).rev() {
        s[i] = s[i + 1] + 0.5 * (beta_grid[i + 1] - beta_grid[i]) * (integrand(i) + integrand(i + 1));
    }
    Ok(s)
}

/// `F = U − S/β`; every β must be positive.
pub fn free_energy(u: &[f64], s: &[f64], beta_grid: &[f64]) -> Result<Vec<f64>> {
    if u.len() != beta_grid.len() || s.len() != beta_grid.len() {
        return Err(Error::DimensionMismatch {
            expected: beta_grid.len(),
            actual: u.len().min(s.len()),
        });
    }
    if beta_grid.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::invalid("free energy needs β > 0 at every grid point"));
    }
    Ok(u.iter()
        .zip(s)
        .zip(beta_grid)
        .map(|((u, s), b)| u - s / b)
        .collect())
}

/// Pointwise `method − exact`, carrying over the bands of both inputs in quadrature.
pub fn error_curves(method: &ThermoCurves, exact: &ThermoCurves) -> Result<ThermoCurves> {
    same_grid(&method.beta, &exact.beta)?;
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>();
    let sd = match (&method.sd, &exact.sd) {
        (None, None) => None,
        (Some(b), None) | (None, Some(b)) => Some(b.clone()),
        (Some(a), Some(b)) => {
            let q = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p.hypot(*q)).collect();
            Some(Bands {
                u: q(&a.u, &b.u),
                cv: q(&a.cv, &b.cv),
                s: q(&a.s, &b.s),
                f: q(&a.f, &b.f),
            })
        }
    };
    Ok(ThermoCurves {
        beta: method.beta.clone(),
        u: diff(&method.u, &exact.u),
        cv: diff(&method.cv, &exact.cv),
        s: diff(&method.s, &exact.s),
        f: diff(&method.f, &exact.f),
        sd,
    })
}

fn same_grid(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::invalid("β grids differ"));
    }
    Ok(())
}

/// Mean curves with sample standard deviation bands.
pub fn aggregate(runs: &[ThermoCurves]) -> Result<ThermoCurves> {
    let first = runs
        .first()
        .ok_or_else(|| Error::invalid("no runs to aggregate"))?;
    for r in runs {
        same_grid(&first.beta, &r.beta)?;
    }
    let column = |pick: fn(&ThermoCurves) -> &Vec<f64>, i: usize| -> Vec<f64> {
        runs.iter().map(|r| pick(r)[i]).collect()
    };
    let n = first.len();
    let stat = |pick: fn(&ThermoCurves) -> &Vec<f64>| -> (Vec<f64>, Vec<f64>) {
        (0..n)
            .map(|i| {
                let xs = column(pick, i);
                (mean(&xs), sample_sd(&xs))
            })
            .unzip()
    };
    let (u, u_sd) = stat(|c| &c.u);
    let (cv, cv_sd) = stat(|c| &c.cv);
    let (s, s_sd) = stat(|c| &c.s);
    let (f, f_sd) = stat(|c| &c.f);
    Ok(ThermoCurves {
        beta: first.beta.clone(),
        u,
        cv,
        s,
        f,
        sd: Some(Bands {
            u: u_sd,
            cv: cv_sd,
            s: s_sd,
            f: f_sd,
        }),
    })
}

/// RMSE of each quantity of an error curve, NaN entries skipped.
pub fn rmse_by_quantity(errors: &ThermoCurves) -> [(Quantity, f64); 4] {
    Quantity::ALL.map(|q| (q, rmse(errors.quantity(q))))
}

/// Evenly spaced grid `start, start + step, …` up to and including `stop`.
pub fn beta_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start >= 0.0 && stop >= start && stop.is_finite()) {
        return Err(Error::invalid(format!(
            "invalid β grid start={start} stop={stop} step={step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}
