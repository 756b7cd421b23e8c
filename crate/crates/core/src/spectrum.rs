//! Density of states from a mode list and its power-law exponent.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian-broadened DOS on a uniform grid (states per Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosCurve {
    #[serde(rename = "nu_grid_Hz")]
    pub nu: Vec<f64>,
    #[serde(rename = "rho_per_Hz")]
    pub rho: Vec<f64>,
    #[serde(rename = "kernel_sigma_Hz")]
    pub sigma: f64,
}

/// Inclusive grid f_lo, f_lo + step, … up to f_hi (within half a step).
pub fn uniform_grid(f_lo: f64, f_hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && f_hi > f_lo && f_lo.is_finite() && f_hi.is_finite()) {
        return Err(Error::invalid(format!("bad grid ({f_lo}, {f_hi}, {step})")));
    }
    let n = ((f_hi - f_lo) / step + 0.5).floor() as usize + 1;
    Ok((0..n).map(|i| f_lo + step * i as f64).collect())
}

/// ρ(ν) = Σ_n G_σ(ν − ν_n) with unit-area Gaussians.
pub fn dos(frequencies: &[f64], sigma: f64, grid: &[f64]) -> Result<DosCurve> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("kernel width must be positive, got {sigma}")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("DOS grid must be strictly ascending"));
    }
    if frequencies.is_empty() {
        log::warn!("empty mode list: DOS is identically zero");
    }
    let norm = 1.0 / (sigma * (2.0 * PI).sqrt());
    let rho = grid
        .par_iter()
        .map(|&nu| {
            frequencies
                .iter()
                .map(|&f| {
                    let z = (nu - f) / sigma;
                    if z.abs() > 40.0 {
                        0.0
                    } else {
                        norm * (-0.5 * z * z).exp()
                    }
                })
                .sum()
        })
        .collect();
    Ok(DosCurve { nu: grid.to_vec(), rho, sigma })
}

impl DosCurve {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.nu.windows(2).zip(self.rho.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("nu_Hz,rho_per_Hz\n");
        for (n, r) in self.nu.iter().zip(&self.rho) {
            let _ = writeln!(s, "{n:e},{r:e}");
        }
        s
    }
}

/// Result of a log-log line fit ρ ≈ c·ν^p (ν in Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub p: f64,
    pub c: f64,
    pub rmse: f64,
    #[serde(rename = "band_Hz")]
    pub band: [f64; 2],
    pub samples: usize,
}

/// Least squares of log ρ on log ν over samples with ν in [f_lo, f_hi].
pub fn fit_power_law(curve: &DosCurve, band: (f64, f64)) -> Result<PowerLawFit> {
    let (lo, hi) = band;
    if !(hi > lo && lo > 0.0) {
        return Err(Error::invalid(format!("fit band must satisfy 0 < f_lo < f_hi, got ({lo}, {hi})")));
    }
    let (first, last) = match (curve.nu.first(), curve.nu.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::invalid("empty DOS curve")),
    };
    let slack = 1e-9 * hi;
    if lo < first - slack || hi > last + slack {
        return Err(Error::invalid(format!("fit band ({lo:e}, {hi:e}) exceeds the grid ({first:e}, {last:e})")));
    }
    let pts: Vec<(f64, f64)> =
        curve.nu.iter().zip(&curve.rho).filter(|(&n, _)| n >= lo && n <= hi).map(|(&n, &r)| (n, r)).collect();
    if pts.len() < 8 {
        return Err(Error::invalid(format!("only {} DOS samples in the fit band, need 8", pts.len())));
    }
    if let Some(&(n, r)) = pts.iter().find(|(_, r)| !(*r > 0.0)) {
        return Err(Error::invalid(format!("non-positive DOS {r:e} at {n:e} Hz inside the fit band")));
    }
    // Centering the abscissa at its geometric mean keeps the normal equations
    // well conditioned and makes the slope exactly scale invariant.
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let p = sxy / sxx;
    let ln_c = ym - p * xm;
    let rmse = (xs.iter().zip(&ys).map(|(x, y)| (y - ym - p * (x - xm)).powi(2)).sum::<f64>() / m).sqrt();
    Ok(PowerLawFit { p, c: ln_c.exp(), rmse, band: [lo, hi], samples: pts.len() })
}
