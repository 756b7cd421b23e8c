//! Four-line zero-phonon spectra: Lorentzian fit, level splittings and
//! Boltzmann thermometry from the excited-state populations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lm::{self, Problem};
use crate::error::{Error, Result};
use crate::units::{BOLTZMANN, PLANCK, SPEED_OF_LIGHT};

/// Photoluminescence counts on a strictly ascending frequency axis (Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    #[serde(rename = "frequency_Hz")]
    pub freq: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Spectrum {
    /// Accepts either axis direction and stores it ascending.
    pub fn new(freq: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if freq.len() != counts.len() {
            return Err(Error::invalid(format!("{} frequencies but {} counts", freq.len(), counts.len())));
        }
        if freq.len() < 2 {
            return Err(Error::invalid("spectrum needs at least two samples"));
        }
        if let Some(c) = counts.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return Err(Error::invalid(format!("counts must be finite and non-negative, got {c}")));
        }
        let ascending = freq.windows(2).all(|w| w[1] > w[0]);
        let descending = freq.windows(2).all(|w| w[1] < w[0]);
        if !(ascending || descending) || freq.iter().any(|f| !f.is_finite()) {
            return Err(Error::invalid("spectral axis must be strictly monotonic"));
        }
        let (mut freq, mut counts) = (freq, counts);
        if descending {
            freq.reverse();
            counts.reverse();
        }
        Ok(Spectrum { freq, counts })
    }

    /// Vacuum wavelengths in metres, converted with ν = c/λ.
    pub fn from_wavelength(lambda: &[f64], counts: Vec<f64>) -> Result<Self> {
        if let Some(l) = lambda.iter().find(|l| !(**l > 0.0)) {
            return Err(Error::invalid(format!("wavelength must be positive, got {l}")));
        }
        Spectrum::new(lambda.iter().map(|l| SPEED_OF_LIGHT / l).collect(), counts)
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    #[serde(rename = "center_Hz")]
    pub center: f64,
    #[serde(rename = "fwhm_Hz")]
    pub fwhm: f64,
    /// Integrated counts times Hz.
    pub area: f64,
}

impl Line {
    pub fn peak_height(&self) -> f64 {
        2.0 * self.area / (PI * self.fwhm)
    }

    pub fn profile(&self, nu: f64) -> f64 {
        let hw = 0.5 * self.fwhm;
        self.area * hw / PI / ((nu - self.center).powi(2) + hw * hw)
    }
}

/// Lines A, B, C, D in descending frequency plus a flat baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSet {
    pub lines: [Line; 4],
    /// One-sigma errors of each field of `lines`.
    pub errors: [Line; 4],
    pub baseline: f64,
    pub baseline_err: f64,
    pub chi2_reduced: f64,
}

impl LineSet {
    /// Builds a set with zero errors from any line order.
    pub fn from_lines(mut lines: [Line; 4], baseline: f64) -> Result<Self> {
        lines.sort_by(|a, b| b.center.total_cmp(&a.center));
        let zero = Line { center: 0.0, fwhm: 0.0, area: 0.0 };
        let set = LineSet { lines, errors: [zero; 4], baseline, baseline_err: 0.0, chi2_reduced: 0.0 };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lines.windows(2).all(|w| w[0].center > w[1].center) {
            return Err(Error::invalid("line centers must satisfy A > B > C > D"));
        }
        for (l, name) in self.lines.iter().zip(["A", "B", "C", "D"]) {
            if !(l.fwhm > 0.0 && l.area > 0.0) {
                return Err(Error::invalid(format!("line {name} needs positive width and area")));
            }
        }
        Ok(())
    }

    pub fn model(&self, nu: f64) -> f64 {
        self.baseline + self.lines.iter().map(|l| l.profile(nu)).sum::<f64>()
    }
}

#[derive(Debug, Clone, Default)]
pub struct LineFitOptions {
    /// Initial centers in Hz; found automatically when absent.
    pub guesses: Option<[f64; 4]>,
    pub max_iter: usize,
}

impl LineFitOptions {
    pub fn new() -> Self {
        LineFitOptions { guesses: None, max_iter: 500 }
    }
}

// Internal coordinates: x = (ν − ν_ref)/scale, so the fit never sees 10¹⁴.
struct FourLines<'a> {
    x: &'a [f64],
    y: &'a [f64],
    inv_sigma: Vec<f64>,
}

// Parameter layout: [c, w, a] × 4, then the baseline.
impl Problem for FourLines<'_> {
    fn n_params(&self) -> usize {
        13
    }

    fn evaluate(&self, p: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.x.len();
        let mut r = DVector::zeros(m);
        let mut j = DMatrix::zeros(m, 13);
        for i in 0..m {
            let s = self.inv_sigma[i];
            let mut f = p[12];
            for k in 0..4 {
                let (c, w, a) = (p[3 * k], p[3 * k + 1], p[3 * k + 2]);
                let d = self.x[i] - c;
                let hw = 0.5 * w;
                let den = d * d + hw * hw;
                let shape = hw / PI / den;
                f += a * shape;
                j[(i, 3 * k)] = s * a * shape * 2.0 * d / den;
                // ∂/∂w of (w/2)/(π(d² + w²/4)) = (d² − w²/4)/(2π den²)
                j[(i, 3 * k + 1)] = s * a * (d * d - hw * hw) / (2.0 * PI * den * den);
                j[(i, 3 * k + 2)] = s * shape;
            }
            j[(i, 12)] = s;
            r[i] = s * (f - self.y[i]);
        }
        (r, j)
    }

    fn feasible(&self, p: &[f64]) -> bool {
        (0..4).all(|k| p[3 * k + 1] > 0.0 && p[3 * k + 2] > 0.0)
    }
}

/// A local maximum with its topographic prominence.
#[derive(Debug, Clone, Copy)]
struct Peak {
    index: usize,
    prominence: f64,
}

fn find_peaks(y: &[f64]) -> Vec<Peak> {
    let n = y.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            // Walk across a plateau and take its middle.
            let mut k = i;
            while k + 1 < n && y[k + 1] == y[i] {
                k += 1;
            }
            if k + 1 < n && y[k + 1] < y[i] {
                let mid = (i + k) / 2;
                let left = y[..i].iter().rev().take_while(|&&v| v <= y[i]).fold(y[i], |m, &v| m.min(v));
                let right = y[k + 1..].iter().take_while(|&&v| v <= y[i]).fold(y[i], |m, &v| m.min(v));
                peaks.push(Peak { index: mid, prominence: y[i] - left.max(right) });
            }
            i = k + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample noise from first differences, robust to the peaks themselves.
fn noise_level(y: &[f64]) -> f64 {
    let d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    median(d) / (0.6745 * 2f64.sqrt())
}

fn half_width_at(x: &[f64], y: &[f64], idx: usize, base: f64) -> f64 {
    let half = base + 0.5 * (y[idx] - base);
    let dx = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    let mut l = idx;
    while l > 0 && y[l] > half {
        l -= 1;
    }
    let mut r = idx;
    while r + 1 < y.len() && y[r] > half {
        r += 1;
    }
    (x[r] - x[l]).max(2.0 * dx)
}

/// Least-squares fit of four Lorentzians on a constant baseline, with
/// Poisson weights σ² = max(counts, 1).
pub fn fit_four_lines(s: &Spectrum, opts: &LineFitOptions) -> Result<LineSet> {
    let n = s.len();
    if n < 14 {
        return Err(Error::invalid(format!("{n} samples cannot constrain a four-line fit")));
    }
    let nu_ref = 0.5 * (s.freq[0] + s.freq[n - 1]);
    let scale = (s.freq[n - 1] - s.freq[0]) / 1000.0;
    let x: Vec<f64> = s.freq.iter().map(|f| (f - nu_ref) / scale).collect();
    let y = &s.counts;
    let base0 = {
        let mut v = y.clone();
        v.sort_by(f64::total_cmp);
        v[n / 10]
    };

    let centers_idx: Vec<usize> = match opts.guesses {
        Some(g) => {
            let mut idx = Vec::with_capacity(4);
            for c in g {
                if !(c >= s.freq[0] && c <= s.freq[n - 1]) {
                    return Err(Error::invalid(format!("line guess {c:e} Hz lies outside the spectrum")));
                }
                idx.push(s.freq.partition_point(|f| *f < c).min(n - 1));
            }
            idx
        }
        None => {
            let noise = noise_level(y);
            let mut peaks: Vec<Peak> =
                find_peaks(y).into_iter().filter(|p| p.prominence > 5.0 * noise && p.prominence > 0.0).collect();
            if peaks.len() < 4 {
                return Err(Error::invalid(format!(
                    "peaks unresolvable: {} of 4 lines stand out of the noise",
                    peaks.len()
                )));
            }
            peaks.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
            peaks.truncate(4);
            peaks.iter().map(|p| p.index).collect()
        }
    };

    let mut p0 = Vec::with_capacity(13);
    for &i in &centers_idx {
        let w = half_width_at(&x, y, i, base0);
        let h = (y[i] - base0).max(1e-12 * y[i].abs().max(1.0));
        p0.extend_from_slice(&[x[i], w, 0.5 * PI * h * w]);
    }
    p0.push(base0);

    let problem = FourLines { x: &x, y, inv_sigma: y.iter().map(|c| 1.0 / c.max(1.0).sqrt()).collect() };
    let fit = lm::minimize(&problem, &p0, opts.max_iter.max(1))?;
    let se = fit.std_errors();
    let p = &fit.params;
    log::debug!("four-line fit: {} iterations, reduced chi2 {:.3}", fit.iterations, fit.chi2_reduced());

    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| p[3 * b].total_cmp(&p[3 * a]));
    let line = |k: usize, v: &[f64], offset: f64| Line {
        center: offset + v[3 * k] * scale,
        fwhm: v[3 * k + 1] * scale,
        area: v[3 * k + 2] * scale,
    };
    let lines = [0, 1, 2, 3].map(|i| line(order[i], p, nu_ref));
    let errors = [0, 1, 2, 3].map(|i| line(order[i], &se, 0.0));
    let set = LineSet { lines, errors, baseline: p[12], baseline_err: se[12], chi2_reduced: fit.chi2_reduced() };
    set.validate().map_err(|e| Error::Numerical(format!("fit collapsed two lines: {e}")))?;
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Splittings {
    #[serde(rename = "delta_ES_Hz")]
    pub delta_es: f64,
    #[serde(rename = "delta_GS_Hz")]
    pub delta_gs: f64,
    #[serde(rename = "sigma_ES_Hz")]
    pub sigma_es: f64,
    #[serde(rename = "sigma_GS_Hz")]
    pub sigma_gs: f64,
    /// |(ν_A − ν_B) − (ν_C − ν_D)|
    #[serde(rename = "residual_Hz")]
    pub residual: f64,
}

/// Level splittings with Δ_GS = ν_A − ν_B = ν_C − ν_D and Δ_ES = ν_A − ν_C.
pub fn splittings(lines: &LineSet) -> Result<Splittings> {
    lines.validate()?;
    let [a, b, c, d] = lines.lines.map(|l| l.center);
    let delta_gs = 0.5 * ((a - b) + (c - d));
    let delta_es = 0.5 * ((a - c) + (b - d));
    let residual = ((a - b) - (c - d)).abs();
    // All three combinations use each center once with weight ±1 or ±½.
    let var: f64 = lines.errors.iter().map(|e| e.center * e.center).sum();
    let combined = var.sqrt();
    let tol = (3.0 * combined).max(1e-9 * delta_gs.abs());
    if residual > tol {
        return Err(Error::invalid(format!(
            "inconsistent level diagram: |(A−B) − (C−D)| = {residual:e} Hz exceeds 3σ = {:e} Hz",
            3.0 * combined
        )));
    }
    Ok(Splittings { delta_es, delta_gs, sigma_es: 0.5 * combined, sigma_gs: 0.5 * combined, residual })
}

/// Which doublet is populated as the upper excited branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperBranch {
    /// Ratio (C + D)/(A + B), the form used for the measurements here.
    #[default]
    CD,
    AB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intensity {
    #[default]
    Area,
    PeakHeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermometryOptions {
    pub upper_branch: UpperBranch,
    pub intensity: Intensity,
    #[serde(rename = "T_max_K")]
    pub t_max: f64,
}

impl Default for ThermometryOptions {
    fn default() -> Self {
        ThermometryOptions { upper_branch: UpperBranch::CD, intensity: Intensity::Area, t_max: 400.0 }
    }
}

/// Upper-to-lower population ratio exp(−hν_ES/k_B T).
pub fn boltzmann_ratio(temperature: f64, delta_es_hz: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    (-PLANCK * delta_es_hz / (BOLTZMANN * temperature)).exp()
}

/// Intensity ratio of the upper branch to the lower one.
pub fn branch_ratio(lines: &LineSet, opts: &ThermometryOptions) -> f64 {
    let w = |l: &Line| match opts.intensity {
        Intensity::Area => l.area,
        Intensity::PeakHeight => l.peak_height(),
    };
    let [a, b, c, d] = lines.lines.each_ref().map(w);
    match opts.upper_branch {
        UpperBranch::CD => (c + d) / (a + b),
        UpperBranch::AB => (a + b) / (c + d),
    }
}

/// Temperature from the excited-state population ratio.
pub fn temperature(lines: &LineSet, delta_es_hz: f64, opts: &ThermometryOptions) -> Result<f64> {
    if !(delta_es_hz > 0.0) {
        return Err(Error::invalid(format!("excited-state splitting must be positive, got {delta_es_hz:e} Hz")));
    }
    if lines.lines.iter().any(|l| !(l.area > 0.0 && l.fwhm > 0.0)) {
        return Err(Error::invalid("all four line intensities must be positive"));
    }
    temperature_from_ratio(branch_ratio(lines, opts), delta_es_hz, opts.t_max)
}

pub fn temperature_from_ratio(ratio: f64, delta_es_hz: f64, t_max: f64) -> Result<f64> {
    if !(ratio > 0.0) {
        return Err(Error::invalid(format!("population ratio must be positive, got {ratio}")));
    }
    if ratio >= 1.0 {
        return Err(Error::invalid(format!("non-thermal population: upper/lower ratio {ratio} >= 1")));
    }
    let t = PLANCK * delta_es_hz / (BOLTZMANN * (-ratio.ln()));
    if t > t_max {
        return Err(Error::invalid(format!("temperature {t:.1} K exceeds the configured maximum {t_max} K")));
    }
    Ok(t)
}
