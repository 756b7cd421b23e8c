//! Independent reference values and synthetic data for the integration
#![allow(clippy::needless_range_loop)]
//! tests. Nothing here calls into the library's physics; constants are
//! spelled out again on purpose.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

pub const H: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = H / (2.0 * PI);
pub const KB: f64 = 1.380_649e-23;
pub const RHO: f64 = 3515.0;
pub const E: f64 = 1050e9;
pub const NU: f64 = 0.2;
pub const ALPHA: f64 = 1.3e15;
pub const BETA: f64 = 1.7e15;

pub fn speeds(e: f64, rho: f64, nu: f64) -> (f64, f64) {
    let vt = (e / rho / (2.0 * (1.0 + nu))).sqrt();
    let vl = (e / rho * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu))).sqrt();
    (vt, vl)
}

/// Bulk T₁ with the cubic factor taken as the angular splitting (2πν)³,
/// the reading under which the 46 GHz value comes out near 233 ns.
pub fn t1_bulk(nu_gs: f64, t: f64) -> f64 {
    let (vt, vl) = speeds(E, RHO, NU);
    let w = 2.0 * PI * nu_gs;
    let rate0 = H * (ALPHA * ALPHA + BETA * BETA / 4.0) / (PI * RHO)
        * (1.0 / (5.0 * vt.powi(5)) + 2.0 / (15.0 * vl.powi(5)))
        * w.powi(3);
    let coth = if t <= 0.0 {
        1.0
    } else {
        let x = HBAR * w / (2.0 * KB * t);
        x.cosh() / x.sinh()
    };
    1.0 / (rate0 * coth)
}

/// Longitudinal fundamental of a clamped–free bar with zero Poisson ratio.
pub fn rod_quarter_wave(e: f64, rho: f64, length: f64) -> f64 {
    (e / rho).sqrt() / (4.0 * length)
}

/// Four Lorentzian lines on a flat background, counts per sample.
#[derive(Clone, Copy, Debug)]
pub struct PlantedLines {
    pub centers: [f64; 4],
    pub fwhm: [f64; 4],
    pub areas: [f64; 4],
    pub baseline: f64,
}

impl PlantedLines {
    /// A–D around 406.7 THz with Δ_GS = 73 GHz, Δ_ES = 260 GHz and the
    /// upper branch (C, D) populated at temperature `t`.
    pub fn siv(t: f64, scale: f64) -> Self {
        Self::with_splittings(73e9, 260e9, t, scale)
    }

    pub fn with_splittings(gs: f64, es: f64, t: f64, scale: f64) -> Self {
        let nu0 = 406.7e12;
        let centers = [
            nu0 + es / 2.0 + gs / 2.0,
            nu0 + es / 2.0 - gs / 2.0,
            nu0 - es / 2.0 + gs / 2.0,
            nu0 - es / 2.0 - gs / 2.0,
        ];
        let boltz = (-H * es / (KB * t)).exp();
        // Split each branch unevenly so the test does not rely on symmetry.
        let (lower, upper) = (scale, scale * boltz);
        PlantedLines {
            centers,
            fwhm: [22e9, 25e9, 20e9, 24e9],
            areas: [0.55 * lower, 0.45 * lower, 0.6 * upper, 0.4 * upper],
            baseline: 20.0,
        }
    }

    pub fn value(&self, nu: f64) -> f64 {
        self.baseline
            + (0..4)
                .map(|k| {
                    let hw = self.fwhm[k] / 2.0;
                    self.areas[k] * hw / PI / ((nu - self.centers[k]).powi(2) + hw * hw)
                })
                .sum::<f64>()
    }

    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&f| self.value(f)).collect()
    }
}

pub fn spectrum_grid() -> Vec<f64> {
    (0..1000).map(|i| 406.7e12 - 500e9 + i as f64 * 1e9).collect()
}

pub fn poisson_counts(mean: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    mean.iter().map(|&m| if m > 0.0 { Poisson::new(m).unwrap().sample(rng) } else { 0.0 }).collect()
}

/// Saturation-recovery experiment as a two-level rate model.
///
/// While the laser is on, the bright population relaxes toward `p_on` at
/// rate `k_pump`; in the dark it recovers toward 1 with time constant `t1`.
/// The detector sees `rate · p(t) + background`.
#[derive(Clone, Copy, Debug)]
pub struct RecoveryModel {
    pub t1: f64,
    pub k_pump: f64,
    pub p_on: f64,
    pub rate: f64,
    pub background: f64,
}

impl RecoveryModel {
    /// Expected counts per bin for pulses of `len` after `delays`; bins of
    /// width `w` from t = 0, which is the end of a preparing pulse.
    pub fn expected(&self, len: f64, delays: &[f64], w: f64, n_bins: usize) -> Vec<f64> {
        let mut counts = vec![self.background * w; n_bins];
        let mut p_end = self.p_on;
        let mut t_end = 0.0;
        for &tau in delays {
            let p0 = 1.0 - (1.0 - p_end) * (-tau / self.t1).exp();
            let start = t_end + tau;
            // ∫ p over [a, b] inside the pulse, relative to its start.
            let integral = |a: f64, b: f64| {
                let k = self.k_pump;
                self.p_on * (b - a) + (p0 - self.p_on) * ((-k * a).exp() - (-k * b).exp()) / k
            };
            let first = (start / w).floor() as usize;
            let last = (((start + len) / w).ceil() as usize).min(n_bins);
            for i in first..last {
                let a = (i as f64 * w).max(start) - start;
                let b = ((i + 1) as f64 * w).min(start + len) - start;
                if b > a {
                    counts[i] += self.rate * integral(a, b);
                }
            }
            p_end = self.p_on + (p0 - self.p_on) * (-self.k_pump * len).exp();
            t_end = start + len;
        }
        counts
    }

    /// Exact peak height of the pulse following `tau` when the previous
    /// pulse ended at population `p_end`, for a tail window `win`.
    pub fn exact_height(&self, tau: f64, p_end: f64, len: f64, win: f64) -> f64 {
        let k = self.k_pump;
        let p0 = 1.0 - (1.0 - p_end) * (-tau / self.t1).exp();
        let d = p0 - self.p_on;
        let total = d * (1.0 - (-k * len).exp()) / k;
        let tail = d * ((-k * (len - win)).exp() - (-k * len).exp()) / k;
        self.rate * (total - len / win * tail)
    }
}
