//! Saturation-recovery traces: per-pulse peak heights and the T₁ fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lm::{self, Problem};
use crate::error::{Error, Result};
use crate::units::NS;

/// Pulse timing as stored on disk (nanoseconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub pulse_len_ns: f64,
    pub delays_ns: Vec<f64>,
    /// End of the preparing pulse; the first delay counts from here.
    #[serde(default)]
    pub start_ns: f64,
}

/// Pulse `i` starts `delays[i]` after pulse `i − 1` ends. The trace is
/// assumed to open at `start`, right after a preparing pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    pub pulse_len: f64,
    pub delays: Vec<f64>,
    pub start: f64,
}

impl PulseSchedule {
    pub fn new(pulse_len: f64, delays: Vec<f64>, start: f64) -> Result<Self> {
        let s = PulseSchedule { pulse_len, delays, start };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pulse_len > 0.0 && self.pulse_len.is_finite()) {
            return Err(Error::invalid(format!("pulse length must be positive, got {:e} s", self.pulse_len)));
        }
        if self.delays.is_empty() {
            return Err(Error::invalid("schedule lists no delays"));
        }
        if self.delays.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::invalid("delays must be finite and non-negative"));
        }
        if !self.delays.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::invalid("delays must increase strictly along the sequence"));
        }
        Ok(())
    }

    /// (pulse start, preceding delay) for every pulse.
    pub fn pulses(&self) -> Vec<(f64, f64)> {
        let mut end = self.start;
        self.delays
            .iter()
            .map(|&tau| {
                let t = end + tau;
                end = t + self.pulse_len;
                (t, tau)
            })
            .collect()
    }

    pub fn end(&self) -> f64 {
        self.start + self.delays.iter().sum::<f64>() + self.delays.len() as f64 * self.pulse_len
    }
}

impl From<&PulseSchedule> for ScheduleFile {
    fn from(s: &PulseSchedule) -> Self {
        ScheduleFile {
            pulse_len_ns: s.pulse_len / NS,
            delays_ns: s.delays.iter().map(|d| d / NS).collect(),
            start_ns: s.start / NS,
        }
    }
}

impl TryFrom<ScheduleFile> for PulseSchedule {
    type Error = Error;
    fn try_from(f: ScheduleFile) -> Result<Self> {
        PulseSchedule::new(f.pulse_len_ns * NS, f.delays_ns.iter().map(|d| d * NS).collect(), f.start_ns * NS)
    }
}

/// Binned photon counts; bin `i` covers [t0 + i·w, t0 + (i+1)·w).
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrace {
    pub t0: f64,
    pub bin_width: f64,
    pub counts: Vec<f64>,
    pub schedule: PulseSchedule,
}

impl PulseTrace {
    pub fn new(t0: f64, bin_width: f64, counts: Vec<f64>, schedule: PulseSchedule) -> Result<Self> {
        let t = PulseTrace { t0, bin_width, counts, schedule };
        t.validate()?;
        Ok(t)
    }

    /// From bin start times, which must be evenly spaced.
    pub fn from_samples(times: &[f64], counts: Vec<f64>, schedule: PulseSchedule) -> Result<Self> {
        if times.len() != counts.len() || times.len() < 2 {
            return Err(Error::invalid("trace needs matching time and count columns with at least two rows"));
        }
        let w = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(w > 0.0) || times.windows(2).any(|p| ((p[1] - p[0]) / w - 1.0).abs() > 1e-6) {
            return Err(Error::invalid("trace time stamps must be evenly spaced and increasing"));
        }
        PulseTrace::new(times[0], w, counts, schedule)
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(self.bin_width > 0.0) {
            return Err(Error::invalid("bin width must be positive"));
        }
        if self.counts.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::invalid("counts must be finite and non-negative"));
        }
        let t_end = self.t0 + self.bin_width * self.counts.len() as f64;
        let first = self.schedule.pulses()[0].0;
        let tol = 1e-9 * self.bin_width;
        if first < self.t0 - tol || self.schedule.end() > t_end + tol {
            return Err(Error::invalid(format!(
                "schedule spans [{first:e}, {:e}] s but the trace covers [{:e}, {t_end:e}] s",
                self.schedule.end(),
                self.t0
            )));
        }
        Ok(())
    }

    /// Calls `f(bin, overlap fraction)` for bins meeting [a, b).
    fn for_bins(&self, a: f64, b: f64, mut f: impl FnMut(usize, f64)) {
        let w = self.bin_width;
        let lo = (((a - self.t0) / w).floor().max(0.0)) as usize;
        let hi = (((b - self.t0) / w).ceil().max(0.0) as usize).min(self.counts.len());
        for i in lo..hi {
            let s = self.t0 + i as f64 * w;
            let overlap = (b.min(s + w) - a.max(s)) / w;
            // Edges that coincide with bin boundaries up to roundoff count fully or not at all.
            let overlap = if overlap > 1.0 - 1e-9 { 1.0 } else { overlap };
            if overlap > 1e-9 {
                f(i, overlap);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightOptions {
    /// Tail of each pulse used to estimate the stationary rate.
    #[serde(rename = "baseline_window_s")]
    pub baseline_window: f64,
}

impl Default for HeightOptions {
    fn default() -> Self {
        HeightOptions { baseline_window: 50.0 * NS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakHeight {
    #[serde(rename = "tau_s")]
    pub tau: f64,
    pub h: f64,
    pub sigma: f64,
    /// Raw counts inside the pulse.
    pub counts: f64,
    /// Set when the pulse collected no photons.
    pub low_statistics: bool,
}

/// Excess counts per pulse above the stationary level extrapolated from
/// the pulse tail. σ follows from Poisson statistics of every bin used.
pub fn peak_heights(trace: &PulseTrace, opts: &HeightOptions) -> Result<Vec<PeakHeight>> {
    trace.validate()?;
    let len = trace.schedule.pulse_len;
    let win = opts.baseline_window;
    if !(win > 0.0) {
        return Err(Error::invalid("baseline window must be positive"));
    }
    if len < win {
        return Err(Error::invalid(format!(
            "pulse of {:.1} ns is shorter than the {:.1} ns baseline window",
            len / NS,
            win / NS
        )));
    }
    let mut out = Vec::new();
    for (start, tau) in trace.schedule.pulses() {
        // h = Σ wᵢ nᵢ with wᵢ = (overlap with pulse) − (len/win)(overlap with tail)
        let mut weights = std::collections::BTreeMap::<usize, f64>::new();
        trace.for_bins(start, start + len, |i, o| *weights.entry(i).or_default() += o);
        trace.for_bins(start + len - win, start + len, |i, o| *weights.entry(i).or_default() -= o * len / win);
        let mut total = 0.0;
        trace.for_bins(start, start + len, |i, o| total += o * trace.counts[i]);
        let (mut h, mut var) = (0.0, 0.0);
        for (&i, &w) in &weights {
            h += w * trace.counts[i];
            var += w * w * trace.counts[i];
        }
        out.push(PeakHeight { tau, h, sigma: var.sqrt(), counts: total, low_statistics: total == 0.0 });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T1Fit {
    #[serde(rename = "T1_s")]
    pub t1: f64,
    #[serde(rename = "sigma_T1_s")]
    pub sigma_t1: f64,
    pub amplitude: f64,
    pub sigma_amplitude: f64,
    pub chi2_reduced: f64,
    pub points: usize,
}

struct Recovery<'a> {
    tau: &'a [f64],
    h: &'a [f64],
    inv_sigma: &'a [f64],
}

// p = [A, T₁], both in the caller's rescaled units.
impl Problem for Recovery<'_> {
    fn n_params(&self) -> usize {
        2
    }

    fn evaluate(&self, p: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.tau.len();
        let mut r = DVector::zeros(m);
        let mut j = DMatrix::zeros(m, 2);
        for i in 0..m {
            let e = (-self.tau[i] / p[1]).exp();
            let s = self.inv_sigma[i];
            r[i] = s * (p[0] * (1.0 - e) - self.h[i]);
            j[(i, 0)] = s * (1.0 - e);
            j[(i, 1)] = -s * p[0] * e * self.tau[i] / (p[1] * p[1]);
        }
        (r, j)
    }

    fn feasible(&self, p: &[f64]) -> bool {
        p[1] > 0.0
    }
}

/// Weighted least squares of h(τ) = A·(1 − exp(−τ/T₁)).
///
/// Points with σ = 0 carry no usable weight and are skipped, unless every
/// σ is zero, in which case the fit is unweighted.
pub fn fit_t1(points: &[PeakHeight]) -> Result<T1Fit> {
    if points.len() < 4 {
        return Err(Error::invalid(format!("T1 fit needs at least 4 points, got {}", points.len())));
    }
    if !points.windows(2).all(|w| w[1].tau > w[0].tau) {
        return Err(Error::invalid("delays must increase strictly"));
    }
    if points.iter().all(|p| p.h == 0.0) {
        return Err(Error::invalid("all peak heights are zero"));
    }
    let unweighted = points.iter().all(|p| p.sigma == 0.0);
    let used: Vec<&PeakHeight> = points.iter().filter(|p| unweighted || p.sigma > 0.0).collect();
    if used.len() < 4 {
        return Err(Error::invalid(format!("only {} points carry a usable error bar", used.len())));
    }
    let t_scale = used.iter().map(|p| p.tau).fold(0.0, f64::max);
    let h_scale = used.iter().map(|p| p.h.abs()).fold(0.0, f64::max);
    if !(t_scale > 0.0) {
        return Err(Error::invalid("delays must not all be zero"));
    }
    let tau: Vec<f64> = used.iter().map(|p| p.tau / t_scale).collect();
    let h: Vec<f64> = used.iter().map(|p| p.h / h_scale).collect();
    let inv_sigma: Vec<f64> = used.iter().map(|p| if unweighted { 1.0 } else { h_scale / p.sigma }).collect();

    // Coarse log grid over T₁ with the amplitude solved linearly gives a
    // start inside the basin of the global minimum.
    let mut best = (f64::INFINITY, 1.0, 1.0);
    for k in 0..=120 {
        let t1 = 10f64.powf(-3.0 + 5.0 * k as f64 / 120.0);
        let (mut sgh, mut sgg) = (0.0, 0.0);
        for i in 0..tau.len() {
            let g = 1.0 - (-tau[i] / t1).exp();
            let w = inv_sigma[i] * inv_sigma[i];
            sgh += w * g * h[i];
            sgg += w * g * g;
        }
        if sgg <= 0.0 {
            continue;
        }
        let a = sgh / sgg;
        let cost: f64 =
            (0..tau.len()).map(|i| (inv_sigma[i] * (a * (1.0 - (-tau[i] / t1).exp()) - h[i])).powi(2)).sum();
        if cost < best.0 {
            best = (cost, a, t1);
        }
    }
    let problem = Recovery { tau: &tau, h: &h, inv_sigma: &inv_sigma };
    let fit = lm::minimize(&problem, &[best.1, best.2], 500)?;
    log::debug!("T1 fit: {} iterations, reduced chi2 {:.3}", fit.iterations, fit.chi2_reduced());
    let se = if unweighted {
        // Without a noise model the scatter itself sets the scale.
        let s = fit.chi2_reduced();
        vec![(fit.covariance[(0, 0)] * s).sqrt(), (fit.covariance[(1, 1)] * s).sqrt()]
    } else {
        fit.std_errors()
    };
    Ok(T1Fit {
        t1: fit.params[1] * t_scale,
        sigma_t1: se[1] * t_scale,
        amplitude: fit.params[0] * h_scale,
        sigma_amplitude: se[0] * h_scale,
        chi2_reduced: fit.chi2_reduced(),
        points: used.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schedule() -> PulseSchedule {
        PulseSchedule::new(200.0 * NS, (1..=12).map(|k| k as f64 * 25.0 * NS).collect(), 0.0).unwrap()
    }

    fn points(t1: f64, a: f64) -> Vec<PeakHeight> {
        (1..=12)
            .map(|k| {
                let tau = k as f64 * 25.0 * NS;
                let h = a * (1.0 - (-tau / t1).exp());
                PeakHeight { tau, h, sigma: h.abs().sqrt().max(1.0), counts: h, low_statistics: false }
            })
            .collect()
    }

    #[test]
    fn pulse_positions() {
        let p = schedule().pulses();
        assert_eq!(p[0], (25.0 * NS, 25.0 * NS));
        assert!((p[1].0 - (25.0 + 200.0 + 50.0) * NS).abs() < 1e-20);
    }

    #[test]
    fn constant_rate_has_no_peak() {
        let s = schedule();
        let bins = (s.end() / NS).ceil() as usize + 10;
        let tr = PulseTrace::new(0.0, NS, vec![7.0; bins], s).unwrap();
        for p in peak_heights(&tr, &HeightOptions::default()).unwrap() {
            assert!(p.h.abs() < 1e-9, "{}", p.h);
            assert!(p.sigma > 0.0);
        }
    }

    #[test]
    fn empty_pulse_is_flagged() {
        let s = schedule();
        let bins = (s.end() / NS).ceil() as usize + 10;
        let tr = PulseTrace::new(0.0, NS, vec![0.0; bins], s).unwrap();
        let p = peak_heights(&tr, &HeightOptions::default()).unwrap();
        assert!(p.iter().all(|p| p.h == 0.0 && p.sigma == 0.0 && p.low_statistics));
    }

    #[test]
    fn short_pulse_rejected() {
        let s = PulseSchedule::new(40.0 * NS, vec![10.0 * NS, 20.0 * NS], 0.0).unwrap();
        let tr = PulseTrace::new(0.0, NS, vec![1.0; 200], s).unwrap();
        assert!(peak_heights(&tr, &HeightOptions::default()).is_err());
    }

    #[test]
    fn trace_must_cover_schedule() {
        assert!(PulseTrace::new(0.0, NS, vec![1.0; 100], schedule()).is_err());
    }

    #[test]
    fn excess_counts_at_pulse_start() {
        let s = PulseSchedule::new(200.0 * NS, vec![100.0 * NS, 300.0 * NS], 0.0).unwrap();
        let mut c = vec![2.0; 1000];
        c[100] += 30.0;
        c[600] += 10.0;
        let tr = PulseTrace::new(0.0, NS, c, s).unwrap();
        let p = peak_heights(&tr, &HeightOptions::default()).unwrap();
        assert!((p[0].h - 30.0).abs() < 1e-9);
        assert!((p[1].h - 10.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_recovery() {
        let fit = fit_t1(&points(64.0 * NS, 500.0)).unwrap();
        assert!((fit.t1 / (64.0 * NS) - 1.0).abs() < 1e-6);
        assert!((fit.amplitude / 500.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unweighted_recovery() {
        let mut p = points(30.0 * NS, 80.0);
        for q in &mut p {
            q.sigma = 0.0;
        }
        let fit = fit_t1(&p).unwrap();
        assert!((fit.t1 / (30.0 * NS) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fit_preconditions() {
        assert!(fit_t1(&points(64.0 * NS, 500.0)[..2]).is_err());
        let mut z = points(64.0 * NS, 500.0);
        for q in &mut z {
            q.h = 0.0;
        }
        assert!(fit_t1(&z).is_err());
    }

    proptest! {
        #[test]
        fn amplitude_scales_out(c in 0.01f64..100.0) {
            let base = points(64.0 * NS, 500.0);
            let scaled: Vec<PeakHeight> = base.iter().map(|p| PeakHeight { h: p.h * c, sigma: p.sigma * c, ..*p }).collect();
            let a = fit_t1(&base).unwrap();
            let b = fit_t1(&scaled).unwrap();
            prop_assert!((b.t1 / a.t1 - 1.0).abs() < 1e-9);
            prop_assert!((b.amplitude / (c * a.amplitude) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn heights_are_linear(a in 0.0f64..5.0, b in 0.0f64..5.0, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s = schedule();
            let bins = (s.end() / NS).ceil() as usize + 3;
            let x: Vec<f64> = (0..bins).map(|_| rng.random_range(0.0..10.0)).collect();
            let y: Vec<f64> = (0..bins).map(|_| rng.random_range(0.0..10.0)).collect();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(x, y)| a * x + b * y).collect();
            let o = HeightOptions::default();
            let hx = peak_heights(&PulseTrace::new(0.0, NS, x, s.clone()).unwrap(), &o).unwrap();
            let hy = peak_heights(&PulseTrace::new(0.0, NS, y, s.clone()).unwrap(), &o).unwrap();
            let hm = peak_heights(&PulseTrace::new(0.0, NS, mix, s).unwrap(), &o).unwrap();
            for i in 0..hm.len() {
                let want = a * hx[i].h + b * hy[i].h;
                prop_assert!((hm[i].h - want).abs() <= 1e-9 * (1.0 + want.abs()));
            }
        }
    }
}
