//! Analysis of measured data: four-line spectra give the splittings and the
//! temperature, saturation-recovery traces give T₁.

pub mod io;
pub mod lines;
mod lm;
pub mod trace;

pub use lines::{
    boltzmann_ratio, branch_ratio, fit_four_lines, splittings, temperature, temperature_from_ratio, Intensity, Line,
    LineFitOptions, LineSet, Spectrum, Splittings, ThermometryOptions, UpperBranch,
};
pub use trace::{fit_t1, peak_heights, HeightOptions, PeakHeight, PulseSchedule, PulseTrace, ScheduleFile, T1Fit};
