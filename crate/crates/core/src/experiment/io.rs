//! Readers for measured spectra, count traces and pulse schedules.

use std::io::Read;
use std::path::Path;

use super::lines::Spectrum;
use super::trace::{PulseSchedule, PulseTrace, ScheduleFile};
use crate::error::{Error, Result};
use crate::units::{GHZ, NM, NS};

fn two_columns(section: &str, reader: impl Read) -> Result<(String, Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::parse(section, e))?.clone();
    if headers.len() != 2 {
        return Err(Error::parse(section, format!("expected two columns, found header {headers:?}")));
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(section, e))?;
        let num = |i: usize| {
            rec[i].parse::<f64>().map_err(|e| Error::parse(section, format!("row {}: {:?}: {e}", row + 1, &rec[i])))
        };
        a.push(num(0)?);
        b.push(num(1)?);
    }
    Ok((headers[0].to_string(), a, b))
}

/// CSV with header `wavelength_nm,counts` or `frequency_GHz,counts`.
pub fn parse_spectrum(reader: impl Read) -> Result<Spectrum> {
    let (axis, x, counts) = two_columns("spectrum", reader)?;
    match axis.as_str() {
        "wavelength_nm" => Spectrum::from_wavelength(&x.iter().map(|l| l * NM).collect::<Vec<_>>(), counts),
        "frequency_GHz" => Spectrum::new(x.iter().map(|f| f * GHZ).collect(), counts),
        other => {
            Err(Error::parse("spectrum", format!("unknown axis column {other:?}; use wavelength_nm or frequency_GHz")))
        }
    }
}

pub fn read_spectrum(path: &Path) -> Result<Spectrum> {
    parse_spectrum(std::fs::File::open(path)?)
}

pub fn parse_schedule(text: &str) -> Result<PulseSchedule> {
    let f: ScheduleFile = serde_json::from_str(text).map_err(|e| Error::parse("schedule", e))?;
    PulseSchedule::try_from(f)
}

pub fn read_schedule(path: &Path) -> Result<PulseSchedule> {
    parse_schedule(&std::fs::read_to_string(path)?)
}

/// CSV with header `time_ns,counts`; times are bin starts.
pub fn parse_trace(reader: impl Read, schedule: PulseSchedule) -> Result<PulseTrace> {
    let (axis, t, counts) = two_columns("trace", reader)?;
    if axis != "time_ns" {
        return Err(Error::parse("trace", format!("first column must be time_ns, found {axis:?}")));
    }
    let t: Vec<f64> = t.iter().map(|x| x * NS).collect();
    PulseTrace::from_samples(&t, counts, schedule)
}

pub fn read_trace(path: &Path, schedule: PulseSchedule) -> Result<PulseTrace> {
    parse_trace(std::fs::File::open(path)?, schedule)
}
