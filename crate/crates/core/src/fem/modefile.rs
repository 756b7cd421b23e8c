//! Mode files.
//!
//! Binary layout: the 8-byte magic `SIVMODE1`, a little-endian u64 header
//! length, a JSON header, then `n_modes × n_dofs` little-endian f64
//! displacements (mode-major). The JSON export carries the same header plus a
//! `shapes` array and is meant for small cases.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::modes::ModeSet;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SIVMODE1";
pub const MODE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeHeader {
    pub format_version: u32,
    pub tool_version: String,
    #[serde(default)]
    pub config_digest: Option<String>,
    pub mesh_digest: String,
    pub n_dofs: usize,
    pub n_modes: usize,
    #[serde(rename = "frequencies_Hz")]
    pub frequencies_hz: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    pub energy_fraction_substrate: Vec<f64>,
    pub rigid: Vec<bool>,
    pub residuals: Vec<f64>,
}

impl ModeHeader {
    fn from_set(set: &ModeSet, config_digest: Option<&str>) -> Self {
        ModeHeader {
            format_version: MODE_FORMAT_VERSION,
            tool_version: crate::VERSION.to_string(),
            config_digest: config_digest.map(str::to_string),
            mesh_digest: set.mesh_digest.clone(),
            n_dofs: set.n_dofs,
            n_modes: set.len(),
            frequencies_hz: set.frequencies.clone(),
            q: set.q.clone(),
            energy_fraction_substrate: set.energy_fraction_substrate.clone(),
            rigid: set.rigid.clone(),
            residuals: set.residuals.clone(),
        }
    }

    fn into_set(self, shapes: Vec<Vec<f64>>) -> Result<ModeSet> {
        if self.format_version != MODE_FORMAT_VERSION {
            return Err(Error::parse("header", format!("unsupported mode file version {}", self.format_version)));
        }
        let set = ModeSet {
            frequencies: self.frequencies_hz,
            shapes,
            energy_fraction_substrate: self.energy_fraction_substrate,
            q: self.q,
            rigid: self.rigid,
            residuals: self.residuals,
            mesh_digest: self.mesh_digest,
            n_dofs: self.n_dofs,
        };
        if set.len() != self.n_modes {
            return Err(Error::parse("header", "n_modes disagrees with the frequency list"));
        }
        set.validate().map_err(|e| Error::parse("header", e))?;
        Ok(set)
    }
}

pub fn encode_modes(set: &ModeSet, config_digest: Option<&str>) -> Vec<u8> {
    let header = serde_json::to_vec(&ModeHeader::from_set(set, config_digest)).expect("header serializes");
    let mut out = Vec::with_capacity(16 + header.len() + 8 * set.len() * set.n_dofs);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for shape in &set.shapes {
        for v in shape {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_modes(bytes: &[u8]) -> Result<(ModeSet, ModeHeader)> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::parse("magic", "not a mode file"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() < len {
        return Err(Error::parse("header", "file truncated inside the header"));
    }
    let header: ModeHeader = serde_json::from_slice(&body[..len]).map_err(|e| Error::parse("header", e))?;
    let payload = &body[len..];
    let expected = 8 * header.n_modes * header.n_dofs;
    if payload.len() != expected {
        return Err(Error::parse(
            "shapes",
            format!("expected {expected} bytes of displacements, found {}", payload.len()),
        ));
    }
    let shapes = if header.n_dofs == 0 {
        vec![Vec::new(); header.n_modes]
    } else {
        payload
            .chunks_exact(8 * header.n_dofs)
            .map(|m| m.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect())
            .collect()
    };
    let set = header.clone().into_set(shapes)?;
    Ok((set, header))
}

pub fn write_modes(set: &ModeSet, path: impl AsRef<Path>, config_digest: Option<&str>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_modes(set, config_digest))?;
    Ok(())
}

pub fn read_modes(path: impl AsRef<Path>) -> Result<(ModeSet, ModeHeader)> {
    decode_modes(&fs::read(path)?)
}

#[derive(Serialize, Deserialize)]
struct JsonModes {
    #[serde(flatten)]
    header: ModeHeader,
    shapes: Vec<Vec<f64>>,
}

pub fn modes_to_json(set: &ModeSet, config_digest: Option<&str>) -> String {
    serde_json::to_string(&JsonModes { header: ModeHeader::from_set(set, config_digest), shapes: set.shapes.clone() })
        .expect("modes serialize")
}

pub fn modes_from_json(text: &str) -> Result<(ModeSet, ModeHeader)> {
    let j: JsonModes = serde_json::from_str(text).map_err(|e| Error::parse("json", e))?;
    let set = j.header.clone().into_set(j.shapes)?;
    Ok((set, j.header))
}
