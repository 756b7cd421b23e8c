//! JSON mesh files:
//! `{"version": 1, "nodes": [[x,y,z],…], "elements": [[n0…n7],…], "region": [0|1,…], "clamped": [[node,axis],…]}`.
//!
//! Floats are written in shortest round-trip form, so reading a written mesh
//! reproduces every coordinate bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HexMesh, Region};
use crate::error::{Error, Result};

pub const MESH_FORMAT_VERSION: u32 = 1;

const SECTIONS: [&str; 5] = ["version", "nodes", "elements", "region", "clamped"];

#[derive(Serialize, Deserialize)]
struct MeshFile {
    version: u32,
    nodes: Vec<[f64; 3]>,
    elements: Vec<[usize; 8]>,
    region: Vec<u8>,
    clamped: Vec<(usize, u8)>,
}

pub fn mesh_to_json(mesh: &HexMesh) -> String {
    let file = MeshFile {
        version: MESH_FORMAT_VERSION,
        nodes: mesh.nodes.clone(),
        elements: mesh.elements.clone(),
        region: mesh.regions.iter().map(|r| r.tag()).collect(),
        clamped: mesh.constrained.clone(),
    };
    serde_json::to_string(&file).expect("mesh serialization cannot fail")
}

pub fn write_mesh(mesh: &HexMesh, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, mesh_to_json(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<HexMesh> {
    let text = fs::read_to_string(path)?;
    mesh_from_json(&text)
}

/// Name of the top-level section in which a decoding error at `line:column` occurred.
fn failing_section(text: &str, line: usize, column: usize) -> String {
    let offset: usize =
        text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum::<usize>() + column.saturating_sub(1);
    SECTIONS
        .iter()
        .filter_map(|s| text.find(&format!("\"{s}\"")).map(|pos| (pos, *s)))
        .filter(|&(pos, _)| pos <= offset)
        .max_by_key(|&(pos, _)| pos)
        .map(|(_, s)| s.to_string())
        .unwrap_or_else(|| "header".to_string())
}

pub fn mesh_from_json(text: &str) -> Result<HexMesh> {
    let file: MeshFile = serde_json::from_str(text).map_err(|e| {
        let section = if e.is_eof() || e.is_syntax() || e.is_data() {
            failing_section(text, e.line(), e.column())
        } else {
            "header".to_string()
        };
        Error::parse(section, e)
    })?;
    if file.version != MESH_FORMAT_VERSION {
        return Err(Error::parse(
            "version",
            format!("unsupported mesh version {} (expected {MESH_FORMAT_VERSION})", file.version),
        ));
    }
    if file.elements.is_empty() {
        return Err(Error::parse("elements", "mesh has no elements"));
    }
    if file.region.len() != file.elements.len() {
        return Err(Error::parse("region", format!("{} tags for {} elements", file.region.len(), file.elements.len())));
    }
    let regions = file
        .region
        .iter()
        .map(|&t| Region::from_tag(t).ok_or_else(|| Error::parse("region", format!("unknown tag {t}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut constrained = file.clamped;
    constrained.sort_unstable();
    constrained.dedup();
    let mesh = HexMesh { nodes: file.nodes, elements: file.elements, regions, constrained };
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> HexMesh {
        let mut m = HexMesh::block([2, 1, 2], [0.1, 0.3, 1.0 / 3.0], [-0.7, 1e-9, 0.0], Region::Substrate).unwrap();
        m.regions[3] = Region::Nanodiamond;
        m.clamp_plane(2, 0.0, 1e-12);
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = sample();
        let back = mesh_from_json(&mesh_to_json(&m)).unwrap();
        assert_eq!(back, m);
        for (a, b) in back.nodes.iter().flatten().zip(m.nodes.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_file_names_section() {
        let text = mesh_to_json(&sample());
        let cut = text.find("\"elements\"").unwrap() + 30;
        match mesh_from_json(&text[..cut]) {
            Err(Error::Parse { section, .. }) => assert_eq!(section, "elements"),
            other => panic!("expected parse error, got {other:?}"),
        }
        let cut = text.find("\"nodes\"").unwrap() + 20;
        match mesh_from_json(&text[..cut]) {
            Err(Error::Parse { section, .. }) => assert_eq!(section, "nodes"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_empty_and_wrong_version() {
        let empty = r#"{"version":1,"nodes":[],"elements":[],"region":[],"clamped":[]}"#;
        assert!(matches!(mesh_from_json(empty), Err(Error::Parse { .. })));
        let text = mesh_to_json(&sample()).replacen("\"version\":1", "\"version\":7", 1);
        match mesh_from_json(&text) {
            Err(Error::Parse { section, .. }) => assert_eq!(section, "version"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_region_tag() {
        let text = mesh_to_json(&sample()).replacen("\"region\":[1", "\"region\":[5", 1);
        assert!(mesh_from_json(&text).is_err());
    }
}
