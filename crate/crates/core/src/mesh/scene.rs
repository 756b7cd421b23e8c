//! Ellipsoidal nanodiamond partially immersed in a substrate block.
//!
//! Coordinates: the substrate top surface is the plane `z = 0`, the block
//! extends to `z = -L_z` and is centered laterally on the origin. The
//! ellipsoid axis is along z, centered at `(0, 0, r_z - ξ r_z)` so that it
//! dips `ξ r_z` below the surface.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{HexMesh, Region};
use crate::error::{Error, Result};
use crate::units::NM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BottomBc {
    #[default]
    Clamped,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Ellipsoid semi-axes (r_x, r_y, r_z), m.
    #[serde(rename = "semi_axes_m")]
    pub semi_axes: [f64; 3],
    /// Penetration depth as a fraction ξ of r_z.
    pub penetration_fraction: f64,
    /// Substrate block extent (L_x, L_y, L_z), m.
    #[serde(rename = "substrate_dims_m")]
    pub substrate_dims: [f64; 3],
    /// Voxel edge length, m.
    #[serde(rename = "element_size_m")]
    pub element_size: f64,
    #[serde(default)]
    pub bottom_bc: BottomBc,
}

impl SceneSpec {
    /// Desk-scale preset: (40, 50, 22.5) nm ellipsoid, ξ = 0.05, 5 nm voxels,
    /// 200 × 200 × 100 nm clamped substrate.
    pub fn desk() -> Self {
        SceneSpec {
            semi_axes: [40.0 * NM, 50.0 * NM, 22.5 * NM],
            penetration_fraction: 0.05,
            substrate_dims: [200.0 * NM, 200.0 * NM, 100.0 * NM],
            element_size: 5.0 * NM,
            bottom_bc: BottomBc::Clamped,
        }
    }

    /// Same ellipsoid with ξ = 0.01; resolving its contact patch needs
    /// voxels of 2.8 nm or less.
    pub fn full_contact() -> Self {
        SceneSpec { penetration_fraction: 0.01, element_size: 2.5 * NM, ..Self::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.semi_axes.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
            return Err(Error::invalid(format!("ellipsoid semi-axes must be positive, got {:?}", self.semi_axes)));
        }
        if !(self.penetration_fraction >= 0.0 && self.penetration_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "penetration fraction must lie in [0, 1), got {}",
                self.penetration_fraction
            )));
        }
        if !(self.element_size.is_finite() && self.element_size > 0.0) {
            return Err(Error::invalid(format!("element size must be positive, got {}", self.element_size)));
        }
        if self.substrate_dims.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::invalid(format!(
                "substrate dimensions must be positive, got {:?}",
                self.substrate_dims
            )));
        }
        let lateral_min = 4.0 * self.semi_axes[0].max(self.semi_axes[1]);
        if self.substrate_dims[0] < lateral_min * (1.0 - 1e-12) || self.substrate_dims[1] < lateral_min * (1.0 - 1e-12)
        {
            return Err(Error::invalid(format!(
                "substrate must extend at least 4·max(r_x, r_y) = {lateral_min:e} m laterally"
            )));
        }
        Ok(())
    }

    /// Ellipsoid center height above the substrate surface.
    pub fn ellipsoid_center_z(&self) -> f64 {
        self.semi_axes[2] * (1.0 - self.penetration_fraction)
    }

    pub fn inside_ellipsoid(&self, p: [f64; 3]) -> bool {
        let [rx, ry, rz] = self.semi_axes;
        let z = p[2] - self.ellipsoid_center_z();
        (p[0] / rx).powi(2) + (p[1] / ry).powi(2) + (z / rz).powi(2) <= 1.0
    }

    pub fn scaled(&self, s: f64) -> SceneSpec {
        SceneSpec {
            semi_axes: self.semi_axes.map(|v| v * s),
            substrate_dims: self.substrate_dims.map(|v| v * s),
            element_size: self.element_size * s,
            ..*self
        }
    }
}

/// Semi-axes (a_x, a_y) of the ellipse where the immersed ellipsoid cuts the
/// substrate surface: `a_i = r_i sqrt(2ξ - ξ²)`.
///
/// ξ = 0 gives a zero-area patch; that is reported through the log and
/// returned as `(0, 0)` since a mesh built from it would be disconnected.
pub fn contact_patch(spec: &SceneSpec) -> Result<(f64, f64)> {
    let xi = spec.penetration_fraction;
    if !(0.0..1.0).contains(&xi) {
        return Err(Error::invalid(format!("penetration fraction must lie in [0, 1), got {xi}")));
    }
    if xi == 0.0 {
        log::warn!("zero penetration depth: the contact patch has zero area");
        return Ok((0.0, 0.0));
    }
    let f = (2.0 * xi - xi * xi).sqrt();
    Ok((spec.semi_axes[0] * f, spec.semi_axes[1] * f))
}

/// Voxelize the scene. An element is nanodiamond when its center lies inside
/// the ellipsoid and above the substrate surface, substrate when inside the
/// block, and omitted otherwise.
pub fn build_scene(spec: &SceneSpec) -> Result<HexMesh> {
    spec.validate()?;
    let (ax, ay) = contact_patch(spec)?;
    if ax == 0.0 || ay == 0.0 {
        return Err(Error::Mesh("disconnected nanodiamond: zero penetration depth leaves no contact area".into()));
    }
    let h = spec.element_size;
    if h > ax.min(ay) / 2.0 {
        return Err(Error::Mesh(format!(
            "element size {h:e} m does not resolve the contact patch ({ax:e} × {ay:e} m); use h <= {:e} m or increase the penetration fraction",
            ax.min(ay) / 2.0
        )));
    }

    let [lx, ly, lz] = spec.substrate_dims;
    let cells = |l: f64| ((l / h) - 1e-9).ceil().max(1.0) as i64;
    let (nx, ny, nz) = (cells(lx), cells(ly), cells(lz));
    let top = 2.0 * spec.semi_axes[2] - spec.penetration_fraction * spec.semi_axes[2];
    let n_top = cells(top);
    // Lattice index i maps to coordinate (i - nx/2)·h; with even counts the
    // coordinate planes x = 0 and y = 0 are node planes.
    let x0 = -(nx as f64) / 2.0;
    let y0 = -(ny as f64) / 2.0;
    let coord = |i: i64, j: i64, k: i64| -> [f64; 3] { [(i as f64 + x0) * h, (j as f64 + y0) * h, k as f64 * h] };

    let mut cell_regions: Vec<([i64; 3], Region)> = Vec::new();
    for k in -nz..n_top {
        for j in 0..ny {
            for i in 0..nx {
                let lo = coord(i, j, k);
                let center = [lo[0] + 0.5 * h, lo[1] + 0.5 * h, lo[2] + 0.5 * h];
                let region = if k < 0 {
                    Some(Region::Substrate)
                } else if spec.inside_ellipsoid(center) {
                    Some(Region::Nanodiamond)
                } else {
                    None
                };
                if let Some(r) = region {
                    cell_regions.push(([i, j, k], r));
                }
            }
        }
    }

    let mut node_ids: HashMap<[i64; 3], usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut elements = Vec::with_capacity(cell_regions.len());
    let mut regions = Vec::with_capacity(cell_regions.len());
    for ([i, j, k], region) in cell_regions {
        let corners = [
            [i, j, k],
            [i + 1, j, k],
            [i + 1, j + 1, k],
            [i, j + 1, k],
            [i, j, k + 1],
            [i + 1, j, k + 1],
            [i + 1, j + 1, k + 1],
            [i, j + 1, k + 1],
        ];
        let conn = corners.map(|c| {
            *node_ids.entry(c).or_insert_with(|| {
                nodes.push(coord(c[0], c[1], c[2]));
                nodes.len() - 1
            })
        });
        elements.push(conn);
        regions.push(region);
    }

    let mut mesh = HexMesh { nodes, elements, regions, constrained: Vec::new() };
    if mesh.count_region(Region::Nanodiamond) == 0 {
        return Err(Error::Mesh("no element center falls inside the ellipsoid; refine the mesh".into()));
    }
    let (_, components) = mesh.face_components(|_| true);
    if components != 1 {
        return Err(Error::Mesh(format!(
            "disconnected regions: the voxelized scene has {components} face-connected parts"
        )));
    }
    if spec.bottom_bc == BottomBc::Clamped {
        mesh.clamp_plane(2, -(nz as f64) * h, 1e-6 * h);
    }
    mesh.validate()?;
    Ok(mesh)
}
