//! Axis-aligned hexahedral (voxel) meshes with region and boundary tags.

mod io;
mod scene;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_mesh, write_mesh, MESH_FORMAT_VERSION};
pub use scene::{build_scene, contact_patch, BottomBc, SceneSpec};

/// Material region an element belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Nanodiamond,
    Substrate,
}

impl Region {
    /// Integer tag used in mesh files.
    pub fn tag(self) -> u8 {
        match self {
            Region::Nanodiamond => 0,
            Region::Substrate => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Region> {
        match tag {
            0 => Some(Region::Nanodiamond),
            1 => Some(Region::Substrate),
            _ => None,
        }
    }
}

/// A single constrained degree of freedom: node index and axis (0 = x, 1 = y, 2 = z).
pub type Constraint = (usize, u8);

/// Voxel mesh. Element node order: counterclockwise bottom face (z-), then
/// the matching top face, i.e. local corners
/// `(0,0,0) (1,0,0) (1,1,0) (0,1,0) (0,0,1) (1,0,1) (1,1,1) (0,1,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HexMesh {
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<[usize; 8]>,
    pub regions: Vec<Region>,
    /// Sorted, deduplicated.
    pub constrained: Vec<Constraint>,
}

/// Corner offsets of the reference hexahedron in the node order above.
pub const HEX_CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

impl HexMesh {
    /// Structured `nx × ny × nz` block of voxels with spacing `spacing`,
    /// lower corner at `origin`, all tagged `region`, nothing constrained.
    pub fn block(counts: [usize; 3], spacing: [f64; 3], origin: [f64; 3], region: Region) -> Result<Self> {
        if counts.contains(&0) || spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Mesh(format!("degenerate block: counts {counts:?}, spacing {spacing:?}")));
        }
        let [nx, ny, nz] = counts;
        let node_id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    nodes.push([
                        origin[0] + i as f64 * spacing[0],
                        origin[1] + j as f64 * spacing[1],
                        origin[2] + k as f64 * spacing[2],
                    ]);
                }
            }
        }
        let mut elements = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    elements.push([
                        node_id(i, j, k),
                        node_id(i + 1, j, k),
                        node_id(i + 1, j + 1, k),
                        node_id(i, j + 1, k),
                        node_id(i, j, k + 1),
                        node_id(i + 1, j, k + 1),
                        node_id(i + 1, j + 1, k + 1),
                        node_id(i, j + 1, k + 1),
                    ]);
                }
            }
        }
        let regions = vec![region; elements.len()];
        Ok(HexMesh { nodes, elements, regions, constrained: Vec::new() })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.nodes.len()
    }

    /// Fix all three displacement components of every node whose coordinate
    /// along `axis` equals `value` (within `tol`).
    pub fn clamp_plane(&mut self, axis: usize, value: f64, tol: f64) {
        for (n, p) in self.nodes.iter().enumerate() {
            if (p[axis] - value).abs() <= tol {
                for a in 0..3u8 {
                    self.constrained.push((n, a));
                }
            }
        }
        self.constrained.sort_unstable();
        self.constrained.dedup();
    }

    /// Copy with every coordinate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> HexMesh {
        HexMesh { nodes: self.nodes.iter().map(|p| [p[0] * s, p[1] * s, p[2] * s]).collect(), ..self.clone() }
    }

    /// Edge lengths (hx, hy, hz) of element `e`.
    pub fn element_dims(&self, e: usize) -> [f64; 3] {
        let c = &self.elements[e];
        let p0 = self.nodes[c[0]];
        let p6 = self.nodes[c[6]];
        [p6[0] - p0[0], p6[1] - p0[1], p6[2] - p0[2]]
    }

    pub fn element_center(&self, e: usize) -> [f64; 3] {
        let mut c = [0.0; 3];
        for &n in &self.elements[e] {
            for a in 0..3 {
                c[a] += self.nodes[n][a];
            }
        }
        c.map(|v| v / 8.0)
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        let d = self.element_dims(e);
        d[0] * d[1] * d[2]
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_volume(e)).sum()
    }

    pub fn region_volume(&self, region: Region) -> f64 {
        (0..self.n_elements()).filter(|&e| self.regions[e] == region).map(|e| self.element_volume(e)).sum()
    }

    pub fn count_region(&self, region: Region) -> usize {
        self.regions.iter().filter(|&&r| r == region).count()
    }

    /// Digest of geometry, tags and constraints; identifies the dof layout
    /// that mode shapes refer to.
    pub fn digest(&self) -> String {
        let mut h = crate::digest::Hasher::new();
        h.u64(self.nodes.len() as u64);
        for p in &self.nodes {
            for &v in p {
                h.f64(v);
            }
        }
        h.u64(self.elements.len() as u64);
        for (conn, r) in self.elements.iter().zip(&self.regions) {
            for &n in conn {
                h.u64(n as u64);
            }
            h.update(&[r.tag()]);
        }
        h.u64(self.constrained.len() as u64);
        for &(n, a) in &self.constrained {
            h.u64(n as u64).update(&[a]);
        }
        h.finish()
    }

    /// For every node, the list of elements that contain it.
    pub fn node_elements(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for (e, conn) in self.elements.iter().enumerate() {
            for &n in conn {
                adj[n].push(e);
            }
        }
        adj
    }

    /// Check the structural invariants: distinct corners forming a positive
    /// axis-aligned box, no orphan nodes, valid constraints.
    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::Mesh("mesh has no elements".into()));
        }
        if self.regions.len() != self.elements.len() {
            return Err(Error::Mesh(format!(
                "{} region tags for {} elements",
                self.regions.len(),
                self.elements.len()
            )));
        }
        let mut used = vec![false; self.n_nodes()];
        for (e, conn) in self.elements.iter().enumerate() {
            for &n in conn {
                if n >= self.n_nodes() {
                    return Err(Error::Mesh(format!("element {e} references missing node {n}")));
                }
                used[n] = true;
            }
            let mut sorted = *conn;
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Mesh(format!("element {e} has repeated nodes")));
            }
            let p0 = self.nodes[conn[0]];
            let d = self.element_dims(e);
            if d.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Mesh(format!("element {e} has non-positive extent {d:?}")));
            }
            for (corner, &n) in HEX_CORNERS.iter().zip(conn) {
                let p = self.nodes[n];
                for a in 0..3 {
                    let expect = p0[a] + if corner[a] > 0.0 { d[a] } else { 0.0 };
                    if (p[a] - expect).abs() > 1e-9 * d[a] {
                        return Err(Error::Mesh(format!(
                            "element {e} is not an axis-aligned voxel in the expected node order"
                        )));
                    }
                }
            }
        }
        if let Some(n) = used.iter().position(|&u| !u) {
            return Err(Error::Mesh(format!("node {n} belongs to no element")));
        }
        for &(n, a) in &self.constrained {
            if n >= self.n_nodes() || a > 2 {
                return Err(Error::Mesh(format!("invalid constraint ({n}, {a})")));
            }
        }
        Ok(())
    }

    /// Face-connected components among elements satisfying `keep`.
    /// Returns a component label per element (`usize::MAX` for skipped ones)
    /// and the number of components.
    pub fn face_components(&self, keep: impl Fn(usize) -> bool) -> (Vec<usize>, usize) {
        // Two voxels share a face iff they share four nodes.
        let mut face_owner: HashMap<[usize; 4], usize> = HashMap::new();
        let mut parent: Vec<usize> = (0..self.n_elements()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        const FACES: [[usize; 4]; 6] =
            [[0, 1, 2, 3], [4, 5, 6, 7], [0, 1, 5, 4], [3, 2, 6, 7], [0, 3, 7, 4], [1, 2, 6, 5]];
        for e in (0..self.n_elements()).filter(|&e| keep(e)) {
            let conn = &self.elements[e];
            for f in FACES {
                let mut key = f.map(|i| conn[i]);
                key.sort_unstable();
                if let Some(&other) = face_owner.get(&key) {
                    let (ra, rb) = (find(&mut parent, e), find(&mut parent, other));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                } else {
                    face_owner.insert(key, e);
                }
            }
        }
        let mut labels = vec![usize::MAX; self.n_elements()];
        let mut roots: HashMap<usize, usize> = HashMap::new();
        for e in (0..self.n_elements()).filter(|&e| keep(e)) {
            let r = find(&mut parent, e);
            let next = roots.len();
            labels[e] = *roots.entry(r).or_insert(next);
        }
        let count = roots.len();
        (labels, count)
    }
}

/// Locates the element containing a point in a voxel mesh.
pub struct PointLocator<'a> {
    mesh: &'a HexMesh,
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a HexMesh) -> Self {
        let cell =
            (0..mesh.n_elements()).map(|e| mesh.element_dims(e).into_iter().fold(0.0, f64::max)).fold(0.0, f64::max);
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for e in 0..mesh.n_elements() {
            let c = mesh.element_center(e);
            buckets.entry(Self::key(c, cell)).or_default().push(e);
        }
        PointLocator { mesh, cell, buckets }
    }

    fn key(p: [f64; 3], cell: f64) -> [i64; 3] {
        p.map(|v| (v / cell).floor() as i64)
    }

    /// Element containing `p` (boundaries inclusive, relative tolerance 1e-9).
    pub fn locate(&self, p: [f64; 3]) -> Option<usize> {
        let k = Self::key(p, self.cell);
        let mut best: Option<usize> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(list) = self.buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for &e in list {
                        let lo = self.mesh.nodes[self.mesh.elements[e][0]];
                        let hi = self.mesh.nodes[self.mesh.elements[e][6]];
                        let tol = 1e-9 * self.cell;
                        let inside = (0..3).all(|a| p[a] >= lo[a] - tol && p[a] <= hi[a] + tol);
                        if inside && best.is_none_or(|b| e < b) {
                            best = Some(e);
                        }
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_counts_and_volume() {
        let m = HexMesh::block([3, 2, 4], [1.0, 2.0, 0.5], [0.0; 3], Region::Substrate).unwrap();
        assert_eq!(m.n_elements(), 24);
        assert_eq!(m.n_nodes(), 4 * 3 * 5);
        m.validate().unwrap();
        assert_eq!(m.total_volume(), 24.0);
    }

    #[test]
    fn clamp_plane_marks_all_axes() {
        let mut m = HexMesh::block([2, 2, 2], [1.0; 3], [0.0; 3], Region::Substrate).unwrap();
        m.clamp_plane(2, 0.0, 1e-12);
        assert_eq!(m.constrained.len(), 9 * 3);
        m.validate().unwrap();
    }

    #[test]
    fn validate_rejects_bad_meshes() {
        let mut m = HexMesh::block([1, 1, 1], [1.0; 3], [0.0; 3], Region::Substrate).unwrap();
        m.elements[0].swap(0, 1);
        assert!(m.validate().is_err());

        let mut m = HexMesh::block([1, 1, 1], [1.0; 3], [0.0; 3], Region::Substrate).unwrap();
        m.nodes.push([5.0, 5.0, 5.0]);
        assert!(m.validate().is_err());

        let mut m = HexMesh::block([1, 1, 1], [1.0; 3], [0.0; 3], Region::Substrate).unwrap();
        m.elements[0][7] = m.elements[0][0];
        assert!(m.validate().is_err());
    }

    #[test]
    fn components_split_and_join() {
        let m = HexMesh::block([4, 1, 1], [1.0; 3], [0.0; 3], Region::Substrate).unwrap();
        let (_, all) = m.face_components(|_| true);
        assert_eq!(all, 1);
        let (labels, two) = m.face_components(|e| e != 1);
        assert_eq!(two, 2);
        assert_eq!(labels[1], usize::MAX);
        assert_ne!(labels[0], labels[2]);
        assert_eq!(labels[2], labels[3]);
    }

    #[test]
    fn locator_finds_elements() {
        let m = HexMesh::block([3, 3, 3], [1.0; 3], [0.0; 3], Region::Substrate).unwrap();
        let loc = PointLocator::new(&m);
        let e = loc.locate([1.5, 0.5, 2.5]).unwrap();
        assert_eq!(m.element_center(e), [1.5, 0.5, 2.5]);
        assert!(loc.locate([3.0, 3.0, 3.0]).is_some());
        assert!(loc.locate([3.5, 1.0, 1.0]).is_none());
    }
}
