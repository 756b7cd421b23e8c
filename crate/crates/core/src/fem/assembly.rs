//! Global stiffness and mass assembly.
//!
//! Matrices are built directly in compressed-column form. The sparsity pattern
//! follows node adjacency, columns are filled by gathering contributions of the
//! elements around each node (in ascending element order), so the result does
//! not depend on how the work is split between threads.

use std::collections::HashMap;

use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use rayon::prelude::*;

use super::element::{self, Mat24};
use crate::error::{Error, Result};
use crate::mesh::{HexMesh, Region};
use crate::units::MaterialParams;

/// Element matrices shared by all elements of identical shape and material.
#[derive(Debug, Clone)]
pub struct ElementCache {
    keys: Vec<usize>,
    stiffness: Vec<Mat24>,
    mass: Vec<Mat24>,
}

impl ElementCache {
    pub fn new(mesh: &HexMesh, material: &MaterialParams) -> Self {
        // Shapes are compared on a grid of 2⁻⁴⁰ of the mesh extent, well below
        // any physical difference but above coordinate roundoff.
        let extent =
            mesh.nodes.iter().flat_map(|p| p.iter().map(|v| v.abs())).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
        let quantum = extent * 2f64.powi(-40);
        let mut index: HashMap<[i64; 24], usize> = HashMap::new();
        let mut stiffness = Vec::new();
        let mut mass = Vec::new();
        let keys = (0..mesh.n_elements())
            .map(|e| {
                let coords = element_coords(mesh, e);
                let origin = coords[0];
                let mut key = [0i64; 24];
                for (n, c) in coords.iter().enumerate() {
                    for a in 0..3 {
                        key[3 * n + a] = ((c[a] - origin[a]) / quantum).round() as i64;
                    }
                }
                *index.entry(key).or_insert_with(|| {
                    stiffness.push(element::stiffness(&coords, material));
                    mass.push(element::mass(&coords, material));
                    stiffness.len() - 1
                })
            })
            .collect();
        ElementCache { keys, stiffness, mass }
    }

    pub fn stiffness(&self, e: usize) -> &Mat24 {
        &self.stiffness[self.keys[e]]
    }

    pub fn mass(&self, e: usize) -> &Mat24 {
        &self.mass[self.keys[e]]
    }

    /// Number of distinct element shapes.
    pub fn n_shapes(&self) -> usize {
        self.stiffness.len()
    }
}

pub fn element_coords(mesh: &HexMesh, e: usize) -> [[f64; 3]; 8] {
    mesh.elements[e].map(|n| mesh.nodes[n])
}

/// Stiffness and mass restricted to the free degrees of freedom.
pub struct AssembledSystem {
    pub stiffness: SparseColMat<usize, f64>,
    pub mass: SparseColMat<usize, f64>,
    /// Full dof (3·node + axis) to free index, `None` where constrained.
    pub dof_map: Vec<Option<usize>>,
    /// Free index to full dof.
    pub free_dofs: Vec<usize>,
    pub cache: ElementCache,
    pub material: MaterialParams,
}

impl AssembledSystem {
    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    /// Scatter a free-dof vector to a full-length displacement vector.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.dof_map.len()];
        for (i, &d) in self.free_dofs.iter().enumerate() {
            full[d] = free[i];
        }
        full
    }

    /// Gather the free entries of a full-length vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }
}

pub fn build_dof_map(mesh: &HexMesh) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut constrained = vec![false; mesh.n_dofs()];
    for &(node, axis) in &mesh.constrained {
        constrained[3 * node + axis as usize] = true;
    }
    let mut map = vec![None; mesh.n_dofs()];
    let mut free = Vec::with_capacity(mesh.n_dofs());
    for (d, &c) in constrained.iter().enumerate() {
        if !c {
            map[d] = Some(free.len());
            free.push(d);
        }
    }
    (map, free)
}

pub fn assemble(mesh: &HexMesh, material: &MaterialParams) -> Result<AssembledSystem> {
    material.validate()?;
    mesh.validate()?;
    let cache = ElementCache::new(mesh, material);
    let (dof_map, free_dofs) = build_dof_map(mesh);
    if free_dofs.is_empty() {
        return Err(Error::invalid("every degree of freedom is constrained"));
    }
    let n = free_dofs.len();
    let node_elems = mesh.node_elements();

    // Row pattern of every column: free dofs of all nodes sharing an element.
    let neighbours: Vec<Vec<usize>> = node_elems
        .par_iter()
        .map(|elems| {
            let mut nb: Vec<usize> = elems.iter().flat_map(|&e| mesh.elements[e]).collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect();

    let mut col_ptr = Vec::with_capacity(n + 1);
    col_ptr.push(0usize);
    let mut row_idx = Vec::new();
    for &d in &free_dofs {
        for &m in &neighbours[d / 3] {
            for b in 0..3 {
                if let Some(r) = dof_map[3 * m + b] {
                    row_idx.push(r);
                }
            }
        }
        col_ptr.push(row_idx.len());
    }
    let nnz = row_idx.len();

    // Columns of a node are contiguous, so the value arrays split per node.
    let mut node_ranges = vec![(0usize, 0usize); mesh.n_nodes()];
    for (node, range) in node_ranges.iter_mut().enumerate() {
        let cols: Vec<usize> = (0..3).filter_map(|a| dof_map[3 * node + a]).collect();
        if let (Some(&first), Some(&last)) = (cols.first(), cols.last()) {
            *range = (col_ptr[first], col_ptr[last + 1]);
        }
    }
    let mut kv = vec![0.0; nnz];
    let mut mv = vec![0.0; nnz];
    let mut k_chunks = split_by_ranges(&mut kv, &node_ranges);
    let mut m_chunks = split_by_ranges(&mut mv, &node_ranges);

    k_chunks.par_iter_mut().zip(m_chunks.par_iter_mut()).enumerate().for_each(|(node, (kc, mc))| {
        let base = node_ranges[node].0;
        for a in 0..3 {
            let Some(col) = dof_map[3 * node + a] else { continue };
            let rows = &row_idx[col_ptr[col]..col_ptr[col + 1]];
            let off = col_ptr[col] - base;
            for &e in &node_elems[node] {
                let conn = &mesh.elements[e];
                let i = conn.iter().position(|&x| x == node).expect("node in element");
                let ke = cache.stiffness(e);
                let me = cache.mass(e);
                for (j, &m) in conn.iter().enumerate() {
                    for b in 0..3 {
                        let Some(r) = dof_map[3 * m + b] else { continue };
                        let p = off + rows.binary_search(&r).expect("row in pattern");
                        kc[p] += ke[(3 * j + b, 3 * i + a)];
                        mc[p] += me[(3 * j + b, 3 * i + a)];
                    }
                }
            }
        }
    });
    drop(k_chunks);
    drop(m_chunks);

    let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
    let stiffness = SparseColMat::new(symbolic.clone(), kv);
    let mass = SparseColMat::new(symbolic, mv);
    Ok(AssembledSystem { stiffness, mass, dof_map, free_dofs, cache, material: *material })
}

fn split_by_ranges<'a>(values: &'a mut [f64], ranges: &[(usize, usize)]) -> Vec<&'a mut [f64]> {
    let mut out = Vec::with_capacity(ranges.len());
    let mut rest = values;
    let mut consumed = 0;
    for &(start, end) in ranges {
        if end == start {
            out.push(&mut [][..]);
            continue;
        }
        let tail = std::mem::take(&mut rest);
        let (_, tail) = tail.split_at_mut(start - consumed);
        let (chunk, tail) = tail.split_at_mut(end - start);
        out.push(chunk);
        rest = tail;
        consumed = end;
    }
    out
}

/// Sparse symmetric product y = A x using the full stored pattern.
pub fn spmv(a: &SparseColMat<usize, f64>, x: &[f64], y: &mut [f64]) {
    y.fill(0.0);
    let col_ptr = a.symbolic().col_ptr();
    let rows = a.symbolic().row_idx();
    let vals = a.val();
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        for p in col_ptr[j]..col_ptr[j + 1] {
            y[rows[p]] += vals[p] * xj;
        }
    }
}

/// Symmetric product exploiting y_i = Σ_j A_ji x_j (column dot products),
/// which parallelizes over outputs without write conflicts.
pub fn spmv_sym_par(a: &SparseColMat<usize, f64>, x: &[f64], y: &mut [f64]) {
    let col_ptr = a.symbolic().col_ptr();
    let rows = a.symbolic().row_idx();
    let vals = a.val();
    y.par_iter_mut().enumerate().with_min_len(1024).for_each(|(i, yi)| {
        let mut s = 0.0;
        for p in col_ptr[i]..col_ptr[i + 1] {
            s += vals[p] * x[rows[p]];
        }
        *yi = s;
    });
}

/// Quadratic form uᵀ A u over the elements of one region, for a full-length
/// displacement vector (constrained entries are zero).
pub fn region_energy(mesh: &HexMesh, matrices: impl Fn(usize) -> Mat24, u: &[f64], region: Region) -> f64 {
    let mut total = 0.0;
    for (e, conn) in mesh.elements.iter().enumerate() {
        if mesh.regions[e] != region {
            continue;
        }
        let mut ue = nalgebra::SVector::<f64, 24>::zeros();
        for (i, &n) in conn.iter().enumerate() {
            for a in 0..3 {
                ue[3 * i + a] = u[3 * n + a];
            }
        }
        total += ue.dot(&(matrices(e) * ue));
    }
    total
}
