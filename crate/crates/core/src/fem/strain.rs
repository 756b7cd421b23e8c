//! Strain recovery from displacement fields.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::assembly::element_coords;
use super::element::center_strain;
use crate::mesh::HexMesh;

/// Symmetric strain tensor stored by its six independent tensor components
/// (shears are ε_ij, not engineering γ_ij = 2ε_ij).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StrainTensor {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub yz: f64,
    pub zx: f64,
}

impl StrainTensor {
    pub fn from_components(c: [f64; 6]) -> Self {
        StrainTensor { xx: c[0], yy: c[1], zz: c[2], xy: c[3], yz: c[4], zx: c[5] }
    }

    pub fn components(&self) -> [f64; 6] {
        [self.xx, self.yy, self.zz, self.xy, self.yz, self.zx]
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.xx, self.xy, self.zx, //
            self.xy, self.yy, self.yz, //
            self.zx, self.yz, self.zz,
        )
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        StrainTensor {
            xx: m[(0, 0)],
            yy: m[(1, 1)],
            zz: m[(2, 2)],
            xy: 0.5 * (m[(0, 1)] + m[(1, 0)]),
            yz: 0.5 * (m[(1, 2)] + m[(2, 1)]),
            zx: 0.5 * (m[(2, 0)] + m[(0, 2)]),
        }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_components(self.components().map(|c| c * s))
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = (self.components(), other.components());
        Self::from_components(std::array::from_fn(|i| a[i] + b[i]))
    }
}

/// Raw strain of a full-length displacement field at the center of element `e`.
pub fn strain_field(shape: &[f64], mesh: &HexMesh, e: usize) -> StrainTensor {
    let coords = element_coords(mesh, e);
    let mut u = [0.0; 24];
    for (i, &n) in mesh.elements[e].iter().enumerate() {
        u[3 * i..3 * i + 3].copy_from_slice(&shape[3 * n..3 * n + 3]);
    }
    StrainTensor::from_components(center_strain(&coords, &u))
}

/// Volume-weighted average of the center strains of the elements around a node.
pub fn nodal_strain(shape: &[f64], mesh: &HexMesh, elements: &[usize]) -> StrainTensor {
    let mut acc = StrainTensor::default();
    let mut vol = 0.0;
    for &e in elements {
        let v = mesh.element_volume(e);
        acc = acc.add(&strain_field(shape, mesh, e).scaled(v));
        vol += v;
    }
    if vol > 0.0 {
        acc.scaled(1.0 / vol)
    } else {
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Region;
    use proptest::prelude::*;

    fn mesh() -> HexMesh {
        HexMesh::block([2, 2, 2], [1e-9, 2e-9, 1e-9], [0.0; 3], Region::Substrate).unwrap()
    }

    #[test]
    fn translation_has_no_strain() {
        let m = mesh();
        // Amplitude of a mass-normalized translation of this small block.
        let amp = 1.0 / (3515.0 * m.total_volume()).sqrt();
        let u: Vec<f64> = (0..m.n_dofs()).map(|d| amp * [0.3, -1.0, 2.0][d % 3]).collect();
        for e in 0..m.n_elements() {
            let s = strain_field(&u, &m, e);
            assert!(s.components().iter().all(|c| c.abs() < 1e-12), "{s:?}");
        }
    }

    #[test]
    fn nodal_average_of_uniform_field() {
        let m = mesh();
        let c = 2e-5;
        let mut u = vec![0.0; m.n_dofs()];
        for (n, p) in m.nodes.iter().enumerate() {
            u[3 * n + 1] = c * p[2]; // ε_yz = c/2
        }
        let adj = m.node_elements();
        let s = nodal_strain(&u, &m, &adj[13]);
        assert!((s.yz - c / 2.0).abs() < 1e-15);
        assert!(s.xx.abs() < 1e-18 && s.xy.abs() < 1e-18);
    }

    proptest! {
        #[test]
        fn strain_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, seed in 0u64..1000) {
            let m = mesh();
            let phi: Vec<f64> = (0..m.n_dofs()).map(|i| (((i as u64 + seed) * 2654435761) % 1000) as f64 * 1e-3).collect();
            let psi: Vec<f64> = (0..m.n_dofs()).map(|i| (((i as u64 * 7 + seed) * 40503) % 997) as f64 * 1e-3).collect();
            let mix: Vec<f64> = phi.iter().zip(&psi).map(|(x, y)| a * x + b * y).collect();
            for e in 0..m.n_elements() {
                let lhs = strain_field(&mix, &m, e).components();
                let rhs = strain_field(&phi, &m, e).scaled(a).add(&strain_field(&psi, &m, e).scaled(b)).components();
                for (l, r) in lhs.iter().zip(&rhs) {
                    prop_assert!((l - r).abs() <= 1e-9 * (l.abs() + r.abs() + 1e3));
                }
            }
        }
    }
}
