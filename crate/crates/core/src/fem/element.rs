//! Eight-node trilinear hexahedron for isotropic linear elasticity.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::mesh::HEX_CORNERS;
use crate::units::MaterialParams;

pub type Mat24 = SMatrix<f64, 24, 24>;
pub type Mat6 = SMatrix<f64, 6, 6>;
type Mat6x24 = SMatrix<f64, 6, 24>;

const GAUSS: f64 = 0.577_350_269_189_625_8;

/// Shape function values at reference coordinates `xi`.
pub fn shape_values(xi: [f64; 3]) -> [f64; 8] {
    HEX_CORNERS.map(|c| 0.125 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]) * (1.0 + c[2] * xi[2]))
}

/// Reference-space gradients dN_i/dξ at `xi`.
pub fn shape_gradients_ref(xi: [f64; 3]) -> [[f64; 3]; 8] {
    HEX_CORNERS.map(|c| {
        let f = |a: usize| 1.0 + c[a] * xi[a];
        [0.125 * c[0] * f(1) * f(2), 0.125 * c[1] * f(0) * f(2), 0.125 * c[2] * f(0) * f(1)]
    })
}

/// Physical gradients dN_i/dx at `xi` and the Jacobian determinant.
pub fn shape_gradients(coords: &[[f64; 3]; 8], xi: [f64; 3]) -> ([[f64; 3]; 8], f64) {
    let dref = shape_gradients_ref(xi);
    let mut jac = Matrix3::zeros();
    for (g, x) in dref.iter().zip(coords) {
        for r in 0..3 {
            for c in 0..3 {
                jac[(r, c)] += g[r] * x[c];
            }
        }
    }
    let det = jac.determinant();
    assert!(det > 0.0, "singular or inverted element Jacobian (det = {det:e})");
    let inv = jac.try_inverse().expect("nonsingular Jacobian");
    let grads = dref.map(|g| {
        let v = inv * Vector3::new(g[0], g[1], g[2]);
        [v[0], v[1], v[2]]
    });
    (grads, det)
}

/// Isotropic elasticity matrix in Voigt order (xx, yy, zz, xy, yz, zx) with
/// engineering shear strains.
pub fn elasticity_matrix(m: &MaterialParams) -> Mat6 {
    let (lambda, mu) = m.lame();
    let mut d = Mat6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = lambda;
        }
        d[(i, i)] += 2.0 * mu;
        d[(i + 3, i + 3)] = mu;
    }
    d
}

fn strain_displacement(grads: &[[f64; 3]; 8]) -> Mat6x24 {
    let mut b = Mat6x24::zeros();
    for (i, g) in grads.iter().enumerate() {
        let c = 3 * i;
        b[(0, c)] = g[0];
        b[(1, c + 1)] = g[1];
        b[(2, c + 2)] = g[2];
        b[(3, c)] = g[1];
        b[(3, c + 1)] = g[0];
        b[(4, c + 1)] = g[2];
        b[(4, c + 2)] = g[1];
        b[(5, c)] = g[2];
        b[(5, c + 2)] = g[0];
    }
    b
}

fn gauss_points() -> impl Iterator<Item = [f64; 3]> {
    HEX_CORNERS.into_iter().map(|c| c.map(|v| v * GAUSS))
}

/// Element stiffness matrix (2×2×2 Gauss quadrature). Local dof order is
/// node-major: (u_x, u_y, u_z) of node 0, then node 1, …
pub fn stiffness(coords: &[[f64; 3]; 8], m: &MaterialParams) -> Mat24 {
    let d = elasticity_matrix(m);
    let mut k = Mat24::zeros();
    for xi in gauss_points() {
        let (grads, det) = shape_gradients(coords, xi);
        let b = strain_displacement(&grads);
        k += b.transpose() * d * b * det;
    }
    0.5 * (k + k.transpose())
}

/// Consistent mass matrix. The 2×2×2 rule integrates the trilinear products exactly.
pub fn mass(coords: &[[f64; 3]; 8], m: &MaterialParams) -> Mat24 {
    let mut scalar = SMatrix::<f64, 8, 8>::zeros();
    for xi in gauss_points() {
        let n = shape_values(xi);
        let (_, det) = shape_gradients(coords, xi);
        for i in 0..8 {
            for j in 0..8 {
                scalar[(i, j)] += m.rho * n[i] * n[j] * det;
            }
        }
    }
    let mut out = Mat24::zeros();
    for i in 0..8 {
        for j in 0..8 {
            for a in 0..3 {
                out[(3 * i + a, 3 * j + a)] = scalar[(i, j)];
            }
        }
    }
    out
}

/// Symmetric strain at the element center from nodal displacements
/// (24 values, node-major). Returned as tensor components
/// (xx, yy, zz, xy, yz, zx).
pub fn center_strain(coords: &[[f64; 3]; 8], u: &[f64; 24]) -> [f64; 6] {
    let (grads, _) = shape_gradients(coords, [0.0; 3]);
    // Gradients sum to zero, so subtracting one node's displacement changes
    // nothing mathematically but makes rigid translations exactly strain free.
    let base = [u[0], u[1], u[2]];
    let mut du = [[0.0; 3]; 3]; // du[i][j] = d u_i / d x_j
    for (n, g) in grads.iter().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                du[i][j] += (u[3 * n + i] - base[i]) * g[j];
            }
        }
    }
    [
        du[0][0],
        du[1][1],
        du[2][2],
        0.5 * (du[0][1] + du[1][0]),
        0.5 * (du[1][2] + du[2][1]),
        0.5 * (du[2][0] + du[0][2]),
    ]
}
