//! SiV⁻ ground-state manifold under strain.
//!
//! Basis order is fixed as {e_x↑, e_x↓, e_y↑, e_y↓}. Parameters are cyclic
//! (Hz, Hz per unit strain); [`hamiltonian`] returns an angular-frequency
//! matrix (energy / ħ in rad/s), while [`ground_state_splitting`] reports a
//! cyclic splitting.

use std::f64::consts::PI;

use nalgebra::{Complex, Matrix3, Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::StrainTensor;

pub type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SivParams {
    /// Spin-orbit splitting λ_SO, Hz.
    pub lambda_so: f64,
    /// Strain susceptibility α, Hz per unit strain.
    pub alpha: f64,
    /// Strain susceptibility β, Hz per unit strain.
    pub beta: f64,
    /// Proper rotation taking lab-frame vectors into the defect frame.
    pub axis_rotation: [[f64; 3]; 3],
}

impl SivParams {
    pub const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    /// λ_SO = 46 GHz, α = 1.3 PHz, β = 1.7 PHz, symmetry axis along lab z.
    pub const NOMINAL: SivParams =
        SivParams { lambda_so: 46e9, alpha: 1.3e15, beta: 1.7e15, axis_rotation: Self::IDENTITY };

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_so > 0.0 && self.lambda_so.is_finite()) {
            return Err(Error::invalid(format!("lambda_SO must be positive, got {}", self.lambda_so)));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::invalid("strain susceptibilities must be finite"));
        }
        check_rotation(&self.rotation())
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let r = &self.axis_rotation;
        Matrix3::new(
            r[0][0], r[0][1], r[0][2], //
            r[1][0], r[1][1], r[1][2], //
            r[2][0], r[2][1], r[2][2],
        )
    }

    /// Defect axis along a crystal ⟨111⟩ direction: the defect z axis is
    /// (1,1,1)/√3 in the lab frame and defect x lies along (1,−1,0)/√2.
    pub fn with_axis_111(mut self) -> Self {
        let s2 = 2f64.sqrt();
        let s3 = 3f64.sqrt();
        let s6 = 6f64.sqrt();
        self.axis_rotation =
            [[1.0 / s2, -1.0 / s2, 0.0], [1.0 / s6, 1.0 / s6, -2.0 / s6], [1.0 / s3, 1.0 / s3, 1.0 / s3]];
        self
    }
}

impl Default for SivParams {
    fn default() -> Self {
        Self::NOMINAL
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    let err = (r * r.transpose() - Matrix3::identity()).abs().max();
    if err > 1e-10 || (r.determinant() - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!(
            "axis rotation is not a proper rotation (orthogonality error {err:e}, det {})",
            r.determinant()
        )));
    }
    Ok(())
}

/// Strain energies χ·ε of the two E_g components, cyclic Hz (or Hz·kg^-1/2
/// when fed the raw strain of a mass-normalized mode).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StrainProjections {
    pub e_gx: f64,
    pub e_gy: f64,
}

impl StrainProjections {
    pub fn norm_sqr(&self) -> f64 {
        self.e_gx * self.e_gx + self.e_gy * self.e_gy
    }
}

/// ε' = R ε Rᵀ.
pub fn rotate_to_defect_frame(eps: &StrainTensor, r: &Matrix3<f64>) -> Result<StrainTensor> {
    check_rotation(r)?;
    Ok(StrainTensor::from_matrix(&(r * eps.matrix() * r.transpose())))
}

/// E_g projections of a defect-frame strain.
pub fn strain_projections(eps: &StrainTensor, p: &SivParams) -> StrainProjections {
    StrainProjections {
        e_gx: p.alpha * (eps.xx - eps.yy) + p.beta * eps.zx,
        e_gy: -2.0 * p.alpha * eps.xy + p.beta * eps.yz,
    }
}

/// Rotate a lab-frame strain with the parameters' axis and project it.
pub fn lab_strain_projections(eps_lab: &StrainTensor, p: &SivParams) -> StrainProjections {
    let r = p.rotation();
    let eps = StrainTensor::from_matrix(&(r * eps_lab.matrix() * r.transpose()));
    strain_projections(&eps, p)
}

/// H/ħ in rad/s: (λ/2) σ_y ⊗ σ_z + e_gx σ_z ⊗ 1 + e_gy σ_x ⊗ 1.
///
/// σ_x is taken as the Hermitian |e_x⟩⟨e_y| + |e_y⟩⟨e_x|.
pub fn hamiltonian(p: &SivParams, s: &StrainProjections) -> Matrix4<C64> {
    let w = 2.0 * PI;
    let so = 0.5 * p.lambda_so * w;
    let gx = s.e_gx * w;
    let gy = s.e_gy * w;
    let z = C64::new(0.0, 0.0);
    let re = |x: f64| C64::new(x, 0.0);
    let im = |x: f64| C64::new(0.0, x);
    // Orbital blocks: σ_y = [[0, −i], [i, 0]], σ_z = diag(1, −1), σ_x = [[0, 1], [1, 0]].
    // Index = 2·orbital + spin, spin sign +1 for ↑ and −1 for ↓.
    let mut h = Matrix4::from_element(z);
    for spin in 0..2 {
        let sz = if spin == 0 { 1.0 } else { -1.0 };
        let x = spin;
        let y = 2 + spin;
        h[(x, x)] = re(gx);
        h[(y, y)] = re(-gx);
        h[(x, y)] = im(-so * sz) + re(gy);
        h[(y, x)] = im(so * sz) + re(gy);
    }
    h
}

/// Ascending eigenvalues of [`hamiltonian`], rad/s.
pub fn eigenvalues(p: &SivParams, s: &StrainProjections) -> [f64; 4] {
    let eig = SymmetricEigen::new(hamiltonian(p, s));
    let mut v: [f64; 4] = std::array::from_fn(|i| eig.eigenvalues[i]);
    v.sort_by(f64::total_cmp);
    v
}

/// Δ_GS in cyclic Hz: √(λ² + 4e_gx² + 4e_gy²).
pub fn ground_state_splitting(p: &SivParams, s: &StrainProjections) -> f64 {
    (p.lambda_so * p.lambda_so + 4.0 * s.norm_sqr()).sqrt()
}
