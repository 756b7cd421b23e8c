//! Eigenmode sets: frequencies in Hz, mass-normalized full-length
//! displacement fields, per-region energy fractions and quality factors.

use std::f64::consts::PI;

use super::assembly::{region_energy, spmv, AssembledSystem};
use super::eigen::{solve_band, EigenOptions};
use crate::error::{Error, Result};
use crate::mesh::{HexMesh, Region};
use crate::units::{to_angular, wave_speeds};

/// Quality factor assigned before a Q model is applied.
pub const DEFAULT_Q: f64 = 1000.0;

/// Ratio to the first elastic frequency below which a mode counts as rigid.
pub const RIGID_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeSet {
    /// Cyclic frequencies (Hz), ascending.
    pub frequencies: Vec<f64>,
    /// Displacements over all 3·n_nodes dofs (zero where constrained),
    /// normalized so φᵀMφ = 1; units kg^(-1/2).
    pub shapes: Vec<Vec<f64>>,
    pub energy_fraction_substrate: Vec<f64>,
    pub q: Vec<f64>,
    pub rigid: Vec<bool>,
    /// Relative eigen-residuals ‖Kφ − ω²Mφ‖ / ‖Kφ‖ (rigid modes: scaled by the band top).
    pub residuals: Vec<f64>,
    /// Digest of the mesh the shapes live on.
    pub mesh_digest: String,
    pub n_dofs: usize,
}

impl ModeSet {
    pub fn empty(mesh: &HexMesh) -> Self {
        ModeSet {
            frequencies: Vec::new(),
            shapes: Vec::new(),
            energy_fraction_substrate: Vec::new(),
            q: Vec::new(),
            rigid: Vec::new(),
            residuals: Vec::new(),
            mesh_digest: mesh.digest(),
            n_dofs: mesh.n_dofs(),
        }
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn energy_fraction_nd(&self, n: usize) -> f64 {
        1.0 - self.energy_fraction_substrate[n]
    }

    pub fn angular(&self, n: usize) -> f64 {
        to_angular(self.frequencies[n])
    }

    pub fn rigid_count(&self) -> usize {
        self.rigid.iter().filter(|&&r| r).count()
    }

    fn select(&self, keep: impl Fn(usize) -> bool) -> ModeSet {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        ModeSet {
            frequencies: idx.iter().map(|&i| self.frequencies[i]).collect(),
            shapes: idx.iter().map(|&i| self.shapes[i].clone()).collect(),
            energy_fraction_substrate: idx.iter().map(|&i| self.energy_fraction_substrate[i]).collect(),
            q: idx.iter().map(|&i| self.q[i]).collect(),
            rigid: idx.iter().map(|&i| self.rigid[i]).collect(),
            residuals: idx.iter().map(|&i| self.residuals[i]).collect(),
            mesh_digest: self.mesh_digest.clone(),
            n_dofs: self.n_dofs,
        }
    }

    /// The set with rigid-body modes removed, as used for rate evaluation.
    pub fn elastic(&self) -> ModeSet {
        self.select(|i| !self.rigid[i])
    }

    /// Modes with f_lo ≤ ν ≤ f_hi.
    pub fn in_band(&self, f_lo: f64, f_hi: f64) -> ModeSet {
        self.select(|i| self.frequencies[i] >= f_lo && self.frequencies[i] <= f_hi)
    }

    /// Concatenate two sets on the same mesh, keeping frequency order.
    pub fn merged(&self, other: &ModeSet) -> Result<ModeSet> {
        if self.mesh_digest != other.mesh_digest || self.n_dofs != other.n_dofs {
            return Err(Error::invalid("mode sets belong to different meshes"));
        }
        let mut order: Vec<(f64, bool, usize)> = (0..self.len())
            .map(|i| (self.frequencies[i], false, i))
            .chain((0..other.len()).map(|i| (other.frequencies[i], true, i)))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = ModeSet { mesh_digest: self.mesh_digest.clone(), n_dofs: self.n_dofs, ..Default::default() };
        for (_, from_other, i) in order {
            let src = if from_other { other } else { self };
            out.frequencies.push(src.frequencies[i]);
            out.shapes.push(src.shapes[i].clone());
            out.energy_fraction_substrate.push(src.energy_fraction_substrate[i]);
            out.q.push(src.q[i]);
            out.rigid.push(src.rigid[i]);
            out.residuals.push(src.residuals[i]);
        }
        Ok(out)
    }

    /// Check array lengths and basic value ranges.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.shapes.len(),
            self.energy_fraction_substrate.len(),
            self.q.len(),
            self.rigid.len(),
            self.residuals.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::invalid("mode set arrays have inconsistent lengths"));
        }
        if self.shapes.iter().any(|s| s.len() != self.n_dofs) {
            return Err(Error::invalid("mode shape length differs from the dof count"));
        }
        if self.frequencies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("mode frequencies are not ascending"));
        }
        if self.frequencies.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::invalid("mode frequencies must be finite and nonnegative"));
        }
        if self.q.iter().any(|q| !(*q > 1.0)) {
            return Err(Error::invalid("quality factors must exceed 1"));
        }
        Ok(())
    }
}

/// Fractions (f_ND, f_sub) of a mode's kinetic (mass-weighted) energy.
pub fn energy_fractions(shape: &[f64], mesh: &HexMesh, sys: &AssembledSystem) -> (f64, f64) {
    let m = |e| *sys.cache.mass(e);
    let nd = region_energy(mesh, m, shape, Region::Nanodiamond);
    let sub = region_energy(mesh, m, shape, Region::Substrate);
    let total = nd + sub;
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    (nd / total, sub / total)
}

/// A frequency safely below the fundamental of any body that fits in the mesh
/// bounding box; used to tell rigid modes from elastic ones.
fn elastic_floor(mesh: &HexMesh, sys: &AssembledSystem) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &mesh.nodes {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let diag = (0..3).map(|a| (hi[a] - lo[a]).powi(2)).sum::<f64>().sqrt();
    let vt = wave_speeds(&sys.material).map(|w| w.transverse).unwrap_or(1.0);
    vt / (100.0 * diag)
}

/// All modes with f_lo ≤ ν ≤ f_hi (at most `max_modes`, the lowest ones).
pub fn solve_modes(
    mesh: &HexMesh,
    sys: &AssembledSystem,
    f_lo: f64,
    f_hi: f64,
    max_modes: usize,
    opts: &EigenOptions,
) -> Result<ModeSet> {
    if !(f_lo >= 0.0) || !(f_hi > f_lo) {
        return Err(Error::invalid(format!("bad frequency band [{f_lo}, {f_hi}] Hz")));
    }
    let lam = |f: f64| (2.0 * PI * f).powi(2);
    let pairs = solve_band(sys, if f_lo == 0.0 { 0.0 } else { lam(f_lo) }, lam(f_hi), max_modes, opts)?;
    let mut set = ModeSet::empty(mesh);
    if pairs.is_empty() {
        log::warn!("no modes in [{f_lo:e}, {f_hi:e}] Hz");
        return Ok(set);
    }
    let floor = elastic_floor(mesh, sys);
    let mut tmp = vec![0.0; sys.n_free()];
    for (i, (&l, x)) in pairs.values.iter().zip(&pairs.vectors).enumerate() {
        let nu = l.max(0.0).sqrt() / (2.0 * PI);
        // Re-normalize in M; Lanczos vectors are already close.
        spmv(&sys.mass, x, &mut tmp);
        let norm = x.iter().zip(&tmp).map(|(a, b)| a * b).sum::<f64>().sqrt();
        let free: Vec<f64> = x.iter().map(|v| v / norm).collect();
        let shape = sys.expand(&free);
        let (_, f_sub) = energy_fractions(&shape, mesh, sys);
        set.frequencies.push(nu);
        set.shapes.push(shape);
        set.energy_fraction_substrate.push(f_sub);
        set.q.push(DEFAULT_Q);
        set.rigid.push(false);
        set.residuals.push(pairs.residuals[i]);
    }
    let first_elastic = set.frequencies.iter().copied().find(|&f| f >= floor);
    let cutoff = first_elastic.map_or(floor, |f| RIGID_RATIO * f);
    for (r, &f) in set.rigid.iter_mut().zip(&set.frequencies) {
        *r = f < cutoff;
    }
    Ok(set)
}

/// Per-mode checks against the operators: Rayleigh quotient error
/// |φᵀKφ − ω²| / ω² and the worst off-diagonal |φ_mᵀ M φ_n − δ_mn|.
pub struct ModeChecks {
    pub max_rayleigh_error: f64,
    pub max_orthogonality_error: f64,
}

pub fn check_modes(set: &ModeSet, sys: &AssembledSystem) -> ModeChecks {
    let free: Vec<Vec<f64>> = set.shapes.iter().map(|s| sys.restrict(s)).collect();
    let mass_images: Vec<Vec<f64>> = free
        .iter()
        .map(|x| {
            let mut y = vec![0.0; x.len()];
            spmv(&sys.mass, x, &mut y);
            y
        })
        .collect();
    let mut rayleigh: f64 = 0.0;
    let mut tmp = vec![0.0; sys.n_free()];
    for (n, x) in free.iter().enumerate() {
        if set.rigid[n] {
            continue;
        }
        spmv(&sys.stiffness, x, &mut tmp);
        let xkx: f64 = x.iter().zip(&tmp).map(|(a, b)| a * b).sum();
        let xmx: f64 = x.iter().zip(&mass_images[n]).map(|(a, b)| a * b).sum();
        let w2 = set.angular(n).powi(2);
        rayleigh = rayleigh.max((xkx / xmx - w2).abs() / w2);
    }
    let mut ortho: f64 = 0.0;
    for (m, mx) in mass_images.iter().enumerate() {
        for (n, y) in free.iter().enumerate() {
            let d: f64 = mx.iter().zip(y).map(|(a, b)| a * b).sum();
            let target = if m == n { 1.0 } else { 0.0 };
            ortho = ortho.max((d - target).abs());
        }
    }
    ModeChecks { max_rayleigh_error: rayleigh, max_orthogonality_error: ortho }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::assemble;
    use crate::units::MaterialParams;

    fn cube(n: usize, free: bool) -> (HexMesh, AssembledSystem) {
        let mut m = HexMesh::block([n; 3], [10e-9; 3], [0.0; 3], Region::Substrate).unwrap();
        if !free {
            m.clamp_plane(2, 0.0, 1e-15);
        }
        let sys = assemble(&m, &MaterialParams::DIAMOND).unwrap();
        (m, sys)
    }

    #[test]
    fn free_cube_low_band_is_rigid() {
        let (m, sys) = cube(3, true);
        let set = solve_modes(&m, &sys, 0.0, 1e8, 100, &EigenOptions::default()).unwrap();
        assert_eq!(set.len(), 6);
        assert_eq!(set.rigid_count(), 6);
        assert!(set.elastic().is_empty());
    }

    #[test]
    fn rigid_translation_fraction_is_mass_ratio() {
        let (mut m, _) = cube(3, true);
        for e in 0..9 {
            m.regions[e] = Region::Nanodiamond;
        }
        let sys = assemble(&m, &MaterialParams::DIAMOND).unwrap();
        let shape: Vec<f64> = (0..m.n_dofs()).map(|d| if d % 3 == 1 { 1.0 } else { 0.0 }).collect();
        let (f_nd, f_sub) = energy_fractions(&shape, &m, &sys);
        assert!((f_nd - 9.0 / 27.0).abs() < 1e-12);
        assert!((f_nd + f_sub - 1.0).abs() < 1e-12);
    }

    #[test]
    fn modes_are_orthonormal_and_consistent() {
        let (m, sys) = cube(4, false);
        let set = solve_modes(&m, &sys, 0.0, 2e12, 40, &EigenOptions::default()).unwrap();
        assert!(set.len() >= 10);
        assert_eq!(set.rigid_count(), 0);
        set.validate().unwrap();
        let c = check_modes(&set, &sys);
        assert!(c.max_rayleigh_error < 1e-8, "{}", c.max_rayleigh_error);
        assert!(c.max_orthogonality_error < 1e-8, "{}", c.max_orthogonality_error);
        assert!(set.energy_fraction_substrate.iter().all(|&f| (f - 1.0).abs() < 1e-12));
        // Constrained dofs stay at zero.
        for s in &set.shapes {
            for &(n, a) in &m.constrained {
                assert_eq!(s[3 * n + a as usize], 0.0);
            }
        }
    }

    #[test]
    fn merge_and_band_selection() {
        let (m, sys) = cube(3, false);
        let set = solve_modes(&m, &sys, 0.0, 3e12, 30, &EigenOptions::default()).unwrap();
        let mid = set.frequencies[set.len() / 2];
        let lo = set.in_band(0.0, mid);
        let hi = set.in_band(mid * (1.0 + 1e-12), f64::INFINITY);
        let back = hi.merged(&lo).unwrap();
        assert_eq!(back, set);
    }
}
