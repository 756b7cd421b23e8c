//! Orbital relaxation rates: golden-rule sums over FEM modes, the analytic
//! bulk limit, thermal scaling and spatial T₁ maps.
//!
//! Inputs and outputs are cyclic (Hz); the sums run in rad/s.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{strain_field, ModeSet, StrainTensor};
use crate::hamiltonian::{lab_strain_projections, SivParams, StrainProjections};
use crate::mesh::{HexMesh, PointLocator, Region, SceneSpec};
use crate::units::{wave_speeds, MaterialParams, BOLTZMANN, HBAR, PLANCK};

/// Points with no coupling in band get T₁⁰ = this × bulk reference.
pub const T1_CAP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QKind {
    #[default]
    Constant,
    LocalizationWeighted,
}

/// Mechanical quality factors assigned to modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QModel {
    #[serde(default)]
    pub kind: QKind,
    #[serde(rename = "Q_const", default = "default_q_const")]
    pub q_const: f64,
    #[serde(rename = "Q_leaky", default = "default_q_leaky")]
    pub q_leaky: f64,
}

fn default_q_const() -> f64 {
    1000.0
}

fn default_q_leaky() -> f64 {
    50.0
}

impl Default for QModel {
    fn default() -> Self {
        QModel { kind: QKind::Constant, q_const: default_q_const(), q_leaky: default_q_leaky() }
    }
}

impl QModel {
    pub fn constant(q: f64) -> Self {
        QModel { kind: QKind::Constant, q_const: q, ..Default::default() }
    }

    pub fn localization_weighted(q_const: f64, q_leaky: f64) -> Self {
        QModel { kind: QKind::LocalizationWeighted, q_const, q_leaky }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_const > 1.0 && self.q_leaky > 1.0) {
            return Err(Error::invalid(format!(
                "quality factors must exceed 1 (Q_const = {}, Q_leaky = {})",
                self.q_const, self.q_leaky
            )));
        }
        Ok(())
    }

    /// Q of a mode with substrate energy fraction `f_sub`.
    pub fn q_for(&self, f_sub: f64) -> f64 {
        match self.kind {
            QKind::Constant => self.q_const,
            QKind::LocalizationWeighted => {
                let f = f_sub.clamp(0.0, 1.0);
                (1.0 - f) * self.q_const + f * self.q_leaky
            }
        }
    }
}

/// Normalization of the golden-rule sum.
///
/// `Textbook` is the literal zero-point-weighted Fermi rule. Its continuum
/// limit exceeds the analytic bulk expression by exactly 4π for both
/// polarizations, so `BulkMatched` (the default) divides by 4π to make the
/// mode sum converge to the analytic rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CouplingConvention {
    #[default]
    BulkMatched,
    Textbook,
}

impl CouplingConvention {
    pub fn factor(self) -> f64 {
        match self {
            CouplingConvention::BulkMatched => 1.0 / (4.0 * PI),
            CouplingConvention::Textbook => 1.0,
        }
    }
}

/// coth(h ν / 2 k_B T); exactly 1 at T = 0.
pub fn thermal_factor(delta_gs_hz: f64, t_k: f64) -> f64 {
    if t_k <= 0.0 {
        return 1.0;
    }
    let x = PLANCK * delta_gs_hz / (2.0 * BOLTZMANN * t_k);
    // 1 + 2/(e^{2x} − 1) stays above 1 long after tanh has rounded to 1.
    1.0 + 2.0 / (2.0 * x).exp_m1()
}

/// Analytic bulk rate at T = 0, 1/s.
pub fn gamma_bulk_zero(m: &MaterialParams, p: &SivParams, delta_gs_hz: f64) -> Result<f64> {
    if !(delta_gs_hz > 0.0 && delta_gs_hz.is_finite()) {
        return Err(Error::invalid(format!("ground-state splitting must be positive, got {delta_gs_hz}")));
    }
    let v = wave_speeds(m)?;
    let coupling = p.alpha * p.alpha + 0.25 * p.beta * p.beta;
    let speeds = 1.0 / (5.0 * v.transverse.powi(5)) + 2.0 / (15.0 * v.longitudinal.powi(5));
    let w = 2.0 * PI * delta_gs_hz;
    Ok(PLANCK * coupling / (PI * m.rho) * speeds * w * w * w)
}

/// Analytic bulk T₁ (s) at splitting `delta_gs_hz` and temperature `t_k`.
pub fn t1_bulk_analytic(m: &MaterialParams, p: &SivParams, delta_gs_hz: f64, t_k: f64) -> Result<f64> {
    if t_k < 0.0 || !t_k.is_finite() {
        return Err(Error::invalid(format!("temperature must be non-negative, got {t_k}")));
    }
    Ok(1.0 / (gamma_bulk_zero(m, p, delta_gs_hz)? * thermal_factor(delta_gs_hz, t_k)))
}

/// Measured T₁ over the analytic bulk value.
pub fn lifetime_ratio(t1_measured: f64, delta_gs_hz: f64, t_k: f64, m: &MaterialParams, p: &SivParams) -> Result<f64> {
    if !(t1_measured > 0.0) {
        return Err(Error::invalid(format!("measured T1 must be positive, got {t1_measured}")));
    }
    Ok(t1_measured / t1_bulk_analytic(m, p, delta_gs_hz, t_k)?)
}

/// Unit-area Lorentzian in angular frequency with FWHM `gamma`.
pub fn lorentzian(x: f64, gamma: f64) -> f64 {
    (gamma / (2.0 * PI)) / (x * x + 0.25 * gamma * gamma)
}

/// One mode as seen by the sum: angular frequency and linewidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub omega: f64,
    pub gamma: f64,
}

/// Resonances of the elastic (non-rigid, ν > 0) modes, with their indices.
pub fn resonances(modes: &ModeSet, q: &QModel) -> Vec<(usize, Resonance)> {
    (0..modes.len())
        .filter(|&n| !modes.rigid[n] && modes.frequencies[n] > 0.0)
        .map(|n| {
            let omega = modes.angular(n);
            let qn = q.q_for(modes.energy_fraction_substrate[n]);
            (n, Resonance { omega, gamma: omega / qn })
        })
        .collect()
}

/// Γ₁⁰ (1/s) from per-mode projections of the raw mode strain.
/// Terms are added in slice order.
pub fn gamma1_from_projections(
    res: &[Resonance],
    proj: &[StrainProjections],
    delta_gs_hz: f64,
    conv: CouplingConvention,
) -> f64 {
    let delta = 2.0 * PI * delta_gs_hz;
    let mut sum = 0.0;
    for (r, s) in res.iter().zip(proj) {
        let g2 = 4.0 * PI * PI * s.norm_sqr();
        sum += HBAR / (2.0 * r.omega) * 2.0 * PI * g2 * lorentzian(r.omega - delta, r.gamma);
    }
    sum * conv.factor()
}

/// Γ₁⁰ at a point given the raw lab-frame strain of every mode there.
pub fn gamma1_golden_rule(
    modes: &ModeSet,
    strain_at: &[StrainTensor],
    p: &SivParams,
    delta_gs_hz: f64,
    q: &QModel,
    conv: CouplingConvention,
) -> Result<f64> {
    if strain_at.len() != modes.len() {
        return Err(Error::invalid(format!("{} strain tensors for {} modes", strain_at.len(), modes.len())));
    }
    let rs = resonances(modes, q);
    if rs.is_empty() {
        log::warn!("no elastic modes: the golden-rule rate is zero");
        return Ok(0.0);
    }
    let res: Vec<Resonance> = rs.iter().map(|x| x.1).collect();
    let proj: Vec<StrainProjections> = rs.iter().map(|&(n, _)| lab_strain_projections(&strain_at[n], p)).collect();
    Ok(gamma1_from_projections(&res, &proj, delta_gs_hz, conv))
}

/// Regular sampling of an xz plane at fixed y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "y_m")]
    pub y: f64,
    #[serde(rename = "x_range_m")]
    pub x_range: [f64; 2],
    #[serde(rename = "z_range_m")]
    pub z_range: [f64; 2],
    pub nx: usize,
    pub nz: usize,
}

impl GridSpec {
    /// One sample per voxel center in the slab just above y = 0, covering the
    /// whole scene.
    pub fn for_scene(spec: &SceneSpec) -> GridSpec {
        let h = spec.element_size;
        let [lx, _, lz] = spec.substrate_dims;
        let nx = ((lx / h) - 1e-9).ceil().max(1.0) as usize;
        let nz_sub = ((lz / h) - 1e-9).ceil().max(1.0) as usize;
        let top = spec.semi_axes[2] * (2.0 - spec.penetration_fraction);
        let nz_top = ((top / h) - 1e-9).ceil().max(1.0) as usize;
        let x0 = -(nx as f64) / 2.0 * h;
        GridSpec {
            y: 0.5 * h,
            x_range: [x0 + 0.5 * h, x0 + (nx as f64 - 0.5) * h],
            z_range: [-(nz_sub as f64 - 0.5) * h, (nz_top as f64 - 0.5) * h],
            nx,
            nz: nz_sub + nz_top,
        }
    }

    /// All nx × nz points, x fastest.
    pub fn points(&self) -> Vec<[f64; 3]> {
        let lin = |r: [f64; 2], n: usize, i: usize| {
            if n <= 1 {
                0.5 * (r[0] + r[1])
            } else {
                r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(self.nx * self.nz);
        for k in 0..self.nz {
            for i in 0..self.nx {
                out.push([lin(self.x_range, self.nx, i), self.y, lin(self.z_range, self.nz, k)]);
            }
        }
        out
    }

    /// Grid points that fall inside meshed material.
    pub fn points_in(&self, mesh: &HexMesh) -> Vec<[f64; 3]> {
        let loc = PointLocator::new(mesh);
        self.points().into_iter().filter(|&p| loc.locate(p).is_some()).collect()
    }
}

/// How the map's bulk reference T₁⁰ᴮ is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BulkReference {
    /// Mean over substrate points farther than `exclusion_radius` from `center`.
    Substrate { center: [f64; 3], exclusion_radius: f64 },
    /// A value supplied by the caller, s.
    Fixed(f64),
}

impl BulkReference {
    /// Contact-patch center with exclusion radius max(r_x, r_y).
    pub fn for_scene(spec: &SceneSpec) -> Self {
        BulkReference::Substrate { center: [0.0; 3], exclusion_radius: spec.semi_axes[0].max(spec.semi_axes[1]) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub position: [f64; 3],
    pub element: usize,
    pub region: Region,
    #[serde(rename = "gamma0_per_s")]
    pub gamma0: f64,
    #[serde(rename = "t1_0_s")]
    pub t1_0: f64,
    /// T₁ at the map temperature, s.
    #[serde(rename = "t1_s")]
    pub t1: f64,
    pub ratio: f64,
    pub capped: bool,
    /// Whether the point entered the bulk average.
    pub bulk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    #[serde(rename = "delta_GS_Hz")]
    pub delta_gs_hz: f64,
    #[serde(rename = "temperature_K")]
    pub temperature_k: f64,
    pub thermal_factor: f64,
    pub q_model: QModel,
    pub convention: CouplingConvention,
    pub reference: BulkReference,
    #[serde(rename = "bulk_reference_s")]
    pub bulk_reference: f64,
    pub bulk_points: usize,
    #[serde(rename = "t1_cap_s")]
    pub t1_cap: f64,
    pub n_modes_used: usize,
    pub mesh_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMap {
    pub points: Vec<RatePoint>,
    pub meta: MapMeta,
}

/// Arithmetic mean of finite T₁⁰ values over qualifying points; also returns
/// the per-point qualification mask.
pub fn bulk_reference(
    positions: &[[f64; 3]],
    regions: &[Region],
    t1_0: &[f64],
    center: [f64; 3],
    exclusion_radius: f64,
) -> Result<(f64, Vec<bool>)> {
    let mask: Vec<bool> = positions
        .iter()
        .zip(regions)
        .zip(t1_0)
        .map(|((p, &r), &t)| {
            let d2: f64 = (0..3).map(|a| (p[a] - center[a]).powi(2)).sum();
            r == Region::Substrate && d2 > exclusion_radius * exclusion_radius && t.is_finite()
        })
        .collect();
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return Err(Error::invalid("no substrate points outside the exclusion zone for the bulk reference"));
    }
    let sum: f64 = t1_0.iter().zip(&mask).filter(|x| *x.1).map(|x| *x.0).sum();
    Ok((sum / n as f64, mask))
}

/// Evaluate Γ₁⁰ on `points` and normalize by the bulk reference.
#[allow(clippy::too_many_arguments)]
pub fn t1_map(
    modes: &ModeSet,
    mesh: &HexMesh,
    points: &[[f64; 3]],
    p: &SivParams,
    delta_gs_hz: f64,
    t_k: f64,
    q: &QModel,
    conv: CouplingConvention,
    reference: BulkReference,
) -> Result<RateMap> {
    q.validate()?;
    p.validate()?;
    if !(delta_gs_hz > 0.0) {
        return Err(Error::invalid("ground-state splitting must be positive"));
    }
    if modes.n_dofs != mesh.n_dofs() {
        return Err(Error::invalid(format!("mode set has {} dofs but the mesh has {}", modes.n_dofs, mesh.n_dofs())));
    }
    let loc = PointLocator::new(mesh);
    let elements: Vec<usize> = points
        .iter()
        .map(|&pt| loc.locate(pt).ok_or_else(|| Error::invalid(format!("map point {pt:?} lies outside the mesh"))))
        .collect::<Result<_>>()?;
    let rs = resonances(modes, q);
    if rs.is_empty() {
        log::warn!("no elastic modes in the mode set: every point will be capped");
    }
    let res: Vec<Resonance> = rs.iter().map(|x| x.1).collect();
    let gammas: Vec<f64> = elements
        .par_iter()
        .map(|&e| {
            let proj: Vec<StrainProjections> =
                rs.iter().map(|&(n, _)| lab_strain_projections(&strain_field(&modes.shapes[n], mesh, e), p)).collect();
            gamma1_from_projections(&res, &proj, delta_gs_hz, conv)
        })
        .collect();
    let t1_raw: Vec<f64> = gammas.iter().map(|&g| if g > 0.0 { 1.0 / g } else { f64::INFINITY }).collect();
    let regions: Vec<Region> = elements.iter().map(|&e| mesh.regions[e]).collect();
    let (bulk, mask) = match reference {
        BulkReference::Substrate { center, exclusion_radius } => {
            bulk_reference(points, &regions, &t1_raw, center, exclusion_radius)?
        }
        BulkReference::Fixed(v) => {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("fixed bulk reference must be positive, got {v}")));
            }
            (v, vec![false; points.len()])
        }
    };
    let cap = T1_CAP_FACTOR * bulk;
    let tf = thermal_factor(delta_gs_hz, t_k);
    let out: Vec<RatePoint> = (0..points.len())
        .map(|i| {
            let capped = !t1_raw[i].is_finite();
            let t1_0 = if capped { cap } else { t1_raw[i] };
            RatePoint {
                position: points[i],
                element: elements[i],
                region: regions[i],
                gamma0: gammas[i],
                t1_0,
                t1: t1_0 / tf,
                ratio: t1_0 / bulk,
                capped,
                bulk: mask[i],
            }
        })
        .collect();
    Ok(RateMap {
        points: out,
        meta: MapMeta {
            delta_gs_hz,
            temperature_k: t_k,
            thermal_factor: tf,
            q_model: *q,
            convention: conv,
            reference,
            bulk_reference: bulk,
            bulk_points: mask.iter().filter(|&&m| m).count(),
            t1_cap: cap,
            n_modes_used: res.len(),
            mesh_digest: modes.mesh_digest.clone(),
        },
    })
}

impl RateMap {
    pub fn min_ratio(&self) -> Option<&RatePoint> {
        self.points.iter().min_by(|a, b| a.ratio.total_cmp(&b.ratio))
    }

    pub fn max_ratio(&self) -> Option<&RatePoint> {
        self.points.iter().filter(|p| !p.capped).max_by(|a, b| a.ratio.total_cmp(&b.ratio))
    }

    /// CSV with columns x_m, y_m, z_m, gamma0_per_s, t1_0_s, ratio, capped_flag.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_m,y_m,z_m,gamma0_per_s,t1_0_s,ratio,capped_flag\n");
        for p in &self.points {
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{:e},{:e},{}",
                p.position[0],
                p.position[1],
                p.position[2],
                p.gamma0,
                p.t1_0,
                p.ratio,
                u8::from(p.capped)
            );
        }
        s
    }

    /// Heatmap of log10(ratio) over the xz coordinates of the points.
    pub fn to_svg(&self) -> String {
        let mut xs: Vec<f64> = self.points.iter().map(|p| p.position[0]).collect();
        let mut zs: Vec<f64> = self.points.iter().map(|p| p.position[2]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        zs.sort_by(f64::total_cmp);
        zs.dedup();
        let step = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let (dx, dz) = (step(&xs), step(&zs));
        let (dx, dz) = (if dx.is_finite() { dx } else { 1.0 }, if dz.is_finite() { dz } else { 1.0 });
        let scale = 4.0 / dx.min(dz);
        let (x0, z1) = (xs.first().copied().unwrap_or(0.0) - 0.5 * dx, zs.last().copied().unwrap_or(0.0) + 0.5 * dz);
        let width = (xs.len() as f64) * dx * scale;
        let height = (zs.len() as f64) * dz * scale;
        let logs: Vec<f64> = self.points.iter().map(|p| p.ratio.max(1e-300).log10()).collect();
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {width:.3} {:.3}">"#,
            width,
            height + 24.0,
            height + 24.0
        );
        for (p, l) in self.points.iter().zip(&logs) {
            let t = if hi > lo { (l - lo) / (hi - lo) } else { 0.5 };
            let (r, g, b) = viridis_like(t);
            let _ = writeln!(
                s,
                r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
                (p.position[0] - 0.5 * dx - x0) * scale,
                (z1 - p.position[2] - 0.5 * dz) * scale,
                dx * scale,
                dz * scale
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="4" y="{:.1}" font-size="12" font-family="sans-serif">log10(T1/T1B): {lo:.2} to {hi:.2}</text>"#,
            height + 16.0
        );
        s.push_str("</svg>\n");
        s
    }
}

fn viridis_like(t: f64) -> (u8, u8, u8) {
    // Piecewise-linear dark blue → teal → yellow ramp.
    let stops = [(0.0, [68.0, 1.0, 84.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let t = t.clamp(0.0, 1.0);
    let (a, b) = if t <= 0.5 { (stops[0], stops[1]) } else { (stops[1], stops[2]) };
    let u = (t - a.0) / (b.0 - a.0);
    let c: [f64; 3] = std::array::from_fn(|i| a.1[i] + u * (b.1[i] - a.1[i]));
    (c[0].round() as u8, c[1].round() as u8, c[2].round() as u8)
}
