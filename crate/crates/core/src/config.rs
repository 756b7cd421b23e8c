//! Run configuration shared by every command, in the units people write
//! configs in (GHz, PHz per strain, K, ns).

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::experiment::ThermometryOptions;
use crate::fem::EigenOptions;
use crate::hamiltonian::{ground_state_splitting, SivParams, StrainProjections};
use crate::mesh::SceneSpec;
use crate::rates::{BulkReference, CouplingConvention, GridSpec, QModel};
use crate::units::MaterialParams;
use crate::units::{GHZ, NS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SivConfig {
    #[serde(rename = "lambda_SO_GHz")]
    pub lambda_so_ghz: f64,
    #[serde(rename = "alpha_PHz_per_strain")]
    pub alpha_phz: f64,
    #[serde(rename = "beta_PHz_per_strain")]
    pub beta_phz: f64,
    /// Row-major lab → defect rotation.
    #[serde(default = "identity9")]
    pub axis_rotation: [f64; 9],
}

fn identity9() -> [f64; 9] {
    [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
}

impl Default for SivConfig {
    fn default() -> Self {
        SivConfig::from(&SivParams::NOMINAL)
    }
}

impl From<&SivParams> for SivConfig {
    fn from(p: &SivParams) -> Self {
        let r = p.axis_rotation;
        SivConfig {
            lambda_so_ghz: p.lambda_so / GHZ,
            alpha_phz: p.alpha / 1e15,
            beta_phz: p.beta / 1e15,
            axis_rotation: [r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]],
        }
    }
}

impl SivConfig {
    pub fn params(&self) -> Result<SivParams> {
        let r = self.axis_rotation;
        let p = SivParams {
            lambda_so: self.lambda_so_ghz * GHZ,
            alpha: self.alpha_phz * 1e15,
            beta: self.beta_phz * 1e15,
            axis_rotation: [[r[0], r[1], r[2]], [r[3], r[4], r[5]], [r[6], r[7], r[8]]],
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DosConfig {
    #[serde(rename = "sigma_GHz")]
    pub sigma_ghz: f64,
    #[serde(rename = "step_GHz")]
    pub step_ghz: f64,
}

impl Default for DosConfig {
    fn default() -> Self {
        DosConfig { sigma_ghz: 1.0, step_ghz: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub max_modes: usize,
    pub block_size: usize,
    pub slice_modes: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let e = EigenOptions::default();
        SolverConfig { max_modes: 5000, block_size: e.block_size, slice_modes: e.slice_modes, tol: e.tol, seed: e.seed }
    }
}

impl SolverConfig {
    pub fn eigen_options(&self, threads: usize) -> EigenOptions {
        EigenOptions {
            block_size: self.block_size,
            slice_modes: self.slice_modes,
            tol: self.tol,
            seed: self.seed,
            threads,
            ..EigenOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    #[serde(rename = "baseline_window_ns")]
    pub baseline_window_ns: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig { baseline_window_ns: 50.0 }
    }
}

impl TraceConfig {
    pub fn baseline_window(&self) -> f64 {
        self.baseline_window_ns * NS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "SceneSpec::desk")]
    pub scene: SceneSpec,
    #[serde(default = "diamond")]
    pub materials: MaterialParams,
    #[serde(default)]
    pub siv: SivConfig,
    /// Eigenmode band, GHz.
    #[serde(rename = "band_GHz")]
    pub band_ghz: [f64; 2],
    #[serde(default)]
    pub q_model: QModel,
    /// Map sampling; one point per voxel column of the scene when absent.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(rename = "temperature_K", default)]
    pub temperature_k: f64,
    /// Overrides the splitting computed from the defect parameters.
    #[serde(rename = "delta_GS_GHz", default)]
    pub delta_gs_ghz: Option<f64>,
    #[serde(default)]
    pub convention: CouplingConvention,
    /// Bulk normalization of the map; substrate average by default.
    #[serde(default)]
    pub bulk_reference: Option<BulkReference>,
    #[serde(default)]
    pub dos: DosConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub thermometry: ThermometryOptions,
    #[serde(default)]
    pub trace: TraceConfig,
}

fn diamond() -> MaterialParams {
    MaterialParams::DIAMOND
}

impl Default for RunConfig {
    /// Desk-scale scene, nominal materials and defect, modes to 150 GHz.
    fn default() -> Self {
        RunConfig {
            scene: SceneSpec::desk(),
            materials: MaterialParams::DIAMOND,
            siv: SivConfig::default(),
            band_ghz: [0.0, 150.0],
            q_model: QModel::default(),
            grid: None,
            temperature_k: 0.0,
            delta_gs_ghz: None,
            convention: CouplingConvention::default(),
            bulk_reference: None,
            dos: DosConfig::default(),
            solver: SolverConfig::default(),
            thermometry: ThermometryOptions::default(),
            trace: TraceConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::parse("config", e))?;
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.materials.validate()?;
        self.siv.params()?;
        self.q_model.validate()?;
        let [lo, hi] = self.band_ghz;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid(format!("band_GHz must satisfy 0 <= lo < hi, got [{lo}, {hi}]")));
        }
        if !(self.temperature_k >= 0.0 && self.temperature_k.is_finite()) {
            return Err(Error::invalid(format!("temperature_K must be >= 0, got {}", self.temperature_k)));
        }
        if let Some(d) = self.delta_gs_ghz {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::invalid(format!("delta_GS_GHz must be positive, got {d}")));
            }
        }
        if let Some(g) = &self.grid {
            if g.nx == 0 || g.nz == 0 {
                return Err(Error::invalid("grid needs at least one point per axis"));
            }
        }
        if !(self.dos.sigma_ghz > 0.0 && self.dos.step_ghz > 0.0) {
            return Err(Error::invalid("dos sigma_GHz and step_GHz must be positive"));
        }
        if self.solver.block_size == 0 || self.solver.slice_modes == 0 || !(self.solver.tol > 0.0) {
            return Err(Error::invalid("solver block_size, slice_modes and tol must be positive"));
        }
        if !(self.trace.baseline_window_ns > 0.0) {
            return Err(Error::invalid("trace baseline_window_ns must be positive"));
        }
        if !(self.thermometry.t_max > 0.0) {
            return Err(Error::invalid("thermometry T_max_K must be positive"));
        }
        Ok(())
    }

    /// Ground-state splitting used for rates, Hz: the override when given,
    /// otherwise the strain-free spin-orbit value.
    pub fn delta_gs_hz(&self) -> Result<f64> {
        match self.delta_gs_ghz {
            Some(d) => Ok(d * GHZ),
            None => Ok(ground_state_splitting(&self.siv.params()?, &StrainProjections::default())),
        }
    }

    /// The splitting must fall inside the solved band for a map to be meaningful.
    pub fn check_map_band(&self) -> Result<()> {
        let d = self.delta_gs_hz()? / GHZ;
        let [lo, hi] = self.band_ghz;
        if d < lo || d > hi {
            return Err(Error::invalid(format!("delta_GS = {d} GHz lies outside band_GHz [{lo}, {hi}]")));
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        self.grid.unwrap_or_else(|| GridSpec::for_scene(&self.scene))
    }

    pub fn reference(&self) -> BulkReference {
        self.bulk_reference.unwrap_or_else(|| BulkReference::for_scene(&self.scene))
    }

    /// SHA-256 of the canonical JSON form; defaults are filled in first, so
    /// spelling a default out does not change the digest.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = RunConfig::from_json(r#"{"band_GHz": [0, 150]}"#).unwrap();
        assert_eq!(c, RunConfig::default());
        assert!((c.delta_gs_hz().unwrap() - 46e9).abs() < 1e-3);
        let p = c.siv.params().unwrap();
        assert_eq!(p, SivParams::NOMINAL);
    }

    #[test]
    fn digest_ignores_spelled_out_defaults() {
        let a = RunConfig::from_json(r#"{"band_GHz": [0, 150]}"#).unwrap();
        let b = RunConfig::from_json(r#"{"band_GHz": [0, 150], "temperature_K": 0.0, "siv": {"lambda_SO_GHz": 46, "alpha_PHz_per_strain": 1.3, "beta_PHz_per_strain": 1.7}}"#).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = RunConfig::from_json(r#"{"band_GHz": [0, 150], "temperature_K": 4.0}"#).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            r#"{"band_GHz": [10, 5]}"#,
            r#"{"band_GHz": [0, 150], "temperature_K": -1}"#,
            r#"{"band_GHz": [0, 150], "bogus": 1}"#,
            r#"{"band_GHz": [0, 150], "siv": {"lambda_SO_GHz": 46, "alpha_PHz_per_strain": 1.3, "beta_PHz_per_strain": 1.7, "axis_rotation": [2,0,0,0,1,0,0,0,1]}}"#,
            r#"{"band_GHz": [0, 150], "delta_GS_GHz": 0}"#,
        ] {
            assert!(RunConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn map_band_check() {
        let mut c = RunConfig { delta_gs_ghz: Some(200.0), ..RunConfig::default() };
        assert!(c.check_map_band().is_err());
        c.delta_gs_ghz = Some(72.0);
        assert!(c.check_map_band().is_ok());
    }
}
