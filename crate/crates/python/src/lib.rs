//! Python bindings: scene building, eigenmodes, rates and the measurement
//! analysis, with frequencies in GHz and times in ns at the boundary.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nanophon::config::RunConfig;
use nanophon::experiment::{self, Line, LineFitOptions, LineSet, PeakHeight, Spectrum, ThermometryOptions};
use nanophon::fem::{self, assemble, modefile, EigenOptions};
use nanophon::hamiltonian::{self, lab_strain_projections, SivParams};
use nanophon::mesh::{self, SceneSpec};
use nanophon::rates;
use nanophon::spectrum;
use nanophon::units::{MaterialParams, GHZ, NM, NS};
use nanophon::Error;

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        3 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn siv(lambda_so_ghz: f64, alpha_phz: f64, beta_phz: f64) -> PyResult<SivParams> {
    let p = SivParams {
        lambda_so: lambda_so_ghz * GHZ,
        alpha: alpha_phz * 1e15,
        beta: beta_phz * 1e15,
        axis_rotation: SivParams::IDENTITY,
    };
    p.validate().map_err(py_err)?;
    Ok(p)
}

/// Voxel mesh of a nanodiamond on a substrate.
#[pyclass(name = "Mesh")]
struct PyMesh {
    inner: mesh::HexMesh,
}

#[pymethods]
impl PyMesh {
    /// Scene from semi-axes and substrate size in nm.
    #[staticmethod]
    #[pyo3(signature = (semi_axes_nm=(40.0, 50.0, 22.5), penetration_fraction=0.05, substrate_nm=(200.0, 200.0, 100.0), element_nm=5.0, free_bottom=false))]
    fn scene(
        semi_axes_nm: (f64, f64, f64),
        penetration_fraction: f64,
        substrate_nm: (f64, f64, f64),
        element_nm: f64,
        free_bottom: bool,
    ) -> PyResult<Self> {
        let spec = SceneSpec {
            semi_axes: [semi_axes_nm.0 * NM, semi_axes_nm.1 * NM, semi_axes_nm.2 * NM],
            penetration_fraction,
            substrate_dims: [substrate_nm.0 * NM, substrate_nm.1 * NM, substrate_nm.2 * NM],
            element_size: element_nm * NM,
            bottom_bc: if free_bottom { mesh::BottomBc::Free } else { mesh::BottomBc::Clamped },
        };
        Ok(PyMesh { inner: mesh::build_scene(&spec).map_err(py_err)? })
    }

    /// Free rectangular block of nx × ny × nz cubes with edge `h_nm`.
    #[staticmethod]
    fn block(nx: usize, ny: usize, nz: usize, h_nm: f64) -> PyResult<Self> {
        let h = h_nm * NM;
        let inner = mesh::HexMesh::block([nx, ny, nz], [h; 3], [0.0; 3], mesh::Region::Substrate).map_err(py_err)?;
        Ok(PyMesh { inner })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(PyMesh { inner: mesh::read_mesh(path).map_err(py_err)? })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        mesh::write_mesh(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn n_elements(&self) -> usize {
        self.inner.n_elements()
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    /// Eigenmodes with lo ≤ ν ≤ hi (GHz), isotropic diamond unless given.
    #[pyo3(signature = (lo_ghz, hi_ghz, max_modes=1000, rho=3515.0, youngs=1050e9, poisson=0.2))]
    fn solve(
        &self,
        lo_ghz: f64,
        hi_ghz: f64,
        max_modes: usize,
        rho: f64,
        youngs: f64,
        poisson: f64,
    ) -> PyResult<PyModes> {
        let m = MaterialParams::new(rho, youngs, poisson).map_err(py_err)?;
        let sys = assemble(&self.inner, &m).map_err(py_err)?;
        let set = fem::solve_modes(&self.inner, &sys, lo_ghz * GHZ, hi_ghz * GHZ, max_modes, &EigenOptions::default())
            .map_err(py_err)?;
        Ok(PyModes { inner: set })
    }
}

/// Elastic eigenmodes with their shapes.
#[pyclass(name = "Modes")]
struct PyModes {
    inner: fem::ModeSet,
}

#[pymethods]
impl PyModes {
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(PyModes { inner: modefile::read_modes(path).map_err(py_err)?.0 })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        modefile::write_modes(&self.inner, path, None).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn frequencies_ghz(&self) -> Vec<f64> {
        self.inner.frequencies.iter().map(|f| f / GHZ).collect()
    }

    #[getter]
    fn rigid(&self) -> Vec<bool> {
        self.inner.rigid.clone()
    }

    #[getter]
    fn energy_fraction_nd(&self) -> Vec<f64> {
        (0..self.inner.len()).map(|n| self.inner.energy_fraction_nd(n)).collect()
    }

    /// Zero-temperature golden-rule rate (1/s) at a point inside `mesh`.
    #[pyo3(signature = (mesh, point_nm, delta_gs_ghz=46.0, q=1000.0))]
    fn gamma1(&self, mesh: &PyMesh, point_nm: (f64, f64, f64), delta_gs_ghz: f64, q: f64) -> PyResult<f64> {
        let pt = [point_nm.0 * NM, point_nm.1 * NM, point_nm.2 * NM];
        let map = rates::t1_map(
            &self.inner,
            &mesh.inner,
            &[pt],
            &SivParams::NOMINAL,
            delta_gs_ghz * GHZ,
            0.0,
            &rates::QModel::constant(q),
            rates::CouplingConvention::default(),
            rates::BulkReference::Fixed(1.0),
        )
        .map_err(py_err)?;
        Ok(map.points[0].gamma0)
    }
}

/// Analytic bulk T₁ in seconds.
#[pyfunction]
#[pyo3(signature = (delta_gs_ghz, temperature_k=0.0))]
fn t1_bulk(delta_gs_ghz: f64, temperature_k: f64) -> PyResult<f64> {
    rates::t1_bulk_analytic(&MaterialParams::DIAMOND, &SivParams::NOMINAL, delta_gs_ghz * GHZ, temperature_k)
        .map_err(py_err)
}

/// Measured T₁ (ns) over the bulk value at the same splitting and temperature.
#[pyfunction]
fn lifetime_ratio(t1_ns: f64, delta_gs_ghz: f64, temperature_k: f64) -> PyResult<f64> {
    rates::lifetime_ratio(t1_ns * NS, delta_gs_ghz * GHZ, temperature_k, &MaterialParams::DIAMOND, &SivParams::NOMINAL)
        .map_err(py_err)
}

#[pyfunction]
fn thermal_factor(delta_gs_ghz: f64, temperature_k: f64) -> f64 {
    rates::thermal_factor(delta_gs_ghz * GHZ, temperature_k)
}

/// Ground-state splitting (GHz) for a lab strain (xx, yy, zz, xy, yz, zx).
#[pyfunction]
#[pyo3(signature = (strain, lambda_so_ghz=46.0, alpha_phz=1.3, beta_phz=1.7))]
fn ground_state_splitting(strain: [f64; 6], lambda_so_ghz: f64, alpha_phz: f64, beta_phz: f64) -> PyResult<f64> {
    let p = siv(lambda_so_ghz, alpha_phz, beta_phz)?;
    let s = lab_strain_projections(&fem::StrainTensor::from_components(strain), &p);
    Ok(hamiltonian::ground_state_splitting(&p, &s) / GHZ)
}

/// Sorted eigenvalues (GHz, cyclic) of the 4×4 ground-state Hamiltonian.
#[pyfunction]
#[pyo3(signature = (strain, lambda_so_ghz=46.0, alpha_phz=1.3, beta_phz=1.7))]
fn hamiltonian_levels(strain: [f64; 6], lambda_so_ghz: f64, alpha_phz: f64, beta_phz: f64) -> PyResult<Vec<f64>> {
    let p = siv(lambda_so_ghz, alpha_phz, beta_phz)?;
    let s = lab_strain_projections(&fem::StrainTensor::from_components(strain), &p);
    Ok(hamiltonian::eigenvalues(&p, &s).iter().map(|w| w / (2.0 * std::f64::consts::PI) / GHZ).collect())
}

/// Gaussian-broadened DOS on [lo, hi] (GHz); returns (nu_GHz, rho_per_GHz).
#[pyfunction]
fn dos(
    frequencies_ghz: Vec<f64>,
    sigma_ghz: f64,
    lo_ghz: f64,
    hi_ghz: f64,
    step_ghz: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let grid = spectrum::uniform_grid(lo_ghz, hi_ghz, step_ghz).map_err(py_err)?;
    let c = spectrum::dos(&frequencies_ghz, sigma_ghz, &grid).map_err(py_err)?;
    Ok((c.nu, c.rho))
}

/// Power-law exponent of a sampled curve over [lo, hi]: (p, c, rmse).
#[pyfunction]
fn fit_power_law(nu: Vec<f64>, rho: Vec<f64>, lo: f64, hi: f64) -> PyResult<(f64, f64, f64)> {
    let c = spectrum::DosCurve { nu, rho, sigma: 0.0 };
    let f = spectrum::fit_power_law(&c, (lo, hi)).map_err(py_err)?;
    Ok((f.p, f.c, f.rmse))
}

fn line_dict<'py>(py: Python<'py>, l: &Line, e: &Line) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("center_ghz", l.center / GHZ)?;
    d.set_item("fwhm_ghz", l.fwhm / GHZ)?;
    d.set_item("area", l.area / GHZ)?;
    d.set_item("sigma_center_ghz", e.center / GHZ)?;
    Ok(d)
}

/// Four-line fit of a PL spectrum given in GHz; returns splittings,
/// temperature and the lines A–D.
#[pyfunction]
fn analyze_spectrum<'py>(py: Python<'py>, freq_ghz: Vec<f64>, counts: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let s = Spectrum::new(freq_ghz.iter().map(|f| f * GHZ).collect(), counts).map_err(py_err)?;
    let lines: LineSet = experiment::fit_four_lines(&s, &LineFitOptions::new()).map_err(py_err)?;
    let sp = experiment::splittings(&lines).map_err(py_err)?;
    let t = experiment::temperature(&lines, sp.delta_es, &ThermometryOptions::default()).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("delta_es_ghz", sp.delta_es / GHZ)?;
    d.set_item("delta_gs_ghz", sp.delta_gs / GHZ)?;
    d.set_item("temperature_k", t)?;
    let ls = lines.lines.iter().zip(&lines.errors).map(|(l, e)| line_dict(py, l, e)).collect::<PyResult<Vec<_>>>()?;
    d.set_item("lines", ls)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (ratio, delta_es_ghz, t_max_k=400.0))]
fn temperature_from_ratio(ratio: f64, delta_es_ghz: f64, t_max_k: f64) -> PyResult<f64> {
    experiment::temperature_from_ratio(ratio, delta_es_ghz * GHZ, t_max_k).map_err(py_err)
}

/// Peak heights of a binned trace (bin starts in ns) for a pulse schedule.
#[pyfunction]
#[pyo3(signature = (times_ns, counts, pulse_len_ns, delays_ns, start_ns=0.0, baseline_window_ns=50.0))]
fn peak_heights(
    times_ns: Vec<f64>,
    counts: Vec<f64>,
    pulse_len_ns: f64,
    delays_ns: Vec<f64>,
    start_ns: f64,
    baseline_window_ns: f64,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let sched =
        experiment::PulseSchedule::new(pulse_len_ns * NS, delays_ns.iter().map(|d| d * NS).collect(), start_ns * NS)
            .map_err(py_err)?;
    let t: Vec<f64> = times_ns.iter().map(|x| x * NS).collect();
    let tr = experiment::PulseTrace::from_samples(&t, counts, sched).map_err(py_err)?;
    let hs = experiment::peak_heights(&tr, &experiment::HeightOptions { baseline_window: baseline_window_ns * NS })
        .map_err(py_err)?;
    Ok(hs.iter().map(|h| (h.tau / NS, h.h, h.sigma)).collect())
}

/// Weighted fit of h(τ) = A(1 − e^(−τ/T₁)); returns (T1_ns, sigma_T1_ns, A).
#[pyfunction]
fn fit_t1(tau_ns: Vec<f64>, h: Vec<f64>, sigma: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    if tau_ns.len() != h.len() || h.len() != sigma.len() {
        return Err(PyValueError::new_err("tau, h and sigma must have equal length"));
    }
    let pts: Vec<PeakHeight> = (0..h.len())
        .map(|i| PeakHeight { tau: tau_ns[i] * NS, h: h[i], sigma: sigma[i], counts: 0.0, low_statistics: false })
        .collect();
    let f = experiment::fit_t1(&pts).map_err(py_err)?;
    Ok((f.t1 / NS, f.sigma_t1 / NS, f.amplitude))
}

/// Validates a run configuration and returns its digest.
#[pyfunction]
fn config_digest(json: &str) -> PyResult<String> {
    Ok(RunConfig::from_json(json).map_err(py_err)?.digest())
}

#[pymodule]
fn nanophon_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", nanophon::VERSION)?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyModes>()?;
    m.add_function(wrap_pyfunction!(t1_bulk, m)?)?;
    m.add_function(wrap_pyfunction!(lifetime_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(thermal_factor, m)?)?;
    m.add_function(wrap_pyfunction!(ground_state_splitting, m)?)?;
    m.add_function(wrap_pyfunction!(hamiltonian_levels, m)?)?;
    m.add_function(wrap_pyfunction!(dos, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(temperature_from_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(peak_heights, m)?)?;
    m.add_function(wrap_pyfunction!(fit_t1, m)?)?;
    m.add_function(wrap_pyfunction!(config_digest, m)?)?;
    Ok(())
}
