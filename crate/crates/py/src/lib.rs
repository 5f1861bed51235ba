//! Python bindings. Heavy computations release the GIL.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use rtm_core::domain::{areas, extents, raster_stability, RasterSpec, StabilityRaster};
use rtm_core::hamiltonian::HamiltonianId;
use rtm_core::io::{write_ppm, Image};
use rtm_core::local::{classify_local_stability as local_verdict, twist_root as core_twist_root, ResonanceId};
use rtm_core::manifold::{
    descending_grid, escape_obstruction, find_spos as core_find_spos, lobe_area as core_lobe_area,
    splitting_fit as core_splitting_fit, PrecisionContext, SymmetryLine,
};
use rtm_core::map::{self, PhasePoint, RtmParams};
use rtm_core::repro::{self, ReproOptions};
use rtm_core::rotation::{classify_point as core_classify_point, refined_rotation_number, RotationConfig};
use rtm_core::RtmError;

fn err(e: RtmError) -> PyErr {
    match e {
        RtmError::Invalid(_) | RtmError::Domain(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn ctx(bits: u32) -> PyResult<PrecisionContext> {
    PrecisionContext::new(bits).map_err(err)
}

/// Map parameters for a given `mu`.
#[pyclass(name = "Params", frozen)]
struct PyParams {
    inner: RtmParams,
}

#[pymethods]
impl PyParams {
    #[new]
    fn new(mu: f64) -> PyResult<Self> {
        Ok(Self { inner: RtmParams::from_mu(mu).map_err(err)? })
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    #[getter]
    fn phi_s(&self) -> f64 {
        self.inner.phi_s()
    }

    /// Rotation angle at p_s, or None when p_s is not elliptic.
    #[getter]
    fn theta(&self) -> Option<f64> {
        self.inner.theta()
    }

    #[getter]
    fn h(&self) -> Option<f64> {
        self.inner.h()
    }

    #[getter]
    fn p_s(&self) -> (f64, f64) {
        let p = self.inner.p_s();
        (p.psi, p.w)
    }

    #[getter]
    fn p_h(&self) -> (f64, f64) {
        let p = self.inner.p_h();
        (p.psi, p.w)
    }

    fn forward(&self, psi: f64, w: f64) -> (f64, f64) {
        let p = map::map_forward(PhasePoint::new(psi, w), &self.inner);
        (p.psi, p.w)
    }

    fn inverse(&self, psi: f64, w: f64) -> (f64, f64) {
        let p = map::map_inverse(PhasePoint::new(psi, w), &self.inner);
        (p.psi, p.w)
    }

    /// `f^n` (negative `n` iterates the inverse), psi wrapped to [-pi, pi).
    fn iterate(&self, psi: f64, w: f64, n: i64) -> (f64, f64) {
        let p = map::iterate(PhasePoint::new(psi, w), n, &self.inner);
        (p.psi, p.w)
    }

    fn r0(&self, psi: f64, w: f64) -> (f64, f64) {
        let p = map::reversor_r0(PhasePoint::new(psi, w));
        (p.psi, p.w)
    }

    fn r1(&self, psi: f64, w: f64) -> (f64, f64) {
        let p = map::reversor_r1(PhasePoint::new(psi, w), &self.inner);
        (p.psi, p.w)
    }

    fn jacobian(&self, psi: f64, w: f64) -> [[f64; 2]; 2] {
        map::jacobian(PhasePoint::new(psi, w), &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Params(mu={})", self.inner.mu())
    }
}

/// A stability raster; cells are row-major from (psi_min, w_max).
#[pyclass(name = "Raster", frozen)]
struct PyRaster {
    inner: StabilityRaster,
}

#[pymethods]
impl PyRaster {
    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    #[getter]
    fn cell_side(&self) -> f64 {
        self.inner.cell_side()
    }

    /// Class names of all cells.
    fn cells(&self) -> Vec<&'static str> {
        self.inner.cells.iter().map(|c| c.name()).collect()
    }

    fn labels(&self) -> Vec<u32> {
        self.inner.component_labels.clone()
    }

    /// (|A|, |D|)
    fn areas(&self) -> (f64, f64) {
        let a = areas(&self.inner);
        (a.area_a, a.area_d)
    }

    fn extents<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let e = extents(&self.inner);
        let d = PyDict::new_bound(py);
        d.set_item("psi_min", e.psi_min)?;
        d.set_item("psi_max", e.psi_max)?;
        d.set_item("w_min", e.w_min)?;
        d.set_item("w_max", e.w_max)?;
        d.set_item("capture_efficiency", e.capture_efficiency)?;
        Ok(d)
    }

    /// Binary PPM bytes.
    fn ppm<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let mut buf = Vec::new();
        write_ppm(&mut buf, &Image::from_raster(&self.inner)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(PyBytes::new_bound(py, &buf))
    }
}

#[pyfunction]
fn twist_root() -> (f64, f64) {
    let r = core_twist_root();
    (r.theta_r, r.mu_r)
}

/// (stable, reason)
#[pyfunction]
fn classify_local_stability(mu: f64) -> (bool, &'static str) {
    let v = local_verdict(mu);
    (v.stable, v.reason.as_str())
}

/// (theta, error bound) of the refined estimator.
#[pyfunction]
#[pyo3(signature = (mu, psi, w, p=7, q=15))]
fn rotation_number(py: Python<'_>, mu: f64, psi: f64, w: f64, p: u32, q: u32) -> PyResult<(f64, f64)> {
    let params = RtmParams::from_mu(mu).map_err(err)?;
    let est = py.allow_threads(|| refined_rotation_number(PhasePoint::new(psi, w), p, q, &params)).map_err(err)?;
    Ok((est.theta_pq, est.err_bound))
}

#[pyfunction]
fn classify_point(py: Python<'_>, mu: f64, psi: f64, w: f64) -> PyResult<String> {
    let params = RtmParams::from_mu(mu).map_err(err)?;
    let c = py.allow_threads(|| core_classify_point(PhasePoint::new(psi, w), &RotationConfig::default(), &params)).map_err(err)?;
    Ok(c.label())
}

#[pyfunction]
#[pyo3(signature = (mu, ell, deep_budget=100_000, classify=false))]
fn raster(py: Python<'_>, mu: f64, ell: f64, deep_budget: u64, classify: bool) -> PyResult<PyRaster> {
    let params = RtmParams::from_mu(mu).map_err(err)?;
    let spec = RasterSpec::auto(ell).with_deep_budget(deep_budget).with_classification(classify);
    let inner = py.allow_threads(|| raster_stability(&spec, &params)).map_err(err)?;
    Ok(PyRaster { inner })
}

/// Dict with mu, h, area (float), area_str (all digits) and digits.
#[pyfunction]
#[pyo3(signature = (mu, bits=256))]
fn lobe_area<'py>(py: Python<'py>, mu: f64, bits: u32) -> PyResult<Bound<'py, PyDict>> {
    let c = ctx(bits)?;
    let r = py.allow_threads(|| core_lobe_area(mu, &c, None)).map_err(err)?;
    let d = PyDict::new_bound(py);
    d.set_item("mu", r.mu)?;
    d.set_item("h", r.h)?;
    d.set_item("area", r.area.to_f64())?;
    d.set_item("area_str", r.area.to_string_radix(10, Some(r.digits.max(1.0) as usize)))?;
    d.set_item("digits", r.digits)?;
    Ok(d)
}

/// (a0, a1) of the scaled lobe-area fit.
#[pyfunction]
#[pyo3(signature = (h_max=0.6, h_min=0.3, points=8, bits=512))]
fn splitting_fit(py: Python<'_>, h_max: f64, h_min: f64, points: usize, bits: u32) -> PyResult<(f64, f64)> {
    let c = ctx(bits)?;
    let f = py.allow_threads(|| core_splitting_fit(&descending_grid(h_max, h_min, points), &c, None)).map_err(err)?;
    Ok((f.a0, f.a1))
}

/// SPO points on a symmetry line as (psi, w, trace, kind).
#[pyfunction]
#[pyo3(signature = (mu, m, n, line="r0"))]
fn find_spos(mu: f64, m: u32, n: u32, line: &str) -> PyResult<Vec<(f64, f64, f64, String)>> {
    let params = RtmParams::from_mu(mu).map_err(err)?;
    let line: SymmetryLine = line.parse().map_err(err)?;
    let res = ResonanceId::new(m, n).map_err(err)?;
    Ok(core_find_spos(res, line, &params, 8192)
        .into_iter()
        .map(|s| (s.point.psi, s.point.w, s.trace, format!("{:?}", s.kind).to_lowercase()))
        .collect())
}

/// Whether W^u(p_h) crosses W^s of the hyperbolic m/n SPO.
#[pyfunction]
#[pyo3(signature = (mu, m, n, bits=256, unstable_domains=12, stable_domains=60))]
fn obstruction(py: Python<'_>, mu: f64, m: u32, n: u32, bits: u32, unstable_domains: usize, stable_domains: usize) -> PyResult<bool> {
    let c = ctx(bits)?;
    let res = ResonanceId::new(m, n).map_err(err)?;
    let ob = py.allow_threads(|| escape_obstruction(mu, res, &c, unstable_domains, stable_domains)).map_err(err)?;
    Ok(ob.crossing)
}

/// Value of an approximating Hamiltonian, e.g. id = "saddle-center:4".
#[pyfunction]
fn hamiltonian(id: &str, mu: f64, psi: f64, w: f64) -> PyResult<f64> {
    let id: HamiltonianId = id.parse().map_err(err)?;
    id.evaluate(PhasePoint::new(psi, w), mu).map_err(err)
}

/// (id, criterion, summary) of every recipe.
#[pyfunction]
fn repro_list() -> Vec<(&'static str, u32, &'static str)> {
    repro::RECIPES.iter().map(|r| (r.id, r.criterion, r.summary)).collect()
}

/// (csv, [(name, value, lo, hi, pass)]) of one recipe.
#[pyfunction]
#[pyo3(signature = (id, deep_budget=None, bits=None))]
#[allow(clippy::type_complexity)]
fn repro_run(py: Python<'_>, id: &str, deep_budget: Option<u64>, bits: Option<u32>) -> PyResult<(String, Vec<(String, f64, f64, f64, bool)>)> {
    let r = repro::find(id).ok_or_else(|| PyValueError::new_err(format!("unknown recipe {id:?}")))?;
    let o = py.allow_threads(|| r.run(&ReproOptions { deep_budget, bits })).map_err(err)?;
    let checks = o.checks.iter().map(|c| (c.name.clone(), c.value, c.lo, c.hi, c.pass())).collect();
    Ok((o.table.to_csv(), checks))
}

#[pymodule]
fn rtm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyRaster>()?;
    m.add_function(wrap_pyfunction!(twist_root, m)?)?;
    m.add_function(wrap_pyfunction!(classify_local_stability, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_number, m)?)?;
    m.add_function(wrap_pyfunction!(classify_point, m)?)?;
    m.add_function(wrap_pyfunction!(raster, m)?)?;
    m.add_function(wrap_pyfunction!(lobe_area, m)?)?;
    m.add_function(wrap_pyfunction!(splitting_fit, m)?)?;
    m.add_function(wrap_pyfunction!(find_spos, m)?)?;
    m.add_function(wrap_pyfunction!(obstruction, m)?)?;
    m.add_function(wrap_pyfunction!(hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(repro_list, m)?)?;
    m.add_function(wrap_pyfunction!(repro_run, m)?)?;
    Ok(())
}
