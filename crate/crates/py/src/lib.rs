//! Python bindings: protocol and environment parameters, moment tables, the inseparability
//! criteria, detector fractions, sideband corrections and simulated verification.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mechcat_core::analytic;
use mechcat_core::criteria;
use mechcat_core::detector::{self, DetectorParams};
use mechcat_core::herald::{self, ClickOutcome, Configuration};
use mechcat_core::linalg::c;
use mechcat_core::moments::{self, Monomial};
use mechcat_core::open_system::{self, MeasurementSchedule};
use mechcat_core::scenario;
use mechcat_core::sideband::{self, CavityParams};
use mechcat_core::verify::{self, Port};

create_exception!(mechcat, MechcatError, PyException);

fn err(e: mechcat_core::Error) -> PyErr {
    MechcatError::new_err(e.to_string())
}

fn configuration(name: &str) -> PyResult<Configuration> {
    match name {
        "parallel" => Ok(Configuration::Parallel),
        "series" => Ok(Configuration::Series),
        other => Err(MechcatError::new_err(format!("configuration must be 'parallel' or 'series', got {other:?}"))),
    }
}

/// Heralding protocol: coupling mu, phase phi, equal initial occupations nbar,
/// coherent input amplitude alpha.
#[pyclass(name = "ProtocolParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyProtocolParams {
    inner: herald::ProtocolParams,
}

#[pymethods]
impl PyProtocolParams {
    #[new]
    #[pyo3(signature = (mu, phi, nbar=0.0, alpha=1.0, configuration="parallel"))]
    fn new(mu: f64, phi: f64, nbar: f64, alpha: f64, configuration: &str) -> PyResult<Self> {
        let inner = herald::ProtocolParams::parallel(mu, phi, nbar)
            .map_err(err)?
            .with_alpha(c(alpha))
            .with_configuration(self::configuration(configuration)?);
        Ok(Self { inner })
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn phi(&self) -> f64 {
        self.inner.phi
    }

    #[getter]
    fn nbar(&self) -> f64 {
        self.inner.nbar_1
    }

    /// Probability of the (1, 0) click pattern, lossless detectors.
    fn heralding_probability(&self) -> f64 {
        herald::heralding_probability(&self.inner)
    }

    /// Non-Gaussianity of the heralded state.
    fn non_gaussianity(&self) -> PyResult<f64> {
        let (state, _) =
            herald::heralded_thermal(&self.inner, ClickOutcome::ONE_ZERO, self.inner.default_fock_config()).map_err(err)?;
        criteria::non_gaussianity(&state).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("ProtocolParams(mu={}, phi={}, nbar={})", self.inner.mu, self.inner.phi, self.inner.nbar_1)
    }
}

/// Mechanical environment: angular frequency, quality factor, bath occupation.
#[pyclass(name = "EnvParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyEnvParams {
    inner: open_system::EnvParams,
}

#[pymethods]
impl PyEnvParams {
    #[new]
    #[pyo3(signature = (q, nbar_bath, omega_m=1.0))]
    fn new(q: f64, nbar_bath: f64, omega_m: f64) -> PyResult<Self> {
        Ok(Self { inner: open_system::EnvParams::new(omega_m, q, nbar_bath).map_err(err)? })
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q_factor
    }

    #[getter]
    fn nbar_bath(&self) -> f64 {
        self.inner.nbar_bath
    }

    fn __repr__(&self) -> String {
        format!("EnvParams(q={}, nbar_bath={}, omega_m={})", self.inner.q_factor, self.inner.nbar_bath, self.inner.omega_m)
    }
}

/// Canonical-order moments <X1^p P1^q X2^r P2^s>.
#[pyclass(name = "MomentTable", frozen, from_py_object)]
#[derive(Clone)]
struct PyMomentTable {
    inner: moments::MomentTable,
}

#[pymethods]
impl PyMomentTable {
    #[getter]
    fn order_max(&self) -> usize {
        self.inner.order_max()
    }

    fn get(&self, p: usize, q: usize, r: usize, s: usize) -> PyResult<Complex64> {
        self.inner.get(Monomial::new(p, q, r, s)).map_err(err)
    }

    /// Monomial keys such as "X1^2 P2", in canonical order.
    fn keys(&self) -> Vec<String> {
        self.inner.entries().keys().map(|m| m.key()).collect()
    }

    fn d5(&self) -> PyResult<f64> {
        Ok(criteria::build_d5(&self.inner).map_err(err)?.value)
    }

    fn s3(&self) -> PyResult<f64> {
        Ok(criteria::build_s3(&self.inner).map_err(err)?.value)
    }

    /// Moments as read out by the verification schedule in environment `env`.
    fn evolve(&self, env: &PyEnvParams) -> PyResult<Self> {
        let schedule = MeasurementSchedule::verification(&env.inner);
        Ok(Self { inner: open_system::evolve_moments(&self.inner, &env.inner, &schedule).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: moments::MomentTable::from_json(text).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.entries().len()
    }
}

/// Closed-form moments of the (1, 0)-heralded state up to `order`.
#[pyfunction]
#[pyo3(signature = (params, order=4))]
fn heralded_moments(params: &PyProtocolParams, order: usize) -> PyResult<PyMomentTable> {
    Ok(PyMomentTable { inner: analytic::heralded_moments(&params.inner, ClickOutcome::ONE_ZERO, order).map_err(err)? })
}

/// Measured D5 and S3 after the verification delays.
#[pyfunction]
fn measured_determinants(params: &PyProtocolParams, env: &PyEnvParams) -> PyResult<(f64, f64)> {
    scenario::measured_determinants(params.inner.mu, params.inner.phi, params.inner.nbar_1, &env.inner).map_err(err)
}

/// Closed-system S3 of the ground-state heralded cat.
#[pyfunction]
fn s3_closed_form(mu: f64, phi: f64) -> PyResult<f64> {
    criteria::s3_ground_closed_form(mu, phi).map_err(err)
}

/// Coupling above which the measured S3 is no longer negative; None if it stays negative.
#[pyfunction]
#[pyo3(signature = (env, nbar=0.0, phi=std::f64::consts::PI))]
fn mu_critical(env: &PyEnvParams, nbar: f64, phi: f64) -> PyResult<Option<f64>> {
    criteria::mu_critical(&env.inner, nbar, phi).map_err(err)
}

/// Largest initial occupation with negative measured S3, and whether any exists.
#[pyfunction]
#[pyo3(signature = (mu, env, phi=std::f64::consts::PI))]
fn max_cooled_occupation(mu: f64, env: &PyEnvParams, phi: f64) -> PyResult<(f64, bool)> {
    let r = criteria::max_cooled_occupation(mu, &env.inner, phi).map_err(err)?;
    Ok((r.nbar_max, r.verifiable))
}

/// Fraction of (1, 0) heralds that are true single-photon events.
#[pyfunction]
#[pyo3(signature = (params, eta, dark_prob, resolving=true))]
fn true_positive_fraction(params: &PyProtocolParams, eta: f64, dark_prob: f64, resolving: bool) -> PyResult<f64> {
    let alpha = match params.inner.input {
        herald::InputLight::Coherent { alpha } => alpha,
        herald::InputLight::SinglePhoton => return Err(MechcatError::new_err("coherent input required")),
    };
    let det = DetectorParams::new(eta, dark_prob, resolving, alpha).map_err(err)?;
    detector::true_positive_fraction(&det, &params.inner).map_err(err)
}

/// Effective coupling and rotation angle after a pulse of length t (rates in rad/s).
#[pyfunction]
fn mu_effective(g0: f64, kappa: f64, omega_m: f64, t: f64) -> PyResult<(f64, f64)> {
    Ok(sideband::mu_effective(&CavityParams::new(g0, kappa, omega_m).map_err(err)?, t))
}

/// Second-order percent reduction of mu for a pulse of length 2/kappa.
#[pyfunction]
fn percent_reduction(g0: f64, kappa: f64, omega_m: f64) -> PyResult<f64> {
    Ok(sideband::percent_reduction(&CavityParams::new(g0, kappa, omega_m).map_err(err)?))
}

/// Simulated homodyne verification of `table`: returns the recovered moments.
///
/// `samples=None` gives the noiseless (exact port moment) limit.
#[pyfunction]
#[pyo3(signature = (table, phi, order=4, samples=None, seed=0, chi=verify::DEFAULT_CHI))]
fn simulate_verification(
    table: &PyMomentTable,
    phi: f64,
    order: usize,
    samples: Option<u64>,
    seed: u64,
    chi: f64,
) -> PyResult<PyMomentTable> {
    let pathways = verify::default_pathways(order, phi, chi).map_err(err)?;
    let models = verify::dataset_models(&pathways, &Port::ALL, &table.inner, order).map_err(err)?;
    let inner = verify::recover_moments(&verify::sample_all(&models, samples, seed), order).map_err(err)?;
    Ok(PyMomentTable { inner })
}

/// Table 1 regenerated: one dict per parameter set.
#[pyfunction]
fn table1(py: Python<'_>) -> PyResult<Vec<Bound<'_, PyDict>>> {
    let results = scenario::compute_table1(&scenario::table1_rows(), &scenario::Table1Settings::default()).map_err(err)?;
    results
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("label", &r.label)?;
            for (k, v) in [
                ("mu", r.mu),
                ("q", r.q_factor),
                ("nbar", r.nbar),
                ("nbar_bath", r.nbar_bath),
                ("D5", r.d5),
                ("S3", r.s3),
                ("F_res", r.f_res),
                ("F_res_opt", r.f_res_opt),
                ("F_nonres", r.f_nonres),
                ("F_nonres_opt", r.f_nonres_opt),
            ] {
                d.set_item(k, v)?;
            }
            Ok(d)
        })
        .collect()
}

/// Table 2 regenerated: one dict per device.
#[pyfunction]
fn table2(py: Python<'_>) -> PyResult<Vec<Bound<'_, PyDict>>> {
    scenario::compute_table2()
        .map_err(err)?
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("label", &r.label)?;
            d.set_item("sideband_ratio", r.sideband_ratio)?;
            d.set_item("mu", r.mu)?;
            d.set_item("percent_reduction", r.percent_reduction)?;
            d.set_item("percent_reduction_exact", r.percent_reduction_exact)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn mechcat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MechcatError", m.py().get_type::<MechcatError>())?;
    m.add_class::<PyProtocolParams>()?;
    m.add_class::<PyEnvParams>()?;
    m.add_class::<PyMomentTable>()?;
    m.add_function(wrap_pyfunction!(heralded_moments, m)?)?;
    m.add_function(wrap_pyfunction!(measured_determinants, m)?)?;
    m.add_function(wrap_pyfunction!(s3_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(mu_critical, m)?)?;
    m.add_function(wrap_pyfunction!(max_cooled_occupation, m)?)?;
    m.add_function(wrap_pyfunction!(true_positive_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(mu_effective, m)?)?;
    m.add_function(wrap_pyfunction!(percent_reduction, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_verification, m)?)?;
    m.add_function(wrap_pyfunction!(table1, m)?)?;
    m.add_function(wrap_pyfunction!(table2, m)?)?;
    Ok(())
}
