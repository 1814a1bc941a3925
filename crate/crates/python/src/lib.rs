//! Python bindings: configuration, simulation runs, and the main diagnostic
//! reductions, enough to drive parameter studies from a script.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: kcs::error::Error) -> PyErr {
    match e {
        kcs::error::Error::Config(_) | kcs::error::Error::ConfigLine { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Simulation configuration. Construct with defaults and adjust fields, or
/// parse the text config format with `Config.parse`.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: kcs::config::SimConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        PyConfig { inner: kcs::config::SimConfig::base() }
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        kcs::config::parse_config_str(text)
            .map(|inner| PyConfig { inner })
            .map_err(err)
    }

    /// Serialize to the text config format.
    fn echo(&self) -> String {
        self.inner.echo()
    }

    #[getter]
    fn n_particles(&self) -> usize {
        self.inner.particle_count
    }
    #[setter]
    fn set_n_particles(&mut self, v: usize) {
        self.inner.particle_count = v;
    }

    #[getter]
    fn grid_n(&self) -> usize {
        self.inner.grid_n
    }
    #[setter]
    fn set_grid_n(&mut self, v: usize) {
        self.inner.grid_n = v;
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }
    #[setter]
    fn set_dt(&mut self, v: f64) {
        self.inner.dt = v;
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.t_end
    }
    #[setter]
    fn set_t_end(&mut self, v: f64) {
        self.inner.t_end = v;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.rng_seed
    }
    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.rng_seed = v;
    }

    #[getter]
    fn box_length(&self) -> f64 {
        self.inner.box_length
    }
    #[setter]
    fn set_box_length(&mut self, v: f64) {
        self.inner.box_length = v;
    }

    #[getter]
    fn output_every(&self) -> usize {
        self.inner.output_every
    }
    #[setter]
    fn set_output_every(&mut self, v: usize) {
        self.inner.output_every = v;
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.mode {
            kcs::config::Mode::PureKinetic => "pure_kinetic",
            kcs::config::Mode::FrozenFluid => "frozen_fluid",
            kcs::config::Mode::FullCoupling => "full_coupling",
        }
    }
    #[setter]
    fn set_mode(&mut self, v: &str) -> PyResult<()> {
        self.inner.mode = match v {
            "pure_kinetic" => kcs::config::Mode::PureKinetic,
            "frozen_fluid" => kcs::config::Mode::FrozenFluid,
            "full_coupling" => kcs::config::Mode::FullCoupling,
            other => return Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
        };
        Ok(())
    }

    fn set_init_fluid_taylor_green(&mut self, amp: f64) {
        self.inner.init_fluid = kcs::config::FluidInit::TaylorGreen { amp };
    }

    fn set_init_particles_uniform_ball(&mut self, r0: f64) {
        self.inner.init_particles = kcs::config::ParticleInit::UniformBall { r0 };
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(n_particles={}, grid_n={}, dt={}, t_end={}, mode={})",
            self.inner.particle_count,
            self.inner.grid_n,
            self.inner.dt,
            self.inner.t_end,
            self.mode()
        )
    }
}

/// One output record of the diagnostic time series.
#[pyclass(name = "Record", from_py_object)]
#[derive(Clone)]
struct PyRecord {
    inner: kcs::diagnostics::DiagnosticsRecord,
}

#[pymethods]
impl PyRecord {
    #[getter]
    fn time(&self) -> f64 {
        self.inner.time
    }
    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }
    #[getter]
    fn momentum(&self) -> (f64, f64, f64) {
        (self.inner.momentum.x, self.inner.momentum.y, self.inner.momentum.z)
    }
    #[getter]
    fn energy_particles(&self) -> f64 {
        self.inner.energy_particles
    }
    #[getter]
    fn energy_fluid(&self) -> f64 {
        self.inner.energy_fluid
    }
    #[getter]
    fn total_energy(&self) -> f64 {
        self.inner.total_energy()
    }
    #[getter]
    fn dissipation_viscous(&self) -> f64 {
        self.inner.dissipation_viscous
    }
    #[getter]
    fn dissipation_drag(&self) -> f64 {
        self.inner.dissipation_drag
    }
    #[getter]
    fn dissipation_alignment(&self) -> f64 {
        self.inner.dissipation_alignment
    }
    #[getter]
    fn support_radius(&self) -> f64 {
        self.inner.support_radius
    }
    #[getter]
    fn support_bound_rhs(&self) -> f64 {
        self.inner.support_bound_rhs
    }
    #[getter]
    fn m2(&self) -> f64 {
        self.inner.m2
    }
    #[getter]
    fn m3(&self) -> f64 {
        self.inner.m3
    }
    #[getter]
    fn m6(&self) -> f64 {
        self.inner.m6
    }
    #[getter]
    fn velocity_variance(&self) -> f64 {
        self.inner.velocity_variance
    }
    #[getter]
    fn picard_iters(&self) -> usize {
        self.inner.picard_iters
    }

    fn __repr__(&self) -> String {
        format!(
            "Record(time={}, E={}, R={})",
            self.inner.time,
            self.inner.total_energy(),
            self.inner.support_radius
        )
    }
}

/// Run a simulation to t_end; returns the diagnostic records.
#[pyfunction]
fn run(config: &PyConfig) -> PyResult<Vec<PyRecord>> {
    let result = kcs::picard::run(&config.inner).map_err(err)?;
    Ok(result.records.into_iter().map(|inner| PyRecord { inner }).collect())
}

/// Energy-balance residual series; returns (residuals, max_normalized).
#[pyfunction]
fn energy_budget(records: Vec<PyRecord>) -> PyResult<(Vec<f64>, f64)> {
    let recs: Vec<_> = records.into_iter().map(|r| r.inner).collect();
    let b = kcs::diagnostics::energy_budget(&recs).map_err(err)?;
    Ok((b.residuals, b.max_normalized))
}

/// Velocity-support bound check; returns (pass, margins).
#[pyfunction]
fn support_bound_check(records: Vec<PyRecord>, dt: f64) -> (bool, Vec<f64>) {
    let recs: Vec<_> = records.into_iter().map(|r| r.inner).collect();
    let rep = kcs::diagnostics::support_bound_check(&recs, dt);
    (rep.pass, rep.margins)
}

/// Alignment kernel value at distance r for the default kernel family.
#[pyfunction]
fn kernel_eval(r: f64) -> f64 {
    kcs::kernel::KernelSpec::RationalDecay.eval(r)
}

/// Render records as the CSV time-series text.
#[pyfunction]
fn timeseries_csv(records: Vec<PyRecord>) -> String {
    let recs: Vec<_> = records.into_iter().map(|r| r.inner).collect();
    kcs::output::timeseries_to_string(&recs)
}

#[pymodule]
fn kcs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyRecord>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(energy_budget, m)?)?;
    m.add_function(wrap_pyfunction!(support_bound_check, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_eval, m)?)?;
    m.add_function(wrap_pyfunction!(timeseries_csv, m)?)?;
    Ok(())
}
