//! Python bindings: run configurations, kinetic and limit simulations,
//! the drivers and a few diagnostics.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use apmix::config::RunConfig as CoreConfig;
use apmix::diagnostics::{energy_entropy, maxwellian_distances};
use apmix::grid::{cfl_timestep as core_cfl, GridSpec, ScalarField, SchemeParams};
use apmix::harness;
use apmix::integrator::{step as core_step, SimState};
use apmix::limit::{limit_step, LimitState};
use apmix::presets::{build_initial_state, ExperimentPreset};

create_exception!(apmix_py, ApmixError, PyException, "Solver, configuration or I/O failure.");

fn err(e: apmix::Error) -> PyErr {
    ApmixError::new_err(format!("{}: {e}", e.kind()))
}

fn grid_of(f: &ScalarField) -> Vec<Vec<f64>> {
    (1..=f.nx).map(|a| (1..=f.nx).map(|b| f.at(a, b)).collect()).collect()
}

/// Flat run configuration; see `RunConfig.keys()` for the schema.
#[pyclass(name = "RunConfig", from_py_object)]
#[derive(Clone)]
struct RunConfig {
    inner: CoreConfig,
}

#[pymethods]
impl RunConfig {
    #[new]
    fn new(preset: &str) -> PyResult<Self> {
        let preset: ExperimentPreset = preset.parse().map_err(err)?;
        Ok(RunConfig {
            inner: CoreConfig::for_preset(preset),
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(RunConfig {
            inner: CoreConfig::parse(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn keys() -> Vec<&'static str> {
        apmix::config::KEYS.to_vec()
    }

    /// Sets one key from its text form, e.g. `cfg.set("eps", "1e-3")`.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(ApmixError::new_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn preset(&self) -> &'static str {
        self.inner.preset.name()
    }

    #[getter]
    fn nx(&self) -> usize {
        self.inner.nx
    }

    #[getter]
    fn nv(&self) -> usize {
        self.inner.nv
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    /// Time step and number of steps the configuration resolves to.
    fn resolved(&self) -> PyResult<(f64, usize)> {
        let (_, params) = self.inner.build().map_err(err)?;
        Ok((params.dt, self.inner.num_steps(params.dt)))
    }

    fn __repr__(&self) -> String {
        format!(
            "RunConfig(preset={}, nx={}, nv={}, eps={})",
            self.inner.preset, self.inner.nx, self.inner.nv, self.inner.eps
        )
    }
}

/// Kinetic-fluid state advanced by the first- or second-order scheme.
#[pyclass]
struct Simulation {
    config: CoreConfig,
    params: SchemeParams,
    state: SimState,
}

#[pymethods]
impl Simulation {
    #[new]
    fn new(config: &RunConfig) -> PyResult<Self> {
        let (spec, params) = config.inner.build().map_err(err)?;
        let state = build_initial_state(config.inner.preset, spec, &params).map_err(err)?;
        Ok(Simulation {
            config: config.inner.clone(),
            params,
            state,
        })
    }

    /// Advances `n` steps and returns the report of the last one.
    #[pyo3(signature = (n = 1))]
    fn step<'py>(&mut self, py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyDict>> {
        let mut last = Default::default();
        for _ in 0..n {
            let (next, r) = core_step(&self.state, &self.params, self.config.order).map_err(err)?;
            self.state = next;
            last = r;
        }
        let r: apmix::integrator::StepReport = last;
        let d = PyDict::new(py);
        d.set_item("divergence", r.divergence)?;
        d.set_item("rho_min", r.rho_min)?;
        d.set_item("density_gap", r.density_gap)?;
        d.set_item("helmholtz_iterations", r.helmholtz_iterations)?;
        d.set_item("pressure_iterations", r.pressure_iterations)?;
        d.set_item("fp_max_iterations", r.fp_max_iterations)?;
        d.set_item("fp_total_iterations", r.fp_total_iterations)?;
        d.set_item("min_f", r.min_f)?;
        Ok(d)
    }

    #[getter]
    fn steps_taken(&self) -> usize {
        self.state.step
    }

    #[getter]
    fn time(&self) -> f64 {
        self.state.time
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn masses(&self) -> Vec<f64> {
        self.state.masses()
    }

    fn maxwellian_distances(&self) -> Vec<f64> {
        maxwellian_distances(&self.state)
    }

    /// `(functional, viscous, fp_dissipation)`.
    fn energy_entropy(&self) -> (f64, f64, f64) {
        let e = energy_entropy(&self.state, &self.params);
        (e.functional, e.viscous, e.fp_dissipation)
    }

    /// Density of species `size` (1-based) as `[x][y]`.
    fn density(&self, size: usize) -> PyResult<Vec<Vec<f64>>> {
        let m = size
            .checked_sub(1)
            .and_then(|s| self.state.moments.get(s))
            .ok_or_else(|| ApmixError::new_err(format!("no species of size {size}")))?;
        Ok(grid_of(&m.n))
    }

    /// `(u_x, u_y)` as `[x][y]` arrays.
    fn velocity(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (grid_of(&self.state.u.comp[0]), grid_of(&self.state.u.comp[1]))
    }

    fn pressure(&self) -> Vec<Vec<f64>> {
        grid_of(&self.state.p)
    }
}

/// Limit system `(n_i, u, p)` from preset data.
#[pyclass]
struct LimitSimulation {
    config: CoreConfig,
    params: SchemeParams,
    state: LimitState,
}

#[pymethods]
impl LimitSimulation {
    #[new]
    fn new(config: &RunConfig) -> PyResult<Self> {
        let (spec, params) = config.inner.build().map_err(err)?;
        let state = LimitState::from_preset(config.inner.preset, spec, config.inner.species).map_err(err)?;
        Ok(LimitSimulation {
            config: config.inner.clone(),
            params,
            state,
        })
    }

    /// Advances `n` steps and returns the last divergence.
    #[pyo3(signature = (n = 1))]
    fn step(&mut self, n: usize) -> PyResult<f64> {
        let mut div = 0.0;
        for _ in 0..n {
            let (next, r) = limit_step(&self.state, &self.params, self.config.order, self.config.limit_flux).map_err(err)?;
            self.state = next;
            div = r.divergence;
        }
        Ok(div)
    }

    #[getter]
    fn time(&self) -> f64 {
        self.state.time
    }

    fn mass(&self) -> f64 {
        self.state.mass()
    }

    fn nu(&self) -> Vec<Vec<f64>> {
        grid_of(&self.state.nu())
    }

    fn velocity(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (grid_of(&self.state.u.comp[0]), grid_of(&self.state.u.comp[1]))
    }
}

/// Runs a configuration (writing artifacts to `out` when given) and returns
/// the diagnostics CSV text.
#[pyfunction]
#[pyo3(signature = (config, out = None))]
fn run(config: &RunConfig, out: Option<PathBuf>) -> PyResult<String> {
    let r = harness::run(&config.inner, out.as_deref()).map_err(err)?;
    Ok(apmix::output::diagnostics_csv(&r.rows))
}

/// Grid convergence study; returns the order table as CSV text.
#[pyfunction]
fn convergence(config: &RunConfig, nx_list: Vec<usize>, eps_list: Vec<f64>) -> PyResult<String> {
    let rows = harness::convergence_study(&config.inner, &nx_list, &eps_list).map_err(err)?;
    Ok(harness::convergence_csv(&rows))
}

#[pyfunction]
fn convergence_order(e_coarse: f64, e_fine: f64) -> f64 {
    apmix::diagnostics::convergence_order(e_coarse, e_fine)
}

#[pyfunction]
#[pyo3(signature = (nx, nv = 16, v_max = 8.0))]
fn cfl_timestep(nx: usize, nv: usize, v_max: f64) -> PyResult<f64> {
    let spec = GridSpec::new(nx, nv, v_max).map_err(err)?;
    Ok(core_cfl(&spec))
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    ExperimentPreset::ALL.iter().map(|p| p.name()).collect()
}

#[pymodule]
fn apmix_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ApmixError", m.py().get_type::<ApmixError>())?;
    m.add_class::<RunConfig>()?;
    m.add_class::<Simulation>()?;
    m.add_class::<LimitSimulation>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_order, m)?)?;
    m.add_function(wrap_pyfunction!(cfl_timestep, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
