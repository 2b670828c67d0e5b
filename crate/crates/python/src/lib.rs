//! Python bindings: equations of state, network configs, network stepping
//! and the canned scenarios.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gasnet::eos::EosModel;
use gasnet::experiments::single_pipe::{
    run_fast_transient, run_slow_transient, run_temperature_effect, EosChoice, FastTransientConfig, PipeSeries,
    Resolution, SlowTransientConfig, TemperatureConfig,
};
use gasnet::experiments::{
    five_node_network, network_step_plan, run_convergence_study, run_network, ConvergenceConfig, NetworkRun,
};
use gasnet::io::{five_node_config, load_config, NetworkConfig};
use gasnet::network::{NodeKind, SteadyState};
use gasnet::pipe::{friction_invert as invert, Side};

create_exception!(gasnet_py, GasnetError, PyException, "Base class for simulator errors.");
create_exception!(
    gasnet_py,
    NumericalError,
    GasnetError,
    "CFL, positivity or root-solve failure."
);
create_exception!(gasnet_py, ConfigError, GasnetError, "Invalid input or configuration.");

fn to_py(e: gasnet::Error) -> PyErr {
    let msg = format!("{} [{}]", e, e.reason());
    if e.is_numerical() {
        NumericalError::new_err(msg)
    } else {
        ConfigError::new_err(msg)
    }
}

/// Gas equation of state.
#[pyclass(module = "gasnet_py", frozen, from_py_object)]
#[derive(Clone)]
struct Eos {
    model: EosModel,
}

#[pymethods]
impl Eos {
    /// Isothermal CNGA law `p (b1 + b2 p) = RT rho`; defaults are the reference constants.
    #[staticmethod]
    #[pyo3(signature = (b1=None, b2=None, rt=None))]
    fn cnga(b1: Option<f64>, b2: Option<f64>, rt: Option<f64>) -> PyResult<Self> {
        let EosModel::Cnga {
            b1: d1,
            b2: d2,
            rt: drt,
        } = EosModel::reference_cnga()
        else {
            unreachable!("reference model is CNGA")
        };
        let model = EosModel::Cnga {
            b1: b1.unwrap_or(d1),
            b2: b2.unwrap_or(d2),
            rt: rt.unwrap_or(drt),
        };
        model.validate().map_err(to_py)?;
        Ok(Eos { model })
    }

    /// Ideal gas `p = c^2 rho`.
    #[staticmethod]
    fn ideal(wave_speed: f64) -> PyResult<Self> {
        let model = EosModel::ideal(wave_speed);
        model.validate().map_err(to_py)?;
        Ok(Eos { model })
    }

    #[pyo3(signature = (p, x=0.0))]
    fn density(&self, p: f64, x: f64) -> PyResult<f64> {
        self.model.density_from_pressure(p, x).map_err(to_py)
    }

    #[pyo3(signature = (rho, x=0.0))]
    fn pressure(&self, rho: f64, x: f64) -> PyResult<f64> {
        self.model.pressure_from_density(rho, x).map_err(to_py)
    }

    #[pyo3(signature = (p, x=0.0))]
    fn compressibility(&self, p: f64, x: f64) -> PyResult<f64> {
        self.model.compressibility(p, x).map_err(to_py)
    }

    /// `sqrt(P'(rho))`, m/s.
    #[pyo3(signature = (rho, x=0.0))]
    fn wave_speed(&self, rho: f64, x: f64) -> PyResult<f64> {
        self.model.wave_speed_sq(rho, x).map(f64::sqrt).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Eos({:?})", self.model)
    }
}

/// Network description as read from a config file.
#[pyclass(module = "gasnet_py", from_py_object)]
#[derive(Clone)]
struct Config {
    inner: NetworkConfig,
}

#[pymethods]
impl Config {
    #[staticmethod]
    #[pyo3(signature = (path, strict=false))]
    fn load(path: &str, strict: bool) -> PyResult<Self> {
        Ok(Config {
            inner: load_config(path, strict).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (text, strict=false))]
    fn from_toml(text: &str, strict: bool) -> PyResult<Self> {
        Ok(Config {
            inner: NetworkConfig::from_toml_str(text, "<string>", strict).map_err(to_py)?,
        })
    }

    /// The bundled five-node test network.
    #[staticmethod]
    fn five_node() -> Self {
        Config {
            inner: five_node_config(),
        }
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(to_py)
    }

    /// Every rule the config breaks; empty when valid.
    fn violations(&self) -> Vec<String> {
        self.inner.violations()
    }

    #[getter]
    fn dt(&self) -> Option<f64> {
        self.inner.simulation.dt
    }

    #[setter]
    fn set_dt(&mut self, dt: Option<f64>) {
        self.inner.simulation.dt = dt;
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.simulation.t_end
    }

    #[setter]
    fn set_t_end(&mut self, t_end: f64) {
        self.inner.simulation.t_end = t_end;
    }

    #[getter]
    fn dx_target(&self) -> f64 {
        self.inner.simulation.dx_target
    }

    #[setter]
    fn set_dx_target(&mut self, dx: f64) {
        self.inner.simulation.dx_target = dx;
    }

    fn __eq__(&self, other: &Config) -> bool {
        self.inner == other.inner
    }
}

fn steady_dict<'py>(py: Python<'py>, net: &gasnet::network::Network, s: &SteadyState) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("iterations", s.iterations)?;
    d.set_item("residual", s.residual)?;
    let nodes = PyDict::new(py);
    for (k, n) in net.nodes.iter().enumerate() {
        nodes.set_item(&n.id, s.node_pressures[k])?;
    }
    d.set_item("node_pressure", nodes)?;
    let flows = PyDict::new(py);
    let p_in = PyDict::new(py);
    let p_out = PyDict::new(py);
    for (k, p) in net.pipes.iter().enumerate() {
        flows.set_item(&p.label, s.mass_flow(net, k))?;
        p_in.set_item(&p.label, s.inlet_pressures[k])?;
        p_out.set_item(&p.label, s.outlet_pressures[k])?;
    }
    d.set_item("flow", flows)?;
    d.set_item("pressure_in", p_in)?;
    d.set_item("pressure_out", p_out)?;
    Ok(d)
}

fn run_dict<'py>(py: Python<'py>, run: &NetworkRun) -> PyResult<Bound<'py, PyDict>> {
    let s = &run.series;
    let d = PyDict::new(py);
    d.set_item("t", s.t.clone())?;
    d.set_item("node_ids", s.node_ids.clone())?;
    d.set_item("pipe_ids", s.pipe_ids.clone())?;
    d.set_item("node_pressure", s.node_pressure.clone())?;
    d.set_item("node_outflow", s.node_outflow.clone())?;
    d.set_item("inlet_flow", s.inlet_flow.clone())?;
    d.set_item("outlet_flow", s.outlet_flow.clone())?;
    d.set_item("mass", run.ledger.entries.iter().map(|e| e.mass).collect::<Vec<_>>())?;
    d.set_item(
        "discrepancy",
        run.ledger.entries.iter().map(|e| e.discrepancy).collect::<Vec<_>>(),
    )?;
    d.set_item("dt", run.dt)?;
    d.set_item("steps", run.steps)?;
    d.set_item("max_balance_ratio", run.max_balance_ratio)?;
    Ok(d)
}

fn pipe_dict<'py>(py: Python<'py>, s: &PipeSeries) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", s.t.clone())?;
    for (name, end) in [("left", &s.left), ("right", &s.right)] {
        let e = PyDict::new(py);
        e.set_item("pressure", end.p.clone())?;
        e.set_item("density", end.rho.clone())?;
        e.set_item("flux", end.phi.clone())?;
        e.set_item("velocity", end.v.clone())?;
        d.set_item(name, e)?;
    }
    d.set_item("dt", s.dt)?;
    d.set_item("dx", s.dx)?;
    d.set_item("steps", s.steps)?;
    d.set_item("max_ledger_discrepancy", s.ledger.max_abs_discrepancy())?;
    Ok(d)
}

/// A pipeline network and its current state.
#[pyclass(module = "gasnet_py")]
struct Network {
    net: gasnet::network::Network,
}

#[pymethods]
impl Network {
    /// Builds the network of a config; pipes start at rest.
    #[staticmethod]
    fn from_config(config: &Config) -> PyResult<Self> {
        Ok(Network {
            net: config.inner.build_network().map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (eos=None, dx=62.5))]
    fn five_node(eos: Option<Eos>, dx: f64) -> PyResult<Self> {
        let model = eos.map_or_else(EosModel::reference_cnga, |e| e.model);
        Ok(Network {
            net: five_node_network(model, dx).map_err(to_py)?,
        })
    }

    #[getter]
    fn node_ids(&self) -> Vec<String> {
        self.net.nodes.iter().map(|n| n.id.clone()).collect()
    }

    #[getter]
    fn pipe_ids(&self) -> Vec<String> {
        self.net.pipes.iter().map(|p| p.label.clone()).collect()
    }

    #[getter]
    fn slack_ids(&self) -> Vec<String> {
        self.net
            .nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Slack(_)))
            .map(|n| n.id.clone())
            .collect()
    }

    #[getter]
    fn node_pressure(&self) -> Vec<f64> {
        self.net.node_pressure.clone()
    }

    #[getter]
    fn node_outflow(&self) -> Vec<f64> {
        self.net.node_outflow.clone()
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.net.steps_taken()
    }

    /// Mass in all pipes, kg.
    fn total_mass(&self) -> f64 {
        self.net.total_mass()
    }

    /// Mass flow into and out of each pipe, kg/s.
    fn pipe_flows(&self) -> Vec<(f64, f64)> {
        self.net
            .pipes
            .iter()
            .map(|p| (p.end_mass_flow(Side::Left), p.end_mass_flow(Side::Right)))
            .collect()
    }

    /// Cell pressures of one pipe, Pa.
    fn pipe_pressures(&self, pipe: &str) -> PyResult<Vec<f64>> {
        let k = self
            .net
            .pipe_index(pipe)
            .ok_or_else(|| PyValueError::new_err(format!("no pipe '{pipe}'")))?;
        Ok(self.net.pipes[k].pressures())
    }

    #[pyo3(signature = (safety=1.0))]
    fn cfl_max_dt(&self, safety: f64) -> PyResult<f64> {
        self.net.cfl_max_dt(safety).map_err(to_py)
    }

    /// Solves the steady state at `t0` and loads it into the pipes.
    #[pyo3(signature = (t0=0.0))]
    fn initialize_steady<'py>(&mut self, py: Python<'py>, t0: f64) -> PyResult<Bound<'py, PyDict>> {
        let s = self.net.initialize_steady(t0).map_err(to_py)?;
        steady_dict(py, &self.net, &s)
    }

    fn step(&mut self, dt: f64) -> PyResult<()> {
        self.net.step(dt).map_err(to_py)
    }

    /// Steps to `t_end` (relative to the current state), sampling every `cadence` seconds.
    #[pyo3(signature = (t_end, dt=None, cadence=60.0, cfl_safety=0.9))]
    fn run<'py>(
        &mut self,
        py: Python<'py>,
        t_end: f64,
        dt: Option<f64>,
        cadence: f64,
        cfl_safety: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let (dt, every) = network_step_plan(&self.net, dt, cfl_safety, cadence).map_err(to_py)?;
        let run = run_network(&mut self.net, dt, every, t_end).map_err(to_py)?;
        run_dict(py, &run)
    }
}

/// Exact inverse of `x (1 + a |x|)`.
#[pyfunction]
fn friction_invert(y: f64, a: f64) -> PyResult<f64> {
    invert(y, a).map_err(to_py)
}

/// Grid-refinement study; returns errors and observed orders.
#[pyfunction]
#[pyo3(signature = (levels=6, reference_level=6))]
fn convergence_study(py: Python<'_>, levels: u32, reference_level: u32) -> PyResult<Bound<'_, PyDict>> {
    let cfg = ConvergenceConfig {
        levels,
        reference_level,
        ..ConvergenceConfig::default()
    };
    let r = run_convergence_study(&cfg).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("resolutions", r.resolutions)?;
    d.set_item("cells", r.cells)?;
    d.set_item("errors_rho", r.errors_rho)?;
    d.set_item("errors_p", r.errors_p)?;
    d.set_item("errors_phi", r.errors_phi)?;
    d.set_item("last_two", r.rates.last_two.to_vec())?;
    d.set_item("first_last", r.rates.first_last.to_vec())?;
    Ok(d)
}

fn eos_choice(name: &str) -> PyResult<EosChoice> {
    name.parse()
        .map_err(|e: gasnet::Error| PyValueError::new_err(e.to_string()))
}

fn resolution(base: Resolution, dx: Option<f64>, cadence: Option<f64>) -> Resolution {
    Resolution {
        dx: dx.unwrap_or(base.dx),
        cadence: cadence.unwrap_or(base.cadence),
        ..base
    }
}

/// Outlet flux steps on a 20 km pipe.
#[pyfunction]
#[pyo3(signature = (eos="cnga", dx=None, t_end=None, cadence=None))]
fn fast_transient<'py>(
    py: Python<'py>,
    eos: &str,
    dx: Option<f64>,
    t_end: Option<f64>,
    cadence: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let base = FastTransientConfig::default();
    let cfg = FastTransientConfig {
        eos: eos_choice(eos)?,
        t_end: t_end.unwrap_or(base.t_end),
        resolution: resolution(base.resolution, dx, cadence),
        ..base
    };
    pipe_dict(py, &run_fast_transient(&cfg).map_err(to_py)?)
}

/// Harmonic inlet pressure on a 50 km pipe; adds `limit_cycle_rms`.
#[pyfunction]
#[pyo3(signature = (eos="cnga", dx=None, periods=None))]
fn slow_transient<'py>(
    py: Python<'py>,
    eos: &str,
    dx: Option<f64>,
    periods: Option<u32>,
) -> PyResult<Bound<'py, PyDict>> {
    let base = SlowTransientConfig::default();
    let cfg = SlowTransientConfig {
        eos: eos_choice(eos)?,
        periods: periods.unwrap_or(base.periods),
        resolution: resolution(base.resolution, dx, None),
        ..base
    };
    let r = run_slow_transient(&cfg).map_err(to_py)?;
    let d = pipe_dict(py, &r.series)?;
    d.set_item("limit_cycle_rms", r.limit_cycle_rms)?;
    Ok(d)
}

/// Warm inlet section on a 100 km pipe.
#[pyfunction]
#[pyo3(signature = (rate=1e-3, dx=None, t_end=None))]
fn temperature_effect<'py>(
    py: Python<'py>,
    rate: f64,
    dx: Option<f64>,
    t_end: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let base = TemperatureConfig::default();
    let cfg = TemperatureConfig {
        decay_rate: rate,
        t_end: t_end.unwrap_or(base.t_end),
        resolution: resolution(base.resolution, dx, None),
        ..base
    };
    pipe_dict(py, &run_temperature_effect(&cfg).map_err(to_py)?)
}

#[pymodule]
fn gasnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("GasnetError", py.get_type::<GasnetError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add_class::<Eos>()?;
    m.add_class::<Config>()?;
    m.add_class::<Network>()?;
    m.add_function(wrap_pyfunction!(friction_invert, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(fast_transient, m)?)?;
    m.add_function(wrap_pyfunction!(slow_transient, m)?)?;
    m.add_function(wrap_pyfunction!(temperature_effect, m)?)?;
    Ok(())
}
