//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists (via JSON), so they mirror the serialized Rust types field for field.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use wptsim::engine::{self, PolicyEntry, ScenarioConfig, Simulation};
use wptsim::geom::{self, Disk, Point, Segment};
use wptsim::offline::{self, KnapsackInstance, Method, OfflineInstance, Problem};
use wptsim::report;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Accepts a JSON string or any JSON-compatible Python object.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = match obj.extract::<String>() {
        Ok(s) => s,
        Err(_) => obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?,
    };
    serde_json::from_str(&text).map_err(value_error)
}

fn knapsack(items: Vec<(u64, u64)>, capacity: u64) -> PyResult<KnapsackInstance> {
    let kp = KnapsackInstance::new(&items, capacity);
    kp.validate().map_err(value_error)?;
    Ok(kp)
}

/// Experiment configuration. Keyword arguments use the JSON field names.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (n, **kwargs))]
    fn new(py: Python<'_>, n: usize, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let fields = PyDict::new(py);
        if let Some(kw) = kwargs {
            fields.update(kw.as_mapping())?;
        }
        fields.set_item("n", n)?;
        let text: String = py.import("json")?.call_method1("dumps", (fields,))?.extract()?;
        Self::from_json(&text)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyConfig {
            inner: ScenarioConfig::from_json_str(text).map_err(value_error)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_error)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn horizon(&self) -> u32 {
        self.inner.horizon
    }

    #[getter]
    fn repetitions(&self) -> u32 {
        self.inner.repetitions
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(n={}, horizon={}, repetitions={}, master_seed={})",
            self.inner.n, self.inner.horizon, self.inner.repetitions, self.inner.master_seed
        )
    }
}

fn policy_entry(cfg: &ScenarioConfig, policy: Option<&Bound<'_, PyAny>>) -> PyResult<PolicyEntry> {
    let entry = match policy {
        Some(p) => from_py::<PolicyEntry>(p)?,
        None => cfg.primary_policy(),
    };
    entry.spec.validate(cfg.bounds(), cfg.n).map_err(value_error)?;
    Ok(entry)
}

/// A single run that can be advanced round by round.
#[pyclass(name = "Simulation", unsendable)]
struct PySimulation {
    inner: Option<Simulation>,
}

impl PySimulation {
    fn sim(&self) -> PyResult<&Simulation> {
        self.inner.as_ref().ok_or_else(|| value_error("simulation already consumed by run()"))
    }

    fn sim_mut(&mut self) -> PyResult<&mut Simulation> {
        self.inner.as_mut().ok_or_else(|| value_error("simulation already consumed by run()"))
    }
}

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (config, policy = None, rep = 0))]
    fn new(config: &PyConfig, policy: Option<&Bound<'_, PyAny>>, rep: u32) -> PyResult<Self> {
        let entry = policy_entry(&config.inner, policy)?;
        Ok(PySimulation {
            inner: Some(Simulation::new(&config.inner, &entry, rep).map_err(value_error)?),
        })
    }

    /// Advances one round and returns its metrics.
    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let sim = self.sim_mut()?;
        if sim.is_finished() {
            return Err(value_error("horizon reached"));
        }
        let m = sim.step();
        to_py(py, &m)
    }

    /// Runs the remaining rounds and returns the full result.
    fn run<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let sim = self.inner.take().ok_or_else(|| value_error("simulation already consumed by run()"))?;
        to_py(py, &sim.run())
    }

    #[getter]
    fn round(&self) -> PyResult<u32> {
        Ok(self.sim()?.round())
    }

    #[getter]
    fn finished(&self) -> PyResult<bool> {
        Ok(self.sim()?.is_finished())
    }

    #[getter]
    fn charger_energy(&self) -> PyResult<f64> {
        Ok(self.sim()?.charger().energy)
    }

    #[getter]
    fn total_delivered(&self) -> PyResult<f64> {
        Ok(self.sim()?.total_delivered())
    }

    /// Current agent states as dicts.
    fn agents<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.sim()?
            .agents()
            .iter()
            .map(|a| {
                let d = PyDict::new(py);
                d.set_item("id", a.id)?;
                d.set_item("x", a.position.x)?;
                d.set_item("y", a.position.y)?;
                d.set_item("level", a.battery.level)?;
                d.set_item("capacity", a.battery.capacity)?;
                d.set_item("group", a.profile.group)?;
                d.set_item("gamma", a.profile.gamma)?;
                d.set_item("consumption", a.consumption)?;
                d.set_item("velocity", a.velocity)?;
                Ok(d)
            })
            .collect()
    }

    /// Charge events of the last round.
    fn last_events<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.sim()?.last_events())
    }
}

/// Runs every repetition and returns `{"policy", "mean", "summary"}`.
#[pyfunction]
#[pyo3(signature = (config, policy = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &PyConfig,
    policy: Option<&Bound<'_, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let entry = policy_entry(&config.inner, policy)?;
    let exp = py
        .detach(|| engine::run_experiment(&config.inner, &entry))
        .map_err(value_error)?;
    let summary = report::summarize(&config.inner, std::slice::from_ref(&exp));
    let out = PyDict::new(py);
    out.set_item("policy", &exp.policy)?;
    out.set_item("mean", to_py(py, &exp.mean)?)?;
    out.set_item("summary", to_py(py, &summary.policies[0])?)?;
    Ok(out.into_any())
}

#[pyfunction]
fn solve_kp(items: Vec<(u64, u64)>, capacity: u64) -> PyResult<u64> {
    offline::solve_kp(&knapsack(items, capacity)?).map_err(value_error)
}

/// MNC instance (as a dict) whose optimum equals the knapsack optimum.
#[pyfunction]
#[pyo3(signature = (items, capacity, range = None))]
fn kp_to_mnc<'py>(
    py: Python<'py>,
    items: Vec<(u64, u64)>,
    capacity: u64,
    range: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let kp = knapsack(items, capacity)?;
    let r = range.unwrap_or_else(|| offline::default_mnc_range(&kp));
    to_py(py, &offline::kp_to_mnc(&kp, r).map_err(value_error)?)
}

/// MNL instance (as a dict) whose optimum equals the knapsack optimum.
#[pyfunction]
#[pyo3(signature = (items, capacity, range = 1.0))]
fn kp_to_mnl<'py>(py: Python<'py>, items: Vec<(u64, u64)>, capacity: u64, range: f64) -> PyResult<Bound<'py, PyAny>> {
    let kp = knapsack(items, capacity)?;
    to_py(py, &offline::kp_to_mnl(&kp, range).map_err(value_error)?)
}

/// Solves an offline instance given as a dict or JSON string.
#[pyfunction]
#[pyo3(signature = (instance, problem = "mnc", method = "brute"))]
fn solve_offline<'py>(
    py: Python<'py>,
    instance: &Bound<'_, PyAny>,
    problem: &str,
    method: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let inst: OfflineInstance = from_py(instance)?;
    let problem = match problem {
        "mnc" => Problem::Mnc,
        "mnl" => Problem::Mnl,
        other => return Err(value_error(format!("unknown problem {other:?}"))),
    };
    let method = match method {
        "dp" => Method::Dp,
        "brute" => Method::Brute,
        other => return Err(value_error(format!("unknown method {other:?}"))),
    };
    let sol = py
        .detach(|| offline::solve(&inst, problem, method))
        .map_err(value_error)?;
    to_py(py, &sol)
}

/// Time a straight move from `start` to `end` spends in the closed disk.
#[pyfunction]
#[pyo3(signature = (start, end, center, radius, tau = 1.0))]
fn in_range_time(start: (f64, f64), end: (f64, f64), center: (f64, f64), radius: f64, tau: f64) -> f64 {
    let seg = Segment::new(Point::new(start.0, start.1), Point::new(end.0, end.1));
    geom::in_range_time(&seg, &Disk::new(Point::new(center.0, center.1), radius), seg.length() / tau, tau)
}

#[pyfunction]
#[pyo3(signature = (range, t_in, entry_distance, alpha = 1.0, beta = 0.0))]
fn received_energy(range: f64, t_in: f64, entry_distance: f64, alpha: f64, beta: f64) -> f64 {
    wptsim::charging::received_energy(range, t_in, entry_distance, alpha, beta)
}

#[pymodule]
fn wptsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(solve_kp, m)?)?;
    m.add_function(wrap_pyfunction!(kp_to_mnc, m)?)?;
    m.add_function(wrap_pyfunction!(kp_to_mnl, m)?)?;
    m.add_function(wrap_pyfunction!(solve_offline, m)?)?;
    m.add_function(wrap_pyfunction!(in_range_time, m)?)?;
    m.add_function(wrap_pyfunction!(received_energy, m)?)?;
    Ok(())
}
