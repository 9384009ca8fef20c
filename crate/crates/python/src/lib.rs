//! Python bindings: `import vlp`.

use std::fs::File;
use std::io::{BufReader, BufWriter};

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vlp_core::bench::{self, ExperimentSpec, OutputFormat};
use vlp_core::database::{self, grid_locations};
use vlp_core::estimators::{estimate, EstimatorInput, Method};
use vlp_core::rng::substream;
use vlp_core::{load_scene, PowerVector, PsoConfig, Vec3};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn point(p: (f64, f64, f64)) -> Vec3 {
    Vec3::new(p.0, p.1, p.2)
}

/// Room, LEDs, photodiode, reflectance and noise model.
#[pyclass(name = "Scene", module = "vlp", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScene {
    inner: vlp_core::Scene,
}

#[pymethods]
impl PyScene {
    /// The built-in 5 x 5 x 3 m room with four LEDs at `tx_power` watts each.
    #[staticmethod]
    #[pyo3(signature = (tx_power = 20.0))]
    fn reference(tx_power: f64) -> Self {
        Self {
            inner: vlp_core::Scene::reference(tx_power),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_scene(text).map_err(value_err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn with_tx_power(&self, tx_power: f64) -> PyResult<Self> {
        let inner = self.inner.with_tx_power(tx_power);
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn with_reflectance(&self, reflectance: f64) -> PyResult<Self> {
        let inner = self.inner.with_reflectance(reflectance);
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn noiseless(&self) -> Self {
        Self {
            inner: self.inner.noiseless(),
        }
    }

    #[getter]
    fn led_count(&self) -> usize {
        self.inner.led_count()
    }

    #[getter]
    fn pd_plane_z(&self) -> f64 {
        self.inner.pd_plane_z()
    }

    #[getter]
    fn reflectance(&self) -> f64 {
        self.inner.channel.reflectance
    }

    #[getter]
    fn led_positions(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .leds
            .iter()
            .map(|l| (l.position.x, l.position.y, l.position.z))
            .collect()
    }

    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    fn __repr__(&self) -> String {
        format!(
            "Scene(leds={}, reflectance={}, hash={})",
            self.inner.led_count(),
            self.inner.channel.reflectance,
            self.inner.content_hash()
        )
    }
}

/// Channel model bound to one scene. Reflection gains are cached per point.
#[pyclass(name = "Channel", module = "vlp", frozen)]
struct PyChannel {
    inner: vlp_core::Channel,
}

#[pymethods]
impl PyChannel {
    #[new]
    fn new(scene: &PyScene) -> Self {
        Self {
            inner: vlp_core::Channel::new(&scene.inner),
        }
    }

    fn los_gain(&self, led: usize, pd: (f64, f64, f64)) -> PyResult<f64> {
        self.inner.los_gain(led, point(pd)).map_err(value_err)
    }

    fn nlos_gain(&self, led: usize, pd: (f64, f64, f64)) -> PyResult<f64> {
        self.inner.nlos_gain(led, point(pd)).map_err(value_err)
    }

    /// `(los, nlos, total, kappa)`; raises ValueError without line of sight.
    fn gain_breakdown(&self, led: usize, pd: (f64, f64, f64)) -> PyResult<(f64, f64, f64, f64)> {
        let b = self.inner.gain_breakdown(led, point(pd)).map_err(value_err)?;
        Ok((b.los, b.nlos, b.total, b.kappa))
    }

    fn noiseless_vector(&self, pd: (f64, f64, f64)) -> PyResult<Vec<f64>> {
        Ok(self.inner.noiseless_vector(point(pd)).map_err(value_err)?.into_inner())
    }

    /// One noisy measurement, reproducible for a given `seed`.
    #[pyo3(signature = (pd, seed = 0))]
    fn measure_vector(&self, pd: (f64, f64, f64), seed: u64) -> PyResult<Vec<f64>> {
        let mut rng = substream(seed, "measurement", &[0]);
        Ok(self
            .inner
            .measure_vector(point(pd), &mut rng)
            .map_err(value_err)?
            .into_inner())
    }
}

/// Fingerprint database: received-power vectors at known locations.
#[pyclass(name = "Database", module = "vlp", frozen)]
struct PyDatabase {
    inner: vlp_core::Database,
}

#[pymethods]
impl PyDatabase {
    /// Collects fingerprints at the centers of a `rows` x `cols` grid.
    #[staticmethod]
    #[pyo3(signature = (scene, rows, cols, seed = 0))]
    fn build(scene: &PyScene, rows: usize, cols: usize, seed: u64) -> PyResult<Self> {
        let s = &scene.inner;
        let locations = grid_locations(&s.room, s.pd_plane_z(), rows, cols);
        Ok(Self {
            inner: database::build_database(s, &locations, seed).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        Ok(Self {
            inner: database::load_database(BufReader::new(file)).map_err(value_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let file = File::create(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        database::save_database(&self.inner, BufWriter::new(file)).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn led_count(&self) -> usize {
        self.inner.led_count()
    }

    #[getter]
    fn scene_hash(&self) -> &str {
        self.inner.scene_hash()
    }

    fn locations(&self) -> Vec<(f64, f64, f64)> {
        self.inner.locations().iter().map(|p| (p[0], p[1], p[2])).collect()
    }

    fn powers(&self) -> Vec<Vec<f64>> {
        self.inner
            .entries()
            .iter()
            .map(|e| e.powers.as_slice().to_vec())
            .collect()
    }
}

/// Estimates the PD location from measured powers.
///
/// `method` is one of `"fp"`, `"nls"` or `"danls"`. Returns a dict with
/// `location`, `objective_value` and `stale_database`.
#[pyfunction]
#[pyo3(signature = (scene, measured, method = "danls", db = None, k = 3, seed = 0))]
fn locate<'py>(
    py: Python<'py>,
    scene: &PyScene,
    measured: Vec<f64>,
    method: &str,
    db: Option<&PyDatabase>,
    k: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let method: Method = method.parse().map_err(PyValueError::new_err)?;
    let input = EstimatorInput::on_pd_plane(PowerVector::new(measured), &scene.inner);
    let pso = PsoConfig::default().with_seed(seed);
    let est = py
        .detach(|| estimate(method, &input, db.map(|d| &d.inner), k, &pso))
        .map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("method", est.method.as_str())?;
    out.set_item("location", (est.location.x, est.location.y, est.location.z))?;
    out.set_item("objective_value", est.objective_value)?;
    out.set_item("stale_database", est.stale_database)?;
    Ok(out)
}

/// Root-mean-square Euclidean error between matching point lists.
#[pyfunction]
fn rmse(estimates: Vec<(f64, f64, f64)>, truths: Vec<(f64, f64, f64)>) -> PyResult<f64> {
    let e: Vec<Vec3> = estimates.into_iter().map(point).collect();
    let t: Vec<Vec3> = truths.into_iter().map(point).collect();
    bench::rmse(&e, &t).map_err(value_err)
}

/// Default experiment spec for `scene` as a JSON string, ready to edit.
#[pyfunction]
#[pyo3(signature = (scene, preset = "desk"))]
fn experiment_spec(scene: &PyScene, preset: &str) -> PyResult<String> {
    let spec = match preset {
        "desk" => ExperimentSpec::desk(scene.inner.clone()),
        "full" => ExperimentSpec::full(scene.inner.clone()),
        other => return Err(PyValueError::new_err(format!("unknown preset `{other}`"))),
    };
    Ok(serde_json::to_string_pretty(&spec).expect("spec serializes"))
}

/// Runs a sweep described by a JSON spec and returns the result table.
///
/// `format` is `"csv"` or `"json"`; `workers = 0` uses every core.
#[pyfunction]
#[pyo3(signature = (spec_json, workers = 0, format = "csv"))]
fn run_experiment(py: Python<'_>, spec_json: &str, workers: usize, format: &str) -> PyResult<String> {
    let spec: ExperimentSpec = serde_json::from_str(spec_json).map_err(value_err)?;
    let format: OutputFormat = format.parse().map_err(PyValueError::new_err)?;
    let table = py
        .detach(|| {
            if workers == 0 {
                bench::run_experiment(&spec)
            } else {
                bench::run_experiment_with_workers(&spec, workers)
            }
        })
        .map_err(value_err)?;
    let mut buf = Vec::new();
    bench::emit_results(&table, format, &mut buf).map_err(|e| PyIOError::new_err(e.to_string()))?;
    String::from_utf8(buf).map_err(value_err)
}

#[pymodule]
fn vlp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyDatabase>()?;
    m.add_function(wrap_pyfunction!(locate, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(experiment_spec, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
