//! Python bindings for the moment pipeline: polygons, direction sets,
//! moment grids, reconstruction, noise and the stability bounds.
//!
//! The wrappers stay thin. Validation and numerics live in the core crate;
//! every fallible call surfaces the library error message as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: legmoments::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Convex polygon given by a counterclockwise vertex list inside the plane.
#[pyclass(name = "ConvexPolygon", frozen)]
struct PyPolygon {
    inner: legmoments::ConvexPolygon,
}

#[pymethods]
impl PyPolygon {
    #[new]
    fn new(vertices: Vec<[f64; 2]>) -> PyResult<Self> {
        Ok(Self { inner: legmoments::ConvexPolygon::new(vertices).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: legmoments::ConvexPolygon::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn vertices(&self) -> Vec<[f64; 2]> {
        self.inner.vertices().to_vec()
    }

    fn area(&self) -> f64 {
        self.inner.area()
    }

    fn support_value(&self, theta: f64) -> f64 {
        self.inner.support_value(theta)
    }

    #[pyo3(signature = (p, tol = 1e-9))]
    fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        self.inner.contains(p, tol)
    }

    fn is_degenerate(&self) -> bool {
        self.inner.is_degenerate()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("ConvexPolygon({} vertices, area {:.6})", self.inner.len(), self.inner.area())
    }
}

/// Outer normal directions as strictly increasing angles in `[0, 2pi)`.
#[pyclass(name = "DirectionSet", frozen)]
struct PyDirections {
    inner: legmoments::DirectionSet,
}

#[pymethods]
impl PyDirections {
    #[new]
    fn new(angles: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: legmoments::DirectionSet::new(angles).map_err(err)? })
    }

    #[staticmethod]
    fn equidistant(n: usize) -> PyResult<Self> {
        Ok(Self { inner: legmoments::DirectionSet::equidistant(n).map_err(err)? })
    }

    fn angles(&self) -> Vec<f64> {
        self.inner.angles().to_vec()
    }

    fn max_gap(&self) -> f64 {
        self.inner.max_gap()
    }

    fn includes_axes(&self) -> bool {
        self.inner.includes_axes()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("DirectionSet({} directions)", self.inner.len())
    }
}

/// Square moment table `values[k][l]` for `0 <= k, l <= order`, geometric
/// or Legendre.
#[pyclass(name = "MomentGrid", frozen)]
struct PyGrid {
    inner: legmoments::MomentGrid,
}

fn kind_name(kind: legmoments::MomentKind) -> &'static str {
    match kind {
        legmoments::MomentKind::Geometric => "geometric",
        legmoments::MomentKind::Legendre => "legendre",
    }
}

#[pymethods]
impl PyGrid {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: legmoments::MomentGrid =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("grid serializes")
    }

    fn kind(&self) -> &'static str {
        kind_name(self.inner.kind())
    }

    fn order(&self) -> usize {
        self.inner.order()
    }

    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.values().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("MomentGrid({}, order {})", self.kind(), self.inner.order())
    }
}

/// Reconstruction output: the polygon, its support values over the
/// prescribed directions and the solver diagnostics.
#[pyclass(name = "Reconstruction", frozen)]
struct PyReconstruction {
    polygon: legmoments::ConvexPolygon,
    #[pyo3(get)]
    h: Vec<f64>,
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    starts_used: usize,
    #[pyo3(get)]
    per_start_objectives: Vec<f64>,
}

#[pymethods]
impl PyReconstruction {
    fn polygon(&self) -> PyPolygon {
        PyPolygon { inner: self.polygon.clone() }
    }

    fn __repr__(&self) -> String {
        format!(
            "Reconstruction(objective {:.3e}, converged {})",
            self.objective, self.converged
        )
    }
}

#[pyfunction]
fn polygon_geometric_moments(polygon: &PyPolygon, order: usize) -> PyGrid {
    PyGrid { inner: legmoments::polygon_geometric_moments(&polygon.inner, order) }
}

#[pyfunction]
fn polygon_legendre_moments(polygon: &PyPolygon, order: usize) -> PyResult<PyGrid> {
    Ok(PyGrid { inner: legmoments::polygon_legendre_moments(&polygon.inner, order).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (center, semi_axes, rotation_rad, order, kind = "legendre"))]
fn ellipse_moments(
    center: [f64; 2],
    semi_axes: [f64; 2],
    rotation_rad: f64,
    order: usize,
    kind: &str,
) -> PyResult<PyGrid> {
    let shape = legmoments::ShapeModel::ellipse(center, semi_axes, rotation_rad).map_err(err)?;
    let inner = match kind {
        "legendre" => legmoments::shape_legendre_moments(&shape, order).map_err(err)?,
        "geometric" => legmoments::shape_geometric_moments(&shape, order).map_err(err)?,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown moment kind {other:?}, expected \"legendre\" or \"geometric\""
            )))
        }
    };
    Ok(PyGrid { inner })
}

#[pyfunction]
#[pyo3(signature = (target, directions, starts = 8, max_iters = 5000, tol = 1e-10, seed = 0, scale = 1.0))]
fn reconstruct(
    target: &PyGrid,
    directions: &PyDirections,
    starts: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
    scale: f64,
) -> PyResult<PyReconstruction> {
    let config = legmoments::SolverConfig { starts, max_iters, tol, seed, scale };
    let res = legmoments::reconstruct(&target.inner, &directions.inner, &config).map_err(err)?;
    Ok(PyReconstruction {
        polygon: res.polygon,
        h: res.h_hat.h().to_vec(),
        objective: res.objective,
        converged: res.converged,
        starts_used: res.starts_used,
        per_start_objectives: res.per_start_objectives,
    })
}

#[pyfunction]
fn nikodym_distance(p: &PyPolygon, q: &PyPolygon) -> f64 {
    legmoments::nikodym_distance(&p.inner, &q.inner)
}

#[pyfunction]
fn hausdorff_distance(p: &PyPolygon, q: &PyPolygon) -> PyResult<f64> {
    legmoments::hausdorff_distance(&p.inner, &q.inner).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (target, schedule, eps = 0.5, scale = 0.01, seed = 0))]
fn perturb(target: &PyGrid, schedule: &str, eps: f64, scale: f64, seed: u64) -> PyResult<PyGrid> {
    let schedule = match schedule {
        "none" => legmoments::NoiseSchedule::None,
        "mean" => legmoments::NoiseSchedule::MeanConsistent,
        "as" => legmoments::NoiseSchedule::AsConsistent,
        "fixed" => legmoments::NoiseSchedule::Fixed,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown schedule {other:?}, expected none, mean, as or fixed"
            )))
        }
    };
    let spec = legmoments::NoisySpec { schedule, epsilon: eps, scale, seed };
    Ok(PyGrid { inner: legmoments::perturb(&target.inner, &spec).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (directions, order, a0 = 1.0, a1 = 1.0))]
fn bound_stability2(directions: &PyDirections, order: usize, a0: f64, a1: f64) -> PyResult<f64> {
    let cfg = legmoments::BoundConfig { a0, a1 };
    legmoments::bound_stability2(&directions.inner, order, &cfg).map_err(err)
}

#[pyfunction]
fn circumradius_bound(grid: &PyGrid) -> PyResult<f64> {
    legmoments::circumradius_bound(&grid.inner).map_err(err)
}

/// Runs a study from its JSON config and returns `(rows_csv, medians_csv)`.
#[pyfunction]
fn run_study(config_json: &str) -> PyResult<(String, String)> {
    let config: legmoments::StudyConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let rows = legmoments::run_study(&config).map_err(err)?;
    let medians = legmoments::cell_medians(&rows);
    Ok((legmoments::rows_to_csv(&rows), legmoments::medians_to_csv(&medians)))
}

#[pymodule]
fn legmoments_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", legmoments::VERSION)?;
    m.add_class::<PyPolygon>()?;
    m.add_class::<PyDirections>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyReconstruction>()?;
    m.add_function(wrap_pyfunction!(polygon_geometric_moments, m)?)?;
    m.add_function(wrap_pyfunction!(polygon_legendre_moments, m)?)?;
    m.add_function(wrap_pyfunction!(ellipse_moments, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(nikodym_distance, m)?)?;
    m.add_function(wrap_pyfunction!(hausdorff_distance, m)?)?;
    m.add_function(wrap_pyfunction!(perturb, m)?)?;
    m.add_function(wrap_pyfunction!(bound_stability2, m)?)?;
    m.add_function(wrap_pyfunction!(circumradius_bound, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    Ok(())
}
