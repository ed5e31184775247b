//! Python bindings: states, records, MLE and network reconstruction,
//! metrics and the degradation fit.

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sqztomo_core::channels::{self, LossParam, PhaseNoiseParam};
use sqztomo_core::degradation::{self, LevelPoint};
use sqztomo_core::fock::CMatrix;
use sqztomo_core::homodyne::{self, PhaseSchedule};
use sqztomo_core::mle::{mle_reconstruct, MleConfig};
use sqztomo_core::nn::{Architecture, NetworkModel};
use sqztomo_core::simulate::StateSpec;
use sqztomo_core::{io, metrics, states, Error, Truncation};

create_exception!(sqztomo, TomographyError, PyException);

struct PyErrorMap(Error);

impl From<Error> for PyErrorMap {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

impl From<PyErrorMap> for PyErr {
    fn from(e: PyErrorMap) -> Self {
        let msg = e.0.to_string();
        match e.0 {
            Error::InvalidDimension { .. }
            | Error::InvalidParameter(_)
            | Error::ContractViolation(_)
            | Error::DimMismatch { .. } => PyValueError::new_err(msg),
            Error::Io(_) => PyOSError::new_err(msg),
            _ => TomographyError::new_err(msg),
        }
    }
}

type PyRes<T> = Result<T, PyErrorMap>;

fn is_json(path: &std::path::Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

/// Density matrix in the truncated Fock basis.
#[pyclass(name = "DensityMatrix", module = "sqztomo", frozen)]
#[derive(Clone)]
struct PyDensityMatrix {
    inner: sqztomo_core::DensityMatrix,
}

fn wrap(inner: sqztomo_core::DensityMatrix) -> PyDensityMatrix {
    PyDensityMatrix { inner }
}

#[pymethods]
impl PyDensityMatrix {
    /// Validates Hermiticity, unit trace and positivity of a square matrix.
    #[new]
    fn new(rows: Vec<Vec<Complex64>>) -> PyRes<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::ContractViolation("matrix must be square".into()).into());
        }
        let m = CMatrix::from_fn(d, d, |i, j| rows[i][j]);
        Ok(wrap(sqztomo_core::DensityMatrix::from_matrix(m)?))
    }

    #[staticmethod]
    fn vacuum(dim: usize) -> PyRes<Self> {
        Ok(wrap(states::vacuum(dim)?))
    }

    #[staticmethod]
    fn fock(n: usize, dim: usize) -> PyRes<Self> {
        Ok(wrap(sqztomo_core::DensityMatrix::fock(n, dim)?))
    }

    #[staticmethod]
    #[pyo3(signature = (nbar, dim, max_tail = 1e-6))]
    fn thermal(nbar: f64, dim: usize, max_tail: f64) -> PyRes<Self> {
        let th = states::ThermalParams::new(nbar)?;
        Ok(wrap(states::thermal(
            &th,
            Truncation::new(dim).with_max_tail(max_tail),
        )?))
    }

    /// Squeezed thermal state degraded by loss and two-point phase jitter.
    #[staticmethod]
    #[pyo3(signature = (sq_db, dim, angle = 0.0, nbar = 0.0, loss = 0.0, phase_noise = 0.0, max_tail = 1e-6))]
    fn squeezed(
        sq_db: f64,
        dim: usize,
        angle: f64,
        nbar: f64,
        loss: f64,
        phase_noise: f64,
        max_tail: f64,
    ) -> PyRes<Self> {
        let spec = StateSpec {
            squeezing_db: sq_db,
            angle,
            nbar,
            loss,
            phase_noise,
        };
        Ok(wrap(spec.density_matrix(
            Truncation::new(dim).with_max_tail(max_tail),
        )?))
    }

    /// Reads the binary container, or JSON when the name ends in `.json`.
    #[staticmethod]
    fn load(path: PathBuf) -> PyRes<Self> {
        Ok(wrap(if is_json(&path) {
            io::read_density_json(&path)?
        } else {
            io::read_density(&path)?
        }))
    }

    fn save(&self, path: PathBuf) -> PyRes<()> {
        if is_json(&path) {
            io::write_density_json(&path, &self.inner)?;
        } else {
            io::write_density(&path, &self.inner)?;
        }
        Ok(())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn to_rows(&self) -> Vec<Vec<Complex64>> {
        let m = self.inner.matrix();
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    }

    fn is_physical(&self) -> bool {
        self.inner.physicality().is_physical()
    }

    fn purity(&self) -> f64 {
        metrics::purity(&self.inner)
    }

    fn fidelity(&self, other: &PyDensityMatrix) -> PyRes<f64> {
        Ok(metrics::fidelity(&self.inner, &other.inner)?)
    }

    fn trace_distance(&self, other: &PyDensityMatrix) -> PyRes<f64> {
        Ok(metrics::trace_distance(&self.inner, &other.inner)?)
    }

    /// `(squeezing_db, anti_squeezing_db, angle)`.
    fn levels(&self) -> (f64, f64, f64) {
        let l = metrics::squeezing_levels(&self.inner);
        (l.squeezing_db, l.anti_squeezing_db, l.angle)
    }

    fn quadrature_variance(&self, theta: f64) -> f64 {
        homodyne::quadrature_variance(&self.inner, theta)
    }

    /// Dominant pure component and residual weights.
    fn decompose<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = metrics::decompose(&self.inner);
        let out = PyDict::new_bound(py);
        out.set_item("sigma1", d.sigma1)?;
        out.set_item("sigma_non", d.sigma_non)?;
        out.set_item("ambiguous", d.ambiguous)?;
        out.set_item("dominant", wrap(d.dominant.clone()).into_py(py))?;
        out.set_item("residual", d.residual.clone().map(|r| wrap(r).into_py(py)))?;
        Ok(out)
    }

    fn wigner_at(&self, x: f64, p: f64) -> PyRes<f64> {
        Ok(metrics::wigner_at(&self.inner, x, p)?)
    }

    /// Rows follow `x_axis`, columns `p_axis`.
    fn wigner(&self, x_axis: Vec<f64>, p_axis: Vec<f64>) -> PyRes<Vec<Vec<f64>>> {
        let g = metrics::wigner(&self.inner, &x_axis, &p_axis)?;
        Ok((0..x_axis.len())
            .map(|i| (0..p_axis.len()).map(|j| g.values[(i, j)]).collect())
            .collect())
    }

    fn apply_loss(&self, loss: f64) -> PyRes<Self> {
        Ok(wrap(channels::apply_loss(
            &self.inner,
            LossParam::new(loss)?,
        )))
    }

    fn apply_phase_noise(&self, theta: f64) -> PyRes<Self> {
        Ok(wrap(channels::apply_phase_noise(
            &self.inner,
            PhaseNoiseParam::new(theta)?,
        )))
    }

    /// Homodyne record drawn from this (truncated) state.
    #[pyo3(signature = (n, seed = 0, schedule = "linear"))]
    fn sample(&self, n: usize, seed: u64, schedule: &str) -> PyRes<PyRecord> {
        Ok(PyRecord {
            inner: homodyne::sample(&self.inner, &parse_schedule(schedule)?, n, seed)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "DensityMatrix(dim={}, purity={:.6})",
            self.inner.dim(),
            metrics::purity(&self.inner)
        )
    }
}

fn parse_schedule(name: &str) -> PyRes<PhaseSchedule> {
    match name {
        "linear" => Ok(PhaseSchedule::default()),
        "random" => Ok(PhaseSchedule::RandomUniform {
            start: 0.0,
            span: PI,
        }),
        _ => Err(
            Error::InvalidParameter(format!("unknown schedule {name:?} (linear or random)")).into(),
        ),
    }
}

/// Homodyne record of `(phase, value)` shots.
#[pyclass(name = "QuadratureRecord", module = "sqztomo", frozen)]
#[derive(Clone)]
struct PyRecord {
    inner: homodyne::QuadratureRecord,
}

#[pymethods]
impl PyRecord {
    #[new]
    fn new(pairs: Vec<(f64, f64)>) -> PyRes<Self> {
        Ok(Self {
            inner: homodyne::QuadratureRecord::from_pairs(pairs)?,
        })
    }

    /// Exact record of a degraded squeezed thermal state (no truncation).
    #[staticmethod]
    #[pyo3(signature = (sq_db, n = 2048, seed = 0, angle = 0.0, nbar = 0.0, loss = 0.0, phase_noise = 0.0, schedule = "linear"))]
    #[allow(clippy::too_many_arguments)]
    fn simulate(
        sq_db: f64,
        n: usize,
        seed: u64,
        angle: f64,
        nbar: f64,
        loss: f64,
        phase_noise: f64,
        schedule: &str,
    ) -> PyRes<Self> {
        let spec = StateSpec {
            squeezing_db: sq_db,
            angle,
            nbar,
            loss,
            phase_noise,
        };
        Ok(Self {
            inner: spec.record(&parse_schedule(schedule)?, n, seed)?,
        })
    }

    /// Reads CSV (`.csv`) or the binary container.
    #[staticmethod]
    fn load(path: PathBuf) -> PyRes<Self> {
        Ok(Self {
            inner: io::read_record_any(&path)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyRes<()> {
        if path.extension().is_some_and(|e| e == "csv") {
            io::write_record_csv(&path, &self.inner)?;
        } else {
            io::write_record(&path, &self.inner)?;
        }
        Ok(())
    }

    fn pairs(&self) -> Vec<(f64, f64)> {
        self.inner
            .points()
            .iter()
            .map(|p| (p.phase, p.value))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("QuadratureRecord(len={})", self.inner.len())
    }
}

/// Residual convolutional network with a Cholesky output head.
#[pyclass(name = "Network", module = "sqztomo", frozen)]
struct PyNetwork {
    inner: NetworkModel,
}

#[pymethods]
impl PyNetwork {
    /// Fresh weights for the `desk`, `paper-scale` or `tiny` architecture.
    #[staticmethod]
    #[pyo3(signature = (arch = "desk", dim = 12, seed = 0))]
    fn initialize(arch: &str, dim: usize, seed: u64) -> PyRes<Self> {
        let arch = match arch {
            "desk" => Architecture::desk(dim),
            "paper-scale" => Architecture::paper_scale(),
            "tiny" => Architecture::tiny(dim, homodyne::STANDARD_RECORD_LEN),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown architecture {other:?} (desk, paper-scale or tiny)"
                ))
                .into())
            }
        };
        Ok(Self {
            inner: NetworkModel::initialize(arch, seed)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyRes<Self> {
        Ok(Self {
            inner: io::read_model(&path)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyRes<()> {
        Ok(io::write_model(&path, &self.inner)?)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    /// `(rho, seconds)`.
    fn predict(&self, record: &PyRecord) -> PyRes<(PyDensityMatrix, f64)> {
        let p = self.inner.predict_density(&record.inner)?;
        Ok((wrap(p.rho), p.wall_time.as_secs_f64()))
    }
}

/// Maximum-likelihood reconstruction; returns `(rho, diagnostics)`.
#[pyfunction]
#[pyo3(signature = (record, dim = 20, max_iters = 2000, phase_bins = 20, bins = 100, dilution = 0.5))]
fn reconstruct_mle<'py>(
    py: Python<'py>,
    record: &PyRecord,
    dim: usize,
    max_iters: usize,
    phase_bins: usize,
    bins: usize,
    dilution: f64,
) -> PyResult<(PyDensityMatrix, Bound<'py, PyDict>)> {
    let cfg = MleConfig {
        dim,
        max_iters,
        phase_bins,
        bin_count: bins,
        dilution,
        ..MleConfig::default()
    };
    let out = mle_reconstruct(&record.inner, &cfg).map_err(PyErrorMap)?;
    let d = PyDict::new_bound(py);
    d.set_item("iterations", out.diagnostics.iterations)?;
    d.set_item("converged", out.diagnostics.converged)?;
    d.set_item("log_likelihood", out.diagnostics.log_likelihood)?;
    d.set_item("wall_time_ms", out.diagnostics.wall_time_ms)?;
    Ok((wrap(out.rho), d))
}

/// Measured `(sq_db, as_db)` of an ideal level after loss and jitter.
#[pyfunction]
fn predicted_levels(ideal_db: f64, loss: f64, theta: f64) -> (f64, f64) {
    channels::predicted_levels(ideal_db, loss, theta)
}

/// Orthogonal-distance fit of loss and phase noise to `(sq_db, as_db)` points.
#[pyfunction]
fn fit_degradation<'py>(py: Python<'py>, points: Vec<(f64, f64)>) -> PyResult<Bound<'py, PyDict>> {
    let pts = points
        .into_iter()
        .map(|(a, b)| LevelPoint::new(a, b))
        .collect::<Result<Vec<_>, _>>()
        .map_err(PyErrorMap)?;
    let f = degradation::fit(&pts).map_err(PyErrorMap)?;
    let d = PyDict::new_bound(py);
    d.set_item("loss", f.loss)?;
    d.set_item("theta", f.theta)?;
    d.set_item("residual_rms", f.residual_rms)?;
    d.set_item("covariance", f.covariance.map(|r| r.to_vec()).to_vec())?;
    d.set_item("converged", f.converged)?;
    Ok(d)
}

/// Module initializer (also usable with `pyo3::append_to_inittab!`).
#[pymodule]
pub fn sqztomo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add(
        "TomographyError",
        m.py().get_type_bound::<TomographyError>(),
    )?;
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PyRecord>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(reconstruct_mle, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_levels, m)?)?;
    m.add_function(wrap_pyfunction!(fit_degradation, m)?)?;
    Ok(())
}
