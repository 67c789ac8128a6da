//! Python bindings: operators of the two trace algebras, Hilbert complexes,
//! morphisms with mapping cones, Morse/anomaly machinery, the circle
//! quantities and the seeded verification suite.
//!
//! Matrices cross the boundary as nested lists of Python complex numbers;
//! whole objects can also round-trip through the JSON file formats.

use std::collections::BTreeMap;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use torsionlab::circle;
use torsionlab::cone;
use torsionlab::error::TorsionError;
use torsionlab::io;
use torsionlab::morse;
use torsionlab::operator::{self, AlgebraTag, CMat};
use torsionlab::verify;
use torsionlab::HilbertComplex;

fn err(e: TorsionError) -> PyErr {
    match e {
        TorsionError::InvalidInput(_)
        | TorsionError::DimensionMismatch(_)
        | TorsionError::AlgebraMismatch(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

type Rows = Vec<Vec<Complex64>>;

fn to_cmat(rows: &Rows) -> PyResult<CMat> {
    let cols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows have inconsistent lengths"));
    }
    Ok(CMat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn from_cmat(m: &CMat) -> Rows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn algebra_tag(name: &str) -> PyResult<AlgebraTag> {
    match name {
        "scalar" => Ok(AlgebraTag::Scalar),
        "circle_fibered" => Ok(AlgebraTag::CircleFibered),
        _ => Err(PyValueError::new_err(format!(
            "unknown algebra {name:?} (expected \"scalar\" or \"circle_fibered\")"
        ))),
    }
}

/// Element of one of the two trace algebras: a scalar matrix or a
/// circle-fibered operator.
#[pyclass(name = "Operator", from_py_object)]
#[derive(Clone)]
struct PyOperator {
    inner: operator::Operator,
}

#[pymethods]
impl PyOperator {
    /// Scalar operator from a nested list of complex entries.
    #[staticmethod]
    fn scalar(rows: Rows) -> PyResult<PyOperator> {
        Ok(PyOperator {
            inner: operator::Operator::scalar(to_cmat(&rows)?),
        })
    }

    /// Circle-fibered operator from Fourier modes {n: matrix}.
    #[staticmethod]
    fn trig_poly(modes: BTreeMap<i64, Rows>) -> PyResult<PyOperator> {
        let terms: PyResult<Vec<(i64, CMat)>> = modes
            .iter()
            .map(|(&n, rows)| Ok((n, to_cmat(rows)?)))
            .collect();
        let terms = terms?;
        let (r, c) = terms
            .first()
            .map(|(_, m)| (m.nrows(), m.ncols()))
            .ok_or_else(|| PyValueError::new_err("no Fourier modes"))?;
        Ok(PyOperator {
            inner: operator::Operator::trig_poly(r, c, terms).map_err(err)?,
        })
    }

    /// Circle-fibered operator from fibers sampled at midpoints (j+1/2)/N.
    #[staticmethod]
    fn sampled(fibers: Vec<Rows>) -> PyResult<PyOperator> {
        let parsed: PyResult<Vec<CMat>> = fibers.iter().map(to_cmat).collect();
        Ok(PyOperator {
            inner: operator::Operator::sampled(parsed?).map_err(err)?,
        })
    }

    #[staticmethod]
    fn identity(algebra: &str, dim: usize) -> PyResult<PyOperator> {
        Ok(PyOperator {
            inner: operator::Operator::identity(algebra_tag(algebra)?, dim),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<PyOperator> {
        Ok(PyOperator {
            inner: io::parse_operator(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&io::operator_to_value(&self.inner)).unwrap()
    }

    #[getter]
    fn algebra(&self) -> &'static str {
        io::algebra_to_str(self.inner.algebra())
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    /// Fiber at circle parameter t as a nested list (the matrix itself for
    /// scalar operators).
    fn fiber_at(&self, t: f64) -> Rows {
        from_cmat(&self.inner.fiber_at(t))
    }

    fn adjoint(&self) -> PyOperator {
        PyOperator {
            inner: self.inner.adjoint(),
        }
    }

    fn compose(&self, other: &PyOperator) -> PyResult<PyOperator> {
        Ok(PyOperator {
            inner: self.inner.compose(&other.inner).map_err(err)?,
        })
    }

    fn add(&self, other: &PyOperator) -> PyResult<PyOperator> {
        Ok(PyOperator {
            inner: self.inner.add(&other.inner).map_err(err)?,
        })
    }

    fn scale(&self, factor: Complex64) -> PyOperator {
        PyOperator {
            inner: self.inner.scale(factor),
        }
    }

    fn inverse(&self) -> PyResult<PyOperator> {
        Ok(PyOperator {
            inner: self.inner.inverse().map_err(err)?,
        })
    }

    fn op_norm(&self) -> f64 {
        self.inner.op_norm()
    }

    /// Normalized von Neumann trace.
    fn vn_trace(&self) -> PyResult<Complex64> {
        operator::vn_trace(&self.inner).map_err(err)
    }

    /// Fuglede-Kadison log-determinant.
    fn fk_log_det(&self) -> PyResult<f64> {
        operator::fk_log_det(&self.inner).map_err(err)
    }

    /// Spectral density F(lambda) of |self| on the given grid.
    fn spectral_density(&self, grid: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(operator::spectral_density(&self.inner, &grid)
            .map_err(err)?
            .values)
    }

    /// Determinant-class verdict as a dict.
    fn det_class(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let verdict =
            operator::determinant_class_check(&self.inner, &operator::default_epsilon_sequence());
        json_to_py(py, &serde_json::to_value(&verdict).unwrap())
    }

    fn __repr__(&self) -> String {
        format!(
            "Operator({}, {}x{})",
            io::algebra_to_str(self.inner.algebra()),
            self.inner.rows(),
            self.inner.cols()
        )
    }
}

/// Finite cochain complex of Hilbert modules.
#[pyclass(name = "Complex", from_py_object)]
#[derive(Clone)]
struct PyComplex {
    inner: HilbertComplex,
}

#[pymethods]
impl PyComplex {
    #[new]
    fn new(algebra: &str, dims: Vec<usize>, differentials: Vec<PyOperator>) -> PyResult<PyComplex> {
        let diffs = differentials.into_iter().map(|d| d.inner).collect();
        Ok(PyComplex {
            inner: HilbertComplex::new(algebra_tag(algebra)?, dims, diffs).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<PyComplex> {
        Ok(PyComplex {
            inner: io::parse_complex(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&io::complex_to_value(&self.inner)).unwrap()
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    #[getter]
    fn euler_characteristic(&self) -> i64 {
        self.inner.euler_characteristic()
    }

    fn differential(&self, q: usize) -> PyOperator {
        PyOperator {
            inner: self.inner.differential(q),
        }
    }

    fn log_torsion(&self) -> PyResult<f64> {
        self.inner.log_torsion().map_err(err)
    }

    fn is_acyclic(&self, tol: f64) -> PyResult<bool> {
        self.inner.is_acyclic(tol).map_err(err)
    }

    fn reduced_betti(&self, q: usize) -> PyResult<f64> {
        self.inner.reduced_betti(q).map_err(err)
    }

    fn dual(&self) -> PyResult<PyComplex> {
        Ok(PyComplex {
            inner: self.inner.dual().map_err(err)?,
        })
    }

    fn suspension(&self) -> PyResult<PyComplex> {
        Ok(PyComplex {
            inner: self.inner.suspension().map_err(err)?,
        })
    }

    fn direct_sum(&self, other: &PyComplex) -> PyResult<PyComplex> {
        Ok(PyComplex {
            inner: self.inner.direct_sum(&other.inner).map_err(err)?,
        })
    }

    fn tensor_product(&self, other: &PyComplex) -> PyResult<PyComplex> {
        Ok(PyComplex {
            inner: self.inner.tensor_product(&other.inner).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Complex({}, dims={:?})",
            io::algebra_to_str(self.inner.algebra()),
            self.inner.dims()
        )
    }
}

/// Morphism of complexes with its mapping cone and relative torsion.
#[pyclass(name = "Morphism", from_py_object)]
#[derive(Clone)]
struct PyMorphism {
    inner: cone::ComplexMorphism,
}

#[pymethods]
impl PyMorphism {
    #[new]
    fn new(source: PyComplex, target: PyComplex, components: Vec<PyOperator>) -> PyResult<PyMorphism> {
        let comps = components.into_iter().map(|c| c.inner).collect();
        Ok(PyMorphism {
            inner: cone::ComplexMorphism::new(source.inner, target.inner, comps).map_err(err)?,
        })
    }

    #[staticmethod]
    fn identity(complex: &PyComplex) -> PyMorphism {
        PyMorphism {
            inner: cone::ComplexMorphism::identity(&complex.inner),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<PyMorphism> {
        Ok(PyMorphism {
            inner: io::parse_morphism(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&io::morphism_to_value(&self.inner)).unwrap()
    }

    fn mapping_cone(&self) -> PyResult<PyComplex> {
        Ok(PyComplex {
            inner: self.inner.mapping_cone().map_err(err)?,
        })
    }

    fn relative_torsion(&self) -> PyResult<f64> {
        self.inner.relative_torsion().map_err(err)
    }

    fn compose(&self, inner: &PyMorphism) -> PyResult<PyMorphism> {
        Ok(PyMorphism {
            inner: self.inner.compose(&inner.inner).map_err(err)?,
        })
    }

    /// Residual of the alternating log-volume formula for the cone torsion.
    fn cone_volume_residual(&self) -> PyResult<f64> {
        Ok(cone::check_cone_volume_formula(&self.inner)
            .map_err(err)?
            .residual)
    }
}

/// Critical points and incidences of a Morse function, with the group words
/// of the attaching paths.
#[pyclass(name = "MorseDatum", from_py_object)]
#[derive(Clone)]
struct PyMorseDatum {
    inner: morse::MorseDatum,
}

#[pymethods]
impl PyMorseDatum {
    /// Circle datum from alternating minimum / maximum positions in [0,1).
    #[staticmethod]
    fn circle(mins: Vec<f64>, maxs: Vec<f64>) -> PyResult<PyMorseDatum> {
        Ok(PyMorseDatum {
            inner: morse::MorseDatum::circle(&mins, &maxs).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<PyMorseDatum> {
        Ok(PyMorseDatum {
            inner: io::parse_morse(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&io::morse_to_value(&self.inner)).unwrap()
    }

    #[getter]
    fn counts(&self) -> Vec<usize> {
        self.inner.counts()
    }

    fn dual(&self) -> PyMorseDatum {
        PyMorseDatum {
            inner: self.inner.dual(),
        }
    }
}

/// Representation of the fundamental group by invertible operators.
#[pyclass(name = "Representation", from_py_object)]
#[derive(Clone)]
struct PyRepresentation {
    inner: morse::Representation,
}

#[pymethods]
impl PyRepresentation {
    #[new]
    fn new(generators: BTreeMap<String, PyOperator>) -> PyResult<PyRepresentation> {
        let gens = generators.into_iter().map(|(k, v)| (k, v.inner)).collect();
        Ok(PyRepresentation {
            inner: morse::Representation::new(gens).map_err(err)?,
        })
    }

    /// One-dimensional scalar representation sending the circle generator
    /// to the complex number a.
    #[staticmethod]
    fn scalar_holonomy(a: Complex64) -> PyRepresentation {
        PyRepresentation {
            inner: morse::Representation::scalar_holonomy(a),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<PyRepresentation> {
        Ok(PyRepresentation {
            inner: io::parse_representation(text).map_err(err)?,
        })
    }
}

/// Hermitian structure on the flat bundle, sampled on a uniform grid.
#[pyclass(name = "HermitianStructure", from_py_object)]
#[derive(Clone)]
struct PyHermitianStructure {
    inner: morse::HermitianStructure,
}

#[pymethods]
impl PyHermitianStructure {
    /// From samples at k/n (k = 0..=n) and the holonomy matrix H, subject
    /// to the seam relation mu(1) = H^{-*} mu(0) H^{-1}.
    #[staticmethod]
    fn from_samples(values: Vec<Rows>, holonomy: Rows) -> PyResult<PyHermitianStructure> {
        let parsed: PyResult<Vec<CMat>> = values.iter().map(to_cmat).collect();
        Ok(PyHermitianStructure {
            inner: morse::HermitianStructure::from_samples(parsed?, to_cmat(&holonomy)?)
                .map_err(err)?,
        })
    }

    #[staticmethod]
    fn constant_identity(dim: usize) -> PyHermitianStructure {
        PyHermitianStructure {
            inner: morse::HermitianStructure::constant_identity(dim),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<PyHermitianStructure> {
        Ok(PyHermitianStructure {
            inner: io::parse_hermitian(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&io::hermitian_to_value(&self.inner)).unwrap()
    }

    fn at(&self, t: f64) -> Rows {
        from_cmat(&self.inner.at(t))
    }
}

/// Combinatorial complex of a Morse datum and representation, optionally
/// weighted by a Hermitian structure.
#[pyfunction]
#[pyo3(signature = (datum, rho, mu=None))]
fn build_complex(
    datum: &PyMorseDatum,
    rho: &PyRepresentation,
    mu: Option<&PyHermitianStructure>,
) -> PyResult<PyComplex> {
    Ok(PyComplex {
        inner: morse::build_complex(&datum.inner, &rho.inner, mu.map(|m| &m.inner))
            .map_err(err)?,
    })
}

/// Change of combinatorial torsion under a change of Hermitian structure,
/// compared against the alternating sum of the V volumes.
#[pyfunction]
fn hermitian_anomaly_check(
    py: Python<'_>,
    datum: &PyMorseDatum,
    rho: &PyRepresentation,
    mu1: &PyHermitianStructure,
    mu2: &PyHermitianStructure,
) -> PyResult<Py<PyAny>> {
    let report = morse::hermitian_anomaly_check(&datum.inner, &rho.inner, &mu1.inner, &mu2.inner)
        .map_err(err)?;
    let value = serde_json::json!({
        "torsion_difference": report.torsion_difference,
        "alternating_v_sum": report.alternating_v_sum,
        "residual": report.residual,
    });
    json_to_py(py, &value)
}

/// Change of combinatorial torsion under a change of circle triangulation,
/// compared against the expansion-volume cocycle omega.
#[pyfunction]
fn subdivision_check(
    py: Python<'_>,
    tau1: &PyMorseDatum,
    tau2: &PyMorseDatum,
    rho: &PyRepresentation,
    mu: &PyHermitianStructure,
) -> PyResult<Py<PyAny>> {
    let report = morse::subdivision_check(&tau1.inner, &tau2.inner, &rho.inner, &mu.inner)
        .map_err(err)?;
    let value = serde_json::json!({
        "torsion_tau1": report.torsion_tau1,
        "torsion_tau2": report.torsion_tau2,
        "omega": report.omega,
        "residual": report.residual,
        "cone_residual": report.cone_residual,
    });
    json_to_py(py, &value)
}

/// Zeta-regularized determinant of the twisted Laplacian on the circle;
/// equals 4 sin^2(pi theta).
#[pyfunction]
fn zeta_det_circle(theta: f64) -> PyResult<f64> {
    circle::zeta_det_circle(theta).map_err(err)
}

/// Analytic minus combinatorial torsion for a unitary twist; vanishes.
#[pyfunction]
fn relative_torsion_circle_unitary(theta: f64) -> PyResult<f64> {
    circle::relative_torsion_circle_unitary(theta).map_err(err)
}

/// Spectrum of the Witten-deformed 0-form Laplacian on the circle.
#[pyfunction]
fn witten_spectrum_circle(py: Python<'_>, t: f64, n: usize) -> PyResult<Py<PyAny>> {
    let report = circle::witten_spectrum_circle(t, n).map_err(err)?;
    let value = serde_json::json!({
        "eigenvalues": report.eigenvalues,
        "count_small": report.count_small,
        "gap_ratio": report.gap_ratio,
    });
    json_to_py(py, &value)
}

/// Right-hand side of the circle invariant for the given holonomy; equals
/// -(1/2) fk_log_det(holonomy).
#[pyfunction]
fn euler_invariant_circle(py: Python<'_>, holonomy: &PyOperator) -> PyResult<Py<PyAny>> {
    let spec = circle::CircleBundleSpec::new(holonomy.inner.clone()).map_err(err)?;
    let rhs = circle::theorem01_rhs_circle(&spec, &circle::AdmissibleStructure::default())
        .map_err(err)?;
    json_to_py(py, &serde_json::to_value(&rhs).unwrap())
}

/// Invariant of a product bundle with Euler characteristic chi_n.
#[pyfunction]
fn euler_invariant_product(holonomy: &PyOperator, chi_n: i64) -> PyResult<f64> {
    circle::euler_invariant_product(&holonomy.inner, chi_n).map_err(err)
}

/// Seeded random acyclic complex with a construction-time torsion oracle;
/// returns (complex, expected_log_torsion).
#[pyfunction]
fn random_acyclic_complex(
    algebra: &str,
    dims: Vec<usize>,
    seed: u64,
) -> PyResult<(PyComplex, f64)> {
    let built = torsionlab::gen::random_acyclic_complex(algebra_tag(algebra)?, &dims, seed);
    Ok((
        PyComplex {
            inner: built.complex,
        },
        built.expected_log_torsion,
    ))
}

/// Run the full property suite; returns a list of check dicts.
#[pyfunction]
#[pyo3(signature = (seed=7, size="smoke"))]
fn verify_all(py: Python<'_>, seed: u64, size: &str) -> PyResult<Py<PyAny>> {
    let profile = verify::SizeProfile::from_name(size)
        .ok_or_else(|| PyValueError::new_err(format!("unknown size profile {size:?}")))?;
    let results = verify::run_all(seed, profile);
    json_to_py(py, &serde_json::to_value(&results).unwrap())
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use pyo3::types::{PyDict, PyList};
    use pyo3::IntoPyObjectExt;
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_py_any(py)?,
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)?
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)?
            }
        }
        serde_json::Value::String(s) => s.into_py_any(py)?,
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py_any(py)?
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_py_any(py)?
        }
    })
}

#[pymodule]
fn torsionlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOperator>()?;
    m.add_class::<PyComplex>()?;
    m.add_class::<PyMorphism>()?;
    m.add_class::<PyMorseDatum>()?;
    m.add_class::<PyRepresentation>()?;
    m.add_class::<PyHermitianStructure>()?;
    m.add_function(wrap_pyfunction!(build_complex, m)?)?;
    m.add_function(wrap_pyfunction!(hermitian_anomaly_check, m)?)?;
    m.add_function(wrap_pyfunction!(subdivision_check, m)?)?;
    m.add_function(wrap_pyfunction!(zeta_det_circle, m)?)?;
    m.add_function(wrap_pyfunction!(relative_torsion_circle_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(witten_spectrum_circle, m)?)?;
    m.add_function(wrap_pyfunction!(euler_invariant_circle, m)?)?;
    m.add_function(wrap_pyfunction!(euler_invariant_product, m)?)?;
    m.add_function(wrap_pyfunction!(random_acyclic_complex, m)?)?;
    m.add_function(wrap_pyfunction!(verify_all, m)?)?;
    Ok(())
}
