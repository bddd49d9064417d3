//! Python bindings. Matrices cross the boundary as lists of rows of
//! `complex`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use skewdirac::continuous::{
    decay_profile, solve_inverse_continuous, ContinuousPotential as CorePotential, DEFAULT_SAMPLES,
};
use skewdirac::discrete::{asymptotics_check, c_sequence, default_k, reduce_fully, solve_inverse_discrete};
use skewdirac::quadruple::{recover as core_recover, AdmissibleQuadruple, Quadruple as CoreQuadruple};
use skewdirac::stability::{run_sweep as core_sweep, SweepConfig};
use skewdirac::verify::{weyl_defect_continuous, weyl_defect_discrete, WeylDefectReport, DEFAULT_STEP};
use skewdirac::{CMatrix, Convention, Realization as CoreRealization, C64};

create_exception!(
    skewdirac_py,
    SkewDiracError,
    PyException,
    "Raised when a computation is refused or fails."
);

type Rows = Vec<Vec<C64>>;

fn err(e: skewdirac::Error) -> PyErr {
    SkewDiracError::new_err(e.to_string())
}

fn to_matrix(rows: Rows, what: &str) -> PyResult<CMatrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(SkewDiracError::new_err(format!("{what}: rows differ in length")));
    }
    let n = rows.len();
    CMatrix::from_vec(n, cols, rows.into_iter().flatten().collect()).map_err(err)
}

fn to_rows(m: &CMatrix) -> Rows {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn convention(s: &str) -> PyResult<Convention> {
    match s {
        "continuous" => Ok(Convention::Continuous),
        "discrete" => Ok(Convention::Discrete),
        _ => Err(SkewDiracError::new_err(format!(
            "convention must be 'continuous' or 'discrete', got '{s}'"
        ))),
    }
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| SkewDiracError::new_err(e.to_string()))
}

#[pyclass(frozen)]
pub struct Realization {
    inner: CoreRealization,
}

#[pymethods]
impl Realization {
    /// `Realization(convention, A, B, C)` with `φ(z) = C(zI − A)⁻¹B`.
    #[new]
    fn new(convention_name: &str, a: Rows, b: Rows, c: Rows) -> PyResult<Self> {
        let inner = CoreRealization::new(
            convention(convention_name)?,
            to_matrix(a, "A")?,
            to_matrix(b, "B")?,
            to_matrix(c, "C")?,
        )
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: from_json(text)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        skewdirac::io::to_json(&self.inner).map_err(err)
    }

    #[getter]
    fn convention(&self) -> &'static str {
        match self.inner.convention() {
            Convention::Continuous => "continuous",
            Convention::Discrete => "discrete",
        }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m1(&self) -> usize {
        self.inner.m1()
    }

    #[getter]
    fn m2(&self) -> usize {
        self.inner.m2()
    }

    fn evaluate(&self, z: C64) -> PyResult<Rows> {
        Ok(to_rows(&self.inner.evaluate(z).map_err(err)?))
    }

    fn is_minimal(&self) -> bool {
        self.inner.is_minimal()
    }

    fn probe_points(&self) -> Vec<C64> {
        self.inner.probe_points()
    }

    fn __repr__(&self) -> String {
        format!(
            "Realization({}, n={}, m1={}, m2={})",
            self.convention(),
            self.inner.n(),
            self.inner.m1(),
            self.inner.m2()
        )
    }
}

#[pyclass(frozen)]
pub struct Quadruple {
    inner: AdmissibleQuadruple,
}

#[pymethods]
impl Quadruple {
    /// `Quadruple(alpha, S0, theta1, theta2)`; checked for admissibility.
    #[new]
    fn new(alpha: Rows, s0: Rows, theta1: Rows, theta2: Rows) -> PyResult<Self> {
        let q = CoreQuadruple::new(
            to_matrix(alpha, "alpha")?,
            to_matrix(s0, "S0")?,
            to_matrix(theta1, "theta1")?,
            to_matrix(theta2, "theta2")?,
        )
        .map_err(err)?;
        Ok(Self {
            inner: AdmissibleQuadruple::new(q).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let q: CoreQuadruple = from_json(text)?;
        Ok(Self {
            inner: AdmissibleQuadruple::new(q).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        skewdirac::io::to_json(self.inner.quadruple()).map_err(err)
    }

    #[getter]
    fn alpha(&self) -> Rows {
        to_rows(&self.inner.alpha)
    }

    #[getter(S0)]
    fn s0(&self) -> Rows {
        to_rows(&self.inner.s0)
    }

    #[getter]
    fn theta1(&self) -> Rows {
        to_rows(&self.inner.theta1)
    }

    #[getter]
    fn theta2(&self) -> Rows {
        to_rows(&self.inner.theta2)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// `‖αS0 − S0α* − iΛΛ*‖`.
    fn identity_residual(&self) -> f64 {
        self.inner.identity_residual()
    }

    /// Fully reduced copy (drops uncontrollable parts of `{α, ϑ1}` and `{α, ϑ2}`).
    fn reduced(&self) -> PyResult<Quadruple> {
        let t = reduce_fully(&self.inner).map_err(err)?;
        Ok(Quadruple { inner: t.quadruple })
    }

    fn __repr__(&self) -> String {
        format!(
            "Quadruple(n={}, m1={}, m2={})",
            self.inner.n(),
            self.inner.m1(),
            self.inner.m2()
        )
    }
}

/// Verdict and ratio of a Weyl defect check.
#[pyclass(frozen, get_all)]
pub struct DefectReport {
    pub verdict: String,
    pub ratio: f64,
    pub first_half: f64,
    pub second_half: f64,
    pub m_bound: f64,
    pub step_error: f64,
}

impl From<WeylDefectReport> for DefectReport {
    fn from(r: WeylDefectReport) -> Self {
        Self {
            verdict: serde_json::to_value(r.verdict)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
            ratio: r.ratio,
            first_half: r.first_half,
            second_half: r.second_half,
            m_bound: r.m_bound,
            step_error: r.step_error,
        }
    }
}

#[pyclass(frozen)]
pub struct ContinuousPotential {
    inner: CorePotential,
}

#[pymethods]
impl ContinuousPotential {
    #[staticmethod]
    fn from_quadruple(q: &Quadruple) -> PyResult<Self> {
        Ok(Self {
            inner: CorePotential::from_quadruple(q.inner.clone()).map_err(err)?,
        })
    }

    #[getter]
    fn quadruple(&self) -> Quadruple {
        Quadruple {
            inner: self.inner.quadruple.clone(),
        }
    }

    #[getter]
    fn x_max(&self) -> f64 {
        self.inner.x_max
    }

    /// sup ‖v‖ over the default grid.
    #[getter]
    fn bound(&self) -> f64 {
        self.inner.bound
    }

    #[getter]
    fn weyl_mismatch(&self) -> f64 {
        self.inner.weyl_mismatch
    }

    fn at(&self, x: f64) -> PyResult<Rows> {
        Ok(to_rows(&self.inner.at(x).map_err(err)?))
    }

    fn on_grid(&self, xs: Vec<f64>) -> PyResult<Vec<Rows>> {
        Ok(self.inner.on_grid(&xs).map_err(err)?.iter().map(to_rows).collect())
    }

    fn weyl(&self, z: C64) -> PyResult<Rows> {
        Ok(to_rows(&self.inner.weyl(z).map_err(err)?))
    }

    /// `(‖v(x_max)‖ < 1e−3‖v(0)‖, weight decreasing over the final half)`.
    fn decay(&self) -> PyResult<(bool, bool)> {
        let d = decay_profile(&self.inner, self.inner.x_max, DEFAULT_SAMPLES).map_err(err)?;
        Ok((d.v_decayed(), d.w_decreasing_tail()))
    }

    #[pyo3(signature = (phi, z, length=None, step=DEFAULT_STEP))]
    fn weyl_defect(&self, phi: Rows, z: C64, length: Option<f64>, step: f64) -> PyResult<DefectReport> {
        let phi = to_matrix(phi, "phi")?;
        Ok(weyl_defect_continuous(&self.inner, &phi, z, length, step)
            .map_err(err)?
            .into())
    }
}

#[pyclass(frozen)]
pub struct DiscretePotential {
    inner: skewdirac::discrete::DiscretePotential,
}

#[pymethods]
impl DiscretePotential {
    #[staticmethod]
    #[pyo3(signature = (q, k=None))]
    fn from_quadruple(q: &Quadruple, k: Option<usize>) -> PyResult<Self> {
        let k = k.unwrap_or_else(|| default_k(q.inner.n()));
        Ok(Self {
            inner: c_sequence(&q.inner, k, false).map_err(err)?,
        })
    }

    #[getter]
    fn quadruple(&self) -> Quadruple {
        Quadruple {
            inner: self.inner.quadruple.clone(),
        }
    }

    /// `C_0, …, C_{K−1}`.
    #[getter]
    fn c(&self) -> Vec<Rows> {
        self.inner.c.iter().map(to_rows).collect()
    }

    #[getter(K)]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn weyl_mismatch(&self) -> f64 {
        self.inner.weyl_mismatch
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// Hermitian, involutive, signature `(m1, m2)` within tolerance.
    fn invariants_ok(&self) -> bool {
        self.inner.invariants.ok
    }

    /// `λ_min(R_k)` for each k.
    #[getter]
    fn r_lambda_min(&self) -> Vec<f64> {
        self.inner.r_lambda_min.clone()
    }

    /// `‖C_k − j‖` for each k.
    fn distance_to_j(&self) -> Vec<f64> {
        asymptotics_check(&self.inner).distance
    }

    fn weyl(&self, z: C64) -> PyResult<Rows> {
        Ok(to_rows(&self.inner.weyl(z).map_err(err)?))
    }

    #[pyo3(signature = (phi, z, steps=None))]
    fn weyl_defect(&self, phi: Rows, z: C64, steps: Option<usize>) -> PyResult<DefectReport> {
        let phi = to_matrix(phi, "phi")?;
        Ok(weyl_defect_discrete(&self.inner, &phi, z, steps).map_err(err)?.into())
    }
}

/// `(X, quadruple)` from the maximal positive Riccati solution.
#[pyfunction]
fn recover(r: &Realization) -> PyResult<(Rows, Quadruple)> {
    let (sol, q) = core_recover(&r.inner).map_err(err)?;
    Ok((to_rows(&sol.x), Quadruple { inner: q }))
}

#[pyfunction]
fn invert_continuous(r: &Realization) -> PyResult<ContinuousPotential> {
    Ok(ContinuousPotential {
        inner: solve_inverse_continuous(&r.inner).map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (r, k=None))]
fn invert_discrete(r: &Realization, k: Option<usize>) -> PyResult<DiscretePotential> {
    let k = k.unwrap_or_else(|| default_k(r.inner.n()));
    Ok(DiscretePotential {
        inner: solve_inverse_discrete(&r.inner, k).map_err(err)?,
    })
}

/// Sweep from a configuration JSON string; returns the summary as JSON.
#[pyfunction]
fn run_sweep(config: &str) -> PyResult<String> {
    let cfg: SweepConfig = from_json(config)?;
    let result = core_sweep(&cfg).map_err(err)?;
    skewdirac::io::to_json(&result).map_err(err)
}

/// `(name, deviation, tolerance, pass, error)` per case.
#[pyfunction]
fn run_corpus(dir: PathBuf) -> PyResult<Vec<(String, f64, f64, bool, Option<String>)>> {
    let rows = skewdirac::corpus::run_corpus(&dir).map_err(err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.name, r.deviation, r.tolerance, r.pass, r.error))
        .collect())
}

#[pymodule]
fn skewdirac_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SkewDiracError", m.py().get_type::<SkewDiracError>())?;
    m.add_class::<Realization>()?;
    m.add_class::<Quadruple>()?;
    m.add_class::<ContinuousPotential>()?;
    m.add_class::<DiscretePotential>()?;
    m.add_class::<DefectReport>()?;
    m.add_function(wrap_pyfunction!(recover, m)?)?;
    m.add_function(wrap_pyfunction!(invert_continuous, m)?)?;
    m.add_function(wrap_pyfunction!(invert_discrete, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_corpus, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let rows = vec![
            vec![C64::new(1.0, 2.0), C64::new(0.0, -1.0)],
            vec![C64::new(3.0, 0.0), C64::new(4.0, 5.0)],
        ];
        let m = to_matrix(rows.clone(), "m").unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(to_rows(&m), rows);
    }

    #[test]
    fn empty_rows() {
        assert_eq!(to_matrix(Vec::new(), "m").unwrap().shape(), (0, 0));
    }
}
