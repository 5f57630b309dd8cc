//! Python bindings for `tricentre`.

use num_bigint::BigUint;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use tricentre::arcs::{self, ArcLabel, ArcOptions, CollisionArc};
use tricentre::chains::{self, DEFAULT_ANGULAR_TOL};
use tricentre::dynamics::{self, EllipticState};
use tricentre::error::Error;
use tricentre::geometry::{elliptic_to_cartesian, CartesianPoint, EllipticPoint};
use tricentre::periods;
use tricentre::rational::ResonanceClass;
use tricentre::shadow::{self, ShadowOptions};
use tricentre::special;

create_exception!(tricentre_py, TricentreError, PyException);
create_exception!(tricentre_py, DomainError, TricentreError);
create_exception!(tricentre_py, UnsafeCentreError, TricentreError);
create_exception!(tricentre_py, NumericalError, TricentreError);

fn err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Domain(_) | Error::Placement(_) | Error::Range(_) | Error::Config(_) => {
            DomainError::new_err(msg)
        }
        Error::UnsafeCentre(_) => UnsafeCentreError::new_err(msg),
        Error::Singularity(_) | Error::Accuracy { .. } | Error::Integration { .. } => {
            NumericalError::new_err(msg)
        }
        _ => TricentreError::new_err(msg),
    }
}

type Row = (f64, f64, f64, f64, f64);

fn class(q: &str) -> PyResult<ResonanceClass> {
    q.parse().map_err(err)
}

#[pyfunction]
fn complete_elliptic_k(m: f64) -> PyResult<f64> {
    special::complete_elliptic_k(m).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (beta, a1, a = 1.0))]
fn period_t1(beta: f64, a1: f64, a: f64) -> PyResult<f64> {
    periods::period_t1(beta, a1, a).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (beta, a1, a = 1.0))]
fn period_t2(beta: f64, a1: f64, a: f64) -> PyResult<f64> {
    periods::period_t2(beta, a1, a).map_err(err)
}

/// Resonant `A₁` for a class `q = m/n` at fixed `β`.
#[pyclass(frozen, name = "ResonanceSolution", skip_from_py_object)]
#[derive(Clone)]
struct PyResonanceSolution(periods::ResonanceSolution);

#[pymethods]
impl PyResonanceSolution {
    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta
    }
    #[getter]
    fn q(&self) -> String {
        self.0.q.to_string()
    }
    #[getter]
    fn a1_hat(&self) -> f64 {
        self.0.a1_hat
    }
    #[getter]
    fn gap(&self) -> f64 {
        self.0.gap
    }
    #[getter]
    fn t1(&self) -> f64 {
        self.0.t1
    }
    #[getter]
    fn t2(&self) -> f64 {
        self.0.t2
    }
    #[getter]
    fn energy(&self) -> f64 {
        self.0.energy
    }
    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual
    }
    fn period(&self) -> f64 {
        self.0.period()
    }
    fn xi_plus(&self) -> PyResult<f64> {
        self.0.xi_plus().map_err(err)
    }
    fn __repr__(&self) -> String {
        format!(
            "ResonanceSolution(beta={}, q={}, a1_hat={})",
            self.0.beta, self.0.q, self.0.a1_hat
        )
    }
}

#[pyfunction]
#[pyo3(signature = (beta, q, a = 1.0, tol = 1e-13))]
fn solve_a1(beta: f64, q: &str, a: f64, tol: f64) -> PyResult<PyResonanceSolution> {
    periods::solve_a1(beta, class(q)?, a, tol)
        .map(PyResonanceSolution)
        .map_err(err)
}

#[pyclass(frozen, name = "Centre", skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyCentre(dynamics::Centre);

#[pymethods]
impl PyCentre {
    #[staticmethod]
    fn from_xy(x: f64, y: f64) -> PyResult<Self> {
        dynamics::Centre::from_cartesian(CartesianPoint::new(x, y))
            .map(Self)
            .map_err(err)
    }
    #[staticmethod]
    fn from_elliptic(xi: f64, phi: f64) -> PyResult<Self> {
        dynamics::Centre::from_elliptic(EllipticPoint::new(xi, phi))
            .map(Self)
            .map_err(err)
    }
    #[getter]
    fn xy(&self) -> (f64, f64) {
        (self.0.cartesian.x, self.0.cartesian.y)
    }
    #[getter]
    fn elliptic(&self) -> (f64, f64) {
        (self.0.elliptic.xi, self.0.elliptic.phi)
    }
    fn __repr__(&self) -> String {
        format!("Centre(x={}, y={})", self.0.cartesian.x, self.0.cartesian.y)
    }
}

/// Physical parameters, optionally with a perturbing centre of intensity `eps`.
#[pyclass(frozen, name = "Params", skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyParams(dynamics::Params);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (a, beta, a1, eps = 0.0, centre = None))]
    fn new(a: f64, beta: f64, a1: f64, eps: f64, centre: Option<&PyCentre>) -> PyResult<Self> {
        let mut p = dynamics::Params::new(a, beta, a1).map_err(err)?;
        if let Some(c) = centre {
            p = p.with_centre(c.0);
        }
        Ok(Self(p.with_eps(eps).map_err(err)?))
    }
    #[getter]
    fn a(&self) -> f64 {
        self.0.a()
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }
    #[getter]
    fn a1(&self) -> f64 {
        self.0.a1()
    }
    #[getter]
    fn eps(&self) -> f64 {
        self.0.eps()
    }
    #[getter]
    fn energy(&self) -> f64 {
        self.0.energy()
    }

    /// Regularized Hamiltonian at `(xi, phi, xi', phi')`.
    fn hamiltonian(&self, state: (f64, f64, f64, f64)) -> PyResult<f64> {
        let s = EllipticState::new(state.0, state.1, state.2, state.3);
        dynamics::regularized_hamiltonian(&s, &self.0).map_err(err)
    }

    /// Integrate for fictitious time `tau`; returns `samples + 1` rows
    /// `(tau, xi, phi, xi', phi')`.
    #[pyo3(signature = (state, tau, samples = 200, tol = 1e-12))]
    fn integrate(
        &self,
        py: Python<'_>,
        state: (f64, f64, f64, f64),
        tau: f64,
        samples: usize,
        tol: f64,
    ) -> PyResult<Vec<Row>> {
        let s0 = EllipticState::new(state.0, state.1, state.2, state.3);
        let prm = self.0;
        let rows = py
            .detach(|| {
                dynamics::integrate(&s0, &prm, tau, tol, &[]).and_then(|t| t.resample(samples))
            })
            .map_err(err)?;
        Ok(rows
            .iter()
            .map(|r| {
                (
                    r.tau,
                    r.state.point.xi,
                    r.state.point.phi,
                    r.state.xi_prime,
                    r.state.phi_prime,
                )
            })
            .collect())
    }
}

#[pyclass(frozen, name = "CollisionTest", get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyCollisionTest {
    g_plus: f64,
    g_minus: f64,
    gap_plus: f64,
    gap_minus: f64,
    s_set: Vec<String>,
    delta: f64,
    safe: bool,
}

/// Primary-collision test for a centre at fixed `β` and class `q`.
#[pyfunction]
#[pyo3(signature = (centre, beta, q, a = 1.0, delta = 1e-4))]
fn check(centre: &PyCentre, beta: f64, q: &str, a: f64, delta: f64) -> PyResult<PyCollisionTest> {
    let q = class(q)?;
    let sol = periods::solve_a1(beta, q, a, 1e-13).map_err(err)?;
    let prm = dynamics::Params::new(a, beta, sol.a1_hat)
        .map_err(err)?
        .with_class(q);
    let t = arcs::primary_collision_test(&centre.0.elliptic, &prm, delta).map_err(err)?;
    Ok(PyCollisionTest {
        g_plus: t.g_plus,
        g_minus: t.g_minus,
        gap_plus: t.gap_plus,
        gap_minus: t.gap_minus,
        s_set: t.s_set,
        delta: t.delta,
        safe: t.safe,
    })
}

#[pyfunction]
#[pyo3(signature = (beta, q, a = 1.0, fd_step = 1e-4))]
fn nondegeneracy_det(beta: f64, q: &str, a: f64, fd_step: f64) -> PyResult<(f64, bool)> {
    let c = arcs::nondegeneracy_certificate(beta, class(q)?, a, fd_step).map_err(err)?;
    Ok((c.det_j, c.passes))
}

/// An unperturbed arc from the centre back to itself.
#[pyclass(frozen, name = "CollisionArc", skip_from_py_object)]
#[derive(Clone)]
struct PyCollisionArc(CollisionArc);

#[pymethods]
impl PyCollisionArc {
    #[getter]
    fn label(&self) -> String {
        self.0.label.to_string()
    }
    #[getter]
    fn duration(&self) -> f64 {
        self.0.duration
    }
    #[getter]
    fn early_collision(&self) -> bool {
        self.0.early_collision
    }
    #[getter]
    fn min_primary_distance(&self) -> f64 {
        self.0.min_primary_distance
    }
    #[getter]
    fn departure_velocity(&self) -> [f64; 2] {
        self.0.initial_cartesian_velocity()
    }
    #[getter]
    fn arrival_velocity(&self) -> [f64; 2] {
        self.0.final_cartesian_velocity()
    }

    /// Cartesian points at `n + 1` evenly spaced fictitious times.
    #[pyo3(signature = (n = 200))]
    fn points(&self, n: usize) -> PyResult<Vec<(f64, f64)>> {
        let rows = self.0.path.resample(n).map_err(err)?;
        Ok(rows
            .iter()
            .map(|r| {
                let c = elliptic_to_cartesian(&r.state.point);
                (c.x, c.y)
            })
            .collect())
    }
    fn __repr__(&self) -> String {
        format!(
            "CollisionArc({}, duration={})",
            self.0.label, self.0.duration
        )
    }
}

#[pyclass(frozen, name = "ArcFamily", skip_from_py_object)]
struct PyArcFamily(arcs::ArcFamily);

#[pymethods]
impl PyArcFamily {
    #[getter]
    fn solution(&self) -> PyResonanceSolution {
        PyResonanceSolution(self.0.solution)
    }
    #[getter]
    fn safe(&self) -> bool {
        self.0.test.safe
    }
    #[getter]
    fn arcs(&self) -> Vec<PyCollisionArc> {
        self.0.arcs.iter().cloned().map(PyCollisionArc).collect()
    }
}

#[pyfunction]
#[pyo3(signature = (centre, beta, q, a = 1.0))]
fn arc_family(
    py: Python<'_>,
    centre: &PyCentre,
    beta: f64,
    q: &str,
    a: f64,
) -> PyResult<PyArcFamily> {
    let q = class(q)?;
    let base = dynamics::Params::new(a, beta, 0.5 / (1.0 + beta)).map_err(err)?;
    let c = centre.0;
    py.detach(|| arcs::arc_family(&c, &base, q, &ArcOptions::default()))
        .map(PyArcFamily)
        .map_err(err)
}

/// Direction-change graph between collision arcs.
#[pyclass(frozen, name = "ChainGraph", skip_from_py_object)]
struct PyChainGraph(chains::ChainGraph);

#[pymethods]
impl PyChainGraph {
    #[staticmethod]
    #[pyo3(signature = (arcs, angular_tol = DEFAULT_ANGULAR_TOL))]
    fn from_arcs(arcs: Vec<PyRef<'_, PyCollisionArc>>, angular_tol: f64) -> Self {
        let arcs: Vec<CollisionArc> = arcs.iter().map(|a| a.0.clone()).collect();
        Self(chains::build_graph(&arcs, angular_tol))
    }

    /// A graph with anonymous class-1 nodes, for purely combinatorial use.
    #[staticmethod]
    fn from_adjacency(adjacency: Vec<Vec<bool>>) -> PyResult<Self> {
        let q = ResonanceClass::new(1, 1).map_err(err)?;
        let nodes = (0..adjacency.len())
            .map(|_| ArcLabel {
                q,
                sign: 1,
                direction: 1,
            })
            .collect();
        chains::ChainGraph::from_adjacency(nodes, adjacency)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.0.nodes.iter().map(|l| l.to_string()).collect()
    }
    #[getter]
    fn adjacency(&self) -> Vec<Vec<bool>> {
        self.0.adjacency.clone()
    }
    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Number of periodic chains of length `n`, as an exact integer.
    fn count(&self, n: u32) -> PyResult<BigUint> {
        chains::count_periodic_chains(&self.0, n).map_err(err)
    }

    /// `(entropy, spectral_radius, nilpotent)`.
    fn entropy(&self) -> PyResult<(f64, f64, bool)> {
        let e = chains::entropy_estimate(&self.0).map_err(err)?;
        Ok((e.value, e.spectral_radius, e.nilpotent))
    }

    /// Node indices of a chain of length `length` following the class word.
    fn chain(&self, word: Vec<String>, length: usize) -> PyResult<Vec<usize>> {
        let word = word
            .iter()
            .map(|q| class(q))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(chains::enumerate_chains(&self.0, &word, length)
            .map_err(err)?
            .indices)
    }
}

#[pyclass(frozen, name = "ShadowResult", skip_from_py_object)]
#[derive(Clone)]
struct PyShadowResult(shadow::ShadowResult);

#[pymethods]
impl PyShadowResult {
    #[getter]
    fn label(&self) -> String {
        self.0.label.to_string()
    }
    #[getter]
    fn eps(&self) -> f64 {
        self.0.eps
    }
    #[getter]
    fn max_deviation(&self) -> f64 {
        self.0.max_deviation
    }
    #[getter]
    fn min_c_distance(&self) -> f64 {
        self.0.min_c_distance
    }
    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }
    #[getter]
    fn energy_error(&self) -> f64 {
        self.0.energy_error
    }
}

/// Shoot the perturbed segment shadowing `arc` at intensity `eps`.
#[pyfunction]
#[pyo3(signature = (arc, eps, entry_radius = None))]
fn shoot_segment(
    py: Python<'_>,
    arc: &PyCollisionArc,
    eps: f64,
    entry_radius: Option<f64>,
) -> PyResult<PyShadowResult> {
    let r = entry_radius.unwrap_or_else(|| shadow::default_entry_radius(eps));
    let arc = &arc.0;
    py.detach(|| shadow::shoot_segment(arc, eps, r, &ShadowOptions::default()))
        .map(PyShadowResult)
        .map_err(err)
}

#[pyfunction]
fn local_expansion_rate(results: Vec<PyRef<'_, PyShadowResult>>, eps: f64) -> PyResult<f64> {
    let rs: Vec<shadow::ShadowResult> = results.iter().map(|r| r.0.clone()).collect();
    shadow::local_expansion_rate(&rs, eps).map_err(err)
}

#[pymodule]
fn tricentre_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("TricentreError", py.get_type::<TricentreError>())?;
    m.add("DomainError", py.get_type::<DomainError>())?;
    m.add("UnsafeCentreError", py.get_type::<UnsafeCentreError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add_class::<PyResonanceSolution>()?;
    m.add_class::<PyCentre>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyCollisionTest>()?;
    m.add_class::<PyCollisionArc>()?;
    m.add_class::<PyArcFamily>()?;
    m.add_class::<PyChainGraph>()?;
    m.add_class::<PyShadowResult>()?;
    m.add_function(wrap_pyfunction!(complete_elliptic_k, m)?)?;
    m.add_function(wrap_pyfunction!(period_t1, m)?)?;
    m.add_function(wrap_pyfunction!(period_t2, m)?)?;
    m.add_function(wrap_pyfunction!(solve_a1, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(nondegeneracy_det, m)?)?;
    m.add_function(wrap_pyfunction!(arc_family, m)?)?;
    m.add_function(wrap_pyfunction!(shoot_segment, m)?)?;
    m.add_function(wrap_pyfunction!(local_expansion_rate, m)?)?;
    Ok(())
}
