//! Python bindings: lattices, drive schedules, spectra, Chern numbers,
//! doublon evolution and the two-doublon stability model.

use fdsim_core::dynamics::{self, DoublonObservables, TrajectoryRecord};
use fdsim_core::lattice::{self, Boundary, HoppingSchedule, LatticeSpec};
use fdsim_core::singleparticle::{self, edge_weight};
use fdsim_core::stability::{self, SearchBox};
use fdsim_core::twoparticle::{self, InteractionSign, TwoParticleBasis, TwoParticleState};
use fdsim_core::validate::{run_validation, ValidationFixture};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: fdsim_core::Error) -> PyErr {
    use fdsim_core::Error as E;
    match e {
        E::Eigensolver(_) | E::GapClosing(_) | E::Serialization(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn sign(attractive: bool) -> InteractionSign {
    if attractive {
        InteractionSign::Attractive
    } else {
        InteractionSign::Repulsive
    }
}

/// Rectangular lattice with open, cylindrical (periodic in y) or toroidal
/// boundaries.
#[pyclass(name = "Lattice", frozen, from_py_object)]
#[derive(Clone)]
struct PyLattice(LatticeSpec);

#[pymethods]
impl PyLattice {
    #[new]
    #[pyo3(signature = (lx, ly, boundary = "open"))]
    fn new(lx: usize, ly: usize, boundary: &str) -> PyResult<Self> {
        let b: Boundary = boundary.parse().map_err(err)?;
        LatticeSpec::new(lx, ly, b).map(PyLattice).map_err(err)
    }

    #[getter]
    fn lx(&self) -> usize {
        self.0.lx
    }

    #[getter]
    fn ly(&self) -> usize {
        self.0.ly
    }

    #[getter]
    fn boundary(&self) -> String {
        self.0.boundary.to_string()
    }

    #[getter]
    fn site_count(&self) -> usize {
        self.0.site_count()
    }

    fn index(&self, x: usize, y: usize) -> PyResult<usize> {
        if x >= self.0.lx || y >= self.0.ly {
            return Err(PyValueError::new_err(format!("({x}, {y}) lies outside the lattice")));
        }
        Ok(self.0.index(x, y))
    }

    fn coords(&self, site: usize) -> PyResult<(usize, usize)> {
        if site >= self.0.site_count() {
            return Err(PyValueError::new_err(format!("site {site} out of range")));
        }
        Ok(self.0.coords(site))
    }

    fn __repr__(&self) -> String {
        format!("Lattice({}, {}, '{}')", self.0.lx, self.0.ly, self.0.boundary)
    }
}

/// Four-step hopping drive on a lattice.
#[pyclass(name = "Schedule", frozen, from_py_object)]
#[derive(Clone)]
struct PySchedule(HoppingSchedule);

#[pymethods]
impl PySchedule {
    /// Anomalous drive without flux.
    #[staticmethod]
    fn afi(lattice: &PyLattice) -> PyResult<Self> {
        lattice::build_afi_schedule(lattice.0).map(PySchedule).map_err(err)
    }

    /// Stepped Harper-Hofstadter drive with flux `alpha` per plaquette.
    #[staticmethod]
    fn hhf(lattice: &PyLattice, alpha: f64) -> PyResult<Self> {
        lattice::build_hhf_schedule(lattice.0, alpha).map(PySchedule).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        HoppingSchedule::from_json(text).map(PySchedule).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    /// SHA-256 of the canonical JSON form.
    fn hash(&self) -> String {
        self.0.hash()
    }

    #[getter]
    fn lattice(&self) -> PyLattice {
        PyLattice(self.0.lattice)
    }

    /// Per-step `(i, j, phase)` links.
    fn steps(&self) -> Vec<Vec<(usize, usize, f64)>> {
        self.0.steps.iter().map(|s| s.links.iter().map(|l| (l.i, l.j, l.phase)).collect()).collect()
    }

    fn period(&self, theta: f64) -> f64 {
        self.0.period(theta)
    }

    /// Problems found by the schedule validator, empty when valid.
    fn issues(&self) -> Vec<String> {
        lattice::validate_schedule(&self.0).issues.iter().map(|i| i.to_string()).collect()
    }
}

/// Single-particle Floquet operator as a nested list of complex numbers.
#[pyfunction]
fn floquet_operator(schedule: &PySchedule, theta: f64) -> Vec<Vec<Complex64>> {
    let m = singleparticle::floquet_operator(&schedule.0, theta).matrix;
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Sorted quasi-energies (units of Omega) of the real-space Floquet operator.
#[pyfunction]
fn quasienergies(schedule: &PySchedule, theta: f64) -> PyResult<Vec<f64>> {
    let op = singleparticle::floquet_operator(&schedule.0, theta);
    let mut e = singleparticle::quasienergies(&op).map_err(err)?.quasienergies();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// `(k_y, quasi-energy, left edge weight, right edge weight)` for every
/// eigenstate of a cylinder.
#[pyfunction]
fn cylinder_spectrum(schedule: &PySchedule, theta: f64, k_points: usize) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let spec = schedule.0.lattice;
    let sp = singleparticle::cylinder_spectrum(&schedule.0, theta, k_points).map_err(err)?;
    Ok(sp
        .entries
        .iter()
        .map(|e| {
            let w = edge_weight(&e.vector, &spec);
            (e.k_y.unwrap_or(0.0), e.quasienergy, w.left, w.right)
        })
        .collect())
}

/// `(lower, upper, chern)` for every isolated band of a torus cell.
#[pyfunction]
#[pyo3(signature = (schedule, theta, grid = 32, min_gap = 0.02))]
fn chern_numbers(schedule: &PySchedule, theta: f64, grid: usize, min_gap: f64) -> PyResult<Vec<(f64, f64, i64)>> {
    let windows = singleparticle::band_windows(&schedule.0, theta, grid, min_gap).map_err(err)?;
    windows
        .into_iter()
        .map(|w| {
            let r = singleparticle::chern_number_on(&schedule.0, theta, w, grid).map_err(err)?;
            Ok((w.lower, w.upper, r.chern))
        })
        .collect()
}

/// `U/J` at the `k`-th decoupling point.
#[pyfunction]
fn decoupling_ratio(theta: f64, k: u32) -> PyResult<f64> {
    twoparticle::decoupling_ratio(theta, k).map_err(err)
}

/// Decoupling point and effective doublon parameters as a dict.
#[pyfunction]
#[pyo3(signature = (theta, k, phi = 0.0, attractive = false))]
fn effective_parameters<'py>(
    py: Python<'py>,
    theta: f64,
    k: u32,
    phi: f64,
    attractive: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let s = twoparticle::effective_parameters_signed(theta, k, phi, sign(attractive)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("k", s.k)?;
    d.set_item("theta", s.theta)?;
    d.set_item("u_over_j", s.sign.factor() * s.u_over_j)?;
    d.set_item("theta_prime", s.theta_prime)?;
    d.set_item("phi_prime", s.phi_prime)?;
    d.set_item("branch", s.branch.to_string())?;
    Ok(d)
}

/// 3x3 two-site pair unitary in the basis `|20>, |11>, |02>`.
#[pyfunction]
fn pair_block(theta: f64, gamma: f64, phi: f64) -> Vec<Vec<Complex64>> {
    twoparticle::pair_block(theta, gamma, phi).matrix().iter().map(|r| r.to_vec()).collect()
}

/// Stroboscopic evolution of one doublon. Returns a dict with times,
/// doublon overlap, Schmidt entropy, per-site doublon density, and the
/// JSON trajectory record.
#[pyfunction]
#[pyo3(signature = (schedule, theta, u_over_j, periods, site = (0, 0), stride = 1))]
fn evolve_doublon<'py>(
    py: Python<'py>,
    schedule: &PySchedule,
    theta: f64,
    u_over_j: f64,
    periods: usize,
    site: (usize, usize),
    stride: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = schedule.0.lattice;
    if site.0 >= spec.lx || site.1 >= spec.ly {
        return Err(PyValueError::new_err(format!("site {site:?} lies outside the lattice")));
    }
    let basis = TwoParticleBasis::new(spec.site_count());
    let init = TwoParticleState::doublon(&basis, spec.index(site.0, site.1));
    let traj = py
        .detach(|| dynamics::evolve(&init, &schedule.0, theta, u_over_j * theta, periods, stride))
        .map_err(err)?;
    let (mut times, mut overlap, mut entropy, mut density) = (vec![], vec![], vec![], vec![]);
    for s in &traj.snapshots {
        let obs = DoublonObservables::of(&basis, &s.state);
        times.push(s.time);
        overlap.push(obs.overlap);
        entropy.push(dynamics::schmidt_entropy(&basis, &s.state));
        density.push(obs.density);
    }
    let d = PyDict::new(py);
    d.set_item("times", times)?;
    d.set_item("overlap", overlap)?;
    d.set_item("entropy", entropy)?;
    d.set_item("density", density)?;
    d.set_item("record", TrajectoryRecord::new(&traj, &schedule.0, theta, u_over_j, false).to_json())?;
    Ok(d)
}

/// Two-doublon decay probability at effective angle `theta_prime`.
#[pyfunction]
#[pyo3(signature = (theta_prime, k, u3 = 0.0, u4 = 0.0))]
fn decay_probability(theta_prime: f64, k: u32, u3: f64, u4: f64) -> PyResult<f64> {
    stability::decay_at_theta_prime(theta_prime, k, u3, u4).map(|r| r.p_dec).map_err(err)
}

/// P_dec sweep over a `theta'` grid, as the CSV text the CLI writes.
#[pyfunction]
#[pyo3(signature = (k_list, theta_prime_grid, u3 = 0.0, u4 = 0.0))]
fn sweep_pdec(k_list: Vec<u32>, theta_prime_grid: Vec<f64>, u3: f64, u4: f64) -> PyResult<String> {
    stability::sweep_pdec(&k_list, &theta_prime_grid, u3, u4).map(|t| t.to_csv()).map_err(err)
}

/// Minimizes P_dec over `(U', U'')`; returns `(u3, u4, p_dec)`.
#[pyfunction]
#[pyo3(signature = (theta_prime, k, u3_range = (0.0, 2.0), u4_range = (0.0, 2.0)))]
fn tune_interactions(
    py: Python<'_>,
    theta_prime: f64,
    k: u32,
    u3_range: (f64, f64),
    u4_range: (f64, f64),
) -> PyResult<(f64, f64, f64)> {
    let b = SearchBox::new(u3_range, u4_range).map_err(err)?;
    let r = py.detach(|| stability::tune_interactions(theta_prime, k, b)).map_err(err)?;
    Ok((r.u3, r.u4, r.p_dec))
}

/// Runs the brute-force equivalence checks; `(name, passed, detail)` each.
#[pyfunction]
fn validate(py: Python<'_>) -> Vec<(String, bool, String)> {
    py.detach(|| run_validation(&ValidationFixture::default()))
        .into_iter()
        .map(|o| (o.name.to_string(), o.passed, o.detail))
        .collect()
}

#[pymodule]
fn fdsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLattice>()?;
    m.add_class::<PySchedule>()?;
    m.add_function(wrap_pyfunction!(floquet_operator, m)?)?;
    m.add_function(wrap_pyfunction!(quasienergies, m)?)?;
    m.add_function(wrap_pyfunction!(cylinder_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(chern_numbers, m)?)?;
    m.add_function(wrap_pyfunction!(decoupling_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(effective_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(pair_block, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_doublon, m)?)?;
    m.add_function(wrap_pyfunction!(decay_probability, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_pdec, m)?)?;
    m.add_function(wrap_pyfunction!(tune_interactions, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
