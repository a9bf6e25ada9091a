//! Single-particle step unitaries, Floquet operators and band topology.
//!
//! Each hopping step acts on every coupled pair `(i, j, phi)` through the
//! closed-form block
//!
//! ```text
//! U_H(theta, phi) = [[cos theta,              i sin theta e^{ i phi}],
//!                    [i sin theta e^{-i phi}, cos theta            ]]
//! ```
//!
//! and leaves idle sites untouched. The Floquet operator is the time-ordered
//! product with the last step as the leftmost factor.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Boundary, Direction, HoppingSchedule, HoppingStep, LatticeSpec};
use crate::linalg::{self, cis, CMatrix, CVector, I, ONE, ZERO};

/// Tolerance on the eigen residual of a Floquet diagonalization.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Default side of the momentum grid used for Chern numbers.
pub const CHERN_GRID: usize = 32;

/// Per-side edge weight above which a state counts as an edge state.
pub const EDGE_THRESHOLD: f64 = 0.5;

/// The 2x2 hopping block `U_H(theta, phi)` as `[[a, b], [c, d]]`.
pub fn hopping_block(theta: f64, phi: f64) -> [[Complex64; 2]; 2] {
    let c = Complex64::new(theta.cos(), 0.0);
    let s = theta.sin();
    [[c, I * s * cis(phi)], [I * s * cis(-phi), c]]
}

/// One coupled pair of a step, with any Bloch phase already folded in.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairOp {
    pub i: usize,
    pub j: usize,
    pub block: [[Complex64; 2]; 2],
}

/// Bloch phase `e^{i k.R}` picked up by a link that crosses a periodic
/// boundary of the (super)cell; `R` is +1 along the wrapped direction.
fn bloch_phase(lattice: &LatticeSpec, i: usize, j: usize, k: (f64, f64)) -> Complex64 {
    match lattice.bond(i, j) {
        Some(b) if b.wrapped => match b.direction {
            Direction::X => cis(k.0),
            Direction::Y => cis(k.1),
        },
        _ => ONE,
    }
}

pub(crate) fn pair_ops(
    step: &HoppingStep,
    lattice: &LatticeSpec,
    theta: f64,
    k: Option<(f64, f64)>,
) -> Vec<PairOp> {
    step.links
        .iter()
        .map(|link| {
            let mut block = hopping_block(theta, link.phase);
            if let Some(k) = k {
                let b = bloch_phase(lattice, link.i, link.j, k);
                block[0][1] *= b;
                block[1][0] *= b.conj();
            }
            PairOp { i: link.i, j: link.j, block }
        })
        .collect()
}

/// `M <- S M` for the step `S` described by `ops`, touching only coupled rows.
pub(crate) fn apply_left(ops: &[PairOp], m: &mut CMatrix) {
    let cols = m.ncols();
    for op in ops {
        for c in 0..cols {
            let vi = m[(op.i, c)];
            let vj = m[(op.j, c)];
            m[(op.i, c)] = op.block[0][0] * vi + op.block[0][1] * vj;
            m[(op.j, c)] = op.block[1][0] * vi + op.block[1][1] * vj;
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepUnitary {
    pub matrix: CMatrix,
    pub theta: f64,
}

/// Dense unitary of one hopping step on the lattice site basis.
pub fn step_unitary(step: &HoppingStep, lattice: &LatticeSpec, theta: f64) -> StepUnitary {
    let n = lattice.site_count();
    let mut matrix = CMatrix::identity(n, n);
    for op in pair_ops(step, lattice, theta, None) {
        matrix[(op.i, op.i)] = op.block[0][0];
        matrix[(op.i, op.j)] = op.block[0][1];
        matrix[(op.j, op.i)] = op.block[1][0];
        matrix[(op.j, op.j)] = op.block[1][1];
    }
    StepUnitary { matrix, theta }
}

/// Hamiltonian of one step, `-J sum (e^{i phi} |i><j| + h.c.)` with `J = 1`.
pub fn step_hamiltonian(step: &HoppingStep, lattice: &LatticeSpec) -> CMatrix {
    let n = lattice.site_count();
    let mut h = CMatrix::zeros(n, n);
    for link in &step.links {
        h[(link.i, link.j)] -= cis(link.phase);
        h[(link.j, link.i)] -= cis(-link.phase);
    }
    h
}

/// Time average of the step Hamiltonians over one period.
pub fn time_averaged_hamiltonian(schedule: &HoppingSchedule) -> CMatrix {
    let n = schedule.lattice.site_count();
    let mut h = CMatrix::zeros(n, n);
    for step in &schedule.steps {
        h += step_hamiltonian(step, &schedule.lattice);
    }
    h / Complex64::new(schedule.step_count() as f64, 0.0)
}

#[derive(Debug, Clone)]
pub struct FloquetOperator {
    pub matrix: CMatrix,
    /// Drive period `T = N theta` (units of `1/J`).
    pub period: f64,
    /// Bloch momentum the operator was reduced at, if any.
    pub momentum: Option<(f64, f64)>,
}

fn floquet_product(schedule: &HoppingSchedule, theta: f64, k: Option<(f64, f64)>) -> CMatrix {
    let n = schedule.lattice.site_count();
    let mut m = CMatrix::identity(n, n);
    for step in &schedule.steps {
        apply_left(&pair_ops(step, &schedule.lattice, theta, k), &mut m);
    }
    m
}

/// One-period evolution operator of a finite lattice.
pub fn floquet_operator(schedule: &HoppingSchedule, theta: f64) -> FloquetOperator {
    FloquetOperator {
        matrix: floquet_product(schedule, theta, None),
        period: schedule.period(theta),
        momentum: None,
    }
}

/// Floquet operator of a `cylinder_y` strip reduced at momentum `k_y`
/// (per translation by the full strip height `ly`).
pub fn bloch_floquet_operator(
    schedule: &HoppingSchedule,
    theta: f64,
    k_y: f64,
) -> Result<FloquetOperator> {
    if schedule.lattice.boundary != Boundary::CylinderY {
        return Err(Error::InvalidArgument(format!(
            "Bloch reduction along y needs a cylinder_y schedule, got {}",
            schedule.lattice.boundary
        )));
    }
    Ok(FloquetOperator {
        matrix: floquet_product(schedule, theta, Some((0.0, k_y))),
        period: schedule.period(theta),
        momentum: Some((0.0, k_y)),
    })
}

/// Floquet operator of a torus unit cell at crystal momentum `(k_x, k_y)`.
pub fn torus_bloch_floquet_operator(
    schedule: &HoppingSchedule,
    theta: f64,
    k_x: f64,
    k_y: f64,
) -> Result<FloquetOperator> {
    if schedule.lattice.boundary != Boundary::Torus {
        return Err(Error::InvalidArgument(format!(
            "two-dimensional Bloch reduction needs a torus schedule, got {}",
            schedule.lattice.boundary
        )));
    }
    Ok(FloquetOperator {
        matrix: floquet_product(schedule, theta, Some((k_x, k_y))),
        period: schedule.period(theta),
        momentum: Some((k_x, k_y)),
    })
}

#[derive(Debug, Clone)]
pub struct QuasiEnergyState {
    pub k_y: Option<f64>,
    pub index: usize,
    /// Quasi-energy in units of `Omega`, in `(-1/2, 1/2]`.
    pub quasienergy: f64,
    pub vector: CVector,
}

#[derive(Debug, Clone, Default)]
pub struct QuasiEnergySpectrum {
    pub entries: Vec<QuasiEnergyState>,
}

impl QuasiEnergySpectrum {
    pub fn quasienergies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.quasienergy).collect()
    }
}

/// Quasi-energy `-arg(lambda) / 2 pi`, folded into `(-1/2, 1/2]`.
pub fn quasienergy_of(eigenvalue: Complex64) -> f64 {
    linalg::wrap_half(-eigenvalue.arg() / (2.0 * PI))
}

/// Diagonalizes a Floquet operator; states are sorted by quasi-energy.
pub fn quasienergies(op: &FloquetOperator) -> Result<QuasiEnergySpectrum> {
    let eig = linalg::unitary_eigen(&op.matrix, EIGEN_RESIDUAL_TOL)?;
    let mut states: Vec<(f64, CVector)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(c, &lambda)| (quasienergy_of(lambda), eig.eigenvectors.column(c).into_owned()))
        .collect();
    states.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k_y = op.momentum.map(|k| k.1);
    Ok(QuasiEnergySpectrum {
        entries: states
            .into_iter()
            .enumerate()
            .map(|(index, (quasienergy, vector))| QuasiEnergyState {
                k_y,
                index,
                quasienergy,
                vector,
            })
            .collect(),
    })
}

/// Evenly spaced momenta `2 pi m / count`, `m = 0..count`.
pub fn momentum_grid(count: usize) -> Vec<f64> {
    (0..count).map(|m| 2.0 * PI * m as f64 / count as f64).collect()
}

/// Quasi-energy spectrum of a `cylinder_y` strip over `k_points` momenta,
/// ordered by `(k_y, quasienergy)`.
pub fn cylinder_spectrum(
    schedule: &HoppingSchedule,
    theta: f64,
    k_points: usize,
) -> Result<QuasiEnergySpectrum> {
    let per_k: Vec<Result<QuasiEnergySpectrum>> = momentum_grid(k_points)
        .into_par_iter()
        .map(|k| quasienergies(&bloch_floquet_operator(schedule, theta, k)?))
        .collect();
    let mut entries = Vec::new();
    for spectrum in per_k {
        entries.extend(spectrum?.entries);
    }
    Ok(QuasiEnergySpectrum { entries })
}

/// Probability on the two outermost columns of each `x` edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWeight {
    pub left: f64,
    pub right: f64,
}

impl EdgeWeight {
    pub fn total(&self) -> f64 {
        self.left + self.right
    }

    pub fn is_edge(&self) -> bool {
        self.left >= EDGE_THRESHOLD || self.right >= EDGE_THRESHOLD
    }
}

pub fn edge_weight(state: &CVector, spec: &LatticeSpec) -> EdgeWeight {
    let mut left = 0.0;
    let mut right = 0.0;
    for (site, amp) in state.iter().enumerate() {
        let (x, _) = spec.coords(site);
        let p = amp.norm_sqr();
        if x < 2 {
            left += p;
        }
        if x + 2 >= spec.lx {
            right += p;
        }
    }
    EdgeWeight { left, right }
}

/// CSV with header `k_y,band_index,quasienergy_over_omega,edge_weight`.
pub fn spectrum_csv(spectrum: &QuasiEnergySpectrum, spec: &LatticeSpec) -> String {
    use crate::fmt::num;
    let mut rows: Vec<&QuasiEnergyState> = spectrum.entries.iter().collect();
    rows.sort_by(|a, b| {
        a.k_y
            .unwrap_or(0.0)
            .total_cmp(&b.k_y.unwrap_or(0.0))
            .then(a.quasienergy.total_cmp(&b.quasienergy))
    });
    let mut out = String::from("k_y,band_index,quasienergy_over_omega,edge_weight\n");
    for s in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            num(s.k_y.unwrap_or(0.0)),
            s.index,
            num(s.quasienergy),
            num(edge_weight(&s.vector, spec).total())
        ));
    }
    out
}

/// Half-open quasi-energy interval `(lower, upper]` on the Floquet zone
/// circle, in units of `Omega`. `lower > upper` wraps through `1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiEnergyWindow {
    pub lower: f64,
    pub upper: f64,
}

impl QuasiEnergyWindow {
    pub fn new(lower: f64, upper: f64) -> Self {
        QuasiEnergyWindow { lower, upper }
    }

    /// The whole zone.
    pub fn full() -> Self {
        QuasiEnergyWindow { lower: -0.5, upper: 0.5 }
    }

    pub fn contains(&self, eps: f64) -> bool {
        let eps = linalg::wrap_half(eps);
        if self.upper - self.lower >= 1.0 {
            return true;
        }
        let lo = linalg::wrap_half(self.lower);
        let hi = linalg::wrap_half(self.upper);
        if lo < hi {
            eps > lo && eps <= hi
        } else {
            eps > lo || eps <= hi
        }
    }

    /// Distance (on the circle) from `eps` to the nearer window edge.
    fn edge_distance(&self, eps: f64) -> f64 {
        if self.upper - self.lower >= 1.0 {
            return f64::INFINITY;
        }
        let d = |a: f64| linalg::wrap_half(eps - a).abs();
        d(self.lower).min(d(self.upper))
    }
}

/// Minimum distance between any eigenvalue and the window edges for which
/// the band is still considered isolated.
const WINDOW_EDGE_TOL: f64 = 1e-6;

/// Smallest admissible overlap determinant between neighbouring grid points.
const LINK_OVERLAP_TOL: f64 = 1e-3;

fn window_states(op: &FloquetOperator, window: QuasiEnergyWindow) -> Result<CMatrix> {
    let eig = linalg::unitary_eigen(&op.matrix, EIGEN_RESIDUAL_TOL)?;
    let mut cols = Vec::new();
    for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
        let eps = quasienergy_of(lambda);
        if window.edge_distance(eps) < WINDOW_EDGE_TOL {
            return Err(Error::GapClosing(format!(
                "state at quasi-energy {eps:.6} sits on the window edge"
            )));
        }
        if window.contains(eps) {
            cols.push(eig.eigenvectors.column(c).into_owned());
        }
    }
    let n = op.matrix.nrows();
    Ok(CMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]))
}

/// Normalized overlap determinant `det(A^dagger B) / |det(A^dagger B)|`.
fn link_variable(a: &CMatrix, b: &CMatrix) -> Result<Complex64> {
    let overlap = a.adjoint() * b;
    let det = overlap.determinant();
    let mag = det.norm();
    if mag < LINK_OVERLAP_TOL {
        return Err(Error::GapClosing(format!(
            "projector discontinuity on the momentum grid (|det| = {mag:.2e})"
        )));
    }
    Ok(det / mag)
}

/// Chern number of the bands inside `window`, as the raw (unrounded) sum
/// of lattice field strengths on an `n x n` grid over the Brillouin zone of
/// the torus cell.
pub fn chern_on_grid(
    schedule: &HoppingSchedule,
    theta: f64,
    window: QuasiEnergyWindow,
    n: usize,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("Chern grid needs n >= 2".into()));
    }
    let ks = momentum_grid(n);
    let frames: Vec<Result<CMatrix>> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (idx / n, idx % n);
            let op = torus_bloch_floquet_operator(schedule, theta, ks[a], ks[b])?;
            window_states(&op, window)
        })
        .collect();
    let frames: Vec<CMatrix> = frames.into_iter().collect::<Result<_>>()?;
    let count = frames[0].ncols();
    if count == 0 {
        return Err(Error::InvalidArgument("quasi-energy window holds no states".into()));
    }
    if frames.iter().any(|f| f.ncols() != count) {
        return Err(Error::GapClosing(
            "number of states in the window changes across the Brillouin zone".into(),
        ));
    }
    let at = |a: usize, b: usize| &frames[(a % n) * n + (b % n)];
    let fluxes: Vec<Result<f64>> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (idx / n, idx % n);
            let u1 = link_variable(at(a, b), at(a + 1, b))?;
            let u2 = link_variable(at(a + 1, b), at(a + 1, b + 1))?;
            let u3 = link_variable(at(a + 1, b + 1), at(a, b + 1))?;
            let u4 = link_variable(at(a, b + 1), at(a, b))?;
            Ok((u1 * u2 * u3 * u4).arg())
        })
        .collect();
    let mut total = 0.0;
    for f in fluxes {
        total += f?;
    }
    Ok(total / (2.0 * PI))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernResult {
    pub chern: i64,
    pub raw: f64,
    pub raw_refined: f64,
    pub grid: usize,
}

/// Chern number on a `grid x grid` mesh, checked against a `2 grid` mesh.
pub fn chern_number_on(
    schedule: &HoppingSchedule,
    theta: f64,
    window: QuasiEnergyWindow,
    grid: usize,
) -> Result<ChernResult> {
    let raw = chern_on_grid(schedule, theta, window, grid)?;
    let raw_refined = chern_on_grid(schedule, theta, window, 2 * grid)?;
    let chern = raw.round() as i64;
    if (raw - chern as f64).abs() > 1e-6 || (raw_refined - chern as f64).abs() > 1e-6 {
        return Err(Error::GapClosing(format!(
            "Chern sum not converged: {raw:.6} on {grid}x{grid}, {raw_refined:.6} on the refined grid"
        )));
    }
    Ok(ChernResult { chern, raw, raw_refined, grid })
}

/// Chern number with the default 32x32 grid and a 64x64 refinement check.
pub fn chern_number(
    schedule: &HoppingSchedule,
    theta: f64,
    window: QuasiEnergyWindow,
) -> Result<i64> {
    chern_number_on(schedule, theta, window, CHERN_GRID).map(|r| r.chern)
}

/// Splits the Floquet zone into isolated bands by locating spectral gaps
/// wider than `min_gap` on an `n x n` momentum grid of the torus cell.
/// Each window is centred in the gaps around it.
pub fn band_windows(
    schedule: &HoppingSchedule,
    theta: f64,
    n: usize,
    min_gap: f64,
) -> Result<Vec<QuasiEnergyWindow>> {
    let ks = momentum_grid(n);
    let spectra: Vec<Result<Vec<f64>>> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let op = torus_bloch_floquet_operator(schedule, theta, ks[idx / n], ks[idx % n])?;
            Ok(quasienergies(&op)?.quasienergies())
        })
        .collect();
    let mut all = Vec::new();
    for s in spectra {
        all.extend(s?);
    }
    all.sort_by(f64::total_cmp);
    // gaps on the circle: between consecutive values and across +-1/2
    let mut gaps = Vec::new();
    for w in all.windows(2) {
        if w[1] - w[0] > min_gap {
            gaps.push(0.5 * (w[0] + w[1]));
        }
    }
    let wrap_gap = all[0] + 1.0 - all[all.len() - 1];
    if wrap_gap > min_gap {
        gaps.push(linalg::wrap_half(0.5 * (all[0] + 1.0 + all[all.len() - 1])));
    }
    // symmetric spectra put gap centres at 0 or 1/2 up to rounding
    let mut gaps: Vec<f64> = gaps.into_iter().map(|g| (g * 1e12).round() / 1e12 + 0.0).collect();
    gaps.sort_by(f64::total_cmp);
    if gaps.is_empty() {
        return Ok(vec![QuasiEnergyWindow::full()]);
    }
    let m = gaps.len();
    Ok((0..m)
        .map(|g| QuasiEnergyWindow::new(gaps[g], gaps[(g + 1) % m]))
        .map(|w| if m == 1 { QuasiEnergyWindow::new(w.lower, w.lower + 1.0) } else { w })
        .collect())
}

/// Applies the Floquet evolution of one period to a single-particle state.
pub fn evolve_state(schedule: &HoppingSchedule, theta: f64, state: &CVector) -> CVector {
    let mut m = CMatrix::from_column_slice(state.len(), 1, state.as_slice());
    for step in &schedule.steps {
        apply_left(&pair_ops(step, &schedule.lattice, theta, None), &mut m);
    }
    m.column(0).into_owned()
}

/// A state localized on one site.
pub fn site_state(n: usize, site: usize) -> CVector {
    let mut v = CVector::from_element(n, ZERO);
    v[site] = ONE;
    v
}
