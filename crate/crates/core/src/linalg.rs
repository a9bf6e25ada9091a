//! Dense complex linear algebra helpers.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>`. The two
//! decompositions the simulator relies on are the Hermitian eigensolver
//! (used to exponentiate small Hamiltonians) and the complex Schur form,
//! which for a unitary (hence normal) matrix is diagonal and yields an
//! orthonormal eigenbasis.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// `e^{i x}`
#[inline]
pub fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

/// Largest entry magnitude of `U^dagger U - 1`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    let g = u.adjoint() * u;
    let mut worst = 0.0_f64;
    for r in 0..n {
        for c in 0..u.ncols() {
            let target = if r == c { ONE } else { ZERO };
            worst = worst.max((g[(r, c)] - target).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest entry magnitude of `H - H^dagger`.
pub fn hermiticity_defect(h: &CMatrix) -> f64 {
    max_abs_diff(h, &h.adjoint())
}

/// `exp(-i H t)` for Hermitian `H`, through its eigendecomposition.
pub fn hermitian_exp(h: &CMatrix, t: f64) -> CMatrix {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&e| cis(-e * t)),
    );
    let mut scaled = v.clone();
    for (mut col, p) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= *p;
    }
    scaled * v.adjoint()
}

/// Eigen-decomposition of a unitary matrix.
#[derive(Debug, Clone)]
pub struct UnitaryEigen {
    pub eigenvalues: Vec<Complex64>,
    /// Orthonormal eigenvectors stored as columns.
    pub eigenvectors: CMatrix,
    /// Largest column norm of `U V - V diag(lambda)`.
    pub residual: f64,
}

/// Diagonalizes a unitary matrix.
///
/// The fast path diagonalizes the Hermitian part of `e^{-i d} U` for a
/// fixed generic `d`, then resolves every cluster of nearly equal
/// Hermitian eigenvalues (which may mix distinct phases) with a small
/// Schur decomposition of `U` restricted to the cluster. If that leaves a
/// residual above `tol`, the full complex Schur form is used instead.
///
/// Fails if the Schur iteration does not converge or the final residual
/// exceeds `tol`.
pub fn unitary_eigen(u: &CMatrix, tol: f64) -> Result<UnitaryEigen> {
    let n = u.nrows();
    if n != u.ncols() {
        return Err(Error::Eigensolver("matrix is not square".into()));
    }
    if let Some(fast) = hermitian_route(u) {
        if fast.residual <= tol {
            return Ok(fast);
        }
    }
    let schur = nalgebra::Schur::try_new(u.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigensolver("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let eigenvalues: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();
    let residual = eigen_residual(u, &q, &eigenvalues);
    if !residual.is_finite() || residual > tol {
        return Err(Error::Eigensolver(format!(
            "eigen residual {residual:.3e} exceeds {tol:.1e}"
        )));
    }
    Ok(UnitaryEigen {
        eigenvalues,
        eigenvectors: q,
        residual,
    })
}

fn eigen_residual(u: &CMatrix, q: &CMatrix, eigenvalues: &[Complex64]) -> f64 {
    let uq = u * q;
    eigenvalues
        .iter()
        .enumerate()
        .map(|(k, lambda)| (uq.column(k) - q.column(k) * *lambda).norm())
        .fold(0.0, f64::max)
}

/// Hermitian eigenvalues closer than this are treated as one cluster.
const CLUSTER_GAP: f64 = 1e-6;

fn hermitian_route(u: &CMatrix) -> Option<UnitaryEigen> {
    let n = u.nrows();
    // an irrational rotation keeps symmetric phase pairs from colliding
    let rot = cis(-std::f64::consts::FRAC_1_PI);
    let h = (u * rot + u.adjoint() * rot.conj()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut q = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let mut uq = u * &q;
    let mut eigenvalues = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] < CLUSTER_GAP {
            end += 1;
        }
        let m = end - start;
        if m == 1 {
            eigenvalues.push(q.column(start).dotc(&uq.column(start)));
        } else {
            let small = q.columns(start, m).adjoint() * uq.columns(start, m);
            let (qs, ts) = nalgebra::Schur::try_new(small, f64::EPSILON, 10_000)?.unpack();
            let rotated = q.columns(start, m) * &qs;
            let u_rotated = uq.columns(start, m) * &qs;
            q.columns_mut(start, m).copy_from(&rotated);
            uq.columns_mut(start, m).copy_from(&u_rotated);
            eigenvalues.extend((0..m).map(|c| ts[(c, c)]));
        }
        start = end;
    }
    let residual = eigenvalues
        .iter()
        .enumerate()
        .map(|(k, lambda)| (uq.column(k) - q.column(k) * *lambda).norm())
        .fold(0.0, f64::max);
    residual.is_finite().then_some(UnitaryEigen { eigenvalues, eigenvectors: q, residual })
}

/// Maps a real number onto the half-open interval `(-1/2, 1/2]`.
pub fn wrap_half(x: f64) -> f64 {
    let mut y = x - x.round();
    if y <= -0.5 {
        y += 1.0;
    }
    if y > 0.5 {
        y -= 1.0;
    }
    y
}

/// Shannon entropy `-sum p ln p` of a probability vector (zeros skipped).
pub fn entropy(probabilities: impl IntoIterator<Item = f64>) -> f64 {
    probabilities
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}
