//! Independent reference constructions shared by the integration tests.
#![allow(dead_code)]

use fdsim_core::lattice::HoppingStep;
use fdsim_core::linalg::{CMatrix, CVector};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `exp(-i H t)` by scaling and squaring of a truncated Taylor series.
/// Shares nothing with the eigendecomposition used by the library.
pub fn expm_taylor(h: &CMatrix, t: f64) -> CMatrix {
    let n = h.nrows();
    let a = h * c(0.0, -t);
    let norm: f64 = a.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let squarings = (norm.log2().ceil().max(0.0) as u32) + 4;
    let scaled = &a / c(2f64.powi(squarings as i32), 0.0);
    let mut term = CMatrix::identity(n, n);
    let mut sum = CMatrix::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / c(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Isometry from the symmetric pair basis (`l1 <= l2`, ordered as in the
/// library) into the `n^2` product space, column by column.
pub fn symmetric_isometry(n: usize) -> CMatrix {
    let dim = n * (n + 1) / 2;
    let mut s = CMatrix::zeros(n * n, dim);
    let mut col = 0;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..n {
        for b in a..n {
            if a == b {
                s[(a * n + a, col)] = c(1.0, 0.0);
            } else {
                s[(a * n + b, col)] = c(r, 0.0);
                s[(b * n + a, col)] = c(r, 0.0);
            }
            col += 1;
        }
    }
    s
}

/// Single-particle step Hamiltonian `-sum (e^{i phi}|i><j| + h.c.)`.
pub fn single_particle_h(step: &HoppingStep, n: usize) -> CMatrix {
    let mut h = CMatrix::zeros(n, n);
    for l in &step.links {
        let e = Complex64::from_polar(1.0, l.phase);
        h[(l.i, l.j)] -= e;
        h[(l.j, l.i)] -= e.conj();
    }
    h
}

/// First-quantized two-particle Hamiltonian `h (x) 1 + 1 (x) h + U sum_l
/// |ll><ll|`, restricted to the symmetric subspace.
pub fn two_particle_h_symmetric(step: &HoppingStep, n: usize, u: f64) -> CMatrix {
    let h1 = single_particle_h(step, n);
    let id = CMatrix::identity(n, n);
    let mut h = h1.kronecker(&id) + id.kronecker(&h1);
    for l in 0..n {
        h[(l * n + l, l * n + l)] += c(u, 0.0);
    }
    let s = symmetric_isometry(n);
    s.adjoint() * h * s
}

pub fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_diff_real(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn normalized(v: CVector) -> CVector {
    let n = v.norm();
    v / c(n, 0.0)
}
