//! Stability of two neighbouring doublons during one coupled hopping step.
//!
//! Four bosons on a coupled pair of sites, starting as two doublons `|D>`,
//! mix with the triplet states `|T_a>, |T_b>` (three on one site) and the
//! quadruplets `|Q_a>, |Q_b>` (all four on one site). In the ordered basis
//! `{|D>, |T_a>, |T_b>, |Q_a>, |Q_b>}`
//!
//! ```text
//! H = [[2U,        -sqrt6 J, -sqrt6 J, 0,    0   ],
//!      [-sqrt6 J,  H_T,      0,        -2J,  0   ],
//!      [-sqrt6 J,  0,        H_T,      0,    -2J ],
//!      [0,         -2J,      0,        H_Q,  0   ],
//!      [0,         0,        -2J,      0,    H_Q ]]
//! ```
//!
//! with `H_T = U' + 3U` and `H_Q = U'' + 4U' + 6U`. The pair stays intact
//! with probability `|M_11|^2`, `M = exp(-i H tau)`.

use std::f64::consts::PI;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::twoparticle::{decoupling_ratio, effective_parameters_signed, Branch, InteractionSign};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadHamiltonian {
    pub j: f64,
    pub u: f64,
    pub u3: f64,
    pub u4: f64,
    pub matrix: CMatrix,
}

impl QuadHamiltonian {
    /// `H_T = U' + 3U`
    pub fn triplet_energy(&self) -> f64 {
        self.u3 + 3.0 * self.u
    }

    /// `H_Q = U'' + 4U' + 6U`
    pub fn quadruplet_energy(&self) -> f64 {
        self.u4 + 4.0 * self.u3 + 6.0 * self.u
    }

    /// `exp(-i H tau)`
    pub fn propagator(&self, tau: f64) -> CMatrix {
        linalg::hermitian_exp(&self.matrix, tau)
    }
}

pub fn build_quad_hamiltonian(j: f64, u: f64, u3: f64, u4: f64) -> QuadHamiltonian {
    let ht = u3 + 3.0 * u;
    let hq = u4 + 4.0 * u3 + 6.0 * u;
    let a = -(6f64).sqrt() * j;
    let b = -2.0 * j;
    #[rustfmt::skip]
    let entries = [
        2.0 * u, a,   a,   0.0, 0.0,
        a,       ht,  0.0, b,   0.0,
        a,       0.0, ht,  0.0, b,
        0.0,     b,   0.0, hq,  0.0,
        0.0,     0.0, b,   0.0, hq,
    ];
    let matrix = CMatrix::from_row_iterator(5, 5, entries.iter().map(|&x| Complex64::new(x, 0.0)));
    debug_assert!(linalg::hermiticity_defect(&matrix) == 0.0);
    QuadHamiltonian { j, u, u3, u4, matrix }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayResult {
    pub k: u32,
    pub theta: f64,
    pub theta_prime: f64,
    /// Signed `U / J`.
    pub u_over_j: f64,
    pub u3: f64,
    pub u4: f64,
    pub p_dec: f64,
}

/// `1 - |M_11|^2` for given couplings (units of `J = 1`) and step length.
pub fn decay_probability_raw(u: f64, u3: f64, u4: f64, tau: f64) -> f64 {
    let m = build_quad_hamiltonian(1.0, u, u3, u4).propagator(tau);
    (1.0 - m[(0, 0)].norm_sqr()).clamp(0.0, 1.0)
}

/// Decay probability at hopping angle `theta`, with `U` fixed by the
/// decoupling condition of order `k` (repulsive root).
pub fn decay_probability(theta: f64, k: u32, u3: f64, u4: f64) -> Result<DecayResult> {
    decay_probability_signed(theta, k, u3, u4, InteractionSign::Repulsive)
}

pub fn decay_probability_signed(
    theta: f64,
    k: u32,
    u3: f64,
    u4: f64,
    sign: InteractionSign,
) -> Result<DecayResult> {
    if theta == 0.0 {
        // no hopping: every state only picks up a phase
        if k == 0 {
            return Err(Error::InvalidArgument("k must be a positive integer".into()));
        }
        return Ok(DecayResult { k, theta, theta_prime: 0.0, u_over_j: 0.0, u3, u4, p_dec: 0.0 });
    }
    let sol = effective_parameters_signed(theta, k, 0.0, sign)?;
    let u = sign.factor() * sol.u_over_j;
    Ok(DecayResult {
        k,
        theta,
        theta_prime: sol.theta_prime,
        u_over_j: u,
        u3,
        u4,
        p_dec: decay_probability_raw(u, u3, u4, theta),
    })
}

/// Hopping angle `theta` in `(0, min(pi, k pi/2)]` whose decoupling point
/// of order `k` has effective angle `theta_prime` (mod pi).
pub fn invert_theta_prime(theta_prime: f64, k: u32) -> Result<f64> {
    invert_theta_prime_signed(theta_prime, k, InteractionSign::Repulsive)
}

/// With `s = sqrt(k^2 - (2 theta/pi)^2)` the branch formula reads
/// `2 theta'/pi = k mod 2 +- s (mod 2)`. Over the admissible `theta`,
/// `s` spans an interval of length below 2, so at most one `s` matches.
pub fn invert_theta_prime_signed(theta_prime: f64, k: u32, sign: InteractionSign) -> Result<f64> {
    let out_of_range = || Error::OutOfRange { theta_prime_over_pi: theta_prime / PI, k };
    if k == 0 || !theta_prime.is_finite() {
        return Err(out_of_range());
    }
    let kf = k as f64;
    let r_max = (2.0 * PI.min(0.5 * PI * kf) / PI).min(kf);
    let s_min = (kf * kf - r_max * r_max).max(0.0).sqrt();
    let branch = match sign {
        InteractionSign::Repulsive => Branch::Plus,
        InteractionSign::Attractive => Branch::Minus,
    };
    let base = (branch.sign() * (2.0 * theta_prime / PI - (k % 2) as f64)).rem_euclid(2.0);
    // lift `base` into [s_min, k)
    let lift = ((s_min - base) / 2.0).ceil().max(0.0);
    let mut s = base + 2.0 * lift;
    const EDGE: f64 = 1e-12;
    if s - 2.0 >= s_min - EDGE {
        s -= 2.0;
    }
    if s < s_min - EDGE || s > kf + EDGE {
        return Err(out_of_range());
    }
    let s = s.clamp(s_min, kf);
    let theta = 0.5 * PI * (kf * kf - s * s).max(0.0).sqrt();
    if !(theta > 0.0) {
        return Err(out_of_range());
    }
    let check = effective_parameters_signed(theta, k, 0.0, sign)?;
    let diff = crate::twoparticle::reduce_angle_symmetric(check.theta_prime - theta_prime);
    if check.branch != branch || diff.abs() > 1e-9 {
        return Err(out_of_range());
    }
    Ok(theta)
}

/// Decay probability as a function of the effective angle.
pub fn decay_at_theta_prime(theta_prime: f64, k: u32, u3: f64, u4: f64) -> Result<DecayResult> {
    let theta = invert_theta_prime(theta_prime, k)?;
    let mut r = decay_probability(theta, k, u3, u4)?;
    r.theta_prime = theta_prime;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub u3: f64,
    pub u4: f64,
    /// Ordered by `k`, then `theta'`.
    pub rows: Vec<DecayResult>,
    /// `(k, theta')` grid points with no admissible `theta`.
    pub skipped: Vec<(u32, f64)>,
}

impl SweepTable {
    pub fn curve(&self, k: u32) -> impl Iterator<Item = &DecayResult> {
        self.rows.iter().filter(move |r| r.k == k)
    }

    /// CSV with header
    /// `k,theta_prime_over_pi,theta_over_pi,u_over_j,u3_over_j,u4_over_j,p_dec`.
    /// Skipped grid points follow as `#` comment lines.
    pub fn to_csv(&self) -> String {
        use crate::fmt::num;
        let mut out =
            String::from("k,theta_prime_over_pi,theta_over_pi,u_over_j,u3_over_j,u4_over_j,p_dec\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.k,
                num(r.theta_prime / PI),
                num(r.theta / PI),
                num(r.u_over_j),
                num(r.u3),
                num(r.u4),
                num(r.p_dec)
            ));
        }
        for (k, tp) in &self.skipped {
            out.push_str(&format!("# skipped k={k} theta_prime_over_pi={}: out of range\n", num(tp / PI)));
        }
        out
    }
}

/// `P_dec(theta')` for every `k`, evaluated in parallel; row order is fixed
/// by `(k, grid index)`.
pub fn sweep_pdec(k_list: &[u32], theta_prime_grid: &[f64], u3: f64, u4: f64) -> Result<SweepTable> {
    if theta_prime_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("theta' grid contains a non-finite value".into()));
    }
    let points: Vec<(u32, f64)> = k_list
        .iter()
        .flat_map(|&k| theta_prime_grid.iter().map(move |&t| (k, t)))
        .collect();
    let results: Vec<Result<DecayResult>> = points
        .par_iter()
        .map(|&(k, t)| decay_at_theta_prime(t, k, u3, u4))
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for ((k, t), r) in points.into_iter().zip(results) {
        match r {
            Ok(r) => rows.push(r),
            Err(Error::OutOfRange { .. }) | Err(Error::NoSolution { .. }) => skipped.push((k, t)),
            Err(e) => return Err(e),
        }
    }
    Ok(SweepTable { u3, u4, rows, skipped })
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub u3: (f64, f64),
    pub u4: (f64, f64),
}

impl SearchBox {
    pub fn new(u3: (f64, f64), u4: (f64, f64)) -> Result<Self> {
        for (lo, hi) in [u3, u4] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!("invalid search interval [{lo}, {hi}]")));
            }
        }
        Ok(SearchBox { u3, u4 })
    }

    fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.u3.0, self.u3.1), p[1].clamp(self.u4.0, self.u4.1)]
    }
}

/// Coarse grid side of the interaction tuner.
pub const TUNE_GRID: usize = 41;
/// Stop once the simplex costs spread by less than this.
pub const TUNE_TOLERANCE: f64 = 1e-6;
const TUNE_MAX_ITERS: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub k: u32,
    pub theta_prime: f64,
    pub theta: f64,
    pub u3: f64,
    pub u4: f64,
    pub p_dec: f64,
    /// Best point of the coarse grid, `(u3, u4, p_dec)`.
    pub grid_best: (f64, f64, f64),
}

struct BoxedDecay {
    u: f64,
    tau: f64,
    bounds: SearchBox,
}

impl CostFunction for BoxedDecay {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let c = self.bounds.clamp([p[0], p[1]]);
        // quadratic wall keeps the simplex inside the box
        let excess = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
        Ok(decay_probability_raw(self.u, c[0], c[1], self.tau) + excess)
    }
}

/// Minimizes `P_dec` over `(U', U'')` in `search_box`: a 41x41 grid scan
/// followed by Nelder-Mead refinement from the best grid point.
pub fn tune_interactions(theta_prime: f64, k: u32, search_box: SearchBox) -> Result<TuneResult> {
    let theta = invert_theta_prime(theta_prime, k)?;
    let u = decoupling_ratio(theta, k)?;
    let g3 = linspace(search_box.u3.0, search_box.u3.1, TUNE_GRID);
    let g4 = linspace(search_box.u4.0, search_box.u4.1, TUNE_GRID);
    let grid: Vec<(f64, f64, f64)> = g3
        .par_iter()
        .flat_map_iter(|&a| g4.iter().map(move |&b| (a, b, decay_probability_raw(u, a, b, theta))))
        .collect();
    let grid_best = grid
        .iter()
        .copied()
        .fold((f64::NAN, f64::NAN, f64::INFINITY), |best, p| if p.2 < best.2 { p } else { best });

    let step3 = (search_box.u3.1 - search_box.u3.0) / (TUNE_GRID - 1) as f64;
    let step4 = (search_box.u4.1 - search_box.u4.0) / (TUNE_GRID - 1) as f64;
    let (mut u3, mut u4, mut p_dec) = grid_best;
    if step3 > 0.0 || step4 > 0.0 {
        let x0 = vec![grid_best.0, grid_best.1];
        let simplex = vec![
            x0.clone(),
            vec![x0[0] + step3.max(1e-9), x0[1]],
            vec![x0[0], x0[1] + step4.max(1e-9)],
        ];
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(TUNE_TOLERANCE)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let problem = BoxedDecay { u, tau: theta, bounds: search_box };
        let res = Executor::new(problem, solver)
            .configure(|s| s.max_iters(TUNE_MAX_ITERS))
            .run()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        if let Some(best) = res.state.best_param.as_ref() {
            let c = search_box.clamp([best[0], best[1]]);
            let p = decay_probability_raw(u, c[0], c[1], theta);
            if p < p_dec {
                u3 = c[0];
                u4 = c[1];
                p_dec = p;
            }
        }
    }
    Ok(TuneResult { k, theta_prime, theta, u3, u4, p_dec, grid_best })
}
