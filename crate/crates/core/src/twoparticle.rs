//! Exact two-boson Floquet evolution.
//!
//! Two bosons live in the symmetric pair basis `|l1 l2>` with `l1 <= l2`;
//! `|ll>` is a doublon. During a hopping step a coupled pair `(i, j)`
//! holding both particles evolves in `{|ii>, |ij>, |jj>}` through the
//! closed-form block
//!
//! ```text
//! e^{-i g/2} [[U11,            U12 e^{ i phi},  U13 e^{2i phi}],
//!             [U12 e^{-i phi},  U22,            U12 e^{ i phi}],
//!             [U13 e^{-2i phi}, U12 e^{-i phi}, U11           ]]
//! ```
//!
//! with `g = U tau`, `g' = sqrt(g^2 + 16 theta^2)` and
//!
//! ```text
//! U11 = (e^{-i g/2} + cos(g'/2) - i (g/g') sin(g'/2)) / 2
//! U12 = i (2 sqrt(2) theta / g') sin(g'/2)
//! U13 = (-e^{-i g/2} + cos(g'/2) - i (g/g') sin(g'/2)) / 2
//! U22 = cos(g'/2) + i (g/g') sin(g'/2)
//! ```
//!
//! Doublons cannot dissociate when `U12 = 0`, i.e. `g' = 2 pi k`, which
//! fixes `(U/J)^2 = 4 k^2 / (theta/pi)^2 - 16`. The doublon block then
//! reduces to a hopping block with angle
//! `theta' = (pi/2) (k mod 2 +- sqrt(k^2 - (2 theta/pi)^2))` and phase
//! `phi' = 2 phi`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{HoppingSchedule, HoppingStep, LatticeSpec};
use crate::linalg::{self, cis, CMatrix, CVector, I, ONE, ZERO};
use crate::singleparticle::hopping_block;

/// Symmetric two-particle basis over `site_count` sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoParticleBasis {
    site_count: usize,
    pairs: Vec<(usize, usize)>,
}

impl TwoParticleBasis {
    pub fn new(site_count: usize) -> Self {
        let mut pairs = Vec::with_capacity(site_count * (site_count + 1) / 2);
        for l1 in 0..site_count {
            for l2 in l1..site_count {
                pairs.push((l1, l2));
            }
        }
        TwoParticleBasis { site_count, pairs }
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    /// `N (N + 1) / 2`
    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    /// Index of `|l1 l2>`; the order of the two labels does not matter.
    pub fn index(&self, l1: usize, l2: usize) -> usize {
        let (a, b) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        debug_assert!(b < self.site_count);
        // rows before `a` hold n + (n - 1) + ... + (n - a + 1) states
        a * self.site_count - a * a.saturating_sub(1) / 2 + (b - a)
    }

    pub fn pair(&self, index: usize) -> (usize, usize) {
        self.pairs[index]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn doublon_index(&self, site: usize) -> usize {
        self.index(site, site)
    }

    pub fn is_doublon(&self, index: usize) -> bool {
        let (a, b) = self.pairs[index];
        a == b
    }
}

/// Normalized amplitudes over a [`TwoParticleBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct TwoParticleState {
    pub amplitudes: CVector,
}

impl TwoParticleState {
    pub fn new(amplitudes: CVector) -> Self {
        TwoParticleState { amplitudes }
    }

    /// Both particles on `site`.
    pub fn doublon(basis: &TwoParticleBasis, site: usize) -> Self {
        let mut amplitudes = CVector::from_element(basis.dim(), ZERO);
        amplitudes[basis.doublon_index(site)] = ONE;
        TwoParticleState { amplitudes }
    }

    /// Normalized `a_phi^dagger a_chi^dagger |0>` for single-particle
    /// orbitals `phi` and `chi`.
    pub fn symmetrized_product(basis: &TwoParticleBasis, phi: &CVector, chi: &CVector) -> Self {
        let mut amplitudes = CVector::from_element(basis.dim(), ZERO);
        for (idx, &(a, b)) in basis.pairs().iter().enumerate() {
            amplitudes[idx] = if a == b {
                phi[a] * chi[a] * std::f64::consts::SQRT_2
            } else {
                phi[a] * chi[b] + phi[b] * chi[a]
            };
        }
        let norm = amplitudes.norm();
        TwoParticleState { amplitudes: amplitudes / Complex64::new(norm, 0.0) }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

/// `sin(x/2) / x`, continuous through `x = 0`.
fn half_sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        0.5 - x2 / 48.0 + x2 * x2 / 3840.0
    } else {
        (0.5 * x).sin() / x
    }
}

/// Closed-form evolution of two bosons on one coupled pair of sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBlock {
    pub theta: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub phi: f64,
    pub u11: Complex64,
    pub u12: Complex64,
    pub u13: Complex64,
    pub u22: Complex64,
}

impl PairBlock {
    /// Assembled 3x3 matrix on `{|ii>, |ij>, |jj>}`.
    pub fn matrix(&self) -> [[Complex64; 3]; 3] {
        let g = cis(-0.5 * self.gamma);
        let e1 = cis(self.phi);
        let e2 = cis(2.0 * self.phi);
        [
            [g * self.u11, g * self.u12 * e1, g * self.u13 * e2],
            [g * self.u12 * e1.conj(), g * self.u22, g * self.u12 * e1],
            [g * self.u13 * e2.conj(), g * self.u12 * e1.conj(), g * self.u11],
        ]
    }

    pub fn to_dense(&self) -> CMatrix {
        let m = self.matrix();
        CMatrix::from_fn(3, 3, |r, c| m[r][c])
    }
}

pub fn pair_block(theta: f64, gamma: f64, phi: f64) -> PairBlock {
    let gamma_prime = (gamma * gamma + 16.0 * theta * theta).sqrt();
    let s = half_sinc(gamma_prime);
    let c = (0.5 * gamma_prime).cos();
    let half = cis(-0.5 * gamma);
    // (g / g') sin(g'/2) = g * s
    let gs = Complex64::new(0.0, gamma * s);
    PairBlock {
        theta,
        gamma,
        gamma_prime,
        phi,
        u11: 0.5 * (half + c - gs),
        u12: I * (2.0 * std::f64::consts::SQRT_2 * theta * s),
        u13: 0.5 * (-half + c - gs),
        u22: c + gs,
    }
}

/// Sign of the on-site interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InteractionSign {
    #[default]
    Repulsive,
    Attractive,
}

impl InteractionSign {
    pub fn factor(self) -> f64 {
        match self {
            InteractionSign::Repulsive => 1.0,
            InteractionSign::Attractive => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        })
    }
}

/// `|U| / J` for which doublons decouple at hopping angle `theta`:
/// `(U/J)^2 = 4 k^2 / (theta/pi)^2 - 16`.
pub fn decoupling_ratio(theta: f64, k: u32) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be a positive integer".into()));
    }
    let t = theta / PI;
    let k = k as f64;
    let rhs = 4.0 * k * k / (t * t) - 16.0;
    if rhs < -1e-12 {
        return Err(Error::NoSolution { theta_over_pi: t, k: k as u32 });
    }
    Ok(rhs.max(0.0).sqrt())
}

/// Reduces an angle to `[0, pi)`.
pub fn reduce_angle_pi(x: f64) -> f64 {
    let y = x.rem_euclid(PI);
    if PI - y < 1e-13 {
        0.0
    } else {
        y
    }
}

/// Reduces an angle to `(-pi/2, pi/2]`.
pub fn reduce_angle_symmetric(x: f64) -> f64 {
    let y = reduce_angle_pi(x);
    if y > 0.5 * PI {
        y - PI
    } else {
        y
    }
}

/// `theta'` of one branch, reduced to `[0, pi)`.
pub fn theta_prime_branch(theta: f64, k: u32, branch: Branch) -> Result<f64> {
    let kf = k as f64;
    let r = 2.0 * theta / PI;
    let disc = kf * kf - r * r;
    if disc < -1e-12 {
        return Err(Error::NoSolution { theta_over_pi: theta / PI, k });
    }
    let root = disc.max(0.0).sqrt();
    Ok(reduce_angle_pi(0.5 * PI * ((k % 2) as f64 + branch.sign() * root)))
}

/// Hopping angle, reduced to `[0, pi)`, encoded in the doublon entries of
/// an exact pair block at a decoupling point.
pub fn reduced_doublon_angle(block: &PairBlock) -> f64 {
    // U11 = e^{i chi} cos theta', U13 = e^{i chi} i sin theta'
    let c = block.u11;
    let s = -I * block.u13;
    let reference = if c.norm() >= s.norm() { c } else { s };
    let phase = reference / reference.norm();
    let cos_t = (c * phase.conj()).re;
    let sin_t = (s * phase.conj()).re;
    reduce_angle_pi(sin_t.atan2(cos_t))
}

fn angle_distance_mod_pi(a: f64, b: f64) -> f64 {
    reduce_angle_symmetric(a - b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecouplingSolution {
    pub k: u32,
    pub theta: f64,
    /// `|U| / J`
    pub u_over_j: f64,
    pub sign: InteractionSign,
    /// Effective doublon hopping angle in `[0, pi)`.
    pub theta_prime: f64,
    pub phi_prime: f64,
    pub branch: Branch,
}

impl DecouplingSolution {
    /// `gamma = U tau` with its sign.
    pub fn gamma(&self) -> f64 {
        self.sign.factor() * self.u_over_j * self.theta
    }
}

/// Decoupling point for repulsive interactions.
pub fn effective_parameters(theta: f64, k: u32, phi: f64) -> Result<DecouplingSolution> {
    effective_parameters_signed(theta, k, phi, InteractionSign::Repulsive)
}

/// Decoupling point and effective doublon parameters. Both branches of the
/// `theta'` formula are evaluated; the one reproducing the exact pair block
/// at this point is kept.
pub fn effective_parameters_signed(
    theta: f64,
    k: u32,
    phi: f64,
    sign: InteractionSign,
) -> Result<DecouplingSolution> {
    let u_over_j = decoupling_ratio(theta, k)?;
    let gamma = sign.factor() * u_over_j * theta;
    let exact = reduced_doublon_angle(&pair_block(theta, gamma, 0.0));
    let plus = theta_prime_branch(theta, k, Branch::Plus)?;
    let minus = theta_prime_branch(theta, k, Branch::Minus)?;
    let (dp, dm) = (angle_distance_mod_pi(plus, exact), angle_distance_mod_pi(minus, exact));
    // where both branches coincide, keep the one the sign normally selects
    const TIE: f64 = 1e-9;
    let prefer_plus = match sign {
        InteractionSign::Repulsive => dp <= dm + TIE,
        InteractionSign::Attractive => dp + TIE < dm,
    };
    let (branch, theta_prime) = if prefer_plus { (Branch::Plus, plus) } else { (Branch::Minus, minus) };
    Ok(DecouplingSolution {
        k,
        theta,
        u_over_j,
        sign,
        theta_prime,
        phi_prime: 2.0 * phi,
        branch,
    })
}

/// CSV with header `k,theta_over_pi,u_over_j,theta_prime_over_pi,branch`.
pub fn decoupling_csv(rows: &[DecouplingSolution]) -> String {
    use crate::fmt::num;
    let mut out = String::from("k,theta_over_pi,u_over_j,theta_prime_over_pi,branch\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.k,
            num(r.theta / PI),
            num(r.u_over_j),
            num(r.theta_prime / PI),
            r.branch
        ));
    }
    out
}

/// A small dense block acting on a subset of basis indices.
#[derive(Debug, Clone)]
pub struct Block {
    pub indices: Vec<usize>,
    /// Row-major `indices.len() x indices.len()` entries.
    pub entries: Vec<Complex64>,
}

/// Block-diagonal unitary: disjoint dense blocks plus diagonal phases on
/// every index not covered by a block.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    pub dim: usize,
    pub blocks: Vec<Block>,
    pub diagonal: Vec<(usize, Complex64)>,
}

impl BlockOperator {
    pub fn apply(&self, v: &mut CVector) {
        let mut scratch = Vec::with_capacity(4);
        for b in &self.blocks {
            let m = b.indices.len();
            scratch.clear();
            scratch.extend(b.indices.iter().map(|&i| v[i]));
            for (r, &row) in b.indices.iter().enumerate() {
                let mut acc = ZERO;
                for c in 0..m {
                    acc += b.entries[r * m + c] * scratch[c];
                }
                v[row] = acc;
            }
        }
        for &(i, p) in &self.diagonal {
            v[i] *= p;
        }
    }

    /// `M <- self * M`
    pub fn apply_left(&self, mat: &mut CMatrix) {
        for col in 0..mat.ncols() {
            let mut v = mat.column(col).into_owned();
            self.apply(&mut v);
            mat.set_column(col, &v);
        }
    }

    /// Indices outside every block and the diagonal list are untouched.
    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::identity(self.dim, self.dim);
        for b in &self.blocks {
            let k = b.indices.len();
            for (r, &row) in b.indices.iter().enumerate() {
                for (c, &col) in b.indices.iter().enumerate() {
                    m[(row, col)] = b.entries[r * k + c];
                }
            }
        }
        for &(i, p) in &self.diagonal {
            m[(i, i)] = p;
        }
        m
    }
}

/// Two-particle unitary of one hopping step with on-site interaction
/// `gamma = U tau`:
///
/// * both particles on one coupled pair: the 3x3 [`PairBlock`];
/// * one particle on a coupled pair, the other idle: the single-particle
///   hopping block (the particles never share a site);
/// * particles on two different coupled pairs: the tensor product of the
///   two hopping blocks;
/// * both idle: `e^{-i gamma}` for a doublon, `1` otherwise.
pub fn two_particle_step_unitary(
    step: &HoppingStep,
    lattice: &LatticeSpec,
    basis: &TwoParticleBasis,
    theta: f64,
    gamma: f64,
) -> BlockOperator {
    let n = lattice.site_count();
    assert_eq!(basis.site_count(), n, "basis and lattice disagree on site count");
    let links = &step.links;
    let mut paired = vec![false; n];
    for l in links {
        paired[l.i] = true;
        paired[l.j] = true;
    }
    let singles: Vec<[[Complex64; 2]; 2]> =
        links.iter().map(|l| hopping_block(theta, l.phase)).collect();
    let mut blocks = Vec::new();
    let mut covered = vec![false; basis.dim()];

    for (p, link) in links.iter().enumerate() {
        let (i, j) = (link.i, link.j);
        // both particles on the pair
        let m = pair_block(theta, gamma, link.phase).matrix();
        let idx = vec![basis.index(i, i), basis.index(i, j), basis.index(j, j)];
        let entries = m.iter().flat_map(|row| row.iter().copied()).collect();
        blocks.push(Block { indices: idx, entries });

        // one particle on the pair, a spectator elsewhere
        let u = singles[p];
        for spectator in 0..n {
            if paired[spectator] {
                continue;
            }
            let idx = vec![basis.index(i, spectator), basis.index(j, spectator)];
            let entries = vec![u[0][0], u[0][1], u[1][0], u[1][1]];
            blocks.push(Block { indices: idx, entries });
        }

        // particles on two different pairs
        for (q, other) in links.iter().enumerate().skip(p + 1) {
            let v = singles[q];
            let a = [i, j];
            let b = [other.i, other.j];
            let mut idx = Vec::with_capacity(4);
            for &x in &a {
                for &y in &b {
                    idx.push(basis.index(x, y));
                }
            }
            let mut entries = Vec::with_capacity(16);
            for ra in 0..2 {
                for rb in 0..2 {
                    for ca in 0..2 {
                        for cb in 0..2 {
                            entries.push(u[ra][ca] * v[rb][cb]);
                        }
                    }
                }
            }
            blocks.push(Block { indices: idx, entries });
        }
    }
    for b in &blocks {
        for &i in &b.indices {
            debug_assert!(!covered[i], "overlapping blocks");
            covered[i] = true;
        }
    }
    let idle_doublon = cis(-gamma);
    let diagonal = (0..basis.dim())
        .filter(|&i| !covered[i])
        .filter_map(|i| basis.is_doublon(i).then_some((i, idle_doublon)))
        .collect();
    BlockOperator { dim: basis.dim(), blocks, diagonal }
}

/// Per-step two-particle operators of a whole schedule, in time order.
pub fn two_particle_steps(
    schedule: &HoppingSchedule,
    basis: &TwoParticleBasis,
    theta: f64,
    gamma: f64,
) -> Vec<BlockOperator> {
    schedule
        .steps
        .iter()
        .map(|s| two_particle_step_unitary(s, &schedule.lattice, basis, theta, gamma))
        .collect()
}

/// Dense one-period two-particle Floquet operator.
pub fn two_particle_floquet_operator(
    schedule: &HoppingSchedule,
    theta: f64,
    gamma: f64,
) -> CMatrix {
    let basis = TwoParticleBasis::new(schedule.lattice.site_count());
    let mut m = CMatrix::identity(basis.dim(), basis.dim());
    for op in two_particle_steps(schedule, &basis, theta, gamma) {
        op.apply_left(&mut m);
    }
    m
}

/// Doublon block `P U(T) P` of the two-particle Floquet operator.
#[derive(Debug, Clone)]
pub struct ProjectedFloquet {
    /// `N_sites x N_sites`, indexed by doublon site.
    pub matrix: CMatrix,
    /// Max entry of `M^dagger M - 1`.
    pub unitarity_defect: f64,
    /// Worst-case probability of leaving the doublon subspace in one
    /// period, `1 - sigma_min^2`.
    pub leakage: f64,
}

pub fn doublon_projected_floquet(
    schedule: &HoppingSchedule,
    theta: f64,
    gamma: f64,
) -> ProjectedFloquet {
    let n = schedule.lattice.site_count();
    let basis = TwoParticleBasis::new(n);
    let full = two_particle_floquet_operator(schedule, theta, gamma);
    let matrix = CMatrix::from_fn(n, n, |r, c| {
        full[(basis.doublon_index(r), basis.doublon_index(c))]
    });
    let unitarity_defect = linalg::unitarity_defect(&matrix);
    let sigma_min = matrix
        .clone()
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    ProjectedFloquet { matrix, unitarity_defect, leakage: (1.0 - sigma_min * sigma_min).max(0.0) }
}

/// Doublon-subspace Floquet operator predicted by the effective one-body
/// model at a decoupling point.
///
/// Relative to an idle doublon (phase `e^{-i gamma}` per step) a doublon on
/// a coupled pair evolves with `e^{i theta'} U_H(theta', 2 phi)`; the extra
/// `e^{i theta'}` is invariant under `theta' -> theta' + pi`. On lattices
/// where every site is coupled in every step it is a global phase, and the
/// result is the single-particle Floquet operator at `(theta', 2 phi)` up
/// to one phase per period.
pub fn effective_doublon_floquet(schedule: &HoppingSchedule, sol: &DecouplingSolution) -> CMatrix {
    let n = schedule.lattice.site_count();
    let gamma = sol.gamma();
    let idle = cis(-gamma);
    let coupled = idle * cis(sol.theta_prime);
    let mut m = CMatrix::identity(n, n);
    for step in &schedule.steps {
        let partners = step.partners();
        for site in 0..n {
            if !partners.contains_key(&site) {
                let mut row = m.row_mut(site);
                row *= idle;
            }
        }
        for link in &step.links {
            let b = hopping_block(sol.theta_prime, 2.0 * link.phase);
            for c in 0..n {
                let vi = m[(link.i, c)];
                let vj = m[(link.j, c)];
                m[(link.i, c)] = coupled * (b[0][0] * vi + b[0][1] * vj);
                m[(link.j, c)] = coupled * (b[1][0] * vi + b[1][1] * vj);
            }
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteRow {
    pub k: u32,
    pub u_over_j: f64,
    /// `theta'` reduced to `(-pi/2, pi/2]`.
    pub theta_prime_reduced: f64,
    /// Perturbative estimate `2 J theta / |U|`.
    pub perturbative: f64,
    /// `| |theta'| - 2 theta J / |U| | / (2 theta J / |U|)`.
    pub relative_error: f64,
    /// `J_eff = |theta'| / tau`.
    pub j_eff: f64,
    /// `J_eff |U| / (2 J^2)`, tends to 1.
    pub j_eff_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteReport {
    pub theta: f64,
    pub rows: Vec<AsymptoteRow>,
    /// Relative error shrinks with every increase of `k` in the list.
    pub error_decreasing: bool,
    /// `J_eff |U| / 2J^2` approaches 1 monotonically along the list.
    pub ratio_monotone: bool,
}

/// Compares exact decoupling points at growing `k` with the strong-coupling
/// doublon hopping `J_eff = 2 J^2 / |U|`.
pub fn strong_u_asymptote_check(theta: f64, k_list: &[u32]) -> Result<AsymptoteReport> {
    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let sol = effective_parameters(theta, k, 0.0)?;
        let reduced = reduce_angle_symmetric(sol.theta_prime);
        let perturbative = 2.0 * theta / sol.u_over_j;
        let j_eff = reduced.abs() / theta;
        rows.push(AsymptoteRow {
            k,
            u_over_j: sol.u_over_j,
            theta_prime_reduced: reduced,
            perturbative,
            relative_error: (reduced.abs() - perturbative).abs() / perturbative,
            j_eff,
            j_eff_ratio: j_eff * sol.u_over_j / 2.0,
        });
    }
    let error_decreasing = rows.windows(2).all(|w| w[1].relative_error < w[0].relative_error);
    let ratio_monotone = rows
        .windows(2)
        .all(|w| (w[1].j_eff_ratio - 1.0).abs() < (w[0].j_eff_ratio - 1.0).abs());
    Ok(AsymptoteReport { theta, rows, error_decreasing, ratio_monotone })
}
