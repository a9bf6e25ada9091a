//! Stroboscopic two-particle propagation and doublon observables.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{HoppingSchedule, LatticeSpec};
use crate::linalg::{self, CMatrix};
use crate::twoparticle::{two_particle_steps, TwoParticleBasis, TwoParticleState};

/// Tolerance on the norm of states entering and leaving an evolution.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Time in drive periods; fractional only for per-step snapshots.
    pub time: f64,
    pub state: TwoParticleState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    /// Snapshot interval in periods.
    pub stride: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn final_state(&self) -> &TwoParticleState {
        &self.snapshots.last().expect("trajectory has an initial snapshot").state
    }

    /// Snapshot at an exact stroboscopic time, if recorded.
    pub fn at(&self, period: usize) -> Option<&TwoParticleState> {
        self.snapshots
            .iter()
            .find(|s| s.time == period as f64)
            .map(|s| &s.state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvolveOptions {
    pub periods: usize,
    pub stride: usize,
    /// Also record the state after every hopping step (debugging aid).
    pub per_step: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { periods: 1, stride: 1, per_step: false }
    }
}

/// Propagates `initial` for `periods` drive periods, snapshotting every
/// `stride` periods (the initial state is always recorded).
pub fn evolve(
    initial: &TwoParticleState,
    schedule: &HoppingSchedule,
    theta: f64,
    gamma: f64,
    periods: usize,
    stride: usize,
) -> Result<Trajectory> {
    evolve_with(initial, schedule, theta, gamma, &EvolveOptions { periods, stride, per_step: false })
}

pub fn evolve_with(
    initial: &TwoParticleState,
    schedule: &HoppingSchedule,
    theta: f64,
    gamma: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let basis = TwoParticleBasis::new(schedule.lattice.site_count());
    if initial.amplitudes.len() != basis.dim() {
        return Err(Error::InvalidArgument(format!(
            "state has dimension {}, lattice needs {}",
            initial.amplitudes.len(),
            basis.dim()
        )));
    }
    if (initial.norm() - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidArgument(format!(
            "initial state is not normalized (norm {})",
            initial.norm()
        )));
    }
    if opts.stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let steps = two_particle_steps(schedule, &basis, theta, gamma);
    let n_steps = steps.len() as f64;
    let mut psi = initial.amplitudes.clone();
    let mut snapshots = vec![Snapshot { time: 0.0, state: initial.clone() }];
    for period in 1..=opts.periods {
        for (s, op) in steps.iter().enumerate() {
            op.apply(&mut psi);
            let last = s + 1 == steps.len();
            if opts.per_step && !last {
                snapshots.push(Snapshot {
                    time: (period - 1) as f64 + (s + 1) as f64 / n_steps,
                    state: TwoParticleState::new(psi.clone()),
                });
            }
        }
        if period % opts.stride == 0 || opts.per_step {
            snapshots.push(Snapshot {
                time: period as f64,
                state: TwoParticleState::new(psi.clone()),
            });
        }
    }
    Ok(Trajectory { snapshots, stride: opts.stride })
}

/// Doublon density `A_l = |<psi|ll>|^2` and its sum `O_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublonObservables {
    pub density: Vec<f64>,
    pub overlap: f64,
}

impl DoublonObservables {
    pub fn of(basis: &TwoParticleBasis, state: &TwoParticleState) -> Self {
        let density = doublon_density(basis, state);
        let overlap = density.iter().sum();
        DoublonObservables { density, overlap }
    }
}

pub fn doublon_density(basis: &TwoParticleBasis, state: &TwoParticleState) -> Vec<f64> {
    (0..basis.site_count())
        .map(|l| state.amplitudes[basis.doublon_index(l)].norm_sqr())
        .collect()
}

/// Weight of the state in the doublon subspace, `O_d = sum_l A_l`.
pub fn doublon_overlap(basis: &TwoParticleBasis, state: &TwoParticleState) -> f64 {
    doublon_density(basis, state).iter().sum()
}

/// Symmetric matrix of pair probabilities; the weight of `|l1 l2>` with
/// `l1 != l2` is split evenly between `(l1, l2)` and `(l2, l1)`, so all
/// entries sum to the squared norm.
pub fn amplitude_matrix(basis: &TwoParticleBasis, state: &TwoParticleState) -> DMatrix<f64> {
    let n = basis.site_count();
    let mut m = DMatrix::zeros(n, n);
    for (idx, &(a, b)) in basis.pairs().iter().enumerate() {
        let p = state.amplitudes[idx].norm_sqr();
        if a == b {
            m[(a, a)] = p;
        } else {
            m[(a, b)] = 0.5 * p;
            m[(b, a)] = 0.5 * p;
        }
    }
    m
}

/// First-quantized coefficient matrix `c(l1, l2)` with `c(l, l)` equal to
/// the doublon amplitude and `c(l1, l2) = amplitude / sqrt 2` otherwise.
pub fn coefficient_matrix(basis: &TwoParticleBasis, state: &TwoParticleState) -> CMatrix {
    let n = basis.site_count();
    let mut c = CMatrix::zeros(n, n);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for (idx, &(a, b)) in basis.pairs().iter().enumerate() {
        let z = state.amplitudes[idx];
        if a == b {
            c[(a, a)] = z;
        } else {
            c[(a, b)] = z * r;
            c[(b, a)] = z * r;
        }
    }
    c
}

/// Entanglement entropy (nats) between the two particles, from the
/// singular values of the coefficient matrix.
pub fn schmidt_entropy(basis: &TwoParticleBasis, state: &TwoParticleState) -> f64 {
    let sv = coefficient_matrix(basis, state).singular_values();
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0.0;
    }
    linalg::entropy(sv.iter().map(|s| s * s / total)).max(0.0)
}

/// Angle of the density centroid about the lattice center, or `None` for a
/// vanishing density.
pub fn centroid_angle(density: &[f64], spec: &LatticeSpec) -> Option<f64> {
    let cx0 = 0.5 * (spec.lx as f64 - 1.0);
    let cy0 = 0.5 * (spec.ly as f64 - 1.0);
    let (mut w, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (site, &a) in density.iter().enumerate() {
        let (x, y) = spec.coords(site);
        w += a;
        sx += a * (x as f64 - cx0);
        sy += a * (y as f64 - cy0);
    }
    (w > 0.0).then(|| sy.atan2(sx))
}

/// Removes `2 pi` jumps from a sequence of angles.
pub fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    for (n, &a) in angles.iter().enumerate() {
        if n > 0 {
            let prev = angles[n - 1];
            let d = a - prev;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        out.push(a + offset);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiralityReport {
    /// Unwrapped centroid angle at every snapshot.
    pub angles: Vec<f64>,
    /// Number of snapshots up to the end of the first full circulation (or
    /// all snapshots if the packet never completes one).
    pub first_traversal: usize,
    /// Angle decreased at every snapshot during the first traversal.
    pub clockwise: bool,
    /// Largest per-snapshot angle increase during the first traversal.
    pub worst_increment: f64,
}

pub fn chirality(trajectory: &Trajectory, spec: &LatticeSpec) -> ChiralityReport {
    let basis = TwoParticleBasis::new(spec.site_count());
    let raw: Vec<f64> = trajectory
        .snapshots
        .iter()
        .filter_map(|s| centroid_angle(&doublon_density(&basis, &s.state), spec))
        .collect();
    let angles = unwrap_angles(&raw);
    let start = angles.first().copied().unwrap_or(0.0);
    let first_traversal = angles
        .iter()
        .position(|&a| start - a >= 2.0 * PI)
        .map(|p| p + 1)
        .unwrap_or(angles.len());
    let worst_increment = angles[..first_traversal]
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    ChiralityReport {
        clockwise: worst_increment < 0.0,
        angles,
        first_traversal,
        worst_increment,
    }
}

/// Largest doublon density on sites at least `depth` rows/columns away from
/// the open boundary, over all snapshots.
pub fn max_interior_density(trajectory: &Trajectory, spec: &LatticeSpec, depth: usize) -> f64 {
    let basis = TwoParticleBasis::new(spec.site_count());
    trajectory
        .snapshots
        .iter()
        .flat_map(|s| {
            let d = doublon_density(&basis, &s.state);
            (0..spec.site_count())
                .filter(|&l| spec.is_interior(l, depth))
                .map(move |l| d[l])
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// Doublon weight on the four outer edges of an open lattice. Corner sites
/// count toward both edges they belong to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeProfile {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
    pub interior: f64,
}

pub fn edge_profile(density: &[f64], spec: &LatticeSpec) -> EdgeProfile {
    let mut p = EdgeProfile { left: 0.0, top: 0.0, right: 0.0, bottom: 0.0, interior: 0.0 };
    for (site, &a) in density.iter().enumerate() {
        let (x, y) = spec.coords(site);
        if x == 0 {
            p.left += a;
        }
        if x + 1 == spec.lx {
            p.right += a;
        }
        if y == 0 {
            p.bottom += a;
        }
        if y + 1 == spec.ly {
            p.top += a;
        }
        if spec.is_interior(site, 1) {
            p.interior += a;
        }
    }
    p
}

/// Serializable trajectory with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub metadata: TrajectoryMetadata,
    pub snapshots: Vec<SnapshotRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetadata {
    pub schedule_hash: String,
    pub theta_over_pi: f64,
    pub u_over_j: f64,
    pub lx: usize,
    pub ly: usize,
    pub boundary: crate::lattice::Boundary,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub time: f64,
    pub overlap: f64,
    pub schmidt_entropy: f64,
    pub density: Vec<f64>,
    /// Row-major `N_sites x N_sites` pair probabilities, if requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub amplitude_matrix: Option<Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn new(
        trajectory: &Trajectory,
        schedule: &HoppingSchedule,
        theta: f64,
        u_over_j: f64,
        with_amplitudes: bool,
    ) -> Self {
        let spec = schedule.lattice;
        let basis = TwoParticleBasis::new(spec.site_count());
        let snapshots = trajectory
            .snapshots
            .iter()
            .map(|s| {
                let obs = DoublonObservables::of(&basis, &s.state);
                SnapshotRecord {
                    time: s.time,
                    overlap: obs.overlap,
                    schmidt_entropy: schmidt_entropy(&basis, &s.state),
                    density: obs.density,
                    amplitude_matrix: with_amplitudes.then(|| {
                        let m = amplitude_matrix(&basis, &s.state);
                        // nalgebra is column-major; the matrix is symmetric
                        m.as_slice().to_vec()
                    }),
                }
            })
            .collect();
        TrajectoryRecord {
            metadata: TrajectoryMetadata {
                schedule_hash: schedule.hash(),
                theta_over_pi: theta / PI,
                u_over_j,
                lx: spec.lx,
                ly: spec.ly,
                boundary: spec.boundary,
                stride: trajectory.stride,
            },
            snapshots,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }
}

/// Density grid as CSV rows `x,y,A`, ordered by site index.
pub fn density_grid_csv(density: &[f64], spec: &LatticeSpec) -> String {
    use crate::fmt::num;
    let mut out = String::from("x,y,A\n");
    for (site, &a) in density.iter().enumerate() {
        let (x, y) = spec.coords(site);
        out.push_str(&format!("{x},{y},{}\n", num(a)));
    }
    out
}

/// `|phi_l|^2` profile of a single-particle state.
pub fn single_particle_profile(phi: &crate::linalg::CVector) -> Vec<f64> {
    phi.iter().map(Complex64::norm_sqr).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_afi_schedule;
    use crate::linalg::{CVector, ONE, ZERO};

    fn basis(n: usize) -> TwoParticleBasis {
        TwoParticleBasis::new(n)
    }

    #[test]
    fn density_examples() {
        let b = basis(4);
        let s = TwoParticleState::doublon(&b, 0);
        assert_eq!(doublon_density(&b, &s), vec![1.0, 0.0, 0.0, 0.0]);

        let mut v = CVector::from_element(b.dim(), ZERO);
        let w = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
        for l in 0..3 {
            v[b.doublon_index(l)] = w;
        }
        let d = doublon_density(&b, &TwoParticleState::new(v));
        for a in &d[..3] {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }

        let mut v = CVector::from_element(b.dim(), ZERO);
        v[b.index(1, 3)] = ONE;
        let s = TwoParticleState::new(v);
        assert_eq!(doublon_overlap(&b, &s), 0.0);
    }

    #[test]
    fn amplitude_matrix_splits_off_diagonal_weight() {
        let b = basis(3);
        let mut v = CVector::from_element(b.dim(), ZERO);
        v[b.index(0, 2)] = ONE;
        let m = amplitude_matrix(&b, &TwoParticleState::new(v));
        assert_eq!(m[(0, 2)], 0.5);
        assert_eq!(m[(2, 0)], 0.5);
        assert_eq!(m.sum(), 1.0);
    }

    #[test]
    fn entropy_of_localized_and_spread_doublons() {
        let b = basis(5);
        assert!(schmidt_entropy(&b, &TwoParticleState::doublon(&b, 2)).abs() < 1e-12);
        let mut v = CVector::from_element(b.dim(), ZERO);
        for l in [0, 1, 4] {
            v[b.doublon_index(l)] = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
        }
        let e = schmidt_entropy(&b, &TwoParticleState::new(v));
        assert!((e - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn product_state_has_zero_entropy() {
        let b = basis(4);
        let phi = CVector::from_vec(vec![
            Complex64::new(0.5, 0.1),
            Complex64::new(-0.3, 0.4),
            Complex64::new(0.2, -0.6),
            Complex64::new(0.1, 0.2),
        ]);
        let phi = &phi / Complex64::new(phi.norm(), 0.0);
        let s = TwoParticleState::symmetrized_product(&b, &phi, &phi);
        assert!((s.norm() - 1.0).abs() < 1e-14);
        assert!(schmidt_entropy(&b, &s).abs() < 1e-10);
    }

    #[test]
    fn zero_angle_evolution_only_adds_phases() {
        let spec = LatticeSpec::open(3, 2).unwrap();
        let s = build_afi_schedule(spec).unwrap();
        let b = basis(6);
        let init = TwoParticleState::doublon(&b, 3);
        let t = evolve(&init, &s, 0.0, 0.7, 3, 1).unwrap();
        assert_eq!(t.snapshots.len(), 4);
        for snap in &t.snapshots {
            assert!((doublon_density(&b, &snap.state)[3] - 1.0).abs() < 1e-14);
        }
        // four steps per period, each e^{-i gamma}
        let z = t.final_state().amplitudes[b.doublon_index(3)];
        assert!((z - linalg::cis(-0.7 * 12.0)).norm() < 1e-12);
    }

    #[test]
    fn stride_and_per_step_snapshots() {
        let spec = LatticeSpec::open(3, 2).unwrap();
        let s = build_afi_schedule(spec).unwrap();
        let b = basis(6);
        let init = TwoParticleState::doublon(&b, 0);
        let t = evolve(&init, &s, 0.3, 0.0, 6, 2).unwrap();
        assert_eq!(t.times(), vec![0.0, 2.0, 4.0, 6.0]);
        let opts = EvolveOptions { periods: 1, stride: 1, per_step: true };
        let t = evolve_with(&init, &s, 0.3, 0.0, &opts).unwrap();
        assert_eq!(t.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(evolve(&init, &s, 0.3, 0.0, 1, 0).is_err());
        let bad = TwoParticleState::new(init.amplitudes.clone() * Complex64::new(2.0, 0.0));
        assert!(evolve(&bad, &s, 0.3, 0.0, 1, 1).is_err());
    }

    #[test]
    fn unwrap_removes_jumps() {
        let a = unwrap_angles(&[3.0, -3.0, -2.5]);
        assert!((a[1] - (2.0 * PI - 3.0)).abs() < 1e-12);
        let a = unwrap_angles(&[-3.0, 3.0]);
        assert!((a[1] - (3.0 - 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn centroid_angle_of_corners() {
        let spec = LatticeSpec::open(3, 3).unwrap();
        let mut d = vec![0.0; 9];
        d[0] = 1.0;
        assert!((centroid_angle(&d, &spec).unwrap() + 0.75 * PI).abs() < 1e-12);
        assert_eq!(centroid_angle(&[0.0; 9], &spec), None);
    }

    #[test]
    fn density_csv_rows() {
        let spec = LatticeSpec::open(2, 2).unwrap();
        let csv = density_grid_csv(&[1.0, 0.0, 0.0, 0.0], &spec);
        assert_eq!(csv, "x,y,A\n0,0,1\n1,0,0\n0,1,0\n1,1,0\n");
    }
}
