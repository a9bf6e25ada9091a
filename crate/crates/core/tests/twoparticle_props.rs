mod common;

use std::f64::consts::PI;

use common::{c, expm_taylor, max_diff, symmetric_isometry, two_particle_h_symmetric};
use fdsim_core::lattice::*;
use fdsim_core::linalg::{self, CMatrix, CVector};
use fdsim_core::singleparticle::{self, floquet_operator, step_unitary};
use fdsim_core::twoparticle::*;
use fdsim_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pair_hamiltonian(u: f64, phi: f64) -> CMatrix {
    let s = -(2f64).sqrt();
    let e = Complex::from_polar(1.0, phi);
    CMatrix::from_row_slice(
        3,
        3,
        &[c(u, 0.0), e * s, c(0.0, 0.0), e.conj() * s, c(0.0, 0.0), e * s, c(0.0, 0.0), e.conj() * s, c(u, 0.0)],
    )
}

type Complex = num_complex::Complex64;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn pair_block_is_the_pair_exponential(theta in 0.01..PI, gamma in -12.0..12.0f64, phi in -PI..PI) {
        let block = pair_block(theta, gamma, phi).to_dense();
        prop_assert!(linalg::unitarity_defect(&block) < 1e-12);
        let exact = expm_taylor(&pair_hamiltonian(gamma / theta, phi), theta);
        prop_assert!(max_diff(&block, &exact) < 1e-12);
    }

    #[test]
    fn steps_conserve_norm(theta in 0.0..PI, gamma in -10.0..10.0f64, seed in any::<u64>()) {
        let spec = LatticeSpec::open(4, 3).unwrap();
        let s = build_hhf_schedule(spec, 0.3).unwrap();
        let basis = TwoParticleBasis::new(12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = CVector::from_fn(basis.dim(), |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let mut v = common::normalized(v);
        for st in &s.steps {
            two_particle_step_unitary(st, &spec, &basis, theta, gamma).apply(&mut v);
            prop_assert!((v.norm() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn step_assembly_matches_first_quantized_exponential() {
    let spec = LatticeSpec::open(3, 3).unwrap();
    let basis = TwoParticleBasis::new(9);
    assert_eq!(basis.dim(), 45);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for n in 0..20 {
        let theta = rng.random_range(0.05..PI);
        let gamma = rng.random_range(-10.0..10.0);
        let phi = rng.random_range(-PI..PI);
        let s = build_hhf_schedule(spec, phi / (2.0 * PI)).unwrap();
        let step = &s.steps[n % 4];
        let assembled = two_particle_step_unitary(step, &spec, &basis, theta, gamma).to_dense();
        let exact = expm_taylor(&two_particle_h_symmetric(step, 9, gamma / theta), theta);
        worst = worst.max(max_diff(&assembled, &exact));
    }
    assert!(worst < 1e-10, "max deviation {worst:.3e}");
}

#[test]
fn non_interacting_step_is_symmetrized_tensor_square() {
    let spec = LatticeSpec::open(3, 3).unwrap();
    let basis = TwoParticleBasis::new(9);
    let s = build_hhf_schedule(spec, 0.25).unwrap();
    let iso = symmetric_isometry(9);
    for (n, theta) in [0.3, 1.1, 2.7, PI / 2.0].into_iter().enumerate() {
        let step = &s.steps[n];
        let u1 = step_unitary(step, &spec, theta).matrix;
        let square = iso.adjoint() * u1.kronecker(&u1) * &iso;
        let two = two_particle_step_unitary(step, &spec, &basis, theta, 0.0).to_dense();
        assert!(max_diff(&two, &square) < 1e-13);
    }
}

#[test]
fn decoupling_iff_u12_vanishes_on_a_grid() {
    for k in 1..=5u32 {
        for m in 1..=40 {
            let theta = PI * m as f64 / 40.0;
            match decoupling_ratio(theta, k) {
                Ok(u) => {
                    assert!(pair_block(theta, u * theta, 0.3).u12.norm() < 1e-12, "k={k} m={m}");
                    assert!(pair_block(theta, -u * theta, 0.3).u12.norm() < 1e-12);
                    // the zero is quadratic in gamma at u = 0, so detune by a fixed amount
                    let off = pair_block(theta, u * theta + 0.2, 0.3).u12.norm();
                    assert!(off > 1e-5, "k={k} m={m} u={u} off={off:e}");
                }
                Err(Error::NoSolution { .. }) => assert!(theta > k as f64 * PI / 2.0),
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn u12_only_vanishes_at_decoupling_points() {
    // scan gamma at fixed theta; zeros of |U12| sit where gamma' = 2 pi k
    let theta = 0.8 * PI;
    let roots: Vec<f64> = (1..=10).filter_map(|k| decoupling_ratio(theta, k).ok()).map(|u| u * theta).collect();
    for m in 0..=4000 {
        let gamma = 40.0 * m as f64 / 4000.0;
        if pair_block(theta, gamma, 0.0).u12.norm() < 1e-3 {
            assert!(roots.iter().any(|r| (r - gamma).abs() < 0.02), "spurious zero near {gamma}");
        }
    }
}

/// Both signs of the branch formula, in [0, pi).
fn branch_values(theta: f64, k: u32) -> (f64, f64) {
    let root = ((k * k) as f64 - (2.0 * theta / PI).powi(2)).sqrt();
    let f = |s: f64| (0.5 * PI * ((k % 2) as f64 + s * root)).rem_euclid(PI);
    (f(1.0), f(-1.0))
}

#[test]
fn selected_branch_reproduces_the_exact_block() {
    for k in 1..=4u32 {
        for m in 1..=20 {
            let theta = (k as f64 * PI / 2.0).min(PI) * m as f64 / 20.0;
            for sign in [InteractionSign::Repulsive, InteractionSign::Attractive] {
                let sol = effective_parameters_signed(theta, k, 0.4, sign).unwrap();
                assert!((0.0..PI).contains(&sol.theta_prime));
                assert!((sol.phi_prime - 0.8).abs() < 1e-15);
                let (plus, minus) = branch_values(theta, k);
                let expected = if sol.branch == Branch::Plus { plus } else { minus };
                assert!(reduce_angle_symmetric(sol.theta_prime - expected).abs() < 1e-10);
                let b = pair_block(theta, sol.gamma(), 0.0);
                assert!((b.u11.norm() - sol.theta_prime.cos().abs()).abs() < 1e-9);
                assert!((b.u13.norm() - sol.theta_prime.sin().abs()).abs() < 1e-9);
                // the doublon block is e^{-i gamma} e^{i theta'} U_H(theta', 0) up to sign
                let g = linalg::cis(-sol.gamma() + sol.theta_prime);
                let d11 = b.matrix()[0][0];
                let d13 = b.matrix()[0][2];
                let expect11 = g * sol.theta_prime.cos();
                let expect13 = g * c(0.0, sol.theta_prime.sin());
                assert!((d11 - expect11).norm() < 1e-9 && (d13 - expect13).norm() < 1e-9, "k={k} theta={theta}");
            }
        }
    }
}

#[test]
fn repulsive_interactions_pick_the_plus_branch() {
    for (theta, k) in [(0.8 * PI, 2), (0.3 * PI, 1), (0.6 * PI, 3), (0.9 * PI, 4)] {
        assert_eq!(effective_parameters(theta, k, 0.0).unwrap().branch, Branch::Plus);
    }
}

#[test]
fn derived_effective_angle_example() {
    let s = effective_parameters(0.6 * PI, 2, 0.0).unwrap();
    assert!((s.theta_prime - 0.8 * PI).abs() < 1e-12);
    assert!((s.u_over_j - (4.0 * 4.0 / 0.36 - 16.0f64).sqrt()).abs() < 1e-12);
}

#[test]
fn projected_operator_diagnostics() {
    let spec = LatticeSpec::open(9, 6).unwrap();
    let s = build_afi_schedule(spec).unwrap();
    let theta = 0.8 * PI;
    let exact = doublon_projected_floquet(&s, theta, 3.0 * theta);
    assert!(exact.unitarity_defect < 1e-10);
    assert!(exact.leakage < 1e-10);
    let detuned = doublon_projected_floquet(&s, theta, 3.15 * theta);
    assert!(detuned.leakage > 1e-3);
    let hhf = build_hhf_schedule(spec, 0.5).unwrap();
    let free = doublon_projected_floquet(&hhf, PI / 4.0, 0.0);
    assert!(free.unitarity_defect > 0.5);
}

/// Single-particle model with doubled hopping phases.
fn doubled_phases(s: &HoppingSchedule) -> HoppingSchedule {
    let mut out = s.clone();
    for st in &mut out.steps {
        for l in &mut st.links {
            l.phase *= 2.0;
        }
    }
    out
}

#[test]
fn doublons_on_a_torus_follow_the_effective_single_particle_drive() {
    let spec = LatticeSpec::new(4, 4, Boundary::Torus).unwrap();
    for (s, theta, k) in [
        (build_afi_schedule(spec).unwrap(), 0.8 * PI, 2),
        (build_hhf_schedule(spec, 0.25).unwrap(), 0.8 * PI, 2),
        (build_hhf_schedule(spec, 0.5).unwrap(), 0.4 * PI, 1),
    ] {
        let sol = effective_parameters(theta, k, 0.0).unwrap();
        let projected = doublon_projected_floquet(&s, theta, sol.gamma()).matrix;
        let single = floquet_operator(&doubled_phases(&s), sol.theta_prime).matrix;
        // one global phase per period, read off the largest entry
        let (r, col) = (0..16 * 16)
            .map(|i| (i / 16, i % 16))
            .max_by(|a, b| single[*a].norm().total_cmp(&single[*b].norm()))
            .unwrap();
        let phase = projected[(r, col)] / single[(r, col)];
        assert!((phase.norm() - 1.0).abs() < 1e-10);
        assert!(max_diff(&projected, &(single * phase)) < 1e-10);
        // same eigenphases up to a uniform shift
        let a = fdsim_core::linalg::unitary_eigen(&projected, 1e-8).unwrap();
        assert!(a.eigenvalues.iter().all(|z| (z.norm() - 1.0).abs() < 1e-10));
    }
}

#[test]
fn doublons_on_an_open_lattice_follow_the_idle_corrected_model() {
    let spec = LatticeSpec::open(6, 4).unwrap();
    for (s, theta, k) in [
        (build_afi_schedule(spec).unwrap(), 0.8 * PI, 2),
        (build_hhf_schedule(spec, 0.5).unwrap(), 0.6 * PI, 3),
    ] {
        let sol = effective_parameters(theta, k, 0.0).unwrap();
        let projected = doublon_projected_floquet(&s, theta, sol.gamma()).matrix;
        let effective = effective_doublon_floquet(&s, &sol);
        assert!(max_diff(&projected, &effective) < 1e-10);
        // the bare theta' model misses the relative phase of idle sites
        let bare = floquet_operator(&doubled_phases(&s), sol.theta_prime).matrix;
        let p = projected[(0, 0)] / bare[(0, 0)];
        assert!(max_diff(&projected, &(bare * p)) > 1e-3);
    }
}

#[test]
fn working_point_doublons_are_topological() {
    let sol = effective_parameters(0.8 * PI, 2, 0.0).unwrap();
    let spec = LatticeSpec::new(40, 2, Boundary::CylinderY).unwrap();
    let s = build_afi_schedule(spec).unwrap();
    let sp = singleparticle::cylinder_spectrum(&s, sol.theta_prime, 32).unwrap();
    // states at the zone edge exist and all sit on the edges
    let near: Vec<_> = sp.entries.iter().filter(|e| e.quasienergy.abs() > 0.4).collect();
    assert!(!near.is_empty());
    assert!(near.iter().all(|e| singleparticle::edge_weight(&e.vector, &spec).is_edge()));
}

#[test]
fn strong_coupling_asymptotics() {
    let r = strong_u_asymptote_check(0.8 * PI, &[20, 50, 100]).unwrap();
    assert!(r.rows[0].relative_error < 0.01);
    assert!(r.rows[1].relative_error < 0.002);
    assert!(r.rows[2].relative_error < 5e-4);
    assert!(r.error_decreasing);
    for row in &r.rows {
        // independent evaluation of the branch formula
        let (plus, _) = branch_values(0.8 * PI, row.k);
        let reduced = if plus > PI / 2.0 { plus - PI } else { plus };
        assert!((reduced - row.theta_prime_reduced).abs() < 1e-10);
        assert!((row.perturbative - 2.0 * 0.8 * PI / row.u_over_j).abs() < 1e-14);
    }
}
