mod common;

use std::f64::consts::PI;

use common::{c, expm_taylor};
use fdsim_core::linalg::{self, CMatrix};
use fdsim_core::stability::*;
use fdsim_core::twoparticle::{decoupling_ratio, effective_parameters};
use proptest::prelude::*;

/// The four-boson Hamiltonian written out from its definition.
fn reference_hamiltonian(u: f64, u3: f64, u4: f64) -> CMatrix {
    let ht = u3 + 3.0 * u;
    let hq = u4 + 4.0 * u3 + 6.0 * u;
    let mut h = CMatrix::zeros(5, 5);
    h[(0, 0)] = c(2.0 * u, 0.0);
    for (a, b, v) in [(0, 1, -(6f64).sqrt()), (0, 2, -(6f64).sqrt()), (1, 3, -2.0), (2, 4, -2.0)] {
        h[(a, b)] = c(v, 0.0);
        h[(b, a)] = c(v, 0.0);
    }
    h[(1, 1)] = c(ht, 0.0);
    h[(2, 2)] = c(ht, 0.0);
    h[(3, 3)] = c(hq, 0.0);
    h[(4, 4)] = c(hq, 0.0);
    h
}

fn reference_p_dec(theta: f64, k: u32, u3: f64, u4: f64) -> f64 {
    let u = decoupling_ratio(theta, k).unwrap();
    1.0 - expm_taylor(&reference_hamiltonian(u, u3, u4), theta)[(0, 0)].norm_sqr()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn decay_matches_reference(k in 1u32..5, frac in 0.01..1.0f64, u3 in 0.0..12.0f64, u4 in 0.0..5.0f64) {
        let theta = frac * PI.min(k as f64 * PI / 2.0);
        let r = decay_probability(theta, k, u3, u4).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.p_dec));
        prop_assert!((r.p_dec - reference_p_dec(theta, k, u3, u4)).abs() < 1e-10);
        let h = build_quad_hamiltonian(1.0, r.u_over_j, u3, u4);
        prop_assert_eq!(&h.matrix, &reference_hamiltonian(r.u_over_j, u3, u4));
        let m = h.propagator(theta);
        prop_assert!(linalg::unitarity_defect(&m) < 1e-12);
        // a <-> b exchange symmetry
        prop_assert!((m[(0, 1)] - m[(0, 2)]).norm() < 1e-12);
        prop_assert!((m[(0, 3)] - m[(0, 4)]).norm() < 1e-12);
    }

    #[test]
    fn inversion_round_trips(k in 1u32..5, frac in 0.02..1.0f64) {
        let theta = frac * PI.min(k as f64 * PI / 2.0);
        let tp = effective_parameters(theta, k, 0.0).unwrap().theta_prime;
        let back = invert_theta_prime(tp, k).unwrap();
        prop_assert!((back - theta).abs() < 1e-8, "theta {} back {}", theta, back);
        let again = effective_parameters(back, k, 0.0).unwrap().theta_prime;
        prop_assert!(fdsim_core::twoparticle::reduce_angle_symmetric(again - tp).abs() < 1e-10);
    }
}

#[test]
fn quoted_decay_values() {
    let wp = decay_at_theta_prime(0.6 * PI, 2, 0.0, 0.0).unwrap();
    assert!((wp.theta - 0.8 * PI).abs() < 1e-10);
    assert!((wp.u_over_j - 3.0).abs() < 1e-10);
    assert!((wp.p_dec - 0.08).abs() <= 0.01, "{}", wp.p_dec);
    let strong = decay_at_theta_prime(0.6 * PI, 2, 10.0, 0.0).unwrap();
    assert!((strong.p_dec - 0.04).abs() <= 0.01, "{}", strong.p_dec);
    assert!(strong.p_dec < wp.p_dec);
    let tuned = decay_at_theta_prime(0.6 * PI, 2, 0.45, 1.0).unwrap();
    assert!(tuned.p_dec <= 2.5e-4, "{}", tuned.p_dec);
}

#[test]
fn better_angle_near_042_pi() {
    let grid: Vec<f64> = linspace(0.35, 0.5, 151).into_iter().map(|x| x * PI).collect();
    let t = sweep_pdec(&[2], &grid, 0.0, 0.0).unwrap();
    let best = t.rows.iter().min_by(|a, b| a.p_dec.total_cmp(&b.p_dec)).unwrap();
    assert!(best.p_dec <= 0.005, "{}", best.p_dec);
    assert!((best.theta_prime / PI - 0.42).abs() < 0.01, "{}", best.theta_prime / PI);
}

#[test]
fn sweep_shapes() {
    let grid: Vec<f64> = linspace(0.005, 0.995, 199).into_iter().map(|x| x * PI).collect();
    let free = sweep_pdec(&[1, 2, 3, 4], &grid, 0.0, 0.0).unwrap();
    // a window around pi/2 on the working curve
    let window: Vec<_> = free.curve(2).filter(|r| (r.theta_prime / PI - 0.5).abs() <= 0.1 + 1e-9).collect();
    assert_eq!(window.len(), 41);
    assert!(window.iter().all(|r| r.p_dec < 0.10));
    let strong = sweep_pdec(&[1, 2, 3, 4], &grid, 10.0, 0.0).unwrap();
    for k in 1..=4 {
        assert!(strong.curve(k).count() > 10);
        assert!(strong.curve(k).all(|r| r.p_dec < 0.30), "k={k}");
    }
    // rows ordered by k, then theta'
    let keys: Vec<(u32, f64)> = strong.rows.iter().map(|r| (r.k, r.theta_prime)).collect();
    assert!(keys.windows(2).all(|w| w[0].0 < w[1].0 || (w[0].0 == w[1].0 && w[0].1 < w[1].1)));
    assert_eq!(strong.rows.len() + strong.skipped.len(), 4 * 199);
    assert_eq!(sweep_pdec(&[1, 2, 3, 4], &grid, 10.0, 0.0).unwrap().to_csv(), strong.to_csv());
    assert!(strong.to_csv().starts_with("k,theta_prime_over_pi,theta_over_pi,u_over_j,u3_over_j,u4_over_j,p_dec\n"));
}

#[test]
fn four_body_term_only_helps_at_strong_three_body_coupling() {
    let base = decay_at_theta_prime(0.6 * PI, 2, 10.0, 0.0).unwrap().p_dec;
    let mut worst: f64 = 0.0;
    for u4 in [1.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e6] {
        let p = decay_at_theta_prime(0.6 * PI, 2, 10.0, u4).unwrap().p_dec;
        assert!(p <= base, "U''={u4}: {p} vs {base}");
        worst = worst.max(base - p);
    }
    // quadruplets leave resonance entirely; the shift saturates at 1.9e-2
    assert!((worst - 0.019044).abs() < 1e-5, "{worst}");
    let grid: Vec<f64> = linspace(0.005, 0.995, 199).into_iter().map(|x| x * PI).collect();
    let t = sweep_pdec(&[1, 2, 3, 4], &grid, 10.0, 1e6).unwrap();
    assert!(t.rows.iter().all(|r| r.p_dec < 0.30));
}

#[test]
fn tuned_couplings_form_a_local_minimum() {
    let b = SearchBox::new((0.0, 2.0), (0.0, 2.0)).unwrap();
    let r = tune_interactions(0.6 * PI, 2, b).unwrap();
    assert!(r.p_dec <= 2e-4, "{}", r.p_dec);
    assert!(r.p_dec <= r.grid_best.2);
    let at = |u3: f64, u4: f64| decay_at_theta_prime(0.6 * PI, 2, u3, u4).unwrap().p_dec;
    assert!((at(r.u3, r.u4) - r.p_dec).abs() < 1e-15);
    for (u3, u4) in [(1.1 * r.u3, r.u4), (0.9 * r.u3, r.u4), (r.u3, 1.1 * r.u4), (r.u3, 0.9 * r.u4)] {
        assert!(at(u3, u4) > r.p_dec, "({u3}, {u4})");
    }
    assert_eq!(tune_interactions(0.6 * PI, 2, b).unwrap(), r);
}

#[test]
fn collapsed_search_box_returns_the_point() {
    let b = SearchBox::new((0.45, 0.45), (1.0, 1.0)).unwrap();
    let r = tune_interactions(0.6 * PI, 2, b).unwrap();
    assert_eq!((r.u3, r.u4), (0.45, 1.0));
    assert_eq!(r.p_dec, decay_at_theta_prime(0.6 * PI, 2, 0.45, 1.0).unwrap().p_dec);
    assert!(SearchBox::new((1.0, 0.0), (0.0, 1.0)).is_err());
}

#[test]
fn unreachable_angles_are_skipped_not_fatal() {
    let t = sweep_pdec(&[3], &[0.1 * PI, 0.9 * PI], 0.0, 0.0).unwrap();
    assert_eq!(t.skipped.len() + t.rows.len(), 2);
    for (k, tp) in &t.skipped {
        assert!(invert_theta_prime(*tp, *k).is_err());
    }
    assert!(sweep_pdec(&[2], &[f64::NAN], 0.0, 0.0).is_err());
}
