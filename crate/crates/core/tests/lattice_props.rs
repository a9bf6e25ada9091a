use std::collections::HashSet;
use std::f64::consts::PI;

use fdsim_core::lattice::*;
use proptest::prelude::*;

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI { y - 2.0 * PI } else { y }
}

/// Phase picked up hopping `from -> to` along an existing link.
fn hop_phase(s: &HoppingSchedule, from: usize, to: usize) -> f64 {
    for step in &s.steps {
        for l in &step.links {
            // the link term is e^{i phi} a_i^dagger a_j: hopping j -> i
            if l.j == from && l.i == to {
                return l.phase;
            }
            if l.i == from && l.j == to {
                return -l.phase;
            }
        }
    }
    panic!("no link between {from} and {to}");
}

#[test]
fn half_flux_through_every_plaquette_by_enumeration() {
    let spec = LatticeSpec::open(7, 5).unwrap();
    let s = build_hhf_schedule(spec, 0.5).unwrap();
    for x in 0..spec.lx - 1 {
        for y in 0..spec.ly - 1 {
            let a = spec.index(x, y);
            let b = spec.index(x + 1, y);
            let c = spec.index(x + 1, y + 1);
            let d = spec.index(x, y + 1);
            // counter-clockwise loop a -> b -> c -> d -> a
            let total = hop_phase(&s, a, b) + hop_phase(&s, b, c) + hop_phase(&s, c, d) + hop_phase(&s, d, a);
            assert!((wrap(total).abs() - PI).abs() < 1e-12, "plaquette ({x},{y}): {total}");
        }
    }
}

#[test]
fn library_plaquette_flux_is_two_pi_alpha() {
    let spec = LatticeSpec::open(6, 4).unwrap();
    for alpha in [0.0, 0.25, 0.5, 1.0 / 3.0] {
        let s = build_hhf_schedule(spec, alpha).unwrap();
        for (_, flux) in plaquette_fluxes(&s) {
            assert!(wrap(flux - 2.0 * PI * alpha).abs() < 1e-12);
        }
    }
}

#[test]
fn six_by_four_examples() {
    let spec = LatticeSpec::open(6, 4).unwrap();
    let s = build_afi_schedule(spec).unwrap();
    assert_eq!(s.step_count(), 4);
    assert!(validate_schedule(&s).is_valid());
    let total: usize = s.steps.iter().map(|st| st.links.len()).sum();
    assert_eq!(total, 6 * 3 + 4 * 5);
    assert!(s.steps.iter().flat_map(|st| &st.links).all(|l| l.phase == 0.0));
}

#[test]
fn broken_schedules_are_reported() {
    let spec = LatticeSpec::open(6, 4).unwrap();
    let mut s = build_afi_schedule(spec).unwrap();
    let first = s.steps[0].links[0];
    s.steps[0].links.push(Link { i: first.i, j: spec.index(0, 3), phase: 0.0 });
    let report = validate_schedule(&s);
    assert!(!report.is_valid());
    let text = report.to_string();
    assert!(text.contains("step 0"), "{text}");
    assert!(text.contains(&format!("site {}", first.i)), "{text}");
}

#[test]
fn user_supplied_drive_round_trips() {
    let text = r#"{"lattice":{"lx":2,"ly":2,"boundary":"open"},
                   "steps":[[[0,1,0.5]],[[1,3,0.0]],[[2,3,0.0]],[[0,2,0.0]]]}"#;
    let s = HoppingSchedule::from_json(text).unwrap();
    assert_eq!(s.steps[0].links[0].phase, 0.5);
    assert_eq!(HoppingSchedule::from_json(&s.to_json()).unwrap(), s);
    let bad = r#"{"lattice":{"lx":2,"ly":2,"boundary":"open"},"steps":[[[0,3,0.0]]]}"#;
    assert!(HoppingSchedule::from_json(bad).is_err());
}

fn boundary_strategy() -> impl Strategy<Value = (usize, usize, Boundary)> {
    prop_oneof![
        (2usize..9, 2usize..9).prop_map(|(x, y)| (x, y, Boundary::Open)),
        (2usize..9, 1usize..5).prop_map(|(x, y)| (x, 2 * y, Boundary::CylinderY)),
        (1usize..5, 1usize..5).prop_map(|(x, y)| (2 * x, 2 * y, Boundary::Torus)),
    ]
}

proptest! {
    #[test]
    fn every_bond_once_per_period((lx, ly, boundary) in boundary_strategy(), hhf in any::<bool>()) {
        let spec = LatticeSpec::new(lx, ly, boundary).unwrap();
        let s = if hhf && boundary != Boundary::Torus {
            build_hhf_schedule(spec, 0.5).unwrap()
        } else {
            build_afi_schedule(spec).unwrap()
        };
        prop_assert!(validate_schedule(&s).is_valid());
        let mut seen = HashSet::new();
        for step in &s.steps {
            let mut used = HashSet::new();
            for l in &step.links {
                prop_assert!(used.insert(l.i) && used.insert(l.j));
                let b = spec.bond(l.i, l.j);
                prop_assert!(b.is_some());
                prop_assert!(seen.insert((l.i.min(l.j), l.i.max(l.j), b.unwrap().wrapped)));
            }
        }
        prop_assert_eq!(seen.len(), spec.bond_count());
    }
}
