use blockpd::projection::{project_box, project_nonneg_l1, BoxSet, NonnegL1Ball};
use nalgebra::DVector;
use proptest::prelude::*;

mod common;
use common::brute_force_l1;

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[test]
fn l1_hand_value() {
    let ball = NonnegL1Ball::new(1.0, 2).unwrap();
    let p = project_nonneg_l1(&ball, &dv(&[0.6, 0.6]));
    assert!((p - dv(&[0.5, 0.5])).amax() < 1e-15);
}

#[test]
fn l1_hand_value_agrees_with_grid() {
    let p = brute_force_l1(&dv(&[0.6, 0.6]), 1.0);
    assert!((p - dv(&[0.5, 0.5])).amax() < 2e-3);
}

#[test]
fn box_clamps_benchmark_range() {
    let b = BoxSet::new(dv(&[0.0]), dv(&[10.0])).unwrap();
    assert_eq!(project_box(&b, &dv(&[12.0]))[0], 10.0);
    assert_eq!(project_box(&b, &dv(&[-3.0]))[0], 0.0);
}

#[test]
fn zero_radius_projects_to_origin() {
    let ball = NonnegL1Ball::new(0.0, 3).unwrap();
    assert_eq!(project_nonneg_l1(&ball, &dv(&[1.0, -2.0, 3.0])), DVector::zeros(3));
}

fn vector(dim: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    dim.prop_flat_map(|d| prop::collection::vec(-3.0f64..3.0, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn l1_matches_grid_search(v in vector(2..=4), radius in 0.2f64..2.0) {
        let v = DVector::from_vec(v);
        let ball = NonnegL1Ball::new(radius, v.len()).unwrap();
        let p = project_nonneg_l1(&ball, &v);
        let g = brute_force_l1(&v, radius);
        prop_assert!((&p - &g).amax() < 2e-3, "projection {p} vs grid {g}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn l1_is_non_expansive(pair in (1usize..8).prop_flat_map(|d| (
        prop::collection::vec(-10.0f64..10.0, d),
        prop::collection::vec(-10.0f64..10.0, d),
    )), radius in 0.0f64..20.0) {
        let (a, b) = (DVector::from_vec(pair.0), DVector::from_vec(pair.1));
        let ball = NonnegL1Ball::new(radius, a.len()).unwrap();
        let (pa, pb) = (project_nonneg_l1(&ball, &a), project_nonneg_l1(&ball, &b));
        prop_assert!((pa - pb).norm() <= (a - b).norm() + 1e-12);
    }

    #[test]
    fn box_is_non_expansive(pair in (1usize..8).prop_flat_map(|d| (
        prop::collection::vec(-10.0f64..10.0, d),
        prop::collection::vec(-10.0f64..10.0, d),
    ))) {
        let (a, b) = (DVector::from_vec(pair.0), DVector::from_vec(pair.1));
        let set = BoxSet::new(DVector::from_element(a.len(), -1.0), DVector::from_element(a.len(), 2.0)).unwrap();
        prop_assert!((project_box(&set, &a) - project_box(&set, &b)).norm() <= (a - b).norm() + 1e-12);
    }
}

proptest! {
    #[test]
    fn l1_is_feasible_and_idempotent(v in vector(1..=10), radius in 0.0f64..5.0) {
        let v = DVector::from_vec(v);
        let ball = NonnegL1Ball::new(radius, v.len()).unwrap();
        let p = project_nonneg_l1(&ball, &v);
        prop_assert!(ball.contains(&p, 1e-12));
        let pp = project_nonneg_l1(&ball, &p);
        prop_assert!((pp - &p).amax() <= 1e-12);
    }

    #[test]
    fn l1_optimality_conditions(v in vector(1..=10), radius in 0.1f64..5.0) {
        // <v - p, y - p> <= 0 for every vertex y of the set.
        let v = DVector::from_vec(v);
        let d = v.len();
        let ball = NonnegL1Ball::new(radius, d).unwrap();
        let p = project_nonneg_l1(&ball, &v);
        let mut vertices = vec![DVector::zeros(d)];
        for j in 0..d {
            let mut e = DVector::zeros(d);
            e[j] = radius;
            vertices.push(e);
        }
        for y in vertices {
            prop_assert!((&v - &p).dot(&(y - &p)) <= 1e-9);
        }
    }

    #[test]
    fn box_is_feasible_and_idempotent(v in vector(1..=10)) {
        let v = DVector::from_vec(v);
        let set = BoxSet::new(DVector::from_element(v.len(), -1.0), DVector::from_element(v.len(), 2.0)).unwrap();
        let p = project_box(&set, &v);
        prop_assert!(set.contains(&p, 0.0));
        prop_assert_eq!(project_box(&set, &p), p);
    }
}
