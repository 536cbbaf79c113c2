use std::sync::Arc;

use blockpd::netflow::{generate_benchmark, PartitionPreset, Scale};
use blockpd::problem::*;
use blockpd::projection::BoxSet;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// `g(x) = 0.5 |x|^2 - r`.
#[derive(Debug)]
struct Ball {
    r: f64,
}

impl ConstraintFn for Ball {
    fn len(&self) -> usize {
        1
    }
    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        dv(&[0.5 * x.norm_squared() - self.r])
    }
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, x.len(), x.as_slice())
    }
    fn weighted_hessian(&self, x: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(x.len(), x.len()) * w[0]
    }
}

fn log_problem() -> ProblemSpec {
    ProblemSpec::new(
        Objective::LogUtility { weight: 2.0 },
        Constraints::Affine {
            matrix: DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]),
            offset: dv(&[3.0, 4.0]),
        },
        BoxSet::new(DVector::zeros(3), DVector::from_element(3, 5.0)).unwrap(),
        DVector::zeros(3),
        -2.0 * 3.0 * 6f64.ln(),
    )
    .unwrap()
}

fn ball_problem() -> ProblemSpec {
    ProblemSpec::new(
        Objective::Quadratic {
            hessian: DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 2.0]),
            linear: dv(&[-1.0, 1.0]),
            constant: 0.0,
        },
        Constraints::Custom(Arc::new(Ball { r: 1.0 })),
        BoxSet::new(dv(&[-1.0, -1.0]), dv(&[1.0, 1.0])).unwrap(),
        dv(&[0.0, 0.0]),
        -10.0,
    )
    .unwrap()
}

fn central_difference(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut a = x.clone();
        let mut b = x.clone();
        a[i] += h;
        b[i] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}

fn point_in(bounds: &BoxSet, u: &[f64]) -> DVector<f64> {
    DVector::from_fn(bounds.dim(), |i, _| {
        bounds.lower[i] + (0.05 + 0.9 * u[i]) * (bounds.upper[i] - bounds.lower[i])
    })
}

fn dual_in(geom: &DualGeometry, u: &[f64]) -> DVector<f64> {
    let total: f64 = u.iter().sum::<f64>().max(1.0);
    DVector::from_iterator(u.len(), u.iter().map(|v| v / total * geom.bound * 0.9))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradients_match_finite_differences(
        ux in prop::collection::vec(0.0f64..1.0, 3),
        um in prop::collection::vec(0.0f64..1.0, 2),
        which in 0usize..2,
    ) {
        let p = if which == 0 { log_problem() } else { ball_problem() };
        let geom = DualGeometry::new(&p, 0.3).unwrap();
        let x = point_in(&p.bounds, &ux[..p.n()]);
        let mu = dual_in(&geom, &um[..p.m()]);
        let gx = grad_x(&p, &geom, &x, &mu).unwrap();
        let fd_x = central_difference(|y| p.objective.value(y) + mu.dot(&p.constraints.value(y)), &x, 1e-6);
        prop_assert!((&gx - &fd_x).amax() < 1e-5 * (1.0 + gx.amax()), "{gx} vs {fd_x}");
        let gm = grad_mu(&p, &geom, &x, &mu).unwrap();
        let fd_mu = central_difference(
            |m| p.objective.value(&x) + m.dot(&p.constraints.value(&x)) - 0.5 * geom.delta * m.norm_squared(),
            &mu,
            1e-6,
        );
        prop_assert!((&gm - &fd_mu).amax() < 1e-6 * (1.0 + gm.amax()));
    }

    #[test]
    fn lagrangian_is_affine_in_mu_up_to_the_regularizer(
        ux in prop::collection::vec(0.0f64..1.0, 3),
        ua in prop::collection::vec(0.0f64..1.0, 2),
        ub in prop::collection::vec(0.0f64..1.0, 2),
        t in 0.0f64..1.0,
    ) {
        let p = log_problem();
        let geom = DualGeometry::new(&p, 0.1).unwrap();
        let x = point_in(&p.bounds, &ux);
        let (a, b) = (dual_in(&geom, &ua), dual_in(&geom, &ub));
        let c = &a * t + &b * (1.0 - t);
        let unreg = |m: &DVector<f64>| eval_lagrangian(&p, &geom, &x, m).unwrap() + 0.5 * geom.delta * m.norm_squared();
        prop_assert!((unreg(&c) - (t * unreg(&a) + (1.0 - t) * unreg(&b))).abs() < 1e-10);
        let gc = grad_x(&p, &geom, &x, &c).unwrap();
        let gl = grad_x(&p, &geom, &x, &a).unwrap() * t + grad_x(&p, &geom, &x, &b).unwrap() * (1.0 - t);
        prop_assert!((gc - gl).amax() < 1e-12);
    }
}

#[test]
fn benchmark_constants_are_closed_form() {
    for seed in 0..3 {
        let (net, p) = generate_benchmark(seed, Scale::Full).unwrap();
        let geom = DualGeometry::new(&p, 0.1).unwrap();
        let consts = ProblemConstants::compute(&p, &geom).unwrap();
        assert!(consts.exact);
        assert_eq!(consts.beta, net.weight / 121.0);
        assert_eq!(consts.gamma_max, 1.0 / net.weight);
        let b = net.capacities();
        let expected = (0.0 + net.weight * 15.0 * 11f64.ln()) / b.min();
        assert!((geom.bound - expected).abs() < 1e-12 * expected);
        assert!(geom.bound > 0.0);
    }
}

#[test]
fn benchmark_agent_counts() {
    let (net, _) = generate_benchmark(0, Scale::Full).unwrap();
    let scalar = net.to_problem(PartitionPreset::Scalar).unwrap();
    assert_eq!((scalar.primal_partition.len(), scalar.dual_partition.len()), (15, 66));
    let grouped = net.to_problem(PartitionPreset::Grouped).unwrap();
    assert_eq!((grouped.primal_partition.len(), grouped.dual_partition.len()), (3, 3));
}

#[test]
fn sampled_constants_are_conservative() {
    // Ball constraint adds mu * I to the Hessian; the exact extremes over X x M
    // are beta = 1.5 (row 2 at mu = 0) and max row sum = 3.5 + B.
    let p = ball_problem();
    let geom = DualGeometry::new(&p, 0.1).unwrap();
    let consts = ProblemConstants::compute(&p, &geom).unwrap();
    assert!(!consts.exact);
    assert!(consts.beta <= 1.5 + 1e-12);
    assert!((consts.beta - 0.9 * 1.5).abs() < 1e-12);
    assert!(consts.gamma_max <= 1.0 / (3.5 + geom.bound) + 1e-12);
}

#[test]
fn json_round_trip_of_benchmark() {
    let (net, _) = generate_benchmark(4, Scale::Full).unwrap();
    let p = net.to_problem(PartitionPreset::Grouped).unwrap();
    let text = p.to_json_string().unwrap();
    let q = ProblemSpec::from_json_str(&text).unwrap();
    assert_eq!(q.n(), 15);
    assert_eq!(q.m(), 66);
    assert_eq!(q.primal_partition, p.primal_partition);
    assert_eq!(q.dual_partition, p.dual_partition);
    let x = DVector::from_element(15, 1.5);
    assert_eq!(q.constraints.value(&x), p.constraints.value(&x));
    assert_eq!(q.objective.value(&x), p.objective.value(&x));
}
