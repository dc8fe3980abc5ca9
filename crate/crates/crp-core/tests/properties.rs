use proptest::prelude::*;

use crp_core::geometry::{Bilinear, Chart, Manifold, Sphere, Stereographic};
use crp_core::linalg::{self, Mat64};
use crp_core::order::estimate_order;
use crp_core::roughcore::{rough_integrate, ControlledPath, RoughPath};

/// Strictly increasing times starting at 0 from positive gaps.
fn times_from(gaps: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0];
    for g in gaps {
        t.push(t[t.len() - 1] + g);
    }
    t
}

fn walk(d: usize) -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (2usize..24).prop_flat_map(move |n| {
        (prop::collection::vec(0.01f64..0.5, n), prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), n + 1))
            .prop_map(|(gaps, values)| (times_from(&gaps), values))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn piecewise_linear_lift_satisfies_chen((times, values) in walk(3)) {
        let rp = RoughPath::piecewise_linear(times, values, 2.0).unwrap();
        prop_assert!(rp.chen_residual() <= 1e-12);
        prop_assert!(rp.weak_geometric_residual() <= 1e-12);
    }

    #[test]
    fn restriction_keeps_chen((times, values) in walk(2), cut in 0.0f64..1.0) {
        let rp = RoughPath::piecewise_linear(times, values, 2.5).unwrap();
        let j = 1 + ((rp.steps() - 1) as f64 * cut) as usize;
        let sub = rp.restrict(0, j);
        prop_assert!(sub.chen_residual() <= 1e-12);
        let (x, _) = rp.increment(0, j);
        let (y, _) = sub.increment(0, sub.steps());
        prop_assert!(linalg::dist(&x, &y) <= 1e-14);
    }

    #[test]
    fn constant_integrand_gives_linear_image((times, values) in walk(2), a in prop::collection::vec(-2.0f64..2.0, 4)) {
        let rp = RoughPath::piecewise_linear(times.clone(), values, 2.0).unwrap();
        let y = ControlledPath::from_driver(&rp);
        let alpha = ControlledPath::new(times.clone(), vec![a.clone(); times.len()], vec![Mat64::zeros(4, 2); times.len()]).unwrap();
        let z = rough_integrate(&alpha, &y, &rp).unwrap();
        let (x, _) = rp.increment(0, rp.steps());
        let expected = Mat64::from_row_slice(2, 2, &a).mul_vec(&x);
        prop_assert!(linalg::dist(z.last(), &expected) <= 1e-12);
    }

    #[test]
    fn stereographic_charts_invert(u in prop::collection::vec(-1.4f64..1.4, 2)) {
        let s2 = Sphere::new();
        for c in [Stereographic::north(), Stereographic::south()] {
            let m = c.inverse(&u);
            prop_assert!((linalg::norm(&m) - 1.0).abs() <= 1e-14);
            prop_assert!(linalg::dist(&c.forward(&m), &u) <= 1e-13);
            let dphi = c.differential(&m).matmul(&c.inverse_differential(&u));
            prop_assert!(dphi.sub(&Mat64::identity(2)).max_abs() <= 1e-12);
            prop_assert!(s2.projector(&m).mul_vec(&m).iter().all(|x| x.abs() <= 1e-14));
        }
    }

    #[test]
    fn so3_exp_log_roundtrip(w in prop::collection::vec(-1.7f64..1.7, 3)) {
        let r = linalg::so3_exp(&w);
        prop_assert!(r.transpose().matmul(&r).sub(&Mat64::identity(3)).max_abs() <= 1e-13);
        prop_assert!((r.det() - 1.0).abs() <= 1e-13);
        prop_assert!(linalg::dist(&linalg::so3_log(&r), &w) <= 1e-10);
    }

    #[test]
    fn antisymmetric_bilinear_forms(c in prop::collection::vec(-3.0f64..3.0, 3), m in prop::collection::vec(-1.0f64..1.0, 3)) {
        prop_assume!(linalg::norm(&m) > 0.1);
        let m = linalg::scale(&m, 1.0 / linalg::norm(&m));
        let basis = Sphere::new().tangent_basis(&m);
        let cross = |v: &[f64], w: &[f64]| {
            let x = [v[1] * w[2] - v[2] * w[1], v[2] * w[0] - v[0] * w[2], v[0] * w[1] - v[1] * w[0]];
            vec![linalg::dot(&c, &x)]
        };
        let b = Bilinear::from_fn(basis, cross);
        prop_assert!(b.add(&b.swapped()).max_abs() <= 1e-14);
    }

    #[test]
    fn order_fit_recovers_power_laws(q in 0.5f64..4.0, c in 0.1f64..10.0, levels in 4usize..8) {
        let hs: Vec<f64> = (0..levels).map(|i| 0.5f64.powi(i as i32 + 2)).collect();
        let errors: Vec<f64> = hs.iter().map(|h| c * h.powf(q)).collect();
        let fit = estimate_order(&errors, &hs).unwrap();
        prop_assert!((fit.slope - q).abs() <= 1e-9);
        prop_assert!((fit.constant - c).abs() <= 1e-8 * c);
        prop_assert!(fit.meets(q));
        prop_assert!(!fit.meets(q + 0.5));
    }
}

#[test]
fn order_fit_needs_four_levels() {
    assert!(estimate_order(&[1.0, 0.5, 0.25], &[1.0, 0.5, 0.25]).is_err());
    assert!(estimate_order(&[0.0; 4], &[1.0, 0.5, 0.25, 0.125]).unwrap().exact);
}
