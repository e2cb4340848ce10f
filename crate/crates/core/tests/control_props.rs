use coobs_core::assignment::TaskSet;
use coobs_core::control::{
    cbf_always, cbf_conjunction, cbf_eventually, clf_value_grad, eventually_for_deadline, kkt_residuals, qp_solve,
    reference_control, security_filter, BarrierPurpose, CbfInstance, ClassK, ClfKind, ClfSpec, ControlConfig,
    LinearConstraint, QpStatus, SoftBarrier,
};
use coobs_core::{Matrix, Point2};
use proptest::prelude::*;

fn barriers(q: Point2) -> Vec<CbfInstance> {
    let ev = cbf_eventually(q, 0.3, 2.0, 5.0, 0.5, BarrierPurpose::CoObservation).unwrap();
    let al = cbf_always(q, 0.4, 1.0, 4.0, 1.0, 0.5, 1.0, BarrierPurpose::CoObservation).unwrap();
    vec![ev.clone(), al.clone(), cbf_conjunction(ev, al), CbfInstance::clearance(q, 0.2)]
}

proptest! {
    #[test]
    fn gradients_match_finite_differences(
        qx in -2.0f64..2.0, qy in -2.0f64..2.0, x in -3.0f64..3.0, y in -3.0f64..3.0, t in 0.0f64..4.0,
    ) {
        let q = Point2::new(qx, qy);
        let p = Point2::new(x, y);
        prop_assume!(p.distance(q) > 1e-3);
        let h = 1e-6;
        for b in barriers(q) {
            let e = b.eval(p, t);
            let dx = (b.eval(Point2::new(x + h, y), t).h - b.eval(Point2::new(x - h, y), t).h) / (2.0 * h);
            let dy = (b.eval(Point2::new(x, y + h), t).h - b.eval(Point2::new(x, y - h), t).h) / (2.0 * h);
            let dt = (b.eval(p, t + h).h - b.eval(p, t - h).h) / (2.0 * h);
            prop_assert!((e.grad.x - dx).abs() < 1e-5, "{:?}", b.form);
            prop_assert!((e.grad.y - dy).abs() < 1e-5);
            prop_assert!((e.dh_dt - dt).abs() < 1e-5);
        }
    }

    #[test]
    fn clf_gradient_matches_finite_differences(qx in -2.0f64..2.0, qy in -2.0f64..2.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let spec = ClfSpec { target: Point2::new(qx, qy), kind: ClfKind::TrajectoryWaypoint };
        prop_assume!(Point2::new(x, y).distance(spec.target) > 1e-3);
        let h = 1e-6;
        let v = |p: Point2| clf_value_grad(p, &spec).0;
        let (_, g) = clf_value_grad(Point2::new(x, y), &spec);
        let dx = (v(Point2::new(x + h, y)) - v(Point2::new(x - h, y))) / (2.0 * h);
        let dy = (v(Point2::new(x, y + h)) - v(Point2::new(x, y - h))) / (2.0 * h);
        prop_assert!((g.x - dx).abs() <= 1e-4 * dx.abs().max(1.0));
        prop_assert!((g.y - dy).abs() <= 1e-4 * dy.abs().max(1.0));
    }

    #[test]
    fn filter_keeps_unrelaxed_rows_when_the_reference_conflicts(
        x in 0.0f64..1.0, y in 0.0f64..1.0, heading in 0.0f64..6.28, t in 0.0f64..3.0,
    ) {
        let cfg = ControlConfig::new(0.5).unwrap();
        let x0 = Point2::new(x, y);
        let q = x0 + Point2::new(heading.cos(), heading.sin()) * 0.8;
        let barrier = eventually_for_deadline(q, 0.2, x0, 0.0, 4.0, 0.3, 0.5, BarrierPurpose::CoObservation).unwrap();
        // reference drives straight away from q
        let away = TaskSet::new(x0 - (q - x0) * 5.0, vec![]);
        let pos = x0 + (q - x0) * (t / 8.0);
        let (u_ref, _) = reference_control(pos, &[1.0], &away, &cfg).unwrap();
        let soft = [SoftBarrier { barrier: &barrier, weight: 1.0 }];
        let out = security_filter(pos, t, u_ref, &soft, &[], &[], &cfg).unwrap();
        prop_assume!(out.status == QpStatus::Optimal);
        let e = barrier.eval(pos, t);
        prop_assert!(e.grad.dot(out.u) + e.dh_dt + cfg.cbf_gain * e.h >= -1e-8);
    }

    #[test]
    fn conjunction_under_approximates_the_minimum(x in -3.0f64..3.0, y in -3.0f64..3.0, t in 0.0f64..4.0) {
        let q = Point2::new(0.5, -0.5);
        let b = barriers(q);
        let p = Point2::new(x, y);
        let (h1, h2, hc) = (b[0].eval(p, t).h, b[1].eval(p, t).h, b[2].eval(p, t).h);
        prop_assert!(hc <= h1.min(h2) + 1e-12);
        prop_assert!(hc >= h1.min(h2) - 2f64.ln() - 1e-12);
    }

    #[test]
    fn saturating_gain_is_bounded(s in -100.0f64..100.0, k in 0.1f64..20.0, cap in 0.01f64..2.0) {
        let g = ClassK::Saturating { k, cap }.eval(s);
        prop_assert!(g.abs() <= cap);
        prop_assert!(g * s >= 0.0);
    }

    #[test]
    fn qp_solutions_satisfy_kkt(
        diag in prop::collection::vec(0.5f64..3.0, 2), off in -0.4f64..0.4,
        f in prop::collection::vec(-3.0f64..3.0, 2),
        rows in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.0f64..1.0), 0..6),
    ) {
        let h = Matrix::from_rows(&[[diag[0], off], [off, diag[1]]]);
        // every row is satisfied at the origin, so the problem is feasible
        let c: Vec<LinearConstraint> = rows.iter().map(|&(a, b, s)| LinearConstraint::new(vec![a, b], s)).collect();
        let sol = qp_solve(&h, &f, &c).unwrap();
        let (stat, feas, comp) = kkt_residuals(&h, &f, &c, &sol);
        prop_assert!(stat <= 1e-8 && feas <= 1e-8 && comp <= 1e-8, "{stat} {feas} {comp}");
    }
}

#[test]
fn infeasible_qp_is_reported() {
    let h = Matrix::identity(2);
    let c = [LinearConstraint::new(vec![1.0, 0.0], -1.0), LinearConstraint::new(vec![-1.0, 0.0], -1.0)];
    assert!(qp_solve(&h, &[0.0, 0.0], &c).is_err());
}

#[test]
fn head_on_robots_keep_their_distance() {
    let cfg = ControlConfig::new(0.5).unwrap();
    let mut a = Point2::new(0.0, 0.0);
    let mut b = Point2::new(2.0, 0.01);
    let goal_a = TaskSet::new(Point2::new(3.0, 0.0), vec![]);
    let goal_b = TaskSet::new(Point2::new(-1.0, 0.0), vec![]);
    let mut closest = f64::INFINITY;
    for k in 0..1500 {
        let t = k as f64 * cfg.dt;
        let (ua, _) = reference_control(a, &[1.0], &goal_a, &cfg).unwrap();
        let (ub, _) = reference_control(b, &[1.0], &goal_b, &cfg).unwrap();
        let fa = security_filter(a, t, ua, &[], &[b], &[], &cfg).unwrap();
        let fb = security_filter(b, t, ub, &[], &[a], &[], &cfg).unwrap();
        a = cfg.dynamics.step(a, fa.u, cfg.dt);
        b = cfg.dynamics.step(b, fb.u, cfg.dt);
        closest = closest.min(a.distance(b));
    }
    assert!(closest >= cfg.r_safe - 1e-3, "{closest}");
}
