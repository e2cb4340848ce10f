use crate::assignment::TaskId;
use crate::Point2;

const GRAD_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClfKind {
    TrajectoryWaypoint,
    OnlineTask(TaskId),
}

/// `V(x) = d(x, target)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClfSpec {
    pub target: Point2,
    pub kind: ClfKind,
}

/// Value and gradient of the distance CLF; the gradient vanishes at the
/// target.
pub fn clf_value_grad(x: Point2, spec: &ClfSpec) -> (f64, Point2) {
    let diff = x - spec.target;
    let d = diff.norm();
    if d < GRAD_GUARD {
        return (d, Point2::new(0.0, 0.0));
    }
    (d, diff * (1.0 / d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(target: Point2) -> ClfSpec {
        ClfSpec { target, kind: ClfKind::TrajectoryWaypoint }
    }

    #[test]
    fn examples() {
        let origin = Point2::new(0.0, 0.0);
        assert_eq!(clf_value_grad(Point2::new(1.0, 0.0), &spec(origin)), (1.0, Point2::new(1.0, 0.0)));
        assert_eq!(clf_value_grad(origin, &spec(origin)), (0.0, Point2::new(0.0, 0.0)));
        let (v, g) = clf_value_grad(Point2::new(3.0, 4.0), &spec(origin));
        assert_eq!(v, 5.0);
        assert!((g.x - 0.6).abs() < 1e-15 && (g.y - 0.8).abs() < 1e-15);
    }
}
