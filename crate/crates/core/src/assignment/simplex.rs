use alloc::vec::Vec;

/// Euclidean projection onto `{ x ≥ 0, Σ x = 1 }` (sort-and-threshold).
pub fn project_onto_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));

    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &mu) in sorted.iter().enumerate() {
        cumulative += mu;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if mu - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_point_is_fixed() {
        assert_eq!(project_onto_simplex(&[0.5, 0.5]), [0.5, 0.5]);
    }

    #[test]
    fn interior_shift() {
        // uniform shift by (1.2 - 1) / 2
        let p = project_onto_simplex(&[0.8, 0.4]);
        assert!((p[0] - 0.7).abs() < 1e-15 && (p[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn clips_to_vertex() {
        assert_eq!(project_onto_simplex(&[2.0, 0.0]), [1.0, 0.0]);
        assert_eq!(project_onto_simplex(&[-3.0, 7.0, -1.0]), [0.0, 1.0, 0.0]);
    }
}
