//! Independent oracles for the acceptance and integration tests. Nothing
//! here calls the solver or geometry routines under test.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use coobs::core::geometry::ConvexPolygon;
use coobs::core::graph::CommGraph;
use coobs::core::{Matrix, Point2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn bundled_scenario() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/three_teams.toml")
}

pub fn random_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Point2 {
    Point2::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi))
}

/// Random spanning tree plus extra edges with probability `p`.
pub fn random_connected(n: usize, p: f64, rng: &mut ChaCha8Rng) -> CommGraph {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut edges: Vec<(usize, usize)> = (1..n).map(|k| (order[rng.gen_range(0..k)], order[k])).collect();
    for i in 0..n {
        for j in i + 1..n {
            if !edges.iter().any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i)) && rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    CommGraph::new(n, &edges).expect("valid edges")
}

// ---------------------------------------------------------------- assignment

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

pub fn perm_value(w: &Matrix, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| w[(i, j)]).sum()
}

/// Best permutation by enumeration; ties go to the first found.
pub fn brute_force(w: &Matrix) -> (Vec<usize>, f64) {
    permutations(w.rows())
        .into_iter()
        .map(|p| {
            let v = perm_value(w, &p);
            (p, v)
        })
        .fold((Vec::new(), f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// Best injective map from rows of `values` (tasks) to columns (agents).
pub fn best_injection(values: &[Vec<f64>]) -> Vec<usize> {
    let agents = values[0].len();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut pick = Vec::new();
    fn go(values: &[Vec<f64>], agents: usize, pick: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
        if pick.len() == values.len() {
            let v: f64 = pick.iter().enumerate().map(|(t, &a)| values[t][a]).sum();
            if v > best.0 {
                *best = (v, pick.clone());
            }
            return;
        }
        for a in 0..agents {
            if !pick.contains(&a) {
                pick.push(a);
                go(values, agents, pick, best);
                pick.pop();
            }
        }
    }
    go(values, agents, &mut pick, &mut best);
    best.1
}

// ------------------------------------------------------------------ geometry

pub fn inside(p: Point2, poly: &ConvexPolygon) -> bool {
    poly.edges().all(|(a, b)| (b - a).cross(p - a) >= 0.0)
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull (monotone chain) of `k` random points in a disc.
pub fn random_convex_polygon(rng: &mut ChaCha8Rng, center: Point2, radius: f64, k: usize) -> ConvexPolygon {
    loop {
        let mut pts: Vec<Point2> = (0..k)
            .map(|_| {
                let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = radius * rng.gen_range(0.2f64..1.0).sqrt();
                Point2::new(center.x + r * a.cos(), center.y + r * a.sin())
            })
            .collect();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        let mut hull: Vec<Point2> = Vec::new();
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &Point2>> =
                if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
            for &p in iter {
                while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                    hull.pop();
                }
                hull.push(p);
            }
            hull.pop();
        }
        if hull.len() >= 3 {
            if let Ok(poly) = ConvexPolygon::new(hull) {
                return poly;
            }
        }
    }
}

/// Sampled minimum of `d(f1, p) + d(p, f2)` over a closed convex polygon and
/// an upper bound on its error.
///
/// The focal sum is convex, so its minimum is `d(f1, f2)` when the focal
/// segment meets the polygon and is attained on the boundary otherwise.
pub fn sampled_min_focal_sum(f1: Point2, f2: Point2, poly: &ConvexPolygon, per_edge: usize) -> (f64, f64) {
    let g = |p: Point2| f1.distance(p) + p.distance(f2);
    let mut best = f64::INFINITY;
    let mut spacing: f64 = 0.0;
    for (a, b) in poly.edges() {
        spacing = spacing.max(a.distance(b) / per_edge as f64);
        for k in 0..=per_edge {
            best = best.min(g(a.lerp(b, k as f64 / per_edge as f64)));
        }
    }
    if (0..=per_edge).any(|k| inside(f1.lerp(f2, k as f64 / per_edge as f64), poly)) {
        return (f1.distance(f2), 0.0);
    }
    // 2-Lipschitz along the boundary, nearest sample at most spacing / 2 away
    (best, spacing)
}

/// Minimum focal sum along a segment by ternary search.
pub fn segment_min_focal_sum(a: Point2, b: Point2, f1: Point2, f2: Point2) -> f64 {
    let g = |s: f64| {
        let p = a.lerp(b, s);
        f1.distance(p) + p.distance(f2)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if g(m1) <= g(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    g(0.5 * (lo + hi)).min(g(0.0)).min(g(1.0))
}

/// Whether the reachable set between `(q_i, i)` and `(q_j, j)` avoids every
/// region. `q` is one-based through `q[i - 1]`.
pub fn section_secured(q: &[Point2], i: usize, j: usize, regions: &[ConvexPolygon], v_max: f64, step: f64) -> bool {
    let (f1, f2) = (q[i - 1], q[j - 1]);
    let two_a = v_max * (j - i) as f64 * step;
    if f1.distance(f2) > two_a + 1e-9 {
        return false;
    }
    !regions.iter().any(|poly| {
        inside(f1.midpoint(f2), poly)
            || poly.vertices().iter().any(|v| f1.distance(*v) + v.distance(f2) < two_a + 1e-9)
            || poly.edges().any(|(a, b)| segment_min_focal_sum(a, b, f1, f2) < two_a + 1e-9)
    })
}

/// Lookup table by checking every `(i, j)` pair, then taking the longest
/// secured prefix for each `i`.
pub fn double_loop_table(q: &[Point2], regions: &[ConvexPolygon], v_max: f64, step: f64) -> (Vec<usize>, Vec<Vec<bool>>) {
    let horizon = q.len();
    let mut secured = vec![vec![false; horizon + 1]; horizon + 1];
    for (i, row) in secured.iter_mut().enumerate().skip(1) {
        for (j, cell) in row.iter_mut().enumerate().skip(i + 1) {
            *cell = section_secured(q, i, j, regions, v_max, step);
        }
    }
    let table = (1..=horizon)
        .map(|i| {
            let mut t_r = i;
            for (j, &ok) in secured[i].iter().enumerate().skip(i + 1) {
                if !ok {
                    break;
                }
                t_r = j;
            }
            t_r
        })
        .collect();
    (table, secured)
}

// ------------------------------------------------------------------------ QP

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn linear_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= factor * p;
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// `min ½ uᵀHu + fᵀu  s.t.  A u ≤ b` by trying every active set and keeping
/// the KKT point with the lowest objective.
pub fn qp_enumerate(h: &[Vec<f64>], f: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = f.len();
    let m = b.len();
    let objective = |u: &[f64]| {
        let quad: f64 = (0..n).map(|i| (0..n).map(|j| u[i] * h[i][j] * u[j]).sum::<f64>()).sum();
        0.5 * quad + f.iter().zip(u).map(|(x, y)| x * y).sum::<f64>()
    };
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let set: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
        if set.len() > n {
            continue;
        }
        let size = n + set.len();
        let mut kkt = vec![vec![0.0; size]; size];
        let mut rhs = vec![0.0; size];
        for i in 0..n {
            kkt[i][..n].copy_from_slice(&h[i]);
            rhs[i] = -f[i];
        }
        for (r, &k) in set.iter().enumerate() {
            for i in 0..n {
                kkt[i][n + r] = a[k][i];
                kkt[n + r][i] = a[k][i];
            }
            rhs[n + r] = b[k];
        }
        let Some(sol) = linear_solve(kkt, rhs) else { continue };
        let u = sol[..n].to_vec();
        let mut lambda = vec![0.0; m];
        for (r, &k) in set.iter().enumerate() {
            lambda[k] = sol[n + r];
        }
        let feasible = (0..m).all(|k| a[k].iter().zip(&u).map(|(x, y)| x * y).sum::<f64>() <= b[k] + 1e-10);
        if !feasible || lambda.iter().any(|&l| l < -1e-10) {
            continue;
        }
        let value = objective(&u);
        if best.as_ref().is_none_or(|(v, _, _)| value < *v) {
            best = Some((value, u, lambda));
        }
    }
    best.map(|(_, u, l)| (u, l))
}

// --------------------------------------------------------------------- files

/// SHA-256 of every file in `dir`, keyed by file name.
pub fn hash_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("readable output dir") {
        let path = entry.expect("dir entry").path();
        let bytes = std::fs::read(&path).expect("readable output file");
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), hex);
    }
    out
}
