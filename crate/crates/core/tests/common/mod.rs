#![allow(dead_code)]

use coobs_core::assignment::{build_weights, OnlineTaskSpec, TaskSet, WeightMatrix};
use coobs_core::graph::CommGraph;
use coobs_core::{Matrix, Point2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random connected graph: a random spanning tree plus extra edges.
pub fn random_connected(n: usize, rng: &mut ChaCha8Rng) -> CommGraph {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut edges = Vec::new();
    for k in 1..n {
        edges.push((order[rng.gen_range(0..k)], order[k]));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.3) && !edges.contains(&(i, j)) && !edges.contains(&(j, i)) {
                edges.push((i, j));
            }
        }
    }
    CommGraph::new(n, &edges).expect("valid edges")
}

/// Every permutation of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            let j = if k.is_multiple_of(2) { i } else { 0 };
            a.swap(j, k - 1);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

pub fn value(w: &Matrix, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| w[(i, j)]).sum()
}

/// Best value and every permutation attaining it within `tol`.
pub fn brute_force(w: &Matrix, tol: f64) -> (f64, Vec<Vec<usize>>) {
    let all = permutations(w.rows());
    let best = all.iter().map(|p| value(w, p)).fold(f64::NEG_INFINITY, f64::max);
    let winners = all.into_iter().filter(|p| value(w, p) >= best - tol).collect();
    (best, winners)
}

pub fn random_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Point2 {
    Point2::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi))
}

/// Weights for `agents` robots and `online` tasks scattered in an 8 m box.
pub fn geometric_instance(agents: usize, online: usize, rng: &mut ChaCha8Rng, config: &coobs_core::assignment::AdmmConfig) -> WeightMatrix {
    let positions: Vec<Point2> = (0..agents).map(|_| random_point(rng, 0.0, 8.0)).collect();
    let tasks = TaskSet::new(
        random_point(rng, 0.0, 8.0),
        (0..online)
            .map(|k| OnlineTaskSpec { id: k as u32 + 1, location: random_point(rng, 0.0, 8.0) })
            .collect(),
    );
    build_weights(&positions, &tasks, config).expect("valid instance")
}
