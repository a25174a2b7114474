//! Euclidean minimum spanning tree over a small point set.

use std::cmp::Ordering;

use nalgebra::Vector3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Smaller endpoint id.
    pub a: usize,
    /// Larger endpoint id.
    pub b: usize,
    pub length: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, length: f64) -> Self {
        Self {
            a: i.min(j),
            b: i.max(j),
            length,
        }
    }

    /// Total order used for tie-breaking: length, then (a, b).
    pub fn key_cmp(&self, other: &Edge) -> Ordering {
        self.length
            .total_cmp(&other.length)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

pub fn distance(p: &Vector3<f64>, q: &Vector3<f64>) -> f64 {
    (p - q).norm()
}

/// Dense Prim's algorithm on the complete graph, O(n²).
///
/// Edges are compared by `(length, min id, max id)`, which is a strict total
/// order, so the tree is unique and independent of the algorithm used to
/// find it. The result is sorted by `(a, b)`.
pub fn minimum_spanning_tree(points: &[Vector3<f64>]) -> Vec<Edge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best: Vec<Option<Edge>> = vec![None; n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = Some(Edge::new(0, j, distance(&points[0], &points[j])));
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&i, &j| {
                let (ei, ej) = (best[i].unwrap(), best[j].unwrap());
                ei.key_cmp(&ej)
            })
            .expect("graph has unvisited nodes");
        let edge = best[next].take().unwrap();
        in_tree[next] = true;
        edges.push(edge);
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let cand = Edge::new(next, j, distance(&points[next], &points[j]));
            if cand.key_cmp(best[j].as_ref().unwrap()) == Ordering::Less {
                best[j] = Some(cand);
            }
        }
    }
    edges.sort_by(|x, y| x.a.cmp(&y.a).then(x.b.cmp(&y.b)));
    edges
}

pub fn total_length(edges: &[Edge]) -> f64 {
    edges.iter().map(|e| e.length).sum()
}
