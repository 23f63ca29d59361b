#![allow(dead_code)]

use graphmgs_core::graph::GraphParts;
use graphmgs_core::seed;
use graphmgs_core::LabeledGraph;
use rand::seq::SliceRandom;
use rand::Rng;

/// Proptest settings without on-disk regression files.
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases: n,
        failure_persistence: None,
        ..Default::default()
    }
}

/// Erdős–Rényi graph with `n ∈ [min_n, max_n]` nodes, edge probability
/// `p`, random node labels, node attributes and bond codes.
pub fn random_graph(seed: u64, min_n: usize, max_n: usize, p: f64, attr_sizes: &[u32]) -> LabeledGraph {
    let mut rng = seed::rng(seed);
    let n = rng.random_range(min_n..=max_n);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let node_attrs = (0..n)
        .map(|_| attr_sizes.iter().map(|&s| rng.random_range(0..s)).collect())
        .collect();
    let edge_attrs = edges.iter().map(|_| vec![rng.random_range(0..3)]).collect();
    let node_labels = Some((0..n).map(|_| rng.random_range(0..3)).collect());
    LabeledGraph::from_parts(GraphParts {
        id: format!("g{seed}"),
        node_count: n,
        edges,
        node_attrs,
        edge_attrs,
        node_labels,
        graph_labels: None,
    })
    .unwrap()
}

pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed ^ 0x9e37_79b9_7f4a_7c15));
    perm
}

/// Dense row-major symmetric adjacency.
pub fn dense_adjacency(g: &LabeledGraph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for &(u, v) in g.edges() {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    a
}

pub fn dense_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for p in 0..k {
            for j in 0..m {
                out[i][j] += a[i][p] * b[p][j];
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
