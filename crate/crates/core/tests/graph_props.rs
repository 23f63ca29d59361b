mod common;

use common::{random_graph, random_permutation};
use graphmgs_core::graph::{corpus_homophily, corpus_homophily_by, homophily_ratio, Aggregation, LabelSource};
use graphmgs_core::{GraphCorpus, LabeledGraph};
use proptest::prelude::*;

/// Same-label edge fraction, counted directly.
fn naive_homophily(g: &LabeledGraph) -> f64 {
    let labels = g.node_labels().unwrap();
    let same = g.edges().iter().filter(|&&(u, v)| labels[u] == labels[v]).count();
    same as f64 / g.edge_count() as f64
}

fn relabel(g: &LabeledGraph, map: &[u32]) -> LabeledGraph {
    let labels = g.node_labels().unwrap().iter().map(|&l| map[l as usize]).collect();
    g.clone().with_node_labels(labels).unwrap()
}

proptest! {
    #![proptest_config(common::cases(200))]

    #[test]
    fn ratio_is_bounded_and_matches_count(s in any::<u64>(), p in 0.1f64..0.9) {
        let g = random_graph(s, 2, 15, p, &[4]);
        prop_assume!(g.edge_count() > 0);
        let h = homophily_ratio(&g).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert_eq!(h, naive_homophily(&g));
    }

    #[test]
    fn ratio_ignores_class_names_and_node_order(s in any::<u64>()) {
        let g = random_graph(s, 2, 15, 0.4, &[4]);
        prop_assume!(g.edge_count() > 0);
        let h = homophily_ratio(&g).unwrap();
        // Labels are 0..3; map them through a bijection onto sparse ids.
        let mut map = vec![7u32, 100, 3];
        map.rotate_left((s % 3) as usize);
        prop_assert_eq!(homophily_ratio(&relabel(&g, &map)).unwrap(), h);
        let perm = random_permutation(g.node_count(), s);
        prop_assert_eq!(homophily_ratio(&g.permuted(&perm).unwrap()).unwrap(), h);
    }

    #[test]
    fn single_graph_corpus_equals_graph(s in any::<u64>()) {
        let g = random_graph(s, 2, 15, 0.4, &[4]);
        prop_assume!(g.edge_count() > 0);
        let h = homophily_ratio(&g).unwrap();
        let c = GraphCorpus::new("one", vec![g]).unwrap();
        prop_assert_eq!(corpus_homophily(&c).unwrap(), h);
        let mean = corpus_homophily_by(&c, LabelSource::NodeLabels, Aggregation::GraphMean).unwrap();
        prop_assert_eq!(mean, h);
    }
}

#[test]
fn corpus_aggregations_differ_as_defined() {
    // 1 same edge of 1, and 0 same of 3.
    let a = LabeledGraph::from_edges("a", 2, &[(0, 1)]).unwrap().with_node_labels(vec![0, 0]).unwrap();
    let b = LabeledGraph::from_edges("b", 4, &[(0, 1), (1, 2), (2, 3)])
        .unwrap()
        .with_node_labels(vec![0, 1, 0, 1])
        .unwrap();
    let c = GraphCorpus::new("c", vec![a, b]).unwrap();
    assert_eq!(corpus_homophily(&c).unwrap(), 0.25);
    assert_eq!(corpus_homophily_by(&c, LabelSource::NodeLabels, Aggregation::GraphMean).unwrap(), 0.5);
}

#[test]
fn attribute_label_source() {
    let g = LabeledGraph::from_edges("a", 3, &[(0, 1), (1, 2)])
        .unwrap()
        .with_node_attrs(vec![vec![6], vec![6], vec![8]])
        .unwrap();
    let c = GraphCorpus::new("c", vec![g]).unwrap();
    assert_eq!(corpus_homophily_by(&c, LabelSource::Attr(0), Aggregation::EdgeWeighted).unwrap(), 0.5);
    assert!(corpus_homophily(&c).is_err());
}
