use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{GraphCorpus, GraphParts, LabeledGraph};
use crate::seed::{rng_for, Rng};
use crate::spectral::max_laplacian_eigenvalue;

/// Rule turning a structural score into a binary graph label: 1 iff the
/// score is at least the corpus median.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelRule {
    /// Score = triangle count.
    TriangleMotif,
    /// Score = largest combinatorial-Laplacian eigenvalue.
    SpectralThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub name: String,
    pub n_graphs: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Each graph's target mean degree is drawn uniformly from this range;
    /// it never goes below that of a spanning tree.
    pub degree_range: (f64, f64),
    /// Target edge homophily `h*` of the node labels.
    pub homophily: f64,
    /// Node-label alphabet; the label is also node attribute 0.
    pub node_classes: usize,
    /// When set, each graph draws a dominant class and a dominance
    /// `ρ ~ U(0, max)`; a node takes the dominant class with probability `ρ`
    /// and a uniform class otherwise. Unset: uniform labels.
    pub max_dominance: Option<f64>,
    /// When set, node degree capped at this value is appended as an
    /// attribute after the label (like an atom's degree feature).
    pub degree_attr_cap: Option<u32>,
    /// Alphabets of extra uniformly random node attributes, appended last.
    pub extra_attr_sizes: Vec<usize>,
    pub label_rule: Option<LabelRule>,
    /// Accepted deviation of the corpus homophily from `h*`.
    pub tolerance: f64,
    pub max_rewiring: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            name: "synthetic".into(),
            n_graphs: 200,
            min_nodes: 8,
            max_nodes: 20,
            degree_range: (2.2, 2.2),
            homophily: 0.5,
            node_classes: 4,
            max_dominance: None,
            degree_attr_cap: None,
            extra_attr_sizes: Vec::new(),
            label_rule: Some(LabelRule::TriangleMotif),
            tolerance: 0.05,
            max_rewiring: 10_000,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_graphs == 0 {
            return bad("n_graphs must be >= 1".into());
        }
        if self.min_nodes < 3 || self.max_nodes < self.min_nodes {
            return bad(format!(
                "node range must satisfy 3 <= min <= max, got {}..={}",
                self.min_nodes, self.max_nodes
            ));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return bad(format!("homophily target must be in [0, 1], got {}", self.homophily));
        }
        if self.node_classes == 0 || self.extra_attr_sizes.contains(&0) {
            return bad("attribute alphabets must be non-empty".into());
        }
        if self.node_classes == 1 && self.homophily < 1.0 {
            return bad("a single node class only admits homophily 1".into());
        }
        let (lo, hi) = self.degree_range;
        if !(lo > 0.0 && hi >= lo) {
            return bad(format!("degree_range must satisfy 0 < lo <= hi, got {lo}..{hi}"));
        }
        if let Some(d) = self.max_dominance {
            if !(0.0..=1.0).contains(&d) {
                return bad(format!("max_dominance must be in [0, 1], got {d}"));
            }
        }
        Ok(())
    }
}

struct Draft {
    n: usize,
    labels: Vec<u32>,
    edges: BTreeSet<(usize, usize)>,
}

impl Draft {
    fn same(&self, (u, v): (usize, usize)) -> bool {
        self.labels[u] == self.labels[v]
    }

    /// Uniform random non-edge whose endpoints agree (`same`) or differ in
    /// label, by rejection.
    fn random_non_edge(&self, rng: &mut Rng, same: bool) -> Option<(usize, usize)> {
        for _ in 0..64 {
            let u = rng.random_range(0..self.n);
            let v = rng.random_range(0..self.n);
            if u == v {
                continue;
            }
            let e = (u.min(v), u.max(v));
            if self.same(e) == same && !self.edges.contains(&e) {
                return Some(e);
            }
        }
        None
    }

    fn random_edge(&self, rng: &mut Rng, same: bool) -> Option<(usize, usize)> {
        let candidates: Vec<_> = self.edges.iter().copied().filter(|&e| self.same(e) == same).collect();
        (!candidates.is_empty()).then(|| candidates[rng.random_range(0..candidates.len())])
    }
}

fn draft_labels(spec: &SyntheticSpec, n: usize, rng: &mut Rng) -> Vec<u32> {
    let classes = spec.node_classes as u32;
    if spec.homophily >= 1.0 {
        return vec![0; n];
    }
    let (dominant, rho) = match spec.max_dominance {
        Some(max) => (rng.random_range(0..classes), rng.random::<f64>() * max),
        None => (0, 0.0),
    };
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < rho {
                dominant
            } else {
                rng.random_range(0..classes)
            }
        })
        .collect()
}

/// Connected sparse graph: a random spanning tree plus extra edges up to
/// the target mean degree. Each edge prefers a same-label endpoint pair with
/// probability `h*`.
fn draft_graph(spec: &SyntheticSpec, rng: &mut Rng) -> Draft {
    let n = rng.random_range(spec.min_nodes..=spec.max_nodes);
    let labels = draft_labels(spec, n, rng);
    let max_edges = n * (n - 1) / 2;
    let (lo, hi) = spec.degree_range;
    let degree = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let m = (libm::round(degree * n as f64 / 2.0) as usize).clamp(n - 1, max_edges);
    let mut draft = Draft {
        n,
        labels,
        edges: BTreeSet::new(),
    };
    for v in 1..n {
        let want_same = rng.random::<f64>() < spec.homophily;
        let pool: Vec<usize> = (0..v).filter(|&u| (draft.labels[u] == draft.labels[v]) == want_same).collect();
        let u = if pool.is_empty() {
            rng.random_range(0..v)
        } else {
            pool[rng.random_range(0..pool.len())]
        };
        draft.edges.insert((u, v));
    }
    let mut attempts = 0;
    while draft.edges.len() < m && attempts < 100 * m {
        attempts += 1;
        let want_same = rng.random::<f64>() < spec.homophily;
        let e = draft
            .random_non_edge(rng, want_same)
            .or_else(|| draft.random_non_edge(rng, !want_same));
        if let Some(e) = e {
            draft.edges.insert(e);
        }
    }
    draft
}

/// Random labelled graphs whose corpus edge homophily is within
/// `tolerance` of `h*`.
///
/// Edges are planted as same-label pairs with probability `h*`; a rewiring
/// loop then swaps single edges between the two kinds until the corpus
/// ratio is within tolerance, failing after `max_rewiring` iterations.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<GraphCorpus> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, "synthetic.graphs");
    let mut drafts: Vec<Draft> = (0..spec.n_graphs).map(|_| draft_graph(spec, &mut rng)).collect();

    let mut same: usize = drafts.iter().map(|d| d.edges.iter().filter(|&&e| d.same(e)).count()).sum();
    let total: usize = drafts.iter().map(|d| d.edges.len()).sum();
    let ratio = |s: usize| if total == 0 { 1.0 } else { s as f64 / total as f64 };
    let mut iterations = 0;
    while (ratio(same) - spec.homophily).abs() > spec.tolerance {
        if iterations >= spec.max_rewiring {
            return Err(Error::RewiringFailed {
                corpus: spec.name.clone(),
                target: spec.homophily,
                iterations,
            });
        }
        iterations += 1;
        let raise = ratio(same) < spec.homophily;
        let d = &mut drafts[rng.random_range(0..spec.n_graphs)];
        let (Some(old), Some(new)) = (d.random_edge(&mut rng, !raise), d.random_non_edge(&mut rng, raise)) else {
            continue;
        };
        d.edges.remove(&old);
        d.edges.insert(new);
        if raise {
            same += 1;
        } else {
            same -= 1;
        }
    }

    let mut attr_rng = rng_for(spec.seed, "synthetic.attrs");
    let mut graphs = Vec::with_capacity(spec.n_graphs);
    for (i, d) in drafts.into_iter().enumerate() {
        let mut degree = vec![0u32; d.n];
        for &(u, v) in &d.edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let node_attrs = d
            .labels
            .iter()
            .zip(&degree)
            .map(|(&l, &deg)| {
                let mut row = vec![l];
                row.extend(spec.degree_attr_cap.map(|cap| deg.min(cap)));
                row.extend(spec.extra_attr_sizes.iter().map(|&s| attr_rng.random_range(0..s as u32)));
                row
            })
            .collect();
        let edges: Vec<_> = d.edges.into_iter().collect();
        graphs.push(LabeledGraph::from_parts(GraphParts {
            id: format!("{}-{i}", spec.name),
            node_count: d.n,
            edge_attrs: vec![vec![0]; edges.len()],
            edges,
            node_attrs,
            node_labels: Some(d.labels),
            graph_labels: None,
        })?);
    }
    if let Some(rule) = spec.label_rule {
        assign_graph_labels(&mut graphs, rule)?;
    }
    GraphCorpus::new(spec.name.clone(), graphs)
}

/// Median with the two middle values averaged for even lengths.
fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

/// Sets a single-task binary label on every graph: 1 iff its score under
/// `rule` is at least the median score over `graphs`.
pub fn assign_graph_labels(graphs: &mut [LabeledGraph], rule: LabelRule) -> Result<()> {
    if graphs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let scores = graphs
        .iter()
        .map(|g| match rule {
            LabelRule::TriangleMotif => Ok(g.triangle_count() as f64),
            LabelRule::SpectralThreshold => max_laplacian_eigenvalue(g),
        })
        .collect::<Result<Vec<_>>>()?;
    let threshold = median(&scores);
    for (g, s) in graphs.iter_mut().zip(scores) {
        let taken = core::mem::replace(g, LabeledGraph::from_edges("", 1, &[])?);
        *g = taken.with_graph_labels(vec![Some(u8::from(s >= threshold))])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::corpus_homophily;

    #[test]
    fn triangle_rule_example() {
        let mut gs = vec![
            LabeledGraph::from_edges("tri", 3, &[(0, 1), (1, 2), (0, 2)]).unwrap(),
            LabeledGraph::from_edges("path", 3, &[(0, 1), (1, 2)]).unwrap(),
        ];
        assign_graph_labels(&mut gs, LabelRule::TriangleMotif).unwrap();
        assert_eq!(gs[0].graph_labels().unwrap(), &[Some(1)]);
        assert_eq!(gs[1].graph_labels().unwrap(), &[Some(0)]);
    }

    #[test]
    fn full_homophily_uses_uniform_labels() {
        let spec = SyntheticSpec {
            homophily: 1.0,
            n_graphs: 20,
            ..SyntheticSpec::default()
        };
        let c = generate_synthetic(&spec).unwrap();
        assert_eq!(corpus_homophily(&c).unwrap(), 1.0);
    }

    #[test]
    fn hits_low_homophily_target() {
        let spec = SyntheticSpec {
            homophily: 0.3,
            n_graphs: 200,
            ..SyntheticSpec::default()
        };
        let h = corpus_homophily(&generate_synthetic(&spec).unwrap()).unwrap();
        assert!((0.25..=0.35).contains(&h), "h = {h}");
    }

    #[test]
    fn degree_attribute_follows_label() {
        let spec = SyntheticSpec {
            n_graphs: 5,
            degree_attr_cap: Some(3),
            extra_attr_sizes: vec![2],
            ..SyntheticSpec::default()
        };
        for g in generate_synthetic(&spec).unwrap().graphs() {
            for v in 0..g.node_count() {
                let row = &g.node_attrs()[v];
                assert_eq!(row.len(), 3);
                assert_eq!(row[0], g.node_labels().unwrap()[v]);
                assert_eq!(row[1] as usize, g.degree(v).min(3));
            }
        }
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec {
            n_graphs: 10,
            extra_attr_sizes: vec![4],
            ..SyntheticSpec::default()
        };
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    }

    #[test]
    fn impossible_target_fails() {
        let spec = SyntheticSpec {
            node_classes: 1,
            homophily: 0.0,
            ..SyntheticSpec::default()
        };
        assert!(spec.validate().is_err());
        // A triangle over two classes always has a same-label edge.
        let spec = SyntheticSpec {
            min_nodes: 3,
            max_nodes: 3,
            node_classes: 2,
            homophily: 0.0,
            degree_range: (2.0, 2.0),
            tolerance: 0.0,
            max_rewiring: 50,
            ..SyntheticSpec::default()
        };
        assert!(matches!(generate_synthetic(&spec), Err(Error::RewiringFailed { .. })));
    }
}
