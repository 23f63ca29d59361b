//! Attributed undirected graphs, corpora and graph-level statistics.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A simple undirected graph with categorical node and edge attributes.
///
/// Construction validates the invariants (no self-loops, no parallel edges,
/// endpoints in range, attribute and label vectors aligned), and the graph is
/// immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    id: String,
    node_count: usize,
    edges: Vec<(usize, usize)>,
    node_attrs: Vec<Vec<u32>>,
    edge_attrs: Vec<Vec<u32>>,
    node_labels: Option<Vec<u32>>,
    graph_labels: Option<Vec<Option<u8>>>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Raw parts of a graph, validated by [`LabeledGraph::from_parts`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphParts {
    pub id: String,
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    pub node_attrs: Vec<Vec<u32>>,
    pub edge_attrs: Vec<Vec<u32>>,
    pub node_labels: Option<Vec<u32>>,
    pub graph_labels: Option<Vec<Option<u8>>>,
}

impl LabeledGraph {
    pub fn from_parts(parts: GraphParts) -> Result<Self> {
        let GraphParts {
            id,
            node_count,
            edges,
            node_attrs,
            edge_attrs,
            node_labels,
            graph_labels,
        } = parts;

        let mut seen = BTreeSet::new();
        for &(u, v) in &edges {
            if u >= node_count || v >= node_count {
                return Err(Error::invalid(
                    &id,
                    format!("edge ({u},{v}) index out of range for {node_count} nodes"),
                ));
            }
            if u == v {
                return Err(Error::invalid(&id, format!("self-loop at node {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::invalid(&id, format!("duplicate edge ({u},{v})")));
            }
        }
        if node_attrs.len() != node_count {
            return Err(Error::invalid(
                &id,
                format!(
                    "node_attrs has {} entries for {node_count} nodes",
                    node_attrs.len()
                ),
            ));
        }
        if let Some(first) = node_attrs.first() {
            if node_attrs.iter().any(|a| a.len() != first.len()) {
                return Err(Error::invalid(&id, "node_attrs rows differ in length"));
            }
        }
        if edge_attrs.len() != edges.len() {
            return Err(Error::invalid(
                &id,
                format!(
                    "edge_attrs has {} entries for {} edges",
                    edge_attrs.len(),
                    edges.len()
                ),
            ));
        }
        if let Some(first) = edge_attrs.first() {
            if edge_attrs.iter().any(|a| a.len() != first.len()) {
                return Err(Error::invalid(&id, "edge_attrs rows differ in length"));
            }
        }
        if let Some(labels) = &node_labels {
            if labels.len() != node_count {
                return Err(Error::invalid(
                    &id,
                    format!(
                        "node_labels has {} entries for {node_count} nodes",
                        labels.len()
                    ),
                ));
            }
        }

        if let Some(labels) = &graph_labels {
            if let Some(bad) = labels.iter().flatten().find(|&&l| l > 1) {
                return Err(Error::invalid(&id, format!("graph label {bad} is not 0, 1 or missing")));
            }
        }

        let mut adjacency = vec![Vec::new(); node_count];
        for (e, &(u, v)) in edges.iter().enumerate() {
            adjacency[u].push((v, e));
            adjacency[v].push((u, e));
        }

        Ok(LabeledGraph {
            id,
            node_count,
            edges,
            node_attrs,
            edge_attrs,
            node_labels,
            graph_labels,
            adjacency,
        })
    }

    /// Graph with a single zero attribute on every node and edge.
    pub fn from_edges(id: impl Into<String>, node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_parts(GraphParts {
            id: id.into(),
            node_count,
            edges: edges.to_vec(),
            node_attrs: vec![vec![0]; node_count],
            edge_attrs: vec![vec![0]; edges.len()],
            ..GraphParts::default()
        })
    }

    pub fn into_parts(self) -> GraphParts {
        GraphParts {
            id: self.id,
            node_count: self.node_count,
            edges: self.edges,
            node_attrs: self.node_attrs,
            edge_attrs: self.edge_attrs,
            node_labels: self.node_labels,
            graph_labels: self.graph_labels,
        }
    }

    pub fn to_parts(&self) -> GraphParts {
        self.clone().into_parts()
    }

    pub fn with_node_labels(self, labels: Vec<u32>) -> Result<Self> {
        let mut parts = self.into_parts();
        parts.node_labels = Some(labels);
        Self::from_parts(parts)
    }

    pub fn with_node_attrs(self, attrs: Vec<Vec<u32>>) -> Result<Self> {
        let mut parts = self.into_parts();
        parts.node_attrs = attrs;
        Self::from_parts(parts)
    }

    pub fn with_edge_attrs(self, attrs: Vec<Vec<u32>>) -> Result<Self> {
        let mut parts = self.into_parts();
        parts.edge_attrs = attrs;
        Self::from_parts(parts)
    }

    pub fn with_graph_labels(self, labels: Vec<Option<u8>>) -> Result<Self> {
        let mut parts = self.into_parts();
        parts.graph_labels = Some(labels);
        Self::from_parts(parts)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Relabels nodes so that old node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.node_count;
        if perm.len() != n {
            return Err(Error::LengthMismatch {
                left: perm.len(),
                right: n,
            });
        }
        let mut inverse = vec![usize::MAX; n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= n || inverse[new] != usize::MAX {
                return Err(Error::invalid(&self.id, "permutation is not a bijection"));
            }
            inverse[new] = old;
        }
        let node_attrs = inverse.iter().map(|&old| self.node_attrs[old].clone()).collect();
        let node_labels = self
            .node_labels
            .as_ref()
            .map(|l| inverse.iter().map(|&old| l[old]).collect());
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        Self::from_parts(GraphParts {
            id: self.id.clone(),
            node_count: n,
            edges,
            node_attrs,
            edge_attrs: self.edge_attrs.clone(),
            node_labels,
            graph_labels: self.graph_labels.clone(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node_attrs(&self) -> &[Vec<u32>] {
        &self.node_attrs
    }

    pub fn edge_attrs(&self) -> &[Vec<u32>] {
        &self.edge_attrs
    }

    pub fn node_labels(&self) -> Option<&[u32]> {
        self.node_labels.as_deref()
    }

    pub fn graph_labels(&self) -> Option<&[Option<u8>]> {
        self.graph_labels.as_deref()
    }

    /// `(neighbor, edge index)` pairs of node `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].iter().any(|&(w, _)| w == v)
    }

    /// Number of node attributes per node (0 for an empty graph).
    pub fn node_attr_width(&self) -> usize {
        self.node_attrs.first().map_or(0, Vec::len)
    }

    pub fn triangle_count(&self) -> usize {
        let mut count = 0;
        for &(u, v) in &self.edges {
            for &(w, _) in &self.adjacency[u] {
                if w > u.max(v) && self.has_edge(v, w) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Number of connected components (isolated nodes count as one each).
    pub fn component_count(&self) -> usize {
        let n = self.node_count;
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut components = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &(w, _) in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        components
    }
}

/// Ordered collection of graphs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphCorpus {
    pub name: String,
    graphs: Vec<LabeledGraph>,
    task_count: usize,
}

impl GraphCorpus {
    /// Validates shared task count and unique ids.
    pub fn new(name: impl Into<String>, graphs: Vec<LabeledGraph>) -> Result<Self> {
        let mut task_count = None;
        let mut ids = BTreeSet::new();
        for g in &graphs {
            if !ids.insert(g.id()) {
                return Err(Error::invalid(g.id(), "duplicate graph id"));
            }
            if let Some(labels) = g.graph_labels() {
                match task_count {
                    None => task_count = Some(labels.len()),
                    Some(t) if t != labels.len() => {
                        return Err(Error::invalid(
                            g.id(),
                            format!("has {} task labels, corpus has {t}", labels.len()),
                        ))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(GraphCorpus {
            name: name.into(),
            graphs,
            task_count: task_count.unwrap_or(0),
        })
    }

    pub fn graphs(&self) -> &[LabeledGraph] {
        &self.graphs
    }

    pub fn into_graphs(self) -> Vec<LabeledGraph> {
        self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn task_count(&self) -> usize {
        self.task_count
    }

    /// Sub-corpus with the graphs at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let graphs = indices.iter().map(|&i| self.graphs[i].clone()).collect();
        let mut sub = GraphCorpus::new(self.name.clone(), graphs)?;
        if sub.task_count == 0 {
            sub.task_count = self.task_count;
        }
        Ok(sub)
    }
}

/// Where homophily reads the class of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelSource {
    /// The graph's explicit `node_labels`.
    #[default]
    NodeLabels,
    /// The given node attribute column (column 0 is the atom type).
    Attr(usize),
}

/// How per-graph homophily is aggregated over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Total same-label edges over total edges.
    #[default]
    EdgeWeighted,
    /// Unweighted mean of per-graph ratios.
    GraphMean,
}

fn node_classes(g: &LabeledGraph, source: LabelSource) -> Result<Vec<u32>> {
    match source {
        LabelSource::NodeLabels => g
            .node_labels()
            .map(<[u32]>::to_vec)
            .ok_or_else(|| Error::MissingNodeLabels(g.id().into())),
        LabelSource::Attr(col) => g
            .node_attrs()
            .iter()
            .map(|a| a.get(col).copied())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::AttrCountMismatch {
                graph: g.id().into(),
                expected: col + 1,
                found: g.node_attr_width(),
            }),
    }
}

/// `(same-label edges, total edges)` for one graph.
pub fn homophily_counts(g: &LabeledGraph, source: LabelSource) -> Result<(usize, usize)> {
    let classes = node_classes(g, source)?;
    if g.edge_count() == 0 {
        return Err(Error::NoEdges(g.id().into()));
    }
    let same = g
        .edges()
        .iter()
        .filter(|&&(u, v)| classes[u] == classes[v])
        .count();
    Ok((same, g.edge_count()))
}

/// Fraction of edges joining nodes of the same class, using `node_labels`.
pub fn homophily_ratio(g: &LabeledGraph) -> Result<f64> {
    homophily_ratio_by(g, LabelSource::NodeLabels)
}

pub fn homophily_ratio_by(g: &LabeledGraph, source: LabelSource) -> Result<f64> {
    let (same, total) = homophily_counts(g, source)?;
    Ok(same as f64 / total as f64)
}

pub fn corpus_homophily(c: &GraphCorpus) -> Result<f64> {
    corpus_homophily_by(c, LabelSource::NodeLabels, Aggregation::EdgeWeighted)
}

pub fn corpus_homophily_by(c: &GraphCorpus, source: LabelSource, agg: Aggregation) -> Result<f64> {
    if c.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut same_total = 0usize;
    let mut edge_total = 0usize;
    let mut ratio_sum = 0.0;
    for g in c.graphs() {
        let (same, total) = homophily_counts(g, source)?;
        same_total += same;
        edge_total += total;
        ratio_sum += same as f64 / total as f64;
    }
    Ok(match agg {
        Aggregation::EdgeWeighted => same_total as f64 / edge_total as f64,
        Aggregation::GraphMean => ratio_sum / c.len() as f64,
    })
}

/// Diagonal degree matrix, stored as its diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeMatrix(Vec<usize>);

impl DegreeMatrix {
    pub fn diagonal(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, row: usize, col: usize) -> usize {
        if row == col {
            self.0[row]
        } else {
            0
        }
    }
}

pub fn degree_matrix(g: &LabeledGraph) -> DegreeMatrix {
    DegreeMatrix(g.degrees())
}
