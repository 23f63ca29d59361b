//! JSONL graph corpora, one graph object per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use graphmgs_core::graph::GraphParts;
use graphmgs_core::{GraphCorpus, LabeledGraph};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    id: String,
    n: usize,
    edges: Vec<[usize; 2]>,
    node_attrs: Vec<Vec<u32>>,
    edge_attrs: Vec<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_labels: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    graph_labels: Option<Vec<Option<u8>>>,
}

impl From<&LabeledGraph> for GraphRecord {
    fn from(g: &LabeledGraph) -> Self {
        GraphRecord {
            id: g.id().to_string(),
            n: g.node_count(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            node_attrs: g.node_attrs().to_vec(),
            edge_attrs: g.edge_attrs().to_vec(),
            node_labels: g.node_labels().map(<[u32]>::to_vec),
            graph_labels: g.graph_labels().map(<[Option<u8>]>::to_vec),
        }
    }
}

/// Parses JSONL text; `origin` names the source in error messages. Blank
/// lines are ignored. The corpus name is `name`.
pub fn parse_corpus(text: &str, origin: &Path, name: &str) -> Result<GraphCorpus> {
    let mut graphs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| CliError::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            msg,
        };
        let r: GraphRecord = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let g = LabeledGraph::from_parts(GraphParts {
            id: r.id,
            node_count: r.n,
            edges: r.edges.into_iter().map(|[u, v]| (u, v)).collect(),
            node_attrs: r.node_attrs,
            edge_attrs: r.edge_attrs,
            node_labels: r.node_labels,
            graph_labels: r.graph_labels,
        })
        .map_err(|e| parse_err(e.to_string()))?;
        graphs.push(g);
    }
    Ok(GraphCorpus::new(name, graphs)?)
}

/// Loads a corpus; its name is the file stem.
pub fn load_corpus(path: &Path) -> Result<GraphCorpus> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus");
    parse_corpus(&text, path, name)
}

pub fn corpus_to_jsonl(corpus: &GraphCorpus) -> String {
    let mut out = String::new();
    for g in corpus.graphs() {
        out.push_str(&serde_json::to_string(&GraphRecord::from(g)).expect("graph records serialize"));
        out.push('\n');
    }
    out
}

pub fn save_corpus(path: &Path, corpus: &GraphCorpus) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(corpus_to_jsonl(corpus).as_bytes())
        .map_err(|e| CliError::io(path, e))
}
