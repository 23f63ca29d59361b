use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{Arch, GnnConfig};
use crate::autodiff::{ParamId, ParamStore, SparseMatrix, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::seed::Rng;
use crate::similarity::GraphEncoder;

/// Embedding-table sizes, one per categorical node attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttrVocab {
    sizes: Vec<usize>,
}

impl AttrVocab {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "attribute vocabulary sizes must be non-empty and positive, got {sizes:?}"
            )));
        }
        Ok(AttrVocab { sizes })
    }

    /// Table sizes = per-column attribute maxima + 1.
    pub fn from_graphs<'a>(graphs: impl IntoIterator<Item = &'a LabeledGraph>) -> Result<Self> {
        let mut sizes: Option<Vec<usize>> = None;
        for g in graphs {
            let width = g.node_attr_width();
            let s = sizes.get_or_insert_with(|| vec![1; width]);
            if s.len() != width {
                return Err(Error::AttrCountMismatch {
                    graph: g.id().into(),
                    expected: s.len(),
                    found: width,
                });
            }
            for attrs in g.node_attrs() {
                for (slot, &v) in s.iter_mut().zip(attrs) {
                    *slot = (*slot).max(v as usize + 1);
                }
            }
        }
        Self::new(sizes.ok_or(Error::EmptyCorpus)?)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn width(&self) -> usize {
        self.sizes.len()
    }
}

/// Forward-pass mode. Dropout is only drawn in training mode.
pub enum Mode<'a> {
    Eval,
    Train { dropout: f64, rng: &'a mut Rng },
}

#[derive(Debug, Clone)]
enum Structure {
    None,
    Sparse(Arc<SparseMatrix>),
    /// Directed edge list (both orientations) with `1/√(d_i d_j)` weights.
    Edges {
        dst: Vec<usize>,
        src: Vec<usize>,
        weight: Tensor,
    },
}

/// Per-graph data needed by a forward pass: embedding indices and the
/// architecture's propagation operator.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    id: String,
    nodes: usize,
    attr_index: Vec<Vec<usize>>,
    structure: Structure,
}

impl PreparedGraph {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }
}

#[derive(Debug, Clone)]
struct Linear {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone)]
enum Layer {
    Gcn(Linear),
    Fcn(Linear),
    Gin {
        eps: ParamId,
        mlp1: Linear,
        mlp2: Linear,
    },
    Cheb {
        thetas: Vec<ParamId>,
        b: ParamId,
    },
    Fagcn {
        gate_self: ParamId,
        gate_nbr: ParamId,
    },
}

#[derive(Debug, Clone)]
pub struct GnnModel {
    config: GnnConfig,
    vocab: AttrVocab,
    params: ParamStore,
    embeds: Vec<ParamId>,
    layers: Vec<Layer>,
    /// FAGCN input projection and output transform.
    fagcn_io: Option<(Linear, Linear)>,
    head: Option<(Linear, usize)>,
}

fn glorot(rng: &mut Rng, rows: usize, cols: usize) -> Tensor {
    let limit = libm::sqrt(6.0 / (rows + cols) as f64);
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::new(&[rows, cols], data).expect("positive dims")
}

fn linear(params: &mut ParamStore, rng: &mut Rng, name: &str, fan_in: usize, fan_out: usize) -> Linear {
    Linear {
        w: params.add(format!("{name}.weight"), glorot(rng, fan_in, fan_out)),
        b: params.add(format!("{name}.bias"), Tensor::zeros(&[1, fan_out])),
    }
}

impl GnnModel {
    /// New encoder with Glorot-uniform weights, zero biases and `ε_gin = 0`.
    pub fn new(config: GnnConfig, vocab: AttrVocab, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let d = config.hidden_dim;
        let mut params = ParamStore::new();
        let embeds = vocab
            .sizes
            .iter()
            .enumerate()
            .map(|(a, &size)| params.add(format!("embed.{a}"), glorot(rng, size, d)))
            .collect();

        let fagcn_io = (config.arch == Arch::Fagcn).then(|| {
            let input = linear(&mut params, rng, "fagcn.in", d, d);
            let output = linear(&mut params, rng, "fagcn.out", d, d);
            (input, output)
        });

        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let name = format!("layer{l}");
            let layer = match config.arch {
                Arch::Gcn => Layer::Gcn(linear(&mut params, rng, &name, d, d)),
                Arch::Fcn => Layer::Fcn(linear(&mut params, rng, &name, d, d)),
                Arch::Gin => Layer::Gin {
                    eps: params.add(format!("{name}.eps"), Tensor::scalar(0.0)),
                    mlp1: linear(&mut params, rng, &format!("{name}.mlp1"), d, d),
                    mlp2: linear(&mut params, rng, &format!("{name}.mlp2"), d, d),
                },
                Arch::ChebNet => Layer::Cheb {
                    thetas: (0..config.cheb_order)
                        .map(|k| params.add(format!("{name}.theta{k}"), glorot(rng, d, d)))
                        .collect(),
                    b: params.add(format!("{name}.bias"), Tensor::zeros(&[1, d])),
                },
                Arch::Fagcn => Layer::Fagcn {
                    gate_self: params.add(format!("{name}.gate_self"), glorot(rng, d, 1)),
                    gate_nbr: params.add(format!("{name}.gate_nbr"), glorot(rng, d, 1)),
                },
            };
            layers.push(layer);
        }

        Ok(GnnModel {
            config,
            vocab,
            params,
            embeds,
            layers,
            fagcn_io,
            head: None,
        })
    }

    /// Attaches (or replaces) a linear head with `tasks` outputs.
    pub fn add_head(&mut self, tasks: usize, rng: &mut Rng) -> Result<()> {
        if tasks == 0 {
            return Err(Error::InvalidConfig("task_count must be >= 1".into()));
        }
        if let Some((head, _)) = &self.head {
            let (w, b) = (head.w, head.b);
            *self.params.get_mut(w) = glorot(rng, self.config.hidden_dim, tasks);
            *self.params.get_mut(b) = Tensor::zeros(&[1, tasks]);
            self.head = Some((Linear { w, b }, tasks));
        } else {
            let lin = linear(&mut self.params, rng, "head", self.config.hidden_dim, tasks);
            self.head = Some((lin, tasks));
        }
        Ok(())
    }

    /// Rebuilds a model from stored parameters; names and shapes must match
    /// the layout implied by `config`, `vocab` and `head_tasks`.
    pub fn from_params(
        config: GnnConfig,
        vocab: AttrVocab,
        head_tasks: Option<usize>,
        stored: &ParamStore,
    ) -> Result<Self> {
        let mut rng = crate::seed::rng(0);
        let mut model = GnnModel::new(config, vocab, &mut rng)?;
        if let Some(t) = head_tasks {
            model.add_head(t, &mut rng)?;
        }
        if stored.len() != model.params.len() {
            return Err(Error::InvalidConfig(format!(
                "checkpoint has {} tensors, model layout expects {}",
                stored.len(),
                model.params.len()
            )));
        }
        for (name, value) in stored.iter() {
            let slot = model
                .params
                .by_name_mut(name)
                .ok_or_else(|| Error::InvalidConfig(format!("unexpected parameter `{name}`")))?;
            if slot.shape() != value.shape() {
                return Err(Error::ShapeMismatch {
                    op: "load_params",
                    lhs: slot.shape().to_vec(),
                    rhs: value.shape().to_vec(),
                });
            }
            *slot = value.clone();
        }
        Ok(model)
    }

    pub fn config(&self) -> &GnnConfig {
        &self.config
    }

    pub fn vocab(&self) -> &AttrVocab {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn head_tasks(&self) -> Option<usize> {
        self.head.as_ref().map(|(_, t)| *t)
    }

    pub fn prepare(&self, g: &LabeledGraph) -> Result<PreparedGraph> {
        let n = g.node_count();
        if n == 0 {
            return Err(Error::EmptyGraph(g.id().into()));
        }
        if g.node_attr_width() != self.vocab.width() {
            return Err(Error::AttrCountMismatch {
                graph: g.id().into(),
                expected: self.vocab.width(),
                found: g.node_attr_width(),
            });
        }
        let mut attr_index = vec![Vec::with_capacity(n); self.vocab.width()];
        for attrs in g.node_attrs() {
            for (a, (&v, &size)) in attrs.iter().zip(&self.vocab.sizes).enumerate() {
                if v as usize >= size {
                    return Err(Error::AttrOutOfRange {
                        graph: g.id().into(),
                        attr: a,
                        value: v,
                        size,
                    });
                }
                attr_index[a].push(v as usize);
            }
        }

        let deg = g.degrees();
        let structure = match self.config.arch {
            Arch::Fcn => Structure::None,
            Arch::Gcn => {
                let dt: Vec<f64> = deg.iter().map(|&d| 1.0 / libm::sqrt(d as f64 + 1.0)).collect();
                let mut entries: Vec<_> = (0..n).map(|v| (v, v, dt[v] * dt[v])).collect();
                for &(u, v) in g.edges() {
                    let w = dt[u] * dt[v];
                    entries.push((u, v, w));
                    entries.push((v, u, w));
                }
                Structure::Sparse(Arc::new(SparseMatrix::new(n, n, entries)))
            }
            Arch::Gin => {
                let mut entries = Vec::with_capacity(2 * g.edge_count());
                for &(u, v) in g.edges() {
                    entries.push((u, v, 1.0));
                    entries.push((v, u, 1.0));
                }
                Structure::Sparse(Arc::new(SparseMatrix::new(n, n, entries)))
            }
            Arch::ChebNet => {
                // L̂ = L_norm − I = −D^{-1/2} A D^{-1/2} (λ_max = 2).
                let mut entries = Vec::with_capacity(2 * g.edge_count());
                for &(u, v) in g.edges() {
                    let w = -1.0 / libm::sqrt((deg[u] * deg[v]) as f64);
                    entries.push((u, v, w));
                    entries.push((v, u, w));
                }
                Structure::Sparse(Arc::new(SparseMatrix::new(n, n, entries)))
            }
            Arch::Fagcn => {
                let m = 2 * g.edge_count();
                let (mut dst, mut src, mut w) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
                for &(u, v) in g.edges() {
                    let c = 1.0 / libm::sqrt((deg[u] * deg[v]) as f64);
                    dst.extend([u, v]);
                    src.extend([v, u]);
                    w.extend([c, c]);
                }
                if m == 0 {
                    Structure::None
                } else {
                    Structure::Edges {
                        dst,
                        src,
                        weight: Tensor::column(w)?,
                    }
                }
            }
        };
        Ok(PreparedGraph {
            id: g.id().into(),
            nodes: n,
            attr_index,
            structure,
        })
    }

    fn apply_linear(&self, tape: &mut Tape, vars: &[Var], x: Var, lin: &Linear) -> Result<Var> {
        let h = tape.matmul(x, vars[lin.w.index()])?;
        tape.add_row(h, vars[lin.b.index()])
    }

    fn dropout(tape: &mut Tape, x: Var, mode: &mut Mode<'_>) -> Result<Var> {
        match mode {
            Mode::Train { dropout, rng } if *dropout > 0.0 => {
                let keep = 1.0 - *dropout;
                let shape = tape.value(x).shape().to_vec();
                let len = tape.value(x).len();
                let mask = (0..len)
                    .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                let m = tape.constant(Tensor::new(&shape, mask)?);
                tape.mul(x, m)
            }
            _ => Ok(x),
        }
    }

    fn sparse<'s>(prep: &'s PreparedGraph) -> &'s Arc<SparseMatrix> {
        match &prep.structure {
            Structure::Sparse(m) => m,
            _ => unreachable!("propagation operator prepared for a different architecture"),
        }
    }

    /// Records the encoder on `tape`; `vars` are the handles returned by
    /// binding [`GnnModel::params`]. Returns the `[n, hidden]` node matrix.
    pub fn forward_nodes(&self, tape: &mut Tape, vars: &[Var], prep: &PreparedGraph, mode: &mut Mode<'_>) -> Result<Var> {
        let mut h = None;
        for (table, index) in self.embeds.iter().zip(&prep.attr_index) {
            let e = tape.index_select(vars[table.index()], index)?;
            h = Some(match h {
                None => e,
                Some(acc) => tape.add(acc, e)?,
            });
        }
        let mut h = h.expect("vocabulary has at least one attribute");

        let h0 = match &self.fagcn_io {
            Some((input, _)) => {
                let p = self.apply_linear(tape, vars, h, input)?;
                let p = tape.relu(p);
                let p = Self::dropout(tape, p, mode)?;
                h = p;
                Some(p)
            }
            None => None,
        };

        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            h = match layer {
                Layer::Fcn(lin) => self.apply_linear(tape, vars, h, lin)?,
                Layer::Gcn(lin) => {
                    let xw = tape.matmul(h, vars[lin.w.index()])?;
                    let p = tape.spmm(Self::sparse(prep), xw)?;
                    tape.add_row(p, vars[lin.b.index()])?
                }
                Layer::Gin { eps, mlp1, mlp2 } => {
                    let agg = tape.spmm(Self::sparse(prep), h)?;
                    let one = tape.constant(Tensor::scalar(1.0));
                    let factor = tape.add(vars[eps.index()], one)?;
                    let own = tape.scale_by(h, factor)?;
                    let z = tape.add(agg, own)?;
                    let z = self.apply_linear(tape, vars, z, mlp1)?;
                    let z = tape.relu(z);
                    self.apply_linear(tape, vars, z, mlp2)?
                }
                Layer::Cheb { thetas, b } => {
                    let mut acc = tape.matmul(h, vars[thetas[0].index()])?;
                    let (mut prev, mut cur) = (h, h);
                    for (k, theta) in thetas.iter().enumerate().skip(1) {
                        let next = if k == 1 {
                            tape.spmm(Self::sparse(prep), h)?
                        } else {
                            let lt = tape.spmm(Self::sparse(prep), cur)?;
                            let lt2 = tape.scale(lt, 2.0);
                            tape.sub(lt2, prev)?
                        };
                        prev = cur;
                        cur = next;
                        let term = tape.matmul(next, vars[theta.index()])?;
                        acc = tape.add(acc, term)?;
                    }
                    tape.add_row(acc, vars[b.index()])?
                }
                Layer::Fagcn { gate_self, gate_nbr } => {
                    let h0 = h0.expect("fagcn input projection");
                    let base = tape.scale(h0, self.config.fagcn_eps);
                    match &prep.structure {
                        Structure::Edges { dst, src, weight } => {
                            let s_self = tape.matmul(h, vars[gate_self.index()])?;
                            let s_nbr = tape.matmul(h, vars[gate_nbr.index()])?;
                            let a = tape.gather(s_self, dst)?;
                            let bb = tape.gather(s_nbr, src)?;
                            let logits = tape.add(a, bb)?;
                            let alpha = tape.tanh(logits);
                            let wc = tape.constant(weight.clone());
                            let coef = tape.mul(alpha, wc)?;
                            let msg = tape.index_select(h, src)?;
                            let msg = tape.mul_col(msg, coef)?;
                            let agg = tape.scatter_add(msg, dst, prep.nodes)?;
                            tape.add(base, agg)?
                        }
                        _ => base,
                    }
                }
            };
            if l != last && !matches!(layer, Layer::Fagcn { .. }) {
                h = tape.relu(h);
                h = Self::dropout(tape, h, mode)?;
            }
        }

        if let Some((_, output)) = &self.fagcn_io {
            h = self.apply_linear(tape, vars, h, output)?;
        }
        Ok(h)
    }

    /// Mean-pooled `[1, hidden]` graph embedding.
    pub fn forward_graph(&self, tape: &mut Tape, vars: &[Var], prep: &PreparedGraph, mode: &mut Mode<'_>) -> Result<Var> {
        let nodes = self.forward_nodes(tape, vars, prep, mode)?;
        readout(tape, nodes)
    }

    /// `[1, tasks]` logits from a graph embedding.
    pub fn forward_logits(&self, tape: &mut Tape, vars: &[Var], graph_embedding: Var) -> Result<Var> {
        let (head, _) = self.head.as_ref().ok_or(Error::MissingHead)?;
        self.apply_linear(tape, vars, graph_embedding, head)
    }

    /// Evaluation-mode node embeddings.
    pub fn encode_nodes(&self, g: &LabeledGraph) -> Result<Tensor> {
        let prep = self.prepare(g)?;
        let mut tape = Tape::new();
        let vars = self.params.bind_frozen(&mut tape);
        let h = self.forward_nodes(&mut tape, &vars, &prep, &mut Mode::Eval)?;
        Ok(tape.value(h).clone())
    }

    /// Evaluation-mode graph embedding `h_G`.
    pub fn embed_graph(&self, g: &LabeledGraph) -> Result<Vec<f64>> {
        let prep = self.prepare(g)?;
        self.embed_prepared(&prep)
    }

    pub fn embed_prepared(&self, prep: &PreparedGraph) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vars = self.params.bind_frozen(&mut tape);
        let h = self.forward_graph(&mut tape, &vars, prep, &mut Mode::Eval)?;
        Ok(tape.value(h).data().to_vec())
    }

    /// Evaluation-mode per-task logits.
    pub fn classify(&self, g: &LabeledGraph) -> Result<Vec<f64>> {
        let tasks = self.head_tasks().ok_or(Error::MissingHead)?;
        if let Some(labels) = g.graph_labels() {
            if labels.len() != tasks {
                return Err(Error::TaskCountMismatch {
                    expected: tasks,
                    found: labels.len(),
                });
            }
        }
        let prep = self.prepare(g)?;
        self.classify_prepared(&prep)
    }

    pub fn classify_prepared(&self, prep: &PreparedGraph) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vars = self.params.bind_frozen(&mut tape);
        let hg = self.forward_graph(&mut tape, &vars, prep, &mut Mode::Eval)?;
        let logits = self.forward_logits(&mut tape, &vars, hg)?;
        Ok(tape.value(logits).data().to_vec())
    }
}

impl GraphEncoder for GnnModel {
    fn embed(&self, g: &LabeledGraph) -> Result<Vec<f64>> {
        self.embed_graph(g)
    }
}

/// Mean over node rows on the tape.
pub fn readout(tape: &mut Tape, nodes: Var) -> Result<Var> {
    tape.mean_rows(nodes)
}

/// Column mean of plain node-embedding rows.
pub fn readout_rows(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = rows.first().ok_or_else(|| Error::EmptyGraph(String::new()))?;
    let mut out = vec![0.0; first.len()];
    for r in rows {
        if r.len() != out.len() {
            return Err(Error::LengthMismatch {
                left: out.len(),
                right: r.len(),
            });
        }
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    let n = rows.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphParts;

    fn model(arch: Arch, layers: usize, d: usize, vocab: Vec<usize>) -> GnnModel {
        let cfg = GnnConfig {
            arch,
            layers,
            hidden_dim: d,
            ..GnnConfig::default()
        };
        GnnModel::new(cfg, AttrVocab::new(vocab).unwrap(), &mut crate::seed::rng(7)).unwrap()
    }

    #[test]
    fn gcn_single_node_example() {
        let mut m = model(Arch::Gcn, 1, 1, vec![1]);
        *m.params_mut().by_name_mut("embed.0").unwrap() = Tensor::matrix(1, 1, vec![2.0]).unwrap();
        *m.params_mut().by_name_mut("layer0.weight").unwrap() = Tensor::matrix(1, 1, vec![0.5]).unwrap();
        let g = LabeledGraph::from_edges("one", 1, &[]).unwrap();
        let h = m.encode_nodes(&g).unwrap();
        assert_eq!(h.data(), &[1.0]);
    }

    #[test]
    fn symmetric_pair_rows_identical() {
        for arch in Arch::ALL {
            let m = model(arch, 2, 4, vec![1]);
            let g = LabeledGraph::from_edges("pair", 2, &[(0, 1)]).unwrap();
            let h = m.encode_nodes(&g).unwrap();
            assert_eq!(h.row_slice(0), h.row_slice(1), "{arch}");
        }
    }

    #[test]
    fn attr_out_of_range() {
        let m = model(Arch::Gin, 1, 4, vec![2]);
        let g = LabeledGraph::from_parts(GraphParts {
            id: "bad".into(),
            node_count: 1,
            node_attrs: vec![vec![5]],
            ..GraphParts::default()
        })
        .unwrap();
        assert!(matches!(m.encode_nodes(&g), Err(Error::AttrOutOfRange { value: 5, size: 2, .. })));
    }

    #[test]
    fn readout_examples() {
        assert_eq!(readout_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(readout_rows(&vec![vec![3.0]; 4]).unwrap(), vec![3.0]);
        assert!(matches!(readout_rows(&[]), Err(Error::EmptyGraph(_))));
    }

    #[test]
    fn classify_requires_head_and_matching_tasks() {
        let mut m = model(Arch::Gcn, 1, 3, vec![1]);
        let g = LabeledGraph::from_edges("g", 2, &[(0, 1)])
            .unwrap()
            .with_graph_labels(vec![Some(1), None])
            .unwrap();
        assert!(matches!(m.classify(&g), Err(Error::MissingHead)));
        m.add_head(1, &mut crate::seed::rng(1)).unwrap();
        assert!(matches!(m.classify(&g), Err(Error::TaskCountMismatch { expected: 1, found: 2 })));
        m.add_head(2, &mut crate::seed::rng(1)).unwrap();
        for name in ["head.weight", "head.bias"] {
            m.params_mut().by_name_mut(name).unwrap().data_mut().fill(0.0);
        }
        assert_eq!(m.classify(&g).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn from_params_round_trip() {
        let mut m = model(Arch::ChebNet, 2, 3, vec![2, 3]);
        m.add_head(2, &mut crate::seed::rng(3)).unwrap();
        let back = GnnModel::from_params(*m.config(), m.vocab().clone(), Some(2), m.params()).unwrap();
        let g = LabeledGraph::from_edges("g", 3, &[(0, 1), (1, 2)]).unwrap();
        let g = g.with_node_attrs(vec![vec![1, 2], vec![0, 0], vec![1, 1]]).unwrap();
        assert_eq!(m.classify(&g).unwrap(), back.classify(&g).unwrap());
    }
}
