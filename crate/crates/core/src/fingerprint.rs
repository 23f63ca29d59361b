//! Bit-vector structural fingerprints: enumerated simple paths
//! ("topological") and circular atom environments ("Morgan").
//!
//! All hashing is FNV-1a over little-endian canonical encodings, and bit
//! indices for path features come from a splitmix64 stream seeded with the
//! feature hash, so fingerprints are identical across runs and platforms.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::hash::{Fnv1a, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitScheme {
    Topological {
        max_path_len: usize,
        bits_per_feature: usize,
    },
    Morgan {
        radius: usize,
    },
}

impl fmt::Display for BitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BitScheme::Topological {
                max_path_len,
                bits_per_feature,
            } => write!(f, "topological(max_path_len={max_path_len},bits_per_feature={bits_per_feature})"),
            BitScheme::Morgan { radius } => write!(f, "morgan(radius={radius})"),
        }
    }
}

/// Fixed-length bit vector, length a power of two.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitFingerprint {
    words: Vec<u64>,
    nbits: usize,
    scheme: BitScheme,
}

fn check_nbits(nbits: usize) -> Result<()> {
    if nbits == 0 || !nbits.is_power_of_two() {
        return Err(Error::InvalidConfig(alloc::format!(
            "fingerprint length must be a power of two, got {nbits}"
        )));
    }
    Ok(())
}

impl BitFingerprint {
    pub fn zeros(nbits: usize, scheme: BitScheme) -> Result<Self> {
        check_nbits(nbits)?;
        Ok(BitFingerprint {
            words: vec![0; nbits.div_ceil(64)],
            nbits,
            scheme,
        })
    }

    /// Builds from explicit bit positions.
    pub fn from_bits(nbits: usize, scheme: BitScheme, bits: &[usize]) -> Result<Self> {
        let mut fp = Self::zeros(nbits, scheme)?;
        for &b in bits {
            if b >= nbits {
                return Err(Error::IndexOutOfRange {
                    op: "fingerprint",
                    index: b,
                    len: nbits,
                });
            }
            fp.set(b);
        }
        Ok(fp)
    }

    /// Parses the output of [`BitFingerprint::to_hex`].
    pub fn from_hex(nbits: usize, scheme: BitScheme, hex: &str) -> Result<Self> {
        let mut fp = Self::zeros(nbits, scheme)?;
        let expected = nbits.div_ceil(4);
        if hex.len() != expected {
            return Err(Error::FingerprintMismatch(alloc::format!(
                "hex string has {} digits, expected {expected}",
                hex.len()
            )));
        }
        for (i, c) in hex.chars().enumerate() {
            let nibble = c
                .to_digit(16)
                .ok_or_else(|| Error::FingerprintMismatch(alloc::format!("bad hex digit {c:?}")))?;
            for b in 0..4 {
                if nibble & (1 << b) != 0 {
                    let bit = i * 4 + b;
                    if bit >= nbits {
                        return Err(Error::FingerprintMismatch("bit beyond fingerprint length".into()));
                    }
                    fp.set(bit);
                }
            }
        }
        Ok(fp)
    }

    /// Little-endian nibble encoding: digit `i` holds bits `4i..4i+4`.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.nbits.div_ceil(4));
        for i in 0..self.nbits.div_ceil(4) {
            let mut nibble = 0u32;
            for b in 0..4 {
                let bit = i * 4 + b;
                if bit < self.nbits && self.get(bit) {
                    nibble |= 1 << b;
                }
            }
            s.push(core::char::from_digit(nibble, 16).expect("nibble"));
        }
        s
    }

    fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] & (1 << (bit % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.nbits
    }

    pub fn is_empty(&self) -> bool {
        self.nbits == 0
    }

    pub fn scheme(&self) -> BitScheme {
        self.scheme
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(move |&b| self.get(b))
    }

    /// `true` when every bit set here is set in `other`.
    pub fn is_subset_of(&self, other: &BitFingerprint) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn and_count(&self, other: &BitFingerprint) -> Result<usize> {
        if self.nbits != other.nbits || self.scheme != other.scheme {
            return Err(Error::FingerprintMismatch(alloc::format!(
                "{} bits {} vs {} bits {}",
                self.nbits,
                self.scheme,
                other.nbits,
                other.scheme
            )));
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }
}

fn hash_attrs(h: &mut Fnv1a, attrs: &[u32]) {
    h.write_u32(attrs.len() as u32);
    for &a in attrs {
        h.write_u32(a);
    }
}

fn bond_code(g: &LabeledGraph, edge: usize) -> u64 {
    let mut h = Fnv1a::new();
    hash_attrs(&mut h, &g.edge_attrs()[edge]);
    h.finish()
}

/// Hash of a node's local attributes: its categorical attributes (atom type,
/// aromatic flag, ...), its degree, and the multiset of attached bond codes.
pub fn atom_invariant(g: &LabeledGraph, v: usize) -> u64 {
    let mut h = Fnv1a::new();
    hash_attrs(&mut h, &g.node_attrs()[v]);
    h.write_u64(g.degree(v) as u64);
    let mut bonds: Vec<u64> = g.neighbors(v).iter().map(|&(_, e)| bond_code(g, e)).collect();
    bonds.sort_unstable();
    h.write_u64(bonds.len() as u64);
    for b in bonds {
        h.write_u64(b);
    }
    h.finish()
}

pub fn atom_invariants(g: &LabeledGraph) -> Vec<u64> {
    (0..g.node_count()).map(|v| atom_invariant(g, v)).collect()
}

/// Hash of a node's categorical attributes alone. Path features use this
/// rather than [`atom_invariant`], so a path's label depends only on the
/// nodes and bonds on it: any subgraph's paths are then paths of the whole
/// graph with identical hashes.
pub fn atom_code(g: &LabeledGraph, v: usize) -> u64 {
    let mut h = Fnv1a::new();
    hash_attrs(&mut h, &g.node_attrs()[v]);
    h.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopologicalOptions {
    pub max_path_len: usize,
    pub nbits: usize,
    pub bits_per_feature: usize,
    pub max_paths: usize,
}

impl Default for TopologicalOptions {
    fn default() -> Self {
        TopologicalOptions {
            max_path_len: 7,
            nbits: 2048,
            bits_per_feature: 2,
            max_paths: 1_000_000,
        }
    }
}

/// Canonical hashes of all simple paths with 1..=`max_path_len` edges; each
/// undirected path appears once. A path is labelled by the alternating
/// sequence of [`atom_code`]s and bond codes along it.
pub fn path_feature_hashes(g: &LabeledGraph, max_path_len: usize, max_paths: usize) -> Result<BTreeSet<u64>> {
    let inv: Vec<u64> = (0..g.node_count()).map(|v| atom_code(g, v)).collect();
    let bonds: Vec<u64> = (0..g.edge_count()).map(|e| bond_code(g, e)).collect();
    let mut out = BTreeSet::new();
    let mut count = 0usize;

    let mut nodes = Vec::with_capacity(max_path_len + 1);
    let mut edges = Vec::with_capacity(max_path_len);
    let mut on_path = vec![false; g.node_count()];
    let mut forward = Vec::new();
    let mut backward = Vec::new();

    struct Walk<'a> {
        g: &'a LabeledGraph,
        inv: &'a [u64],
        bonds: &'a [u64],
        max_len: usize,
        max_paths: usize,
    }

    #[allow(clippy::too_many_arguments)]
    fn extend(
        w: &Walk<'_>,
        nodes: &mut Vec<usize>,
        edges: &mut Vec<usize>,
        on_path: &mut [bool],
        forward: &mut Vec<u64>,
        backward: &mut Vec<u64>,
        out: &mut BTreeSet<u64>,
        count: &mut usize,
    ) -> Result<()> {
        let last = *nodes.last().expect("non-empty path");
        for &(next, e) in w.g.neighbors(last) {
            if on_path[next] {
                continue;
            }
            nodes.push(next);
            edges.push(e);
            on_path[next] = true;

            // Each undirected path is emitted from its smaller endpoint.
            if nodes[0] < next {
                *count += 1;
                if *count > w.max_paths {
                    return Err(Error::PathLimit {
                        graph: w.g.id().into(),
                        limit: w.max_paths,
                    });
                }
                out.insert(canonical_path_hash(w.inv, w.bonds, nodes, edges, forward, backward));
            }
            if edges.len() < w.max_len {
                extend(w, nodes, edges, on_path, forward, backward, out, count)?;
            }

            on_path[next] = false;
            nodes.pop();
            edges.pop();
        }
        Ok(())
    }

    let walk = Walk {
        g,
        inv: &inv,
        bonds: &bonds,
        max_len: max_path_len,
        max_paths,
    };
    if max_path_len == 0 {
        return Ok(out);
    }
    for start in 0..g.node_count() {
        nodes.clear();
        edges.clear();
        nodes.push(start);
        on_path[start] = true;
        extend(&walk, &mut nodes, &mut edges, &mut on_path, &mut forward, &mut backward, &mut out, &mut count)?;
        on_path[start] = false;
    }
    Ok(out)
}

fn canonical_path_hash(
    inv: &[u64],
    bonds: &[u64],
    nodes: &[usize],
    edges: &[usize],
    forward: &mut Vec<u64>,
    backward: &mut Vec<u64>,
) -> u64 {
    forward.clear();
    backward.clear();
    for (i, &v) in nodes.iter().enumerate() {
        forward.push(inv[v]);
        if i < edges.len() {
            forward.push(bonds[edges[i]]);
        }
    }
    backward.extend(forward.iter().rev());
    let canon = if *backward < *forward { backward } else { forward };
    let mut h = Fnv1a::new();
    h.write_u64(canon.len() as u64);
    for &x in canon.iter() {
        h.write_u64(x);
    }
    h.finish()
}

pub fn topological_fingerprint(g: &LabeledGraph, opts: TopologicalOptions) -> Result<BitFingerprint> {
    let scheme = BitScheme::Topological {
        max_path_len: opts.max_path_len,
        bits_per_feature: opts.bits_per_feature,
    };
    let mut fp = BitFingerprint::zeros(opts.nbits, scheme)?;
    let mask = opts.nbits as u64 - 1;
    for feature in path_feature_hashes(g, opts.max_path_len, opts.max_paths)? {
        let mut rng = SplitMix64::new(feature);
        for _ in 0..opts.bits_per_feature {
            fp.set((rng.next() & mask) as usize);
        }
    }
    Ok(fp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MorganOptions {
    pub radius: usize,
    pub nbits: usize,
}

impl Default for MorganOptions {
    fn default() -> Self {
        MorganOptions {
            radius: 2,
            nbits: 2048,
        }
    }
}

/// Distinct surviving circular identifiers per round, sorted. An
/// environment is dropped when its atom set already appeared at an earlier
/// round; atoms sharing one atom set within a round keep only the smallest
/// identifier.
pub fn morgan_identifiers(g: &LabeledGraph, radius: usize) -> Vec<Vec<u64>> {
    let n = g.node_count();
    let words = n.div_ceil(64).max(1);
    let mut ids = atom_invariants(g);
    let mut envs: Vec<Vec<u64>> = (0..n)
        .map(|v| {
            let mut set = vec![0u64; words];
            set[v / 64] |= 1 << (v % 64);
            set
        })
        .collect();
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut rounds = Vec::with_capacity(radius + 1);

    let survivors = |ids: &[u64], envs: &[Vec<u64>], seen: &mut BTreeSet<Vec<u64>>| {
        let mut best: BTreeMap<&Vec<u64>, u64> = BTreeMap::new();
        for (env, &id) in envs.iter().zip(ids) {
            if seen.contains(env) {
                continue;
            }
            best.entry(env).and_modify(|b| *b = (*b).min(id)).or_insert(id);
        }
        let mut kept: Vec<u64> = best.values().copied().collect();
        kept.sort_unstable();
        kept.dedup();
        for env in envs {
            seen.insert(env.clone());
        }
        kept
    };

    rounds.push(survivors(&ids, &envs, &mut seen));
    for round in 1..=radius {
        let mut next_ids = Vec::with_capacity(n);
        let mut next_envs = Vec::with_capacity(n);
        for v in 0..n {
            let mut nbrs: Vec<(u64, u64)> = g
                .neighbors(v)
                .iter()
                .map(|&(u, e)| (bond_code(g, e), ids[u]))
                .collect();
            nbrs.sort_unstable();
            let mut h = Fnv1a::new();
            h.write_u64(round as u64);
            h.write_u64(ids[v]);
            h.write_u64(nbrs.len() as u64);
            for (b, id) in nbrs {
                h.write_u64(b);
                h.write_u64(id);
            }
            next_ids.push(h.finish());

            let mut env = envs[v].clone();
            for &(u, _) in g.neighbors(v) {
                for (a, b) in env.iter_mut().zip(&envs[u]) {
                    *a |= b;
                }
            }
            next_envs.push(env);
        }
        ids = next_ids;
        envs = next_envs;
        rounds.push(survivors(&ids, &envs, &mut seen));
    }
    rounds
}

pub fn morgan_fingerprint(g: &LabeledGraph, opts: MorganOptions) -> Result<BitFingerprint> {
    let mut fp = BitFingerprint::zeros(opts.nbits, BitScheme::Morgan { radius: opts.radius })?;
    let mask = opts.nbits as u64 - 1;
    for round in morgan_identifiers(g, opts.radius) {
        for id in round {
            fp.set((id & mask) as usize);
        }
    }
    Ok(fp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> LabeledGraph {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        LabeledGraph::from_edges("chain", n, &edges).unwrap()
    }

    #[test]
    fn single_node_topological_is_empty() {
        let g = LabeledGraph::from_edges("one", 1, &[]).unwrap();
        let fp = topological_fingerprint(&g, TopologicalOptions::default()).unwrap();
        assert_eq!(fp.count_ones(), 0);
        assert_eq!(fp.len(), 2048);
    }

    #[test]
    fn topological_is_deterministic() {
        let g = chain(5);
        let a = topological_fingerprint(&g, TopologicalOptions::default()).unwrap();
        let b = topological_fingerprint(&g, TopologicalOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.count_ones() > 0);
    }

    #[test]
    fn path_counts_on_chain() {
        // Identical atoms and bonds: one feature per path length.
        let g = chain(5);
        assert_eq!(path_feature_hashes(&g, 7, 1000).unwrap().len(), 4);
        assert_eq!(path_feature_hashes(&g, 2, 1000).unwrap().len(), 2);
    }

    #[test]
    fn path_limit_is_enforced() {
        let edges: Vec<(usize, usize)> = (0..6).flat_map(|i| ((i + 1)..6).map(move |j| (i, j))).collect();
        let k6 = LabeledGraph::from_edges("k6", 6, &edges).unwrap();
        assert!(matches!(path_feature_hashes(&k6, 7, 10), Err(Error::PathLimit { .. })));
    }

    #[test]
    fn morgan_single_node_sets_one_bit() {
        let g = LabeledGraph::from_edges("one", 1, &[]).unwrap();
        let ids = morgan_identifiers(&g, 2);
        assert_eq!(ids[0].len(), 1);
        assert!(ids[1].is_empty() && ids[2].is_empty());
        let fp = morgan_fingerprint(&g, MorganOptions::default()).unwrap();
        assert_eq!(fp.count_ones(), 1);
        assert!(fp.get((atom_invariant(&g, 0) & 2047) as usize));
    }

    #[test]
    fn morgan_star_round_zero_classes() {
        let star = LabeledGraph::from_edges("s3", 4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let ids = morgan_identifiers(&star, 2);
        let distinct: BTreeSet<u64> = atom_invariants(&star).into_iter().collect();
        assert_eq!(distinct.len(), 2);
        assert_eq!(ids[0].len(), 2);
        // Round 1: the centre covers all atoms; each leaf covers {leaf, centre}.
        assert_eq!(ids[1].len(), 2);
        // Round 2: every environment is the full atom set, already seen.
        assert!(ids[2].is_empty());
    }

    #[test]
    fn hex_round_trip() {
        let scheme = BitScheme::Morgan { radius: 2 };
        let fp = BitFingerprint::from_bits(64, scheme, &[0, 5, 63]).unwrap();
        let hex = fp.to_hex();
        assert_eq!(hex.len(), 16);
        assert_eq!(BitFingerprint::from_hex(64, scheme, &hex).unwrap(), fp);
        assert!(BitFingerprint::from_hex(64, scheme, "zz").is_err());
    }

    #[test]
    fn nbits_must_be_power_of_two() {
        assert!(BitFingerprint::zeros(1000, BitScheme::Morgan { radius: 1 }).is_err());
    }
}
