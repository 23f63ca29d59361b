//! Fingerprint schemes as configured, and the JSON fingerprint cache.

use std::fs;
use std::path::Path;

use graphmgs_core::fingerprint::{
    morgan_fingerprint, topological_fingerprint, BitFingerprint, BitScheme, MorganOptions, TopologicalOptions,
};
use graphmgs_core::hash::fnv1a;
use graphmgs_core::similarity::{Fingerprint, StructuralMetric};
use graphmgs_core::spectral::{spectral_fingerprint, LaplacianKind, SpectralFingerprint};
use graphmgs_core::{GraphCorpus, LabeledGraph};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::corpus::corpus_to_jsonl;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FingerprintSpec {
    Topological(TopologicalOptions),
    Morgan(MorganOptions),
    Spectral { k: usize, kind: LaplacianKind },
}

impl FingerprintSpec {
    pub fn validate(&self) -> Result<()> {
        let nbits_ok = |n: usize| n > 0 && n.is_power_of_two();
        let bad = match self {
            FingerprintSpec::Topological(o) if !nbits_ok(o.nbits) => Some(format!("nbits must be a power of two, got {}", o.nbits)),
            FingerprintSpec::Topological(o) if o.max_path_len == 0 => Some("max_path_len must be >= 1".to_string()),
            FingerprintSpec::Topological(o) if o.bits_per_feature == 0 => Some("bits_per_feature must be >= 1".to_string()),
            FingerprintSpec::Topological(o) if o.max_paths == 0 => Some("max_paths must be >= 1".to_string()),
            FingerprintSpec::Morgan(o) if !nbits_ok(o.nbits) => Some(format!("nbits must be a power of two, got {}", o.nbits)),
            FingerprintSpec::Spectral { k: 0, .. } => Some("spectral k must be >= 1".to_string()),
            _ => None,
        };
        bad.map_or(Ok(()), |m| Err(CliError::Usage(format!("fingerprint: {m}"))))
    }

    /// Canonical description; its hash keys the cache.
    pub fn describe(&self) -> String {
        match self {
            FingerprintSpec::Topological(o) => format!(
                "topological(max_path_len={},nbits={},bits_per_feature={},max_paths={})",
                o.max_path_len, o.nbits, o.bits_per_feature, o.max_paths
            ),
            FingerprintSpec::Morgan(o) => format!("morgan(radius={},nbits={})", o.radius, o.nbits),
            FingerprintSpec::Spectral { k, kind } => format!("spectral(k={k},laplacian={})", laplacian_name(*kind)),
        }
    }

    pub fn config_hash(&self) -> u64 {
        fnv1a(self.describe().as_bytes())
    }

    /// The structural metric used with this scheme when none is given.
    pub fn default_metric(&self) -> StructuralMetric {
        match self {
            FingerprintSpec::Spectral { .. } => StructuralMetric::NegSpectralDistance,
            _ => StructuralMetric::Tanimoto,
        }
    }

    pub fn compute(&self, g: &LabeledGraph) -> Result<Fingerprint> {
        Ok(match self {
            FingerprintSpec::Topological(o) => Fingerprint::Bits(topological_fingerprint(g, *o)?),
            FingerprintSpec::Morgan(o) => Fingerprint::Bits(morgan_fingerprint(g, *o)?),
            FingerprintSpec::Spectral { k, kind } => Fingerprint::Spectral(spectral_fingerprint(g, *k, *kind)?),
        })
    }

    pub fn compute_all(&self, corpus: &GraphCorpus) -> Result<Vec<Fingerprint>> {
        corpus.graphs().iter().map(|g| self.compute(g)).collect()
    }

    fn bit_layout(&self) -> Option<(usize, BitScheme)> {
        match *self {
            FingerprintSpec::Topological(o) => Some((
                o.nbits,
                BitScheme::Topological {
                    max_path_len: o.max_path_len,
                    bits_per_feature: o.bits_per_feature,
                },
            )),
            FingerprintSpec::Morgan(o) => Some((o.nbits, BitScheme::Morgan { radius: o.radius })),
            FingerprintSpec::Spectral { .. } => None,
        }
    }
}

pub fn laplacian_name(kind: LaplacianKind) -> &'static str {
    match kind {
        LaplacianKind::Combinatorial => "combinatorial",
        LaplacianKind::SymmetricNormalized => "normalized",
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bits: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eigenvalues: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    scheme: String,
    config_hash: String,
    corpus_hash: String,
    entries: Vec<CacheEntry>,
}

pub const CACHE_VERSION: u32 = 1;

fn hex64(v: u64) -> String {
    format!("{v:016x}")
}

pub fn corpus_hash(corpus: &GraphCorpus) -> u64 {
    fnv1a(corpus_to_jsonl(corpus).as_bytes())
}

pub fn cache_to_json(spec: &FingerprintSpec, corpus: &GraphCorpus, fps: &[Fingerprint]) -> String {
    let entries = corpus
        .graphs()
        .iter()
        .zip(fps)
        .map(|(g, f)| match f {
            Fingerprint::Bits(b) => CacheEntry {
                id: g.id().to_string(),
                bits: Some(b.to_hex()),
                eigenvalues: None,
            },
            Fingerprint::Spectral(s) => CacheEntry {
                id: g.id().to_string(),
                bits: None,
                eigenvalues: Some(s.eigenvalues().to_vec()),
            },
        })
        .collect();
    let file = CacheFile {
        version: CACHE_VERSION,
        scheme: spec.describe(),
        config_hash: hex64(spec.config_hash()),
        corpus_hash: hex64(corpus_hash(corpus)),
        entries,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("cache serializes");
    s.push('\n');
    s
}

/// Cached fingerprints for `corpus` under `spec`, or `None` when the file
/// was produced by a different scheme, parameters or corpus.
pub fn read_cache(text: &str, spec: &FingerprintSpec, corpus: &GraphCorpus) -> Result<Option<Vec<Fingerprint>>> {
    let file: CacheFile = serde_json::from_str(text).map_err(|e| CliError::Data(format!("fingerprint cache: {e}")))?;
    if file.version != CACHE_VERSION
        || file.config_hash != hex64(spec.config_hash())
        || file.corpus_hash != hex64(corpus_hash(corpus))
        || file.entries.len() != corpus.len()
    {
        return Ok(None);
    }
    let mut out = Vec::with_capacity(file.entries.len());
    for (e, g) in file.entries.into_iter().zip(corpus.graphs()) {
        if e.id != g.id() {
            return Ok(None);
        }
        let fp = match (spec, e.bits, e.eigenvalues) {
            (FingerprintSpec::Spectral { k, .. }, None, Some(values)) => {
                Fingerprint::Spectral(SpectralFingerprint::from_eigenvalues(values, *k))
            }
            (_, Some(hex), None) => {
                let (nbits, scheme) = spec.bit_layout().expect("bit scheme");
                Fingerprint::Bits(BitFingerprint::from_hex(nbits, scheme, &hex)?)
            }
            _ => return Err(CliError::Data(format!("fingerprint cache entry `{}` is malformed", e.id))),
        };
        out.push(fp);
    }
    Ok(Some(out))
}

/// Loads fingerprints from `path` when it holds a matching cache, otherwise
/// computes them and (re)writes the cache. Returns the fingerprints and
/// whether the cache was reused.
pub fn cached_fingerprints(path: &Path, spec: &FingerprintSpec, corpus: &GraphCorpus) -> Result<(Vec<Fingerprint>, bool)> {
    if let Ok(text) = fs::read_to_string(path) {
        if let Some(fps) = read_cache(&text, spec, corpus)? {
            return Ok((fps, true));
        }
        log::info!("fingerprint cache {} is stale; regenerating", path.display());
    }
    let fps = spec.compute_all(corpus)?;
    fs::write(path, cache_to_json(spec, corpus, &fps)).map_err(|e| CliError::io(path, e))?;
    Ok((fps, false))
}
