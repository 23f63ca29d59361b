//! Run configuration: a preset, overlaid by a `key = value` file, overlaid
//! by command-line settings.
//!
//! Every key is listed by [`Config::entries`], which is also the format of
//! the resolved-config dump written next to each command's outputs.
//! Lines starting with `#` and blank lines are ignored.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use graphmgs_core::autodiff::AdamConfig;
use graphmgs_core::fingerprint::{MorganOptions, TopologicalOptions};
use graphmgs_core::gnn::{Arch, GnnConfig};
use graphmgs_core::graph::{Aggregation, LabelSource};
use graphmgs_core::similarity::StructuralMetric;
use graphmgs_core::spectral::LaplacianKind;
use graphmgs_core::train::{FinetuneConfig, LabelRule, PgmConfig, Surrogate, SyntheticSpec, Temperature};

use crate::error::{CliError, Result};
use crate::io::fingerprints::{laplacian_name, FingerprintSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preset {
    /// 2 layers, 64 hidden units, batch 32, 50 epochs.
    #[default]
    Desk,
    /// 5 layers, 300 hidden units, pre-training batch 256, 100 epochs.
    Paper,
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(CliError::Usage(format!("unknown preset `{s}` (expected desk or paper)"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Topological,
    Morgan,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricChoice {
    /// Tanimoto for bit fingerprints, negated spectral distance otherwise.
    Auto,
    Fixed(StructuralMetric),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Fine-tune from random initialisation.
    None,
    /// Pre-train with PGM, then fine-tune.
    Pgm,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Pgm => "pgm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub preset: Preset,
    pub seed: u64,
    pub model: GnnConfig,
    /// Attribute alphabet sizes; derived from the data when unset.
    pub vocab: Option<Vec<usize>>,
    pub adam: AdamConfig,

    pub pretrain_epochs: usize,
    pub pretrain_batch_size: usize,
    pub surrogate: Surrogate,
    pub temperature: Temperature,
    pub pretrain_dropout: f64,
    pub heldout_fraction: f64,
    pub heldout_pairs: usize,

    pub finetune_epochs: usize,
    pub finetune_batch_size: usize,

    pub scheme: SchemeKind,
    pub nbits: usize,
    pub max_path_len: usize,
    pub bits_per_feature: usize,
    pub max_paths: usize,
    pub radius: usize,
    pub spectral_k: usize,
    pub laplacian: LaplacianKind,
    pub metric: MetricChoice,
    pub n_pairs: usize,

    pub label_source: LabelSource,
    pub aggregation: Aggregation,

    pub seeds: usize,
    pub archs: Vec<Arch>,
    pub strategies: Vec<Strategy>,
    pub pretrain_corpus: Option<PathBuf>,

    pub synthetic: SyntheticSpec,
}

impl Config {
    pub fn preset(preset: Preset) -> Self {
        let (model, pretrain_epochs, pretrain_batch_size, finetune_epochs) = match preset {
            Preset::Desk => (GnnConfig::desk(Arch::Gin), 50, 32, 50),
            Preset::Paper => (GnnConfig::paper(Arch::Gin), 100, 256, 100),
        };
        let topo = TopologicalOptions::default();
        let pgm = PgmConfig::default();
        Config {
            preset,
            seed: 0,
            model,
            vocab: None,
            adam: AdamConfig::default(),
            pretrain_epochs,
            pretrain_batch_size,
            surrogate: pgm.surrogate,
            temperature: pgm.temperature,
            pretrain_dropout: pgm.dropout,
            heldout_fraction: pgm.heldout_fraction,
            heldout_pairs: pgm.heldout_pairs,
            finetune_epochs,
            finetune_batch_size: 32,
            scheme: SchemeKind::Topological,
            nbits: topo.nbits,
            max_path_len: topo.max_path_len,
            bits_per_feature: topo.bits_per_feature,
            max_paths: topo.max_paths,
            radius: MorganOptions::default().radius,
            spectral_k: 6,
            laplacian: LaplacianKind::Combinatorial,
            metric: MetricChoice::Auto,
            n_pairs: 1000,
            label_source: LabelSource::NodeLabels,
            aggregation: Aggregation::EdgeWeighted,
            seeds: 10,
            archs: vec![Arch::Gin],
            strategies: vec![Strategy::None],
            pretrain_corpus: None,
            synthetic: SyntheticSpec::default(),
        }
    }

    /// Preset, then `file` entries, then `overrides` in order. A `preset`
    /// key in the file selects the base unless `preset` is given.
    pub fn resolve(preset: Option<Preset>, file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let file_entries = match file {
            Some(p) => parse_file(p)?,
            None => Vec::new(),
        };
        let from_file = file_entries.iter().rev().find(|(k, _)| k == "preset").map(|(_, v)| v.parse()).transpose()?;
        let mut cfg = Config::preset(preset.or(from_file).unwrap_or_default());
        for (k, v) in file_entries.iter().filter(|(k, _)| k != "preset") {
            cfg.set(k, v)
                .map_err(|e| CliError::Usage(format!("{}: {e}", file.expect("entries come from a file").display())))?;
        }
        for (k, v) in overrides {
            if k == "preset" {
                return Err(CliError::Usage("use --preset to choose a preset".into()));
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| CliError::Usage(format!("`{key}`: cannot parse `{v}`")))
        }
        fn opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
            if v == "none" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        fn list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
            v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
        }
        let bad = |what: &str| CliError::Usage(format!("`{key}`: unknown {what} `{value}`"));
        let s = &mut self.synthetic;
        match key {
            "seed" => self.seed = num(key, value)?,
            "arch" => self.model.arch = value.parse().map_err(|_| bad("architecture"))?,
            "layers" => self.model.layers = num(key, value)?,
            "hidden_dim" => self.model.hidden_dim = num(key, value)?,
            "cheb_order" => self.model.cheb_order = num(key, value)?,
            "fagcn_eps" => self.model.fagcn_eps = num(key, value)?,
            "dropout" => self.model.dropout = num(key, value)?,
            "vocab" => {
                self.vocab = if value == "auto" {
                    None
                } else {
                    Some(list(value, |x| num(key, x))?)
                }
            }
            "lr" => self.adam.lr = num(key, value)?,
            "beta1" => self.adam.beta1 = num(key, value)?,
            "beta2" => self.adam.beta2 = num(key, value)?,
            "adam_eps" => self.adam.epsilon = num(key, value)?,
            "pretrain_epochs" => self.pretrain_epochs = num(key, value)?,
            "pretrain_batch_size" => self.pretrain_batch_size = num(key, value)?,
            "surrogate" => {
                self.surrogate = match value {
                    "softrank" => Surrogate::SoftRank,
                    "pearson" => Surrogate::Pearson,
                    _ => return Err(bad("surrogate")),
                }
            }
            "temperature" => {
                self.temperature = match value.split_once(':') {
                    Some(("iqr", f)) => Temperature::IqrScaled(num(key, f)?),
                    Some(("fixed", t)) => Temperature::Fixed(num(key, t)?),
                    _ => return Err(bad("temperature (iqr:F or fixed:T)")),
                }
            }
            "pretrain_dropout" => self.pretrain_dropout = num(key, value)?,
            "heldout_fraction" => self.heldout_fraction = num(key, value)?,
            "heldout_pairs" => self.heldout_pairs = num(key, value)?,
            "finetune_epochs" => self.finetune_epochs = num(key, value)?,
            "finetune_batch_size" => self.finetune_batch_size = num(key, value)?,
            "scheme" => {
                self.scheme = match value {
                    "topological" => SchemeKind::Topological,
                    "morgan" => SchemeKind::Morgan,
                    "spectral" => SchemeKind::Spectral,
                    _ => return Err(bad("fingerprint scheme")),
                }
            }
            "nbits" => self.nbits = num(key, value)?,
            "max_path_len" => self.max_path_len = num(key, value)?,
            "bits_per_feature" => self.bits_per_feature = num(key, value)?,
            "max_paths" => self.max_paths = num(key, value)?,
            "radius" => self.radius = num(key, value)?,
            "spectral_k" => self.spectral_k = num(key, value)?,
            "laplacian" => {
                self.laplacian = match value {
                    "combinatorial" => LaplacianKind::Combinatorial,
                    "normalized" => LaplacianKind::SymmetricNormalized,
                    _ => return Err(bad("laplacian")),
                }
            }
            "metric" => {
                self.metric = match value {
                    "auto" => MetricChoice::Auto,
                    "tanimoto" => MetricChoice::Fixed(StructuralMetric::Tanimoto),
                    "dice" => MetricChoice::Fixed(StructuralMetric::Dice),
                    "spectral" => MetricChoice::Fixed(StructuralMetric::NegSpectralDistance),
                    _ => return Err(bad("metric")),
                }
            }
            "n_pairs" => self.n_pairs = num(key, value)?,
            "label_source" => {
                self.label_source = match value.split_once(':') {
                    None if value == "labels" => LabelSource::NodeLabels,
                    Some(("attr", col)) => LabelSource::Attr(num(key, col)?),
                    _ => return Err(bad("label source (labels or attr:K)")),
                }
            }
            "aggregation" => {
                self.aggregation = match value {
                    "edge" => Aggregation::EdgeWeighted,
                    "mean" => Aggregation::GraphMean,
                    _ => return Err(bad("aggregation")),
                }
            }
            "seeds" => self.seeds = num(key, value)?,
            "archs" => self.archs = list(value, |a| a.parse().map_err(|_| bad("architecture")))?,
            "strategies" => {
                self.strategies = list(value, |x| match x {
                    "none" => Ok(Strategy::None),
                    "pgm" => Ok(Strategy::Pgm),
                    _ => Err(bad("strategy")),
                })?
            }
            "pretrain_corpus" => self.pretrain_corpus = (value != "none").then(|| PathBuf::from(value)),
            "synthetic.name" => s.name = value.to_string(),
            "synthetic.n_graphs" => s.n_graphs = num(key, value)?,
            "synthetic.min_nodes" => s.min_nodes = num(key, value)?,
            "synthetic.max_nodes" => s.max_nodes = num(key, value)?,
            "synthetic.degree_min" => s.degree_range.0 = num(key, value)?,
            "synthetic.degree_max" => s.degree_range.1 = num(key, value)?,
            "synthetic.homophily" => s.homophily = num(key, value)?,
            "synthetic.node_classes" => s.node_classes = num(key, value)?,
            "synthetic.max_dominance" => s.max_dominance = opt(key, value)?,
            "synthetic.degree_attr_cap" => s.degree_attr_cap = opt(key, value)?,
            "synthetic.extra_attr_sizes" => s.extra_attr_sizes = list(value, |x| num(key, x))?,
            "synthetic.label_rule" => {
                s.label_rule = match value {
                    "none" => None,
                    "triangle_motif" => Some(LabelRule::TriangleMotif),
                    "spectral_threshold" => Some(LabelRule::SpectralThreshold),
                    _ => return Err(bad("label rule")),
                }
            }
            "synthetic.tolerance" => s.tolerance = num(key, value)?,
            "synthetic.max_rewiring" => s.max_rewiring = num(key, value)?,
            _ => return Err(CliError::Usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        // Parameters of the unused schemes are checked too.
        for scheme in [SchemeKind::Topological, SchemeKind::Morgan, SchemeKind::Spectral] {
            Config { scheme, ..self.clone() }.fingerprint_spec().validate()?;
        }
        self.pgm_config(self.seed).validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.metric()?;
        let usage = |m: &str| Err(CliError::Usage(m.to_string()));
        if self.finetune_batch_size == 0 {
            return usage("finetune_batch_size must be >= 1");
        }
        if self.seeds == 0 {
            return usage("seeds must be >= 1");
        }
        if self.archs.is_empty() || self.strategies.is_empty() {
            return usage("archs and strategies must not be empty");
        }
        if self.n_pairs == 0 {
            return usage("n_pairs must be >= 1");
        }
        let mut s = self.synthetic.clone();
        s.seed = self.seed;
        s.validate().map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn fingerprint_spec(&self) -> FingerprintSpec {
        match self.scheme {
            SchemeKind::Topological => FingerprintSpec::Topological(TopologicalOptions {
                max_path_len: self.max_path_len,
                nbits: self.nbits,
                bits_per_feature: self.bits_per_feature,
                max_paths: self.max_paths,
            }),
            SchemeKind::Morgan => FingerprintSpec::Morgan(MorganOptions {
                radius: self.radius,
                nbits: self.nbits,
            }),
            SchemeKind::Spectral => FingerprintSpec::Spectral {
                k: self.spectral_k,
                kind: self.laplacian,
            },
        }
    }

    /// The structural metric, checked against the fingerprint scheme.
    pub fn metric(&self) -> Result<StructuralMetric> {
        let spec = self.fingerprint_spec();
        let m = match self.metric {
            MetricChoice::Auto => spec.default_metric(),
            MetricChoice::Fixed(m) => m,
        };
        let spectral_scheme = self.scheme == SchemeKind::Spectral;
        if spectral_scheme != (m == StructuralMetric::NegSpectralDistance) {
            return Err(CliError::Usage(format!("metric {m:?} does not apply to {}", spec.describe())));
        }
        Ok(m)
    }

    pub fn pgm_config(&self, seed: u64) -> PgmConfig {
        PgmConfig {
            surrogate: self.surrogate,
            temperature: self.temperature,
            batch_size: self.pretrain_batch_size,
            epochs: self.pretrain_epochs,
            adam: self.adam,
            metric: self.metric().unwrap_or_default(),
            heldout_fraction: self.heldout_fraction,
            heldout_pairs: self.heldout_pairs,
            dropout: self.pretrain_dropout,
            seed,
        }
    }

    pub fn finetune_config(&self, seed: u64) -> FinetuneConfig {
        FinetuneConfig {
            epochs: self.finetune_epochs,
            batch_size: self.finetune_batch_size,
            adam: self.adam,
            seed,
        }
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            seed: self.seed,
            ..self.synthetic.clone()
        }
    }

    /// Every setting as `(key, value)`, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        fn join<T>(xs: &[T], f: impl Fn(&T) -> String) -> String {
            xs.iter().map(f).collect::<Vec<_>>().join(",")
        }
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
        }
        let s = &self.synthetic;
        vec![
            ("preset", self.preset.to_string()),
            ("seed", self.seed.to_string()),
            ("arch", self.model.arch.to_string()),
            ("layers", self.model.layers.to_string()),
            ("hidden_dim", self.model.hidden_dim.to_string()),
            ("cheb_order", self.model.cheb_order.to_string()),
            ("fagcn_eps", self.model.fagcn_eps.to_string()),
            ("dropout", self.model.dropout.to_string()),
            ("vocab", self.vocab.as_ref().map_or_else(|| "auto".to_string(), |v| join(v, usize::to_string))),
            ("lr", self.adam.lr.to_string()),
            ("beta1", self.adam.beta1.to_string()),
            ("beta2", self.adam.beta2.to_string()),
            ("adam_eps", self.adam.epsilon.to_string()),
            ("pretrain_epochs", self.pretrain_epochs.to_string()),
            ("pretrain_batch_size", self.pretrain_batch_size.to_string()),
            (
                "surrogate",
                match self.surrogate {
                    Surrogate::SoftRank => "softrank",
                    Surrogate::Pearson => "pearson",
                }
                .to_string(),
            ),
            (
                "temperature",
                match self.temperature {
                    Temperature::IqrScaled(f) => format!("iqr:{f}"),
                    Temperature::Fixed(t) => format!("fixed:{t}"),
                },
            ),
            ("pretrain_dropout", self.pretrain_dropout.to_string()),
            ("heldout_fraction", self.heldout_fraction.to_string()),
            ("heldout_pairs", self.heldout_pairs.to_string()),
            ("finetune_epochs", self.finetune_epochs.to_string()),
            ("finetune_batch_size", self.finetune_batch_size.to_string()),
            (
                "scheme",
                match self.scheme {
                    SchemeKind::Topological => "topological",
                    SchemeKind::Morgan => "morgan",
                    SchemeKind::Spectral => "spectral",
                }
                .to_string(),
            ),
            ("nbits", self.nbits.to_string()),
            ("max_path_len", self.max_path_len.to_string()),
            ("bits_per_feature", self.bits_per_feature.to_string()),
            ("max_paths", self.max_paths.to_string()),
            ("radius", self.radius.to_string()),
            ("spectral_k", self.spectral_k.to_string()),
            ("laplacian", laplacian_name(self.laplacian).to_string()),
            (
                "metric",
                match self.metric {
                    MetricChoice::Auto => "auto",
                    MetricChoice::Fixed(StructuralMetric::Tanimoto) => "tanimoto",
                    MetricChoice::Fixed(StructuralMetric::Dice) => "dice",
                    MetricChoice::Fixed(StructuralMetric::NegSpectralDistance) => "spectral",
                }
                .to_string(),
            ),
            ("n_pairs", self.n_pairs.to_string()),
            (
                "label_source",
                match self.label_source {
                    LabelSource::NodeLabels => "labels".to_string(),
                    LabelSource::Attr(c) => format!("attr:{c}"),
                },
            ),
            (
                "aggregation",
                match self.aggregation {
                    Aggregation::EdgeWeighted => "edge",
                    Aggregation::GraphMean => "mean",
                }
                .to_string(),
            ),
            ("seeds", self.seeds.to_string()),
            ("archs", join(&self.archs, Arch::to_string)),
            ("strategies", join(&self.strategies, |s| s.name().to_string())),
            ("pretrain_corpus", opt(&self.pretrain_corpus.as_ref().map(|p| p.display().to_string()))),
            ("synthetic.name", s.name.clone()),
            ("synthetic.n_graphs", s.n_graphs.to_string()),
            ("synthetic.min_nodes", s.min_nodes.to_string()),
            ("synthetic.max_nodes", s.max_nodes.to_string()),
            ("synthetic.degree_min", s.degree_range.0.to_string()),
            ("synthetic.degree_max", s.degree_range.1.to_string()),
            ("synthetic.homophily", s.homophily.to_string()),
            ("synthetic.node_classes", s.node_classes.to_string()),
            ("synthetic.max_dominance", opt(&s.max_dominance)),
            ("synthetic.degree_attr_cap", opt(&s.degree_attr_cap)),
            ("synthetic.extra_attr_sizes", join(&s.extra_attr_sizes, usize::to_string)),
            (
                "synthetic.label_rule",
                match s.label_rule {
                    None => "none",
                    Some(LabelRule::TriangleMotif) => "triangle_motif",
                    Some(LabelRule::SpectralThreshold) => "spectral_threshold",
                }
                .to_string(),
            ),
            ("synthetic.tolerance", s.tolerance.to_string()),
            ("synthetic.max_rewiring", s.max_rewiring.to_string()),
        ]
    }

    /// The resolved configuration in file syntax.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

/// `key = value` lines of a configuration file.
pub fn parse_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_text(&text, path)
}

pub fn parse_text(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses a `key=value` command-line setting.
pub fn parse_setting(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}
