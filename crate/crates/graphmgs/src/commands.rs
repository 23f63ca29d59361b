//! The subcommands. Each takes a resolved [`Config`] and an output
//! directory, writes its files there, and returns a one-line summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use graphmgs_core::gnn::{AttrVocab, GnnConfig, GnnModel};
use graphmgs_core::graph::{corpus_homophily_by, homophily_counts};
use graphmgs_core::seed::{derive_seed, rng_for};
use graphmgs_core::similarity::{Fingerprint, StructuralMetric};
use graphmgs_core::train::{
    evaluate_mgs, finetune, generate_synthetic, pretrain, split_indices, NoopObserver, TrainReport,
};
use graphmgs_core::{Error as CoreError, GraphCorpus, LabeledGraph};
use serde::Serialize;

use crate::config::{Config, Strategy};
use crate::error::{CliError, Context, Result};
use crate::io::checkpoint::{load_model, save_model};
use crate::io::corpus::{load_corpus, save_corpus};
use crate::io::fingerprints::cached_fingerprints;
use crate::io::pairs::save_pairs;
use crate::io::report::save_report;

pub const FINGERPRINT_CACHE: &str = "fingerprints.json";

/// Where `mgs` gets graph embeddings from.
#[derive(Debug, Clone)]
pub enum EncoderSource {
    Checkpoint(PathBuf),
    /// The structural fingerprint itself, as a 0/1 or eigenvalue vector.
    Fingerprint,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn load(path: &Path) -> Result<GraphCorpus> {
    load_corpus(path).context(|| format!("loading corpus {}", path.display()))
}

fn vocab_for(cfg: &Config, corpora: &[&GraphCorpus]) -> Result<AttrVocab> {
    Ok(match &cfg.vocab {
        Some(sizes) => AttrVocab::new(sizes.clone())?,
        None => AttrVocab::from_graphs(corpora.iter().flat_map(|c| c.graphs()))?,
    })
}

fn fingerprints(cfg: &Config, corpus: &GraphCorpus, out: &Path) -> Result<Vec<Fingerprint>> {
    let spec = cfg.fingerprint_spec();
    let (fps, reused) = cached_fingerprints(&out.join(FINGERPRINT_CACHE), &spec, corpus)
        .context(|| format!("fingerprinting {}", corpus.name))?;
    log::info!("{} fingerprints for {} graphs ({})", if reused { "reused" } else { "computed" }, corpus.len(), spec.describe());
    Ok(fps)
}

pub fn generate(cfg: &Config, out: &Path) -> Result<String> {
    let spec = cfg.synthetic_spec();
    let corpus = generate_synthetic(&spec)?;
    let path = out.join(format!("{}.jsonl", spec.name));
    save_corpus(&path, &corpus)?;
    let h = corpus_homophily_by(&corpus, cfg.label_source, cfg.aggregation).ok();
    Ok(format!(
        "wrote {} graphs to {} (homophily {})",
        corpus.len(),
        path.display(),
        h.map_or_else(|| "undefined".into(), |h| format!("{h:.6}"))
    ))
}

pub fn homophily(cfg: &Config, corpus_path: &Path, out: &Path) -> Result<String> {
    let corpus = load(corpus_path)?;
    let mut csv = String::from("graph_id,edges,same_label_edges,homophily\n");
    let mut with_edges = Vec::new();
    for (i, g) in corpus.graphs().iter().enumerate() {
        match homophily_counts(g, cfg.label_source) {
            Ok((same, total)) => {
                writeln!(csv, "{},{total},{same},{:.6}", g.id(), same as f64 / total as f64).unwrap();
                with_edges.push(i);
            }
            Err(CoreError::NoEdges(_)) => {
                log::warn!("graph `{}` has no edges; homophily undefined", g.id());
                writeln!(csv, "{},0,0,", g.id()).unwrap();
            }
            Err(e) => return Err(e).context(|| format!("homophily of {}", corpus_path.display())),
        }
    }
    if with_edges.is_empty() {
        return Err(CliError::Data(format!("{}: no graph has edges; homophily undefined", corpus_path.display())));
    }
    let h = corpus_homophily_by(&corpus.subset(&with_edges)?, cfg.label_source, cfg.aggregation)?;
    let (edges, same) = with_edges
        .iter()
        .map(|&i| homophily_counts(&corpus.graphs()[i], cfg.label_source).expect("checked above"))
        .fold((0, 0), |(e, s), (ss, t)| (e + t, s + ss));
    writeln!(csv, "__corpus__,{edges},{same},{h:.6}").unwrap();
    write(&out.join("homophily.csv"), csv)?;
    Ok(format!("corpus homophily: {h:.6}"))
}

pub fn fingerprint(cfg: &Config, corpus_path: &Path, out: &Path) -> Result<String> {
    let corpus = load(corpus_path)?;
    let spec = cfg.fingerprint_spec();
    let path = out.join(FINGERPRINT_CACHE);
    let (fps, reused) = cached_fingerprints(&path, &spec, &corpus)?;
    Ok(format!(
        "{} {} fingerprints ({}) in {}",
        if reused { "reused" } else { "wrote" },
        fps.len(),
        spec.describe(),
        path.display()
    ))
}

fn fingerprint_vector(f: &Fingerprint) -> Vec<f64> {
    match f {
        Fingerprint::Bits(b) => (0..b.len()).map(|i| f64::from(u8::from(b.get(i)))).collect(),
        Fingerprint::Spectral(s) => s.eigenvalues().to_vec(),
    }
}

#[derive(Serialize)]
struct MgsJson<'a> {
    mgs: f64,
    n_pairs: usize,
    scheme: String,
    metric: &'a str,
    encoder: String,
    seed: u64,
}

fn metric_name(m: StructuralMetric) -> &'static str {
    match m {
        StructuralMetric::Tanimoto => "tanimoto",
        StructuralMetric::Dice => "dice",
        StructuralMetric::NegSpectralDistance => "spectral",
    }
}

pub fn mgs(cfg: &Config, corpus_path: &Path, encoder: &EncoderSource, out: &Path) -> Result<String> {
    let corpus = load(corpus_path)?;
    let model = match encoder {
        EncoderSource::Checkpoint(p) => Some(load_model(p).context(|| format!("loading checkpoint {}", p.display()))?.0),
        EncoderSource::Fingerprint => None,
    };
    let fps = fingerprints(cfg, &corpus, out)?;
    let metric = cfg.metric()?;
    let available = corpus.len() * corpus.len().saturating_sub(1) / 2;
    let n_pairs = cfg.n_pairs.min(available);
    if n_pairs < cfg.n_pairs {
        log::warn!("only {available} distinct pairs; using all of them instead of {}", cfg.n_pairs);
    }
    let (score, set) = match &model {
        Some(m) => evaluate_mgs(corpus.graphs(), &|g: &LabeledGraph| m.embed_graph(g), &fps, metric, n_pairs, cfg.seed)?,
        None => {
            let index: std::collections::HashMap<&str, usize> =
                corpus.graphs().iter().enumerate().map(|(i, g)| (g.id(), i)).collect();
            let enc = |g: &LabeledGraph| Ok(fingerprint_vector(&fps[index[g.id()]]));
            evaluate_mgs(corpus.graphs(), &enc, &fps, metric, n_pairs, cfg.seed)?
        }
    };
    save_pairs(&out.join("pairs.csv"), &set)?;
    let summary = MgsJson {
        mgs: score,
        n_pairs: set.len(),
        scheme: cfg.fingerprint_spec().describe(),
        metric: metric_name(metric),
        encoder: match encoder {
            EncoderSource::Checkpoint(p) => p.display().to_string(),
            EncoderSource::Fingerprint => "fingerprint".into(),
        },
        seed: cfg.seed,
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write(&out.join("mgs.json"), json)?;
    Ok(format!("mgs: {score} over {} pairs", set.len()))
}

fn pretrain_model(cfg: &Config, corpus: &GraphCorpus, model: &mut GnnModel, seed: u64, out: &Path) -> Result<TrainReport> {
    let fps = fingerprints(cfg, corpus, out)?;
    let started = Instant::now();
    let mut report = pretrain(corpus.graphs(), &fps, model, &cfg.pgm_config(seed))
        .context(|| format!("pre-training on {}", corpus.name))?;
    report.wall_clock_secs = Some(started.elapsed().as_secs_f64());
    Ok(report)
}

pub fn pretrain_cmd(cfg: &Config, corpus_path: &Path, out: &Path) -> Result<String> {
    let corpus = load(corpus_path)?;
    let vocab = vocab_for(cfg, &[&corpus])?;
    let mut model = GnnModel::new(cfg.model, vocab, &mut rng_for(cfg.seed, "model.init"))?;
    let report = pretrain_model(cfg, &corpus, &mut model, cfg.seed, out)?;
    save_model(&out.join("model.json"), &model, cfg.seed)?;
    save_report(&out.join("pretrain_report.json"), &report)?;
    Ok(format!(
        "pre-trained {} for {} epochs: held-out mgs {} -> {}",
        cfg.model.arch,
        report.epochs.len(),
        fmt_opt(report.initial_mgs),
        fmt_opt(report.final_mgs())
    ))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |v| format!("{v:.4}"))
}

/// Loads a checkpoint and rebuilds it with this run's dropout and a head
/// for `tasks` tasks.
fn model_from_checkpoint(cfg: &Config, path: &Path, tasks: usize) -> Result<GnnModel> {
    let (loaded, header) = load_model(path).context(|| format!("loading checkpoint {}", path.display()))?;
    let config = GnnConfig {
        dropout: cfg.model.dropout,
        ..header.config
    };
    let mut model = GnnModel::from_params(config, loaded.vocab().clone(), header.head_tasks, loaded.params())?;
    match header.head_tasks {
        None => model.add_head(tasks, &mut rng_for(cfg.seed, "model.head"))?,
        Some(t) if t != tasks => {
            return Err(CliError::Core(CoreError::TaskCountMismatch {
                expected: t,
                found: tasks,
            }))
        }
        Some(_) => {}
    }
    Ok(model)
}

fn finetune_model(cfg: &Config, corpus: &GraphCorpus, model: &mut GnnModel, seed: u64) -> Result<TrainReport> {
    let split = split_indices(corpus.len(), seed)?;
    let started = Instant::now();
    let mut report = finetune(corpus.graphs(), &split, model, &cfg.finetune_config(seed), &mut NoopObserver)
        .context(|| format!("fine-tuning on {}", corpus.name))?;
    report.wall_clock_secs = Some(started.elapsed().as_secs_f64());
    Ok(report)
}

pub fn finetune_cmd(cfg: &Config, corpus_path: &Path, checkpoint: Option<&Path>, out: &Path) -> Result<String> {
    let corpus = load(corpus_path)?;
    let tasks = corpus.task_count();
    if tasks == 0 {
        return Err(CliError::Core(CoreError::MissingGraphLabels)).context(|| corpus_path.display().to_string());
    }
    let mut model = match checkpoint {
        Some(p) => model_from_checkpoint(cfg, p, tasks)?,
        None => {
            let mut m = GnnModel::new(cfg.model, vocab_for(cfg, &[&corpus])?, &mut rng_for(cfg.seed, "model.init"))?;
            m.add_head(tasks, &mut rng_for(cfg.seed, "model.head"))?;
            m
        }
    };
    let report = finetune_model(cfg, &corpus, &mut model, cfg.seed)?;
    save_model(&out.join("model.json"), &model, cfg.seed)?;
    save_report(&out.join("finetune_report.json"), &report)?;
    Ok(format!("fine-tuned {}: test auc {}", model.config().arch, fmt_opt(report.test_auc)))
}

/// One benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dataset: String,
    pub arch: String,
    pub strategy: &'static str,
    pub run: usize,
    pub seed: u64,
    pub test_auc: Option<f64>,
    pub pretrain_mgs: Option<f64>,
}

fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Per-seed rows followed by one `mean` row per group, in run order.
pub fn benchmark_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("dataset,arch,strategy,run,seed,test_auc,test_auc_std,pretrain_mgs\n");
    let mut start = 0;
    while start < rows.len() {
        let key = |r: &BenchRow| (r.dataset.clone(), r.arch.clone(), r.strategy);
        let end = start + rows[start..].iter().take_while(|r| key(r) == key(&rows[start])).count();
        let group = &rows[start..end];
        for r in group {
            writeln!(
                out,
                "{},{},{},{},{},{},,{}",
                r.dataset,
                r.arch,
                r.strategy,
                r.run,
                r.seed,
                cell(r.test_auc),
                cell(r.pretrain_mgs)
            )
            .unwrap();
        }
        let aucs: Vec<f64> = group.iter().filter_map(|r| r.test_auc).collect();
        let mgs: Vec<f64> = group.iter().filter_map(|r| r.pretrain_mgs).collect();
        let (m, s) = mean_std(&aucs).unzip();
        let r = &group[0];
        writeln!(
            out,
            "{},{},{},mean,,{},{},{}",
            r.dataset,
            r.arch,
            r.strategy,
            cell(m),
            cell(s),
            cell(mean_std(&mgs).map(|p| p.0))
        )
        .unwrap();
        start = end;
    }
    out
}

/// Seed of benchmark run `run` under master seed `master`.
pub fn run_seed(master: u64, run: usize) -> u64 {
    derive_seed(master, &format!("benchmark.run.{run}"))
}

pub fn benchmark(cfg: &Config, corpora: &[PathBuf], out: &Path) -> Result<String> {
    if corpora.is_empty() {
        return Err(CliError::Usage("benchmark needs at least one corpus".into()));
    }
    let pretrain_corpus = match &cfg.pretrain_corpus {
        Some(p) => Some(load(p)?),
        None => None,
    };
    let mut rows = Vec::new();
    let mut summary = String::new();
    for path in corpora {
        let data = load(path)?;
        let tasks = data.task_count();
        if tasks == 0 {
            return Err(CliError::Core(CoreError::MissingGraphLabels)).context(|| path.display().to_string());
        }
        let pre = pretrain_corpus.as_ref().unwrap_or(&data);
        let vocab = vocab_for(cfg, &[pre, &data])?;
        for &arch in &cfg.archs {
            for &strategy in &cfg.strategies {
                let first = rows.len();
                for run in 0..cfg.seeds {
                    let seed = run_seed(cfg.seed, run);
                    let mut model = GnnModel::new(GnnConfig { arch, ..cfg.model }, vocab.clone(), &mut rng_for(seed, "model.init"))?;
                    let mut pretrain_mgs = None;
                    if strategy == Strategy::Pgm {
                        let report = pretrain_model(cfg, pre, &mut model, seed, out)
                            .context(|| format!("{} {arch} run {run}", data.name))?;
                        pretrain_mgs = report.final_mgs();
                    }
                    model.add_head(tasks, &mut rng_for(seed, "model.head"))?;
                    let report = finetune_model(cfg, &data, &mut model, seed)
                        .context(|| format!("{} {arch} {} run {run}", data.name, strategy.name()))?;
                    log::info!("{} {arch} {} run {run}: test auc {}", data.name, strategy.name(), fmt_opt(report.test_auc));
                    rows.push(BenchRow {
                        dataset: data.name.clone(),
                        arch: arch.to_string(),
                        strategy: strategy.name(),
                        run,
                        seed,
                        test_auc: report.test_auc,
                        pretrain_mgs,
                    });
                }
                let aucs: Vec<f64> = rows[first..].iter().filter_map(|r| r.test_auc).collect();
                let line = match mean_std(&aucs) {
                    Some((m, s)) => format!("{} {arch} {}: {m:.4} ± {s:.4}", data.name, strategy.name()),
                    None => format!("{} {arch} {}: auc undefined", data.name, strategy.name()),
                };
                summary.push_str(&line);
                summary.push('\n');
            }
        }
    }
    write(&out.join("benchmark.csv"), benchmark_csv(&rows))?;
    Ok(summary.trim_end().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(run: usize, auc: f64) -> BenchRow {
        BenchRow {
            dataset: "d".into(),
            arch: "gin".into(),
            strategy: "none",
            run,
            seed: run as u64,
            test_auc: Some(auc),
            pretrain_mgs: None,
        }
    }

    #[test]
    fn aggregate_row_uses_population_std() {
        let csv = benchmark_csv(&[row(0, 0.5), row(1, 1.0)]);
        let last = csv.lines().last().unwrap();
        assert_eq!(last, "d,gin,none,mean,,0.75,0.25,");
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn groups_are_split() {
        let mut b = row(0, 0.6);
        b.arch = "gcn".into();
        let csv = benchmark_csv(&[row(0, 0.5), b]);
        assert_eq!(csv.lines().filter(|l| l.contains(",mean,")).count(), 2);
    }
}
