//! Stage orchestration over a run directory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use stylenet_core::analysis::{
    adjusted_rand_index, ensemble_clusters, evaluate, louvain, CoAssociationLouvain, EvaluationReport, Level, Partition,
};
use stylenet_core::article_sim::{article_matrix, encode_article, ArticleString};
use stylenet_core::bench::{load_suite, parse_suite, run_bench, write_report, TokenFilter, DEFAULT_SUITE};
use stylenet_core::corpus::{load_corpus, parse_list, read_list, Article, Corpus, Segmenter, SentenceRecord};
use stylenet_core::corpus::{DEFAULT_ABBREVIATIONS, DEFAULT_JUNK_PATTERNS};
use stylenet_core::event::EventScores;
use stylenet_core::matching::ScoredSentence;
use stylenet_core::networks::{
    build_article_network, induce_domain_network, write_edge_csv, write_graphml, write_node_csv, MembershipMatrix,
    WeightedNetwork,
};
use stylenet_core::providers::sentiment::sentiment;
use stylenet_core::providers::{
    text_key, write_keyed_vectors, Embedding, EmbeddingProvider, FileProvider, HttpProvider, Lexicon, ToyProvider,
};
use stylenet_core::sweep::run_sweep;

use crate::config::{ProviderSpec, RunConfig};
use crate::error::CliError;
use crate::rundir::{sha256_hex, Manifest, RunDir, CACHE_DIR};

pub const ENSEMBLE_DIR: &str = "_ensemble";
pub const SWEEP_DIR: &str = "_sweep";
pub const BENCH_DIR: &str = "_bench";

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Segment,
    Embed,
    Sentiment,
    Match,
    Similarity,
    Network,
    Cluster,
    Evaluate,
    Ensemble,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Segment => "segment",
            Stage::Embed => "embed",
            Stage::Sentiment => "sentiment",
            Stage::Match => "match",
            Stage::Similarity => "similarity",
            Stage::Network => "network",
            Stage::Cluster => "cluster",
            Stage::Evaluate => "evaluate",
            Stage::Ensemble => "ensemble",
        }
    }
}

/// One line of `scored.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub article_id: String,
    pub index: usize,
    pub text: String,
    pub text_sha256: String,
    pub sentiment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub event_count: usize,
    pub domain_count: usize,
    pub cluster_count: usize,
    /// ARI against corpus-wide domain labels; `None` when no domain is labeled.
    pub ari: Option<f64>,
    pub excluded_count: usize,
}

pub fn build_provider(config: &RunConfig) -> Result<Box<dyn EmbeddingProvider>, CliError> {
    Ok(match &config.provider {
        ProviderSpec::Toy { dim, seed } => Box::new(ToyProvider::new(*dim, *seed)),
        ProviderSpec::File { path } => Box::new(FileProvider::open(path).map_err(|e| CliError::provider("embed", e))?),
        ProviderSpec::Http { url } => {
            Box::new(HttpProvider::connect(config.http_config(url)).map_err(|e| CliError::provider("embed", e))?)
        }
    })
}

pub fn load_lexicon(config: &RunConfig) -> Result<Lexicon, CliError> {
    match &config.lexicon_path {
        Some(path) => Lexicon::load(path).map_err(|e| CliError::data("sentiment", e)),
        None => Ok(Lexicon::vader()),
    }
}

fn build_segmenter(config: &RunConfig) -> Result<Segmenter, CliError> {
    let list = |path: &Option<std::path::PathBuf>, default: &str| match path {
        Some(p) => read_list(p).map_err(|e| CliError::data("segment", e)),
        None => Ok(parse_list(default)),
    };
    let junk = list(&config.junk_patterns, DEFAULT_JUNK_PATTERNS)?;
    let abbreviations = list(&config.abbreviations, DEFAULT_ABBREVIATIONS)?;
    Segmenter::new(&junk, &abbreviations).map_err(|e| CliError::data("segment", e))
}

fn load(config: &RunConfig) -> Result<Corpus, CliError> {
    let corpus = load_corpus(config.corpus_path()?, &config.bias_scale).map_err(|e| CliError::data("corpus", e))?;
    if corpus.events.is_empty() {
        return Err(CliError::data("corpus", "corpus has no articles"));
    }
    Ok(corpus)
}

/// Directory name for an event id; characters outside `[A-Za-z0-9._-]`
/// become `_`, and a leading `_` is reserved for run-level outputs.
pub fn event_dir(event_id: &str) -> String {
    let mut name: String = event_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    if name.starts_with('_') || name.starts_with('.') || name == "partial" {
        name.insert_str(0, "event-");
    }
    name
}

fn event_dirs(corpus: &Corpus) -> Result<BTreeMap<String, String>, CliError> {
    let mut dirs = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for id in corpus.events.keys() {
        let dir = event_dir(id);
        if !seen.insert(dir.clone()) {
            return Err(CliError::data("corpus", format!("event ids map to the same directory {dir:?}")));
        }
        dirs.insert(id.clone(), dir);
    }
    Ok(dirs)
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        out.extend(serde_json::to_vec(&item).expect("record serializes"));
        out.push(b'\n');
    }
    out
}

fn bytes_of(stage: &'static str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::data(stage, e))?;
    Ok(buf)
}

/// Embeddings for `texts`, served from the run's cache where possible. Only
/// texts missing from the cache reach the provider.
fn embed_cached(
    run: &mut RunDir,
    provider: &dyn EmbeddingProvider,
    texts: &[String],
) -> Result<HashMap<String, Embedding>, CliError> {
    let rel = format!("{CACHE_DIR}/embeddings-{}.jsonl", &sha256_hex(provider.name().as_bytes())[..16]);
    let mut keyed: BTreeMap<String, Embedding> = BTreeMap::new();
    if let Ok(text) = std::fs::read_to_string(run.path(&rel)) {
        match FileProvider::parse(&text) {
            Ok(cache) if cache.name() == provider.name() && cache.dim() == provider.dim() => {
                keyed.extend(cache.entries().map(|(k, v)| (k.to_string(), v.clone())));
            }
            _ => eprintln!("warning: ignoring unreadable embedding cache {rel}"),
        }
    }
    let mut missing = Vec::new();
    let mut queued = BTreeSet::new();
    for t in texts {
        let key = text_key(t);
        if !keyed.contains_key(&key) && queued.insert(key) {
            missing.push(t.clone());
        }
    }
    if !missing.is_empty() {
        let vectors = provider.embed_batch(&missing).map_err(|e| CliError::provider("embed", e))?;
        if vectors.len() != missing.len() {
            return Err(CliError::provider("embed", format!("{} vectors for {} texts", vectors.len(), missing.len())));
        }
        if let Some(v) = vectors.iter().find(|v| v.dim() != provider.dim()) {
            return Err(CliError::provider("embed", format!("vector of length {} from a {}-dim provider", v.dim(), provider.dim())));
        }
        keyed.extend(missing.iter().map(|t| text_key(t)).zip(vectors));
        let body = bytes_of("embed", |buf| {
            write_keyed_vectors(buf, provider.name(), provider.dim(), keyed.iter().map(|(k, v)| (k.clone(), v)))
        })?;
        run.write(&rel, &body, "embed")?;
    }
    Ok(keyed.into_iter().collect())
}

/// Segments, embeds and scores every event, writing each stage's files.
/// Returns `None` when `until` stops before scoring is complete.
fn scored_events(
    config: &RunConfig,
    corpus: &Corpus,
    dirs: &BTreeMap<String, String>,
    run: &mut RunDir,
    until: Stage,
) -> Result<(Option<Vec<EventScores>>, String), CliError> {
    let segmenter = build_segmenter(config)?;
    let mut records: BTreeMap<&str, Vec<SentenceRecord>> = BTreeMap::new();
    for (event_id, articles) in &corpus.events {
        let recs: Vec<SentenceRecord> = articles.iter().flat_map(|a| segmenter.segment(a)).collect();
        run.write(&format!("{}/sentences.jsonl", dirs[event_id]), &jsonl(&recs), "segment")?;
        records.insert(event_id, recs);
    }
    if until == Stage::Segment {
        return Ok((None, String::new()));
    }

    let provider = build_provider(config)?;
    let texts: Vec<String> = records.values().flatten().map(|r| r.text.clone()).collect();
    let embeddings = embed_cached(run, provider.as_ref(), &texts)?;
    let provider_name = provider.name().to_string();
    if until == Stage::Embed {
        return Ok((None, provider_name));
    }

    let lexicon = load_lexicon(config)?;
    let mut events = Vec::new();
    for (event_id, recs) in records {
        let mut scored = Vec::with_capacity(recs.len());
        let mut lines = Vec::with_capacity(recs.len());
        for r in recs {
            let s = sentiment(&r.text, &lexicon).map_err(|e| CliError::data("sentiment", e))?;
            let key = text_key(&r.text);
            lines.push(ScoredRecord {
                article_id: r.article_id.clone(),
                index: r.index,
                text: r.text.clone(),
                text_sha256: key.clone(),
                sentiment: s.compound(),
            });
            let embedding = embeddings[&key].clone();
            scored.push(ScoredSentence { record: r, embedding, sentiment: s });
        }
        run.write(&format!("{}/scored.jsonl", dirs[event_id]), &jsonl(&lines), "sentiment")?;
        if until > Stage::Sentiment {
            let articles = corpus.events[event_id].clone();
            events.push(EventScores::new(event_id, articles, scored).map_err(|e| CliError::data("match", e))?);
        }
    }
    if until == Stage::Sentiment {
        return Ok((None, provider_name));
    }
    Ok((Some(events), provider_name))
}

/// Most frequent article label per domain over the whole corpus; ties go to
/// the lexically first label. Domains without labeled articles get none.
pub fn corpus_domain_labels(articles: &[&Article]) -> BTreeMap<String, Option<String>> {
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for a in articles {
        let entry = counts.entry(a.domain.clone()).or_default();
        if let Some(label) = &a.bias_label {
            *entry.entry(label.clone()).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|(domain, labels)| {
            let best = labels
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                .map(|(l, _)| l);
            (domain, best)
        })
        .collect()
}

struct EventOutputs {
    domain_clusters: Option<Partition>,
    reports: Vec<EvaluationReport>,
}

fn event_stages(
    config: &RunConfig,
    event: &EventScores,
    dir: &str,
    run: &mut RunDir,
    until: Stage,
) -> Result<EventOutputs, CliError> {
    let mut out = EventOutputs { domain_clusters: None, reports: Vec::new() };

    let table = event.scores.symbol_table(&config.params).map_err(|e| CliError::data("match", e))?;
    let mut by_article: BTreeMap<&str, Vec<SentenceRecord>> = BTreeMap::new();
    for s in &event.sentences {
        by_article.entry(s.record.article_id.as_str()).or_default().push(s.record.clone());
    }
    let strings = event
        .articles
        .iter()
        .map(|a| encode_article(&a.id, by_article.get(a.id.as_str()).map_or(&[][..], Vec::as_slice), &table))
        .collect::<Result<Vec<ArticleString>, _>>()
        .map_err(|e| CliError::data("match", e))?;
    run.write(&format!("{dir}/symbols.jsonl"), &bytes_of("match", |b| table.write_jsonl(b))?, "match")?;
    run.write(&format!("{dir}/article_strings.jsonl"), &jsonl(&strings), "match")?;
    if until == Stage::Match {
        return Ok(out);
    }

    let matrix = article_matrix(&strings, config.metric).map_err(|e| CliError::data("similarity", e))?;
    run.write(&format!("{dir}/article_similarity.csv"), &bytes_of("similarity", |b| matrix.write_csv(b))?, "similarity")?;
    if until == Stage::Similarity {
        return Ok(out);
    }

    let articles = build_article_network(&matrix, &event.articles, 0.0).map_err(|e| CliError::data("network", e))?;
    let membership = MembershipMatrix::from_articles(&event.articles).map_err(|e| CliError::data("network", e))?;
    let domains = induce_domain_network(&articles, &membership).map_err(|e| CliError::data("network", e))?;
    write_network(run, &format!("{dir}/article_network"), &articles)?;
    write_network(run, &format!("{dir}/domain_network"), &domains.network)?;
    let mut self_sim = String::from("domain,self_similarity\n");
    for (node, v) in domains.network.nodes().iter().zip(&domains.self_similarity) {
        self_sim.push_str(&format!("{},{v:.6}\n", node.id));
    }
    run.write(&format!("{dir}/domain_self_similarity.csv"), self_sim.as_bytes(), "network")?;
    if until == Stage::Network {
        return Ok(out);
    }

    let article_clusters = louvain(&articles, config.resolution, config.seed);
    let domain_clusters = louvain(&domains.network, config.resolution, config.seed);
    run.write(&format!("{dir}/article_clusters.csv"), &bytes_of("cluster", |b| article_clusters.write_csv(b))?, "cluster")?;
    run.write(&format!("{dir}/domain_clusters.csv"), &bytes_of("cluster", |b| domain_clusters.write_csv(b))?, "cluster")?;
    if until == Stage::Cluster {
        return Ok(out);
    }

    let eval = |level, net: &WeightedNetwork, p: &Partition| {
        evaluate(&event.event_id, level, net, p, &config.bias_scale, config.resolution)
            .map_err(|e| CliError::data("evaluate", e))
    };
    out.reports.push(eval(Level::Article, &articles, &article_clusters)?);
    out.reports.push(eval(Level::Domain, &domains.network, &domain_clusters)?);
    run.write(&format!("{dir}/report.jsonl"), &jsonl(&out.reports), "evaluate")?;
    out.domain_clusters = Some(domain_clusters);
    Ok(out)
}

fn write_network(run: &mut RunDir, stem: &str, n: &WeightedNetwork) -> Result<(), CliError> {
    run.write(&format!("{stem}.graphml"), &bytes_of("network", |b| write_graphml(n, b))?, "network")?;
    run.write(&format!("{stem}.csv"), &bytes_of("network", |b| write_edge_csv(n, b))?, "network")?;
    run.write(&format!("{stem}.nodes.csv"), &bytes_of("network", |b| write_node_csv(n, b))?, "network")
}

fn ensemble_stage(
    config: &RunConfig,
    corpus: &Corpus,
    per_event: &[(String, Partition)],
    run: &mut RunDir,
) -> Result<Option<EnsembleReport>, CliError> {
    if per_event.len() < 2 {
        eprintln!("note: ensemble skipped, it needs at least two events");
        return Ok(None);
    }
    let articles: Vec<&Article> = corpus.articles().collect();
    let labels = corpus_domain_labels(&articles);
    let all_domains: BTreeSet<String> = labels.keys().cloned().collect();
    let method = CoAssociationLouvain { resolution: config.resolution, seed: config.seed };
    let clusters = ensemble_clusters(per_event, &all_domains, &method).map_err(|e| CliError::data("ensemble", e))?;

    let labeled: Vec<(&String, usize)> = labels
        .iter()
        .filter_map(|(d, l)| l.as_ref().map(|l| (d, config.bias_scale.index_of(l).expect("labels validated on load"))))
        .collect();
    let ari = if labeled.is_empty() {
        None
    } else {
        let truth = Partition::from_labels(labeled.iter().map(|x| x.0.as_str()), labeled.iter().map(|x| x.1))
            .map_err(|e| CliError::data("ensemble", e))?;
        let restricted = clusters.restrict(truth.node_ids()).map_err(|e| CliError::data("ensemble", e))?;
        Some(adjusted_rand_index(&restricted, &truth).map_err(|e| CliError::data("ensemble", e))?)
    };
    let report = EnsembleReport {
        event_count: per_event.len(),
        domain_count: all_domains.len(),
        cluster_count: clusters.cluster_count(),
        ari,
        excluded_count: all_domains.len() - labeled.len(),
    };
    run.write(&format!("{ENSEMBLE_DIR}/clusters.csv"), &bytes_of("ensemble", |b| clusters.write_csv(b))?, "ensemble")?;
    let body = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    run.write(&format!("{ENSEMBLE_DIR}/report.json"), body.as_bytes(), "ensemble")?;
    Ok(Some(report))
}

/// Runs the pipeline up to and including `until` inside the configured run
/// directory, then writes the manifest. On failure the error is recorded
/// under `partial/` and files written so far are kept.
pub fn run_pipeline(config: &RunConfig, until: Stage) -> Result<Manifest, CliError> {
    with_run_dir(&config.output_dir, |run| {
        let corpus = load(config)?;
        let dirs = event_dirs(&corpus)?;
        let (events, provider_name) = scored_events(config, &corpus, &dirs, run, until)?;
        if let Some(events) = events {
            let mut per_event = Vec::new();
            let mut reports = Vec::new();
            for event in &events {
                let out = event_stages(config, event, &dirs[&event.event_id], run, until)?;
                reports.extend(out.reports);
                if let Some(p) = out.domain_clusters {
                    per_event.push((event.event_id.clone(), p));
                }
            }
            if until >= Stage::Evaluate {
                run.write("report.jsonl", &jsonl(&reports), "evaluate")?;
            }
            if until >= Stage::Ensemble {
                ensemble_stage(config, &corpus, &per_event, run)?;
            }
        }
        run.write_manifest(&config.hash(), &provider_name)
    })
}

fn with_run_dir<T>(root: &Path, body: impl FnOnce(&mut RunDir) -> Result<T, CliError>) -> Result<T, CliError> {
    let mut run = RunDir::open(root)?;
    match body(&mut run) {
        Ok(v) => {
            run.clear_failure();
            Ok(v)
        }
        Err(e) => {
            run.record_failure(&e);
            Err(e)
        }
    }
}

/// Writes `_sweep/surface_tau1.csv` and `_sweep/surface_tau2.csv`.
pub fn run_sweep_command(config: &RunConfig) -> Result<[std::path::PathBuf; 2], CliError> {
    with_run_dir(&config.output_dir, |run| {
        let corpus = load(config)?;
        let dirs = event_dirs(&corpus)?;
        let (events, _) = scored_events(config, &corpus, &dirs, run, Stage::Match)?;
        let events = events.expect("scoring completes before matching");
        let (s1, s2) = run_sweep(&events, &config.grid, config.metric).map_err(|e| CliError::data("sweep", e))?;
        let mut paths = Vec::new();
        for s in [s1, s2] {
            let rel = match s.axis {
                stylenet_core::sweep::Axis::Tau1 => format!("{SWEEP_DIR}/surface_tau1.csv"),
                stylenet_core::sweep::Axis::Tau2 => format!("{SWEEP_DIR}/surface_tau2.csv"),
            };
            run.write(&rel, &bytes_of("sweep", |b| s.write_csv(b))?, "sweep")?;
            paths.push(run.path(&rel));
        }
        Ok([paths[0].clone(), paths[1].clone()])
    })
}

/// Writes `_bench/report.csv` for the configured (or bundled) suite.
pub fn run_bench_command(config: &RunConfig) -> Result<std::path::PathBuf, CliError> {
    with_run_dir(&config.output_dir, |run| {
        let suite = match &config.suite_path {
            Some(p) => load_suite(p),
            None => parse_suite(DEFAULT_SUITE),
        }
        .map_err(|e| CliError::data("bench", e))?;
        let filter = match (&config.stopwords_path, &config.pronouns_path) {
            (None, None) => TokenFilter::with_defaults(),
            (stop, pron) => {
                let read = |p: &Option<std::path::PathBuf>, default: &str| match p {
                    Some(p) => read_list(p).map_err(|e| CliError::data("bench", e)),
                    None => Ok(parse_list(default)),
                };
                TokenFilter::new(
                    &read(stop, stylenet_core::bench::DEFAULT_STOPWORDS)?,
                    &read(pron, stylenet_core::bench::DEFAULT_PRONOUNS)?,
                )
            }
        };
        let provider = build_provider(config)?;
        let lexicon = load_lexicon(config)?;
        let rows = run_bench(&suite, provider.as_ref(), &lexicon, &filter).map_err(|e| match e {
            stylenet_core::bench::BenchError::Provider(p) => CliError::provider("bench", p),
            other => CliError::data("bench", other),
        })?;
        let rel = format!("{BENCH_DIR}/report.csv");
        run.write(&rel, &bytes_of("bench", |b| write_report(&rows, b))?, "bench")?;
        Ok(run.path(&rel))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_dir_names() {
        assert_eq!(event_dir("bridge"), "bridge");
        assert_eq!(event_dir("a/b c"), "a_b_c");
        assert_eq!(event_dir("_ensemble"), "event-_ensemble");
        assert_eq!(event_dir("partial"), "event-partial");
    }

    #[test]
    fn domain_label_majority_over_corpus() {
        let art = |id: &str, d: &str, l: Option<&str>| Article {
            id: id.into(),
            domain: d.into(),
            event_id: "e".into(),
            title: "t".into(),
            body: String::new(),
            bias_label: l.map(String::from),
            url: None,
        };
        let arts = [
            art("1", "x", Some("left")),
            art("2", "x", Some("right")),
            art("3", "x", Some("right")),
            art("4", "y", Some("right")),
            art("5", "y", Some("left")),
            art("6", "z", None),
        ];
        let refs: Vec<&Article> = arts.iter().collect();
        let labels = corpus_domain_labels(&refs);
        assert_eq!(labels["x"].as_deref(), Some("right"));
        assert_eq!(labels["y"].as_deref(), Some("left"));
        assert_eq!(labels["z"], None);
    }
}
