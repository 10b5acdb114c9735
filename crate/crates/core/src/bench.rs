//! Text comparison techniques side by side on controlled sentence
//! alterations.

use std::collections::{BTreeSet, HashSet};
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::article_sim::{csv_field, levenshtein};
use crate::corpus::{normalize_whitespace, parse_list};
use crate::providers::sentiment::sentiment;
use crate::providers::{Embedding, EmbeddingProvider, Lexicon, ProviderError, SentimentError};

pub const DEFAULT_SUITE: &str = include_str!("../data/alteration_suite.jsonl");
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");
pub const DEFAULT_PRONOUNS: &str = include_str!("../data/pronouns.txt");

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("suite line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate case name {0:?}")]
    DuplicateName(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Sentiment(#[from] SentimentError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlterationCase {
    pub name: String,
    pub base: String,
    pub altered: String,
}

pub fn parse_suite(text: &str) -> Result<Vec<AlterationCase>, BenchError> {
    let mut names = HashSet::new();
    let mut cases = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case: AlterationCase =
            serde_json::from_str(line).map_err(|e| BenchError::Parse { line: i + 1, message: e.to_string() })?;
        if !names.insert(case.name.clone()) {
            return Err(BenchError::DuplicateName(case.name));
        }
        cases.push(case);
    }
    Ok(cases)
}

pub fn load_suite(path: &Path) -> Result<Vec<AlterationCase>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.display().to_string(), source })?;
    parse_suite(&text)
}

/// Words removed before token comparisons.
#[derive(Debug, Clone, Default)]
pub struct TokenFilter {
    stopwords: HashSet<String>,
    pronouns: HashSet<String>,
}

impl TokenFilter {
    /// List entries go through the same punctuation stripping as text, so
    /// "don't" in a list removes "dont".
    pub fn new<S: AsRef<str>>(stopwords: &[S], pronouns: &[S]) -> Self {
        let norm = |words: &[S]| words.iter().map(|w| strip_punctuation(&w.as_ref().to_lowercase())).collect();
        Self { stopwords: norm(stopwords), pronouns: norm(pronouns) }
    }

    pub fn with_defaults() -> Self {
        Self::new(&parse_list(DEFAULT_STOPWORDS), &parse_list(DEFAULT_PRONOUNS))
    }

    fn keeps(&self, token: &str) -> bool {
        !self.stopwords.contains(token) && !self.pronouns.contains(token)
    }
}

fn strip_punctuation(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric() || c.is_whitespace()).collect()
}

/// Lowercased, punctuation-free tokens minus stopwords and pronouns, in
/// text order.
pub fn preprocess_tokens(text: &str, filter: &TokenFilter) -> Vec<String> {
    strip_punctuation(&text.to_lowercase())
        .split_whitespace()
        .filter(|t| filter.keeps(t))
        .map(String::from)
        .collect()
}

pub fn jaccard(a: &[String], b: &[String]) -> f64 {
    let sa: BTreeSet<&str> = a.iter().map(String::as_str).collect();
    let sb: BTreeSet<&str> = b.iter().map(String::as_str).collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// `1 - d / max(len)` over characters; equal strings score 1.
pub fn levenshtein_ratio(a: &str, b: &str) -> f64 {
    let ca: Vec<char> = a.chars().collect();
    let cb: Vec<char> = b.chars().collect();
    let longest = ca.len().max(cb.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&ca, &cb) as f64 / longest as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub case_name: String,
    pub exact_match: bool,
    pub jaccard: f64,
    pub levenshtein_ratio: f64,
    pub sentence_cosine: f64,
    pub token_vector_cosine: Option<f64>,
    pub sentiment_diff: f64,
}

fn mean_vector(vectors: &[Embedding]) -> Option<Embedding> {
    let dim = vectors.first()?.dim();
    let mut sum = vec![0.0; dim];
    for v in vectors {
        sum.iter_mut().zip(v.values()).for_each(|(s, x)| *s += x);
    }
    sum.iter_mut().for_each(|s| *s /= vectors.len() as f64);
    Embedding::new(sum).ok()
}

fn token_cosine(a: &[String], b: &[String], provider: &dyn EmbeddingProvider) -> Result<Option<f64>, ProviderError> {
    if a.is_empty() || b.is_empty() {
        return Ok(None);
    }
    let (Some(va), Some(vb)) = (provider.embed_tokens(a), provider.embed_tokens(b)) else {
        return Ok(None);
    };
    Ok(match (mean_vector(&va?), mean_vector(&vb?)) {
        (Some(x), Some(y)) => x.cosine(&y),
        _ => None,
    })
}

pub fn compare_all(
    case: &AlterationCase,
    provider: &dyn EmbeddingProvider,
    lexicon: &Lexicon,
    filter: &TokenFilter,
) -> Result<ComparisonRow, BenchError> {
    let ta = preprocess_tokens(&case.base, filter);
    let tb = preprocess_tokens(&case.altered, filter);
    let vectors = provider.embed_batch(&[case.base.clone(), case.altered.clone()])?;
    let [va, vb] = vectors.as_slice() else {
        return Err(ProviderError::Malformed(format!("{} vectors for 2 texts", vectors.len())).into());
    };
    let sentence_cosine = va
        .cosine(vb)
        .ok_or_else(|| ProviderError::Malformed("vectors of different dimension".into()))?;
    let sentiment_diff =
        (sentiment(&case.base, lexicon)?.compound() - sentiment(&case.altered, lexicon)?.compound()).abs();
    Ok(ComparisonRow {
        case_name: case.name.clone(),
        exact_match: normalize_whitespace(&case.base) == normalize_whitespace(&case.altered),
        jaccard: jaccard(&ta, &tb),
        levenshtein_ratio: levenshtein_ratio(&case.base, &case.altered),
        sentence_cosine,
        token_vector_cosine: token_cosine(&ta, &tb, provider)?,
        sentiment_diff,
    })
}

pub fn run_bench(
    cases: &[AlterationCase],
    provider: &dyn EmbeddingProvider,
    lexicon: &Lexicon,
    filter: &TokenFilter,
) -> Result<Vec<ComparisonRow>, BenchError> {
    cases.iter().map(|c| compare_all(c, provider, lexicon, filter)).collect()
}

/// Missing token cosines are written as empty fields.
pub fn write_report<W: Write>(rows: &[ComparisonRow], mut out: W) -> io::Result<()> {
    writeln!(out, "case,exact_match,jaccard,levenshtein_ratio,sentence_cosine,token_vector_cosine,sentiment_diff")?;
    for r in rows {
        let token = r.token_vector_cosine.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{},{:.6}",
            csv_field(&r.case_name),
            r.exact_match,
            r.jaccard,
            r.levenshtein_ratio,
            r.sentence_cosine,
            token,
            r.sentiment_diff
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::ToyProvider;

    fn filter(stop: &[&str], pron: &[&str]) -> TokenFilter {
        TokenFilter::new(
            &stop.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            &pron.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        )
    }

    #[test]
    fn preprocessing() {
        assert_eq!(preprocess_tokens("The cat sat!", &filter(&["the"], &[])), ["cat", "sat"]);
        assert!(preprocess_tokens("the The THE", &filter(&["the"], &[])).is_empty());
        assert_eq!(preprocess_tokens("He runs fast", &filter(&[], &["he"])), ["runs", "fast"]);
        assert_eq!(preprocess_tokens("don't stop", &filter(&["don't"], &[])), ["stop"]);
    }

    #[test]
    fn identity_row() {
        let case = AlterationCase { name: "same".into(), base: "Good news today.".into(), altered: "Good news today.".into() };
        let row = compare_all(&case, &ToyProvider::new(32, 0), &Lexicon::vader(), &TokenFilter::with_defaults()).unwrap();
        assert!(row.exact_match);
        assert_eq!(row.jaccard, 1.0);
        assert_eq!(row.levenshtein_ratio, 1.0);
        assert_eq!(row.sentiment_diff, 0.0);
        assert!((row.sentence_cosine - 1.0).abs() < 1e-12);
        assert!((row.token_vector_cosine.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn whitespace_only_change_is_exact() {
        let case = AlterationCase { name: "ws".into(), base: "a  b".into(), altered: "a b\n".into() };
        let row = compare_all(&case, &ToyProvider::new(32, 0), &Lexicon::vader(), &TokenFilter::default()).unwrap();
        assert!(row.exact_match);
        assert!(row.levenshtein_ratio < 1.0);
    }

    #[test]
    fn suite_parsing() {
        let suite = parse_suite(DEFAULT_SUITE).unwrap();
        assert_eq!(suite.len(), 13);
        let dup = "{\"name\":\"x\",\"base\":\"a\",\"altered\":\"b\"}\n{\"name\":\"x\",\"base\":\"a\",\"altered\":\"c\"}";
        assert!(matches!(parse_suite(dup), Err(BenchError::DuplicateName(_))));
        assert!(matches!(parse_suite("{"), Err(BenchError::Parse { line: 1, .. })));
    }

    #[test]
    fn ratios() {
        assert_eq!(levenshtein_ratio("kitten", "sitting"), 1.0 - 3.0 / 7.0);
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(jaccard(&s(&["a", "b"]), &s(&["b", "c", "b"])), 1.0 / 3.0);
    }

    #[test]
    fn report_format() {
        let row = ComparisonRow {
            case_name: "a, b".into(),
            exact_match: false,
            jaccard: 0.5,
            levenshtein_ratio: 0.25,
            sentence_cosine: -0.125,
            token_vector_cosine: None,
            sentiment_diff: 0.0,
        };
        let mut out = Vec::new();
        write_report(&[row], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "\"a, b\",false,0.500000,0.250000,-0.125000,,0.000000");
    }
}
