//! Sentence matching and the per-event symbol alphabet.
//!
//! Two sentences match when their embeddings are close enough (cosine above
//! `tau1`) and their sentiments are not too far apart (difference at most
//! `tau2`). Matches are closed transitively: every connected component of
//! the match graph becomes one symbol, and each symbol gets a glyph so an
//! article can be written as a string.

use std::collections::BTreeMap;
use std::io::{self, Write};

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentenceRecord;
use crate::providers::{Embedding, SentimentScore};

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid match parameters: {0}")]
    InvalidParams(String),
    #[error("glyph alphabet exhausted at {0} symbols")]
    AlphabetExhausted(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    tau1: f64,
    tau2: f64,
}

impl MatchParams {
    pub fn new(tau1: f64, tau2: f64) -> Result<Self, MatchError> {
        if !(tau1 > 0.0 && tau1 < 1.0) {
            return Err(MatchError::InvalidParams(format!("tau1 = {tau1} not in (0, 1)")));
        }
        if !(tau2 > 0.0 && tau2 <= 1.0) {
            return Err(MatchError::InvalidParams(format!("tau2 = {tau2} not in (0, 1]")));
        }
        Ok(Self { tau1, tau2 })
    }

    /// Semantic threshold; cosines must be strictly above it.
    pub fn tau1(&self) -> f64 {
        self.tau1
    }

    /// Sentiment threshold; differences strictly above it mean "unrelated".
    pub fn tau2(&self) -> f64 {
        self.tau2
    }
}

impl Default for MatchParams {
    fn default() -> Self {
        Self { tau1: 0.7, tau2: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSentence {
    pub record: SentenceRecord,
    pub embedding: Embedding,
    pub sentiment: SentimentScore,
}

impl ScoredSentence {
    pub fn key(&self) -> SentenceKey {
        SentenceKey { article_id: self.record.article_id.clone(), index: self.record.index }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceKey {
    pub article_id: String,
    pub index: usize,
}

/// Applies both thresholds to a precomputed cosine and sentiment difference.
pub fn thresholded(cosine: f64, sentiment_diff: f64, p: &MatchParams) -> f64 {
    let cosine = cosine.clamp(-1.0, 1.0);
    if cosine > p.tau1 && sentiment_diff <= p.tau2 {
        cosine
    } else {
        0.0
    }
}

pub fn pair_similarity(a: &ScoredSentence, b: &ScoredSentence, p: &MatchParams) -> Result<f64, MatchError> {
    let cosine = a
        .embedding
        .cosine(&b.embedding)
        .ok_or(MatchError::DimensionMismatch(a.embedding.dim(), b.embedding.dim()))?;
    let diff = (a.sentiment.compound() - b.sentiment.compound()).abs();
    Ok(thresholded(cosine, diff, p))
}

/// Threshold-independent pairwise cosines and sentiment differences for one
/// event. Computed once and reused across parameter settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseScores {
    keys: Vec<SentenceKey>,
    cosine: Vec<f64>,
    sentiment_diff: Vec<f64>,
}

impl PairwiseScores {
    pub fn compute(sentences: &[ScoredSentence]) -> Result<Self, MatchError> {
        let n = sentences.len();
        if let Some(first) = sentences.first() {
            let dim = first.embedding.dim();
            if let Some(bad) = sentences.iter().find(|s| s.embedding.dim() != dim) {
                return Err(MatchError::DimensionMismatch(dim, bad.embedding.dim()));
            }
        }
        let rows: Vec<Vec<(f64, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let a = &sentences[i];
                (0..n)
                    .map(|j| {
                        let b = &sentences[j];
                        let cos = a.embedding.cosine(&b.embedding).expect("dims checked");
                        (cos, (a.sentiment.compound() - b.sentiment.compound()).abs())
                    })
                    .collect()
            })
            .collect();
        let (cosine, sentiment_diff) = rows.into_iter().flatten().unzip();
        Ok(Self { keys: sentences.iter().map(ScoredSentence::key).collect(), cosine, sentiment_diff })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[SentenceKey] {
        &self.keys
    }

    pub fn cosine(&self, i: usize, j: usize) -> f64 {
        self.cosine[i * self.len() + j]
    }

    pub fn sentiment_diff(&self, i: usize, j: usize) -> f64 {
        self.sentiment_diff[i * self.len() + j]
    }

    pub fn similarity(&self, i: usize, j: usize, p: &MatchParams) -> f64 {
        thresholded(self.cosine(i, j), self.sentiment_diff(i, j), p)
    }

    /// Union-find over the thresholded match graph.
    pub fn symbol_table(&self, p: &MatchParams) -> Result<SymbolTable, MatchError> {
        let n = self.len();
        let mut uf = UnionFind::<usize>::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if self.similarity(i, j, p) > 0.0 {
                    uf.union(i, j);
                }
            }
        }
        SymbolTable::from_components(&self.keys, &uf.into_labeling())
    }
}

/// Glyph blocks in allocation order: CJK Unified Ideographs, Hangul
/// Syllables, Supplementary Private Use Area-A. None contain whitespace or
/// control characters.
pub const GLYPH_RANGES: &[(u32, u32)] = &[(0x4E00, 0x9FFF), (0xAC00, 0xD7A3), (0xF0000, 0xFFFFD)];

pub fn glyph_for(symbol: usize) -> Option<char> {
    let mut offset = symbol as u64;
    for &(lo, hi) in GLYPH_RANGES {
        let size = u64::from(hi - lo + 1);
        if offset < size {
            return char::from_u32(lo + offset as u32);
        }
        offset -= size;
    }
    None
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolTable {
    symbol_of: BTreeMap<SentenceKey, usize>,
    glyphs: Vec<char>,
    classes: Vec<Vec<SentenceKey>>,
}

impl SymbolTable {
    /// Symbols are numbered by the first input position of their component.
    fn from_components(keys: &[SentenceKey], component: &[usize]) -> Result<Self, MatchError> {
        let mut table = SymbolTable::default();
        let mut symbol_of_root = BTreeMap::new();
        for (key, &root) in keys.iter().zip(component) {
            let next = symbol_of_root.len();
            let symbol = *symbol_of_root.entry(root).or_insert(next);
            if symbol == table.classes.len() {
                table.glyphs.push(glyph_for(symbol).ok_or(MatchError::AlphabetExhausted(symbol))?);
                table.classes.push(Vec::new());
            }
            table.classes[symbol].push(key.clone());
            table.symbol_of.insert(key.clone(), symbol);
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn symbol_of(&self, key: &SentenceKey) -> Option<usize> {
        self.symbol_of.get(key).copied()
    }

    pub fn glyph_of(&self, symbol: usize) -> Option<char> {
        self.glyphs.get(symbol).copied()
    }

    pub fn class(&self, symbol: usize) -> &[SentenceKey] {
        &self.classes[symbol]
    }

    /// Line-delimited `{symbol_id, glyph, sentence_keys}` records.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            symbol_id: usize,
            glyph: u32,
            sentence_keys: Vec<(&'a str, usize)>,
        }
        for (symbol, class) in self.classes.iter().enumerate() {
            let line = Line {
                symbol_id: symbol,
                glyph: u32::from(self.glyphs[symbol]),
                sentence_keys: class.iter().map(|k| (k.article_id.as_str(), k.index)).collect(),
            };
            writeln!(out, "{}", serde_json::to_string(&line)?)?;
        }
        Ok(())
    }
}

pub fn build_symbol_table(sentences: &[ScoredSentence], p: &MatchParams) -> Result<SymbolTable, MatchError> {
    PairwiseScores::compute(sentences)?.symbol_table(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scored(article: &str, index: usize, values: Vec<f64>, compound: f64) -> ScoredSentence {
        ScoredSentence {
            record: SentenceRecord { article_id: article.into(), index, text: format!("{article}-{index}") },
            embedding: Embedding::new(values).unwrap(),
            sentiment: SentimentScore::new(compound).unwrap(),
        }
    }

    /// Unit 2-d vector at the given angle from the x axis.
    fn at_angle(article: &str, index: usize, cosine_to_x: f64, compound: f64) -> ScoredSentence {
        let s = (1.0 - cosine_to_x * cosine_to_x).sqrt();
        scored(article, index, vec![cosine_to_x, s], compound)
    }

    #[test]
    fn params_validated() {
        assert!(MatchParams::new(0.0, 0.1).is_err());
        assert!(MatchParams::new(1.0, 0.1).is_err());
        assert!(MatchParams::new(0.5, 0.0).is_err());
        assert!(MatchParams::new(0.5, 1.0).is_ok());
        assert_eq!(MatchParams::default(), MatchParams::new(0.7, 0.1).unwrap());
    }

    #[test]
    fn self_match_is_one() {
        let a = scored("a", 0, vec![0.3, -1.2, 4.0], 0.2);
        let s = pair_similarity(&a, &a, &MatchParams::default()).unwrap();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sentimentally_unrelated_pair_rejected() {
        assert_eq!(thresholded(0.99, 0.15, &MatchParams::default()), 0.0);
        assert_eq!(thresholded(0.99, 0.05, &MatchParams::default()), 0.99);
    }

    #[test]
    fn below_semantic_threshold_rejected() {
        assert_eq!(thresholded(0.66, 0.0, &MatchParams::default()), 0.0);
        let x = scored("x", 0, vec![1.0, 0.0], 0.0);
        let y = at_angle("y", 0, 0.66, 0.0);
        assert_eq!(pair_similarity(&x, &y, &MatchParams::default()).unwrap(), 0.0);
    }

    #[test]
    fn boundaries_follow_inequality_directions() {
        let p = MatchParams::new(0.5, 0.25).unwrap();
        // cos == tau1 is not a match; diff == tau2 still is.
        assert_eq!(thresholded(0.5, 0.0, &p), 0.0);
        assert_eq!(thresholded(0.75, 0.25, &p), 0.75);
        assert_eq!(thresholded(-0.9, 0.0, &p), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = scored("a", 0, vec![1.0, 0.0], 0.0);
        let b = scored("b", 0, vec![1.0, 0.0, 0.0], 0.0);
        assert_eq!(pair_similarity(&a, &b, &MatchParams::default()), Err(MatchError::DimensionMismatch(2, 3)));
        assert!(build_symbol_table(&[a, b], &MatchParams::default()).is_err());
    }

    #[test]
    fn unmatched_sentences_get_distinct_symbols() {
        let s = vec![
            scored("a", 0, vec![1.0, 0.0, 0.0], 0.0),
            scored("b", 0, vec![0.0, 1.0, 0.0], 0.0),
            scored("c", 0, vec![0.0, 0.0, 1.0], 0.0),
        ];
        let t = build_symbol_table(&s, &MatchParams::default()).unwrap();
        assert_eq!(t.len(), 3);
        let glyphs: Vec<char> = (0..3).map(|i| t.glyph_of(i).unwrap()).collect();
        assert_eq!(glyphs, ['\u{4E00}', '\u{4E01}', '\u{4E02}']);
    }

    #[test]
    fn chained_matches_share_a_symbol() {
        // A~B and B~C above 0.7 but A~C below: angles 0, 40 and 80 degrees.
        let deg = |d: f64| d.to_radians().cos();
        let s = vec![at_angle("a", 0, deg(0.0), 0.0), at_angle("b", 0, deg(40.0), 0.0), at_angle("c", 0, deg(80.0), 0.0)];
        let p = MatchParams::default();
        assert!(pair_similarity(&s[0], &s[1], &p).unwrap() > 0.0);
        assert!(pair_similarity(&s[1], &s[2], &p).unwrap() > 0.0);
        assert_eq!(pair_similarity(&s[0], &s[2], &p).unwrap(), 0.0);
        let t = build_symbol_table(&s, &p).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.class(0).len(), 3);
    }

    #[test]
    fn duplicate_text_across_five_articles() {
        let mut s: Vec<_> = (0..5).map(|i| scored(&format!("a{i}"), 1, vec![0.2, 0.9, -0.1], 0.3)).collect();
        s.push(scored("a0", 0, vec![-1.0, 0.0, 0.5], 0.3));
        let t = build_symbol_table(&s, &MatchParams::default()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.class(0).len(), 5);
        assert_eq!(t.symbol_of(&s[5].key()), Some(1));
    }

    #[test]
    fn empty_input() {
        assert!(build_symbol_table(&[], &MatchParams::default()).unwrap().is_empty());
    }

    #[test]
    fn glyph_ranges_are_contiguous_and_extend() {
        let first_block = (0x9FFF - 0x4E00 + 1) as usize;
        assert!(first_block >= 1000);
        assert_eq!(glyph_for(first_block - 1), Some('\u{9FFF}'));
        assert_eq!(glyph_for(first_block), Some('\u{AC00}'));
        let total: usize = GLYPH_RANGES.iter().map(|(lo, hi)| (hi - lo + 1) as usize).sum();
        assert!(glyph_for(total - 1).is_some());
        assert_eq!(glyph_for(total), None);
        for i in (0..total).step_by(997) {
            let c = glyph_for(i).unwrap();
            assert!(!c.is_whitespace() && !c.is_control());
        }
    }

    #[test]
    fn symbol_table_dump() {
        let s = vec![scored("a", 0, vec![1.0, 0.0], 0.0), scored("b", 2, vec![1.0, 0.0], 0.0)];
        let t = build_symbol_table(&s, &MatchParams::default()).unwrap();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"symbol_id\":0,\"glyph\":19968,\"sentence_keys\":[[\"a\",0],[\"b\",2]]}\n"
        );
    }
}
