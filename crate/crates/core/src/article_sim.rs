//! Articles as symbol strings, and article-to-article similarity.

use std::collections::{BTreeSet, HashSet};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentenceRecord;
use crate::matching::{SentenceKey, SymbolTable};

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("sentence {index} of article {article_id:?} has no symbol")]
    MissingSymbol { article_id: String, index: usize },
    #[error("duplicate article id {0:?}")]
    DuplicateId(String),
    #[error("no articles")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleString {
    pub article_id: String,
    pub symbols: Vec<usize>,
    pub glyph_string: String,
}

impl ArticleString {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Encodes one article's sentences (any order) by sentence index.
pub fn encode_article(
    article_id: &str,
    sentences: &[SentenceRecord],
    table: &SymbolTable,
) -> Result<ArticleString, SimilarityError> {
    let mut ordered: Vec<&SentenceRecord> = sentences.iter().collect();
    ordered.sort_by_key(|s| s.index);
    let mut symbols = Vec::with_capacity(ordered.len());
    let mut glyph_string = String::new();
    for s in ordered {
        let key = SentenceKey { article_id: s.article_id.clone(), index: s.index };
        let missing = || SimilarityError::MissingSymbol { article_id: s.article_id.clone(), index: s.index };
        let symbol = table.symbol_of(&key).ok_or_else(missing)?;
        symbols.push(symbol);
        glyph_string.push(table.glyph_of(symbol).ok_or_else(missing)?);
    }
    Ok(ArticleString { article_id: article_id.to_string(), symbols, glyph_string })
}

/// Unit-cost edit distance (two-row dynamic program).
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(x != y);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - d / max(len)`; two empty strings share nothing and score 0.
pub fn edit_similarity(a: &[usize], b: &[usize]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Overlap coefficient of the symbol sets.
pub fn overlap_coefficient(a: &[usize], b: &[usize]) -> f64 {
    let sa: HashSet<usize> = a.iter().copied().collect();
    let sb: HashSet<usize> = b.iter().copied().collect();
    let smaller = sa.len().min(sb.len());
    if smaller == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / smaller as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Edit,
    Overlap,
}

impl Metric {
    pub fn apply(self, a: &ArticleString, b: &ArticleString) -> f64 {
        match self {
            Metric::Edit => edit_similarity(&a.symbols, &b.symbols),
            Metric::Overlap => overlap_coefficient(&a.symbols, &b.symbols),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edit" => Ok(Metric::Edit),
            "overlap" => Ok(Metric::Overlap),
            other => Err(format!("unknown metric {other:?} (expected edit or overlap)")),
        }
    }
}

/// Dense symmetric matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    node_ids: Vec<String>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn zeros(node_ids: Vec<String>) -> Self {
        let n = node_ids.len();
        Self { node_ids, values: vec![0.0; n * n] }
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    /// Sets both (i, j) and (j, i); the diagonal stays zero.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        if i == j {
            return;
        }
        let n = self.len();
        self.values[i * n + j] = value;
        self.values[j * n + i] = value;
    }

    /// Header row and column of node ids, six decimals.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "id")?;
        for id in &self.node_ids {
            write!(out, ",{}", csv_field(id))?;
        }
        writeln!(out)?;
        for (i, id) in self.node_ids.iter().enumerate() {
            write!(out, "{}", csv_field(id))?;
            for j in 0..self.len() {
                write!(out, ",{:.6}", self.get(i, j))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn article_matrix(articles: &[ArticleString], metric: Metric) -> Result<SimilarityMatrix, SimilarityError> {
    if articles.is_empty() {
        return Err(SimilarityError::Empty);
    }
    let mut seen = BTreeSet::new();
    for a in articles {
        if !seen.insert(a.article_id.as_str()) {
            return Err(SimilarityError::DuplicateId(a.article_id.clone()));
        }
    }
    let n = articles.len();
    let mut m = SimilarityMatrix::zeros(articles.iter().map(|a| a.article_id.clone()).collect());
    let upper: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| ((i + 1)..n).map(move |j| (i, j, metric.apply(&articles[i], &articles[j]))))
        .collect();
    for (i, j, v) in upper {
        m.set(i, j, v);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{MatchParams, PairwiseScores, ScoredSentence};
    use crate::providers::{Embedding, SentimentScore};

    fn string(id: &str, symbols: &[usize]) -> ArticleString {
        ArticleString { article_id: id.into(), symbols: symbols.to_vec(), glyph_string: String::new() }
    }

    #[test]
    fn levenshtein_examples() {
        let k: Vec<char> = "kitten".chars().collect();
        let s: Vec<char> = "sitting".chars().collect();
        assert_eq!(levenshtein(&k, &s), 3);
        assert_eq!(levenshtein(&k, &k), 0);
        assert_eq!(levenshtein(&k, &[]), 6);
        assert_eq!(levenshtein::<char>(&[], &s), 7);
    }

    #[test]
    fn edit_similarity_examples() {
        let x: Vec<usize> = (0..10).collect();
        assert_eq!(edit_similarity(&x, &x), 1.0);
        assert_eq!(edit_similarity(&[0, 1, 2, 3, 4], &[5, 6, 7, 8, 9]), 0.0);
        assert_eq!(edit_similarity(&[1, 2, 3, 4], &[1, 2, 4]), 0.75);
        assert_eq!(edit_similarity(&[], &[]), 0.0);
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap_coefficient(&[1, 2], &[3, 2, 1, 9]), 1.0);
        assert_eq!(overlap_coefficient(&[1, 2], &[3, 4]), 0.0);
        assert_eq!(overlap_coefficient(&[1, 2, 3], &[2, 3, 4, 5]), 2.0 / 3.0);
        assert_eq!(overlap_coefficient(&[], &[1]), 0.0);
        // Repeated symbols count once.
        assert_eq!(overlap_coefficient(&[1, 1, 1], &[1, 2]), 1.0);
    }

    fn sentence(article: &str, index: usize, v: Vec<f64>) -> ScoredSentence {
        ScoredSentence {
            record: SentenceRecord { article_id: article.into(), index, text: "t".into() },
            embedding: Embedding::new(v).unwrap(),
            sentiment: SentimentScore::new(0.0).unwrap(),
        }
    }

    #[test]
    fn encoding_follows_sentence_order() {
        // Symbols: 0 for [1,0], 1 for [0,1].
        let s = vec![
            sentence("a", 0, vec![1.0, 0.0]),
            sentence("a", 1, vec![0.0, 1.0]),
            sentence("b", 0, vec![0.0, 1.0]),
            sentence("b", 1, vec![1.0, 0.0]),
        ];
        let table = PairwiseScores::compute(&s).unwrap().symbol_table(&MatchParams::default()).unwrap();
        let recs = |id: &str| s.iter().filter(|x| x.record.article_id == id).map(|x| x.record.clone()).collect::<Vec<_>>();
        let a = encode_article("a", &recs("a"), &table).unwrap();
        let mut reversed = recs("b");
        reversed.reverse();
        let b = encode_article("b", &reversed, &table).unwrap();
        assert_eq!(a.symbols, [0, 1]);
        assert_eq!(b.symbols, [1, 0]);
        assert_eq!(a.glyph_string.chars().rev().collect::<String>(), b.glyph_string);
        assert_eq!(a.glyph_string.chars().count(), a.len());

        let empty = encode_article("e", &[], &table).unwrap();
        assert!(empty.is_empty() && empty.glyph_string.is_empty());

        let stray = SentenceRecord { article_id: "z".into(), index: 4, text: "x".into() };
        assert_eq!(
            encode_article("z", &[stray], &table),
            Err(SimilarityError::MissingSymbol { article_id: "z".into(), index: 4 })
        );
    }

    #[test]
    fn matrix_shapes() {
        let one = article_matrix(&[string("a", &[1])], Metric::Edit).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.get(0, 0), 0.0);

        let same = [string("a", &[1, 2]), string("b", &[1, 2]), string("c", &[1, 2])];
        let m = article_matrix(&same, Metric::Edit).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
        assert_eq!(
            article_matrix(&[string("a", &[]), string("a", &[])], Metric::Edit),
            Err(SimilarityError::DuplicateId("a".into()))
        );
        assert_eq!(article_matrix(&[], Metric::Edit), Err(SimilarityError::Empty));
    }

    #[test]
    fn csv_dump() {
        let m = article_matrix(&[string("a", &[1, 2, 3, 4]), string("b,c", &[1, 2, 4])], Metric::Edit).unwrap();
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "id,a,\"b,c\"\na,0.000000,0.750000\n\"b,c\",0.750000,0.000000\n"
        );
    }

    #[test]
    fn metric_parse() {
        assert_eq!("overlap".parse::<Metric>(), Ok(Metric::Overlap));
        assert!("cosine".parse::<Metric>().is_err());
    }
}
