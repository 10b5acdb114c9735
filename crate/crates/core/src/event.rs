//! Per-event composition of the stages: score sentences once, then build
//! symbol tables and networks for any threshold setting.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::article_sim::{article_matrix, encode_article, ArticleString, Metric, SimilarityError, SimilarityMatrix};
use crate::corpus::{Article, Segmenter, SentenceRecord};
use crate::matching::{MatchError, MatchParams, PairwiseScores, ScoredSentence, SymbolTable};
use crate::networks::{build_article_network, induce_domain_network, DomainNetwork, MembershipMatrix, NetworkError, WeightedNetwork};
use crate::providers::sentiment::sentiment;
use crate::providers::{EmbeddingProvider, Lexicon, ProviderError, SentimentError};

#[derive(Debug, Error)]
pub enum EventError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Sentiment(#[from] SentimentError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("event {0:?} has no sentences")]
    NoSentences(String),
}

/// Sentences of all articles, in article order then sentence index.
pub fn segment_event(articles: &[Article], segmenter: &Segmenter) -> Vec<SentenceRecord> {
    articles.iter().flat_map(|a| segmenter.segment(a)).collect()
}

pub fn embed_sentences(
    records: &[SentenceRecord],
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<crate::providers::Embedding>, ProviderError> {
    let texts: Vec<String> = records.iter().map(|r| r.text.clone()).collect();
    let vectors = provider.embed_batch(&texts)?;
    if vectors.len() != texts.len() {
        return Err(ProviderError::Malformed(format!(
            "{} vectors for {} texts",
            vectors.len(),
            texts.len()
        )));
    }
    Ok(vectors)
}

pub fn score_sentiments(
    records: &[SentenceRecord],
    lexicon: &Lexicon,
) -> Result<Vec<crate::providers::SentimentScore>, SentimentError> {
    records.iter().map(|r| sentiment(&r.text, lexicon)).collect()
}

/// Embeds and sentiment-scores records in one call.
pub fn score_sentences(
    records: &[SentenceRecord],
    provider: &dyn EmbeddingProvider,
    lexicon: &Lexicon,
) -> Result<Vec<ScoredSentence>, EventError> {
    let embeddings = embed_sentences(records, provider)?;
    let sentiments = score_sentiments(records, lexicon)?;
    Ok(records
        .iter()
        .zip(embeddings)
        .zip(sentiments)
        .map(|((record, embedding), sentiment)| ScoredSentence { record: record.clone(), embedding, sentiment })
        .collect())
}

/// Everything threshold-independent about one event.
#[derive(Debug, Clone)]
pub struct EventScores {
    pub event_id: String,
    pub articles: Vec<Article>,
    pub sentences: Vec<ScoredSentence>,
    pub scores: PairwiseScores,
}

/// Threshold-dependent outputs for one event.
#[derive(Debug, Clone)]
pub struct EventNetworks {
    pub symbols: SymbolTable,
    pub strings: Vec<ArticleString>,
    pub matrix: SimilarityMatrix,
    pub articles: WeightedNetwork,
    pub domains: DomainNetwork,
}

impl EventScores {
    pub fn new(event_id: impl Into<String>, articles: Vec<Article>, sentences: Vec<ScoredSentence>) -> Result<Self, EventError> {
        let event_id = event_id.into();
        if sentences.is_empty() {
            return Err(EventError::NoSentences(event_id));
        }
        let scores = PairwiseScores::compute(&sentences)?;
        Ok(Self { event_id, articles, sentences, scores })
    }

    /// One string per article in article order; articles with no sentences
    /// get an empty string.
    pub fn encode(&self, p: &MatchParams) -> Result<(SymbolTable, Vec<ArticleString>), EventError> {
        let table = self.scores.symbol_table(p)?;
        let mut by_article: BTreeMap<&str, Vec<SentenceRecord>> = BTreeMap::new();
        for s in &self.sentences {
            by_article.entry(s.record.article_id.as_str()).or_default().push(s.record.clone());
        }
        let strings = self
            .articles
            .iter()
            .map(|a| encode_article(&a.id, by_article.get(a.id.as_str()).map_or(&[][..], Vec::as_slice), &table))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((table, strings))
    }

    pub fn article_network(&self, p: &MatchParams, metric: Metric) -> Result<WeightedNetwork, EventError> {
        let (_, strings) = self.encode(p)?;
        let matrix = article_matrix(&strings, metric)?;
        Ok(build_article_network(&matrix, &self.articles, 0.0)?)
    }

    pub fn networks(&self, p: &MatchParams, metric: Metric) -> Result<EventNetworks, EventError> {
        let (symbols, strings) = self.encode(p)?;
        let matrix = article_matrix(&strings, metric)?;
        let articles = build_article_network(&matrix, &self.articles, 0.0)?;
        let domains = induce_domain_network(&articles, &MembershipMatrix::from_articles(&self.articles)?)?;
        Ok(EventNetworks { symbols, strings, matrix, articles, domains })
    }
}
