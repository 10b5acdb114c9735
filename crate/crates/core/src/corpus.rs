//! Corpus ingestion and sentence segmentation.
//!
//! A corpus file holds one JSON object per line. Articles are grouped by
//! their `event_id`; all downstream matching happens within one event.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_JUNK_PATTERNS: &str = include_str!("../data/junk_patterns.txt");
pub const DEFAULT_ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

/// Fragments with fewer non-whitespace characters than this are dropped.
pub const MIN_SENTENCE_CHARS: usize = 2;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate article id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: unknown bias label {label:?}")]
    UnknownBiasLabel { line: usize, label: String },
    #[error("invalid junk pattern {pattern:?}: {message}")]
    InvalidPattern { pattern: String, message: String },
    #[error("invalid bias scale: {0}")]
    InvalidScale(String),
}

/// Ordered categorical bias labels, most-left first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasScale {
    levels: Vec<String>,
}

impl BiasScale {
    pub fn new<I, S>(levels: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        if levels.is_empty() {
            return Err(CorpusError::InvalidScale("no levels".into()));
        }
        let mut seen = HashSet::new();
        for level in &levels {
            if level.is_empty() {
                return Err(CorpusError::InvalidScale("empty level".into()));
            }
            if !seen.insert(level.as_str()) {
                return Err(CorpusError::InvalidScale(format!("duplicate level {level:?}")));
            }
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == label)
    }
}

impl Default for BiasScale {
    fn default() -> Self {
        Self {
            levels: [
                "far-left",
                "left",
                "left-center",
                "center",
                "right-center",
                "right",
                "far-right",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub domain: String,
    pub event_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub bias_label: Option<String>,
    #[serde(default)]
    pub url: Option<String>,
}

/// Articles grouped by event, events ordered by id, articles in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub events: BTreeMap<String, Vec<Article>>,
}

impl Corpus {
    pub fn article_count(&self) -> usize {
        self.events.values().map(Vec::len).sum()
    }

    pub fn articles(&self) -> impl Iterator<Item = &Article> {
        self.events.values().flatten()
    }
}

pub fn load_corpus(path: &Path, scale: &BiasScale) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text, scale)
}

pub fn parse_corpus(text: &str, scale: &BiasScale) -> Result<Corpus, CorpusError> {
    let mut ids = HashSet::new();
    let mut corpus = Corpus::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut article: Article = serde_json::from_str(raw).map_err(|e| CorpusError::Parse {
            line,
            message: e.to_string(),
        })?;
        if article.id.is_empty() {
            return Err(CorpusError::Parse { line, message: "empty id".into() });
        }
        if article.event_id.is_empty() {
            return Err(CorpusError::Parse { line, message: "empty event_id".into() });
        }
        if article.title.trim().is_empty() && article.body.trim().is_empty() {
            return Err(CorpusError::Parse {
                line,
                message: format!("article {:?} has neither title nor body", article.id),
            });
        }
        if article.bias_label.as_deref() == Some("") {
            article.bias_label = None;
        }
        if let Some(label) = &article.bias_label {
            if scale.index_of(label).is_none() {
                return Err(CorpusError::UnknownBiasLabel { line, label: label.clone() });
            }
        }
        if !ids.insert(article.id.clone()) {
            return Err(CorpusError::DuplicateId(article.id));
        }
        corpus.events.entry(article.event_id.clone()).or_default().push(article);
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub article_id: String,
    /// 0 is the title when the article has one.
    pub index: usize,
    pub text: String,
}

/// Parses a line-oriented config list, skipping blanks and `#` comments.
pub fn parse_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

pub fn read_list(path: &Path) -> Result<Vec<String>, CorpusError> {
    fs::read_to_string(path)
        .map(|t| parse_list(&t))
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })
}

/// Compiled junk filter and abbreviation set.
#[derive(Debug, Clone)]
pub struct Segmenter {
    junk: Vec<Regex>,
    abbreviations: HashSet<String>,
}

impl Segmenter {
    pub fn new<P, A>(junk_patterns: &[P], abbreviations: &[A]) -> Result<Self, CorpusError>
    where
        P: AsRef<str>,
        A: AsRef<str>,
    {
        let junk = junk_patterns
            .iter()
            .map(|p| {
                Regex::new(p.as_ref()).map_err(|e| CorpusError::InvalidPattern {
                    pattern: p.as_ref().to_string(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let abbreviations = abbreviations
            .iter()
            .map(|a| a.as_ref().trim().trim_end_matches('.').to_lowercase())
            .filter(|a| !a.is_empty())
            .collect();
        Ok(Self { junk, abbreviations })
    }

    /// Segmenter configured with the bundled junk patterns and abbreviations.
    pub fn with_defaults() -> Self {
        Self::new(&parse_list(DEFAULT_JUNK_PATTERNS), &parse_list(DEFAULT_ABBREVIATIONS))
            .expect("bundled junk patterns compile")
    }

    pub fn is_junk(&self, sentence: &str) -> bool {
        self.junk.iter().any(|re| re.is_match(sentence))
    }

    /// Title first (index 0), then the body's non-junk sentences.
    pub fn segment(&self, article: &Article) -> Vec<SentenceRecord> {
        let mut texts = Vec::new();
        let title = normalize_whitespace(&article.title);
        if !title.is_empty() {
            texts.push(title);
        }
        texts.extend(
            self.split_sentences(&article.body)
                .into_iter()
                .map(|s| normalize_whitespace(&s))
                .filter(|s| s.chars().filter(|c| !c.is_whitespace()).count() >= MIN_SENTENCE_CHARS)
                .filter(|s| !self.is_junk(s)),
        );
        texts
            .into_iter()
            .enumerate()
            .map(|(index, text)| SentenceRecord { article_id: article.id.clone(), index, text })
            .collect()
    }

    /// Splits at `.`, `!` or `?` when the next non-space character is
    /// uppercase (or the text ends) and the preceding word is not a listed
    /// abbreviation. Runs of terminators and closing quotes stay attached.
    pub fn split_sentences(&self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut start = 0;
        let mut i = 0;
        while i < chars.len() {
            if !is_terminator(chars[i]) {
                i += 1;
                continue;
            }
            let term_pos = i;
            let mut end = i + 1;
            while end < chars.len() && (is_terminator(chars[end]) || is_closer(chars[end])) {
                end += 1;
            }
            let boundary = if end == chars.len() {
                true
            } else if chars[end].is_whitespace() {
                let mut j = end;
                while j < chars.len() && chars[j].is_whitespace() {
                    j += 1;
                }
                j == chars.len() || starts_sentence(&chars[j..])
            } else {
                false
            };
            if boundary && !(chars[term_pos] == '.' && self.is_abbreviation(&chars[start..term_pos])) {
                let sentence: String = chars[start..end].iter().collect();
                if !sentence.trim().is_empty() {
                    out.push(sentence);
                }
                start = end;
            }
            i = end;
        }
        if start < chars.len() {
            let rest: String = chars[start..].iter().collect();
            if !rest.trim().is_empty() {
                out.push(rest);
            }
        }
        out
    }

    fn is_abbreviation(&self, before: &[char]) -> bool {
        let word_start = before
            .iter()
            .rposition(|c| c.is_whitespace())
            .map_or(0, |p| p + 1);
        let word: String = before[word_start..]
            .iter()
            .collect::<String>()
            .trim_start_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase();
        !word.is_empty() && self.abbreviations.contains(&word)
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn starts_sentence(rest: &[char]) -> bool {
    rest.iter()
        .find(|c| !matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}'))
        .is_some_and(|c| c.is_uppercase())
}

pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One-shot form of [`Segmenter::segment`].
pub fn clean_and_segment<P, A>(
    article: &Article,
    junk_patterns: &[P],
    abbreviations: &[A],
) -> Result<Vec<SentenceRecord>, CorpusError>
where
    P: AsRef<str>,
    A: AsRef<str>,
{
    Ok(Segmenter::new(junk_patterns, abbreviations)?.segment(article))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article(title: &str, body: &str) -> Article {
        Article {
            id: "a1".into(),
            domain: "example.com".into(),
            event_id: "e1".into(),
            title: title.into(),
            body: body.into(),
            bias_label: None,
            url: None,
        }
    }

    fn texts(records: &[SentenceRecord]) -> Vec<&str> {
        records.iter().map(|r| r.text.as_str()).collect()
    }

    const NONE: &[&str] = &[];

    #[test]
    fn two_terminators_and_title() {
        let out = clean_and_segment(&article("T.", "A b. C d."), NONE, NONE).unwrap();
        assert_eq!(texts(&out), ["T.", "A b.", "C d."]);
        assert_eq!(out.iter().map(|r| r.index).collect::<Vec<_>>(), [0, 1, 2]);
    }

    #[test]
    fn junk_sentence_removed() {
        let out = clean_and_segment(
            &article("Headline", "Click the link to subscribe now. Real news here."),
            &["(?i)subscribe"],
            NONE,
        )
        .unwrap();
        assert_eq!(texts(&out), ["Headline", "Real news here."]);
    }

    #[test]
    fn abbreviation_does_not_split() {
        let out = clean_and_segment(&article("", "The U.S. Air Force said yes."), NONE, &["u.s"]).unwrap();
        assert_eq!(texts(&out), ["The U.S. Air Force said yes."]);
        // Without the abbreviation the uppercase "Air" forces a split.
        let out = clean_and_segment(&article("", "The U.S. Air Force said yes."), NONE, NONE).unwrap();
        assert_eq!(texts(&out), ["The U.S.", "Air Force said yes."]);
    }

    #[test]
    fn hand_segmented_fixture() {
        let seg = Segmenter::with_defaults();
        let body = "Gen. Smith spoke on Friday.  The U.S. Navy said \"no comment.\" \
                    Is it over?Yes! Officials met at 3 p.m. today. Prices rose 2.5 percent.\n\nSubscribe to our newsletter. Done";
        let got: Vec<String> = seg.segment(&article("", body)).into_iter().map(|r| r.text).collect();
        assert_eq!(
            got,
            [
                "Gen. Smith spoke on Friday.",
                "The U.S. Navy said \"no comment.\"",
                "Is it over?Yes!",
                "Officials met at 3 p.m. today.",
                "Prices rose 2.5 percent.",
                "Done",
            ]
        );
    }

    #[test]
    fn whitespace_normalized_and_short_fragments_dropped() {
        let out = clean_and_segment(&article("  Big\n  title ", "A.  B c\t d.  X"), NONE, NONE).unwrap();
        assert_eq!(texts(&out), ["Big title", "A.", "B c d."]);
    }

    #[test]
    fn invalid_pattern_rejected() {
        let err = clean_and_segment(&article("t", "b"), &["(unclosed"], NONE).unwrap_err();
        assert!(matches!(err, CorpusError::InvalidPattern { .. }));
    }

    #[test]
    fn load_groups_by_event() {
        let text = r#"{"id":"a1","domain":"x.com","event_id":"e1","title":"t","body":"b","bias_label":null,"url":null}
{"id":"a2","domain":"y.com","event_id":"e2","title":"t","body":"b","bias_label":"left","url":null}
{"id":"a3","domain":"x.com","event_id":"e1","title":"t","body":"b","bias_label":"center","url":null}
"#;
        let corpus = parse_corpus(text, &BiasScale::default()).unwrap();
        let sizes: Vec<usize> = corpus.events.values().map(Vec::len).collect();
        assert_eq!(sizes, [2, 1]);
        assert_eq!(corpus.events["e1"][1].id, "a3");
    }

    #[test]
    fn duplicate_id_named() {
        let text = r#"{"id":"a1","domain":"x.com","event_id":"e1","title":"t","body":"b"}
{"id":"a1","domain":"y.com","event_id":"e1","title":"t","body":"b"}"#;
        match parse_corpus(text, &BiasScale::default()) {
            Err(CorpusError::DuplicateId(id)) => assert_eq!(id, "a1"),
            other => panic!("expected duplicate id, got {other:?}"),
        }
    }

    #[test]
    fn unknown_label_and_parse_errors_carry_context() {
        let bad_label = r#"{"id":"a1","domain":"x.com","event_id":"e1","title":"t","body":"b","bias_label":"centrist"}"#;
        match parse_corpus(bad_label, &BiasScale::default()) {
            Err(CorpusError::UnknownBiasLabel { line: 1, label }) => assert_eq!(label, "centrist"),
            other => panic!("{other:?}"),
        }
        let text = "{\"id\":\"a1\",\"domain\":\"x\",\"event_id\":\"e\",\"title\":\"t\"}\nnot json";
        assert!(matches!(parse_corpus(text, &BiasScale::default()), Err(CorpusError::Parse { line: 2, .. })));
        let empty = r#"{"id":"a1","domain":"x","event_id":"e","title":" ","body":""}"#;
        assert!(matches!(parse_corpus(empty, &BiasScale::default()), Err(CorpusError::Parse { line: 1, .. })));
    }

    #[test]
    fn scale_validation() {
        assert_eq!(BiasScale::default().levels().len(), 7);
        assert!(BiasScale::new(Vec::<String>::new()).is_err());
        assert!(BiasScale::new(["a", "a"]).is_err());
        assert_eq!(BiasScale::new(["l", "r"]).unwrap().index_of("r"), Some(1));
    }

    #[test]
    fn bundled_lists_parse() {
        assert!(parse_list(DEFAULT_ABBREVIATIONS).contains(&"u.s".to_string()));
        let seg = Segmenter::with_defaults();
        assert!(seg.is_junk("Clink the link to subscribe to updates."));
        assert!(!seg.is_junk("The academy said Saturday."));
    }
}
