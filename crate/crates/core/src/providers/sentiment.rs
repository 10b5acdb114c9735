//! Lexicon-based compound sentiment.
//!
//! Implements a subset of the VADER heuristics: negation, capitalization
//! emphasis, trailing exclamation marks, quote dampening, and the
//! `x / sqrt(x^2 + alpha)` normalization. The bundled lexicon is the
//! published VADER lexicon (MIT, see `data/LICENSE-vader_lexicon.txt`).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const VADER_LEXICON: &str = include_str!("../../data/vader_lexicon.txt");

const NEGATIONS: &[&str] = &[
    "aint", "arent", "cannot", "cant", "couldnt", "darent", "didnt", "doesnt", "dont", "hadnt",
    "hasnt", "havent", "isnt", "mightnt", "mustnt", "neither", "neednt", "never", "none", "nope",
    "nor", "not", "nothing", "nowhere", "oughtnt", "shant", "shouldnt", "uhuh", "uh-uh", "wasnt",
    "werent", "without", "wont", "wouldnt", "rarely", "seldom", "despite",
];

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("lexicon line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("failed to read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SentimentScore(f64);

impl SentimentScore {
    pub fn new(compound: f64) -> Option<Self> {
        (-1.0..=1.0).contains(&compound).then_some(Self(compound))
    }

    pub fn compound(self) -> f64 {
        self.0
    }
}

/// Term to valence map, keys lowercase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    terms: HashMap<String, f64>,
}

impl Lexicon {
    /// Parses `term<TAB>valence[<TAB>...]` lines; extra columns are ignored.
    pub fn parse(text: &str) -> Result<Self, SentimentError> {
        let mut terms = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let term = cols.next().unwrap_or_default().trim();
            let valence = cols.next().ok_or_else(|| SentimentError::Parse {
                line: i + 1,
                message: "missing valence column".into(),
            })?;
            let valence: f64 = valence.trim().parse().map_err(|e| SentimentError::Parse {
                line: i + 1,
                message: format!("bad valence {valence:?}: {e}"),
            })?;
            if term.is_empty() || !valence.is_finite() {
                return Err(SentimentError::Parse { line: i + 1, message: "empty term or non-finite valence".into() });
            }
            terms.insert(term.to_lowercase(), valence);
        }
        if terms.is_empty() {
            return Err(SentimentError::EmptyLexicon);
        }
        Ok(Self { terms })
    }

    pub fn load(path: &Path) -> Result<Self, SentimentError> {
        let text = fs::read_to_string(path).map_err(|source| SentimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn vader() -> Self {
        Self::parse(VADER_LEXICON).expect("bundled lexicon parses")
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        Self {
            terms: pairs.into_iter().map(|(t, v)| (t.as_ref().to_lowercase(), v)).collect(),
        }
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.terms.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Rule constants; defaults are the published VADER values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentConfig {
    pub negation_scalar: f64,
    pub negation_window: usize,
    pub caps_scalar: f64,
    pub exclamation_increment: f64,
    pub max_exclamations: usize,
    pub quote_weight: f64,
    pub alpha: f64,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        Self {
            negation_scalar: -0.74,
            negation_window: 3,
            caps_scalar: 1.25,
            exclamation_increment: 0.292,
            max_exclamations: 3,
            quote_weight: 0.5,
            alpha: 15.0,
        }
    }
}

struct Token {
    word: String,
    all_caps: bool,
    has_letters: bool,
    quoted: bool,
}

fn is_open_quote(c: char) -> bool {
    matches!(c, '"' | '\u{201c}')
}

fn is_close_quote(c: char) -> bool {
    matches!(c, '"' | '\u{201d}')
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut in_quote = false;
    for raw in text.split_whitespace() {
        let first = raw.find(char::is_alphanumeric);
        let last = raw.rfind(char::is_alphanumeric);
        let (lead, core, trail) = match (first, last) {
            (Some(f), Some(l)) => {
                let end = l + raw[l..].chars().next().map_or(1, char::len_utf8);
                (&raw[..f], &raw[f..end], &raw[end..])
            }
            // Emoticons and bare punctuation are looked up whole.
            _ => ("", raw, ""),
        };
        let opens = lead.chars().any(is_open_quote);
        let closes = trail.chars().any(is_close_quote);
        let quoted = in_quote || opens;
        if opens && !closes {
            in_quote = true;
        } else if closes {
            in_quote = false;
        }
        let has_letters = core.chars().any(char::is_alphabetic);
        let all_caps = has_letters && core.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase);
        tokens.push(Token { word: core.to_lowercase(), all_caps, has_letters, quoted });
    }
    tokens
}

fn is_negation(word: &str) -> bool {
    NEGATIONS.contains(&word) || word.ends_with("n't")
}

fn trailing_exclamations(text: &str) -> usize {
    text.trim_end()
        .trim_end_matches(|c: char| is_close_quote(c) || c == '\'' || c == '\u{2019}')
        .chars()
        .rev()
        .take_while(|c| *c == '!')
        .count()
}

/// Compound score with the default rule constants.
pub fn sentiment(text: &str, lexicon: &Lexicon) -> Result<SentimentScore, SentimentError> {
    sentiment_with(text, lexicon, &SentimentConfig::default())
}

pub fn sentiment_with(
    text: &str,
    lexicon: &Lexicon,
    config: &SentimentConfig,
) -> Result<SentimentScore, SentimentError> {
    if lexicon.is_empty() {
        return Err(SentimentError::EmptyLexicon);
    }
    let tokens = tokenize(text);
    let cased: Vec<&Token> = tokens.iter().filter(|t| t.has_letters).collect();
    let text_all_caps = !cased.is_empty() && cased.iter().all(|t| t.all_caps);

    let mut sum = 0.0;
    for (i, token) in tokens.iter().enumerate() {
        let Some(mut valence) = lexicon.get(&token.word) else {
            continue;
        };
        if token.all_caps && !text_all_caps {
            valence *= config.caps_scalar;
        }
        let window = i.saturating_sub(config.negation_window)..i;
        if tokens[window].iter().any(|t| is_negation(&t.word)) {
            valence *= config.negation_scalar;
        }
        if token.quoted {
            valence *= config.quote_weight;
        }
        sum += valence;
    }
    if sum != 0.0 {
        let bangs = trailing_exclamations(text).min(config.max_exclamations);
        sum += bangs as f64 * config.exclamation_increment * sum.signum();
    }
    let compound = (sum / (sum * sum + config.alpha).sqrt()).clamp(-1.0, 1.0);
    Ok(SentimentScore(compound))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normalized(x: f64) -> f64 {
        x / (x * x + 15.0).sqrt()
    }

    fn score(text: &str, lexicon: &Lexicon) -> f64 {
        sentiment(text, lexicon).unwrap().compound()
    }

    #[test]
    fn no_lexicon_tokens_is_zero() {
        let lex = Lexicon::from_pairs([("good", 1.9)]);
        assert_eq!(score("the table is brown", &lex), 0.0);
        assert_eq!(score("", &lex), 0.0);
    }

    #[test]
    fn single_term_normalization() {
        let lex = Lexicon::from_pairs([("good", 1.9)]);
        let expected = 1.9 / (1.9f64 * 1.9 + 15.0).sqrt();
        assert_eq!(score("good", &lex), expected);
        assert!((expected - 0.4404).abs() < 1e-4);
    }

    #[test]
    fn negation_flips_and_dampens() {
        let lex = Lexicon::from_pairs([("good", 1.9)]);
        let got = score("not good", &lex);
        assert!(got < 0.0);
        assert!((got - normalized(1.9 * -0.74)).abs() < 1e-15);
        // Outside the three-token window the negation does not apply.
        assert!(score("not a b c good", &lex) > 0.0);
        assert!(score("isn't good", &lex) < 0.0);
    }

    #[test]
    fn caps_emphasis_only_in_mixed_case_text() {
        let lex = Lexicon::from_pairs([("good", 1.9)]);
        assert!((score("it is GOOD", &lex) - normalized(1.9 * 1.25)).abs() < 1e-15);
        assert!((score("IT IS GOOD", &lex) - normalized(1.9)).abs() < 1e-15);
    }

    #[test]
    fn exclamations_capped_at_three() {
        let lex = Lexicon::from_pairs([("bad", -2.5)]);
        assert!((score("bad!", &lex) - normalized(-2.5 - 0.292)).abs() < 1e-15);
        assert!((score("bad!!!!!", &lex) - normalized(-2.5 - 3.0 * 0.292)).abs() < 1e-15);
        assert_eq!(score("neutral!!!", &lex), 0.0);
    }

    #[test]
    fn quoted_terms_dampened() {
        let lex = Lexicon::from_pairs([("refused", -1.2)]);
        assert!((score("who have \"refused\" the vaccine", &lex) - normalized(-0.6)).abs() < 1e-15);
        assert!((score("they \u{201c}flatly refused\u{201d} it", &lex) - normalized(-0.6)).abs() < 1e-15);
        assert!((score("who have refused the vaccine", &lex) - normalized(-1.2)).abs() < 1e-15);
    }

    #[test]
    fn antisymmetric_lexicon_pairs() {
        let pos = Lexicon::from_pairs([("good", 2.1)]);
        let neg = Lexicon::from_pairs([("good", -2.1)]);
        for text in ["good", "GOOD stuff", "not good!!", "\"good\""] {
            assert_eq!(score(text, &pos), -score(text, &neg));
        }
    }

    #[test]
    fn empty_lexicon_rejected() {
        assert!(matches!(sentiment("x", &Lexicon::default()), Err(SentimentError::EmptyLexicon)));
        assert!(matches!(Lexicon::parse("# nothing\n"), Err(SentimentError::EmptyLexicon)));
        assert!(matches!(Lexicon::parse("good\tabc"), Err(SentimentError::Parse { line: 1, .. })));
    }

    #[test]
    fn bundled_lexicon_loads() {
        let lex = Lexicon::vader();
        assert!(lex.len() > 7000);
        assert_eq!(lex.get("good"), Some(1.9));
        assert!(score("This is a great day!", &lex) > 0.5);
    }
}
