//! Data-property covariates computed from raw input texts: word rarity and
//! Flesch reading ease.
//!
//! Tokenization is deliberately simple and fully specified: lowercase, split
//! on anything that is not alphanumeric, discard the separators. Rarity is
//! the mean negative natural log of a token's empirical corpus probability
//! (nats per token; higher means rarer). Unseen tokens get add-one-style
//! mass `1 / (total + V + 1)` so the function is total. Reading ease uses
//! the classic coefficients `206.835 - 1.015 w/s - 84.6 syl/w` with a
//! heuristic syllable counter documented at [`count_syllables`].

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::data::EvalDataset;
use crate::error::{Error, Result};

/// Empirical token distribution of a reference corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    token_counts: HashMap<String, u64>,
    total_tokens: u64,
}

/// Rarity and readability of one text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextProperties {
    /// Mean `-ln p(token)` in nats per token, `>= 0`.
    pub rarity: f64,
    /// Flesch reading ease points; 0-100 is the interpretable range but the
    /// score is unbounded in both directions.
    pub readability: f64,
}

/// Lowercased alphanumeric tokens; punctuation and whitespace are separators.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

/// Accumulate token counts over a corpus of texts.
pub fn build_corpus_stats<S: AsRef<str>>(texts: &[S]) -> Result<CorpusStats> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total = 0u64;
    for text in texts {
        for tok in tokenize(text.as_ref()) {
            *counts.entry(tok).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(CorpusStats {
        token_counts: counts,
        total_tokens: total,
    })
}

impl CorpusStats {
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn vocabulary_size(&self) -> usize {
        self.token_counts.len()
    }

    pub fn count(&self, token: &str) -> u64 {
        self.token_counts.get(token).copied().unwrap_or(0)
    }

    fn probability(&self, token: &str) -> f64 {
        match self.token_counts.get(token) {
            Some(&c) => c as f64 / self.total_tokens as f64,
            None => 1.0 / (self.total_tokens as f64 + self.vocabulary_size() as f64 + 1.0),
        }
    }
}

/// Mean negative log-probability of the text's tokens under `stats`.
pub fn word_rarity(text: &str, stats: &CorpusStats) -> Result<f64> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::UndefinedRarity);
    }
    let sum: f64 = tokens.iter().map(|t| -stats.probability(t).ln()).sum();
    Ok(sum / tokens.len() as f64)
}

/// Heuristic syllable count: number of maximal vowel groups (aeiouy), minus
/// one for a terminal silent "e" (kept when the word ends in consonant+"le"),
/// with a minimum of one per word.
pub fn count_syllables(word: &str) -> usize {
    let chars: Vec<char> = word.chars().collect();
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0usize;
    let mut in_group = false;
    for &c in &chars {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
                in_group = true;
            }
        } else {
            in_group = false;
        }
    }
    let n = chars.len();
    if n >= 2 && chars[n - 1] == 'e' && !is_vowel(chars[n - 2]) {
        let silent_le = n >= 3 && chars[n - 2] == 'l' && !is_vowel(chars[n - 3]);
        if !silent_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}

/// Sentences are maximal runs of terminal punctuation (`.` `!` `?`), with a
/// minimum of one.
fn count_sentences(text: &str) -> usize {
    let mut count = 0usize;
    let mut in_terminator = false;
    for c in text.chars() {
        if matches!(c, '.' | '!' | '?') {
            if !in_terminator {
                count += 1;
                in_terminator = true;
            }
        } else {
            in_terminator = false;
        }
    }
    count.max(1)
}

/// Flesch reading ease of a text.
pub fn readability(text: &str) -> Result<f64> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::UndefinedReadability);
    }
    let words = tokens.len() as f64;
    let sentences = count_sentences(text) as f64;
    let syllables: usize = tokens.iter().map(|t| count_syllables(t)).sum();
    Ok(206.835 - 1.015 * (words / sentences) - 84.6 * (syllables as f64 / words))
}

pub fn text_properties(text: &str, stats: &CorpusStats) -> Result<TextProperties> {
    Ok(TextProperties {
        rarity: word_rarity(text, stats)?,
        readability: readability(text)?,
    })
}

/// Join rarity and readability onto the evaluation rows as covariates
/// (columns `rarity` and `readability`), constant within each object level.
/// Every level of the object-of-interest factor must have a text.
pub fn annotate_dataset(
    ds: &EvalDataset,
    texts: &IndexMap<String, String>,
    stats: &CorpusStats,
) -> Result<EvalDataset> {
    let object = ds.object_of_interest().to_string();
    let factor = ds.factor(&object)?;
    let mut per_level = Vec::with_capacity(factor.n_levels());
    for level in factor.levels() {
        let text = texts
            .get(level)
            .ok_or_else(|| Error::MissingText(level.clone()))?;
        per_level.push(text_properties(text, stats)?);
    }
    let rarity: Vec<f64> = factor
        .codes()
        .iter()
        .map(|&c| per_level[c as usize].rarity)
        .collect();
    let readability: Vec<f64> = factor
        .codes()
        .iter()
        .map(|&c| per_level[c as usize].readability)
        .collect();
    ds.with_covariate("rarity", rarity)?
        .with_covariate("readability", readability)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenizer_folds_case_and_strips_punctuation() {
        let stats = build_corpus_stats(&["A, a!"]).unwrap();
        assert_eq!(stats.count("a"), 2);
        assert_eq!(stats.total_tokens(), 2);

        let stats = build_corpus_stats(&["a a b"]).unwrap();
        assert_eq!(stats.count("a"), 2);
        assert_eq!(stats.count("b"), 1);
        assert_eq!(stats.total_tokens(), 3);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            build_corpus_stats(&["...", "  "]),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn rarity_of_certain_word_is_zero() {
        let stats = build_corpus_stats(&["a a a a"]).unwrap();
        assert_eq!(word_rarity("a", &stats).unwrap(), 0.0);
    }

    #[test]
    fn rarity_uniform_two_word_corpus() {
        let stats = build_corpus_stats(&["a b"]).unwrap();
        let r = word_rarity("a b", &stats).unwrap();
        assert!((r - std::f64::consts::LN_2).abs() < 1e-12, "r = {r}");
    }

    #[test]
    fn rarity_of_unseen_token_uses_smoothing() {
        // total 8 tokens, vocabulary 2 -> p = 1/11
        let stats = build_corpus_stats(&["a a a a b b b b"]).unwrap();
        let r = word_rarity("zzz", &stats).unwrap();
        assert!((r - 11.0f64.ln()).abs() < 1e-12, "r = {r}");
    }

    #[test]
    fn rarity_of_empty_text_is_an_error() {
        let stats = build_corpus_stats(&["a"]).unwrap();
        assert!(matches!(
            word_rarity("?!", &stats),
            Err(Error::UndefinedRarity)
        ));
    }

    #[test]
    fn duplicating_the_corpus_preserves_rarity() {
        let docs = ["the cat sat", "a cat ran", "dogs bark"];
        let once = build_corpus_stats(&docs).unwrap();
        let twice = build_corpus_stats(&[docs.as_slice(), docs.as_slice()].concat()).unwrap();
        for text in ["the cat", "dogs ran", "a a a"] {
            let r1 = word_rarity(text, &once).unwrap();
            let r2 = word_rarity(text, &twice).unwrap();
            assert!((r1 - r2).abs() < 1e-12);
        }
    }

    #[test]
    fn syllable_heuristic_cases() {
        assert_eq!(count_syllables("the"), 1);
        assert_eq!(count_syllables("cat"), 1);
        assert_eq!(count_syllables("table"), 2); // consonant + "le" keeps the e
        assert_eq!(count_syllables("whale"), 1); // vowel + "le" drops it
        assert_eq!(count_syllables("moose"), 1);
        assert_eq!(count_syllables("syllable"), 3);
        assert_eq!(count_syllables("mmm"), 1); // minimum one
        assert_eq!(count_syllables("e"), 1);
    }

    #[test]
    fn readability_golden_sentence() {
        let r = readability("The cat sat on the mat.").unwrap();
        assert!((r - 116.145).abs() < 1e-9, "r = {r}");
    }

    #[test]
    fn readability_empty_is_an_error() {
        assert!(matches!(readability(""), Err(Error::UndefinedReadability)));
    }

    #[test]
    fn long_words_drive_the_score_down() {
        let hard = "Incomprehensibility characterizes multidimensional organizational \
                    responsibilities notwithstanding internationalization peculiarities \
                    intercontinentally";
        let r = readability(hard).unwrap();
        assert!(r < 0.0, "r = {r}");
    }

    #[test]
    fn annotation_is_constant_within_object() {
        let ds = crate::data::EvalDataset::from_columns(
            "score",
            vec![0.1, 0.2, 0.3, 0.4],
            vec![(
                "sentence".to_string(),
                vec!["s1".into(), "s2".into()],
                vec![0, 1, 0, 1],
            )],
            vec![],
            Some("sentence".to_string()),
        )
        .unwrap();
        let texts: IndexMap<String, String> = [
            ("s1".to_string(), "The cat sat on the mat.".to_string()),
            ("s2".to_string(), "Dogs bark loudly outside.".to_string()),
        ]
        .into_iter()
        .collect();
        let stats = build_corpus_stats(&texts.values().collect::<Vec<_>>()).unwrap();
        let out = annotate_dataset(&ds, &texts, &stats).unwrap();

        let rarity = out.covariate("rarity").unwrap();
        let readab = out.covariate("readability").unwrap();
        assert_eq!(rarity[0], rarity[2]);
        assert_eq!(rarity[1], rarity[3]);
        // annotated values equal direct per-text calls
        let direct = word_rarity("The cat sat on the mat.", &stats).unwrap();
        assert_eq!(rarity[0], direct);
        let direct_r = readability("Dogs bark loudly outside.").unwrap();
        assert_eq!(readab[1], direct_r);
    }

    #[test]
    fn annotation_missing_text_names_the_level() {
        let ds = crate::data::EvalDataset::from_columns(
            "score",
            vec![0.1, 0.2],
            vec![(
                "sentence".to_string(),
                vec!["s1".into(), "s2".into()],
                vec![0, 1],
            )],
            vec![],
            Some("sentence".to_string()),
        )
        .unwrap();
        let texts: IndexMap<String, String> =
            [("s1".to_string(), "hello world.".to_string())].into_iter().collect();
        let stats = build_corpus_stats(&["hello world."]).unwrap();
        match annotate_dataset(&ds, &texts, &stats) {
            Err(Error::MissingText(level)) => assert_eq!(level, "s2"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    proptest! {
        /// Rarity never increases when a token's corpus count grows.
        #[test]
        fn rarity_monotone_in_count(c1 in 1u64..50, c2 in 1u64..50, other in 1u64..50) {
            let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            let mk = |count: u64| {
                let mut doc = String::new();
                for _ in 0..count {
                    doc.push_str("w ");
                }
                for _ in 0..other {
                    doc.push_str("x ");
                }
                build_corpus_stats(&[doc]).unwrap()
            };
            let r_lo = word_rarity("w", &mk(lo)).unwrap();
            let r_hi = word_rarity("w", &mk(hi)).unwrap();
            prop_assert!(r_hi <= r_lo + 1e-12);
        }

        /// Deterministic pure function of the string.
        #[test]
        fn readability_is_deterministic(words in prop::collection::vec("[a-z]{1,12}", 1..30)) {
            let text = format!("{}.", words.join(" "));
            let a = readability(&text).unwrap();
            let b = readability(&text).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
