//! Model specifications and the formula mini-language.
//!
//! Grammar: `response ~ term + term + ... + (1|factor) + ...` where a term is
//! `1` (intercept, implicit unless suppressed with `0`), a column name, or a
//! two-way interaction `a:b`. Random terms are intercepts only; random slopes
//! and nesting syntax are deliberately not supported.

use std::fmt;

use crate::error::{Error, Result};

/// One fixed-effect term. Interactions are stored with their atoms in
/// lexicographic order so `a:b` and `b:a` compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FixedTerm {
    Intercept,
    Main(String),
    Interaction(String, String),
}

impl FixedTerm {
    pub fn interaction(a: impl Into<String>, b: impl Into<String>) -> FixedTerm {
        let (a, b) = (a.into(), b.into());
        if a <= b {
            FixedTerm::Interaction(a, b)
        } else {
            FixedTerm::Interaction(b, a)
        }
    }

    /// Column names referenced by this term.
    pub fn names(&self) -> Vec<&str> {
        match self {
            FixedTerm::Intercept => vec![],
            FixedTerm::Main(n) => vec![n],
            FixedTerm::Interaction(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for FixedTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixedTerm::Intercept => write!(f, "1"),
            FixedTerm::Main(n) => write!(f, "{n}"),
            FixedTerm::Interaction(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

/// Declarative description of a model: fixed-effect terms plus random
/// intercept factors (one variance component each).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub response: String,
    pub fixed_terms: Vec<FixedTerm>,
    pub random_factors: Vec<String>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.contains(['~', '+', ':', '(', ')', '|', ',']) && name != "0" && name != "1"
}

impl ModelSpec {
    /// Construct a spec programmatically; terms are deduplicated and an
    /// intercept is added unless `suppress_intercept`.
    pub fn new(
        response: impl Into<String>,
        terms: Vec<FixedTerm>,
        random_factors: Vec<String>,
        suppress_intercept: bool,
    ) -> Result<ModelSpec> {
        let response = response.into();
        let mut fixed_terms = Vec::new();
        if !suppress_intercept {
            fixed_terms.push(FixedTerm::Intercept);
        }
        for t in terms {
            let t = match t {
                FixedTerm::Interaction(a, b) => FixedTerm::interaction(a, b),
                other => other,
            };
            if t == FixedTerm::Intercept && suppress_intercept {
                return Err(Error::Formula(
                    "intercept both requested and suppressed".into(),
                ));
            }
            if !fixed_terms.contains(&t) {
                fixed_terms.push(t);
            }
        }
        let mut random = Vec::new();
        for r in random_factors {
            if !random.contains(&r) {
                random.push(r);
            }
        }
        let spec = ModelSpec {
            response,
            fixed_terms,
            random_factors: random,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Intercept-only model with the given random intercepts.
    pub fn intercept_with_random(
        response: impl Into<String>,
        random_factors: Vec<String>,
    ) -> Result<ModelSpec> {
        ModelSpec::new(response, vec![], random_factors, false)
    }

    fn validate(&self) -> Result<()> {
        if !valid_name(&self.response) {
            return Err(Error::Formula(format!(
                "invalid response name `{}`",
                self.response
            )));
        }
        if self.fixed_terms.is_empty() {
            return Err(Error::Formula(
                "model has no fixed-effect terms (intercept suppressed and nothing added)".into(),
            ));
        }
        for t in &self.fixed_terms {
            for n in t.names() {
                if !valid_name(n) {
                    return Err(Error::Formula(format!("invalid column name `{n}`")));
                }
                if self.random_factors.iter().any(|r| r == n) {
                    return Err(Error::ModelSpec(format!(
                        "`{n}` appears both as a fixed term and as a random factor"
                    )));
                }
            }
            if let FixedTerm::Interaction(a, b) = t {
                if a == b {
                    return Err(Error::Formula(format!("interaction `{a}:{b}` repeats a column")));
                }
            }
        }
        for r in &self.random_factors {
            if !valid_name(r) {
                return Err(Error::Formula(format!("invalid random factor name `{r}`")));
            }
        }
        Ok(())
    }

    /// Parse the textual form, e.g.
    /// `score ~ 1 + system + readability + system:readability + (1|sentence_id)`.
    pub fn parse(formula: &str) -> Result<ModelSpec> {
        let mut sides = formula.splitn(2, '~');
        let lhs = sides.next().unwrap_or("").trim();
        let rhs = sides
            .next()
            .ok_or_else(|| Error::Formula("formula must contain `~`".into()))?
            .trim();
        if lhs.is_empty() {
            return Err(Error::Formula("missing response before `~`".into()));
        }

        let mut terms = Vec::new();
        let mut random = Vec::new();
        let mut saw_one = false;
        let mut saw_zero = false;

        for raw in rhs.split('+') {
            let term = raw.trim();
            if term.is_empty() {
                return Err(Error::Formula("empty term in formula".into()));
            }
            if term == "1" {
                saw_one = true;
                continue;
            }
            if term == "0" {
                saw_zero = true;
                continue;
            }
            if let Some(inner) = term.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
                let mut parts = inner.splitn(2, '|');
                let left = parts.next().unwrap_or("").trim();
                let right = parts
                    .next()
                    .ok_or_else(|| {
                        Error::Formula(format!("random term `{term}` must have the form (1|factor)"))
                    })?
                    .trim();
                if left != "1" {
                    return Err(Error::Formula(format!(
                        "random term `{term}`: only random intercepts `(1|factor)` are supported"
                    )));
                }
                if right.is_empty() || right.contains('/') || right.contains(':') {
                    return Err(Error::Formula(format!(
                        "random term `{term}`: nested or interaction grouping is not supported"
                    )));
                }
                random.push(right.to_string());
                continue;
            }
            if term.contains(':') {
                let parts: Vec<&str> = term.split(':').map(str::trim).collect();
                if parts.len() != 2 || parts.iter().any(|p| p.is_empty()) {
                    return Err(Error::Formula(format!(
                        "interaction `{term}` must reference exactly two columns"
                    )));
                }
                terms.push(FixedTerm::interaction(parts[0], parts[1]));
                continue;
            }
            terms.push(FixedTerm::Main(term.to_string()));
        }

        if saw_zero && saw_one {
            return Err(Error::Formula("formula contains both `0` and `1`".into()));
        }
        ModelSpec::new(lhs, terms, random, saw_zero)
    }

    pub fn has_intercept(&self) -> bool {
        self.fixed_terms.contains(&FixedTerm::Intercept)
    }

    /// True when every fixed term of `self` appears in `other` and the
    /// random structure is identical (as a set).
    pub fn is_nested_in(&self, other: &ModelSpec) -> bool {
        self.response == other.response
            && self
                .fixed_terms
                .iter()
                .all(|t| other.fixed_terms.contains(t))
            && self.random_factors.len() == other.random_factors.len()
            && self
                .random_factors
                .iter()
                .all(|r| other.random_factors.contains(r))
    }

    /// Fixed terms of `other` that are not in `self`.
    pub fn added_terms<'a>(&self, other: &'a ModelSpec) -> Vec<&'a FixedTerm> {
        other
            .fixed_terms
            .iter()
            .filter(|t| !self.fixed_terms.contains(t))
            .collect()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ~ ", self.response)?;
        let mut parts: Vec<String> = Vec::new();
        if !self.has_intercept() {
            parts.push("0".into());
        }
        for t in &self.fixed_terms {
            parts.push(t.to_string());
        }
        for r in &self.random_factors {
            parts.push(format!("(1|{r})"));
        }
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_formula() {
        let spec = ModelSpec::parse(
            "score ~ 1 + system + readability + system:readability + (1|sentence_id) + (1|lambda)",
        )
        .unwrap();
        assert_eq!(spec.response, "score");
        assert_eq!(
            spec.fixed_terms,
            vec![
                FixedTerm::Intercept,
                FixedTerm::Main("system".into()),
                FixedTerm::Main("readability".into()),
                FixedTerm::interaction("system", "readability"),
            ]
        );
        assert_eq!(spec.random_factors, vec!["sentence_id", "lambda"]);
    }

    #[test]
    fn intercept_is_implicit() {
        let spec = ModelSpec::parse("y ~ x + (1|g)").unwrap();
        assert!(spec.has_intercept());
    }

    #[test]
    fn zero_suppresses_intercept() {
        let spec = ModelSpec::parse("y ~ 0 + x").unwrap();
        assert!(!spec.has_intercept());
    }

    #[test]
    fn interaction_order_is_canonical() {
        let a = ModelSpec::parse("y ~ a:b").unwrap();
        let b = ModelSpec::parse("y ~ b:a").unwrap();
        assert_eq!(a.fixed_terms, b.fixed_terms);
    }

    #[test]
    fn rejects_random_slopes() {
        let err = ModelSpec::parse("y ~ 1 + (x|g)").unwrap_err();
        assert!(err.to_string().contains("random intercepts"));
    }

    #[test]
    fn rejects_fixed_and_random_overlap() {
        let err = ModelSpec::parse("y ~ 1 + g + (1|g)").unwrap_err();
        assert!(matches!(err, Error::ModelSpec(_)));
    }

    #[test]
    fn rejects_zero_and_one() {
        assert!(ModelSpec::parse("y ~ 0 + 1 + x").is_err());
    }

    #[test]
    fn display_round_trips() {
        let text = "score ~ 1 + system + system:readability + (1|sentence_id)";
        let spec = ModelSpec::parse(text).unwrap();
        let again = ModelSpec::parse(&spec.to_string()).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn nesting_check() {
        let m0 = ModelSpec::parse("y ~ 1 + (1|s)").unwrap();
        let m1 = ModelSpec::parse("y ~ 1 + system + (1|s)").unwrap();
        assert!(m0.is_nested_in(&m1));
        assert!(!m1.is_nested_in(&m0));
        let other_random = ModelSpec::parse("y ~ 1 + system + (1|r)").unwrap();
        assert!(!m0.is_nested_in(&other_random));
        assert_eq!(m0.added_terms(&m1), vec![&FixedTerm::Main("system".into())]);
    }
}
