//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by dataset handling, model specification, and fitting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("input file is empty or contains no data rows")]
    EmptyData,

    #[error("column `{0}` not found in input")]
    MissingColumn(String),

    #[error("column `{0}` declared more than once in the schema")]
    DuplicateColumn(String),

    #[error("line {line}, column `{column}`: cannot parse `{value}` as a number")]
    ParseCell {
        line: usize,
        column: String,
        value: String,
    },

    #[error("line {line}, column `{column}`: missing value")]
    MissingValue { line: usize, column: String },

    #[error("line {line}, column `{column}`: non-finite value {value}")]
    NonFiniteValue {
        line: usize,
        column: String,
        value: f64,
    },

    #[error("unknown factor `{0}`")]
    UnknownFactor(String),

    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),

    #[error("unknown column `{0}` referenced by model term")]
    UnknownTerm(String),

    #[error("formula error: {0}")]
    Formula(String),

    #[error("invalid model specification: {0}")]
    ModelSpec(String),

    #[error("models are not nested: {0}")]
    NotNested(String),

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("covariate `{0}` has zero variance and cannot be standardized")]
    ZeroVarianceCovariate(String),

    #[error("effect size is unbounded: groups have zero pooled variance but different means")]
    InfiniteEffectSize,

    #[error("reliability is undefined: total variance is zero")]
    UndefinedReliability,

    #[error("variance component `{name}` is negative ({value})")]
    NegativeComponent { name: String, value: f64 },

    #[error("component `{0}` not present in the variance map")]
    UnknownComponent(String),

    #[error("corpus is empty after tokenization")]
    EmptyCorpus,

    #[error("text is empty after tokenization; rarity is undefined")]
    UndefinedRarity,

    #[error("text contains no words; readability is undefined")]
    UndefinedReadability,

    #[error("no text provided for object level `{0}`")]
    MissingText(String),

    #[error("covariate column `{0}` already exists in the dataset")]
    CovariateExists(String),

    #[error("invalid simulation spec: {0}")]
    SimSpec(String),

    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("fit did not converge after {evals} evaluations (criterion {criterion}): {detail}")]
    NonConvergence {
        evals: usize,
        criterion: String,
        detail: String,
    },
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad
    /// input data or model specifications). The CLI maps these to a
    /// distinct exit code.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::NonConvergence { .. } => true,
            Error::Replication { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
