//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by model parsing, data validation, draw generation,
/// and estimation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The model document is not well-formed (syntax or schema violation).
    #[error("model document error: {0}")]
    ModelSyntax(String),

    /// The model document parsed but violates a semantic rule.
    #[error("model document error at `{path}`: {message}")]
    ModelSemantic { path: String, message: String },

    /// A column referenced by the model or an operation is missing.
    #[error("column `{0}` not found in dataset")]
    MissingColumn(String),

    /// A cell failed to parse or is not finite.
    #[error("row {row}, column `{column}`: {message}")]
    BadCell {
        row: usize,
        column: String,
        message: String,
    },

    /// A label in the chosen-outcome column matches no alternative.
    #[error(
        "row {row}: label `{label}` does not match any alternative (labels are matched exactly)"
    )]
    UnknownLabel { row: usize, label: String },

    /// A declared-binary column holds a value other than 0 or 1.
    #[error("row {row}, column `{column}`: value {value} in a declared-binary column")]
    NonBinaryValue {
        row: usize,
        column: String,
        value: f64,
    },

    /// An operation requires a binary (0/1) column.
    #[error("column `{0}` is not a binary indicator")]
    NotBinary(String),

    /// Attempt to create a column whose name is already taken.
    #[error("column `{0}` already exists")]
    DuplicateColumn(String),

    /// The dataset holds no observations.
    #[error("dataset contains no observations")]
    EmptyDataset,

    /// More random dimensions requested than configured prime bases.
    #[error("{needed} random dimensions requested but only {available} prime bases configured")]
    PrimeExhaustion { needed: usize, available: usize },

    /// Probability outside the open unit interval.
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityDomain(f64),

    /// Mismatched dimensions between dataset, layout, draw block, or theta.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The log-likelihood is not finite at the optimizer's starting point.
    #[error("log-likelihood is not finite at the starting point{}", match .parameter {
        Some(name) => format!(" (parameter `{name}` is not finite)"),
        None => String::new(),
    })]
    NonFiniteStart { parameter: Option<String> },

    /// Neither the numerical Hessian nor BHHH produced an invertible matrix.
    #[error("covariance matrix is singular; near-null direction {direction:?}")]
    SingularCovariance { direction: Vec<f64> },

    /// A restricted model cannot have a higher log-likelihood than the
    /// unrestricted one.
    #[error("restricted log-likelihood {restricted} exceeds unrestricted {unrestricted}")]
    RestrictedBetter { restricted: f64, unrestricted: f64 },

    /// A random coefficient with zero scale is a point mass; the share above
    /// zero is 0 or 1 by the sign of the mean.
    #[error("scale is zero: coefficient distribution is a point mass (share above zero = {share_above})")]
    DegenerateScale { share_above: f64 },

    /// A parameter name does not exist in the layout.
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    /// An estimation inside a recovery replication failed.
    #[error("replication with seed {seed} failed: {source}")]
    Replication {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    /// A results document could not be parsed.
    #[error("results document error: {0}")]
    ResultsFormat(String),

    /// Results and effects do not come from the same run.
    #[error("mismatched run identifiers: {0}")]
    MismatchedRun(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
