use thiserror::Error;

/// Crate-wide error type.
///
/// Numerical failures (`NotPositiveDefinite`, `TransitivityViolation`) are
/// kept distinct from domain emptiness (`EmptyRashomon`, `Infeasible`) so
/// callers can map them to different exit paths.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A matrix that must be symmetric positive definite failed the Cholesky
    /// pivot test. `pivot` is the zero-based index of the offending pivot.
    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A column cannot support the requested basis (constant column, or too
    /// few distinct values for the requested knot count).
    #[error("degenerate column {column}: {reason}")]
    DegenerateColumn { column: String, reason: String },

    /// The loss bound is below the best attainable loss, so the set of
    /// admissible models is empty.
    #[error("loss bound {epsilon} is below the minimal loss {min_loss}: empty model set")]
    EmptyRashomon { epsilon: f64, min_loss: f64 },

    /// No sub-ensemble size satisfies the loss bound; the bound is below the
    /// worst-case loss of the full ensemble.
    #[error("loss bound {epsilon} is below the full-ensemble bound {floor}: no feasible size")]
    Infeasible { epsilon: f64, floor: f64 },

    /// An importance comparison was requested for a feature whose attribution
    /// sign is not agreed on by the whole model set.
    #[error("no consensus sign for feature {feature}: importance comparison undefined")]
    SignNotEstablished { feature: usize },

    /// The computed importance relation failed the transitivity closure check
    /// beyond numerical tolerance. This signals inconsistent range queries.
    #[error("importance relation not transitive: {i} <= {j} and {j} <= {k} but sup for ({i},{k}) is {excess:e}")]
    TransitivityViolation {
        i: usize,
        j: usize,
        k: usize,
        excess: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
