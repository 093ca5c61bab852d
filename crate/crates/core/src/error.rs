use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Why a vertex or a whole test could not be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// Row degree is zero.
    Isolated,
    /// Row degree is n - 1, every other vertex is a neighbour.
    FullyConnected,
    /// Sample variance of the observations is zero.
    ZeroVariance,
    /// A Getis-Ord denominator (sum of observations) is zero.
    ZeroSum,
}

impl std::fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExclusionReason::Isolated => "isolated vertex (degree 0)",
            ExclusionReason::FullyConnected => "vertex adjacent to all others (degree n-1)",
            ExclusionReason::ZeroVariance => "observations have zero variance",
            ExclusionReason::ZeroSum => "observations sum to zero",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("self-loop at row {row} ({id})")]
    SelfLoop { row: usize, id: String },

    #[error("graph is disconnected: no path between {from} and {to}")]
    Disconnected { from: String, to: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vertex {vertex} excluded: {reason}")]
    Excluded { vertex: usize, reason: ExclusionReason },

    #[error("degenerate data: {0}")]
    DegenerateData(ExclusionReason),

    #[error("degenerate beta fit: {0}")]
    DegenerateFit(String),

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("infeasible request: {0}")]
    Infeasible(String),
}
