use thiserror::Error;

/// Structural problems with an edge list, independent of where it came from.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("negative weight {weight} on edge ({i}, {j})")]
    NegativeWeight { i: usize, j: usize, weight: f64 },
    #[error("non-finite weight on edge ({i}, {j})")]
    NonFiniteWeight { i: usize, j: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({i}, {j})")]
    DuplicateEdge { i: usize, j: usize },
    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("graph must have at least one node")]
    Empty,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source} at line {line}")]
    Parse { line: usize, source: GraphError },
    #[error("malformed input at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("{n} nodes exceeds the dense matrix limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("matrix is not symmetric; use `spectrum` and the real part of lambda_2 instead")]
    NotSymmetric,
    #[error("eigensolver did not converge (n = {n}, inf-norm = {norm_inf:e}, min row sum = {min_row_sum:e})")]
    EigenSolver { n: usize, norm_inf: f64, min_row_sum: f64 },
    #[error("kernel bases not biorthogonalizable (smallest singular value {0:e})")]
    KernelSingular(f64),
    #[error("target {target} lies outside the convex hull [{min}, {max}] of the initial opinions")]
    OutsideHull { target: f64, min: f64, max: f64 },
    #[error("reachable state space exceeds {budget} states; use Monte Carlo instead")]
    StateSpaceBudget { budget: usize },
    #[error("decay fit needs at least 4 usable points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Syntax { .. }
                | Error::Graph(_)
                | Error::InvalidInput(_)
                | Error::Dimension { .. }
                | Error::TooLarge { .. }
                | Error::NotSymmetric
                | Error::OutsideHull { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
