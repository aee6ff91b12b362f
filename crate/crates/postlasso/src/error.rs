//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The design matrix does not have full (numerical) rank `min(n, p)`.
    #[error("design matrix is rank deficient: numerical rank {found}, expected {expected}")]
    RankDeficient { expected: usize, found: usize },

    /// A penalty weight is zero or negative.
    #[error("penalty weight at index {index} is {value}; all weights must be positive")]
    NonPositiveWeight { index: usize, value: f64 },

    /// No free/dependent split of the inactive subgradient yields an
    /// invertible dependent block within the condition-number cap.
    #[error("active-set geometry is degenerate: cond(G_D) = {cond:.3e} exceeds cap {cap:.3e}")]
    DegenerateGeometry { cond: f64, cap: f64 },

    /// The requested active set is empty or larger than the design rank.
    #[error("active set of size {size} is outside the supported range 1..={max}")]
    InvalidActiveSet { size: usize, max: usize },

    /// An active-set index is out of bounds or duplicated.
    #[error("active-set index {index} is invalid for p = {p}")]
    BadActiveIndex { index: usize, p: usize },

    /// The lasso selected no variables where a nonempty model is required.
    #[error("lasso active set is empty; inference requires at least one selected variable")]
    EmptyModel,

    /// Coordinate descent failed to reach the KKT tolerance.
    #[error(
        "lasso solver did not converge after {sweeps} sweeps (KKT residual {kkt_residual:.3e})"
    )]
    NoConvergence { sweeps: usize, kkt_residual: f64 },

    /// `max_j |X_j' y| / (n w_j)` is zero, so no penalty grid exists.
    #[error("response is orthogonal to every penalized column; lambda grid is degenerate")]
    DegenerateResponse,

    /// A chain was started from a state violating the feasibility constraints.
    #[error("initial sampler state is infeasible: {reason}")]
    InfeasibleInit { reason: String },

    /// A lasso solution's dependent subgradient block disagrees with the
    /// value implied by the null-space constraint.
    #[error("solution is inconsistent with the active-set geometry: max deviation {max_dev:.3e} > {tol:.3e}")]
    InconsistentSolution { max_dev: f64, tol: f64 },

    /// The feasible range of a free coordinate is empty, which signals an
    /// infeasible input state rather than a data condition.
    #[error("empty proposal range for free coordinate {coord}: [{lb}, {ub}]")]
    EmptyRange { coord: usize, lb: f64, ub: f64 },

    /// Interval or set construction was asked to run on too few draws.
    #[error("insufficient conditioned draws: got {got}, need at least {need}")]
    InsufficientDraws { got: usize, need: usize },

    /// Rejection sampling hit its proposal budget before accepting enough draws.
    #[error("rejection sampling budget exhausted: accepted {accepted} of {requested} after {proposed} proposals")]
    BudgetExhausted {
        accepted: usize,
        requested: usize,
        proposed: usize,
        partial: Box<crate::harness::RejectionDraws>,
    },

    /// A scalar or vector parameter is outside its admissible range.
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },

    /// A factorization or internal consistency check failed numerically.
    #[error("numerical failure: {what}")]
    Numerical { what: String },

    /// Experiment or CLI configuration failed validation.
    #[error("invalid configuration: {message}")]
    InvalidConfig { message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    TomlParse(#[from] toml::de::Error),
}

impl Error {
    /// Stable process exit code for the CLI.
    ///
    /// 2 = input parse error, 3 = solver/numerical failure, 4 = empty model,
    /// 5 = insufficient draws, 6 = sampling budget exhausted, 1 = other.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::TomlParse(_)
            | Error::InvalidConfig { .. } => 2,
            Error::RankDeficient { .. }
            | Error::NonPositiveWeight { .. }
            | Error::DegenerateGeometry { .. }
            | Error::NoConvergence { .. }
            | Error::DegenerateResponse
            | Error::InvalidActiveSet { .. }
            | Error::BadActiveIndex { .. }
            | Error::InconsistentSolution { .. }
            | Error::InfeasibleInit { .. }
            | Error::EmptyRange { .. }
            | Error::InvalidParameter { .. }
            | Error::Numerical { .. } => 3,
            Error::EmptyModel => 4,
            Error::InsufficientDraws { .. } => 5,
            Error::BudgetExhausted { .. } => 6,
        }
    }

    /// Short machine-parsable kind tag used on stderr.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NonPositiveWeight { .. } => "non_positive_weight",
            Error::DegenerateGeometry { .. } => "degenerate_geometry",
            Error::InvalidActiveSet { .. } => "invalid_active_set",
            Error::BadActiveIndex { .. } => "bad_active_index",
            Error::EmptyModel => "empty_model",
            Error::NoConvergence { .. } => "no_convergence",
            Error::DegenerateResponse => "degenerate_response",
            Error::InfeasibleInit { .. } => "infeasible_init",
            Error::InconsistentSolution { .. } => "inconsistent_solution",
            Error::EmptyRange { .. } => "empty_range",
            Error::InsufficientDraws { .. } => "insufficient_draws",
            Error::BudgetExhausted { .. } => "budget_exhausted",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Numerical { .. } => "numerical",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::TomlParse(_) => "toml_parse",
        }
    }
}
