use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("contraction ratio {index} = {value} is outside (0, 1)")]
    RatioOutOfRange { index: usize, value: f64 },

    #[error("a self-similar system needs at least two maps, got {count}")]
    TooFewMaps { count: usize },

    #[error("symbol {symbol} is outside 1..={symbols}")]
    SymbolOutOfRange { symbol: usize, symbols: usize },

    #[error("cannot parse address {0:?}")]
    BadAddress(String),

    #[error("bisection did not reach residual {tol:e} within {iterations} iterations")]
    ToleranceNotMet { tol: f64, iterations: usize },

    #[error("{nodes} nodes exceed the node budget of {budget}")]
    DepthTooLarge { nodes: u128, budget: usize },

    #[error("enumeration of 3^{stages} noise sequences exceeds the budget (max {max} stages)")]
    BudgetExceeded { stages: usize, max: usize },

    #[error("grid of {points} points exceeds the point budget of {budget}")]
    ResolutionOverflow { points: usize, budget: usize },

    #[error("unknown density family {0:?}")]
    UnknownFamily(String),

    #[error("invalid parameter: {0}")]
    BadParameters(String),

    #[error("density is degenerate: collapse probability {collapse_prob} leaves no mass above the threshold")]
    DegenerateDensity { collapse_prob: f64 },

    #[error(
        "deep regime reached at stage {stage} but xi_max <= delta_min/(2*delta_max + delta_min) fails: {xi_max} > {bound}"
    )]
    Case1ConditionViolated { stage: usize, xi_max: f64, bound: f64 },

    #[error("xi_max + epsilon/(1 - xi_max) < 1 fails: {lhs} >= 1")]
    ChaosConditionViolated { lhs: f64 },

    #[error("state outside the surviving case: prod_k + N_k = {value} is not in (0, 1)")]
    InvalidState { value: f64 },

    #[error("orbit entered (0, a) at stage {hit_stage} but no truncation by stage {stage}")]
    MaxStageExceeded { hit_stage: usize, stage: usize },

    #[error("horizon must be at least 1")]
    InvalidHorizon,

    #[error("fixed address sequence has {len} symbols but {needed} stages were requested")]
    SequenceTooShort { len: usize, needed: usize },
}

impl Error {
    /// True for violations of the analytic hypotheses (case-1 and tent conditions).
    pub fn is_condition_violation(&self) -> bool {
        matches!(
            self,
            Error::Case1ConditionViolated { .. } | Error::ChaosConditionViolated { .. }
        )
    }

    /// True for errors caused by a size or work budget.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::DepthTooLarge { .. }
                | Error::BudgetExceeded { .. }
                | Error::ResolutionOverflow { .. }
                | Error::MaxStageExceeded { .. }
                | Error::ToleranceNotMet { .. }
        )
    }
}
