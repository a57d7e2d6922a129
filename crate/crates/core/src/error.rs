use thiserror::Error;

use crate::process::ActivityKind;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown stream purpose '{0}'")]
    UnknownPurpose(String),
    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),
    #[error("case already terminal")]
    CaseTerminal,
    #[error("activity not enabled: {0}")]
    ActivityNotEnabled(ActivityKind),
    #[error("interest rate not set")]
    MissingInterestRate,
    #[error("case is not terminal")]
    NotTerminal,
    #[error("illegal action '{action}'; allowed: {allowed:?}")]
    IllegalAction { action: String, allowed: Vec<String> },
    #[error("no decision pending")]
    NoPendingDecision,
    #[error("external action required")]
    ExternalActionRequired,
    #[error("degenerate baseline: bank profits sum to zero")]
    DegenerateBaseline,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("rank-deficient; increase λ")]
    RankDeficient,
    #[error("model has not been fitted")]
    UnfittedModel,
    #[error("k = {k} exceeds the {distinct} distinct vectors")]
    TooManyClusters { k: usize, distinct: usize },
    #[error("unknown policy '{0}'")]
    UnknownPolicy(String),
    #[error("unknown intervention '{0}'")]
    UnknownIntervention(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
