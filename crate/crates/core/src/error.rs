use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("state {state} can avoid difficulty forever under some policy; termination is not guaranteed")]
    NonTerminating { state: usize },

    #[error(
        "linear solve did not converge (residual norm {residual:e}) after both solver variants"
    )]
    LinearSolve { residual: f64 },

    #[error("policy iteration round {round}: {source}")]
    PolicyIteration {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("policy iteration did not stabilize within {rounds} rounds")]
    PolicyIterationCap { rounds: usize },

    #[error("value iteration exceeded {iterations} sweeps (last change {last_change:e})")]
    ValueIterationCap { iterations: usize, last_change: f64 },

    #[error("induced Markov chain has {classes} recurrent classes; the ratio oracle needs a unichain policy")]
    Multichain { classes: usize },

    #[error("expected difficulty per step is zero under this policy")]
    ZeroDifficulty,

    #[error("model too large for the oracle: {states} states (limit {limit})")]
    OracleTooLarge { states: usize, limit: usize },

    #[error("singular matrix in dense solve")]
    Singular,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("model exceeds the memory budget ({states} states, budget allows {limit})")]
    MemoryBudget { states: usize, limit: usize },

    #[error("unknown block reference {0}")]
    UnknownBlock(String),

    #[error("DAG fixture line {line}: {message}")]
    Fixture { line: usize, message: String },

    #[error("policy is not legal: {0}")]
    IllegalPolicy(String),

    #[error("simulation accumulated no difficulty after {steps} steps")]
    NoDifficulty { steps: u64 },

    #[error("config: {0}")]
    Config(String),

    #[error("schema: {0}")]
    Schema(String),

    #[error("solve failed for {params}: {source}")]
    Solve {
        params: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
