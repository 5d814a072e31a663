use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Schema(String),

    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("link {a}-{b}: {reason}")]
    InvalidLink {
        a: String,
        b: String,
        reason: String,
    },

    #[error("topology is disconnected: node `{0}` is unreachable")]
    Disconnected(String),

    #[error("topology needs at least one {0} node")]
    MissingRole(&'static str),

    #[error("infeasible topology parameters: {0}")]
    InfeasibleParams(String),

    #[error("handle {0} was already released or invalidated by a reset")]
    StaleHandle(u64),

    #[error("cluster `{dc}` has {free} free slots, {requested} requested")]
    InsufficientSlots {
        dc: String,
        free: u32,
        requested: u32,
    },

    #[error("no candidate sites to choose from")]
    NoCandidates,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("q-table does not match evaluation setup: {0}")]
    QTableMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
