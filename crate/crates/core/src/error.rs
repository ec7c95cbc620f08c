use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },

    #[error("empty distribution")]
    Empty,

    #[error("negative entry at ({row}, {col}): {value}")]
    NegativeEntry { row: usize, col: usize, value: String },

    #[error("entries sum to {sum}, deficit {deficit}")]
    SumNotOne { sum: String, deficit: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("conditional row {row} has no support")]
    PartialSupport { row: usize },

    #[error("greedy construction failed at round {round}, column {column}")]
    ConstructionFailed { round: usize, column: usize },

    #[error("LP too large: K = {k} exceeds cap {cap}")]
    TooLarge { k: usize, cap: usize },

    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),

    #[error("LP is infeasible")]
    Infeasible,

    #[error("policy has no entries for (s = {s}, x = {x})")]
    UnsupportedPair { s: usize, x: usize },

    #[error("block size {block} does not divide message length {length}")]
    BlockMismatch { block: usize, length: usize },

    #[error("desired message {desired} not in subset")]
    DesiredNotInSubset { desired: usize },

    #[error("bit ({message}, {bit}) out of range")]
    OutOfRange { message: usize, bit: usize },

    #[error("answers inconsistent with queries: {0}")]
    InconsistentAnswers(String),

    #[error("step at t = {t} does not match the schedule: {detail}")]
    ScheduleMismatch { t: usize, detail: String },

    #[error("posterior conditioning has zero mass at t = {t}")]
    DegeneratePosterior { t: usize },

    #[error("exact enumeration needs {states} states (cap {cap})")]
    ExactModeInfeasible { states: u128, cap: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("transport: {0}")]
    Transport(String),
}
