//! Bit mappings, their constraint set, the pattern-search optimizer and
//! the finite-length interleaver realizing a fractional mapping.

mod interleave;
mod mapping;
mod search;
mod successive;

pub use interleave::Interleaver;
pub use mapping::{
    make_a, reference_mapping, BitMapping, FixedRows, MappingMode, CONSTRAINT_TOL,
};
pub use search::{pattern_search, project_feasible, PatternSearchOptions, PatternSearchResult};
pub use successive::{
    optimize_successive, LevelRecord, OptimizationTrace, SuccessiveOptions,
};

use thiserror::Error as ThisError;

#[derive(Debug, Clone, ThisError)]
pub enum Error {
    #[error("mapping dimensions are inconsistent")]
    BadDimensions,
    #[error("row {level} sums to {sum}, violating row balance")]
    RowBalance { level: usize, sum: f64 },
    #[error("column {col} sums to {sum}, violating the column simplex")]
    ColumnSimplex { col: usize, sum: f64 },
    #[error("column {col} has a negative entry")]
    NegativeEntry { col: usize },
    #[error("parity type {col} must carry bit level one exclusively")]
    ParityForcing { col: usize },
    #[error("{parity} parity types exceed the level-one row budget {budget}")]
    ParityBudget { parity: usize, budget: f64 },
    #[error("column {col} over-assigned: fixed rows already use {used}")]
    ColumnBudget { col: usize, used: f64 },
    #[error("level {level} assigned twice")]
    LevelFixedTwice { level: usize },
    #[error("ordering must be a set of valid levels")]
    BadOrdering,
    #[error("pattern search started from an infeasible point")]
    InfeasibleStart,
    #[error("mapping covers {mapping_bits} bits but the code transmits {code_bits}")]
    CodeMappingMismatch {
        mapping_bits: usize,
        code_bits: usize,
    },
    #[error("could not balance the per-level bit totals")]
    UnbalancedRealization,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}
