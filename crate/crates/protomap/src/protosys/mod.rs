//! Protographs, quasi-cyclic lifting and systematic GF(2) encoding.

mod base;
mod encoder;
mod lift;

pub use base::BaseMatrix;
pub use encoder::{build_encoder, SystematicEncoder};
pub use lift::{lift, LiftedCode};

use thiserror::Error as ThisError;

#[derive(Debug, Clone, PartialEq, Eq, ThisError)]
pub enum Error {
    #[error("base matrix has no rows")]
    EmptyMatrix,
    #[error("row lengths disagree with the declared dimensions")]
    DimensionMismatch,
    #[error("multiplicities must be non-negative")]
    NegativeMultiplicity,
    #[error("lifting factor must be positive")]
    InvalidLifting,
    #[error("column {0} has degree zero")]
    DisconnectedColumn(usize),
    #[error("column index {0} out of range")]
    ColumnIndexOutOfRange(usize),
    #[error("punctured and shortened sets overlap")]
    OverlappingMasks,
    #[error("shift list at ({row}, {col}) has {got} entries, expected {expected}")]
    ShiftListLength {
        row: usize,
        col: usize,
        expected: usize,
        got: usize,
    },
    #[error("duplicate shift modulo lifting factor at ({row}, {col})")]
    DuplicateShift { row: usize, col: usize },
    #[error("shift list given for zero entry at ({row}, {col})")]
    ShiftForZeroEntry { row: usize, col: usize },
    #[error("#shifts section covers {got} entries, expected {expected}")]
    ShiftSectionMismatch { expected: usize, got: usize },
    #[error("cannot place {mult} distinct shifts at ({row}, {col}) with lifting {lifting}")]
    TooManyParallelEdges {
        row: usize,
        col: usize,
        mult: usize,
        lifting: usize,
    },
    #[error("parity submatrix is rank deficient: rank {rank} of {rows}")]
    RankDeficient { rank: usize, rows: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}
