//! Differentiation machinery: time jets nested inside reverse-mode
//! accumulation over the network parameters.

mod jet;
mod tape;

pub use jet::{Jet2, Scalar};
pub use tape::{Block, Tape, Var};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AutodiffError {
    #[error("value was not recorded on this tape")]
    ForeignValue,
}
