//! Dense matrix arithmetic and the reverse-mode differentiation tape.

mod matrix;
mod tape;

pub use matrix::Matrix;
pub use tape::{Gradients, NodeId, RowThresholdData, RowThresholdKind, Tape};
