//! C++ emission: synchronised update blocks substituted into the
//! annotated traversal templates.

pub mod emit;
pub mod infer;
pub mod render;

use thiserror::Error;

use crate::analysis::Strategy;

pub use emit::{generate, render_coarse, render_rcu, substitute_annotations, EmittedCode, EmittedFile, Provenance};
pub use infer::{allocation_order, infer_l_value, infer_r_value, plan_allocations, plan_lock_order, BlockContext};
pub use render::{render_block, update_statement, RenderedBlock};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodegenError {
    #[error("no block {operation}::{block}")]
    UnknownBlock { operation: String, block: String },
    #[error("{operation}::{block}: node {node} has no mapping, no predecessor and is not allocated")]
    NoLValue {
        operation: String,
        block: String,
        node: String,
    },
    #[error("{operation}::{block}: no r-value for {node}->{field}")]
    NoRValue {
        operation: String,
        block: String,
        node: String,
        field: String,
    },
    #[error("{operation}::{block}: two nodes render as {lvalue}")]
    AmbiguousLValue {
        operation: String,
        block: String,
        lvalue: String,
    },
    #[error("{operation}::{block}: no validation entry")]
    MissingValidation { operation: String, block: String },
    #[error("{operation}::{block}: no steps to render")]
    EmptyBlock { operation: String, block: String },
    #[error("{operation}::{block}: structural relations are cyclic")]
    CyclicStructure { operation: String, block: String },
    #[error("{operation}::{block}: no accepted step order")]
    NoOrder { operation: String, block: String },
    #[error("unknown step {0}")]
    UnknownStep(String),
    #[error("no rendered block for anchor {anchor}")]
    MissingBlock { anchor: String },
    #[error("template lacks @@begin-traversal/@@end-traversal")]
    MissingTraversalMarkers,
    #[error("{wanted} rendering requested under strategy {found}")]
    WrongStrategy { wanted: Strategy, found: Strategy },
}
