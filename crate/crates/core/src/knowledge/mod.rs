//! Loading of the user-supplied knowledge: background theory, operation
//! knowledge, annotated code templates and variable mappings.

pub mod mappings;
pub mod operations;
pub mod syntax;
pub mod template;
pub mod theory;
pub mod validate;

use thiserror::Error;

pub use mappings::{parse_mappings, MappingTable};
pub use operations::{parse_operations, BlockSpec, GroundStep, OperationSpec, Operations, StepKind};
pub use syntax::SyntaxError;
pub use template::{parse_template, CodeTemplate};
pub use theory::{parse_theory, KeyScheme, ShapeFamily, Theory};
pub use validate::{validate_knowledge, Diagnostic, Severity};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KnowledgeError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("rules are not stratifiable: negative cycle through {}", cycle.join(", "))]
    Stratification { cycle: Vec<String> },
    #[error("undeclared predicate {name}")]
    UndeclaredPredicate { name: String },
    #[error("predicate {predicate} used with arity {found}, expected {expected}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("unsafe rule `{rule}`: {detail}")]
    UnsafeRule { rule: String, detail: String },
    #[error("invariant {name} is neither a fluent nor derived from fluents")]
    InvariantNotFluent { name: String },
    #[error("unknown step kind {name}")]
    UnknownStepKind { name: String },
    #[error("step {step} in {operation}::{block} references node {node} absent from the precondition")]
    StepNodeNotInPrecondition {
        operation: String,
        block: String,
        step: String,
        node: String,
    },
    #[error("{0}")]
    Operations(String),
    #[error("template: {0}")]
    Template(String),
    #[error("duplicate mapping for {operation}::{block} node {node}")]
    DuplicateMapping {
        operation: String,
        block: String,
        node: String,
    },
    #[error("validation entry for unknown block {operation}::{block}")]
    UnknownValidationBlock { operation: String, block: String },
    #[error("mappings: {0}")]
    Mappings(String),
}
