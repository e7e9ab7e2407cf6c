//! Derives lock-based concurrent versions of data-structure operations
//! from declarative sequential knowledge.

pub mod analysis;
pub mod cli;
pub mod bundle;
pub mod codegen;
pub mod kernel;
pub mod knowledge;
pub mod logic;
pub mod report;
pub mod simulator;
pub mod symbol;
