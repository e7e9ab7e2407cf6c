//! JSON artifacts written by the command-line driver.
//!
//! Every file carries `schema_version`, the command that produced it and
//! the knowledge set name; the remaining fields depend on the command.

use serde::Serialize;

use crate::analysis::instance::{Applicability, Rejected};
use crate::analysis::{AdequacyVerdict, InstanceGraph, LockSet, OrderCheck, SynthesisVerdict};
use crate::codegen::Provenance;
use crate::simulator::{ExploreReport, Violation};
use crate::symbol::Sym;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub knowledge: &'a str,
    #[serde(flatten)]
    pub body: T,
}

impl<'a, T: Serialize> Report<'a, T> {
    pub fn new(command: &'a str, knowledge: &'a str, body: T) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command,
            knowledge,
            body,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Serialize)]
pub struct InstanceReport {
    pub max_nodes: usize,
    pub found: bool,
    pub instance: Vec<String>,
    pub facts: Vec<String>,
    pub key_order: String,
    pub applicability: Vec<Applicability>,
    pub rejected: Vec<Rejected>,
}

impl InstanceReport {
    pub fn found(g: &InstanceGraph, max_nodes: usize, applicability: Vec<Applicability>, rejected: Vec<Rejected>) -> Self {
        InstanceReport {
            max_nodes,
            found: true,
            instance: g.structural_facts().iter().map(|f| f.to_string()).collect(),
            facts: g.describe(),
            key_order: g.order_text(),
            applicability,
            rejected,
        }
    }

    pub fn not_found(max_nodes: usize, rejected: Vec<Rejected>) -> Self {
        InstanceReport {
            max_nodes,
            found: false,
            instance: vec![],
            facts: vec![],
            key_order: String::new(),
            applicability: vec![],
            rejected,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BlockOrders {
    pub operation: Sym,
    pub block: Sym,
    pub bindings: usize,
    pub accepted: Vec<Vec<String>>,
    pub checks: Vec<OrderCheck>,
}

#[derive(Debug, Serialize)]
pub struct OrderReport {
    pub instance: Vec<String>,
    pub blocks: Vec<BlockOrders>,
}

#[derive(Debug, Serialize)]
pub struct BindingLocks {
    pub operation: Sym,
    pub block: Sym,
    pub binding: String,
    /// Whether the locks came from `--strategy-override`.
    pub overridden: bool,
    pub locks: LockSet,
    pub adequacy: AdequacyVerdict,
}

#[derive(Debug, Serialize)]
pub struct LocksReport {
    pub instance: Vec<String>,
    pub horizon: usize,
    pub bindings: Vec<BindingLocks>,
}

#[derive(Debug, Serialize)]
pub struct EmittedReport {
    pub file: String,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Serialize)]
pub struct SynthReport<'v> {
    pub verdict: &'v SynthesisVerdict,
    pub emitted: Vec<String>,
    pub codegen_error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub seed: u64,
    pub excluded: Vec<String>,
    pub exploration: ExploreReport,
    /// The failing violations, a subset of `exploration.violations`.
    pub failures: Vec<Violation>,
}
