//! Substitution of rendered blocks into annotated templates.

use serde::Serialize;

use crate::analysis::{Strategy, SynthesisVerdict};
use crate::bundle::KnowledgeSet;
use crate::knowledge::template::{Marker, TokenKind};
use crate::knowledge::{CodeTemplate, MappingTable};

use super::infer::BlockContext;
use super::render::{render_block, RenderedBlock};
use super::CodegenError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub anchor: String,
    /// 1-based line range of the substituted text in the output.
    pub first_line: usize,
    pub last_line: usize,
    pub rendered: RenderedBlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmittedCode {
    pub text: String,
    pub strategy: Strategy,
    pub provenance: Vec<Provenance>,
}

/// What each token turns into.
enum Replacement<'a> {
    Block(&'a RenderedBlock),
    Line(&'static str),
    Drop,
}

fn find_block<'a>(
    blocks: &'a [RenderedBlock],
    mappings: &MappingTable,
    operation: &str,
    block: &str,
) -> Option<&'a RenderedBlock> {
    let op = mappings.operation_for_anchor(operation);
    blocks.iter().find(|b| b.operation == op && b.block == block)
}

/// Is the token at `pos` alone on its line?
fn alone_on_line(src: &str, pos: usize) -> bool {
    let start = src[..pos].rfind('\n').map_or(0, |i| i + 1);
    let end = src[pos..].find('\n').map_or(src.len(), |i| pos + i);
    src[start..pos].trim().is_empty() && src[pos..end].trim().is_empty()
}

fn emit<'b>(
    template: &CodeTemplate,
    strategy: Strategy,
    mut replace: impl FnMut(&TokenKind) -> Result<Replacement<'b>, CodegenError>,
) -> Result<EmittedCode, CodegenError> {
    let src = &template.source_text;
    let mut out = String::with_capacity(src.len() * 2);
    let mut provenance = Vec::new();
    let mut cursor = 0;
    for t in &template.tokens {
        out.push_str(&src[cursor..t.position]);
        cursor = t.position;
        let indent = template.indent_at(t.position).to_string();
        match replace(&t.kind)? {
            Replacement::Block(b) => {
                let first_line = out.matches('\n').count() + 1;
                let lines = b.lines();
                out.push_str(&lines.join(&format!("\n{indent}")));
                provenance.push(Provenance {
                    anchor: t.text(),
                    first_line,
                    last_line: first_line + lines.len() - 1,
                    rendered: b.clone(),
                });
            }
            Replacement::Line(s) => out.push_str(s),
            Replacement::Drop => {
                if alone_on_line(src, t.position) {
                    let keep = out.trim_end_matches([' ', '\t']).len();
                    out.truncate(keep);
                    if src[cursor..].starts_with('\n') {
                        cursor += 1;
                    } else if src[cursor..].starts_with("\r\n") {
                        cursor += 2;
                    }
                }
            }
        }
    }
    out.push_str(&src[cursor..]);
    Ok(EmittedCode {
        text: out,
        strategy,
        provenance,
    })
}

fn missing_anchor(operation: &str, block: &str) -> CodegenError {
    CodegenError::MissingBlock {
        anchor: format!("@@{operation}::{block}"),
    }
}

/// Replaces every anchor by its rendered block. Markers are dropped.
pub fn substitute_annotations(
    template: &CodeTemplate,
    blocks: &[RenderedBlock],
    mappings: &MappingTable,
) -> Result<EmittedCode, CodegenError> {
    emit(template, Strategy::FineGrained, |kind| match kind {
        TokenKind::Anchor { operation, block } => find_block(blocks, mappings, operation, block)
            .map(Replacement::Block)
            .ok_or_else(|| missing_anchor(operation, block)),
        TokenKind::Marker(_) => Ok(Replacement::Drop),
    })
}

/// RCU emission: read-side critical sections at the traversal markers
/// and `rcu_synchronize();` ahead of each block's updates.
pub fn render_rcu(
    template: &CodeTemplate,
    blocks: &[RenderedBlock],
    mappings: &MappingTable,
    strategy: Strategy,
) -> Result<EmittedCode, CodegenError> {
    if strategy != Strategy::Rcu {
        return Err(CodegenError::WrongStrategy {
            wanted: Strategy::Rcu,
            found: strategy,
        });
    }
    if template.traversal_markers().is_none() {
        return Err(CodegenError::MissingTraversalMarkers);
    }
    let synced: Vec<RenderedBlock> = blocks
        .iter()
        .map(|b| RenderedBlock {
            pre_update: vec!["rcu_synchronize();".into()],
            ..b.clone()
        })
        .collect();
    emit(template, Strategy::Rcu, |kind| match kind {
        TokenKind::Anchor { operation, block } => find_block(&synced, mappings, operation, block)
            .map(Replacement::Block)
            .ok_or_else(|| missing_anchor(operation, block)),
        TokenKind::Marker(Marker::BeginTraversal) => Ok(Replacement::Line("rcu_read_lock();")),
        TokenKind::Marker(Marker::EndTraversal) => Ok(Replacement::Line("rcu_read_unlock();")),
        TokenKind::Marker(_) => Ok(Replacement::Drop),
    })
}

/// Coarse-grained fallback: one global mutex guards every block.
pub fn render_coarse(
    template: &CodeTemplate,
    blocks: &[RenderedBlock],
    mappings: &MappingTable,
) -> Result<EmittedCode, CodegenError> {
    let global: Vec<RenderedBlock> = blocks
        .iter()
        .map(|b| RenderedBlock {
            lock_statements: vec!["global_mtx.lock();".into()],
            unlock_statements: vec!["global_mtx.unlock();".into()],
            ..b.clone()
        })
        .collect();
    let mut code = substitute_annotations(template, &global, mappings)?;
    code.strategy = Strategy::CoarseGrained;
    Ok(code)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmittedFile {
    /// Template stem, e.g. `insert`.
    pub name: String,
    pub code: EmittedCode,
}

/// Renders every template of the set under the verdict's strategy.
///
/// Fine-grained blocks use their first accepted step order. Under RCU or
/// coarse locking a block without an accepted order keeps its declared
/// step order.
pub fn generate(set: &KnowledgeSet, verdict: &SynthesisVerdict) -> Result<Vec<EmittedFile>, CodegenError> {
    let strategy = verdict.strategy;
    let mut files = Vec::new();
    for nt in &set.templates {
        let mut blocks = Vec::new();
        for a in nt.template.block_anchors() {
            let op = set.mappings.operation_for_anchor(&a.operation);
            let cx = BlockContext::new(&set.model, &set.mappings, op, &a.block)?;
            let bv = verdict.block(op, &a.block);
            let order = match bv.and_then(|b| b.order.clone()) {
                Some(o) => o,
                None if strategy == Strategy::FineGrained => {
                    return Err(CodegenError::NoOrder {
                        operation: op.to_string(),
                        block: a.block.clone(),
                    })
                }
                None => cx.spec.steps.clone(),
            };
            blocks.push(render_block(&cx, &order)?);
        }
        let code = match strategy {
            Strategy::FineGrained => substitute_annotations(&nt.template, &blocks, &set.mappings)?,
            Strategy::Rcu => render_rcu(&nt.template, &blocks, &set.mappings, strategy)?,
            Strategy::CoarseGrained => render_coarse(&nt.template, &blocks, &set.mappings)?,
        };
        files.push(EmittedFile {
            name: nt.name.clone(),
            code,
        });
    }
    Ok(files)
}
