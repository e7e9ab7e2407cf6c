//! Variable mappings, r-value mappings and validation snippets.
//!
//! Arguments are C++ fragments such as `target->key`, so entries are read
//! as raw text split on top-level commas instead of going through the
//! term reader.

use std::collections::BTreeSet;

use serde::Serialize;

use super::operations::Operations;
use super::KnowledgeError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VariableEntry {
    pub structure: String,
    pub operation: String,
    pub block: String,
    pub variable: String,
    pub node: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RValueEntry {
    pub structure: String,
    pub operation: String,
    pub block: String,
    pub field_access: String,
    pub expression: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationEntry {
    pub structure: String,
    pub operation: String,
    pub block: String,
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct MappingTable {
    pub variable_map: Vec<VariableEntry>,
    pub rvalue_map: Vec<RValueEntry>,
    pub validations: Vec<ValidationEntry>,
    /// Template operation name to knowledge operation name.
    pub anchors: Vec<(String, String)>,
}

impl MappingTable {
    pub fn is_empty(&self) -> bool {
        self.variable_map.is_empty()
            && self.rvalue_map.is_empty()
            && self.validations.is_empty()
            && self.anchors.is_empty()
    }

    pub fn variable_for(&self, op: &str, block: &str, node: &str) -> Option<&str> {
        self.variable_map
            .iter()
            .find(|e| e.operation == op && e.block == block && e.node == node)
            .map(|e| e.variable.as_str())
    }

    pub fn rvalue_for(&self, op: &str, block: &str, field_access: &str) -> Option<&str> {
        let want: String = field_access.split_whitespace().collect();
        self.rvalue_map
            .iter()
            .find(|e| {
                e.operation == op
                    && e.block == block
                    && e.field_access.split_whitespace().collect::<String>() == want
            })
            .map(|e| e.expression.as_str())
    }

    pub fn validation_for(&self, op: &str, block: &str) -> Option<&str> {
        self.validations
            .iter()
            .find(|e| e.operation == op && e.block == block)
            .map(|e| e.condition.as_str())
    }

    /// Knowledge operation an anchor's operation name refers to.
    pub fn operation_for_anchor<'a>(&'a self, anchor_op: &'a str) -> &'a str {
        self.anchors
            .iter()
            .find(|(a, _)| a == anchor_op)
            .map_or(anchor_op, |(_, op)| op.as_str())
    }

    /// Rejects validation entries naming blocks the operations lack.
    pub fn check_against(&self, ops: &Operations) -> Result<(), KnowledgeError> {
        for v in &self.validations {
            let known = ops.operations.iter().any(|o| {
                o.name.as_str() == v.operation && o.blocks.iter().any(|b| b.id.as_str() == v.block)
            });
            if !known {
                return Err(KnowledgeError::UnknownValidationBlock {
                    operation: v.operation.clone(),
                    block: v.block.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Splits the text into `(name, args)` entries.
fn entries(text: &str) -> Result<Vec<(String, Vec<String>, usize)>, KnowledgeError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_line = line;
        let mut name = String::new();
        while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
            name.push(chars[i]);
            i += 1;
        }
        if name.is_empty() || i >= chars.len() || chars[i] != '(' {
            return Err(KnowledgeError::Mappings(format!(
                "line {start_line}: expected an entry such as mapping(...)."
            )));
        }
        i += 1;
        let mut args = Vec::new();
        let mut cur = String::new();
        let mut depth = 0usize;
        let mut quote: Option<char> = None;
        loop {
            let Some(&c) = chars.get(i) else {
                return Err(KnowledgeError::Mappings(format!(
                    "line {start_line}: unterminated entry {name}"
                )));
            };
            i += 1;
            if c == '\n' {
                line += 1;
            }
            if let Some(q) = quote {
                if c == q {
                    quote = None;
                }
                cur.push(c);
                continue;
            }
            match c {
                '\'' | '"' => {
                    quote = Some(c);
                    cur.push(c);
                }
                '(' | '[' => {
                    depth += 1;
                    cur.push(c);
                }
                ')' | ']' if depth > 0 => {
                    depth -= 1;
                    cur.push(c);
                }
                ')' => {
                    args.push(cur.trim().to_string());
                    break;
                }
                ',' if depth == 0 => {
                    args.push(cur.trim().to_string());
                    cur.clear();
                }
                _ => cur.push(c),
            }
        }
        while i < chars.len() && chars[i].is_whitespace() && chars[i] != '\n' {
            i += 1;
        }
        if chars.get(i) != Some(&'.') {
            return Err(KnowledgeError::Mappings(format!(
                "line {start_line}: entry {name} must end with '.'"
            )));
        }
        i += 1;
        out.push((name, args, start_line));
    }
    Ok(out)
}

fn unquote(s: &str) -> String {
    let t = s.trim();
    let inner = if t.len() >= 2
        && ((t.starts_with('\'') && t.ends_with('\'')) || (t.starts_with('"') && t.ends_with('"')))
    {
        &t[1..t.len() - 1]
    } else {
        t
    };
    inner.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn parse_mappings(text: &str) -> Result<MappingTable, KnowledgeError> {
    let mut table = MappingTable::default();
    let mut seen = BTreeSet::new();
    for (name, args, line) in entries(text)? {
        let a: Vec<String> = args.iter().map(|s| unquote(s)).collect();
        match (name.as_str(), a.len()) {
            ("mapping", 5) => {
                let key = (a[1].clone(), a[2].clone(), a[4].clone());
                if !seen.insert(key) {
                    return Err(KnowledgeError::DuplicateMapping {
                        operation: a[1].clone(),
                        block: a[2].clone(),
                        node: a[4].clone(),
                    });
                }
                table.variable_map.push(VariableEntry {
                    structure: a[0].clone(),
                    operation: a[1].clone(),
                    block: a[2].clone(),
                    variable: a[3].clone(),
                    node: a[4].clone(),
                });
            }
            ("mapping_r_value", 5) => table.rvalue_map.push(RValueEntry {
                structure: a[0].clone(),
                operation: a[1].clone(),
                block: a[2].clone(),
                field_access: a[3].clone(),
                expression: a[4].clone(),
            }),
            ("validate", 4) => {
                if table
                    .validations
                    .iter()
                    .any(|v| v.operation == a[1] && v.block == a[2])
                {
                    return Err(KnowledgeError::Mappings(format!(
                        "line {line}: second validation for {}::{}",
                        a[1], a[2]
                    )));
                }
                table.validations.push(ValidationEntry {
                    structure: a[0].clone(),
                    operation: a[1].clone(),
                    block: a[2].clone(),
                    condition: a[3].clone(),
                })
            }
            ("anchor", 2) => table.anchors.push((a[0].clone(), a[1].clone())),
            _ => {
                return Err(KnowledgeError::Mappings(format!(
                    "line {line}: unknown entry {name}/{}",
                    a.len()
                )))
            }
        }
    }
    Ok(table)
}
