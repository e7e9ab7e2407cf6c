//! Annotated code templates.
//!
//! A template is opaque source text carrying `@@op::block` anchors and
//! `@@begin-…`/`@@end-…` markers. Tokens are cut out of the text and
//! remembered by byte position so that the rest is kept byte-exact.

use serde::Serialize;

use super::KnowledgeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marker {
    BeginTraversal,
    EndTraversal,
    BeginDestructiveUpdate,
    EndDestructiveUpdate,
}

impl Marker {
    pub fn token(self) -> &'static str {
        match self {
            Marker::BeginTraversal => "@@begin-traversal",
            Marker::EndTraversal => "@@end-traversal",
            Marker::BeginDestructiveUpdate => "@@begin-destructive-update",
            Marker::EndDestructiveUpdate => "@@end-destructive-update",
        }
    }

    fn from_name(name: &str) -> Option<Marker> {
        Some(match name {
            "begin-traversal" => Marker::BeginTraversal,
            "end-traversal" => Marker::EndTraversal,
            "begin-destructive-update" => Marker::BeginDestructiveUpdate,
            "end-destructive-update" => Marker::EndDestructiveUpdate,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum TokenKind {
    Anchor { operation: String, block: String },
    Marker(Marker),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    /// Byte offset into `source_text`.
    pub position: usize,
    pub kind: TokenKind,
}

impl Token {
    pub fn text(&self) -> String {
        match &self.kind {
            TokenKind::Anchor { operation, block } => format!("@@{operation}::{block}"),
            TokenKind::Marker(m) => m.token().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CodeTemplate {
    /// The template with every token removed.
    pub source_text: String,
    /// Tokens in their original order.
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Anchor {
    pub operation: String,
    pub block: String,
    pub position: usize,
}

impl CodeTemplate {
    pub fn block_anchors(&self) -> Vec<Anchor> {
        self.tokens
            .iter()
            .filter_map(|t| match &t.kind {
                TokenKind::Anchor { operation, block } => Some(Anchor {
                    operation: operation.clone(),
                    block: block.clone(),
                    position: t.position,
                }),
                TokenKind::Marker(_) => None,
            })
            .collect()
    }

    fn marker_pair(&self, begin: Marker, end: Marker) -> Option<(usize, usize)> {
        let find = |m: Marker| {
            self.tokens
                .iter()
                .find(|t| t.kind == TokenKind::Marker(m))
                .map(|t| t.position)
        };
        Some((find(begin)?, find(end)?))
    }

    pub fn traversal_markers(&self) -> Option<(usize, usize)> {
        self.marker_pair(Marker::BeginTraversal, Marker::EndTraversal)
    }

    pub fn destructive_markers(&self) -> Option<(usize, usize)> {
        self.marker_pair(Marker::BeginDestructiveUpdate, Marker::EndDestructiveUpdate)
    }

    /// Re-inserts every token at its recorded position.
    pub fn reconstruct(&self) -> String {
        let mut out = String::with_capacity(self.source_text.len() + 32 * self.tokens.len());
        let mut at = 0;
        for t in &self.tokens {
            out.push_str(&self.source_text[at..t.position]);
            out.push_str(&t.text());
            at = t.position;
        }
        out.push_str(&self.source_text[at..]);
        out
    }

    /// Leading whitespace of the line containing byte `position`.
    pub fn indent_at(&self, position: usize) -> &str {
        let line_start = self.source_text[..position].rfind('\n').map_or(0, |i| i + 1);
        let line = &self.source_text[line_start..];
        let width = line.len() - line.trim_start_matches([' ', '\t']).len();
        &line[..width]
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

pub fn parse_template(text: &str) -> Result<CodeTemplate, KnowledgeError> {
    let mut source = String::with_capacity(text.len());
    let mut tokens = Vec::new();
    let mut rest = text;
    let mut line = 1;
    while let Some(at) = rest.find("@@") {
        source.push_str(&rest[..at]);
        line += rest[..at].matches('\n').count();
        let after = &rest[at + 2..];
        let name_len = after.find(|c| !is_name_char(c)).unwrap_or(after.len());
        let name = &after[..name_len];
        let tail = &after[name_len..];
        let malformed = |why: &str| {
            KnowledgeError::Template(format!("line {line}: malformed annotation @@{name}{why}"))
        };
        let (kind, consumed) = if let Some(block_part) = tail.strip_prefix("::") {
            let block_len = block_part
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .unwrap_or(block_part.len());
            if name.is_empty() || block_len == 0 || name.contains('-') {
                return Err(malformed("::"));
            }
            (
                TokenKind::Anchor {
                    operation: name.to_string(),
                    block: block_part[..block_len].to_string(),
                },
                name_len + 2 + block_len,
            )
        } else if tail.starts_with(':') {
            return Err(malformed(": (anchors use `::`)"));
        } else {
            match Marker::from_name(name) {
                Some(m) => (TokenKind::Marker(m), name_len),
                None => return Err(malformed(" (expected @@<operation>::<block> or a marker)")),
            }
        };
        tokens.push(Token {
            position: source.len(),
            kind,
        });
        rest = &after[consumed..];
    }
    source.push_str(rest);
    let template = CodeTemplate {
        source_text: source,
        tokens,
    };
    check_markers(&template)?;
    Ok(template)
}

fn check_markers(t: &CodeTemplate) -> Result<(), KnowledgeError> {
    let count = |m: Marker| t.tokens.iter().filter(|x| x.kind == TokenKind::Marker(m)).count();
    let index = |m: Marker| t.tokens.iter().position(|x| x.kind == TokenKind::Marker(m));
    for (b, e) in [
        (Marker::BeginTraversal, Marker::EndTraversal),
        (Marker::BeginDestructiveUpdate, Marker::EndDestructiveUpdate),
    ] {
        if count(b) > 1 || count(e) > 1 {
            return Err(KnowledgeError::Template(format!("{} appears more than once", b.token())));
        }
        match (index(b), index(e)) {
            (None, None) => {}
            (Some(i), Some(j)) if i < j => {}
            (Some(_), Some(_)) => {
                return Err(KnowledgeError::Template(format!(
                    "{} precedes {}",
                    e.token(),
                    b.token()
                )))
            }
            _ => {
                return Err(KnowledgeError::Template(format!(
                    "unbalanced {} / {}",
                    b.token(),
                    e.token()
                )))
            }
        }
    }
    if let (Some(bt), Some(bd)) = (
        index(Marker::BeginTraversal),
        index(Marker::BeginDestructiveUpdate),
    ) {
        if bt > bd {
            return Err(KnowledgeError::Template(
                "traversal markers must precede the destructive-update markers".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const INSERT: &str = "bool insert(int key){
  while(curr->left != NULL && curr->right != NULL){
    if(parent->left == curr && key < curr->key){
\t\t  @@insert_ext_tree::block1
\t }
    if(parent->left == curr && key >= curr->key){
\t\t@@insert_ext_tree::block2
      }
    if(parent->right == curr  && key < curr->key ){
\t\t  @@insert_ext_tree::block3
\t }
    if(parent->right == curr && key >= curr->key){
            @@insert_ext_tree::block4
     }
\treturn false;
}}";

    #[test]
    fn anchors_are_extracted() {
        let t = parse_template(INSERT).unwrap();
        let anchors = t.block_anchors();
        assert_eq!(anchors.len(), 4);
        assert!(anchors.iter().all(|a| a.operation == "insert_ext_tree"));
        let blocks: Vec<_> = anchors.iter().map(|a| a.block.as_str()).collect();
        assert_eq!(blocks, ["block1", "block2", "block3", "block4"]);
        assert_eq!(t.reconstruct(), INSERT);
        assert_eq!(t.indent_at(anchors[0].position), "\t\t  ");
    }

    #[test]
    fn plain_text_is_unchanged() {
        let t = parse_template("int f() { return 1; }\n").unwrap();
        assert!(t.tokens.is_empty());
        assert_eq!(t.source_text, "int f() { return 1; }\n");
    }

    #[test]
    fn single_colon_is_rejected() {
        assert!(matches!(
            parse_template("x; @@foo:block1\n"),
            Err(KnowledgeError::Template(_))
        ));
    }

    #[test]
    fn unbalanced_markers_are_rejected() {
        assert!(parse_template("@@begin-traversal\nx;").is_err());
        assert!(parse_template("@@end-traversal x; @@begin-traversal").is_err());
        let ok = parse_template("@@begin-traversal a; @@end-traversal @@begin-destructive-update b; @@end-destructive-update").unwrap();
        assert!(ok.traversal_markers().is_some());
        assert!(ok.destructive_markers().is_some());
    }
}
