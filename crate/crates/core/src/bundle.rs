//! Knowledge sets: a theory, operations and optional mappings and
//! templates, loaded from a directory or from the copies built in.
//!
//! Layout of a set directory:
//!
//! ```text
//! theory.lp  operations.lp  [mappings.lp]  [templates/*.cpp]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::kernel::Model;
use crate::knowledge::{
    parse_mappings, parse_operations, parse_template, parse_theory, validate_knowledge, CodeTemplate, Diagnostic,
    KnowledgeError, MappingTable, Severity,
};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{file}: {source}")]
    Knowledge {
        file: String,
        #[source]
        source: KnowledgeError,
    },
    #[error("{file}: {message}")]
    Invalid { file: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no built-in knowledge set named {0}")]
    UnknownBundle(String),
}

#[derive(Debug, Clone)]
pub struct NamedTemplate {
    /// File stem, e.g. `insert` for `templates/insert.cpp`.
    pub name: String,
    pub template: CodeTemplate,
}

#[derive(Debug, Clone)]
pub struct KnowledgeSet {
    pub name: String,
    pub model: Model,
    pub mappings: MappingTable,
    pub templates: Vec<NamedTemplate>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Raw texts of one set.
pub struct Sources<'a> {
    pub theory: &'a str,
    pub operations: &'a str,
    pub mappings: Option<&'a str>,
    pub templates: Vec<(String, String)>,
}

pub const BUNDLED: [&str; 4] = ["linked_list", "external_bst", "internal_bst", "external_rb"];

macro_rules! set_file {
    ($set:literal, $file:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/knowledge/", $set, "/", $file))
    };
}

fn bundled_sources(name: &str) -> Option<Sources<'static>> {
    let t = |n: &str, s: &str| (n.to_string(), s.to_string());
    Some(match name {
        "linked_list" => Sources {
            theory: set_file!("linked_list", "theory.lp"),
            operations: set_file!("linked_list", "operations.lp"),
            mappings: Some(set_file!("linked_list", "mappings.lp")),
            templates: vec![
                t("insert", set_file!("linked_list", "templates/insert.cpp")),
                t("delete", set_file!("linked_list", "templates/delete.cpp")),
            ],
        },
        "external_bst" => Sources {
            theory: set_file!("external_bst", "theory.lp"),
            operations: set_file!("external_bst", "operations.lp"),
            mappings: Some(set_file!("external_bst", "mappings.lp")),
            templates: vec![
                t("insert", set_file!("external_bst", "templates/insert.cpp")),
                t("delete", set_file!("external_bst", "templates/delete.cpp")),
            ],
        },
        "internal_bst" => Sources {
            theory: set_file!("internal_bst", "theory.lp"),
            operations: set_file!("internal_bst", "operations.lp"),
            mappings: Some(set_file!("internal_bst", "mappings.lp")),
            templates: vec![
                t("insert", set_file!("internal_bst", "templates/insert.cpp")),
                t("delete", set_file!("internal_bst", "templates/delete.cpp")),
            ],
        },
        "external_rb" => Sources {
            theory: set_file!("external_rb", "theory.lp"),
            operations: set_file!("external_rb", "operations.lp"),
            mappings: None,
            templates: vec![],
        },
        _ => return None,
    })
}

impl KnowledgeSet {
    pub fn bundled(name: &str) -> Result<KnowledgeSet, LoadError> {
        let src = bundled_sources(name).ok_or_else(|| LoadError::UnknownBundle(name.to_string()))?;
        KnowledgeSet::from_sources(name, src)
    }

    pub fn from_sources(name: &str, src: Sources) -> Result<KnowledgeSet, LoadError> {
        let wrap = |file: &str| {
            let file = file.to_string();
            move |source| LoadError::Knowledge {
                file: file.clone(),
                source,
            }
        };
        let theory = parse_theory(src.theory).map_err(wrap("theory.lp"))?;
        let ops = parse_operations(src.operations).map_err(wrap("operations.lp"))?;
        let mappings = match src.mappings {
            Some(m) => parse_mappings(m).map_err(wrap("mappings.lp"))?,
            None => MappingTable::default(),
        };
        mappings.check_against(&ops).map_err(wrap("mappings.lp"))?;
        let diagnostics = validate_knowledge(&theory, &ops);
        if let Some(d) = diagnostics.iter().find(|d| d.severity == Severity::Error) {
            return Err(LoadError::Invalid {
                file: "operations.lp".into(),
                message: d.message.clone(),
            });
        }
        let mut templates = Vec::new();
        for (tname, text) in &src.templates {
            let template = parse_template(text).map_err(wrap(&format!("templates/{tname}.cpp")))?;
            templates.push(NamedTemplate {
                name: tname.clone(),
                template,
            });
        }
        Ok(KnowledgeSet {
            name: name.to_string(),
            model: Model::new(theory, ops),
            mappings,
            templates,
            diagnostics,
        })
    }

    /// Loads a set directory. A bare bundled name is accepted as well.
    pub fn load(path: &Path) -> Result<KnowledgeSet, LoadError> {
        if !path.exists() {
            if let Some(name) = path.to_str().filter(|n| BUNDLED.contains(n)) {
                return KnowledgeSet::bundled(name);
            }
        }
        let read = |p: PathBuf| {
            fs::read_to_string(&p).map_err(|source| LoadError::Io { path: p.clone(), source })
        };
        let theory = read(path.join("theory.lp"))?;
        let operations = read(path.join("operations.lp"))?;
        let mpath = path.join("mappings.lp");
        let mappings = if mpath.exists() { Some(read(mpath)?) } else { None };
        let mut templates = Vec::new();
        let tdir = path.join("templates");
        if tdir.is_dir() {
            let entries = fs::read_dir(&tdir).map_err(|source| LoadError::Io {
                path: tdir.clone(),
                source,
            })?;
            let mut files: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "cpp"))
                .collect();
            files.sort();
            for f in files {
                let stem = f.file_stem().unwrap_or_default().to_string_lossy().to_string();
                templates.push((stem, read(f)?));
            }
        }
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "knowledge".into());
        KnowledgeSet::from_sources(
            &name,
            Sources {
                theory: &theory,
                operations: &operations,
                mappings: mappings.as_deref(),
                templates,
            },
        )
    }
}
