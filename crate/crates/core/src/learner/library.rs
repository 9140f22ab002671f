use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsl::{parse_program, validate_program, DslError, FunctionDef, Program};
use crate::strips::DomainDefinition;

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("library does not parse: {0}")]
    Dsl(#[from] DslError),
    #[error("library entry `{name}` has no description")]
    MissingDescription { name: String },
    #[error("library entries and functions disagree: entry `{entry}`, function `{function}`")]
    EntryMismatch { entry: String, function: String },
    #[error("library is for domain `{found}`, expected `{expected}`")]
    WrongDomain { expected: String, found: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
}

/// One learned action and the guidance shown to the agent about it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub name: String,
    pub source: String,
    pub description: String,
    pub usage_example: String,
    /// Usage advice from note-writing revisions, oldest first.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl LibraryEntry {
    fn from_function(f: &FunctionDef) -> Self {
        LibraryEntry {
            name: f.name.clone(),
            source: f.source.clone(),
            description: String::new(),
            usage_example: String::new(),
            notes: Vec::new(),
        }
    }
}

/// How the library came to be: the chosen score of each training round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub iterations: usize,
    pub scores: Vec<f64>,
}

/// Learned actions plus their instructions, as persisted after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionLibrary {
    pub domain: String,
    pub version: usize,
    pub entries: Vec<LibraryEntry>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl ActionLibrary {
    pub fn empty(domain: impl Into<String>) -> Self {
        ActionLibrary { domain: domain.into(), version: 0, entries: Vec::new(), provenance: Provenance::default() }
    }

    /// One entry per function, with descriptions still to be written.
    pub fn from_program(domain: impl Into<String>, program: &Program) -> Self {
        ActionLibrary { entries: program.functions.iter().map(LibraryEntry::from_function).collect(), ..Self::empty(domain) }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, name: &str) -> Option<&LibraryEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    /// All sources as one program text.
    pub fn source(&self) -> String {
        self.entries.iter().map(|e| e.source.trim_end()).collect::<Vec<_>>().join("\n\n")
    }

    pub fn program(&self) -> Result<Program, DslError> {
        parse_program(&self.source())
    }

    /// Parses and checks the library against `domain`: it must be for that
    /// domain, its sources must form a valid program whose functions match
    /// the entries one to one, and every entry needs a description.
    pub fn validate(&self, domain: &DomainDefinition) -> Result<Program, LibraryError> {
        if self.domain != domain.name {
            return Err(LibraryError::WrongDomain { expected: domain.name.clone(), found: self.domain.clone() });
        }
        let program = self.validate_sources(domain)?;
        if let Some(e) = self.entries.iter().find(|e| e.description.trim().is_empty()) {
            return Err(LibraryError::MissingDescription { name: e.name.clone() });
        }
        Ok(program)
    }

    /// [`ActionLibrary::validate`] without the description requirement.
    pub fn validate_sources(&self, domain: &DomainDefinition) -> Result<Program, LibraryError> {
        let program = self.program()?;
        validate_program(&program, domain)?;
        if program.functions.len() != self.entries.len() {
            let entry = self.entries.get(program.functions.len()).map_or("", |e| e.name.as_str());
            let function = program.functions.get(self.entries.len()).map_or("", |f| f.name.as_str());
            return Err(LibraryError::EntryMismatch { entry: entry.into(), function: function.into() });
        }
        for (entry, f) in self.entries.iter().zip(&program.functions) {
            if entry.name != f.name {
                return Err(LibraryError::EntryMismatch { entry: entry.name.clone(), function: f.name.clone() });
            }
        }
        Ok(program)
    }

    /// Merges revised functions: same-named entries take the new source and
    /// lose their description and usage example (notes stay), unknown names
    /// become new entries. Returns the names whose guidance must be
    /// regenerated, in program order.
    pub fn apply_update(&mut self, program: &Program) -> Vec<String> {
        let mut changed = Vec::new();
        for f in &program.functions {
            match self.entries.iter_mut().find(|e| e.name == f.name) {
                Some(entry) if entry.source.trim_end() == f.source.trim_end() => {}
                Some(entry) => {
                    entry.source = f.source.clone();
                    entry.description.clear();
                    entry.usage_example.clear();
                    changed.push(f.name.clone());
                }
                None => {
                    self.entries.push(LibraryEntry::from_function(f));
                    changed.push(f.name.clone());
                }
            }
        }
        changed
    }

    /// The learned-action instructions for the agent prompt: each
    /// description followed by its notes.
    pub fn instructions_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| {
                let mut text = e.description.trim().to_string();
                for note in &e.notes {
                    text.push_str(&format!("\nNote on {}: {}", e.name, note.trim()));
                }
                text
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    /// The usage examples for the agent prompt.
    pub fn usage_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| e.usage_example.trim())
            .filter(|u| !u.is_empty())
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("libraries always serialize");
        text.push('\n');
        text
    }

    /// Writes the library as pretty JSON, replacing `path` atomically.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LibraryError> {
        let path = path.as_ref();
        let io = |source| LibraryError::Io { path: path.to_path_buf(), source };
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(self.to_json().as_bytes()).map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LibraryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LibraryError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|source| LibraryError::Json { path: path.to_path_buf(), source })
    }
}
