use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A token outside the closed label vocabulary.
    #[error("unknown {kind} `{token}`")]
    UnknownToken { kind: &'static str, token: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("ontology cycle: {}", .0.join(" -> "))]
    OntologyCycle(Vec<String>),

    #[error("dangling ontology edge endpoint `{0}`")]
    DanglingEdge(String),

    #[error("duplicate selector `{0}` in l-mapping")]
    DuplicateSelector(String),

    #[error("malformed entry {index}: {message}")]
    Entry { index: usize, message: String },

    #[error("line {line}: {message}")]
    Line { line: usize, message: String },

    #[error("not a decimal coordinate: `{0}`")]
    Coordinate(String),

    #[error("observation references unknown record `{0}`")]
    DanglingRecord(String),

    #[error("flows must be unique per item; `{0}` appears more than once")]
    DuplicateFlow(String),

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline stage failed; carries the stage name.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    pub(crate) fn unknown(kind: &'static str, token: impl Into<String>) -> Self {
        Error::UnknownToken {
            kind,
            token: token.into(),
        }
    }
}

/// Reads a file, mapping a missing path to [`Error::NotFound`].
pub(crate) fn read_file(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path.to_path_buf())
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    let bytes = read_file(path)?;
    String::from_utf8(bytes).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}
