use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<Error> },

    #[error("{path}: {source}")]
    InFile { path: String, source: Box<Error> },

    #[error("unknown edge type `{0}`")]
    UnknownEdgeType(String),

    #[error("unknown node type `{0}`")]
    UnknownNodeType(String),

    #[error("unknown node {node_type}:{id}")]
    UnknownNode { node_type: String, id: String },

    #[error("missing weight on weighted edge type `{edge_type}`")]
    MissingWeight { edge_type: String },

    #[error("edge type `{edge_type}` is unweighted but a weight was given")]
    UnexpectedWeight { edge_type: String },

    #[error("weight {weight} outside [{min}, {max}] for edge type `{edge_type}`")]
    WeightOutOfRange {
        edge_type: String,
        weight: f64,
        min: f64,
        max: f64,
    },

    #[error("duplicate edge {edge_type} {src} -> {dst}")]
    DuplicateEdge {
        edge_type: String,
        src: String,
        dst: String,
    },

    #[error("meta-path type mismatch at step {step}: expected {expected}, found {found}")]
    TypeMismatch {
        step: usize,
        expected: String,
        found: String,
    },

    #[error("invalid meta-path: {0}")]
    MetaPath(String),

    #[error("cannot sample from an empty edge set")]
    EmptyEdgeSet,

    #[error("expansion of `{label}` aborted: projected {projected} entries exceeds cap {cap}")]
    ExpansionTooLarge {
        label: String,
        projected: u64,
        cap: u64,
    },

    #[error("empty relation `{0}`")]
    EmptyRelation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("entity type `{0}` is used with two different entity universes")]
    TypeCollision(String),

    #[error("training diverged: loss became non-finite at epoch {0}")]
    Diverged(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: String, source: Box<Error> },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn in_file(self, path: &std::path::Path) -> Self {
        Error::InFile {
            path: path.display().to_string(),
            source: Box::new(self),
        }
    }

    pub(crate) fn at_line(self, line: usize) -> Self {
        match self {
            e @ (Error::Parse { .. } | Error::AtLine { .. }) => e,
            e => Error::AtLine {
                line,
                source: Box::new(e),
            },
        }
    }
}
