use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("adjacency already has a diagonal entry at node {0}")]
    DiagonalPresent(usize),

    #[error("node {0} has zero degree; add self loops before normalizing")]
    ZeroDegree(usize),

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("k = {k} is outside (0, {max}]")]
    KOutOfRange { k: f64, max: f64 },

    #[error("need at least {need} nodes, got {got}")]
    TooFewNodes { need: usize, got: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("class {class} has {count} samples; at least {need} required")]
    ClassTooSmall { class: usize, count: usize, need: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}
