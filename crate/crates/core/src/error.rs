use thiserror::Error;

/// Errors raised by the geometry, conformal and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} = {value} lies outside the open interval ({lo}, {hi})")]
    Domain {
        what: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error(
        "graph is not spacelike: margin {margin:.6} at node {node:?} (coordinates {coords:?})"
    )]
    NotSpacelike {
        node: Vec<usize>,
        coords: Vec<f64>,
        margin: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
