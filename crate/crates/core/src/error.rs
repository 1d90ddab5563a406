use thiserror::Error;

/// Errors raised by the geometry, analysis and optimization kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {value} outside the domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid knot vector: {0}")]
    KnotVector(String),

    #[error("invalid NURBS definition: {0}")]
    Nurbs(String),

    #[error("knot refinement failed: {0}")]
    Refinement(String),

    #[error("singular local frame at (s, t) = ({s}, {t})")]
    SingularFrame { s: f64, t: f64 },

    #[error("singular Jacobian (det = {det:e}) at (s, t, zeta) = ({s}, {t}, {zeta})")]
    SingularJacobian { det: f64, s: f64, t: f64, zeta: f64 },

    #[error("element {element}: {source}")]
    Element {
        element: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error(
        "stiffness factorization failed with {near_zero_pivots} near-zero pivot(s); \
         the structure is probably insufficiently supported"
    )]
    Factorization { near_zero_pivots: usize },

    #[error("rank-deficient fitting system ({0}); try fewer control points")]
    RankDeficient(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
