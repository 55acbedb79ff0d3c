use thiserror::Error;

/// Errors raised across the homogenization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("invalid elastic constants: E = {e}, nu = {nu}")]
    InvalidElastic { e: f64, nu: f64 },

    #[error("invalid material parameters: {0}")]
    InvalidParams(String),

    /// The regularized softening branch would have to run backwards.
    #[error("{branch} constitutive snap-back at characteristic length {length} m")]
    SnapBack { branch: &'static str, length: f64 },

    #[error("abscissa {x} outside Bezier segment [{lo}, {hi}]")]
    OutOfSegment { x: f64, lo: f64, hi: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("Newton solver diverged at t = {t} after {bisections} bisections")]
    Diverged { t: f64, bisections: u32 },

    #[error("strain block is rank deficient (rank {rank}, need 3)")]
    RankDeficient { rank: usize },

    #[error("matrix is singular")]
    Singular,

    #[error("parameter `{name}` = {value} outside bounds [{lo}, {hi}]")]
    OutOfBounds {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("optimizer made no progress in the first {evaluations} evaluations")]
    NoProgress { evaluations: usize },

    #[error("infeasible starting point, violated constraints: {0:?}")]
    Infeasible(Vec<String>),

    #[error("malformed input {what}: {message}")]
    Parse { what: String, message: String },

    #[error("missing field `{0}`")]
    MissingField(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
