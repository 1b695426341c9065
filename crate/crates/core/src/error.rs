use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The speed `|c_θ|` fell below the regularity threshold at a quadrature
    /// site. `t` is absent for single curves.
    #[error("degenerate curve: |c_theta| = {speed:e} at t = {t:?}, theta = {theta}")]
    DegenerateCurve {
        t: Option<f64>,
        theta: f64,
        speed: f64,
    },

    #[error("least-squares fit is rank deficient: {points} samples for {controls} controls")]
    RankDeficient { points: usize, controls: usize },

    #[error("polygon edge {index} has zero length")]
    ZeroEdge { index: usize },

    #[error("non-finite objective value encountered")]
    NonFiniteValue,

    #[error("optimization failed at level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("matrix entry ({i}, {j}) failed and has no transpose fallback: {reason}")]
    MissingEntry { i: usize, j: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
