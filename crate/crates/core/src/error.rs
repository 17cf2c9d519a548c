use thiserror::Error;

/// Errors raised anywhere in the analysis and solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("surface u=const is not characteristic (B^u is non-singular)")]
    NotCharacteristic,

    #[error(
        "surface x=const not transverse: hypersurface equations unsolvable for ∂_x w (|det M| = {det:e})"
    )]
    NotTransverse { det: f64 },

    #[error("not reducible to canonical form with given chart: {0}")]
    NotReducible(String),

    #[error("no norm on Σ_T: criterion ii violated (C^u + C^x is not positive definite)")]
    NoNorm,

    #[error("estimate not guaranteed for T ≥ c/r (T = {t}, c/r = {t_max})")]
    BeyondHorizon { t: f64, t_max: f64 },

    #[error("system is not well posed; refusing to {0} (use --force to override)")]
    NotWellPosed(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value at u-level {level}, x-index {x_index}, transverse index {t_index}, component {component}")]
    NonFinite {
        level: usize,
        x_index: usize,
        t_index: usize,
        component: usize,
    },

    #[error("range error: {0}")]
    Range(String),
}

pub type Result<T> = std::result::Result<T, Error>;
