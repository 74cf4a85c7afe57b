use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("Mittag-Leffler evaluation did not converge (alpha={alpha}, beta={beta}, z={z})")]
    NonConvergence { alpha: f64, beta: f64, z: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "divergent integral: the kernel product carries tau^(2*alpha-2), which is not integrable \
         at tau=0 for alpha={alpha} <= 1/2; supply an explicit epsilon cutoff"
    )]
    DivergentGramian { alpha: f64 },

    #[error("singular endpoint: {0}")]
    SingularEndpoint(String),

    #[error("ill-posed linear system: {0}")]
    IllPosed(String),

    #[error("scenario has {} violation(s):\n  {}", .0.len(), .0.join("\n  "))]
    Scenario(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(String),
}
