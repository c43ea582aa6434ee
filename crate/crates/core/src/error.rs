use crate::moments::MomentIndex;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("undefined input: {0}")]
    UndefinedInput(&'static str),

    /// The two polariton modes coalesced (exceptional point); the mode
    /// decomposition has no inverse there.
    #[error("degenerate polariton modes: |a+ b- - a- b+| = {discriminant:.3e}")]
    DegenerateModes { discriminant: f64 },

    #[error("moment {0} missing from the requested set")]
    MissingMoment(MomentIndex),

    #[error("non-finite state in trajectory {trajectory} at t = {t:.6e} s")]
    NonFiniteState { trajectory: usize, t: f64 },

    #[error("step size underflow at t = {t:.6e} s (h = {h:.3e} s)")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("singular moment block at order {order}")]
    SingularBlock { order: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("metadata serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
