use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("damping coefficient not positive at t = {t}: h = {h}")]
    Positivity { t: f64, h: f64 },
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),
    #[error("initial state is the origin; only nontrivial solutions are supported")]
    Origin,
    #[error("step size underflow at t = {t} (h = {step:e})")]
    Stiffness { t: f64, step: f64 },
    #[error("curve is not a certified spiral: {0}")]
    NotSpiral(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("grid too large: {cells} cells exceeds limit {limit}")]
    Resolution { cells: u64, limit: u64 },
    #[error("curve too short for eps_min = {eps_min:e}: final-turn decrement {decrement:e} must be below eps_min/2")]
    Truncation { eps_min: f64, decrement: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
