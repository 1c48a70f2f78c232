use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} s outside series range [0, {duration}] s")]
    OutOfRange { t: f64, duration: f64 },

    #[error("CFL violation: dt = {dt} s exceeds admissible {max_dt} s")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("mooring line {line} taut at span {span:.3} m (limit {limit:.3} m)")]
    LineTaut { line: usize, span: f64, limit: f64 },

    #[error("trim did not converge after {iterations} iterations (residual {residual:e})")]
    TrimDiverged { iterations: usize, residual: f64 },

    #[error("QP infeasible: constraint {constraint} violated by {violation:e}")]
    QpInfeasible { constraint: usize, violation: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("optimization infeasible: {0}")]
    Infeasible(String),

    #[error("power demand {demand:.0} W exceeds available {available:.0} W (shortfall {:.0} W)", demand - available)]
    PowerShortfall { demand: f64, available: f64 },

    #[error("simulation failed at step {step}, turbine {turbine}: {source}")]
    Step {
        step: usize,
        turbine: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
