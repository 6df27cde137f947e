use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The AP rate of a user exceeds its demand, so the BS leg would be negative.
    #[error("user {mu}: AP rate {x_ap} bit/s exceeds demand {demand} bit/s")]
    OverOffload { mu: usize, x_ap: f64, demand: f64 },

    #[error("SINR profile infeasible: sum theta/(1+theta) = {load} >= 1")]
    SinrInfeasible { load: f64 },

    #[error("rho profile infeasible: sum rho = {sum} >= 1")]
    RhoInfeasible { sum: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("segment does not cross the budget hyperplane (gap at start {start}, at end {end})")]
    NoCrossing { start: f64, end: f64 },

    #[error("no feasible point on the rho0 grid")]
    GlobalInfeasible,

    #[error("distributed solver requires w_ap >= b_bs (got w_ap = {w_ap} Hz, b_bs = {b_bs} Hz)")]
    AssumptionViolated { w_ap: f64, b_bs: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("unknown built-in instance `{0}` (expected mu4, mu8 or mu12)")]
    UnknownInstance(String),

    #[error("user {mu} coincides with the {node}")]
    DegenerateGeometry { mu: usize, node: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("scenario file, line {line} column {column}: {message}")]
    ScenarioParse { line: usize, column: usize, message: String },
}
