use thiserror::Error;

/// Partial state returned when an event cap interrupts a run.
#[derive(Debug, Clone)]
pub struct PartialRun {
    /// Simulation time reached when the cap fired.
    pub time: f64,
    /// Sites still active at that time.
    pub active: Vec<i64>,
    /// Events consumed so far.
    pub events: u64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("rate must be finite and non-negative, got {0}")]
    InvalidRate(f64),

    #[error("horizon must be finite and non-negative, got {0}")]
    InvalidHorizon(f64),

    #[error("window is empty or inverted: [{lo}, {hi}]")]
    InvalidWindow { lo: i64, hi: i64 },

    #[error("window has {sites} sites, oracle cap is {max}")]
    WindowTooLarge { sites: usize, max: usize },

    #[error("query time {requested} exceeds horizon {horizon}")]
    BeyondHorizon { requested: f64, horizon: f64 },

    #[error("site {site} lies outside window [{lo}, {hi}]")]
    SiteOutsideWindow { site: i64, lo: i64, hi: i64 },

    #[error("trajectory covers [0, {available}] but [{from}, {to}] was requested")]
    CoverageGap { available: f64, from: f64, to: f64 },

    #[error("uniformization needs {required} terms, budget is {budget}")]
    TruncationBudget { required: usize, budget: usize },

    #[error("iterative solver stalled at residual {residual:.3e} after {iterations} sweeps")]
    SolverStall { residual: f64, iterations: usize },

    #[error("event cap {cap} hit at time {:.6} with {} sites active", partial.time, partial.active.len())]
    EventCap { cap: u64, partial: Box<PartialRun> },

    #[error("dump line {line}: {reason}")]
    BadDump { line: usize, reason: String },

    #[error("config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
