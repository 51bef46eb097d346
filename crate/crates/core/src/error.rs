use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum EquifullerError {
    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("group order {0} exceeds the configured cap {1}")]
    GroupTooLarge(usize, usize),

    #[error("ambiguous isotropy at point (residual {residual:.3e} within guard band of tol {tol:.3e})")]
    AmbiguousIsotropy { residual: f64, tol: f64 },

    #[error("tom Dieck vectors belong to different isotropy lattices")]
    LatticeMismatch,

    #[error("base point is an equilibrium (|rhs| = {0:.3e})")]
    EquilibriumPoint(f64),

    #[error("flow not transverse to the disc after {retries} shrink retries (margin {margin:.3e})")]
    TransversalityFailure { margin: f64, retries: usize },

    #[error("integration step underflow at t = {t} (last state recorded)")]
    StepFailure { t: f64, state: Vec<f64> },

    #[error("no return to the disc before t_max = {t_max}")]
    NoReturn { t_max: f64 },

    #[error("trajectory left the configured region at t = {t}")]
    EscapedTube { t: f64 },

    #[error("return-map hop count exceeded the limit {0}")]
    HopLimit(usize),

    #[error("start point outside the subdisc (distance {dist:.3e} > {radius:.3e})")]
    OutsideSubdisc { dist: f64, radius: f64 },

    #[error("periodic orbit not found: {0}")]
    NotFound(String),

    #[error("period {period} outside the window ({a}, {b})")]
    WindowRejected { period: f64, a: f64, b: f64 },

    #[error("period ratio T/p = {ratio} is not close to an integer")]
    AmbiguousPeriod { ratio: f64 },

    #[error("degenerate fixed point: |det(I - DP)| = {0:.3e} on a stratum")]
    DegenerateFixedPoint(f64),

    #[error("marks solve produced a non-integral coefficient for class {class}: {value}")]
    NonIntegralSolution { class: String, value: String },

    #[error("field has degenerate detected orbits; index indeterminate, perturb and re-run")]
    DegenerateField,

    #[error("additivity precondition unverified: {0}")]
    PreconditionUnverified(String),

    #[error("continuation stalled in lambda bracket [{0}, {1}]")]
    ContinuationStall(f64, f64),

    #[error("index trace not constant: differs across lambda bracket [{0}, {1}]")]
    InvarianceViolation(f64, f64),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, EquifullerError>;
