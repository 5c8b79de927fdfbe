use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("kernel table has negative sample {value} at index {index}")]
    NegativeSample { index: usize, value: f64 },

    #[error("kernel table is not even: samples {index} and its mirror differ by {gap:e}")]
    AsymmetricTable { index: usize, gap: f64 },

    #[error("kernel under-resolved: halfwidth/h = {ratio:.3} < 8")]
    UnderResolved { ratio: f64 },

    #[error("reaction has no positive zero (R0 = {r0})")]
    NoPositiveRoot { r0: f64 },

    #[error("c(lambda) has no interior minimum: {0}")]
    NoMinimum(String),

    #[error("speed {c} is not above the critical speed {c_k}")]
    SubcriticalSpeed { c: f64, c_k: f64 },

    #[error("complex Newton iteration failed, residual {residual:e}")]
    NewtonDiverged { residual: f64 },

    #[error("instability at t = {t}: value {value} at index {index}")]
    Instability { t: f64, index: usize, value: f64 },

    #[error("time step {dt} exceeds stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("symbol has negative real part {value:e} at frequency {xi}")]
    DissipativityViolated { xi: f64, value: f64 },

    #[error("initial datum does not decay: |v0| = {value:e} in the outer part of the domain")]
    DecayViolated { value: f64 },

    #[error("no travelling wave at speed {c}: the front invades in that frame")]
    NoWaveAtSpeed { c: f64 },

    #[error("no convergence after {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },

    #[error("invalid speed bracket [{lo}, {hi}]: {reason}")]
    BracketInvalid { lo: f64, hi: f64, reason: String },

    #[error("tail window too noisy: phi = {value:e} at x = {x}")]
    WindowTooNoisy { x: f64, value: f64 },

    #[error("too few samples: {found} < {needed}")]
    TooFewSamples { found: usize, needed: usize },

    #[error("R0 = {r0} <= 1: no positive equilibrium")]
    SubcriticalR0 { r0: f64 },

    #[error("grid too small: {0}")]
    GridTooSmall(String),
}
