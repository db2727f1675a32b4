use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("startup integral diverges: weighted exponent {exponent} <= -1")]
    StartupDivergence { exponent: f64 },
    #[error("denominator vanishes at r = {r}")]
    DenominatorVanishing { r: f64 },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("no convergence after {iterations} iterations (last contraction estimate {last_contraction})")]
    NoConvergence { iterations: usize, last_contraction: f64 },
    #[error("iterate {iter} left the ball: distance {distance:e} > radius {radius:e}")]
    BallExit { iter: usize, distance: f64, radius: f64 },
    #[error("contraction failed at iterate {iter}: ratio {ratio}")]
    ContractionFailure { iter: usize, ratio: f64 },
    #[error("blow-up detected at r = {r}")]
    BlowUp { r: f64 },
    #[error("step size underflow at r = {r}")]
    StepSizeUnderflow { r: f64 },
    #[error("infeasible constant chain; tightest violated inequality: {violated} (ratio {ratio:e})")]
    Infeasible { violated: String, ratio: f64 },
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),
    #[error("divergent cavitation ratio: {0}")]
    DivergentRatio(String),
    #[error("degenerate eigenvalues at r = {r}")]
    EigenDegenerate { r: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
