use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("could not certify digit {step} even at {bits} bits of precision")]
    PrecisionExhausted { step: usize, bits: u32 },

    #[error("series diverges at t = {t} (abscissa {theta})")]
    Divergent { t: f64, theta: f64 },

    #[error(
        "tail of digit-driven series for digit {digit} not certifiable at t = {t}: bound {bound:e} exceeds {tol:e}"
    )]
    TailNotCertifiable { digit: u64, t: f64, bound: f64, tol: f64 },

    #[error("insufficient depth: {0}")]
    InsufficientDepth(String),

    #[error("no uniform bound on |log S_i(t)| for digits beyond {0}")]
    UnboundedLogBound(u64),

    #[error("pressure has no zero on the searchable range: {0}")]
    NoZero(String),

    #[error("entropy of the frequency vector diverges: {0}")]
    EntropyDiverges(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergent { iterations: usize, residual: f64 },

    #[error("tree would have {nodes} nodes, above the cap of {cap}")]
    Overflow { nodes: u128, cap: u128 },

    #[error("children do not fit in the parent: ratio sum {sum} > 1 and rescaling disabled")]
    Infeasible { sum: f64 },

    #[error("tree has no leaf intervals")]
    EmptyTree,
}
