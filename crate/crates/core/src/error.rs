use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A truncated lattice sum whose remainder bound is too large relative to the
    /// computed partial sum.
    #[error("precision error: tail bound {tail_bound:e} exceeds tolerance for partial sum {partial:e}")]
    Precision { tail_bound: f64, partial: f64 },

    #[error("smallness gate violated: Hilbert-Schmidt norm squared {hs_norm_sq} is not below 1/36")]
    SmallnessGate { hs_norm_sq: f64 },

    #[error("perturbation series diverges: sandwich eigenvalue {eigenvalue} >= 1")]
    Divergence { eigenvalue: f64 },

    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("cost guard: estimated {estimate:e} lattice terms exceeds limit {limit:e}")]
    CostGuard { estimate: f64, limit: f64 },
}
