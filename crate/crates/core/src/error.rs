use thiserror::Error;

/// Errors raised by the estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible moments: variance {sigma2} must be below mean*(1-mean) = {bound}")]
    InfeasibleMoments { sigma2: f64, bound: f64 },

    #[error("insufficient local data at t0 = {center}: {positive} positively weighted points, need {required}")]
    InsufficientLocalData {
        center: f64,
        positive: usize,
        required: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("curve fit failed at centers {centers:?}")]
    PartialCurve { centers: Vec<f64> },

    #[error("bandwidth {h} is infeasible: {reason}")]
    InfeasibleBandwidth { h: f64, reason: String },

    #[error("no feasible bandwidth in the candidate grid")]
    NoFeasibleBandwidth,

    #[error("degenerate range: all values equal {0}")]
    DegenerateRange(f64),

    #[error("degenerate test: differences have zero variance")]
    DegenerateTest,
}

impl Error {
    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_)
                | Error::PartialCurve { .. }
                | Error::InfeasibleBandwidth { .. }
                | Error::NoFeasibleBandwidth
                | Error::InsufficientLocalData { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
