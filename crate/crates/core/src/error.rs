use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("wavelength {wavelength_nm} nm lies outside the comb span [{min_nm}, {max_nm}] nm")]
    OutOfSpan {
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("comb has {available} side peaks per side but order {requested} was requested")]
    InsufficientComb { requested: u32, available: u32 },

    #[error("wavelength grid is empty")]
    EmptyGrid,

    #[error("histogram has no wing bins outside the peak window")]
    DegenerateHistogram,

    #[error("histogram holds no counts in either the peak or the wings")]
    EmptyHistogram,

    #[error("target {target} is outside the reachable range [{min}, {max}]")]
    Unreachable { target: f64, min: f64, max: f64 },

    #[error("fit failed: {0}")]
    Fit(#[from] FitError),
}

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least {required} points, got {got}")]
    NotEnoughPoints { required: usize, got: usize },

    #[error("point {index} has non-positive or non-finite uncertainty {sigma}")]
    BadSigma { index: usize, sigma: f64 },

    #[error("point {index} is not finite")]
    NonFinite { index: usize },

    #[error("column holds no counts")]
    NoCounts,

    #[error("no convergence after {iterations} iterations (chi2 = {chi2}, max |weighted residual| = {max_residual})")]
    NoConvergence {
        iterations: usize,
        chi2: f64,
        max_residual: f64,
    },

    #[error("normal matrix is singular")]
    Singular,
}
