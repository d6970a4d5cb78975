use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("derivative of order {order} is not available for this kernel")]
    DerivativeUnavailable { order: u32 },

    #[error(
        "quadrature did not reach tolerance on [{a}, {b}]: estimate {value:e}, error {abs_error:e}"
    )]
    QuadratureFailure {
        a: f64,
        b: f64,
        value: f64,
        abs_error: f64,
    },

    #[error("integrand is not integrable near {at} (local exponent {exponent:.3})")]
    NonIntegrable { at: f64, exponent: f64 },

    #[error("index {index} outside [{min}, {max}]")]
    IndexOutOfRange { index: i64, min: i64, max: i64 },

    #[error("evaluation at u = {u:e} is below the singularity floor")]
    SingularAtZero { u: f64 },

    #[error("order {p} exceeds k = {k}")]
    OrderTooHigh { p: u32, k: u32 },

    #[error("x is within {distance:e} of a jump point")]
    TooCloseToJump { distance: f64 },

    #[error("evaluation budget exceeded: {used} > {cap}")]
    BudgetExceeded { used: u64, cap: u64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
