//! Fourier models, derived conjugate series, fractional integrals of the
//! symmetrized difference `h`, and the hypothesis checkers.

pub mod derived;
pub mod fractional;
pub mod function;
pub mod hypothesis;
pub mod model;

pub use derived::{
    alpha_beta_split, beta_closed_form, derived_conjugate_series_source, h_function, p_polynomial,
    DerivedSeriesSpec,
};
pub use fractional::{fractional_integral_h, h_beta, FractionalIntegralTable};
pub use function::{FunctionRef, PeriodicFunction};
pub use hypothesis::{
    check_variation, check_variation_h, check_weighted_integral, check_weighted_integral_h,
    HypothesisOptions, HypothesisReport, HypothesisSet, HypothesisVerdict,
};
pub use model::{fourier_coefficients, FourierModel};
