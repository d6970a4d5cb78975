//! Kernel sums `S^{i,j}`, `G_i`, alternating sums and Riesz means, with
//! empirical checks of their asymptotic bounds.
//!
//! Some intermediate estimates have no separate check: the summability of
//! `sum (-1)^n n^i` under the kernel transform is exercised by the transform
//! tests, and the partial estimates on the pieces of the `u`-integral are
//! covered by the composite check for `wt > π`.

mod alternating;
mod decay;
mod oscillatory;
mod report;
mod sums;

pub use alternating::{check_alt_sum_saturation, check_alt_sum_top_order, DyadicSweep};
pub use decay::{check_decay_estimate, check_decay_estimates, DecayGrids};
pub use oscillatory::{check_oscillatory_sums, far_exponents, SumGrid};
pub use report::{
    jittered_nodes, log_space, BoundFitReport, BoundRow, Estimate, ExponentCheck, ExponentFit,
    EXPONENT_TOL,
};
pub use sums::{
    alt_sum, check_riesz_difference, cos_derivative, g_direct, g_via_representation, max_index,
    riesz_mean, s_sum,
};
