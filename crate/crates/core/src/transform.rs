//! Kernel means of functions and series, and the absolute-summability
//! diagnostic integral.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::quad::{estimate_endpoint_exponent, integrate, integrate_from_singularity, QuadOptions};
use crate::regression::linear_fit;

pub type TermFn = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesKind {
    ExplicitList,
    RuleBased,
    DerivedConjugate,
}

/// Generator of series terms `u_n`, `n >= 0`.
#[derive(Clone)]
pub struct SeriesSource {
    pub kind: SeriesKind,
    pub label: String,
    pub max_n_hint: u64,
    term: TermFn,
}

impl fmt::Debug for SeriesSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeriesSource")
            .field("kind", &self.kind)
            .field("label", &self.label)
            .field("max_n_hint", &self.max_n_hint)
            .finish()
    }
}

impl SeriesSource {
    /// Finitely many terms; everything past the list is zero.
    pub fn explicit(terms: Vec<f64>) -> Self {
        let len = terms.len() as u64;
        let terms = Arc::new(terms);
        SeriesSource {
            kind: SeriesKind::ExplicitList,
            label: "explicit".into(),
            max_n_hint: len,
            term: Arc::new(move |n| terms.get(n as usize).copied().unwrap_or(0.0)),
        }
    }

    pub fn rule(label: impl Into<String>, f: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        SeriesSource {
            kind: SeriesKind::RuleBased,
            label: label.into(),
            max_n_hint: u64::MAX,
            term: Arc::new(f),
        }
    }

    pub fn derived(
        label: impl Into<String>,
        max_n_hint: u64,
        f: impl Fn(u64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SeriesSource {
            kind: SeriesKind::DerivedConjugate,
            label: label.into(),
            max_n_hint,
            term: Arc::new(f),
        }
    }

    pub fn term(&self, n: u64) -> f64 {
        (self.term)(n)
    }

    /// Terms `u_0 ..= u_upto`.
    pub fn terms(&self, upto: u64) -> Result<Vec<f64>> {
        (0..=upto)
            .map(|n| {
                let v = self.term(n);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite(format!(
                        "series term {n} of {}",
                        self.label
                    )))
                }
            })
            .collect()
    }
}

/// Strictly increasing positive evaluation points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MeanSchedule(Vec<f64>);

impl MeanSchedule {
    pub fn new(w_values: Vec<f64>) -> Result<Self> {
        if w_values.is_empty() {
            return Err(Error::ParameterOutOfRange("empty w schedule".into()));
        }
        if w_values.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::ParameterOutOfRange(
                "w values must be finite and > 0".into(),
            ));
        }
        if w_values.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::ParameterOutOfRange(
                "w values must be strictly increasing".into(),
            ));
        }
        Ok(MeanSchedule(w_values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for MeanSchedule {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        MeanSchedule::new(v)
    }
}

impl From<MeanSchedule> for Vec<f64> {
    fn from(s: MeanSchedule) -> Vec<f64> {
        s.0
    }
}

/// `∫_0^1 q(t) F(w t) dt`.
pub fn n_mean_function<F: Fn(f64) -> f64>(
    kernel: &Kernel,
    f: F,
    w: f64,
    opts: &QuadOptions,
) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("w = {w} must be > 0")));
    }
    let head = integrate(|t| kernel.q(t) * f(w * t), 0.0, 0.5, opts)?;
    let exponent = kernel
        .tail_exponent(0)
        .unwrap_or_else(|| estimate_endpoint_exponent(|d| kernel.q_complement(d), 1e-3).max(-0.97));
    let tail = integrate_from_singularity(
        |d| kernel.q_complement(d) * f(w * (1.0 - d)),
        0.5,
        exponent,
        opts,
    )?;
    Ok(head.value + tail.value)
}

/// `sum_{n <= w} u_n Q(1 - n/w)`.
pub fn n_mean_series(kernel: &Kernel, s: &SeriesSource, w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("w = {w} must be > 0")));
    }
    let top = w.floor() as u64;
    let mut acc = 0.0;
    for n in 0..=top {
        let u = s.term(n);
        if u != 0.0 {
            acc += u * kernel.eval_Q((1.0 - n as f64 / w).max(0.0))?;
        }
    }
    Ok(acc)
}

/// Means over a schedule.
pub fn means_at(
    kernel: &Kernel,
    s: &SeriesSource,
    schedule: &MeanSchedule,
) -> Result<Vec<(f64, f64)>> {
    schedule
        .values()
        .par_iter()
        .map(|&w| Ok((w, n_mean_series(kernel, s, w)?)))
        .collect()
}

fn abs_integrand_cached(kernel: &Kernel, terms: &[f64], w: f64) -> f64 {
    let top = (w.floor() as usize).min(terms.len().saturating_sub(1));
    let mut acc = 0.0;
    for (n, &u) in terms.iter().enumerate().take(top + 1).skip(1) {
        if u != 0.0 {
            acc += n as f64 * u * kernel.q(n as f64 / w);
        }
    }
    acc.abs() / (w * w)
}

/// `w^{-2} |sum_{n <= w} n u_n q(n/w)|`.
pub fn abs_integrand(kernel: &Kernel, s: &SeriesSource, w: f64) -> f64 {
    let top = w.max(0.0).floor() as u64;
    let mut acc = 0.0;
    for n in 1..=top {
        let u = s.term(n);
        if u != 0.0 {
            acc += n as f64 * u * kernel.q(n as f64 / w);
        }
    }
    acc.abs() / (w * w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ConvergentEvidence,
    DivergentEvidence,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::ConvergentEvidence => "ConvergentEvidence",
            Verdict::DivergentEvidence => "DivergentEvidence",
            Verdict::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticOptions {
    pub a: f64,
    pub w_max: f64,
    pub points_per_dyad: usize,
    /// Cap on summand evaluations across all quadrature nodes.
    pub budget: u64,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        DiagnosticOptions {
            a: 1.0,
            w_max: 4096.0,
            points_per_dyad: 64,
            budget: 200_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DyadicIncrement {
    pub j: usize,
    pub w_lo: f64,
    pub w_hi: f64,
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummabilityReport {
    pub means: Vec<(f64, f64)>,
    pub abs_partial_integrals: Vec<(f64, f64)>,
    pub dyadic_increments: Vec<DyadicIncrement>,
    pub total: f64,
    pub slope: Option<f64>,
    pub slope_last4: Option<f64>,
    pub verdict: Verdict,
    pub summand_evaluations: u64,
}

/// Checkpoints `A 2^j` up to `W_max`, with `W_max` appended when it is not
/// itself a checkpoint.
fn checkpoints(a: f64, w_max: f64) -> Vec<f64> {
    let mut pts = vec![a];
    let mut w = a;
    while 2.0 * w <= w_max * (1.0 + 1e-12) {
        w *= 2.0;
        pts.push(w);
    }
    if w_max > w * (1.0 + 1e-12) {
        pts.push(w_max);
    }
    pts
}

fn midpoint_nodes(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    let h = (hi - lo) / count as f64;
    (0..count).map(move |m| {
        let w = lo + (m as f64 + 0.5) * h;
        if (w - w.round()).abs() < 1e-9 {
            w + 1e-9
        } else {
            w
        }
    })
}

/// Dyadic partial integrals of the absolute-summability integrand, with a
/// heuristic verdict from the decay of the increments.
pub fn abs_summability_diagnostic(
    kernel: &Kernel,
    s: &SeriesSource,
    opts: &DiagnosticOptions,
) -> Result<SummabilityReport> {
    let DiagnosticOptions {
        a,
        w_max,
        points_per_dyad,
        budget,
    } = *opts;
    if !(a > 0.0) || !(w_max > a) || !w_max.is_finite() {
        return Err(Error::ParameterOutOfRange(format!(
            "need 0 < A < W_max (got A = {a}, W_max = {w_max})"
        )));
    }
    if points_per_dyad < 8 {
        return Err(Error::ParameterOutOfRange(format!(
            "points_per_dyad must be ≥ 8 (got {points_per_dyad})"
        )));
    }
    let cps = checkpoints(a, w_max);
    let cost: u64 = cps
        .windows(2)
        .map(|p| {
            midpoint_nodes(p[0], p[1], points_per_dyad)
                .map(|w| w.floor() as u64 + 1)
                .sum::<u64>()
        })
        .sum();
    if cost > budget {
        return Err(Error::BudgetExceeded {
            used: cost,
            cap: budget,
        });
    }
    let terms = s.terms(w_max.floor() as u64)?;

    let increments: Vec<DyadicIncrement> = cps
        .par_windows(2)
        .enumerate()
        .map(|(j, p)| {
            let (lo, hi) = (p[0], p[1]);
            let h = (hi - lo) / points_per_dyad as f64;
            let sum: f64 = midpoint_nodes(lo, hi, points_per_dyad)
                .map(|w| abs_integrand_cached(kernel, &terms, w))
                .sum();
            DyadicIncrement {
                j,
                w_lo: lo,
                w_hi: hi,
                increment: sum * h,
            }
        })
        .collect();

    let mut partials = Vec::with_capacity(increments.len());
    let mut total = 0.0;
    for inc in &increments {
        total += inc.increment;
        partials.push((inc.w_hi, total));
    }

    let means = cps
        .par_iter()
        .map(|&w| Ok((w, n_mean_series(kernel, s, w)?)))
        .collect::<Result<Vec<_>>>()?;

    let fit_slope = |incs: &[DyadicIncrement]| -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = incs
            .iter()
            .filter(|d| d.increment > 0.0)
            .map(|d| (d.j as f64, d.increment.ln()))
            .unzip();
        linear_fit(&x, &y).map(|f| f.slope)
    };
    let slope = fit_slope(&increments);
    let tail_start = increments.len().saturating_sub(4);
    let slope_last4 = fit_slope(&increments[tail_start..]);
    let last = increments.last().map(|d| d.increment).unwrap_or(0.0);

    let decaying = slope.is_some_and(|s| s < -0.1) && last < 1e-3 * total;
    let verdict = if total == 0.0 || decaying {
        Verdict::ConvergentEvidence
    } else if slope_last4.is_some_and(|s| s >= 0.0) {
        Verdict::DivergentEvidence
    } else {
        Verdict::Inconclusive
    };

    Ok(SummabilityReport {
        means,
        abs_partial_integrals: partials,
        dyadic_increments: increments,
        total,
        slope,
        slope_last4,
        verdict,
        summand_evaluations: cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::make_cesaro_kernel;
    use proptest::prelude::*;

    fn alternating() -> SeriesSource {
        SeriesSource::rule("alternating", |n| if n % 2 == 0 { 1.0 } else { -1.0 })
    }

    #[test]
    fn function_mean_examples() {
        let opts = QuadOptions::default();
        let k1 = make_cesaro_kernel(1.0, 0.5).unwrap();
        assert!((n_mean_function(&k1, |_| 3.25, 7.0, &opts).unwrap() - 3.25).abs() < 1e-12);
        let k0 = make_cesaro_kernel(0.0, 1.0).unwrap();
        assert!((n_mean_function(&k0, |v| v, 10.0, &opts).unwrap() - 5.0).abs() < 1e-12);
        let v = n_mean_function(&k1, |v| v * v, 1.0, &opts).unwrap();
        let beta = 1.5 * statrs::function::beta::beta(3.0, 1.5);
        assert!((beta - 8.0 / 35.0).abs() < 1e-14);
        assert!((v - 8.0 / 35.0).abs() < 1e-10);
    }

    #[test]
    fn series_mean_examples() {
        let unit = SeriesSource::explicit(vec![1.0]);
        let k = make_cesaro_kernel(2.5, 0.4).unwrap();
        assert_eq!(n_mean_series(&k, &unit, 10.0).unwrap(), 1.0);
        let k0 = make_cesaro_kernel(0.0, 1.0).unwrap();
        for w in [10.0, 100.0, 1000.0] {
            assert!((n_mean_series(&k0, &alternating(), w).unwrap() - 0.5).abs() < 1e-12);
        }
        let geo = SeriesSource::rule("geometric", |n| 0.5f64.powi(n as i32));
        let k1 = make_cesaro_kernel(1.0, 0.5).unwrap();
        assert!((n_mean_series(&k1, &geo, 200.0).unwrap() - 2.0).abs() < 0.05);
    }

    #[test]
    fn arithmetic_kernel_matches_plain_weights() {
        let k0 = make_cesaro_kernel(0.0, 1.0).unwrap();
        let s = SeriesSource::rule("r", |n| ((n as f64) * 0.7).sin() / (1.0 + n as f64));
        for w in [3.5, 17.0, 64.25] {
            let direct: f64 = (0..=(w as u64))
                .map(|n| s.term(n) * (1.0 - n as f64 / w))
                .sum();
            assert!((n_mean_series(&k0, &s, w).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn regularity_on_geometric_series() {
        let geo = SeriesSource::rule("geometric", |n| 0.5f64.powi(n as i32));
        let k1 = make_cesaro_kernel(1.0, 0.5).unwrap();
        let errs: Vec<f64> = (4..=12)
            .map(|j| (n_mean_series(&k1, &geo, 2f64.powi(j)).unwrap() - 2.0).abs())
            .collect();
        assert!(errs.windows(2).all(|p| p[1] < p[0]));
        assert!(errs[errs.len() - 1] < 5e-3);
    }

    #[test]
    fn integrand_examples() {
        let k0 = make_cesaro_kernel(0.0, 1.0).unwrap();
        assert_eq!(
            abs_integrand(&k0, &SeriesSource::explicit(vec![4.0]), 9.5),
            0.0
        );
        assert!((abs_integrand(&k0, &alternating(), 4.0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn integrand_matches_direct_oracle() {
        let k1 = make_cesaro_kernel(1.0, 0.5).unwrap();
        let s = SeriesSource::rule(
            "inv_sq",
            |n| if n == 0 { 0.0 } else { 1.0 / (n * n) as f64 },
        );
        for w in [1.0, 7.3, 50.0, 99.99] {
            let mut oracle = 0.0f64;
            let mut n = 1.0f64;
            while n <= w {
                oracle += (1.0 / n) * 1.5 * (1.0 - n / w).sqrt();
                n += 1.0;
            }
            let oracle = oracle.abs() / (w * w);
            assert!((abs_integrand(&k1, &s, w) - oracle).abs() <= 1e-12 * oracle.max(1e-300));
        }
    }

    #[test]
    fn degenerate_series_has_zero_total() {
        let k0 = make_cesaro_kernel(0.0, 1.0).unwrap();
        let rep = abs_summability_diagnostic(
            &k0,
            &SeriesSource::explicit(vec![1.0]),
            &DiagnosticOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.total, 0.0);
        assert_eq!(rep.verdict, Verdict::ConvergentEvidence);
    }

    /// Exact dyadic increment for u_n = (-1)^n under the arithmetic kernel:
    /// the integrand is |S_N| / w^2 on [N, N+1) with |S_N| = ceil(N/2).
    fn alternating_increment(lo: u64, hi: u64) -> f64 {
        (lo..hi)
            .map(|n| n.div_ceil(2) as f64 * (1.0 / n as f64 - 1.0 / (n + 1) as f64))
            .sum()
    }

    #[test]
    fn alternating_increments_match_exact_values() {
        let k0 = make_cesaro_kernel(0.0, 1.0).unwrap();
        let opts = DiagnosticOptions {
            w_max: 4096.0,
            points_per_dyad: 256,
            ..Default::default()
        };
        let rep = abs_summability_diagnostic(&k0, &alternating(), &opts).unwrap();
        assert_eq!(rep.dyadic_increments.len(), 12);
        for d in &rep.dyadic_increments {
            let exact = alternating_increment(d.w_lo as u64, d.w_hi as u64);
            assert!(
                (d.increment - exact).abs() < 2e-3 * exact,
                "{d:?} vs {exact}"
            );
        }
        // The increments approach ln(2)/2 rather than decaying.
        let last = rep.dyadic_increments.last().unwrap().increment;
        assert!((last - 0.5 * 2f64.ln()).abs() < 1e-3);
        assert_ne!(rep.verdict, Verdict::ConvergentEvidence);
    }

    #[test]
    fn alternating_series_converges_under_smoother_kernel() {
        let k1 = make_cesaro_kernel(1.0, 0.5).unwrap();
        let rep =
            abs_summability_diagnostic(&k1, &alternating(), &DiagnosticOptions::default()).unwrap();
        // The integrand decays like w^{-3/2}, so late increments shrink by 2^{-1/2}.
        let tail = rep.slope_last4.unwrap();
        assert!((tail + 0.5 * 2f64.ln()).abs() < 0.03, "{tail}");
        assert!(rep.slope.unwrap() < -0.1);
    }

    #[test]
    fn growing_alternating_series_is_not_convergent() {
        let k0 = make_cesaro_kernel(0.0, 1.0).unwrap();
        let s = SeriesSource::rule(
            "alt_lin",
            |n| if n % 2 == 0 { n as f64 } else { -(n as f64) },
        );
        let rep = abs_summability_diagnostic(&k0, &s, &DiagnosticOptions::default()).unwrap();
        assert_ne!(rep.verdict, Verdict::ConvergentEvidence);
    }

    #[test]
    fn diagnostic_rejects_bad_options() {
        let k0 = make_cesaro_kernel(0.0, 1.0).unwrap();
        let bad = DiagnosticOptions {
            a: 10.0,
            w_max: 5.0,
            ..Default::default()
        };
        assert!(abs_summability_diagnostic(&k0, &alternating(), &bad).is_err());
        let tiny = DiagnosticOptions {
            budget: 10,
            ..Default::default()
        };
        assert!(matches!(
            abs_summability_diagnostic(&k0, &alternating(), &tiny),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn schedule_validation() {
        assert!(MeanSchedule::new(vec![1.0, 2.0, 3.0]).is_ok());
        assert!(MeanSchedule::new(vec![1.0, 1.0]).is_err());
        assert!(MeanSchedule::new(vec![0.0, 1.0]).is_err());
        assert!(serde_json::from_str::<MeanSchedule>("[3.0, 2.0]").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn partial_integrals_nondecreasing(
            coeffs in proptest::collection::vec(-3.0f64..3.0, 1..12),
            w_max in 16.0f64..300.0
        ) {
            let k = make_cesaro_kernel(1.0, 0.5).unwrap();
            let s = SeriesSource::explicit(coeffs);
            let opts = DiagnosticOptions { w_max, points_per_dyad: 16, ..Default::default() };
            let rep = abs_summability_diagnostic(&k, &s, &opts).unwrap();
            prop_assert!(rep.abs_partial_integrals.windows(2).all(|p| p[1].1 >= p[0].1));
            prop_assert!(rep.dyadic_increments.iter().all(|d| d.increment >= 0.0));
        }

        #[test]
        fn constant_function_mean_is_constant(c in -5.0f64..5.0, w in 0.1f64..100.0) {
            let k = make_cesaro_kernel(2.5, 0.4).unwrap();
            let v = n_mean_function(&k, |_| c, w, &QuadOptions::default()).unwrap();
            prop_assert!((v - c).abs() <= 1e-9 * (1.0 + c.abs()));
        }
    }
}
