use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::function::PeriodicFunction;
use super::model::fourier_coefficients;
use crate::error::{Error, Result};
use crate::quad::{integrate_breakpoints, QuadOptions};
use crate::transform::SeriesSource;

/// Smallest `|u|` at which `h` is evaluated.
pub const U_MIN: f64 = 1e-10;

/// Evaluation point, derivative order, correction constants and method
/// order of an r-th derived conjugate series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedSeriesSpec {
    pub x: f64,
    pub r: u32,
    pub theta: Vec<f64>,
    pub alpha: f64,
}

impl DerivedSeriesSpec {
    pub fn new(x: f64, r: u32, theta: Vec<f64>, alpha: f64) -> Result<Self> {
        let s = DerivedSeriesSpec { x, r, theta, alpha };
        if let Some(msg) = s.diagnostics().into_iter().next() {
            return Err(Error::ParameterOutOfRange(msg));
        }
        Ok(s)
    }

    /// Uses `θ_i = f^{(i)}(x)`, which makes the numerator of `h` vanish to
    /// order `r + 1` at `u = 0` for smooth `f`.
    pub fn with_default_theta(f: &PeriodicFunction, x: f64, r: u32, alpha: f64) -> Result<Self> {
        let theta = (0..r).map(|i| f.derivative(i, x)).collect();
        DerivedSeriesSpec::new(x, r, theta, alpha)
    }

    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.r < 1 {
            out.push("r must be ≥ 1".into());
        }
        if !((self.r as f64) < self.alpha) {
            out.push(format!(
                "requires r < alpha (got r = {}, alpha = {})",
                self.r, self.alpha
            ));
        }
        if self.theta.len() != self.r as usize {
            out.push(format!(
                "theta must have r = {} entries (got {})",
                self.r,
                self.theta.len()
            ));
        }
        if !self.x.is_finite() || self.theta.iter().any(|v| !v.is_finite()) {
            out.push("x and theta must be finite".into());
        }
        out
    }

    /// `α - r`.
    pub fn beta(&self) -> f64 {
        self.alpha - self.r as f64
    }

    /// `α - r - 1`.
    pub fn rho(&self) -> f64 {
        self.alpha - self.r as f64 - 1.0
    }
}

/// `P(u) = sum θ_i u^i / i!`.
pub fn p_polynomial(spec: &DerivedSeriesSpec, u: f64) -> f64 {
    let mut acc = 0.0;
    let mut pow = 1.0;
    let mut fact = 1.0;
    for (i, &th) in spec.theta.iter().enumerate() {
        if i > 0 {
            pow *= u;
            fact *= i as f64;
        }
        acc += th * pow / fact;
    }
    acc
}

fn sign_pow(r: u32) -> f64 {
    if r.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Below this `|u|` the numerator of `h` is summed from its Taylor series
/// for smooth `f`; direct differencing loses all digits there.
const TAYLOR_RADIUS: f64 = 0.1;
const TAYLOR_TERMS: u32 = 30;

/// Half the numerator of `h`, i.e. `h(u) u^r`.
pub fn h_numerator_half(f: &PeriodicFunction, spec: &DerivedSeriesSpec, u: f64) -> f64 {
    let x = spec.x;
    if f.is_smooth() && u.abs() < TAYLOR_RADIUS {
        // Only powers i with i + r odd survive the symmetrization.
        let mut acc = 0.0;
        let mut term = 1.0; // u^i / i!
        for i in 0..spec.r + TAYLOR_TERMS {
            if i > 0 {
                term *= u / i as f64;
            }
            if (i + spec.r) % 2 == 1 {
                let th = spec.theta.get(i as usize).copied().unwrap_or(0.0);
                let c = f.derivative(i, x) - if i < spec.r { th } else { 0.0 };
                acc += c * term;
            }
        }
        return acc;
    }
    let plus = f.eval(x + u) - p_polynomial(spec, u);
    let minus = f.eval(x - u) - p_polynomial(spec, -u);
    0.5 * (plus - sign_pow(spec.r) * minus)
}

/// `h(u) = [{f(x+u) - P(u)} - (-1)^r {f(x-u) - P(-u)}] / (2 u^r)`.
pub fn h_function(f: &PeriodicFunction, spec: &DerivedSeriesSpec, u: f64) -> Result<f64> {
    if u.abs() < U_MIN {
        return Err(Error::SingularAtZero { u });
    }
    Ok(h_numerator_half(f, spec, u) / u.powi(spec.r as i32))
}

/// `h` with the argument clamped to the singularity floor, for use inside
/// quadratures that never sample exactly at zero.
pub fn h_closure<'a>(
    f: &'a PeriodicFunction,
    spec: &'a DerivedSeriesSpec,
) -> impl Fn(f64) -> f64 + Sync + 'a {
    move |u: f64| {
        let u = u.max(U_MIN);
        h_numerator_half(f, spec, u) / u.powi(spec.r as i32)
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Closed form of `β_n`, the contribution of the correction polynomial.
pub fn beta_closed_form(spec: &DerivedSeriesSpec, n: usize) -> f64 {
    let r = spec.r;
    let p = r / 2;
    let nf = n as f64;
    let theta = |i: u32| spec.theta.get(i as usize).copied().unwrap_or(0.0);
    let mut outer = 0.0;
    for mu in 1..=p {
        let mut inner = 0.0;
        for j in mu..=p {
            let idx = if r % 2 == 1 { 2 * j } else { 2 * j - 1 };
            let e = 2 * j - 2 * mu;
            inner += theta(idx) * PI.powi(e as i32) / factorial(e + 1);
        }
        let sign = sign_pow(p + mu);
        outer += sign * nf.powi((2 * p - 2 * mu + 1) as i32) * inner;
    }
    2.0 * sign_pow(n as u32) * outer
}

fn split_integral<G: Fn(f64) -> f64>(
    g: G,
    spec: &DerivedSeriesSpec,
    n: usize,
    opts: &QuadOptions,
) -> Result<f64> {
    let r = spec.r;
    let nf = n as f64;
    let scale = sign_pow(r) * (2.0 / PI) * nf.powi(r as i32);
    let panels = (2 * n).max(8);
    let pts: Vec<f64> = (0..=panels)
        .map(|i| PI * i as f64 / panels as f64)
        .collect();
    let est = integrate_breakpoints(|u| g(u) * (nf * u + r as f64 * FRAC_PI_2).sin(), &pts, opts)?;
    Ok(scale * est.value)
}

/// Splits the derived conjugate term into the part carried by `h` and the
/// part carried by the correction polynomial.
pub fn alpha_beta_split(
    f: &PeriodicFunction,
    spec: &DerivedSeriesSpec,
    n: usize,
    opts: &QuadOptions,
) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(Error::IndexOutOfRange {
            index: n as i64,
            min: 1,
            max: i64::MAX,
        });
    }
    let alpha_n = split_integral(|u| h_numerator_half(f, spec, u), spec, n, opts)?;
    Ok((alpha_n, beta_closed_form(spec, n)))
}

/// `β_n` by quadrature from its defining integral; an independent check of
/// the closed form.
pub fn beta_by_quadrature(spec: &DerivedSeriesSpec, n: usize, opts: &QuadOptions) -> Result<f64> {
    let s = sign_pow(spec.r);
    split_integral(
        |u| 0.5 * (p_polynomial(spec, u) - s * p_polynomial(spec, -u)),
        spec,
        n,
        opts,
    )
}

/// Series whose n-th term is the r-th derivative of the conjugate term of
/// `f` at `x`, truncated at order `order`.
pub fn derived_conjugate_series_source(
    f: &PeriodicFunction,
    spec: &DerivedSeriesSpec,
    order: usize,
    quad_nodes: usize,
) -> Result<SeriesSource> {
    let model = fourier_coefficients(f, order, quad_nodes)?;
    let terms: Vec<f64> = std::iter::once(Ok(0.0))
        .chain((1..=order).map(|n| model.derived_conjugate_term(n, spec.x, spec.r)))
        .collect::<Result<_>>()?;
    Ok(SeriesSource::derived(
        format!("derived_conjugate({}, r = {})", f.name(), spec.r),
        order as u64,
        move |n| terms.get(n as usize).copied().unwrap_or(0.0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::model::fourier_coefficients;
    use proptest::prelude::*;

    fn spec(x: f64, r: u32, theta: Vec<f64>) -> DerivedSeriesSpec {
        DerivedSeriesSpec::new(x, r, theta, r as f64 + 1.5).unwrap()
    }

    #[test]
    fn polynomial_examples() {
        assert_eq!(p_polynomial(&spec(0.0, 2, vec![0.0, 0.0]), 1.7), 0.0);
        assert_eq!(p_polynomial(&spec(0.0, 2, vec![1.0, 2.0]), 3.0), 7.0);
        assert_eq!(p_polynomial(&spec(0.0, 3, vec![1.0, 0.0, 4.0]), 2.0), 9.0);
    }

    #[test]
    fn spec_validation() {
        assert!(DerivedSeriesSpec::new(0.0, 3, vec![0.0; 3], 2.0).is_err());
        assert!(DerivedSeriesSpec::new(0.0, 2, vec![0.0; 3], 2.5).is_err());
        assert!(DerivedSeriesSpec::new(0.0, 0, vec![], 2.5).is_err());
        let s = DerivedSeriesSpec::new(0.0, 2, vec![0.0; 2], 3.5).unwrap();
        assert_eq!(s.beta(), 1.5);
        assert_eq!(s.rho(), 0.5);
    }

    #[test]
    fn h_examples() {
        let s = spec(0.0, 1, vec![0.0]);
        assert!(h_function(&PeriodicFunction::sin(), &s, 0.7).unwrap().abs() < 1e-15);
        let v = h_function(&PeriodicFunction::cos(), &s, 0.5).unwrap();
        assert!((v - 0.5f64.cos() / 0.5).abs() < 1e-14);
        assert!((v - 1.755_165_123_780_746).abs() < 1e-12);
        assert!(matches!(
            h_function(&PeriodicFunction::cos(), &s, 1e-12),
            Err(Error::SingularAtZero { .. })
        ));
        // f equal to its correction polynomial near x.
        let lin = PeriodicFunction::new("lin", |t| 2.0 + 3.0 * t);
        let s = spec(0.0, 2, vec![2.0, 3.0]);
        for u in [0.1, 0.5, 1.0] {
            assert!(h_function(&lin, &s, u).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_closed_form(&spec(0.3, 3, vec![0.0; 3]), 5), 0.0);
        assert_eq!(beta_closed_form(&spec(0.3, 1, vec![2.0]), 5), 0.0);
        let s = spec(0.0, 2, vec![0.0, 1.0]);
        for n in 1..6 {
            let want = 2.0 * sign_pow(n as u32) * n as f64;
            assert!((beta_closed_form(&s, n) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_defining_integral() {
        let opts = QuadOptions::default();
        let theta = [0.7, -1.3, 0.4, 2.1, -0.6, 0.9];
        for r in 1..=6u32 {
            let s = spec(0.4, r, theta[..r as usize].to_vec());
            for n in 1..=9 {
                let cf = beta_closed_form(&s, n);
                let q = beta_by_quadrature(&s, n, &opts).unwrap();
                assert!(
                    (cf - q).abs() <= 1e-8 * (1.0 + q.abs()),
                    "r={r} n={n}: {cf} vs {q}"
                );
            }
        }
    }

    #[test]
    fn split_is_consistent_for_cos() {
        let f = PeriodicFunction::cos();
        let model = fourier_coefficients(&f, 20, 128).unwrap();
        let s = spec(0.0, 2, vec![0.0, 1.0]);
        let opts = QuadOptions::default();
        for n in 1..=20 {
            let (a, b) = alpha_beta_split(&f, &s, n, &opts).unwrap();
            let d = model.derived_conjugate_term(n, 0.0, 2).unwrap();
            assert!((a + b - d).abs() <= 1e-6 * (1.0 + (n * n) as f64), "n={n}");
        }
    }

    #[test]
    fn derived_series_examples() {
        let s1 = spec(0.0, 1, vec![0.0]);
        let src = derived_conjugate_series_source(&PeriodicFunction::sin(), &s1, 8, 64).unwrap();
        assert!((0..10).all(|n| src.term(n).abs() < 1e-12));
        let src = derived_conjugate_series_source(&PeriodicFunction::cos(), &s1, 8, 64).unwrap();
        assert!((src.term(1) + 1.0).abs() < 1e-12);
        assert!((2..10).all(|n| src.term(n).abs() < 1e-12));
        let tri = PeriodicFunction::trig(vec![0.1, 0.2, 0.3, 0.4], vec![0.0, 0.5, 0.6, 0.7]);
        let src = derived_conjugate_series_source(&tri, &s1, 12, 64).unwrap();
        assert!(src.term(3).abs() > 0.1);
        assert!((4..=12).all(|n| src.term(n).abs() < 1e-12));
        assert_eq!(src.term(0), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn split_consistency_for_trig_polynomials(
            a in proptest::collection::vec(-1.0f64..1.0, 6),
            b in proptest::collection::vec(-1.0f64..1.0, 6),
            x in -3.0f64..3.0,
            r in 1u32..4,
        ) {
            let f = PeriodicFunction::trig(a, b);
            let s = DerivedSeriesSpec::with_default_theta(&f, x, r, r as f64 + 0.5).unwrap();
            let model = fourier_coefficients(&f, 8, 64).unwrap();
            for n in 1..=8 {
                let (an, bn) = alpha_beta_split(&f, &s, n, &QuadOptions::default()).unwrap();
                let d = model.derived_conjugate_term(n, x, r).unwrap();
                prop_assert!((an + bn - d).abs() <= 1e-6 * (1.0 + (n as f64).powi(r as i32)));
            }
        }
    }
}
