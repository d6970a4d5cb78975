//! Adaptive Gauss–Kronrod quadrature with algebraic endpoint handling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 21-point Kronrod extension of the 10-point Gauss rule (abscissae on [0, 1]).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];
// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Error targets and subdivision budget for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

/// Result of an integration with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, o: Estimate) -> Estimate {
        Estimate {
            value: self.value + o.value,
            abs_error: self.abs_error + o.abs_error,
            evaluations: self.evaluations + o.evaluations,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    if !fc.is_finite() {
        return Err(Error::NonFinite(format!("integrand at {centre}")));
    }
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = WGK[10] * fc.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        if !f1.is_finite() || !f2.is_finite() {
            return Err(Error::NonFinite(format!(
                "integrand near {} or {}",
                centre - dx,
                centre + dx
            )));
        }
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment {
        a,
        b,
        value: res_k * half,
        error: err,
        abs_value: res_abs,
    })
}

/// Nodes and weights of the 21-point Kronrod rule on `[a, b]`, for callers
/// that apply one fixed rule to many integrands.
pub fn kronrod_nodes(a: f64, b: f64) -> [(f64, f64); 21] {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = [(centre, half * WGK[10]); 21];
    for j in 0..10 {
        let dx = half * XGK[j];
        out[2 * j] = (centre - dx, half * WGK[j]);
        out[2 * j + 1] = (centre + dx, half * WGK[j]);
    }
    out
}

/// Integrates `f` over `[a, b]` adaptively.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<Estimate> {
    integrate_breakpoints(f, &[a, b], opts)
}

/// Integrates `f` over `[points[0], points[last]]`, starting from the given
/// subdivision so that known kinks or jumps fall on panel boundaries.
pub fn integrate_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    opts: &QuadOptions,
) -> Result<Estimate> {
    if points.len() < 2 {
        return Ok(Estimate {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut settled: Vec<Segment> = Vec::new();
    let mut evaluations = 0usize;
    for w in points.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        heap.push(gk21(&f, w[0], w[1])?);
        evaluations += 21;
    }
    loop {
        let (value, error, abs_value) = heap
            .iter()
            .chain(settled.iter())
            .fold((0.0, 0.0, 0.0), |acc, s| {
                (acc.0 + s.value, acc.1 + s.error, acc.2 + s.abs_value)
            });
        let target = opts
            .abs_tol
            .max(opts.rel_tol * value.abs())
            .max(100.0 * f64::EPSILON * abs_value);
        if error <= target {
            return Ok(Estimate {
                value,
                abs_error: error,
                evaluations,
            });
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => {
                return Err(Error::QuadratureFailure {
                    a: points[0],
                    b: points[points.len() - 1],
                    value,
                    abs_error: error,
                })
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        let scale = worst.a.abs().max(worst.b.abs()).max(f64::MIN_POSITIVE);
        if (worst.b - worst.a).abs() <= 64.0 * f64::EPSILON * scale
            || mid == worst.a
            || mid == worst.b
        {
            settled.push(worst);
            continue;
        }
        if heap.len() + settled.len() >= opts.max_intervals {
            return Err(Error::QuadratureFailure {
                a: points[0],
                b: points[points.len() - 1],
                value,
                abs_error: error,
            });
        }
        heap.push(gk21(&f, worst.a, mid)?);
        heap.push(gk21(&f, mid, worst.b)?);
        evaluations += 42;
    }
}

/// Substitution power that maps an endpoint behaviour `d^exponent` to a
/// smooth integrand in the new variable.
pub fn substitution_power(exponent: f64) -> Result<f64> {
    if !exponent.is_finite() || exponent <= -0.98 {
        return Err(Error::NonIntegrable { at: 0.0, exponent });
    }
    let snapped = if (exponent - exponent.round()).abs() < 1e-3 {
        exponent.round()
    } else {
        exponent
    };
    if snapped >= 0.0 && snapped.fract() == 0.0 {
        return Ok(1.0);
    }
    Ok((snapped.ceil() + 1.0) / (1.0 + snapped))
}

/// Integrates `g(d)` for `d` in `[0, len]`, where `g(d) ~ d^exponent` as `d -> 0`.
///
/// The caller evaluates the integrand in terms of the distance `d` from the
/// singular endpoint, which keeps full precision near it.
pub fn integrate_from_singularity<G: Fn(f64) -> f64>(
    g: G,
    len: f64,
    exponent: f64,
    opts: &QuadOptions,
) -> Result<Estimate> {
    if len == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    let p = substitution_power(exponent)?;
    if p == 1.0 {
        return integrate(&g, 0.0, len, opts);
    }
    let integrand = |s: f64| {
        let d = len * s.powf(p);
        g(d) * len * p * s.powf(p - 1.0)
    };
    integrate(integrand, 0.0, 1.0, opts)
}

/// Estimates the local power-law exponent of `g` at `d -> 0` from samples at
/// `d0`, `d0/8` and `d0/64`.
pub fn estimate_endpoint_exponent<G: Fn(f64) -> f64>(g: G, d0: f64) -> f64 {
    let ln8 = 8f64.ln();
    let g0 = g(d0).abs();
    let g1 = g(d0 / 8.0).abs();
    let g2 = g(d0 / 64.0).abs();
    if g1 == 0.0 && g2 == 0.0 {
        return 0.0;
    }
    if g2 == 0.0 || g1 == 0.0 {
        // Vanishing at isolated samples means at least linear decay.
        return 1.0;
    }
    let near = (g1 / g2).ln() / ln8;
    let far = (g0 / g1).ln() / ln8;
    if !near.is_finite() {
        return far;
    }
    // Prefer the sample pair closest to the endpoint; blend only when they agree.
    if (near - far).abs() < 0.05 {
        0.5 * (near + far)
    } else {
        near
    }
}

/// Integrates `f` over `[a, b]` with optional algebraic endpoint exponents.
/// Each singular endpoint is treated on its own half of the interval.
pub fn integrate_with_endpoints<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    left: Option<f64>,
    right: Option<f64>,
    opts: &QuadOptions,
) -> Result<Estimate> {
    let half_opts = QuadOptions {
        abs_tol: 0.5 * opts.abs_tol,
        ..*opts
    };
    match (left, right) {
        (None, None) => integrate(f, a, b, opts),
        (Some(gl), None) => integrate_from_singularity(|d| f(a + d), b - a, gl, opts),
        (None, Some(gr)) => integrate_from_singularity(|d| f(b - d), b - a, gr, opts),
        (Some(gl), Some(gr)) => {
            let mid = 0.5 * (a + b);
            let l = integrate_from_singularity(|d| f(a + d), mid - a, gl, &half_opts)?;
            let r = integrate_from_singularity(|d| f(b - d), b - mid, gr, &half_opts)?;
            Ok(l + r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_rule_nodes_integrate_polynomials() {
        let v: f64 = kronrod_nodes(1.0, 3.0)
            .iter()
            .map(|(x, w)| w * x.powi(7))
            .sum();
        assert!((v - (3f64.powi(8) - 1.0) / 8.0).abs() < 1e-10);
    }

    #[test]
    fn kronrod_rule_is_exact_for_degree_31() {
        for deg in 0..=31 {
            let s = gk21(&|x: f64| x.powi(deg), 0.0, 1.0).unwrap();
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((s.value - exact).abs() < 1e-14, "deg {deg}: {}", s.value);
        }
    }

    #[test]
    fn gauss_rule_is_exact_for_degree_19() {
        let f = |x: f64| x.powi(18) + 3.0 * x.powi(19);
        let mut res = 0.0;
        for j in 0..10 {
            if j % 2 == 1 {
                res += WG[j / 2] * (f(-XGK[j]) + f(XGK[j]));
            }
        }
        assert!((res - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let est = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, &QuadOptions::default()).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((est.value - exact).abs() / exact < 1e-9);
    }

    #[test]
    fn endpoint_singularity_is_absorbed() {
        let opts = QuadOptions::default();
        let est = integrate_from_singularity(|d| d.powf(-0.9), 1.0, -0.9, &opts).unwrap();
        assert!((est.value - 10.0).abs() < 1e-8);
        let est = integrate_from_singularity(|d| d.powf(0.9) * (1.0 + d), 2.0, 0.9, &opts).unwrap();
        let exact = 2f64.powf(1.9) / 1.9 + 2f64.powf(2.9) / 2.9;
        assert!((est.value - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn both_endpoints_singular() {
        // Beta(0.3, 0.6)
        let est = integrate_with_endpoints(
            |x: f64| x.powf(-0.7) * (1.0 - x).powf(-0.4),
            0.0,
            1.0,
            Some(-0.7),
            Some(-0.4),
            &QuadOptions::default(),
        )
        .unwrap();
        let exact = statrs::function::beta::beta(0.3, 0.6);
        assert!((est.value - exact).abs() / exact < 1e-9);
    }

    #[test]
    fn exponent_estimate_and_diagnosis() {
        let e = estimate_endpoint_exponent(|d: f64| 3.0 * d.powf(-0.35), 1e-3);
        assert!((e + 0.35).abs() < 1e-12);
        assert!(matches!(
            substitution_power(-1.5),
            Err(Error::NonIntegrable { .. })
        ));
        assert_eq!(substitution_power(2.0).unwrap(), 1.0);
    }

    #[test]
    fn breakpoints_split_jumps() {
        let est = integrate_breakpoints(
            |x: f64| if x < 0.3 { 1.0 } else { 2.0 },
            &[0.0, 0.3, 1.0],
            &QuadOptions::default(),
        )
        .unwrap();
        assert!((est.value - 1.7).abs() < 1e-13);
    }
}
