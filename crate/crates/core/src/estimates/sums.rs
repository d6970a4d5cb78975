//! Exact finite kernel sums and their integral representation.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::quad::{integrate_breakpoints, integrate_from_singularity, QuadOptions};

/// Compensated (Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `cos(θ + jπ/2)` without rounding the phase shift.
pub(crate) fn shifted_cos(j: u32, theta: f64) -> f64 {
    match j % 4 {
        0 => theta.cos(),
        1 => -theta.sin(),
        2 => -theta.cos(),
        _ => theta.sin(),
    }
}

/// `(cos nu)_j = (d/du)^j cos nu = n^j cos(nu + jπ/2)`.
pub fn cos_derivative(j: u32, n: u64, u: f64) -> f64 {
    let nf = n as f64;
    nf.powi(j as i32) * shifted_cos(j, nf * u)
}

/// `S^{i,j}(x, u) = sum_{0 ≤ n ≤ x} (x - n)^i (cos nu)_j`.
pub fn s_sum(i: u32, j: u32, x: f64, u: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    s_sum_upto(i, j, x, u, x.floor() as u64)
}

/// `S^{i,j}` with the summation range fixed to `0..=n_max`.
pub(crate) fn s_sum_upto(i: u32, j: u32, x: f64, u: f64, n_max: u64) -> f64 {
    let mut acc = Neumaier::default();
    for n in 0..=n_max {
        acc.add((x - n as f64).powi(i as i32) * cos_derivative(j, n, u));
    }
    acc.value()
}

/// `sum_{n ≤ w} (-1)^n n^p q(n/w)`, defined for `p ≤ k`.
pub fn alt_sum(kernel: &Kernel, p: u32, w: f64) -> Result<f64> {
    let k = kernel.k();
    if p > k {
        return Err(Error::OrderTooHigh { p, k });
    }
    if !(w >= 1.0) || !w.is_finite() {
        return Err(Error::ParameterOutOfRange(format!("w = {w} must be ≥ 1")));
    }
    let mut acc = Neumaier::default();
    for n in 0..=w.floor() as u64 {
        let nf = n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(sign * nf.powi(p as i32) * kernel.q_complement((w - nf) / w));
    }
    Ok(acc.value())
}

/// `m = min(k - r, r)` for a derived series of order `r`.
pub fn max_index(kernel: &Kernel, r: u32) -> Result<u32> {
    let k = kernel.k();
    if r == 0 || (r as f64) >= kernel.alpha() {
        return Err(Error::ParameterOutOfRange(format!(
            "requires 1 ≤ r < alpha (r = {r}, alpha = {})",
            kernel.alpha()
        )));
    }
    Ok((k - r).min(r))
}

fn derivative_order(kernel: &Kernel, r: u32, i: u32) -> Result<u32> {
    let m = max_index(kernel, r)?;
    if i > m {
        return Err(Error::IndexOutOfRange {
            index: i as i64,
            min: 0,
            max: m as i64,
        });
    }
    Ok(kernel.k() + 1 - i)
}

/// `G_i(w, u) = sum_{n ≤ w} q(n/w) (d/du)^{k+1-i} cos nu`, summed directly.
pub fn g_direct(kernel: &Kernel, r: u32, i: u32, w: f64, u: f64) -> Result<f64> {
    let order = derivative_order(kernel, r, i)?;
    if w < 1.0 {
        return Ok(0.0);
    }
    let mut acc = Neumaier::default();
    for n in 1..=w.floor() as u64 {
        let nf = n as f64;
        acc.add(kernel.q_complement((w - nf) / w) * cos_derivative(order, n, u));
    }
    Ok(acc.value())
}

/// `G_i(w, u)` as `∫_1^w g_i(x, w, u) dx`, where
/// `g_i = w^{-k} q^k(x/w) S^{k-1,k+1-i}(x, u) / (k-1)!`.
///
/// Panels break at the integers, where the sum gains a term; the panel ending
/// at `x = w` absorbs the endpoint behaviour of `q^k`.
pub fn g_via_representation(
    kernel: &Kernel,
    r: u32,
    i: u32,
    w: f64,
    u: f64,
    opts: &QuadOptions,
) -> Result<f64> {
    let order = derivative_order(kernel, r, i)?;
    if w <= 1.0 {
        return Ok(0.0);
    }
    let k = kernel.k();
    kernel.qk_complement(0.5)?;
    let factorial: f64 = (1..k).map(|v| v as f64).product();
    let scale = w.powi(-(k as i32)) / factorial;

    let last = if w.fract() == 0.0 { w - 1.0 } else { w.floor() };
    let n_last = last as u64;
    let regular: Vec<f64> = (1..=n_last).map(|n| n as f64).collect();
    let interior = integrate_breakpoints(
        |x: f64| {
            let n_max = (x.floor() as u64).min(n_last.saturating_sub(1)).max(1);
            kernel.qk_complement((w - x) / w).unwrap_or(f64::NAN)
                * s_sum_upto(k - 1, order, x, u, n_max)
        },
        &regular,
        &QuadOptions {
            max_intervals: opts.max_intervals.max(4 * regular.len()),
            ..*opts
        },
    )?;
    let exponent = kernel.tail_exponent(k).unwrap_or(0.0);
    let tail = integrate_from_singularity(
        |d: f64| {
            kernel.qk_complement(d / w).unwrap_or(f64::NAN)
                * s_sum_upto(k - 1, order, w - d, u, n_last)
        },
        w - last,
        exponent,
        opts,
    )?;
    Ok(scale * (interior.value + tail.value))
}

/// Riesz mean `A^ρ(x) = sum_{λ_n ≤ x} (x - λ_n)^ρ a_n`.
pub fn riesz_mean(lambda: &[f64], a: &[f64], rho: f64, x: f64) -> Result<f64> {
    check_riesz_data(lambda, a)?;
    if !(rho >= 0.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "rho = {rho} must be ≥ 0"
        )));
    }
    let mut acc = Neumaier::default();
    for (&l, &c) in lambda.iter().zip(a).take_while(|(&l, _)| l <= x) {
        acc.add((x - l).powf(rho) * c);
    }
    Ok(acc.value())
}

fn check_riesz_data(lambda: &[f64], a: &[f64]) -> Result<()> {
    if lambda.len() != a.len() {
        return Err(Error::ParameterOutOfRange(format!(
            "lambda and a differ in length ({} vs {})",
            lambda.len(),
            a.len()
        )));
    }
    if lambda.first().is_some_and(|&l| !(l > 0.0)) || lambda.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::ParameterOutOfRange(
            "lambda must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Deviation between `A(x)` and the `k`-th central difference of `A^k` at
/// `x`, divided by `k!`.
pub fn check_riesz_difference(lambda: &[f64], a: &[f64], k: u32, x: f64, step: f64) -> Result<f64> {
    check_riesz_data(lambda, a)?;
    if k == 0 || !(step > 0.0) {
        return Err(Error::ParameterOutOfRange("need k ≥ 1 and step > 0".into()));
    }
    let distance = lambda
        .iter()
        .map(|l| (x - l).abs())
        .fold(f64::INFINITY, f64::min);
    if distance < 10.0 * step * k as f64 {
        return Err(Error::TooCloseToJump { distance });
    }
    let kf = k as f64;
    let mut diff = 0.0;
    let mut binom = 1.0;
    for j in 0..=k {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        diff += sign * binom * riesz_mean(lambda, a, kf, x + (kf / 2.0 - j as f64) * step)?;
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    let factorial: f64 = (1..=k).map(|v| v as f64).product();
    let lhs = diff / step.powi(k as i32) / factorial;
    Ok((lhs - riesz_mean(lambda, a, 0.0, x)?).abs())
}
