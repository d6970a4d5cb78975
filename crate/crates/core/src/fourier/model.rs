use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::Serialize;

use super::function::PeriodicFunction;
use crate::error::{Error, Result};

/// Coefficients `a_0..a_N` and `b_1..b_N` (stored with `b[0] = 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierModel {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl FourierModel {
    /// `a` has length `N + 1`, `b` holds `b_1..b_N`.
    pub fn from_coefficients(a: Vec<f64>, b_from_one: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.len() != b_from_one.len() + 1 {
            return Err(Error::ParameterOutOfRange(format!(
                "need len(a) = len(b) + 1 (got {} and {})",
                a.len(),
                b_from_one.len()
            )));
        }
        if a.iter().chain(&b_from_one).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Fourier coefficient".into()));
        }
        let mut b = Vec::with_capacity(a.len());
        b.push(0.0);
        b.extend(b_from_one);
        Ok(FourierModel { a, b })
    }

    pub fn order(&self) -> usize {
        self.a.len() - 1
    }

    pub fn a(&self, n: usize) -> f64 {
        self.a[n]
    }

    pub fn b(&self, n: usize) -> f64 {
        self.b[n]
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.order() {
            Err(Error::IndexOutOfRange {
                index: n as i64,
                min: 1,
                max: self.order() as i64,
            })
        } else {
            Ok(())
        }
    }

    /// `B_n(x) = b_n cos nx - a_n sin nx`.
    pub fn conjugate_term(&self, n: usize, x: f64) -> Result<f64> {
        self.check_index(n)?;
        let nx = n as f64 * x;
        Ok(self.b[n] * nx.cos() - self.a[n] * nx.sin())
    }

    /// `(d/dx)^r B_n(x) = n^r (b_n cos(nx + rπ/2) - a_n sin(nx + rπ/2))`.
    pub fn derived_conjugate_term(&self, n: usize, x: f64, r: u32) -> Result<f64> {
        self.check_index(n)?;
        let nf = n as f64;
        let phase = nf * x + r as f64 * FRAC_PI_2;
        Ok(nf.powi(r as i32) * (self.b[n] * phase.cos() - self.a[n] * phase.sin()))
    }
}

fn trapezoid(f_vals: &[f64], n: usize, stride: usize) -> (f64, f64) {
    let m = f_vals.len() / stride;
    let mut ca = 0.0;
    let mut cb = 0.0;
    for k in 0..m {
        let t = -PI + TAU * k as f64 / m as f64;
        let v = f_vals[k * stride];
        let nt = n as f64 * t;
        ca += v * nt.cos();
        cb += v * nt.sin();
    }
    (2.0 * ca / m as f64, 2.0 * cb / m as f64)
}

/// Coefficients by the uniform trapezoid rule on `quad_nodes` points with
/// one Richardson step against the half grid.
///
/// The correction leaves band-limited integrands exact and lifts the
/// accuracy for jumps or kinks on grid points from `O(h^2)` to `O(h^4)`.
pub fn fourier_coefficients(
    f: &PeriodicFunction,
    n: usize,
    quad_nodes: usize,
) -> Result<FourierModel> {
    if n < 1 {
        return Err(Error::ParameterOutOfRange("N must be ≥ 1".into()));
    }
    if quad_nodes < 4 * n || !quad_nodes.is_power_of_two() {
        return Err(Error::ParameterOutOfRange(format!(
            "quad_nodes must be a power of two ≥ 4N (got {quad_nodes} for N = {n})"
        )));
    }
    let vals: Vec<f64> = (0..quad_nodes)
        .map(|k| f.eval(-PI + TAU * k as f64 / quad_nodes as f64))
        .collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("samples of {}", f.name())));
    }
    let mut a = Vec::with_capacity(n + 1);
    let mut b = Vec::with_capacity(n);
    for k in 0..=n {
        let (fa, fb) = trapezoid(&vals, k, 1);
        let (ca, cb) = trapezoid(&vals, k, 2);
        a.push((4.0 * fa - ca) / 3.0);
        if k > 0 {
            b.push((4.0 * fb - cb) / 3.0);
        }
    }
    FourierModel::from_coefficients(a, b)
}
