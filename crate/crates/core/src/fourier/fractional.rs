use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::{estimate_endpoint_exponent, integrate, integrate_from_singularity, QuadOptions};

/// Riemann–Liouville integral `(1/Γ(β)) ∫_0^t (t-u)^{β-1} h(u) du`.
///
/// The interval is split at `t/2`. Near `u = 0` the local exponent of `h` is
/// estimated and absorbed by substitution; near `u = t` the kernel exponent
/// `β - 1` is absorbed the same way, in the variable `t - u`.
pub fn fractional_integral_h<H: Fn(f64) -> f64>(
    h: H,
    beta: f64,
    t: f64,
    opts: &QuadOptions,
) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::ParameterOutOfRange(format!(
            "beta = {beta} must be > 0"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("t = {t} must be > 0")));
    }
    let half = 0.5 * t;
    let g0 = estimate_endpoint_exponent(&h, half * 1e-4);
    if g0 <= -0.98 {
        return Err(Error::NonIntegrable {
            at: 0.0,
            exponent: g0,
        });
    }
    let left = integrate_from_singularity(|u| (t - u).powf(beta - 1.0) * h(u), half, g0, opts)
        .map_err(|e| match e {
            Error::NonFinite(_) => Error::NonIntegrable {
                at: 0.0,
                exponent: g0,
            },
            other => other,
        })?;
    let right = if beta >= 1.0 {
        integrate_from_singularity(|d| d.powf(beta - 1.0) * h(t - d), half, beta - 1.0, opts)?.value
    } else {
        // u = t - (t/2) s^{1/β} turns (t-u)^{β-1} du into (t/2)^β/β ds.
        let inv = 1.0 / beta;
        let est = integrate(|s| h(t - half * s.powf(inv)), 0.0, 1.0, opts)?;
        est.value * half.powf(beta) / beta
    };
    Ok((left.value + right) / gamma(beta))
}

/// `Γ(1+β) t^{-β} H_β(t)`, with `h_0 = h`.
pub fn h_beta<H: Fn(f64) -> f64>(h: H, beta: f64, t: f64, opts: &QuadOptions) -> Result<f64> {
    if beta == 0.0 {
        return Ok(h(t));
    }
    let big = fractional_integral_h(h, beta, t, opts)?;
    Ok(gamma(1.0 + beta) * t.powf(-beta) * big)
}

/// Log-spaced samples of `H_β` on `(0, π]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionalIntegralTable {
    pub beta: f64,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

/// Log-spaced grid from `t_min` to `t_max` inclusive with `per_dyad` points per
/// factor of two.
pub fn log_grid_per_dyad(t_min: f64, t_max: f64, per_dyad: usize) -> Vec<f64> {
    let dyads = (t_max / t_min).log2();
    let n = ((dyads * per_dyad as f64).round() as usize).max(1);
    let (lo, hi) = (t_min.ln(), t_max.ln());
    (0..=n)
        .map(|i| (lo + (hi - lo) * i as f64 / n as f64).exp())
        .collect()
}

impl FractionalIntegralTable {
    pub fn build<H: Fn(f64) -> f64 + Sync>(
        h: H,
        beta: f64,
        t: Vec<f64>,
        opts: &QuadOptions,
    ) -> Result<Self> {
        if t.is_empty() || t.windows(2).any(|p| p[1] <= p[0]) || t[0] <= 0.0 {
            return Err(Error::ParameterOutOfRange(
                "table grid must be increasing and positive".into(),
            ));
        }
        let values = t
            .par_iter()
            .map(|&ti| fractional_integral_h(&h, beta, ti, opts))
            .collect::<Result<Vec<f64>>>()?;
        Ok(FractionalIntegralTable { beta, t, values })
    }

    /// Linear interpolation in `ln t`, clamped to the table range.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= self.t[0] {
            return self.values[0];
        }
        if t >= self.t[n - 1] {
            return self.values[n - 1];
        }
        let i = self.t.partition_point(|&x| x <= t) - 1;
        let (l0, l1) = (self.t[i].ln(), self.t[i + 1].ln());
        let w = (t.ln() - l0) / (l1 - l0);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Derivative in `t` at each node by three-point differences on the
    /// non-uniform grid.
    pub fn derivative(&self) -> Vec<f64> {
        nonuniform_derivative(&self.t, &self.values)
    }
}

pub(crate) fn nonuniform_derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    if n == 2 {
        let d = (y[1] - y[0]) / (x[1] - x[0]);
        return vec![d, d];
    }
    let three = |i0: usize, at: usize| {
        let (x0, x1, x2) = (x[i0], x[i0 + 1], x[i0 + 2]);
        let (y0, y1, y2) = (y[i0], y[i0 + 1], y[i0 + 2]);
        let xa = x[at];
        y0 * (2.0 * xa - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (2.0 * xa - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (2.0 * xa - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    (0..n)
        .map(|i| {
            if i == 0 {
                three(0, 0)
            } else if i == n - 1 {
                three(n - 3, n - 1)
            } else {
                three(i - 1, i)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn monomial_oracle(gamma_exp: f64, beta: f64, t: f64) -> f64 {
        gamma(gamma_exp + 1.0) / gamma(gamma_exp + beta + 1.0) * t.powf(gamma_exp + beta)
    }

    #[test]
    fn examples() {
        let o = QuadOptions::default();
        assert_eq!(fractional_integral_h(|_| 0.0, 0.7, 1.3, &o).unwrap(), 0.0);
        let v = fractional_integral_h(|u| u, 0.5, 1.0, &o).unwrap();
        assert!((v - 0.752_252_778_063_675).abs() < 1e-10);
        let v = fractional_integral_h(|_| 1.0, 1.0, 0.7, &o).unwrap();
        assert!((v - 0.7).abs() < 1e-12);
        assert!((h_beta(|u| u, 1.0, 0.4, &o).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(h_beta(|u| u * u, 0.0, 0.4, &o).unwrap(), 0.4 * 0.4);
    }

    #[test]
    fn monomials_match_closed_form() {
        let o = QuadOptions::default();
        for (g, b) in [(1.0, 0.5), (0.5, 1.5), (2.0, 2.5), (-0.5, 0.3), (0.0, 0.05)] {
            for t in [0.2, 1.0, 3.0] {
                let v = fractional_integral_h(|u: f64| u.powf(g), b, t, &o).unwrap();
                let e = monomial_oracle(g, b, t);
                assert!(
                    (v - e).abs() <= 1e-8 * e.abs(),
                    "g={g} b={b} t={t}: {v} vs {e}"
                );
            }
        }
    }

    #[test]
    fn semigroup_on_monomials() {
        let o = QuadOptions::default();
        for (g, b1, b2) in [(1.0, 0.5, 0.7), (0.5, 1.5, 0.25), (2.0, 0.3, 2.2)] {
            for t in [0.2, 1.0, 3.0] {
                let inner = |u: f64| monomial_oracle(g, b2, u);
                let composed = fractional_integral_h(inner, b1, t, &o).unwrap();
                let direct = fractional_integral_h(|u: f64| u.powf(g), b1 + b2, t, &o).unwrap();
                assert!((composed - direct).abs() <= 1e-8 * direct.abs());
            }
        }
    }

    #[test]
    fn nonintegrable_is_diagnosed() {
        let r = fractional_integral_h(|u: f64| u.powi(-2), 0.5, 1.0, &QuadOptions::default());
        assert!(matches!(r, Err(Error::NonIntegrable { .. })), "{r:?}");
    }

    #[test]
    fn table_derivative_matches_lower_order_integral() {
        // d/dt H_β = (1/Γ(β-β0)) ∫_0^t (t-u)^{β-β0-1} dH_{β0}(u) with β0 < β.
        let o = QuadOptions::default();
        let (g, beta, beta0) = (0.5, 1.3, 0.6);
        let grid = log_grid_per_dyad(0.05, 3.5, 64);
        let table = FractionalIntegralTable::build(|u: f64| u.powf(g), beta, grid, &o).unwrap();
        let deriv = table.derivative();
        for (i, &t) in table.t.iter().enumerate() {
            if !(0.1..=3.0).contains(&t) {
                continue;
            }
            let dh0 = |u: f64| (g + beta0) * monomial_oracle(g, beta0, u) / u;
            let rep = fractional_integral_h(dh0, beta - beta0, t, &o).unwrap();
            assert!(
                (deriv[i] - rep).abs() <= 1e-4 * rep.abs(),
                "t={t}: {} vs {rep}",
                deriv[i]
            );
        }
    }

    #[test]
    fn interpolation_hits_nodes() {
        let table = FractionalIntegralTable {
            beta: 1.0,
            t: vec![0.1, 0.2, 0.4],
            values: vec![1.0, 2.0, 4.0],
        };
        assert_eq!(table.value_at(0.2), 2.0);
        assert_eq!(table.value_at(0.01), 1.0);
        assert!((table.value_at((0.08f64).sqrt()) - 3.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn h_beta_of_constant_is_constant(c in -4.0f64..4.0, beta in 0.0f64..3.0, t in 0.01f64..std::f64::consts::PI) {
            let v = h_beta(|_| c, beta, t, &QuadOptions::default()).unwrap();
            prop_assert!((v - c).abs() <= 1e-9 * (1.0 + c.abs()));
        }
    }
}
