use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::derived::{h_closure, DerivedSeriesSpec};
use super::fractional::{fractional_integral_h, h_beta, log_grid_per_dyad, nonuniform_derivative};
use super::function::PeriodicFunction;
use crate::accel::aitken_iterated;
use crate::error::{Error, Result};
use crate::quad::QuadOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisSet {
    /// `H_β(+0) = 0` and `∫_0^π t^{-β} |H_β'(t)| dt < ∞`.
    FractionalVariation,
    /// `∫_0^π t^{-1} |h_ρ(t)| dt < ∞`.
    WeightedIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HypothesisVerdict {
    Holds,
    Fails,
    Inconclusive,
}

impl fmt::Display for HypothesisVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HypothesisVerdict::Holds => "Holds",
            HypothesisVerdict::Fails => "Fails",
            HypothesisVerdict::Inconclusive => "Inconclusive",
        })
    }
}

impl HypothesisVerdict {
    fn and(self, other: HypothesisVerdict) -> HypothesisVerdict {
        use HypothesisVerdict::*;
        match (self, other) {
            (Fails, _) | (_, Fails) => Fails,
            (Holds, Holds) => Holds,
            _ => Inconclusive,
        }
    }
}

/// Grids and thresholds for the hypothesis checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOptions {
    /// Increasing log-spaced `t` grid ending at π.
    pub grid: Vec<f64>,
    /// Decreasing ε values at which partial integrals are reported.
    pub eps_list: Vec<f64>,
    /// Start of the halving sequence used to extrapolate `H_β(+0)`.
    pub t0: f64,
    pub halvings: usize,
    /// Threshold on the extrapolated `|H_β(+0)|`.
    pub zero_tol: f64,
    /// Relative size of the last partial-integral step below which the
    /// sequence counts as settled.
    pub cauchy_rel: f64,
    /// Largest ratio of successive steps accepted as geometric decay.
    pub cauchy_ratio: f64,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        HypothesisOptions {
            grid: log_grid_per_dyad(PI * 2f64.powi(-15), PI, 16),
            eps_list: (1..=14).map(|j| PI * 2f64.powi(-j)).collect(),
            t0: PI / 4.0,
            halvings: 10,
            zero_tol: 1e-6,
            cauchy_rel: 0.05,
            cauchy_ratio: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub hypotheses: HypothesisSet,
    /// Extrapolated `H_β(+0)` with its error estimate (variation set only).
    pub h_beta_at_0plus: Option<(f64, f64)>,
    pub zero_limit: Option<HypothesisVerdict>,
    pub variation_integral_partials: Vec<(f64, f64)>,
    pub integral: HypothesisVerdict,
    pub verdict: HypothesisVerdict,
    pub notes: Vec<String>,
}

/// Verdict on a sequence of partial integrals ordered by decreasing ε.
pub fn cauchy_verdict(partials: &[(f64, f64)], rel: f64, ratio: f64) -> HypothesisVerdict {
    let n = partials.len();
    if n < 3 {
        return HypothesisVerdict::Inconclusive;
    }
    let last = partials[n - 1].1;
    if partials.iter().any(|p| !p.1.is_finite()) {
        return HypothesisVerdict::Fails;
    }
    if last == 0.0 {
        return HypothesisVerdict::Holds;
    }
    let inc_last = last - partials[n - 2].1;
    let inc_prev = partials[n - 2].1 - partials[n - 3].1;
    let step = inc_last / last;
    let geometric = inc_last <= ratio * inc_prev || inc_last <= 1e-12 * last;
    if step < rel && geometric {
        HypothesisVerdict::Holds
    } else if step >= rel {
        HypothesisVerdict::Fails
    } else {
        HypothesisVerdict::Inconclusive
    }
}

/// `∫_ε^{t_max} g(t) dt` for each ε, by the trapezoid rule in `ln t` on the
/// grid nodes. Values of ε outside the grid are skipped.
fn log_partials(grid: &[f64], g: &[f64], eps_list: &[f64]) -> Vec<(f64, f64)> {
    let n = grid.len();
    // cumulative[i] = ∫_{grid[i]}^{grid[n-1]} g dt
    let mut cumulative = vec![0.0; n];
    for i in (0..n - 1).rev() {
        let dl = grid[i + 1].ln() - grid[i].ln();
        cumulative[i] = cumulative[i + 1] + 0.5 * dl * (g[i] * grid[i] + g[i + 1] * grid[i + 1]);
    }
    eps_list
        .iter()
        .filter(|&&e| e >= grid[0] * (1.0 - 1e-12) && e <= grid[n - 1])
        .map(|&e| {
            let i = grid
                .partition_point(|&x| x <= e * (1.0 + 1e-12))
                .saturating_sub(1)
                .min(n - 2);
            let (l0, l1) = (grid[i].ln(), grid[i + 1].ln());
            let w = ((e.ln() - l0) / (l1 - l0)).clamp(0.0, 1.0);
            (e, cumulative[i] * (1.0 - w) + cumulative[i + 1] * w)
        })
        .collect()
}

fn validate_grid(opts: &HypothesisOptions) -> Result<()> {
    if opts.grid.len() < 3 || opts.grid.windows(2).any(|p| p[1] <= p[0]) || opts.grid[0] <= 0.0 {
        return Err(Error::ParameterOutOfRange(
            "hypothesis grid must be increasing, positive, ≥ 3 points".into(),
        ));
    }
    Ok(())
}

/// Variation hypotheses for a given `h`: `H_β(+0) = 0` and finiteness of
/// `∫_0^π t^{-β} |H_β'(t)| dt`.
pub fn check_variation_h<H: Fn(f64) -> f64 + Sync>(
    h: H,
    beta: f64,
    opts: &HypothesisOptions,
) -> Result<HypothesisReport> {
    if !(beta > 0.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "requires beta = alpha - r > 0 (got {beta})"
        )));
    }
    validate_grid(opts)?;
    let quad = QuadOptions::default();
    let mut notes = Vec::new();

    let samples: Vec<f64> = (0..opts.halvings)
        .map(|j| opts.t0 * 2f64.powi(-(j as i32)))
        .collect();
    let values: Result<Vec<f64>> = samples
        .par_iter()
        .map(|&t| fractional_integral_h(&h, beta, t, &quad))
        .collect();
    let (h0, zero_limit) = match values {
        Ok(v) => {
            let (lim, err) = aitken_iterated(&v);
            let verdict = if lim.abs() < opts.zero_tol {
                HypothesisVerdict::Holds
            } else if err > lim.abs() {
                HypothesisVerdict::Inconclusive
            } else {
                HypothesisVerdict::Fails
            };
            (Some((lim, err)), verdict)
        }
        Err(e) => {
            notes.push(format!("H_beta near 0: {e}"));
            (None, HypothesisVerdict::Fails)
        }
    };

    // H_β' = H_{β-1} when β > 1; otherwise differentiate the table.
    let deriv: Result<Vec<f64>> = if beta > 1.0 {
        opts.grid
            .par_iter()
            .map(|&t| fractional_integral_h(&h, beta - 1.0, t, &quad))
            .collect()
    } else {
        opts.grid
            .par_iter()
            .map(|&t| fractional_integral_h(&h, beta, t, &quad))
            .collect::<Result<Vec<f64>>>()
            .map(|vals| nonuniform_derivative(&opts.grid, &vals))
    };
    let (partials, integral) = match deriv {
        Ok(d) => {
            let g: Vec<f64> = opts
                .grid
                .iter()
                .zip(&d)
                .map(|(&t, &dv)| t.powf(-beta) * dv.abs())
                .collect();
            let partials = log_partials(&opts.grid, &g, &opts.eps_list);
            let v = cauchy_verdict(&partials, opts.cauchy_rel, opts.cauchy_ratio);
            (partials, v)
        }
        Err(e) => {
            notes.push(format!("variation integrand: {e}"));
            (Vec::new(), HypothesisVerdict::Fails)
        }
    };

    Ok(HypothesisReport {
        hypotheses: HypothesisSet::FractionalVariation,
        h_beta_at_0plus: h0,
        zero_limit: Some(zero_limit),
        variation_integral_partials: partials,
        integral,
        verdict: zero_limit.and(integral),
        notes,
    })
}

/// Weighted-integral hypothesis for a given `h`: finiteness of `∫_0^π t^{-1}|h_ρ(t)| dt`.
pub fn check_weighted_integral_h<H: Fn(f64) -> f64 + Sync>(
    h: H,
    rho: f64,
    opts: &HypothesisOptions,
) -> Result<HypothesisReport> {
    if !(rho >= 0.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "requires rho = alpha - r - 1 ≥ 0 (got {rho})"
        )));
    }
    validate_grid(opts)?;
    let quad = QuadOptions::default();
    let mut notes = Vec::new();
    let vals: Result<Vec<f64>> = opts
        .grid
        .par_iter()
        .map(|&t| h_beta(&h, rho, t, &quad))
        .collect();
    let (partials, integral) = match vals {
        Ok(v) => {
            let g: Vec<f64> = opts
                .grid
                .iter()
                .zip(&v)
                .map(|(&t, &hv)| hv.abs() / t)
                .collect();
            let partials = log_partials(&opts.grid, &g, &opts.eps_list);
            let verdict = cauchy_verdict(&partials, opts.cauchy_rel, opts.cauchy_ratio);
            (partials, verdict)
        }
        Err(e) => {
            notes.push(format!("h_rho: {e}"));
            (Vec::new(), HypothesisVerdict::Fails)
        }
    };
    Ok(HypothesisReport {
        hypotheses: HypothesisSet::WeightedIntegral,
        h_beta_at_0plus: None,
        zero_limit: None,
        variation_integral_partials: partials,
        integral,
        verdict: integral,
        notes,
    })
}

pub fn check_variation(
    f: &PeriodicFunction,
    spec: &DerivedSeriesSpec,
    opts: &HypothesisOptions,
) -> Result<HypothesisReport> {
    check_variation_h(h_closure(f, spec), spec.beta(), opts)
}

pub fn check_weighted_integral(
    f: &PeriodicFunction,
    spec: &DerivedSeriesSpec,
    opts: &HypothesisOptions,
) -> Result<HypothesisReport> {
    check_weighted_integral_h(h_closure(f, spec), spec.rho(), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_rules() {
        let geometric: Vec<(f64, f64)> = (1..10).map(|j| (0.0, 1.0 - 0.5f64.powi(j))).collect();
        assert_eq!(
            cauchy_verdict(&geometric, 0.05, 0.8),
            HypothesisVerdict::Holds
        );
        let log: Vec<(f64, f64)> = (1..10).map(|j| (0.0, j as f64)).collect();
        assert_eq!(cauchy_verdict(&log, 0.05, 0.8), HypothesisVerdict::Fails);
        let loglog: Vec<(f64, f64)> = (1..=14).map(|j| (0.0, ((j + 1) as f64).ln())).collect();
        assert_eq!(
            cauchy_verdict(&loglog, 0.05, 0.8),
            HypothesisVerdict::Inconclusive
        );
        assert_eq!(
            cauchy_verdict(&[(1.0, 0.0); 4], 0.05, 0.8),
            HypothesisVerdict::Holds
        );
    }

    #[test]
    fn zero_h_holds_exactly() {
        let o = HypothesisOptions::default();
        let r1 = check_variation_h(|_| 0.0, 0.5, &o).unwrap();
        assert_eq!(r1.verdict, HypothesisVerdict::Holds);
        assert_eq!(r1.h_beta_at_0plus.unwrap().0, 0.0);
        let r2 = check_weighted_integral_h(|_| 0.0, 0.0, &o).unwrap();
        assert_eq!(r2.verdict, HypothesisVerdict::Holds);
        assert!(r2.variation_integral_partials.iter().all(|p| p.1 == 0.0));
    }

    #[test]
    fn linear_h_weighted_integral() {
        let o = HypothesisOptions::default();
        let rep = check_weighted_integral_h(|u| u, 0.0, &o).unwrap();
        for &(e, p) in &rep.variation_integral_partials {
            assert!((p - (PI - e)).abs() < 1e-3 * PI, "{e}: {p}");
        }
        assert_eq!(rep.verdict, HypothesisVerdict::Holds);
    }

    #[test]
    fn log_decay_is_not_settled() {
        let o = HypothesisOptions::default();
        let rep = check_weighted_integral_h(|u: f64| 1.0 / (2.0 * PI / u).ln(), 0.0, &o).unwrap();
        assert_ne!(rep.verdict, HypothesisVerdict::Holds);
        // Partials follow ln ln(2π/ε) - ln ln 2.
        for &(e, p) in &rep.variation_integral_partials {
            let exact = (2.0 * PI / e).ln().ln() - 2f64.ln().ln();
            assert!((p - exact).abs() < 1e-3, "{e}: {p} vs {exact}");
        }
    }

    #[test]
    fn smooth_and_jump_functions_are_discriminated() {
        let o = HypothesisOptions::default();
        let smooth = PeriodicFunction::trig(vec![0.0, 0.0, 0.5], vec![0.0, 1.0, 0.0, 0.3]);
        let spec = DerivedSeriesSpec::with_default_theta(&smooth, 0.7, 2, 2.5).unwrap();
        let rep = check_variation(&smooth, &spec, &o).unwrap();
        assert_eq!(rep.verdict, HypothesisVerdict::Holds, "{rep:?}");

        let sq = PeriodicFunction::square();
        let spec = DerivedSeriesSpec::new(0.0, 2, vec![0.0, 0.0], 2.5).unwrap();
        let rep = check_variation(&sq, &spec, &o).unwrap();
        assert_eq!(rep.verdict, HypothesisVerdict::Fails, "{rep:?}");
    }

    #[test]
    fn checks_reject_nonpositive_beta() {
        assert!(check_variation_h(|u| u, 0.0, &HypothesisOptions::default()).is_err());
        assert!(check_weighted_integral_h(|u| u, -0.5, &HypothesisOptions::default()).is_err());
    }
}
