//! Decay of the weighted integrals `∫ u^{r-i} (u-t)^{k-α} G_i(w, u) du` and of
//! their outer `w`-integrals.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{
    jittered_nodes, log_space, BoundFitReport, BoundRow, Estimate, ExponentCheck, ExponentFit,
};
use super::sums::{max_index, shifted_cos};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::quad::{
    integrate_breakpoints, integrate_from_singularity, kronrod_nodes, substitution_power,
    QuadOptions,
};

/// Sample layout for the decay checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayGrids {
    /// `w` values for the two pieces of the `u`-integral, taken at `t = π/(2w)`.
    pub near_w: Vec<f64>,
    /// `t` values for the outer integral over `w ∈ [1, π/t]`.
    pub inner_t: Vec<f64>,
    /// `t` values for the outer integral over `w ≥ π/t`.
    pub tail_t: Vec<f64>,
    /// The outer integral over `w ≥ π/t` stops at `tail_cutoff · π/t`.
    pub tail_cutoff: f64,
    /// `t` values and products `v = wt > π` for the region past `w = π/t`.
    pub far_t: Vec<f64>,
    pub far_v: Vec<f64>,
    /// Cap on the estimated number of summand evaluations.
    pub budget: u64,
}

fn dyadic_t(j_lo: i32, j_hi: i32) -> Vec<f64> {
    (j_lo..=j_hi).rev().map(|j| PI * 2f64.powi(-j)).collect()
}

impl Default for DecayGrids {
    fn default() -> Self {
        DecayGrids {
            near_w: log_space(16.0, 1024.0, 22),
            inner_t: dyadic_t(3, 10),
            tail_t: dyadic_t(2, 7),
            tail_cutoff: 8.0,
            far_t: dyadic_t(4, 7),
            far_v: log_space(1.25 * PI, 8.0 * PI, 16),
            budget: 20_000_000_000,
        }
    }
}

impl DecayGrids {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ParameterOutOfRange(m.into()));
        let ascending = |v: &[f64]| v.len() >= 3 && v.windows(2).all(|p| p[1] > p[0]);
        if !ascending(&self.near_w) || !ascending(&self.inner_t) || !ascending(&self.tail_t) {
            return bad("decay grids need at least three ascending values each");
        }
        if self.near_w[0] < 1.0 {
            return bad("w values must be ≥ 1");
        }
        let t_ok = |v: &[f64]| v.iter().all(|&t| t > 0.0 && t < PI);
        if !t_ok(&self.inner_t) || !t_ok(&self.tail_t) || !t_ok(&self.far_t) {
            return bad("t values must lie in (0, π)");
        }
        if !(self.tail_cutoff > 1.0) {
            return bad("tail_cutoff must exceed 1");
        }
        if !ascending(&self.far_t) || self.far_v.len() < 3 || self.far_v.iter().any(|&v| v <= PI) {
            return bad("far grid needs t values and at least three v > π");
        }
        Ok(())
    }

    /// Copy with the `w` nodes and the `wt` products jittered by up to `frac`.
    pub fn jittered<R: Rng>(&self, rng: &mut R, frac: f64) -> DecayGrids {
        DecayGrids {
            near_w: jittered_nodes(rng, &self.near_w, frac, 1.0, f64::MAX),
            far_v: jittered_nodes(rng, &self.far_v, frac, PI * (1.0 + 1e-9), f64::MAX),
            ..self.clone()
        }
    }

    /// Rough count of summand evaluations.
    fn cost(&self, indices: u64) -> u64 {
        let near: f64 = self.near_w.iter().map(|w| 21.0 * 2.0 * w * (w + 8.0)).sum();
        let table = |n: f64| 21.0 * n * n;
        let outer = |n: f64| 2.0 * 21.0 * n * n;
        let inner: f64 = self
            .inner_t
            .iter()
            .map(|t| table(PI / t) + outer(PI / t))
            .sum();
        let tail: f64 = self
            .tail_t
            .iter()
            .map(|t| {
                let n = self.tail_cutoff * PI / t;
                table(n) + outer(n)
            })
            .sum();
        let vmax = self.far_v.iter().copied().fold(0.0, f64::max);
        let far: f64 = self.far_t.iter().map(|t| table(vmax / t)).sum();
        ((near + inner + tail + far) * indices as f64) as u64
    }
}

/// Shared parameters of one `(kernel, r, i)` case.
struct Case<'a> {
    kernel: &'a Kernel,
    r: u32,
    i: u32,
    /// Derivative order `k + 1 - i`.
    order: u32,
    /// Exponent `k - α` of `(u - t)`.
    sing: f64,
}

impl Case<'_> {
    /// `q(n/w) n^order` for `n = 1..=floor(w)`.
    fn g_weights(&self, w: f64) -> Vec<f64> {
        (1..=w.floor() as u64)
            .map(|n| {
                let nf = n as f64;
                self.kernel.q_complement((w - nf) / w) * nf.powi(self.order as i32)
            })
            .collect()
    }

    fn g_from_weights(&self, weights: &[f64], u: f64) -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(idx, c)| c * shifted_cos(self.order, (idx + 1) as f64 * u))
            .sum()
    }

    /// `∫_t^{t+1/w}` of the weighted `G_i`, summed directly in `n`.
    fn near_piece(&self, w: f64, t: f64, opts: &QuadOptions) -> Result<f64> {
        let weights = self.g_weights(w);
        let p = (self.r - self.i) as i32;
        integrate_from_singularity(
            |d| (t + d).powi(p) * d.powf(self.sing) * self.g_from_weights(&weights, t + d),
            1.0 / w,
            self.sing,
            opts,
        )
        .map(|e| e.value)
    }

    /// `∫_{t+1/w}^π` of the weighted `G_i`, on panels of width `π/w`.
    fn far_piece(&self, w: f64, t: f64, opts: &QuadOptions) -> Result<f64> {
        let weights = self.g_weights(w);
        let p = (self.r - self.i) as i32;
        let a = t + 1.0 / w;
        if a >= PI {
            return Ok(0.0);
        }
        let panels = (((PI - a) * w / PI).ceil() as usize).max(1);
        let pts: Vec<f64> = (0..=panels)
            .map(|s| a + (PI - a) * s as f64 / panels as f64)
            .collect();
        integrate_breakpoints(
            |u| u.powi(p) * (u - t).powf(self.sing) * self.g_from_weights(&weights, u),
            &pts,
            &QuadOptions {
                max_intervals: opts.max_intervals.max(8 * panels),
                ..*opts
            },
        )
        .map(|e| e.value)
    }
}

/// The full `u`-integral over `[t, π]` with the `n`-sum taken outside:
/// `I(w, t) = sum_{n ≤ w} q(n/w) n^order c_n(t)`.
struct SwappedIntegral {
    /// `n^order c_n(t)`, index `n - 1`.
    coef: Vec<f64>,
}

impl SwappedIntegral {
    /// Computes `c_n(t) = ∫_t^π u^{r-i} (u-t)^{k-α} cos(nu + order π/2) du` for
    /// `n ≤ n_max` with one fixed rule resolving the highest frequency.
    fn build(case: &Case, t: f64, n_max: u64) -> Result<Self> {
        let len = PI - t;
        let p = substitution_power(case.sing)?;
        let panels = ((n_max as f64 * len * p / (2.0 * PI)).ceil() as usize).max(4);
        let mut nodes = Vec::with_capacity(21 * panels);
        for s in 0..panels {
            let (a, b) = (s as f64 / panels as f64, (s + 1) as f64 / panels as f64);
            for (x, wt) in kronrod_nodes(a, b) {
                let d = len * x.powf(p);
                let u = t + d;
                let weight = wt
                    * len
                    * p
                    * x.powf(p - 1.0)
                    * d.powf(case.sing)
                    * u.powi((case.r - case.i) as i32);
                nodes.push((u, weight));
            }
        }
        let n = n_max as usize;
        let (mut cs, mut sn) = (vec![0.0; n], vec![0.0; n]);
        const RESEED: usize = 32;
        for &(u, weight) in &nodes {
            let (s1, c1) = u.sin_cos();
            let (mut s, mut c) = (0.0, 1.0);
            for idx in 0..n {
                let m = idx + 1;
                if m % RESEED == 0 {
                    (s, c) = (m as f64 * u).sin_cos();
                } else {
                    (s, c) = (s * c1 + c * s1, c * c1 - s * s1);
                }
                cs[idx] += weight * c;
                sn[idx] += weight * s;
            }
        }
        let coef = (0..n)
            .map(|idx| {
                let c = match case.order % 4 {
                    0 => cs[idx],
                    1 => -sn[idx],
                    2 => -cs[idx],
                    _ => sn[idx],
                };
                ((idx + 1) as f64).powi(case.order as i32) * c
            })
            .collect();
        Ok(SwappedIntegral { coef })
    }

    fn eval(&self, kernel: &Kernel, w: f64) -> f64 {
        let top = (w.floor() as usize).min(self.coef.len());
        self.coef[..top]
            .iter()
            .enumerate()
            .map(|(idx, c)| kernel.q_complement((w - (idx + 1) as f64) / w) * c)
            .sum()
    }

    /// `∫_a^b |I(w, t)| w^{-2} dw` with panels at the integers.
    fn outer_integral(&self, kernel: &Kernel, a: f64, b: f64, opts: &QuadOptions) -> Result<f64> {
        let mut pts = vec![a];
        pts.extend(
            (a.floor() as u64 + 1..=b.ceil() as u64)
                .map(|n| n as f64)
                .filter(|&x| x > a && x < b),
        );
        pts.push(b);
        integrate_breakpoints(
            |w| self.eval(kernel, w).abs() / (w * w),
            &pts,
            &QuadOptions {
                max_intervals: opts.max_intervals.max(8 * pts.len()),
                ..*opts
            },
        )
        .map(|e| e.value)
    }
}

/// Runs the decay checks for every `i ≤ min(k - r, r)`.
///
/// Reports per index: the piece of the `u`-integral next to `u = t` and the
/// rest (both against `w^{α-r+1}` at `wt = π/2`), the outer `w`-integrals below
/// and above `w = π/t` (against `t^{-(α-r)}`), and the region `wt > π` against
/// `w^{α-k} q^k(1 - π/(wt)) / t^{k-r+1} + w^{α-k+1} Q_k(π/(wt)) / t^{k-r}`.
/// In that region the ratio to the bound must stay stable as `wt` grows, and
/// at fixed `wt` the integral must follow the bound's power of `t`.
pub fn check_decay_estimates(
    kernel: &Kernel,
    r: u32,
    grids: &DecayGrids,
) -> Result<Vec<BoundFitReport>> {
    run_decay(kernel, r, grids, |_| true)
}

/// One of the decay checks, for every index.
pub fn check_decay_estimate(
    kernel: &Kernel,
    r: u32,
    which: Estimate,
    grids: &DecayGrids,
) -> Result<Vec<BoundFitReport>> {
    if !which.is_decay() {
        return Err(Error::ParameterOutOfRange(format!(
            "{which} is not a decay estimate"
        )));
    }
    run_decay(kernel, r, grids, |e| e == which)
}

fn run_decay(
    kernel: &Kernel,
    r: u32,
    grids: &DecayGrids,
    wanted: impl Fn(Estimate) -> bool,
) -> Result<Vec<BoundFitReport>> {
    let m = max_index(kernel, r)?;
    grids.validate()?;
    kernel.qk_complement(0.5)?;
    let cost = grids.cost(m as u64 + 1);
    if cost > grids.budget {
        return Err(Error::BudgetExceeded {
            used: cost,
            cap: grids.budget,
        });
    }
    let alpha = kernel.alpha();
    let k = kernel.k();
    let opts = QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-9,
        max_intervals: 4000,
    };
    let mut out = Vec::new();
    for i in 0..=m {
        let case = Case {
            kernel,
            r,
            i,
            order: k + 1 - i,
            sing: k as f64 - alpha,
        };
        if wanted(Estimate::NearPieceDecay) {
            out.push(near_report(&case, grids, &opts, true)?);
        }
        if wanted(Estimate::RemainderPieceDecay) {
            out.push(near_report(&case, grids, &opts, false)?);
        }
        if wanted(Estimate::InnerIntegralDecay) {
            out.push(outer_report(&case, grids, &opts, false)?);
        }
        if wanted(Estimate::FarRegionBound) {
            out.push(far_report(&case, grids)?);
        }
        if wanted(Estimate::TailIntegralDecay) {
            out.push(outer_report(&case, grids, &opts, true)?);
        }
    }
    Ok(out)
}

fn near_report(
    case: &Case,
    grids: &DecayGrids,
    opts: &QuadOptions,
    first: bool,
) -> Result<BoundFitReport> {
    let predicted = case.kernel.alpha() - case.r as f64 + 1.0;
    let rows = grids
        .near_w
        .par_iter()
        .map(|&w| {
            let t = PI / (2.0 * w);
            let lhs = if first {
                case.near_piece(w, t, opts)?
            } else {
                case.far_piece(w, t, opts)?
            };
            Ok(BoundRow::new([w, t], lhs, w.powf(predicted)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (estimate, range) = if first {
        (Estimate::NearPieceDecay, "[t, t+1/w]")
    } else {
        (Estimate::RemainderPieceDecay, "[t+1/w, π]")
    };
    let mut report = BoundFitReport::new(
        estimate,
        format!("i={} u in {range}", case.i),
        format!("w^{predicted}"),
        ["w", "t"],
    );
    report.grid = format!(
        "{} w values in [{}, {}], t = π/(2w)",
        grids.near_w.len(),
        grids.near_w[0],
        grids.near_w.last().unwrap()
    );
    let lhs: Vec<f64> = rows.iter().map(|r| r.lhs.abs()).collect();
    report.fits.push(ExponentFit::fit(
        "w",
        &grids.near_w,
        &lhs,
        predicted,
        ExponentCheck::Matches,
    ));
    report.rows = rows;
    Ok(report.finish())
}

fn outer_report(
    case: &Case,
    grids: &DecayGrids,
    opts: &QuadOptions,
    tail: bool,
) -> Result<BoundFitReport> {
    let predicted = -(case.kernel.alpha() - case.r as f64);
    let ts = if tail { &grids.tail_t } else { &grids.inner_t };
    let rows = ts
        .par_iter()
        .map(|&t| {
            let (a, b) = if tail {
                (PI / t, grids.tail_cutoff * PI / t)
            } else {
                (1.0, PI / t)
            };
            let table = SwappedIntegral::build(case, t, b.floor() as u64)?;
            let lhs = table.outer_integral(case.kernel, a, b, opts)?;
            Ok(BoundRow::new([b, t], lhs, t.powf(predicted)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (estimate, grid) = if tail {
        (
            Estimate::TailIntegralDecay,
            format!(
                "{} t values in [{}, {}], w from π/t to {}·π/t",
                ts.len(),
                ts[0],
                ts.last().unwrap(),
                grids.tail_cutoff
            ),
        )
    } else {
        (
            Estimate::InnerIntegralDecay,
            format!(
                "{} t values in [{}, {}], w from 1 to π/t",
                ts.len(),
                ts[0],
                ts.last().unwrap()
            ),
        )
    };
    let mut report = BoundFitReport::new(
        estimate,
        format!("i={}", case.i),
        format!("t^{predicted}"),
        ["w_max", "t"],
    );
    report.grid = grid;
    let lhs: Vec<f64> = rows.iter().map(|r| r.lhs).collect();
    report.fits.push(ExponentFit::fit(
        "t",
        ts,
        &lhs,
        predicted,
        ExponentCheck::Matches,
    ));
    report.rows = rows;
    Ok(report.finish())
}

fn far_report(case: &Case, grids: &DecayGrids) -> Result<BoundFitReport> {
    let kernel = case.kernel;
    let (alpha, k, r) = (kernel.alpha(), kernel.k() as f64, case.r as f64);
    let bound = |w: f64, t: f64| -> Result<f64> {
        let d = PI / (w * t);
        Ok(
            w.powf(alpha - k) * kernel.qk_complement(d)?.abs() / t.powf(k - r + 1.0)
                + w.powf(alpha - k + 1.0) * kernel.eval_Qk(d)?.abs() / t.powf(k - r),
        )
    };
    let vmax = grids.far_v.iter().copied().fold(0.0, f64::max);
    let per_t = grids
        .far_t
        .par_iter()
        .map(|&t| {
            let table = SwappedIntegral::build(case, t, (vmax / t).floor() as u64)?;
            grids
                .far_v
                .iter()
                .map(|&v| {
                    let w = v / t;
                    Ok(BoundRow::new([w, t], table.eval(kernel, w), bound(w, t)?))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = BoundFitReport::new(
        Estimate::FarRegionBound,
        format!("i={} wt>π", case.i),
        "w^(α-k) q^k(1-π/(wt)) / t^(k-r+1) + w^(α-k+1) Q_k(π/(wt)) / t^(k-r)",
        ["w", "t"],
    );
    report.grid = format!(
        "t in {:?}, wt in [{}, {}] ({} points)",
        grids.far_t,
        grids.far_v[0],
        vmax,
        grids.far_v.len()
    );
    // The ratio must not grow with wt at any fixed t.
    let mut growth: f64 = 0.0;
    for rows in &per_t {
        let mut probe = BoundFitReport::new(Estimate::FarRegionBound, "", "", ["w", "t"]);
        probe.set_growth(&rows.iter().map(|r| r.ratio).collect::<Vec<_>>());
        growth = growth.max(probe.constant_growth.unwrap_or(f64::INFINITY));
    }
    // At fixed wt both sides scale as a power of t.
    for (idx, &v) in grids.far_v.iter().enumerate() {
        let lhs: Vec<f64> = per_t.iter().map(|rows| rows[idx].lhs.abs()).collect();
        let bounds: Vec<f64> = per_t.iter().map(|rows| rows[idx].bound).collect();
        let predicted =
            crate::regression::loglog_fit(&grids.far_t, &bounds).map_or(f64::NAN, |l| l.slope);
        let mut fit = ExponentFit::fit("t", &grids.far_t, &lhs, predicted, ExponentCheck::Matches);
        fit.variable = format!("t at wt={v:.6}");
        report.fits.push(fit);
    }
    report.constant_growth = Some(growth);
    report.rows = per_t.into_iter().flatten().collect();
    Ok(report.finish())
}
