//! Growth of the alternating kernel sums `sum (-1)^n n^p q(n/w)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{BoundFitReport, BoundRow, Estimate, ExponentCheck, ExponentFit};
use super::sums::alt_sum;
use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Dyadic sweep `w ∈ [2^j_min, 2^j_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DyadicSweep {
    pub j_min: u32,
    pub j_max: u32,
    pub points_per_dyad: usize,
}

impl Default for DyadicSweep {
    fn default() -> Self {
        DyadicSweep {
            j_min: 4,
            j_max: 13,
            points_per_dyad: 32,
        }
    }
}

impl DyadicSweep {
    fn points(&self) -> Vec<f64> {
        let n = (self.j_max - self.j_min) as usize * self.points_per_dyad;
        (0..=n)
            .map(|s| 2f64.powf(self.j_min as f64 + s as f64 / self.points_per_dyad as f64))
            .collect()
    }
}

fn require_alpha_ge_one(kernel: &Kernel) -> Result<()> {
    if kernel.alpha() < 1.0 {
        return Err(Error::ParameterOutOfRange(format!(
            "alternating-sum bounds need alpha ≥ 1 (got {})",
            kernel.alpha()
        )));
    }
    Ok(())
}

/// Running sup of `|alt_sum(p, ·)|` over the sweep for `p ≤ k - 1`.
///
/// `constant_growth` is the sup up to `2^j_max` divided by the sup up to
/// `2^(j_max-3)`; the sums are bounded when it stays below `1 + growth_tol`.
pub fn check_alt_sum_saturation(
    kernel: &Kernel,
    p: u32,
    sweep: &DyadicSweep,
    growth_tol: f64,
) -> Result<BoundFitReport> {
    require_alpha_ge_one(kernel)?;
    let k = kernel.k();
    if p + 1 > k {
        return Err(Error::OrderTooHigh { p, k: k - 1 });
    }
    if sweep.j_max < sweep.j_min + 3 {
        return Err(Error::ParameterOutOfRange(
            "sweep must span at least three dyads".into(),
        ));
    }
    let ws = sweep.points();
    let vals = ws
        .par_iter()
        .map(|&w| alt_sum(kernel, p, w))
        .collect::<Result<Vec<f64>>>()?;
    let mut report = BoundFitReport::new(
        Estimate::AlternatingSaturation,
        format!("p={p}"),
        "1",
        ["w", "p"],
    );
    report.grid = format!(
        "w = 2^s, s in [{}, {}], {} points per dyad",
        sweep.j_min, sweep.j_max, sweep.points_per_dyad
    );
    report.rows = ws
        .iter()
        .zip(&vals)
        .map(|(&w, &v)| BoundRow::new([w, p as f64], v, 1.0))
        .collect();
    let cut = 2f64.powi(sweep.j_max as i32 - 3);
    let sup_until = |limit: f64| {
        ws.iter()
            .zip(&vals)
            .filter(|(&w, _)| w <= limit * (1.0 + 1e-12))
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    };
    let (early, total) = (sup_until(cut), sup_until(f64::INFINITY));
    report.constant_growth = Some(if early > 0.0 {
        total / early
    } else {
        f64::INFINITY
    });
    report.growth_limit = 1.0 + growth_tol;
    Ok(report.finish())
}

/// Compares `alt_sum(k, w)` with `q^k(1 - 1/w) + w Q_k(1/w)`.
///
/// The per-dyad sup of the sum is fitted against `w` and must not grow faster
/// than the bound itself, and the ratio must not grow across the sweep.
pub fn check_alt_sum_top_order(kernel: &Kernel, sweep: &DyadicSweep) -> Result<BoundFitReport> {
    require_alpha_ge_one(kernel)?;
    let k = kernel.k();
    let ws = sweep.points();
    let rows = ws
        .par_iter()
        .map(|&w| {
            let lhs = alt_sum(kernel, k, w)?;
            let bound = kernel.qk_complement(1.0 / w)?.abs() + w * kernel.eval_Qk(1.0 / w)?.abs();
            Ok(BoundRow::new([w, k as f64], lhs, bound))
        })
        .collect::<Result<Vec<BoundRow>>>()?;
    let mut report = BoundFitReport::new(
        Estimate::AlternatingTopOrder,
        format!("p=k={k}"),
        "q^k(1-1/w) + w Q_k(1/w)",
        ["w", "p"],
    );
    report.grid = format!(
        "w = 2^s, s in [{}, {}], {} points per dyad",
        sweep.j_min, sweep.j_max, sweep.points_per_dyad
    );
    let per = sweep.points_per_dyad;
    let (mut dyad_w, mut dyad_lhs, mut dyad_bound) = (Vec::new(), Vec::new(), Vec::new());
    for chunk in rows[1..].chunks(per) {
        let last = chunk.last().unwrap();
        dyad_w.push(last.coords[0]);
        dyad_lhs.push(chunk.iter().map(|r| r.lhs.abs()).fold(0.0, f64::max));
        dyad_bound.push(last.bound);
    }
    let predicted =
        crate::regression::loglog_fit(&dyad_w, &dyad_bound).map_or(f64::NAN, |l| l.slope);
    report.fits.push(ExponentFit::fit(
        "w",
        &dyad_w,
        &dyad_lhs,
        predicted,
        ExponentCheck::AtMost,
    ));
    report.set_growth(&rows.iter().map(|r| r.ratio).collect::<Vec<_>>());
    report.rows = rows;
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::make_cesaro_kernel;

    #[test]
    fn lower_orders_saturate() {
        let q = make_cesaro_kernel(2.5, 0.4).unwrap();
        for p in 0..=1 {
            let r = check_alt_sum_saturation(&q, p, &DyadicSweep::default(), 0.1).unwrap();
            assert!(r.pass, "p={p}: growth {:?}", r.constant_growth);
        }
        assert!(matches!(
            check_alt_sum_saturation(&q, 2, &DyadicSweep::default(), 0.1),
            Err(Error::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn top_order_follows_bound() {
        let q = make_cesaro_kernel(2.5, 0.4).unwrap();
        let r = check_alt_sum_top_order(&q, &DyadicSweep::default()).unwrap();
        assert!(r.pass, "{:?} growth {:?}", r.fits, r.constant_growth);
    }

    #[test]
    fn small_alpha_rejected() {
        let q = make_cesaro_kernel(0.0, 1.0).unwrap();
        assert!(check_alt_sum_saturation(&q, 0, &DyadicSweep::default(), 0.1).is_err());
    }
}
