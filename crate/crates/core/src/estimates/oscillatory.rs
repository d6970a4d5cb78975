//! Power-law bounds for `S^{i,j}(x, u)` on both sides of `u = 1/x`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{
    jittered_nodes, log_space, BoundFitReport, BoundRow, Estimate, ExponentCheck, ExponentFit,
};
use super::sums::s_sum;
use crate::error::{Error, Result};

/// Sample layout for the `S^{i,j}` bound checks.
///
/// `x_values` is the abscissa of the x-exponent fits, `u_values` that of the
/// u-exponent fit for `u > 1/x`. Each abscissa point is paired with a slice
/// of the other variable and the sup over the slice is fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SumGrid {
    pub x_values: Vec<f64>,
    pub u_values: Vec<f64>,
    pub max_i: u32,
    pub max_j: u32,
    /// Largest x in the slices used for the u-exponent fits.
    pub x_max: f64,
    /// Upper end of the u slices for `u > 1/x`.
    pub u_slice_max: f64,
    pub u_slice_points: usize,
    pub x_slice_points: usize,
}

impl Default for SumGrid {
    fn default() -> Self {
        SumGrid {
            x_values: log_space(16.0, 1024.0, 22),
            u_values: log_space(8.0 / 4096.0, 0.25, 24),
            max_i: 2,
            max_j: 2,
            x_max: 4096.0,
            u_slice_max: PI / 4.0,
            u_slice_points: 24,
            x_slice_points: 160,
        }
    }
}

fn ascending(v: &[f64]) -> bool {
    v.windows(2).all(|p| p[1] > p[0])
}

impl SumGrid {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ParameterOutOfRange(m.into()));
        if self.x_values.len() < 3 || self.u_values.len() < 3 {
            return bad("grid needs at least three x and three u values");
        }
        if !ascending(&self.x_values) || !ascending(&self.u_values) {
            return bad("grid values must be ascending");
        }
        if self.x_values[0] < 1.0 || self.x_max < *self.x_values.last().unwrap() {
            return bad("x values must lie in [1, x_max]");
        }
        if !(self.u_values[0] > 0.0) || *self.u_values.last().unwrap() > PI || self.u_slice_max > PI
        {
            return bad("u values must lie in (0, π]");
        }
        if self.u_slice_points < 2 || self.x_slice_points < 2 {
            return bad("slices need at least two points");
        }
        Ok(())
    }

    /// Copy with every node scaled by an independent factor in
    /// `[1 - frac, 1 + frac]`, re-sorted and clamped to the valid ranges.
    pub fn jittered<R: Rng>(&self, rng: &mut R, frac: f64) -> SumGrid {
        SumGrid {
            x_values: jittered_nodes(rng, &self.x_values, frac, 1.0, self.x_max),
            u_values: jittered_nodes(rng, &self.u_values, frac, f64::MIN_POSITIVE, PI),
            ..self.clone()
        }
    }
}

/// Exponents `(a, b)` of the bound `x^a u^b` for `u > 1/x`.
///
/// For `j ≤ i` the bound is `x^i u^{-j-1}`, otherwise `x^j u^{-i-1}`.
pub fn far_exponents(i: u32, j: u32) -> (f64, f64) {
    if j <= i {
        (i as f64, -(j as f64) - 1.0)
    } else {
        (j as f64, -(i as f64) - 1.0)
    }
}

/// Bound checks for every `(i, j)` of the grid, two reports per pair: one for
/// `u > 1/x` and one for `u ≤ 1/x`.
pub fn check_oscillatory_sums(grid: &SumGrid) -> Result<Vec<BoundFitReport>> {
    grid.validate()?;
    let pairs: Vec<(u32, u32)> = (0..=grid.max_i)
        .flat_map(|i| (0..=grid.max_j).map(move |j| (i, j)))
        .collect();
    Ok(pairs
        .par_iter()
        .flat_map_iter(|&(i, j)| [far_regime(grid, i, j), near_regime(grid, i, j)])
        .collect())
}

/// Sup of `value(p)` over `points`, returned with its maximiser.
fn sup_over(points: &[f64], value: impl Fn(f64) -> f64) -> (f64, f64) {
    points
        .iter()
        .map(|&p| (value(p), p))
        .fold((0.0, points[0]), |acc, c| if c.0 > acc.0 { c } else { acc })
}

fn far_regime(grid: &SumGrid, i: u32, j: u32) -> BoundFitReport {
    let (a, b) = far_exponents(i, j);
    let mut report = BoundFitReport::new(
        Estimate::OscillatorySum,
        format!("i={i} j={j} u>1/x"),
        format!("x^{a} u^{b}"),
        ["x", "u"],
    );
    report.grid = format!(
        "x fit: {} points in [{}, {}], u slice ({}/x, {}]; u fit: {} points in [{}, {}], x slice (1/u, {}]",
        grid.x_values.len(),
        grid.x_values[0],
        grid.x_values.last().unwrap(),
        1.001,
        grid.u_slice_max,
        grid.u_values.len(),
        grid.u_values[0],
        grid.u_values.last().unwrap(),
        grid.x_max
    );
    let bound = |x: f64, u: f64| x.powf(a) * u.powf(b);

    let mut x_env = Vec::new();
    for &x in &grid.x_values {
        let us = log_space(1.001 / x, grid.u_slice_max, grid.u_slice_points);
        let (m, u) = sup_over(&us, |u| s_sum(i, j, x, u).abs() * u.powf(-b));
        x_env.push(m);
        report
            .rows
            .push(BoundRow::new([x, u], s_sum(i, j, x, u), bound(x, u)));
    }
    let mut u_env = Vec::new();
    for &u in &grid.u_values {
        let lo = (1.0 / u).max(1.0) * 1.001;
        let xs = log_space(lo, grid.x_max, grid.x_slice_points);
        let (m, x) = sup_over(&xs, |x| s_sum(i, j, x, u).abs() * x.powf(-a));
        u_env.push(m);
        report
            .rows
            .push(BoundRow::new([x, u], s_sum(i, j, x, u), bound(x, u)));
    }
    report.fits.push(ExponentFit::fit(
        "x",
        &grid.x_values,
        &x_env,
        a,
        ExponentCheck::Matches,
    ));
    report.fits.push(ExponentFit::fit(
        "u",
        &grid.u_values,
        &u_env,
        b,
        ExponentCheck::Matches,
    ));
    report.min_r_squared = Some(0.9);
    report.finish()
}

fn near_regime(grid: &SumGrid, i: u32, j: u32) -> BoundFitReport {
    let a = (i + j + 1) as f64;
    let mut report = BoundFitReport::new(
        Estimate::OscillatorySum,
        format!("i={i} j={j} u<=1/x"),
        format!("x^{a}"),
        ["x", "u"],
    );
    let x_lo = grid.x_values[0];
    let x_hi = *grid.x_values.last().unwrap();
    let us_fit = log_space(1.0 / x_hi, 1.0 / x_lo, grid.u_values.len());
    report.grid = format!(
        "x fit: {} points in [{x_lo}, {x_hi}], u slice [1e-3/x, 1/x]; u fit: {} points in [{}, {}], x slice [1, 1/u]",
        grid.x_values.len(),
        us_fit.len(),
        us_fit[0],
        us_fit.last().unwrap()
    );
    let mut x_env = Vec::new();
    for &x in &grid.x_values {
        let us = log_space(1e-3 / x, 1.0 / x, grid.u_slice_points);
        let (m, u) = sup_over(&us, |u| s_sum(i, j, x, u).abs());
        x_env.push(m);
        report
            .rows
            .push(BoundRow::new([x, u], s_sum(i, j, x, u), x.powf(a)));
    }
    let mut u_env = Vec::new();
    for &u in &us_fit {
        let xs = log_space(1.0, 1.0 / u, grid.x_slice_points.min(100));
        let (m, x) = sup_over(&xs, |x| s_sum(i, j, x, u).abs() / x.powf(a));
        u_env.push(m);
        report
            .rows
            .push(BoundRow::new([x, u], s_sum(i, j, x, u), x.powf(a)));
    }
    report.fits.push(ExponentFit::fit(
        "x",
        &grid.x_values,
        &x_env,
        a,
        ExponentCheck::Matches,
    ));
    report.fits.push(ExponentFit::fit(
        "u",
        &us_fit,
        &u_env,
        0.0,
        ExponentCheck::Matches,
    ));
    report.min_r_squared = Some(0.9);
    report.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_grid() -> SumGrid {
        SumGrid {
            x_values: log_space(8.0, 512.0, 12),
            u_values: log_space(8.0 / 2048.0, 0.25, 12),
            max_i: 1,
            max_j: 1,
            x_max: 2048.0,
            x_slice_points: 80,
            ..SumGrid::default()
        }
    }

    #[test]
    fn dirichlet_case_exponents() {
        let reports = check_oscillatory_sums(&small_grid()).unwrap();
        let near = reports.iter().find(|r| r.case == "i=0 j=0 u<=1/x").unwrap();
        assert!((near.fits[0].fitted - 1.0).abs() < 0.15, "{:?}", near.fits);
        let far = reports.iter().find(|r| r.case == "i=0 j=0 u>1/x").unwrap();
        assert!((far.fits[1].fitted + 1.0).abs() < 0.15, "{:?}", far.fits);
        assert!(reports
            .iter()
            .all(|r| r.violations == 0 && r.constant > 0.0));
    }

    #[test]
    fn far_exponent_forms() {
        assert_eq!(far_exponents(2, 0), (2.0, -1.0));
        assert_eq!(far_exponents(1, 1), (1.0, -2.0));
        assert_eq!(far_exponents(0, 2), (2.0, -1.0));
        assert_eq!(far_exponents(1, 2), (2.0, -2.0));
    }

    #[test]
    fn validation_and_jitter() {
        let g = SumGrid::default();
        assert!(g.validate().is_ok());
        let bad = SumGrid {
            u_values: vec![0.1, 0.2, 4.0],
            ..g.clone()
        };
        assert!(bad.validate().is_err());
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let (a, b) = (g.jittered(&mut r1, 0.01), g.jittered(&mut r2, 0.01));
        assert_eq!(a, b);
        assert!(a.validate().is_ok());
        for (x, y) in a.x_values.iter().zip(&g.x_values) {
            assert!((x / y - 1.0).abs() <= 0.011);
        }
    }
}
