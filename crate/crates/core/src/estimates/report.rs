use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::regression::{loglog_fit, LinearFit};

/// Allowed gap between a fitted and a predicted exponent.
pub const EXPONENT_TOL: f64 = 0.15;

/// The estimate a [`BoundFitReport`] checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimate {
    /// Power bounds on `S^{i,j}(x, u)`.
    OscillatorySum,
    /// Difference identity for Riesz means.
    RieszDifference,
    /// `sum (-1)^n n^k q(n/w)` against `q^k(1-1/w) + w Q_k(1/w)`.
    AlternatingTopOrder,
    /// Boundedness of `sum (-1)^n n^p q(n/w)` for `p < k`.
    AlternatingSaturation,
    /// Agreement of the direct and integral forms of `G_i(w, u)`.
    KernelSumRepresentation,
    /// `u`-integral over `[t, t + 1/w]`.
    NearPieceDecay,
    /// `u`-integral over `[t + 1/w, π]`.
    RemainderPieceDecay,
    /// Outer `w`-integral over `[1, π/t]`.
    InnerIntegralDecay,
    /// Pointwise bound for `wt > π`.
    FarRegionBound,
    /// Outer `w`-integral beyond `π/t`.
    TailIntegralDecay,
}

impl Estimate {
    pub const ALL: [Estimate; 10] = [
        Estimate::OscillatorySum,
        Estimate::RieszDifference,
        Estimate::AlternatingTopOrder,
        Estimate::AlternatingSaturation,
        Estimate::KernelSumRepresentation,
        Estimate::NearPieceDecay,
        Estimate::RemainderPieceDecay,
        Estimate::InnerIntegralDecay,
        Estimate::FarRegionBound,
        Estimate::TailIntegralDecay,
    ];

    /// Kebab-case name, as used in configs and file names.
    pub fn name(self) -> &'static str {
        match self {
            Estimate::OscillatorySum => "oscillatory-sum",
            Estimate::RieszDifference => "riesz-difference",
            Estimate::AlternatingTopOrder => "alternating-top-order",
            Estimate::AlternatingSaturation => "alternating-saturation",
            Estimate::KernelSumRepresentation => "kernel-sum-representation",
            Estimate::NearPieceDecay => "near-piece-decay",
            Estimate::RemainderPieceDecay => "remainder-piece-decay",
            Estimate::InnerIntegralDecay => "inner-integral-decay",
            Estimate::FarRegionBound => "far-region-bound",
            Estimate::TailIntegralDecay => "tail-integral-decay",
        }
    }

    /// Whether the check is one of the decay estimates run together.
    pub fn is_decay(self) -> bool {
        matches!(
            self,
            Estimate::NearPieceDecay
                | Estimate::RemainderPieceDecay
                | Estimate::InnerIntegralDecay
                | Estimate::FarRegionBound
                | Estimate::TailIntegralDecay
        )
    }
}

impl std::fmt::Display for Estimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How a fitted exponent is judged against the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentCheck {
    /// `|fitted - predicted| ≤ tol`.
    Matches,
    /// `fitted ≤ predicted + tol`.
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub variable: String,
    pub predicted: f64,
    pub fitted: f64,
    pub r_squared: f64,
    pub check: ExponentCheck,
    pub pass: bool,
    #[serde(skip)]
    pub(crate) line: Option<LinearFit>,
}

impl ExponentFit {
    /// Log-log fit of `ys` against `xs`. A degenerate fit fails.
    pub fn fit(
        variable: &str,
        xs: &[f64],
        ys: &[f64],
        predicted: f64,
        check: ExponentCheck,
    ) -> Self {
        let line = loglog_fit(xs, ys);
        let (fitted, r_squared) = line.map_or((f64::NAN, f64::NAN), |l| (l.slope, l.r_squared));
        let pass = match check {
            ExponentCheck::Matches => (fitted - predicted).abs() <= EXPONENT_TOL,
            ExponentCheck::AtMost => fitted <= predicted + EXPONENT_TOL,
        };
        ExponentFit {
            variable: variable.into(),
            predicted,
            fitted,
            r_squared,
            check,
            pass,
            line,
        }
    }
}

/// One sampled point of a bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub coords: [f64; 2],
    pub lhs: f64,
    pub bound: f64,
    pub ratio: f64,
}

impl BoundRow {
    pub fn new(coords: [f64; 2], lhs: f64, bound: f64) -> Self {
        BoundRow {
            coords,
            lhs,
            bound,
            ratio: lhs.abs() / bound,
        }
    }
}

/// Empirical check of an `O(·)` estimate on a finite grid.
///
/// `constant` is the sup of `|lhs| / bound`, so no sampled point violates the
/// bound with that constant; the verdict rests on the exponent fits and, when
/// requested, on the constant not growing towards the asymptotic end of the
/// grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundFitReport {
    pub estimate: Estimate,
    pub case: String,
    pub bound_form: String,
    pub axes: [String; 2],
    pub grid: String,
    pub constant: f64,
    /// Sup of the ratio over the half of the grid nearer the asymptotic end,
    /// divided by the sup over the other half.
    pub constant_growth: Option<f64>,
    pub fits: Vec<ExponentFit>,
    pub r_squared: f64,
    pub min_r_squared: Option<f64>,
    pub violations: usize,
    /// Largest accepted `constant_growth`.
    pub growth_limit: f64,
    pub rows: Vec<BoundRow>,
    pub notes: Vec<String>,
    pub pass: bool,
}

/// Ratio growth allowed between the two halves of a grid.
pub const MAX_CONSTANT_GROWTH: f64 = 1.5;

impl BoundFitReport {
    pub(crate) fn new(
        estimate: Estimate,
        case: impl Into<String>,
        bound_form: impl Into<String>,
        axes: [&str; 2],
    ) -> Self {
        BoundFitReport {
            estimate,
            case: case.into(),
            bound_form: bound_form.into(),
            axes: axes.map(String::from),
            grid: String::new(),
            constant: 0.0,
            constant_growth: None,
            fits: Vec::new(),
            r_squared: f64::NAN,
            min_r_squared: None,
            violations: 0,
            growth_limit: MAX_CONSTANT_GROWTH,
            rows: Vec::new(),
            notes: Vec::new(),
            pass: false,
        }
    }

    /// Sets the constant from the rows and the overall verdict.
    pub(crate) fn finish(mut self) -> Self {
        self.constant = self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let lines: Vec<LinearFit> = self.fits.iter().filter_map(|f| f.line).collect();
        if !lines.is_empty() {
            self.r_squared = crate::regression::pooled_r_squared(&lines);
        }
        let fits_ok = self.fits.iter().all(|f| f.pass);
        let r2_ok = self.min_r_squared.is_none_or(|m| self.r_squared >= m);
        let growth_ok = self
            .constant_growth
            .is_none_or(|g| g <= self.growth_limit);
        let finite = self.constant.is_finite();
        if !finite {
            self.notes.push("non-finite ratio".into());
        }
        self.pass = fits_ok && r2_ok && growth_ok && finite;
        self
    }

    /// Records the growth of the ratio sup from the first to the second half
    /// of `ordered`, which lists ratios from the pre-asymptotic end onwards.
    pub(crate) fn set_growth(&mut self, ordered: &[f64]) {
        let half = ordered.len() / 2;
        if half == 0 {
            return;
        }
        let head = ordered[..half].iter().copied().fold(0.0, f64::max);
        let tail = ordered[half..].iter().copied().fold(0.0, f64::max);
        self.constant_growth = Some(if head > 0.0 {
            tail / head
        } else {
            f64::INFINITY
        });
    }
}

/// Scales every node by an independent factor in `[1 - frac, 1 + frac]`,
/// clamps to `[lo, hi]`, then sorts and drops duplicates.
pub fn jittered_nodes<R: Rng>(rng: &mut R, nodes: &[f64], frac: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut out: Vec<f64> = nodes
        .iter()
        .map(|&x| (x * (1.0 + frac * rng.gen_range(-1.0..=1.0))).clamp(lo, hi))
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
