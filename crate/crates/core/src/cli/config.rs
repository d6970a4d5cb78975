use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::estimates::{DecayGrids, DyadicSweep, Estimate, SumGrid};
use crate::fourier::{fourier_coefficients, FunctionRef, HypothesisSet, HypothesisVerdict};
use crate::kernel::KernelSpec;
use crate::transform::{DiagnosticOptions, SeriesSource, Verdict};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    KernelCheck,
    Mean,
    AbsDiagnostic,
    FourierExperiment,
    LemmaVerify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::KernelCheck => "kernel-check",
            Command::Mean => "mean",
            Command::AbsDiagnostic => "abs-diagnostic",
            Command::FourierExperiment => "fourier-experiment",
            Command::LemmaVerify => "lemma-verify",
        }
    }
}

/// Series addressed by name in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SeriesRef {
    /// `(-1)^n`.
    Alternating,
    /// `(-1)^n n^power`.
    AlternatingPower {
        power: u32,
    },
    /// `ratio^n`.
    Geometric {
        ratio: f64,
    },
    /// `1, 0, 0, ...`.
    Unit,
    Explicit {
        terms: Vec<f64>,
    },
    /// Derived conjugate series of the config's `function` at `x`; terms
    /// beyond `order` are zero.
    DerivedConjugate {
        x: f64,
        r: u32,
        order: usize,
        #[serde(default = "default_quad_nodes")]
        quad_nodes: usize,
    },
}

fn default_quad_nodes() -> usize {
    4096
}

impl SeriesRef {
    pub fn build(&self, function: Option<&FunctionRef>) -> Result<SeriesSource> {
        Ok(match *self {
            SeriesRef::Alternating => {
                SeriesSource::rule("(-1)^n", |n| if n % 2 == 0 { 1.0 } else { -1.0 })
            }
            SeriesRef::AlternatingPower { power } => {
                SeriesSource::rule(format!("(-1)^n n^{power}"), move |n| {
                    let v = (n as f64).powi(power as i32);
                    if n % 2 == 0 {
                        v
                    } else {
                        -v
                    }
                })
            }
            SeriesRef::Geometric { ratio } => {
                SeriesSource::rule(format!("{ratio}^n"), move |n| ratio.powf(n as f64))
            }
            SeriesRef::Unit => SeriesSource::explicit(vec![1.0]),
            SeriesRef::Explicit { ref terms } => SeriesSource::explicit(terms.clone()),
            SeriesRef::DerivedConjugate {
                x,
                r,
                order,
                quad_nodes,
            } => {
                let f = function.map(FunctionRef::build).ok_or_else(|| {
                    crate::Error::ParameterOutOfRange(
                        "derived_conjugate series needs a function".into(),
                    )
                })?;
                let model = fourier_coefficients(&f, order, quad_nodes)?;
                let terms = std::iter::once(Ok(0.0))
                    .chain((1..=order).map(|n| model.derived_conjugate_term(n, x, r)))
                    .collect::<Result<Vec<f64>>>()?;
                SeriesSource::derived(
                    format!("derived conjugate, r = {r}"),
                    order as u64,
                    move |n| terms.get(n as usize).copied().unwrap_or(0.0),
                )
            }
        })
    }

    fn diagnostics(&self, function: Option<&FunctionRef>, out: &mut Vec<String>) {
        match self {
            SeriesRef::Geometric { ratio } if !ratio.is_finite() => {
                out.push(format!("geometric ratio must be finite (got {ratio})"))
            }
            SeriesRef::Explicit { terms }
                if terms.is_empty() || terms.iter().any(|t| !t.is_finite()) =>
            {
                out.push(
                    "explicit series needs at least one finite term and no non-finite ones".into(),
                )
            }
            SeriesRef::DerivedConjugate {
                x,
                order,
                quad_nodes,
                ..
            } => {
                if function.is_none() {
                    out.push("derived_conjugate series requires a function".into());
                }
                if !x.is_finite() {
                    out.push(format!("x must be finite (got {x})"));
                }
                check_quad_nodes(*order, *quad_nodes, out);
            }
            _ => {}
        }
    }
}

fn check_quad_nodes(order: usize, quad_nodes: usize, out: &mut Vec<String>) {
    if order < 1 {
        out.push("order must be ≥ 1".into());
    }
    if !quad_nodes.is_power_of_two() || quad_nodes < 2 * order + 2 {
        out.push(format!(
            "quad_nodes must be a power of two above 2·order + 1 (got {quad_nodes} for order {order})"
        ));
    }
}

/// Mean schedule, summability-diagnostic range and ε list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    /// `w` values at which `mean` evaluates the transform.
    pub w_values: Vec<f64>,
    pub a: f64,
    pub w_max: f64,
    pub points_per_dyad: usize,
    pub budget: u64,
    /// ε values for the hypothesis partial integrals; library default if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    /// Interior grid for the admissibility checks; library default if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
}

impl Default for Schedule {
    fn default() -> Self {
        let d = DiagnosticOptions::default();
        Schedule {
            w_values: Vec::new(),
            a: d.a,
            w_max: d.w_max,
            points_per_dyad: d.points_per_dyad,
            budget: d.budget,
            eps_list: None,
            t_grid: None,
        }
    }
}

impl Schedule {
    pub fn diagnostic_options(&self) -> DiagnosticOptions {
        DiagnosticOptions {
            a: self.a,
            w_max: self.w_max,
            points_per_dyad: self.points_per_dyad,
            budget: self.budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierSettings {
    pub x: f64,
    pub r: u32,
    /// Correction constants; `f^{(i)}(x)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
    #[serde(default = "default_hypotheses")]
    pub hypotheses: Vec<HypothesisSet>,
}

fn default_order() -> usize {
    20
}

fn default_hypotheses() -> Vec<HypothesisSet> {
    vec![HypothesisSet::FractionalVariation]
}

/// `(w, u)` lattice on which the two forms of `G_i` are compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lattice {
    pub w_values: Vec<f64>,
    pub u_values: Vec<f64>,
}

impl Default for Lattice {
    fn default() -> Self {
        Lattice {
            w_values: vec![5.0, 12.5, 30.0],
            u_values: vec![0.3, 1.0, 3.0],
        }
    }
}

/// Riesz-mean instance for the difference identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RieszInstance {
    pub lambda: Vec<f64>,
    pub a: Vec<f64>,
    pub x: f64,
    pub step: f64,
    pub orders: Vec<u32>,
}

impl Default for RieszInstance {
    fn default() -> Self {
        RieszInstance {
            lambda: vec![1.0, 2.0, 3.0],
            a: vec![2.0, -1.0, 4.0],
            x: 2.5,
            step: 1e-4,
            orders: vec![1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSettings {
    pub check: Estimate,
    #[serde(default = "default_r")]
    pub r: u32,
    #[serde(default)]
    pub sum_grid: SumGrid,
    #[serde(default)]
    pub decay_grids: DecayGrids,
    #[serde(default)]
    pub sweep: DyadicSweep,
    /// Allowed relative growth of the alternating-sum sup.
    #[serde(default = "default_growth_tol")]
    pub growth_tol: f64,
    #[serde(default)]
    pub lattice: Lattice,
    #[serde(default)]
    pub riesz: RieszInstance,
}

fn default_r() -> u32 {
    1
}

fn default_growth_tol() -> f64 {
    0.1
}

/// Optional expected outcomes; each one present becomes a check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expectations {
    /// Limit of the means, compared at the last schedule point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis_verdict: Option<HypothesisVerdict>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionRef>,
    pub schedule: Schedule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fourier: Option<FourierSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateSettings>,
    pub expected: Expectations,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Relative node jitter, at most 0.01; off when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
}

/// Largest accepted relative jitter.
pub const MAX_JITTER: f64 = 0.01;

pub const DEFAULT_OUTPUT: &str = "nqlab-out";

impl ExperimentConfig {
    /// Parses a JSON document; parse errors come back as diagnostics.
    pub fn from_json(text: &str) -> std::result::Result<Self, Vec<String>> {
        serde_json::from_str(text).map_err(|e| vec![format!("config: {e}")])
    }

    pub fn from_path(path: &Path) -> std::result::Result<Self, Vec<String>> {
        let text =
            std::fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])?;
        Self::from_json(&text)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
    }
}

fn ascending_positive(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite() && *x > 0.0) && v.windows(2).all(|p| p[1] > p[0])
}

/// Structural and range checks; an empty list means the config can run.
pub fn validate(config: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    let Some(command) = config.command else {
        out.push("command is not set".into());
        return out;
    };
    if let Some(k) = &config.kernel {
        out.extend(k.diagnostics());
    }
    let needs_kernel = match command {
        Command::LemmaVerify => config.estimate.as_ref().is_some_and(|e| {
            !matches!(
                e.check,
                Estimate::OscillatorySum | Estimate::RieszDifference
            )
        }),
        _ => true,
    };
    if needs_kernel && config.kernel.is_none() {
        out.push(format!("{} requires a kernel", command.name()));
    }
    if let Some(t) = config.tolerance {
        if !(t > 0.0) || !t.is_finite() {
            out.push(format!("tolerance must be positive (got {t})"));
        }
    }
    if let Some(j) = config.jitter {
        if !(j > 0.0 && j <= MAX_JITTER) {
            out.push(format!("jitter must lie in (0, {MAX_JITTER}] (got {j})"));
        }
    }
    let alpha = config.kernel.as_ref().map(|k| k.alpha);
    let s = &config.schedule;
    if let Some(g) = &s.t_grid {
        if g.is_empty() || g.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            out.push("t_grid values must lie in (0, 1)".into());
        }
    }
    if let Some(e) = &s.eps_list {
        if e.len() < 3
            || e.iter().any(|&v| !(v > 0.0 && v < std::f64::consts::PI))
            || e.windows(2).any(|p| p[1] >= p[0])
        {
            out.push("eps_list needs at least three decreasing values in (0, π)".into());
        }
    }

    match command {
        Command::KernelCheck => {}
        Command::Mean | Command::AbsDiagnostic => {
            match &config.series {
                None => out.push(format!("{} requires a series", command.name())),
                Some(series) => series.diagnostics(config.function.as_ref(), &mut out),
            }
            if command == Command::Mean {
                if s.w_values.is_empty() || !ascending_positive(&s.w_values) {
                    out.push("schedule.w_values must be non-empty, positive and increasing".into());
                }
            } else if !(s.a > 0.0) || !(s.w_max > s.a) || !s.w_max.is_finite() {
                out.push(format!(
                    "need 0 < a < w_max (got a = {}, w_max = {})",
                    s.a, s.w_max
                ));
            } else if s.points_per_dyad < 8 {
                out.push(format!(
                    "points_per_dyad must be ≥ 8 (got {})",
                    s.points_per_dyad
                ));
            }
        }
        Command::FourierExperiment => {
            if config.function.is_none() {
                out.push("fourier-experiment requires a function".into());
            }
            match &config.fourier {
                None => out.push("fourier-experiment requires fourier settings".into()),
                Some(f) => {
                    if f.r < 1 {
                        out.push("r must be ≥ 1".into());
                    }
                    if let Some(a) = alpha {
                        if !((f.r as f64) < a) {
                            out.push(format!("requires r < alpha (got r = {}, alpha = {a})", f.r));
                        }
                    }
                    if let Some(th) = &f.theta {
                        if th.len() != f.r as usize {
                            out.push(format!(
                                "theta must have r = {} entries (got {})",
                                f.r,
                                th.len()
                            ));
                        }
                    }
                    if !f.x.is_finite() {
                        out.push(format!("x must be finite (got {})", f.x));
                    }
                    check_quad_nodes(f.order, f.quad_nodes, &mut out);
                }
            }
        }
        Command::LemmaVerify => match &config.estimate {
            None => out.push("lemma-verify requires estimate settings".into()),
            Some(e) => validate_estimate(e, alpha, &mut out),
        },
    }
    out
}

fn validate_estimate(e: &EstimateSettings, alpha: Option<f64>, out: &mut Vec<String>) {
    let r_range = |out: &mut Vec<String>| {
        if let Some(a) = alpha {
            if e.r < 1 || !((e.r as f64) < a) {
                out.push(format!(
                    "requires 1 ≤ r < alpha (got r = {}, alpha = {a})",
                    e.r
                ));
            }
        }
    };
    match e.check {
        Estimate::OscillatorySum => {
            if let Err(err) = e.sum_grid.validate() {
                out.push(format!("sum_grid: {err}"));
            }
        }
        Estimate::RieszDifference => {
            let ri = &e.riesz;
            if ri.lambda.len() != ri.a.len() || ri.lambda.is_empty() {
                out.push("riesz: lambda and a must be non-empty and of equal length".into());
            }
            if !ascending_positive(&ri.lambda) {
                out.push("riesz: lambda must be positive and increasing".into());
            }
            if !(ri.step > 0.0) || !ri.x.is_finite() {
                out.push("riesz: step must be positive and x finite".into());
            }
            if ri.orders.is_empty() || ri.orders.contains(&0) {
                out.push("riesz: orders must be non-empty and ≥ 1".into());
            }
        }
        Estimate::AlternatingTopOrder | Estimate::AlternatingSaturation => {
            if alpha.is_some_and(|a| a < 1.0) {
                out.push("alternating-sum checks need alpha ≥ 1".into());
            }
            let sw = &e.sweep;
            if sw.j_max < sw.j_min + 3 || sw.points_per_dyad < 1 || sw.j_max > 40 {
                out.push("sweep must span at least three dyads with j_max ≤ 40".into());
            }
            if !(e.growth_tol > 0.0) {
                out.push("growth_tol must be positive".into());
            }
        }
        Estimate::KernelSumRepresentation => {
            r_range(out);
            if !ascending_positive(&e.lattice.w_values) || !ascending_positive(&e.lattice.u_values)
            {
                out.push("lattice values must be positive and increasing".into());
            }
        }
        _ => {
            r_range(out);
            if let Err(err) = e.decay_grids.validate() {
                out.push(format!("decay_grids: {err}"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn negative_alpha_is_reported() {
        let c = parse(
            r#"{"command": "kernel-check", "kernel": {"family": "CesaroType", "alpha": -1, "delta": 1}}"#,
        );
        let d = validate(&c);
        assert!(d.iter().any(|m| m.contains("alpha must be ≥ 0")), "{d:?}");
    }

    #[test]
    fn order_must_stay_below_alpha() {
        let c = parse(
            r#"{"command": "fourier-experiment",
                "kernel": {"family": "CesaroType", "alpha": 2, "delta": 0.5},
                "function": {"name": "cos"},
                "fourier": {"x": 0.0, "r": 3}}"#,
        );
        let d = validate(&c);
        assert!(d.iter().any(|m| m.contains("requires r < alpha")), "{d:?}");
    }

    #[test]
    fn unknown_function_names_the_reference() {
        let e = ExperimentConfig::from_json(
            r#"{"command": "fourier-experiment", "function": {"name": "zigzag"}}"#,
        )
        .unwrap_err();
        assert!(e[0].contains("zigzag"), "{e:?}");
    }

    #[test]
    fn minimal_configs_validate() {
        let c = parse(
            r#"{"command": "kernel-check", "kernel": {"family": "CesaroType", "alpha": 0, "delta": 1}}"#,
        );
        assert!(validate(&c).is_empty());
        let c = parse(r#"{"command": "lemma-verify", "estimate": {"check": "riesz-difference"}}"#);
        assert!(validate(&c).is_empty());
        let c = parse(
            r#"{"command": "mean", "kernel": {"family": "CesaroType", "alpha": 0, "delta": 1}, "series": {"name": "unit"}}"#,
        );
        assert!(validate(&c).iter().any(|m| m.contains("w_values")));
    }

    #[test]
    fn config_round_trips() {
        let c = parse(
            r#"{"command": "lemma-verify", "kernel": {"family": "CesaroType", "alpha": 2.5, "delta": 0.4},
                "estimate": {"check": "oscillatory-sum", "sum_grid": {"max_i": 1}}, "seed": 3, "jitter": 0.01}"#,
        );
        assert_eq!(c.estimate.as_ref().unwrap().sum_grid.max_i, 1);
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
