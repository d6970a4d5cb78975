use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{validate, Command, EstimateSettings, ExperimentConfig};
use crate::estimates::{
    check_alt_sum_saturation, check_alt_sum_top_order, check_decay_estimate,
    check_oscillatory_sums, check_riesz_difference, g_direct, g_via_representation, jittered_nodes,
    max_index, BoundFitReport, Estimate,
};
use crate::fourier::{
    alpha_beta_split, check_variation, check_weighted_integral, fourier_coefficients,
    DerivedSeriesSpec, HypothesisOptions, HypothesisReport, HypothesisSet,
};
use crate::kernel::{check_admissibility, default_t_grid, Kernel};
use crate::quad::QuadOptions;
use crate::transform::{abs_summability_diagnostic, means_at, MeanSchedule};

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    CheckFailed,
    ConfigInvalid,
    NumericalFailure,
}

impl RunStatus {
    pub fn code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::CheckFailed => 1,
            RunStatus::ConfigInvalid => 2,
            RunStatus::NumericalFailure => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    /// CSV file holding the rows behind the check.
    pub artifact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: Option<Command>,
    pub config: ExperimentConfig,
    pub tool_version: String,
    pub wall_time_seconds: f64,
    pub checks: Vec<CheckOutcome>,
    pub artifacts: Vec<String>,
    pub diagnostics: Vec<String>,
    pub error: Option<String>,
    pub status: RunStatus,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Numerical(#[from] crate::Error),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

type RunResult<T> = std::result::Result<T, RunError>;

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Collects the CSV artifacts and check outcomes of one run.
struct Sink {
    dir: PathBuf,
    artifacts: Vec<String>,
    checks: Vec<CheckOutcome>,
}

impl Sink {
    fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> RunResult<String> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.artifacts.push(name.to_string());
        Ok(name.to_string())
    }

    fn check(
        &mut self,
        name: impl Into<String>,
        pass: bool,
        detail: impl Into<String>,
        artifact: &str,
    ) {
        self.checks.push(CheckOutcome {
            name: name.into(),
            pass,
            detail: detail.into(),
            artifact: artifact.to_string(),
        });
    }
}

/// Validates, dispatches and writes the CSV artifacts plus `manifest.json`.
///
/// Never panics on bad input: failures are reported through the manifest
/// status.
pub fn run(config: &ExperimentConfig) -> RunManifest {
    let start = Instant::now();
    let mut manifest = RunManifest {
        command: config.command,
        config: config.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: 0.0,
        checks: Vec::new(),
        artifacts: Vec::new(),
        diagnostics: validate(config),
        error: None,
        status: RunStatus::Ok,
        exit_code: 0,
    };
    let dir = config.output_dir();
    let outcome = if manifest.diagnostics.is_empty() {
        let mut sink = Sink {
            dir: dir.clone(),
            artifacts: Vec::new(),
            checks: Vec::new(),
        };
        let res = fs::create_dir_all(&dir)
            .map_err(RunError::from)
            .and_then(|_| dispatch(config, &mut sink));
        manifest.checks = sink.checks;
        manifest.artifacts = sink.artifacts;
        match res {
            Ok(()) if manifest.all_pass() => RunStatus::Ok,
            Ok(()) => RunStatus::CheckFailed,
            Err(e) => {
                manifest.error = Some(e.to_string());
                RunStatus::NumericalFailure
            }
        }
    } else {
        RunStatus::ConfigInvalid
    };
    manifest.status = outcome;
    manifest.exit_code = outcome.code();
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    if fs::create_dir_all(&dir).is_ok() {
        if let Err(e) = write_manifest(&dir, &manifest) {
            manifest.error.get_or_insert_with(|| e.to_string());
            if manifest.status == RunStatus::Ok || manifest.status == RunStatus::CheckFailed {
                manifest.status = RunStatus::NumericalFailure;
                manifest.exit_code = RunStatus::NumericalFailure.code();
            }
        }
    }
    manifest
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
    fs::write(dir.join("manifest.json"), text + "\n")
}

fn dispatch(config: &ExperimentConfig, sink: &mut Sink) -> RunResult<()> {
    let kernel = config.kernel.as_ref().map(|k| k.build()).transpose()?;
    let need = || kernel.as_ref().expect("validated: kernel present");
    match config.command.expect("validated: command present") {
        Command::KernelCheck => kernel_check(config, need(), sink),
        Command::Mean => mean(config, need(), sink),
        Command::AbsDiagnostic => abs_diagnostic(config, need(), sink),
        Command::FourierExperiment => fourier_experiment(config, need(), sink),
        Command::LemmaVerify => {
            let settings = config
                .estimate
                .as_ref()
                .expect("validated: estimate present");
            verify_estimate(config, settings, kernel.as_ref(), sink)
        }
    }
}

/// Interior points at which the closed-form tail function is compared with
/// quadrature.
const TAIL_POINTS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const TAIL_TOL: f64 = 1e-8;

fn kernel_check(config: &ExperimentConfig, kernel: &Kernel, sink: &mut Sink) -> RunResult<()> {
    let grid = config
        .schedule
        .t_grid
        .clone()
        .unwrap_or_else(default_t_grid);
    let tol = config.tolerance.unwrap_or(1e-8);
    let report = check_admissibility(kernel, &grid, tol);
    let file = sink.csv(
        "conditions.csv",
        &["id", "pass", "witness", "value", "detail"],
        report.conditions.iter().map(|c| {
            vec![
                c.id.to_string(),
                c.pass.to_string(),
                opt_num(c.witness),
                num(c.value),
                c.detail.clone(),
            ]
        }),
    )?;
    for c in &report.conditions {
        sink.check(
            format!("condition {}", c.id),
            c.pass,
            c.detail.clone(),
            &file,
        );
    }

    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let rows = TAIL_POINTS
        .iter()
        .map(|&t| {
            let closed = kernel.eval_Q(t)?;
            let quad = kernel.eval_Q_quadrature(t, &opts)?;
            Ok((t, closed, quad, (closed - quad).abs() / closed.abs()))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let worst = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let file = sink.csv(
        "tail_function.csv",
        &["t", "closed_form", "quadrature", "rel_error", "pass"],
        rows.iter()
            .map(|&(t, c, q, e)| vec![num(t), num(c), num(q), num(e), (e <= TAIL_TOL).to_string()]),
    )?;
    sink.check(
        "tail function closed form",
        worst <= TAIL_TOL,
        format!("max relative error {worst:e}"),
        &file,
    );
    Ok(())
}

fn mean(config: &ExperimentConfig, kernel: &Kernel, sink: &mut Sink) -> RunResult<()> {
    let series = config
        .series
        .as_ref()
        .expect("validated: series present")
        .build(config.function.as_ref())?;
    let schedule = MeanSchedule::new(config.schedule.w_values.clone())?;
    let means = means_at(kernel, &series, &schedule)?;
    let expected = config.expected.sum;
    let file = sink.csv(
        "means.csv",
        &["w", "mean", "deviation"],
        means
            .iter()
            .map(|&(w, m)| vec![num(w), num(m), opt_num(expected.map(|s| (m - s).abs()))]),
    )?;
    if let Some(s) = expected {
        let tol = config.tolerance.unwrap_or(1e-6);
        let &(w, m) = means.last().expect("schedule is non-empty");
        let dev = (m - s).abs();
        sink.check(
            "limit",
            dev <= tol,
            format!("|mean({w}) - {s}| = {dev:e}, tolerance {tol:e}"),
            &file,
        );
    }
    Ok(())
}

fn abs_diagnostic(config: &ExperimentConfig, kernel: &Kernel, sink: &mut Sink) -> RunResult<()> {
    let series = config
        .series
        .as_ref()
        .expect("validated: series present")
        .build(config.function.as_ref())?;
    let report =
        abs_summability_diagnostic(kernel, &series, &config.schedule.diagnostic_options())?;
    sink.csv(
        "means.csv",
        &["w", "mean"],
        report.means.iter().map(|&(w, m)| vec![num(w), num(m)]),
    )?;
    let mut partial = 0.0;
    let mut rows: Vec<Vec<String>> = report
        .dyadic_increments
        .iter()
        .map(|d| {
            partial += d.increment;
            vec![
                "dyad".into(),
                d.j.to_string(),
                num(d.w_lo),
                num(d.w_hi),
                num(partial),
                num(d.increment),
                String::new(),
                String::new(),
                String::new(),
            ]
        })
        .collect();
    let w_max = report.dyadic_increments.last().map_or(f64::NAN, |d| d.w_hi);
    rows.push(vec![
        "summary".into(),
        String::new(),
        String::new(),
        num(w_max),
        num(report.total),
        String::new(),
        opt_num(report.slope),
        opt_num(report.slope_last4),
        report.verdict.to_string(),
    ]);
    let file = sink.csv(
        "increments.csv",
        &[
            "kind",
            "j",
            "w_lo",
            "w_hi",
            "partial_integral",
            "increment",
            "slope",
            "slope_last4",
            "verdict",
        ],
        rows,
    )?;
    if let Some(v) = config.expected.verdict {
        sink.check(
            "verdict",
            report.verdict == v,
            format!("got {}, expected {v}", report.verdict),
            &file,
        );
    }
    Ok(())
}

fn fourier_experiment(
    config: &ExperimentConfig,
    kernel: &Kernel,
    sink: &mut Sink,
) -> RunResult<()> {
    let settings = config
        .fourier
        .as_ref()
        .expect("validated: fourier settings present");
    let f = config
        .function
        .as_ref()
        .expect("validated: function present")
        .build();
    let spec = match &settings.theta {
        Some(theta) => {
            DerivedSeriesSpec::new(settings.x, settings.r, theta.clone(), kernel.alpha())?
        }
        None => DerivedSeriesSpec::with_default_theta(&f, settings.x, settings.r, kernel.alpha())?,
    };
    let model = fourier_coefficients(&f, settings.order, settings.quad_nodes)?;
    let quad = QuadOptions::default();
    let tol = config.tolerance.unwrap_or(1e-6);
    let rows = (1..=settings.order)
        .into_par_iter()
        .map(|n| {
            let term = model.derived_conjugate_term(n, spec.x, spec.r)?;
            let (a, b) = alpha_beta_split(&f, &spec, n, &quad)?;
            Ok((n, term, a, b))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|&(n, term, a, b)| {
            let dev = (a + b - term).abs();
            let bound = tol * (1.0 + (n as f64).powi(spec.r as i32));
            worst = worst.max(dev / bound);
            vec![
                n.to_string(),
                num(model.a(n)),
                num(model.b(n)),
                num(term),
                num(a),
                num(b),
                num(dev),
                num(bound),
                (dev <= bound).to_string(),
            ]
        })
        .collect();
    let file = sink.csv(
        "split.csv",
        &[
            "n",
            "a_n",
            "b_n",
            "derived_term",
            "alpha_n",
            "beta_n",
            "deviation",
            "bound",
            "pass",
        ],
        csv_rows,
    )?;
    sink.check(
        "split consistency",
        worst <= 1.0,
        format!("max deviation / bound = {worst:e}"),
        &file,
    );

    let mut opts = HypothesisOptions::default();
    if let Some(eps) = &config.schedule.eps_list {
        opts.eps_list = eps.clone();
    }
    let reports = settings
        .hypotheses
        .iter()
        .map(|set| match set {
            HypothesisSet::FractionalVariation => check_variation(&f, &spec, &opts),
            HypothesisSet::WeightedIntegral => check_weighted_integral(&f, &spec, &opts),
        })
        .collect::<crate::Result<Vec<HypothesisReport>>>()?;
    let set_name = |s: HypothesisSet| match s {
        HypothesisSet::FractionalVariation => "fractional-variation",
        HypothesisSet::WeightedIntegral => "weighted-integral",
    };
    sink.csv(
        "hypothesis_partials.csv",
        &["hypotheses", "eps", "partial_integral"],
        reports.iter().flat_map(|r| {
            r.variation_integral_partials
                .iter()
                .map(move |&(e, p)| vec![set_name(r.hypotheses).to_string(), num(e), num(p)])
        }),
    )?;
    let file = sink.csv(
        "hypotheses.csv",
        &[
            "hypotheses",
            "h_beta_at_0plus",
            "h_beta_error",
            "zero_limit",
            "integral",
            "verdict",
            "notes",
        ],
        reports.iter().map(|r| {
            vec![
                set_name(r.hypotheses).to_string(),
                opt_num(r.h_beta_at_0plus.map(|p| p.0)),
                opt_num(r.h_beta_at_0plus.map(|p| p.1)),
                r.zero_limit.map(|v| v.to_string()).unwrap_or_default(),
                r.integral.to_string(),
                r.verdict.to_string(),
                r.notes.join("; "),
            ]
        }),
    )?;
    if let Some(expected) = config.expected.hypothesis_verdict {
        for r in &reports {
            sink.check(
                format!("{} verdict", set_name(r.hypotheses)),
                r.verdict == expected,
                format!("got {}, expected {expected}", r.verdict),
                &file,
            );
        }
    }
    Ok(())
}

fn verify_estimate(
    config: &ExperimentConfig,
    settings: &EstimateSettings,
    kernel: Option<&Kernel>,
    sink: &mut Sink,
) -> RunResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.unwrap_or(0));
    let jitter = config.jitter;
    let need = || kernel.expect("validated: kernel present");
    let reports = match settings.check {
        Estimate::OscillatorySum => {
            let grid = match jitter {
                Some(frac) => settings.sum_grid.jittered(&mut rng, frac),
                None => settings.sum_grid.clone(),
            };
            check_oscillatory_sums(&grid)?
        }
        Estimate::RieszDifference => return riesz_difference(config, settings, sink),
        Estimate::KernelSumRepresentation => {
            return kernel_sum_representation(config, settings, need(), &mut rng, sink)
        }
        Estimate::AlternatingTopOrder => vec![check_alt_sum_top_order(need(), &settings.sweep)?],
        Estimate::AlternatingSaturation => {
            let k = need().k();
            (0..k)
                .map(|p| check_alt_sum_saturation(need(), p, &settings.sweep, settings.growth_tol))
                .collect::<crate::Result<Vec<_>>>()?
        }
        decay => {
            let grids = match jitter {
                Some(frac) => settings.decay_grids.jittered(&mut rng, frac),
                None => settings.decay_grids.clone(),
            };
            check_decay_estimate(need(), settings.r, decay, &grids)?
        }
    };
    write_bound_reports(&reports, sink)
}

fn write_bound_reports(reports: &[BoundFitReport], sink: &mut Sink) -> RunResult<()> {
    let fits_text = |r: &BoundFitReport| {
        r.fits
            .iter()
            .map(|f| format!("{}:{}", f.variable, num(f.fitted)))
            .collect::<Vec<_>>()
            .join(";")
    };
    let mut summary = Vec::new();
    for (idx, r) in reports.iter().enumerate() {
        let name = format!("{}-{:02}.csv", r.estimate, idx + 1);
        let header = [
            "kind",
            r.axes[0].as_str(),
            r.axes[1].as_str(),
            "lhs",
            "bound",
            "ratio",
            "constant",
            "fitted_exponents",
            "r_squared",
            "pass",
        ];
        let mut rows: Vec<Vec<String>> = r
            .rows
            .iter()
            .map(|row| {
                let mut v = vec!["point".to_string(), num(row.coords[0]), num(row.coords[1])];
                v.extend([num(row.lhs), num(row.bound), num(row.ratio)]);
                v.extend([String::new(), String::new(), String::new(), String::new()]);
                v
            })
            .collect();
        rows.push(vec![
            "summary".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            num(r.constant),
            fits_text(r),
            num(r.r_squared),
            r.pass.to_string(),
        ]);
        let file = sink.csv(&name, &header, rows)?;
        let growth = r
            .constant_growth
            .map(|g| format!(", constant growth {g:.3} (limit {:.3})", r.growth_limit))
            .unwrap_or_default();
        sink.check(
            format!("{} {}", r.estimate, r.case),
            r.pass,
            format!("bound {}, fits [{}]{growth}", r.bound_form, fits_text(r)),
            &file,
        );
        summary.push(vec![
            file,
            r.estimate.to_string(),
            r.case.clone(),
            r.bound_form.clone(),
            r.grid.clone(),
            num(r.constant),
            opt_num(r.constant_growth),
            num(r.growth_limit),
            fits_text(r),
            num(r.r_squared),
            r.pass.to_string(),
        ]);
    }
    sink.csv(
        "summary.csv",
        &[
            "file",
            "estimate",
            "case",
            "bound_form",
            "grid",
            "constant",
            "constant_growth",
            "growth_limit",
            "fitted_exponents",
            "r_squared",
            "pass",
        ],
        summary,
    )?;
    Ok(())
}

fn riesz_difference(
    config: &ExperimentConfig,
    settings: &EstimateSettings,
    sink: &mut Sink,
) -> RunResult<()> {
    let ri = &settings.riesz;
    let rows = ri
        .orders
        .iter()
        .map(|&k| {
            let dev = check_riesz_difference(&ri.lambda, &ri.a, k, ri.x, ri.step)?;
            let tol = config.tolerance.unwrap_or(if k == 1 { 1e-6 } else { 1e-4 });
            Ok((k, dev, tol))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let file = sink.csv(
        "riesz_difference.csv",
        &["k", "x", "step", "deviation", "tolerance", "pass"],
        rows.iter().map(|&(k, dev, tol)| {
            vec![
                k.to_string(),
                num(ri.x),
                num(ri.step),
                num(dev),
                num(tol),
                (dev <= tol).to_string(),
            ]
        }),
    )?;
    for (k, dev, tol) in rows {
        sink.check(
            format!("riesz difference k={k}"),
            dev <= tol,
            format!("deviation {dev:e}, tolerance {tol:e}"),
            &file,
        );
    }
    Ok(())
}

fn kernel_sum_representation(
    config: &ExperimentConfig,
    settings: &EstimateSettings,
    kernel: &Kernel,
    rng: &mut ChaCha8Rng,
    sink: &mut Sink,
) -> RunResult<()> {
    let r = settings.r;
    let m = max_index(kernel, r)?;
    let (ws, us) = match config.jitter {
        Some(frac) => (
            jittered_nodes(rng, &settings.lattice.w_values, frac, 1.0, f64::MAX),
            jittered_nodes(
                rng,
                &settings.lattice.u_values,
                frac,
                f64::MIN_POSITIVE,
                f64::MAX,
            ),
        ),
        None => (
            settings.lattice.w_values.clone(),
            settings.lattice.u_values.clone(),
        ),
    };
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let points: Vec<(f64, f64, u32)> = ws
        .iter()
        .flat_map(|&w| {
            us.iter()
                .flat_map(move |&u| (0..=m).map(move |i| (w, u, i)))
        })
        .collect();
    let rows = points
        .par_iter()
        .map(|&(w, u, i)| {
            let d = g_direct(kernel, r, i, w, u)?;
            let g = g_via_representation(kernel, r, i, w, u, &opts)?;
            let err = if d == 0.0 {
                (d - g).abs()
            } else {
                (d - g).abs() / d.abs()
            };
            Ok((w, u, i, d, g, err))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let tol = config.tolerance.unwrap_or(1e-6);
    let worst = rows.iter().map(|r| r.5).fold(0.0, f64::max);
    let file = sink.csv(
        "kernel_sum_representation.csv",
        &[
            "w",
            "u",
            "i",
            "direct",
            "representation",
            "rel_error",
            "pass",
        ],
        rows.iter().map(|&(w, u, i, d, g, e)| {
            vec![
                num(w),
                num(u),
                i.to_string(),
                num(d),
                num(g),
                num(e),
                (e <= tol).to_string(),
            ]
        }),
    )?;
    sink.check(
        "kernel sum representation",
        worst <= tol,
        format!("max relative error {worst:e}, tolerance {tol:e}"),
        &file,
    );
    Ok(())
}
