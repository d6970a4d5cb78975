//! Summability kernels on [0, 1]: evaluation, derivatives, tail integrals
//! and the admissibility checker.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::accel::aitken;
use crate::error::{Error, Result};
use crate::quad::{estimate_endpoint_exponent, integrate_from_singularity, QuadOptions};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    CesaroType,
    UserDefined,
}

/// Serializable description of a kernel.
///
/// `poly` holds the coefficients `c_0, c_1, ...` of a polynomial kernel
/// `q(t) = sum c_i t^i` and is only meaningful for `UserDefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<Vec<f64>>,
}

impl KernelSpec {
    pub fn cesaro(alpha: f64, delta: f64) -> Self {
        KernelSpec {
            family: KernelFamily::CesaroType,
            alpha,
            delta: Some(delta),
            poly: None,
        }
    }

    /// `floor(alpha)`.
    pub fn k(&self) -> u32 {
        self.alpha.floor().max(0.0) as u32
    }

    /// Range diagnostics without building the kernel.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            out.push(format!("alpha must be ≥ 0 (got {})", self.alpha));
            return out;
        }
        match self.family {
            KernelFamily::CesaroType => match self.delta {
                None => out.push("CesaroType kernel requires delta".into()),
                Some(d) if !(d > 0.0) || !d.is_finite() => {
                    out.push(format!("delta must be > 0 (got {d})"))
                }
                Some(d) => {
                    let k = self.k() as f64;
                    if self.alpha + d > k + 1.0 {
                        out.push(format!(
                            "alpha + delta must not exceed floor(alpha) + 1 (got {} > {})",
                            self.alpha + d,
                            k + 1.0
                        ));
                    }
                }
            },
            KernelFamily::UserDefined => match &self.poly {
                None => {
                    out.push("UserDefined kernel in a config requires poly coefficients".into())
                }
                Some(c) if c.is_empty() || c.iter().any(|v| !v.is_finite()) => {
                    out.push("poly coefficients must be finite and nonempty".into())
                }
                _ => {}
            },
        }
        out
    }

    pub fn build(&self) -> Result<Kernel> {
        if let Some(msg) = self.diagnostics().into_iter().next() {
            return Err(Error::ParameterOutOfRange(msg));
        }
        match self.family {
            KernelFamily::CesaroType => make_cesaro_kernel(self.alpha, self.delta.unwrap_or(0.0)),
            KernelFamily::UserDefined => {
                Kernel::polynomial(self.alpha, self.poly.clone().unwrap_or_default())
            }
        }
    }
}

#[derive(Clone)]
enum Form {
    /// `order * (1 - t)^(order - 1)` with `order = alpha + delta`.
    Cesaro {
        order: f64,
    },
    Polynomial {
        coeffs: Vec<f64>,
    },
    Closure {
        q: RealFn,
        derivs: Vec<RealFn>,
        finite_differences: bool,
    },
}

/// An immutable kernel `q` on `[0, 1]`.
#[derive(Clone)]
pub struct Kernel {
    spec: KernelSpec,
    form: Form,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel").field("spec", &self.spec).finish()
    }
}

/// Builds the kernel `(alpha + delta)(1 - t)^(alpha + delta - 1)`.
pub fn make_cesaro_kernel(alpha: f64, delta: f64) -> Result<Kernel> {
    let spec = KernelSpec::cesaro(alpha, delta);
    if let Some(msg) = spec.diagnostics().into_iter().next() {
        return Err(Error::ParameterOutOfRange(msg));
    }
    Ok(Kernel {
        spec,
        form: Form::Cesaro {
            order: alpha + delta,
        },
    })
}

fn falling(order: f64, n: u32) -> f64 {
    (0..n).map(|j| order - j as f64).product()
}

fn poly_derivative(coeffs: &[f64], order: u32, t: f64) -> f64 {
    let mut acc = 0.0;
    for (i, &c) in coeffs.iter().enumerate().rev() {
        if (i as u32) < order {
            break;
        }
        acc = acc * t + c * falling(i as f64, order);
    }
    acc
}

/// Central finite difference of order `order` with the stencil shifted to
/// stay inside `[0, 1]`.
pub fn fd_derivative<F: Fn(f64) -> f64>(f: &F, order: u32, t: f64) -> f64 {
    if order == 0 {
        return f(t);
    }
    let h = (1e-5f64).max(t.abs() * 1e-7);
    let half = order as f64 * h / 2.0;
    let centre = t.clamp(half, 1.0 - half);
    let mut acc = 0.0;
    let mut binom = 1.0;
    for j in 0..=order {
        let x = centre + (order as f64 / 2.0 - j as f64) * h;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(x);
        binom = binom * (order - j) as f64 / (j + 1) as f64;
    }
    acc / h.powi(order as i32)
}

impl Kernel {
    /// Polynomial kernel `q(t) = sum coeffs[i] t^i` of method order `alpha`.
    pub fn polynomial(alpha: f64, coeffs: Vec<f64>) -> Result<Kernel> {
        let spec = KernelSpec {
            family: KernelFamily::UserDefined,
            alpha,
            delta: None,
            poly: Some(coeffs.clone()),
        };
        if let Some(msg) = spec.diagnostics().into_iter().next() {
            return Err(Error::ParameterOutOfRange(msg));
        }
        Ok(Kernel {
            spec,
            form: Form::Polynomial { coeffs },
        })
    }

    /// Kernel from closures. `derivs[b - 1]` is the `b`-th derivative; missing
    /// orders fall back to finite differences when `finite_differences` is set.
    pub fn user_defined(
        alpha: f64,
        q: RealFn,
        derivs: Vec<RealFn>,
        finite_differences: bool,
    ) -> Result<Kernel> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::ParameterOutOfRange(format!(
                "alpha must be ≥ 0 (got {alpha})"
            )));
        }
        Ok(Kernel {
            spec: KernelSpec {
                family: KernelFamily::UserDefined,
                alpha,
                delta: None,
                poly: None,
            },
            form: Form::Closure {
                q,
                derivs,
                finite_differences,
            },
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    pub fn k(&self) -> u32 {
        self.spec.k()
    }

    pub fn q(&self, t: f64) -> f64 {
        match &self.form {
            Form::Cesaro { order } => order * (1.0 - t).powf(order - 1.0),
            Form::Polynomial { coeffs } => poly_derivative(coeffs, 0, t),
            Form::Closure { q, .. } => q(t),
        }
    }

    /// `q(1 - d)`, evaluated without cancellation for closed forms.
    pub fn q_complement(&self, d: f64) -> f64 {
        match &self.form {
            Form::Cesaro { order } => order * d.powf(order - 1.0),
            _ => self.q(1.0 - d),
        }
    }

    /// `d^order q / dt^order` at `t`.
    pub fn derivative(&self, order: u32, t: f64) -> Result<f64> {
        self.derivative_complement_impl(order, t, 1.0 - t)
    }

    /// The `order`-th derivative at `t = 1 - d`.
    pub fn derivative_complement(&self, order: u32, d: f64) -> Result<f64> {
        self.derivative_complement_impl(order, 1.0 - d, d)
    }

    fn derivative_complement_impl(&self, order: u32, t: f64, d: f64) -> Result<f64> {
        if order == 0 {
            return Ok(match &self.form {
                Form::Cesaro { order } => order * d.powf(order - 1.0),
                _ => self.q(t),
            });
        }
        match &self.form {
            Form::Cesaro { order: a } => {
                let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
                Ok(a * falling(a - 1.0, order) * sign * d.powf(a - 1.0 - order as f64))
            }
            Form::Polynomial { coeffs } => Ok(poly_derivative(coeffs, order, t)),
            Form::Closure {
                q,
                derivs,
                finite_differences,
            } => {
                if let Some(df) = derivs.get(order as usize - 1) {
                    Ok(df(t))
                } else if *finite_differences {
                    Ok(fd_derivative(&|x| q(x), order, t))
                } else {
                    Err(Error::DerivativeUnavailable { order })
                }
            }
        }
    }

    /// `q^k(t) = (-1)^k d^k q / dt^k`.
    pub fn qk(&self, t: f64) -> Result<f64> {
        let s = if self.k().is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(s * self.derivative(self.k(), t)?)
    }

    /// `q^k(1 - d)`.
    pub fn qk_complement(&self, d: f64) -> Result<f64> {
        let s = if self.k().is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(s * self.derivative_complement(self.k(), d)?)
    }

    /// Power of `(1 - t)` describing the derivative of the given order near
    /// `t = 1`, when known in closed form.
    pub fn tail_exponent(&self, order: u32) -> Option<f64> {
        match &self.form {
            Form::Cesaro { order: a } => Some(a - 1.0 - order as f64),
            Form::Polynomial { .. } => Some(0.0),
            Form::Closure { .. } => None,
        }
    }

    fn tail_exponent_or_estimate(&self, order: u32) -> f64 {
        self.tail_exponent(order).unwrap_or_else(|| {
            estimate_endpoint_exponent(
                |d| self.derivative_complement(order, d).unwrap_or(f64::NAN),
                1e-3,
            )
            .max(-0.97)
        })
    }

    /// `Q(t) = ∫_{1-t}^1 q(u) du`.
    #[allow(non_snake_case)]
    pub fn eval_Q(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        match &self.form {
            Form::Cesaro { order } => Ok(t.powf(*order)),
            _ => self.eval_Q_quadrature(t, &QuadOptions::default()),
        }
    }

    /// `Q(t)` by quadrature regardless of family.
    #[allow(non_snake_case)]
    pub fn eval_Q_quadrature(&self, t: f64, opts: &QuadOptions) -> Result<f64> {
        check_unit(t)?;
        let e = self.tail_exponent_or_estimate(0);
        Ok(integrate_from_singularity(|d| self.q_complement(d), t, e, opts)?.value)
    }

    /// `Q_k(t) = ∫_{1-t}^1 q^k(u) du`.
    #[allow(non_snake_case)]
    pub fn eval_Qk(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        match &self.form {
            Form::Cesaro { order } => {
                let k = self.k();
                Ok(falling(*order, k) * t.powf(order - k as f64))
            }
            _ => self.eval_Qk_quadrature(t, &QuadOptions::default()),
        }
    }

    #[allow(non_snake_case)]
    pub fn eval_Qk_quadrature(&self, t: f64, opts: &QuadOptions) -> Result<f64> {
        check_unit(t)?;
        // Probe availability before integrating.
        self.qk_complement(0.5)?;
        let e = self.tail_exponent_or_estimate(self.k());
        Ok(
            integrate_from_singularity(|d| self.qk_complement(d).unwrap_or(f64::NAN), t, e, opts)?
                .value,
        )
    }
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!(
            "t = {t} outside [0, 1]"
        )))
    }
}

/// Outcome of one admissibility condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub id: u8,
    pub pass: bool,
    pub witness: Option<f64>,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub conditions: Vec<ConditionResult>,
    pub t_grid: Vec<f64>,
    pub tol: f64,
    pub ratio_grid_coarse: Vec<f64>,
    pub ratio_sup_coarse: f64,
    pub ratio_sup_refined: f64,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn condition(&self, id: u8) -> &ConditionResult {
        &self.conditions[id as usize - 1]
    }
}

/// Interior grid used when the caller has no preference.
pub fn default_t_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (1..64).map(|i| i as f64 / 64.0).collect();
    g.extend([1e-4, 1e-3, 1e-2, 0.99, 0.999, 0.9999]);
    g.sort_by(f64::total_cmp);
    g
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn fd_consistency(kernel: &Kernel, order: u32, t_grid: &[f64]) -> (f64, Option<f64>, bool) {
    // Compare the analytic derivative with a central difference of the one below.
    let mut worst = 0.0f64;
    let mut witness = None;
    let mut finite = true;
    for &t in t_grid {
        let h = (1e-5f64)
            .max(t * 1e-7)
            .min(t / 200.0)
            .min((1.0 - t) / 200.0);
        let lo = kernel.derivative(order - 1, t - h);
        let hi = kernel.derivative(order - 1, t + h);
        let an = kernel.derivative(order, t);
        match (lo, hi, an) {
            (Ok(lo), Ok(hi), Ok(an)) if lo.is_finite() && hi.is_finite() && an.is_finite() => {
                let fd = (hi - lo) / (2.0 * h);
                let mismatch = (fd - an).abs() / (1.0 + an.abs());
                if mismatch > worst {
                    worst = mismatch;
                    witness = Some(t);
                }
            }
            _ => {
                finite = false;
                witness = Some(t);
                break;
            }
        }
    }
    (worst, witness, finite)
}

const FD_TOL: f64 = 1e-4;

/// Checks the seven admissibility conditions on a grid of interior points.
pub fn check_admissibility(kernel: &Kernel, t_grid: &[f64], tol: f64) -> AdmissibilityReport {
    let k = kernel.k();
    let alpha = kernel.alpha();
    let mut conditions = Vec::with_capacity(7);

    // (1) nonnegativity on the grid and at both ends.
    {
        let mut min = f64::INFINITY;
        let mut witness = None;
        let mut nan = false;
        for t in t_grid.iter().copied().chain([0.0, 1.0]) {
            let v = kernel.q(t);
            if v.is_nan() {
                nan = true;
                witness = Some(t);
            } else if v < min {
                min = v;
                witness = Some(t);
            }
        }
        let pass = !nan && min >= -tol;
        conditions.push(ConditionResult {
            id: 1,
            pass,
            witness: if pass { None } else { witness },
            value: min,
            detail: "min q over grid".into(),
        });
    }

    // (2) unit mass.
    {
        let opts = QuadOptions::default()
            .with_abs_tol(tol.min(1e-10))
            .with_rel_tol(tol.min(1e-8) * 1e-2);
        let (value, pass, detail) = match kernel.eval_Q_quadrature(1.0, &opts) {
            Ok(m) => (
                (m - 1.0).abs(),
                (m - 1.0).abs() <= tol,
                format!("mass {m:.17e}"),
            ),
            Err(e) => (f64::NAN, false, e.to_string()),
        };
        conditions.push(ConditionResult {
            id: 2,
            pass,
            witness: None,
            value,
            detail,
        });
    }

    // (3) orders 1..k-1 consistent with differences of the order below.
    {
        let mut worst = 0.0f64;
        let mut witness = None;
        let mut pass = true;
        for order in 1..k {
            let (w, at, finite) = fd_consistency(kernel, order, t_grid);
            if !finite || w > FD_TOL {
                pass = false;
                witness = at;
            }
            worst = worst.max(w);
        }
        conditions.push(ConditionResult {
            id: 3,
            pass,
            witness: if pass { None } else { witness },
            value: worst,
            detail: if k <= 1 {
                "no orders between 1 and k-1".into()
            } else {
                format!("finite-difference consistency, orders 1..{}", k - 1)
            },
        });
    }

    // (4) derivatives of order < k vanish at t = 1.
    {
        let mut worst = 0.0f64;
        let mut pass = true;
        for order in 0..k {
            let s: Vec<f64> = [2f64.powi(-10), 2f64.powi(-20), 2f64.powi(-30)]
                .iter()
                .map(|&e| kernel.derivative_complement(order, e).unwrap_or(f64::NAN))
                .collect();
            let lim = aitken(s[0], s[1], s[2]);
            let mag = if lim.is_finite() {
                lim.abs()
            } else {
                f64::INFINITY
            };
            worst = worst.max(mag);
            if !(mag <= tol) {
                pass = false;
            }
        }
        conditions.push(ConditionResult {
            id: 4,
            pass,
            witness: if pass { None } else { Some(1.0) },
            value: worst,
            detail: "extrapolated |d^b q(1)| for b < k".into(),
        });
    }

    // (5) order-k derivative exists in the interior.
    {
        let (worst, witness, pass) = if k == 0 {
            let bad = t_grid.iter().find(|&&t| !kernel.q(t).is_finite());
            (0.0, bad.copied(), bad.is_none())
        } else {
            let (w, at, finite) = fd_consistency(kernel, k, t_grid);
            (w, at, finite && w <= FD_TOL)
        };
        conditions.push(ConditionResult {
            id: 5,
            pass,
            witness: if pass { None } else { witness },
            value: worst,
            detail: format!("order-{k} derivative finite and consistent"),
        });
    }

    // (6) q^k nonnegative and nondecreasing.
    {
        let mut pass = true;
        let mut witness = None;
        let mut min = f64::INFINITY;
        let mut prev: Option<f64> = None;
        for &t in t_grid {
            match kernel.qk(t) {
                Ok(v) if v.is_finite() => {
                    min = min.min(v);
                    let drop = prev.map(|p| p - v).unwrap_or(0.0);
                    if v < -tol || drop > tol * (1.0 + v.abs()) {
                        if pass {
                            witness = Some(t);
                        }
                        pass = false;
                    }
                    prev = Some(v);
                }
                _ => {
                    if pass {
                        witness = Some(t);
                    }
                    pass = false;
                }
            }
        }
        conditions.push(ConditionResult {
            id: 6,
            pass,
            witness,
            value: min,
            detail: "q^k >= 0 and nondecreasing".into(),
        });
    }

    // (7) growth ratio bounded and refinement stable.
    let coarse = log_grid(1e-4, 0.9, 24);
    let mut refined = coarse.clone();
    refined.extend(coarse.windows(2).map(|w| (w[0] * w[1]).sqrt()));
    refined.sort_by(f64::total_cmp);
    let ratio = |t: f64| -> Result<f64> {
        let num_exp = kernel
            .tail_exponent(k)
            .map(|e| e + 1.0 - (1.0 + alpha - k as f64))
            .unwrap_or_else(|| {
                estimate_endpoint_exponent(
                    |u| kernel.eval_Qk(u).unwrap_or(f64::NAN) / u.powf(1.0 + alpha - k as f64),
                    t * 1e-3,
                )
            });
        let num = integrate_from_singularity(
            |u| kernel.eval_Qk(u).unwrap_or(f64::NAN) / u.powf(1.0 + alpha - k as f64),
            t,
            num_exp,
            &QuadOptions::default(),
        )?
        .value;
        let den = kernel.eval_Qk(t)? / t.powf(alpha - k as f64);
        Ok(num / den)
    };
    let sup = |grid: &[f64]| -> (f64, Option<f64>) {
        let mut s = 0.0f64;
        let mut bad = None;
        for &t in grid {
            match ratio(t) {
                Ok(r) if r.is_finite() => s = s.max(r.abs()),
                _ => {
                    bad = Some(t);
                    s = f64::INFINITY;
                    break;
                }
            }
        }
        (s, bad)
    };
    let (sc, bad_c) = sup(&coarse);
    let (sr, bad_r) = sup(&refined);
    let pass7 = sc.is_finite() && sr.is_finite() && sr <= 1.1 * sc;
    conditions.push(ConditionResult {
        id: 7,
        pass: pass7,
        witness: if pass7 { None } else { bad_c.or(bad_r) },
        value: sr,
        detail: format!("sup ratio coarse {sc:.6e}, refined {sr:.6e}"),
    });

    AdmissibilityReport {
        conditions,
        t_grid: t_grid.to_vec(),
        tol,
        ratio_grid_coarse: coarse,
        ratio_sup_coarse: sc,
        ratio_sup_refined: sr,
    }
}
