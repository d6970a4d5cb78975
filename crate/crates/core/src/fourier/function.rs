use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub type OrderFn = Arc<dyn Fn(u32, f64) -> f64 + Send + Sync>;

/// Reduces `t` into `[-π, π)`.
pub fn reduce(t: f64) -> f64 {
    let r = t - TAU * ((t + PI) / TAU).floor();
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// A 2π-periodic real function with optional analytic derivatives.
#[derive(Clone)]
pub struct PeriodicFunction {
    name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Derivative of any order up to `analytic_order`.
    deriv: Option<OrderFn>,
    analytic_order: u32,
    /// Analytic everywhere, so Taylor expansions of any order are valid.
    smooth: bool,
}

impl fmt::Debug for PeriodicFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicFunction")
            .field("name", &self.name)
            .field("analytic_order", &self.analytic_order)
            .finish()
    }
}

fn sin_derivative(order: u32, t: f64) -> f64 {
    (t + order as f64 * FRAC_PI_2).sin()
}

impl PeriodicFunction {
    /// Function from a closure; derivatives fall back to finite differences.
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        PeriodicFunction {
            name: name.into(),
            eval: Arc::new(eval),
            deriv: None,
            analytic_order: 0,
            smooth: false,
        }
    }

    /// Attaches analytic derivatives `d(order, t)` valid up to `max_order`.
    pub fn with_derivatives(
        mut self,
        max_order: u32,
        d: impl Fn(u32, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.deriv = Some(Arc::new(d));
        self.analytic_order = max_order;
        self
    }

    /// Marks the function as analytic on the whole line.
    pub fn smooth(mut self) -> Self {
        self.smooth = true;
        self
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth && self.deriv.is_some() && self.analytic_order == u32::MAX
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn has_analytic_derivative(&self, order: u32) -> bool {
        order == 0 || (self.deriv.is_some() && order <= self.analytic_order)
    }

    /// `order`-th derivative, analytic when available, otherwise by central
    /// differences.
    pub fn derivative(&self, order: u32, t: f64) -> f64 {
        if order == 0 {
            return self.eval(t);
        }
        if let Some(d) = self.deriv.as_ref().filter(|_| order <= self.analytic_order) {
            return d(order, t);
        }
        let h = f64::EPSILON.powf(1.0 / (order as f64 + 2.0)).max(1e-6);
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=order {
            let x = t + (order as f64 / 2.0 - j as f64) * h;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * self.eval(x);
            binom = binom * (order - j) as f64 / (j + 1) as f64;
        }
        acc / h.powi(order as i32)
    }

    pub fn sin() -> Self {
        PeriodicFunction::new("sin", f64::sin)
            .with_derivatives(u32::MAX, sin_derivative)
            .smooth()
    }

    pub fn cos() -> Self {
        PeriodicFunction::new("cos", f64::cos)
            .with_derivatives(u32::MAX, |o, t| sin_derivative(o + 1, t))
            .smooth()
    }

    /// `t` on `(-π, π)`, `0` at the jump.
    pub fn sawtooth() -> Self {
        PeriodicFunction::new("sawtooth", |t| {
            let r = reduce(t);
            if r == -PI {
                0.0
            } else {
                r
            }
        })
        .with_derivatives(u32::MAX, |o, _| if o == 1 { 1.0 } else { 0.0 })
    }

    /// `sign(sin t)`.
    pub fn square() -> Self {
        PeriodicFunction::new("square", |t| {
            let r = reduce(t);
            if r == 0.0 || r == -PI {
                0.0
            } else {
                r.signum()
            }
        })
        .with_derivatives(u32::MAX, |_, _| 0.0)
    }

    /// `|t|` on `[-π, π]`.
    pub fn abs() -> Self {
        PeriodicFunction::new("abs", |t| reduce(t).abs()).with_derivatives(u32::MAX, |o, t| {
            if o == 1 {
                let r = reduce(t);
                if r == 0.0 || r == -PI {
                    0.0
                } else {
                    r.signum()
                }
            } else {
                0.0
            }
        })
    }

    /// `a_0/2 + sum (a_n cos nt + b_n sin nt)`; `b[0]` is ignored.
    pub fn trig(a: Vec<f64>, b: Vec<f64>) -> Self {
        let a = Arc::new(a);
        let b = Arc::new(b);
        let (a2, b2) = (a.clone(), b.clone());
        PeriodicFunction::new("trig", move |t| trig_derivative(&a, &b, 0, t))
            .with_derivatives(u32::MAX, move |o, t| trig_derivative(&a2, &b2, o, t))
            .smooth()
    }

    /// Fourier partial sum of the sawtooth up to degree `n`.
    pub fn sawtooth_truncated(n: usize) -> Self {
        let b: Vec<f64> = (0..=n)
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    let s = if k % 2 == 1 { 2.0 } else { -2.0 };
                    s / k as f64
                }
            })
            .collect();
        let mut f = PeriodicFunction::trig(vec![0.0], b);
        f.name = format!("sawtooth_truncated_{n}");
        f
    }
}

fn trig_derivative(a: &[f64], b: &[f64], order: u32, t: f64) -> f64 {
    let mut acc = if order == 0 {
        a.first().copied().unwrap_or(0.0) / 2.0
    } else {
        0.0
    };
    let top = a.len().max(b.len());
    for n in 1..top {
        let nf = n as f64;
        let scale = nf.powi(order as i32);
        let phase = nf * t + order as f64 * FRAC_PI_2;
        let an = a.get(n).copied().unwrap_or(0.0);
        let bn = b.get(n).copied().unwrap_or(0.0);
        acc += scale * (an * phase.cos() + bn * phase.sin());
    }
    acc
}

/// Config-level reference to a library function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum FunctionRef {
    Sin,
    Cos,
    Sawtooth,
    Square,
    Abs,
    SawtoothTruncated {
        degree: usize,
    },
    Trig {
        #[serde(default)]
        a: Vec<f64>,
        #[serde(default)]
        b: Vec<f64>,
    },
}

impl FunctionRef {
    pub fn build(&self) -> PeriodicFunction {
        match self {
            FunctionRef::Sin => PeriodicFunction::sin(),
            FunctionRef::Cos => PeriodicFunction::cos(),
            FunctionRef::Sawtooth => PeriodicFunction::sawtooth(),
            FunctionRef::Square => PeriodicFunction::square(),
            FunctionRef::Abs => PeriodicFunction::abs(),
            FunctionRef::SawtoothTruncated { degree } => {
                PeriodicFunction::sawtooth_truncated(*degree)
            }
            FunctionRef::Trig { a, b } => PeriodicFunction::trig(a.clone(), b.clone()),
        }
    }
}
