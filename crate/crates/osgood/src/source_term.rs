//! Reaction terms f with f(0) = 0, f strictly increasing, convex, and
//! ∫₁^∞ 1/f < ∞ (the Osgood condition), together with the functional
//! F(t) = ∫ₜ^∞ 1/f(s) ds and its inverse.
//!
//! F is strictly decreasing and maps (0,∞) bijectively onto (0,∞); for the
//! scalar ODE u' = f(u) with u(0) = c the blow-up time is exactly F(c).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear tabulated reaction with a power-law tail.
///
/// Nodes are anchored at (0, 0). Beyond the last node the function is
/// extrapolated as C·s^p with p the log-log slope of the final segment;
/// p > 1 is required (otherwise the tail integral of 1/f diverges).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    t: Vec<f64>,
    f: Vec<f64>,
    tail_exponent: f64,
    tail_coeff: f64,
}

impl Table {
    fn from_samples(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidSource(
                "tabulated source needs at least two samples".into(),
            ));
        }
        let mut t = Vec::with_capacity(samples.len() + 1);
        let mut f = Vec::with_capacity(samples.len() + 1);
        if samples[0].0 > 0.0 {
            t.push(0.0);
            f.push(0.0);
        }
        for &(ti, fi) in samples {
            t.push(ti);
            f.push(fi);
        }
        if t[0] != 0.0 || f[0] != 0.0 {
            return Err(Error::InvalidSource(
                "tabulated source must start at t = 0 with f(0) = 0".into(),
            ));
        }
        for w in t.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidSource(
                    "tabulated abscissae must be strictly increasing".into(),
                ));
            }
        }
        for (i, w) in f.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidSource(format!(
                    "tabulated values must be strictly increasing (violated after sample {i})"
                )));
            }
        }
        if f.iter().skip(1).any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidSource(
                "tabulated values must be strictly positive for t > 0".into(),
            ));
        }
        // midpoint convexity on the node grid: chord slopes must be nondecreasing
        let mut prev_slope = f64::NEG_INFINITY;
        for i in 0..t.len() - 1 {
            let slope = (f[i + 1] - f[i]) / (t[i + 1] - t[i]);
            if slope < prev_slope * (1.0 - 1e-12) - 1e-12 {
                return Err(Error::InvalidSource(format!(
                    "tabulated source is not convex near t = {}",
                    t[i]
                )));
            }
            prev_slope = prev_slope.max(slope);
        }
        let n = t.len();
        let p = (f[n - 1] / f[n - 2]).ln() / (t[n - 1] / t[n - 2]).ln();
        if !(p > 1.0) {
            return Err(Error::NonOsgood(format!(
                "tail growth exponent {p:.4} ≤ 1, so ∫ 1/f diverges"
            )));
        }
        let c = f[n - 1] / t[n - 1].powf(p);
        Ok(Table {
            t,
            f,
            tail_exponent: p,
            tail_coeff: c,
        })
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x >= self.t[n - 1] {
            return self.tail_coeff * x.powf(self.tail_exponent);
        }
        let i = match self.t.partition_point(|&ti| ti <= x) {
            0 => 0,
            k => k - 1,
        };
        let w = (x - self.t[i]) / (self.t[i + 1] - self.t[i]);
        self.f[i] + w * (self.f[i + 1] - self.f[i])
    }

    /// ∫ₓ^∞ 1/f, exact for the piecewise-linear interpolant plus the
    /// power-law tail.
    fn osgood_integral(&self, x: f64) -> f64 {
        let n = self.t.len();
        let p = self.tail_exponent;
        if x >= self.t[n - 1] {
            // ∫ₓ^∞ ds / (C s^p) = x / (f(x) (p - 1))
            return x / (self.eval(x) * (p - 1.0));
        }
        let mut total = self.t[n - 1] / (self.f[n - 1] * (p - 1.0));
        let start = match self.t.partition_point(|&ti| ti <= x) {
            0 => 0,
            k => k - 1,
        };
        for i in start..n - 1 {
            let lo = if i == start { x } else { self.t[i] };
            let hi = self.t[i + 1];
            let b = (self.f[i + 1] - self.f[i]) / (self.t[i + 1] - self.t[i]);
            let f_lo = self.eval(lo);
            let f_hi = self.f[i + 1];
            // ∫ ds / (f_lo + b (s - lo)) over [lo, hi]
            total += if b.abs() * (hi - lo) < 1e-14 * f_lo {
                (hi - lo) / f_lo
            } else {
                (f_hi / f_lo).ln() / b
            };
        }
        total
    }
}

/// Tagged family of admissible reactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceKind {
    /// f(t) = t^{1+α} with α > 0.
    Power { alpha: f64 },
    /// f(t) = e^t − 1.
    ExpMinusOne,
    /// f(t) = t² / e^{1/t}.
    PowerOverExp,
    /// Piecewise-linear interpolation of sampled (t, f(t)) pairs.
    Tabulated(Table),
}

/// A reaction term satisfying (f1)–(f3). Immutable after construction and
/// safe to evaluate concurrently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTerm {
    kind: SourceKind,
    /// Optional (κ, γ) with F(1/t) ≤ κ·t^γ for large t.
    pub osgood_asymptotics: Option<(f64, f64)>,
}

impl SourceTerm {
    /// f(t) = t^{1+α}. The case α = 0 (plain exponential growth of the
    /// scalar ODE, no blow-up) is rejected as non-Osgood.
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::NonOsgood(format!(
                "power source needs α > 0 (got {alpha}); ∫ 1/t^(1+α) diverges otherwise"
            )));
        }
        Ok(SourceTerm {
            kind: SourceKind::Power { alpha },
            osgood_asymptotics: Some((1.0 / alpha, alpha)),
        })
    }

    pub fn exp_minus_one() -> Self {
        SourceTerm {
            kind: SourceKind::ExpMinusOne,
            osgood_asymptotics: None,
        }
    }

    pub fn power_over_exp() -> Self {
        SourceTerm {
            kind: SourceKind::PowerOverExp,
            osgood_asymptotics: None,
        }
    }

    pub fn tabulated(samples: &[(f64, f64)]) -> Result<Self> {
        Ok(SourceTerm {
            kind: SourceKind::Tabulated(Table::from_samples(samples)?),
            osgood_asymptotics: None,
        })
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    /// Evaluate f(t) for t ≥ 0.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::Domain(format!("f is only defined on [0,∞), got {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(match &self.kind {
            SourceKind::Power { alpha } => t.powf(1.0 + alpha),
            SourceKind::ExpMinusOne => t.exp_m1(),
            SourceKind::PowerOverExp => t * t * (-1.0 / t).exp(),
            SourceKind::Tabulated(tab) => tab.eval(t),
        })
    }

    /// The Osgood functional F(t) = ∫ₜ^∞ 1/f attached to this source.
    pub fn osgood(&self) -> OsgoodFunctional<'_> {
        OsgoodFunctional {
            source: self,
            rel_tol: 1e-10,
        }
    }
}

/// F(t) = ∫ₜ^∞ 1/f(s) ds, strictly decreasing and bijective (0,∞) → (0,∞),
/// Lipschitz on [c,∞) with constant 1/f(c), and F' = −1/f.
#[derive(Debug, Clone, Copy)]
pub struct OsgoodFunctional<'a> {
    source: &'a SourceTerm,
    pub rel_tol: f64,
}

impl<'a> OsgoodFunctional<'a> {
    pub fn source(&self) -> &'a SourceTerm {
        self.source
    }

    /// F(t) for t > 0. Closed form for the analytic families, exact
    /// segment-wise integration for tabulated sources.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("F is only defined on (0,∞), got {t}")));
        }
        Ok(match &self.source.kind {
            SourceKind::Power { alpha } => 1.0 / (alpha * t.powf(*alpha)),
            // ∫ₜ^∞ ds/(e^s − 1) = −ln(1 − e^{−t}); the two branches keep
            // 1 − e^{−t} accurate for small and large t respectively
            SourceKind::ExpMinusOne => {
                if t < 0.5 {
                    -(-(-t).exp_m1()).ln()
                } else {
                    -(-(-t).exp()).ln_1p()
                }
            }
            // ∫ₜ^∞ e^{1/s}/s² ds = e^{1/t} − 1
            SourceKind::PowerOverExp => (1.0 / t).exp_m1(),
            SourceKind::Tabulated(tab) => tab.osgood_integral(t),
        })
    }

    /// F⁻¹(y) for y > 0, with |F(x) − y|/y ≤ 1e−8.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::Domain(format!(
                "F⁻¹ is only defined on (0,∞), got {y}"
            )));
        }
        Ok(match &self.source.kind {
            SourceKind::Power { alpha } => (1.0 / (alpha * y)).powf(1.0 / alpha),
            // F is an involution here
            SourceKind::ExpMinusOne => {
                if y < 0.5 {
                    -(-(-y).exp_m1()).ln()
                } else {
                    -(-(-y).exp()).ln_1p()
                }
            }
            SourceKind::PowerOverExp => 1.0 / y.ln_1p(),
            SourceKind::Tabulated(_) => self.inverse_numeric(y)?,
        })
    }

    /// Bracketing bisection refined by Newton steps using F' = −1/f.
    fn inverse_numeric(&self, y: f64) -> Result<f64> {
        // F bijective: expand geometrically until the bracket straddles y
        let mut lo = 1.0;
        let mut hi = 1.0;
        while self.eval(lo)? < y {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::Domain(format!("F⁻¹({y}) underflows")));
            }
        }
        while self.eval(hi)? > y {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Domain(format!("F⁻¹({y}) overflows")));
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fx = self.eval(x)?;
            if (fx - y).abs() <= 1e-9 * y {
                return Ok(x);
            }
            if fx > y {
                lo = x;
            } else {
                hi = x;
            }
            // Newton: x ← x + (F(x) − y)·f(x), safeguarded by the bracket
            let step = (fx - y) * self.source.eval(x)?;
            let xn = x + step;
            x = if xn > lo && xn < hi {
                xn
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(x)
    }
}

/// Outcome of checking F(1/t) ≤ κ·t^γ on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub kappa: f64,
    pub gamma: f64,
    pub holds_everywhere: bool,
    /// Largest grid point at which F(1/t) > κ·t^γ.
    pub largest_violation: Option<f64>,
    /// max over the grid of F(1/t) − κ·t^γ.
    pub worst_excess: f64,
}

/// Check the growth hypothesis F(1/t) ≤ κ·t^γ on an increasing grid of
/// evaluation points.
pub fn check_asymptotics(
    source: &SourceTerm,
    kappa: f64,
    gamma: f64,
    t_grid: &[f64],
) -> Result<AsymptoticsReport> {
    if t_grid.is_empty() {
        return Err(Error::Domain("asymptotics grid must be nonempty".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "asymptotics grid must be strictly increasing".into(),
        ));
    }
    let functional = source.osgood();
    let mut largest_violation = None;
    let mut worst_excess = f64::NEG_INFINITY;
    for &t in t_grid {
        if !(t > 0.0) {
            return Err(Error::Domain("asymptotics grid must be positive".into()));
        }
        let bound = kappa * t.powf(gamma);
        let excess = functional.eval(1.0 / t)? - bound;
        worst_excess = worst_excess.max(excess);
        // round-off slack so exact-equality cases (e.g. F(1/t) = t) pass
        if excess > 1e-12 * bound {
            largest_violation = Some(t);
        }
    }
    Ok(AsymptoticsReport {
        kappa,
        gamma,
        holds_everywhere: largest_violation.is_none(),
        largest_violation,
        worst_excess,
    })
}

/// Geometric grid of n points spanning [lo, hi].
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| lo * ratio.powi(i as i32)).collect()
}
