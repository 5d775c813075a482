//! Young functions, complementary functions, Luxemburg norms and the indices
//! that control them.
//!
//! Closed forms are used wherever they exist. Everything else goes through
//! the generic numeric paths: a Legendre transform for complements, bisection
//! for generalized inverses and Luxemburg norms, and log-grid scans for the
//! dilation indices and the doubling exponent.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicCube, DyadicLattice};
use crate::error::{LabError, Result};
use crate::sample::GridFunction;
use crate::weights::Weight;

/// The supported families. Table samples are natural logarithms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "camelCase")]
pub enum YoungKind {
    /// `scale * t^p`.
    Power {
        p: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `t * log(e + t)^alpha`.
    Zygmund { alpha: f64 },
    /// `exp(t^(1/alpha)) - 1`.
    ExpMinusOne { alpha: f64 },
    /// Log-log interpolation of `(ln t, ln phi(t))`, linear extrapolation.
    #[serde(rename_all = "camelCase")]
    Table { t_log: Vec<f64>, phi_log: Vec<f64> },
    /// Numeric Legendre transform of the inner function.
    Complement(Box<YoungKind>),
}

fn one() -> f64 {
    1.0
}

const LEGENDRE_LN_MIN: f64 = -460.0; // about 1e-200
const LEGENDRE_LN_MAX: f64 = 460.0;
const LEGENDRE_STEP: f64 = 1.151_292_546_497_023; // ln(10) / 2

impl YoungKind {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            YoungKind::Power { p, scale } => scale * t.powf(*p),
            YoungKind::Zygmund { alpha } => t * (std::f64::consts::E + t).ln().powf(*alpha),
            YoungKind::ExpMinusOne { alpha } => t.powf(1.0 / alpha).exp_m1(),
            YoungKind::Table { .. } => self.ln_eval(t).exp(),
            YoungKind::Complement(inner) => legendre(inner, t),
        }
    }

    /// `ln phi(t)`, finite for arguments where `phi(t)` overflows.
    pub fn ln_eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self {
            YoungKind::Power { p, scale } => scale.ln() + p * t.ln(),
            YoungKind::Zygmund { alpha } => {
                t.ln() + alpha * (std::f64::consts::E + t).ln().ln()
            }
            YoungKind::ExpMinusOne { alpha } => {
                let u = t.powf(1.0 / alpha);
                if u > 30.0 {
                    u + (-(-u).exp()).ln_1p()
                } else {
                    u.exp_m1().ln()
                }
            }
            YoungKind::Table { t_log, phi_log } => {
                let x = t.ln();
                let n = t_log.len();
                let j = t_log.partition_point(|&a| a <= x).clamp(1, n - 1);
                let (x0, x1) = (t_log[j - 1], t_log[j]);
                let (y0, y1) = (phi_log[j - 1], phi_log[j]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
            YoungKind::Complement(_) => self.eval(t).ln(),
        }
    }

    /// Generalized inverse `sup { t : phi(t) <= u }`.
    pub fn inverse(&self, u: f64) -> f64 {
        if u.is_nan() {
            return f64::NAN;
        }
        match self {
            YoungKind::Power { p, scale } => (u.max(0.0) / scale).powf(1.0 / p),
            YoungKind::ExpMinusOne { alpha } => u.max(0.0).ln_1p().powf(*alpha),
            _ => bisect_inverse(|t| self.eval(t), u),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LabError::InvalidParameter(m.to_string()));
        match self {
            YoungKind::Power { p, scale } => {
                if !(*p >= 1.0 && p.is_finite()) || !(*scale > 0.0 && scale.is_finite()) {
                    return bad("power kind needs p >= 1 and scale > 0");
                }
            }
            YoungKind::Zygmund { alpha } => {
                if !(*alpha >= 0.0 && alpha.is_finite()) {
                    return bad("zygmund kind needs alpha >= 0");
                }
            }
            YoungKind::ExpMinusOne { alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return bad("expMinusOne kind needs alpha > 0");
                }
            }
            YoungKind::Table { t_log, phi_log } => {
                if t_log.len() < 2 || t_log.len() != phi_log.len() {
                    return bad("table needs at least two matching samples");
                }
                if t_log.windows(2).any(|w| !(w[1] > w[0]))
                    || t_log.iter().chain(phi_log).any(|v| !v.is_finite())
                {
                    return bad("table abscissae must be finite and strictly increasing");
                }
            }
            YoungKind::Complement(inner) => inner.validate()?,
        }
        if !matches!(self, YoungKind::Complement(_)) {
            check_convex(self)?;
        }
        Ok(())
    }
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Secant slopes nondecreasing and values increasing on a log grid.
fn check_convex(kind: &YoungKind) -> Result<()> {
    let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for t in log_grid(1e-6, 1e6, 241) {
        let v = kind.eval(t);
        if !v.is_finite() {
            break;
        }
        pts.push((t, v));
    }
    let mut prev_slope = f64::NEG_INFINITY;
    for w in pts.windows(2) {
        let (t0, v0) = w[0];
        let (t1, v1) = w[1];
        if v1 < v0 {
            return Err(LabError::NotConvex(format!("decreasing between {t0:e} and {t1:e}")));
        }
        let slope = (v1 - v0) / (t1 - t0);
        if slope < prev_slope * (1.0 - 1e-9) - 1e-300 {
            return Err(LabError::NotConvex(format!("secant slope drops near t={t0:e}")));
        }
        prev_slope = slope;
    }
    Ok(())
}

/// `sup_{s>0} (s t - phi(s))`; `+inf` when the maximizer leaves the scan range.
fn legendre(phi: &YoungKind, t: f64) -> f64 {
    let g = |ls: f64| {
        let s = ls.exp();
        let v = s * t - phi.eval(s);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let steps = ((LEGENDRE_LN_MAX - LEGENDRE_LN_MIN) / LEGENDRE_STEP).ceil() as usize;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..=steps {
        let v = g(LEGENDRE_LN_MIN + i as f64 * LEGENDRE_STEP);
        if v > best.1 {
            best = (i, v);
        }
    }
    if best.0 == steps && best.1 > 0.0 {
        return f64::INFINITY;
    }
    let centre = LEGENDRE_LN_MIN + best.0 as f64 * LEGENDRE_STEP;
    let (mut a, mut b) = (centre - LEGENDRE_STEP, centre + LEGENDRE_STEP);
    let ratio = 0.618_033_988_749_894_8;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (g(x1), g(x2));
    for _ in 0..90 {
        if b - a < 1e-13 {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = g(x1);
        }
    }
    best.1.max(f1).max(f2).max(0.0)
}

/// `sup { t : phi(t) <= u }` for a nondecreasing `phi`.
pub(crate) fn bisect_inverse(phi: impl Fn(f64) -> f64, u: f64) -> f64 {
    if u.is_infinite() {
        return f64::INFINITY;
    }
    let mut hi = 1.0;
    while phi(hi) <= u {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = hi;
    while phi(lo) > u {
        lo *= 0.5;
        if lo < 1e-300 {
            return 0.0;
        }
    }
    if lo == hi {
        lo = hi * 0.5;
    }
    for _ in 0..200 {
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if phi(mid) <= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Grid used by [`YoungFunction::delta2_constant`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Delta2Grid {
    pub lambda: (f64, f64, usize),
    pub t: (f64, f64, usize),
    pub slack: f64,
}

pub const DELTA2_GRID: Delta2Grid = Delta2Grid {
    lambda: (2.0, 1e3, 28),
    t: (1e-6, 1e6, 97),
    slack: 1.05,
};

#[derive(Clone, Debug, Default)]
struct Cache {
    indices: OnceLock<(f64, f64)>,
    delta2: OnceLock<std::result::Result<f64, f64>>,
    submult: OnceLock<bool>,
}

impl PartialEq for Cache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// A validated Young function with lazily cached indices.
#[derive(Clone, Debug, PartialEq)]
pub struct YoungFunction {
    kind: YoungKind,
    cache: Cache,
}

impl Serialize for YoungFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.kind.serialize(s)
    }
}

impl<'de> Deserialize<'de> for YoungFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let kind = YoungKind::deserialize(d)?;
        YoungFunction::new(kind).map_err(serde::de::Error::custom)
    }
}

impl YoungFunction {
    pub fn new(kind: YoungKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            cache: Cache::default(),
        })
    }

    pub fn power(p: f64) -> Result<Self> {
        Self::new(YoungKind::Power { p, scale: 1.0 })
    }

    pub fn zygmund(alpha: f64) -> Result<Self> {
        Self::new(YoungKind::Zygmund { alpha })
    }

    pub fn exp_minus_one(alpha: f64) -> Result<Self> {
        Self::new(YoungKind::ExpMinusOne { alpha })
    }

    pub fn kind(&self) -> &YoungKind {
        &self.kind
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.kind.eval(t)
    }

    pub fn ln_eval(&self, t: f64) -> f64 {
        self.kind.ln_eval(t)
    }

    pub fn inverse(&self, u: f64) -> f64 {
        self.kind.inverse(u)
    }

    /// True when the complement is a numeric Legendre transform.
    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, YoungKind::Complement(_) | YoungKind::Table { .. })
    }

    /// `phi(t)/t -> 0` at zero and `-> inf` at infinity, sampled at `1e-8`
    /// and `1e8`.
    pub fn is_n_function(&self) -> bool {
        let small = self.eval(1e-8) / 1e-8;
        let large = self.eval(1e8) / 1e8;
        small < 1e-2 && large > 1e2
    }

    /// The complementary function. Power kinds map to power kinds in closed
    /// form; a numeric complement maps back to its argument; everything else
    /// is wrapped in a numeric Legendre transform.
    pub fn complementary(&self) -> Result<Self> {
        match &self.kind {
            YoungKind::Power { p, scale } => {
                if *p <= 1.0 {
                    return Err(LabError::Unsupported(
                        "the complement of a linear function is not finite".into(),
                    ));
                }
                let q = p / (p - 1.0);
                let c = (p - 1.0) * scale * (scale * p).powf(-q);
                Self::new(YoungKind::Power { p: q, scale: c })
            }
            YoungKind::Complement(inner) => Self::new((**inner).clone()),
            _ => self.numeric_complementary(),
        }
    }

    /// Always the numeric Legendre transform, even when a closed form exists.
    pub fn numeric_complementary(&self) -> Result<Self> {
        Self::new(YoungKind::Complement(Box::new(self.kind.clone())))
    }

    /// An equivalent (not equal) complement with a closed form, when known.
    pub fn equivalent_complement(&self) -> Option<Self> {
        match self.kind {
            YoungKind::Zygmund { alpha } if alpha > 0.0 => Self::exp_minus_one(alpha).ok(),
            _ => self.complementary().ok(),
        }
    }

    /// Lower and upper dilation indices `(i_phi, I_phi)`.
    pub fn dilation_indices(&self) -> (f64, f64) {
        *self.cache.indices.get_or_init(|| match &self.kind {
            YoungKind::Power { p, .. } => (*p, *p),
            YoungKind::Zygmund { .. } => (1.0, 1.0),
            YoungKind::ExpMinusOne { alpha } => (1.0 / alpha, f64::INFINITY),
            _ => self.numeric_dilation_indices(),
        })
    }

    /// `ln h(t) / ln t` at `t = 1e-100` and `t = 1e100`, with
    /// `h(t) = sup_s phi(st)/phi(s)` over `s` in `[1e-6, 1e6]`. The upper
    /// estimate is infinite when it more than grows by half from `t = 1e50`.
    pub fn numeric_dilation_indices(&self) -> (f64, f64) {
        let ss = log_grid(1e-6, 1e6, 49);
        let ln_h = |t: f64| {
            ss.iter()
                .map(|&s| {
                    let d = self.ln_eval(s * t) - self.ln_eval(s);
                    if d.is_nan() {
                        f64::NEG_INFINITY
                    } else {
                        d
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let (t0, t1) = (1e-100f64, 1e100f64);
        let lower = ln_h(t0) / t0.ln();
        let upper = ln_h(t1) / t1.ln();
        // an estimate still growing between 1e50 and 1e100 diverges
        let mid = ln_h(1e50) / 1e50f64.ln();
        let upper = if upper > 1.5 * mid { f64::INFINITY } else { upper };
        let lower = if lower.is_nan() { f64::INFINITY } else { lower };
        let upper = if upper.is_nan() { f64::INFINITY } else { upper };
        (lower.min(upper), upper)
    }

    /// The exponent `C1` with `phi(lambda t) <= (2 lambda)^C1 phi(t)`.
    /// Power kinds use `p`; others take the grid-minimal exponent on
    /// [`DELTA2_GRID`] times the slack. Growth beyond exponent 100 (or
    /// overflow) is reported as a `Delta2Failure`.
    pub fn delta2_constant(&self) -> Result<f64> {
        let r = *self.cache.delta2.get_or_init(|| match &self.kind {
            YoungKind::Power { p, .. } => Ok(*p),
            _ => {
                let e = self.grid_delta2_exponent();
                if e.is_finite() && e <= 100.0 {
                    Ok(e * DELTA2_GRID.slack)
                } else {
                    Err(e)
                }
            }
        });
        r.map_err(|exponent| LabError::Delta2Failure { exponent })
    }

    /// `max ln(phi(lambda t)/phi(t)) / ln(2 lambda)` over the grid, no slack.
    pub fn grid_delta2_exponent(&self) -> f64 {
        let g = &DELTA2_GRID;
        let lambdas = log_grid(g.lambda.0, g.lambda.1, g.lambda.2);
        let ts = log_grid(g.t.0, g.t.1, g.t.2);
        let mut worst = f64::NEG_INFINITY;
        for &l in &lambdas {
            for &t in &ts {
                let num = self.eval(l * t);
                let den = self.eval(t);
                let e = if den > 0.0 {
                    (num / den).ln() / (2.0 * l).ln()
                } else if num > 0.0 {
                    f64::INFINITY
                } else {
                    continue;
                };
                if e.is_nan() || e == f64::INFINITY {
                    return f64::INFINITY;
                }
                worst = worst.max(e);
            }
        }
        worst
    }

    /// `phi(t1 t2) <= phi(t1) phi(t2)`: exact for power kinds, checked on a
    /// product grid over `[1e-4, 1e4]^2` otherwise.
    pub fn is_submultiplicative(&self) -> bool {
        *self.cache.submult.get_or_init(|| match &self.kind {
            YoungKind::Power { scale, .. } => *scale >= 1.0,
            _ => {
                let ts = log_grid(1e-4, 1e4, 33);
                ts.iter().all(|&a| {
                    ts.iter().all(|&b| {
                        let lhs = self.eval(a * b);
                        let rhs = self.eval(a) * self.eval(b);
                        lhs <= rhs * (1.0 + 1e-10)
                    })
                })
            }
        })
    }

    /// Smallest `alpha` in `{0.05, 0.10, ..., 0.95}` for which the complement
    /// raised to `alpha` is convex on a log grid, if any.
    pub fn working_alpha(&self) -> Result<Option<f64>> {
        let comp = self.complementary()?;
        for k in 1..=19 {
            let alpha = k as f64 * 0.05;
            let table = power_of(&comp, alpha);
            if check_convex(&table).is_ok() {
                return Ok(Some(alpha));
            }
        }
        Ok(None)
    }

    /// Relative violations of the N-function identities on log grids.
    pub fn n_function_identities(&self) -> Result<IdentityReport> {
        let comp = self.complementary()?;
        let numeric = comp.is_numeric() || self.is_numeric();
        let ts = log_grid(1e-3, 1e3, 1001);
        let mut lower: f64 = 0.0;
        let mut upper: f64 = 0.0;
        let mut young_bar: f64 = 0.0;
        for &t in &ts {
            let prod = self.inverse(t) * comp.inverse(t);
            lower = lower.max((t - prod) / t);
            upper = upper.max((prod - 2.0 * t) / (2.0 * t));
            let phi = self.eval(t);
            young_bar = young_bar.max((comp.eval(phi / t) - phi) / phi);
        }
        let grid = log_grid(1e-3, 1e3, 41);
        let mut young: f64 = 0.0;
        for &s in &grid {
            for &t in &grid {
                let st = s * t;
                young = young.max((st - self.eval(s) - comp.eval(t)) / st);
            }
        }
        let tolerance = if numeric { 1e-3 } else { 1e-8 };
        Ok(IdentityReport {
            inverse_lower: lower.max(0.0),
            inverse_upper: upper.max(0.0),
            complement_bound: young_bar.max(0.0),
            young: young.max(0.0),
            tolerance,
            numeric_complement: numeric,
            grid_points: ts.len(),
            product_points: grid.len() * grid.len(),
        })
    }
}

/// `phi^alpha` as a dense log-log table.
fn power_of(phi: &YoungFunction, alpha: f64) -> YoungKind {
    let ts = log_grid(1e-4, 1e4, 161);
    let mut t_log = Vec::new();
    let mut phi_log = Vec::new();
    for t in ts {
        let v = phi.ln_eval(t) * alpha;
        if v.is_finite() {
            t_log.push(t.ln());
            phi_log.push(v);
        }
    }
    if t_log.len() < 2 {
        return YoungKind::Table {
            t_log: vec![0.0, 1.0],
            phi_log: vec![1.0, 0.0],
        };
    }
    YoungKind::Table { t_log, phi_log }
}

/// Outcome of [`YoungFunction::n_function_identities`]. Every field is a
/// maximal relative violation (zero when the inequality holds everywhere).
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IdentityReport {
    /// `t <= phi^-1(t) phibar^-1(t)`.
    pub inverse_lower: f64,
    /// `phi^-1(t) phibar^-1(t) <= 2t`.
    pub inverse_upper: f64,
    /// `phibar(phi(t)/t) <= phi(t)`.
    pub complement_bound: f64,
    /// `st <= phi(s) + phibar(t)`.
    pub young: f64,
    pub tolerance: f64,
    pub numeric_complement: bool,
    pub grid_points: usize,
    pub product_points: usize,
}

impl IdentityReport {
    pub fn max_violation(&self) -> f64 {
        self.inverse_lower
            .max(self.inverse_upper)
            .max(self.complement_bound)
            .max(self.young)
    }

    pub fn passes(&self) -> bool {
        self.max_violation() <= self.tolerance
    }
}

/// `inf { lambda > 0 : sum_i phi(|v_i|/lambda) m_i / total <= 1 }`.
pub(crate) fn luxemburg_raw(phi: &YoungKind, values: &[f64], masses: &[f64], total: f64) -> Result<f64> {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Ok(0.0);
    }
    let modular = |lam: f64| -> f64 {
        values
            .iter()
            .zip(masses)
            .filter(|(v, _)| **v != 0.0)
            .map(|(v, m)| phi.eval(v.abs() / lam) * m)
            .sum::<f64>()
            / total
    };
    let mut lo = max * 1e-12;
    let mut hi = max * 1e12;
    let mut tries = 0;
    while modular(hi) > 1.0 {
        hi *= 1e6;
        tries += 1;
        if tries > 40 || !hi.is_finite() {
            return Err(LabError::BracketFailure(format!("modular stays above 1 up to {hi:e}")));
        }
    }
    tries = 0;
    while modular(lo) <= 1.0 {
        lo *= 1e-6;
        tries += 1;
        if tries > 40 || lo == 0.0 {
            return Err(LabError::BracketFailure(format!("modular stays below 1 down to {lo:e}")));
        }
    }
    for _ in 0..400 {
        if hi / lo - 1.0 <= 1e-13 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if modular(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `||f||_{phi,Q}` with respect to Lebesgue measure or `mu`.
pub fn luxemburg_norm(
    f: &GridFunction,
    phi: &YoungFunction,
    lattice: &DyadicLattice,
    q: &DyadicCube,
    mu: Option<&Weight>,
) -> Result<f64> {
    if f.dim() != lattice.dim() || f.level() != lattice.max_level() {
        return Err(LabError::GridMismatch("function and lattice differ".into()));
    }
    if q.level() > lattice.max_level() || q.dim() != f.dim() {
        return Err(LabError::InvalidCube(format!("{q:?} not on the grid")));
    }
    let cells = lattice.cube_cells(q);
    let abs = f.abs_values();
    let values: Vec<f64> = cells.iter().map(|&c| abs[c]).collect();
    let masses: Vec<f64> = match mu {
        None => vec![1.0; cells.len()],
        Some(w) => {
            f.same_grid(w.function())?;
            cells.iter().map(|&c| w.function().values()[c]).collect()
        }
    };
    let total: f64 = masses.iter().sum();
    luxemburg_raw(&phi.kind, &values, &masses, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::average;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn power_complement_closed_form() {
        let half_sq = YoungFunction::new(YoungKind::Power { p: 2.0, scale: 0.5 }).unwrap();
        let c = half_sq.complementary().unwrap();
        assert_eq!(c.kind(), &YoungKind::Power { p: 2.0, scale: 0.5 });
        let cube = YoungFunction::new(YoungKind::Power { p: 3.0, scale: 1.0 / 3.0 }).unwrap();
        match cube.complementary().unwrap().kind() {
            YoungKind::Power { p, scale } => {
                assert_relative_eq!(*p, 1.5, max_relative = 1e-15);
                assert_relative_eq!(*scale, 1.0 / 1.5, max_relative = 1e-14);
            }
            k => panic!("unexpected {k:?}"),
        }
    }

    #[test]
    fn numeric_legendre_matches_closed_form() {
        for (p, c) in [(2.0, 0.5), (3.0, 1.0), (1.5, 2.0), (4.0, 0.25)] {
            let phi = YoungFunction::new(YoungKind::Power { p, scale: c }).unwrap();
            let closed = phi.complementary().unwrap();
            let numeric = phi.numeric_complementary().unwrap();
            for t in log_grid(1e-3, 1e3, 31) {
                assert_relative_eq!(numeric.eval(t), closed.eval(t), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn linear_has_no_complement() {
        assert!(YoungFunction::power(1.0).unwrap().complementary().is_err());
    }

    #[test]
    fn zygmund_complement_is_equivalent_to_exponential() {
        let z = YoungFunction::zygmund(1.0).unwrap();
        let c = z.complementary().unwrap();
        assert!(c.is_numeric());
        let e = z.equivalent_complement().unwrap();
        assert_eq!(e.kind(), &YoungKind::ExpMinusOne { alpha: 1.0 });
        // c vanishes on [0, 1] (phi'(0) = 1), so the comparison is at infinity:
        // c(t) <= e(t) everywhere and e(t) <= c(K t) for t >= 1
        for t in log_grid(1e-2, 20.0, 40) {
            assert!(c.eval(t) <= e.eval(t) * (1.0 + 1e-9));
        }
        for t in log_grid(1.0, 20.0, 40) {
            assert!(e.eval(t) <= c.eval(4.0 * t));
        }
    }

    #[test]
    fn rejects_non_convex() {
        assert!(matches!(
            YoungFunction::exp_minus_one(2.0),
            Err(LabError::NotConvex(_))
        ));
        let concave = YoungKind::Table {
            t_log: vec![0.0, 1.0, 2.0],
            phi_log: vec![0.0, 0.5, 1.0],
        };
        assert!(YoungFunction::new(concave).is_err());
        assert!(YoungFunction::power(0.5).is_err());
    }

    #[test]
    fn table_reproduces_power() {
        let t_log: Vec<f64> = (-10..=10).map(|k| k as f64).collect();
        let phi_log: Vec<f64> = t_log.iter().map(|x| 2.5 * x).collect();
        let tab = YoungFunction::new(YoungKind::Table { t_log, phi_log }).unwrap();
        for t in [1e-6, 0.3, 1.0, 7.0, 1e6] {
            assert_relative_eq!(tab.eval(t), t.powf(2.5), max_relative = 1e-12);
        }
        let (lo, hi) = tab.dilation_indices();
        assert_relative_eq!(lo, 2.5, max_relative = 1e-9);
        assert_relative_eq!(hi, 2.5, max_relative = 1e-9);
    }

    #[test]
    fn inverses() {
        let z = YoungFunction::zygmund(1.0).unwrap();
        for u in [1e-6, 0.5, 3.0, 1e5] {
            assert_relative_eq!(z.eval(z.inverse(u)), u, max_relative = 1e-12);
        }
        let e = YoungFunction::exp_minus_one(0.5).unwrap();
        assert_relative_eq!(e.inverse(e.eval(1.7)), 1.7, max_relative = 1e-12);
        // flat zero part of a complement: sup of the zero set
        let c = z.complementary().unwrap();
        assert_relative_eq!(c.inverse(0.0), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn dilation_indices_closed_and_numeric() {
        assert_eq!(YoungFunction::power(3.0).unwrap().dilation_indices(), (3.0, 3.0));
        let z = YoungFunction::zygmund(1.0).unwrap();
        assert_eq!(z.dilation_indices(), (1.0, 1.0));
        let (lo, hi) = z.numeric_dilation_indices();
        assert!((lo - 1.0).abs() < 0.05 && (hi - 1.0).abs() < 0.05, "{lo} {hi}");
        assert!(lo <= hi);
        let (lo, hi) = YoungFunction::power(2.0).unwrap().numeric_dilation_indices();
        assert_relative_eq!(lo, 2.0, max_relative = 1e-12);
        assert_relative_eq!(hi, 2.0, max_relative = 1e-12);
        let e = YoungFunction::exp_minus_one(1.0).unwrap();
        let (lo, hi) = e.numeric_dilation_indices();
        assert!((lo - 1.0).abs() < 0.05 && hi.is_infinite());
    }

    #[test]
    fn delta2() {
        assert_eq!(YoungFunction::power(2.5).unwrap().delta2_constant().unwrap(), 2.5);
        assert!(matches!(
            YoungFunction::exp_minus_one(1.0).unwrap().delta2_constant(),
            Err(LabError::Delta2Failure { .. })
        ));
        let z = YoungFunction::zygmund(1.0).unwrap();
        let raw = z.grid_delta2_exponent();
        // oracle: the worst pair is lambda = 1e3 at the t maximizing the log ratio
        let oracle = log_grid(1e-6, 1e6, 97)
            .into_iter()
            .map(|t| (1e3 * (std::f64::consts::E + 1e3 * t).ln() / (std::f64::consts::E + t).ln()).ln() / 2e3f64.ln())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(raw, oracle, max_relative = 1e-12);
        let c1 = z.delta2_constant().unwrap();
        assert_relative_eq!(c1, 1.05 * raw, max_relative = 1e-15);
        assert!(c1 > 1.0 && c1 < 2.0);
    }

    #[test]
    fn submultiplicative_flags() {
        assert!(YoungFunction::power(2.0).unwrap().is_submultiplicative());
        assert!(!YoungFunction::new(YoungKind::Power { p: 2.0, scale: 0.5 }).unwrap().is_submultiplicative());
        assert!(YoungFunction::zygmund(1.0).unwrap().is_submultiplicative());
        assert!(!YoungFunction::exp_minus_one(1.0).unwrap().is_submultiplicative());
    }

    #[test]
    fn working_alpha_of_square() {
        assert_eq!(YoungFunction::power(2.0).unwrap().working_alpha().unwrap(), Some(0.5));
    }

    #[test]
    fn identities_closed_form() {
        for phi in [
            YoungFunction::new(YoungKind::Power { p: 2.0, scale: 0.5 }).unwrap(),
            YoungFunction::new(YoungKind::Power { p: 3.0, scale: 1.0 / 3.0 }).unwrap(),
        ] {
            let r = phi.n_function_identities().unwrap();
            assert!(!r.numeric_complement);
            assert!(r.passes(), "{r:?}");
            assert!(r.grid_points >= 1000 && r.product_points >= 1000);
        }
    }

    #[test]
    fn identities_zygmund_numeric() {
        let r = YoungFunction::zygmund(1.0).unwrap().n_function_identities().unwrap();
        assert!(r.numeric_complement);
        assert!(r.passes(), "{r:?}");
    }

    #[test]
    fn luxemburg_examples() {
        let lat = DyadicLattice::standard(1, 2).unwrap();
        let root = DyadicCube::root(1);
        let sq = YoungFunction::power(2.0).unwrap();
        let f = GridFunction::new(1, 2, vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(luxemburg_norm(&f, &sq, &lat, &root, None).unwrap(), 1.0, max_relative = 1e-12);
        let z = GridFunction::constant(1, 2, 0.0);
        assert_eq!(luxemburg_norm(&z, &sq, &lat, &root, None).unwrap(), 0.0);
    }

    #[test]
    fn json_roundtrip() {
        let z = YoungFunction::zygmund(1.0).unwrap();
        let s = serde_json::to_string(&z).unwrap();
        assert_eq!(s, r#"{"kind":"zygmund","params":{"alpha":1.0}}"#);
        let back: YoungFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back.kind(), z.kind());
        let p: YoungFunction = serde_json::from_str(r#"{"kind":"power","params":{"p":3}}"#).unwrap();
        assert_eq!(p.kind(), &YoungKind::Power { p: 3.0, scale: 1.0 });
    }

    fn vals(level: u32) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), -10.0..10.0f64], 1usize << level)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn luxemburg_power_is_average(v in vals(5), p in 1.0..6.0f64, k in 0u32..=5, idx in 0usize..32) {
            let f = GridFunction::new(1, 5, v).unwrap();
            let lat = DyadicLattice::new(vec![2.0 / 3.0], 5).unwrap();
            let q = DyadicCube::from_index(1, k, idx % (1 << k));
            let phi = YoungFunction::power(p).unwrap();
            let a = luxemburg_norm(&f, &phi, &lat, &q, None).unwrap();
            let b = average(&f, &lat, &q, p).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * b.max(1e-300));
        }

        #[test]
        fn luxemburg_homogeneous_and_monotone(v in vals(4), extra in prop::collection::vec(0.0..3.0f64, 16), c in -20.0..20.0f64) {
            let f = GridFunction::new(1, 4, v).unwrap();
            let lat = DyadicLattice::standard(1, 4).unwrap();
            let root = DyadicCube::root(1);
            let phi = YoungFunction::zygmund(1.0).unwrap();
            let n = luxemburg_norm(&f, &phi, &lat, &root, None).unwrap();
            let nc = luxemburg_norm(&f.scale(c), &phi, &lat, &root, None).unwrap();
            prop_assert!((nc - c.abs() * n).abs() <= 1e-9 * (c.abs() * n).max(1e-300));
            let g = GridFunction::new(1, 4, f.abs_values().iter().zip(&extra).map(|(a, b)| a + b).collect()).unwrap();
            let ng = luxemburg_norm(&g, &phi, &lat, &root, None).unwrap();
            prop_assert!(n <= ng * (1.0 + 1e-12));
        }

        #[test]
        fn luxemburg_modular_is_one(v in vals(4), wv in prop::collection::vec(0.2..5.0f64, 16)) {
            let f = GridFunction::new(1, 4, v).unwrap();
            prop_assume!(f.max_abs() > 0.0);
            let w = Weight::new(GridFunction::new(1, 4, wv).unwrap()).unwrap();
            let lat = DyadicLattice::standard(1, 4).unwrap();
            let root = DyadicCube::root(1);
            let phi = YoungFunction::zygmund(2.0).unwrap();
            let lam = luxemburg_norm(&f, &phi, &lat, &root, Some(&w)).unwrap();
            let m: f64 = f.abs_values().iter().zip(w.function().values())
                .map(|(v, w)| phi.eval(v / lam) * w).sum::<f64>() / w.function().values().iter().sum::<f64>();
            prop_assert!((m - 1.0).abs() <= 1e-8);
        }
    }
}
