//! Rearrangement-invariant spaces evaluated through decreasing rearrangements.
//!
//! Every norm is an exact finite computation on the step profile `f*`
//! (Lebesgue or weighted), except the Orlicz kind which needs a bisection.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::sample::{pairing, rearrangement, GridFunction, RearrangementProfile};
use crate::weights::Weight;
use crate::young::{luxemburg_raw, YoungFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SpaceKind {
    Lebesgue { p: f64 },
    Lorentz { p: f64, q: f64 },
    Orlicz { phi: YoungFunction },
    WeakLp { p: f64 },
}

/// A space descriptor. `p_convex` records the convexity exponent of
/// quasi-Banach kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpaceSpec {
    #[serde(flatten)]
    kind: SpaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_convex: Option<f64>,
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("{what} must be finite and > 0, got {x}")))
    }
}

fn conjugate(p: f64) -> Result<f64> {
    if p > 1.0 && p.is_finite() {
        Ok(p / (p - 1.0))
    } else {
        Err(LabError::Unsupported(format!("no conjugate exponent for p={p}")))
    }
}

impl SpaceSpec {
    pub fn new(kind: SpaceKind) -> Result<Self> {
        match &kind {
            SpaceKind::Lebesgue { p } | SpaceKind::WeakLp { p } => positive(*p, "p")?,
            SpaceKind::Lorentz { p, q } => {
                positive(*p, "p")?;
                positive(*q, "q")?;
            }
            SpaceKind::Orlicz { .. } => {}
        }
        let p_convex = match &kind {
            SpaceKind::Lebesgue { p } if *p < 1.0 => Some(*p),
            SpaceKind::Lorentz { p, q } if p.min(*q) < 1.0 => Some(p.min(*q)),
            _ => None,
        };
        Ok(Self { kind, p_convex })
    }

    pub fn lebesgue(p: f64) -> Result<Self> {
        Self::new(SpaceKind::Lebesgue { p })
    }

    pub fn lorentz(p: f64, q: f64) -> Result<Self> {
        Self::new(SpaceKind::Lorentz { p, q })
    }

    pub fn weak(p: f64) -> Result<Self> {
        Self::new(SpaceKind::WeakLp { p })
    }

    pub fn orlicz(phi: YoungFunction) -> Result<Self> {
        Self::new(SpaceKind::Orlicz { phi })
    }

    pub fn with_p_convex(mut self, p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(LabError::InvalidParameter("convexity exponent must lie in (0,1]".into()));
        }
        self.p_convex = Some(p);
        Ok(self)
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn p_convex(&self) -> Option<f64> {
        self.p_convex
    }

    /// Lebesgue kinds: the triangle inequality is exact and duality has
    /// constant one.
    pub fn is_lebesgue(&self) -> bool {
        matches!(self.kind, SpaceKind::Lebesgue { .. })
    }

    pub fn label(&self) -> String {
        match &self.kind {
            SpaceKind::Lebesgue { p } => format!("L^{p}"),
            SpaceKind::Lorentz { p, q } => format!("L^({p},{q})"),
            SpaceKind::Orlicz { phi } => format!("L^phi[{}]", serde_json::to_string(phi).unwrap_or_default()),
            SpaceKind::WeakLp { p } => format!("L^({p},inf)"),
        }
    }

    /// `(p_X, q_X)` from the closed forms.
    pub fn boyd_indices(&self) -> (f64, f64) {
        match &self.kind {
            SpaceKind::Lebesgue { p } | SpaceKind::Lorentz { p, .. } | SpaceKind::WeakLp { p } => (*p, *p),
            SpaceKind::Orlicz { phi } => phi.dilation_indices(),
        }
    }

    /// Boyd indices from the dilation operator restricted to indicator
    /// profiles `1_(0,a)`, `a` in `[1e-6, 1e6]`, at `t = 1e100` (lower index)
    /// and `t = 1e-100` (upper index).
    pub fn numeric_boyd_indices(&self) -> Result<(f64, f64)> {
        let as_: Vec<f64> = (0..=48).map(|i| 10f64.powf(-6.0 + 0.25 * i as f64)).collect();
        let ln_h = |t: f64| -> Result<f64> {
            let mut best = f64::NEG_INFINITY;
            for &a in &as_ {
                let num = self.indicator_norm(t * a)?;
                let den = self.indicator_norm(a)?;
                best = best.max(num.ln() - den.ln());
            }
            Ok(best)
        };
        let (big, small) = (1e100f64, 1e-100f64);
        Ok((big.ln() / ln_h(big)?, small.ln() / ln_h(small)?))
    }

    /// Norm of the indicator of an interval of length `a` on the half line.
    pub fn indicator_norm(&self, a: f64) -> Result<f64> {
        Ok(match &self.kind {
            SpaceKind::Lebesgue { p } => a.powf(1.0 / p),
            SpaceKind::Lorentz { p, q } => (p / q).powf(1.0 / q) * a.powf(1.0 / p),
            SpaceKind::WeakLp { p } => a.powf(1.0 / p),
            SpaceKind::Orlicz { phi } => 1.0 / phi.inverse(1.0 / a),
        })
    }

    /// `X^r` with `||f||_{X^r} = || |f|^r ||_X^(1/r)`.
    pub fn rth_power(&self, r: f64) -> Result<Self> {
        positive(r, "r")?;
        match &self.kind {
            SpaceKind::Lebesgue { p } => Self::lebesgue(p * r),
            SpaceKind::Lorentz { p, q } => Self::lorentz(p * r, q * r),
            SpaceKind::WeakLp { p } => Self::weak(p * r),
            SpaceKind::Orlicz { .. } => Err(LabError::Unsupported(
                "r-th powers of Orlicz spaces are not Orlicz spaces in general".into(),
            )),
        }
    }

    /// The associate space: `L^p -> L^p'`, `L^(p,q) -> L^(p',q')`,
    /// `L^(p,inf) -> L^(p',1)`, `L^phi -> L^phibar`.
    pub fn associate(&self) -> Result<Self> {
        match &self.kind {
            SpaceKind::Lebesgue { p } => Self::lebesgue(conjugate(*p)?),
            SpaceKind::Lorentz { p, q } => Self::lorentz(conjugate(*p)?, conjugate(*q)?),
            SpaceKind::WeakLp { p } => Self::lorentz(conjugate(*p)?, 1.0),
            SpaceKind::Orlicz { phi } => Self::orlicz(phi.complementary()?),
        }
    }

    /// Constant in `int |fg| <= C ||f||_X ||g||_X'` for the implemented
    /// associate norms.
    pub fn pairing_budget(&self) -> f64 {
        match self.kind {
            SpaceKind::Orlicz { .. } => 2.0,
            _ => 1.0,
        }
    }

    /// The functional of the representation space applied to a profile.
    pub fn profile_norm(&self, prof: &RearrangementProfile) -> Result<f64> {
        Ok(match &self.kind {
            SpaceKind::Lebesgue { p } => prof
                .steps()
                .map(|(v, a, b)| v.powf(*p) * (b - a))
                .sum::<f64>()
                .powf(1.0 / p),
            SpaceKind::Lorentz { p, q } => {
                let e = q / p;
                prof.steps()
                    .map(|(v, a, b)| v.powf(*q) * (p / q) * (b.powf(e) - a.powf(e)))
                    .sum::<f64>()
                    .powf(1.0 / q)
            }
            SpaceKind::WeakLp { p } => prof
                .steps()
                .map(|(v, _, b)| v * b.powf(1.0 / p))
                .fold(0.0, f64::max),
            SpaceKind::Orlicz { phi } => {
                let values: Vec<f64> = prof.levels().to_vec();
                let lengths: Vec<f64> = prof.steps().map(|(_, a, b)| b - a).collect();
                luxemburg_raw(phi.kind(), &values, &lengths, 1.0)?
            }
        })
    }
}

/// `||f||_{X(w)} = ||f*_w||_X`, or the unweighted norm when `w` is absent.
pub fn space_norm(f: &GridFunction, x: &SpaceSpec, w: Option<&Weight>) -> Result<f64> {
    x.profile_norm(&rearrangement(f, w)?)
}

/// `int |fg| w / (||f||_{X(w)} ||g||_{X'(w)})`, zero when the pairing vanishes.
pub fn associate_pairing_check(
    f: &GridFunction,
    g: &GridFunction,
    x: &SpaceSpec,
    w: Option<&Weight>,
) -> Result<f64> {
    let dual = x.associate()?;
    let num = pairing(&f.abs(), &g.abs(), w)?;
    if num == 0.0 {
        return Ok(0.0);
    }
    let den = space_norm(f, x, w)? * space_norm(g, &dual, w)?;
    Ok(num / den)
}

/// Outcome of [`product_hypothesis_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProductReport {
    /// Largest `||prod f_i||_X / prod ||f_i||_{X_i}` over the trials.
    pub max_ratio: f64,
    /// Lebesgue kinds with `1/p = sum 1/p_i`: the Hölder bound applies.
    pub holder_exponents: bool,
    /// Ratios for indicators of `[0, 2^-k)^n`, `k = 1..=L`.
    pub shrinking: Vec<f64>,
    /// The shrinking family grows faster than `|I|^-GROWTH_EXPONENT`.
    pub unbounded: bool,
}

/// Growth rate above which the shrinking-indicator ratios count as unbounded.
pub const GROWTH_EXPONENT: f64 = 0.05;

/// Measures how far `P_m : X_1 x ... x X_m -> X` is from bounded.
pub fn product_hypothesis_check(
    factors: &[SpaceSpec],
    target: &SpaceSpec,
    trials: &[Vec<GridFunction>],
    w: Option<&Weight>,
) -> Result<ProductReport> {
    if factors.len() < 2 {
        return Err(LabError::InvalidParameter("the product check needs m >= 2".into()));
    }
    let ratio = |fs: &[GridFunction]| -> Result<f64> {
        if fs.len() != factors.len() {
            return Err(LabError::ArityMismatch {
                expected: factors.len(),
                got: fs.len(),
            });
        }
        let mut prod = fs[0].abs();
        for f in &fs[1..] {
            prod = prod.mul(&f.abs())?;
        }
        let num = space_norm(&prod, target, w)?;
        if num == 0.0 {
            return Ok(0.0);
        }
        let mut den = 1.0;
        for (f, x) in fs.iter().zip(factors) {
            den *= space_norm(f, x, w)?;
        }
        Ok(num / den)
    };
    let mut max_ratio: f64 = 0.0;
    for t in trials {
        max_ratio = max_ratio.max(ratio(t)?);
    }
    let (dim, level) = match trials.first().and_then(|t| t.first()) {
        Some(f) => (f.dim(), f.level()),
        None => (1, 8),
    };
    let mut shrinking = Vec::new();
    for k in 1..=level {
        let side = (-(k as f64)).exp2();
        let ind = GridFunction::from_fn(dim, level, |x| {
            if x.iter().all(|&c| c < side) {
                1.0
            } else {
                0.0
            }
        });
        let w_k = match w {
            Some(w) if w.level() == level && w.dim() == dim => Some(w),
            _ => None,
        };
        let v: Vec<GridFunction> = vec![ind; factors.len()];
        let mut prod = v[0].clone();
        for f in &v[1..] {
            prod = prod.mul(f)?;
        }
        let mut den = 1.0;
        for (f, x) in v.iter().zip(factors) {
            den *= space_norm(f, x, w_k)?;
        }
        shrinking.push(space_norm(&prod, target, w_k)? / den);
    }
    // growth exponent in the measure |I| = 2^(-nk) of the shrinking cubes
    let unbounded = match (shrinking.first(), shrinking.last()) {
        (Some(a), Some(b)) if shrinking.len() > 1 => {
            let steps = (dim * (shrinking.len() - 1)) as f64;
            (b / a).log2() / steps > GROWTH_EXPONENT
        }
        _ => false,
    };
    let holder_exponents = match &target.kind {
        SpaceKind::Lebesgue { p } => {
            let mut s = 0.0;
            let mut all = true;
            for x in factors {
                match x.kind {
                    SpaceKind::Lebesgue { p } => s += 1.0 / p,
                    _ => all = false,
                }
            }
            all && (s - 1.0 / p).abs() < 1e-12
        }
        _ => false,
    };
    Ok(ProductReport {
        max_ratio,
        holder_exponents,
        shrinking,
        unbounded,
    })
}

/// `||(sum |f_j|^s)^(1/s)|| / (sum ||f_j||^s)^(1/s)` with `s` the convexity
/// exponent of `x`.
pub fn p_convexity_ratio(fs: &[GridFunction], x: &SpaceSpec, s: f64, w: Option<&Weight>) -> Result<f64> {
    positive(s, "convexity exponent")?;
    let first = fs
        .first()
        .ok_or_else(|| LabError::InvalidParameter("no functions".into()))?;
    let mut acc = vec![0.0; first.len()];
    let mut rhs = 0.0;
    for f in fs {
        first.same_grid(f)?;
        for (a, v) in acc.iter_mut().zip(f.abs_values()) {
            *a += v.powf(s);
        }
        rhs += space_norm(f, x, w)?.powf(s);
    }
    let combined = GridFunction::new(first.dim(), first.level(), acc.iter().map(|a| a.powf(1.0 / s)).collect())?;
    let lhs = space_norm(&combined, x, w)?;
    Ok(if lhs == 0.0 { 0.0 } else { lhs / rhs.powf(1.0 / s) })
}

/// `||f + g|| / (||f|| + ||g||)`, the quantity bounded by the quasi-triangle
/// constant.
pub fn triangle_ratio(f: &GridFunction, g: &GridFunction, x: &SpaceSpec, w: Option<&Weight>) -> Result<f64> {
    let lhs = space_norm(&f.add(g)?, x, w)?;
    if lhs == 0.0 {
        return Ok(0.0);
    }
    Ok(lhs / (space_norm(f, x, w)? + space_norm(g, x, w)?))
}
