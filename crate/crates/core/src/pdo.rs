//! Multilinear Fourier multipliers and pseudo-differential operators on the
//! periodic grid, their commutators, and a multilinear square function.
//!
//! Cell `j` is identified with the point `x_j = j/N` (per axis) and the
//! transform is `f^(xi) = N_tot^-1 sum_j f(x_j) exp(-2 pi i x_j . xi)` with
//! frequencies in `-N/2..N/2`. Output frequencies `xi_1 + ... + xi_m` are
//! folded modulo `N`, which is exact at the grid points.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::sample::GridFunction;
use crate::weights::BmoFunction;

/// Largest `N_tot^m` accepted by [`multiplier_apply`].
pub const MULTIPLIER_BUDGET: usize = 1 << 26;
/// Largest `N_tot^(m+1)` accepted by [`pdo_apply`].
pub const PDO_BUDGET: usize = 1 << 21;

/// Certified class `S^r_{rho,delta}` of a built-in symbol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolClass {
    pub r: f64,
    pub rho: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    /// `1`.
    Identity,
    /// Indicator of `xi_1 = 0`.
    ProjectFirstZero,
    /// `(1 + sum |xi_i|^2)^-1`.
    CoifmanMeyer,
    /// `1 + |xi|`.
    Growing,
    /// `(1 + cos(2 pi x_1)/2) (1 + sum |xi_i|^2)^-1`.
    Modulated,
    /// `(1 + (1 + cos^2(2 pi x_1)) |xi_1|^2 + sum_{i>1} |xi_i|^2)^-1`.
    VariableCoifmanMeyer,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Identity => "identity",
            Builtin::ProjectFirstZero => "project-first-zero",
            Builtin::CoifmanMeyer => "coifman-meyer",
            Builtin::Growing => "growing",
            Builtin::Modulated => "modulated",
            Builtin::VariableCoifmanMeyer => "variable-coifman-meyer",
        }
    }

    pub fn depends_on_x(self) -> bool {
        matches!(self, Builtin::Modulated | Builtin::VariableCoifmanMeyer)
    }

    pub fn class(self) -> Option<SymbolClass> {
        let c = |r| Some(SymbolClass { r, rho: 1.0, delta: 0.0 });
        match self {
            Builtin::Identity => c(0.0),
            Builtin::ProjectFirstZero => None,
            Builtin::CoifmanMeyer | Builtin::Modulated | Builtin::VariableCoifmanMeyer => c(-2.0),
            Builtin::Growing => c(1.0),
        }
    }

    /// `xi` holds the `m` frequency vectors back to back.
    fn eval(self, x: &[f64], xi: &[f64], n: usize) -> f64 {
        let sq: f64 = xi.iter().map(|v| v * v).sum();
        match self {
            Builtin::Identity => 1.0,
            Builtin::ProjectFirstZero => {
                if xi[..n].iter().all(|v| *v == 0.0) {
                    1.0
                } else {
                    0.0
                }
            }
            Builtin::CoifmanMeyer => 1.0 / (1.0 + sq),
            Builtin::Growing => 1.0 + sq.sqrt(),
            Builtin::Modulated => (1.0 + 0.5 * (2.0 * PI * x[0]).cos()) / (1.0 + sq),
            Builtin::VariableCoifmanMeyer => {
                let first: f64 = xi[..n].iter().map(|v| v * v).sum();
                let c = (2.0 * PI * x[0]).cos();
                1.0 / (1.0 + (1.0 + c * c) * first + (sq - first))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SymbolKind {
    Multiplier,
    Full,
}

/// A symbol `sigma(x, xi_1, ..., xi_m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SymbolSpec {
    kind: SymbolKind,
    m: usize,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    class: Option<SymbolClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    builtin_name: Option<Builtin>,
    /// Multiplier values on the frequency lattice, flattened with the first
    /// slot slowest and FFT index order within each slot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tabulated: Option<Vec<f64>>,
}

impl SymbolSpec {
    pub fn builtin(name: Builtin, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(LabError::InvalidParameter("arity must be >= 1".into()));
        }
        Ok(Self {
            kind: if name.depends_on_x() {
                SymbolKind::Full
            } else {
                SymbolKind::Multiplier
            },
            m,
            class: name.class(),
            builtin_name: Some(name),
            tabulated: None,
        })
    }

    /// A multiplier given by its values on the frequency lattice.
    pub fn tabulated(m: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 || values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidParameter("bad tabulated multiplier".into()));
        }
        Ok(Self {
            kind: SymbolKind::Multiplier,
            m,
            class: None,
            builtin_name: None,
            tabulated: Some(values),
        })
    }

    /// The same symbol, forced onto the per-point evaluation path.
    pub fn as_full(&self) -> Self {
        Self {
            kind: SymbolKind::Full,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(LabError::InvalidParameter("arity must be >= 1".into()));
        }
        match (&self.builtin_name, &self.tabulated) {
            (Some(b), None) => {
                if b.depends_on_x() && self.kind == SymbolKind::Multiplier {
                    return Err(LabError::InvalidParameter(format!(
                        "{} depends on x and cannot be a multiplier",
                        b.name()
                    )));
                }
                Ok(())
            }
            (None, Some(_)) => Ok(()),
            _ => Err(LabError::InvalidParameter(
                "a symbol needs exactly one of builtinName or tabulated".into(),
            )),
        }
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn arity(&self) -> usize {
        self.m
    }

    /// Explicit class metadata, else the certified class of the built-in.
    pub fn class(&self) -> Option<SymbolClass> {
        self.class.or_else(|| self.builtin_name.and_then(Builtin::class))
    }

    pub fn builtin_name(&self) -> Option<Builtin> {
        self.builtin_name
    }

    pub fn name(&self) -> String {
        self.builtin_name.map_or_else(|| "tabulated".to_string(), |b| b.name().to_string())
    }

    /// The standing hypothesis `r < m n (rho - 1)` on the certified class.
    pub fn meets_class_hypothesis(&self, n: usize) -> bool {
        self.class()
            .is_some_and(|c| c.r < (self.m * n) as f64 * (c.rho - 1.0))
    }

    /// Evaluates at continuous arguments (`xi` has `m n` entries).
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        let n = x.len().max(1);
        match (self.builtin_name, &self.tabulated) {
            (Some(b), _) => b.eval(x, xi, n),
            (None, Some(_)) => f64::NAN,
            (None, None) => f64::NAN,
        }
    }
}

fn signed(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

fn check_tuple(sigma: &SymbolSpec, fs: &[&GridFunction]) -> Result<()> {
    sigma.validate()?;
    if fs.len() != sigma.m {
        return Err(LabError::ArityMismatch {
            expected: sigma.m,
            got: fs.len(),
        });
    }
    for f in &fs[1..] {
        fs[0].same_grid(f)?;
    }
    Ok(())
}

/// Forward or inverse (unnormalized) transform of a row-major `n`-dim array.
fn fft_nd(data: &mut [Complex64], dim: usize, side: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(side)
    } else {
        planner.plan_fft_forward(side)
    };
    if dim == 1 {
        fft.process(data);
        return;
    }
    for row in data.chunks_mut(side) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); side];
    for c in 0..side {
        for r in 0..side {
            col[r] = data[r * side + c];
        }
        fft.process(&mut col);
        for r in 0..side {
            data[r * side + c] = col[r];
        }
    }
}

fn to_complex(f: &GridFunction) -> Vec<Complex64> {
    match f.imag() {
        None => f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        Some(im) => f.values().iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect(),
    }
}

/// Normalized transform coefficients in FFT index order.
pub fn fourier_coefficients(f: &GridFunction) -> Vec<Complex64> {
    let mut data = to_complex(f);
    fft_nd(&mut data, f.dim(), f.side_cells(), false);
    let scale = 1.0 / data.len() as f64;
    for v in &mut data {
        *v *= scale;
    }
    data
}

/// Signed frequency vector of FFT index `k`.
fn frequency(k: usize, dim: usize, side: usize) -> [f64; 2] {
    if dim == 1 {
        [signed(k, side) as f64, 0.0]
    } else {
        [signed(k / side, side) as f64, signed(k % side, side) as f64]
    }
}

/// FFT index of the sum of frequency indices (component-wise modulo `N`).
fn fold(a: usize, b: usize, dim: usize, side: usize) -> usize {
    if dim == 1 {
        (a + b) % side
    } else {
        let r = (a / side + b / side) % side;
        let c = (a % side + b % side) % side;
        r * side + c
    }
}

fn from_complex(dim: usize, level: u32, data: Vec<Complex64>) -> Result<GridFunction> {
    let re = data.iter().map(|c| c.re).collect();
    let im = data.iter().map(|c| c.im).collect();
    GridFunction::new_complex(dim, level, re, im)
}

/// Visits every frequency tuple, calling `visit(folded output index, symbol
/// arguments, product of coefficients)`.
fn for_each_tuple(
    coeffs: &[Vec<Complex64>],
    dim: usize,
    side: usize,
    mut visit: impl FnMut(usize, &[f64], usize, Complex64),
) {
    let m = coeffs.len();
    let ntot = coeffs[0].len();
    let mut idx = vec![0usize; m];
    let mut xi = vec![0.0; m * dim];
    let total = ntot.pow(m as u32);
    for flat in 0..total {
        let mut rest = flat;
        for s in (0..m).rev() {
            idx[s] = rest % ntot;
            rest /= ntot;
        }
        let mut prod = Complex64::new(1.0, 0.0);
        let mut out = 0usize;
        for s in 0..m {
            prod *= coeffs[s][idx[s]];
            let fr = frequency(idx[s], dim, side);
            xi[s * dim..s * dim + dim].copy_from_slice(&fr[..dim]);
            out = if s == 0 { idx[0] } else { fold(out, idx[s], dim, side) };
        }
        if prod.re == 0.0 && prod.im == 0.0 {
            continue;
        }
        visit(out, &xi, flat, prod);
    }
}

/// `T_m(f)(x) = sum m(xi) prod f_i^(xi_i) exp(2 pi i x . (xi_1 + ... + xi_m))`.
pub fn multiplier_apply(sigma: &SymbolSpec, fs: &[&GridFunction]) -> Result<GridFunction> {
    check_tuple(sigma, fs)?;
    if sigma.kind != SymbolKind::Multiplier {
        return Err(LabError::InvalidParameter("symbol depends on x: use pdo_apply".into()));
    }
    let f0 = fs[0];
    let (dim, side, ntot) = (f0.dim(), f0.side_cells(), f0.len());
    let work = (ntot as f64).powi(sigma.m as i32);
    if work > MULTIPLIER_BUDGET as f64 {
        return Err(LabError::BudgetExceeded(format!(
            "{ntot}^{} frequency tuples exceed the budget {MULTIPLIER_BUDGET}",
            sigma.m
        )));
    }
    if let Some(tab) = &sigma.tabulated {
        if tab.len() != ntot.pow(sigma.m as u32) {
            return Err(LabError::GridMismatch(format!(
                "tabulated multiplier has {} values, the grid needs {}",
                tab.len(),
                ntot.pow(sigma.m as u32)
            )));
        }
    }
    let coeffs: Vec<Vec<Complex64>> = fs.iter().map(|f| fourier_coefficients(f)).collect();
    let mut g = vec![Complex64::new(0.0, 0.0); ntot];
    let x0 = [0.0; 2];
    for_each_tuple(&coeffs, dim, side, |out, xi, flat, prod| {
        let mv = match &sigma.tabulated {
            Some(t) => t[flat],
            None => sigma.eval(&x0[..dim], xi),
        };
        g[out] += prod * mv;
    });
    fft_nd(&mut g, dim, side, true);
    from_complex(dim, f0.level(), g)
}

fn grid_point(k: usize, dim: usize, side: usize) -> [f64; 2] {
    let h = 1.0 / side as f64;
    if dim == 1 {
        [k as f64 * h, 0.0]
    } else {
        [(k / side) as f64 * h, (k % side) as f64 * h]
    }
}

/// `T_sigma(f)(x) = sum sigma(x, xi) prod f_i^(xi_i) exp(2 pi i x . sum xi)`,
/// evaluated point by point.
pub fn pdo_apply(sigma: &SymbolSpec, fs: &[&GridFunction]) -> Result<GridFunction> {
    check_tuple(sigma, fs)?;
    if sigma.tabulated.is_some() {
        return multiplier_apply(sigma, fs);
    }
    let f0 = fs[0];
    let (dim, side, ntot) = (f0.dim(), f0.side_cells(), f0.len());
    let work = (ntot as f64).powi(sigma.m as i32 + 1);
    if work > PDO_BUDGET as f64 {
        return Err(LabError::BudgetExceeded(format!(
            "{ntot}^{} evaluations exceed the budget {PDO_BUDGET}",
            sigma.m + 1
        )));
    }
    let coeffs: Vec<Vec<Complex64>> = fs.iter().map(|f| fourier_coefficients(f)).collect();
    let out: Vec<Complex64> = (0..ntot)
        .into_par_iter()
        .map(|k| {
            let x = grid_point(k, dim, side);
            let mut g = vec![Complex64::new(0.0, 0.0); ntot];
            for_each_tuple(&coeffs, dim, side, |o, xi, _, prod| {
                g[o] += prod * sigma.eval(&x[..dim], xi);
            });
            let mut acc = Complex64::new(0.0, 0.0);
            for (eta, v) in g.iter().enumerate() {
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                let fr = frequency(eta, dim, side);
                let phase: f64 = (0..dim).map(|a| x[a] * fr[a]).sum::<f64>() * 2.0 * PI;
                acc += v * Complex64::from_polar(1.0, phase);
            }
            acc
        })
        .collect();
    from_complex(dim, f0.level(), out)
}

/// Dispatches on the symbol kind.
pub fn apply(sigma: &SymbolSpec, fs: &[&GridFunction]) -> Result<GridFunction> {
    match sigma.kind {
        SymbolKind::Multiplier => multiplier_apply(sigma, fs),
        SymbolKind::Full => pdo_apply(sigma, fs),
    }
}

fn complex_parts(f: &GridFunction) -> (Vec<f64>, Vec<f64>) {
    let re = f.values().to_vec();
    let im = f.imag().map_or_else(|| vec![0.0; re.len()], |v| v.to_vec());
    (re, im)
}

/// `sum_j (b_j T(f) - T(f_1, ..., b_j f_j, ..., f_m))`. Constant `b_j`
/// contribute exactly zero and are skipped.
pub fn commutator_apply(sigma: &SymbolSpec, bs: &[&BmoFunction], fs: &[&GridFunction]) -> Result<GridFunction> {
    check_tuple(sigma, fs)?;
    if bs.len() != fs.len() {
        return Err(LabError::ArityMismatch {
            expected: fs.len(),
            got: bs.len(),
        });
    }
    let f0 = fs[0];
    let mut re = vec![0.0; f0.len()];
    let mut im = vec![0.0; f0.len()];
    let mut base: Option<(Vec<f64>, Vec<f64>)> = None;
    for (j, b) in bs.iter().enumerate() {
        f0.same_grid(b.function())?;
        if b.is_constant() {
            continue;
        }
        if base.is_none() {
            base = Some(complex_parts(&apply(sigma, fs)?));
        }
        let (tr, ti) = base.as_ref().expect("computed above");
        let bf = fs[j].mul(b.function())?;
        let mut args: Vec<&GridFunction> = fs.to_vec();
        args[j] = &bf;
        let (sr, si) = complex_parts(&apply(sigma, &args)?);
        let bv = b.function().values();
        for c in 0..re.len() {
            re[c] += bv[c] * tr[c] - sr[c];
            im[c] += bv[c] * ti[c] - si[c];
        }
    }
    GridFunction::new_complex(f0.dim(), f0.level(), re, im)
}

/// One-variable kernel factor of the product kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum KernelFactor {
    /// `exp(-pi |z|^2)`.
    Gaussian,
    /// `z_1 exp(-pi |z|^2)`: odd, hence mean zero.
    OddGaussian,
}

impl KernelFactor {
    fn eval(self, z: &[f64]) -> f64 {
        let g = (-PI * z.iter().map(|v| v * v).sum::<f64>()).exp();
        match self {
            KernelFactor::Gaussian => g,
            KernelFactor::OddGaussian => z[0] * g,
        }
    }
}

/// `psi(x, y_1..y_m) = prod_i k_i(x - y_i)` with the decay data of the size
/// condition, plus the aperture `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SquareFunctionSpec {
    pub factors: Vec<KernelFactor>,
    pub lambda: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_delta() -> f64 {
    1.0
}
fn default_a() -> f64 {
    64.0
}
fn default_gamma() -> f64 {
    1.0
}

impl SquareFunctionSpec {
    pub fn new(factors: Vec<KernelFactor>, lambda: f64) -> Result<Self> {
        let s = Self {
            factors,
            lambda,
            delta: default_delta(),
            a: default_a(),
            gamma: default_gamma(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn arity(&self) -> usize {
        self.factors.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.factors.len();
        if m == 0 {
            return Err(LabError::InvalidParameter("kernel needs at least one factor".into()));
        }
        if !(self.lambda > 2.0 * m as f64) {
            return Err(LabError::Hypothesis(format!(
                "lambda = {} must exceed 2m = {}",
                self.lambda,
                2 * m
            )));
        }
        Ok(())
    }

    /// `max |psi(x, y)| (1 + sum |x - y_i|)^(mn + delta)` over sample points
    /// `|x - y_i| <= 8` (one-dimensional offsets along each axis).
    pub fn size_constant(&self, dim: usize) -> f64 {
        let m = self.factors.len();
        let e = (m * dim) as f64 + self.delta;
        let offsets: Vec<f64> = (-64..=64).map(|k| k as f64 / 8.0).collect();
        let mut best: f64 = 0.0;
        for &d in &offsets {
            for &d2 in &offsets {
                let mut val = 1.0;
                let mut dist = 0.0;
                for (i, k) in self.factors.iter().enumerate() {
                    let z = if i == 0 { d } else { d2 };
                    let mut zz = [0.0; 2];
                    zz[0] = z;
                    val *= k.eval(&zz[..dim]);
                    dist += z.abs();
                }
                best = best.max(val.abs() * (1.0 + dist).powf(e));
            }
        }
        best
    }
}

/// Periodized, dilated factor `t^-n k(z/t)` sampled at the grid offsets.
fn periodized_samples(k: KernelFactor, t: f64, dim: usize, side: usize) -> Vec<f64> {
    let h = 1.0 / side as f64;
    let reach = 4i64;
    let ntot = side.pow(dim as u32);
    let mut out = vec![0.0; ntot];
    for (idx, slot) in out.iter_mut().enumerate() {
        let base = grid_point(idx, dim, side);
        let mut s = 0.0;
        if dim == 1 {
            for nu in -reach..=reach {
                let z = base[0] + nu as f64;
                s += k.eval(&[z / t]);
            }
        } else {
            for nu0 in -reach..=reach {
                for nu1 in -reach..=reach {
                    let z = [(base[0] + nu0 as f64) / t, (base[1] + nu1 as f64) / t];
                    s += k.eval(&z);
                }
            }
        }
        *slot = s / t.powi(dim as i32);
        let _ = h;
    }
    out
}

/// Circular convolution `(a * b)(x) = N_tot^-1 sum_y a(x - y) b(y)`.
fn convolve(a: &[f64], b: &[f64], dim: usize, side: usize) -> Vec<f64> {
    let mut fa: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut fb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut fa, dim, side, false);
    fft_nd(&mut fb, dim, side, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    fft_nd(&mut fa, dim, side, true);
    let n = a.len() as f64;
    fa.iter().map(|c| c.re / (n * n)).collect()
}

/// `g*_{lambda,psi}(f)(x)`, with `t = 2^-k` for `k = 0..=L` (weight `ln 2`
/// per scale) and a Riemann sum over the grid in `y`.
pub fn square_function(spec: &SquareFunctionSpec, fs: &[&GridFunction]) -> Result<GridFunction> {
    spec.validate()?;
    if fs.len() != spec.arity() {
        return Err(LabError::ArityMismatch {
            expected: spec.arity(),
            got: fs.len(),
        });
    }
    for f in &fs[1..] {
        fs[0].same_grid(f)?;
    }
    let f0 = fs[0];
    let (dim, side, level) = (f0.dim(), f0.side_cells(), f0.level());
    let ntot = f0.len();
    let mut acc = vec![0.0; ntot];
    for k in 0..=level {
        let t = (-(k as f64)).exp2();
        // psi_t(f)(y) = prod_i (k_t * f_i)(y)
        let mut psi = vec![1.0; ntot];
        for (kf, f) in spec.factors.iter().zip(fs) {
            let kern = periodized_samples(*kf, t, dim, side);
            let conv = convolve(&kern, f.values(), dim, side);
            for (p, c) in psi.iter_mut().zip(conv) {
                *p *= c;
            }
        }
        let sq: Vec<f64> = psi.iter().map(|v| v * v).collect();
        // aperture weight (t / (t + |z|))^(n lambda) with periodic |z|
        let aperture: Vec<f64> = (0..ntot)
            .map(|i| {
                let p = grid_point(i, dim, side);
                let d2: f64 = p[..dim].iter().map(|c| c.min(1.0 - c).powi(2)).sum();
                (t / (t + d2.sqrt())).powf(dim as f64 * spec.lambda)
            })
            .collect();
        let smoothed = convolve(&aperture, &sq, dim, side);
        let w = std::f64::consts::LN_2 / t.powi(dim as i32);
        for (a, s) in acc.iter_mut().zip(smoothed) {
            *a += w * s.max(0.0);
        }
    }
    GridFunction::new(dim, level, acc.into_iter().map(f64::sqrt).collect())
}

/// Fitted constant for one derivative pattern.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SpotEntry {
    /// Number of `x` derivatives.
    pub x_order: usize,
    /// Number of frequency derivatives.
    pub xi_order: usize,
    /// Which coordinates are differentiated (`x` coords first, then `xi`).
    pub coords: Vec<usize>,
    /// Smallest `C` fitting the decay on all sample points.
    pub constant: f64,
    /// Ratio of the fitted constant on the outermost shell to the next one in.
    pub growth: f64,
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SpotReport {
    pub class: SymbolClass,
    pub entries: Vec<SpotEntry>,
    pub shells: Vec<f64>,
}

impl SpotReport {
    pub fn violations(&self) -> usize {
        self.entries.iter().filter(|e| e.violation).count()
    }
}

/// Finite-difference check of the class decay up to total order `order`
/// (at most 2) on radial frequency shells `1, 10, ..., 1e4`. A pattern is
/// flagged when the fitted constant still grows by more than a factor 2
/// over the last decade of radii. `class` overrides the certified metadata.
pub fn symbol_spot_check(sigma: &SymbolSpec, dim: usize, order: usize, class: Option<SymbolClass>) -> Result<SpotReport> {
    sigma.validate()?;
    if sigma.builtin_name.is_none() {
        return Err(LabError::Unsupported("spot checks need a built-in symbol".into()));
    }
    let class = class
        .or(sigma.class())
        .ok_or_else(|| LabError::Unsupported(format!("{} has no certified class", sigma.name())))?;
    let order = order.min(2);
    let nx = dim;
    let nxi = sigma.m * dim;
    let total = nx + nxi;
    let mut patterns: Vec<Vec<usize>> = vec![vec![]];
    if order >= 1 {
        patterns.extend((0..total).map(|a| vec![a]));
    }
    if order >= 2 {
        for a in 0..total {
            for b in a..total {
                patterns.push(vec![a, b]);
            }
        }
    }
    let shells = vec![1.0, 10.0, 100.0, 1e3, 1e4];
    let xs = [0.0, 0.13, 0.37, 0.71];
    // a few fixed unit directions in the (m n)-dimensional frequency space
    let dirs: Vec<Vec<f64>> = (0..6)
        .map(|d| {
            let v: Vec<f64> = (0..nxi).map(|i| ((d * 7 + i * 3) as f64 * 0.9 + 0.3).cos()).collect();
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            v.into_iter().map(|c| c / norm).collect()
        })
        .collect();
    let mut entries = Vec::new();
    for pat in patterns {
        let x_order = pat.iter().filter(|&&a| a < nx).count();
        let xi_order = pat.len() - x_order;
        let expo = class.r - class.rho * xi_order as f64 + class.delta * x_order as f64;
        let mut per_shell = Vec::new();
        for &rad in &shells {
            let mut best: f64 = 0.0;
            for &x0 in &xs {
                for d in &dirs {
                    let mut point = vec![0.0; total];
                    point[0] = x0;
                    for (i, c) in d.iter().enumerate() {
                        point[nx + i] = c * rad;
                    }
                    let steps: Vec<f64> = pat
                        .iter()
                        .map(|&a| if a < nx { 1e-3 } else { 1e-3 * rad.max(1.0) })
                        .collect();
                    let eval = |p: &[f64]| sigma.eval(&p[..nx], &p[nx..]);
                    let deriv = finite_difference(&eval, &point, &pat, &steps);
                    let size: f64 = 1.0 + d.chunks(dim).map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).sum::<f64>() * rad;
                    best = best.max(deriv.abs() / size.powf(expo));
                }
            }
            per_shell.push(best);
        }
        let constant = per_shell.iter().cloned().fold(0.0, f64::max);
        let last = per_shell[per_shell.len() - 1];
        let prev = per_shell[per_shell.len() - 2];
        let growth = if prev > 0.0 {
            last / prev
        } else if last > 1e-12 {
            f64::INFINITY
        } else {
            0.0
        };
        entries.push(SpotEntry {
            x_order,
            xi_order,
            coords: pat,
            constant,
            growth,
            violation: growth > 2.0,
        });
    }
    Ok(SpotReport { class, entries, shells })
}

fn finite_difference(f: &dyn Fn(&[f64]) -> f64, p: &[f64], pat: &[usize], h: &[f64]) -> f64 {
    match pat.len() {
        0 => f(p),
        1 => {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[pat[0]] += h[0];
            b[pat[0]] -= h[0];
            (f(&a) - f(&b)) / (2.0 * h[0])
        }
        _ => {
            let (i, j) = (pat[0], pat[1]);
            if i == j {
                let mut a = p.to_vec();
                let mut b = p.to_vec();
                a[i] += h[0];
                b[i] -= h[0];
                (f(&a) - 2.0 * f(p) + f(&b)) / (h[0] * h[0])
            } else {
                let mut s = 0.0;
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let mut q = p.to_vec();
                    q[i] += si * h[0];
                    q[j] += sj * h[1];
                    s += si * sj * f(&q);
                }
                s / (4.0 * h[0] * h[1])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::DyadicLattice;
    use proptest::prelude::*;

    fn rand_fn(dim: usize, level: u32, seed: u64) -> GridFunction {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 1usize << (dim as u32 * level);
        GridFunction::new(dim, level, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct double sum over frequencies, no FFT.
    fn direct_bilinear(sigma: &SymbolSpec, f: &GridFunction, g: &GridFunction) -> Vec<Complex64> {
        let side = f.side_cells();
        let dft = |h: &GridFunction| -> Vec<Complex64> {
            (0..side)
                .map(|k| {
                    let xi = signed(k, side) as f64;
                    h.values()
                        .iter()
                        .enumerate()
                        .map(|(j, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * j as f64 * xi / side as f64))
                        .sum::<Complex64>()
                        / side as f64
                })
                .collect()
        };
        let (fh, gh) = (dft(f), dft(g));
        (0..side)
            .map(|j| {
                let x = j as f64 / side as f64;
                let mut s = Complex64::new(0.0, 0.0);
                for a in 0..side {
                    for b in 0..side {
                        let (xa, xb) = (signed(a, side) as f64, signed(b, side) as f64);
                        s += sigma.eval(&[x], &[xa, xb]) * fh[a] * gh[b] * Complex64::from_polar(1.0, 2.0 * PI * x * (xa + xb));
                    }
                }
                s
            })
            .collect()
    }

    #[test]
    fn identity_multiplier_is_product() {
        for (dim, level) in [(1, 6), (2, 3)] {
            let f = rand_fn(dim, level, 1);
            let g = rand_fn(dim, level, 2);
            let t = multiplier_apply(&SymbolSpec::builtin(Builtin::Identity, 2).unwrap(), &[&f, &g]).unwrap();
            let p = f.mul(&g).unwrap();
            for i in 0..p.len() {
                assert!((t.values()[i] - p.values()[i]).abs() < 1e-10);
                assert!(t.imag().unwrap()[i].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_multiplier() {
        let f = rand_fn(1, 5, 3);
        let g = rand_fn(1, 5, 4);
        let t = multiplier_apply(&SymbolSpec::builtin(Builtin::ProjectFirstZero, 2).unwrap(), &[&f, &g]).unwrap();
        let mean = f.integral();
        for i in 0..f.len() {
            assert!((t.values()[i] - mean * g.values()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn coifman_meyer_matches_direct_sum() {
        let f = rand_fn(1, 6, 5);
        let g = rand_fn(1, 6, 6);
        let cm = SymbolSpec::builtin(Builtin::CoifmanMeyer, 2).unwrap();
        let t = multiplier_apply(&cm, &[&f, &g]).unwrap();
        let d = direct_bilinear(&cm, &f, &g);
        for i in 0..f.len() {
            assert!((t.values()[i] - d[i].re).abs() < 1e-9);
            assert!((t.imag().unwrap()[i] - d[i].im).abs() < 1e-9);
        }
    }

    #[test]
    fn pdo_paths() {
        let f = rand_fn(1, 5, 7);
        let g = rand_fn(1, 5, 8);
        let cm = SymbolSpec::builtin(Builtin::CoifmanMeyer, 2).unwrap();
        let a = multiplier_apply(&cm, &[&f, &g]).unwrap();
        let b = pdo_apply(&cm.as_full(), &[&f, &g]).unwrap();
        for i in 0..f.len() {
            assert!((a.values()[i] - b.values()[i]).abs() < 1e-10);
        }
        let id = pdo_apply(&SymbolSpec::builtin(Builtin::Identity, 2).unwrap().as_full(), &[&f, &g]).unwrap();
        let p = f.mul(&g).unwrap();
        for i in 0..f.len() {
            assert!((id.values()[i] - p.values()[i]).abs() < 1e-10);
        }
        // separable symbol a(x) m(xi)
        let md = pdo_apply(&SymbolSpec::builtin(Builtin::Modulated, 2).unwrap(), &[&f, &g]).unwrap();
        for i in 0..f.len() {
            let x = i as f64 / f.len() as f64;
            let ax = 1.0 + 0.5 * (2.0 * PI * x).cos();
            assert!((md.values()[i] - ax * a.values()[i]).abs() < 1e-10);
        }
        // variable symbol against the direct sum
        let v = SymbolSpec::builtin(Builtin::VariableCoifmanMeyer, 2).unwrap();
        let t = pdo_apply(&v, &[&f, &g]).unwrap();
        let d = direct_bilinear(&v, &f, &g);
        for i in 0..f.len() {
            assert!((t.values()[i] - d[i].re).abs() < 1e-10);
        }
    }

    #[test]
    fn budgets() {
        let big = rand_fn(1, 8, 1);
        let cm = SymbolSpec::builtin(Builtin::VariableCoifmanMeyer, 2).unwrap();
        assert!(matches!(pdo_apply(&cm, &[&big, &big]), Err(LabError::BudgetExceeded(_))));
        let f = rand_fn(1, 7, 1);
        assert!(pdo_apply(&cm, &[&f, &f]).is_ok());
        let m3 = SymbolSpec::builtin(Builtin::CoifmanMeyer, 4).unwrap();
        assert!(matches!(multiplier_apply(&m3, &[&big, &big, &big, &big]), Err(LabError::BudgetExceeded(_))));
        assert!(matches!(
            multiplier_apply(&m3, &[&big]),
            Err(LabError::ArityMismatch { expected: 4, got: 1 })
        ));
    }

    #[test]
    fn commutators() {
        let lat = [DyadicLattice::standard(1, 5).unwrap()];
        let f = rand_fn(1, 5, 9);
        let g = rand_fn(1, 5, 10);
        let c = BmoFunction::new(GridFunction::constant(1, 5, 3.0), &lat).unwrap();
        let cm = SymbolSpec::builtin(Builtin::CoifmanMeyer, 2).unwrap();
        let z = commutator_apply(&cm, &[&c, &c], &[&f, &g]).unwrap();
        assert!(z.values().iter().chain(z.imag().unwrap()).all(|v| *v == 0.0));
        let b = BmoFunction::new(rand_fn(1, 5, 11), &lat).unwrap();
        let id1 = SymbolSpec::builtin(Builtin::Identity, 1).unwrap();
        let zi = commutator_apply(&id1, &[&b], &[&f]).unwrap();
        assert!(zi.values().iter().all(|v| v.abs() < 1e-10));
        // definitional re-assembly
        let step = BmoFunction::new(GridFunction::from_fn(1, 5, |x| if x[0] < 0.25 { 1.0 } else { 0.0 }), &lat).unwrap();
        let got = commutator_apply(&cm, &[&step, &c], &[&f, &g]).unwrap();
        let t = multiplier_apply(&cm, &[&f, &g]).unwrap();
        let bf = f.mul(step.function()).unwrap();
        let t2 = multiplier_apply(&cm, &[&bf, &g]).unwrap();
        for i in 0..f.len() {
            let e = step.function().values()[i] * t.values()[i] - t2.values()[i];
            assert!((got.values()[i] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn square_function_examples() {
        let spec = SquareFunctionSpec::new(vec![KernelFactor::OddGaussian, KernelFactor::Gaussian], 5.0).unwrap();
        let z = GridFunction::constant(1, 6, 0.0);
        let s = square_function(&spec, &[&z, &z]).unwrap();
        assert!(s.values().iter().all(|v| *v == 0.0));
        let c1 = GridFunction::constant(1, 6, 2.0);
        let c2 = GridFunction::constant(1, 6, -1.0);
        let s = square_function(&spec, &[&c1, &c2]).unwrap();
        assert!(s.values().iter().all(|v| v.abs() < 1e-6));
        let f = rand_fn(1, 6, 12);
        let g = rand_fn(1, 6, 13);
        let a = square_function(&spec, &[&f, &g]).unwrap();
        let b = square_function(&spec, &[&f.scale(2.0), &g.scale(2.0)]).unwrap();
        for i in 0..f.len() {
            assert!((b.values()[i] - 4.0 * a.values()[i]).abs() <= 1e-10 * a.values()[i].max(1e-300));
        }
        assert!(matches!(
            SquareFunctionSpec::new(vec![KernelFactor::Gaussian; 2], 4.0),
            Err(LabError::Hypothesis(_))
        ));
        assert!(spec.size_constant(1) <= spec.a);
    }

    #[test]
    fn spot_checks() {
        let id = SymbolSpec::builtin(Builtin::Identity, 2).unwrap();
        let r = symbol_spot_check(&id, 1, 2, None).unwrap();
        assert_eq!(r.violations(), 0, "{:?}", r.entries.iter().filter(|e| e.violation).collect::<Vec<_>>());
        assert!(r.entries.iter().filter(|e| !e.coords.is_empty()).all(|e| e.constant < 1e-6));
        let cm = SymbolSpec::builtin(Builtin::CoifmanMeyer, 2).unwrap();
        let r = symbol_spot_check(&cm, 1, 2, None).unwrap();
        assert_eq!(r.violations(), 0, "{:?}", r.entries.iter().filter(|e| e.violation).collect::<Vec<_>>());
        let v = SymbolSpec::builtin(Builtin::VariableCoifmanMeyer, 2).unwrap();
        assert_eq!(symbol_spot_check(&v, 1, 2, None).unwrap().violations(), 0);
        let grow = SymbolSpec::builtin(Builtin::Growing, 1).unwrap();
        assert_eq!(symbol_spot_check(&grow, 1, 2, None).unwrap().violations(), 0);
        let wrong = SymbolClass { r: 0.0, rho: 1.0, delta: 0.0 };
        assert!(symbol_spot_check(&grow, 1, 2, Some(wrong)).unwrap().violations() > 0);
    }

    #[test]
    fn class_hypothesis() {
        assert!(SymbolSpec::builtin(Builtin::CoifmanMeyer, 2).unwrap().meets_class_hypothesis(1));
        assert!(!SymbolSpec::builtin(Builtin::Identity, 2).unwrap().meets_class_hypothesis(1));
        assert!(!SymbolSpec::builtin(Builtin::ProjectFirstZero, 2).unwrap().meets_class_hypothesis(1));
    }

    #[test]
    fn symbol_json() {
        let s: SymbolSpec = serde_json::from_str(
            r#"{"kind":"multiplier","m":2,"r":-2,"rho":1,"delta":0,"builtinName":"coifman-meyer"}"#,
        )
        .unwrap();
        assert_eq!(s, SymbolSpec::builtin(Builtin::CoifmanMeyer, 2).unwrap());
        let back: SymbolSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let bad: SymbolSpec = serde_json::from_str(r#"{"kind":"multiplier","m":1,"builtinName":"modulated"}"#).unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn tabulated_matches_builtin() {
        let side = 16usize;
        let mut vals = Vec::new();
        for a in 0..side {
            for b in 0..side {
                let (xa, xb) = (signed(a, side) as f64, signed(b, side) as f64);
                vals.push(1.0 / (1.0 + xa * xa + xb * xb));
            }
        }
        let tab = SymbolSpec::tabulated(2, vals).unwrap();
        let f = rand_fn(1, 4, 20);
        let g = rand_fn(1, 4, 21);
        let a = multiplier_apply(&tab, &[&f, &g]).unwrap();
        let b = multiplier_apply(&SymbolSpec::builtin(Builtin::CoifmanMeyer, 2).unwrap(), &[&f, &g]).unwrap();
        for i in 0..f.len() {
            assert!((a.values()[i] - b.values()[i]).abs() < 1e-14);
        }
    }

    fn vals(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-2.0..2.0f64, n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn multilinear(a in vals(32), b in vals(32), c in vals(32), s in -3.0..3.0f64) {
            let f = GridFunction::new(1, 5, a).unwrap();
            let f2 = GridFunction::new(1, 5, b).unwrap();
            let g = GridFunction::new(1, 5, c).unwrap();
            let cm = SymbolSpec::builtin(Builtin::CoifmanMeyer, 2).unwrap();
            let lhs = multiplier_apply(&cm, &[&f.scale(s).add(&f2).unwrap(), &g]).unwrap();
            let r1 = multiplier_apply(&cm, &[&f, &g]).unwrap();
            let r2 = multiplier_apply(&cm, &[&f2, &g]).unwrap();
            for i in 0..32 {
                let e = s * r1.values()[i] + r2.values()[i];
                prop_assert!((lhs.values()[i] - e).abs() < 1e-9);
            }
        }
    }
}
