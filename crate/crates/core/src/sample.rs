//! Piecewise-constant functions on the periodic dyadic grid, averages,
//! distribution functions and decreasing rearrangements.

use serde::{Deserialize, Serialize};

use crate::dyadic::{check_dim, DyadicCube, DyadicLattice, Pyramid};
use crate::error::{LabError, Result};
use crate::weights::Weight;

/// Finest grid level allowed per dimension.
pub fn max_grid_level(dim: usize) -> u32 {
    if dim == 1 {
        12
    } else {
        8
    }
}

/// Cell values of a function on `2^(nL)` cells of `[0,1)^n`, row-major.
/// An optional imaginary part is carried for transform outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    dim: usize,
    level: u32,
    values: Vec<f64>,
    imag: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct GridFunctionFile {
    n: usize,
    #[serde(rename = "L")]
    level: u32,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    complex: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    imag: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    positive: bool,
}

impl GridFunction {
    pub fn new(dim: usize, level: u32, values: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        let max = max_grid_level(dim);
        if level > max {
            return Err(LabError::LevelOverflow { level, max_level: max });
        }
        let expected = 1usize << (dim as u32 * level);
        if values.len() != expected {
            return Err(LabError::InvalidFunction(format!(
                "expected {expected} cell values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidFunction("non-finite cell value".into()));
        }
        Ok(Self {
            dim,
            level,
            values,
            imag: None,
        })
    }

    pub fn new_complex(dim: usize, level: u32, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        let mut f = Self::new(dim, level, re)?;
        if im.len() != f.values.len() || im.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidFunction("bad imaginary part".into()));
        }
        f.imag = Some(im);
        Ok(f)
    }

    pub fn constant(dim: usize, level: u32, c: f64) -> Self {
        Self::new(dim, level, vec![c; 1usize << (dim as u32 * level)])
            .expect("valid constant function")
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(dim: usize, level: u32, f: impl Fn(&[f64]) -> f64) -> Self {
        let n = 1usize << (dim as u32 * level);
        let values = (0..n)
            .map(|i| f(&cell_center(dim, level, i)[..dim]))
            .collect();
        Self::new(dim, level, values).expect("finite samples")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Cells per axis.
    pub fn side_cells(&self) -> usize {
        1usize << self.level
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn imag(&self) -> Option<&[f64]> {
        self.imag.as_deref()
    }

    pub fn is_complex(&self) -> bool {
        self.imag.is_some()
    }

    pub fn cell_center(&self, idx: usize) -> [f64; 2] {
        cell_center(self.dim, self.level, idx)
    }

    /// Pointwise modulus.
    pub fn abs_values(&self) -> Vec<f64> {
        match &self.imag {
            None => self.values.iter().map(|v| v.abs()).collect(),
            Some(im) => self
                .values
                .iter()
                .zip(im)
                .map(|(a, b)| a.hypot(*b))
                .collect(),
        }
    }

    pub fn abs(&self) -> Self {
        Self {
            dim: self.dim,
            level: self.level,
            values: self.abs_values(),
            imag: None,
        }
    }

    pub fn real_part(&self) -> Self {
        Self {
            imag: None,
            ..self.clone()
        }
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.dim, self.level, self.values.iter().map(|&v| g(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            level: self.level,
            values: self.values.iter().map(|v| v * c).collect(),
            imag: self.imag.as_ref().map(|im| im.iter().map(|v| v * c).collect()),
        }
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.level != other.level {
            return Err(LabError::GridMismatch(format!(
                "(n={}, L={}) vs (n={}, L={})",
                self.dim, self.level, other.dim, other.level
            )));
        }
        Ok(())
    }

    /// Pointwise product of real parts.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        Self::new(
            self.dim,
            self.level,
            self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        Self::new(
            self.dim,
            self.level,
            self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.abs_values().into_iter().fold(0.0, f64::max)
    }

    /// Lebesgue integral of the real part over the torus.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn to_json(&self) -> Result<String> {
        self.to_json_marked(false)
    }

    pub(crate) fn to_json_marked(&self, positive: bool) -> Result<String> {
        let file = GridFunctionFile {
            n: self.dim,
            level: self.level,
            values: self.values.clone(),
            complex: self.imag.is_some(),
            imag: self.imag.clone(),
            positive,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GridFunctionFile = serde_json::from_str(text)?;
        match file.imag {
            Some(im) => Self::new_complex(file.n, file.level, file.values, im),
            None if file.complex => Err(LabError::InvalidFunction(
                "complex flag set without imaginary values".into(),
            )),
            None => Self::new(file.n, file.level, file.values),
        }
    }

    /// One value per line, row-major. The level is inferred from the count.
    pub fn from_csv(text: &str, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                LabError::InvalidFunction(format!("line {}: cannot parse {line:?}", lineno + 1))
            })?;
            values.push(v);
        }
        let count = values.len();
        let level = (0..=max_grid_level(dim))
            .find(|&l| 1usize << (dim as u32 * l) == count)
            .ok_or_else(|| {
                LabError::InvalidFunction(format!("{count} values is not 2^(nL) for n={dim}"))
            })?;
        Self::new(dim, level, values)
    }
}

pub(crate) fn cell_center(dim: usize, level: u32, idx: usize) -> [f64; 2] {
    let n = 1usize << level;
    let h = 1.0 / n as f64;
    if dim == 1 {
        [(idx as f64 + 0.5) * h, 0.0]
    } else {
        [((idx / n) as f64 + 0.5) * h, ((idx % n) as f64 + 0.5) * h]
    }
}

fn check_lattice(f: &GridFunction, lattice: &DyadicLattice) -> Result<()> {
    if f.dim() != lattice.dim() || f.level() != lattice.max_level() {
        return Err(LabError::GridMismatch(format!(
            "function grid (n={}, L={}) vs lattice (n={}, L={})",
            f.dim(),
            f.level(),
            lattice.dim(),
            lattice.max_level()
        )));
    }
    Ok(())
}

/// `<|f|^r>_Q^{1/r}` for a cube `Q` of `lattice`.
pub fn average(f: &GridFunction, lattice: &DyadicLattice, q: &DyadicCube, r: f64) -> Result<f64> {
    check_lattice(f, lattice)?;
    if !(r > 0.0) {
        return Err(LabError::InvalidParameter(format!("exponent r={r} must be > 0")));
    }
    if q.level() > lattice.max_level() || q.dim() != f.dim() {
        return Err(LabError::InvalidCube(format!("{q:?} not on the grid")));
    }
    let abs = f.abs_values();
    let cells = lattice.cube_cells(q);
    let s: f64 = cells.iter().map(|&c| abs[c].powf(r)).sum();
    Ok((s / cells.len() as f64).powf(1.0 / r))
}

/// Per-cube `<|f|^r>^{1/r}` over the whole tree of `lattice`, one pyramid
/// per function.
pub(crate) fn average_pyramids(
    functions: &[&GridFunction],
    lattice: &DyadicLattice,
    r: f64,
) -> Result<Vec<Pyramid>> {
    functions
        .iter()
        .map(|f| {
            check_lattice(f, lattice)?;
            Ok(power_average_pyramid(f, lattice, r))
        })
        .collect()
}

pub(crate) fn power_average_pyramid(f: &GridFunction, lattice: &DyadicLattice, r: f64) -> Pyramid {
    let powered: Vec<f64> = f.abs_values().into_iter().map(|v| pow(v, r)).collect();
    let mut p = Pyramid::sums(f.dim(), f.level(), &lattice.to_frame(&powered)).into_averages(f.dim());
    if r != 1.0 {
        for lvl in &mut p.levels {
            for v in lvl.iter_mut() {
                *v = v.powf(1.0 / r);
            }
        }
    }
    p
}

#[inline]
pub(crate) fn pow(v: f64, r: f64) -> f64 {
    if r == 1.0 {
        v
    } else if r == 2.0 {
        v * v
    } else {
        v.powf(r)
    }
}

fn cell_measures(f: &GridFunction, w: Option<&Weight>) -> Result<Vec<f64>> {
    let vol = f.cell_volume();
    match w {
        None => Ok(vec![vol; f.len()]),
        Some(w) => {
            f.same_grid(w.function())?;
            Ok(w.function().values().iter().map(|v| v * vol).collect())
        }
    }
}

/// Lebesgue or `w`-measure of `{|f| > lambda}`.
pub fn distribution(f: &GridFunction, lambda: f64, w: Option<&Weight>) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(LabError::InvalidParameter(format!("lambda={lambda} must be >= 0")));
    }
    let m = cell_measures(f, w)?;
    Ok(f
        .abs_values()
        .iter()
        .zip(&m)
        .filter(|(v, _)| **v > lambda)
        .map(|(_, m)| m)
        .sum())
}

/// `sum f g w cellVol` over the real parts.
pub fn pairing(f: &GridFunction, g: &GridFunction, w: Option<&Weight>) -> Result<f64> {
    f.same_grid(g)?;
    let m = cell_measures(f, w)?;
    Ok(f
        .values()
        .iter()
        .zip(g.values())
        .zip(&m)
        .map(|((a, b), m)| a * b * m)
        .sum())
}

/// Step decreasing rearrangement: `f*(t) = levels[j]` on
/// `[breakpoints[j], breakpoints[j+1])`. Adjacent equal levels are merged, so
/// levels are strictly decreasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RearrangementProfile {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
}

impl RearrangementProfile {
    /// Builds a profile from explicit steps. Levels must be nonincreasing
    /// and nonnegative; equal neighbours and empty steps are merged away.
    pub fn from_steps(levels: &[f64], lengths: &[f64]) -> Result<Self> {
        if levels.len() != lengths.len() {
            return Err(LabError::InvalidParameter("levels/lengths length mismatch".into()));
        }
        if levels.windows(2).any(|p| p[1] > p[0])
            || levels.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || lengths.iter().any(|l| !(l.is_finite() && *l >= 0.0))
        {
            return Err(LabError::InvalidParameter(
                "profile levels must be finite, nonnegative and nonincreasing".into(),
            ));
        }
        let mut bp = vec![0.0];
        let mut lv: Vec<f64> = Vec::new();
        let mut t = 0.0;
        for (&v, &len) in levels.iter().zip(lengths) {
            if len == 0.0 {
                continue;
            }
            t += len;
            if lv.last() == Some(&v) {
                *bp.last_mut().expect("nonempty") = t;
            } else {
                lv.push(v);
                bp.push(t);
            }
        }
        Ok(Self {
            breakpoints: bp,
            levels: lv,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn total_measure(&self) -> f64 {
        *self.breakpoints.last().expect("profile has a start")
    }

    /// Iterator over `(level, t_j, t_{j+1})`.
    pub fn steps(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .map(|(j, &v)| (v, self.breakpoints[j], self.breakpoints[j + 1]))
    }

    /// `f*(t)`, zero beyond the total measure.
    pub fn value_at(&self, t: f64) -> f64 {
        let j = self.breakpoints.partition_point(|&b| b <= t);
        if j == 0 || j > self.levels.len() {
            0.0
        } else {
            self.levels[j - 1]
        }
    }

    /// `|{f* > lambda}|`.
    pub fn distribution(&self, lambda: f64) -> f64 {
        self.steps()
            .filter(|(v, _, _)| *v > lambda)
            .map(|(_, a, b)| b - a)
            .sum()
    }

    pub fn max_level(&self) -> f64 {
        self.levels.first().copied().unwrap_or(0.0)
    }

    pub fn map_levels(&self, g: impl Fn(f64) -> f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            levels: self.levels.iter().map(|&v| g(v)).collect(),
        }
    }

    /// The dilated profile `t -> f*(t/s)`.
    pub fn dilate(&self, s: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().map(|b| b * s).collect(),
            levels: self.levels.clone(),
        }
    }
}

/// Decreasing rearrangement with respect to Lebesgue measure or `w`.
/// Cells are sorted by modulus descending, ties by index ascending.
pub fn rearrangement(f: &GridFunction, w: Option<&Weight>) -> Result<RearrangementProfile> {
    let m = cell_measures(f, w)?;
    let abs = f.abs_values();
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[b].total_cmp(&abs[a]).then(a.cmp(&b)));
    let levels: Vec<f64> = order.iter().map(|&i| abs[i]).collect();
    let lengths: Vec<f64> = order.iter().map(|&i| m[i]).collect();
    RearrangementProfile::from_steps(&levels, &lengths)
}
