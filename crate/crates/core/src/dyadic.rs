//! Dyadic cubes on the unit torus, shifted lattices, sparse families and
//! Carleson sums.
//!
//! A [`DyadicLattice`] is the standard dyadic grid of `[0,1)^n` translated by
//! a periodic shift. On a sampled grid of level `L` the shift is rounded to a
//! whole number of cells, so every lattice cube of level `k <= L` is a union
//! of exactly `2^(n (L-k))` grid cells. Internally all tree computations work
//! in the *lattice frame*, where the shifted cubes become the standard ones;
//! [`DyadicLattice::to_frame`] and [`DyadicLattice::from_frame`] move cell
//! arrays between the two frames.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::weights::Weight;

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(LabError::UnsupportedDimension(dim))
    }
}

/// A cube of the (unshifted) dyadic tree: side `2^-level`, integer coordinates
/// in `[0, 2^level)`. Which lattice it belongs to is carried separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    level: u32,
    coords: [u64; 2],
    dim: u8,
}

impl DyadicCube {
    pub fn new(dim: usize, level: u32, coords: &[u64]) -> Result<Self> {
        check_dim(dim)?;
        if coords.len() != dim {
            return Err(LabError::InvalidCube(format!(
                "expected {dim} coordinates, got {}",
                coords.len()
            )));
        }
        if level > 62 {
            return Err(LabError::InvalidCube(format!("level {level} too deep")));
        }
        let side = 1u64 << level;
        let mut c = [0u64; 2];
        for (a, &x) in coords.iter().enumerate() {
            if x >= side {
                return Err(LabError::InvalidCube(format!(
                    "coordinate {x} outside [0, {side}) at level {level}"
                )));
            }
            c[a] = x;
        }
        Ok(Self {
            level,
            coords: c,
            dim: dim as u8,
        })
    }

    pub fn root(dim: usize) -> Self {
        Self {
            level: 0,
            coords: [0, 0],
            dim: dim as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords[..self.dim()]
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim() as i32)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.level == 0 {
            return None;
        }
        Some(Self {
            level: self.level - 1,
            coords: [self.coords[0] >> 1, self.coords[1] >> 1],
            dim: self.dim,
        })
    }

    /// The `2^n` cubes of the next level, in row-major order.
    pub fn children(&self, max_level: u32) -> Result<Vec<Self>> {
        if self.level >= max_level {
            return Err(LabError::LevelOverflow {
                level: self.level,
                max_level,
            });
        }
        Ok(self.children_unchecked())
    }

    fn children_unchecked(&self) -> Vec<Self> {
        let level = self.level + 1;
        let [c0, c1] = self.coords;
        if self.dim == 1 {
            vec![
                Self { level, coords: [2 * c0, 0], dim: 1 },
                Self { level, coords: [2 * c0 + 1, 0], dim: 1 },
            ]
        } else {
            let mut out = Vec::with_capacity(4);
            for d0 in 0..2 {
                for d1 in 0..2 {
                    out.push(Self {
                        level,
                        coords: [2 * c0 + d0, 2 * c1 + d1],
                        dim: 2,
                    });
                }
            }
            out
        }
    }

    /// True when `other` is a (not necessarily strict) subcube of `self`.
    pub fn contains(&self, other: &Self) -> bool {
        if other.dim != self.dim || other.level < self.level {
            return false;
        }
        let shift = other.level - self.level;
        (0..self.dim()).all(|a| other.coords[a] >> shift == self.coords[a])
    }

    /// Half-open interval `[lo, hi)` along `axis`, in unshifted coordinates.
    pub fn interval(&self, axis: usize) -> (f64, f64) {
        let s = self.side();
        let lo = self.coords[axis] as f64 * s;
        (lo, lo + s)
    }

    /// Row-major index of this cube among the cubes of its level.
    pub(crate) fn index(&self) -> usize {
        match self.dim {
            1 => self.coords[0] as usize,
            _ => (self.coords[0] as usize) * (1usize << self.level) + self.coords[1] as usize,
        }
    }

    pub(crate) fn from_index(dim: usize, level: u32, index: usize) -> Self {
        let coords = if dim == 1 {
            [index as u64, 0]
        } else {
            let n = 1usize << level;
            [(index / n) as u64, (index % n) as u64]
        };
        Self {
            level,
            coords,
            dim: dim as u8,
        }
    }

    /// Lattice-frame cell indices covered by this cube on a grid of level
    /// `grid_level`, ascending.
    pub(crate) fn frame_cells(&self, grid_level: u32) -> Vec<usize> {
        debug_assert!(self.level <= grid_level);
        let span = 1usize << (grid_level - self.level);
        let start0 = self.coords[0] as usize * span;
        if self.dim == 1 {
            (start0..start0 + span).collect()
        } else {
            let n = 1usize << grid_level;
            let start1 = self.coords[1] as usize * span;
            let mut out = Vec::with_capacity(span * span);
            for i0 in start0..start0 + span {
                for i1 in start1..start1 + span {
                    out.push(i0 * n + i1);
                }
            }
            out
        }
    }
}

/// Number of cubes at `level` in dimension `dim`.
pub(crate) fn cubes_at(dim: usize, level: u32) -> usize {
    1usize << (dim as u32 * level)
}

/// Index of the level-`k` ancestor of lattice-frame cell `cell`.
pub(crate) fn ancestor_index(dim: usize, grid_level: u32, cell: usize, k: u32) -> usize {
    let shift = grid_level - k;
    if dim == 1 {
        cell >> shift
    } else {
        let n = 1usize << grid_level;
        let (i0, i1) = (cell / n, cell % n);
        ((i0 >> shift) << k) + (i1 >> shift)
    }
}

/// A periodic dyadic lattice: the standard tree translated by `shift`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DyadicLattice {
    shift: Vec<f64>,
    max_level: u32,
}

impl DyadicLattice {
    pub fn new(shift: Vec<f64>, max_level: u32) -> Result<Self> {
        check_dim(shift.len())?;
        if max_level == 0 || max_level > 30 {
            return Err(LabError::InvalidParameter(format!(
                "max level {max_level} outside 1..=30"
            )));
        }
        if shift.iter().any(|s| !(0.0..1.0).contains(s)) {
            return Err(LabError::InvalidParameter(
                "lattice shift must lie in [0,1)".into(),
            ));
        }
        Ok(Self { shift, max_level })
    }

    pub fn standard(dim: usize, max_level: u32) -> Result<Self> {
        Self::new(vec![0.0; dim], max_level)
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Shift rounded to whole cells of the level-`max_level` grid.
    pub fn cell_offset(&self) -> [usize; 2] {
        let n = 1usize << self.max_level;
        let mut o = [0usize; 2];
        for (a, s) in self.shift.iter().enumerate() {
            o[a] = ((s * n as f64).round() as usize) % n;
        }
        o
    }

    pub fn is_standard(&self) -> bool {
        self.cell_offset() == [0, 0]
    }

    pub fn children(&self, cube: &DyadicCube) -> Result<Vec<DyadicCube>> {
        cube.children(self.max_level)
    }

    pub fn cubes_at_level(&self, k: u32) -> impl Iterator<Item = DyadicCube> + '_ {
        let dim = self.dim();
        (0..cubes_at(dim, k)).map(move |i| DyadicCube::from_index(dim, k, i))
    }

    /// Every cube of the lattice, level-major then row-major.
    pub fn all_cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..=self.max_level).flat_map(move |k| self.cubes_at_level(k))
    }

    fn frame_to_grid(&self, cell: usize) -> usize {
        let n = 1usize << self.max_level;
        let o = self.cell_offset();
        if self.dim() == 1 {
            (cell + o[0]) % n
        } else {
            let (i0, i1) = (cell / n, cell % n);
            ((i0 + o[0]) % n) * n + (i1 + o[1]) % n
        }
    }

    /// Grid cell indices (ascending) covered by `cube` of this lattice.
    pub fn cube_cells(&self, cube: &DyadicCube) -> Vec<usize> {
        let mut cells: Vec<usize> = cube
            .frame_cells(self.max_level)
            .into_iter()
            .map(|c| self.frame_to_grid(c))
            .collect();
        cells.sort_unstable();
        cells
    }

    /// Reorders a grid cell array so that lattice cubes become standard cubes.
    pub fn to_frame(&self, values: &[f64]) -> Vec<f64> {
        if self.is_standard() {
            return values.to_vec();
        }
        (0..values.len()).map(|i| values[self.frame_to_grid(i)]).collect()
    }

    /// Inverse of [`Self::to_frame`].
    pub fn from_frame(&self, frame: &[f64]) -> Vec<f64> {
        if self.is_standard() {
            return frame.to_vec();
        }
        let mut out = vec![0.0; frame.len()];
        for (i, &v) in frame.iter().enumerate() {
            out[self.frame_to_grid(i)] = v;
        }
        out
    }
}

/// The `3^n` lattices with shifts in `{0, 1/3, 2/3}^n`, lexicographic order
/// (the unshifted lattice first).
pub fn shifted_lattices(dim: usize, max_level: u32) -> Result<Vec<DyadicLattice>> {
    check_dim(dim)?;
    if max_level < 1 {
        return Err(LabError::InvalidParameter("max level must be >= 1".into()));
    }
    let thirds = [0.0, 1.0 / 3.0, 2.0 / 3.0];
    let mut out = Vec::new();
    if dim == 1 {
        for &s in &thirds {
            out.push(DyadicLattice::new(vec![s], max_level)?);
        }
    } else {
        for &s0 in &thirds {
            for &s1 in &thirds {
                out.push(DyadicLattice::new(vec![s0, s1], max_level)?);
            }
        }
    }
    Ok(out)
}

/// A lattice cube in continuous coordinates, as found by [`covering_cube`].
#[derive(Clone, Debug, PartialEq)]
pub struct CoveringCube {
    pub lattice: usize,
    pub level: u32,
    /// Lower corner on the real line (may exceed 1 before wrapping).
    pub lower: Vec<f64>,
}

impl CoveringCube {
    pub fn volume(&self) -> f64 {
        (-(self.level as f64)).exp2().powi(self.lower.len() as i32)
    }
}

/// Smallest cube from any of `lattices` (continuous shifts, levels up to
/// `max_level`) containing the tripled cube `3Q`, where
/// `Q = [lower, lower + side)^n`.
pub fn covering_cube(
    lattices: &[DyadicLattice],
    lower: &[f64],
    side: f64,
    max_level: u32,
) -> Option<CoveringCube> {
    let mut best: Option<CoveringCube> = None;
    for (j, lat) in lattices.iter().enumerate() {
        if lat.dim() != lower.len() {
            continue;
        }
        for level in (0..=max_level).rev() {
            let len = (-(level as f64)).exp2();
            if len < 3.0 * side {
                continue;
            }
            let mut corner = Vec::with_capacity(lower.len());
            let fits = lower.iter().zip(lat.shift()).all(|(&lo, &s)| {
                let a = (lo - side - s) / len;
                let b = (lo + 2.0 * side - s) / len;
                let cell = a.floor();
                corner.push(s + cell * len);
                // [a, b) inside [cell, cell + 1)
                b <= cell + 1.0 + 1e-12
            });
            if fits || level == 0 {
                let better = best.as_ref().is_none_or(|b| level > b.level);
                if better {
                    best = Some(CoveringCube {
                        lattice: j,
                        level,
                        lower: corner,
                    });
                }
                break;
            }
        }
    }
    best
}

/// Per-level reduction of a lattice-frame cell array over the dyadic tree.
/// `levels[k]` holds one entry per level-`k` cube in row-major order.
#[derive(Clone, Debug)]
pub(crate) struct Pyramid {
    pub levels: Vec<Vec<f64>>,
}

impl Pyramid {
    pub fn build(dim: usize, grid_level: u32, frame: &[f64], combine: impl Fn(f64, f64) -> f64) -> Self {
        let mut levels = vec![Vec::new(); grid_level as usize + 1];
        levels[grid_level as usize] = frame.to_vec();
        for k in (0..grid_level).rev() {
            let fine = &levels[k as usize + 1];
            let count = cubes_at(dim, k);
            let mut coarse = Vec::with_capacity(count);
            for idx in 0..count {
                let cube = DyadicCube::from_index(dim, k, idx);
                let mut acc: Option<f64> = None;
                for child in cube.children_unchecked() {
                    let v = fine[child.index()];
                    acc = Some(match acc {
                        None => v,
                        Some(a) => combine(a, v),
                    });
                }
                coarse.push(acc.unwrap_or(0.0));
            }
            levels[k as usize] = coarse;
        }
        Self { levels }
    }

    pub fn sums(dim: usize, grid_level: u32, frame: &[f64]) -> Self {
        Self::build(dim, grid_level, frame, |a, b| a + b)
    }

    pub fn get(&self, cube: &DyadicCube) -> f64 {
        self.levels[cube.level() as usize][cube.index()]
    }

    /// Converts sums of cell values into averages over each cube.
    pub fn into_averages(mut self, dim: usize) -> Self {
        let grid_level = self.levels.len() as u32 - 1;
        for (k, lvl) in self.levels.iter_mut().enumerate() {
            let cells = (1usize << (dim as u32 * (grid_level - k as u32))) as f64;
            for v in lvl.iter_mut() {
                *v /= cells;
            }
        }
        self
    }
}

/// Top-down running maximum: for every lattice-frame cell, the maximum of
/// `per_cube` over all cubes containing it.
pub(crate) fn max_over_ancestors(dim: usize, grid_level: u32, per_cube: &[Vec<f64>]) -> Vec<f64> {
    let mut running = per_cube[0].clone();
    for k in 1..=grid_level {
        let lvl = &per_cube[k as usize];
        let mut next = Vec::with_capacity(lvl.len());
        for (idx, &v) in lvl.iter().enumerate() {
            let cube = DyadicCube::from_index(dim, k, idx);
            let parent = cube.parent().expect("k >= 1");
            next.push(v.max(running[parent.index()]));
        }
        running = next;
    }
    running
}

/// Outcome of [`SparseFamily::verify_sparsity`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SparsityReport {
    pub holds: bool,
    pub min_ratio: f64,
    pub disjoint: bool,
    pub overlapping_cells: usize,
}

/// A family of cubes from one lattice together with the cores
/// `E(Q) = Q \ union of strictly smaller family cubes`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFamily {
    lattice: DyadicLattice,
    eta: f64,
    cubes: Vec<DyadicCube>,
    cores: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CubeRecord {
    level: u32,
    coords: Vec<u64>,
    core_cells: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct FamilyFile {
    shift: Vec<f64>,
    max_level: u32,
    eta: f64,
    cubes: Vec<CubeRecord>,
}

impl SparseFamily {
    /// Builds a family from explicit cubes, computing cores by definition.
    /// Duplicated cubes are kept, so their cores overlap.
    pub fn from_cubes(lattice: DyadicLattice, eta: f64, mut cubes: Vec<DyadicCube>) -> Result<Self> {
        for q in &cubes {
            if q.dim() != lattice.dim() || q.level() > lattice.max_level() {
                return Err(LabError::InvalidCube(format!(
                    "cube {q:?} does not belong to the lattice"
                )));
            }
        }
        cubes.sort();
        let cores = cubes
            .iter()
            .map(|q| {
                let mut removed = vec![false; 1usize << (q.dim() as u32 * lattice.max_level())];
                for p in &cubes {
                    if p.level() > q.level() && q.contains(p) {
                        for c in lattice.cube_cells(p) {
                            removed[c] = true;
                        }
                    }
                }
                lattice
                    .cube_cells(q)
                    .into_iter()
                    .filter(|&c| !removed[c])
                    .collect()
            })
            .collect();
        Ok(Self {
            lattice,
            eta,
            cubes,
            cores,
        })
    }

    pub fn lattice(&self) -> &DyadicLattice {
        &self.lattice
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn cores(&self) -> &[Vec<usize>] {
        &self.cores
    }

    /// The sparseness constant the construction guarantees (not measured).
    pub fn claimed_eta(&self) -> f64 {
        self.eta
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn contains(&self, cube: &DyadicCube) -> bool {
        self.cubes.binary_search(cube).is_ok()
    }

    /// Checks `|E(Q)| >= eta |Q|` for every member and that the cores are
    /// pairwise disjoint (exact cell-set check).
    pub fn verify_sparsity(&self, eta: f64) -> SparsityReport {
        let grid_level = self.lattice.max_level();
        let mut owner = vec![false; cubes_at(self.lattice.dim(), grid_level)];
        let mut overlapping = 0usize;
        let mut min_ratio = f64::INFINITY;
        for (q, core) in self.cubes.iter().zip(&self.cores) {
            let cells_in_q = 1usize << (q.dim() as u32 * (grid_level - q.level()));
            min_ratio = min_ratio.min(core.len() as f64 / cells_in_q as f64);
            for &c in core {
                if owner[c] {
                    overlapping += 1;
                }
                owner[c] = true;
            }
        }
        if self.cubes.is_empty() {
            min_ratio = 1.0;
        }
        let disjoint = overlapping == 0;
        SparsityReport {
            holds: disjoint && min_ratio >= eta,
            min_ratio,
            disjoint,
            overlapping_cells: overlapping,
        }
    }

    /// `sum_{Q in S, Q subset R} w(Q) / w(R)` for a member `R`.
    pub fn carleson_ratio(&self, w: &Weight, r: &DyadicCube) -> Result<f64> {
        if !self.contains(r) {
            return Err(LabError::InvalidCube(format!("{r:?} is not in the family")));
        }
        let f = w.function();
        if f.dim() != self.lattice.dim() || f.level() != self.lattice.max_level() {
            return Err(LabError::GridMismatch(
                "weight grid differs from the family lattice".into(),
            ));
        }
        let vol = f.cell_volume();
        let measure = |q: &DyadicCube| -> f64 {
            self.lattice
                .cube_cells(q)
                .into_iter()
                .map(|c| f.values()[c] * vol)
                .sum()
        };
        let total: f64 = self
            .cubes
            .iter()
            .filter(|q| r.contains(q))
            .map(measure)
            .sum();
        Ok(total / measure(r))
    }

    /// [`carleson_ratio`](Self::carleson_ratio) for every member, in member
    /// order, via one weight pyramid and ancestor walks.
    pub fn carleson_ratios(&self, w: &Weight) -> Result<Vec<f64>> {
        let f = w.function();
        let (dim, level) = (self.lattice.dim(), self.lattice.max_level());
        if f.dim() != dim || f.level() != level {
            return Err(LabError::GridMismatch(
                "weight grid differs from the family lattice".into(),
            ));
        }
        let mass = Pyramid::sums(dim, level, &self.lattice.to_frame(f.values()));
        let index: BTreeMap<DyadicCube, usize> = self.cubes.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let own: Vec<f64> = self.cubes.iter().map(|q| mass.get(q)).collect();
        let mut total = own.clone();
        for (q, m) in self.cubes.iter().zip(&own) {
            let mut up = q.parent();
            while let Some(p) = up {
                if let Some(&i) = index.get(&p) {
                    total[i] += m;
                }
                up = p.parent();
            }
        }
        Ok(total.iter().zip(&own).map(|(t, o)| t / o).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = FamilyFile {
            shift: self.lattice.shift().to_vec(),
            max_level: self.lattice.max_level(),
            eta: self.eta,
            cubes: self
                .cubes
                .iter()
                .zip(&self.cores)
                .map(|(q, core)| CubeRecord {
                    level: q.level(),
                    coords: q.coords().to_vec(),
                    core_cells: core.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses the JSON written by [`Self::to_json`]. Stored cores are kept
    /// as-is so that a corrupted file is detectable by `verify_sparsity`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: FamilyFile = serde_json::from_str(text)?;
        let lattice = DyadicLattice::new(file.shift, file.max_level)?;
        let mut pairs = Vec::with_capacity(file.cubes.len());
        for rec in file.cubes {
            let q = DyadicCube::new(lattice.dim(), rec.level, &rec.coords)?;
            pairs.push((q, rec.core_cells));
        }
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let (cubes, cores) = pairs.into_iter().unzip();
        Ok(Self {
            lattice,
            eta: file.eta,
            cubes,
            cores,
        })
    }
}

/// Stopping-time construction. Starting from the root, the stopping cubes of a
/// selected cube `Q` are the maximal subcubes `P` with
/// `tau(P) >= threshold * tau(Q)` and `tau(P) > 0`; they are selected in turn.
/// For an averaging `tau` the cores satisfy `|E(Q)| >= (1 - 1/threshold)|Q|`.
pub fn build_sparse_family(
    tau: impl Fn(&DyadicCube) -> f64,
    lattice: &DyadicLattice,
    threshold: f64,
) -> Result<SparseFamily> {
    if !(threshold > 1.0) || !threshold.is_finite() {
        return Err(LabError::InvalidParameter(format!(
            "stopping threshold {threshold} must be a finite number > 1"
        )));
    }
    let dim = lattice.dim();
    let max_level = lattice.max_level();
    let root = DyadicCube::root(dim);
    // selected cube -> its stopping children
    let mut selected: BTreeMap<DyadicCube, Vec<DyadicCube>> = BTreeMap::new();
    let mut pending = vec![(root, tau(&root))];
    while let Some((q, tq)) = pending.pop() {
        let mut stops = Vec::new();
        if tq > 0.0 && q.level() < max_level {
            let mut frontier = q.children_unchecked();
            while let Some(p) = frontier.pop() {
                let tp = tau(&p);
                if tp > 0.0 && tp >= threshold * tq {
                    stops.push(p);
                    pending.push((p, tp));
                } else if p.level() < max_level {
                    frontier.extend(p.children_unchecked());
                }
            }
        }
        stops.sort();
        selected.insert(q, stops);
    }

    let mut cubes = Vec::with_capacity(selected.len());
    let mut cores = Vec::with_capacity(selected.len());
    let ncells = cubes_at(dim, max_level);
    let mut mark = vec![false; ncells];
    for (q, stops) in &selected {
        for p in stops {
            for c in lattice.cube_cells(p) {
                mark[c] = true;
            }
        }
        let core: Vec<usize> = lattice
            .cube_cells(q)
            .into_iter()
            .filter(|&c| !mark[c])
            .collect();
        for p in stops {
            for c in lattice.cube_cells(p) {
                mark[c] = false;
            }
        }
        cubes.push(*q);
        cores.push(core);
    }
    Ok(SparseFamily {
        lattice: lattice.clone(),
        eta: 1.0 - 1.0 / threshold,
        cubes,
        cores,
    })
}

/// Stopping-time family for `tau(Q) = prod_i <|f_i|>_Q` over `lattice`.
pub fn build_family_for(
    functions: &[&crate::sample::GridFunction],
    lattice: &DyadicLattice,
    threshold: f64,
) -> Result<SparseFamily> {
    let pyramids = crate::sample::average_pyramids(functions, lattice, 1.0)?;
    build_sparse_family(
        |q| pyramids.iter().map(|p| p.get(q)).product(),
        lattice,
        threshold,
    )
}
