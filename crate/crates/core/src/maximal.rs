//! Maximal operators over dyadic lattices.
//!
//! Each operator computes one value per lattice cube, then propagates the
//! running maximum from the root to the cells, so a single lattice costs
//! `O(N L)` cube evaluations.

use rayon::prelude::*;

use crate::dyadic::{max_over_ancestors, shifted_lattices, DyadicCube, DyadicLattice, Pyramid};
use crate::error::{LabError, Result};
use crate::sample::{pow, power_average_pyramid, GridFunction};
use crate::weights::Weight;
use crate::young::{luxemburg_raw, YoungFunction};

fn check_grid(f: &GridFunction, lattice: &DyadicLattice) -> Result<()> {
    if f.dim() != lattice.dim() || f.level() != lattice.max_level() {
        return Err(LabError::GridMismatch(format!(
            "function grid (n={}, L={}) differs from the lattice",
            f.dim(),
            f.level()
        )));
    }
    Ok(())
}

fn check_r(r: f64) -> Result<()> {
    if r >= 1.0 && r.is_finite() {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("power r={r} must be >= 1")))
    }
}

fn finish(template: &GridFunction, lattice: &DyadicLattice, frame: Vec<f64>) -> Result<GridFunction> {
    GridFunction::new(template.dim(), template.level(), lattice.from_frame(&frame))
}

fn pointwise_max(parts: Vec<GridFunction>) -> Result<GridFunction> {
    let mut it = parts.into_iter();
    let first = it
        .next()
        .ok_or_else(|| LabError::InvalidParameter("empty lattice set".into()))?;
    let mut vals = first.values().to_vec();
    for g in it {
        for (a, b) in vals.iter_mut().zip(g.values()) {
            *a = a.max(*b);
        }
    }
    GridFunction::new(first.dim(), first.level(), vals)
}

/// `M^D_r f(x) = sup_{Q in D, Q contains x} <|f|^r>_Q^(1/r)`.
pub fn dyadic_maximal(f: &GridFunction, lattice: &DyadicLattice, r: f64) -> Result<GridFunction> {
    multilinear_maximal(&[f], r, std::slice::from_ref(lattice))
}

/// The shifted-lattice maximal function: the cellwise maximum of
/// [`dyadic_maximal`] over the `3^n` shifted lattices.
pub fn hl_maximal(f: &GridFunction, r: f64) -> Result<GridFunction> {
    let lats = shifted_lattices(f.dim(), f.level())?;
    multilinear_maximal(&[f], r, &lats)
}

/// `sup_{Q contains x} prod_i <|f_i|^r>_Q^(1/r)` over the cubes of all
/// supplied lattices.
pub fn multilinear_maximal(fs: &[&GridFunction], r: f64, lattices: &[DyadicLattice]) -> Result<GridFunction> {
    check_r(r)?;
    let first = *fs
        .first()
        .ok_or_else(|| LabError::InvalidParameter("empty function tuple".into()))?;
    for f in fs {
        first.same_grid(f)?;
    }
    for lat in lattices {
        check_grid(first, lat)?;
    }
    let parts = lattices
        .par_iter()
        .map(|lat| {
            let pyramids: Vec<Pyramid> = fs.iter().map(|f| power_average_pyramid(f, lat, r)).collect();
            let mut per_cube = pyramids[0].levels.clone();
            for p in &pyramids[1..] {
                for (lvl, other) in per_cube.iter_mut().zip(&p.levels) {
                    for (a, b) in lvl.iter_mut().zip(other) {
                        *a *= b;
                    }
                }
            }
            finish(first, lat, max_over_ancestors(first.dim(), first.level(), &per_cube))
        })
        .collect::<Result<Vec<_>>>()?;
    pointwise_max(parts)
}

/// `sup_{Q contains x} prod_i (w(Q)^-1 int_Q |f_i|^alpha w)^(1/alpha)`.
pub fn weighted_dyadic_maximal(
    fs: &[&GridFunction],
    w: &Weight,
    alpha: f64,
    lattice: &DyadicLattice,
) -> Result<GridFunction> {
    check_r(alpha)?;
    if alpha > 1.0 && fs.len() > 1 {
        return Err(LabError::InvalidParameter(
            "the alpha-power weighted maximal operator is linear: use one function".into(),
        ));
    }
    let first = *fs
        .first()
        .ok_or_else(|| LabError::InvalidParameter("empty function tuple".into()))?;
    check_grid(first, lattice)?;
    first.same_grid(w.function())?;
    let dim = first.dim();
    let level = first.level();
    let wf = lattice.to_frame(w.function().values());
    let wsum = Pyramid::sums(dim, level, &wf);
    let mut per_cube: Vec<Vec<f64>> = wsum.levels.iter().map(|l| vec![1.0; l.len()]).collect();
    for f in fs {
        if f.dim() != dim || f.level() != level {
            return Err(LabError::GridMismatch("tuple grids differ".into()));
        }
        let weighted: Vec<f64> = lattice
            .to_frame(&f.abs_values())
            .iter()
            .zip(&wf)
            .map(|(v, w)| pow(*v, alpha) * w)
            .collect();
        let s = Pyramid::sums(dim, level, &weighted);
        for ((acc, num), den) in per_cube.iter_mut().zip(&s.levels).zip(&wsum.levels) {
            for ((a, n), d) in acc.iter_mut().zip(num).zip(den) {
                *a *= (n / d).powf(1.0 / alpha);
            }
        }
    }
    finish(first, lattice, max_over_ancestors(dim, level, &per_cube))
}

/// `M_phi f(x) = sup_{Q contains x} ||f||_{phi,Q}`.
pub fn orlicz_maximal(f: &GridFunction, phi: &YoungFunction, lattice: &DyadicLattice) -> Result<GridFunction> {
    check_grid(f, lattice)?;
    let dim = f.dim();
    let level = f.level();
    let frame = lattice.to_frame(&f.abs_values());
    let per_cube = (0..=level)
        .map(|k| {
            lattice
                .cubes_at_level(k)
                .collect::<Vec<DyadicCube>>()
                .par_iter()
                .map(|q| {
                    let vals: Vec<f64> = q.frame_cells(level).into_iter().map(|c| frame[c]).collect();
                    let ones = vec![1.0; vals.len()];
                    luxemburg_raw(phi.kind(), &vals, &ones, vals.len() as f64)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    finish(f, lattice, max_over_ancestors(dim, level, &per_cube))
}

/// `M^D` applied `times` times.
pub fn iterated_maximal(f: &GridFunction, lattice: &DyadicLattice, times: usize) -> Result<GridFunction> {
    let mut g = f.abs();
    for _ in 0..times {
        g = dyadic_maximal(&g, lattice, 1.0)?;
    }
    Ok(g)
}
