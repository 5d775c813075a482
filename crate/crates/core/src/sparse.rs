//! Multilinear sparse operators and their commutator variants.

use crate::dyadic::{ancestor_index, cubes_at, DyadicLattice, SparseFamily};
use crate::error::{LabError, Result};
use crate::sample::{power_average_pyramid, GridFunction};
use crate::weights::BmoFunction;

fn check_tuple(s: &SparseFamily, fs: &[&GridFunction]) -> Result<()> {
    if fs.is_empty() {
        return Err(LabError::InvalidParameter("empty function tuple".into()));
    }
    let lat = s.lattice();
    for f in fs {
        if f.dim() != lat.dim() || f.level() != lat.max_level() {
            return Err(LabError::GridMismatch("function grid differs from the family".into()));
        }
    }
    Ok(())
}

/// Per-cube products `prod_i <|f_i|^r>_Q^(1/r)` for every lattice cube.
fn product_averages(lat: &DyadicLattice, fs: &[&GridFunction], r: f64) -> Vec<Vec<f64>> {
    let mut acc = power_average_pyramid(fs[0], lat, r).levels;
    for f in &fs[1..] {
        let p = power_average_pyramid(f, lat, r);
        for (a, b) in acc.iter_mut().zip(&p.levels) {
            for (x, y) in a.iter_mut().zip(b) {
                *x *= y;
            }
        }
    }
    acc
}

/// `A_{r,S}(f)(x) = sum_{Q in S} prod_i <|f_i|^r>_Q^(1/r) 1_Q(x)`.
pub fn sparse_apply(s: &SparseFamily, fs: &[&GridFunction], r: f64) -> Result<GridFunction> {
    check_tuple(s, fs)?;
    if !(r >= 1.0 && r.is_finite()) {
        return Err(LabError::InvalidParameter(format!("power r={r} must be >= 1")));
    }
    let lat = s.lattice();
    let dim = lat.dim();
    let level = lat.max_level();
    let avgs = product_averages(lat, fs, r);
    let mut coef: Vec<Vec<f64>> = (0..=level).map(|k| vec![0.0; cubes_at(dim, k)]).collect();
    for q in s.cubes() {
        coef[q.level() as usize][q.index()] += avgs[q.level() as usize][q.index()];
    }
    // top-down: every cell collects the coefficients of its ancestors, root first
    let mut frame = vec![0.0; cubes_at(dim, level)];
    for (x, v) in frame.iter_mut().enumerate() {
        for (k, c) in coef.iter().enumerate() {
            *v += c[ancestor_index(dim, level, x, k as u32)];
        }
    }
    GridFunction::new(dim, level, lat.from_frame(&frame))
}

/// Commutator sparse operators for slot `j` (0-based).
///
/// Unstarred: `sum_Q |b(x) - b_Q| prod_i <|f_i|>_Q 1_Q(x)`.
/// Starred: `sum_Q <|(b - b_Q) f_j|>_Q prod_{i != j} <|f_i|>_Q 1_Q(x)`.
pub fn sparse_commutator(
    s: &SparseFamily,
    fs: &[&GridFunction],
    b: &BmoFunction,
    j: usize,
    starred: bool,
) -> Result<GridFunction> {
    check_tuple(s, fs)?;
    if j >= fs.len() {
        return Err(LabError::SlotOutOfRange {
            slot: j,
            arity: fs.len(),
        });
    }
    let bf = b.function();
    fs[0].same_grid(bf)?;
    let lat = s.lattice();
    let level = lat.max_level();
    let bv = bf.values();
    let abs_j = fs[j].abs_values();
    let (others, full) = if starred {
        let rest: Vec<&GridFunction> = fs.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, f)| *f).collect();
        let others = if rest.is_empty() {
            None
        } else {
            Some(product_averages(lat, &rest, 1.0))
        };
        (others, None)
    } else {
        (None, Some(product_averages(lat, fs, 1.0)))
    };
    let mut out = vec![0.0; bf.len()];
    for q in s.cubes() {
        let cells = lat.cube_cells(q);
        let n = cells.len() as f64;
        let bq = cells.iter().map(|&c| bv[c]).sum::<f64>() / n;
        let (k, idx) = (q.level() as usize, q.index());
        if starred {
            let inner = cells.iter().map(|&c| (bv[c] - bq).abs() * abs_j[c]).sum::<f64>() / n;
            let rest = others.as_ref().map_or(1.0, |o| o[k][idx]);
            let coef = inner * rest;
            for &c in &cells {
                out[c] += coef;
            }
        } else {
            let coef = full.as_ref().expect("unstarred products")[k][idx];
            for &c in &cells {
                out[c] += (bv[c] - bq).abs() * coef;
            }
        }
    }
    debug_assert_eq!(level, bf.level());
    GridFunction::new(bf.dim(), bf.level(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{build_family_for, shifted_lattices, DyadicCube};
    use crate::maximal::multilinear_maximal;
    use crate::sample::average;
    use proptest::prelude::*;

    fn chain(levels: u32, grid: u32) -> SparseFamily {
        let lat = DyadicLattice::standard(1, grid).unwrap();
        let cubes = (0..=levels).map(|k| DyadicCube::new(1, k, &[0]).unwrap()).collect();
        SparseFamily::from_cubes(lat, 0.5, cubes).unwrap()
    }

    fn brute_apply(s: &SparseFamily, fs: &[&GridFunction], r: f64) -> Vec<f64> {
        let lat = s.lattice();
        let mut out = vec![0.0; fs[0].len()];
        for q in s.cubes() {
            let c: f64 = fs.iter().map(|f| average(f, lat, q, r).unwrap()).product();
            for x in lat.cube_cells(q) {
                out[x] += c;
            }
        }
        out
    }

    #[test]
    fn root_family_on_ones() {
        let lat = DyadicLattice::standard(1, 3).unwrap();
        let s = SparseFamily::from_cubes(lat, 1.0, vec![DyadicCube::root(1)]).unwrap();
        let one = GridFunction::constant(1, 3, 1.0);
        let a = sparse_apply(&s, &[&one, &one], 1.0).unwrap();
        assert!(a.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn chain_stack() {
        let s = chain(2, 3);
        let one = GridFunction::constant(1, 3, 1.0);
        let a = sparse_apply(&s, &[&one], 1.0).unwrap();
        assert_eq!(a.values(), &[3.0, 3.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn commutator_examples() {
        let lat = DyadicLattice::standard(1, 3).unwrap();
        let s = SparseFamily::from_cubes(lat.clone(), 1.0, vec![DyadicCube::root(1)]).unwrap();
        let one = GridFunction::constant(1, 3, 1.0);
        let step = BmoFunction::new(GridFunction::from_fn(1, 3, |x| if x[0] < 0.5 { 0.0 } else { 1.0 }), &[lat.clone()]).unwrap();
        for starred in [false, true] {
            let c = sparse_commutator(&s, &[&one], &step, 0, starred).unwrap();
            assert!(c.values().iter().all(|v| *v == 0.5));
        }
        let flat = BmoFunction::new(GridFunction::constant(1, 3, 4.0), &[lat]).unwrap();
        let s2 = chain(3, 3);
        for starred in [false, true] {
            let c = sparse_commutator(&s2, &[&one, &one], &flat, 1, starred).unwrap();
            assert!(c.values().iter().all(|v| *v == 0.0));
        }
        assert!(matches!(
            sparse_commutator(&s2, &[&one], &flat, 1, false),
            Err(LabError::SlotOutOfRange { slot: 1, arity: 1 })
        ));
    }

    fn vals(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), -4.0..4.0f64], n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn apply_matches_brute_force(v in vals(64), u in vals(64), r in 1.0..3.0f64, shift in 0usize..3) {
            let f = GridFunction::new(2, 3, v).unwrap();
            let g = GridFunction::new(2, 3, u).unwrap();
            let lat = DyadicLattice::new(vec![shift as f64 / 3.0, 0.0], 3).unwrap();
            let s = build_family_for(&[&f, &g], &lat, 2.0).unwrap();
            let a = sparse_apply(&s, &[&f, &g], r).unwrap();
            for (x, y) in a.values().iter().zip(brute_apply(&s, &[&f, &g], r)) {
                prop_assert!((x - y).abs() <= 1e-12 * y.max(1.0));
            }
        }

        #[test]
        fn homogeneous_and_symmetric(v in vals(32), bv in vals(32), c in -3.0..3.0f64) {
            let f = GridFunction::new(1, 5, v).unwrap();
            let lat = DyadicLattice::standard(1, 5).unwrap();
            let s = build_family_for(&[&f], &lat, 2.0).unwrap();
            let a = sparse_apply(&s, &[&f], 1.0).unwrap();
            let ac = sparse_apply(&s, &[&f.scale(c)], 1.0).unwrap();
            for (x, y) in a.values().iter().zip(ac.values()) {
                prop_assert!((y - c.abs() * x).abs() <= 1e-12 * x.max(1.0));
            }
            let lats = [lat];
            let b = BmoFunction::new(GridFunction::new(1, 5, bv).unwrap(), &lats).unwrap();
            let nb = BmoFunction::new(b.function().scale(-1.0), &lats).unwrap();
            let x1 = sparse_commutator(&s, &[&f], &b, 0, false).unwrap();
            let x2 = sparse_commutator(&s, &[&f], &nb, 0, false).unwrap();
            for (p, q) in x1.values().iter().zip(x2.values()) {
                prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
            }
        }

        #[test]
        fn stopping_time_consistency(v in vals(64), u in vals(64)) {
            let f = GridFunction::new(1, 6, v).unwrap();
            let g = GridFunction::new(1, 6, u).unwrap();
            let lats = shifted_lattices(1, 6).unwrap();
            let s = build_family_for(&[&f, &g], &lats[0], 2.0).unwrap();
            let a = sparse_apply(&s, &[&f, &g], 1.0).unwrap();
            let m = multilinear_maximal(&[&f, &g], 1.0, &lats[..1]).unwrap();
            // each cell sits in a chain of selected cubes whose averages
            // at least double going down, so the sum is below twice the top term
            for (x, y) in a.values().iter().zip(m.values()) {
                prop_assert!(*x <= 2.0 * y * (1.0 + 1e-12) + 1e-300);
            }
        }
    }
}
