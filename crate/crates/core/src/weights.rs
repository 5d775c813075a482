//! Weights, dyadic Muckenhoupt constants and BMO norms.
//!
//! Every constant is a supremum over all cubes (levels `0..=L`) of the
//! supplied lattices. Each scan costs `O(N L)` per lattice, where `N` is the
//! number of cells.

use rayon::prelude::*;

use crate::dyadic::{ancestor_index, cubes_at, DyadicLattice, Pyramid};
use crate::error::{LabError, Result};
use crate::sample::GridFunction;

/// A strictly positive grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    f: GridFunction,
}

impl Weight {
    pub fn new(f: GridFunction) -> Result<Self> {
        if f.is_complex() || f.values().iter().any(|&v| !(v > 0.0)) {
            return Err(LabError::NonPositiveWeight);
        }
        Ok(Self { f })
    }

    pub fn constant(dim: usize, level: u32, c: f64) -> Self {
        Self::new(GridFunction::constant(dim, level, c)).expect("positive constant")
    }

    /// `max(|x - center|, 2^(-L-1))^a` at cell centers, with periodic distance.
    pub fn power(a: f64, center: &[f64], dim: usize, level: u32) -> Result<Self> {
        if center.len() != dim {
            return Err(LabError::InvalidParameter("center has the wrong dimension".into()));
        }
        if !(a > -(dim as f64)) || !a.is_finite() {
            return Err(LabError::InvalidParameter(format!(
                "exponent {a} must exceed -{dim}"
            )));
        }
        let floor = (-(level as f64) - 1.0).exp2();
        let f = GridFunction::from_fn(dim, level, |x| {
            let d2: f64 = x
                .iter()
                .zip(center)
                .map(|(xi, ci)| {
                    let d = (xi - ci).rem_euclid(1.0);
                    let d = d.min(1.0 - d);
                    d * d
                })
                .sum();
            d2.sqrt().max(floor).powf(a)
        });
        Self::new(f)
    }

    /// `low` on `x_0 < 1/2`, `high` elsewhere.
    pub fn two_step(low: f64, high: f64, dim: usize, level: u32) -> Result<Self> {
        Self::new(GridFunction::from_fn(dim, level, |x| if x[0] < 0.5 { low } else { high }))
    }

    pub fn function(&self) -> &GridFunction {
        &self.f
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn level(&self) -> u32 {
        self.f.level()
    }

    /// Total mass `w([0,1)^n)`.
    pub fn total(&self) -> f64 {
        self.f.integral()
    }

    pub fn to_json(&self) -> Result<String> {
        self.f.to_json_marked(true)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(GridFunction::from_json(text)?)
    }

    fn check(&self, lattices: &[DyadicLattice]) -> Result<()> {
        for l in lattices {
            if l.dim() != self.dim() || l.max_level() != self.level() {
                return Err(LabError::GridMismatch(
                    "lattice does not match the weight grid".into(),
                ));
            }
        }
        Ok(())
    }
}

fn sup_over_lattices(
    lattices: &[DyadicLattice],
    per_lattice: impl Fn(&DyadicLattice) -> f64 + Sync + Send,
) -> f64 {
    lattices
        .par_iter()
        .map(per_lattice)
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

fn check_nonempty(lattices: &[DyadicLattice]) -> Result<()> {
    if lattices.is_empty() {
        return Err(LabError::InvalidParameter("empty lattice set".into()));
    }
    Ok(())
}

/// `sup_Q <w>_Q <w^(1-p')>_Q^(p-1)`.
pub fn ap_constant(w: &Weight, p: f64, lattices: &[DyadicLattice]) -> Result<f64> {
    if !(p > 1.0) {
        return Err(LabError::InvalidParameter(format!("A_p needs p > 1, got {p}")));
    }
    check_nonempty(lattices)?;
    w.check(lattices)?;
    let dim = w.dim();
    let level = w.level();
    let expo = 1.0 - p / (p - 1.0);
    let dual: Vec<f64> = w.f.values().iter().map(|v| v.powf(expo)).collect();
    Ok(sup_over_lattices(lattices, |lat| {
        let a = Pyramid::sums(dim, level, &lat.to_frame(w.f.values())).into_averages(dim);
        let b = Pyramid::sums(dim, level, &lat.to_frame(&dual)).into_averages(dim);
        a.levels
            .iter()
            .flatten()
            .zip(b.levels.iter().flatten())
            .map(|(x, y)| x * y.powf(p - 1.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }))
}

/// `sup_Q <w>_Q / min_Q w`.
pub fn a1_constant(w: &Weight, lattices: &[DyadicLattice]) -> Result<f64> {
    check_nonempty(lattices)?;
    w.check(lattices)?;
    let dim = w.dim();
    let level = w.level();
    Ok(sup_over_lattices(lattices, |lat| {
        let frame = lat.to_frame(w.f.values());
        let avg = Pyramid::sums(dim, level, &frame).into_averages(dim);
        let min = Pyramid::build(dim, level, &frame, f64::min);
        avg.levels
            .iter()
            .flatten()
            .zip(min.levels.iter().flatten())
            .map(|(a, m)| a / m)
            .fold(f64::NEG_INFINITY, f64::max)
    }))
}

/// Fujii–Wilson constant `sup_Q w(Q)^(-1) int_Q M^D(w 1_Q)`, where the
/// maximal function only sees lattice cubes inside `Q`.
pub fn ainfty_constant(w: &Weight, lattices: &[DyadicLattice]) -> Result<f64> {
    check_nonempty(lattices)?;
    w.check(lattices)?;
    let dim = w.dim();
    let level = w.level();
    Ok(sup_over_lattices(lattices, |lat| {
        let frame = lat.to_frame(w.f.values());
        let sums = Pyramid::sums(dim, level, &frame);
        let avgs = sums.clone().into_averages(dim);
        // running[x] = max of averages over cubes of level >= k containing x
        let mut running = frame.clone();
        let mut best: f64 = 1.0;
        for k in (0..level).rev() {
            let avg_k = &avgs.levels[k as usize];
            let mut fw = vec![0.0; cubes_at(dim, k)];
            for (x, r) in running.iter_mut().enumerate() {
                let a = ancestor_index(dim, level, x, k);
                *r = r.max(avg_k[a]);
                fw[a] += *r;
            }
            let wk = &sums.levels[k as usize];
            for (num, den) in fw.iter().zip(wk) {
                best = best.max(num / den);
            }
        }
        best
    }))
}

/// Dyadic BMO norm `sup_Q <|b - b_Q|>_Q`.
pub fn bmo_norm(b: &GridFunction, lattices: &[DyadicLattice]) -> Result<f64> {
    check_nonempty(lattices)?;
    if b.is_complex() {
        return Err(LabError::InvalidFunction("BMO needs a real function".into()));
    }
    for l in lattices {
        if l.dim() != b.dim() || l.max_level() != b.level() {
            return Err(LabError::GridMismatch("lattice does not match b".into()));
        }
    }
    let dim = b.dim();
    let level = b.level();
    let cells_total = b.len();
    Ok(sup_over_lattices(lattices, |lat| {
        let frame = lat.to_frame(b.values());
        let avgs = Pyramid::sums(dim, level, &frame).into_averages(dim);
        let mut best: f64 = 0.0;
        for k in 0..level {
            let avg_k = &avgs.levels[k as usize];
            let mut osc = vec![0.0; cubes_at(dim, k)];
            for (x, v) in frame.iter().enumerate() {
                let a = ancestor_index(dim, level, x, k);
                osc[a] += (v - avg_k[a]).abs();
            }
            let per = (cells_total / cubes_at(dim, k)) as f64;
            best = osc.iter().fold(best, |m, o| m.max(o / per));
        }
        best
    }))
}

/// A real function with its dyadic BMO norm over a lattice set.
#[derive(Clone, Debug, PartialEq)]
pub struct BmoFunction {
    b: GridFunction,
    norm: f64,
}

impl BmoFunction {
    pub fn new(b: GridFunction, lattices: &[DyadicLattice]) -> Result<Self> {
        let norm = bmo_norm(&b, lattices)?;
        Ok(Self { b, norm })
    }

    pub fn function(&self) -> &GridFunction {
        &self.b
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// True when `b` takes a single value.
    pub fn is_constant(&self) -> bool {
        let v = self.b.values();
        v.iter().all(|x| *x == v[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::shifted_lattices;
    use crate::sample::average;
    use proptest::prelude::*;

    fn std(level: u32) -> Vec<DyadicLattice> {
        vec![DyadicLattice::standard(1, level).unwrap()]
    }

    /// Brute-force scan straight from the definitions, cube by cube.
    fn brute_ap(w: &Weight, p: f64, lats: &[DyadicLattice]) -> f64 {
        let dual = w.function().map(|v| v.powf(1.0 - p / (p - 1.0))).unwrap();
        let mut best: f64 = 0.0;
        for lat in lats {
            for q in lat.all_cubes() {
                let a = average(w.function(), lat, &q, 1.0).unwrap();
                let b = average(&dual, lat, &q, 1.0).unwrap();
                best = best.max(a * b.powf(p - 1.0));
            }
        }
        best
    }

    fn brute_ainfty(w: &Weight, lats: &[DyadicLattice]) -> f64 {
        let v = w.function().values();
        let mut best: f64 = 0.0;
        for lat in lats {
            for q in lat.all_cubes() {
                let cells = lat.cube_cells(&q);
                let wq: f64 = cells.iter().map(|&c| v[c]).sum();
                let mut integral = 0.0;
                for &x in &cells {
                    let mut m: f64 = 0.0;
                    for p in lat.all_cubes().filter(|p| q.contains(p)) {
                        let pc = lat.cube_cells(&p);
                        if pc.binary_search(&x).is_ok() {
                            m = m.max(pc.iter().map(|&c| v[c]).sum::<f64>() / pc.len() as f64);
                        }
                    }
                    integral += m;
                }
                best = best.max(integral / wq);
            }
        }
        best
    }

    #[test]
    fn constant_weight_constants_are_one() {
        let w = Weight::constant(1, 5, 3.0);
        let lats = shifted_lattices(1, 5).unwrap();
        for p in [1.5, 2.0, 4.0] {
            assert!((ap_constant(&w, p, &lats).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!((ainfty_constant(&w, &lats).unwrap() - 1.0).abs() < 1e-14);
        assert!((a1_constant(&w, &lats).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn halves_one_four() {
        let w = Weight::two_step(1.0, 4.0, 1, 3).unwrap();
        let a2 = ap_constant(&w, 2.0, &std(3)).unwrap();
        assert!((a2 - 25.0 / 16.0).abs() < 1e-14);
        let ainf = ainfty_constant(&w, &std(3)).unwrap();
        assert!((ainf - brute_ainfty(&w, &std(3))).abs() < 1e-13);
        // root: (1/2 * 1 + 1/2 * 4) / 2.5 on [0,1)
        assert!((ainf - 1.3).abs() < 1e-13);
    }

    #[test]
    fn a1_halves_one_two() {
        let w = Weight::two_step(1.0, 2.0, 1, 4).unwrap();
        assert!((a1_constant(&w, &std(4)).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn power_weight_cells() {
        let w = Weight::power(1.0, &[0.5], 1, 2).unwrap();
        assert_eq!(w.function().values(), &[0.375, 0.125, 0.125, 0.375]);
        let one = Weight::power(0.0, &[0.3], 1, 4).unwrap();
        assert!(one.function().values().iter().all(|&v| v == 1.0));
        assert!(Weight::power(-1.0, &[0.5], 1, 4).is_err());
    }

    #[test]
    fn power_weight_a2_brute_force() {
        let w = Weight::power(0.5, &[0.5], 1, 10).unwrap();
        let lats = shifted_lattices(1, 10).unwrap();
        let fast = ap_constant(&w, 2.0, &lats).unwrap();
        assert!((fast - brute_ap(&w, 2.0, &lats)).abs() < 1e-12 * fast);
        assert!(fast > 1.0);
    }

    #[test]
    fn power_weight_a2_increases_with_a() {
        let lats = shifted_lattices(1, 8).unwrap();
        let vals: Vec<f64> = [0.0, 0.25, 0.5, 0.75]
            .iter()
            .map(|&a| ap_constant(&Weight::power(a, &[0.5], 1, 8).unwrap(), 2.0, &lats).unwrap())
            .collect();
        assert!(vals.windows(2).all(|p| p[0] < p[1]), "{vals:?}");
    }

    #[test]
    fn bmo_by_hand() {
        let lats = std(3);
        assert_eq!(bmo_norm(&GridFunction::constant(1, 3, 2.0), &lats).unwrap(), 0.0);
        let b = GridFunction::from_fn(1, 3, |x| if x[0] < 0.5 { 0.0 } else { 1.0 });
        assert!((bmo_norm(&b, &lats).unwrap() - 0.5).abs() < 1e-15);
        let shifted = b.map(|v| v + 7.0).unwrap();
        assert!((bmo_norm(&shifted, &lats).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(Weight::new(GridFunction::new(1, 1, vec![1.0, 0.0]).unwrap()).is_err());
        let w = Weight::constant(1, 3, 1.0);
        assert!(ap_constant(&w, 1.0, &std(3)).is_err());
        assert!(ap_constant(&w, 2.0, &std(4)).is_err());
    }

    #[test]
    fn weight_json_marks_positive() {
        let w = Weight::power(0.5, &[0.25], 1, 3).unwrap();
        let s = w.to_json().unwrap();
        assert!(s.contains("\"positive\":true"));
        assert_eq!(Weight::from_json(&s).unwrap(), w);
    }

    fn weight_strategy(dim: usize, level: u32) -> impl Strategy<Value = Weight> {
        prop::collection::vec(0.05..20.0f64, 1usize << (dim as u32 * level))
            .prop_map(move |v| Weight::new(GridFunction::new(dim, level, v).unwrap()).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn fast_scans_match_brute_force_2d(w in weight_strategy(2, 3)) {
            let lats = shifted_lattices(2, 3).unwrap();
            let fast = ap_constant(&w, 3.0, &lats).unwrap();
            prop_assert!((fast - brute_ap(&w, 3.0, &lats)).abs() <= 1e-12 * fast);
            let fast = ainfty_constant(&w, &lats[..2]).unwrap();
            prop_assert!((fast - brute_ainfty(&w, &lats[..2])).abs() <= 1e-12 * fast);
        }

        #[test]
        fn constant_orderings(w in weight_strategy(1, 6)) {
            let lats = shifted_lattices(1, 6).unwrap();
            let a1 = a1_constant(&w, &lats).unwrap();
            let ainf = ainfty_constant(&w, &lats).unwrap();
            let mut prev = f64::INFINITY;
            for p in [1.5, 2.0, 3.0, 4.0] {
                let ap = ap_constant(&w, p, &lats).unwrap();
                prop_assert!(ap >= 1.0 - 1e-12);
                prop_assert!(ap <= a1 * (1.0 + 1e-12));
                prop_assert!(ap <= prev * (1.0 + 1e-12));
                prev = ap;
            }
            prop_assert!(ainf >= 1.0 - 1e-12);
            prop_assert!(ainf <= a1 * (1.0 + 1e-12));
        }

        #[test]
        fn bmo_zero_iff_constant(v in prop::collection::vec(-2.0..2.0f64, 16), c in -5.0..5.0f64) {
            let lats = shifted_lattices(1, 4).unwrap();
            let b = GridFunction::new(1, 4, v).unwrap();
            let n = bmo_norm(&b, &lats).unwrap();
            let n2 = bmo_norm(&b.map(|x| x + c).unwrap(), &lats).unwrap();
            prop_assert!((n - n2).abs() < 1e-12);
            let constant = b.values().iter().all(|x| *x == b.values()[0]);
            prop_assert_eq!(n == 0.0, constant);
        }

        #[test]
        fn ap_equals_one_iff_constant(w in weight_strategy(1, 4)) {
            let lats = [DyadicLattice::standard(1, 4).unwrap()];
            let a2 = ap_constant(&w, 2.0, &lats).unwrap();
            let constant = w.function().values().iter().all(|x| *x == w.function().values()[0]);
            prop_assert_eq!((a2 - 1.0).abs() < 1e-14, constant);
        }
    }
}
