use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::sample::GridFunction;

/// A step function of random values on a coarse grid, refined to `level`.
fn coarse_steps(rng: &mut ChaCha8Rng, dim: usize, level: u32) -> Result<GridFunction> {
    let k = rng.random_range(1..=level.max(1)).min(level);
    let side = 1usize << level;
    let shift = level - k;
    let coarse_side = 1usize << k;
    let coarse: Vec<f64> = (0..coarse_side.pow(dim as u32))
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let values = (0..side.pow(dim as u32))
        .map(|i| {
            if dim == 1 {
                coarse[i >> shift]
            } else {
                let (r, c) = (i / side, i % side);
                coarse[(r >> shift) * coarse_side + (c >> shift)]
            }
        })
        .collect();
    GridFunction::new(dim, level, values)
}

/// Amplitude times the indicator of a random dyadic cube.
fn cube_indicator(rng: &mut ChaCha8Rng, dim: usize, level: u32) -> Result<GridFunction> {
    let k = rng.random_range(0..=level / 2);
    let cells = 1u64 << k;
    let coords: Vec<f64> = (0..dim).map(|_| rng.random_range(0..cells) as f64 / cells as f64).collect();
    let amp = rng.random_range(0.2..2.0);
    let side = 1.0 / cells as f64;
    Ok(GridFunction::from_fn(dim, level, |x| {
        if x.iter().zip(&coords).all(|(xi, c)| *xi >= *c && *xi < c + side) {
            amp
        } else {
            0.0
        }
    }))
}

fn cell_noise(rng: &mut ChaCha8Rng, dim: usize, level: u32) -> Result<GridFunction> {
    let n = 1usize << (dim as u32 * level);
    GridFunction::new(dim, level, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn trig(rng: &mut ChaCha8Rng, dim: usize, level: u32) -> Result<GridFunction> {
    let top = (1u32 << level.min(4)) as f64;
    let terms: Vec<(f64, f64, f64, usize)> = (0..3)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(1.0..=top).floor(),
                rng.random_range(0.0..1.0),
                rng.random_range(0..dim),
            )
        })
        .collect();
    Ok(GridFunction::from_fn(dim, level, |x| {
        terms
            .iter()
            .map(|(a, k, ph, axis)| a * (2.0 * std::f64::consts::PI * (k * x[*axis] + ph)).cos())
            .sum()
    }))
}

/// `count` tuples of `m` functions drawn from a seeded mix of coarse steps,
/// cube indicators, cell noise and trigonometric sums.
pub fn corpus(seed: u64, count: usize, m: usize, dim: usize, level: u32) -> Result<Vec<Vec<GridFunction>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..m)
                .map(|_| match rng.random_range(0..4) {
                    0 => coarse_steps(&mut rng, dim, level),
                    1 => cube_indicator(&mut rng, dim, level),
                    2 => cell_noise(&mut rng, dim, level),
                    _ => trig(&mut rng, dim, level),
                })
                .collect()
        })
        .collect()
}
