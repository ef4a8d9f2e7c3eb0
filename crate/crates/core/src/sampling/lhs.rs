use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{batch, map_unit_points, Method, SampleBatch, SamplingError};
use crate::design_space::DesignSpace;

/// Latin hypercube in `[0, 1)^d`: one point per bin `[k/n, (k+1)/n)` on
/// every axis, bins permuted independently, jittered uniformly inside.
pub(crate) fn latin_hypercube(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; d]; n];
    let mut bins: Vec<usize> = (0..n).collect();
    for axis in 0..d {
        bins.shuffle(rng);
        for (row, &bin) in points.iter_mut().zip(&bins) {
            let u = (bin as f64 + rng.random::<f64>()) / n as f64;
            // Rounding can push u onto the next bin edge.
            row[axis] = if (u * n as f64).floor() as usize == bin {
                u
            } else {
                bin as f64 / n as f64
            };
        }
    }
    points
}

pub fn sample_lhs(space: &DesignSpace, n: usize, seed: u64) -> Result<SampleBatch, SamplingError> {
    if n == 0 {
        return Err(SamplingError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = latin_hypercube(n, space.dim(), &mut rng);
    Ok(batch(
        space,
        map_unit_points(space, points)?,
        seed,
        Method::Lhs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::parse_space;

    fn occupancy(points: &[Vec<f64>], axis: usize) -> Vec<usize> {
        let n = points.len();
        let mut counts = vec![0; n];
        for p in points {
            counts[(p[axis] * n as f64).floor() as usize] += 1;
        }
        counts
    }

    #[test]
    fn one_point_per_bin() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = latin_hypercube(5, 3, &mut rng);
        for axis in 0..3 {
            assert_eq!(occupancy(&p, axis), vec![1; 5]);
        }
        let p = latin_hypercube(100, 2, &mut rng);
        for axis in 0..2 {
            assert_eq!(*occupancy(&p, axis).iter().max().unwrap(), 1);
        }
        let p = latin_hypercube(1, 4, &mut rng);
        assert!(p[0].iter().all(|&u| (0.0..1.0).contains(&u)));
    }

    #[test]
    fn sample_lhs_contract() {
        let space = parse_space(
            "a | continuous | 0 | 1 | - | uniform |\nb | continuous | 0 | 1 | - | uniform |",
        )
        .unwrap();
        let b = sample_lhs(&space, 50, 2).unwrap();
        let unit: Vec<Vec<f64>> = b.rows.iter().map(|r| r.0.clone()).collect();
        assert_eq!(occupancy(&unit, 0), vec![1; 50]);
        assert_eq!(b, sample_lhs(&space, 50, 2).unwrap());
        assert!(matches!(
            sample_lhs(&space, 0, 2),
            Err(SamplingError::Empty)
        ));
        let compressor = DesignSpace::compressor();
        for row in sample_lhs(&compressor, 200, 3).unwrap().rows {
            assert!(compressor.validate_vector(&row).unwrap().valid);
        }
    }
}
