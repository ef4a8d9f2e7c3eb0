use super::sobol_table::JOE_KUO;
use super::{batch, map_unit_points, Method, SampleBatch, SamplingError};
use crate::design_space::DesignSpace;

/// Dimensions covered by the bundled direction numbers.
pub const MAX_DIMENSION: usize = JOE_KUO.len();
/// Largest `m` accepted by [`sample_sobol`] (2^20 points).
pub const MAX_LOG2_POINTS: u32 = 20;

const BITS: usize = 32;

/// Base-2 digital sequence with Joe-Kuo direction numbers, emitted in
/// Gray-code order, optionally with nested uniform (Owen) scrambling.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    directions: Vec<[u32; BITS]>,
    scramble: Option<u64>,
}

impl SobolSequence {
    pub fn new(dim: usize, scramble: Option<u64>) -> Result<Self, SamplingError> {
        if dim > MAX_DIMENSION {
            return Err(SamplingError::TooManyDimensions {
                dim,
                max: MAX_DIMENSION,
            });
        }
        let directions = JOE_KUO[..dim]
            .iter()
            .map(|&(s, a, m)| directions(s, a, m))
            .collect();
        Ok(Self {
            directions,
            scramble,
        })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Raw 32-bit integer coordinates of point `index`.
    pub fn point_bits(&self, index: u32) -> Vec<u32> {
        let gray = index ^ (index >> 1);
        self.directions
            .iter()
            .enumerate()
            .map(|(axis, v)| {
                let mut x = 0u32;
                let mut g = gray;
                let mut bit = 0;
                while g != 0 {
                    if g & 1 == 1 {
                        x ^= v[bit];
                    }
                    g >>= 1;
                    bit += 1;
                }
                match self.scramble {
                    Some(seed) => owen_scramble(x, seed, axis as u64),
                    None => x,
                }
            })
            .collect()
    }

    /// Point `index` in `[0, 1)^d`.
    pub fn point(&self, index: u32) -> Vec<f64> {
        self.point_bits(index)
            .into_iter()
            .map(|x| x as f64 / 4_294_967_296.0)
            .collect()
    }

    /// The first `2^m` points.
    pub fn first_power_of_two(&self, m: u32) -> Vec<Vec<f64>> {
        (0..1u32 << m).map(|i| self.point(i)).collect()
    }
}

fn directions(degree: u32, coefficients: u32, initial: &[u32]) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if degree == 0 {
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let s = degree as usize;
    for k in 0..BITS {
        v[k] = if k < s {
            initial[k] << (BITS - 1 - k)
        } else {
            let mut value = v[k - s] ^ (v[k - s] >> s);
            for i in 1..s {
                if (coefficients >> (s - 1 - i)) & 1 == 1 {
                    value ^= v[k - i];
                }
            }
            value
        };
    }
    v
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Flip bit `t` (counted from the most significant) according to a hash of
/// the bits above it, so every dyadic subinterval gets its own permutation.
fn owen_scramble(x: u32, seed: u64, axis: u64) -> u32 {
    let key = mix(seed ^ mix(axis.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    let mut out = x;
    for depth in 0..BITS {
        let prefix = (x as u64) >> (BITS - depth);
        let h = mix(key ^ mix(((depth as u64) << 32) ^ prefix ^ (1 << 62)));
        if h & 1 == 1 {
            out ^= 1 << (BITS - 1 - depth);
        }
    }
    out
}

/// First `2^m` points of a scrambled Sobol sequence keyed by `seed`.
pub fn sample_sobol(space: &DesignSpace, m: u32, seed: u64) -> Result<SampleBatch, SamplingError> {
    if m > MAX_LOG2_POINTS {
        return Err(SamplingError::TooManyPoints {
            m,
            max: MAX_LOG2_POINTS,
        });
    }
    let sequence = SobolSequence::new(space.dim(), Some(seed))?;
    let points = sequence.first_power_of_two(m);
    Ok(batch(
        space,
        map_unit_points(space, points)?,
        seed,
        Method::Sobol,
    ))
}
