use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};

use super::{Method, SampleBatch, SamplingError};
use crate::design_space::{DesignSpace, DesignVector, FeatureKind};

pub const DEFAULT_SIGMA_FRAC: f64 = 0.01;

/// Gaussian perturbations of `parents`, used round-robin.
///
/// Noise is added to continuous and integer coordinates in normalized space
/// with standard deviation `sigma_frac`, clipped to `[0, 1]`, and mapped
/// back (integers round). Categorical and fixed features are copied.
pub fn augment(
    space: &DesignSpace,
    parents: &[DesignVector],
    n: usize,
    sigma_frac: f64,
    seed: u64,
) -> Result<SampleBatch, SamplingError> {
    if parents.is_empty() {
        return Err(SamplingError::NoParents);
    }
    if n == 0 {
        return Err(SamplingError::Empty);
    }
    if !(sigma_frac > 0.0) || !sigma_frac.is_finite() {
        return Err(SamplingError::InvalidSigma(sigma_frac));
    }
    let unit_parents: Vec<Vec<f64>> = parents
        .iter()
        .map(|p| space.normalize(p))
        .collect::<Result<_, _>>()?;
    let perturbed: Vec<bool> = space
        .features
        .iter()
        .map(|f| f.kind != FeatureKind::Categorical && !f.is_fixed())
        .collect();
    let noise = Normal::new(0.0, sigma_frac).expect("sigma checked above");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clip_events = 0;
    let mut rows = Vec::with_capacity(n);
    let mut parent_ids = Vec::with_capacity(n);
    for i in 0..n {
        let parent = i % parents.len();
        let mut unit = unit_parents[parent].clone();
        for (u, _) in unit.iter_mut().zip(&perturbed).filter(|(_, &p)| p) {
            let v = *u + noise.sample(&mut rng);
            if !(0.0..=1.0).contains(&v) {
                clip_events += 1;
            }
            *u = v.clamp(0.0, 1.0);
        }
        rows.push(space.denormalize(&unit)?);
        parent_ids.push(parent);
    }
    Ok(SampleBatch {
        space: space.clone(),
        rows,
        seed,
        method: Method::Augment,
        parents: Some(parent_ids),
        clip_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centre(space: &DesignSpace) -> DesignVector {
        space.denormalize(&vec![0.5; space.dim()]).unwrap()
    }

    #[test]
    fn noise_scale_matches_request() {
        let space = DesignSpace::compressor();
        let parent = centre(&space);
        let b = augment(&space, std::slice::from_ref(&parent), 100_000, 0.01, 4).unwrap();
        assert_eq!(b.clip_events, 0);
        let unit: Vec<Vec<f64>> = b.rows.iter().map(|r| space.normalize(r).unwrap()).collect();
        let p = space.normalize(&parent).unwrap();
        for (j, f) in space.features.iter().enumerate() {
            if f.kind != FeatureKind::Continuous || f.is_fixed() {
                continue;
            }
            let n = unit.len() as f64;
            let mean = unit.iter().map(|u| u[j]).sum::<f64>() / n;
            let std = (unit.iter().map(|u| (u[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((std - 0.01).abs() < 0.0005, "{}: std {std}", f.name);
            assert!((mean - p[j]).abs() < 0.001, "{}: mean {mean}", f.name);
        }
        for row in &b.rows {
            assert!(space.validate_vector(row).unwrap().valid);
        }
    }

    #[test]
    fn vanishing_noise_returns_parents() {
        let space = DesignSpace::compressor();
        let parent = centre(&space);
        let b = augment(&space, std::slice::from_ref(&parent), 10, 1e-12, 0).unwrap();
        for row in &b.rows {
            for (a, e) in row.iter().zip(parent.iter()) {
                assert!((a - e).abs() <= 1e-9 * e.abs().max(1.0));
            }
        }
    }

    #[test]
    fn round_robin_parents() {
        let space = DesignSpace::compressor();
        let parents: Vec<DesignVector> = (0..14)
            .map(|i| {
                space
                    .denormalize(&vec![0.2 + 0.04 * i as f64; space.dim()])
                    .unwrap()
            })
            .collect();
        let b = augment(&space, &parents, 28, 0.01, 1).unwrap();
        let ids = b.parents.unwrap();
        for p in 0..14 {
            assert_eq!(ids.iter().filter(|&&i| i == p).count(), 2);
        }
        // Categorical fluid is carried over from the parent.
        let fluid = space.index_of("fluid").unwrap();
        for (row, &id) in b.rows.iter().zip(&ids) {
            assert_eq!(row[fluid], parents[id][fluid]);
        }
    }

    #[test]
    fn clipping_is_counted() {
        let space = DesignSpace::compressor();
        let corner = space.denormalize(&vec![0.0; space.dim()]).unwrap();
        let b = augment(&space, &[corner], 100, 0.05, 2).unwrap();
        assert!(b.clip_events > 0);
        for row in &b.rows {
            assert!(space.validate_vector(row).unwrap().valid);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let space = DesignSpace::compressor();
        assert!(matches!(
            augment(&space, &[], 5, 0.01, 0),
            Err(SamplingError::NoParents)
        ));
        let p = centre(&space);
        assert!(matches!(
            augment(&space, &[p], 5, 0.0, 0),
            Err(SamplingError::InvalidSigma(_))
        ));
    }
}
