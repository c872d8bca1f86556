//! Halton quasi-random draws transformed to standard normals.
//!
//! Each observation receives a contiguous block of Halton indices per
//! dimension, so draw sets are disjoint across observations and the whole
//! block is a pure function of its configuration.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::stats::inv_normal_cdf;

/// Prime bases assigned to random-coefficient dimensions, in layout order.
pub const DEFAULT_PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Configuration of the quasi-random draw generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawConfig {
    /// Draws per observation.
    pub n_draws: usize,
    /// Initial Halton points discarded (the degenerate leading segment).
    pub burn_in: usize,
    /// Prime bases, one per random dimension.
    pub primes: Vec<u32>,
    /// When set, the draw order of every (observation, dimension) pair is
    /// permuted deterministically from this seed.
    pub shuffle_seed: Option<u64>,
}

impl Default for DrawConfig {
    fn default() -> Self {
        Self {
            n_draws: 1000,
            burn_in: 10,
            primes: DEFAULT_PRIMES.to_vec(),
            shuffle_seed: None,
        }
    }
}

impl DrawConfig {
    pub fn with_draws(n_draws: usize) -> Self {
        Self {
            n_draws,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::InvalidConfig("n_draws must be at least 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &p in &self.primes {
            if !is_prime(p) {
                return Err(Error::InvalidConfig(format!("{p} is not a prime base")));
            }
            if !seen.insert(p) {
                return Err(Error::InvalidConfig(format!("duplicate prime base {p}")));
            }
        }
        Ok(())
    }

    /// Halton indices assigned to one observation (identical for every
    /// dimension): `burn_in + obs·n_draws + 1 .. burn_in + (obs+1)·n_draws`.
    pub fn index_block(&self, obs: usize) -> Range<u64> {
        let start = self.burn_in as u64 + obs as u64 * self.n_draws as u64 + 1;
        start..start + self.n_draws as u64
    }
}

/// Radical inverse of `index` in the given prime base; lies in (0, 1) for
/// every index ≥ 1.
///
/// # Panics
/// If `base < 2` or `index < 1`.
pub fn halton_value(base: u32, index: u64) -> f64 {
    assert!(base >= 2, "Halton base must be at least 2");
    assert!(index >= 1, "Halton index must be at least 1");
    let base_f = base as f64;
    let mut remaining = index;
    let mut scale = 1.0 / base_f;
    let mut value = 0.0;
    while remaining > 0 {
        value += (remaining % base as u64) as f64 * scale;
        remaining /= base as u64;
        scale /= base_f;
    }
    value
}

/// Per-observation, per-draw standard-normal values for each random
/// dimension. Immutable; shared read-only by parallel likelihood workers.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawBlock {
    values: Vec<f64>,
    n_obs: usize,
    n_draws: usize,
    n_dims: usize,
    config: DrawConfig,
}

impl DrawBlock {
    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn config(&self) -> &DrawConfig {
        &self.config
    }

    #[inline]
    pub fn value(&self, obs: usize, draw: usize, dim: usize) -> f64 {
        self.values[(obs * self.n_draws + draw) * self.n_dims + dim]
    }

    /// All draws for one observation as a row-major `n_draws × n_dims` slice.
    #[inline]
    pub fn observation(&self, obs: usize) -> &[f64] {
        let stride = self.n_draws * self.n_dims;
        &self.values[obs * stride..(obs + 1) * stride]
    }
}

/// Generates the draw block for `n_obs` observations and `n_random`
/// dimensions. Deterministic: equal arguments yield identical values.
pub fn generate_draw_block(
    n_obs: usize,
    n_random: usize,
    config: &DrawConfig,
) -> Result<DrawBlock> {
    config.validate()?;
    if n_random > config.primes.len() {
        return Err(Error::PrimeExhaustion {
            needed: n_random,
            available: config.primes.len(),
        });
    }
    let n_draws = config.n_draws;
    let mut values = vec![0.0; n_obs * n_draws * n_random];
    for dim in 0..n_random {
        let base = config.primes[dim];
        for obs in 0..n_obs {
            for (r, index) in config.index_block(obs).enumerate() {
                let u = halton_value(base, index);
                let z = inv_normal_cdf(u).expect("radical inverse lies in (0,1)");
                values[(obs * n_draws + r) * n_random + dim] = z;
            }
        }
    }
    if let Some(seed) = config.shuffle_seed {
        let mut column = vec![0.0; n_draws];
        for obs in 0..n_obs {
            for dim in 0..n_random {
                for r in 0..n_draws {
                    column[r] = values[(obs * n_draws + r) * n_random + dim];
                }
                let mut rng = SplitMix64::stream(seed, (obs * n_random + dim) as u64);
                rng.shuffle(&mut column);
                for r in 0..n_draws {
                    values[(obs * n_draws + r) * n_random + dim] = column[r];
                }
            }
        }
    }
    Ok(DrawBlock {
        values,
        n_obs,
        n_draws,
        n_dims: n_random,
        config: config.clone(),
    })
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normal_cdf;

    #[test]
    fn radical_inverse_base_2() {
        assert_eq!(halton_value(2, 1), 0.5);
        assert_eq!(halton_value(2, 2), 0.25);
        assert_eq!(halton_value(2, 3), 0.75);
        assert_eq!(halton_value(2, 4), 0.125);
        assert_eq!(halton_value(2, 5), 0.625);
        assert_eq!(halton_value(2, 6), 0.375);
        assert_eq!(halton_value(2, 7), 0.875);
        assert_eq!(halton_value(2, 8), 0.0625);
    }

    #[test]
    fn radical_inverse_base_3() {
        assert!((halton_value(3, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((halton_value(3, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((halton_value(3, 3) - 1.0 / 9.0).abs() < 1e-15);
    }

    // Direct-summation oracle: the first 1000 base-2 points average to 1/2.
    #[test]
    fn base_2_mean_is_half() {
        let sum: f64 = (1..=1000).map(|i| halton_value(2, i)).sum();
        assert!((sum / 1000.0 - 0.5).abs() < 0.005);
    }

    #[test]
    fn block_assignment_matches_hand_computation() {
        let config = DrawConfig {
            n_draws: 3,
            burn_in: 0,
            primes: vec![2],
            shuffle_seed: None,
        };
        let block = generate_draw_block(2, 1, &config).unwrap();
        // Observation 0 gets Φ⁻¹ of (0.5, 0.25, 0.75); observation 1 gets
        // Φ⁻¹ of (0.125, 0.625, 0.375).
        let expect = |u: f64| inv_normal_cdf(u).unwrap();
        assert_eq!(block.value(0, 0, 0), expect(0.5));
        assert_eq!(block.value(0, 1, 0), expect(0.25));
        assert_eq!(block.value(0, 2, 0), expect(0.75));
        assert_eq!(block.value(1, 0, 0), expect(0.125));
        assert_eq!(block.value(1, 1, 0), expect(0.625));
        assert_eq!(block.value(1, 2, 0), expect(0.375));
    }

    #[test]
    fn generation_is_deterministic() {
        let config = DrawConfig {
            n_draws: 50,
            burn_in: 10,
            primes: vec![2, 3, 5],
            shuffle_seed: Some(99),
        };
        let a = generate_draw_block(7, 3, &config).unwrap();
        let b = generate_draw_block(7, 3, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn index_blocks_are_disjoint() {
        let config = DrawConfig::with_draws(250);
        let mut seen = std::collections::BTreeSet::new();
        for obs in 0..40 {
            for index in config.index_block(obs) {
                assert!(seen.insert(index), "index {index} reused");
            }
        }
        assert_eq!(seen.len(), 40 * 250);
    }

    #[test]
    fn shuffle_permutes_but_preserves_values() {
        let base_cfg = DrawConfig {
            n_draws: 64,
            burn_in: 0,
            primes: vec![2, 3],
            shuffle_seed: None,
        };
        let shuffled_cfg = DrawConfig {
            shuffle_seed: Some(5),
            ..base_cfg.clone()
        };
        let plain = generate_draw_block(3, 2, &base_cfg).unwrap();
        let shuffled = generate_draw_block(3, 2, &shuffled_cfg).unwrap();
        assert_ne!(plain, shuffled);
        for obs in 0..3 {
            for dim in 0..2 {
                let mut a: Vec<u64> = (0..64)
                    .map(|r| plain.value(obs, r, dim).to_bits())
                    .collect();
                let mut b: Vec<u64> = (0..64)
                    .map(|r| shuffled.value(obs, r, dim).to_bits())
                    .collect();
                a.sort_unstable();
                b.sort_unstable();
                assert_eq!(a, b, "obs {obs} dim {dim}");
            }
        }
    }

    #[test]
    fn prime_exhaustion_is_reported() {
        let config = DrawConfig {
            primes: vec![2, 3],
            ..DrawConfig::with_draws(10)
        };
        let err = generate_draw_block(5, 3, &config).unwrap_err();
        assert!(matches!(
            err,
            Error::PrimeExhaustion {
                needed: 3,
                available: 2
            }
        ));
    }

    #[test]
    fn non_prime_base_is_rejected() {
        let config = DrawConfig {
            primes: vec![4],
            ..DrawConfig::with_draws(10)
        };
        assert!(generate_draw_block(1, 1, &config).is_err());
    }

    // Large-sample check via direct averaging: each dimension's grand mean is
    // near zero.
    #[test]
    fn grand_mean_is_near_zero() {
        let config = DrawConfig {
            n_draws: 500,
            burn_in: 10,
            primes: vec![2, 3],
            shuffle_seed: None,
        };
        let block = generate_draw_block(100, 2, &config).unwrap();
        for dim in 0..2 {
            let mut sum = 0.0;
            for obs in 0..100 {
                for r in 0..500 {
                    sum += block.value(obs, r, dim);
                }
            }
            let mean = sum / (100.0 * 500.0);
            assert!(mean.abs() < 0.01, "dim {dim} mean {mean}");
        }
    }

    #[test]
    fn pooled_values_match_normal_cdf() {
        let config = DrawConfig {
            n_draws: 500,
            burn_in: 10,
            primes: vec![2],
            shuffle_seed: None,
        };
        let block = generate_draw_block(100, 1, &config).unwrap();
        let mut pooled: Vec<f64> = (0..100)
            .flat_map(|obs| (0..500).map(move |r| (obs, r)))
            .map(|(obs, r)| block.value(obs, r, 0))
            .collect();
        pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = pooled.len() as f64;
        let mut ks: f64 = 0.0;
        for (i, &z) in pooled.iter().enumerate() {
            let phi = normal_cdf(z);
            ks = ks
                .max(((i + 1) as f64 / n - phi).abs())
                .max((phi - i as f64 / n).abs());
        }
        assert!(ks < 0.02, "KS statistic {ks}");
    }
}
