//! Noisy Legendre-moment measurements with variance schedules.
//!
//! A measurement of the grid entry `(k, l)` is `lambda_kl + eps_Nkl` with
//! independent Gaussian noise of variance `sigma_N^2` set by the schedule.
//! Gaussianity is a tooling choice (the consistency theory needs only zero
//! mean and bounded variance). Every noise value comes from its own
//! counter-based stream keyed by `(seed, N, k, l)`: the key is mixed by
//! splitmix64 into a ChaCha8 seed and turned into one normal variate by the
//! Box-Muller transform. Grids are therefore reproducible bit for bit
//! across platforms and independent of evaluation order. The grid order is
//! part of the key on purpose: the noise field of an order-N measurement is
//! a fresh draw, not a sub-grid of a larger one.

use serde::{Deserialize, Serialize};

use crate::moments::{MomentGrid, MomentKind};
use crate::{Error, Result};

/// Decay law of the noise variance in the moment order `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSchedule {
    /// No perturbation at all; the pipeline reduces to the exact one.
    None,
    /// `sigma_N^2 = c N^{-(2+eps)}`: variance decay sufficient for
    /// convergence of the reconstruction in mean and in probability.
    MeanConsistent,
    /// `sigma_N^2 = c N^{-(3+eps)}`: faster decay, sufficient for almost
    /// sure convergence.
    AsConsistent,
    /// `sigma_N^2 = c` independent of the order.
    Fixed,
}

/// Fully specified noise model: schedule plus its constants and the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisySpec {
    pub schedule: NoiseSchedule,
    /// The exponent offset `eps` of the decaying schedules.
    pub epsilon: f64,
    /// The constant `c` in front of the schedule.
    pub scale: f64,
    pub seed: u64,
}

impl NoisySpec {
    pub fn exact(seed: u64) -> Self {
        Self { schedule: NoiseSchedule::None, epsilon: 0.0, scale: 0.0, seed }
    }

    fn validate(&self) -> Result<()> {
        match self.schedule {
            NoiseSchedule::None => Ok(()),
            _ => {
                if !(self.scale >= 0.0) {
                    return Err(Error::InvalidConfig("noise scale must be nonnegative".into()));
                }
                if matches!(
                    self.schedule,
                    NoiseSchedule::MeanConsistent | NoiseSchedule::AsConsistent
                ) && !(self.epsilon > 0.0)
                {
                    return Err(Error::InvalidConfig(
                        "decaying noise schedules need a positive epsilon".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// The variance `sigma_N^2` at grid order `N`. Decaying schedules divide
    /// by `N` and therefore reject order zero.
    pub fn sigma2(&self, order: usize) -> Result<f64> {
        self.validate()?;
        let n = order as f64;
        match self.schedule {
            NoiseSchedule::None => Ok(0.0),
            NoiseSchedule::Fixed => Ok(self.scale),
            NoiseSchedule::MeanConsistent => {
                if order == 0 {
                    return Err(Error::ZeroOrderNoise);
                }
                Ok(self.scale * n.powf(-(2.0 + self.epsilon)))
            }
            NoiseSchedule::AsConsistent => {
                if order == 0 {
                    return Err(Error::ZeroOrderNoise);
                }
                Ok(self.scale * n.powf(-(3.0 + self.epsilon)))
            }
        }
    }
}

/// splitmix64 finalizer; the standard 64-bit avalanche mix.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn entry_key(seed: u64, order: usize, k: usize, l: usize) -> u64 {
    let mut key = mix(seed);
    key = mix(key ^ order as u64);
    key = mix(key ^ k as u64);
    mix(key ^ l as u64)
}

/// One standard normal variate from a dedicated stream.
fn standard_normal(key: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(key);
    let a: u64 = rng.random();
    let b: u64 = rng.random();
    // u1 in (0, 1] keeps the logarithm finite
    let u1 = ((a >> 11) as f64 + 1.0) * (1.0 / 9_007_199_254_740_992.0);
    let u2 = (b >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Perturbed grid plus the realized noise diagnostics.
#[derive(Debug, Clone)]
pub struct PerturbOutcome {
    pub grid: MomentGrid,
    /// The variance the schedule prescribed at this order.
    pub sigma2: f64,
    /// Realized `sum of eps_Nkl^2` over the grid.
    pub sum_eps2: f64,
}

/// Adds schedule noise to a Legendre grid. `schedule = none` returns a
/// bit-exact copy without touching any generator.
pub fn perturb(target: &MomentGrid, spec: &NoisySpec) -> Result<MomentGrid> {
    Ok(perturb_detailed(target, spec)?.grid)
}

/// [`perturb`] plus the realized noise magnitude, which the studies record
/// next to each reconstruction.
pub fn perturb_detailed(target: &MomentGrid, spec: &NoisySpec) -> Result<PerturbOutcome> {
    if target.kind() != MomentKind::Legendre {
        return Err(Error::KindMismatch);
    }
    let order = target.order();
    let sigma2 = spec.sigma2(order)?;
    if spec.schedule == NoiseSchedule::None {
        return Ok(PerturbOutcome { grid: target.clone(), sigma2: 0.0, sum_eps2: 0.0 });
    }
    let sigma = sigma2.sqrt();
    let mut grid = target.clone();
    let mut sum_eps2 = 0.0;
    for k in 0..=order {
        for l in 0..=order {
            let eps = sigma * standard_normal(entry_key(spec.seed, order, k, l));
            sum_eps2 += eps * eps;
            grid.set(k, l, target.get(k, l)? + eps)?;
        }
    }
    Ok(PerturbOutcome { grid, sigma2, sum_eps2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexPolygon;
    use crate::moments::polygon_legendre_moments;

    fn target(order: usize) -> MomentGrid {
        let sq =
            ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        polygon_legendre_moments(&sq, order).unwrap()
    }

    #[test]
    fn schedule_variances() {
        let spec = NoisySpec {
            schedule: NoiseSchedule::AsConsistent,
            epsilon: 0.5,
            scale: 0.01,
            seed: 0,
        };
        let want = 0.01 * 10f64.powf(-3.5);
        assert!((spec.sigma2(10).unwrap() - want).abs() < 1e-18);
        let spec = NoisySpec { schedule: NoiseSchedule::MeanConsistent, ..spec };
        assert!((spec.sigma2(10).unwrap() - 0.01 * 10f64.powf(-2.5)).abs() < 1e-18);
        let spec = NoisySpec { schedule: NoiseSchedule::Fixed, ..spec };
        assert_eq!(spec.sigma2(10).unwrap(), 0.01);
        assert_eq!(spec.sigma2(0).unwrap(), 0.01);
        let spec = NoisySpec { schedule: NoiseSchedule::None, ..spec };
        assert_eq!(spec.sigma2(0).unwrap(), 0.0);
    }

    #[test]
    fn zero_order_with_decaying_schedule_errors() {
        let spec = NoisySpec {
            schedule: NoiseSchedule::MeanConsistent,
            epsilon: 0.5,
            scale: 0.01,
            seed: 0,
        };
        assert!(matches!(spec.sigma2(0), Err(Error::ZeroOrderNoise)));
        assert!(matches!(perturb(&target(0), &spec), Err(Error::ZeroOrderNoise)));
    }

    #[test]
    fn none_schedule_is_bit_exact() {
        let t = target(6);
        let out = perturb(&t, &NoisySpec::exact(123)).unwrap();
        assert_eq!(t, out);
    }

    #[test]
    fn perturbation_is_reproducible_and_seed_sensitive() {
        let t = target(5);
        let spec = NoisySpec {
            schedule: NoiseSchedule::Fixed,
            epsilon: 0.0,
            scale: 1e-4,
            seed: 42,
        };
        let a = perturb(&t, &spec).unwrap();
        let b = perturb(&t, &spec).unwrap();
        assert_eq!(a, b);
        let c = perturb(&t, &NoisySpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_variance_matches_schedule() {
        // pool the noise of many seeds at fixed (k, l); the sample variance
        // over 1e5 draws must sit within 5% of sigma_N^2
        let spec_base = NoisySpec {
            schedule: NoiseSchedule::AsConsistent,
            epsilon: 0.5,
            scale: 0.01,
            seed: 0,
        };
        let sigma2 = spec_base.sigma2(10).unwrap();
        let draws = 100_000usize;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for seed in 0..draws as u64 {
            let eps = sigma2.sqrt() * standard_normal(entry_key(seed, 10, 3, 7));
            sum += eps;
            sum2 += eps * eps;
        }
        let mean = sum / draws as f64;
        let var = sum2 / draws as f64 - mean * mean;
        assert!((var - sigma2).abs() < 0.05 * sigma2, "var {var} vs sigma2 {sigma2}");
        assert!(mean.abs() < 3.0 * (sigma2 / draws as f64).sqrt() * 2.0);
    }

    #[test]
    fn sum_eps2_concentrates_near_its_mean() {
        // E sum eps^2 = (N+1)^2 sigma_N^2; average over many grids
        let t = target(8);
        let spec = NoisySpec {
            schedule: NoiseSchedule::MeanConsistent,
            epsilon: 0.5,
            scale: 0.01,
            seed: 0,
        };
        let sigma2 = spec.sigma2(8).unwrap();
        let want = 81.0 * sigma2;
        let reps = 2000u64;
        let mut acc = 0.0;
        for seed in 0..reps {
            acc += perturb_detailed(&t, &NoisySpec { seed, ..spec }).unwrap().sum_eps2;
        }
        let mean = acc / reps as f64;
        assert!((mean - want).abs() < 0.05 * want, "mean {mean} vs {want}");
    }

    #[test]
    fn noise_field_is_keyed_by_grid_order() {
        // the stream key includes N, so measurements at different orders are
        // independent draws even at shared (k, l)
        let spec = NoisySpec {
            schedule: NoiseSchedule::Fixed,
            epsilon: 0.0,
            scale: 1e-6,
            seed: 7,
        };
        let big = perturb(&target(8), &spec).unwrap();
        let small = perturb(&target(8).truncated(4).unwrap(), &spec).unwrap();
        for k in 0..=4 {
            for l in 0..=4 {
                let eps_big = big.get(k, l).unwrap() - target(8).get(k, l).unwrap();
                let eps_small = small.get(k, l).unwrap() - target(4).get(k, l).unwrap();
                assert_ne!(eps_big, eps_small, "k={k} l={l}");
            }
        }
        let again = perturb(&target(8), &spec).unwrap();
        assert_eq!(big, again);
    }

    #[test]
    fn rejects_geometric_grids_and_bad_specs() {
        let sq =
            ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let geo = crate::moments::polygon_geometric_moments(&sq, 3);
        let spec = NoisySpec::exact(0);
        assert!(matches!(perturb(&geo, &spec), Err(Error::KindMismatch)));
        let bad = NoisySpec {
            schedule: NoiseSchedule::MeanConsistent,
            epsilon: 0.0,
            scale: 0.01,
            seed: 0,
        };
        assert!(bad.sigma2(4).is_err());
    }

    #[test]
    fn spec_serde_round_trip() {
        let spec = NoisySpec {
            schedule: NoiseSchedule::AsConsistent,
            epsilon: 0.5,
            scale: 0.01,
            seed: 9,
        };
        let js = serde_json::to_string(&spec).unwrap();
        assert!(js.contains("\"as_consistent\""), "{js}");
        let back: NoisySpec = serde_json::from_str(&js).unwrap();
        assert_eq!(spec, back);
    }
}
