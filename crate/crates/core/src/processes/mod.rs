//! Seeded samplers for the process families: Poisson, Bernoulli arrays,
//! uniform points in a window, independent thinning, and renewal processes,
//! plus Palm couplings for the general bound estimator.
//!
//! Samplers take any `Rng`; with a generator obtained from
//! [`SeededStream::rng`](crate::stream::SeededStream::rng) every sampler is a
//! pure function of its inputs and the stream.

mod indicator;
mod palm;
mod renewal;

pub use indicator::{IndicatorBlock, IndicatorLaw, IndicatorModel};
pub use palm::{
    sample_palm_quadruple, FixedPointsCoupling, IndependentPoissonCoupling, IndicatorCoupling,
    PalmCoupling, PalmDraw,
};
pub use renewal::{
    renewal_count, sample_renewal, stationary_delay, GridCdf, Lifetime, RenewalSpec, TimeGrid,
};

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::carrier::{CarrierPoint, Configuration};
use crate::error::{Error, Result};

/// Law of a single point location on the carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocationSampler {
    Uniform,
    Point { at: f64 },
    Interval { low: f64, high: f64 },
}

impl LocationSampler {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Uniform => Ok(()),
            Self::Point { at } => CarrierPoint::new(at).map(|_| ()),
            Self::Interval { low, high } => {
                CarrierPoint::new(low)?;
                CarrierPoint::new(high)?;
                if low > high {
                    return Err(Error::InvalidArgument(format!(
                        "interval [{low}, {high}] is empty"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CarrierPoint {
        let x = match *self {
            Self::Uniform => rng.random::<f64>(),
            Self::Point { at } => at,
            Self::Interval { low, high } => low + (high - low) * rng.random::<f64>(),
        };
        CarrierPoint::new(x.clamp(0.0, 1.0)).expect("clamped into the carrier")
    }
}

/// Poisson process with mean measure `lambda_total * L(location)`.
pub fn sample_poisson_process<R: Rng + ?Sized>(
    lambda_total: f64,
    location: &LocationSampler,
    rng: &mut R,
) -> Result<Configuration> {
    let n = poisson_count(lambda_total, rng)?;
    Ok(Configuration::from_raw(
        (0..n).map(|_| (location.sample(rng), 1)).collect(),
    ))
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidIntensity(lambda));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(lambda).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(d.sample(rng) as u64)
}

/// Bernoulli array `sum_i I_i delta_{U_i}` with independent indicators.
pub fn sample_bernoulli_process<R: Rng + ?Sized>(
    model: &IndicatorModel,
    rng: &mut R,
) -> Result<Configuration> {
    if !model.is_independent() {
        return Err(Error::InvalidModel(
            "Bernoulli sampler needs independent indicators (A_i = {i})".into(),
        ));
    }
    let mut atoms = Vec::new();
    for (i, &p) in model.p().iter().enumerate() {
        let hit = rng.random::<f64>() < p;
        let x = model.position(i).sample(rng);
        if hit {
            atoms.push((x, 1));
        }
    }
    Ok(Configuration::from_raw(atoms))
}

/// `n` points thrown uniformly on `[0, n]`, restricted to the window `[0, T]`
/// and rescaled onto the carrier.
pub fn sample_uniform_points_restriction<R: Rng + ?Sized>(
    n: u64,
    window: f64,
    rng: &mut R,
) -> Result<Configuration> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one point".into()));
    }
    if !(window > 0.0) || window > n as f64 {
        return Err(Error::InvalidArgument(format!(
            "window length {window} must lie in (0, {n}]"
        )));
    }
    let mut atoms = Vec::new();
    for _ in 0..n {
        let x = rng.random::<f64>() * n as f64;
        if x < window {
            atoms.push((CarrierPoint::new(x / window)?, 1));
        }
    }
    Ok(Configuration::from_raw(atoms))
}

/// Independent thinning: each unit of mass kept with probability `p`.
pub fn thin<R: Rng + ?Sized>(c: &Configuration, p: f64, rng: &mut R) -> Result<Configuration> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let atoms = c
        .atoms()
        .iter()
        .map(|&(x, m)| {
            let kept = if m == 1 {
                u64::from(rng.random::<f64>() < p)
            } else {
                Binomial::new(m, p).expect("p checked").sample(rng)
            };
            (x, kept)
        })
        .collect();
    Ok(Configuration::from_raw(atoms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count_dist::{
        binomial_counts, empirical_counts, poisson_binomial_counts, poisson_counts, tv_distance,
        DEFAULT_BOOTSTRAP,
    };
    use crate::stream::SeededStream;

    fn within_bootstrap(samples: &[u64], exact: &crate::count_dist::CountDistribution, seed: u64) {
        let emp = empirical_counts(samples).unwrap();
        let hw = emp.tv_halfwidth(DEFAULT_BOOTSTRAP, SeededStream::derive(seed, &[99]));
        let tv = tv_distance(emp.distribution(), exact).value;
        assert!(tv <= hw, "tv {tv} exceeds bootstrap half-width {hw}");
    }

    #[test]
    fn poisson_process_examples() {
        let mut rng = SeededStream::new(1, 0).rng();
        for _ in 0..100 {
            assert!(sample_poisson_process(0.0, &LocationSampler::Uniform, &mut rng)
                .unwrap()
                .is_empty());
        }
        assert!(sample_poisson_process(-1.0, &LocationSampler::Uniform, &mut rng).is_err());

        let counts: Vec<u64> = (0..100_000)
            .map(|_| {
                sample_poisson_process(4.0, &LocationSampler::Uniform, &mut rng)
                    .unwrap()
                    .total_mass()
            })
            .collect();
        within_bootstrap(&counts, &poisson_counts(4.0).unwrap(), 2);

        let s = SeededStream::new(5, 9);
        let a = sample_poisson_process(3.0, &LocationSampler::Uniform, &mut s.rng()).unwrap();
        let b = sample_poisson_process(3.0, &LocationSampler::Uniform, &mut s.rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bernoulli_process_examples() {
        let mut rng = SeededStream::new(3, 0).rng();
        let all = IndicatorModel::bernoulli(vec![1.0; 3]).unwrap();
        let c = sample_bernoulli_process(&all, &mut rng).unwrap();
        assert_eq!(
            c,
            Configuration::new([(1.0 / 3.0, 1), (2.0 / 3.0, 1), (1.0, 1)]).unwrap()
        );
        let none = IndicatorModel::bernoulli(vec![0.0; 5]).unwrap();
        assert!(sample_bernoulli_process(&none, &mut rng).unwrap().is_empty());

        let p = vec![0.1; 10];
        let m = IndicatorModel::bernoulli(p.clone()).unwrap();
        let counts: Vec<u64> = (0..100_000)
            .map(|_| sample_bernoulli_process(&m, &mut rng).unwrap().total_mass())
            .collect();
        within_bootstrap(&counts, &poisson_binomial_counts(&p).unwrap(), 4);

        let dep = IndicatorModel::comonotone_pair(0.3, [0.25, 0.75]).unwrap();
        assert!(sample_bernoulli_process(&dep, &mut rng).is_err());
    }

    #[test]
    fn uniform_restriction_examples() {
        let mut rng = SeededStream::new(11, 0).rng();
        for _ in 0..50 {
            let c = sample_uniform_points_restriction(20, 20.0, &mut rng).unwrap();
            assert_eq!(c.total_mass(), 20);
        }
        assert!(sample_uniform_points_restriction(5, 6.0, &mut rng).is_err());
        assert!(sample_uniform_points_restriction(5, 0.0, &mut rng).is_err());

        let counts: Vec<u64> = (0..100_000)
            .map(|_| {
                sample_uniform_points_restriction(100, 10.0, &mut rng)
                    .unwrap()
                    .total_mass()
            })
            .collect();
        within_bootstrap(&counts, &binomial_counts(100, 0.1).unwrap(), 12);

        let s = SeededStream::new(13, 1);
        assert_eq!(
            sample_uniform_points_restriction(50, 7.5, &mut s.rng()).unwrap(),
            sample_uniform_points_restriction(50, 7.5, &mut s.rng()).unwrap()
        );
    }

    #[test]
    fn thinning_examples() {
        let mut rng = SeededStream::new(21, 0).rng();
        let base = Configuration::new([(0.1, 3), (0.4, 1), (0.8, 2)]).unwrap();
        assert_eq!(thin(&base, 1.0, &mut rng).unwrap(), base);
        assert!(thin(&base, 0.0, &mut rng).unwrap().is_empty());
        assert!(thin(&base, 1.5, &mut rng).is_err());

        let big = Configuration::from_points((0..10_000).map(|k| k as f64 / 10_000.0)).unwrap();
        let reps = 10_000;
        let total: u64 = (0..reps)
            .map(|_| thin(&big, 0.3, &mut rng).unwrap().total_mass())
            .sum();
        let mean = total as f64 / reps as f64;
        // sd of the mean of Binomial(1e4, 0.3) over 1e4 reps
        let sd = (10_000.0f64 * 0.3 * 0.7).sqrt() / (reps as f64).sqrt();
        assert!((mean - 3000.0).abs() < 3.0 * sd, "mean {mean}");
    }

    #[test]
    fn thinning_scales_mean_measure() {
        let mut rng = SeededStream::new(22, 0).rng();
        let reps = 100_000;
        let mut kept = Vec::with_capacity(reps);
        for _ in 0..reps {
            let c = sample_poisson_process(2.0, &LocationSampler::Uniform, &mut rng).unwrap();
            kept.push(thin(&c, 0.4, &mut rng).unwrap().total_mass() as f64);
        }
        let mean = kept.iter().sum::<f64>() / reps as f64;
        let var = kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((mean - 0.8).abs() < 3.0 * (var / reps as f64).sqrt());
    }
}
