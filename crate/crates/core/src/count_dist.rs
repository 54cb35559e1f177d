//! Exact and empirical laws of total counts `|Xi|`, and total variation
//! between them.
//!
//! The total variation between count laws is exactly the `dtv` pseudometric
//! between point process laws, since its test functions only see `|xi|`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::stream::SeededStream;

/// Tail mass left beyond the stored support at default truncation.
pub const DEFAULT_TAIL: f64 = 1e-13;

/// Probability mass function on `{0, 1, ...}` stored up to a cutoff, with a
/// bound on the mass beyond it.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    pmf: Vec<f64>,
    tail_bound: f64,
}

/// Total variation value with an error bar from truncated tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvDistance {
    pub value: f64,
    pub error_bar: f64,
}

impl CountDistribution {
    /// Wraps a pmf. Entries must be non-negative and, with `tail_bound`, sum to
    /// one within `1e-12`.
    pub fn new(pmf: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if pmf.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || !(tail_bound >= 0.0) {
            return Err(Error::InvalidDistribution("negative or non-finite mass".into()));
        }
        let total: f64 = pmf.iter().sum::<f64>() + tail_bound;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { pmf, tail_bound })
    }

    pub fn point_mass(k: usize) -> Self {
        let mut pmf = vec![0.0; k + 1];
        pmf[k] = 1.0;
        Self { pmf, tail_bound: 0.0 }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// `P(X = k)`; zero beyond the stored support.
    pub fn prob(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn support_len(&self) -> usize {
        self.pmf.len()
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.pmf
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - m).powi(2) * p)
            .sum()
    }

    /// CSV with columns `k,pmf` and a final `tail_bound,<value>` row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "pmf"])?;
        for (k, p) in self.pmf.iter().enumerate() {
            w.write_record([k.to_string(), p.to_string()])?;
        }
        w.write_record(["tail_bound".to_string(), self.tail_bound.to_string()])?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut pmf = Vec::new();
        let mut tail = None;
        for rec in r.records() {
            let rec = rec?;
            let (key, val) = (rec.get(0).unwrap_or(""), rec.get(1).unwrap_or(""));
            let val: f64 = val
                .trim()
                .parse()
                .map_err(|_| Error::InvalidDistribution(format!("bad value {val:?}")))?;
            if key.trim() == "tail_bound" {
                tail = Some(val);
                continue;
            }
            let k: usize = key
                .trim()
                .parse()
                .map_err(|_| Error::InvalidDistribution(format!("bad index {key:?}")))?;
            if k != pmf.len() {
                return Err(Error::InvalidDistribution("indices must run 0, 1, ...".into()));
            }
            pmf.push(val);
        }
        let tail =
            tail.ok_or_else(|| Error::InvalidDistribution("missing tail_bound row".into()))?;
        Self::new(pmf, tail)
    }
}

/// Poisson(`lambda`) count law truncated where the tail drops below
/// [`DEFAULT_TAIL`].
pub fn poisson_counts(lambda: f64) -> Result<CountDistribution> {
    check_intensity(lambda)?;
    if lambda == 0.0 {
        return Ok(CountDistribution::point_mass(0));
    }
    let mut k = lambda.ceil() as usize;
    loop {
        let d = poisson_counts_upto(lambda, k)?;
        if d.tail_bound <= DEFAULT_TAIL {
            return Ok(d);
        }
        k += 1 + k / 8;
    }
}

/// Poisson(`lambda`) pmf on `0..=max_k`. Stored entries do not depend on
/// `max_k`; only the tail bound does.
pub fn poisson_counts_upto(lambda: f64, max_k: usize) -> Result<CountDistribution> {
    check_intensity(lambda)?;
    if lambda == 0.0 {
        let mut pmf = vec![0.0; max_k + 1];
        pmf[0] = 1.0;
        return Ok(CountDistribution { pmf, tail_bound: 0.0 });
    }
    // anchor at the mode, then recur outwards; this keeps the relative error
    // of every entry near machine precision even for large lambda
    let mode = lambda.floor() as usize;
    let len = max_k.max(mode) + 2;
    let mut all = vec![0.0; len];
    all[mode] = (mode as f64 * lambda.ln() - lambda - ln_factorial(mode)).exp();
    for k in mode + 1..len {
        all[k] = all[k - 1] * lambda / k as f64;
    }
    for k in (0..mode).rev() {
        all[k] = all[k + 1] * (k + 1) as f64 / lambda;
    }
    let next = all[max_k + 1];
    all.truncate(max_k + 1);
    let pmf = all;
    let ratio = lambda / (max_k + 2) as f64;
    let tail_bound = if ratio < 1.0 {
        // geometric domination of the terms beyond max_k
        next / (1.0 - ratio)
    } else {
        (1.0 - pmf.iter().sum::<f64>()).max(0.0)
    };
    Ok(CountDistribution {
        pmf,
        tail_bound: tail_bound.min(1.0),
    })
}

fn ln_factorial(n: usize) -> f64 {
    if n < 20 {
        return (2..=n).map(|k| (k as f64).ln()).sum();
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

fn check_intensity(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidIntensity(lambda));
    }
    Ok(())
}

/// Law of `sum_i I_i` for independent `I_i ~ Bernoulli(p_i)`, by exact
/// convolution.
pub fn poisson_binomial_counts(p: &[f64]) -> Result<CountDistribution> {
    if let Some(&bad) = p.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidProbability(bad));
    }
    let mut pmf = vec![0.0; p.len() + 1];
    pmf[0] = 1.0;
    for (n, &q) in p.iter().enumerate() {
        for k in (1..=n + 1).rev() {
            pmf[k] = pmf[k] * (1.0 - q) + pmf[k - 1] * q;
        }
        pmf[0] *= 1.0 - q;
    }
    Ok(CountDistribution { pmf, tail_bound: 0.0 })
}

pub fn binomial_counts(n: usize, p: f64) -> Result<CountDistribution> {
    poisson_binomial_counts(&vec![p; n])
}

/// `1/2 sum_k |a_k - b_k|`, with the truncated tails reported as error bar.
pub fn tv_distance(a: &CountDistribution, b: &CountDistribution) -> TvDistance {
    let len = a.pmf.len().max(b.pmf.len());
    let sum: f64 = (0..len).map(|k| (a.prob(k) - b.prob(k)).abs()).sum();
    TvDistance {
        value: (0.5 * sum).min(1.0),
        error_bar: 0.5 * (a.tail_bound + b.tail_bound),
    }
}

/// Empirical count law from Monte Carlo samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCounts {
    dist: CountDistribution,
    histogram: Vec<u64>,
    samples: u64,
}

/// Number of bootstrap resamples used by [`EmpiricalCounts::tv_halfwidth`] by
/// default.
pub const DEFAULT_BOOTSTRAP: usize = 1000;

pub fn empirical_counts(samples: &[u64]) -> Result<EmpiricalCounts> {
    let max = *samples.iter().max().ok_or(Error::EmptySample)?;
    let mut histogram = vec![0u64; max as usize + 1];
    for &s in samples {
        histogram[s as usize] += 1;
    }
    EmpiricalCounts::from_histogram(histogram)
}

impl EmpiricalCounts {
    pub fn from_histogram(mut histogram: Vec<u64>) -> Result<Self> {
        while histogram.len() > 1 && histogram.last() == Some(&0) {
            histogram.pop();
        }
        let samples: u64 = histogram.iter().sum();
        if samples == 0 {
            return Err(Error::EmptySample);
        }
        let pmf = histogram.iter().map(|&c| c as f64 / samples as f64).collect();
        Ok(Self {
            dist: CountDistribution { pmf, tail_bound: 0.0 },
            histogram,
            samples,
        })
    }

    pub fn distribution(&self) -> &CountDistribution {
        &self.dist
    }

    pub fn histogram(&self) -> &[u64] {
        &self.histogram
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Bootstrap half-width for TV computed from this sample: the 99th
    /// percentile, over `resamples` multinomial resamples, of the TV between
    /// a resample and the point estimate.
    pub fn tv_halfwidth(&self, resamples: usize, stream: SeededStream) -> f64 {
        if resamples == 0 {
            return 0.0;
        }
        let mut rng = stream.rng();
        let mut tvs: Vec<f64> = (0..resamples)
            .map(|_| {
                let counts = multinomial(&mut rng, self.samples, &self.dist.pmf);
                let n = self.samples as f64;
                let sum: f64 = counts
                    .iter()
                    .zip(&self.dist.pmf)
                    .map(|(&c, &p)| (c as f64 / n - p).abs())
                    .sum();
                0.5 * sum
            })
            .collect();
        tvs.sort_by(f64::total_cmp);
        let idx = ((0.99 * resamples as f64).ceil() as usize).clamp(1, resamples) - 1;
        tvs[idx]
    }
}

/// Multinomial draw via sequential conditional binomials.
fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0f64;
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() || mass <= 0.0 {
            out[k] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let c = Binomial::new(left, q).expect("q in [0,1]").sample(rng);
        out[k] = c;
        left -= c;
        mass -= p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_distr::Poisson;

    #[test]
    fn poisson_examples() {
        let d = poisson_counts(0.0).unwrap();
        assert_eq!(d.pmf(), &[1.0]);
        let d = poisson_counts(1.0).unwrap();
        assert_abs_diff_eq!(d.prob(1), (-1.0f64).exp(), epsilon = 1e-15);
        assert!(d.tail_bound() < 1e-12);
        let d = poisson_counts(5.0).unwrap();
        assert_abs_diff_eq!(d.mean(), 5.0, epsilon = 1e-10);
        assert!(d.tail_bound() < 1e-12);
        assert!(poisson_counts(-1.0).is_err());
        assert!(poisson_counts(f64::NAN).is_err());
    }

    #[test]
    fn poisson_large_lambda_sums_to_one() {
        let d = poisson_counts(2500.0).unwrap();
        let total: f64 = d.pmf().iter().sum::<f64>() + d.tail_bound();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.mean(), 2500.0, epsilon = 1e-7);
    }

    #[test]
    fn truncation_is_monotone() {
        let short = poisson_counts_upto(3.0, 10).unwrap();
        let long = poisson_counts_upto(3.0, 25).unwrap();
        assert_eq!(&long.pmf()[..11], short.pmf());
        assert!(long.tail_bound() < short.tail_bound());
    }

    #[test]
    fn poisson_binomial_examples() {
        assert_eq!(poisson_binomial_counts(&[0.5, 0.5]).unwrap().pmf(), &[0.25, 0.5, 0.25]);
        assert_eq!(poisson_binomial_counts(&[1.0]).unwrap().pmf(), &[0.0, 1.0]);
        assert!(matches!(
            poisson_binomial_counts(&[0.5, 1.2]),
            Err(Error::InvalidProbability(_))
        ));
    }

    #[test]
    fn poisson_binomial_matches_enumeration() {
        let p = [0.1; 10];
        let mut oracle = [0.0; 11];
        for mask in 0u32..1 << 10 {
            let mut prob = 1.0;
            for (i, &pi) in p.iter().enumerate() {
                prob *= if mask >> i & 1 == 1 { pi } else { 1.0 - pi };
            }
            oracle[mask.count_ones() as usize] += prob;
        }
        let dp = poisson_binomial_counts(&p).unwrap();
        for (k, &want) in oracle.iter().enumerate() {
            assert_abs_diff_eq!(dp.prob(k), want, epsilon = 1e-15);
        }
    }

    #[test]
    fn tv_examples() {
        let po1 = poisson_counts(1.0).unwrap();
        assert_eq!(tv_distance(&po1, &po1).value, 0.0);

        // oracle: direct sum with the point mass at one
        let e = (-1.0f64).exp();
        let mut oracle = (1.0 - e).abs();
        let mut fact = 1.0;
        for k in 0..60 {
            if k > 0 {
                fact *= k as f64;
            }
            if k != 1 {
                oracle += e / fact;
            }
        }
        let tv = tv_distance(&CountDistribution::point_mass(1), &po1);
        assert_abs_diff_eq!(tv.value, 0.5 * oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(tv.value, 1.0 - e, epsilon = 1e-12);
        assert!(tv.error_bar < 1e-12);

        let pb = poisson_binomial_counts(&[0.1; 10]).unwrap();
        let tv = tv_distance(&pb, &po1).value;
        assert!(tv > 0.0 && tv <= (1.0 - e) * 0.1);
    }

    #[test]
    fn empirical_examples() {
        let d = empirical_counts(&[2, 2, 2]).unwrap();
        assert_eq!(d.distribution().pmf(), &[0.0, 0.0, 1.0]);
        let d = empirical_counts(&[0, 1]).unwrap();
        assert_eq!(d.distribution().pmf(), &[0.5, 0.5]);
        assert!(matches!(empirical_counts(&[]), Err(Error::EmptySample)));
    }

    #[test]
    fn bootstrap_halfwidth_covers_sampling_noise() {
        let exact = poisson_counts(3.0).unwrap();
        let po = Poisson::new(3.0).unwrap();
        let mut covered = 0;
        for rep in 0..100u64 {
            let mut rng = SeededStream::derive(7, &[rep]).rng();
            let draws: Vec<u64> = (0..100_000).map(|_| po.sample(&mut rng) as u64).collect();
            let emp = empirical_counts(&draws).unwrap();
            let hw = emp.tv_halfwidth(DEFAULT_BOOTSTRAP, SeededStream::derive(8, &[rep]));
            if tv_distance(emp.distribution(), &exact).value <= hw {
                covered += 1;
            }
        }
        assert!(covered >= 95, "covered {covered}/100");
    }

    #[test]
    fn csv_round_trip() {
        let d = poisson_counts(0.7).unwrap();
        let text = d.to_csv().unwrap();
        assert!(text.starts_with("k,pmf\n0,"));
        assert!(text.trim_end().lines().last().unwrap().starts_with("tail_bound,"));
        assert_eq!(CountDistribution::from_csv(&text).unwrap(), d);
        assert!(CountDistribution::from_csv("k,pmf\n0,1\n").is_err());
    }

    fn arb_pmf() -> impl Strategy<Value = CountDistribution> {
        prop::collection::vec(0.0f64..1.0, 1..8).prop_filter_map("zero mass", |w| {
            let s: f64 = w.iter().sum();
            (s > 0.0).then(|| {
                let pmf: Vec<f64> = w.iter().map(|x| x / s).collect();
                let tail = (1.0 - pmf.iter().sum::<f64>()).max(0.0);
                CountDistribution::new(pmf, tail).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn tv_is_metric(a in arb_pmf(), b in arb_pmf(), c in arb_pmf()) {
            let ab = tv_distance(&a, &b).value;
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - tv_distance(&b, &a).value).abs() < 1e-15);
            prop_assert!(ab <= tv_distance(&a, &c).value + tv_distance(&c, &b).value + 1e-12);
            prop_assert_eq!(tv_distance(&a, &a).value, 0.0);
        }

        #[test]
        fn poisson_binomial_mean_is_sum(p in prop::collection::vec(0.0f64..=1.0, 0..40)) {
            let d = poisson_binomial_counts(&p).unwrap();
            let total: f64 = d.pmf().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!((d.mean() - p.iter().sum::<f64>()).abs() < 1e-12);
        }
    }
}
