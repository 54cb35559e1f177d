//! Lifetime distributions and delayed renewal processes on `[0, T]`.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::carrier::{CarrierPoint, Configuration};
use crate::error::{Error, Result};

/// Right-continuous step CDF on the uniform grid `t_k = k * step`:
/// `F(t) = cdf[k]` for `t in [t_k, t_{k+1})`, and `cdf[last]` beyond the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCdf {
    pub step: f64,
    pub cdf: Vec<f64>,
}

impl GridCdf {
    pub fn new(step: f64, cdf: Vec<f64>) -> Result<Self> {
        let g = Self { step, cdf };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidDistribution("grid step must be positive".into()));
        }
        if self.cdf.is_empty() {
            return Err(Error::InvalidDistribution("empty grid".into()));
        }
        let mut prev = 0.0;
        for &v in &self.cdf {
            if !(v >= prev) || v > 1.0 {
                return Err(Error::InvalidDistribution(
                    "grid CDF must be non-decreasing within [0, 1]".into(),
                ));
            }
            prev = v;
        }
        Ok(())
    }

    /// Reads a two-column `t,F(t)` CSV on a uniform grid starting at zero.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |s: Option<&str>| s.and_then(|s| s.parse::<f64>().ok());
            match (parse(rec.get(0)), parse(rec.get(1))) {
                (Some(t), Some(f)) => rows.push((t, f)),
                // header line
                _ if rows.is_empty() => continue,
                _ => return Err(Error::InvalidDistribution("malformed CDF row".into())),
            }
        }
        if rows.len() < 2 {
            return Err(Error::InvalidDistribution("CDF needs at least two rows".into()));
        }
        if rows[0].0.abs() > 1e-12 {
            return Err(Error::InvalidDistribution("CDF grid must start at t = 0".into()));
        }
        let step = rows[1].0 - rows[0].0;
        for (k, &(t, _)) in rows.iter().enumerate() {
            if (t - k as f64 * step).abs() > 1e-9 * (1.0 + t.abs()) {
                return Err(Error::InvalidDistribution("CDF grid is not uniform".into()));
            }
        }
        Self::new(step, rows.into_iter().map(|(_, f)| f).collect())
    }

    pub fn end(&self) -> f64 {
        self.step * (self.cdf.len() - 1) as f64
    }

    fn index(&self, t: f64) -> usize {
        let k = (t / self.step * (1.0 + 1e-12) + 1e-9).floor();
        (k.max(0.0) as usize).min(self.cdf.len() - 1)
    }
}

/// Distribution of a non-negative waiting time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lifetime {
    Exponential { rate: f64 },
    Deterministic { at: f64 },
    Uniform { low: f64, high: f64 },
    /// Never occurs: `F(t) = 0` for all `t`.
    Never,
    Grid(GridCdf),
}

impl Lifetime {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidDistribution(m.into()));
        match self {
            Self::Exponential { rate } if !(*rate > 0.0 && rate.is_finite()) => {
                bad("exponential rate must be positive")
            }
            Self::Deterministic { at } if !(*at >= 0.0 && at.is_finite()) => {
                bad("deterministic time must be non-negative")
            }
            Self::Uniform { low, high } if !(*low >= 0.0 && low < high && high.is_finite()) => {
                bad("uniform needs 0 <= low < high")
            }
            Self::Grid(g) => g.validate(),
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { rate } => -(-rate * t).exp_m1(),
            Self::Deterministic { at } => f64::from(u8::from(t >= *at)),
            Self::Uniform { low, high } => ((t - low) / (high - low)).clamp(0.0, 1.0),
            Self::Never => 0.0,
            Self::Grid(g) => g.cdf[g.index(t)],
        }
    }

    /// Mean waiting time; infinite for [`Lifetime::Never`] and for grids with
    /// mass beyond their end.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Deterministic { at } => *at,
            Self::Uniform { low, high } => 0.5 * (low + high),
            Self::Never => f64::INFINITY,
            Self::Grid(g) => {
                if *g.cdf.last().expect("non-empty") < 1.0 {
                    return f64::INFINITY;
                }
                g.cdf.iter().map(|f| (1.0 - f) * g.step).sum()
            }
        }
    }

    /// Inverse-CDF draw (left-continuous inverse for grids). Returns
    /// `f64::INFINITY` for mass that never occurs.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential { rate } => Exp::new(*rate).expect("validated").sample(rng),
            Self::Deterministic { at } => *at,
            Self::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Self::Never => f64::INFINITY,
            Self::Grid(g) => {
                // u in (0, 1]
                let u = 1.0 - rng.random::<f64>();
                let k = g.cdf.partition_point(|&c| c < u);
                if k == g.cdf.len() {
                    f64::INFINITY
                } else {
                    k as f64 * g.step
                }
            }
        }
    }
}

/// Uniform time grid `0, step, ..., step * intervals`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub step: f64,
    pub intervals: usize,
}

impl TimeGrid {
    pub fn new(step: f64, intervals: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() || intervals == 0 {
            return Err(Error::InvalidArgument("grid needs step > 0 and one interval".into()));
        }
        Ok(Self { step, intervals })
    }

    /// Grid on `[0, horizon]`; `step` must divide `horizon`.
    pub fn covering(horizon: f64, step: f64) -> Result<Self> {
        let ratio = horizon / step;
        let m = ratio.round();
        if !(m >= 1.0) || (ratio - m).abs() > 1e-9 * m {
            return Err(Error::InvalidArgument(format!(
                "step {step} does not divide horizon {horizon}"
            )));
        }
        Self::new(step, m as usize)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.time(self.intervals)
    }
}

/// Delay law `G(t) = int_0^t (1 - F(s)) ds / mean(F)` that makes the renewal
/// process stationary.
///
/// Exponential and deterministic inter-arrival laws map to closed forms; any
/// other law is returned as a [`GridCdf`], exact at the nodes of `grid` (or of
/// `F`'s own grid).
pub fn stationary_delay(inter_arrival: &Lifetime, grid: TimeGrid) -> Result<Lifetime> {
    inter_arrival.validate()?;
    match inter_arrival {
        Lifetime::Exponential { .. } => Ok(inter_arrival.clone()),
        Lifetime::Deterministic { at } if *at > 0.0 => Ok(Lifetime::Uniform { low: 0.0, high: *at }),
        Lifetime::Deterministic { .. } => Err(Error::InvalidDistribution(
            "zero inter-arrival time has no stationary version".into(),
        )),
        Lifetime::Never => Err(Error::InvalidDistribution(
            "inter-arrival law has infinite mean".into(),
        )),
        Lifetime::Uniform { low, high } => {
            let (l, h) = (*low, *high);
            let mean = 0.5 * (l + h);
            // closed-form integral of the survival function
            let integral = |t: f64| {
                if t <= l {
                    t
                } else if t < h {
                    l + ((h - l).powi(2) - (h - t).powi(2)) / (2.0 * (h - l))
                } else {
                    mean
                }
            };
            let cdf = (0..=grid.intervals)
                .map(|k| (integral(grid.time(k)) / mean).min(1.0))
                .collect();
            Ok(Lifetime::Grid(GridCdf::new(grid.step, cdf)?))
        }
        Lifetime::Grid(g) => {
            let truncated = 1.0 - g.cdf.last().expect("non-empty");
            if truncated > 1e-6 {
                return Err(Error::InvalidDistribution(format!(
                    "survival {truncated:e} at the end of the grid: mean not resolved"
                )));
            }
            let mean: f64 = g.cdf.iter().map(|f| (1.0 - f) * g.step).sum();
            if !(mean > 0.0) {
                return Err(Error::InvalidDistribution("inter-arrival mean is zero".into()));
            }
            let mut acc = 0.0;
            let mut cdf = Vec::with_capacity(g.cdf.len());
            for f in &g.cdf {
                cdf.push((acc / mean).min(1.0));
                acc += (1.0 - f) * g.step;
            }
            Ok(Lifetime::Grid(GridCdf::new(g.step, cdf)?))
        }
    }
}

/// Delayed renewal process observed on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalSpec {
    pub inter_arrival: Lifetime,
    pub delay: Lifetime,
    pub horizon: f64,
}

impl RenewalSpec {
    pub fn new(inter_arrival: Lifetime, delay: Lifetime, horizon: f64) -> Result<Self> {
        let s = Self { inter_arrival, delay, horizon };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.inter_arrival.validate()?;
        self.delay.validate()?;
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if self.inter_arrival.cdf(0.0) >= 1.0 {
            return Err(Error::InvalidDistribution(
                "inter-arrival times are zero almost surely".into(),
            ));
        }
        Ok(())
    }

    /// `F(T)`.
    pub fn f_at_horizon(&self) -> f64 {
        self.inter_arrival.cdf(self.horizon)
    }

    /// `G(T)`.
    pub fn g_at_horizon(&self) -> f64 {
        self.delay.cdf(self.horizon)
    }
}

fn for_each_epoch<R: Rng + ?Sized>(spec: &RenewalSpec, rng: &mut R, mut visit: impl FnMut(f64)) {
    let mut t = spec.delay.sample(rng);
    while t <= spec.horizon {
        visit(t);
        t += spec.inter_arrival.sample(rng);
    }
}

/// Renewal epochs `eta, eta + xi_1, ...` in `[0, T]`, rescaled by `1/T`.
pub fn sample_renewal<R: Rng + ?Sized>(spec: &RenewalSpec, rng: &mut R) -> Result<Configuration> {
    spec.validate()?;
    let mut atoms = Vec::new();
    let mut res = Ok(());
    for_each_epoch(spec, rng, |t| match CarrierPoint::new(t / spec.horizon) {
        Ok(x) => atoms.push((x, 1)),
        Err(e) => res = Err(e),
    });
    res?;
    Ok(Configuration::from_raw(atoms))
}

/// `N_T` alone, consuming the same random draws as [`sample_renewal`].
pub fn renewal_count<R: Rng + ?Sized>(spec: &RenewalSpec, rng: &mut R) -> u64 {
    let mut n = 0;
    for_each_epoch(spec, rng, |_| n += 1);
    n
}
