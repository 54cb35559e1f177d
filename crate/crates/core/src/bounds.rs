//! Error bounds for Poisson process approximation of `Xi = sum_i Xi_i`.
//!
//! Every evaluator returns a [`BoundReport`]: `value = leading_factor *
//! sum(terms)`, with one term per component (or per summand). Monte Carlo
//! evaluators also report a standard error.
//!
//! Stein factors: `(1 - e^{-lambda}) / lambda` for counts, `1` for the
//! process total variation, and `3.5/lambda + 2.5/(|far| + 1)` for the
//! Wasserstein-type distance `d2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::carrier::variation_norm_diff;
use crate::error::{Error, Result};
use crate::matching::d1_prime;
use crate::par::{map_items, BATCH_SIZE};
use crate::processes::{IndicatorModel, PalmCoupling, RenewalSpec};
use crate::renewal_kit::RenewalSolution;
use crate::stream::SeededStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    /// Total variation between the laws of the total counts.
    #[serde(rename = "dtv")]
    Dtv,
    /// Wasserstein distance built on `d1`.
    #[serde(rename = "d2")]
    D2,
    /// Total variation between process laws.
    #[serde(rename = "dTV")]
    DTv,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Dtv, Metric::D2, Metric::DTv];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Dtv => "dtv",
            Metric::D2 => "d2",
            Metric::DTv => "dTV",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtv" => Ok(Metric::Dtv),
            "d2" => Ok(Metric::D2),
            "dTV" | "TV" => Ok(Metric::DTv),
            _ => Err(Error::InvalidArgument(format!(
                "unknown metric {s:?} (expected dtv, d2 or dTV)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub label: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub formula_id: String,
    pub metric: Metric,
    pub value: f64,
    pub leading_factor: f64,
    pub terms: Vec<BoundTerm>,
    pub mc_stderr: Option<f64>,
    /// `value > 1`; all three distances are at most one.
    pub vacuous: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_verified: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpretation: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub const CSV_HEADER: &str = "formula_id,metric,value,leading_factor,terms,mc_stderr,vacuous";

impl BoundReport {
    fn new(metric: Metric, formula_id: &str, leading_factor: f64, terms: Vec<BoundTerm>) -> Self {
        let value = leading_factor * terms.iter().map(|t| t.value).sum::<f64>();
        Self {
            formula_id: formula_id.to_string(),
            metric,
            value,
            leading_factor,
            terms,
            mc_stderr: None,
            vacuous: value > 1.0,
            coupling_verified: None,
            interpretation: None,
            notes: Vec::new(),
        }
    }

    fn zero(metric: Metric, formula_id: &str) -> Self {
        Self::new(metric, formula_id, 1.0, Vec::new())
    }

    fn with_stderr(mut self) -> Self {
        let var: f64 = self
            .terms
            .iter()
            .filter_map(|t| t.stderr)
            .map(|s| s * s)
            .sum();
        self.mc_stderr = Some(self.leading_factor * var.sqrt());
        self
    }

    fn scaled(mut self, p: f64) -> Self {
        self.leading_factor *= p;
        self.value = self.leading_factor * self.terms.iter().map(|t| t.value).sum::<f64>();
        self.vacuous = self.value > 1.0;
        self.mc_stderr = self.mc_stderr.map(|s| s * p);
        self
    }

    /// One CSV row matching [`CSV_HEADER`].
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.formula_id,
            self.metric,
            self.value,
            self.leading_factor,
            self.terms.len(),
            self.mc_stderr.map(|s| s.to_string()).unwrap_or_default(),
            self.vacuous
        )
    }
}

fn term(label: impl Into<String>, value: f64) -> BoundTerm {
    BoundTerm { label: label.into(), value, stderr: None }
}

/// `(1 - e^{-lambda}) / lambda`, with its limit 1 at zero.
pub fn count_stein_factor(lambda: f64) -> f64 {
    if lambda == 0.0 {
        1.0
    } else {
        -(-lambda).exp_m1() / lambda
    }
}

fn leading_for(metric: Metric, lambda: f64) -> f64 {
    match metric {
        Metric::Dtv => count_stein_factor(lambda),
        _ => 1.0,
    }
}

/// `3.5/lambda + 2.5 (sqrt(k(1 + k/4)) + 1 + k/2) / (mass + 1)`.
fn d2_moment_factor(lambda: f64, kappa: f64, far_mass: f64) -> f64 {
    3.5 / lambda + 2.5 * ((kappa * (1.0 + kappa / 4.0)).sqrt() + 1.0 + kappa / 2.0) / (far_mass + 1.0)
}

fn check_replicates(replicates: u64) -> Result<()> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    Ok(())
}

/// Running sums for a fixed number of Monte Carlo quantities.
#[derive(Debug, Clone)]
struct Sums {
    n: u64,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Sums {
    fn new(k: usize) -> Self {
        Self { n: 0, sum: vec![0.0; k], sq: vec![0.0; k] }
    }

    fn push(&mut self, xs: &[f64]) {
        self.n += 1;
        for (k, &x) in xs.iter().enumerate() {
            self.sum[k] += x;
            self.sq[k] += x * x;
        }
    }

    fn merge(&mut self, o: &Sums) {
        self.n += o.n;
        for k in 0..self.sum.len() {
            self.sum[k] += o.sum[k];
            self.sq[k] += o.sq[k];
        }
    }

    fn mean(&self, k: usize) -> f64 {
        self.sum[k] / self.n as f64
    }

    /// Variance of the sample mean.
    fn var_of_mean(&self, k: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.mean(k);
        ((self.sq[k] - n * m * m) / (n - 1.0)).max(0.0) / n
    }
}

/// Runs `sample(i, rng, &mut sums)` for `replicates` draws of every listed
/// component. Component `i`, batch `b` draws from `stream.child([i, b])`;
/// batches are merged in order.
fn mc_per_component<F>(
    components: &[usize],
    k: usize,
    replicates: u64,
    stream: SeededStream,
    sample: F,
) -> Result<Vec<Sums>>
where
    F: Fn(usize, &mut rand_chacha::ChaCha8Rng, &mut Sums) -> Result<()> + Sync + Send,
{
    let batches = replicates.div_ceil(BATCH_SIZE);
    let jobs: Vec<(usize, u64)> = components
        .iter()
        .flat_map(|&i| (0..batches).map(move |b| (i, b)))
        .collect();
    let results = map_items(&jobs, |_, &(i, b)| -> Result<Sums> {
        let mut rng = stream.child(&[i as u64, b]).rng();
        let mut acc = Sums::new(k);
        let count = BATCH_SIZE.min(replicates - b * BATCH_SIZE);
        for _ in 0..count {
            sample(i, &mut rng, &mut acc)?;
        }
        Ok(acc)
    });
    let results: Vec<Sums> = results.into_iter().collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(components.len());
    for chunk in results.chunks(batches as usize) {
        let mut total = Sums::new(k);
        for r in chunk {
            total.merge(r);
        }
        out.push(total);
    }
    Ok(out)
}

/// Monte Carlo evaluation of the general local-dependence bound for any Palm
/// coupling.
pub fn mc_bound_theorem21(
    pc: &dyn PalmCoupling,
    metric: Metric,
    replicates: u64,
    stream: SeededStream,
) -> Result<BoundReport> {
    check_replicates(replicates)?;
    let lambda = pc.total_mass();
    let id = match metric {
        Metric::Dtv => "palm-mc-dtv",
        Metric::D2 => "palm-mc-d2",
        Metric::DTv => "palm-mc-dTV",
    };
    let active: Vec<usize> = (0..pc.components()).filter(|&i| pc.mean_mass(i) > 0.0).collect();
    if active.is_empty() {
        return Ok(finish_coupling(BoundReport::zero(metric, id).with_stderr(), pc));
    }
    let k = if metric == Metric::D2 { 3 } else { 1 };
    let sums = mc_per_component(&active, k, replicates, stream, |i, rng, acc| {
        let d = pc.draw(i, rng)?;
        match metric {
            Metric::Dtv => {
                let x = d.v.total_mass().abs_diff(d.v_palm.total_mass())
                    + d.xi.total_mass().abs_diff(d.xi_palm.total_mass());
                acc.push(&[x as f64]);
            }
            Metric::DTv => {
                let x = variation_norm_diff(&d.v, &d.v_palm) + variation_norm_diff(&d.xi, &d.xi_palm);
                acc.push(&[x as f64]);
            }
            Metric::D2 => {
                let w = 2.5 / (d.far.total_mass() as f64 + 1.0);
                let y = (3.5 / lambda + w) * d1_prime(&d.v, &d.v_palm);
                acc.push(&[y, w, d1_prime(&d.xi, &d.xi_palm)]);
            }
        }
        Ok(())
    })?;
    let terms = active
        .iter()
        .zip(&sums)
        .map(|(&i, s)| {
            let li = pc.mean_mass(i);
            let (value, var) = if metric == Metric::D2 {
                let (y, w, b) = (s.mean(0), s.mean(1), s.mean(2));
                let c = 3.5 / lambda + w;
                let var = s.var_of_mean(0) + c * c * s.var_of_mean(2) + b * b * s.var_of_mean(1);
                (li * (y + c * b), li * li * var)
            } else {
                (li * s.mean(0), li * li * s.var_of_mean(0))
            };
            BoundTerm { label: format!("component {i}"), value, stderr: Some(var.sqrt()) }
        })
        .collect();
    let report = BoundReport::new(metric, id, leading_for(metric, lambda), terms).with_stderr();
    Ok(finish_coupling(report, pc))
}

fn finish_coupling(mut r: BoundReport, pc: &dyn PalmCoupling) -> BoundReport {
    r.coupling_verified = Some(pc.verified());
    if !pc.verified() {
        r.notes.push(format!(
            "coupling '{}' is user-declared; the bound holds only if it realises the Palm laws",
            pc.name()
        ));
    }
    r
}

/// Per-component count moments for independent components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentMoments {
    /// `lambda_i = E|Xi_i|`.
    pub lambda: f64,
    /// `E|Xi_i|^2`.
    pub second_moment: f64,
    /// `Var|Xi_i|`.
    pub variance: f64,
}

impl ComponentMoments {
    pub fn from_mean_and_second(lambda: f64, second_moment: f64) -> Self {
        Self { lambda, second_moment, variance: second_moment - lambda * lambda }
    }

    pub fn poisson(c: f64) -> Self {
        Self::from_mean_and_second(c, c + c * c)
    }

    pub fn from_renewal(sol: &RenewalSolution) -> Self {
        let lambda = sol.mean_count();
        let second = sol.second_moment();
        Self { lambda, second_moment: second, variance: (second - lambda * lambda).max(0.0) }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidIntensity(self.lambda));
        }
        if !(self.variance >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative variance {}", self.variance)));
        }
        if self.second_moment + 1e-12 < self.lambda * self.lambda {
            return Err(Error::InvalidArgument(format!(
                "E|Xi|^2 = {} is below (E|Xi|)^2 = {}",
                self.second_moment,
                self.lambda * self.lambda
            )));
        }
        Ok(())
    }
}

/// Bound for independent components from count moments. For `d2` the
/// factor is `3.5/lambda + 2.5 (sqrt(k(1+k/4)) + 1 + k/2)/(lambda - max
/// lambda_j + 1)` with `k = sum Var|Xi_i| / (lambda - max lambda_j + 1)`.
/// For `dtv` and `dTV` the Palm integrals are bounded by
/// `E|Xi_i| lambda_i + E|Xi_i|(|Xi_i| - 1)`, giving the same sum.
pub fn bound_cor22(moments: &[ComponentMoments], metric: Metric) -> Result<BoundReport> {
    for m in moments {
        m.validate()?;
    }
    let lambda: f64 = moments.iter().map(|m| m.lambda).sum();
    let id = match metric {
        Metric::Dtv => "independent-moments-dtv",
        Metric::D2 => "independent-kappa-d2",
        Metric::DTv => "independent-moments-dTV",
    };
    if lambda == 0.0 {
        return Ok(BoundReport::zero(metric, id));
    }
    let terms = moments
        .iter()
        .enumerate()
        .map(|(i, m)| term(format!("component {i}"), m.lambda * m.lambda + m.second_moment - m.lambda))
        .collect();
    let factor = match metric {
        Metric::D2 => {
            let max = moments.iter().map(|m| m.lambda).fold(0.0, f64::max);
            let denom = lambda - max + 1.0;
            let kappa = moments.iter().map(|m| m.variance).sum::<f64>() / denom;
            d2_moment_factor(lambda, kappa, lambda - max)
        }
        _ => leading_for(metric, lambda),
    };
    Ok(BoundReport::new(metric, id, factor, terms))
}

/// Which `d2` evaluation to use for locally dependent indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cor23Variant {
    /// `S_i = sum_{j not in A_i} I_j`, with conditional expectations by
    /// Monte Carlo.
    Far,
    /// `W_i = sum_{j not in B_i} I_j`, expectation by Monte Carlo.
    Buffered,
    /// Closed form through `kappa_i`.
    Kappa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McOptions {
    pub replicates: u64,
    pub stream: SeededStream,
}

/// Minimum accepted draws for a conditional expectation.
pub const MIN_CONDITIONAL_SAMPLES: u64 = 100;

/// `sum_{j in A_i \ i} E I_i I_j + sum_{j in A_i} p_i p_j`.
fn indicator_core(m: &IndicatorModel, i: usize) -> Result<f64> {
    let p = m.p();
    let mut pair = 0.0;
    for &j in m.a(i) {
        if j != i {
            pair += m.joint(i, j)?;
        }
    }
    let mut prod = 0.0;
    for &j in m.a(i) {
        prod += p[i] * p[j];
    }
    Ok(pair + prod)
}

/// Bounds for `Xi = sum_i I_i delta_{U_i}` with locally dependent
/// indicators. `variant` only matters for `d2`; `mc` is needed by the
/// `Far` and `Buffered` variants.
pub fn bound_cor23(
    m: &IndicatorModel,
    metric: Metric,
    variant: Cor23Variant,
    mc: Option<McOptions>,
) -> Result<BoundReport> {
    let lambda: f64 = m.p().iter().sum();
    let core: Vec<f64> = (0..m.len()).map(|i| indicator_core(m, i)).collect::<Result<_>>()?;
    match metric {
        Metric::Dtv | Metric::DTv => {
            let id = if metric == Metric::Dtv { "indicator-dtv" } else { "indicator-dTV" };
            let terms = core.iter().enumerate().map(|(i, &c)| term(format!("index {i}"), c)).collect();
            Ok(BoundReport::new(metric, id, leading_for(metric, lambda), terms))
        }
        Metric::D2 if lambda == 0.0 => Ok(BoundReport::zero(metric, "indicator-d2")),
        Metric::D2 => match variant {
            Cor23Variant::Kappa => indicator_kappa_d2(m, lambda, &core),
            Cor23Variant::Far | Cor23Variant::Buffered => {
                let mc = mc.ok_or_else(|| {
                    Error::InvalidArgument("this d2 variant needs Monte Carlo options".into())
                })?;
                check_replicates(mc.replicates)?;
                if !m.has_sampler() {
                    return Err(Error::InvalidModel(
                        "this d2 variant needs a model with a joint law".into(),
                    ));
                }
                if variant == Cor23Variant::Far {
                    indicator_far_d2(m, lambda, mc)
                } else {
                    indicator_buffered_d2(m, lambda, &core, mc)
                }
            }
        },
    }
}

fn indicator_kappa_d2(m: &IndicatorModel, lambda: f64, core: &[f64]) -> Result<BoundReport> {
    let p = m.p();
    let n = m.len();
    let mut terms = Vec::with_capacity(n);
    for (i, &core_i) in core.iter().enumerate() {
        let outside: Vec<usize> = (0..n).filter(|&j| !m.in_b(i, j)).collect();
        let mass: f64 = outside.iter().map(|&j| p[j]).sum();
        let mut cov = 0.0;
        for &j1 in &outside {
            for &j2 in m.a(j1) {
                if !m.in_b(i, j2) {
                    cov += m.joint(j1, j2)? - p[j1] * p[j2];
                }
            }
        }
        if cov < -1e-9 {
            return Err(Error::InvalidModel(format!(
                "negative variance {cov} of the count outside B_{i}"
            )));
        }
        let kappa = cov.max(0.0) / (mass + 1.0);
        terms.push(term(format!("index {i}"), d2_moment_factor(lambda, kappa, mass) * core_i));
    }
    Ok(BoundReport::new(Metric::D2, "indicator-kappa-d2", 1.0, terms))
}

fn indicator_buffered_d2(
    m: &IndicatorModel,
    lambda: f64,
    core: &[f64],
    mc: McOptions,
) -> Result<BoundReport> {
    let n = m.len();
    let active: Vec<usize> = (0..n).filter(|&i| core[i] > 0.0).collect();
    let sums = mc_per_component(&active, 1, mc.replicates, mc.stream, |i, rng, acc| {
        let draw = m.sample_indicators(rng)?;
        let w = (0..n).filter(|&j| draw[j] && !m.in_b(i, j)).count();
        acc.push(&[2.5 / (w as f64 + 1.0)]);
        Ok(())
    })?;
    let terms = active
        .iter()
        .zip(&sums)
        .map(|(&i, s)| BoundTerm {
            label: format!("index {i}"),
            value: (3.5 / lambda + s.mean(0)) * core[i],
            stderr: Some(core[i] * s.var_of_mean(0).sqrt()),
        })
        .collect();
    Ok(BoundReport::new(Metric::D2, "indicator-buffered-d2", 1.0, terms).with_stderr())
}

fn indicator_far_d2(m: &IndicatorModel, lambda: f64, mc: McOptions) -> Result<BoundReport> {
    let n = m.len();
    let p = m.p();
    let active: Vec<usize> = (0..n).filter(|&i| p[i] > 0.0).collect();
    // per i: [joint part, then for each j in A_i: w * I_j, I_j, (w I_j)^2 via sq]
    let width = |i: usize| 1 + 2 * m.a(i).len();
    let kmax = active.iter().map(|&i| width(i)).max().unwrap_or(1);
    let sums = mc_per_component(&active, kmax, mc.replicates, mc.stream, |i, rng, acc| {
        let draw = m.sample_indicators(rng)?;
        let s = (0..n).filter(|&j| draw[j] && !m.in_a(i, j)).count();
        let w = 2.5 / (s as f64 + 1.0);
        let mut xs = vec![0.0; kmax];
        if draw[i] {
            let pairs = m.a(i).iter().filter(|&&j| j != i && draw[j]).count();
            xs[0] = (3.5 / lambda + w) * pairs as f64;
        }
        for (k, &j) in m.a(i).iter().enumerate() {
            if draw[j] {
                xs[1 + 2 * k] = w;
                xs[2 + 2 * k] = 1.0;
            }
        }
        acc.push(&xs);
        Ok(())
    })?;
    let mut notes = Vec::new();
    let mut terms = Vec::with_capacity(active.len());
    for (&i, s) in active.iter().zip(&sums) {
        let mut value = s.mean(0);
        let mut var = s.var_of_mean(0);
        for (k, &j) in m.a(i).iter().enumerate() {
            let hits = s.sum[2 + 2 * k].round() as u64;
            let pp = p[i] * p[j];
            let cond = if hits >= MIN_CONDITIONAL_SAMPLES {
                let h = hits as f64;
                let mean = s.sum[1 + 2 * k] / h;
                let sq = s.sq[1 + 2 * k] / h;
                var += pp * pp * ((sq - mean * mean).max(0.0) / h);
                mean
            } else {
                notes.push(format!(
                    "E[2.5/(S_{i}+1) | I_{j} = 1]: {hits} accepted draws; used the upper value 2.5"
                ));
                2.5
            };
            value += (3.5 / lambda + cond) * pp;
        }
        terms.push(BoundTerm { label: format!("index {i}"), value, stderr: Some(var.sqrt()) });
    }
    let mut r = BoundReport::new(Metric::D2, "indicator-far-d2", 1.0, terms).with_stderr();
    r.notes = notes;
    Ok(r)
}

/// Bernoulli process: `dtv <= (1-e^{-l})/l sum p_i^2`, `dTV <= sum p_i^2`,
/// `d2 <= 6/(l - max p_i) sum p_i^2`.
pub fn bound_bernoulli(p: &[f64], metric: Metric) -> Result<BoundReport> {
    if let Some(&bad) = p.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidProbability(bad));
    }
    let lambda: f64 = p.iter().sum();
    let id = match metric {
        Metric::Dtv => "bernoulli-dtv",
        Metric::D2 => "bernoulli-d2",
        Metric::DTv => "bernoulli-dTV",
    };
    if lambda == 0.0 {
        return Ok(BoundReport::zero(metric, id));
    }
    let terms = p.iter().enumerate().map(|(i, &q)| term(format!("index {i}"), q * q)).collect();
    let factor = match metric {
        Metric::D2 => {
            let max = p.iter().copied().fold(0.0, f64::max);
            if lambda <= max {
                return Err(Error::UndefinedBound(
                    "d2 Bernoulli bound needs lambda > max p_i".into(),
                ));
            }
            6.0 / (lambda - max)
        }
        _ => leading_for(metric, lambda),
    };
    Ok(BoundReport::new(metric, id, factor, terms))
}

/// `n` uniform points on `[0, n]` restricted to `[0, T]`:
/// `d2 <= 6T/(n-1)`.
pub fn bound_uniform_points(n: u64, window: f64) -> Result<BoundReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("need n >= 2".into()));
    }
    if !(window >= 0.0) || window > n as f64 {
        return Err(Error::InvalidArgument(format!("window {window} outside [0, {n}]")));
    }
    Ok(BoundReport::new(
        Metric::D2,
        "uniform-points-d2",
        6.0 / (n - 1) as f64,
        vec![term("window", window)],
    ))
}

/// Moments of one component of a thinned superposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinningMoments {
    /// `E|V_i|`.
    pub mean_v: f64,
    /// `E|Xi_i|`, the `lambda_i` of the unthinned model.
    pub mean_xi: f64,
    /// `E(|V_i| |Xi_i|)`.
    pub mean_v_xi: f64,
    /// `E|Xi_i|^2`.
    pub second_xi: f64,
}

impl ThinningMoments {
    /// Exact moments for an indicator model (`|Xi_i| = I_i`).
    pub fn from_indicator_model(m: &IndicatorModel) -> Result<Vec<Self>> {
        let p = m.p();
        (0..m.len())
            .map(|i| {
                let (mut mean_v, mut mean_v_xi) = (0.0, 0.0);
                for &j in m.a(i) {
                    if j != i {
                        mean_v += p[j];
                        mean_v_xi += m.joint(i, j)?;
                    }
                }
                Ok(Self { mean_v, mean_xi: p[i], mean_v_xi, second_xi: p[i] })
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let all = [self.mean_v, self.mean_xi, self.mean_v_xi, self.second_xi];
        if all.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid thinning moments {self:?}")));
        }
        if self.second_xi + 1e-12 < self.mean_xi * self.mean_xi {
            return Err(Error::InvalidArgument(format!(
                "E|Xi|^2 = {} is below (E|Xi|)^2 = {}",
                self.second_xi,
                self.mean_xi * self.mean_xi
            )));
        }
        Ok(())
    }
}

fn check_retention(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

/// Thinned superposition with retention `p`, for `dtv` and `dTV`. Use
/// [`mc_bound_thinning_d2`] for `d2`, which needs joint draws.
pub fn bound_thinning(moments: &[ThinningMoments], p: f64, metric: Metric) -> Result<BoundReport> {
    check_retention(p)?;
    for m in moments {
        m.validate()?;
    }
    let lambda: f64 = moments.iter().map(|m| m.mean_xi).sum();
    let (id, factor) = match metric {
        Metric::Dtv => ("thinning-dtv", p * (1.0f64).min(1.0 / lambda)),
        Metric::DTv => ("thinning-dTV", p),
        Metric::D2 => {
            return Err(Error::InvalidArgument(
                "the thinning d2 bound is a joint expectation; use mc_bound_thinning_d2".into(),
            ))
        }
    };
    let terms = moments
        .iter()
        .enumerate()
        .map(|(i, m)| {
            term(
                format!("component {i}"),
                (m.mean_v + m.mean_xi) * m.mean_xi + m.mean_v_xi + m.second_xi - m.mean_xi,
            )
        })
        .collect();
    Ok(BoundReport::new(metric, id, factor, terms))
}

/// Thinning `d2` bound by Monte Carlo over the coupling's
/// `(V_i, Xi_i, far field)` draws.
pub fn mc_bound_thinning_d2(
    pc: &dyn PalmCoupling,
    p: f64,
    replicates: u64,
    stream: SeededStream,
) -> Result<BoundReport> {
    check_retention(p)?;
    check_replicates(replicates)?;
    let lambda = pc.total_mass();
    let active: Vec<usize> = (0..pc.components()).filter(|&i| pc.mean_mass(i) > 0.0).collect();
    let sums = mc_per_component(&active, 1, replicates, stream, |i, rng, acc| {
        let d = pc.draw(i, rng)?;
        let (v, xi) = (d.v.total_mass() as f64, d.xi.total_mass() as f64);
        let w = 3.5 / lambda + 2.5 / (d.far.total_mass() as f64 + 1.0);
        acc.push(&[w * ((v + xi) * pc.mean_mass(i) + (v + xi - 1.0) * xi)]);
        Ok(())
    })?;
    let terms = active
        .iter()
        .zip(&sums)
        .map(|(&i, s)| BoundTerm {
            label: format!("component {i}"),
            value: s.mean(0),
            stderr: Some(s.var_of_mean(0).sqrt()),
        })
        .collect();
    let r = BoundReport::new(Metric::D2, "thinning-d2", p, terms).with_stderr();
    Ok(finish_coupling(r, pc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RenewalVariant {
    /// Heterogeneous renewals, `(1 - F_i(T))^2` applied per summand.
    General,
    /// Identical stationary renewals, closed form in `n`.
    Iid,
    /// General form for the superposition thinned with retention `p`.
    Thinned { p: f64 },
}

/// `d2` bound for independent renewal processes on `[0, T]`.
pub fn bound_renewal(specs: &[RenewalSpec], variant: RenewalVariant) -> Result<BoundReport> {
    for s in specs {
        s.validate()?;
    }
    let fg: Vec<(f64, f64)> = specs.iter().map(|s| (s.f_at_horizon(), s.g_at_horizon())).collect();
    bound_renewal_from_values(&fg, variant)
}

/// As [`bound_renewal`], from `(F_i(T), G_i(T))` pairs.
pub fn bound_renewal_from_values(fg: &[(f64, f64)], variant: RenewalVariant) -> Result<BoundReport> {
    let n = fg.len();
    if n < 2 {
        return Err(Error::UndefinedBound(
            "the renewal bound needs at least two processes".into(),
        ));
    }
    for &(f, g) in fg {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::UndefinedBound(format!("F(T) = {f} must lie in [0, 1)")));
        }
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::InvalidProbability(g));
        }
    }
    let sum_g: f64 = fg.iter().map(|x| x.1).sum();
    let max_g = fg.iter().map(|x| x.1).fold(0.0, f64::max);
    let denom = sum_g - max_g;
    if !(denom > 0.0) {
        return Err(Error::UndefinedBound(
            "sum G_i(T) - max G_j(T) must be positive".into(),
        ));
    }
    match variant {
        RenewalVariant::Iid => {
            let (f, g) = fg[0];
            if fg.iter().any(|&(fi, gi)| fi != f || gi != g) {
                return Err(Error::InvalidArgument(
                    "iid renewal bound needs identical F(T) and G(T)".into(),
                ));
            }
            let terms = (0..n).map(|i| term(format!("process {i}"), 2.0 * f + g)).collect();
            let factor = 6.0 / ((n - 1) as f64 * (1.0 - f).powi(2));
            Ok(BoundReport::new(Metric::D2, "renewal-iid-d2", factor, terms))
        }
        RenewalVariant::General | RenewalVariant::Thinned { .. } => {
            let terms = fg
                .iter()
                .enumerate()
                .map(|(i, &(f, g))| term(format!("process {i}"), (2.0 * f + g) * g / (1.0 - f).powi(2)))
                .collect();
            let mut r = BoundReport::new(Metric::D2, "renewal-d2", 6.0 / denom, terms);
            if let RenewalVariant::Thinned { p } = variant {
                check_retention(p)?;
                r = r.scaled(p);
                r.formula_id = "renewal-thinned-d2".into();
            }
            r.interpretation = Some("per-summand".into());
            Ok(r)
        }
    }
}

/// Comparison bound `n (F + G) + theta G (1 + ln+ n)` for `n` iid renewals;
/// `theta` is an unspecified constant supplied by the caller.
pub fn bound_schuhmacher_comparison(n: u64, f_t: f64, g_t: f64, theta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidArgument(format!("theta = {theta} must be non-negative")));
    }
    let ln_plus = (n as f64).ln().max(0.0);
    Ok(n as f64 * (f_t + g_t) + theta * g_t * (1.0 + ln_plus))
}
