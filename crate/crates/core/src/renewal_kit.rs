//! Numerical renewal theory on a uniform grid.
//!
//! Solves `V(t) = G(t) + int_0^t V(t - s) dF(s)` for the renewal function
//! `V(t) = E N_t` and `V2(t) = 2 V(t) + int_0^t V2(t - s) dF(s)` for
//! `V2(t) = E[N_t (N_t + 1)]`, then checks the elementary inequalities
//!
//! ```text
//! G(t) <= V(t) <= G(t) / (1 - F(t))
//! V2(t) - 2 V(t) = E N_t^2 - E N_t <= 2 F(t) G(t) / (1 - F(t))^2
//! ```
//!
//! The Stieltjes integral is discretised by assigning each increment
//! `F(t_j) - F(t_{j-1})` to the grid point `t_j`. The scheme is first-order
//! and stays valid for discontinuous `F` (deterministic inter-arrivals). Any
//! atom of `F` at zero is handled implicitly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::processes::{RenewalSpec, TimeGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalSolution {
    pub grid: TimeGrid,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
    /// `E N_t` on the grid.
    pub v: Vec<f64>,
    /// `E[N_t (N_t + 1)]` on the grid.
    pub v2: Vec<f64>,
    /// Max over the grid of `|V - G - sum V dF|` (and the same for `V2`).
    pub residual: f64,
}

impl RenewalSolution {
    pub fn step(&self) -> f64 {
        self.grid.step
    }

    /// `E N_T`.
    pub fn mean_count(&self) -> f64 {
        *self.v.last().expect("non-empty grid")
    }

    /// `E N_T^2`.
    pub fn second_moment(&self) -> f64 {
        self.v2.last().expect("non-empty grid") - self.mean_count()
    }

    /// `E N_T (N_T - 1)`.
    pub fn factorial_moment(&self) -> f64 {
        self.v2.last().expect("non-empty grid") - 2.0 * self.mean_count()
    }

    pub fn variance(&self) -> f64 {
        (self.second_moment() - self.mean_count().powi(2)).max(0.0)
    }

    /// CSV with columns `t,G,F,V,V2,V_upper,factorial_upper`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "G", "F", "V", "V2", "V_upper", "factorial_upper"])?;
        for k in 0..=self.grid.intervals {
            let (g, f) = (self.g[k], self.f[k]);
            let row = [
                self.grid.time(k),
                g,
                f,
                self.v[k],
                self.v2[k],
                g / (1.0 - f),
                2.0 * f * g / (1.0 - f).powi(2),
            ];
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Marches the discretised renewal equations forward on `0, h, ..., T`.
pub fn solve_renewal(spec: &RenewalSpec, step: f64) -> Result<RenewalSolution> {
    spec.validate()?;
    let grid = TimeGrid::covering(spec.horizon, step)?;
    if spec.f_at_horizon() >= 1.0 - 1e-9 {
        return Err(Error::InvalidDistribution(format!(
            "F(T) = {} is too close to one",
            spec.f_at_horizon()
        )));
    }
    let m = grid.intervals;
    let g: Vec<f64> = (0..=m).map(|k| spec.delay.cdf(grid.time(k))).collect();
    let f: Vec<f64> = (0..=m).map(|k| spec.inter_arrival.cdf(grid.time(k))).collect();
    let mut df = Vec::with_capacity(m + 1);
    df.push(f[0]);
    df.extend((1..=m).map(|j| (f[j] - f[j - 1]).max(0.0)));
    let at_zero = 1.0 - df[0];

    let convolve = |x: &[f64], k: usize| -> f64 { (1..=k).map(|j| x[k - j] * df[j]).sum() };

    let mut v = Vec::with_capacity(m + 1);
    let mut v2 = Vec::with_capacity(m + 1);
    for (k, &gk) in g.iter().enumerate() {
        let vk = (gk + convolve(&v, k)) / at_zero;
        v.push(vk);
        let v2k = (2.0 * vk + convolve(&v2, k)) / at_zero;
        v2.push(v2k);
    }

    let mut residual: f64 = 0.0;
    for k in 0..=m {
        let r1 = v[k] - g[k] - convolve(&v, k) - v[k] * df[0];
        let r2 = v2[k] - 2.0 * v[k] - convolve(&v2, k) - v2[k] * df[0];
        residual = residual.max(r1.abs()).max(r2.abs());
    }
    if !residual.is_finite() {
        return Err(Error::InvalidDistribution("renewal march diverged".into()));
    }
    Ok(RenewalSolution { grid, g, f, v, v2, residual })
}

/// Worst slack (bound minus value, negative when violated) of each
/// inequality over the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lower_slack: f64,
    pub upper_slack: f64,
    pub factorial_slack: f64,
    pub tolerance: f64,
    pub residual: f64,
    pub residual_ok: bool,
    pub holds: bool,
}

/// Residual tolerance for [`check_lemma41`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Checks `G <= V <= G/(1-F)` and `V2 - 2V <= 2FG/(1-F)^2` at every grid
/// point, with slack `10 h`.
pub fn check_lemma41(spec: &RenewalSpec, sol: &RenewalSolution) -> InequalityReport {
    let tolerance = 10.0 * sol.step();
    let (mut lower, mut upper, mut fact) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for k in 0..=sol.grid.intervals {
        let t = sol.grid.time(k);
        let (g, f) = (spec.delay.cdf(t), spec.inter_arrival.cdf(t));
        let (v, v2) = (sol.v[k], sol.v2[k]);
        lower = lower.min(v - g);
        upper = upper.min(g / (1.0 - f) - v);
        fact = fact.min(2.0 * f * g / (1.0 - f).powi(2) - (v2 - 2.0 * v));
    }
    let residual_ok = sol.residual <= RESIDUAL_TOLERANCE * (1.0 + sol.mean_count());
    InequalityReport {
        lower_slack: lower,
        upper_slack: upper,
        factorial_slack: fact,
        tolerance,
        residual: sol.residual,
        residual_ok,
        holds: residual_ok && lower >= -tolerance && upper >= -tolerance && fact >= -tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{renewal_count, stationary_delay, Lifetime};
    use crate::stream::SeededStream;

    fn exp_spec(rate: f64, horizon: f64) -> RenewalSpec {
        let e = Lifetime::Exponential { rate };
        RenewalSpec::new(e.clone(), e, horizon).unwrap()
    }

    #[test]
    fn exponential_closed_forms() {
        let sol = solve_renewal(&exp_spec(1.0, 1.0), 1e-3).unwrap();
        // Poisson process: E N_t = t, E N_t (N_t - 1) = t^2
        assert!((sol.mean_count() - 1.0).abs() <= 0.01);
        assert!((sol.factorial_moment() - 1.0).abs() <= 0.02);
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn no_first_arrival_gives_zero() {
        let spec =
            RenewalSpec::new(Lifetime::Exponential { rate: 1.0 }, Lifetime::Never, 1.0).unwrap();
        let sol = solve_renewal(&spec, 0.01).unwrap();
        assert!(sol.v.iter().all(|&x| x == 0.0));
        let rep = check_lemma41(&spec, &sol);
        assert!(rep.holds);
        assert_eq!(rep.lower_slack, 0.0);
        assert_eq!(rep.upper_slack, 0.0);
        assert_eq!(rep.factorial_slack, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(solve_renewal(&exp_spec(1.0, 1.0), 0.3).is_err());
        let det = RenewalSpec::new(
            Lifetime::Deterministic { at: 0.5 },
            Lifetime::Uniform { low: 0.0, high: 0.5 },
            1.0,
        )
        .unwrap();
        assert!(solve_renewal(&det, 0.01).is_err());
    }

    #[test]
    fn exponential_inequality_values() {
        let spec = exp_spec(1.0, 1.0);
        let sol = solve_renewal(&spec, 1e-3).unwrap();
        let g = spec.g_at_horizon();
        assert!((g - 0.632_120_558_8).abs() < 1e-9);
        assert!(g <= sol.mean_count());
        assert!(sol.mean_count() <= g / (1.0 - spec.f_at_horizon()));
        assert!((g / (1.0 - g) - 1.718_281_828).abs() < 1e-8);
        assert!(check_lemma41(&spec, &sol).holds);
    }

    #[test]
    fn uniform_stationary_inequalities_and_simulation() {
        let uni = Lifetime::Uniform { low: 0.0, high: 1.0 };
        let h = 1e-3;
        let delay = stationary_delay(&uni, TimeGrid::covering(0.5, h).unwrap()).unwrap();
        let spec = RenewalSpec::new(uni, delay, 0.5).unwrap();
        let sol = solve_renewal(&spec, h).unwrap();
        assert!(check_lemma41(&spec, &sol).holds);

        let mut rng = SeededStream::new(41, 0).rng();
        let reps = 100_000;
        let (mut s1, mut s2, mut sf) = (0.0, 0.0, 0.0);
        for _ in 0..reps {
            let n = renewal_count(&spec, &mut rng) as f64;
            s1 += n;
            s2 += n * n;
            sf += n * (n - 1.0);
        }
        let mean = s1 / reps as f64;
        let sd = ((s2 / reps as f64 - mean * mean) / reps as f64).sqrt();
        // stationary: E N_t = t / mean(F) = 1
        assert!((sol.mean_count() - mean).abs() <= 3.0 * sd + 2.0 * h);
        let fact = sf / reps as f64;
        assert!((sol.factorial_moment() - fact).abs() < 0.02);
    }

    #[test]
    fn first_order_grid_refinement() {
        let uni = Lifetime::Uniform { low: 0.1, high: 0.9 };
        let spec = RenewalSpec::new(uni, Lifetime::Exponential { rate: 2.0 }, 0.8).unwrap();
        let steps = [0.02, 0.01, 0.005, 0.0025];
        let vt: Vec<f64> = steps
            .iter()
            .map(|&h| solve_renewal(&spec, h).unwrap().mean_count())
            .collect();
        // fit C from the coarsest pair, then check the finer pairs
        let c = (vt[1] - vt[0]).abs() / steps[1] * 1.5;
        for k in 1..steps.len() {
            assert!((vt[k] - vt[k - 1]).abs() <= c * steps[k], "{vt:?}");
        }
    }

    #[test]
    fn renewal_function_is_monotone() {
        let grid_cdf =
            crate::processes::GridCdf::new(0.1, vec![0.1, 0.3, 0.35, 0.6, 0.9, 1.0]).unwrap();
        let spec = RenewalSpec::new(
            Lifetime::Grid(grid_cdf),
            Lifetime::Deterministic { at: 0.05 },
            0.3,
        )
        .unwrap();
        let sol = solve_renewal(&spec, 0.01).unwrap();
        assert!(sol.v.windows(2).all(|w| w[1] >= w[0]));
        assert!(sol.v2.iter().zip(&sol.v).all(|(v2, v)| v2 + 1e-12 >= 2.0 * v));
        assert!(check_lemma41(&spec, &sol).holds);
    }

    #[test]
    fn csv_has_expected_columns() {
        let sol = solve_renewal(&exp_spec(1.0, 1.0), 0.25).unwrap();
        let text = sol.to_csv().unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,G,F,V,V2,V_upper,factorial_upper"));
        assert_eq!(lines.count(), 5);
    }
}
