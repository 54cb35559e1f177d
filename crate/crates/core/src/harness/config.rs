//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::Metric;
use crate::count_dist::DEFAULT_BOOTSTRAP;
use crate::error::{Error, Result};
use crate::processes::{
    stationary_delay, GridCdf, IndicatorBlock, IndicatorModel, Lifetime, LocationSampler,
    RenewalSpec, TimeGrid,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<Metric>,
    pub replicates: u64,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

fn all_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "params", rename_all = "snake_case")]
pub enum Experiment {
    Bernoulli(BernoulliParams),
    UniformPoints(UniformParams),
    Thinning(ThinningParams),
    Renewal(RenewalParams),
    CustomPalm(CustomParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Bernoulli(_) => "bernoulli",
            Experiment::UniformPoints(_) => "uniform_points",
            Experiment::Thinning(_) => "thinning",
            Experiment::Renewal(_) => "renewal",
            Experiment::CustomPalm(_) => "custom_palm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernoulliParams {
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformParams {
    pub n: u64,
    #[serde(alias = "T")]
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinningParams {
    pub base: BaseModel,
    #[serde(default = "default_retention")]
    pub retention: Vec<f64>,
}

fn default_retention() -> Vec<f64> {
    vec![0.5, 0.25, 0.125]
}

/// Unthinned models for thinning experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseModel {
    /// `n` independent processes with exactly one uniform point each.
    FixedPoints { n: usize },
    Bernoulli { p: Vec<f64> },
    TwoRuns { n: usize, q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalParams {
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    pub components: Vec<RenewalComponent>,
    #[serde(default)]
    pub retention: Option<f64>,
    /// Constant for the side-by-side comparison bound.
    #[serde(default)]
    pub theta: Option<f64>,
}

fn default_step() -> f64 {
    1e-3
}

/// `count` independent copies of one renewal process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalComponent {
    #[serde(default = "one")]
    pub count: usize,
    pub inter_arrival: LawSpec,
    pub delay: DelaySpec,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FileLaw {
    /// Two-column CSV `t,F` on a uniform grid starting at zero.
    Empirical { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LawSpec {
    File(FileLaw),
    Law(Lifetime),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecialDelay {
    /// `G(t) = int_0^t (1 - F) / mean(F)`.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelaySpec {
    Special(SpecialDelay),
    File(FileLaw),
    Law(Lifetime),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomParams {
    pub model: CustomModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CustomModel {
    /// Independent blocks of indicators with enumerated joint laws.
    Blocks {
        blocks: Vec<IndicatorBlock>,
        positions: Vec<LocationSampler>,
    },
    /// `I_i = J_i J_{i+1}`, iid `J ~ Bernoulli(q)`.
    TwoRuns {
        n: usize,
        q: f64,
        #[serde(default)]
        positions: Option<Vec<LocationSampler>>,
    },
    /// Independent Poisson processes.
    Poisson { components: Vec<PoissonComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonComponent {
    pub lambda: f64,
    pub location: LocationSampler,
}

impl CustomModel {
    pub fn indicator_model(&self) -> Option<Result<IndicatorModel>> {
        match self {
            CustomModel::Blocks { blocks, positions } => {
                Some(IndicatorModel::from_blocks(blocks.clone(), positions.clone()))
            }
            CustomModel::TwoRuns { n, q, positions } => {
                let pos = positions.clone().unwrap_or_else(|| vec![LocationSampler::Uniform; *n]);
                Some(IndicatorModel::two_runs(*n, *q, pos))
            }
            CustomModel::Poisson { .. } => None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative paths inside it are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |law: &mut FileLaw| {
            let FileLaw::Empirical { path } = law;
            if path.is_relative() {
                *path = dir.join(&*path);
            }
        };
        if let Experiment::Renewal(r) = &mut self.experiment {
            for c in &mut r.components {
                if let LawSpec::File(f) = &mut c.inter_arrival {
                    fix(f);
                }
                if let DelaySpec::File(f) = &mut c.delay {
                    fix(f);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("no metrics requested".into()));
        }
        if self.bootstrap == 0 {
            return Err(Error::Config("bootstrap must be at least 1".into()));
        }
        match &self.experiment {
            Experiment::Bernoulli(b) => {
                if let Some(&x) = b.p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    return Err(Error::Config(format!("p_i = {x} is not a probability")));
                }
            }
            Experiment::UniformPoints(u) => {
                if u.n < 2 {
                    return Err(Error::Config("uniform_points needs n >= 2".into()));
                }
                if !(u.window >= 0.0) || u.window > u.n as f64 {
                    return Err(Error::Config(format!("window {} outside [0, n]", u.window)));
                }
            }
            Experiment::Thinning(t) => {
                if let Some(&x) = t.retention.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    return Err(Error::Config(format!("retention {x} is not a probability")));
                }
            }
            Experiment::Renewal(r) => {
                if r.components.is_empty() || r.components.iter().any(|c| c.count == 0) {
                    return Err(Error::Config("renewal needs components with count >= 1".into()));
                }
                if let Some(p) = r.retention {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::Config(format!("retention {p} is not a probability")));
                    }
                }
                if matches!(r.theta, Some(t) if !(t >= 0.0)) {
                    return Err(Error::Config("theta must be non-negative".into()));
                }
                TimeGrid::covering(r.horizon, r.step).map_err(|e| Error::Config(e.to_string()))?;
            }
            Experiment::CustomPalm(_) => {}
        }
        Ok(())
    }
}

fn load_law(law: &FileLaw) -> Result<Lifetime> {
    let FileLaw::Empirical { path } = law;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(Lifetime::Grid(GridCdf::from_csv(&text)?))
}

impl RenewalParams {
    /// One spec per component group, with stationary delays computed on the
    /// experiment grid.
    pub fn specs(&self) -> Result<Vec<(usize, RenewalSpec)>> {
        let grid = TimeGrid::covering(self.horizon, self.step)?;
        self.components
            .iter()
            .map(|c| {
                let f = match &c.inter_arrival {
                    LawSpec::File(file) => load_law(file)?,
                    LawSpec::Law(l) => l.clone(),
                };
                let g = match &c.delay {
                    DelaySpec::Special(SpecialDelay::Stationary) => stationary_delay(&f, grid)?,
                    DelaySpec::File(file) => load_law(file)?,
                    DelaySpec::Law(l) => l.clone(),
                };
                Ok((c.count, RenewalSpec::new(f, g, self.horizon)?))
            })
            .collect()
    }

    pub fn process_count(&self) -> usize {
        self.components.iter().map(|c| c.count).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_experiment() {
        let texts = [
            r#"{"experiment":"bernoulli","params":{"p":[0.1,0.2]},"replicates":10,"seed":1}"#,
            r#"{"experiment":"uniform_points","params":{"n":101,"T":10},"replicates":10,"seed":1,"metrics":["d2"]}"#,
            r#"{"experiment":"thinning","params":{"base":{"kind":"fixed_points","n":1}},"replicates":10,"seed":1}"#,
            r#"{"experiment":"renewal","params":{"horizon":1,"components":[{"count":50,
                "inter_arrival":{"kind":"exponential","rate":0.01},"delay":{"kind":"stationary"}}]},
                "replicates":10,"seed":1,"output_dir":"o"}"#,
            r#"{"experiment":"custom_palm","params":{"model":{"kind":"two_runs","n":5,"q":0.3}},"replicates":10,"seed":1}"#,
        ];
        for t in texts {
            let cfg = ExperimentConfig::from_json(t).unwrap();
            assert_eq!(cfg.seed, 1);
        }
        let cfg = ExperimentConfig::from_json(texts[3]).unwrap();
        let Experiment::Renewal(r) = &cfg.experiment else { panic!() };
        let specs = r.specs().unwrap();
        assert_eq!(specs[0].0, 50);
        assert_eq!(specs[0].1.delay, Lifetime::Exponential { rate: 0.01 });
        assert_eq!(cfg.output_dir, PathBuf::from("o"));
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            r#"{"experiment":"bernoulli","params":{"p":[0.1]},"replicates":0,"seed":1}"#,
            r#"{"experiment":"bernoulli","params":{"p":[0.1]},"replicates":5}"#,
            r#"{"experiment":"bernoulli","params":{"p":[1.5]},"replicates":5,"seed":2}"#,
            r#"{"experiment":"nope","params":{},"replicates":5,"seed":2}"#,
            r#"{"experiment":"uniform_points","params":{"n":1,"T":1},"replicates":5,"seed":2}"#,
        ];
        for t in bad {
            assert!(matches!(ExperimentConfig::from_json(t), Err(Error::Config(_))), "{t}");
        }
    }
}
