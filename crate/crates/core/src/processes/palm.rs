//! Palm couplings for superpositions `Xi = sum_i Xi_i` under one-level local
//! dependence.
//!
//! For component `i` a coupling produces, on one probability space, a point
//! `alpha` from the normalised mean measure of `Xi_i`, the component `Xi_i`
//! and its reduced Palm version `Xi_{i,alpha}`, the neighbourhood sum
//! `V_i = sum_{j in A_i \ {i}} Xi_j` and its Palm version `V_{i,alpha}`, and
//! the far field `Xi^(i) = sum_{j not in A_i} Xi_j`.
//!
//! Palm laws cannot be derived from a black-box sampler, so couplings are
//! declared by whoever builds the model. The built-in ones below are exact;
//! a user implementation reports `verified() == false` and bound reports
//! carry that flag.

use rand::RngCore;

use super::{sample_poisson_process, IndicatorModel, LocationSampler};
use crate::carrier::{superpose, CarrierPoint, Configuration};
use crate::error::{Error, Result};
use crate::stream::SeededStream;

#[derive(Debug, Clone, PartialEq)]
pub struct PalmDraw {
    pub alpha: CarrierPoint,
    pub xi: Configuration,
    pub xi_palm: Configuration,
    pub v: Configuration,
    pub v_palm: Configuration,
    pub far: Configuration,
}

pub trait PalmCoupling: Sync {
    /// Number of components `Xi_i`.
    fn components(&self) -> usize;

    /// `lambda_i`, the total mass of the mean measure of `Xi_i`.
    fn mean_mass(&self, i: usize) -> f64;

    /// One coupled draw for component `i`. Only called when
    /// `mean_mass(i) > 0`.
    fn draw(&self, i: usize, rng: &mut dyn RngCore) -> Result<PalmDraw>;

    /// Whether the coupling is known to realise the Palm laws exactly.
    fn verified(&self) -> bool {
        false
    }

    fn name(&self) -> &str {
        "custom"
    }

    /// `lambda = sum_i lambda_i`.
    fn total_mass(&self) -> f64 {
        (0..self.components()).map(|i| self.mean_mass(i)).sum()
    }
}

/// Draws the coupled sextuple for component `i` from `stream`.
pub fn sample_palm_quadruple(
    pc: &dyn PalmCoupling,
    i: usize,
    stream: SeededStream,
) -> Result<PalmDraw> {
    if i >= pc.components() {
        return Err(Error::InvalidArgument(format!("no component {i}")));
    }
    if !(pc.mean_mass(i) > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "component {i} has zero mean mass; no point to condition on"
        )));
    }
    pc.draw(i, &mut stream.rng())
}

/// Independent Poisson processes: the reduced Palm process of a Poisson
/// process has its own law, realised here as the identity coupling.
#[derive(Debug, Clone)]
pub struct IndependentPoissonCoupling {
    components: Vec<(f64, LocationSampler)>,
}

impl IndependentPoissonCoupling {
    pub fn new(components: Vec<(f64, LocationSampler)>) -> Result<Self> {
        for (lambda, loc) in &components {
            if !(*lambda >= 0.0) || !lambda.is_finite() {
                return Err(Error::InvalidIntensity(*lambda));
            }
            loc.validate()?;
        }
        Ok(Self { components })
    }
}

impl PalmCoupling for IndependentPoissonCoupling {
    fn components(&self) -> usize {
        self.components.len()
    }

    fn mean_mass(&self, i: usize) -> f64 {
        self.components[i].0
    }

    fn draw(&self, i: usize, mut rng: &mut dyn RngCore) -> Result<PalmDraw> {
        let (lambda, loc) = &self.components[i];
        let alpha = loc.sample(&mut rng);
        let xi = sample_poisson_process(*lambda, loc, &mut rng)?;
        let mut others = Vec::with_capacity(self.components.len().saturating_sub(1));
        for (j, (l, lj)) in self.components.iter().enumerate() {
            if j != i {
                others.push(sample_poisson_process(*l, lj, &mut rng)?);
            }
        }
        Ok(PalmDraw {
            alpha,
            xi_palm: xi.clone(),
            xi,
            v: Configuration::empty(),
            v_palm: Configuration::empty(),
            far: superpose(&others),
        })
    }

    fn verified(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        "independent_poisson"
    }
}

/// `Xi_i = I_i delta_{U_i}` with locally dependent indicators. The reduced
/// Palm process of a single indicator point is empty, and `V_{i,alpha}` is
/// `V_i` under the indicator law conditioned on `I_i = 1`.
#[derive(Debug, Clone)]
pub struct IndicatorCoupling {
    model: IndicatorModel,
}

impl IndicatorCoupling {
    pub fn new(model: IndicatorModel) -> Result<Self> {
        if !model.has_sampler() {
            return Err(Error::InvalidModel(
                "indicator coupling needs a model with a joint law".into(),
            ));
        }
        Ok(Self { model })
    }

    pub fn model(&self) -> &IndicatorModel {
        &self.model
    }
}

impl PalmCoupling for IndicatorCoupling {
    fn components(&self) -> usize {
        self.model.len()
    }

    fn mean_mass(&self, i: usize) -> f64 {
        self.model.p()[i]
    }

    fn draw(&self, i: usize, mut rng: &mut dyn RngCore) -> Result<PalmDraw> {
        let m = &self.model;
        let (base, palm) = m.sample_with_palm(i, &mut rng)?;
        let locations: Vec<CarrierPoint> = (0..m.len()).map(|j| m.position(j).sample(&mut rng)).collect();
        let (mut v, mut v_palm, mut far) = (Vec::new(), Vec::new(), Vec::new());
        for j in 0..m.len() {
            if j == i {
                continue;
            }
            if m.in_a(i, j) {
                if base[j] {
                    v.push((locations[j], 1));
                }
                if palm[j] {
                    v_palm.push((locations[j], 1));
                }
            } else if base[j] {
                far.push((locations[j], 1));
            }
        }
        let xi = if base[i] {
            Configuration::singleton(locations[i], 1)
        } else {
            Configuration::empty()
        };
        Ok(PalmDraw {
            alpha: locations[i],
            xi,
            xi_palm: Configuration::empty(),
            v: Configuration::from_raw(v),
            v_palm: Configuration::from_raw(v_palm),
            far: Configuration::from_raw(far),
        })
    }

    fn verified(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        "indicator"
    }
}

/// `n` independent processes, each exactly one point at a location drawn
/// from `location`.
#[derive(Debug, Clone)]
pub struct FixedPointsCoupling {
    n: usize,
    location: LocationSampler,
}

impl FixedPointsCoupling {
    pub fn new(n: usize, location: LocationSampler) -> Result<Self> {
        location.validate()?;
        Ok(Self { n, location })
    }
}

impl PalmCoupling for FixedPointsCoupling {
    fn components(&self) -> usize {
        self.n
    }

    fn mean_mass(&self, _i: usize) -> f64 {
        1.0
    }

    fn draw(&self, _i: usize, mut rng: &mut dyn RngCore) -> Result<PalmDraw> {
        let alpha = self.location.sample(&mut rng);
        let far = (1..self.n).map(|_| (self.location.sample(&mut rng), 1)).collect();
        Ok(PalmDraw {
            alpha,
            xi: Configuration::singleton(alpha, 1),
            xi_palm: Configuration::empty(),
            v: Configuration::empty(),
            v_palm: Configuration::empty(),
            far: Configuration::from_raw(far),
        })
    }

    fn verified(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        "fixed_points"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_coupling_is_identity() {
        let pc = IndependentPoissonCoupling::new(vec![
            (1.5, LocationSampler::Uniform),
            (0.5, LocationSampler::Point { at: 0.2 }),
        ])
        .unwrap();
        for rep in 0..50 {
            let d = sample_palm_quadruple(&pc, 0, SeededStream::new(1, rep)).unwrap();
            assert_eq!(d.xi, d.xi_palm);
            assert!(d.v.is_empty() && d.v_palm.is_empty());
        }
        let zero = IndependentPoissonCoupling::new(vec![(0.0, LocationSampler::Uniform)]).unwrap();
        assert!(sample_palm_quadruple(&zero, 0, SeededStream::new(1, 0)).is_err());
    }

    #[test]
    fn bernoulli_coupling_has_empty_palm() {
        let m = IndicatorModel::bernoulli(vec![0.3; 4]).unwrap();
        let pc = IndicatorCoupling::new(m).unwrap();
        for rep in 0..50 {
            let d = sample_palm_quadruple(&pc, 2, SeededStream::new(2, rep)).unwrap();
            assert!(d.xi_palm.is_empty() && d.v.is_empty() && d.v_palm.is_empty());
            assert_eq!(d.alpha.position(), 0.75);
            assert!(d.xi.total_mass() <= 1);
            assert!(d.far.total_mass() <= 3);
        }
    }

    #[test]
    fn comonotone_pair_palm_enumeration() {
        // I_2 = I_1, so conditioning on I_1 = 1 forces V_{1,alpha} = delta_{0.75},
        // while V_1 = I_1 delta_{0.75} has the unconditional law.
        let m = IndicatorModel::comonotone_pair(0.4, [0.25, 0.75]).unwrap();
        let pc = IndicatorCoupling::new(m).unwrap();
        let at = Configuration::new([(0.75, 1)]).unwrap();
        for rep in 0..100 {
            let d = sample_palm_quadruple(&pc, 0, SeededStream::new(3, rep)).unwrap();
            assert_eq!(d.v_palm, at);
            assert_eq!(d.v.is_empty(), d.xi.is_empty());
            assert!(d.far.is_empty());
        }
    }
}
