//! Carrier space `[0, 1]` with `d0(x, y) = |x - y|`, and finite point
//! configurations on it.
//!
//! A [`Configuration`] is a finite, non-negative integer-valued measure:
//! a sorted list of distinct positions with positive multiplicities. Any
//! carrier with a metric bounded by one can be mapped onto `[0, 1]` by the
//! caller (for example `t -> t / T` for a window `[0, T]`).

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A point of the carrier `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierPoint(f64);

impl CarrierPoint {
    pub fn new(position: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&position) {
            return Err(Error::PositionOutOfRange(position));
        }
        // -0.0 and 0.0 must compare structurally equal
        Ok(Self(if position == 0.0 { 0.0 } else { position }))
    }

    #[inline]
    pub fn position(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn distance(self, other: Self) -> f64 {
        (self.0 - other.0).abs()
    }
}

impl Eq for CarrierPoint {}

impl PartialOrd for CarrierPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CarrierPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Finite integer-weighted point multiset on the carrier, kept in canonical
/// form: atoms sorted by position, positions distinct, multiplicities > 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Configuration {
    atoms: Vec<(CarrierPoint, u64)>,
}

impl Configuration {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a configuration from `(position, multiplicity)` pairs.
    /// Duplicate positions are merged.
    pub fn new<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, u64)>,
    {
        let mut out = Vec::new();
        for (x, m) in atoms {
            if m == 0 {
                return Err(Error::ZeroMultiplicity);
            }
            out.push((CarrierPoint::new(x)?, m));
        }
        Ok(Self::from_raw(out))
    }

    /// Builds a configuration with one unit of mass per listed position.
    pub fn from_points<I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = f64>,
    {
        Self::new(points.into_iter().map(|x| (x, 1)))
    }

    pub fn singleton(point: CarrierPoint, multiplicity: u64) -> Self {
        if multiplicity == 0 {
            return Self::empty();
        }
        Self {
            atoms: vec![(point, multiplicity)],
        }
    }

    pub(crate) fn from_raw(mut atoms: Vec<(CarrierPoint, u64)>) -> Self {
        atoms.retain(|&(_, m)| m > 0);
        atoms.sort_by_key(|a| a.0);
        let mut merged: Vec<(CarrierPoint, u64)> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            match merged.last_mut() {
                Some((y, n)) if *y == x => *n += m,
                _ => merged.push((x, m)),
            }
        }
        Self { atoms: merged }
    }

    pub fn atoms(&self) -> &[(CarrierPoint, u64)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total mass `|xi|`.
    pub fn total_mass(&self) -> u64 {
        self.atoms.iter().map(|&(_, m)| m).sum()
    }

    /// Positions repeated by multiplicity, in ascending order.
    pub fn expand(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_mass() as usize);
        for &(x, m) in &self.atoms {
            out.extend(std::iter::repeat_n(x.position(), m as usize));
        }
        out
    }

    /// Atom-wise minimum `a ∧ b`.
    pub fn meet(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        merge_join(self, other, |x, a, b| {
            let m = a.min(b);
            if m > 0 {
                out.push((x, m));
            }
        });
        Self { atoms: out }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, (x, m)) in self.atoms.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({}, {})", x.position(), m)?;
        }
        write!(f, "}}")
    }
}

/// Walks the joint support of two canonical configurations in order, calling
/// `visit(position, mass_in_a, mass_in_b)`.
fn merge_join<F>(a: &Configuration, b: &Configuration, mut visit: F)
where
    F: FnMut(CarrierPoint, u64, u64),
{
    let (mut i, mut j) = (0, 0);
    let (xa, xb) = (&a.atoms, &b.atoms);
    while i < xa.len() || j < xb.len() {
        match (xa.get(i), xb.get(j)) {
            (Some(&(x, m)), Some(&(y, n))) => match x.cmp(&y) {
                Ordering::Less => {
                    visit(x, m, 0);
                    i += 1;
                }
                Ordering::Greater => {
                    visit(y, 0, n);
                    j += 1;
                }
                Ordering::Equal => {
                    visit(x, m, n);
                    i += 1;
                    j += 1;
                }
            },
            (Some(&(x, m)), None) => {
                visit(x, m, 0);
                i += 1;
            }
            (None, Some(&(y, n))) => {
                visit(y, 0, n);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
}

pub fn total_mass(c: &Configuration) -> u64 {
    c.total_mass()
}

/// Atom-wise sum of configurations.
pub fn superpose<'a, I>(cs: I) -> Configuration
where
    I: IntoIterator<Item = &'a Configuration>,
{
    let atoms = cs.into_iter().flat_map(|c| c.atoms.iter().copied()).collect();
    Configuration::from_raw(atoms)
}

/// Variation norm `||a - b|| = sum_x |a({x}) - b({x})|`, equal to
/// `(|a| - |a ∧ b|) + (|b| - |a ∧ b|)`.
pub fn variation_norm_diff(a: &Configuration, b: &Configuration) -> u64 {
    let mut total = 0;
    merge_join(a, b, |_, m, n| total += m.abs_diff(n));
    total
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<(f64, u64)> = self.atoms.iter().map(|&(x, m)| (x.position(), m)).collect();
        pairs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<(f64, u64)>::deserialize(deserializer)?;
        Configuration::new(pairs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(atoms: &[(f64, u64)]) -> Configuration {
        Configuration::new(atoms.iter().copied()).unwrap()
    }

    #[test]
    fn total_mass_examples() {
        assert_eq!(Configuration::empty().total_mass(), 0);
        assert_eq!(cfg(&[(0.3, 2), (0.7, 1)]).total_mass(), 3);
        let singles: Vec<_> = (0..7).map(|k| cfg(&[(k as f64 / 10.0, 1)])).collect();
        assert_eq!(superpose(&singles).total_mass(), 7);
    }

    #[test]
    fn superpose_examples() {
        let e = Configuration::empty();
        assert_eq!(superpose([&e, &e]), e);
        assert_eq!(
            superpose([&cfg(&[(0.2, 1)]), &cfg(&[(0.2, 1)])]),
            cfg(&[(0.2, 2)])
        );
        assert_eq!(
            superpose([&cfg(&[(0.1, 1)]), &cfg(&[(0.9, 2)])]),
            cfg(&[(0.1, 1), (0.9, 2)])
        );
    }

    #[test]
    fn variation_norm_examples() {
        let a = cfg(&[(0.2, 3), (0.5, 1)]);
        assert_eq!(variation_norm_diff(&a, &a), 0);
        assert_eq!(variation_norm_diff(&cfg(&[(0.2, 3)]), &cfg(&[(0.2, 1)])), 2);
        assert_eq!(variation_norm_diff(&cfg(&[(0.1, 1)]), &cfg(&[(0.9, 1)])), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            Configuration::new([(1.5, 1)]),
            Err(Error::PositionOutOfRange(_))
        ));
        assert!(Configuration::new([(f64::NAN, 1)]).is_err());
        assert!(matches!(
            Configuration::new([(0.5, 0)]),
            Err(Error::ZeroMultiplicity)
        ));
    }

    #[test]
    fn canonical_form_merges_and_sorts() {
        let c = cfg(&[(0.9, 1), (0.1, 2), (0.9, 3), (-0.0, 1), (0.0, 1)]);
        assert_eq!(c.atoms().len(), 3);
        assert_eq!(c.atoms()[0], (CarrierPoint::new(0.0).unwrap(), 2));
        assert_eq!(c.atoms()[2].1, 4);
    }

    #[test]
    fn json_round_trip() {
        let c = cfg(&[(0.25, 2), (0.75, 1)]);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, "[[0.25,2],[0.75,1]]");
        let back: Configuration = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<Configuration>("[[2.0,1]]").is_err());
    }

    #[test]
    fn meet_is_atomwise_min() {
        let a = cfg(&[(0.1, 3), (0.5, 1)]);
        let b = cfg(&[(0.1, 1), (0.7, 2)]);
        assert_eq!(a.meet(&b), cfg(&[(0.1, 1)]));
        let m = a.meet(&b).total_mass();
        assert_eq!(
            variation_norm_diff(&a, &b),
            (a.total_mass() - m) + (b.total_mass() - m)
        );
    }

    // Small position alphabet so that collisions actually happen.
    pub(crate) fn arb_configuration() -> impl Strategy<Value = Configuration> {
        prop::collection::vec((0u8..=10, 1u64..4), 0..6).prop_map(|v| {
            Configuration::new(v.into_iter().map(|(k, m)| (k as f64 / 10.0, m))).unwrap()
        })
    }

    proptest! {
        #[test]
        fn superpose_commutes_and_associates(
            a in arb_configuration(), b in arb_configuration(), c in arb_configuration()
        ) {
            prop_assert_eq!(superpose([&a, &b]), superpose([&b, &a]));
            let left = superpose([&superpose([&a, &b]), &c]);
            let right = superpose([&a, &superpose([&b, &c])]);
            prop_assert_eq!(&left, &right);
            prop_assert_eq!(left.total_mass(), a.total_mass() + b.total_mass() + c.total_mass());
        }

        #[test]
        fn variation_norm_is_metric(
            a in arb_configuration(), b in arb_configuration(), c in arb_configuration()
        ) {
            let ab = variation_norm_diff(&a, &b);
            prop_assert_eq!(ab, variation_norm_diff(&b, &a));
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(ab <= variation_norm_diff(&a, &c) + variation_norm_diff(&c, &b));
            prop_assert!(ab >= a.total_mass().abs_diff(b.total_mass()));
        }
    }
}
