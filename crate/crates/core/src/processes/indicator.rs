//! Locally dependent indicator models `Xi = sum_i I_i delta_{U_i}`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LocationSampler;
use crate::error::{Error, Result};

/// A group of indicators with an explicit joint law; distinct blocks are
/// independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorBlock {
    pub members: Vec<usize>,
    /// `(pattern, probability)`; `pattern[k]` is the value of `members[k]`.
    pub outcomes: Vec<(Vec<bool>, f64)>,
}

/// How the indicators are jointly drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum IndicatorLaw {
    /// Independent blocks with enumerated joint outcomes.
    Blocks(Vec<IndicatorBlock>),
    /// `I_i = J_i J_{i+1}` for iid `J_1, ..., J_{n+1} ~ Bernoulli(q)`.
    TwoRuns { q: f64 },
    /// Moments only; no sampler.
    Unspecified,
}

/// Marginals, neighbourhoods `i in A_i ⊆ B_i`, joint moments `E I_i I_j`
/// for `j in A_i`, and point locations.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorModel {
    p: Vec<f64>,
    a: Vec<Vec<usize>>,
    b: Vec<Vec<usize>>,
    joint: BTreeMap<(usize, usize), f64>,
    positions: Vec<LocationSampler>,
    law: IndicatorLaw,
    block_of: Vec<usize>,
}

fn key(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

impl IndicatorModel {
    /// Moments-only model. `joint` maps `(i, j)` (either order) to `E I_i I_j`.
    pub fn new(
        p: Vec<f64>,
        a: Vec<Vec<usize>>,
        b: Vec<Vec<usize>>,
        joint: BTreeMap<(usize, usize), f64>,
        positions: Vec<LocationSampler>,
    ) -> Result<Self> {
        let joint = joint.into_iter().map(|((i, j), v)| (key(i, j), v)).collect();
        let n = p.len();
        Self::validated(p, a, b, joint, positions, IndicatorLaw::Unspecified, vec![0; n])
    }

    fn validated(
        p: Vec<f64>,
        mut a: Vec<Vec<usize>>,
        mut b: Vec<Vec<usize>>,
        joint: BTreeMap<(usize, usize), f64>,
        positions: Vec<LocationSampler>,
        law: IndicatorLaw,
        block_of: Vec<usize>,
    ) -> Result<Self> {
        let n = p.len();
        if a.len() != n || b.len() != n || positions.len() != n {
            return Err(Error::InvalidModel("length mismatch".into()));
        }
        if let Some(&bad) = p.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidProbability(bad));
        }
        for pos in &positions {
            pos.validate()?;
        }
        for i in 0..n {
            a[i].sort_unstable();
            a[i].dedup();
            b[i].sort_unstable();
            b[i].dedup();
            if a[i].iter().chain(&b[i]).any(|&j| j >= n) {
                return Err(Error::InvalidModel(format!("neighbourhood of {i} out of range")));
            }
            if a[i].binary_search(&i).is_err() {
                return Err(Error::InvalidModel(format!("{i} is not in A_{i}")));
            }
            if a[i].iter().any(|j| b[i].binary_search(j).is_err()) {
                return Err(Error::InvalidModel(format!("A_{i} is not contained in B_{i}")));
            }
        }
        for (&(i, j), &v) in &joint {
            if i >= n || j >= n {
                return Err(Error::InvalidModel(format!("joint moment ({i},{j}) out of range")));
            }
            if !(v >= -1e-12 && v <= p[i].min(p[j]) + 1e-12) {
                return Err(Error::InvalidModel(format!(
                    "E[I_{i} I_{j}] = {v} outside [0, min(p_i, p_j)]"
                )));
            }
        }
        Ok(Self { p, a, b, joint, positions, law, block_of })
    }

    /// Independent indicators with `A_i = B_i = {i}`.
    pub fn independent(p: Vec<f64>, positions: Vec<LocationSampler>) -> Result<Self> {
        let blocks = p
            .iter()
            .enumerate()
            .map(|(i, &q)| IndicatorBlock {
                members: vec![i],
                outcomes: vec![(vec![false], 1.0 - q), (vec![true], q)],
            })
            .collect();
        Self::from_blocks(blocks, positions)
    }

    /// Bernoulli process: independent indicators at positions `i/n`,
    /// `i = 1..=n`.
    pub fn bernoulli(p: Vec<f64>) -> Result<Self> {
        let n = p.len();
        let positions = (1..=n)
            .map(|i| LocationSampler::Point { at: i as f64 / n as f64 })
            .collect();
        Self::independent(p, positions)
    }

    /// Two indicators that are always equal, `I_1 = I_2 ~ Bernoulli(q)`.
    pub fn comonotone_pair(q: f64, at: [f64; 2]) -> Result<Self> {
        let block = IndicatorBlock {
            members: vec![0, 1],
            outcomes: vec![(vec![false, false], 1.0 - q), (vec![true, true], q)],
        };
        Self::from_blocks(
            vec![block],
            at.iter().map(|&x| LocationSampler::Point { at: x }).collect(),
        )
    }

    /// Independent blocks; `A_i = B_i =` the block containing `i`.
    pub fn from_blocks(blocks: Vec<IndicatorBlock>, positions: Vec<LocationSampler>) -> Result<Self> {
        let n = positions.len();
        let mut block_of = vec![usize::MAX; n];
        for (k, blk) in blocks.iter().enumerate() {
            for &m in &blk.members {
                if m >= n || block_of[m] != usize::MAX {
                    return Err(Error::InvalidModel(format!(
                        "index {m} missing from positions or in two blocks"
                    )));
                }
                block_of[m] = k;
            }
            let total: f64 = blk.outcomes.iter().map(|(_, w)| w).sum();
            if (total - 1.0).abs() > 1e-9
                || blk.outcomes.iter().any(|(pat, w)| !(*w >= 0.0) || pat.len() != blk.members.len())
            {
                return Err(Error::InvalidModel(format!("block {k} has an invalid outcome table")));
            }
        }
        if block_of.contains(&usize::MAX) {
            return Err(Error::InvalidModel("every index needs a block".into()));
        }

        let mut p = vec![0.0; n];
        let mut joint = BTreeMap::new();
        let mut a = vec![Vec::new(); n];
        for blk in &blocks {
            for (x, &i) in blk.members.iter().enumerate() {
                a[i] = blk.members.clone();
                p[i] = blk.outcomes.iter().filter(|(pat, _)| pat[x]).map(|(_, w)| w).sum();
                for (y, &j) in blk.members.iter().enumerate() {
                    let e: f64 = blk
                        .outcomes
                        .iter()
                        .filter(|(pat, _)| pat[x] && pat[y])
                        .map(|(_, w)| w)
                        .sum();
                    joint.insert(key(i, j), e);
                }
            }
        }
        let b = a.clone();
        Self::validated(p, a, b, joint, positions, IndicatorLaw::Blocks(blocks), block_of)
    }

    /// `I_i = J_i J_{i+1}` with iid `J ~ Bernoulli(q)`: `A_i` is the index
    /// window of radius one around `i`, `B_i` the window of radius two.
    pub fn two_runs(n: usize, q: f64, positions: Vec<LocationSampler>) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidProbability(q));
        }
        let window = |i: usize, r: usize| (i.saturating_sub(r)..=(i + r).min(n.saturating_sub(1))).collect();
        let a: Vec<Vec<usize>> = (0..n).map(|i| window(i, 1)).collect();
        let b = (0..n).map(|i| window(i, 2)).collect();
        let mut joint = BTreeMap::new();
        for (i, ai) in a.iter().enumerate() {
            for &j in ai {
                let e = match i.abs_diff(j) {
                    0 => q * q,
                    _ => q * q * q,
                };
                joint.insert(key(i, j), e);
            }
        }
        Self::validated(
            vec![q * q; n],
            a,
            b,
            joint,
            positions,
            IndicatorLaw::TwoRuns { q },
            vec![0; n],
        )
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn a(&self, i: usize) -> &[usize] {
        &self.a[i]
    }

    pub fn b(&self, i: usize) -> &[usize] {
        &self.b[i]
    }

    pub fn in_a(&self, i: usize, j: usize) -> bool {
        self.a[i].binary_search(&j).is_ok()
    }

    pub fn in_b(&self, i: usize, j: usize) -> bool {
        self.b[i].binary_search(&j).is_ok()
    }

    pub fn position(&self, i: usize) -> &LocationSampler {
        &self.positions[i]
    }

    pub fn law(&self) -> &IndicatorLaw {
        &self.law
    }

    /// `A_i = {i}` for every `i`.
    pub fn is_independent(&self) -> bool {
        self.a.iter().enumerate().all(|(i, ai)| ai.as_slice() == [i])
    }

    /// `E I_i I_j`; `E I_i^2 = p_i`.
    pub fn joint(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Ok(self.p[i]);
        }
        self.joint
            .get(&key(i, j))
            .copied()
            .ok_or(Error::MissingJointMoment(i, j))
    }

    pub fn has_sampler(&self) -> bool {
        !matches!(self.law, IndicatorLaw::Unspecified)
    }

    /// One joint draw of all indicators.
    pub fn sample_indicators<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<bool>> {
        let n = self.len();
        match &self.law {
            IndicatorLaw::Blocks(blocks) => {
                let mut out = vec![false; n];
                for blk in blocks {
                    let pat = pick_outcome(&blk.outcomes, rng);
                    for (k, &m) in blk.members.iter().enumerate() {
                        out[m] = pat[k];
                    }
                }
                Ok(out)
            }
            IndicatorLaw::TwoRuns { q } => {
                let j: Vec<bool> = (0..=n).map(|_| rng.random::<f64>() < *q).collect();
                Ok((0..n).map(|i| j[i] && j[i + 1]).collect())
            }
            IndicatorLaw::Unspecified => Err(Error::InvalidModel(
                "model has no joint law to sample from".into(),
            )),
        }
    }

    /// A draw together with a coupled draw from the law conditioned on
    /// `I_i = 1`; the two agree outside `A_i`.
    pub fn sample_with_palm<R: Rng + ?Sized>(
        &self,
        i: usize,
        rng: &mut R,
    ) -> Result<(Vec<bool>, Vec<bool>)> {
        let n = self.len();
        match &self.law {
            IndicatorLaw::Blocks(blocks) => {
                let mut base = vec![false; n];
                let mut palm = vec![false; n];
                for (k, blk) in blocks.iter().enumerate() {
                    let pat = pick_outcome(&blk.outcomes, rng);
                    for (x, &m) in blk.members.iter().enumerate() {
                        base[m] = pat[x];
                        palm[m] = pat[x];
                    }
                    if k == self.block_of[i] {
                        let x = blk.members.iter().position(|&m| m == i).expect("member");
                        let given: Vec<(Vec<bool>, f64)> =
                            blk.outcomes.iter().filter(|(pat, _)| pat[x]).cloned().collect();
                        if given.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
                            return Err(Error::InvalidModel(format!("P(I_{i} = 1) = 0")));
                        }
                        let cond = pick_outcome(&given, rng);
                        for (y, &m) in blk.members.iter().enumerate() {
                            palm[m] = cond[y];
                        }
                    }
                }
                Ok((base, palm))
            }
            IndicatorLaw::TwoRuns { q } => {
                let mut j: Vec<bool> = (0..=n).map(|_| rng.random::<f64>() < *q).collect();
                let base = (0..n).map(|k| j[k] && j[k + 1]).collect();
                j[i] = true;
                j[i + 1] = true;
                let palm = (0..n).map(|k| j[k] && j[k + 1]).collect();
                Ok((base, palm))
            }
            IndicatorLaw::Unspecified => Err(Error::InvalidModel(
                "model has no joint law to sample from".into(),
            )),
        }
    }
}

fn pick_outcome<'a, R: Rng + ?Sized>(outcomes: &'a [(Vec<bool>, f64)], rng: &mut R) -> &'a [bool] {
    let total: f64 = outcomes.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for (pat, w) in outcomes {
        if u < *w {
            return pat;
        }
        u -= w;
    }
    // rounding: fall back to the last outcome with positive weight
    &outcomes
        .iter()
        .rev()
        .find(|(_, w)| *w > 0.0)
        .expect("positive total weight")
        .0
}
