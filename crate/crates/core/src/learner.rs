//! Predictors built from prediction-sufficient matchings, plus aggregates and baselines.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::concept::{enumerate_group_realizable, project_class, Behavior, ConceptClass, GroupFamily, LabeledSample};
use crate::error::{Error, Result};
use crate::matching::{build_network, solve_matching, CapacityMode, Matching, MgNetwork, SolveOutcome};
use crate::oig::Oig;
use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    Base,
    PrefixMajority,
    AgnosticMixture,
    ErmBaseline,
    Constant,
}

/// A possibly randomized map from (sample, test point) to a label whose
/// Bernoulli parameter is available exactly.
pub trait Predictor: Send + Sync {
    fn kind(&self) -> PredictorKind;

    /// Short name used in reports.
    fn name(&self) -> String;

    /// Exact probability of predicting label 1 at `x`.
    fn prob_one(&self, sample: &LabeledSample, x: usize) -> Result<Rational>;

    fn predict(&self, sample: &LabeledSample, x: usize, rng: &mut dyn RngCore) -> Result<bool> {
        Ok(bernoulli(&self.prob_one(sample, x)?, rng))
    }
}

/// Draws from Bernoulli(p); consumes no randomness when p is 0 or 1.
pub fn bernoulli(p: &Rational, rng: &mut dyn RngCore) -> bool {
    if p.is_zero() {
        return false;
    }
    if *p >= Rational::one() {
        return true;
    }
    match (p.numer().to_u64(), p.denom().to_u64()) {
        (Some(a), Some(b)) => rng.random_range(0..b) < a,
        _ => rng.random::<f64>() < rational::to_f64(p),
    }
}

/// Sorted distinct sample points plus `x`.
pub fn support_points(sample: &LabeledSample, x: usize) -> Vec<usize> {
    let mut pts: Vec<usize> = sample.entries().iter().map(|&(p, _)| p).collect();
    pts.push(x);
    pts.sort_unstable();
    pts.dedup();
    pts
}

/// Labels of the sample on `points` as (known mask, label bits) in position space.
fn position_labels(sample: &LabeledSample, points: &[usize]) -> Result<(u64, u64)> {
    let (mut known, mut bits) = (0u64, 0u64);
    for &(p, y) in sample.entries() {
        let j = points.binary_search(&p).expect("sample point in support");
        if known >> j & 1 == 1 && (bits >> j & 1 == 1) != y {
            return Err(Error::InconsistentSample);
        }
        known |= 1 << j;
        if y {
            bits |= 1 << j;
        }
    }
    Ok((known, bits))
}

/// The solved multi-group matching on one point set.
#[derive(Debug)]
pub struct SolvedOig {
    pub points: Vec<usize>,
    pub network: MgNetwork,
    pub outcome: SolveOutcome,
}

impl SolvedOig {
    pub fn oig(&self) -> &Oig {
        self.network.oig()
    }

    pub fn matching(&self) -> &Matching {
        &self.outcome.matching
    }

    pub fn position(&self, p: usize) -> Option<usize> {
        self.points.binary_search(&p).ok()
    }

    /// P(predict 1) at position `j` given labels `bits` on the other positions.
    pub fn prob_one_at(&self, bits: u64, j: usize) -> Result<Rational> {
        let n = self.points.len();
        let oig = self.oig();
        let v0 = oig.vertices().index_of(&Behavior::new(bits & !(1 << j), n));
        let v1 = oig.vertices().index_of(&Behavior::new(bits | (1 << j), n));
        match (v0, v1) {
            (Some(a), Some(b)) => {
                let e = oig.edge_between(a, b).expect("vertices differ in one coordinate");
                // The edge's 0-endpoint is `u`; its label is output with weight f_{e,v}.
                Ok(self.matching().to_u(e).clone())
            }
            (Some(_), None) => Ok(Rational::zero()),
            (None, Some(_)) => Ok(Rational::one()),
            (None, None) => Err(Error::InconsistentSample),
        }
    }
}

/// The multi-group one-inclusion graph learner.
pub struct MgOigLearner {
    h: ConceptClass,
    groups: GroupFamily,
    mode: CapacityMode,
    cache: Mutex<HashMap<Vec<usize>, Arc<SolvedOig>>>,
}

impl MgOigLearner {
    pub fn new(h: ConceptClass, groups: GroupFamily, mode: CapacityMode) -> Result<Self> {
        if h.points() != groups.points() {
            return Err(Error::InvalidParameter("class and groups on different domains".into()));
        }
        Ok(MgOigLearner { h, groups, mode, cache: Mutex::new(HashMap::new()) })
    }

    pub fn class(&self) -> &ConceptClass {
        &self.h
    }

    pub fn groups(&self) -> &GroupFamily {
        &self.groups
    }

    pub fn mode(&self) -> CapacityMode {
        self.mode
    }

    /// Builds (or fetches) the solved graph on the sorted distinct `points`.
    pub fn solve_points(&self, points: &[usize]) -> Result<Arc<SolvedOig>> {
        if let Some(s) = self.cache.lock().unwrap().get(points) {
            return Ok(s.clone());
        }
        let h = project_class(&self.h, points);
        let g = self.groups.project(points);
        let c = enumerate_group_realizable(&h, &g)?;
        let oig = Oig::build(&c, Some(&g));
        let network = build_network(&oig, &g, self.mode)?;
        let outcome = solve_matching(&network)?;
        let solved = Arc::new(SolvedOig { points: points.to_vec(), network, outcome });
        self.cache.lock().unwrap().insert(points.to_vec(), solved.clone());
        Ok(solved)
    }
}

impl Predictor for MgOigLearner {
    fn kind(&self) -> PredictorKind {
        PredictorKind::Base
    }

    fn name(&self) -> String {
        match self.mode {
            CapacityMode::Exact => "mgoig-exact".into(),
            CapacityMode::Ceil => "mgoig-ceil".into(),
        }
    }

    fn prob_one(&self, sample: &LabeledSample, x: usize) -> Result<Rational> {
        let points = support_points(sample, x);
        let (known, bits) = position_labels(sample, &points)?;
        let solved = self.solve_points(&points)?;
        let j = points.binary_search(&x).unwrap();
        if known >> j & 1 == 1 {
            let b = Behavior::new(bits, points.len());
            return match solved.oig().vertices().contains(&b) {
                true => Ok(if b.get(j) { Rational::one() } else { Rational::zero() }),
                false => Err(Error::InconsistentSample),
            };
        }
        solved.prob_one_at(bits, j)
    }
}

/// Majority vote of the base predictor over prefixes of length ceil(n/4) .. n-1.
pub struct PrefixMajority {
    base: Arc<dyn Predictor>,
}

impl PrefixMajority {
    pub fn new(base: Arc<dyn Predictor>) -> Self {
        PrefixMajority { base }
    }

    /// Prefix lengths that vote on a sample of size `n`.
    pub fn voters(n: usize) -> Result<std::ops::Range<usize>> {
        if n < 4 {
            return Err(Error::InvalidSample(format!("prefix majority needs n >= 4, got {n}")));
        }
        Ok(n.div_ceil(4)..n)
    }
}

/// P(strictly more than half of independent Bernoulli(p_i) are 1).
pub fn majority_prob(ps: &[Rational]) -> Rational {
    let k = ps.len();
    if ps.iter().all(|p| p.is_zero() || p.is_one()) {
        let ones = ps.iter().filter(|p| p.is_one()).count();
        return if 2 * ones > k { Rational::one() } else { Rational::zero() };
    }
    let mut dist = vec![Rational::one()];
    for p in ps {
        let q = Rational::one() - p;
        let mut next = vec![Rational::zero(); dist.len() + 1];
        for (c, w) in dist.iter().enumerate() {
            next[c] += w * &q;
            next[c + 1] += w * p;
        }
        dist = next;
    }
    dist.iter().enumerate().filter(|(c, _)| 2 * c > k).map(|(_, w)| w).sum()
}

impl Predictor for PrefixMajority {
    fn kind(&self) -> PredictorKind {
        PredictorKind::PrefixMajority
    }

    fn name(&self) -> String {
        format!("majority({})", self.base.name())
    }

    fn prob_one(&self, sample: &LabeledSample, x: usize) -> Result<Rational> {
        let ps = PrefixMajority::voters(sample.len())?
            .map(|t| self.base.prob_one(&sample.prefix(t), x))
            .collect::<Result<Vec<_>>>()?;
        Ok(majority_prob(&ps))
    }

    fn predict(&self, sample: &LabeledSample, x: usize, rng: &mut dyn RngCore) -> Result<bool> {
        let voters = PrefixMajority::voters(sample.len())?;
        let k = voters.len();
        let mut ones = 0;
        for t in voters {
            if self.base.predict(&sample.prefix(t), x, rng)? {
                ones += 1;
            }
        }
        Ok(2 * ones > k)
    }
}

/// Uniform mixture of the base predictor on the last k prefixes.
pub struct AgnosticMixture {
    base: Arc<dyn Predictor>,
    delta: f64,
    d: usize,
}

impl AgnosticMixture {
    pub fn new(base: Arc<dyn Predictor>, delta: f64, d: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must be in (0,1), got {delta}")));
        }
        Ok(AgnosticMixture { base, delta, d })
    }

    /// k = ceil(ln(2/delta) n / (8d + ln(2/delta))).
    pub fn mixture_size(n: usize, delta: f64, d: usize) -> i64 {
        let l = (2.0 / delta).ln();
        (l * n as f64 / (8.0 * d as f64 + l)).ceil() as i64
    }

    fn k_for(&self, n: usize) -> Result<usize> {
        let k = AgnosticMixture::mixture_size(n, self.delta, self.d);
        if k < 1 || k as usize > n.saturating_sub(1) {
            return Err(Error::KOutOfRange { k, max: n.saturating_sub(1) });
        }
        Ok(k as usize)
    }
}

impl Predictor for AgnosticMixture {
    fn kind(&self) -> PredictorKind {
        PredictorKind::AgnosticMixture
    }

    fn name(&self) -> String {
        format!("mixture({})", self.base.name())
    }

    fn prob_one(&self, sample: &LabeledSample, x: usize) -> Result<Rational> {
        let n = sample.len();
        let k = self.k_for(n)?;
        let mut total = Rational::zero();
        for j in 0..k {
            total += self.base.prob_one(&sample.prefix(n - k + j), x)?;
        }
        Ok(total / Rational::from_integer(BigInt::from(k)))
    }

    fn predict(&self, sample: &LabeledSample, x: usize, rng: &mut dyn RngCore) -> Result<bool> {
        let n = sample.len();
        let k = self.k_for(n)?;
        let j = if k == 1 { 0 } else { rng.random_range(0..k) };
        self.base.predict(&sample.prefix(n - k + j), x, rng)
    }
}

/// Lexicographically least consistent group-realizable concept.
pub struct ErmLearner {
    h: ConceptClass,
    groups: GroupFamily,
    cache: Mutex<HashMap<Vec<usize>, Arc<ConceptClass>>>,
}

impl ErmLearner {
    pub fn new(h: ConceptClass, groups: GroupFamily) -> Result<Self> {
        if h.points() != groups.points() {
            return Err(Error::InvalidParameter("class and groups on different domains".into()));
        }
        Ok(ErmLearner { h, groups, cache: Mutex::new(HashMap::new()) })
    }

    fn realizable_on(&self, points: &[usize]) -> Result<Arc<ConceptClass>> {
        if let Some(c) = self.cache.lock().unwrap().get(points) {
            return Ok(c.clone());
        }
        let c = Arc::new(enumerate_group_realizable(
            &project_class(&self.h, points),
            &self.groups.project(points),
        )?);
        self.cache.lock().unwrap().insert(points.to_vec(), c.clone());
        Ok(c)
    }
}

impl Predictor for ErmLearner {
    fn kind(&self) -> PredictorKind {
        PredictorKind::ErmBaseline
    }

    fn name(&self) -> String {
        "erm".into()
    }

    fn prob_one(&self, sample: &LabeledSample, x: usize) -> Result<Rational> {
        let points = support_points(sample, x);
        let (known, bits) = position_labels(sample, &points)?;
        let c = self.realizable_on(&points)?;
        let j = points.binary_search(&x).unwrap();
        let hit = c
            .members()
            .iter()
            .find(|b| (b.bits() ^ bits) & known == 0)
            .ok_or(Error::InconsistentSample)?;
        Ok(if hit.get(j) { Rational::one() } else { Rational::zero() })
    }
}

/// Always outputs a fixed concept.
pub struct ConstantPredictor(pub Behavior);

impl Predictor for ConstantPredictor {
    fn kind(&self) -> PredictorKind {
        PredictorKind::Constant
    }

    fn name(&self) -> String {
        format!("constant({})", self.0)
    }

    fn prob_one(&self, _sample: &LabeledSample, x: usize) -> Result<Rational> {
        Ok(if self.0.get(x) { Rational::one() } else { Rational::zero() })
    }
}
