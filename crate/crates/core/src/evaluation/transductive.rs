//! Leave-one-out (transductive) errors: closed forms and permutation averages.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::permutations;
use crate::agnostic::{agnostic_closed_form, canonical_coords, sample_credit, AgnosticGraph, AgnosticOigLearner};
use crate::concept::{vc_restricted, Behavior, LabeledSample};
use crate::error::{Error, Result};
use crate::learner::{MgOigLearner, Predictor};
use crate::rational::{self, Rational};

/// Largest tuple for which all n! orderings are averaged.
pub const PERMUTATION_CAP: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransductiveReport {
    pub n: usize,
    #[serde(with = "rational::serde_str")]
    pub closed_form: Rational,
    #[serde(with = "crate::evaluation::transductive::opt")]
    pub permutation_average: Option<Rational>,
    /// Group capacity over n.
    #[serde(with = "rational::serde_str")]
    pub capacity_bound: Rational,
    /// d_{H|g} over n.
    #[serde(with = "rational::serde_str")]
    pub vc_bound: Rational,
}

impl TransductiveReport {
    pub fn consistent(&self) -> bool {
        self.permutation_average.as_ref().is_none_or(|p| *p == self.closed_form)
            && self.closed_form <= self.capacity_bound
            && self.capacity_bound <= self.vc_bound
    }
}

pub(crate) mod opt {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&rational::format(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Rational>, D::Error> {
        let v: Option<String> = Option::deserialize(d)?;
        v.map(|s| rational::parse(&s).map_err(serde::de::Error::custom)).transpose()
    }
}

fn over(k: Rational, n: usize) -> Rational {
    k / Rational::from_integer(BigInt::from(n))
}

/// Transductive g-error of the realizable learner on a tuple of points
/// labelled by `target`: (1/n) sum over singly occurring g-points of f_{e,v}.
pub fn transductive_error_exact(
    learner: &MgOigLearner,
    points: &[usize],
    target: &Behavior,
    g: &Behavior,
) -> Result<TransductiveReport> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidSample("empty tuple".into()));
    }
    let mut distinct = points.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let solved = learner.solve_points(&distinct)?;
    let v = target.restrict(&distinct);
    let oig = solved.oig();
    let vi = oig.vertices().index_of(&v).ok_or_else(|| {
        Error::InvalidSample(format!("target {target} is not group-realizable on the tuple"))
    })?;
    let mut total = Rational::zero();
    for (j, &p) in distinct.iter().enumerate() {
        if !g.get(p) || points.iter().filter(|&&q| q == p).count() != 1 {
            continue;
        }
        let other = oig.vertices().index_of(&v.flip(j));
        if let Some(e) = other.and_then(|o| oig.edge_between(vi, o)) {
            let to_u = solved.matching().to_u(e);
            total += if v.get(j) { Rational::one() - to_u } else { to_u.clone() };
        }
    }
    let closed_form = over(total, n);

    let permutation_average = if n <= PERMUTATION_CAP {
        let mut sum = Rational::zero();
        let perms = permutations(n);
        for order in &perms {
            let seq: Vec<usize> = order.iter().map(|&i| points[i]).collect();
            let x = seq[n - 1];
            if !g.get(x) {
                continue;
            }
            let s = LabeledSample::labeled_by(target, &seq[..n - 1])?;
            let p1 = learner.prob_one(&s, x)?;
            sum += if target.get(x) { Rational::one() - p1 } else { p1 };
        }
        Some(over(sum, perms.len()))
    } else {
        None
    };

    let (_, ids) = learner.groups().project_with_ids(&distinct);
    let local = g.restrict(&distinct);
    let capacity = learner
        .groups()
        .groups()
        .iter()
        .position(|x| x == g)
        .and_then(|gi| ids[gi])
        .map(|pg| {
            let caps = solved.network.capacities();
            caps[pg].iter().max().cloned().unwrap_or_else(Rational::zero)
        })
        .unwrap_or_else(|| if local.is_zero() { Rational::zero() } else { rational::int(n as i64) });
    Ok(TransductiveReport {
        n,
        closed_form,
        permutation_average,
        capacity_bound: over(capacity, n),
        vc_bound: over(rational::int(vc_restricted(learner.class(), g) as i64), n),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgnosticTransductiveReport {
    pub n: usize,
    #[serde(with = "rational::serde_str")]
    pub closed_form: Rational,
    #[serde(with = "crate::evaluation::transductive::opt")]
    pub permutation_average: Option<Rational>,
    /// Φ_g over n.
    #[serde(with = "rational::serde_str")]
    pub phi_bound: Rational,
    /// sqrt(d_{H|g}/n).
    pub rate_bound: f64,
}

/// Excess transductive g-error of the agnostic learner on a labelled tuple.
pub fn agnostic_transductive_error_exact(
    learner: &AgnosticOigLearner,
    sample: &LabeledSample,
    g: &Behavior,
) -> Result<AgnosticTransductiveReport> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::InvalidSample("empty tuple".into()));
    }
    let closed_form = agnostic_closed_form(learner, sample, g)?;
    let credit = rational::int(sample_credit(sample, learner.class(), g) as i64);
    let permutation_average = if n <= PERMUTATION_CAP {
        let mut sum = Rational::zero();
        let perms = permutations(n);
        for order in &perms {
            let seq = sample.permuted(order);
            let (x, y) = seq.entries()[n - 1];
            if !g.get(x) {
                continue;
            }
            let p1 = learner.prob_one(&seq.prefix(n - 1), x)?;
            sum += if y { Rational::one() - p1 } else { p1 };
        }
        Some(over(sum, perms.len()) - over(credit, n))
    } else {
        None
    };
    let (coords, _, _) = canonical_coords(&sample.prefix(n - 1), sample.entries()[n - 1].0);
    let graph = AgnosticGraph::new(learner.class(), learner.groups(), &coords)?;
    let phi = learner
        .groups()
        .groups()
        .iter()
        .position(|x| x == g)
        .and_then(|gi| graph.group_id(gi))
        .map(|pg| graph.phi(pg).clone())
        .unwrap_or_else(Rational::zero);
    let d = vc_restricted(learner.class(), g) as f64;
    Ok(AgnosticTransductiveReport {
        n,
        closed_form,
        permutation_average,
        phi_bound: over(phi, n),
        rate_bound: (d / n as f64).sqrt(),
    })
}
