//! Agnostic one-inclusion graph on the full hypercube with per-vertex group credits.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::concept::{Behavior, ConceptClass, GroupFamily, LabeledSample};
use crate::error::{Error, Result};
use crate::learner::{Predictor, PredictorKind};
use crate::matching::{build_network_explicit, solve_matching, MgNetwork, SolveOutcome};
use crate::oig::Oig;
use crate::rational::{self, Rational};

/// Largest coordinate count of an agnostic graph (2^12 vertices).
pub const MAX_COORDS: usize = 12;

/// min over h of disagreements with `u` inside `g`.
pub fn credit(u: &Behavior, h: &ConceptClass, g: &Behavior) -> usize {
    h.members()
        .iter()
        .map(|c| ((c.bits() ^ u.bits()) & g.bits()).count_ones() as usize)
        .min()
        .unwrap_or(0)
}

#[derive(Clone, Debug)]
pub struct AgnosticGraph {
    coords: Vec<usize>,
    patterns: ConceptClass,
    groups: GroupFamily,
    /// Original group id to projected id.
    group_ids: Vec<Option<usize>>,
    /// credits[g][bits]
    credits: Vec<Vec<u32>>,
    phi: Vec<Rational>,
}

impl AgnosticGraph {
    /// Graph whose coordinate k is the domain point `coords[k]`; points may repeat.
    pub fn new(h: &ConceptClass, groups: &GroupFamily, coords: &[usize]) -> Result<Self> {
        let n = coords.len();
        if n > MAX_COORDS {
            return Err(Error::InstanceTooLarge(format!(
                "agnostic graph on {n} coordinates needs 2^{n} vertices, cap is 2^{MAX_COORDS}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("agnostic graph needs a coordinate".into()));
        }
        let patterns = ConceptClass::new(n, h.members().iter().map(|c| c.restrict(coords)))?;
        let (projected, group_ids) = groups.project_with_ids(coords);
        let size = 1usize << n;
        let credits: Vec<Vec<u32>> = projected
            .groups()
            .iter()
            .map(|g| {
                (0..size as u64)
                    .map(|v| credit(&Behavior::new(v, n), &patterns, g) as u32)
                    .collect()
            })
            .collect();
        let phi = projected
            .groups()
            .iter()
            .zip(&credits)
            .map(|(g, cr)| {
                let edges = g.count_ones() as i64 * (size as i64 / 2);
                let total: i64 = cr.iter().map(|&c| c as i64).sum();
                rational::ratio(edges - total, size as i64)
            })
            .collect();
        Ok(AgnosticGraph { coords: coords.to_vec(), patterns, groups: projected, group_ids, credits, phi })
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn patterns(&self) -> &ConceptClass {
        &self.patterns
    }

    pub fn groups(&self) -> &GroupFamily {
        &self.groups
    }

    /// Projected id of an original group, if its projection is nonempty.
    pub fn group_id(&self, original: usize) -> Option<usize> {
        self.group_ids[original]
    }

    pub fn credit(&self, g: usize, v: &Behavior) -> usize {
        self.credits[g][v.bits() as usize] as usize
    }

    /// Discounted density of the full vertex set.
    pub fn phi(&self, g: usize) -> &Rational {
        &self.phi[g]
    }

    pub fn capacity(&self, g: usize, v: &Behavior) -> Rational {
        &self.phi[g] + rational::int(self.credit(g, v) as i64)
    }

    /// (|E_g^W| - sum of credits over W) / |W|, with W given as vertex bit patterns.
    pub fn discounted_density(&self, w: &[u64], g: usize) -> Rational {
        assert!(!w.is_empty(), "W must be nonempty");
        let mask = self.groups.groups()[g].bits();
        let set: std::collections::HashSet<u64> = w.iter().copied().collect();
        let mut edges = 0i64;
        for &a in &set {
            for c in 0..self.n() {
                if mask >> c & 1 == 1 && a >> c & 1 == 0 && set.contains(&(a | 1 << c)) {
                    edges += 1;
                }
            }
        }
        let credit: i64 = set.iter().map(|&a| self.credits[g][a as usize] as i64).sum();
        rational::ratio(edges - credit, set.len() as i64)
    }

    /// Maximum discounted density over all nonempty W; only for n <= 4.
    pub fn phi_oracle(&self, g: usize) -> Result<Rational> {
        if self.n() > 4 {
            return Err(Error::InstanceTooLarge("oracle limited to 4 coordinates".into()));
        }
        let size = 1u64 << self.n();
        let mut best: Option<Rational> = None;
        for subset in 1u64..(1u64 << size) {
            let w: Vec<u64> = (0..size).filter(|v| subset >> v & 1 == 1).collect();
            let d = self.discounted_density(&w, g);
            if best.as_ref().is_none_or(|b| d > *b) {
                best = Some(d);
            }
        }
        Ok(best.unwrap())
    }

    /// Full cube OIG with the explicit agnostic capacities.
    pub fn network(&self) -> Result<MgNetwork> {
        let cube = ConceptClass::full_cube(self.n())?;
        let oig = Oig::build(&cube, Some(&self.groups));
        let caps = (0..self.groups.len())
            .map(|g| cube.members().iter().map(|v| self.capacity(g, v)).collect())
            .collect();
        build_network_explicit(&oig, &self.groups, caps)
    }

    pub fn audit(&self) -> AgnosticAudit {
        let cube: Vec<Behavior> = (0..1u64 << self.n()).map(|v| Behavior::new(v, self.n())).collect();
        AgnosticAudit {
            coords: self.coords.clone(),
            groups: self
                .groups
                .groups()
                .iter()
                .enumerate()
                .map(|(g, mask)| GroupAudit {
                    group: mask.to_string(),
                    phi: rational::format(&self.phi[g]),
                    credits: cube.iter().map(|v| (v.to_string(), self.credit(g, v))).collect(),
                    capacities: cube
                        .iter()
                        .map(|v| (v.to_string(), rational::format(&self.capacity(g, v))))
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupAudit {
    pub group: String,
    pub phi: String,
    pub credits: Vec<(String, usize)>,
    pub capacities: Vec<(String, String)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AgnosticAudit {
    pub coords: Vec<usize>,
    pub groups: Vec<GroupAudit>,
}

#[derive(Debug)]
pub struct SolvedAgnostic {
    pub graph: AgnosticGraph,
    pub network: MgNetwork,
    pub outcome: SolveOutcome,
}

impl SolvedAgnostic {
    /// P(predict 1) under the raw solved matching.
    pub fn raw_prob_one_at(&self, bits: u64, j: usize) -> Rational {
        let n = self.graph.n();
        let oig = self.network.oig();
        let a = oig.vertices().index_of(&Behavior::new(bits & !(1 << j), n)).unwrap();
        let b = oig.vertices().index_of(&Behavior::new(bits | (1 << j), n)).unwrap();
        let e = oig.edge_between(a, b).unwrap();
        self.outcome.matching.to_u(e).clone()
    }

    /// P(predict 1) at coordinate `j` given labels `bits` on the other
    /// coordinates, averaged over rearrangements of coordinates that share a
    /// point. The graph is invariant under those rearrangements, so this is the
    /// prediction of the symmetrized (still feasible) matching.
    pub fn prob_one_at(&self, bits: u64, j: usize) -> Rational {
        let coords = self.graph.coords();
        let mut runs: Vec<(usize, usize, usize, bool)> = Vec::new();
        let mut start = 0;
        while start < coords.len() {
            let end = (start..coords.len()).find(|&k| coords[k] != coords[start]).unwrap_or(coords.len());
            let test = (start..end).contains(&j);
            let ones = (start..end).filter(|&k| k != j && bits >> k & 1 == 1).count();
            runs.push((start, end, ones, test));
            start = end;
        }
        if runs.iter().all(|r| r.1 - r.0 == 1) {
            return self.raw_prob_one_at(bits, j);
        }
        let mut sum = Rational::zero();
        let mut count = 0u64;
        self.arrangements(&runs, 0, 0, usize::MAX, &mut |b, t| {
            sum += self.raw_prob_one_at(b, t);
            count += 1;
        });
        sum / rational::int(count as i64)
    }

    fn arrangements(
        &self,
        runs: &[(usize, usize, usize, bool)],
        r: usize,
        bits: u64,
        test: usize,
        visit: &mut dyn FnMut(u64, usize),
    ) {
        let Some(&(start, end, ones, has_test)) = runs.get(r) else {
            visit(bits, test);
            return;
        };
        let slots: Vec<usize> = if has_test { (start..end).collect() } else { vec![usize::MAX] };
        for t in slots {
            let free: Vec<usize> = (start..end).filter(|&k| k != t).collect();
            for_each_subset(&free, ones, 0, 0, &mut |mask| {
                let next_test = if has_test { t } else { test };
                self.arrangements(runs, r + 1, bits | mask, next_test, visit);
            });
        }
    }

    /// Weight f_{e,v} on the edge at vertex `bits` along coordinate `j`, toward that vertex.
    pub fn toward(&self, bits: u64, j: usize) -> Rational {
        let p1 = self.prob_one_at(bits, j);
        if bits >> j & 1 == 1 {
            Rational::one() - p1
        } else {
            p1
        }
    }
}

/// Calls `f` with the bit mask of every `k`-subset of `items[from..]`.
fn for_each_subset(items: &[usize], k: usize, from: usize, acc: u64, f: &mut dyn FnMut(u64)) {
    if k == 0 {
        f(acc);
        return;
    }
    for i in from..items.len() {
        if items.len() - i < k {
            break;
        }
        for_each_subset(items, k - 1, i + 1, acc | 1 << items[i], f);
    }
}

/// Coordinates for a sample plus test point: sorted by point, and within a
/// point by label 0, then the test slot, then label 1.
pub fn canonical_coords(sample: &LabeledSample, x: usize) -> (Vec<usize>, u64, usize) {
    let mut keyed: Vec<(usize, u8)> = sample
        .entries()
        .iter()
        .map(|&(p, y)| (p, if y { 2 } else { 0 }))
        .collect();
    keyed.push((x, 1));
    keyed.sort_unstable();
    let coords = keyed.iter().map(|&(p, _)| p).collect();
    let bits = keyed
        .iter()
        .enumerate()
        .filter(|(_, &(_, r))| r == 2)
        .fold(0u64, |acc, (k, _)| acc | 1 << k);
    let j = keyed.iter().position(|&(_, r)| r == 1).unwrap();
    (coords, bits, j)
}

/// The agnostic multi-group one-inclusion graph learner.
pub struct AgnosticOigLearner {
    h: ConceptClass,
    groups: GroupFamily,
    cache: Mutex<HashMap<Vec<usize>, Arc<SolvedAgnostic>>>,
}

impl AgnosticOigLearner {
    pub fn new(h: ConceptClass, groups: GroupFamily) -> Result<Self> {
        if h.points() != groups.points() {
            return Err(Error::InvalidParameter("class and groups on different domains".into()));
        }
        Ok(AgnosticOigLearner { h, groups, cache: Mutex::new(HashMap::new()) })
    }

    pub fn class(&self) -> &ConceptClass {
        &self.h
    }

    pub fn groups(&self) -> &GroupFamily {
        &self.groups
    }

    /// Solved graph on a coordinate tuple (sorted by point).
    pub fn solve_coords(&self, coords: &[usize]) -> Result<Arc<SolvedAgnostic>> {
        if let Some(s) = self.cache.lock().unwrap().get(coords) {
            return Ok(s.clone());
        }
        let graph = AgnosticGraph::new(&self.h, &self.groups, coords)?;
        let network = graph.network()?;
        let outcome = solve_matching(&network)?;
        let solved = Arc::new(SolvedAgnostic { graph, network, outcome });
        self.cache.lock().unwrap().insert(coords.to_vec(), solved.clone());
        Ok(solved)
    }
}

impl Predictor for AgnosticOigLearner {
    fn kind(&self) -> PredictorKind {
        PredictorKind::Base
    }

    fn name(&self) -> String {
        "mgoig-agnostic".into()
    }

    fn prob_one(&self, sample: &LabeledSample, x: usize) -> Result<Rational> {
        let (coords, bits, j) = canonical_coords(sample, x);
        let solved = self.solve_coords(&coords)?;
        Ok(solved.prob_one_at(bits, j))
    }
}

/// Per-occurrence disagreement ‖S − H‖_g of a labeled tuple with the class.
pub fn sample_credit(sample: &LabeledSample, h: &ConceptClass, g: &Behavior) -> usize {
    h.members()
        .iter()
        .map(|c| {
            sample
                .entries()
                .iter()
                .filter(|&&(p, y)| g.get(p) && c.get(p) != y)
                .count()
        })
        .min()
        .unwrap_or(0)
}

/// (1/n) sum over coordinates in g of f_{e,v} minus (1/n)‖S − H‖_g, on the
/// agnostic graph built over the sorted sample points.
pub fn agnostic_closed_form(learner: &AgnosticOigLearner, sample: &LabeledSample, g: &Behavior) -> Result<Rational> {
    let n = sample.len();
    if n == 0 {
        return Ok(Rational::zero());
    }
    let mut keyed: Vec<(usize, bool)> = sample.entries().to_vec();
    keyed.sort_unstable();
    let coords: Vec<usize> = keyed.iter().map(|&(p, _)| p).collect();
    let bits = keyed.iter().enumerate().filter(|(_, e)| e.1).fold(0u64, |a, (k, _)| a | 1 << k);
    let solved = learner.solve_coords(&coords)?;
    let mut total = Rational::zero();
    for (k, &p) in coords.iter().enumerate() {
        if g.get(p) {
            total += solved.toward(bits, k);
        }
    }
    total -= rational::int(sample_credit(sample, learner.class(), g) as i64);
    Ok(total / Rational::from_integer(BigInt::from(n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> Behavior {
        s.parse().unwrap()
    }

    fn one_point() -> AgnosticGraph {
        let h = ConceptClass::from_strs(&["1"]).unwrap();
        AgnosticGraph::new(&h, &GroupFamily::full(1).unwrap(), &[0]).unwrap()
    }

    #[test]
    fn credit_examples() {
        let h = ConceptClass::from_strs(&["1"]).unwrap();
        assert_eq!(credit(&b("0"), &h, &b("1")), 1);
        assert_eq!(credit(&b("1"), &h, &b("1")), 0);
        let h = ConceptClass::from_strs(&["110"]).unwrap();
        assert_eq!(credit(&b("111"), &h, &b("110")), 0);
    }

    #[test]
    fn one_point_densities() {
        let g = one_point();
        assert_eq!(g.discounted_density(&[0, 1], 0), rational::int(0));
        assert_eq!(g.discounted_density(&[0], 0), rational::int(-1));
        assert_eq!(*g.phi(0), rational::int(0));
        assert_eq!(g.phi_oracle(0).unwrap(), rational::int(0));
        assert_eq!(g.capacity(0, &b("1")), rational::int(0));
        assert_eq!(g.capacity(0, &b("0")), rational::int(1));
    }

    #[test]
    fn full_cube_hypotheses() {
        let h = ConceptClass::full_cube(3).unwrap();
        let gr = AgnosticGraph::new(&h, &GroupFamily::new(3, [b("111"), b("010")]).unwrap(), &[0, 1, 2]).unwrap();
        let full = gr.groups().groups().iter().position(|g| g.count_ones() == 3).unwrap();
        let single = 1 - full;
        assert_eq!(*gr.phi(full), rational::ratio(3, 2));
        assert_eq!(*gr.phi(single), rational::ratio(1, 2));
        assert_eq!(gr.discounted_density(&(0..8).collect::<Vec<_>>(), full), rational::ratio(3, 2));
        assert_eq!(gr.capacity(full, &b("101")), rational::ratio(3, 2));
    }

    #[test]
    fn empty_sample_prediction() {
        let l = AgnosticOigLearner::new(
            ConceptClass::from_strs(&["1"]).unwrap(),
            GroupFamily::full(1).unwrap(),
        )
        .unwrap();
        let s = LabeledSample::noisy(1, vec![]).unwrap();
        assert!(l.prob_one(&s, 0).unwrap().is_one());
        let s0 = LabeledSample::noisy(1, vec![(0, false)]).unwrap();
        // The closed form: mistake probability 1 minus one unit of disagreement.
        assert_eq!(agnostic_closed_form(&l, &s0, &b("1")).unwrap(), rational::int(0));
    }

    #[test]
    fn canonical_coordinates_place_test_between_labels() {
        let s = LabeledSample::noisy(3, vec![(2, true), (1, false), (2, false), (0, true)]).unwrap();
        let (coords, bits, j) = canonical_coords(&s, 2);
        assert_eq!(coords, vec![0, 1, 2, 2, 2]);
        assert_eq!(j, 3);
        assert_eq!(bits, 0b10001);
    }

    #[test]
    fn size_cap() {
        let h = ConceptClass::thresholds(3).unwrap();
        let coords = vec![0; 13];
        assert!(matches!(
            AgnosticGraph::new(&h, &GroupFamily::full(3).unwrap(), &coords),
            Err(Error::InstanceTooLarge(_))
        ));
    }
}
