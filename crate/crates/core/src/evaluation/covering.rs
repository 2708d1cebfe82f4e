//! L1 covers of the group family and the multi-group covering number.

use serde::{Deserialize, Serialize};

use super::task::DiscreteTask;
use crate::concept::{vc_dimension, Behavior, ConceptClass, GroupFamily};
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Largest cover on which the covering number is found by exhaustive search.
pub const EXACT_COVER_CAP: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    /// Group indices, in selection order.
    pub members: Vec<usize>,
    pub vc_dimension: usize,
    /// e(d+1)(2e/ε)^d.
    pub size_bound: f64,
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub cover: CoverReport,
    pub number: usize,
    /// Indices into the group family of a minimum witness set.
    pub witness: Vec<usize>,
    /// False when `number` is a greedy upper bound.
    pub exact: bool,
}

fn check_eps(eps: &Rational) -> Result<()> {
    if *eps <= rational::int(0) || *eps > rational::int(1) {
        return Err(Error::EpsilonOutOfRange(format!("epsilon must be in (0,1], got {}", rational::format(eps))));
    }
    Ok(())
}

/// P(a Δ b).
pub fn l1_distance(task: &DiscreteTask, a: &Behavior, b: &Behavior) -> Rational {
    task.mass(&Behavior::new(a.bits() ^ b.bits(), a.len()))
}

/// Greedy ε-cover: scan groups by decreasing mass (ties in canonical order) and
/// keep each group farther than ε from everything kept so far.
pub fn greedy_l1_cover(groups: &GroupFamily, task: &DiscreteTask, eps: &Rational) -> Result<CoverReport> {
    check_eps(eps)?;
    let gs = groups.groups();
    let mut order: Vec<usize> = (0..gs.len()).collect();
    let masses: Vec<Rational> = gs.iter().map(|g| task.mass(g)).collect();
    order.sort_by(|&a, &b| masses[b].cmp(&masses[a]).then(a.cmp(&b)));
    let mut members: Vec<usize> = Vec::new();
    for i in order {
        if members.iter().all(|&j| l1_distance(task, &gs[i], &gs[j]) > *eps) {
            members.push(i);
        }
    }
    let d = ConceptClass::new(groups.points(), gs.iter().copied()).map(|c| vc_dimension(&c)).unwrap_or(0);
    let e = std::f64::consts::E;
    let epsf = rational::to_f64(eps);
    let size_bound = e * (d as f64 + 1.0) * (2.0 * e / epsf).powi(d as i32);
    Ok(CoverReport { within_bound: members.len() as f64 <= size_bound, members, vc_dimension: d, size_bound })
}

/// Does group `t` cover `g` within ε: P(g \ t) <= ε.
fn covers(task: &DiscreteTask, t: &Behavior, g: &Behavior, eps: &Rational) -> bool {
    task.mass(&Behavior::new(g.bits() & !t.bits(), g.len())) <= *eps
}

/// Smallest T ⊆ G whose members cover every element of the greedy L1 cover.
pub fn mg_covering_number(groups: &GroupFamily, task: &DiscreteTask, eps: &Rational) -> Result<CoveringReport> {
    let cover = greedy_l1_cover(groups, task, eps)?;
    let gs = groups.groups();
    // Bitmask over cover members covered by each candidate.
    let reach: Vec<u32> = gs
        .iter()
        .map(|t| {
            cover
                .members
                .iter()
                .enumerate()
                .filter(|(_, &g)| covers(task, t, &gs[g], eps))
                .fold(0u32, |a, (k, _)| a | 1 << k)
        })
        .collect();
    let k = cover.members.len();
    if k <= EXACT_COVER_CAP {
        if let Some(witness) = exact_set_cover(&reach, (1u32 << k) - 1, k) {
            return Ok(CoveringReport { number: witness.len(), witness, cover, exact: true });
        }
    }
    let witness = greedy_set_cover(&reach, k);
    Ok(CoveringReport { number: witness.len(), witness, cover, exact: false })
}

fn exact_set_cover(reach: &[u32], want: u32, k: usize) -> Option<Vec<usize>> {
    if want == 0 {
        return Some(Vec::new());
    }
    let mut cands: Vec<usize> = (0..reach.len()).filter(|&i| reach[i] != 0).collect();
    // Drop candidates dominated by a larger one.
    cands.sort_by_key(|&i| std::cmp::Reverse(reach[i].count_ones()));
    let mut kept: Vec<usize> = Vec::new();
    for i in cands {
        if !kept.iter().any(|&j| reach[i] & !reach[j] == 0) {
            kept.push(i);
        }
    }
    for size in 1..=k {
        let mut chosen = Vec::new();
        if search(reach, &kept, want, 0, size, &mut chosen) {
            chosen.sort_unstable();
            return Some(chosen);
        }
    }
    None
}

fn search(reach: &[u32], cands: &[usize], want: u32, covered: u32, left: usize, chosen: &mut Vec<usize>) -> bool {
    if covered == want {
        return true;
    }
    if left == 0 {
        return false;
    }
    // Branch on the lowest uncovered element: some chosen set must contain it.
    let bit = (want & !covered).trailing_zeros();
    for &c in cands {
        if reach[c] >> bit & 1 == 0 {
            continue;
        }
        chosen.push(c);
        if search(reach, cands, want, covered | reach[c], left - 1, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

fn greedy_set_cover(reach: &[u32], k: usize) -> Vec<usize> {
    let want: u64 = (1u64 << k) - 1;
    let mut covered = 0u64;
    let mut out = Vec::new();
    while covered != want {
        let best = (0..reach.len()).max_by_key(|&i| ((reach[i] as u64 & !covered).count_ones(), std::cmp::Reverse(i)));
        match best {
            Some(i) if reach[i] as u64 & !covered != 0 => {
                covered |= reach[i] as u64;
                out.push(i);
            }
            _ => break,
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nested_blocks(roots: usize, chain: usize) -> GroupFamily {
        let block = chain + 1;
        let m = roots * block;
        let mut gs = Vec::new();
        for r in 0..roots {
            for size in (1..=block).rev() {
                gs.push(Behavior::from_points(r * block..r * block + size, m));
            }
        }
        GroupFamily::new(m, gs).unwrap()
    }

    fn uniform_task(m: usize) -> DiscreteTask {
        DiscreteTask::agnostic(DiscreteTask::uniform(m), vec![rational::int(0); m]).unwrap()
    }

    #[test]
    fn nested_chains() {
        let g = nested_blocks(3, 5);
        let task = uniform_task(18);
        let eps = rational::ratio(1, 10);
        let r = mg_covering_number(&g, &task, &eps).unwrap();
        assert_eq!(r.cover.members.len(), 9);
        assert_eq!(r.number, 3);
        assert!(r.exact);
        assert!(r.number <= r.cover.members.len() && r.cover.members.len() <= g.len());
        assert!(r.cover.within_bound);
    }

    #[test]
    fn disjoint_groups_need_each_other() {
        let g = GroupFamily::singletons(4).unwrap();
        let task = uniform_task(4);
        let r = mg_covering_number(&g, &task, &rational::ratio(1, 10)).unwrap();
        assert_eq!(r.number, 4);
        let coarse = mg_covering_number(&g, &task, &rational::ratio(1, 2)).unwrap();
        assert_eq!(coarse.cover.members, vec![0]);
        assert_eq!(coarse.number, 1);
    }

    #[test]
    fn rejects_bad_eps() {
        let g = GroupFamily::singletons(2).unwrap();
        assert!(greedy_l1_cover(&g, &uniform_task(2), &rational::int(0)).is_err());
    }
}
