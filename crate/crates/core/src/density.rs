//! Group-specific maximum subgraph densities.

use num_traits::Zero;
use serde::Serialize;

use crate::concept::Behavior;
use crate::error::{Error, Result};
use crate::flow::{FlowNetwork, INF};
use crate::oig::Oig;
use crate::rational::{self, Rational};

/// Vertex cap for subset enumeration.
pub const BRUTE_FORCE_CAP: usize = 22;
/// Graphs at or below this size use enumeration in `group_density`.
const AUTO_BRUTE_LIMIT: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityReport {
    pub group: Behavior,
    #[serde(with = "rational::serde_str")]
    pub density: Rational,
    /// Sorted vertex indices of a maximizing subset.
    pub witness: Vec<usize>,
    pub witness_edges: usize,
}

impl DensityReport {
    /// Exhaustively confirms that no subset beats the stored density.
    pub fn verify(&self, oig: &Oig) -> Result<bool> {
        let best = max_subgraph_density(oig, &self.group)?;
        let count = count_edges_within(oig, &self.group, &self.witness);
        Ok(best.density == self.density
            && count == self.witness_edges
            && Rational::new(count.into(), self.witness.len().into()) == self.density)
    }
}

fn count_edges_within(oig: &Oig, g: &Behavior, set: &[usize]) -> usize {
    let mut inside = vec![false; oig.vertex_count()];
    for &w in set {
        inside[w] = true;
    }
    oig.edges()
        .iter()
        .filter(|e| g.get(e.coord) && inside[e.u] && inside[e.v])
        .count()
}

fn lex_less(a: u64, b: u64) -> bool {
    let d = a ^ b;
    if d == 0 {
        return false;
    }
    let p = d.trailing_zeros();
    if (a >> p) & 1 == 1 {
        (b >> p) != 0
    } else {
        (a >> p) == 0
    }
}

/// Exact maximum of |E_g^W|/|W| by subset enumeration; the witness is the
/// lexicographically least maximizer as a sorted index sequence.
pub fn max_subgraph_density(oig: &Oig, g: &Behavior) -> Result<DensityReport> {
    max_subgraph_density_with_cap(oig, g, BRUTE_FORCE_CAP)
}

pub fn max_subgraph_density_with_cap(oig: &Oig, g: &Behavior, cap: usize) -> Result<DensityReport> {
    let n = oig.vertex_count();
    let cap = cap.min(24);
    if n > cap {
        return Err(Error::GraphTooLarge { vertices: n, cap });
    }
    let mut adj = vec![0u64; n];
    for e in oig.edges() {
        if g.get(e.coord) {
            adj[e.u] |= 1 << e.v;
            adj[e.v] |= 1 << e.u;
        }
    }
    let mut count = vec![0u32; 1usize << n];
    let (mut best_e, mut best_w, mut best_set) = (0u64, 1u64, 1u64);
    for w in 1u64..(1u64 << n) {
        let low = w.trailing_zeros() as usize;
        let rest = w & (w - 1);
        let e = count[rest as usize] + (adj[low] & w).count_ones();
        count[w as usize] = e;
        let size = w.count_ones() as u64;
        let lhs = e as u64 * best_w;
        let rhs = best_e * size;
        if lhs > rhs || (lhs == rhs && lex_less(w, best_set)) {
            best_e = e as u64;
            best_w = size;
            best_set = w;
        }
    }
    let witness: Vec<usize> = (0..n).filter(|i| (best_set >> i) & 1 == 1).collect();
    Ok(DensityReport {
        group: *g,
        density: rational::ratio(best_e as i64, best_w as i64),
        witness,
        witness_edges: best_e as usize,
    })
}

/// Exact densest g-subgraph by Dinkelbach iteration over min cuts.
pub fn densest_subgraph_flow(oig: &Oig, g: &Behavior) -> DensityReport {
    let rel: Vec<usize> = (0..oig.edge_count())
        .filter(|&i| g.get(oig.edges()[i].coord))
        .collect();
    if rel.is_empty() {
        return DensityReport {
            group: *g,
            density: Rational::zero(),
            witness: vec![0],
            witness_edges: 0,
        };
    }
    let n = oig.vertex_count();
    let mut current: Vec<usize> = {
        let mut touched = vec![false; n];
        for &i in &rel {
            let e = oig.edges()[i];
            touched[e.u] = true;
            touched[e.v] = true;
        }
        (0..n).filter(|&w| touched[w]).collect()
    };
    let mut a = count_edges_within(oig, g, &current) as i64;
    let mut b = current.len() as i64;
    loop {
        let m = rel.len();
        let (s, t) = (0, 1 + m + n);
        let mut net = FlowNetwork::new(m + n + 2);
        for (k, &i) in rel.iter().enumerate() {
            let e = oig.edges()[i];
            net.add_edge(s, 1 + k, b);
            net.add_edge(1 + k, 1 + m + e.u, INF);
            net.add_edge(1 + k, 1 + m + e.v, INF);
        }
        for w in 0..n {
            net.add_edge(1 + m + w, t, a);
        }
        let flow = net.max_flow(s, t);
        if b * m as i64 - flow <= 0 {
            break;
        }
        let side = net.source_side(s);
        let next: Vec<usize> = (0..n).filter(|&w| side[1 + m + w]).collect();
        let a2 = count_edges_within(oig, g, &next) as i64;
        let b2 = next.len() as i64;
        debug_assert!(a2 * b > a * b2);
        current = next;
        a = a2;
        b = b2;
    }
    DensityReport {
        group: *g,
        density: rational::ratio(a, b),
        witness: current,
        witness_edges: a as usize,
    }
}

/// Enumeration on small graphs, min-cut iteration otherwise. Both are exact.
pub fn group_density(oig: &Oig, g: &Behavior) -> DensityReport {
    if oig.vertex_count() <= AUTO_BRUTE_LIMIT {
        max_subgraph_density(oig, g).expect("within cap")
    } else {
        densest_subgraph_flow(oig, g)
    }
}

/// Whether the full-mask density is at most `d`.
pub fn verify_haussler(oig: &Oig, d: usize) -> bool {
    let full = Behavior::ones(oig.points());
    group_density(oig, &full).density <= rational::int(d as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::{vc_dimension, ConceptClass};
    use crate::oig::build_oig;

    fn b(s: &str) -> Behavior {
        s.parse().unwrap()
    }

    #[test]
    fn path_density() {
        let o = build_oig(&ConceptClass::thresholds(3).unwrap());
        let r = max_subgraph_density(&o, &b("111")).unwrap();
        assert_eq!(r.density, rational::ratio(3, 4));
        assert_eq!(r.witness, vec![0, 1, 2, 3]);
        assert!(r.verify(&o).unwrap());
    }

    #[test]
    fn square_single_direction() {
        let o = build_oig(&ConceptClass::full_cube(2).unwrap());
        let r = max_subgraph_density(&o, &b("10")).unwrap();
        assert_eq!(r.density, rational::ratio(1, 2));
        // [0,1,2,3] precedes [0,2] as a sequence.
        assert_eq!(r.witness, vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_vertex() {
        let o = build_oig(&ConceptClass::from_strs(&["010"]).unwrap());
        let r = max_subgraph_density(&o, &b("111")).unwrap();
        assert!(r.density.is_zero());
        assert_eq!(r.witness, vec![0]);
    }

    #[test]
    fn cap_enforced() {
        let o = build_oig(&ConceptClass::full_cube(5).unwrap());
        assert!(matches!(
            max_subgraph_density(&o, &b("11111")),
            Err(Error::GraphTooLarge { vertices: 32, .. })
        ));
    }

    #[test]
    fn flow_matches_enumeration_on_cube() {
        let o = build_oig(&ConceptClass::full_cube(4).unwrap());
        for g in ["1111", "1000", "0110", "1011"] {
            let brute = max_subgraph_density(&o, &b(g)).unwrap();
            let flow = densest_subgraph_flow(&o, &b(g));
            assert_eq!(brute.density, flow.density, "group {g}");
            assert_eq!(
                count_edges_within(&o, &b(g), &flow.witness),
                flow.witness_edges
            );
        }
    }

    #[test]
    fn big_cube_density() {
        let o = build_oig(&ConceptClass::full_cube(8).unwrap());
        assert_eq!(group_density(&o, &Behavior::ones(8)).density, rational::int(4));
        assert_eq!(group_density(&o, &b("00100000")).density, rational::ratio(1, 2));
    }

    #[test]
    fn haussler_examples() {
        let t = ConceptClass::thresholds(3).unwrap();
        assert!(verify_haussler(&build_oig(&t), vc_dimension(&t)));
        let c = ConceptClass::full_cube(3).unwrap();
        assert!(verify_haussler(&build_oig(&c), 3));
        let s = ConceptClass::from_strs(&["101"]).unwrap();
        assert!(verify_haussler(&build_oig(&s), 0));
    }
}
