use mgoig::agnostic::AgnosticGraph;
use mgoig::matching::solve_best_effort;
use mgoig::*;
use proptest::prelude::*;

fn setup(m: usize, disjoint: bool) -> impl Strategy<Value = (ConceptClass, GroupFamily)> {
    let full = 1u64 << m;
    (
        proptest::collection::vec(0..full, 1..=(full as usize).min(12)),
        proptest::collection::vec(1..full, 1..=3),
    )
        .prop_map(move |(hs, gs)| {
            let h = ConceptClass::new(m, hs.into_iter().map(|b| Behavior::new(b, m))).unwrap();
            let mut kept: Vec<u64> = Vec::new();
            for g in gs {
                if !disjoint || kept.iter().all(|&k| k & g == 0) {
                    kept.push(g);
                }
            }
            (h, GroupFamily::new(m, kept.into_iter().map(|b| Behavior::new(b, m))).unwrap())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn agnostic_networks_reach_full_value(
        (h, g) in (2usize..=5).prop_flat_map(|m| setup(m, true)),
        coords in proptest::collection::vec(0usize..5, 1..=7),
    ) {
        let m = h.points();
        let mut coords: Vec<usize> = coords.into_iter().map(|c| c % m).collect();
        coords.sort();
        let graph = AgnosticGraph::new(&h, &g, &coords).unwrap();
        let net = graph.network().unwrap();
        let out = solve_best_effort(&net).unwrap();
        prop_assert!(out.complete, "stalled {} of {} coords {:?} H {:?} G {:?}", out.matching.value(), net.edge_count(), coords,
            h.members().iter().map(|b| b.to_string()).collect::<Vec<_>>(), g.groups().iter().map(|b| b.to_string()).collect::<Vec<_>>());
    }
}
