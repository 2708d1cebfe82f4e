use mgoig::matching::solve_best_effort;
use mgoig::*;
use proptest::prelude::*;

fn class(m: usize) -> impl Strategy<Value = ConceptClass> {
    let full = 1u64 << m;
    proptest::collection::vec(0..full, 1..=(full as usize).min(24))
        .prop_map(move |hs| ConceptClass::new(m, hs.into_iter().map(|b| Behavior::new(b, m))).unwrap())
}

/// Random laminar family: each group is either nested in or disjoint from every other.
fn laminar(m: usize) -> impl Strategy<Value = GroupFamily> {
    proptest::collection::vec((0..m, 1..=m), 1..=4).prop_map(move |spans| {
        let mut groups: Vec<u64> = Vec::new();
        for (start, len) in spans {
            let end = (start + len).min(m);
            let g = ((1u64 << end) - 1) & !((1u64 << start) - 1);
            let ok = groups.iter().all(|&h| h & g == 0 || h & g == g || h & g == h);
            if ok && g != 0 {
                groups.push(g);
            }
        }
        GroupFamily::new(m, groups.into_iter().map(|b| Behavior::new(b, m))).unwrap()
    })
}

fn general(m: usize) -> impl Strategy<Value = GroupFamily> {
    let full = 1u64 << m;
    proptest::collection::vec(1..full, 1..=4)
        .prop_map(move |gs| GroupFamily::new(m, gs.into_iter().map(|b| Behavior::new(b, m))).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn laminar_ceil_and_disjoint_exact_reach_full_value(
        (h, g) in (2usize..=6).prop_flat_map(|m| (class(m), laminar(m))),
        exact in any::<bool>(),
    ) {
        let disjoint = g.groups().iter().enumerate().all(|(i, a)| g.groups()[..i].iter().all(|b| a.bits() & b.bits() == 0));
        let exact = exact && disjoint;
        let c = enumerate_group_realizable(&h, &g).unwrap();
        let oig = build_oig(&c);
        let mode = if exact { CapacityMode::Exact } else { CapacityMode::Ceil };
        let net = build_network(&oig, &g, mode).unwrap();
        let out = solve_best_effort(&net).unwrap();
        prop_assert!(out.complete, "stalled at {} of {} on {:?} / {:?}", out.matching.value(), net.edge_count(),
            c.members().iter().map(|b| b.to_string()).collect::<Vec<_>>(), g.groups().iter().map(|b| b.to_string()).collect::<Vec<_>>());
        prop_assert!(out.matching.is_prediction_sufficient());
        prop_assert!(verify_optimality(&net, &out.matching, &trivial_dual(&net)));
        if !exact {
            prop_assert!(out.matching.is_integral());
        }
    }

    #[test]
    fn general_families_stay_feasible_and_meet_oracle(
        (h, g) in (2usize..=5).prop_flat_map(|m| (class(m), general(m))),
        exact in any::<bool>(),
    ) {
        let c = enumerate_group_realizable(&h, &g).unwrap();
        let oig = build_oig(&c);
        let mode = if exact { CapacityMode::Exact } else { CapacityMode::Ceil };
        let net = build_network(&oig, &g, mode).unwrap();
        let out = solve_best_effort(&net).unwrap();
        prop_assert!(out.matching.is_feasible(&net));
        if let Ok(opt) = brute_force_optimum(&net) {
            let full = Rational::from_integer(net.edge_count().into());
            prop_assert!(opt < full || out.complete, "solver {} below oracle {} on {:?} / {:?}", out.matching.value(), opt,
                c.members().iter().map(|b| b.to_string()).collect::<Vec<_>>(), g.groups().iter().map(|b| b.to_string()).collect::<Vec<_>>());
        }
    }
}
