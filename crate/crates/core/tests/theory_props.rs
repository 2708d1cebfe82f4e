use mgoig::evaluation::{agnostic_transductive_error_exact, transductive_error_exact};
use mgoig::agnostic::AgnosticOigLearner;
use mgoig::concept::{sauer_bound, vc_restricted};
use mgoig::density::group_density;
use mgoig::learner::{MgOigLearner, Predictor};
use mgoig::*;
use proptest::prelude::*;

fn class(m: usize) -> impl Strategy<Value = ConceptClass> {
    let full = 1u64 << m;
    proptest::collection::vec(0..full, 1..=(full as usize).min(24))
        .prop_map(move |hs| ConceptClass::new(m, hs.into_iter().map(|b| Behavior::new(b, m))).unwrap())
}

fn laminar(m: usize) -> impl Strategy<Value = GroupFamily> {
    proptest::collection::vec((0..m, 1..=m), 1..=3).prop_map(move |spans| {
        let mut groups: Vec<u64> = Vec::new();
        for (start, len) in spans {
            let end = (start + len).min(m);
            let g = ((1u64 << end) - 1) & !((1u64 << start) - 1);
            if g != 0 && groups.iter().all(|&h| h & g == 0 || h & g == g || h & g == h) {
                groups.push(g);
            }
        }
        GroupFamily::new(m, groups.into_iter().map(|b| Behavior::new(b, m))).unwrap()
    })
}

fn disjoint(m: usize) -> impl Strategy<Value = GroupFamily> {
    proptest::collection::vec(0..3usize, m).prop_map(move |labels| {
        let gs = (0..3)
            .map(|k| Behavior::from_points((0..m).filter(|&i| labels[i] == k), m))
            .filter(|g| !g.is_zero());
        GroupFamily::new(m, gs).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn haussler_density_bound(h in (1usize..=6).prop_flat_map(class), gbits in 1u64..64) {
        let m = h.points();
        let oig = build_oig(&h);
        prop_assert!(verify_haussler(&oig, vc_dimension(&h)));
        let g = Behavior::new(gbits & ((1 << m) - 1), m);
        if !g.is_zero() {
            let r = group_density(&oig, &g);
            prop_assert!(r.density <= rational::int(vc_restricted(&h, &g) as i64));
        }
    }

    #[test]
    fn sauer_and_monotonicity(h in (1usize..=7).prop_flat_map(class), a in 0u64..128, b in 0u64..128) {
        let m = h.points();
        let d = vc_dimension(&h);
        prop_assert!(h.len() as u128 <= sauer_bound(m, d));
        let mask = (1u64 << m) - 1;
        let small = Behavior::new(a & b & mask, m);
        let big = Behavior::new(a & mask, m);
        prop_assert!(vc_restricted(&h, &small) <= vc_restricted(&h, &big));
        prop_assert!(vc_restricted(&h, &big) <= d);
    }

    #[test]
    fn learner_is_permutation_invariant(
        (h, g) in (2usize..=5).prop_flat_map(|m| (class(m), laminar(m))),
        pick in any::<usize>(),
        pts in proptest::collection::vec(0usize..5, 0..5),
        x in 0usize..5,
        rot in 0usize..5,
    ) {
        let m = h.points();
        let c = enumerate_group_realizable(&h, &g).unwrap();
        let target = c.members()[pick % c.len()];
        let pts: Vec<usize> = pts.into_iter().map(|p| p % m).collect();
        let learner = MgOigLearner::new(h, g, CapacityMode::Ceil).unwrap();
        let s = LabeledSample::labeled_by(&target, &pts).unwrap();
        let mut order: Vec<usize> = (0..pts.len()).collect();
        if !order.is_empty() {
            let k = rot % order.len();
            order.rotate_left(k);
            order.reverse();
        }
        let a = learner.prob_one(&s, x % m).unwrap();
        let b = learner.prob_one(&s.permuted(&order), x % m).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn transductive_chain(
        (h, g) in (2usize..=5).prop_flat_map(|m| (class(m), laminar(m))),
        pick in any::<usize>(),
        pts in proptest::collection::vec(0usize..5, 1..=6),
    ) {
        let m = h.points();
        let c = enumerate_group_realizable(&h, &g).unwrap();
        let target = c.members()[pick % c.len()];
        let pts: Vec<usize> = pts.into_iter().map(|p| p % m).collect();
        let learner = MgOigLearner::new(h, g.clone(), CapacityMode::Ceil).unwrap();
        for grp in g.groups() {
            let r = transductive_error_exact(&learner, &pts, &target, grp).unwrap();
            prop_assert_eq!(r.permutation_average.as_ref(), Some(&r.closed_form));
            prop_assert!(r.closed_form <= r.capacity_bound);
            prop_assert!(r.capacity_bound <= r.vc_bound);
        }
    }

    #[test]
    fn agnostic_closed_form_matches_permutations(
        (h, g) in (2usize..=5).prop_flat_map(|m| (class(m), disjoint(m))),
        raw in proptest::collection::vec((0usize..5, any::<bool>()), 1..=6),
    ) {
        let m = h.points();
        let entries: Vec<(usize, bool)> = raw.into_iter().map(|(p, y)| (p % m, y)).collect();
        let s = LabeledSample::noisy(m, entries).unwrap();
        let learner = AgnosticOigLearner::new(h, g.clone()).unwrap();
        for grp in g.groups() {
            let r = agnostic_transductive_error_exact(&learner, &s, grp).unwrap();
            prop_assert_eq!(r.permutation_average.as_ref(), Some(&r.closed_form));
            prop_assert!(r.closed_form <= r.phi_bound);
        }
    }
}
