//! Property tests over randomly generated instances: the decomposition
//! round trip, exposure-model relations, support normalization, and the
//! propensity table identities.

use proptest::prelude::*;

use interference_lab::design::Design;
use interference_lab::exposure::ExposureModel;
use interference_lab::graph::InterferenceGraph;
use interference_lab::outcomes::PotentialOutcomeTable;
use interference_lab::propensity::enumerated_propensity;

fn arb_graph(max_n: usize) -> impl Strategy<Value = InterferenceGraph> {
    (3..=max_n)
        .prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            let m = pairs.len();
            (
                Just(n),
                Just(pairs),
                prop::collection::vec(any::<bool>(), m),
            )
        })
        .prop_map(|(n, pairs, mask)| {
            let edges: Vec<(usize, usize)> = pairs
                .into_iter()
                .zip(mask)
                .filter_map(|(e, keep)| keep.then_some(e))
                .collect();
            InterferenceGraph::from_edge_list(n, &edges).unwrap()
        })
}

fn arb_raw_outcomes() -> impl Strategy<Value = Vec<(Vec<f64>, Vec<f64>)>> {
    prop::collection::vec(
        (1usize..5).prop_flat_map(|k| {
            (
                prop::collection::vec(-10.0..10.0f64, k),
                prop::collection::vec(-10.0..10.0f64, k),
            )
        }),
        1..6,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_reproduces_every_raw_outcome(raw in arb_raw_outcomes()) {
        let table = PotentialOutcomeTable::from_raw(&raw).unwrap();
        for (i, (y0, y1)) in raw.iter().enumerate() {
            for e in 0..y0.len() {
                let v0 = table.potential_outcome(i, 0, e as u32).unwrap();
                let v1 = table.potential_outcome(i, 1, e as u32).unwrap();
                prop_assert!((v0 - y0[e]).abs() < 1e-9);
                prop_assert!((v1 - y1[e]).abs() < 1e-9);
            }
            // Normalization pins the zero level.
            prop_assert_eq!(table.unit(i).b[0], 0.0);
            prop_assert_eq!(table.unit(i).c[0], 0.0);
        }
    }

    #[test]
    fn binary_exposure_is_thresholded_count(g in arb_graph(8), bits in any::<u16>()) {
        let z: Vec<u8> = (0..g.n()).map(|i| ((bits >> i) & 1) as u8).collect();
        let bin = ExposureModel::BinaryAny.expose(&g, &z);
        let cnt = ExposureModel::SymmetricCount.expose(&g, &z);
        for i in 0..g.n() {
            prop_assert_eq!(bin.level(i), cnt.level(i).min(1));
            prop_assert!(cnt.level(i) <= g.degree(i) as u32);
        }
    }

    #[test]
    fn exposure_levels_stay_under_the_level_count(g in arb_graph(8), bits in any::<u16>()) {
        let z: Vec<u8> = (0..g.n()).map(|i| ((bits >> i) & 1) as u8).collect();
        for model in [
            ExposureModel::BinaryAny,
            ExposureModel::SymmetricCount,
            ExposureModel::GeneralPattern,
        ] {
            let a = model.expose(&g, &z);
            for i in 0..g.n() {
                prop_assert!(a.level(i) < model.level_count(&g, i).unwrap());
            }
        }
    }

    #[test]
    fn supports_are_normalized_and_propensities_consistent(
        g in arb_graph(6),
        n_t in 1usize..5,
        p in 0.05f64..0.95,
    ) {
        let n = g.n();
        let designs = vec![
            Design::crd(n, n_t.min(n - 1)).unwrap(),
            Design::bernoulli(n, p).unwrap(),
            Design::restricted_bernoulli(n, p).unwrap(),
        ];
        for d in designs {
            let support = d.enumerate_support(1 << 16).unwrap();
            let mass: f64 = support.iter().map(|(_, q)| q).sum();
            prop_assert!((mass - 1.0).abs() < 1e-12);

            let (pi, joint) =
                enumerated_propensity(&d, &g, ExposureModel::BinaryAny, 1 << 16).unwrap();
            for i in 0..n {
                let unit_mass: f64 = pi.unit_cells(i).values().sum();
                prop_assert!((unit_mass - 1.0).abs() < 1e-12);
                for (&ci, &pi_i) in pi.unit_cells(i) {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        for (&cj, &pi_j) in pi.unit_cells(j) {
                            let pij = joint.pi2(i, ci, j, cj);
                            prop_assert!(pij <= pi_i.min(pi_j) + 1e-12);
                        }
                    }
                }
            }
        }
    }
}
