//! Library routes checked against the brute-force oracles in `common` on
//! arbitrary small digraphs.

mod common;

use flagmetrics::flag::DirectedFlagComplex;
use flagmetrics::graphlets::{catalog, orbit_degree_table, triad_census, OrbitCounting};
use flagmetrics::homology::{betti_numbers, betti_numbers_approx};
use flagmetrics::pseudometrics::DistanceMatrix;
use flagmetrics::stats::dcor;
use flagmetrics::DirectedGraph;
use proptest::prelude::*;

fn digraph() -> impl Strategy<Value = DirectedGraph> {
    (2usize..8).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
            let edges = (0..n * n).filter(|&i| bits[i] && i / n != i % n).map(|i| (i / n, i % n));
            DirectedGraph::from_edges(n, edges).unwrap()
        })
    })
}

fn euclidean(points: &[(f64, f64)]) -> DistanceMatrix {
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|a| points.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect())
        .collect();
    DistanceMatrix::from_rows("euclid", &rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simplex_counts_match_enumeration(g in digraph()) {
        let complex = DirectedFlagComplex::build(&g, 4);
        prop_assert_eq!(&complex.counts()[..], &common::brute_counts(&g, 4)[..]);
    }

    #[test]
    fn betti_numbers_match_dense_ranks(g in digraph()) {
        let complex = DirectedFlagComplex::build(&g, 3);
        let exact = betti_numbers(&complex, 3);
        prop_assert_eq!(exact.lower.clone(), common::dense_betti(&g, 3));
        prop_assert_eq!(exact.lower, exact.upper);
    }

    #[test]
    fn budgeted_intervals_contain_dense_betti(g in digraph(), eps in 0u64..20) {
        let r = betti_numbers_approx(&DirectedFlagComplex::build(&g, 3), 3, Some(eps));
        for (k, b) in common::dense_betti(&g, 3).into_iter().enumerate() {
            prop_assert!(r.lower[k] <= b && b <= r.upper[k]);
        }
    }

    #[test]
    fn census_and_orbits_match_isomorphism_testing(g in digraph()) {
        let cat = catalog();
        let codes: Vec<u8> = cat.classes().iter().map(|c| c.code).collect();
        let orbits: Vec<[usize; 3]> = cat.classes().iter().map(|c| c.position_orbits).collect();
        prop_assert_eq!(&triad_census(&g).counts[..], &common::brute_census(&g, &codes)[..]);
        for (counting, induced) in [(OrbitCounting::Subgraph, false), (OrbitCounting::Induced, true)] {
            let table = orbit_degree_table(&g, counting);
            let oracle = common::brute_orbit_table(&g, &codes, &orbits, induced);
            for (a, b) in table.iter().zip(&oracle) {
                prop_assert_eq!(&a[..], &b[..]);
            }
        }
    }

    #[test]
    fn dcor_matches_raw_sums(points in proptest::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64), 4..20)) {
        let a = euclidean(&points.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>());
        let b = euclidean(&points.iter().map(|p| (p.1, p.2)).collect::<Vec<_>>());
        let expected = common::dcor_by_sums(&a, &b);
        prop_assert!((dcor(&a, &b).unwrap() - expected).abs() < 1e-9);
    }
}
