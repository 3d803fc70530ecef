use distrecon::certify::{
    bruteforce_is_reconstructible, find_undetectable_exhaustive, find_undetectable_randomized, is_detectable_basic,
    is_ell_undetectable, validate_certificate, CertifyError, RandomizedOptions, Reconstructibility,
};
use distrecon::harness::random_pairs;
use distrecon::{sample_gnp, Diameter, GnpParams, Graph, QueryLedger};
use proptest::prelude::*;

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect()
}

#[test]
fn spec_examples() {
    let p4 = Graph::path(4);
    assert!(is_detectable_basic(&p4, &[(0, 1)], 0, 2, 3).unwrap());
    assert!(!is_detectable_basic(&p4, &[(0, 1)], 0, 3, 3).unwrap());
    let p5 = Graph::path(5);
    let q = QueryLedger::from_graph(&p5, [(0, 4)]).unwrap();
    assert!(!is_ell_undetectable(&p5, &q, 1, 3, 2).unwrap());
    assert!(is_ell_undetectable(&p5, &q, 1, 3, 1).unwrap());
    assert!(!validate_certificate(&p5, &q, 1, 3));
    let q = QueryLedger::from_graph(&p4, [(0, 1)]).unwrap();
    assert!(validate_certificate(&p4, &q, 0, 3));
    assert!(validate_certificate(&p4, &QueryLedger::new(4), 0, 2));
    assert!(matches!(
        find_undetectable_exhaustive(&Graph::complete(5), &QueryLedger::new(5), 1),
        Err(CertifyError::DiameterMismatch { .. })
    ));
}

fn tiny_instance() -> impl Strategy<Value = (Graph, QueryLedger)> {
    (4usize..=7, prop_oneof![Just(0.3), Just(0.5)], any::<u64>(), 0.0f64..1.0).prop_map(|(n, p, seed, frac)| {
        let g = sample_gnp(&GnpParams::new(n, p, seed).unwrap());
        let count = (frac * (n * (n - 1) / 2) as f64) as usize;
        let q = QueryLedger::from_graph(&g, random_pairs(n, count, seed ^ 7)).unwrap();
        (g, q)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    // A certificate is a second graph consistent with Q, so enumeration must
    // find ambiguity; with every pair queried there is none.
    #[test]
    fn certificates_imply_ambiguity((g, q) in tiny_instance()) {
        if let Diameter::Finite(d) = g.diameter() {
            if d >= 3 {
                if let Some(c) = find_undetectable_exhaustive(&g, &q, d - 2).unwrap() {
                    prop_assert!(c.validated);
                    prop_assert!(validate_certificate(&g, &q, c.u1, c.u2));
                    let verdict = bruteforce_is_reconstructible(&g, &q).unwrap();
                    prop_assert!(matches!(verdict, Reconstructibility::Ambiguous(_)));
                }
            }
        }
        let full = QueryLedger::from_graph(&g, all_pairs(g.n())).unwrap();
        prop_assert_eq!(bruteforce_is_reconstructible(&g, &full).unwrap(), Reconstructibility::Unique);
    }

    // The ambiguity witness really reproduces every answer.
    #[test]
    fn ambiguity_witness_is_consistent((g, q) in tiny_instance()) {
        if let Reconstructibility::Ambiguous(w) = bruteforce_is_reconstructible(&g, &q).unwrap() {
            prop_assert_ne!(&w, &g);
            for (a, b, d) in q.iter() {
                prop_assert_eq!(w.bfs_distances(a).get(b), d);
            }
        }
    }
}

#[test]
fn randomized_certificates_validate() {
    let n = 600;
    let p = 0.06;
    let mut found = 0;
    for seed in 0..4 {
        let g = sample_gnp(&GnpParams::new(n, p, seed).unwrap());
        if g.diameter() != Diameter::Finite(3) {
            continue;
        }
        let q = QueryLedger::from_graph(&g, random_pairs(n, 2000, seed)).unwrap();
        let mut opts = RandomizedOptions::new(n, 1);
        opts.extend = true;
        opts.budget_n = Some(q.len() as f64);
        if let Some(c) = find_undetectable_randomized(&g, &q, 1, opts, seed).unwrap().certificate {
            assert!(validate_certificate(&g, &q, c.u1, c.u2));
            assert!(!g.has_edge(c.u1, c.u2) && !q.contains(c.u1, c.u2));
            found += 1;
        }
    }
    assert!(found >= 1);
}
