use std::collections::BTreeSet;

use grouptest_core::analytic::{pmf_v0plus_offspring, pmf_v1plus_offspring_joint, AnalyticConstants, Laws};
use grouptest_core::empirical::sample_trial;
use grouptest_core::graph_model::compute_outcomes;
use grouptest_core::reduction::{build_reduced_graph, classify, comp_decode, dd_decode, DdView, Label, Peeling};
use grouptest_core::{derive_params, IndividualType};
use proptest::prelude::*;

fn instance_params() -> impl Strategy<Value = (usize, f64, f64, usize, u64)> {
    (20usize..300, 0.05f64..0.6, 0.3f64..2.0, 1usize..6, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn design_is_left_regular_and_consistent((n, lambda, d, delta, seed) in instance_params()) {
        let params = derive_params(n, lambda, d, delta).unwrap();
        let (sigma, design) = sample_trial(&params, seed, 0);
        prop_assert_eq!(sigma.infected_count(), params.k);
        prop_assert_eq!(design.num_tests(), params.m);
        prop_assert_eq!(design.num_edges(), n * delta);
        for x in 0..n {
            let tests: BTreeSet<_> = design.tests_of(x).iter().copied().collect();
            prop_assert_eq!(tests.len(), delta);
            for &a in &tests {
                prop_assert!(design.members_of(a).contains(&x));
            }
        }
        prop_assert_eq!(design.test_degrees().sum::<usize>(), n * delta);
    }

    #[test]
    fn partition_and_decoders_agree((n, lambda, d, delta, seed) in instance_params()) {
        let params = derive_params(n, lambda, d, delta).unwrap();
        let (sigma, design) = sample_trial(&params, seed, 1);
        let outcomes = compute_outcomes(&design, &sigma);
        let partition = classify(&design, &sigma, &outcomes);
        let comp = comp_decode(&design, &outcomes);
        let dd = dd_decode(&design, &outcomes, DdView::Unresolved);
        for x in 0..n {
            let ty = partition.type_of(x);
            prop_assert_eq!(ty.is_infected(), sigma.is_infected(x));
            if sigma.is_infected(x) {
                prop_assert_eq!(comp.labels[x], Label::Infected);
            }
            let expected = match ty {
                IndividualType::V0Minus => Label::Uninfected,
                IndividualType::V1Minus => Label::Infected,
                _ => Label::Unresolved,
            };
            prop_assert_eq!(dd.labels[x], expected);
        }
    }

    #[test]
    fn reduced_graph_keeps_exactly_the_undecided((n, lambda, d, delta, seed) in instance_params()) {
        let params = derive_params(n, lambda, d, delta).unwrap();
        let (sigma, design) = sample_trial(&params, seed, 2);
        let outcomes = compute_outcomes(&design, &sigma);
        let partition = classify(&design, &sigma, &outcomes);
        let reduced = build_reduced_graph(&design, &outcomes, &partition, Peeling::SinglePass);

        let kept: BTreeSet<usize> = reduced.individual_ids().iter().copied().collect();
        let undecided: BTreeSet<usize> = (0..n).filter(|&x| partition.type_of(x).is_non_hard()).collect();
        prop_assert_eq!(&kept, &undecided);

        let touches_certified = |a: usize| {
            design.members_of(a).iter().any(|&x| partition.type_of(x) == IndividualType::V1Minus)
        };
        let expected_tests: BTreeSet<usize> = (0..design.num_tests())
            .filter(|&a| outcomes.is_positive(a) && !touches_certified(a))
            .collect();
        let tests: BTreeSet<usize> = reduced.test_ids().iter().copied().collect();
        prop_assert_eq!(&tests, &expected_tests);

        for t in 0..reduced.test_ids().len() {
            let members: BTreeSet<usize> = reduced.members_of(t).iter().map(|&i| reduced.individual_id(i)).collect();
            let expected: BTreeSet<usize> = design
                .members_of(reduced.test_id(t))
                .iter()
                .copied()
                .filter(|x| undecided.contains(x))
                .collect();
            prop_assert_eq!(members, expected);
        }

        let iterated = build_reduced_graph(&design, &outcomes, &partition, Peeling::Iterated);
        prop_assert_eq!(iterated.individual_ids(), reduced.individual_ids());
        prop_assert_eq!(iterated.test_ids(), reduced.test_ids());
    }

    #[test]
    fn offspring_laws_are_distributions(d in 0.3f64..1.5, lambda in 0.1f64..0.9, delta in 2usize..7, corrected: bool) {
        let laws = if corrected { Laws::Corrected } else { Laws::Stated };
        let c = AnalyticConstants::with_laws(d, lambda, delta, laws).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.q0));
        prop_assert!(c.mu0 >= 0.0 && c.mu1 >= 0.0);
        let (v0, v1) = pmf_v0plus_offspring(&c, delta).unwrap();
        prop_assert!((v0.total_mass() - 1.0).abs() < 1e-9);
        prop_assert!((v1.total_mass() - 1.0).abs() < 1e-9);
        let joint = pmf_v1plus_offspring_joint(&c, delta - 1).unwrap();
        prop_assert!((joint.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn corrected_factor_is_a_root_of_p1(d in 0.2f64..3.0, lambda in 0.05f64..0.95, delta in 1usize..8) {
        let c = AnalyticConstants::with_laws(d, lambda, delta, Laws::Corrected).unwrap();
        let expected = c.p1_delta.powf((delta as f64 - 1.0) / delta as f64);
        prop_assert!((c.co_member_p1 - expected).abs() <= 1e-12 * expected.max(1e-300));
    }
}
