use grouptest_core::graph_model::compute_outcomes;
use grouptest_core::reduction::*;
use grouptest_core::{BipartiteDesign, Configuration, Outcomes};

/// a1 = {x1, x2} positive with x1 infected, a2 = {x3, x4} negative (0-based).
fn hand_instance() -> (BipartiteDesign, Configuration, Outcomes) {
    let g = BipartiteDesign::from_individual_tests(2, vec![vec![0], vec![0], vec![1], vec![1]]).unwrap();
    let s = Configuration::from_sigma(vec![true, false, false, false]);
    let o = compute_outcomes(&g, &s);
    (g, s, o)
}

#[test]
fn classify_hand_instance() {
    let (g, s, o) = hand_instance();
    let p = classify(&g, &s, &o);
    assert_eq!(p.v0_minus(), vec![2, 3]);
    assert_eq!(p.v0_plus(), vec![1]);
    assert_eq!(p.v1_plus(), vec![0]);
    assert!(p.v1_minus().is_empty());
}

#[test]
fn lone_infected_is_certified() {
    let g = BipartiteDesign::from_individual_tests(2, vec![vec![0], vec![1]]).unwrap();
    let s = Configuration::from_sigma(vec![true, true]);
    let o = compute_outcomes(&g, &s);
    let p = classify(&g, &s, &o);
    assert_eq!(p.v1_minus(), vec![0, 1]);
}

#[test]
fn reduced_graph_hand_instance() {
    let (g, s, o) = hand_instance();
    let p = classify(&g, &s, &o);
    let r = build_reduced_graph(&g, &o, &p, Peeling::SinglePass);
    assert_eq!(r.individual_ids(), &[0, 1]);
    assert_eq!(r.test_ids(), &[0]);
    assert_eq!(r.members_of(0), &[0, 1]);
    assert_eq!(r.num_edges(), 2);
}

#[test]
fn removal_steps_on_small_instances() {
    // x0 infected alone in test 0; x1 infected with uninfected x2 in test 1,
    // x2 also in negative test 2
    let g = BipartiteDesign::from_individual_tests(3, vec![vec![0, 1], vec![1, 0], vec![1, 2], vec![2, 0]]).unwrap();
    // test 0 = {x0, x1, x3}, test 1 = {x0, x1, x2}, test 2 = {x2, x3}
    let s = Configuration::from_sigma(vec![true, false, false, false]);
    let o = compute_outcomes(&g, &s);
    assert_eq!(o.as_slice(), &[true, true, false]);
    let p = classify(&g, &s, &o);
    // x1 is uninfected but sits only in positive tests
    assert_eq!(p.v0_plus(), vec![1]);
    assert_eq!(p.v1_plus(), vec![0]);
    let r = build_reduced_graph(&g, &o, &p, Peeling::SinglePass);
    assert_eq!(r.num_tests(), 2);

    let s = Configuration::from_sigma(vec![true, false, true, false]);
    let o = compute_outcomes(&g, &s);
    let p = classify(&g, &s, &o);
    let r = build_reduced_graph(&g, &o, &p, Peeling::SinglePass);
    // x2 infected and x3 uninfected: every test positive, nobody certified
    assert!(p.v1_minus().is_empty());
    assert_eq!(r.num_tests(), 3);

    let g = BipartiteDesign::from_individual_tests(2, vec![vec![0], vec![0], vec![1]]).unwrap();
    let s = Configuration::from_sigma(vec![true, false, true]);
    let o = compute_outcomes(&g, &s);
    let p = classify(&g, &s, &o);
    assert_eq!(p.v1_minus(), vec![2]);
    let r = build_reduced_graph(&g, &o, &p, Peeling::SinglePass);
    assert_eq!(r.num_tests(), 1);

    // every positive test adjacent to V1-
    let g = BipartiteDesign::from_individual_tests(2, vec![vec![0], vec![1], vec![1]]).unwrap();
    let s = Configuration::from_sigma(vec![true, true, false]);
    let o = compute_outcomes(&g, &s);
    let p = classify(&g, &s, &o);
    assert_eq!(p.v1_minus(), vec![0]);
    assert_eq!(p.v1_plus(), vec![1]);
    let r = build_reduced_graph(&g, &o, &p, Peeling::SinglePass);
    assert_eq!(r.num_tests(), 1);
    let g = BipartiteDesign::from_individual_tests(1, vec![vec![0], vec![0]]).unwrap();
    let s = Configuration::from_sigma(vec![true, false]);
    let o = compute_outcomes(&g, &s);
    let p = classify(&g, &s, &o);
    // x1 is V0+ but its only test is explained by x0
    assert_eq!(p.v1_minus(), Vec::<usize>::new());
    let g = BipartiteDesign::from_individual_tests(2, vec![vec![0], vec![1]]).unwrap();
    let s = Configuration::from_sigma(vec![true, true]);
    let o = compute_outcomes(&g, &s);
    let p = classify(&g, &s, &o);
    let r = build_reduced_graph(&g, &o, &p, Peeling::SinglePass);
    assert!(r.is_empty());
    assert_eq!(r.num_individuals(), 0);
}

#[test]
fn decoders_hand_instance() {
    let (g, _, o) = hand_instance();
    let comp = comp_decode(&g, &o);
    assert_eq!(
        comp.labels,
        vec![Label::Infected, Label::Infected, Label::Uninfected, Label::Uninfected]
    );
    let dd = dd_decode(&g, &o, DdView::Unresolved);
    assert_eq!(
        dd.labels,
        vec![
            Label::Unresolved,
            Label::Unresolved,
            Label::Uninfected,
            Label::Uninfected
        ]
    );
    let dd = dd_decode(&g, &o, DdView::DeclareUninfected);
    assert_eq!(dd.count(Label::Uninfected), 4);
}

#[test]
fn components_and_subgraph() {
    let r = ReducedGraph::from_tests(5, &[vec![0, 1], vec![1, 2], vec![3, 4]]);
    let comps = r.components();
    assert_eq!(comps.len(), 2);
    assert_eq!(comps[0], (vec![0, 1, 2], vec![0, 1]));
    assert_eq!(comps[1], (vec![3, 4], vec![2]));
    let sub = r.subgraph(&comps[1].0, &comps[1].1);
    assert_eq!(sub.individual_ids(), &[3, 4]);
    assert_eq!(sub.members_of(0), &[0, 1]);
    assert_eq!(sub.tests_of(1), &[0]);
}

#[test]
fn partition_csv_header() {
    let mut buf = Vec::new();
    write_partition_csv(
        &[PartitionRow {
            trial: 0,
            v0_minus: 1,
            v0_plus: 2,
            v1_minus: 3,
            v1_plus: 4,
            surviving_tests: 5,
        }],
        &mut buf,
    )
    .unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "trial,v0_minus,v0_plus,v1_minus,v1_plus,surviving_tests\n0,1,2,3,4,5\n"
    );
}
