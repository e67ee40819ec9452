use grouptest_core::graph_model::*;

#[test]
fn derive_params_examples() {
    let p = derive_params(1000, 0.5, std::f64::consts::LN_2, 4).unwrap();
    assert_eq!(p.k, 500);
    // 4 * 0.5 * 1000 / ln 2 = 2885.3900817779268...
    assert_eq!(p.m, 2885);
    assert!((p.c - 2.885).abs() < 1e-12);

    let p = derive_params(10, 0.5, 1.0, 5).unwrap();
    assert_eq!((p.k, p.m), (5, 25));
    assert!((p.c - 2.5).abs() < 1e-12);

    assert!(derive_params(10, 0.99, 100.0, 1).is_err());
}

#[test]
fn derive_params_rejects_bad_input() {
    assert!(derive_params(1, 0.5, 1.0, 1).is_err());
    assert!(derive_params(100, 0.0, 1.0, 1).is_err());
    assert!(derive_params(100, 1.0, 1.0, 1).is_err());
    assert!(derive_params(100, 0.5, 0.0, 1).is_err());
    assert!(derive_params(100, 0.5, f64::NAN, 1).is_err());
    assert!(derive_params(100, 0.5, 1.0, 0).is_err());
    // k rounds to zero
    assert!(derive_params(100, 0.001, 1.0, 1).is_err());
}

#[test]
fn configuration_has_exactly_k_infected() {
    let p = derive_params(4, 0.5, 1.0, 1).unwrap();
    let s = sample_configuration(&p, 3);
    assert_eq!(s.infected_count(), 2);
    assert_eq!(s, sample_configuration(&p, 3));
    assert_eq!(s.infected().len() + s.uninfected().len(), 4);
}

#[test]
fn configuration_is_exchangeable() {
    let p = derive_params(10, 0.3, 1.0, 1).unwrap();
    let draws = 100_000u64;
    let mut hits = [0u64; 10];
    for seed in 0..draws {
        let s = sample_configuration(&p, seed);
        for x in s.infected() {
            hits[x] += 1;
        }
    }
    for h in hits {
        let f = h as f64 / draws as f64;
        assert!((f - 0.3).abs() < 0.01, "frequency {f}");
    }
}

#[test]
fn full_degree_design_covers_everything() {
    let p = derive_params(10, 0.5, 1.0, 5).unwrap();
    let p = Params { delta: p.m, ..p };
    let g = sample_design(&p, 1);
    for x in 0..p.n {
        assert_eq!(g.tests_of(x), (0..p.m).collect::<Vec<_>>().as_slice());
    }
    assert!(g.test_degrees().all(|deg| deg == p.n));
}

#[test]
fn design_adjacency_is_consistent() {
    let p = derive_params(500, 0.2, 0.7, 3).unwrap();
    let g = sample_design(&p, 11);
    assert_eq!(g.test_degrees().sum::<usize>(), p.n * p.delta);
    for x in 0..p.n {
        let t = g.tests_of(x);
        assert_eq!(t.len(), 3);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        for &a in t {
            assert!(g.members_of(a).binary_search(&x).is_ok());
        }
    }
    for a in 0..p.m {
        for &x in g.members_of(a) {
            assert!(g.tests_of(x).contains(&a));
        }
    }
    assert_eq!(g, sample_design(&p, 11));
}

#[test]
fn outcomes_by_definition() {
    // x0 infected alone in test 0; x1, x2 uninfected in test 1
    let g = BipartiteDesign::from_individual_tests(2, vec![vec![0], vec![1], vec![1]]).unwrap();
    let s = Configuration::from_sigma(vec![true, false, false]);
    assert_eq!(compute_outcomes(&g, &s).as_slice(), &[true, false]);

    let none = Configuration::from_sigma(vec![false; 3]);
    assert_eq!(compute_outcomes(&g, &none).positive_count(), 0);

    // one infected among six members
    let g = BipartiteDesign::from_individual_tests(1, vec![vec![0]; 6]).unwrap();
    let mut sigma = vec![false; 6];
    sigma[4] = true;
    assert!(compute_outcomes(&g, &Configuration::from_sigma(sigma)).is_positive(0));
}

#[test]
fn empty_test_is_negative() {
    let g = BipartiteDesign::from_individual_tests(3, vec![vec![0], vec![0]]).unwrap();
    assert_eq!(g.test_degree(2), 0);
    let s = Configuration::from_sigma(vec![true, true]);
    assert_eq!(compute_outcomes(&g, &s).as_slice(), &[true, false, false]);
}

#[test]
fn from_individual_tests_validates() {
    assert!(BipartiteDesign::from_individual_tests(3, vec![vec![0, 0]]).is_err());
    assert!(BipartiteDesign::from_individual_tests(3, vec![vec![0, 1], vec![2]]).is_err());
    assert!(BipartiteDesign::from_individual_tests(2, vec![vec![2]]).is_err());
    assert!(BipartiteDesign::from_individual_tests(2, vec![]).is_err());
}

#[test]
fn edge_list_round_trip() {
    let p = derive_params(60, 0.3, 0.9, 2).unwrap();
    let g = sample_design(&p, 5);
    let mut buf = Vec::new();
    g.write_edge_list(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with(&format!("60 {} 2\n", p.m)));
    assert_eq!(BipartiteDesign::read_edge_list(buf.as_slice()).unwrap(), g);
}

#[test]
fn edge_list_errors() {
    assert!(BipartiteDesign::read_edge_list("".as_bytes()).is_err());
    assert!(BipartiteDesign::read_edge_list("2 2 1\n0 0\n1 x\n".as_bytes()).is_err());
    assert!(BipartiteDesign::read_edge_list("2 2 1\n0 0\n".as_bytes()).is_err());
    assert!(BipartiteDesign::read_edge_list("2 2 1\n0 0\n5 1\n".as_bytes()).is_err());
}

#[test]
fn single_test_design_is_degenerate() {
    let g = BipartiteDesign::from_individual_tests(1, vec![vec![0]; 7]).unwrap();
    let s = Configuration::from_sigma(vec![true, false, true, false, false, false, false]);
    let st = test_composition_stats(&g, &s);
    assert_eq!(st.total_histogram[7], 1);
    assert_eq!(st.infected_histogram[2], 1);
    assert_eq!(st.uninfected_histogram[5], 1);
    assert_eq!(st.var_total, 0.0);
}
