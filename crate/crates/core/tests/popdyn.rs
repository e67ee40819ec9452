use grouptest_core::popdyn::*;
use grouptest_core::{AnalyticConstants, RootType};
use std::f64::consts::LN_2;

fn reference() -> AnalyticConstants {
    AnalyticConstants::new(LN_2, 0.5, 4).unwrap()
}

#[test]
fn init_shapes_and_determinism() {
    let a = init_populations(10_000, PoolInit::Uniform, 0.5, 3).unwrap();
    assert_eq!(a.size(), 10_000);
    assert!(a.pool(RootType::V0Plus).iter().all(|v| (0.0..=1.0).contains(v)));
    assert_ne!(a.pool(RootType::V0Plus), a.pool(RootType::V1Plus));
    assert_eq!(a, init_populations(10_000, PoolInit::Uniform, 0.5, 3).unwrap());
    let p = init_populations(1000, PoolInit::Prior, 0.3, 0).unwrap();
    assert!(p.pool(RootType::V1Plus).iter().all(|&v| v == 0.7));
    assert!(init_populations(10, PoolInit::Uniform, 0.5, 0).is_err());
}

#[test]
fn no_surviving_tests_gives_prior() {
    let c = AnalyticConstants {
        q0: 0.0,
        q1_raw: 0.0,
        ..reference()
    };
    let pop = init_populations(2000, PoolInit::Uniform, 0.5, 1).unwrap();
    let next = sweep(&pop, &c, 7);
    assert!(next.pool(RootType::V0Plus).iter().all(|&v| (v - 0.5).abs() < 1e-15));
    assert!(next.pool(RootType::V1Plus).iter().all(|&v| (v - 0.5).abs() < 1e-15));
    assert_eq!(next.sweeps(), 1);
}

#[test]
fn all_clear_co_members_force_infection() {
    // every test survives and every co-member message says uninfected with certainty
    let pop = MessagePopulation::from_pools(vec![1.0; 1000], vec![1.0; 1000]).unwrap();
    let c = AnalyticConstants {
        q0: 1.0,
        q1_raw: 1.0,
        ..reference()
    };
    let next = sweep(&pop, &c, 0);
    assert!(next.pool(RootType::V0Plus).iter().all(|&v| v == 0.0));
    assert!(next.pool(RootType::V1Plus).iter().all(|&v| v == 0.0));
}

#[test]
fn messages_stay_in_unit_interval() {
    let c = reference();
    let mut pop = init_populations(2000, PoolInit::Uniform, 0.5, 5).unwrap();
    for s in 0..30 {
        pop = sweep(&pop, &c, s);
        for root in RootType::ALL {
            assert!(pop.pool(root).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn sweep_is_deterministic() {
    let c = reference();
    let pop = init_populations(5000, PoolInit::Uniform, 0.5, 9).unwrap();
    assert_eq!(sweep(&pop, &c, 11), sweep(&pop, &c, 11));
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    assert_eq!(single.install(|| sweep(&pop, &c, 11)), sweep(&pop, &c, 11));
}

#[test]
fn histogram_binning() {
    let h = MarginalHistogram::from_values(RootType::V0Plus, &[0.0, 0.5, 0.999, 1.0], 4).unwrap();
    assert_eq!(h.masses, vec![0.25, 0.0, 0.25, 0.5]);
    assert!((h.masses.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert_eq!(h.samples, 4);
    let mut out = Vec::new();
    h.write_csv(&mut out, true).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("root_type,bin_lower,mass\nv0plus,0,0.25\nv0plus,0.25,0\n"));
}

#[test]
fn stabilization_rule() {
    let rule = Stabilization { window: 2, tol: 0.1 };
    let log: Vec<_> = [1.0, 0.5, 0.3, 0.25, 0.2, 0.21]
        .iter()
        .enumerate()
        .map(|(i, &w)| ConvergenceEntry {
            sweep: i + 1,
            w1_v0plus: w,
            w1_v1plus: w / 2.0,
        })
        .collect();
    assert_eq!(rule.change_at(&log, 2), None);
    assert!((rule.change_at(&log, 3).unwrap() - 0.475).abs() < 1e-12);
    assert_eq!(rule.first_stable_sweep(&log), Some(6));
    assert!(rule.final_change(&log).unwrap() < 0.1);
}

#[test]
fn infected_roots_look_more_infected() {
    let c = reference();
    let config = PopdynConfig {
        pop_size: 2000,
        sweeps: 30,
        samples: 20_000,
        ..Default::default()
    };
    let run = run_popdyn(&c, &config).unwrap();
    assert!(run.histograms[1].mean >= run.histograms[0].mean);
    for h in &run.histograms {
        assert!((h.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert_eq!(run.log.len(), 30);
}
