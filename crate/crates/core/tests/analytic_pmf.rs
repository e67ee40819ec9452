#![allow(clippy::needless_range_loop)]

use grouptest_core::analytic::AnalyticConstants;
use grouptest_core::analytic::*;
use std::f64::consts::LN_2;

fn reference() -> AnalyticConstants {
    AnalyticConstants::new(LN_2, 0.5, 4).unwrap()
}

#[test]
fn zero_truncated_poisson_at_ln2() {
    let cutoff = poisson_cutoff(LN_2, 1e-15);
    let pmf = truncated_poisson_pmf(LN_2, cutoff).unwrap();
    assert_eq!(pmf.pmf(0), 0.0);
    assert!((pmf.pmf(1) - LN_2).abs() < 1e-15);
    assert!((pmf.total_mass() - 1.0).abs() < 1e-12);
    // mean mu / (1 - e^{-mu}) = 2 ln 2
    assert!((pmf.mean() - 2.0 * LN_2).abs() < 1e-12);
}

#[test]
fn zero_truncated_poisson_rejects_zero_mean() {
    assert!(truncated_poisson_pmf(0.0, 10).is_err());
    assert!(truncated_poisson_pmf(-1.0, 10).is_err());
    assert!(truncated_poisson_pmf(f64::NAN, 10).is_err());
}

#[test]
fn chernoff_cutoff_bounds_tail() {
    for &mu in &[0.01, 0.3, 1.0, 4.0, 20.0, 80.0] {
        let cutoff = poisson_cutoff(mu, 1e-13);
        let pmf = poisson_pmf(mu, cutoff).unwrap();
        assert!(pmf.tail_mass < 1e-13, "mu {mu}: tail {}", pmf.tail_mass);
        assert!(cutoff as f64 >= mu);
    }
    assert_eq!(poisson_cutoff(0.0, 1e-13), 0);
}

#[test]
fn binomial_sums_to_one() {
    for n in 0..10 {
        for &q in &[0.0, 0.1, 0.5, 1.0] {
            let s: f64 = binomial_pmf(n, q).iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }
    assert_eq!(binomial_pmf(3, 0.0), vec![1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn v0plus_laws_normalized_and_pgf() {
    let c = reference();
    let (v0, v1) = pmf_v0plus_offspring(&c, 4).unwrap();
    assert!((v0.total_mass() - 1.0).abs() < 1e-12);
    assert!((v1.total_mass() - 1.0).abs() < 1e-12);
    let pgf0 = (1.0 - c.q0 + c.q0 * (-c.mu0).exp()).powi(4);
    assert!((v0.pmf(0) - pgf0).abs() < 1e-12);
    assert!((v1.pmf(0) - (1.0 - c.q0).powi(4)).abs() < 1e-12);
    // Wald: E = slots * q0 * mean of one slot
    assert!((v0.mean() - 4.0 * c.q0 * c.mu0).abs() < 1e-12);
    let ztp_mean = c.mu1 / -(-c.mu1).exp_m1();
    assert!((v1.mean() - 4.0 * c.q0 * ztp_mean).abs() < 1e-12);
}

#[test]
fn zero_survival_gives_point_masses() {
    let c = AnalyticConstants {
        q0: 0.0,
        q1_raw: 0.0,
        ..reference()
    };
    let (v0, v1) = pmf_v0plus_offspring(&c, 4).unwrap();
    assert_eq!(v0.probs, vec![1.0]);
    assert_eq!(v1.probs, vec![1.0]);
    let j = pmf_v1plus_offspring_joint(&c, 4).unwrap();
    assert_eq!(j.pmf(0, 0), 1.0);
}

#[test]
fn poisson_superposition_matches_explicit_convolution() {
    let c = reference();
    for slots in 1..=6 {
        let (v0, _) = pmf_v0plus_offspring(&c, slots).unwrap();
        let cutoff = v0.cutoff();
        let unit = poisson_pmf(c.mu0, cutoff).unwrap().probs;
        let explicit = compound_law(slots, c.q0, &unit, cutoff);
        for (j, p) in explicit.iter().enumerate() {
            assert!((p - v0.pmf(j)).abs() < 1e-10);
        }
    }
}

#[test]
fn joint_law_normalized_and_pgf() {
    let c = reference();
    let joint = pmf_v1plus_offspring_joint(&c, 4).unwrap();
    assert!((joint.total_mass() - 1.0).abs() < 1e-12);
    let q1 = c.q1_clamped();
    assert!((joint.pmf(0, 0) - (1.0 - q1).powi(4)).abs() < 1e-12);
}

#[test]
fn joint_law_rejects_degenerate_means() {
    let c = AnalyticConstants {
        mu0: 0.0,
        mu1: 0.0,
        ..reference()
    };
    assert!(pmf_v1plus_offspring_joint(&c, 4).is_err());
}

/// Brute force over two slots: sum over (X1, X2) and (Y1, Y2) on a grid.
#[test]
fn joint_law_matches_enumeration_for_two_slots() {
    let c = reference();
    let q = c.q1_clamped();
    let grid = 12usize;
    let norm = 1.0 - (-c.mu0).exp() * (-c.mu1).exp();
    let po = |mu: f64, j: usize| (-mu).exp() * mu.powi(j as i32) / (1..=j).map(|i| i as f64).product::<f64>();
    let y = |j: usize, k: usize| {
        if j + k == 0 {
            0.0
        } else {
            po(c.mu0, j) * po(c.mu1, k) / norm
        }
    };
    let mut brute = vec![vec![0.0; 2 * grid]; 2 * grid];
    for x1 in 0..2 {
        for x2 in 0..2 {
            let wx = [1.0 - q, q][x1] * [1.0 - q, q][x2];
            let slot = |x: usize| -> Vec<((usize, usize), f64)> {
                if x == 0 {
                    vec![((0, 0), 1.0)]
                } else {
                    (0..grid)
                        .flat_map(|j| (0..grid).map(move |k| (j, k)))
                        .map(|(j, k)| ((j, k), y(j, k)))
                        .collect()
                }
            };
            for ((j1, k1), p1) in slot(x1) {
                for ((j2, k2), p2) in slot(x2) {
                    brute[j1 + j2][k1 + k2] += wx * p1 * p2;
                }
            }
        }
    }
    let joint = pmf_v1plus_offspring_joint(&c, 2).unwrap();
    for j in 0..6 {
        for k in 0..6 {
            assert!((joint.pmf(j, k) - brute[j][k]).abs() < 1e-13, "({j},{k})");
        }
    }
}

#[test]
fn joint_marginal_without_uninfected_reduces_to_compound_law() {
    let c = AnalyticConstants {
        mu0: 0.0,
        ..reference()
    };
    let joint = pmf_v1plus_offspring_joint(&c, 4).unwrap();
    let v1 = joint.marginal_v1();
    let q = c.q1_clamped();
    let unit = truncated_poisson_pmf(c.mu1, v1.len() - 1).unwrap().probs;
    let direct = compound_law(4, q, &unit, v1.len() - 1);
    for (a, b) in v1.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(joint.marginal_v0()[1..].iter().all(|&p| p == 0.0));
}

#[test]
fn csv_export() {
    let pmf = truncated_poisson_pmf(1.0, 2).unwrap();
    let mut buf = Vec::new();
    pmf.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("j,probability\n0,0e0\n1,"));
    let joint = pmf_v1plus_offspring_joint(&reference(), 1).unwrap();
    let mut buf = Vec::new();
    joint.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + joint.rows * joint.cols);
}
