//! Distribution comparisons and binomial confidence intervals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Inputs must carry total mass within this distance of 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Bins with smaller expected count are pooled before the chi-square test.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub tv_distance: f64,
    pub chi_square_stat: f64,
    pub chi_square_pvalue: f64,
    pub degrees_of_freedom: usize,
}

fn check_normalized(mass: f64) -> Result<()> {
    if (mass - 1.0).abs() > NORMALIZATION_TOLERANCE || !mass.is_finite() {
        return Err(Error::NotNormalized(mass));
    }
    Ok(())
}

fn check_entries<'a>(entries: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    let mut total = 0.0;
    for &p in entries {
        if p.is_nan() || p < 0.0 {
            return Err(Error::InvalidArgument(format!("negative or NaN probability {p}")));
        }
        total += p;
    }
    check_normalized(total)
}

/// Total variation distance between two laws on `{0, 1, ...}`; missing entries are zero.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_entries(p)?;
    check_entries(q)?;
    let len = p.len().max(q.len());
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    Ok(0.5 * (0..len).map(|i| (get(p, i) - get(q, i)).abs()).sum::<f64>())
}

/// Total variation distance between laws on an arbitrary ordered support.
pub fn tv_distance_keyed<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> Result<f64> {
    check_entries(p.values())?;
    check_entries(q.values())?;
    let mut sum = 0.0;
    for (k, pv) in p {
        sum += (pv - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, qv) in q {
        if !p.contains_key(k) {
            sum += qv;
        }
    }
    Ok(0.5 * sum)
}

/// Groups bin indices for the chi-square test.
///
/// Bins with expected count at least [`MIN_EXPECTED_COUNT`] stay alone; the
/// rest are pooled into one bin. If that pool is itself below the minimum it
/// is merged into the regular bin with the smallest expected count.
pub fn pool_sparse_bins(expected_counts: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut sparse = Vec::new();
    for (i, &e) in expected_counts.iter().enumerate() {
        if e >= MIN_EXPECTED_COUNT {
            groups.push(vec![i]);
        } else {
            sparse.push(i);
        }
    }
    if sparse.is_empty() {
        return groups;
    }
    let sparse_mass: f64 = sparse.iter().map(|&i| expected_counts[i]).sum();
    if sparse_mass >= MIN_EXPECTED_COUNT || groups.is_empty() {
        groups.push(sparse);
    } else {
        let smallest = (0..groups.len())
            .min_by(|&a, &b| expected_counts[groups[a][0]].total_cmp(&expected_counts[groups[b][0]]))
            .expect("nonempty");
        groups[smallest].extend(sparse);
        groups[smallest].sort_unstable();
    }
    groups
}

/// Pearson goodness of fit of observed counts against a law, after pooling sparse bins.
///
/// Observed bins beyond the support of `expected` count as expected zero.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<ComparisonResult> {
    check_entries(expected)?;
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    let len = observed.len().max(expected.len());
    let obs = |i: usize| observed.get(i).copied().unwrap_or(0) as f64;
    let exp_p = |i: usize| expected.get(i).copied().unwrap_or(0.0);
    let n = total as f64;
    let expected_counts: Vec<f64> = (0..len).map(|i| n * exp_p(i)).collect();
    let groups = pool_sparse_bins(&expected_counts);
    let mut stat = 0.0;
    for g in &groups {
        let o: f64 = g.iter().map(|&i| obs(i)).sum();
        let e: f64 = g.iter().map(|&i| expected_counts[i]).sum();
        stat += if e > 0.0 {
            (o - e).powi(2) / e
        } else if o > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    let dof = groups.len().saturating_sub(1);
    let pvalue = if dof == 0 {
        1.0
    } else if stat.is_infinite() {
        0.0
    } else if stat <= 0.0 {
        1.0
    } else {
        gamma_ur(dof as f64 / 2.0, stat / 2.0)
    };
    let tv = 0.5 * (0..len).map(|i| (obs(i) / n - exp_p(i)).abs()).sum::<f64>();
    Ok(ComparisonResult {
        tv_distance: tv,
        chi_square_stat: if dof == 0 { 0.0 } else { stat },
        chi_square_pvalue: pvalue,
        degrees_of_freedom: dof,
    })
}

/// [`chi_square_gof`] over an arbitrary ordered support: the union of both key sets.
pub fn chi_square_keyed<K: Ord + Clone>(
    observed: &BTreeMap<K, u64>,
    expected: &BTreeMap<K, f64>,
) -> Result<ComparisonResult> {
    let mut keys: Vec<K> = expected.keys().cloned().collect();
    keys.extend(observed.keys().filter(|k| !expected.contains_key(*k)).cloned());
    keys.sort();
    let obs: Vec<u64> = keys.iter().map(|k| observed.get(k).copied().unwrap_or(0)).collect();
    let exp: Vec<f64> = keys.iter().map(|k| expected.get(k).copied().unwrap_or(0.0)).collect();
    chi_square_gof(&obs, &exp)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_ci(successes: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= successes ({successes}) <= trials ({trials}) and trials >= 1"
        )));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    Ok((lo, hi))
}

/// Wasserstein-1 distance between the empirical laws of two samples.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    if a.len() == b.len() {
        return a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    }
    // integrate |F_a - F_b| over the merged breakpoints
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = a[0].min(b[0]);
    let mut dist = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        dist += (i as f64 / na - j as f64 / nb).abs() * (next - prev);
        while i < a.len() && a[i] <= next {
            i += 1;
        }
        while j < b.len() && b[j] <= next {
            j += 1;
        }
        prev = next;
    }
    dist
}
