//! Measured offspring histograms against the limiting laws.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analytic::{pmf_v0plus_offspring, pmf_v1plus_offspring_joint, AnalyticConstants, Laws, RootType};
use crate::empirical::{Estimate, EstimateReport, OffspringHistogram};
use crate::error::{Error, Result};
use crate::stats::{chi_square_gof, chi_square_keyed, tv_distance_keyed, ComparisonResult};

/// Pass thresholds for [`OffspringComparison::verdict`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Largest TV between a `V0+` marginal and its law.
    pub v0plus_tv: f64,
    /// Smallest chi-square p-value for a `V0+` marginal.
    pub min_pvalue: f64,
    /// Largest TV between the `V1+` joint and the law reweighted by measured survival counts.
    pub v1plus_shape_tv: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            v0plus_tv: 0.02,
            min_pvalue: 1e-3,
            v1plus_shape_tv: 0.03,
        }
    }
}

/// Measured test survival next to `V1+` roots against both closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Q1Discrepancy {
    pub measured: Estimate,
    pub stated_raw: f64,
    pub stated_in_range: bool,
    pub corrected: f64,
    /// Clamped stated value minus the measured share.
    pub stated_excess: f64,
    /// `stated_excess` in standard errors of the measured share.
    pub stated_z: f64,
    pub corrected_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffspringComparison {
    pub laws: Laws,
    pub v0plus_roots: u64,
    pub v1plus_roots: u64,
    /// `V0+` count of `V0+` roots.
    pub v0plus_v0plus: Option<ComparisonResult>,
    /// `V1+` count of `V0+` roots.
    pub v0plus_v1plus: Option<ComparisonResult>,
    /// Joint counts of `V1+` roots; depends on `q1` and is reported only.
    pub v1plus_joint: Option<ComparisonResult>,
    /// TV between the `V1+` joint and the slot law mixed over measured survival counts.
    pub v1plus_shape_tv: Option<f64>,
    pub q1: Option<Q1Discrepancy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Too few roots to judge.
    Inconclusive,
}

/// Fewer roots of a type than this make its comparison inconclusive.
pub const MIN_ROOTS: u64 = 100;

fn normalized<K: Ord + Clone>(counts: &BTreeMap<K, u64>) -> BTreeMap<K, f64> {
    let total: u64 = counts.values().sum();
    counts
        .iter()
        .map(|(k, &c)| (k.clone(), c as f64 / total as f64))
        .collect()
}

/// `Σ_t w_t Y^{*t}` with `w_t` the measured share of `V1+` roots with `t` surviving tests.
pub fn reweighted_v1plus_law(
    constants: &AnalyticConstants,
    hist: &OffspringHistogram,
) -> Result<BTreeMap<(usize, usize), f64>> {
    let survivors = hist.survival_counts();
    let total: u64 = survivors.iter().sum();
    let every_slot = AnalyticConstants {
        q1_raw: 1.0,
        q1_in_range: true,
        ..*constants
    };
    let mut law = BTreeMap::new();
    for (t, &c) in survivors.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let w = c as f64 / total as f64;
        for (key, p) in pmf_v1plus_offspring_joint(&every_slot, t)?.to_map() {
            *law.entry(key).or_insert(0.0) += w * p;
        }
    }
    Ok(law)
}

pub fn compare_offspring(report: &EstimateReport, constants: &AnalyticConstants) -> Result<OffspringComparison> {
    if report.params.delta != constants.delta {
        return Err(Error::InvalidArgument(format!(
            "measured delta {} differs from analytic delta {}",
            report.params.delta, constants.delta
        )));
    }
    let slots = constants.delta;
    let h0 = report.histogram(RootType::V0Plus);
    let h1 = report.histogram(RootType::V1Plus);
    let (v0plus_v0plus, v0plus_v1plus) = if h0.is_empty() {
        (None, None)
    } else {
        let (law0, law1) = pmf_v0plus_offspring(constants, slots)?;
        (
            Some(chi_square_gof(&h0.marginal_v0(), &law0.probs)?),
            Some(chi_square_gof(&h0.marginal_v1(), &law1.probs)?),
        )
    };
    let (v1plus_joint, v1plus_shape_tv) = if h1.is_empty() {
        (None, None)
    } else {
        let joint = pmf_v1plus_offspring_joint(constants, slots)?.to_map();
        let observed = h1.joint();
        let shape = reweighted_v1plus_law(constants, h1)?;
        (
            Some(chi_square_keyed(&observed, &joint)?),
            Some(tv_distance_keyed(&normalized(&observed), &shape)?),
        )
    };
    let q1 = report.q1.map(|measured| {
        let corrected = AnalyticConstants::with_laws(constants.d, constants.lambda, slots, Laws::Corrected)
            .map(|c| c.q1_raw)
            .unwrap_or(f64::NAN);
        let stated = AnalyticConstants::new(constants.d, constants.lambda, slots).expect("validated above");
        let se = measured.standard_error().max(f64::MIN_POSITIVE);
        let stated_clamped = stated.q1_raw.clamp(0.0, 1.0);
        Q1Discrepancy {
            measured,
            stated_raw: stated.q1_raw,
            stated_in_range: stated.q1_in_range,
            corrected,
            stated_excess: stated_clamped - measured.estimate,
            stated_z: (stated_clamped - measured.estimate) / se,
            corrected_z: (corrected - measured.estimate) / se,
        }
    });
    Ok(OffspringComparison {
        laws: constants.laws,
        v0plus_roots: h0.roots(),
        v1plus_roots: h1.roots(),
        v0plus_v0plus,
        v0plus_v1plus,
        v1plus_joint,
        v1plus_shape_tv,
        q1,
    })
}

impl OffspringComparison {
    /// Judges the `V0+` marginals and the `V1+` shape; `q1`-dependent numbers never fail.
    pub fn verdict(&self, tol: &Tolerances) -> Verdict {
        if self.v0plus_roots < MIN_ROOTS || self.v1plus_roots < MIN_ROOTS {
            return Verdict::Inconclusive;
        }
        let marginal_ok = |c: &Option<ComparisonResult>| {
            c.is_some_and(|c| c.tv_distance <= tol.v0plus_tv && c.chi_square_pvalue > tol.min_pvalue)
        };
        let shape_ok = self.v1plus_shape_tv.is_some_and(|tv| tv <= tol.v1plus_shape_tv);
        if marginal_ok(&self.v0plus_v0plus) && marginal_ok(&self.v0plus_v1plus) && shape_ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}
