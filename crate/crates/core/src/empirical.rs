//! Monte Carlo measurement of survival probabilities and second-neighbourhood
//! offspring counts on sampled reduced graphs.
//!
//! Each trial samples a configuration and a design, classifies individuals,
//! builds the reduced graph, and then, for every `V0+` or `V1+` root `x`,
//! records the number of its tests that survive together with
//! `Σ_{a ∈ ∂x ∩ G'} |(∂a \ {x}) ∩ V0+|` and the same sum for `V1+`.
//! An individual sharing two surviving tests with `x` is counted twice.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::RootType;
use crate::error::Result;
use crate::graph_model::{
    compute_outcomes, sample_configuration, sample_design, BipartiteDesign, Configuration, Params,
};
use crate::reduction::{build_reduced_graph, classify, IndividualType, PartitionRow, PartitionSizes, Peeling};
use crate::seed::{derive_seed, Stream, SEED_SCHEME};
use crate::stats::wilson_ci;

/// Default width of reported intervals, in standard errors.
pub const DEFAULT_Z: f64 = 3.0;

const DEPENDENCE_CAVEAT: &str = "roots and test slots within one graph are weakly dependent; \
     intervals treat them as independent, so the effective sample size is somewhat smaller";

/// Counts of offspring observations for one root type, keyed by
/// (surviving tests, `V0+` count, `V1+` count).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffspringHistogram {
    pub root: RootType,
    counts: BTreeMap<(usize, usize, usize), u64>,
    roots: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub surviving_tests: usize,
    pub v0plus: usize,
    pub v1plus: usize,
    pub count: u64,
}

impl OffspringHistogram {
    pub fn new(root: RootType) -> Self {
        Self {
            root,
            counts: BTreeMap::new(),
            roots: 0,
        }
    }

    pub fn record(&mut self, surviving_tests: usize, v0plus: usize, v1plus: usize) {
        *self.counts.entry((surviving_tests, v0plus, v1plus)).or_insert(0) += 1;
        self.roots += 1;
    }

    pub fn merge(&mut self, other: &OffspringHistogram) {
        for (&key, &c) in &other.counts {
            *self.counts.entry(key).or_insert(0) += c;
        }
        self.roots += other.roots;
    }

    /// Number of roots observed.
    pub fn roots(&self) -> u64 {
        self.roots
    }

    pub fn is_empty(&self) -> bool {
        self.roots == 0
    }

    pub fn entries(&self) -> impl Iterator<Item = HistogramEntry> + '_ {
        self.counts.iter().map(|(&(t, v0, v1), &count)| HistogramEntry {
            surviving_tests: t,
            v0plus: v0,
            v1plus: v1,
            count,
        })
    }

    /// Counts keyed by (`V0+` count, `V1+` count).
    pub fn joint(&self) -> BTreeMap<(usize, usize), u64> {
        let mut out = BTreeMap::new();
        for (&(_, v0, v1), &c) in &self.counts {
            *out.entry((v0, v1)).or_insert(0) += c;
        }
        out
    }

    /// Counts of (`V0+`, `V1+`) among roots with exactly `t` surviving tests.
    pub fn conditional_on_survivors(&self, t: usize) -> BTreeMap<(usize, usize), u64> {
        self.counts
            .range((t, 0, 0)..=(t, usize::MAX, usize::MAX))
            .map(|(&(_, v0, v1), &c)| ((v0, v1), c))
            .collect()
    }

    fn marginal(&self, pick: impl Fn(&(usize, usize, usize)) -> usize) -> Vec<u64> {
        let mut out = Vec::new();
        for (key, &c) in &self.counts {
            let j = pick(key);
            if out.len() <= j {
                out.resize(j + 1, 0);
            }
            out[j] += c;
        }
        out
    }

    pub fn marginal_v0(&self) -> Vec<u64> {
        self.marginal(|k| k.1)
    }

    pub fn marginal_v1(&self) -> Vec<u64> {
        self.marginal(|k| k.2)
    }

    /// Histogram of the number of surviving tests per root.
    pub fn survival_counts(&self) -> Vec<u64> {
        self.marginal(|k| k.0)
    }

    /// Rows `root_type,v0plus_count,v1plus_count,frequency` with relative frequencies.
    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> Result<()> {
        if header {
            writeln!(w, "root_type,v0plus_count,v1plus_count,frequency")?;
        }
        let total = self.roots.max(1) as f64;
        for ((v0, v1), c) in self.joint() {
            writeln!(w, "{},{v0},{v1},{:e}", self.root.as_str(), c as f64 / total)?;
        }
        Ok(())
    }
}

impl Serialize for OffspringHistogram {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            root: RootType,
            roots: u64,
            entries: Vec<HistogramEntry>,
        }
        Repr {
            root: self.root,
            roots: self.roots,
            entries: self.entries().collect(),
        }
        .serialize(s)
    }
}

/// A pooled proportion with its Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn new(successes: u64, trials: u64, z: f64) -> Option<Self> {
        let (ci_low, ci_high) = wilson_ci(successes, trials, z).ok()?;
        Some(Self {
            successes,
            trials,
            estimate: successes as f64 / trials as f64,
            ci_low,
            ci_high,
        })
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    pub fn standard_error(&self) -> f64 {
        (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub params: Params,
    pub trials: u64,
    pub seed: u64,
    pub seed_scheme: &'static str,
    pub z: f64,
    /// `|V0+| / |V0|`.
    pub p0: Option<Estimate>,
    /// `|V1+| / |V1|`.
    pub p1: Option<Estimate>,
    /// Share of tests next to `V0+` roots that survive.
    pub q0: Option<Estimate>,
    /// Share of tests next to `V1+` roots that survive.
    pub q1: Option<Estimate>,
    /// Trials whose reduced graph has no individuals.
    pub empty_trials: u64,
    pub caveat: &'static str,
    pub partitions: Vec<PartitionRow>,
    pub v0plus_histogram: OffspringHistogram,
    pub v1plus_histogram: OffspringHistogram,
}

impl EstimateReport {
    pub fn histogram(&self, root: RootType) -> &OffspringHistogram {
        match root {
            RootType::V0Plus => &self.v0plus_histogram,
            RootType::V1Plus => &self.v1plus_histogram,
        }
    }
}

/// Everything measured on one instance.
#[derive(Debug, Clone)]
pub struct InstanceMeasurement {
    pub sizes: PartitionSizes,
    pub surviving_tests: usize,
    pub surviving_individuals: usize,
    pub v0plus: OffspringHistogram,
    pub v1plus: OffspringHistogram,
    /// Per root type: (surviving slots, all slots).
    pub slots: [(u64, u64); 2],
}

pub fn measure_instance(design: &BipartiteDesign, sigma: &Configuration) -> InstanceMeasurement {
    let outcomes = compute_outcomes(design, sigma);
    let partition = classify(design, sigma, &outcomes);
    let reduced = build_reduced_graph(design, &outcomes, &partition, Peeling::SinglePass);
    let mut test_alive = vec![false; design.num_tests()];
    for &a in reduced.test_ids() {
        test_alive[a] = true;
    }
    let mut hists = [
        OffspringHistogram::new(RootType::V0Plus),
        OffspringHistogram::new(RootType::V1Plus),
    ];
    let mut slots = [(0u64, 0u64); 2];
    for &x in reduced.individual_ids() {
        let root = match partition.type_of(x) {
            IndividualType::V0Plus => RootType::V0Plus,
            IndividualType::V1Plus => RootType::V1Plus,
            _ => unreachable!("reduced graph holds only non-hard individuals"),
        };
        let (mut t, mut v0, mut v1) = (0, 0, 0);
        for &a in design.tests_of(x) {
            if !test_alive[a] {
                continue;
            }
            t += 1;
            let mut infected_here = 0;
            for &y in design.members_of(a) {
                if y == x {
                    continue;
                }
                match partition.type_of(y) {
                    IndividualType::V0Plus => v0 += 1,
                    IndividualType::V1Plus => {
                        v1 += 1;
                        infected_here += 1;
                    }
                    _ => {}
                }
            }
            // a surviving test next to an uninfected root is explained by some V1+ co-member
            debug_assert!(root == RootType::V1Plus || infected_here > 0);
        }
        hists[root.index()].record(t, v0, v1);
        slots[root.index()].0 += t as u64;
        slots[root.index()].1 += design.delta() as u64;
    }
    let [v0plus, v1plus] = hists;
    InstanceMeasurement {
        sizes: partition.sizes(),
        surviving_tests: reduced.num_tests(),
        surviving_individuals: reduced.num_individuals(),
        v0plus,
        v1plus,
        slots,
    }
}

/// Samples the configuration and design of trial `trial` under master seed `seed`.
pub fn sample_trial(params: &Params, seed: u64, trial: u64) -> (Configuration, BipartiteDesign) {
    let sigma = sample_configuration(params, derive_seed(seed, trial, Stream::Configuration));
    let design = sample_design(params, derive_seed(seed, trial, Stream::Design));
    (sigma, design)
}

fn run_trials(params: &Params, trials: u64, seed: u64, z: f64, keep_histograms: bool) -> EstimateReport {
    let per_trial: Vec<InstanceMeasurement> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let (sigma, design) = sample_trial(params, seed, trial);
            let mut m = measure_instance(&design, &sigma);
            if !keep_histograms {
                m.v0plus = OffspringHistogram::new(RootType::V0Plus);
                m.v1plus = OffspringHistogram::new(RootType::V1Plus);
            }
            m
        })
        .collect();

    let mut v0plus_histogram = OffspringHistogram::new(RootType::V0Plus);
    let mut v1plus_histogram = OffspringHistogram::new(RootType::V1Plus);
    let mut sizes = PartitionSizes::default();
    let mut slots = [(0u64, 0u64); 2];
    let mut empty_trials = 0;
    let mut partitions = Vec::with_capacity(per_trial.len());
    for (trial, m) in per_trial.iter().enumerate() {
        v0plus_histogram.merge(&m.v0plus);
        v1plus_histogram.merge(&m.v1plus);
        sizes.v0_minus += m.sizes.v0_minus;
        sizes.v0_plus += m.sizes.v0_plus;
        sizes.v1_minus += m.sizes.v1_minus;
        sizes.v1_plus += m.sizes.v1_plus;
        for (acc, s) in slots.iter_mut().zip(m.slots) {
            acc.0 += s.0;
            acc.1 += s.1;
        }
        if m.surviving_individuals == 0 {
            empty_trials += 1;
        }
        partitions.push(PartitionRow {
            trial: trial as u64,
            v0_minus: m.sizes.v0_minus,
            v0_plus: m.sizes.v0_plus,
            v1_minus: m.sizes.v1_minus,
            v1_plus: m.sizes.v1_plus,
            surviving_tests: m.surviving_tests,
        });
    }
    if empty_trials > 0 {
        log::info!("{empty_trials} of {trials} trials left an empty reduced graph");
    }
    let uninfected = (sizes.v0_minus + sizes.v0_plus) as u64;
    let infected = (sizes.v1_minus + sizes.v1_plus) as u64;
    EstimateReport {
        params: *params,
        trials,
        seed,
        seed_scheme: SEED_SCHEME,
        z,
        p0: Estimate::new(sizes.v0_plus as u64, uninfected, z),
        p1: Estimate::new(sizes.v1_plus as u64, infected, z),
        q0: Estimate::new(slots[0].0, slots[0].1, z),
        q1: Estimate::new(slots[1].0, slots[1].1, z),
        empty_trials,
        caveat: DEPENDENCE_CAVEAT,
        partitions,
        v0plus_histogram,
        v1plus_histogram,
    }
}

/// Runs `trials` independent graphs and returns pooled estimates with both offspring histograms.
pub fn measure_offspring(params: &Params, trials: u64, seed: u64) -> EstimateReport {
    run_trials(params, trials, seed, DEFAULT_Z, true)
}

/// Same trials as [`measure_offspring`], without histogram bookkeeping.
pub fn estimate_scalars(params: &Params, trials: u64, seed: u64) -> EstimateReport {
    run_trials(params, trials, seed, DEFAULT_Z, false)
}
