//! Population dynamics for the belief-propagation messages of non-hard
//! individuals, and the finite-graph BP it is checked against.
//!
//! Two pools hold messages `ν(uninfected)` sent by `V0+` and `V1+`
//! individuals into one of their tests. A new message for a root of type `r`
//! draws the surviving tests among its other `Δ - 1` slots from the offspring
//! law of `r`, fills each surviving test with messages taken uniformly from
//! the pools by co-member type, and combines the test messages with the
//! prior. Marginals use all `Δ` slots instead.
//!
//! Sweeps are synchronous: every slot of both pools is rewritten from a
//! snapshot of the previous pools. Replacement indices are split into fixed
//! chunks, each with its own generator, so results do not depend on the
//! number of worker threads.

mod bp;

pub use bp::{component_is_tree, finite_graph_bp, leave_one_out, ln_one_minus_exp, logistic, BpOptions, BpResult};

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{AnalyticConstants, OffspringSampler, RootType, SlotDraw};
use crate::empirical::sample_trial;
use crate::error::{Error, Result};
use crate::graph_model::{compute_outcomes, Params};
use crate::reduction::{build_reduced_graph, classify, IndividualType, Peeling};
use crate::seed::{derive_seed, rng_from_seed, Stream};
use crate::stats::{tv_distance, wasserstein1};

/// Smallest pool size accepted.
pub const MIN_POPULATION: usize = 1000;

pub const DEFAULT_BINS: usize = 20;

/// Replacement indices per generator stream.
const CHUNK: usize = 1024;

/// How the pools are filled before the first sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolInit {
    /// I.i.d. uniform on `[0, 1]`.
    #[default]
    Uniform,
    /// Every message at the prior `1 - λ`.
    Prior,
}

/// Message pools for `V0+` and `V1+` senders.
#[derive(Debug, Clone, PartialEq)]
pub struct MessagePopulation {
    pools: [Vec<f64>; 2],
    sweeps: usize,
}

impl MessagePopulation {
    /// Wraps explicit pools; both must be nonempty, equally sized, and hold probabilities.
    pub fn from_pools(v0plus: Vec<f64>, v1plus: Vec<f64>) -> Result<Self> {
        if v0plus.is_empty() || v0plus.len() != v1plus.len() {
            return Err(Error::InvalidArgument(
                "pools must be nonempty and of equal size".into(),
            ));
        }
        if v0plus.iter().chain(&v1plus).any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("messages must lie in [0, 1]".into()));
        }
        Ok(Self {
            pools: [v0plus, v1plus],
            sweeps: 0,
        })
    }

    pub fn pool(&self, root: RootType) -> &[f64] {
        &self.pools[root.index()]
    }

    pub fn size(&self) -> usize {
        self.pools[0].len()
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }
}

pub fn init_populations(size: usize, init: PoolInit, lambda: f64, seed: u64) -> Result<MessagePopulation> {
    if size < MIN_POPULATION {
        return Err(Error::InvalidArgument(format!(
            "population size {size} is below the minimum {MIN_POPULATION}"
        )));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    let fill = |root: RootType| -> Vec<f64> {
        match init {
            PoolInit::Prior => vec![1.0 - lambda; size],
            PoolInit::Uniform => {
                let mut pool = vec![0.0; size];
                pool.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                    let mut rng = rng_from_seed(derive_seed(seed, chunk_index(root, c), Stream::PopulationInit));
                    for v in chunk {
                        *v = rng.random::<f64>();
                    }
                });
                pool
            }
        }
    };
    Ok(MessagePopulation {
        pools: [fill(RootType::V0Plus), fill(RootType::V1Plus)],
        sweeps: 0,
    })
}

fn chunk_index(root: RootType, chunk: usize) -> u64 {
    ((root.index() as u64) << 40) | chunk as u64
}

/// Sum over surviving slots of `ln η(uninfected)`, drawing co-member messages from `pools`.
fn log_evidence(
    sampler: &OffspringSampler,
    pools: &[Vec<f64>; 2],
    root: RootType,
    slots: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut total = 0.0;
    for _ in 0..slots {
        if let SlotDraw::Survived { v0plus, v1plus } = sampler.draw_slot(root, rng) {
            let mut log_all_clear = 0.0;
            for (pool, count) in pools.iter().zip([v0plus, v1plus]) {
                for _ in 0..count {
                    log_all_clear += pool[rng.random_range(0..pool.len())].ln();
                }
            }
            total += ln_one_minus_exp(log_all_clear);
        }
    }
    total
}

/// Posterior `ν(uninfected)` given accumulated test evidence.
fn combine_with_prior(log_evidence: f64, lambda: f64) -> f64 {
    logistic(log_evidence + ((1.0 - lambda) / lambda).ln())
}

/// One synchronous sweep: every message of both pools is redrawn from the previous pools.
pub fn sweep(pop: &MessagePopulation, constants: &AnalyticConstants, seed: u64) -> MessagePopulation {
    let sampler = OffspringSampler::new(constants);
    let slots = constants.delta - 1;
    let lambda = constants.lambda;
    let fresh = |root: RootType| -> Vec<f64> {
        let mut pool = vec![0.0; pop.size()];
        pool.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let mut rng = rng_from_seed(derive_seed(seed, chunk_index(root, c), Stream::Sweep));
            for v in chunk {
                *v = combine_with_prior(log_evidence(&sampler, &pop.pools, root, slots, &mut rng), lambda);
            }
        });
        pool
    };
    MessagePopulation {
        pools: [fresh(RootType::V0Plus), fresh(RootType::V1Plus)],
        sweeps: pop.sweeps + 1,
    }
}

/// Binned law of posterior infection probabilities for one root type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalHistogram {
    pub root: RootType,
    pub bin_width: f64,
    pub masses: Vec<f64>,
    pub samples: usize,
    /// Mean of the unbinned values.
    pub mean: f64,
}

impl MarginalHistogram {
    pub fn from_values(root: RootType, values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 || values.is_empty() {
            return Err(Error::InvalidArgument("need at least one bin and one value".into()));
        }
        let mut counts = vec![0u64; bins];
        for &v in values {
            // the offset keeps values sitting on a bin edge from falling below it
            let b = ((v * bins as f64 + 1e-9).floor().max(0.0) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let n = values.len() as f64;
        Ok(Self {
            root,
            bin_width: 1.0 / bins as f64,
            masses: counts.iter().map(|&c| c as f64 / n).collect(),
            samples: values.len(),
            mean: values.iter().sum::<f64>() / n,
        })
    }

    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn tv_distance(&self, other: &MarginalHistogram) -> Result<f64> {
        if self.bins() != other.bins() {
            return Err(Error::InvalidArgument("histograms have different binning".into()));
        }
        tv_distance(&self.masses, &other.masses)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> Result<()> {
        if header {
            writeln!(w, "root_type,bin_lower,mass")?;
        }
        for (i, m) in self.masses.iter().enumerate() {
            writeln!(w, "{},{},{}", self.root.as_str(), i as f64 * self.bin_width, m)?;
        }
        Ok(())
    }
}

/// Posterior infection probabilities of `samples` fresh roots per type, using all `Δ` slots.
pub fn sample_marginals(
    pop: &MessagePopulation,
    constants: &AnalyticConstants,
    samples: usize,
    seed: u64,
) -> [Vec<f64>; 2] {
    let sampler = OffspringSampler::new(constants);
    let draw = |root: RootType| -> Vec<f64> {
        let mut out = vec![0.0; samples];
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let mut rng = rng_from_seed(derive_seed(seed, chunk_index(root, c), Stream::Marginals));
            for v in chunk {
                let e = log_evidence(&sampler, &pop.pools, root, constants.delta, &mut rng);
                *v = 1.0 - combine_with_prior(e, constants.lambda);
            }
        });
        out
    };
    [draw(RootType::V0Plus), draw(RootType::V1Plus)]
}

pub fn estimate_marginals(
    pop: &MessagePopulation,
    constants: &AnalyticConstants,
    samples: usize,
    bins: usize,
    seed: u64,
) -> Result<[MarginalHistogram; 2]> {
    let [v0, v1] = sample_marginals(pop, constants, samples, seed);
    Ok([
        MarginalHistogram::from_values(RootType::V0Plus, &v0, bins)?,
        MarginalHistogram::from_values(RootType::V1Plus, &v1, bins)?,
    ])
}

/// Mean posterior infection mass of the type mixture against the infected share it should reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesCheck {
    pub mixture_mean: f64,
    pub infected_share: f64,
    pub deviation: f64,
}

pub fn bayes_check(histograms: &[MarginalHistogram; 2], constants: &AnalyticConstants) -> BayesCheck {
    let w1 = constants.infected_share();
    let mixture_mean = (1.0 - w1) * histograms[0].mean + w1 * histograms[1].mean;
    BayesCheck {
        mixture_mean,
        infected_share: w1,
        deviation: (mixture_mean - w1).abs(),
    }
}

/// Wasserstein-1 distance between consecutive pools, per sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub sweep: usize,
    pub w1_v0plus: f64,
    pub w1_v1plus: f64,
}

impl ConvergenceEntry {
    pub fn max(&self) -> f64 {
        self.w1_v0plus.max(self.w1_v1plus)
    }
}

pub fn write_convergence_log<W: Write>(log: &[ConvergenceEntry], mut w: W) -> Result<()> {
    writeln!(w, "# sweep W1-change v0plus v1plus")?;
    for e in log {
        writeln!(w, "{} {} {}", e.sweep, e.w1_v0plus, e.w1_v1plus)?;
    }
    Ok(())
}

/// Stabilization rule for the per-sweep W1 series.
///
/// At sweep `s` the mean W1 of sweeps `s-w+1..=s` is compared with the mean
/// of the `w` sweeps before; the series is stable when the two differ by
/// less than `tol` for both pools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stabilization {
    pub window: usize,
    pub tol: f64,
}

impl Default for Stabilization {
    fn default() -> Self {
        Self { window: 10, tol: 1e-3 }
    }
}

impl Stabilization {
    /// Window-mean change ending at entry `end` (inclusive), if enough history exists.
    pub fn change_at(&self, log: &[ConvergenceEntry], end: usize) -> Option<f64> {
        let w = self.window;
        if w == 0 || end + 1 < 2 * w {
            return None;
        }
        let mean = |f: fn(&ConvergenceEntry) -> f64, lo: usize| log[lo..lo + w].iter().map(f).sum::<f64>() / w as f64;
        let change = |f: fn(&ConvergenceEntry) -> f64| (mean(f, end + 1 - w) - mean(f, end + 1 - 2 * w)).abs();
        Some(change(|e| e.w1_v0plus).max(change(|e| e.w1_v1plus)))
    }

    /// First sweep at which the rule holds.
    pub fn first_stable_sweep(&self, log: &[ConvergenceEntry]) -> Option<usize> {
        (0..log.len())
            .find(|&i| self.change_at(log, i).is_some_and(|c| c < self.tol))
            .map(|i| log[i].sweep)
    }

    /// Window-mean change over the final `2 * window` sweeps.
    pub fn final_change(&self, log: &[ConvergenceEntry]) -> Option<f64> {
        log.len().checked_sub(1).and_then(|end| self.change_at(log, end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopdynConfig {
    pub pop_size: usize,
    pub sweeps: usize,
    pub samples: usize,
    pub bins: usize,
    pub init: PoolInit,
    pub stabilization: Stabilization,
    pub seed: u64,
}

impl Default for PopdynConfig {
    fn default() -> Self {
        Self {
            pop_size: 10_000,
            sweeps: 200,
            samples: 100_000,
            bins: DEFAULT_BINS,
            init: PoolInit::Uniform,
            stabilization: Stabilization::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PopdynRun {
    pub population: MessagePopulation,
    pub log: Vec<ConvergenceEntry>,
    pub histograms: [MarginalHistogram; 2],
    pub bayes: BayesCheck,
    pub first_stable_sweep: Option<usize>,
    pub final_change: Option<f64>,
}

impl PopdynRun {
    /// Whether the W1 series met the stabilization rule at some sweep.
    pub fn stabilized(&self) -> bool {
        self.first_stable_sweep.is_some()
    }
}

/// Initializes, sweeps and estimates marginals, logging W1 between consecutive pools.
pub fn run_popdyn(constants: &AnalyticConstants, config: &PopdynConfig) -> Result<PopdynRun> {
    let mut pop = init_populations(config.pop_size, config.init, constants.lambda, config.seed)?;
    let mut log = Vec::with_capacity(config.sweeps);
    for s in 0..config.sweeps {
        let next = sweep(&pop, constants, derive_seed(config.seed, s as u64, Stream::Sweep));
        let (w0, w1) = rayon::join(
            || wasserstein1(pop.pool(RootType::V0Plus), next.pool(RootType::V0Plus)),
            || wasserstein1(pop.pool(RootType::V1Plus), next.pool(RootType::V1Plus)),
        );
        log.push(ConvergenceEntry {
            sweep: next.sweeps(),
            w1_v0plus: w0,
            w1_v1plus: w1,
        });
        pop = next;
    }
    let histograms = estimate_marginals(
        &pop,
        constants,
        config.samples,
        config.bins,
        derive_seed(config.seed, 0, Stream::Marginals),
    )?;
    let bayes = bayes_check(&histograms, constants);
    Ok(PopdynRun {
        first_stable_sweep: config.stabilization.first_stable_sweep(&log),
        final_change: config.stabilization.final_change(&log),
        population: pop,
        log,
        histograms,
        bayes,
    })
}

/// Finite-graph BP marginals of the reduced graphs of `graphs` sampled instances, split by true type.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGraphMarginals {
    pub v0plus: Vec<f64>,
    pub v1plus: Vec<f64>,
    pub unconverged: usize,
}

impl FiniteGraphMarginals {
    pub fn values(&self, root: RootType) -> &[f64] {
        match root {
            RootType::V0Plus => &self.v0plus,
            RootType::V1Plus => &self.v1plus,
        }
    }

    pub fn histograms(&self, bins: usize) -> Result<[MarginalHistogram; 2]> {
        Ok([
            MarginalHistogram::from_values(RootType::V0Plus, &self.v0plus, bins)?,
            MarginalHistogram::from_values(RootType::V1Plus, &self.v1plus, bins)?,
        ])
    }
}

pub fn finite_graph_marginals(params: &Params, graphs: u64, seed: u64, opts: &BpOptions) -> FiniteGraphMarginals {
    let per_graph: Vec<(Vec<f64>, Vec<f64>, bool)> = (0..graphs)
        .into_par_iter()
        .map(|trial| {
            let (sigma, design) = sample_trial(params, seed, trial);
            let outcomes = compute_outcomes(&design, &sigma);
            let partition = classify(&design, &sigma, &outcomes);
            let reduced = build_reduced_graph(&design, &outcomes, &partition, Peeling::SinglePass);
            let bp = finite_graph_bp(&reduced, params.lambda, opts);
            let (mut v0, mut v1) = (Vec::new(), Vec::new());
            for (i, &x) in reduced.individual_ids().iter().enumerate() {
                match partition.type_of(x) {
                    IndividualType::V0Plus => v0.push(bp.marginals[i]),
                    IndividualType::V1Plus => v1.push(bp.marginals[i]),
                    _ => unreachable!("reduced graph holds only non-hard individuals"),
                }
            }
            (v0, v1, bp.converged)
        })
        .collect();
    let mut out = FiniteGraphMarginals {
        v0plus: Vec::new(),
        v1plus: Vec::new(),
        unconverged: 0,
    };
    for (v0, v1, converged) in per_graph {
        out.v0plus.extend(v0);
        out.v1plus.extend(v1);
        out.unconverged += usize::from(!converged);
    }
    out
}
