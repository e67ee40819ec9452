use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use grouptest_core::analytic::{pmf_v0plus_offspring, pmf_v1plus_offspring_joint};
use grouptest_core::compare::{compare_offspring, OffspringComparison, Verdict};
use grouptest_core::empirical::{measure_offspring, Estimate, EstimateReport};
use grouptest_core::popdyn::{
    finite_graph_marginals, run_popdyn, write_convergence_log, BayesCheck, BpOptions, ConvergenceEntry, PopdynConfig,
    Stabilization,
};
use grouptest_core::reduction::write_partition_csv;
use grouptest_core::seed::SEED_SCHEME;
use grouptest_core::{derive_params, AnalyticConstants, JointOffspringPmf, MarginalHistogram, OffspringPmf, Params};
use serde::Serialize;

use crate::config::{Format, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Process exit status of a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    ToleranceFailure,
    Inconclusive,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::ToleranceFailure => 2,
            Outcome::Inconclusive => 3,
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    seed_scheme: &'static str,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema_version: u32,
    metadata: Metadata<'a>,
    params: Params,
    #[serde(flatten)]
    body: T,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn finish(mut w: BufWriter<File>, name: &str) -> Result<()> {
    w.flush().with_context(|| format!("writing {name}"))
}

fn write_report<T: Serialize>(cfg: &RunConfig, params: &Params, body: T) -> Result<()> {
    let report = Report {
        schema_version: SCHEMA_VERSION,
        metadata: Metadata {
            tool: "grouptest",
            version: env!("CARGO_PKG_VERSION"),
            seed_scheme: SEED_SCHEME,
            config: cfg,
        },
        params: *params,
        body,
    };
    let mut w = create(&cfg.out, "report.json")?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    finish(w, "report.json")
}

fn csv_table(cfg: &RunConfig, name: &str, fill: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(&cfg.out, name)?;
    fill(&mut w)?;
    finish(w, name)
}

fn prepare(cfg: &RunConfig) -> Result<(Params, AnalyticConstants)> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let params = derive_params(cfg.n, cfg.lambda, cfg.d, cfg.delta)?;
    let constants = AnalyticConstants::with_laws(cfg.d, cfg.lambda, cfg.delta, cfg.laws)?;
    Ok((params, constants))
}

#[derive(Serialize)]
struct Pmfs {
    v0plus_v0plus: OffspringPmf,
    v0plus_v1plus: OffspringPmf,
    v1plus_joint: JointOffspringPmf,
}

#[derive(Serialize)]
struct AnalyticBody {
    constants: AnalyticConstants,
    q1_clamped: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pmfs: Option<Pmfs>,
}

fn write_constants_csv<W: Write>(c: &AnalyticConstants, mut w: W) -> Result<()> {
    writeln!(w, "name,value")?;
    let rows = [
        ("d", c.d),
        ("lambda", c.lambda),
        ("delta", c.delta as f64),
        ("p0_delta", c.p0_delta),
        ("p0_delta_minus1", c.p0_delta_minus1),
        ("p1_delta", c.p1_delta),
        ("p1_delta_minus1", c.p1_delta_minus1),
        ("q0", c.q0),
        ("q1_raw", c.q1_raw),
        ("q1_in_range", f64::from(u8::from(c.q1_in_range))),
        ("q1_clamped", c.q1_raw.clamp(0.0, 1.0)),
        ("mu0", c.mu0),
        ("mu1", c.mu1),
        ("co_member_p1", c.co_member_p1),
    ];
    for (name, value) in rows {
        writeln!(w, "{name},{value}")?;
    }
    writeln!(w, "laws,{}", c.laws.as_str())?;
    Ok(())
}

pub fn run_analytic(cfg: &RunConfig) -> Result<Outcome> {
    let (params, c) = prepare(cfg)?;
    let (v0, v1) = pmf_v0plus_offspring(&c, c.delta)?;
    let joint = pmf_v1plus_offspring_joint(&c, c.delta)?;
    let pmfs = match cfg.format {
        Format::Json => Some(Pmfs {
            v0plus_v0plus: v0,
            v0plus_v1plus: v1,
            v1plus_joint: joint,
        }),
        Format::Csv => {
            csv_table(cfg, "constants.csv", |w| write_constants_csv(&c, w))?;
            csv_table(cfg, "pmf_v0plus_v0plus.csv", |w| Ok(v0.write_csv(w)?))?;
            csv_table(cfg, "pmf_v0plus_v1plus.csv", |w| Ok(v1.write_csv(w)?))?;
            csv_table(cfg, "pmf_v1plus_joint.csv", |w| Ok(joint.write_csv(w)?))?;
            None
        }
    };
    write_report(
        cfg,
        &params,
        AnalyticBody {
            constants: c,
            q1_clamped: c.q1_raw.clamp(0.0, 1.0),
            pmfs,
        },
    )?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct Scalars {
    p0: Option<Estimate>,
    p1: Option<Estimate>,
    q0: Option<Estimate>,
    q1: Option<Estimate>,
    z: f64,
    empty_trials: u64,
    v0plus_roots: u64,
    v1plus_roots: u64,
    caveat: &'static str,
}

impl Scalars {
    fn of(r: &EstimateReport) -> Self {
        Self {
            p0: r.p0,
            p1: r.p1,
            q0: r.q0,
            q1: r.q1,
            z: r.z,
            empty_trials: r.empty_trials,
            v0plus_roots: r.v0plus_histogram.roots(),
            v1plus_roots: r.v1plus_histogram.roots(),
            caveat: r.caveat,
        }
    }
}

#[derive(Serialize)]
struct SimulateBody<'a> {
    estimates: Scalars,
    #[serde(skip_serializing_if = "Option::is_none")]
    measurement: Option<&'a EstimateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<OffspringComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<Verdict>,
}

fn write_measurement_tables(cfg: &RunConfig, r: &EstimateReport) -> Result<()> {
    csv_table(cfg, "partitions.csv", |w| Ok(write_partition_csv(&r.partitions, w)?))?;
    csv_table(cfg, "offspring_histograms.csv", |w| {
        r.v0plus_histogram.write_csv(&mut *w, true)?;
        r.v1plus_histogram.write_csv(&mut *w, false)?;
        Ok(())
    })
}

fn simulate_or_compare(cfg: &RunConfig, compare: bool) -> Result<Outcome> {
    let (params, c) = prepare(cfg)?;
    let r = measure_offspring(&params, cfg.trials, cfg.seed);
    let comparison = if compare {
        Some(compare_offspring(&r, &c)?)
    } else {
        None
    };
    let verdict = comparison.as_ref().map(|cmp| cmp.verdict(&cfg.tolerances));
    if cfg.format == Format::Csv {
        write_measurement_tables(cfg, &r)?;
    }
    write_report(
        cfg,
        &params,
        SimulateBody {
            estimates: Scalars::of(&r),
            measurement: (cfg.format == Format::Json).then_some(&r),
            comparison,
            verdict,
        },
    )?;
    let no_roots = r.v0plus_histogram.is_empty() && r.v1plus_histogram.is_empty();
    Ok(match verdict {
        _ if no_roots => Outcome::Inconclusive,
        Some(Verdict::Fail) => Outcome::ToleranceFailure,
        Some(Verdict::Inconclusive) => Outcome::Inconclusive,
        _ => Outcome::Pass,
    })
}

pub fn run_simulate(cfg: &RunConfig) -> Result<Outcome> {
    simulate_or_compare(cfg, false)
}

pub fn run_compare(cfg: &RunConfig) -> Result<Outcome> {
    simulate_or_compare(cfg, true)
}

#[derive(Serialize)]
struct Validation {
    graphs: u64,
    unconverged_graphs: usize,
    tv_v0plus: f64,
    tv_v1plus: f64,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    bp_histograms: Option<[MarginalHistogram; 2]>,
}

#[derive(Serialize)]
struct PopdynBody<'a> {
    constants: AnalyticConstants,
    stabilization: Stabilization,
    first_stable_sweep: Option<usize>,
    final_w1_change: Option<f64>,
    stabilized: bool,
    bayes: BayesCheck,
    bayes_passed: bool,
    marginal_means: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    histograms: Option<&'a [MarginalHistogram; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence: Option<&'a [ConvergenceEntry]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    validation: Option<Validation>,
}

fn write_histograms<W: Write>(hists: &[MarginalHistogram; 2], mut w: W) -> Result<()> {
    hists[0].write_csv(&mut w, true)?;
    hists[1].write_csv(&mut w, false)?;
    Ok(())
}

pub fn run_popdyn_command(cfg: &RunConfig) -> Result<Outcome> {
    let (params, c) = prepare(cfg)?;
    let stabilization = Stabilization {
        window: Stabilization::default().window,
        tol: cfg.popdyn_tolerances.w1_change,
    };
    let pd = PopdynConfig {
        pop_size: cfg.pop,
        sweeps: cfg.sweeps,
        samples: cfg.samples,
        bins: cfg.bins,
        init: cfg.init,
        stabilization,
        seed: cfg.seed,
    };
    let run = run_popdyn(&c, &pd)?;
    let stabilized = run.stabilized();
    if !stabilized {
        log::warn!("populations did not stabilize within {} sweeps", cfg.sweeps);
    }
    let bayes_passed = run.bayes.deviation <= cfg.popdyn_tolerances.bayes;
    let validation = if cfg.validate {
        let bp = finite_graph_marginals(&params, cfg.trials, cfg.seed, &BpOptions::default());
        if bp.v0plus.is_empty() || bp.v1plus.is_empty() {
            log::warn!("sampled graphs held no non-hard individuals of some type");
            None
        } else {
            let hb = bp.histograms(cfg.bins)?;
            let tv_v0plus = run.histograms[0].tv_distance(&hb[0])?;
            let tv_v1plus = run.histograms[1].tv_distance(&hb[1])?;
            let tol = cfg.popdyn_tolerances.popdyn_tv;
            if cfg.format == Format::Csv {
                csv_table(cfg, "bp_marginals.csv", |w| write_histograms(&hb, w))?;
            }
            Some(Validation {
                graphs: cfg.trials,
                unconverged_graphs: bp.unconverged,
                tv_v0plus,
                tv_v1plus,
                passed: tv_v0plus <= tol && tv_v1plus <= tol,
                bp_histograms: (cfg.format == Format::Json).then_some(hb),
            })
        }
    } else {
        None
    };
    let json = cfg.format == Format::Json;
    if !json {
        csv_table(cfg, "marginals.csv", |w| write_histograms(&run.histograms, w))?;
        csv_table(cfg, "convergence.log", |w| Ok(write_convergence_log(&run.log, w)?))?;
    }
    let outcome = match &validation {
        None if cfg.validate => Outcome::Inconclusive,
        Some(v) if !v.passed => Outcome::ToleranceFailure,
        _ if cfg.strict && !(stabilized && bayes_passed) => Outcome::ToleranceFailure,
        _ => Outcome::Pass,
    };
    write_report(
        cfg,
        &params,
        PopdynBody {
            constants: c,
            stabilization,
            first_stable_sweep: run.first_stable_sweep,
            final_w1_change: run.final_change,
            stabilized,
            bayes: run.bayes,
            bayes_passed,
            marginal_means: [run.histograms[0].mean, run.histograms[1].mean],
            histograms: json.then_some(&run.histograms),
            convergence: json.then_some(run.log.as_slice()),
            validation,
        },
    )?;
    Ok(outcome)
}
