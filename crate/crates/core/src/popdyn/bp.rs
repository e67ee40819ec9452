//! Damped synchronous belief propagation on a reduced graph.
//!
//! Every test in the reduced graph is positive, so each factor is an OR
//! constraint over its surviving members, and each individual carries an
//! independent Bernoulli(`lambda`) prior. With `ν` the probability of being
//! uninfected carried by a variable-to-test message:
//!
//! ```text
//! η_{a→x}(0) / η_{a→x}(1) = 1 - Π_{y ∈ ∂a \ x} ν_{y→a}(0)
//! ν_{x→a}(0) ∝ (1 - λ) Π_{b ∈ ∂x \ a} η_{b→x}(0),   ν_{x→a}(1) ∝ λ
//! ```
//!
//! Messages are stored as logarithms; damping mixes old and new messages in
//! probability space.

use serde::{Deserialize, Serialize};

use crate::reduction::ReducedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpOptions {
    pub max_iters: usize,
    /// Weight of the previous message in each update.
    pub damping: f64,
    pub tol: f64,
}

impl Default for BpOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            damping: 0.5,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    /// Posterior probability of being infected, per local individual.
    pub marginals: Vec<f64>,
    pub iterations: usize,
    /// Largest message change in the last iteration.
    pub residual: f64,
    pub converged: bool,
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 - e^{s})` for `s <= 0`.
pub fn ln_one_minus_exp(s: f64) -> f64 {
    if s > -std::f64::consts::LN_2 {
        (-s.exp_m1()).ln()
    } else {
        (-s.exp()).ln_1p()
    }
}

/// Leave-one-out sums of `values`, exact even when entries are `-inf`.
pub fn leave_one_out(values: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.resize(values.len(), 0.0);
    let mut prefix = 0.0;
    for (o, v) in out.iter_mut().zip(values) {
        *o = prefix;
        prefix += v;
    }
    let mut suffix = 0.0;
    for (o, v) in out.iter_mut().zip(values).rev() {
        *o += suffix;
        suffix += v;
    }
}

pub fn finite_graph_bp(reduced: &ReducedGraph, lambda: f64, opts: &BpOptions) -> BpResult {
    let n = reduced.num_individuals();
    let prior_logit = ((1.0 - lambda) / lambda).ln();
    // edges are numbered test by test, in member order
    let mut edge_start = Vec::with_capacity(reduced.num_tests() + 1);
    edge_start.push(0);
    for t in 0..reduced.num_tests() {
        edge_start.push(edge_start[t] + reduced.members_of(t).len());
    }
    let mut edges_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, &start) in edge_start[..reduced.num_tests()].iter().enumerate() {
        for (p, &x) in reduced.members_of(t).iter().enumerate() {
            edges_of[x].push(start + p);
        }
    }
    let num_edges = reduced.num_edges();
    let mut log_nu = vec![(1.0 - lambda).ln(); num_edges];
    let mut log_eta = vec![0.0; num_edges];
    let mut scratch = Vec::new();
    let mut gathered = Vec::new();

    let mut iterations = 0;
    let mut residual = 0.0;
    let mut converged = num_edges == 0;
    while !converged && iterations < opts.max_iters {
        iterations += 1;
        for t in 0..reduced.num_tests() {
            let range = edge_start[t]..edge_start[t + 1];
            leave_one_out(&log_nu[range.clone()], &mut scratch);
            for (e, &s) in range.zip(&scratch) {
                log_eta[e] = ln_one_minus_exp(s);
            }
        }
        residual = 0.0f64;
        for edges in &edges_of {
            gathered.clear();
            gathered.extend(edges.iter().map(|&e| log_eta[e]));
            leave_one_out(&gathered, &mut scratch);
            for (&e, &s) in edges.iter().zip(&scratch) {
                let fresh = logistic(s + prior_logit);
                let old = log_nu[e].exp();
                let mixed = (1.0 - opts.damping) * fresh + opts.damping * old;
                residual = residual.max((mixed - old).abs());
                log_nu[e] = mixed.ln();
            }
        }
        converged = residual < opts.tol;
    }

    // final test-to-variable messages from the converged variable messages
    for t in 0..reduced.num_tests() {
        let range = edge_start[t]..edge_start[t + 1];
        leave_one_out(&log_nu[range.clone()], &mut scratch);
        for (e, &s) in range.zip(&scratch) {
            log_eta[e] = ln_one_minus_exp(s);
        }
    }
    let marginals = edges_of
        .iter()
        .map(|edges| {
            let total: f64 = edges.iter().map(|&e| log_eta[e]).sum();
            1.0 - logistic(total + prior_logit)
        })
        .collect();
    if !converged {
        log::warn!("belief propagation stopped after {iterations} iterations with residual {residual:e}");
    }
    BpResult {
        marginals,
        iterations,
        residual,
        converged,
    }
}

/// Whether a connected component with these counts is a tree
/// (bipartite edges = nodes - 1).
pub fn component_is_tree(reduced: &ReducedGraph, individuals: &[usize], tests: &[usize]) -> bool {
    let edges: usize = tests.iter().map(|&t| reduced.members_of(t).len()).sum();
    edges + 1 == individuals.len() + tests.len()
}
