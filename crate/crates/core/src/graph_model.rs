//! Random regular test designs, ground-truth configurations and test outcomes.
//!
//! Every individual joins `delta` distinct tests chosen uniformly without
//! replacement, so test degrees fluctuate. Exactly `k = round(lambda * n)`
//! individuals are infected and a test is positive iff it contains at least
//! one infected member.

use std::io::{BufRead, Write};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Problem parameters together with the derived counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Number of individuals.
    pub n: usize,
    /// Infection density, `k / n`.
    pub lambda: f64,
    /// Design density; a test holds on average `d` infected individuals.
    pub d: f64,
    /// Tests per individual.
    pub delta: usize,
    /// Number of infected individuals, `round(lambda * n)`.
    pub k: usize,
    /// Number of tests, `round(delta * lambda * n / d)`.
    pub m: usize,
    /// Tests per individual of the population, `m / n`.
    pub c: f64,
}

impl Params {
    /// Probability that a fixed individual belongs to a fixed test, `delta / m`.
    pub fn membership_probability(&self) -> f64 {
        self.delta as f64 / self.m as f64
    }
}

pub fn derive_params(n: usize, lambda: f64, d: f64, delta: usize) -> Result<Params> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("n = {n} must be at least 2")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParams(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidParams(format!("d = {d} must be positive and finite")));
    }
    if delta < 1 {
        return Err(Error::InvalidParams("delta must be at least 1".into()));
    }
    let k = (lambda * n as f64).round() as usize;
    if k < 1 || k >= n {
        return Err(Error::InvalidParams(format!(
            "infected count k = {k} must satisfy 1 <= k < n = {n}"
        )));
    }
    let m = (delta as f64 * lambda * n as f64 / d).round() as usize;
    if m < delta {
        return Err(Error::InvalidParams(format!(
            "test count m = {m} is smaller than delta = {delta}"
        )));
    }
    Ok(Params {
        n,
        lambda,
        d,
        delta,
        k,
        m,
        c: m as f64 / n as f64,
    })
}

/// Ground-truth infection status of every individual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    sigma: Vec<bool>,
}

impl Configuration {
    pub fn from_sigma(sigma: Vec<bool>) -> Self {
        Self { sigma }
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn is_infected(&self, x: usize) -> bool {
        self.sigma[x]
    }

    pub fn sigma(&self) -> &[bool] {
        &self.sigma
    }

    pub fn infected_count(&self) -> usize {
        self.sigma.iter().filter(|&&s| s).count()
    }

    /// Indices of infected individuals (`V1`), ascending.
    pub fn infected(&self) -> Vec<usize> {
        (0..self.sigma.len()).filter(|&x| self.sigma[x]).collect()
    }

    /// Indices of uninfected individuals (`V0`), ascending.
    pub fn uninfected(&self) -> Vec<usize> {
        (0..self.sigma.len()).filter(|&x| !self.sigma[x]).collect()
    }
}

/// Uniformly random set of exactly `k` infected individuals.
pub fn sample_configuration(params: &Params, seed: u64) -> Configuration {
    let mut rng = rng_from_seed(seed);
    let mut sigma = vec![false; params.n];
    for x in index::sample(&mut rng, params.n, params.k) {
        sigma[x] = true;
    }
    Configuration { sigma }
}

/// Incidence structure between individuals and tests, stored in both directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteDesign {
    n: usize,
    m: usize,
    delta: usize,
    // tests of individual x at [x * delta, (x + 1) * delta), ascending
    individual_tests: Vec<usize>,
    test_offsets: Vec<usize>,
    test_members: Vec<usize>,
}

impl BipartiteDesign {
    /// Builds a design from each individual's test list.
    ///
    /// Every list must hold the same number of distinct tests below `m`.
    pub fn from_individual_tests(m: usize, tests: Vec<Vec<usize>>) -> Result<Self> {
        let n = tests.len();
        let delta = tests.first().map_or(0, Vec::len);
        if n == 0 || delta == 0 {
            return Err(Error::InvalidArgument("design needs individuals with tests".into()));
        }
        let mut flat = Vec::with_capacity(n * delta);
        for (x, mut list) in tests.into_iter().enumerate() {
            if list.len() != delta {
                return Err(Error::InvalidArgument(format!(
                    "individual {x} has {} tests, expected {delta}",
                    list.len()
                )));
            }
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument(format!("individual {x} repeats a test")));
            }
            if list.last().is_some_and(|&a| a >= m) {
                return Err(Error::InvalidArgument(format!("individual {x} uses a test >= m")));
            }
            flat.extend(list);
        }
        Ok(Self::from_flat(n, m, delta, flat))
    }

    fn from_flat(n: usize, m: usize, delta: usize, individual_tests: Vec<usize>) -> Self {
        let mut test_offsets = vec![0usize; m + 1];
        for &a in &individual_tests {
            test_offsets[a + 1] += 1;
        }
        for a in 0..m {
            test_offsets[a + 1] += test_offsets[a];
        }
        let mut cursor = test_offsets.clone();
        let mut test_members = vec![0usize; individual_tests.len()];
        // individuals are visited in ascending order, so members end up sorted
        for (slot, &a) in individual_tests.iter().enumerate() {
            test_members[cursor[a]] = slot / delta;
            cursor[a] += 1;
        }
        Self {
            n,
            m,
            delta,
            individual_tests,
            test_offsets,
            test_members,
        }
    }

    pub fn num_individuals(&self) -> usize {
        self.n
    }

    pub fn num_tests(&self) -> usize {
        self.m
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    /// Tests of individual `x`, ascending.
    pub fn tests_of(&self, x: usize) -> &[usize] {
        &self.individual_tests[x * self.delta..(x + 1) * self.delta]
    }

    /// Members of test `a`, ascending.
    pub fn members_of(&self, a: usize) -> &[usize] {
        &self.test_members[self.test_offsets[a]..self.test_offsets[a + 1]]
    }

    /// Test degree `Γ_a`.
    pub fn test_degree(&self, a: usize) -> usize {
        self.test_offsets[a + 1] - self.test_offsets[a]
    }

    pub fn test_degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.test_offsets.windows(2).map(|w| w[1] - w[0])
    }

    pub fn num_edges(&self) -> usize {
        self.individual_tests.len()
    }

    /// Writes the design as a whitespace-separated edge list.
    ///
    /// The first line holds `n m delta`; each further line holds
    /// `individual_index test_index`.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.n, self.m, self.delta)?;
        for x in 0..self.n {
            for &a in self.tests_of(x) {
                writeln!(w, "{x} {a}")?;
            }
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((i, line)) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        break (i + 1, line);
                    }
                }
                None => {
                    return Err(Error::Parse {
                        line: 0,
                        reason: "missing header".into(),
                    })
                }
            }
        };
        let head = parse_fields::<3>(&header.1, header.0)?;
        let (n, m, delta) = (head[0], head[1], head[2]);
        let mut tests = vec![Vec::with_capacity(delta); n];
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let [x, a] = parse_fields::<2>(&line, i + 1)?;
            if x >= n {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("individual {x} out of range"),
                });
            }
            tests[x].push(a);
        }
        if tests.iter().any(|t| t.len() != delta) {
            return Err(Error::Parse {
                line: 0,
                reason: format!("some individual does not have exactly {delta} tests"),
            });
        }
        Self::from_individual_tests(m, tests).map_err(|e| Error::Parse {
            line: 0,
            reason: e.to_string(),
        })
    }
}

fn parse_fields<const N: usize>(line: &str, lineno: usize) -> Result<[usize; N]> {
    let mut out = [0usize; N];
    let mut fields = line.split_whitespace();
    for slot in out.iter_mut() {
        let field = fields.next().ok_or_else(|| Error::Parse {
            line: lineno,
            reason: format!("expected {N} fields"),
        })?;
        *slot = field.parse().map_err(|_| Error::Parse {
            line: lineno,
            reason: format!("not an index: {field:?}"),
        })?;
    }
    if fields.next().is_some() {
        return Err(Error::Parse {
            line: lineno,
            reason: format!("expected {N} fields"),
        });
    }
    Ok(out)
}

/// Each individual independently joins a uniformly random `delta`-subset of the tests.
pub fn sample_design(params: &Params, seed: u64) -> BipartiteDesign {
    let mut rng = rng_from_seed(seed);
    let (n, m, delta) = (params.n, params.m, params.delta);
    let mut flat = Vec::with_capacity(n * delta);
    let mut chosen = Vec::with_capacity(delta);
    for _ in 0..n {
        chosen.clear();
        chosen.extend(index::sample(&mut rng, m, delta));
        chosen.sort_unstable();
        flat.extend_from_slice(&chosen);
    }
    BipartiteDesign::from_flat(n, m, delta, flat)
}

/// Test results: a test is positive iff some member is infected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcomes {
    positive: Vec<bool>,
}

impl Outcomes {
    pub fn is_positive(&self, a: usize) -> bool {
        self.positive[a]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.positive
    }

    pub fn len(&self) -> usize {
        self.positive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.positive.iter().filter(|&&p| p).count()
    }
}

pub fn compute_outcomes(design: &BipartiteDesign, sigma: &Configuration) -> Outcomes {
    assert_eq!(design.num_individuals(), sigma.len(), "configuration size mismatch");
    let positive = (0..design.num_tests())
        .map(|a| design.members_of(a).iter().any(|&x| sigma.is_infected(x)))
        .collect();
    Outcomes { positive }
}

/// Per-test counts of infected and uninfected members.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionStats {
    /// `infected_histogram[j]` = number of tests with exactly `j` infected members.
    pub infected_histogram: Vec<u64>,
    pub uninfected_histogram: Vec<u64>,
    pub total_histogram: Vec<u64>,
    pub mean_infected: f64,
    pub var_infected: f64,
    pub mean_uninfected: f64,
    pub var_uninfected: f64,
    pub mean_total: f64,
    pub var_total: f64,
}

pub fn test_composition_stats(design: &BipartiteDesign, sigma: &Configuration) -> CompositionStats {
    let mut infected_histogram = Vec::new();
    let mut uninfected_histogram = Vec::new();
    let mut total_histogram = Vec::new();
    for a in 0..design.num_tests() {
        let members = design.members_of(a);
        let inf = members.iter().filter(|&&x| sigma.is_infected(x)).count();
        bump(&mut infected_histogram, inf);
        bump(&mut uninfected_histogram, members.len() - inf);
        bump(&mut total_histogram, members.len());
    }
    let (mean_infected, var_infected) = histogram_moments(&infected_histogram);
    let (mean_uninfected, var_uninfected) = histogram_moments(&uninfected_histogram);
    let (mean_total, var_total) = histogram_moments(&total_histogram);
    CompositionStats {
        infected_histogram,
        uninfected_histogram,
        total_histogram,
        mean_infected,
        var_infected,
        mean_uninfected,
        var_uninfected,
        mean_total,
        var_total,
    }
}

fn bump(hist: &mut Vec<u64>, j: usize) {
    if hist.len() <= j {
        hist.resize(j + 1, 0);
    }
    hist[j] += 1;
}

/// Mean and (population) variance of a count histogram.
pub(crate) fn histogram_moments(hist: &[u64]) -> (f64, f64) {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return (0.0, 0.0);
    }
    let total = total as f64;
    let mean = hist.iter().enumerate().map(|(j, &c)| j as f64 * c as f64).sum::<f64>() / total;
    let var = hist
        .iter()
        .enumerate()
        .map(|(j, &c)| (j as f64 - mean).powi(2) * c as f64)
        .sum::<f64>()
        / total;
    (mean, var)
}
