//! Individual types, the COMP and DD decoders, and the reduced graph left
//! after warning propagation.
//!
//! Uninfected individuals in a negative test are `V0-`; the remaining
//! uninfected are `V0+`. Infected individuals that share some test only with
//! `V0-` members are `V1-`; the remaining infected are `V1+`. The reduced
//! graph drops negative tests, `V0-`, `V1-` and every test touching `V1-`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph_model::{BipartiteDesign, Configuration, Outcomes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IndividualType {
    V0Minus,
    V0Plus,
    V1Minus,
    V1Plus,
}

impl IndividualType {
    pub fn is_infected(self) -> bool {
        matches!(self, IndividualType::V1Minus | IndividualType::V1Plus)
    }

    /// `V0+` and `V1+`: not resolved by warning propagation.
    pub fn is_non_hard(self) -> bool {
        matches!(self, IndividualType::V0Plus | IndividualType::V1Plus)
    }
}

/// The four-way split of individuals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypePartition {
    types: Vec<IndividualType>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSizes {
    pub v0_minus: usize,
    pub v0_plus: usize,
    pub v1_minus: usize,
    pub v1_plus: usize,
}

impl TypePartition {
    pub fn type_of(&self, x: usize) -> IndividualType {
        self.types[x]
    }

    pub fn types(&self) -> &[IndividualType] {
        &self.types
    }

    pub fn members(&self, ty: IndividualType) -> Vec<usize> {
        (0..self.types.len()).filter(|&x| self.types[x] == ty).collect()
    }

    pub fn v0_minus(&self) -> Vec<usize> {
        self.members(IndividualType::V0Minus)
    }

    pub fn v0_plus(&self) -> Vec<usize> {
        self.members(IndividualType::V0Plus)
    }

    pub fn v1_minus(&self) -> Vec<usize> {
        self.members(IndividualType::V1Minus)
    }

    pub fn v1_plus(&self) -> Vec<usize> {
        self.members(IndividualType::V1Plus)
    }

    pub fn sizes(&self) -> PartitionSizes {
        let mut s = PartitionSizes::default();
        for ty in &self.types {
            match ty {
                IndividualType::V0Minus => s.v0_minus += 1,
                IndividualType::V0Plus => s.v0_plus += 1,
                IndividualType::V1Minus => s.v1_minus += 1,
                IndividualType::V1Plus => s.v1_plus += 1,
            }
        }
        s
    }
}

/// Whether `x` sits in a test where every other member is in a negative test.
fn certified_infected(design: &BipartiteDesign, in_negative: &[bool], x: usize) -> bool {
    design
        .tests_of(x)
        .iter()
        .any(|&a| design.members_of(a).iter().all(|&y| y == x || in_negative[y]))
}

fn in_negative_test(design: &BipartiteDesign, outcomes: &Outcomes) -> Vec<bool> {
    (0..design.num_individuals())
        .map(|x| design.tests_of(x).iter().any(|&a| !outcomes.is_positive(a)))
        .collect()
}

pub fn classify(design: &BipartiteDesign, sigma: &Configuration, outcomes: &Outcomes) -> TypePartition {
    let in_negative = in_negative_test(design, outcomes);
    let types = (0..design.num_individuals())
        .map(|x| {
            if !sigma.is_infected(x) {
                if in_negative[x] {
                    IndividualType::V0Minus
                } else {
                    IndividualType::V0Plus
                }
            } else if certified_infected(design, &in_negative, x) {
                IndividualType::V1Minus
            } else {
                IndividualType::V1Plus
            }
        })
        .collect();
    TypePartition { types }
}

/// How far the peeling of forced individuals is carried.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Peeling {
    /// The three removal steps, each applied once.
    #[default]
    SinglePass,
    /// Repeats: any surviving test left with a single surviving member forces
    /// that member infected; it and all of its tests are removed.
    Iterated,
}

/// The graph of non-hard individuals and the positive tests still unexplained.
///
/// Individuals and tests carry local indices `0..len`; the global ids in the
/// original design are kept alongside. Individuals whose tests were all
/// removed remain, with degree zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedGraph {
    individuals: Vec<usize>,
    tests: Vec<usize>,
    ind_offsets: Vec<usize>,
    ind_tests: Vec<usize>,
    test_offsets: Vec<usize>,
    test_members: Vec<usize>,
}

impl ReducedGraph {
    /// Builds a graph with individuals `0..num_individuals` from test member lists.
    pub fn from_tests(num_individuals: usize, tests: &[Vec<usize>]) -> Self {
        Self::assemble((0..num_individuals).collect(), (0..tests.len()).collect(), tests)
    }

    /// `tests[t]` lists local member indices of local test `t`.
    fn assemble(individuals: Vec<usize>, test_ids: Vec<usize>, tests: &[Vec<usize>]) -> Self {
        let n = individuals.len();
        let mut test_offsets = Vec::with_capacity(tests.len() + 1);
        let mut test_members = Vec::new();
        test_offsets.push(0);
        for members in tests {
            let mut members = members.clone();
            members.sort_unstable();
            members.dedup();
            test_members.extend(members);
            test_offsets.push(test_members.len());
        }
        let mut ind_offsets = vec![0usize; n + 1];
        for &x in &test_members {
            ind_offsets[x + 1] += 1;
        }
        for x in 0..n {
            ind_offsets[x + 1] += ind_offsets[x];
        }
        let mut cursor = ind_offsets.clone();
        let mut ind_tests = vec![0usize; test_members.len()];
        for t in 0..tests.len() {
            for &x in &test_members[test_offsets[t]..test_offsets[t + 1]] {
                ind_tests[cursor[x]] = t;
                cursor[x] += 1;
            }
        }
        Self {
            individuals,
            tests: test_ids,
            ind_offsets,
            ind_tests,
            test_offsets,
            test_members,
        }
    }

    pub fn num_individuals(&self) -> usize {
        self.individuals.len()
    }

    pub fn num_tests(&self) -> usize {
        self.tests.len()
    }

    pub fn num_edges(&self) -> usize {
        self.test_members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    /// Global id of local individual `i`.
    pub fn individual_id(&self, i: usize) -> usize {
        self.individuals[i]
    }

    /// Global id of local test `t`.
    pub fn test_id(&self, t: usize) -> usize {
        self.tests[t]
    }

    pub fn individual_ids(&self) -> &[usize] {
        &self.individuals
    }

    pub fn test_ids(&self) -> &[usize] {
        &self.tests
    }

    pub fn local_individual(&self, x: usize) -> Option<usize> {
        self.individuals.binary_search(&x).ok()
    }

    pub fn local_test(&self, a: usize) -> Option<usize> {
        self.tests.binary_search(&a).ok()
    }

    /// Local tests of local individual `i`.
    pub fn tests_of(&self, i: usize) -> &[usize] {
        &self.ind_tests[self.ind_offsets[i]..self.ind_offsets[i + 1]]
    }

    /// Local members of local test `t`.
    pub fn members_of(&self, t: usize) -> &[usize] {
        &self.test_members[self.test_offsets[t]..self.test_offsets[t + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.ind_offsets[i + 1] - self.ind_offsets[i]
    }

    /// Connected components that contain at least one test.
    ///
    /// Each component is returned as (local individuals, local tests), both ascending.
    pub fn components(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let n = self.num_individuals();
        let mut seen_ind = vec![false; n];
        let mut seen_test = vec![false; self.num_tests()];
        let mut out = Vec::new();
        for start in 0..self.num_tests() {
            if seen_test[start] {
                continue;
            }
            let (mut inds, mut tests) = (Vec::new(), vec![start]);
            seen_test[start] = true;
            let mut stack = vec![start];
            while let Some(t) = stack.pop() {
                for &x in self.members_of(t) {
                    if seen_ind[x] {
                        continue;
                    }
                    seen_ind[x] = true;
                    inds.push(x);
                    for &u in self.tests_of(x) {
                        if !seen_test[u] {
                            seen_test[u] = true;
                            tests.push(u);
                            stack.push(u);
                        }
                    }
                }
            }
            inds.sort_unstable();
            tests.sort_unstable();
            out.push((inds, tests));
        }
        out
    }

    /// Restriction to the given local individuals and tests, re-indexed locally.
    ///
    /// Global ids are carried over from `self`.
    pub fn subgraph(&self, individuals: &[usize], tests: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.num_individuals()];
        for (i, &x) in individuals.iter().enumerate() {
            local[x] = i;
        }
        let lists: Vec<Vec<usize>> = tests
            .iter()
            .map(|&t| {
                self.members_of(t)
                    .iter()
                    .filter(|&&x| local[x] != usize::MAX)
                    .map(|&x| local[x])
                    .collect()
            })
            .collect();
        Self::assemble(
            individuals.iter().map(|&i| self.individuals[i]).collect(),
            tests.iter().map(|&t| self.tests[t]).collect(),
            &lists,
        )
    }
}

pub fn build_reduced_graph(
    design: &BipartiteDesign,
    outcomes: &Outcomes,
    partition: &TypePartition,
    peeling: Peeling,
) -> ReducedGraph {
    let n = design.num_individuals();
    let m = design.num_tests();
    // step 1: negative tests and V0- go
    let mut test_alive: Vec<bool> = (0..m).map(|a| outcomes.is_positive(a)).collect();
    let mut alive: Vec<bool> = (0..n)
        .map(|x| partition.type_of(x) != IndividualType::V0Minus)
        .collect();
    // step 2: V1- go
    let removed_infected: Vec<usize> = partition.v1_minus();
    for &x in &removed_infected {
        alive[x] = false;
    }
    // step 3: tests next to V1- go
    for &x in &removed_infected {
        for &a in design.tests_of(x) {
            test_alive[a] = false;
        }
    }
    if peeling == Peeling::Iterated {
        loop {
            let forced: Vec<usize> = (0..m)
                .filter(|&a| test_alive[a])
                .filter_map(|a| {
                    let mut survivors = design.members_of(a).iter().filter(|&&x| alive[x]);
                    match (survivors.next(), survivors.next()) {
                        (Some(&x), None) => Some(x),
                        _ => None,
                    }
                })
                .collect();
            if forced.is_empty() {
                break;
            }
            for x in forced {
                alive[x] = false;
                for &a in design.tests_of(x) {
                    test_alive[a] = false;
                }
            }
        }
    }
    let individuals: Vec<usize> = (0..n).filter(|&x| alive[x]).collect();
    let test_ids: Vec<usize> = (0..m).filter(|&a| test_alive[a]).collect();
    let mut local = vec![usize::MAX; n];
    for (i, &x) in individuals.iter().enumerate() {
        local[x] = i;
    }
    let lists: Vec<Vec<usize>> = test_ids
        .iter()
        .map(|&a| {
            design
                .members_of(a)
                .iter()
                .filter(|&&x| alive[x])
                .map(|&x| local[x])
                .collect()
        })
        .collect();
    ReducedGraph::assemble(individuals, test_ids, &lists)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Uninfected,
    Infected,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    pub labels: Vec<Label>,
}

impl DecodeResult {
    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn with_label(&self, label: Label) -> Vec<usize> {
        (0..self.labels.len()).filter(|&x| self.labels[x] == label).collect()
    }
}

/// Everyone in a negative test is uninfected; everyone else is declared infected.
pub fn comp_decode(design: &BipartiteDesign, outcomes: &Outcomes) -> DecodeResult {
    let labels = in_negative_test(design, outcomes)
        .into_iter()
        .map(|neg| if neg { Label::Uninfected } else { Label::Infected })
        .collect();
    DecodeResult { labels }
}

/// What DD reports for individuals it cannot certify.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DdView {
    /// Leave them `Unresolved`.
    #[default]
    Unresolved,
    /// Declare them uninfected, as the classical DD decoder does.
    DeclareUninfected,
}

pub fn dd_decode(design: &BipartiteDesign, outcomes: &Outcomes, view: DdView) -> DecodeResult {
    let in_negative = in_negative_test(design, outcomes);
    let rest = match view {
        DdView::Unresolved => Label::Unresolved,
        DdView::DeclareUninfected => Label::Uninfected,
    };
    let labels = (0..design.num_individuals())
        .map(|x| {
            if in_negative[x] {
                Label::Uninfected
            } else if certified_infected(design, &in_negative, x) {
                Label::Infected
            } else {
                rest
            }
        })
        .collect();
    DecodeResult { labels }
}

/// One row of the per-trial partition dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub trial: u64,
    pub v0_minus: usize,
    pub v0_plus: usize,
    pub v1_minus: usize,
    pub v1_plus: usize,
    pub surviving_tests: usize,
}

pub fn write_partition_csv<W: Write>(rows: &[PartitionRow], mut w: W) -> Result<()> {
    writeln!(w, "trial,v0_minus,v0_plus,v1_minus,v1_plus,surviving_tests")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.trial, r.v0_minus, r.v0_plus, r.v1_minus, r.v1_plus, r.surviving_tests
        )?;
    }
    Ok(())
}
