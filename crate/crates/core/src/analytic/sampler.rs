use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use super::{AnalyticConstants, RootType};
use crate::seed::rng_from_seed;

/// Outcome of one test slot next to a root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotDraw {
    /// The test is removed from the reduced graph.
    Removed,
    /// The test survives with these co-member counts.
    Survived { v0plus: u32, v1plus: u32 },
}

/// Exact sampler for the limiting offspring laws.
///
/// A slot survives with probability `q0` (`V0+` root) or clamped `q1`
/// (`V1+` root). A surviving slot of a `V0+` root carries
/// `(Po(mu0), Po≥1(mu1))`; one of a `V1+` root carries `(A, B)` with
/// `A ~ Po(mu0)`, `B ~ Po(mu1)` conditioned on `A + B > 0`, drawn as
/// `N ~ Po≥1(mu0 + mu1)` split binomially.
#[derive(Debug, Clone)]
pub struct OffspringSampler {
    survival: [f64; 2],
    mu0: f64,
    mu1: f64,
    poisson0: Option<Poisson<f64>>,
    poisson1: Option<Poisson<f64>>,
    poisson_total: Option<Poisson<f64>>,
}

impl OffspringSampler {
    pub fn new(constants: &AnalyticConstants) -> Self {
        let poisson = |mu: f64| (mu > 0.0).then(|| Poisson::new(mu).expect("finite positive mean"));
        Self {
            survival: [constants.q0, constants.q1_clamped()],
            mu0: constants.mu0,
            mu1: constants.mu1,
            poisson0: poisson(constants.mu0),
            poisson1: poisson(constants.mu1),
            poisson_total: poisson(constants.mu0 + constants.mu1),
        }
    }

    pub fn survival(&self, root: RootType) -> f64 {
        self.survival[root.index()]
    }

    pub fn draw_slot<R: Rng + ?Sized>(&self, root: RootType, rng: &mut R) -> SlotDraw {
        if !rng.random_bool(self.survival[root.index()]) {
            return SlotDraw::Removed;
        }
        let (v0plus, v1plus) = match root {
            RootType::V0Plus => (
                poisson_draw(self.poisson0.as_ref(), rng),
                zero_truncated_draw(self.mu1, self.poisson1.as_ref(), rng),
            ),
            RootType::V1Plus => {
                let total = zero_truncated_draw(self.mu0 + self.mu1, self.poisson_total.as_ref(), rng);
                let share = self.mu0 / (self.mu0 + self.mu1);
                let v0 = Binomial::new(total as u64, share)
                    .expect("share is a probability")
                    .sample(rng) as u32;
                (v0, total - v0)
            }
        };
        SlotDraw::Survived { v0plus, v1plus }
    }

    /// Draws `slots` slots; returns (surviving slots, `V0+` total, `V1+` total).
    pub fn draw<R: Rng + ?Sized>(&self, root: RootType, slots: usize, rng: &mut R) -> (usize, usize, usize) {
        let mut out = (0, 0, 0);
        for _ in 0..slots {
            if let SlotDraw::Survived { v0plus, v1plus } = self.draw_slot(root, rng) {
                out.0 += 1;
                out.1 += v0plus as usize;
                out.2 += v1plus as usize;
            }
        }
        out
    }
}

fn poisson_draw<R: Rng + ?Sized>(dist: Option<&Poisson<f64>>, rng: &mut R) -> u32 {
    dist.map_or(0, |p| p.sample(rng) as u32)
}

/// Draw from Po≥1(`mu`): rejection for `mu >= 1`, inversion otherwise.
pub fn zero_truncated_draw<R: Rng + ?Sized>(mu: f64, dist: Option<&Poisson<f64>>, rng: &mut R) -> u32 {
    let dist = dist.expect("zero-truncated Poisson needs a positive mean");
    if mu >= 1.0 {
        loop {
            let j = dist.sample(rng) as u32;
            if j > 0 {
                return j;
            }
        }
    }
    let target = rng.random::<f64>() * -(-mu).exp_m1();
    let mut p = mu * (-mu).exp();
    let mut acc = 0.0;
    let mut j = 1u32;
    loop {
        acc += p;
        if target < acc || p == 0.0 {
            return j;
        }
        j += 1;
        p *= mu / j as f64;
    }
}

/// One draw of (`V0+` count, `V1+` count) for a root with `slots` tests.
pub fn sample_offspring(constants: &AnalyticConstants, slots: usize, root: RootType, seed: u64) -> (usize, usize) {
    let mut rng = rng_from_seed(seed);
    let (_, v0, v1) = OffspringSampler::new(constants).draw(root, slots, &mut rng);
    (v0, v1)
}
