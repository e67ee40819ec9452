//! Limiting (n → ∞) constants and offspring laws of non-hard individuals in
//! the reduced graph.
//!
//! All `1 + n^{-Ω(1)}` factors are dropped; the functions return the limits.

mod pmf;
mod sampler;

pub use pmf::{
    binomial_pmf, compound_law, convolve, pmf_v0plus_offspring, pmf_v1plus_offspring_joint, poisson_cutoff,
    poisson_pmf, truncated_poisson_pmf, JointOffspringPmf, OffspringPmf, MAX_CUTOFF, TRUNCATION_EPS,
};
pub use sampler::{sample_offspring, zero_truncated_draw, OffspringSampler, SlotDraw};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Type of a non-hard individual: the root of an offspring draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RootType {
    V0Plus,
    V1Plus,
}

impl RootType {
    pub const ALL: [RootType; 2] = [RootType::V0Plus, RootType::V1Plus];

    pub fn index(self) -> usize {
        match self {
            RootType::V0Plus => 0,
            RootType::V1Plus => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RootType::V0Plus => "v0plus",
            RootType::V1Plus => "v1plus",
        }
    }
}

/// Probability that an uninfected individual with `delta` tests sees only positive tests.
pub fn p0(d: f64, delta: usize) -> f64 {
    (-(-d).exp_m1()).powi(delta as i32)
}

/// Same as [`p1`] but accepting `delta = 0` (empty product, value 1).
fn p1_unchecked(d: f64, lambda: f64, delta: usize) -> f64 {
    if delta == 0 {
        return 1.0;
    }
    let rate = d + d * (1.0 - lambda) / lambda * p0(d, delta - 1);
    (-(-rate).exp_m1()).powi(delta as i32)
}

fn check_density(d: f64, lambda: f64) -> Result<()> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidArgument(format!("d = {d} must be positive")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_delta(delta: usize) -> Result<()> {
    if delta == 0 {
        return Err(Error::InvalidArgument("delta must be at least 1".into()));
    }
    Ok(())
}

/// Probability that an infected individual with `delta` tests is not certified by any of them.
pub fn p1(d: f64, lambda: f64, delta: usize) -> Result<f64> {
    check_density(d, lambda)?;
    check_delta(delta)?;
    Ok(p1_unchecked(d, lambda, delta))
}

/// Survival probability in the reduced graph of a test next to a `V0+` individual.
pub fn q0(d: f64, lambda: f64, delta: usize) -> Result<f64> {
    check_density(d, lambda)?;
    check_delta(delta)?;
    let p1m = p1_unchecked(d, lambda, delta - 1);
    let num = -(-d * p1m).exp_m1() * (-d * (1.0 - p1m)).exp();
    Ok(num / -(-d).exp_m1())
}

/// Raw value of the survival probability of a test next to a `V1+` individual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Q1 {
    pub value: f64,
    /// Whether `value` is a probability. The closed form exceeds 1 for some
    /// valid parameters (e.g. `delta = 1`).
    pub in_range: bool,
}

pub fn q1(d: f64, lambda: f64, delta: usize) -> Result<Q1> {
    check_density(d, lambda)?;
    check_delta(delta)?;
    let p0m = p0(d, delta - 1);
    let p1m = p1_unchecked(d, lambda, delta - 1);
    let rate = d * (1.0 - lambda) / lambda * p0m + d * p1m;
    let value = -(-rate).exp_m1() * (-d * (1.0 - p1m)).exp() / -(-d).exp_m1();
    Ok(Q1 {
        value,
        in_range: (0.0..=1.0).contains(&value),
    })
}

/// Which closed forms feed the survival probabilities and `mu1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Laws {
    /// `q0`, `q1` and `mu1` built on `p1(Δ-1)`, as in [`q0`] and [`q1`].
    #[default]
    Stated,
    /// Built on the probability that an infected co-member escapes
    /// certification through its other `Δ-1` tests,
    /// `(1 - exp(-d - d(1-λ)/λ · p0(Δ-1)))^{Δ-1} = p1(Δ)^{(Δ-1)/Δ}`, with the
    /// `q1` normalizer `1 - exp(-d - mu0)`. These match measured graphs.
    Corrected,
}

impl Laws {
    pub fn as_str(self) -> &'static str {
        match self {
            Laws::Stated => "stated",
            Laws::Corrected => "corrected",
        }
    }
}

/// Non-certification probability of an infected co-member through its other tests.
fn co_member_p1(d: f64, lambda: f64, delta: usize) -> f64 {
    let rate = d + d * (1.0 - lambda) / lambda * p0(d, delta - 1);
    (-(-rate).exp_m1()).powi(delta as i32 - 1)
}

/// Every constant the offspring laws depend on, for one `(d, lambda, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticConstants {
    pub d: f64,
    pub lambda: f64,
    pub delta: usize,
    pub p0_delta: f64,
    pub p0_delta_minus1: f64,
    pub p1_delta: f64,
    pub p1_delta_minus1: f64,
    pub q0: f64,
    pub q1_raw: f64,
    pub q1_in_range: bool,
    /// Mean number of `V0+` co-members per surviving test, `(1-λ)/λ · d · p0(Δ-1)`.
    pub mu0: f64,
    /// Mean number of `V1+` co-members before conditioning, `d · p1(Δ-1)`.
    pub mu1: f64,
    pub laws: Laws,
    /// The `p1`-like factor behind `q0`, `q1` and `mu1` under `laws`.
    pub co_member_p1: f64,
}

impl AnalyticConstants {
    pub fn new(d: f64, lambda: f64, delta: usize) -> Result<Self> {
        Self::with_laws(d, lambda, delta, Laws::Stated)
    }

    pub fn with_laws(d: f64, lambda: f64, delta: usize, laws: Laws) -> Result<Self> {
        check_density(d, lambda)?;
        check_delta(delta)?;
        let p0_delta_minus1 = p0(d, delta - 1);
        let p1_delta_minus1 = p1_unchecked(d, lambda, delta - 1);
        let mu0 = (1.0 - lambda) / lambda * d * p0_delta_minus1;
        let (q0, q1, co) = match laws {
            Laws::Stated => (q0(d, lambda, delta)?, q1(d, lambda, delta)?, p1_delta_minus1),
            Laws::Corrected => {
                let co = co_member_p1(d, lambda, delta);
                let escape = (-d * (1.0 - co)).exp();
                let q0 = -(-d * co).exp_m1() * escape / -(-d).exp_m1();
                let value = -(-(mu0 + d * co)).exp_m1() * escape / -(-(d + mu0)).exp_m1();
                let q1 = Q1 {
                    value,
                    in_range: (0.0..=1.0).contains(&value),
                };
                (q0, q1, co)
            }
        };
        Ok(Self {
            d,
            lambda,
            delta,
            p0_delta: p0(d, delta),
            p0_delta_minus1,
            p1_delta: p1_unchecked(d, lambda, delta),
            p1_delta_minus1,
            q0,
            q1_raw: q1.value,
            q1_in_range: q1.in_range,
            mu0,
            mu1: d * co,
            laws,
            co_member_p1: co,
        })
    }

    /// `q1` clamped to `[0, 1]`, warning when clamping changes the value.
    pub fn q1_clamped(&self) -> f64 {
        if !self.q1_in_range {
            log::warn!(
                "q1 = {} lies outside [0, 1] (d = {}, lambda = {}, delta = {}); clamping",
                self.q1_raw,
                self.d,
                self.lambda,
                self.delta
            );
        }
        self.q1_raw.clamp(0.0, 1.0)
    }

    /// Survival probability of a test slot next to a root of the given type.
    pub fn survival(&self, root: RootType) -> f64 {
        match root {
            RootType::V0Plus => self.q0,
            RootType::V1Plus => self.q1_clamped(),
        }
    }

    /// Share of infected individuals among non-hard ones,
    /// `λ p1 / ((1-λ) p0 + λ p1)`.
    pub fn infected_share(&self) -> f64 {
        let w0 = (1.0 - self.lambda) * self.p0_delta;
        let w1 = self.lambda * self.p1_delta;
        w1 / (w0 + w1)
    }
}
