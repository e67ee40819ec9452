use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::AnalyticConstants;
use crate::error::{Error, Result};

/// Largest neglected probability mass allowed for any truncated law.
pub const TRUNCATION_EPS: f64 = 1e-13;

/// Largest support cutoff tried before truncation is reported as failed.
pub const MAX_CUTOFF: usize = 1024;

const MAX_JOINT_CUTOFF: usize = 128;

/// Probability mass function on `{0, ..., len-1}`; mass beyond the support is `tail_mass`.
///
/// Probabilities are never renormalized after truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffspringPmf {
    pub probs: Vec<f64>,
    pub tail_mass: f64,
}

impl OffspringPmf {
    fn from_probs(probs: Vec<f64>) -> Self {
        let total: f64 = probs.iter().sum();
        Self {
            probs,
            tail_mass: (1.0 - total).max(0.0),
        }
    }

    pub fn point_mass_at_zero() -> Self {
        Self {
            probs: vec![1.0],
            tail_mass: 0.0,
        }
    }

    pub fn pmf(&self, j: usize) -> f64 {
        self.probs.get(j).copied().unwrap_or(0.0)
    }

    /// Largest retained value.
    pub fn cutoff(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(j, p)| j as f64 * p).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "j,probability")?;
        for (j, p) in self.probs.iter().enumerate() {
            writeln!(w, "{j},{p:e}")?;
        }
        Ok(())
    }
}

/// Joint law of (`V0+` count, `V1+` count) on a `rows × cols` box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointOffspringPmf {
    pub rows: usize,
    pub cols: usize,
    /// Row-major: entry `j * cols + k` is `P(V0+ = j, V1+ = k)`.
    pub probs: Vec<f64>,
    pub tail_mass: f64,
}

impl JointOffspringPmf {
    pub fn pmf(&self, j: usize, k: usize) -> f64 {
        if j < self.rows && k < self.cols {
            self.probs[j * self.cols + k]
        } else {
            0.0
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn marginal_v0(&self) -> Vec<f64> {
        self.probs.chunks(self.cols).map(|row| row.iter().sum()).collect()
    }

    pub fn marginal_v1(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.probs.chunks(self.cols) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        out
    }

    /// Nonzero entries keyed by `(v0plus, v1plus)`.
    pub fn to_map(&self) -> BTreeMap<(usize, usize), f64> {
        let mut out = BTreeMap::new();
        for j in 0..self.rows {
            for k in 0..self.cols {
                let p = self.probs[j * self.cols + k];
                if p > 0.0 {
                    out.insert((j, k), p);
                }
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "j,k,probability")?;
        for j in 0..self.rows {
            for k in 0..self.cols {
                writeln!(w, "{j},{k},{:e}", self.probs[j * self.cols + k])?;
            }
        }
        Ok(())
    }
}

/// Smallest `J` with `P(Po(mu) > J) < eps`, from the Chernoff bound
/// `P(X >= j) <= e^{-mu} (e mu / j)^j` for `j > mu`.
pub fn poisson_cutoff(mu: f64, eps: f64) -> usize {
    if mu <= 0.0 {
        return 0;
    }
    let log_eps = eps.ln();
    let mut j = mu.floor() as usize + 1;
    loop {
        let jf = j as f64;
        let log_bound = -mu + jf * (1.0 + mu.ln() - jf.ln());
        if log_bound < log_eps {
            return j - 1;
        }
        j += 1;
    }
}

fn poisson_probs(mu: f64, jmax: usize) -> Vec<f64> {
    if mu == 0.0 {
        let mut v = vec![0.0; jmax + 1];
        v[0] = 1.0;
        return v;
    }
    let ln_mu = mu.ln();
    let mut ln_p = -mu;
    let mut out = Vec::with_capacity(jmax + 1);
    out.push(ln_p.exp());
    for j in 1..=jmax {
        ln_p += ln_mu - (j as f64).ln();
        out.push(ln_p.exp());
    }
    out
}

/// Poisson(`mu`) law restricted to `{0, ..., jmax}`.
pub fn poisson_pmf(mu: f64, jmax: usize) -> Result<OffspringPmf> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("Poisson mean {mu} must be >= 0")));
    }
    Ok(OffspringPmf::from_probs(poisson_probs(mu, jmax)))
}

/// Poisson(`mu`) conditioned on being at least 1, restricted to `{0, ..., jmax}`.
pub fn truncated_poisson_pmf(mu: f64, jmax: usize) -> Result<OffspringPmf> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "zero-truncated Poisson needs a positive mean, got {mu}"
        )));
    }
    let norm = -(-mu).exp_m1();
    let mut probs = poisson_probs(mu, jmax);
    probs[0] = 0.0;
    for p in probs.iter_mut().skip(1) {
        *p /= norm;
    }
    Ok(OffspringPmf::from_probs(probs))
}

/// `Bin(n, q)` probabilities for `0..=n`.
pub fn binomial_pmf(n: usize, q: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut coeff = 1.0f64;
    for t in 0..=n {
        if t > 0 {
            coeff = coeff * (n - t + 1) as f64 / t as f64;
        }
        out.push(coeff * q.powi(t as i32) * (1.0 - q).powi((n - t) as i32));
    }
    out
}

/// Convolution of two laws on the integers, dropping values above `cutoff`.
pub fn convolve(a: &[f64], b: &[f64], cutoff: usize) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let len = (a.len() + b.len() - 1).min(cutoff + 1);
    let mut out = vec![0.0; len];
    for (i, &pa) in a.iter().enumerate().take(len) {
        if pa == 0.0 {
            continue;
        }
        for (j, &pb) in b.iter().enumerate().take(len - i) {
            out[i + j] += pa * pb;
        }
    }
    out
}

/// Runs `build` with growing cutoffs until the neglected mass drops below the limit.
fn grow_until_tight(initial: usize, mut build: impl FnMut(usize) -> Result<Vec<f64>>) -> Result<OffspringPmf> {
    let mut cutoff = initial.max(1);
    loop {
        let pmf = OffspringPmf::from_probs(build(cutoff)?);
        if pmf.tail_mass <= TRUNCATION_EPS {
            return Ok(pmf);
        }
        if cutoff >= MAX_CUTOFF {
            return Err(Error::Truncation {
                tail: pmf.tail_mass,
                eps: TRUNCATION_EPS,
                cutoff,
            });
        }
        cutoff = (cutoff * 2).min(MAX_CUTOFF);
    }
}

/// Law of `Σ_t X_t S_t` over `slots` exchangeable slots where `X_t ~ Bernoulli(q)`
/// and `S_t` has law `unit`, computed by mixing `t`-fold convolutions.
pub fn compound_law(slots: usize, q: f64, unit: &[f64], cutoff: usize) -> Vec<f64> {
    let weights = binomial_pmf(slots, q);
    let mut power = vec![1.0];
    let mut out = vec![0.0; cutoff + 1];
    for (t, w) in weights.iter().enumerate() {
        if t > 0 {
            power = convolve(&power, unit, cutoff);
        }
        for (o, p) in out.iter_mut().zip(&power) {
            *o += w * p;
        }
    }
    out
}

/// Offspring laws of a `V0+` root with `slots` tests: the number of `V0+`
/// and the number of `V1+` second neighbours.
///
/// The `V0+` count is computed in closed form as
/// `P(j) = Σ_t Bin(t; slots, q0) Po(j; t mu0)`; the `V1+` count as the
/// `Bin(slots, q0)` mixture of `t`-fold convolutions of `Po≥1(mu1)`.
pub fn pmf_v0plus_offspring(constants: &AnalyticConstants, slots: usize) -> Result<(OffspringPmf, OffspringPmf)> {
    let q = constants.q0;
    if q == 0.0 || slots == 0 {
        return Ok((OffspringPmf::point_mass_at_zero(), OffspringPmf::point_mass_at_zero()));
    }
    let weights = binomial_pmf(slots, q);
    let mu0 = constants.mu0;
    let v0 = if mu0 == 0.0 {
        OffspringPmf::point_mass_at_zero()
    } else {
        grow_until_tight(poisson_cutoff(slots as f64 * mu0, TRUNCATION_EPS), |cutoff| {
            let mut out = vec![0.0; cutoff + 1];
            for (t, w) in weights.iter().enumerate() {
                let po = poisson_probs(t as f64 * mu0, cutoff);
                for (o, p) in out.iter_mut().zip(&po) {
                    *o += w * p;
                }
            }
            Ok(out)
        })?
    };
    let mu1 = constants.mu1;
    let initial = slots + poisson_cutoff(slots as f64 * mu1, TRUNCATION_EPS);
    let v1 = grow_until_tight(initial, |cutoff| {
        let unit = truncated_poisson_pmf(mu1, cutoff)?.probs;
        Ok(compound_law(slots, q, &unit, cutoff))
    })?;
    Ok((v0, v1))
}

/// Truncated 2-D convolution on a `rows × cols` box.
fn convolve_2d(a: &[f64], b: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i1 in 0..rows {
        for j1 in 0..cols {
            let pa = a[i1 * cols + j1];
            if pa == 0.0 {
                continue;
            }
            for i2 in 0..rows - i1 {
                let row_b = &b[i2 * cols..i2 * cols + cols - j1];
                let row_out = &mut out[(i1 + i2) * cols + j1..(i1 + i2) * cols + cols];
                for (o, pb) in row_out.iter_mut().zip(row_b) {
                    *o += pa * pb;
                }
            }
        }
    }
    out
}

/// Joint offspring law of a `V1+` root with `slots` tests.
///
/// Each slot survives with probability `q1` (clamped to `[0, 1]`); a
/// surviving slot contributes `Y = (A, B)` with `A ~ Po(mu0)`,
/// `B ~ Po(mu1)` independent and conditioned on `A + B > 0`.
pub fn pmf_v1plus_offspring_joint(constants: &AnalyticConstants, slots: usize) -> Result<JointOffspringPmf> {
    let (mu0, mu1) = (constants.mu0, constants.mu1);
    if (mu0 + mu1).is_nan() || mu0 + mu1 <= 0.0 {
        return Err(Error::InvalidArgument("joint offspring law needs mu0 + mu1 > 0".into()));
    }
    let q = constants.q1_clamped();
    if q == 0.0 || slots == 0 {
        return Ok(JointOffspringPmf {
            rows: 1,
            cols: 1,
            probs: vec![1.0],
            tail_mass: 0.0,
        });
    }
    let weights = binomial_pmf(slots, q);
    let norm = -(-(mu0 + mu1)).exp_m1();
    let mut rows = slots + poisson_cutoff(slots as f64 * mu0, TRUNCATION_EPS) + 1;
    let mut cols = slots + poisson_cutoff(slots as f64 * mu1, TRUNCATION_EPS) + 1;
    loop {
        let a = poisson_probs(mu0, rows - 1);
        let b = poisson_probs(mu1, cols - 1);
        let mut unit = vec![0.0; rows * cols];
        for j in 0..rows {
            for k in 0..cols {
                unit[j * cols + k] = a[j] * b[k] / norm;
            }
        }
        unit[0] = 0.0;
        let mut power = vec![0.0; rows * cols];
        power[0] = 1.0;
        let mut probs = vec![0.0; rows * cols];
        for (t, w) in weights.iter().enumerate() {
            if t > 0 {
                power = convolve_2d(&power, &unit, rows, cols);
            }
            for (o, p) in probs.iter_mut().zip(&power) {
                *o += w * p;
            }
        }
        let tail_mass = (1.0 - probs.iter().sum::<f64>()).max(0.0);
        if tail_mass <= TRUNCATION_EPS {
            return Ok(JointOffspringPmf {
                rows,
                cols,
                probs,
                tail_mass,
            });
        }
        if rows.max(cols) > MAX_JOINT_CUTOFF {
            return Err(Error::Truncation {
                tail: tail_mass,
                eps: TRUNCATION_EPS,
                cutoff: rows.max(cols) - 1,
            });
        }
        rows *= 2;
        cols *= 2;
    }
}
