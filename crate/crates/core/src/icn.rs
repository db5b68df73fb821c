//! Exact product-form analysis of the ideal CSMA network.
//!
//! With transmission aggressiveness `r`, state `s` has stationary weight
//! `exp(sum_i s_i r_i)`. Everything here works in log space: the partition
//! function is only ever handled through a max-shifted log-sum-exp.

use crate::error::{check_len, Error, Result};
use crate::graph::{bits, StateSpace};

/// Lower end of the numeric TA domain. Entries below are clamped.
pub const TA_FLOOR: f64 = -30.0;
/// Upper end of the numeric TA domain. Entries above are clamped.
pub const TA_CEIL: f64 = 30.0;

/// Per-link transmission aggressiveness `r_i = ln(rho_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessProfile(Vec<f64>);

impl AccessProfile {
    /// Clamps every entry into `[TA_FLOOR, TA_CEIL]`; infinities land on
    /// the bounds, NaN is rejected.
    pub fn new(ta: Vec<f64>) -> Result<Self> {
        let mut ta = ta;
        for (i, r) in ta.iter_mut().enumerate() {
            if r.is_nan() {
                return Err(Error::NotANumber { link: i + 1 });
            }
            *r = r.clamp(TA_FLOOR, TA_CEIL);
        }
        Ok(Self(ta))
    }

    pub fn uniform(n: usize, ta: f64) -> Self {
        Self(vec![ta.clamp(TA_FLOOR, TA_CEIL); n])
    }

    /// Builds a profile from access intensities `rho_i > 0`.
    pub fn from_intensities(rho: &[f64]) -> Result<Self> {
        for (i, &x) in rho.iter().enumerate() {
            if !(x > 0.0) {
                return Err(crate::error::invalid(
                    "access intensity",
                    format!("link {} has rho = {x}, must be positive", i + 1),
                ));
            }
        }
        Self::new(rho.iter().map(|x| x.ln()).collect())
    }

    pub fn ta(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Access intensity of the link at 0-based `index`.
    pub fn intensity(&self, index: usize) -> f64 {
        self.0[index].exp()
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.0.iter().map(|r| r.exp()).collect()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Probabilities aligned with the [`StateSpace`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution(Vec<f64>);

impl StationaryDistribution {
    /// Accepts any non-negative vector summing to one within `1e-9`.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(bad) = p.iter().find(|&&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(crate::error::invalid(
                "distribution",
                format!("entry {bad} is not a finite non-negative number"),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(crate::error::invalid(
                "distribution",
                format!("entries sum to {total}, not 1"),
            ));
        }
        Ok(Self(p))
    }

    pub(crate) fn from_raw(p: Vec<f64>) -> Self {
        Self(p)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn state_log_weights(space: &StateSpace, r: &AccessProfile) -> Result<Vec<f64>> {
    check_len(space.link_count(), r.len())?;
    let ta = r.ta();
    Ok(space
        .states()
        .iter()
        .map(|&s| bits(s as u64).map(|i| ta[i]).sum())
        .collect())
}

fn log_sum_exp(w: &[f64]) -> f64 {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + w.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln Z(r)`.
pub fn log_partition(space: &StateSpace, r: &AccessProfile) -> Result<f64> {
    Ok(log_sum_exp(&state_log_weights(space, r)?))
}

/// `p_s = exp(s . r) / Z(r)` for every feasible state.
pub fn stationary_distribution(
    space: &StateSpace,
    r: &AccessProfile,
) -> Result<StationaryDistribution> {
    let w = state_log_weights(space, r)?;
    let log_z = log_sum_exp(&w);
    Ok(StationaryDistribution(
        w.iter().map(|x| (x - log_z).exp()).collect(),
    ))
}

/// Marginal transmit probability of each link under an arbitrary state
/// distribution.
pub fn throughput_of(space: &StateSpace, p: &StationaryDistribution) -> Result<Vec<f64>> {
    check_len(space.len(), p.len())?;
    let mut theta = vec![0.0; space.link_count()];
    for (&s, &ps) in space.states().iter().zip(p.probabilities()) {
        for i in bits(s as u64) {
            theta[i] += ps;
        }
    }
    Ok(theta)
}

/// Long-run throughput `theta_i(r)`, the probability that link `i` is on air.
pub fn throughput(space: &StateSpace, r: &AccessProfile) -> Result<Vec<f64>> {
    throughput_of(space, &stationary_distribution(space, r)?)
}

/// `F(r; target) = target . r - ln Z(r)`, concave in `r`.
pub fn log_likelihood(space: &StateSpace, r: &AccessProfile, target: &[f64]) -> Result<f64> {
    check_len(space.link_count(), target.len())?;
    let log_z = log_partition(space, r)?;
    let linear: f64 = target.iter().zip(r.ta()).map(|(t, x)| t * x).sum();
    Ok(linear - log_z)
}

/// `dF/dr_i = target_i - theta_i(r)`.
pub fn log_likelihood_gradient(
    space: &StateSpace,
    r: &AccessProfile,
    target: &[f64],
) -> Result<Vec<f64>> {
    check_len(space.link_count(), target.len())?;
    let theta = throughput(space, r)?;
    Ok(target.iter().zip(theta).map(|(t, th)| t - th).collect())
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &StationaryDistribution) -> f64 {
    -p.probabilities()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}
