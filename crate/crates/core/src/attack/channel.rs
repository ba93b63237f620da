//! Binary symmetric channel view of Eve's keystream and the attack
//! feasibility formulas.

use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::report::round_sig12;

/// Base-2 binary entropy, `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return argument(format!("probability {p} outside [0, 1]"));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Crossover probability of Eve's keystream against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BscEstimate {
    pub p: f64,
    pub epsilon: f64,
    pub n_samples: usize,
    /// The raw mismatch rate exceeded 1/2 and was reported for the
    /// complemented stream.
    pub folded: bool,
}

impl BscEstimate {
    pub fn from_rate(raw: f64, n_samples: usize) -> Self {
        let folded = raw > 0.5;
        let p = if folded { 1.0 - raw } else { raw };
        Self {
            p,
            epsilon: 0.5 - p,
            n_samples,
            folded,
        }
    }

    pub fn compare(estimate: &[u8], truth: &[u8]) -> Result<Self> {
        if estimate.len() != truth.len() {
            return argument(format!(
                "estimate has {} bits, truth has {}",
                estimate.len(),
                truth.len()
            ));
        }
        if estimate.is_empty() {
            return argument("cannot estimate a crossover from zero bits");
        }
        let errors = estimate.iter().zip(truth).filter(|(a, b)| a != b).count();
        Ok(Self::from_rate(
            errors as f64 / estimate.len() as f64,
            estimate.len(),
        ))
    }

    /// Binomial standard error of `p`.
    pub fn std_error(&self) -> f64 {
        (self.p * (1.0 - self.p) / self.n_samples as f64).sqrt()
    }
}

/// Critical length, capacity, complexity and required observation length.
/// Complexities are `log2` values; unreachable quantities are `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityEstimate {
    pub key_bits: u32,
    pub tap_count: u32,
    pub p: f64,
    pub capacity: f64,
    pub n0: f64,
    /// `log2 F` with exponent `|K| (1 - |K|/n0)`, as printed.
    pub log2_complexity: f64,
    pub required_n: f64,
    /// `log2 F` with exponent `|K| (1 - N/n0)` for an observed `N`, the form
    /// common in the correlation-attack literature.
    pub log2_complexity_observed: Option<f64>,
    pub observed_n: Option<u64>,
}

impl FeasibilityEstimate {
    pub fn with_observed_length(mut self, n: u64) -> Self {
        self.observed_n = Some(n);
        self.log2_complexity_observed = Some(if self.n0.is_finite() {
            self.log2_prefactor() + self.key_bits as f64 * (1.0 - n as f64 / self.n0)
        } else {
            f64::INFINITY
        });
        self
    }

    fn log2_prefactor(&self) -> f64 {
        let eps = 0.5 - self.p;
        if eps <= 0.0 {
            f64::INFINITY
        } else {
            -((self.tap_count - 1) as f64) * (2.0 * eps).log2()
        }
    }

    /// Whether `n` observed bits exceed the critical length.
    pub fn observation_suffices(&self, n: u64) -> bool {
        n as f64 > self.n0
    }
}

pub fn feasibility(key_bits: u32, tap_count: u32, p: f64) -> Result<FeasibilityEstimate> {
    if key_bits < 1 {
        return argument("key length must be at least one bit");
    }
    if tap_count < 2 {
        return argument(format!("tap count must be at least 2, got {tap_count}"));
    }
    if !(0.0..=0.5).contains(&p) {
        return argument(format!("crossover {p} outside [0, 0.5]"));
    }
    let capacity = 1.0 - binary_entropy(p)?;
    let n0 = if capacity > 0.0 {
        key_bits as f64 / capacity
    } else {
        f64::INFINITY
    };
    let mut est = FeasibilityEstimate {
        key_bits,
        tap_count,
        p,
        capacity,
        n0,
        log2_complexity: f64::INFINITY,
        required_n: f64::INFINITY,
        log2_complexity_observed: None,
        observed_n: None,
    };
    let prefactor = est.log2_prefactor();
    if prefactor.is_finite() {
        // 12 significant digits, so exact-decimal inputs give exact counts
        est.required_n = round_sig12(prefactor.exp2());
        est.log2_complexity = if n0.is_finite() {
            prefactor + key_bits as f64 * (1.0 - key_bits as f64 / n0)
        } else {
            f64::INFINITY
        };
    }
    Ok(est)
}
