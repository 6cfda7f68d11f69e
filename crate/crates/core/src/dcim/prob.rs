//! Probabilistic dot products over binary vectors.
//!
//! Each of the `n` element products is treated as a Bernoulli trial whose
//! success probability is `(c_in / n) * (c_w / n)`, where `c_in` and `c_w`
//! are the popcounts of the two vectors. The estimator only needs the two
//! popcounts, not the element-wise AND.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CimError, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbMode {
    /// `round(c_in * c_w / n)`.
    Expected,
    /// Number of successes in `n` seeded Bernoulli trials.
    Sampled,
}

impl ProbMode {
    pub fn name(self) -> &'static str {
        match self {
            ProbMode::Expected => "expected",
            ProbMode::Sampled => "sampled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbMacEstimate {
    pub estimate: u64,
    pub mode: ProbMode,
    pub trials: u64,
}

pub fn prob_mac(in_bits: &[bool], w_bits: &[bool], mode: ProbMode, seed: u64) -> Result<ProbMacEstimate> {
    if in_bits.len() != w_bits.len() {
        return Err(CimError::Shape(format!(
            "input length {} vs weight length {}",
            in_bits.len(),
            w_bits.len()
        )));
    }
    if in_bits.is_empty() {
        return Err(CimError::Empty("probabilistic MAC operands"));
    }
    let n = in_bits.len() as u64;
    let c_in = in_bits.iter().filter(|&&b| b).count() as u64;
    let c_w = w_bits.iter().filter(|&&b| b).count() as u64;
    let estimate = match mode {
        ProbMode::Expected => round_ratio(c_in * c_w, n),
        ProbMode::Sampled => {
            let p = (c_in as f64 / n as f64) * (c_w as f64 / n as f64);
            let mut rng: ChaCha8Rng = stream_rng(seed, &[]);
            (0..n).filter(|_| rng.random_bool(p)).count() as u64
        }
    };
    Ok(ProbMacEstimate {
        estimate,
        mode,
        trials: n,
    })
}

/// `round(num / den)` with ties to even, in exact integer arithmetic.
fn round_ratio(num: u64, den: u64) -> u64 {
    let q = num / den;
    let r = num % den;
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// RMSE of the estimator against the exact binary dot product over dense
/// uniform random vectors of length `n`, normalized by `n`.
pub fn prob_mac_rmse(n: usize, mode: ProbMode, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(CimError::Empty("probabilistic MAC trials"));
    }
    let sq: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, &[t, 0]);
            let a: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let b: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let exact = a.iter().zip(&b).filter(|(&x, &y)| x && y).count() as f64;
            let est = prob_mac(&a, &b, mode, crate::rng::derive_seed(seed, &[t, 1]))?.estimate as f64;
            Ok((est - exact).powi(2))
        })
        .collect::<Result<_>>()?;
    Ok((sq.iter().sum::<f64>() / trials as f64).sqrt() / n as f64)
}
