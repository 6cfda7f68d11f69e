//! Digital CIM: exact adder-tree MACs and the two approximate variants.

mod prob;
mod tree;

pub use prob::{prob_mac, prob_mac_rmse, ProbMacEstimate, ProbMode};
pub use tree::{AdderTree, ApproxProfile, CostTable, NodeKind, Preset};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{CimError, Result};
use crate::quant::{PartialGrid, QuantVector};
use crate::rng::stream_rng;

/// Exact digital MAC: every plane pair is reduced by an exact adder tree and
/// the partials are shift-added.
pub fn dcim_mac(input: &QuantVector, weights: &QuantVector) -> Result<i64> {
    exact_partials(input, weights)?.recombine(&input.plane_weights(), &weights.plane_weights())
}

/// Plane-pair partials computed through an exact adder tree.
pub fn exact_partials(input: &QuantVector, weights: &QuantVector) -> Result<PartialGrid<i64>> {
    if input.len() != weights.len() {
        return Err(CimError::Shape(format!(
            "input length {} vs weight length {}",
            input.len(),
            weights.len()
        )));
    }
    let tree = AdderTree::exact(input.len());
    let w_planes = weights.bit_planes();
    let mut grid = PartialGrid::new(input.bit_width(), weights.bit_width());
    for a in input.bit_planes() {
        for b in &w_planes {
            let sum = tree.eval(&a.and(b)?)?;
            grid.set(a.index(), b.index(), sum as i64)?;
        }
    }
    Ok(grid)
}

/// RMSE of `tree` against `reference` over uniform random input bits,
/// normalized by the fan-in (the full-scale popcount).
///
/// Trial `t` draws its bits from stream `(seed, t)`, so the same seed gives
/// the same input set for every tree and any thread count.
pub fn dat_rmse(tree: &AdderTree, reference: &AdderTree, trials: usize, seed: u64) -> Result<f64> {
    if trials < 1000 {
        return Err(CimError::Config(format!(
            "dat_rmse needs at least 1000 trials, got {trials}"
        )));
    }
    if tree.fan_in() != reference.fan_in() {
        return Err(CimError::Shape(format!(
            "fan-in {} vs reference fan-in {}",
            tree.fan_in(),
            reference.fan_in()
        )));
    }
    let n = tree.fan_in();
    let sq: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, &[t]);
            let bits: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            let e = tree.eval(&bits)? as f64 - reference.eval(&bits)? as f64;
            Ok(e * e)
        })
        .collect::<Result<_>>()?;
    let mse = sq.iter().sum::<f64>() / trials as f64;
    Ok(mse.sqrt() / n as f64)
}
