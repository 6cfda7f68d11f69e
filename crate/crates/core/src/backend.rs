//! A common interface over the MAC models so harnesses can treat them alike.

use rand_chacha::ChaCha8Rng;

use crate::acim::{acim_mac, MacResult, MacroInstance};
use crate::dcim::{exact_partials, AdderTree};
use crate::error::{CimError, Result};
use crate::hybrid::{hybrid_mac, DomainAssignment};
use crate::quant::{PartialGrid, QuantVector};

/// Anything that computes a MAC, possibly consuming noise from `rng`.
pub trait MacBackend: Sync {
    fn mac(&self, input: &QuantVector, weights: &QuantVector, rng: &mut ChaCha8Rng) -> Result<MacResult>;

    /// Short label for reports.
    fn label(&self) -> String;
}

/// The built-in backends.
#[derive(Debug, Clone)]
pub enum Backend {
    /// Exact adder-tree DCIM.
    Digital,
    /// DCIM reduced by a (possibly approximate) adder tree. The tree's
    /// fan-in must equal the vector length.
    ApproxDigital(AdderTree),
    Analog(MacroInstance),
    Hybrid {
        assignment: DomainAssignment,
        instance: MacroInstance,
    },
}

impl MacBackend for Backend {
    fn mac(&self, input: &QuantVector, weights: &QuantVector, rng: &mut ChaCha8Rng) -> Result<MacResult> {
        match self {
            Backend::Digital => {
                let grid = exact_partials(input, weights)?;
                let value = grid.recombine(&input.plane_weights(), &weights.plane_weights())?;
                Ok(MacResult::digital(value, grid))
            }
            Backend::ApproxDigital(tree) => {
                if input.len() != weights.len() {
                    return Err(CimError::Shape(format!(
                        "input length {} vs weight length {}",
                        input.len(),
                        weights.len()
                    )));
                }
                let w_planes = weights.bit_planes();
                let mut grid = PartialGrid::new(input.bit_width(), weights.bit_width());
                for a in input.bit_planes() {
                    for b in &w_planes {
                        grid.set(a.index(), b.index(), tree.eval(&a.and(b)?)? as i64)?;
                    }
                }
                let value = grid.recombine(&input.plane_weights(), &weights.plane_weights())?;
                Ok(MacResult::digital(value, grid))
            }
            Backend::Analog(inst) => acim_mac(input, weights, inst, rng),
            Backend::Hybrid { assignment, instance } => hybrid_mac(input, weights, assignment, instance, rng),
        }
    }

    fn label(&self) -> String {
        match self {
            Backend::Digital => "digital".into(),
            Backend::ApproxDigital(_) => "approx_digital".into(),
            Backend::Analog(inst) => inst.config().mode.name().into(),
            Backend::Hybrid { .. } => "hybrid".into(),
        }
    }
}
