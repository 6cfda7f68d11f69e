//! Bit-true behavioral models of SRAM compute-in-memory (CIM) macros.
//!
//! The crate covers three families of MAC accumulator:
//!
//! * [`dcim`]: digital adder trees, exact or with OR/AND gate substitution,
//!   and a popcount-driven probabilistic estimator.
//! * [`acim`]: charge-domain analog accumulation with Gaussian noise,
//!   static per-cell mismatch and a SAR ADC, in bit-serial, bit-parallel and
//!   one-shot weighted-capacitor flavours.
//! * [`hybrid`]: per-plane-pair digital/analog splits and a saliency
//!   evaluator that picks the split at runtime.
//!
//! [`csnr`] measures compute-SNR of any backend against the exact digital
//! result, and [`net`] runs small quantized MLPs through a chosen backend.
//!
//! ```
//! use cimsim::quant::{dot_oracle, QuantVector};
//! use cimsim::dcim::dcim_mac;
//!
//! let x = QuantVector::unsigned(vec![3, 0, 15, 7], 4)?;
//! let w = QuantVector::signed(vec![-2, 5, 1, -8], 4)?;
//! assert_eq!(dcim_mac(&x, &w)?, dot_oracle(&x, &w)?);
//! # Ok::<(), cimsim::CimError>(())
//! ```

pub mod acim;
pub mod backend;
pub mod csnr;
pub mod dcim;
mod error;
pub mod hybrid;
pub mod net;
pub mod quant;
pub mod rng;

pub use error::{CimError, Result};

/// Guide chapters from `book/`, compiled so their snippets run as doc-tests.
#[cfg(doctest)]
pub mod guide {
    macro_rules! chapter {
        ($name:ident, $file:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub mod $name {}
        };
    }

    chapter!(introduction, "introduction.md");
    chapter!(bit_planes, "bit-planes.md");
    chapter!(digital, "digital.md");
    chapter!(analog, "analog.md");
    chapter!(csnr, "csnr.md");
    chapter!(hybrid, "hybrid.md");
    chapter!(network, "network.md");
    chapter!(cli, "cli.md");
}
