//! Charge-domain analog CIM.
//!
//! Each conversion sums gain-weighted bit (or level) products along the
//! column, adds one fresh Gaussian sample `gamma` and digitizes the result:
//!
//! ```text
//! analog = sum_i gain_i * x_i * w_i + gamma,   gamma ~ N(0, (sigma_lsb * LSB)^2)
//! ```
//!
//! `gain_i ~ N(1, mismatch_sigma)` is drawn once per [`MacroInstance`].
//! Noise samples come from the RNG handed to each call; one standard normal
//! is drawn per conversion slot in a fixed order, including slots whose
//! conversion is skipped, so streams stay aligned across backends.

mod adc;

pub use adc::{adc_energy_proxy, adc_quantize, sparsity_known_zero_bits, Conversion, Converter};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CimError, Result};
use crate::quant::{BitPlane, PartialGrid, QuantVector, MAX_BIT_WIDTH};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalogMode {
    /// One 1b x 1b conversion per plane pair.
    #[default]
    BitSerial,
    /// Inputs applied as DAC levels; one conversion per weight plane.
    BitParallel,
    /// Weight planes combined on binary-weighted capacitors; one conversion
    /// per input plane.
    OneShotMultiBit,
}

impl AnalogMode {
    pub fn name(self) -> &'static str {
        match self {
            AnalogMode::BitSerial => "bit_serial",
            AnalogMode::BitParallel => "bit_parallel",
            AnalogMode::OneShotMultiBit => "one_shot_multi_bit",
        }
    }
}

fn default_dac_bits() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalogConfig {
    pub rows: usize,
    /// ADC resolution `R` of a 1b x 1b conversion.
    #[serde(alias = "adc_resolution")]
    pub adc_bits: u32,
    /// Per-conversion noise in LSBs of the converter doing the conversion.
    #[serde(default)]
    pub noise_sigma_lsb: f64,
    /// Relative static per-row gain error.
    #[serde(default)]
    pub mismatch_sigma: f64,
    /// Relative static error of each binary-weighted capacitor (one-shot).
    #[serde(default)]
    pub cap_weight_sigma: f64,
    /// Input DAC resolution for bit-parallel mode.
    #[serde(default = "default_dac_bits")]
    pub dac_bits: u32,
    #[serde(default)]
    pub mode: AnalogMode,
    /// Skip SAR decisions that the input popcount proves to be zero.
    #[serde(default)]
    pub sparsity_adc: bool,
    /// Seed for the static mismatch draws.
    #[serde(default)]
    pub seed: u64,
}

impl AnalogConfig {
    /// Noise-free bit-serial macro with the smallest lossless ADC.
    pub fn ideal(rows: usize) -> Self {
        Self {
            rows,
            adc_bits: Converter::lossless_bits(rows as u64),
            noise_sigma_lsb: 0.0,
            mismatch_sigma: 0.0,
            cap_weight_sigma: 0.0,
            dac_bits: 1,
            mode: AnalogMode::BitSerial,
            sparsity_adc: false,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, sigma_lsb: f64) -> Self {
        self.noise_sigma_lsb = sigma_lsb;
        self
    }

    pub fn with_mode(mut self, mode: AnalogMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 {
            return Err(CimError::Config("rows must be at least 1".into()));
        }
        if !(1..=24).contains(&self.adc_bits) {
            return Err(CimError::Config(format!("adc_bits {} outside [1, 24]", self.adc_bits)));
        }
        if !(1..=16).contains(&self.dac_bits) {
            return Err(CimError::Config(format!("dac_bits {} outside [1, 16]", self.dac_bits)));
        }
        for (name, s) in [
            ("noise_sigma_lsb", self.noise_sigma_lsb),
            ("mismatch_sigma", self.mismatch_sigma),
            ("cap_weight_sigma", self.cap_weight_sigma),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(CimError::Config(format!("{name} must be finite and >= 0, got {s}")));
            }
        }
        Ok(())
    }

    /// Converter of a bit-serial conversion.
    pub fn bit_serial_converter(&self) -> Converter {
        Converter::for_range(self.adc_bits, self.rows as u64)
    }

    /// Converter of a bit-parallel conversion: `R + B` bits over `n (2^B - 1)`.
    pub fn bit_parallel_converter(&self) -> Converter {
        let levels = (1u64 << self.dac_bits) - 1;
        Converter::for_range(self.adc_bits + self.dac_bits, self.rows as u64 * levels)
    }

    /// Converter of a one-shot conversion: `R + p` bits over `n (2^p - 1)`.
    pub fn one_shot_converter(&self, weight_bits: u32) -> Converter {
        let levels = (1u64 << weight_bits) - 1;
        Converter::for_range(self.adc_bits + weight_bits, self.rows as u64 * levels)
    }

    /// Recombination weight and converter of every conversion a MAC
    /// performs in this mode, in conversion order.
    pub fn conversion_plan(&self, input: &QuantVector, weights: &QuantVector) -> Vec<(i64, Converter)> {
        let sj = input.plane_weights();
        let sk = weights.plane_weights();
        match self.mode {
            AnalogMode::BitSerial => {
                let c = self.bit_serial_converter();
                sj.iter().flat_map(|&a| sk.iter().map(move |&b| (a * b, c))).collect()
            }
            AnalogMode::BitParallel => {
                let c = self.bit_parallel_converter();
                sk.iter().map(|&b| (b, c)).collect()
            }
            AnalogMode::OneShotMultiBit => {
                let c = self.one_shot_converter(weights.bit_width());
                sj.iter().map(|&a| (a, c)).collect()
            }
        }
    }
}

/// An analog macro with its static mismatch frozen at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroInstance {
    config: AnalogConfig,
    cell_gains: Vec<f64>,
    plane_gains: Vec<f64>,
}

fn gains<R: Rng>(rng: &mut R, count: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0; count];
    }
    let d = Normal::new(1.0, sigma).expect("validated sigma");
    (0..count).map(|_| d.sample(rng)).collect()
}

impl MacroInstance {
    pub fn new(config: AnalogConfig) -> Result<Self> {
        config.validate()?;
        let cell_gains = gains(&mut stream_rng(config.seed, &[0]), config.rows, config.mismatch_sigma);
        let plane_gains = gains(
            &mut stream_rng(config.seed, &[1]),
            MAX_BIT_WIDTH as usize,
            config.cap_weight_sigma,
        );
        Ok(Self {
            config,
            cell_gains,
            plane_gains,
        })
    }

    pub fn config(&self) -> &AnalogConfig {
        &self.config
    }

    pub fn cell_gains(&self) -> &[f64] {
        &self.cell_gains
    }

    pub fn plane_gains(&self) -> &[f64] {
        &self.plane_gains
    }

    fn check_rows(&self, len: usize) -> Result<()> {
        if len != self.config.rows {
            return Err(CimError::Shape(format!(
                "vector length {len} on a {}-row macro",
                self.config.rows
            )));
        }
        Ok(())
    }

    /// Converts `ideal` (noise added from `z`, a standard normal draw) with
    /// optional sparsity-driven bit skipping given an ideal-value `bound`.
    fn convert(&self, converter: Converter, ideal: f64, z: f64, bound: u64) -> PlaneConversion {
        let analog = ideal + self.config.noise_sigma_lsb * converter.lsb() * z;
        let skip = if self.config.sparsity_adc {
            converter.known_zero_msbs(bound)
        } else {
            0
        };
        let conv = converter.convert_reduced(analog, skip);
        PlaneConversion {
            analog,
            code: conv.code,
            dequantized: conv.dequantized,
            active_bits: converter.bits() - skip,
            clipped: conv.clipped,
        }
    }
}

/// One conversion of a MAC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneConversion {
    pub analog: f64,
    pub code: u64,
    pub dequantized: f64,
    /// SAR bit decisions actually made (the energy proxy of this conversion).
    pub active_bits: u32,
    pub clipped: bool,
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// A 1b x 1b analog column conversion.
pub fn acim_bitserial_partial<R: Rng + ?Sized>(
    in_plane: &BitPlane,
    w_plane: &BitPlane,
    inst: &MacroInstance,
    rng: &mut R,
) -> Result<PlaneConversion> {
    inst.check_rows(in_plane.len())?;
    inst.check_rows(w_plane.len())?;
    let z = standard_normal(rng);
    let ideal: f64 = in_plane
        .bits()
        .iter()
        .zip(w_plane.bits())
        .zip(&inst.cell_gains)
        .filter(|((&a, &b), _)| a && b)
        .map(|(_, g)| g)
        .sum();
    Ok(inst.convert(inst.config.bit_serial_converter(), ideal, z, in_plane.count_ones()))
}

/// Output of a MAC on an analog or hybrid macro.
#[derive(Debug, Clone, PartialEq)]
pub struct MacResult {
    /// Recombined result rounded to the nearest integer.
    pub value: i64,
    /// Recombined result before the final rounding.
    pub unrounded: f64,
    /// ADC codes (or exact digital partials) per conversion slot.
    pub partials: PartialGrid<i64>,
    pub conversions: u32,
    /// Total SAR bit decisions.
    pub adc_energy: u64,
    /// Conversions that saturated the ADC.
    pub saturated: u32,
}

impl MacResult {
    pub(crate) fn digital(value: i64, partials: PartialGrid<i64>) -> Self {
        Self {
            value,
            unrounded: value as f64,
            partials,
            conversions: 0,
            adc_energy: 0,
            saturated: 0,
        }
    }
}

/// Accumulates conversions and their recombination.
pub(crate) struct Accumulator {
    grid: PartialGrid<i64>,
    sum: f64,
    conversions: u32,
    energy: u64,
    saturated: u32,
}

impl Accumulator {
    pub(crate) fn new(m: u32, p: u32) -> Self {
        Self {
            grid: PartialGrid::new(m, p),
            sum: 0.0,
            conversions: 0,
            energy: 0,
            saturated: 0,
        }
    }

    pub(crate) fn analog(&mut self, j: u32, k: u32, weight: i64, c: &PlaneConversion) -> Result<()> {
        self.grid.set(j, k, c.code as i64)?;
        self.sum += weight as f64 * c.dequantized;
        self.conversions += 1;
        self.energy += c.active_bits as u64;
        self.saturated += c.clipped as u32;
        Ok(())
    }

    pub(crate) fn digital(&mut self, j: u32, k: u32, weight: i64, partial: i64) -> Result<()> {
        self.grid.set(j, k, partial)?;
        self.sum += (weight * partial) as f64;
        Ok(())
    }

    pub(crate) fn finish(self) -> MacResult {
        MacResult {
            value: self.sum.round_ties_even() as i64,
            unrounded: self.sum,
            partials: self.grid,
            conversions: self.conversions,
            adc_energy: self.energy,
            saturated: self.saturated,
        }
    }
}

/// Multi-bit MAC on an analog macro, in the instance's configured mode.
pub fn acim_mac<R: Rng + ?Sized>(
    input: &QuantVector,
    weights: &QuantVector,
    inst: &MacroInstance,
    rng: &mut R,
) -> Result<MacResult> {
    inst.check_rows(input.len())?;
    inst.check_rows(weights.len())?;
    match inst.config.mode {
        AnalogMode::BitSerial => bit_serial(input, weights, inst, rng),
        AnalogMode::BitParallel => bit_parallel(input, weights, inst, rng),
        AnalogMode::OneShotMultiBit => one_shot(input, weights, inst, rng),
    }
}

fn bit_serial<R: Rng + ?Sized>(
    input: &QuantVector,
    weights: &QuantVector,
    inst: &MacroInstance,
    rng: &mut R,
) -> Result<MacResult> {
    let w_planes = weights.bit_planes();
    let mut acc = Accumulator::new(input.bit_width(), weights.bit_width());
    for a in input.bit_planes() {
        for b in &w_planes {
            let c = acim_bitserial_partial(&a, b, inst, rng)?;
            acc.analog(
                a.index(),
                b.index(),
                a.significance_weight() * b.significance_weight(),
                &c,
            )?;
        }
    }
    Ok(acc.finish())
}

fn bit_parallel<R: Rng + ?Sized>(
    input: &QuantVector,
    weights: &QuantVector,
    inst: &MacroInstance,
    rng: &mut R,
) -> Result<MacResult> {
    let cfg = &inst.config;
    if input.is_signed() || input.bit_width() > cfg.dac_bits {
        return Err(CimError::Config(format!(
            "bit-parallel mode needs unsigned inputs of at most {} bits, got {}-bit {}",
            cfg.dac_bits,
            input.bit_width(),
            if input.is_signed() { "signed" } else { "unsigned" }
        )));
    }
    let converter = cfg.bit_parallel_converter();
    let bound: u64 = input.values().iter().map(|&v| v as u64).sum();
    let mut acc = Accumulator::new(1, weights.bit_width());
    for b in weights.bit_planes() {
        let z = standard_normal(rng);
        let ideal: f64 = input
            .values()
            .iter()
            .zip(b.bits())
            .zip(&inst.cell_gains)
            .filter(|((_, &w), _)| w)
            .map(|((&x, _), g)| g * x as f64)
            .sum();
        let c = inst.convert(converter, ideal, z, bound);
        acc.analog(0, b.index(), b.significance_weight(), &c)?;
    }
    Ok(acc.finish())
}

fn one_shot<R: Rng + ?Sized>(
    input: &QuantVector,
    weights: &QuantVector,
    inst: &MacroInstance,
    rng: &mut R,
) -> Result<MacResult> {
    if weights.is_signed() {
        return Err(CimError::Config(
            "one-shot multi-bit mode needs unsigned weights (capacitor weights are positive)".into(),
        ));
    }
    let converter = inst.config.one_shot_converter(weights.bit_width());
    let levels = (1u64 << weights.bit_width()) - 1;
    let mut acc = Accumulator::new(input.bit_width(), 1);
    for a in input.bit_planes() {
        let z = standard_normal(rng);
        let ideal: f64 = a
            .bits()
            .iter()
            .zip(weights.values())
            .zip(&inst.cell_gains)
            .filter(|((&x, _), _)| x)
            .map(|((_, &w), g)| {
                let w = w as u64;
                let cap: f64 = (0..weights.bit_width())
                    .filter(|k| (w >> k) & 1 == 1)
                    .map(|k| inst.plane_gains[k as usize] * (1u64 << k) as f64)
                    .sum();
                g * cap
            })
            .sum();
        let c = inst.convert(converter, ideal, z, a.count_ones() * levels);
        acc.analog(a.index(), 0, a.significance_weight(), &c)?;
    }
    Ok(acc.finish())
}
