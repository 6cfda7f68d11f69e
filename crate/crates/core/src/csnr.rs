//! Compute-SNR: the ratio of ideal-signal power to computation-error power.
//!
//! The exact digital result `DMAC` is the reference signal and
//! `DMAC - AMAC` is the noise. Over a set of trials the mean-power form is
//! used:
//!
//! ```text
//! CSNR = 10 log10( mean(DMAC^2) / mean((DMAC - AMAC)^2) )
//! ```
//!
//! Zero error power reports `+inf` rather than failing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::acim::AnalogConfig;
use crate::backend::MacBackend;
use crate::error::{CimError, Result};
use crate::quant::{dot_oracle, value_range, QuantVector};
use crate::rng::stream_rng;

/// Trial count used when nothing else is configured.
pub const DEFAULT_TRIALS: usize = 10_000;

/// Single-trial CSNR in dB, `20 log10(|dmac| / |dmac - amac|)`.
///
/// Returns `+inf` when the two agree and an error when `dmac` is zero.
pub fn csnr_single(dmac: i64, amac: i64) -> Result<f64> {
    if dmac == 0 {
        return Err(CimError::UndefinedSignal);
    }
    if dmac == amac {
        return Ok(f64::INFINITY);
    }
    let err = (dmac as i128 - amac as i128).unsigned_abs() as f64;
    Ok(20.0 * (dmac.unsigned_abs() as f64 / err).log10())
}

/// `10 log10(signal / noise)` with the zero-noise sentinel.
pub fn power_ratio_db(signal: f64, noise: f64) -> f64 {
    if noise == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / noise).log10()
    }
}

/// Aggregated outcome of a set of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsnrReport {
    pub trials: usize,
    pub mean_signal_power: f64,
    pub mean_noise_power: f64,
    /// `mean(|DMAC - AMAC|)`.
    pub mean_abs_error: f64,
    /// `+inf` (serialized as `"inf"`) when the noise power is zero.
    #[serde(serialize_with = "ser_db", deserialize_with = "de_db")]
    pub csnr_db: f64,
    /// Fraction of ADC conversions that clipped.
    pub saturation_rate: f64,
    /// ADC conversions per MAC.
    pub mean_conversions: f64,
    pub seed: Option<u64>,
}

impl CsnrReport {
    pub fn is_error_free(&self) -> bool {
        self.mean_noise_power == 0.0
    }
}

/// Formats a dB value the way reports print it: `inf` / `-inf` for the
/// sentinels, shortest round-trip decimal otherwise.
pub fn format_db(db: f64) -> String {
    if db == f64::INFINITY {
        "inf".into()
    } else if db == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{db}")
    }
}

fn ser_db<S: Serializer>(db: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if db.is_infinite() {
        s.serialize_str(&format_db(*db))
    } else {
        s.serialize_f64(*db)
    }
}

fn de_db<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }
    match Db::deserialize(d)? {
        Db::Num(v) => Ok(v),
        Db::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Db::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
        Db::Text(t) => Err(serde::de::Error::custom(format!("not a dB value: {t:?}"))),
    }
}

/// Exact power sums; integer accumulation keeps the result independent of
/// trial order.
#[derive(Debug, Clone, Copy, Default)]
struct Powers {
    signal: u128,
    noise: u128,
    abs: u128,
    trials: usize,
    conversions: u64,
    saturated: u64,
}

impl Powers {
    fn add(&mut self, dmac: i64, amac: i64) {
        let e = (dmac as i128 - amac as i128).unsigned_abs();
        self.signal += (dmac as i128).unsigned_abs().pow(2);
        self.noise += e * e;
        self.abs += e;
        self.trials += 1;
    }

    fn report(&self, seed: Option<u64>) -> CsnrReport {
        let t = self.trials as f64;
        let signal = self.signal as f64 / t;
        let noise = self.noise as f64 / t;
        CsnrReport {
            trials: self.trials,
            mean_signal_power: signal,
            mean_noise_power: noise,
            mean_abs_error: self.abs as f64 / t,
            csnr_db: power_ratio_db(signal, noise),
            saturation_rate: if self.conversions == 0 {
                0.0
            } else {
                self.saturated as f64 / self.conversions as f64
            },
            mean_conversions: self.conversions as f64 / t,
            seed,
        }
    }
}

/// Mean-power CSNR of `(dmac, amac)` pairs. Zero-signal pairs are included.
pub fn csnr_mean(pairs: &[(i64, i64)]) -> Result<CsnrReport> {
    if pairs.is_empty() {
        return Err(CimError::Empty("CSNR pairs"));
    }
    let mut p = Powers::default();
    for &(d, a) in pairs {
        p.add(d, a);
    }
    Ok(p.report(None))
}

/// Element distribution of generated operands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Distribution {
    /// Independent uniform over the full representable range.
    #[default]
    Uniform,
    /// Each element is zero with probability `1 - density`, otherwise uniform
    /// over the representable range.
    Sparse { density: f64 },
}

/// Source of `(input, weights)` operand pairs for trial `t`.
pub trait TrialSource: Sync {
    fn draw(&self, trial: u64, rng: &mut ChaCha8Rng) -> Result<(QuantVector, QuantVector)>;
}

/// Randomly generated operands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub n: usize,
    pub input_bits: u32,
    pub weight_bits: u32,
    #[serde(default)]
    pub input_signed: bool,
    #[serde(default)]
    pub weight_signed: bool,
    #[serde(default)]
    pub input_distribution: Distribution,
    #[serde(default)]
    pub weight_distribution: Distribution,
}

impl InputSpec {
    /// Unsigned, uniformly distributed operands.
    pub fn uniform(n: usize, input_bits: u32, weight_bits: u32) -> Self {
        Self {
            n,
            input_bits,
            weight_bits,
            input_signed: false,
            weight_signed: false,
            input_distribution: Distribution::Uniform,
            weight_distribution: Distribution::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CimError::Config("input spec needs n >= 1".into()));
        }
        for d in [self.input_distribution, self.weight_distribution] {
            if let Distribution::Sparse { density } = d {
                if !(0.0..=1.0).contains(&density) {
                    return Err(CimError::Config(format!("density {density} outside [0, 1]")));
                }
            }
        }
        // Probe the widths through the vector constructor.
        QuantVector::new(vec![0], self.input_bits, self.input_signed)?;
        QuantVector::new(vec![0], self.weight_bits, self.weight_signed)?;
        Ok(())
    }
}

fn draw_vector<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    bits: u32,
    signed: bool,
    dist: Distribution,
) -> Result<QuantVector> {
    let (lo, hi) = value_range(bits, signed);
    let values = (0..n)
        .map(|_| match dist {
            Distribution::Uniform => rng.random_range(lo..=hi),
            Distribution::Sparse { density } => {
                if rng.random_bool(density) {
                    rng.random_range(lo..=hi)
                } else {
                    0
                }
            }
        })
        .collect();
    QuantVector::new(values, bits, signed)
}

impl TrialSource for InputSpec {
    fn draw(&self, _trial: u64, rng: &mut ChaCha8Rng) -> Result<(QuantVector, QuantVector)> {
        let x = draw_vector(rng, self.n, self.input_bits, self.input_signed, self.input_distribution)?;
        let w = draw_vector(
            rng,
            self.n,
            self.weight_bits,
            self.weight_signed,
            self.weight_distribution,
        )?;
        Ok((x, w))
    }
}

/// Operand stream of trial `t`.
fn operand_rng(seed: u64, t: u64) -> ChaCha8Rng {
    stream_rng(seed, &[t, 0])
}

/// Noise stream of trial `t`.
fn noise_rng(seed: u64, t: u64) -> ChaCha8Rng {
    stream_rng(seed, &[t, 1])
}

/// Runs `trials` independent MACs through `backend` and compares each to the
/// exact dot product.
///
/// Trial `t` draws operands from stream `(seed, t, 0)` and noise from
/// `(seed, t, 1)`, so the report is identical at any thread count.
pub fn run_csnr_harness(
    backend: &dyn MacBackend,
    source: &dyn TrialSource,
    trials: usize,
    seed: u64,
) -> Result<CsnrReport> {
    if trials == 0 {
        return Err(CimError::Empty("CSNR trials"));
    }
    let outcomes: Vec<(i64, i64, u32, u32)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (x, w) = source.draw(t, &mut operand_rng(seed, t))?;
            let dmac = dot_oracle(&x, &w)?;
            let r = backend.mac(&x, &w, &mut noise_rng(seed, t))?;
            Ok((dmac, r.value, r.conversions, r.saturated))
        })
        .collect::<Result<_>>()?;
    let mut p = Powers::default();
    for (d, a, c, s) in outcomes {
        p.add(d, a);
        p.conversions += c as u64;
        p.saturated += s as u64;
    }
    Ok(p.report(Some(seed)))
}

/// How the closed-form predictor treats ADC quantization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuantizationTerm {
    /// Gaussian noise only.
    #[default]
    Neglected,
    /// Adds `LSB^2 / 12` per conversion.
    Uniform,
}

/// Closed-form CSNR for Gaussian conversion noise.
///
/// Every conversion contributes variance `sigma_abs^2 * w^2`, where
/// `sigma_abs = noise_sigma_lsb * LSB` and `w` is its recombination weight.
/// `E[DMAC^2]` is estimated from `samples` operand draws taken from the
/// same streams [`run_csnr_harness`] uses with this `seed`.
///
/// Static mismatch is outside the model and rejected.
pub fn predicted_csnr_gaussian(
    source: &dyn TrialSource,
    config: &AnalogConfig,
    quantization: QuantizationTerm,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    config.validate()?;
    if config.mismatch_sigma != 0.0 || config.cap_weight_sigma != 0.0 {
        return Err(CimError::NotApplicable(
            "the Gaussian predictor needs mismatch_sigma = cap_weight_sigma = 0".into(),
        ));
    }
    if samples == 0 {
        return Err(CimError::Empty("predictor samples"));
    }
    let draws: Vec<(i64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|t| {
            let (x, w) = source.draw(t, &mut operand_rng(seed, t))?;
            if x.len() != config.rows || w.len() != config.rows {
                return Err(CimError::Shape(format!(
                    "operands of length {} on a {}-row macro",
                    x.len(),
                    config.rows
                )));
            }
            let d = dot_oracle(&x, &w)?;
            let noise: f64 = config
                .conversion_plan(&x, &w)
                .iter()
                .map(|(weight, conv)| {
                    let lsb = conv.lsb();
                    let mut var = (config.noise_sigma_lsb * lsb).powi(2);
                    if quantization == QuantizationTerm::Uniform {
                        var += lsb * lsb / 12.0;
                    }
                    (*weight as f64).powi(2) * var
                })
                .sum();
            Ok((d, noise))
        })
        .collect::<Result<_>>()?;
    let signal = draws.iter().map(|&(d, _)| (d as i128).pow(2) as u128).sum::<u128>() as f64 / samples as f64;
    // The conversion plan depends only on widths, which a source keeps fixed.
    let noise = draws[0].1;
    Ok(power_ratio_db(signal, noise))
}
