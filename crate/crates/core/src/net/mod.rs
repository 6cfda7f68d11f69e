//! Quantized MLP inference through a chosen MAC backend.
//!
//! Every output neuron is one MAC of the layer input against a weight
//! column. Between layers the accumulator is shifted right by the layer's
//! `scale_shift` (round half to even) and ReLU-clamped into the unsigned
//! `input_bits` range; the output layer skips the clamp and yields logits.
//! Noise is injected in every MAC of every layer.

mod dataset;
mod model;

pub use dataset::{load_dataset, Dataset};
pub use model::{load_model, Activation, Layer, LayerFile, ModelFile, QuantModel, SCHEMA_VERSION};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acim::{AnalogConfig, MacroInstance};
use crate::backend::{Backend, MacBackend};
use crate::csnr::{run_csnr_harness, CsnrReport, TrialSource};
use crate::error::{CimError, Result};
use crate::hybrid::DomainAssignment;
use crate::quant::QuantVector;
use crate::rng::{derive_seed, stream_rng};

/// Which MAC model executes the network.
///
/// The analog template is instantiated once per layer with `rows` set to the
/// layer's input dimension and a per-layer mismatch seed; its other fields
/// apply unchanged. Because the converter's full scale never drops below its
/// code count, an `adc_bits` lossless for the widest layer is lossless for
/// all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NetBackend {
    Digital,
    Analog {
        config: AnalogConfig,
    },
    Hybrid {
        assignment: DomainAssignment,
        config: AnalogConfig,
    },
}

/// Per-layer backends built for one model.
pub struct CompiledNet<'a> {
    model: &'a QuantModel,
    backends: Vec<Backend>,
}

impl<'a> CompiledNet<'a> {
    pub fn new(model: &'a QuantModel, selector: &NetBackend) -> Result<Self> {
        let backends = model
            .layers()
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                let instance = |template: &AnalogConfig| {
                    let mut cfg = template.clone();
                    cfg.rows = layer.rows();
                    cfg.seed = derive_seed(template.seed, &[l as u64]);
                    MacroInstance::new(cfg)
                };
                Ok(match selector {
                    NetBackend::Digital => Backend::Digital,
                    NetBackend::Analog { config } => Backend::Analog(instance(config)?),
                    NetBackend::Hybrid { assignment, config } => {
                        if (assignment.m(), assignment.p()) != (model.input_bits(), layer.bits()) {
                            return Err(CimError::Shape(format!(
                                "hybrid assignment is {}x{} but layer {l} needs {}x{}",
                                assignment.m(),
                                assignment.p(),
                                model.input_bits(),
                                layer.bits()
                            )));
                        }
                        Backend::Hybrid {
                            assignment: assignment.clone(),
                            instance: instance(config)?,
                        }
                    }
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { model, backends })
    }

    /// Logits for one input. Layer `l` of sample `index` draws noise from
    /// stream `(seed, index, l)`.
    pub fn infer(&self, input: &QuantVector, seed: u64, index: u64) -> Result<Vec<i64>> {
        forward(self.model, input, |l, x, w_cols| {
            let mut rng = stream_rng(seed, &[index, l as u64]);
            w_cols
                .iter()
                .map(|w| Ok(self.backends[l].mac(x, w, &mut rng)?.value))
                .collect()
        })
    }

    /// Fraction of `dataset` classified correctly.
    pub fn accuracy(&self, dataset: &Dataset, seed: u64) -> Result<f64> {
        Ok(self.correct(dataset, seed)? as f64 / dataset.len() as f64)
    }

    /// Number of samples classified correctly.
    pub fn correct(&self, dataset: &Dataset, seed: u64) -> Result<usize> {
        let correct: Vec<bool> = dataset
            .samples()
            .par_iter()
            .enumerate()
            .map(|(i, (x, label))| Ok(argmax(&self.infer(x, seed, i as u64)?) == *label))
            .collect::<Result<_>>()?;
        Ok(correct.iter().filter(|&&c| c).count())
    }
}

/// `round(x / 2^shift)` with ties to even.
pub fn shift_round_half_even(x: i64, shift: u32) -> i64 {
    if shift == 0 {
        return x;
    }
    let q = x >> shift;
    let r = x - (q << shift);
    let half = 1i64 << (shift - 1);
    match r.cmp(&half) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// Index of the largest logit, lowest index on ties.
pub fn argmax(logits: &[i64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

fn requantize(acc: &[i64], layer: &Layer, act_bits: u32) -> Vec<i64> {
    let top = (1i64 << act_bits) - 1;
    acc.iter()
        .map(|&a| {
            let v = shift_round_half_even(a, layer.scale_shift());
            match layer.activation() {
                Activation::Relu => v.clamp(0, top),
                Activation::None => v,
            }
        })
        .collect()
}

/// Shared layer loop; `macs(l, x, columns)` returns the raw accumulators.
fn forward<F>(model: &QuantModel, input: &QuantVector, mut macs: F) -> Result<Vec<i64>>
where
    F: FnMut(usize, &QuantVector, &[QuantVector]) -> Result<Vec<i64>>,
{
    if input.len() != model.input_dim() {
        return Err(CimError::Shape(format!(
            "input has {} features, model expects {}",
            input.len(),
            model.input_dim()
        )));
    }
    if input.is_signed() || input.bit_width() != model.input_bits() {
        return Err(CimError::Shape(format!(
            "input must be {}-bit unsigned",
            model.input_bits()
        )));
    }
    let mut x = input.clone();
    let last = model.layers().len() - 1;
    for (l, layer) in model.layers().iter().enumerate() {
        let out = requantize(&macs(l, &x, layer.columns())?, layer, model.input_bits());
        if l == last {
            return Ok(out);
        }
        x = QuantVector::unsigned(out, model.input_bits())?;
    }
    unreachable!("model has at least one layer")
}

/// Straight-line integer inference, independent of any backend.
pub fn infer_reference(model: &QuantModel, input: &QuantVector) -> Result<Vec<i64>> {
    forward(model, input, |_, x, cols| {
        Ok(cols
            .iter()
            .map(|w| x.values().iter().zip(w.values()).map(|(a, b)| a * b).sum())
            .collect())
    })
}

/// One-shot convenience wrapper around [`CompiledNet::infer`].
pub fn infer(model: &QuantModel, input: &QuantVector, backend: &NetBackend, seed: u64) -> Result<Vec<i64>> {
    CompiledNet::new(model, backend)?.infer(input, seed, 0)
}

/// Inputs that reach layer `target` under exact inference, one per sample.
pub fn layer_inputs(model: &QuantModel, dataset: &Dataset, target: usize) -> Result<Vec<QuantVector>> {
    if target >= model.layers().len() {
        return Err(CimError::Range {
            what: "layer index",
            value: target as i64,
            range: format!("[0, {})", model.layers().len()),
        });
    }
    dataset
        .samples()
        .iter()
        .map(|(x, _)| {
            let mut x = x.clone();
            for layer in &model.layers()[..target] {
                let acc: Vec<i64> = layer
                    .columns()
                    .iter()
                    .map(|w| x.values().iter().zip(w.values()).map(|(a, b)| a * b).sum())
                    .collect();
                x = QuantVector::unsigned(requantize(&acc, layer, model.input_bits()), model.input_bits())?;
            }
            Ok(x)
        })
        .collect()
}

/// Trials drawn from real layer traffic: a random sample's activation
/// against a random weight column of the layer.
pub struct LayerTrialSource<'a> {
    inputs: Vec<QuantVector>,
    layer: &'a Layer,
}

impl<'a> LayerTrialSource<'a> {
    pub fn new(model: &'a QuantModel, dataset: &Dataset, layer: usize) -> Result<Self> {
        Ok(Self {
            inputs: layer_inputs(model, dataset, layer)?,
            layer: &model.layers()[layer],
        })
    }
}

impl TrialSource for LayerTrialSource<'_> {
    fn draw(&self, _trial: u64, rng: &mut ChaCha8Rng) -> Result<(QuantVector, QuantVector)> {
        let x = &self.inputs[rng.random_range(0..self.inputs.len())];
        let w = self.layer.column(rng.random_range(0..self.layer.cols()));
        Ok((x.clone(), w.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma_lsb: f64,
    /// CSNR of the largest layer at this noise level.
    pub layer_csnr: CsnrReport,
    /// Mean accuracy over the repeat seeds.
    pub accuracy: f64,
    pub accuracy_min: f64,
    pub accuracy_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub digital_accuracy: f64,
    pub largest_layer: usize,
    pub repeats: usize,
    pub points: Vec<SweepPoint>,
}

/// Settings of [`accuracy_vs_csnr_sweep`] besides the model and data.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    /// Analog template; `noise_sigma_lsb` is overridden per point.
    pub analog: AnalogConfig,
    pub sigmas: Vec<f64>,
    /// Inference repeats (noise seeds) per point.
    pub repeats: usize,
    /// CSNR harness trials per point.
    pub csnr_trials: usize,
    pub seed: u64,
}

/// Accuracy and layer CSNR across a noise ladder.
///
/// Points come out sorted by sigma ascending with duplicate sigmas merged.
/// Repeat `r` runs inference with seed `derive(seed, [1, r])`; the layer
/// CSNR uses seed `derive(seed, [0])` at every point, so points differ only
/// in sigma.
pub fn accuracy_vs_csnr_sweep(model: &QuantModel, dataset: &Dataset, settings: &SweepSettings) -> Result<SweepCurve> {
    if settings.sigmas.is_empty() {
        return Err(CimError::Empty("sigma ladder"));
    }
    if settings.repeats == 0 {
        return Err(CimError::Empty("sweep repeats"));
    }
    let mut sigmas = settings.sigmas.clone();
    if sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(CimError::Config("sigma ladder entries must be finite and >= 0".into()));
    }
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();

    let digital = CompiledNet::new(model, &NetBackend::Digital)?;
    let digital_accuracy = digital.accuracy(dataset, 0)?;
    let largest = model.largest_layer();
    let source = LayerTrialSource::new(model, dataset, largest)?;
    let csnr_seed = derive_seed(settings.seed, &[0]);

    let points = sigmas
        .iter()
        .map(|&sigma| {
            let mut cfg = settings.analog.clone().with_noise(sigma);
            let selector = NetBackend::Analog { config: cfg.clone() };
            let net = CompiledNet::new(model, &selector)?;
            let hits: Vec<usize> = (0..settings.repeats as u64)
                .map(|r| net.correct(dataset, derive_seed(settings.seed, &[1, r])))
                .collect::<Result<_>>()?;
            let len = dataset.len() as f64;
            let accs: Vec<f64> = hits.iter().map(|&h| h as f64 / len).collect();
            cfg.rows = model.layers()[largest].rows();
            cfg.seed = derive_seed(cfg.seed, &[largest as u64]);
            let layer_backend = Backend::Analog(MacroInstance::new(cfg)?);
            let layer_csnr = run_csnr_harness(&layer_backend, &source, settings.csnr_trials, csnr_seed)?;
            Ok(SweepPoint {
                sigma_lsb: sigma,
                layer_csnr,
                // Pooled over repeats, so the mean is exact.
                accuracy: hits.iter().sum::<usize>() as f64 / (len * hits.len() as f64),
                accuracy_min: accs.iter().copied().fold(f64::INFINITY, f64::min),
                accuracy_max: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepCurve {
        digital_accuracy,
        largest_layer: largest,
        repeats: settings.repeats,
        points,
    })
}
