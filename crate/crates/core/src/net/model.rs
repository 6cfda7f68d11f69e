use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CimError, Result};
use crate::quant::{value_range, QuantVector};

/// Version written to and required from model and dataset files.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    None,
}

/// On-disk layer layout. `weights[r][c]` connects input `r` to output `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub rows: usize,
    pub cols: usize,
    pub bits: u32,
    pub signed: bool,
    pub scale_shift: u32,
    pub activation: Activation,
    pub weights: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub input_bits: u32,
    pub layers: Vec<LayerFile>,
}

/// A validated fully connected layer, stored column-wise so each output is
/// one MAC.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    columns: Vec<QuantVector>,
    rows: usize,
    bits: u32,
    signed: bool,
    scale_shift: u32,
    activation: Activation,
}

impl Layer {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn scale_shift(&self) -> u32 {
        self.scale_shift
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Weight vector feeding output `c`.
    pub fn column(&self, c: usize) -> &QuantVector {
        &self.columns[c]
    }

    pub fn columns(&self) -> &[QuantVector] {
        &self.columns
    }
}

/// A quantized MLP. Hidden activations are requantized to `input_bits`
/// unsigned, so every layer sees inputs of the same width.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantModel {
    input_bits: u32,
    layers: Vec<Layer>,
}

impl QuantModel {
    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(CimError::Schema(format!(
                "model schema_version {} (supported: {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        if file.layers.is_empty() {
            return Err(CimError::Schema("model has no layers".into()));
        }
        QuantVector::unsigned(vec![0], file.input_bits)
            .map_err(|_| CimError::Schema(format!("input_bits {} not supported", file.input_bits)))?;
        let last = file.layers.len() - 1;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (l, lf) in file.layers.into_iter().enumerate() {
            if lf.rows == 0 || lf.cols == 0 {
                return Err(CimError::Schema(format!("layer {l} has an empty dimension")));
            }
            if let Some(prev) = layers.last().map(|p: &Layer| p.cols()) {
                if prev != lf.rows {
                    return Err(CimError::Schema(format!(
                        "layer {l} expects {} inputs but layer {} produces {prev}",
                        lf.rows,
                        l - 1
                    )));
                }
            }
            if lf.activation == Activation::None && l != last {
                return Err(CimError::Schema(format!(
                    "hidden layer {l} must use relu (only the output layer may be linear)"
                )));
            }
            if lf.weights.len() != lf.rows || lf.weights.iter().any(|r| r.len() != lf.cols) {
                return Err(CimError::Schema(format!(
                    "layer {l} weights are not a {}x{} matrix",
                    lf.rows, lf.cols
                )));
            }
            if !(1..=crate::quant::MAX_BIT_WIDTH).contains(&lf.bits) {
                return Err(CimError::Schema(format!(
                    "layer {l} bit width {} not supported",
                    lf.bits
                )));
            }
            let (lo, hi) = value_range(lf.bits, lf.signed);
            for (r, row) in lf.weights.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    if v < lo || v > hi {
                        return Err(CimError::WeightRange {
                            layer: l,
                            row: r,
                            col: c,
                            value: v,
                            bits: lf.bits,
                            signedness: if lf.signed { "signed" } else { "unsigned" },
                        });
                    }
                }
            }
            let columns = (0..lf.cols)
                .map(|c| QuantVector::new(lf.weights.iter().map(|row| row[c]).collect(), lf.bits, lf.signed))
                .collect::<Result<_>>()?;
            layers.push(Layer {
                columns,
                rows: lf.rows,
                bits: lf.bits,
                signed: lf.signed,
                scale_shift: lf.scale_shift,
                activation: lf.activation,
            });
        }
        Ok(Self {
            input_bits: file.input_bits,
            layers,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| CimError::Schema(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            schema_version: SCHEMA_VERSION,
            input_bits: self.input_bits,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    rows: l.rows,
                    cols: l.cols(),
                    bits: l.bits,
                    signed: l.signed,
                    scale_shift: l.scale_shift,
                    activation: l.activation,
                    weights: (0..l.rows)
                        .map(|r| l.columns.iter().map(|c| c.values()[r]).collect())
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn input_bits(&self) -> u32 {
        self.input_bits
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].rows
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].cols()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Index of the layer with the most weights (first on ties).
    pub fn largest_layer(&self) -> usize {
        let mut best = 0;
        for (i, l) in self.layers.iter().enumerate() {
            if l.rows * l.cols() > self.layers[best].rows * self.layers[best].cols() {
                best = i;
            }
        }
        best
    }
}

/// Reads and validates a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<QuantModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CimError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    QuantModel::from_json(&text)
}
