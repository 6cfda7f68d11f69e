use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{CimError, Result};
use crate::quant::QuantVector;

use super::model::SCHEMA_VERSION;

/// Labelled samples with unsigned features of a common width.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<(QuantVector, usize)>,
    classes: usize,
}

impl Dataset {
    pub fn new(samples: Vec<(QuantVector, usize)>, classes: usize) -> Result<Self> {
        let Some((first, _)) = samples.first() else {
            return Err(CimError::Empty("dataset"));
        };
        let (dim, bits) = (first.len(), first.bit_width());
        for (i, (x, label)) in samples.iter().enumerate() {
            if x.len() != dim || x.bit_width() != bits || x.is_signed() {
                return Err(CimError::Schema(format!(
                    "sample {i} does not share the {dim}-feature {bits}-bit unsigned layout"
                )));
            }
            if *label >= classes {
                return Err(CimError::Schema(format!(
                    "sample {i} label {label} >= class count {classes}"
                )));
            }
        }
        Ok(Self { samples, classes })
    }

    /// Parses the CSV layout: a `# schema_version: 1` line, a header
    /// `f0,...,f{d-1},label`, then one sample per row. The class count is
    /// one more than the largest label.
    pub fn from_csv<R: Read>(reader: R, feature_bits: u32) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader
            .read_line(&mut first)
            .map_err(|e| CimError::Schema(e.to_string()))?;
        let version = first
            .trim()
            .strip_prefix('#')
            .and_then(|s| s.trim().strip_prefix("schema_version:"))
            .and_then(|v| v.trim().parse::<u32>().ok());
        if version != Some(SCHEMA_VERSION) {
            return Err(CimError::Schema(format!(
                "dataset must start with '# schema_version: {SCHEMA_VERSION}', got {:?}",
                first.trim()
            )));
        }
        let mut csv = csv::Reader::from_reader(reader);
        let header = csv.headers().map_err(|e| CimError::Schema(e.to_string()))?.clone();
        let dim = header.len().saturating_sub(1);
        let expected: Vec<String> = (0..dim).map(|i| format!("f{i}")).chain(["label".into()]).collect();
        if dim == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(CimError::Schema(format!(
                "dataset header must be f0,...,f{{d-1}},label; got {:?}",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for (i, rec) in csv.records().enumerate() {
            let rec = rec.map_err(|e| CimError::Schema(format!("row {i}: {e}")))?;
            let nums: Vec<i64> = rec
                .iter()
                .map(|f| f.trim().parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| CimError::Schema(format!("row {i}: {e}")))?;
            let label = usize::try_from(nums[dim]).map_err(|_| CimError::Schema(format!("row {i}: negative label")))?;
            let x = QuantVector::unsigned(nums[..dim].to_vec(), feature_bits)
                .map_err(|e| CimError::Schema(format!("row {i}: {e}")))?;
            samples.push((x, label));
        }
        let classes = samples.iter().map(|&(_, l)| l + 1).max().unwrap_or(0);
        Self::new(samples, classes)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.samples[0].0.len()
    }

    pub fn samples(&self) -> &[(QuantVector, usize)] {
        &self.samples
    }
}

pub fn load_dataset(path: impl AsRef<Path>, feature_bits: u32) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| CimError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Dataset::from_csv(file, feature_bits)
}
