//! Quantized vectors, bit planes, and multi-bit recombination.
//!
//! A `b`-bit value is stored as `b` bit planes, least significant first.
//! Plane `j` of an unsigned vector carries significance `2^j`; the top plane
//! of a signed (two's complement) vector carries `-2^(b-1)`. A multi-bit
//! dot product is then the significance-weighted sum of the `m x p` binary
//! plane-pair dot products.

use serde::{Deserialize, Serialize};

use crate::error::{CimError, Result};

/// Widest supported element, so `n * 2^32 * 2^32` partial products stay in
/// checked `i64` territory for realistic row counts.
pub const MAX_BIT_WIDTH: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantVector {
    values: Vec<i64>,
    bit_width: u32,
    signed: bool,
}

impl QuantVector {
    pub fn new(values: Vec<i64>, bit_width: u32, signed: bool) -> Result<Self> {
        if bit_width == 0 || bit_width > MAX_BIT_WIDTH {
            return Err(CimError::Range {
                what: "bit width",
                value: bit_width as i64,
                range: format!("[1, {MAX_BIT_WIDTH}]"),
            });
        }
        if values.is_empty() {
            return Err(CimError::Empty("quantized vector"));
        }
        let (lo, hi) = value_range(bit_width, signed);
        if let Some(&bad) = values.iter().find(|&&v| v < lo || v > hi) {
            return Err(CimError::Range {
                what: "element",
                value: bad,
                range: format!("[{lo}, {hi}]"),
            });
        }
        Ok(Self {
            values,
            bit_width,
            signed,
        })
    }

    pub fn unsigned(values: Vec<i64>, bit_width: u32) -> Result<Self> {
        Self::new(values, bit_width, false)
    }

    pub fn signed(values: Vec<i64>, bit_width: u32) -> Result<Self> {
        Self::new(values, bit_width, true)
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn bit_width(&self) -> u32 {
        self.bit_width
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; a `QuantVector` holds at least one element.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Bit `index` of every element's encoding, with its significance.
    pub fn bit_plane(&self, index: u32) -> Result<BitPlane> {
        if index >= self.bit_width {
            return Err(CimError::Range {
                what: "plane index",
                value: index as i64,
                range: format!("[0, {})", self.bit_width),
            });
        }
        let mask = encoding_mask(self.bit_width);
        let bits = self
            .values
            .iter()
            .map(|&v| ((v as u64 & mask) >> index) & 1 == 1)
            .collect();
        Ok(BitPlane {
            bits,
            index,
            weight: plane_weight(index, self.bit_width, self.signed),
        })
    }

    /// All planes, LSB first.
    pub fn bit_planes(&self) -> Vec<BitPlane> {
        (0..self.bit_width)
            .map(|j| self.bit_plane(j).expect("index below bit width"))
            .collect()
    }

    /// Significance weights of every plane, LSB first.
    pub fn plane_weights(&self) -> Vec<i64> {
        plane_weights(self.bit_width, self.signed)
    }
}

/// Inclusive value range of a `bit_width`-bit integer.
pub fn value_range(bit_width: u32, signed: bool) -> (i64, i64) {
    if signed {
        (-(1i64 << (bit_width - 1)), (1i64 << (bit_width - 1)) - 1)
    } else {
        (0, (1i64 << bit_width) - 1)
    }
}

fn encoding_mask(bit_width: u32) -> u64 {
    if bit_width == 64 {
        u64::MAX
    } else {
        (1u64 << bit_width) - 1
    }
}

/// Significance of plane `index`: `2^index`, or `-2^(b-1)` for the sign plane.
pub fn plane_weight(index: u32, bit_width: u32, signed: bool) -> i64 {
    let w = 1i64 << index;
    if signed && index + 1 == bit_width {
        -w
    } else {
        w
    }
}

pub fn plane_weights(bit_width: u32, signed: bool) -> Vec<i64> {
    (0..bit_width).map(|j| plane_weight(j, bit_width, signed)).collect()
}

/// One bit of every element of a vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlane {
    bits: Vec<bool>,
    index: u32,
    weight: i64,
}

impl BitPlane {
    /// Builds a standalone 1-bit plane with significance 1.
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self {
            bits,
            index: 0,
            weight: 1,
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn significance_weight(&self) -> i64 {
        self.weight
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    /// Row-wise AND with another plane (the 1b x 1b products).
    pub fn and(&self, other: &BitPlane) -> Result<Vec<bool>> {
        check_len(self.len(), other.len())?;
        Ok(self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect())
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(CimError::Shape(format!("lengths {a} and {b} differ")));
    }
    Ok(())
}

/// Exact `sum(in_i * w_i)`; the digital reference every backend is held to.
pub fn dot_oracle(input: &QuantVector, weights: &QuantVector) -> Result<i64> {
    check_len(input.len(), weights.len())?;
    input
        .values
        .iter()
        .zip(&weights.values)
        .try_fold(0i64, |acc, (&a, &b)| {
            a.checked_mul(b)
                .and_then(|p| acc.checked_add(p))
                .ok_or(CimError::Overflow("dot product"))
        })
}

/// Per-plane-pair partial sums of an `m x p` bit-serial MAC.
///
/// Entry `(j, k)` holds the (unweighted) partial for input plane `j` and
/// weight plane `k`. The element type is `i64` for exact counts and ADC codes,
/// `f64` for dequantized analog readouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialGrid<T> {
    m: u32,
    p: u32,
    cells: Vec<Option<T>>,
}

impl<T: Copy> PartialGrid<T> {
    pub fn new(m: u32, p: u32) -> Self {
        Self {
            m,
            p,
            cells: vec![None; (m * p) as usize],
        }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    fn slot(&self, j: u32, k: u32) -> Result<usize> {
        if j >= self.m || k >= self.p {
            return Err(CimError::Range {
                what: "plane pair",
                value: (j.max(k)) as i64,
                range: format!("{}x{} grid", self.m, self.p),
            });
        }
        Ok((j * self.p + k) as usize)
    }

    pub fn set(&mut self, j: u32, k: u32, value: T) -> Result<()> {
        let i = self.slot(j, k)?;
        self.cells[i] = Some(value);
        Ok(())
    }

    pub fn get(&self, j: u32, k: u32) -> Option<T> {
        self.slot(j, k).ok().and_then(|i| self.cells[i])
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    /// Complete entries in `(j, k, value)` order, or the first missing pair.
    pub fn entries(&self) -> Result<Vec<(u32, u32, T)>> {
        let mut out = Vec::with_capacity(self.cells.len());
        for j in 0..self.m {
            for k in 0..self.p {
                match self.get(j, k) {
                    Some(v) => out.push((j, k, v)),
                    None => return Err(CimError::IncompleteGrid { j, k }),
                }
            }
        }
        Ok(out)
    }
}

fn check_weights(m: u32, p: u32, in_w: &[i64], w_w: &[i64]) -> Result<()> {
    if in_w.len() != m as usize || w_w.len() != p as usize {
        return Err(CimError::Shape(format!(
            "{}x{} sign weights for a {m}x{p} grid",
            in_w.len(),
            w_w.len()
        )));
    }
    Ok(())
}

impl PartialGrid<i64> {
    /// Exact plane-pair partials of `input . weights`.
    pub fn exact(input: &QuantVector, weights: &QuantVector) -> Result<Self> {
        check_len(input.len(), weights.len())?;
        let mut grid = Self::new(input.bit_width(), weights.bit_width());
        let w_planes = weights.bit_planes();
        for a in input.bit_planes() {
            for b in &w_planes {
                let count = a.and(b)?.iter().filter(|&&x| x).count() as i64;
                grid.set(a.index(), b.index(), count)?;
            }
        }
        Ok(grid)
    }

    /// `sum_jk partial(j,k) * s_j * s_k` in checked integer arithmetic.
    pub fn recombine(&self, in_weights: &[i64], w_weights: &[i64]) -> Result<i64> {
        check_weights(self.m, self.p, in_weights, w_weights)?;
        self.entries()?.into_iter().try_fold(0i64, |acc, (j, k, v)| {
            in_weights[j as usize]
                .checked_mul(w_weights[k as usize])
                .and_then(|s| s.checked_mul(v))
                .and_then(|t| acc.checked_add(t))
                .ok_or(CimError::Overflow("recombination"))
        })
    }
}

impl PartialGrid<f64> {
    /// Real-valued recombination of dequantized analog partials.
    pub fn recombine(&self, in_weights: &[i64], w_weights: &[i64]) -> Result<f64> {
        check_weights(self.m, self.p, in_weights, w_weights)?;
        Ok(self
            .entries()?
            .into_iter()
            .map(|(j, k, v)| (in_weights[j as usize] * w_weights[k as usize]) as f64 * v)
            .sum())
    }
}
