//! Behavioral SAR ADC.

/// Result of one analog-to-digital conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conversion {
    pub code: u64,
    pub dequantized: f64,
    /// The input fell outside the representable code range and was clamped.
    pub clipped: bool,
}

/// Mid-tread uniform quantizer over `[0, full_scale]` with `2^bits` codes.
///
/// `code = clamp(round(value * (2^bits - 1) / full_scale), 0, 2^bits - 1)`,
/// rounding ties to even. Out-of-range inputs saturate and set `clipped`.
pub fn adc_quantize(value: f64, bits: u32, full_scale: f64) -> Conversion {
    debug_assert!(bits >= 1 && full_scale > 0.0);
    let top = max_code(bits);
    let raw = (value * top as f64 / full_scale).round_ties_even();
    let clipped = raw < 0.0 || raw > top as f64;
    let code = raw.clamp(0.0, top as f64) as u64;
    Conversion {
        code,
        dequantized: code as f64 * full_scale / top as f64,
        clipped,
    }
}

pub(crate) fn max_code(bits: u32) -> u64 {
    (1u64 << bits) - 1
}

fn bit_length(x: u64) -> u32 {
    u64::BITS - x.leading_zeros()
}

/// A converter sized for ideal values in `[0, max_value]`.
///
/// Full scale is `max(max_value, 2^bits - 1)`: when the ADC has at least as
/// many codes as there are possible values, one LSB equals one count and
/// integer inputs convert exactly; otherwise the range is compressed onto the
/// available codes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Converter {
    bits: u32,
    full_scale: f64,
}

impl Converter {
    pub fn for_range(bits: u32, max_value: u64) -> Self {
        Self {
            bits,
            full_scale: max_value.max(max_code(bits)).max(1) as f64,
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn full_scale(&self) -> f64 {
        self.full_scale
    }

    pub fn lsb(&self) -> f64 {
        self.full_scale / max_code(self.bits) as f64
    }

    /// Smallest resolution at which every integer in `[0, max_value]` has its
    /// own code.
    pub fn lossless_bits(max_value: u64) -> u32 {
        bit_length(max_value).max(1)
    }

    pub fn is_lossless_for(&self, max_value: u64) -> bool {
        self.bits >= Self::lossless_bits(max_value)
    }

    pub fn convert(&self, value: f64) -> Conversion {
        adc_quantize(value, self.bits, self.full_scale)
    }

    /// MSBs of the code guaranteed zero when the ideal input is at most
    /// `bound`.
    pub fn known_zero_msbs(&self, bound: u64) -> u32 {
        let top = self.convert(bound as f64).code;
        self.bits - bit_length(top).min(self.bits)
    }

    /// SAR conversion that skips the top `skip` bit decisions (forced to 0).
    ///
    /// For an ideal monotone quantizer, resolving only the low `bits - skip`
    /// bits gives the full-resolution code clamped to `2^(bits-skip) - 1`.
    /// With `skip == bits` the conversion does not run and returns code 0.
    pub fn convert_reduced(&self, value: f64, skip: u32) -> Conversion {
        let full = self.convert(value);
        let active = self.bits - skip.min(self.bits);
        let top = if active == 0 { 0 } else { max_code(active) };
        if full.code > top {
            let lsb = self.lsb();
            Conversion {
                code: top,
                dequantized: top as f64 * lsb,
                clipped: true,
            }
        } else {
            full
        }
    }
}

/// Number of MSBs that are provably zero when a bit-serial partial is bounded
/// by the input plane's popcount `ones`.
///
/// `rows` is the full-scale partial sum (all rows active). Converting any
/// value `<= ones` with the remaining `bits - z` bits gives the same code as
/// the full-resolution conversion.
pub fn sparsity_known_zero_bits(ones: u64, bits: u32, rows: u64) -> u32 {
    Converter::for_range(bits, rows).known_zero_msbs(ones.min(rows))
}

/// Relative SAR energy: one unit per bit decision.
pub fn adc_energy_proxy(resolutions: &[u32]) -> u64 {
    resolutions.iter().map(|&r| r as u64).sum()
}
