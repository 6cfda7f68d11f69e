//! Hybrid digital/analog MACs and the on-the-fly saliency evaluator (OSE).
//!
//! A [`DomainAssignment`] says, for every plane pair `(j, k)`, whether the
//! 1b x 1b partial comes from the exact adder tree or from an analog
//! bit-serial conversion. The usual split sends high-significance pairs to
//! the digital side, where they are error-free.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::acim::{acim_bitserial_partial, AnalogMode, MacResult, MacroInstance};
use crate::backend::{Backend, MacBackend};
use crate::csnr::{run_csnr_harness, CsnrReport, TrialSource};
use crate::error::{CimError, Result};
use crate::quant::QuantVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Digital,
    Analog,
}

/// Per-plane-pair domain map, indexed `[j][k]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Domain>>", into = "Vec<Vec<Domain>>")]
pub struct DomainAssignment {
    m: u32,
    p: u32,
    cells: Vec<Domain>,
}

impl DomainAssignment {
    /// Pairs with `j + k >= b_da` are digital. `b_da = 0` is all-digital and
    /// any `b_da >= m + p - 1` is all-analog.
    pub fn straight_split(m: u32, p: u32, b_da: u32) -> Self {
        let cells = (0..m)
            .flat_map(|j| (0..p).map(move |k| if j + k >= b_da { Domain::Digital } else { Domain::Analog }))
            .collect();
        Self { m, p, cells }
    }

    pub fn all_digital(m: u32, p: u32) -> Self {
        Self::straight_split(m, p, 0)
    }

    pub fn all_analog(m: u32, p: u32) -> Self {
        Self::straight_split(m, p, m + p)
    }

    /// Free-form map; `map[j][k]` is the domain of pair `(j, k)`.
    pub fn lightning(map: Vec<Vec<Domain>>) -> Result<Self> {
        let m = map.len();
        let p = map.first().map_or(0, Vec::len);
        if m == 0 || p == 0 {
            return Err(CimError::Config("domain map must cover at least one plane pair".into()));
        }
        if let Some((j, row)) = map.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(CimError::Config(format!(
                "domain map row {j} has {} entries, expected {p}",
                row.len()
            )));
        }
        Ok(Self {
            m: m as u32,
            p: p as u32,
            cells: map.into_iter().flatten().collect(),
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn domain(&self, j: u32, k: u32) -> Domain {
        self.cells[(j * self.p + k) as usize]
    }

    pub fn digital_pairs(&self) -> usize {
        self.cells.iter().filter(|&&d| d == Domain::Digital).count()
    }

    /// Number of analog conversions per MAC.
    pub fn analog_pairs(&self) -> usize {
        self.cells.len() - self.digital_pairs()
    }
}

impl TryFrom<Vec<Vec<Domain>>> for DomainAssignment {
    type Error = CimError;

    fn try_from(map: Vec<Vec<Domain>>) -> Result<Self> {
        Self::lightning(map)
    }
}

impl From<DomainAssignment> for Vec<Vec<Domain>> {
    fn from(a: DomainAssignment) -> Self {
        a.cells.chunks(a.p as usize).map(<[Domain]>::to_vec).collect()
    }
}

/// Hybrid MAC on a bit-serial analog macro.
///
/// Digital pairs use exact popcounts; analog pairs use
/// [`acim_bitserial_partial`]. One standard normal is consumed per pair in
/// `(j, k)` order whatever its domain, so an all-analog assignment reproduces
/// [`crate::acim::acim_mac`] bit for bit from the same RNG state, and moving
/// a pair between domains leaves the noise of every other pair unchanged.
pub fn hybrid_mac<R: Rng + ?Sized>(
    input: &QuantVector,
    weights: &QuantVector,
    assignment: &DomainAssignment,
    inst: &MacroInstance,
    rng: &mut R,
) -> Result<MacResult> {
    if input.len() != weights.len() {
        return Err(CimError::Shape(format!(
            "input length {} vs weight length {}",
            input.len(),
            weights.len()
        )));
    }
    if (assignment.m, assignment.p) != (input.bit_width(), weights.bit_width()) {
        return Err(CimError::Shape(format!(
            "assignment covers {}x{} plane pairs, operands have {}x{}",
            assignment.m,
            assignment.p,
            input.bit_width(),
            weights.bit_width()
        )));
    }
    if inst.config().mode != AnalogMode::BitSerial {
        return Err(CimError::Config(format!(
            "hybrid MACs need a bit-serial analog macro, got {}",
            inst.config().mode.name()
        )));
    }
    let w_planes = weights.bit_planes();
    let mut acc = crate::acim::Accumulator::new(input.bit_width(), weights.bit_width());
    for a in input.bit_planes() {
        for b in &w_planes {
            let (j, k) = (a.index(), b.index());
            let weight = a.significance_weight() * b.significance_weight();
            match assignment.domain(j, k) {
                Domain::Analog => {
                    let c = acim_bitserial_partial(&a, b, inst, rng)?;
                    acc.analog(j, k, weight, &c)?;
                }
                Domain::Digital => {
                    let _: f64 = StandardNormal.sample(rng);
                    let partial = a.and(b)?.iter().filter(|&&x| x).count() as i64;
                    acc.digital(j, k, weight, partial)?;
                }
            }
        }
    }
    Ok(acc.finish())
}

/// Output of the saliency evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaliencyScore {
    pub score: u64,
    /// Plane pairs evaluated per channel.
    pub s: u32,
}

/// Plane pairs of an `m x p` MAC in evaluation order: significance `j + k`
/// descending, then `j` descending.
pub fn saliency_order(m: u32, p: u32) -> Vec<(u32, u32)> {
    let mut pairs: Vec<(u32, u32)> = (0..m).flat_map(|j| (0..p).map(move |k| (j, k))).collect();
    pairs.sort_by_key(|&(j, k)| std::cmp::Reverse((j + k, j)));
    pairs
}

/// Exact value of the `s` highest-significance plane-pair partials of every
/// channel, weighted by significance, magnitude taken per channel, summed
/// across channels.
pub fn ose_saliency(inputs: &[QuantVector], weights: &[QuantVector], s: u32) -> Result<SaliencyScore> {
    if inputs.len() != weights.len() {
        return Err(CimError::Shape(format!(
            "{} input channels vs {} weight channels",
            inputs.len(),
            weights.len()
        )));
    }
    let (first_in, first_w) = match (inputs.first(), weights.first()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(CimError::Empty("saliency channels")),
    };
    let (m, p) = (first_in.bit_width(), first_w.bit_width());
    let (in_signed, w_signed) = (first_in.is_signed(), first_w.is_signed());
    let pairs = m * p;
    if s == 0 || s > pairs {
        return Err(CimError::Range {
            what: "saliency plane count s",
            value: s as i64,
            range: format!("[1, {pairs}]"),
        });
    }
    let order = &saliency_order(m, p)[..s as usize];
    let mut score: u64 = 0;
    for (x, w) in inputs.iter().zip(weights) {
        if (x.bit_width(), w.bit_width(), x.is_signed(), w.is_signed()) != (m, p, in_signed, w_signed) {
            return Err(CimError::Shape(
                "saliency channels must share bit-widths and signedness".into(),
            ));
        }
        if x.len() != w.len() {
            return Err(CimError::Shape(format!(
                "input length {} vs weight length {}",
                x.len(),
                w.len()
            )));
        }
        let mut channel: i64 = 0;
        for &(j, k) in order {
            let a = x.bit_plane(j)?;
            let b = w.bit_plane(k)?;
            let ones = a.and(&b)?.iter().filter(|&&v| v).count() as i64;
            channel += a.significance_weight() * b.significance_weight() * ones;
        }
        score = score
            .checked_add(channel.unsigned_abs())
            .ok_or(CimError::Overflow("saliency score"))?;
    }
    Ok(SaliencyScore { score, s })
}

/// Thresholds plus the ladder of boundaries they select between.
///
/// `ladder` lists `L + 1` boundaries in ascending `B_DA` order (most digital
/// first). A score that reaches `c` thresholds selects `ladder[L - c]`, so a
/// higher score never yields a smaller digital share.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryPolicy {
    pub thresholds: Vec<u64>,
    pub ladder: Vec<u32>,
}

impl BoundaryPolicy {
    pub fn new(thresholds: Vec<u64>, ladder: Vec<u32>) -> Result<Self> {
        let policy = Self { thresholds, ladder };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.thresholds.windows(2).all(|w| w[0] < w[1]) {
            return Err(CimError::Config("thresholds must be strictly ascending".into()));
        }
        if self.ladder.len() != self.thresholds.len() + 1 {
            return Err(CimError::Config(format!(
                "{} thresholds need a ladder of {} boundaries, got {}",
                self.thresholds.len(),
                self.thresholds.len() + 1,
                self.ladder.len()
            )));
        }
        if !self.ladder.windows(2).all(|w| w[0] <= w[1]) {
            return Err(CimError::Config("boundary ladder must be ascending in B_DA".into()));
        }
        Ok(())
    }

    pub fn select(&self, score: &SaliencyScore) -> u32 {
        let reached = self.thresholds.iter().filter(|&&t| t <= score.score).count();
        self.ladder[self.thresholds.len() - reached]
    }
}

/// Picks the digital/analog boundary for `score`; see [`BoundaryPolicy`].
pub fn select_boundary(score: &SaliencyScore, thresholds: &[u64], ladder: &[u32]) -> Result<u32> {
    Ok(BoundaryPolicy::new(thresholds.to_vec(), ladder.to_vec())?.select(score))
}

/// Empirical quantiles of `samples`.
///
/// Quantile `q` maps to the order statistic at 1-based rank `ceil(q * N)`,
/// the smallest sample whose empirical CDF reaches `q`. The median of
/// `1..=100` is therefore 50.
pub fn calibrate_thresholds(samples: &[u64], quantiles: &[f64]) -> Result<Vec<u64>> {
    if samples.is_empty() {
        return Err(CimError::Empty("calibration samples"));
    }
    if quantiles.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
        return Err(CimError::Config("quantiles must lie in (0, 1)".into()));
    }
    if !quantiles.windows(2).all(|w| w[0] < w[1]) {
        return Err(CimError::Config("quantiles must be strictly ascending".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    Ok(quantiles
        .iter()
        .map(|&q| {
            let rank = (q * n as f64).ceil() as usize;
            sorted[rank.clamp(1, n) - 1]
        })
        .collect())
}

/// Hybrid backend whose split is chosen per MAC from its own saliency.
///
/// The score of the single channel `(input, weights)` selects `B_DA`
/// through `policy`, then the MAC runs on [`DomainAssignment::straight_split`].
#[derive(Debug, Clone)]
pub struct SaliencyGated {
    pub s: u32,
    pub policy: BoundaryPolicy,
    pub instance: MacroInstance,
}

impl SaliencyGated {
    pub fn boundary(&self, input: &QuantVector, weights: &QuantVector) -> Result<u32> {
        let score = ose_saliency(std::slice::from_ref(input), std::slice::from_ref(weights), self.s)?;
        Ok(self.policy.select(&score))
    }
}

impl MacBackend for SaliencyGated {
    fn mac(&self, input: &QuantVector, weights: &QuantVector, rng: &mut ChaCha8Rng) -> Result<MacResult> {
        let b_da = self.boundary(input, weights)?;
        let split = DomainAssignment::straight_split(input.bit_width(), weights.bit_width(), b_da);
        hybrid_mac(input, weights, &split, &self.instance, rng)
    }

    fn label(&self) -> String {
        "hybrid_ose".into()
    }
}

/// One boundary of [`hybrid_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridPoint {
    pub b_da: u32,
    pub digital_pairs: usize,
    pub report: CsnrReport,
}

/// Straight-split hybrid MACs at each boundary in `b_das`, all evaluated on
/// the same operand and noise streams so the points form paired
/// comparisons.
pub fn hybrid_sweep(
    instance: &MacroInstance,
    source: &dyn TrialSource,
    b_das: &[u32],
    trials: usize,
    seed: u64,
) -> Result<Vec<HybridPoint>> {
    let (x, w) = source.draw(0, &mut crate::rng::stream_rng(seed, &[0, 0]))?;
    let (m, p) = (x.bit_width(), w.bit_width());
    b_das
        .iter()
        .map(|&b_da| {
            let assignment = DomainAssignment::straight_split(m, p, b_da);
            let digital_pairs = assignment.digital_pairs();
            let backend = Backend::Hybrid {
                assignment,
                instance: instance.clone(),
            };
            Ok(HybridPoint {
                b_da,
                digital_pairs,
                report: run_csnr_harness(&backend, source, trials, seed)?,
            })
        })
        .collect()
}
