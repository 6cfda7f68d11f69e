//! Digital adder trees with optional OR/AND gate substitution.
//!
//! A tree over `n` one-bit inputs (`n` zero-padded to a power of two) has
//! `log2 n` levels. Level `L` (1-based) holds `n / 2^L` ripple-carry adders,
//! each adding two `L`-bit operands into an `(L+1)`-bit result, so every
//! adder has `L` bit-position nodes. Each node is an exact full adder or one
//! of two gate-level approximations:
//!
//! * [`NodeKind::OrSum`]: `sum = a | b`, no carry out, carry in ignored.
//! * [`NodeKind::AndCarry`]: `sum = a | b`, `carry = a & b`, carry in ignored.
//!
//! A run of `OrSum` nodes capped by one `AndCarry` node is the classic
//! lower-part-OR adder. `OrSum` always under-counts (`a + b - (a|b) = a & b`
//! is lost); `AndCarry` over-counts by `a & b`. Presets alternate the two
//! between sibling adders so the level-1 errors largely cancel.

use serde::{Deserialize, Serialize};

use crate::error::{CimError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Exact,
    OrSum,
    AndCarry,
}

impl NodeKind {
    /// `(sum, carry)` for operand bits `a`, `b` and incoming carry `c`.
    #[inline]
    fn eval(self, a: bool, b: bool, c: bool) -> (bool, bool) {
        match self {
            NodeKind::Exact => (a ^ b ^ c, (a & b) | (c & (a ^ b))),
            NodeKind::OrSum => (a | b, false),
            NodeKind::AndCarry => (a | b, a & b),
        }
    }
}

/// Transistor cost of each node kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTable {
    #[serde(default = "CostTable::default_fa")]
    pub full_adder: u64,
    #[serde(default = "CostTable::default_gate")]
    pub or: u64,
    #[serde(default = "CostTable::default_gate")]
    pub and: u64,
}

impl CostTable {
    fn default_fa() -> u64 {
        28
    }

    fn default_gate() -> u64 {
        6
    }

    pub fn node(&self, kind: NodeKind) -> u64 {
        match kind {
            NodeKind::Exact => self.full_adder,
            NodeKind::OrSum => self.or,
            NodeKind::AndCarry => self.or + self.and,
        }
    }
}

impl Default for CostTable {
    /// Mirror full adder 28T, static CMOS 2-input OR/AND 6T each.
    fn default() -> Self {
        Self {
            full_adder: 28,
            or: 6,
            and: 6,
        }
    }
}

/// Named approximation presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Exact,
    Mid,
    Aggressive,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Exact => "exact",
            Preset::Mid => "mid",
            Preset::Aggressive => "aggressive",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "exact" => Ok(Preset::Exact),
            "mid" => Ok(Preset::Mid),
            "aggressive" => Ok(Preset::Aggressive),
            other => Err(CimError::Config(format!("unknown preset `{other}`"))),
        }
    }

    /// Node kind at `(level, adder, position)`; levels are 1-based.
    fn node(self, level: u32, adder: usize, pos: u32) -> NodeKind {
        let alternating = if adder.is_multiple_of(2) {
            NodeKind::OrSum
        } else {
            NodeKind::AndCarry
        };
        // (approximated low positions, kind of the topmost approximated one)
        let (span, top) = match (self, level) {
            (Preset::Exact, _) => (0, NodeKind::Exact),
            (_, 1) => (1, alternating),
            (_, 2) => (2, NodeKind::OrSum),
            (Preset::Mid, 3) => (1, NodeKind::AndCarry),
            (Preset::Mid, _) => (2, NodeKind::AndCarry),
            (Preset::Aggressive, 3) => (2, NodeKind::AndCarry),
            (Preset::Aggressive, _) => (3, NodeKind::AndCarry),
        };
        if pos + 1 < span {
            NodeKind::OrSum
        } else if pos + 1 == span {
            top
        } else {
            NodeKind::Exact
        }
    }
}

/// Node kinds indexed `[level - 1][adder][bit position]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ApproxProfile {
    nodes: Vec<Vec<Vec<NodeKind>>>,
}

fn padded(fan_in: usize) -> usize {
    fan_in.max(1).next_power_of_two()
}

fn depth_of(padded_fan_in: usize) -> u32 {
    padded_fan_in.trailing_zeros()
}

impl ApproxProfile {
    fn build(fan_in: usize, mut kind: impl FnMut(u32, usize, u32) -> NodeKind) -> Self {
        let n = padded(fan_in);
        let nodes = (1..=depth_of(n))
            .map(|level| {
                (0..n >> level)
                    .map(|adder| (0..level).map(|pos| kind(level, adder, pos)).collect())
                    .collect()
            })
            .collect();
        Self { nodes }
    }

    pub fn exact(fan_in: usize) -> Self {
        Self::build(fan_in, |_, _, _| NodeKind::Exact)
    }

    pub fn preset(preset: Preset, fan_in: usize) -> Self {
        Self::build(fan_in, |l, a, p| preset.node(l, a, p))
    }

    /// Same kind for every adder of a level; `positions[level - 1][pos]`.
    /// Missing levels or positions default to exact.
    pub fn per_position(fan_in: usize, positions: &[Vec<NodeKind>]) -> Self {
        Self::build(fan_in, |l, _, p| {
            positions
                .get(l as usize - 1)
                .and_then(|lv| lv.get(p as usize))
                .copied()
                .unwrap_or(NodeKind::Exact)
        })
    }

    /// Custom per-node map; must match the tree shape for `fan_in` exactly.
    pub fn from_nodes(fan_in: usize, nodes: Vec<Vec<Vec<NodeKind>>>) -> Result<Self> {
        let shape = Self::exact(fan_in);
        let same = shape.nodes.len() == nodes.len()
            && shape
                .nodes
                .iter()
                .zip(&nodes)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.len() == y.len()));
        if !same {
            return Err(CimError::Config(format!(
                "approximation profile does not cover the fan-in {fan_in} tree node-for-node"
            )));
        }
        Ok(Self { nodes })
    }

    /// Node kinds indexed `[level - 1][adder][bit position]`.
    pub fn nodes(&self) -> &[Vec<Vec<NodeKind>>] {
        &self.nodes
    }

    pub fn kind(&self, level: u32, adder: usize, pos: u32) -> NodeKind {
        self.nodes[level as usize - 1][adder][pos as usize]
    }

    /// Number of substituted (non-exact) nodes.
    pub fn substitutions(&self) -> usize {
        self.iter().filter(|&k| k != NodeKind::Exact).count()
    }

    fn iter(&self) -> impl Iterator<Item = NodeKind> + '_ {
        self.nodes.iter().flatten().flatten().copied()
    }

    /// True when every node substituted in `self` is also substituted in `other`.
    pub fn is_refined_by(&self, other: &ApproxProfile) -> bool {
        self.nodes.len() == other.nodes.len()
            && self
                .iter()
                .zip(other.iter())
                .all(|(a, b)| a == NodeKind::Exact || b != NodeKind::Exact)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdderTree {
    fan_in: usize,
    profile: ApproxProfile,
    costs: CostTable,
}

impl AdderTree {
    pub fn exact(fan_in: usize) -> Self {
        Self::with_profile(fan_in, ApproxProfile::exact(fan_in)).expect("exact profile fits")
    }

    pub fn preset(preset: Preset, fan_in: usize) -> Self {
        Self::with_profile(fan_in, ApproxProfile::preset(preset, fan_in)).expect("preset fits")
    }

    pub fn with_profile(fan_in: usize, profile: ApproxProfile) -> Result<Self> {
        if fan_in == 0 {
            return Err(CimError::Config("adder tree fan-in must be at least 1".into()));
        }
        let shape = ApproxProfile::exact(fan_in);
        if shape.nodes.len() != profile.nodes.len() || shape.iter().count() != profile.iter().count() {
            return Err(CimError::Config(format!(
                "profile shape does not match fan-in {fan_in}"
            )));
        }
        Ok(Self {
            fan_in,
            profile,
            costs: CostTable::default(),
        })
    }

    pub fn with_costs(mut self, costs: CostTable) -> Self {
        self.costs = costs;
        self
    }

    /// Declared fan-in, before padding.
    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn padded_fan_in(&self) -> usize {
        padded(self.fan_in)
    }

    pub fn depth(&self) -> u32 {
        depth_of(self.padded_fan_in())
    }

    /// Adders at `level` (1-based).
    pub fn adders_at(&self, level: u32) -> usize {
        self.padded_fan_in() >> level
    }

    pub fn profile(&self) -> &ApproxProfile {
        &self.profile
    }

    pub fn costs(&self) -> &CostTable {
        &self.costs
    }

    pub fn is_exact(&self) -> bool {
        self.profile.substitutions() == 0
    }

    /// Sum of the input bits as computed by the (possibly approximate) tree.
    pub fn eval(&self, bits: &[bool]) -> Result<u64> {
        if bits.len() > self.padded_fan_in() {
            return Err(CimError::Shape(format!(
                "{} bits into a fan-in {} tree",
                bits.len(),
                self.padded_fan_in()
            )));
        }
        let mut level_values: Vec<u64> = bits.iter().map(|&b| b as u64).collect();
        level_values.resize(self.padded_fan_in(), 0);
        for level in 1..=self.depth() {
            let next = (0..level_values.len() / 2)
                .map(|adder| self.eval_adder(level, adder, level_values[2 * adder], level_values[2 * adder + 1]))
                .collect();
            level_values = next;
        }
        Ok(level_values[0])
    }

    fn eval_adder(&self, level: u32, adder: usize, x: u64, y: u64) -> u64 {
        let mut carry = false;
        let mut out = 0u64;
        for pos in 0..level {
            let a = (x >> pos) & 1 == 1;
            let b = (y >> pos) & 1 == 1;
            let (s, c) = self.profile.kind(level, adder, pos).eval(a, b, carry);
            out |= (s as u64) << pos;
            carry = c;
        }
        out | ((carry as u64) << level)
    }

    /// Total transistor cost. Padding inputs feed real adders, so a padded
    /// tree costs the same as the full power-of-two tree above its padding;
    /// adders whose inputs are entirely padding are not built.
    pub fn transistor_count(&self) -> u64 {
        let mut live = self.fan_in;
        let mut total = 0;
        for level in 1..=self.depth() {
            live = live.div_ceil(2);
            for adder in 0..live {
                for pos in 0..level {
                    total += self.costs.node(self.profile.kind(level, adder, pos));
                }
            }
        }
        total
    }
}
