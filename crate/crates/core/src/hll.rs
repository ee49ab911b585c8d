//! HyperLogLog cardinality sketches and the exact-set counter that shares
//! their interface.
//!
//! A sketch holds `k = 2^precision` byte registers. Adding an item hashes it
//! with a fixed seeded mixer, routes it to one register by the top `precision`
//! bits and maxes in the rank (1 + leading zeros) of the remaining bits.
//! Unions are register-wise max, so sketches form a join semilattice and the
//! estimate of a union never depends on the order items were seen in.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

/// Smallest allowed register-index width.
pub const MIN_PRECISION: u8 = 4;
/// Largest allowed register-index width.
pub const MAX_PRECISION: u8 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SketchError {
    /// Precision outside `[4, 16]`.
    #[error("register exponent {0} out of range [{MIN_PRECISION}, {MAX_PRECISION}]")]
    PrecisionOutOfRange(u8),
    /// Union of sketches with different precision or seed.
    #[error("incompatible sketches: precision {left_precision}/seed {left_seed} vs precision {right_precision}/seed {right_seed}")]
    Incompatible {
        left_precision: u8,
        left_seed: u64,
        right_precision: u8,
        right_seed: u64,
    },
    /// Union of counters of different kinds (sketch vs exact set).
    #[error("cannot union counters of different kinds")]
    KindMismatch,
    /// Malformed byte serialization.
    #[error("malformed sketch bytes: {0}")]
    BadBytes(&'static str),
}

/// The fixed 64-bit avalanche mixer used for all sketch hashing.
///
/// This is the splitmix64 finalizer applied to `item ^ seed`. It is part of
/// the sketch's on-disk identity: two sketches only union if they used the
/// same seed, and the constants below must never change.
#[inline]
pub fn hash64(item: u64, seed: u64) -> u64 {
    let mut x = item ^ seed;
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// A HyperLogLog sketch: `2^precision` byte registers plus the hash seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HllSketch {
    precision: u8,
    seed: u64,
    registers: Vec<u8>,
}

impl HllSketch {
    /// Creates an empty sketch with `2^precision` zero registers.
    pub fn new(precision: u8, seed: u64) -> Result<Self, SketchError> {
        if !(MIN_PRECISION..=MAX_PRECISION).contains(&precision) {
            return Err(SketchError::PrecisionOutOfRange(precision));
        }
        Ok(HllSketch {
            precision,
            seed,
            registers: vec![0; 1 << precision],
        })
    }

    pub fn precision(&self) -> u8 {
        self.precision
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of registers, `k = 2^precision`.
    pub fn num_registers(&self) -> usize {
        self.registers.len()
    }

    pub fn registers(&self) -> &[u8] {
        &self.registers
    }

    /// Largest value a register can take: `64 - precision + 1`.
    pub fn max_rank(&self) -> u8 {
        64 - self.precision + 1
    }

    /// Adds an item. Registers only ever grow.
    pub fn add(&mut self, item: u64) {
        let x = hash64(item, self.seed);
        let b = self.precision;
        let idx = (x >> (64 - b)) as usize;
        // Left-align the remaining 64-b bits and plant a sentinel below them,
        // so leading_zeros is automatically capped at 64 - b.
        let w = (x << b) | (1u64 << (b - 1));
        let rank = (w.leading_zeros() + 1) as u8;
        if self.registers[idx] < rank {
            self.registers[idx] = rank;
        }
    }

    /// Register-wise max union. Fails unless precision and seed match.
    pub fn merge(&mut self, other: &HllSketch) -> Result<(), SketchError> {
        if self.precision != other.precision || self.seed != other.seed {
            return Err(SketchError::Incompatible {
                left_precision: self.precision,
                left_seed: self.seed,
                right_precision: other.precision,
                right_seed: other.seed,
            });
        }
        // Unconditional max keeps the loop branchless, so union cost depends
        // only on k, not on how many registers actually change.
        for (r, &o) in self.registers.iter_mut().zip(&other.registers) {
            *r = (*r).max(o);
        }
        Ok(())
    }

    /// Union as a new sketch; see [`HllSketch::merge`].
    pub fn union(&self, other: &HllSketch) -> Result<HllSketch, SketchError> {
        let mut out = self.clone();
        out.merge(other)?;
        Ok(out)
    }

    /// The uncorrected estimator `alpha_k * k^2 / sum_j 2^-M_j`.
    ///
    /// Monotone in the registers, unlike [`HllSketch::estimate`] around the
    /// linear-counting crossover.
    pub fn raw_estimate(&self) -> f64 {
        // 2^-r for every value a register can hold (r <= 61 for precision
        // >= 4). Exact powers of two, so the table changes no results; it
        // only replaces a divide per register with a load.
        const INV_POW2: [f64; 64] = {
            let mut t = [0.0; 64];
            let mut i = 0;
            while i < 64 {
                t[i] = 1.0 / (1u64 << i) as f64;
                i += 1;
            }
            t
        };
        let k = self.registers.len() as f64;
        let mut denom = 0.0;
        for &r in &self.registers {
            // The mask is the identity on valid registers and lets the
            // compiler drop the bounds check.
            denom += INV_POW2[(r & 63) as usize];
        }
        alpha(self.registers.len()) * k * k / denom
    }

    /// Estimated cardinality with the small-range linear-counting correction.
    ///
    /// No large-range correction is applied: with 64-bit hashes, collisions
    /// are negligible at any size this crate targets.
    pub fn estimate(&self) -> f64 {
        let k = self.registers.len() as f64;
        let raw = self.raw_estimate();
        if raw <= 2.5 * k {
            let zeros = self.registers.iter().filter(|&&r| r == 0).count();
            if zeros > 0 {
                return k * libm::log(k / zeros as f64);
            }
        }
        raw
    }

    /// Serializes as precision (1 byte), seed (8 bytes little-endian), then
    /// the `k` registers.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + self.registers.len());
        out.push(self.precision);
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.registers);
        out
    }

    /// Parses the format written by [`HllSketch::to_bytes`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SketchError> {
        if bytes.len() < 9 {
            return Err(SketchError::BadBytes("shorter than the 9-byte header"));
        }
        let precision = bytes[0];
        if !(MIN_PRECISION..=MAX_PRECISION).contains(&precision) {
            return Err(SketchError::PrecisionOutOfRange(precision));
        }
        let seed = u64::from_le_bytes(bytes[1..9].try_into().unwrap());
        let k = 1usize << precision;
        if bytes.len() != 9 + k {
            return Err(SketchError::BadBytes("register payload length != 2^precision"));
        }
        let registers = bytes[9..].to_vec();
        let cap = 64 - precision + 1;
        if registers.iter().any(|&r| r > cap) {
            return Err(SketchError::BadBytes("register value above rank cap"));
        }
        Ok(HllSketch {
            precision,
            seed,
            registers,
        })
    }
}

/// Bias-correction constant for `k` registers.
fn alpha(k: usize) -> f64 {
    match k {
        16 => 0.673,
        32 => 0.697,
        64 => 0.709,
        _ => 0.7213 / (1.0 + 1.079 / k as f64),
    }
}

/// Exact distinct-count oracle behind the counter interface.
///
/// Members are kept as a sorted vec so that unions are linear merges and
/// equality is structural.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExactCounter {
    members: Vec<u64>,
}

impl ExactCounter {
    pub fn new() -> Self {
        ExactCounter::default()
    }

    pub fn add(&mut self, item: u64) {
        if let Err(pos) = self.members.binary_search(&item) {
            self.members.insert(pos, item);
        }
    }

    pub fn merge(&mut self, other: &ExactCounter) {
        if other.members.is_empty() {
            return;
        }
        let mut merged = Vec::with_capacity(self.members.len() + other.members.len());
        let (mut i, mut j) = (0, 0);
        while i < self.members.len() && j < other.members.len() {
            match self.members[i].cmp(&other.members[j]) {
                core::cmp::Ordering::Less => {
                    merged.push(self.members[i]);
                    i += 1;
                }
                core::cmp::Ordering::Greater => {
                    merged.push(other.members[j]);
                    j += 1;
                }
                core::cmp::Ordering::Equal => {
                    merged.push(self.members[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        merged.extend_from_slice(&self.members[i..]);
        merged.extend_from_slice(&other.members[j..]);
        self.members = merged;
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn estimate(&self) -> f64 {
        self.members.len() as f64
    }
}

/// Which counter implementation a computation runs on.
///
/// Every counter participating in one computation must share the same kind,
/// or unions fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterKind {
    Hll { precision: u8, seed: u64 },
    Exact,
}

/// A counter of either kind. Plain value type: cloneable, comparable,
/// no interior mutability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Counter {
    Hll(HllSketch),
    Exact(ExactCounter),
}

impl Counter {
    /// Creates an empty counter, or one holding exactly `member`.
    pub fn init(kind: CounterKind, member: Option<u64>) -> Result<Counter, SketchError> {
        let mut counter = match kind {
            CounterKind::Hll { precision, seed } => Counter::Hll(HllSketch::new(precision, seed)?),
            CounterKind::Exact => Counter::Exact(ExactCounter::new()),
        };
        if let Some(item) = member {
            counter.add(item);
        }
        Ok(counter)
    }

    pub fn kind(&self) -> CounterKind {
        match self {
            Counter::Hll(s) => CounterKind::Hll {
                precision: s.precision(),
                seed: s.seed(),
            },
            Counter::Exact(_) => CounterKind::Exact,
        }
    }

    pub fn add(&mut self, item: u64) {
        match self {
            Counter::Hll(s) => s.add(item),
            Counter::Exact(e) => e.add(item),
        }
    }

    pub fn merge(&mut self, other: &Counter) -> Result<(), SketchError> {
        match (self, other) {
            (Counter::Hll(a), Counter::Hll(b)) => a.merge(b),
            (Counter::Exact(a), Counter::Exact(b)) => {
                a.merge(b);
                Ok(())
            }
            _ => Err(SketchError::KindMismatch),
        }
    }

    pub fn estimate(&self) -> f64 {
        match self {
            Counter::Hll(s) => s.estimate(),
            Counter::Exact(e) => e.estimate(),
        }
    }
}
