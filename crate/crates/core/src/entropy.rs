//! Entropy sources.
//!
//! Every stochastic decision in the toolkit (weight initialization, split
//! attribute choice, bagging, shuffling) draws from an [`EntropySource`].
//! The source is the single seam between a "pseudo" run and a "quantum-sim"
//! run: learners only ever see a stream of bits.
//!
//! Bits are composed into integers most-significant-bit first, and 32-bit
//! integers are normalized into bounded reals with the inclusive denominator
//! `2^32 - 1`, so both endpoints of a bounded range are attainable.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{self, UniformRealProvider};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Salt mixed into the seed of the simulator's physical provider so that a
/// QuantumSim stream never shares its word sequence with a Pseudo stream of
/// the same seed.
const QSIM_DOMAIN: u64 = 0x5153_494D_5048_5953;

const U32_MAX_F64: f64 = u32::MAX as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("replay source exhausted after {drawn} bits")]
    ReplayExhausted { drawn: u64 },
    #[error("invalid integer width {0} (must be 1..=64)")]
    InvalidWidth(u32),
    #[error("invalid bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("run index must be >= 1")]
    InvalidRunIndex,
    #[error("a replay source needs a recorded bit sequence")]
    MissingReplayRecord,
    #[error("cannot draw an index below zero")]
    EmptyRange,
    #[error("bit record format: {0}")]
    Format(String),
    #[error("bit record io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, EntropyError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntropyKind {
    Pseudo,
    QuantumSim,
    Replay,
}

impl EntropyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntropyKind::Pseudo => "Pseudo",
            EntropyKind::QuantumSim => "QuantumSim",
            EntropyKind::Replay => "Replay",
        }
    }
}

impl fmt::Display for EntropyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntropyKind {
    type Err = EntropyError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pseudo" | "prng" => Ok(EntropyKind::Pseudo),
            "quantumsim" | "quantum" | "qrng" => Ok(EntropyKind::QuantumSim),
            "replay" => Ok(EntropyKind::Replay),
            other => Err(EntropyError::Format(format!("unknown entropy kind `{other}`"))),
        }
    }
}

/// How to build a source. `run_index` follows the "model i gets seed i"
/// convention; `seed` defaults to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub kind: EntropyKind,
    pub seed: u64,
    pub run_index: u64,
}

impl EntropyConfig {
    /// Config for the `run_index`-th model of a batch, seeded with its index.
    pub fn for_run(kind: EntropyKind, run_index: u64) -> Result<Self> {
        Self::new(kind, run_index, None)
    }

    pub fn new(kind: EntropyKind, run_index: u64, seed: Option<u64>) -> Result<Self> {
        if run_index == 0 {
            return Err(EntropyError::InvalidRunIndex);
        }
        Ok(Self { kind, seed: seed.unwrap_or(run_index), run_index })
    }
}

/// One SplitMix64 step: returns the advanced state and the output word.
pub fn pseudo_next_word(state: u64) -> (u64, u64) {
    let state = state.wrapping_add(GOLDEN_GAMMA);
    (state, mix64(state))
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_word(&mut self) -> u64 {
        let (state, word) = pseudo_next_word(self.state);
        self.state = state;
        word
    }
}

impl UniformRealProvider for SplitMix64 {
    /// Top 53 bits of the next word, scaled into `[0, 1)`.
    fn next_unit(&mut self) -> f64 {
        (self.next_word() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// A recorded bit stream that can be replayed through [`EntropySource::replay`].
#[derive(Debug, Clone, PartialEq)]
pub struct BitRecord {
    pub bits: Vec<u8>,
    pub source_kind: EntropyKind,
    pub seed: u64,
    pub created_at: DateTime<Utc>,
}

impl BitRecord {
    pub fn new(bits: Vec<u8>, source_kind: EntropyKind, seed: u64) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits, source_kind, seed, created_at: Utc::now() }
    }

    /// Parses a `0`/`1` string (whitespace ignored).
    pub fn from_bit_str(bits: &str, source_kind: EntropyKind, seed: u64) -> Result<Self> {
        let bits = parse_bits(bits)?;
        Ok(Self::new(bits, source_kind, seed))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    /// File form: `#kind=<kind> seed=<seed>` header, optional `#created=` comment,
    /// then the bits on one line.
    pub fn to_file_string(&self, with_timestamp: bool) -> String {
        let mut out = format!("#kind={} seed={}\n", self.source_kind, self.seed);
        if with_timestamp {
            out.push_str(&format!("#created={}\n", self.created_at.to_rfc3339()));
        }
        out.push_str(&self.bit_string());
        out.push('\n');
        out
    }

    pub fn parse_file_str(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut seed = None;
        let mut created_at = None;
        let mut bits = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                for field in comment.split_whitespace() {
                    match field.split_once('=') {
                        Some(("kind", v)) => kind = Some(v.parse::<EntropyKind>()?),
                        Some(("seed", v)) => {
                            seed = Some(
                                v.parse::<u64>().map_err(|e| EntropyError::Format(format!("bad seed `{v}`: {e}")))?,
                            )
                        }
                        Some(("created", v)) => {
                            created_at = DateTime::parse_from_rfc3339(v).ok().map(|t| t.with_timezone(&Utc))
                        }
                        _ => {}
                    }
                }
            } else if !line.is_empty() {
                bits.extend(parse_bits(line)?);
            }
        }
        let source_kind = kind.ok_or_else(|| EntropyError::Format("missing `#kind=` header".into()))?;
        Ok(Self { bits, source_kind, seed: seed.unwrap_or(0), created_at: created_at.unwrap_or_else(Utc::now) })
    }

    pub fn write_file(&self, path: &Path, with_timestamp: bool) -> Result<()> {
        fs::write(path, self.to_file_string(with_timestamp))
            .map_err(|e| EntropyError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| EntropyError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_file_str(&text)
    }
}

fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(EntropyError::Format(format!("invalid bit character `{other}`"))),
        })
        .collect()
}

#[derive(Debug, Clone)]
enum Stream {
    Pseudo { rng: SplitMix64, word: u64, left: u32 },
    QuantumSim { physical: SplitMix64 },
    Replay { bits: Arc<Vec<u8>>, pos: usize },
}

/// A stateful bit supplier. Not meant to be shared between threads
/// concurrently; give each worker its own.
#[derive(Debug, Clone)]
pub struct EntropySource {
    stream: Stream,
    provenance: EntropyKind,
    seed: u64,
    drawn: u64,
}

impl EntropySource {
    pub fn from_config(config: &EntropyConfig) -> Result<Self> {
        match config.kind {
            EntropyKind::Pseudo => Ok(Self::pseudo(config.seed)),
            EntropyKind::QuantumSim => Ok(Self::quantum_sim(config.seed)),
            EntropyKind::Replay => Err(EntropyError::MissingReplayRecord),
        }
    }

    pub fn pseudo(seed: u64) -> Self {
        Self {
            stream: Stream::Pseudo { rng: SplitMix64::new(seed), word: 0, left: 0 },
            provenance: EntropyKind::Pseudo,
            seed,
            drawn: 0,
        }
    }

    /// Simulated QRNG: each bit is one Hadamard-then-measure cycle on a fresh
    /// qubit, with measurement randomness from a seeded physical provider.
    pub fn quantum_sim(seed: u64) -> Self {
        Self {
            stream: Stream::QuantumSim { physical: SplitMix64::new(mix64(seed ^ QSIM_DOMAIN)) },
            provenance: EntropyKind::QuantumSim,
            seed,
            drawn: 0,
        }
    }

    /// Replays a record; its provenance label is the record's source kind.
    pub fn replay(record: &BitRecord) -> Self {
        Self::replay_labeled(record, record.source_kind)
    }

    /// Replays a record under an explicit provenance label, so that two
    /// pipelines labeled differently can be fed the very same bits.
    pub fn replay_labeled(record: &BitRecord, label: EntropyKind) -> Self {
        Self {
            stream: Stream::Replay { bits: Arc::new(record.bits.clone()), pos: 0 },
            provenance: label,
            seed: record.seed,
            drawn: 0,
        }
    }

    pub fn kind(&self) -> EntropyKind {
        match self.stream {
            Stream::Pseudo { .. } => EntropyKind::Pseudo,
            Stream::QuantumSim { .. } => EntropyKind::QuantumSim,
            Stream::Replay { .. } => EntropyKind::Replay,
        }
    }

    /// The kind this stream is reported as (differs from `kind()` only for replays).
    pub fn provenance(&self) -> EntropyKind {
        self.provenance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bits_drawn(&self) -> u64 {
        self.drawn
    }

    pub fn next_bit(&mut self) -> Result<u8> {
        let bit = match &mut self.stream {
            Stream::Pseudo { rng, word, left } => {
                if *left == 0 {
                    *word = rng.next_word();
                    *left = 64;
                }
                *left -= 1;
                ((*word >> *left) & 1) as u8
            }
            Stream::QuantumSim { physical } => qsim::qrng_bit(physical),
            Stream::Replay { bits, pos } => {
                let bit = *bits.get(*pos).ok_or(EntropyError::ReplayExhausted { drawn: self.drawn })?;
                *pos += 1;
                bit
            }
        };
        self.drawn += 1;
        Ok(bit)
    }

    /// Draws `n_bits` bits, first draw in the most significant position.
    pub fn next_uint(&mut self, n_bits: u32) -> Result<u64> {
        if !(1..=64).contains(&n_bits) {
            return Err(EntropyError::InvalidWidth(n_bits));
        }
        let mut value = 0u64;
        for _ in 0..n_bits {
            value = (value << 1) | u64::from(self.next_bit()?);
        }
        Ok(value)
    }

    pub fn next_u32(&mut self) -> Result<u32> {
        Ok(self.next_uint(32)? as u32)
    }

    /// `lo + u * (hi - lo)` with `u = next_uint(32) / (2^32 - 1)`.
    pub fn next_bounded(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(EntropyError::InvalidBounds { lo, hi });
        }
        let word = self.next_u32()?;
        Ok(bounded_from_word(word, lo, hi))
    }

    /// `next_uint(32) mod n`. Slightly biased for `n` not dividing `2^32`.
    pub fn next_index_mod(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(EntropyError::EmptyRange);
        }
        Ok(self.next_u32()? as usize % n)
    }

    /// Uniform index in `0..n` by rejecting draws from the incomplete top block.
    pub fn next_index_unbiased(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(EntropyError::EmptyRange);
        }
        let n64 = n as u64;
        let span = 1u64 << 32;
        let limit = span - span % n64;
        loop {
            let x = u64::from(self.next_u32()?);
            if x < limit {
                return Ok((x % n64) as usize);
            }
        }
    }

    /// Fisher–Yates shuffle driven by unbiased index draws.
    pub fn shuffle<T>(&mut self, items: &mut [T]) -> Result<()> {
        for i in (1..items.len()).rev() {
            let j = self.next_index_unbiased(i + 1)?;
            items.swap(i, j);
        }
        Ok(())
    }

    /// Consumes the next `n` bits and returns them as a replayable record.
    pub fn record_bits(&mut self, n: usize) -> Result<BitRecord> {
        let bits = (0..n).map(|_| self.next_bit()).collect::<Result<Vec<_>>>()?;
        Ok(BitRecord::new(bits, self.provenance, self.seed))
    }
}

/// Maps a 32-bit word onto `[lo, hi]`; word 0 gives `lo`, `u32::MAX` gives `hi`.
pub fn bounded_from_word(word: u32, lo: f64, hi: f64) -> f64 {
    let u = f64::from(word) / U32_MAX_F64;
    (lo + u * (hi - lo)).clamp(lo, hi)
}
