//! Keccak-256 (the Ethereum variant, domain byte `0x01`) and truncation of
//! its output to a configurable number of low-order bits.
//!
//! Truncation interprets the 32-byte digest as a big-endian integer and keeps
//! it modulo `2^t`. For `t = 160` that is exactly the last 20 bytes, which is
//! how Ethereum turns a digest into an account address.

pub mod batch;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Sponge rate in bytes (1088 bits); capacity is the remaining 512 bits.
pub const RATE: usize = 136;

pub const MIN_TRUNCATION_BITS: u32 = 8;
pub const MAX_TRUNCATION_BITS: u32 = 256;

const ROUND_CONSTANTS: [u64; 24] = [
    0x0000_0000_0000_0001,
    0x0000_0000_0000_8082,
    0x8000_0000_0000_808a,
    0x8000_0000_8000_8000,
    0x0000_0000_0000_808b,
    0x0000_0000_8000_0001,
    0x8000_0000_8000_8081,
    0x8000_0000_0000_8009,
    0x0000_0000_0000_008a,
    0x0000_0000_0000_0088,
    0x0000_0000_8000_8009,
    0x0000_0000_8000_000a,
    0x0000_0000_8000_808b,
    0x8000_0000_0000_008b,
    0x8000_0000_0000_8089,
    0x8000_0000_0000_8003,
    0x8000_0000_0000_8002,
    0x8000_0000_0000_0080,
    0x0000_0000_0000_800a,
    0x8000_0000_8000_000a,
    0x8000_0000_8000_8081,
    0x8000_0000_0000_8080,
    0x0000_0000_8000_0001,
    0x8000_0000_8000_8008,
];

// Rho rotation amounts and Pi destinations, walked along the lane cycle
// starting at lane (1, 0).
const RHO: [u32; 24] = [
    1, 3, 6, 10, 15, 21, 28, 36, 45, 55, 2, 14, 27, 41, 56, 8, 25, 43, 62, 18, 39, 61, 20, 44,
];
const PI: [usize; 24] = [
    10, 7, 11, 17, 18, 3, 5, 16, 8, 21, 24, 4, 15, 23, 19, 13, 12, 2, 20, 14, 22, 9, 6, 1,
];

/// The Keccak-f\[1600\] permutation, 24 rounds. Lane `(x, y)` lives at index `x + 5y`.
pub fn keccak_f1600(state: &mut [u64; 25]) {
    for rc in ROUND_CONSTANTS {
        // theta
        let mut c = [0u64; 5];
        for x in 0..5 {
            c[x] = state[x] ^ state[x + 5] ^ state[x + 10] ^ state[x + 15] ^ state[x + 20];
        }
        for x in 0..5 {
            let d = c[(x + 4) % 5] ^ c[(x + 1) % 5].rotate_left(1);
            for y in 0..5 {
                state[x + 5 * y] ^= d;
            }
        }

        // rho + pi
        let mut carry = state[1];
        for i in 0..24 {
            let j = PI[i];
            let next = state[j];
            state[j] = carry.rotate_left(RHO[i]);
            carry = next;
        }

        // chi
        for y in 0..5 {
            let row = [
                state[5 * y],
                state[5 * y + 1],
                state[5 * y + 2],
                state[5 * y + 3],
                state[5 * y + 4],
            ];
            for x in 0..5 {
                state[5 * y + x] = row[x] ^ (!row[(x + 1) % 5] & row[(x + 2) % 5]);
            }
        }

        // iota
        state[0] ^= rc;
    }
}

fn absorb_block(state: &mut [u64; 25], block: &[u8]) {
    debug_assert_eq!(block.len(), RATE);
    for (lane, chunk) in state.iter_mut().zip(block.chunks_exact(8)) {
        *lane ^= u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    keccak_f1600(state);
}

/// A full 32-byte Keccak-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest256(pub [u8; 32]);

impl Digest256 {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest256({})", self.to_hex())
    }
}

impl fmt::Display for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Keccak-256 with the original multi-rate padding (`0x01 .. 0x80`), as used by Ethereum.
pub fn keccak256(message: &[u8]) -> Digest256 {
    let mut state = [0u64; 25];
    let mut blocks = message.chunks_exact(RATE);
    for block in &mut blocks {
        absorb_block(&mut state, block);
    }

    let tail = blocks.remainder();
    let mut last = [0u8; RATE];
    last[..tail.len()].copy_from_slice(tail);
    last[tail.len()] ^= 0x01;
    last[RATE - 1] ^= 0x80;
    absorb_block(&mut state, &last);

    let mut out = [0u8; 32];
    for (chunk, lane) in out.chunks_exact_mut(8).zip(state.iter()) {
        chunk.copy_from_slice(&lane.to_le_bytes());
    }
    Digest256(out)
}

/// Low-order `bits` (≤ 64) of the Keccak-256 digest of `message`, as an integer.
///
/// This is the hot path for collision searches and agrees with
/// [`truncated_digest`] on every input.
pub fn truncated_u64(message: &[u8], bits: u32) -> u64 {
    debug_assert!((1..=64).contains(&bits));
    let digest = keccak256(message);
    let low = u64::from_be_bytes(digest.0[24..].try_into().expect("8 bytes"));
    low & low_mask(bits)
}

#[inline]
pub(crate) fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Digest algorithm names accepted by [`DigestSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DigestAlgorithm {
    Keccak256,
}

impl FromStr for DigestAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "keccak256" => Ok(DigestAlgorithm::Keccak256),
            other => Err(Error::param(format!("unknown digest algorithm `{other}`"))),
        }
    }
}

impl fmt::Display for DigestAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DigestAlgorithm::Keccak256 => f.write_str("keccak256"),
        }
    }
}

/// Digest algorithm plus truncation width; the security knob of every experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDigestSpec", into = "RawDigestSpec")]
pub struct DigestSpec {
    algorithm: DigestAlgorithm,
    truncation_bits: u32,
}

impl DigestSpec {
    pub fn new(algorithm: DigestAlgorithm, truncation_bits: u32) -> Result<Self, Error> {
        check_width(truncation_bits)?;
        Ok(Self {
            algorithm,
            truncation_bits,
        })
    }

    /// Keccak-256 truncated to `truncation_bits`.
    pub fn keccak(truncation_bits: u32) -> Result<Self, Error> {
        Self::new(DigestAlgorithm::Keccak256, truncation_bits)
    }

    pub fn algorithm(&self) -> DigestAlgorithm {
        self.algorithm
    }

    pub fn truncation_bits(&self) -> u32 {
        self.truncation_bits
    }
}

#[derive(Serialize, Deserialize)]
struct RawDigestSpec {
    algorithm: String,
    truncation_bits: u32,
}

impl TryFrom<RawDigestSpec> for DigestSpec {
    type Error = Error;

    fn try_from(raw: RawDigestSpec) -> Result<Self, Error> {
        DigestSpec::new(raw.algorithm.parse()?, raw.truncation_bits)
    }
}

impl From<DigestSpec> for RawDigestSpec {
    fn from(spec: DigestSpec) -> Self {
        RawDigestSpec {
            algorithm: spec.algorithm.to_string(),
            truncation_bits: spec.truncation_bits,
        }
    }
}

fn check_width(bits: u32) -> Result<(), Error> {
    if (MIN_TRUNCATION_BITS..=MAX_TRUNCATION_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(Error::param(format!(
            "truncation width {bits} outside [{MIN_TRUNCATION_BITS}, {MAX_TRUNCATION_BITS}]"
        )))
    }
}

/// An integer in `[0, 2^width)`, stored as 32 big-endian bytes with the bits
/// above `width` cleared.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TruncatedDigest {
    value: [u8; 32],
    width: u32,
}

impl TruncatedDigest {
    pub fn width(&self) -> u32 {
        self.width
    }

    /// Big-endian value padded to 32 bytes.
    pub fn value_bytes(&self) -> &[u8; 32] {
        &self.value
    }

    /// The significant `ceil(width / 8)` big-endian bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let len = (self.width as usize).div_ceil(8);
        self.value[32 - len..].to_vec()
    }

    /// The value as a `u64`, if it fits (always when `width <= 64`).
    pub fn to_u64(&self) -> Option<u64> {
        if self.value[..24].iter().any(|&b| b != 0) {
            return None;
        }
        Some(u64::from_be_bytes(
            self.value[24..].try_into().expect("8 bytes"),
        ))
    }

    /// Builds a value from a `u64`; fails if the value does not fit in `width` bits.
    pub fn from_u64(value: u64, width: u32) -> Result<Self, Error> {
        check_width(width)?;
        if width < 64 && value >> width != 0 {
            return Err(Error::param(format!(
                "value {value:#x} exceeds {width} bits"
            )));
        }
        let mut bytes = [0u8; 32];
        bytes[24..].copy_from_slice(&value.to_be_bytes());
        Ok(Self {
            value: bytes,
            width,
        })
    }

    /// `0x`-prefixed lowercase hex of `ceil(width / 8)` bytes.
    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.to_bytes()))
    }

    /// Parses the output of [`TruncatedDigest::to_hex`] for a known width.
    pub fn from_hex(s: &str, width: u32) -> Result<Self, Error> {
        check_width(width)?;
        let bytes = crate::hexfmt::decode(s)?;
        let len = (width as usize).div_ceil(8);
        if bytes.len() != len {
            return Err(Error::param(format!(
                "expected {len} bytes for a {width}-bit value, got {}",
                bytes.len()
            )));
        }
        let mut value = [0u8; 32];
        value[32 - len..].copy_from_slice(&bytes);
        let parsed = truncate(&Digest256(value), width)?;
        if parsed.value != value {
            return Err(Error::param(format!("value exceeds {width} bits")));
        }
        Ok(parsed)
    }
}

impl fmt::Debug for TruncatedDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TruncatedDigest({}, {} bits)", self.to_hex(), self.width)
    }
}

impl fmt::Display for TruncatedDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Reduces `digest` (big-endian) modulo `2^bits`.
pub fn truncate(digest: &Digest256, bits: u32) -> Result<TruncatedDigest, Error> {
    check_width(bits)?;
    let mut value = digest.0;
    let whole = (bits / 8) as usize;
    let partial = bits % 8;
    let keep_from = 32 - whole;
    if partial > 0 {
        value[keep_from - 1] &= (1u8 << partial) - 1;
        value[..keep_from - 1].fill(0);
    } else {
        value[..keep_from].fill(0);
    }
    Ok(TruncatedDigest { value, width: bits })
}

/// `truncate(keccak256(message), spec.truncation_bits)`: one unit of attack work.
pub fn truncated_digest(message: &[u8], spec: DigestSpec) -> TruncatedDigest {
    truncate(&keccak256(message), spec.truncation_bits).expect("DigestSpec width is validated")
}
