//! Birthday-collision search over truncated Keccak-256.
//!
//! Every searcher walks the function `f(x) = h_t(encode(x))`, where `encode`
//! is the attacker's [`MessageEncoder`] and `h_t` the truncated digest. Three
//! engines are provided:
//!
//! * [`find_collision_brute`]: a table of every digest seen so far. Simple
//!   enough to serve as the oracle for the other two.
//! * [`find_collision_rho`]: Brent cycle detection on a single walk. Constant
//!   memory, fully deterministic.
//! * [`find_collision_parallel`]: van Oorschot–Wiener distinguished points.
//!   Workers run batches of eight walks in lockstep and report trail
//!   endpoints to a shared table at epoch boundaries, which keeps the result
//!   independent of thread scheduling.
//!
//! All searchers count digest evaluations exactly and stop at the
//! [`AttackBudget`]; re-walking trails to locate a collision counts too.

mod brute;
mod encoder;
mod parallel;
mod rho;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::digest::{self, batch, truncated_digest, DigestSpec, TruncatedDigest};
use crate::error::Error;

pub use brute::find_collision_brute;
pub use encoder::{CounterEncoder, FnEncoder, MessageEncoder};
pub use parallel::{
    default_distinguished_bits, find_collision_parallel, find_cross_family_collision,
    TRAIL_TABLE_CAPACITY,
};
pub use rho::find_collision_rho;

/// The truncated-digest function the searchers evaluate. Swappable so tests
/// can count calls independently of the searchers' own bookkeeping.
pub trait DigestOracle: Sync {
    /// Low `bits` (≤ 64) of the digest of `message`.
    fn eval(&self, message: &[u8], bits: u32) -> u64;

    /// Eight evaluations at once. Must agree with [`DigestOracle::eval`].
    fn eval_x8(&self, messages: [&[u8]; batch::LANES], bits: u32) -> [u64; batch::LANES] {
        messages.map(|m| self.eval(m, bits))
    }
}

/// Keccak-256, using the vectorized batch path where available.
#[derive(Debug, Default, Clone, Copy)]
pub struct Keccak;

impl DigestOracle for Keccak {
    fn eval(&self, message: &[u8], bits: u32) -> u64 {
        digest::truncated_u64(message, bits)
    }

    fn eval_x8(&self, messages: [&[u8]; batch::LANES], bits: u32) -> [u64; batch::LANES] {
        batch::truncated_u64_x8(messages, bits)
    }
}

/// Maximum number of digest evaluations a search may spend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttackBudget {
    max_evaluations: u64,
}

impl AttackBudget {
    pub fn new(max_evaluations: u64) -> Result<Self, Error> {
        if max_evaluations == 0 {
            return Err(Error::param("budget must allow at least one evaluation"));
        }
        Ok(Self { max_evaluations })
    }

    /// `floor(hash_rate * window)` evaluations: what an attacker hashing at
    /// `hash_rate` per second can do in `window_secs`.
    pub fn from_rate(hash_rate: f64, window_secs: f64) -> Result<Self, Error> {
        if !(hash_rate.is_finite() && window_secs.is_finite())
            || hash_rate < 0.0
            || window_secs < 0.0
        {
            return Err(Error::param(
                "hash rate and window must be finite and non-negative",
            ));
        }
        let evaluations = (hash_rate * window_secs).floor();
        if evaluations >= u64::MAX as f64 {
            return Self::new(u64::MAX);
        }
        Self::new(evaluations as u64)
    }

    pub fn max_evaluations(&self) -> u64 {
        self.max_evaluations
    }
}

/// Two distinct messages with the same truncated digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionPair {
    #[serde(with = "crate::hexfmt::serde_bytes")]
    m1: Vec<u8>,
    #[serde(with = "crate::hexfmt::serde_bytes")]
    m2: Vec<u8>,
    #[serde(with = "crate::hexfmt::serde_truncated")]
    digest_value: TruncatedDigest,
    evaluations_used: u64,
    /// Walk inputs that produced `m1` and `m2`.
    counters: (u64, u64),
    /// Encoder labels for cross-family searches, `m1`'s first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    families: Option<(String, String)>,
}

impl CollisionPair {
    pub(crate) fn new(
        m1: Vec<u8>,
        m2: Vec<u8>,
        digest_value: TruncatedDigest,
        evaluations_used: u64,
        counters: (u64, u64),
        families: Option<(String, String)>,
    ) -> Self {
        Self {
            m1,
            m2,
            digest_value,
            evaluations_used,
            counters,
            families,
        }
    }

    pub fn m1(&self) -> &[u8] {
        &self.m1
    }

    pub fn m2(&self) -> &[u8] {
        &self.m2
    }

    pub fn digest_value(&self) -> &TruncatedDigest {
        &self.digest_value
    }

    pub fn evaluations_used(&self) -> u64 {
        self.evaluations_used
    }

    pub fn counters(&self) -> (u64, u64) {
        self.counters
    }

    pub fn families(&self) -> Option<(&str, &str)> {
        self.families
            .as_ref()
            .map(|(a, b)| (a.as_str(), b.as_str()))
    }

    /// Recomputes both digests from scratch and checks the pair invariant.
    pub fn verify(&self, spec: DigestSpec) -> Result<(), Error> {
        if self.m1 == self.m2 {
            return Err(Error::Verification(
                "collision messages are identical".into(),
            ));
        }
        if self.digest_value.width() != spec.truncation_bits() {
            return Err(Error::Verification(format!(
                "digest width {} does not match spec width {}",
                self.digest_value.width(),
                spec.truncation_bits()
            )));
        }
        let d1 = truncated_digest(&self.m1, spec);
        let d2 = truncated_digest(&self.m2, spec);
        if d1 != self.digest_value || d2 != self.digest_value {
            return Err(Error::Verification(format!(
                "digests {d1} / {d2} do not both equal {}",
                self.digest_value
            )));
        }
        Ok(())
    }
}

/// Snapshot handed to progress callbacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub evaluations: u64,
    pub trails_stored: u64,
}

/// Receives periodic [`Progress`] reports from a running search.
pub trait ProgressSink {
    fn report(&mut self, progress: Progress);
}

impl<F: FnMut(Progress)> ProgressSink for F {
    fn report(&mut self, progress: Progress) {
        self(progress)
    }
}

/// Discards progress reports.
pub struct Silent;

impl ProgressSink for Silent {
    fn report(&mut self, _: Progress) {}
}

/// Search settings shared by every engine: what to hash, how much work is
/// allowed, and where progress goes. The free functions in this module are
/// shorthands for `CollisionSearch::new(spec, budget)` with Keccak and no
/// progress reporting.
pub struct CollisionSearch<'a, O: DigestOracle = Keccak> {
    pub(crate) spec: DigestSpec,
    pub(crate) budget: AttackBudget,
    pub(crate) oracle: &'a O,
    pub(crate) progress: Option<&'a mut dyn ProgressSink>,
}

static KECCAK: Keccak = Keccak;

impl<'a> CollisionSearch<'a, Keccak> {
    pub fn new(spec: DigestSpec, budget: AttackBudget) -> Self {
        Self {
            spec,
            budget,
            oracle: &KECCAK,
            progress: None,
        }
    }
}

impl<'a, O: DigestOracle> CollisionSearch<'a, O> {
    pub fn with_oracle<P: DigestOracle>(self, oracle: &'a P) -> CollisionSearch<'a, P> {
        CollisionSearch {
            spec: self.spec,
            budget: self.budget,
            oracle,
            progress: self.progress,
        }
    }

    pub fn with_progress(mut self, sink: &'a mut dyn ProgressSink) -> Self {
        self.progress = Some(sink);
        self
    }

    pub(crate) fn walk_bits(&self) -> Result<u32, Error> {
        let bits = self.spec.truncation_bits();
        if bits > 64 {
            return Err(Error::param(format!(
                "walk searches need truncation_bits <= 64, got {bits}"
            )));
        }
        Ok(bits)
    }

    pub(crate) fn report(&mut self, progress: Progress) {
        if let Some(sink) = self.progress.as_mut() {
            sink.report(progress);
        }
    }

    pub(crate) fn digest_of(&self, value: u64) -> TruncatedDigest {
        TruncatedDigest::from_u64(value, self.spec.truncation_bits())
            .expect("walk values fit the spec width")
    }
}

/// Expected evaluations to the first collision in a `bits`-bit space,
/// `sqrt(pi/2 * 2^bits)`.
pub fn expected_work(bits: u32) -> f64 {
    (PI / 2.0).sqrt() * 2f64.powf(bits as f64 / 2.0)
}

/// Probability that `evaluations` random digests of width `bits` contain at
/// least one collision: `1 - exp(-q(q-1) / 2^(bits+1))`.
pub fn success_probability(evaluations: u64, bits: u32) -> f64 {
    let q = evaluations as f64;
    let exponent = q * (q - 1.0) / 2f64.powi(bits as i32 + 1);
    if exponent <= 0.0 {
        return 0.0;
    }
    -(-exponent).exp_m1()
}
