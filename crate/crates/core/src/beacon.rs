//! Commit-reveal XOR randomness beacon and the collision-equivocation attack
//! on it.
//!
//! Each participant commits to `h_t(preimage(value))`, then reveals `value`;
//! the beacon output is the XOR of all reveals and picks the next proposer.
//! An adversary holding two values with the same commitment reveals last and
//! keeps whichever value makes it the proposer, turning a `1/n` chance into
//! `1 - (1 - 1/n)^2`.
//!
//! With temporal binding, every preimage is prefixed by a fresh per-round
//! value, so the adversary's collision search can only start once that value
//! is known.

use std::fmt;
use std::io::{BufRead, Write};

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{
    default_distinguished_bits, expected_work, success_probability, AttackBudget, CollisionPair,
    CollisionSearch, FnEncoder,
};
use crate::digest::{keccak256, low_mask, truncated_digest, DigestSpec, TruncatedDigest};
use crate::error::Error;
use crate::hexfmt;
use crate::seeding::{stream_rng, stream_seed};

pub const DEFAULT_REVEAL_BITS: u32 = 64;

/// Length of the per-round binding value drawn when temporal binding is on.
pub const BINDING_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeaconConfig {
    participants: usize,
    adversary_index: Option<usize>,
    reveal_bits: u32,
    spec: DigestSpec,
    temporal_binding: bool,
}

impl BeaconConfig {
    /// `participants` honest players, 64-bit reveals, no binding.
    pub fn new(participants: usize, spec: DigestSpec) -> Result<Self, Error> {
        let config = Self {
            participants,
            adversary_index: None,
            reveal_bits: DEFAULT_REVEAL_BITS,
            spec,
            temporal_binding: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_adversary(mut self, index: usize) -> Result<Self, Error> {
        self.adversary_index = Some(index);
        self.validate()?;
        Ok(self)
    }

    pub fn with_reveal_bits(mut self, bits: u32) -> Result<Self, Error> {
        self.reveal_bits = bits;
        self.validate()?;
        Ok(self)
    }

    pub fn with_temporal_binding(mut self, on: bool) -> Self {
        self.temporal_binding = on;
        self
    }

    pub fn participants(&self) -> usize {
        self.participants
    }

    pub fn adversary_index(&self) -> Option<usize> {
        self.adversary_index
    }

    pub fn reveal_bits(&self) -> u32 {
        self.reveal_bits
    }

    pub fn spec(&self) -> DigestSpec {
        self.spec
    }

    pub fn temporal_binding(&self) -> bool {
        self.temporal_binding
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.participants < 2 {
            return Err(Error::param("a beacon needs at least two participants"));
        }
        if let Some(i) = self.adversary_index {
            if i >= self.participants {
                return Err(Error::param(format!(
                    "adversary index {i} out of range for {} participants",
                    self.participants
                )));
            }
        }
        let k = self.reveal_bits;
        if k == 0 || k > 64 || !k.is_multiple_of(8) {
            return Err(Error::param(format!(
                "reveal width must be a multiple of 8 in [8, 64], got {k}"
            )));
        }
        if k < self.spec.truncation_bits() {
            return Err(Error::param(format!(
                "reveal width {k} is narrower than the {}-bit commitment",
                self.spec.truncation_bits()
            )));
        }
        Ok(())
    }

    fn check_value(&self, value: u64) -> Result<(), Error> {
        if value & !low_mask(self.reveal_bits) != 0 {
            return Err(Error::param(format!(
                "reveal {value:#x} exceeds {} bits",
                self.reveal_bits
            )));
        }
        Ok(())
    }
}

/// Bytes committed to for `value`: `len(binding) || binding || be(value)`
/// with binding, just `be(value)` (`k/8` bytes) without.
pub fn commit_preimage(
    binding: Option<&[u8]>,
    value: u64,
    reveal_bits: u32,
) -> Result<Vec<u8>, Error> {
    if reveal_bits == 0 || reveal_bits > 64 || !reveal_bits.is_multiple_of(8) {
        return Err(Error::param(format!("bad reveal width {reveal_bits}")));
    }
    if value & !low_mask(reveal_bits) != 0 {
        return Err(Error::param(format!(
            "reveal {value:#x} exceeds {reveal_bits} bits"
        )));
    }
    if binding.is_some_and(|b| b.len() > u8::MAX as usize) {
        return Err(Error::param("binding longer than 255 bytes"));
    }
    let mut out = Vec::new();
    commit_preimage_into(binding, value, reveal_bits, &mut out);
    Ok(out)
}

pub(crate) fn commit_preimage_into(
    binding: Option<&[u8]>,
    value: u64,
    reveal_bits: u32,
    out: &mut Vec<u8>,
) {
    if let Some(b) = binding {
        out.push(b.len() as u8);
        out.extend_from_slice(b);
    }
    let width = (reveal_bits / 8) as usize;
    out.extend_from_slice(&value.to_be_bytes()[8 - width..]);
}

/// Inverse of [`commit_preimage`] for a known binding.
pub fn decode_commit_preimage(
    binding: Option<&[u8]>,
    bytes: &[u8],
    reveal_bits: u32,
) -> Option<u64> {
    let rest = match binding {
        Some(b) => {
            let (&len, rest) = bytes.split_first()?;
            if len as usize != b.len() || !rest.starts_with(b) {
                return None;
            }
            &rest[b.len()..]
        }
        None => bytes,
    };
    if rest.len() != (reveal_bits / 8) as usize || rest.len() > 8 {
        return None;
    }
    Some(rest.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64))
}

fn commitment_of(config: &BeaconConfig, binding: Option<&[u8]>, value: u64) -> TruncatedDigest {
    let mut buf = Vec::with_capacity(BINDING_LEN + 9);
    commit_preimage_into(binding, value, config.reveal_bits, &mut buf);
    truncated_digest(&buf, config.spec)
}

pub fn combine_reveals(values: impl IntoIterator<Item = u64>) -> u64 {
    values.into_iter().fold(0, |acc, v| acc ^ v)
}

/// Unbiased proposer index from the beacon output.
///
/// Draws `ceil(log2 n)`-bit windows, most significant first, from
/// `keccak256(R)` (then from the digest of the previous block) and returns
/// the first window below `n`. Hashing `R` first matters: two candidate
/// outputs that differ only in low bits still select independently.
pub fn select_proposer(result: u64, reveal_bits: u32, participants: usize) -> usize {
    debug_assert!(participants >= 2);
    let width = usize::BITS - (participants - 1).leading_zeros();
    let bytes = (reveal_bits / 8).clamp(1, 8) as usize;
    let mut block = keccak256(&result.to_be_bytes()[8 - bytes..]).0;
    loop {
        let windows = 256 / width;
        for w in 0..windows {
            let mut v = 0usize;
            for bit in w * width..(w + 1) * width {
                let byte = block[(bit / 8) as usize];
                v = (v << 1) | ((byte >> (7 - bit % 8)) & 1) as usize;
            }
            if v < participants {
                return v;
            }
        }
        block = keccak256(&block).0;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commitment {
    pub participant: usize,
    pub commit: TruncatedDigest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RevealRecord {
    pub participant: usize,
    pub value: u64,
}

/// Everything published in one round. Fields are public so that tampered
/// copies can be built and fed to [`verify_round`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTranscript {
    pub binding: Option<Vec<u8>>,
    pub commitments: Vec<Commitment>,
    pub reveals: Vec<RevealRecord>,
    pub result: u64,
    pub proposer: usize,
}

/// Compact wire form: participants are implied by position.
#[derive(Serialize, Deserialize)]
struct TranscriptWire {
    #[serde(with = "hexfmt::serde_opt_bytes")]
    binding: Option<Vec<u8>>,
    commit_bits: u32,
    commitments: Vec<String>,
    reveals: Vec<String>,
    result: String,
    proposer: usize,
}

impl Serialize for RoundTranscript {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let commit_bits = self.commitments.first().map_or(0, |c| c.commit.width());
        TranscriptWire {
            binding: self.binding.clone(),
            commit_bits,
            commitments: self.commitments.iter().map(|c| c.commit.to_hex()).collect(),
            reveals: self
                .reveals
                .iter()
                .map(|r| format!("{:#018x}", r.value))
                .collect(),
            result: format!("{:#018x}", self.result),
            proposer: self.proposer,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RoundTranscript {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = TranscriptWire::deserialize(d)?;
        let word = |s: &str| -> Result<u64, D::Error> {
            let bytes = hexfmt::decode(s).map_err(D::Error::custom)?;
            if bytes.len() > 8 {
                return Err(D::Error::custom(format!("`{s}` is wider than 64 bits")));
            }
            Ok(bytes.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64))
        };
        let commitments = wire
            .commitments
            .iter()
            .enumerate()
            .map(|(participant, h)| {
                TruncatedDigest::from_hex(h, wire.commit_bits)
                    .map(|commit| Commitment {
                        participant,
                        commit,
                    })
                    .map_err(D::Error::custom)
            })
            .collect::<Result<_, _>>()?;
        let reveals = wire
            .reveals
            .iter()
            .enumerate()
            .map(|(participant, h)| word(h).map(|value| RevealRecord { participant, value }))
            .collect::<Result<_, _>>()?;
        Ok(RoundTranscript {
            binding: wire.binding,
            commitments,
            reveals,
            result: word(&wire.result)?,
            proposer: wire.proposer,
        })
    }
}

/// Per-round randomness: the binding (if enabled) and every participant's
/// honest draw, in that order from the round's generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundInputs {
    pub binding: Option<Vec<u8>>,
    pub values: Vec<u64>,
}

impl RoundInputs {
    pub fn draw(config: &BeaconConfig, rng_seed: u64) -> Self {
        let mut rng = stream_rng(rng_seed, 0);
        let binding = config.temporal_binding.then(|| {
            let mut b = vec![0u8; BINDING_LEN];
            rng.fill_bytes(&mut b);
            b
        });
        let mask = low_mask(config.reveal_bits);
        let values = (0..config.participants)
            .map(|_| rng.next_u64() & mask)
            .collect();
        Self { binding, values }
    }
}

/// The binding value round `rng_seed` will use, for preparing an attack on it.
pub fn round_binding(config: &BeaconConfig, rng_seed: u64) -> Option<Vec<u8>> {
    RoundInputs::draw(config, rng_seed).binding
}

/// Commit then reveal the given values. Also the test hook for forcing values.
pub fn run_round_with_values(
    config: &BeaconConfig,
    binding: Option<&[u8]>,
    values: &[u64],
) -> Result<RoundTranscript, Error> {
    config.validate()?;
    if values.len() != config.participants {
        return Err(Error::param(format!(
            "expected {} values, got {}",
            config.participants,
            values.len()
        )));
    }
    if binding.is_some() != config.temporal_binding {
        return Err(Error::param(
            "binding presence must match the temporal_binding setting",
        ));
    }
    for &v in values {
        config.check_value(v)?;
    }
    let commitments = values
        .iter()
        .enumerate()
        .map(|(participant, &v)| Commitment {
            participant,
            commit: commitment_of(config, binding, v),
        })
        .collect();
    let reveals = values
        .iter()
        .enumerate()
        .map(|(participant, &value)| RevealRecord { participant, value })
        .collect();
    let result = combine_reveals(values.iter().copied());
    Ok(RoundTranscript {
        binding: binding.map(<[u8]>::to_vec),
        commitments,
        reveals,
        result,
        proposer: select_proposer(result, config.reveal_bits, config.participants),
    })
}

/// A round where everyone, including any designated adversary, plays honestly.
pub fn run_honest_round(config: &BeaconConfig, rng_seed: u64) -> Result<RoundTranscript, Error> {
    let inputs = RoundInputs::draw(config, rng_seed);
    run_round_with_values(config, inputs.binding.as_deref(), &inputs.values)
}

/// Searches for two reveal values sharing a commitment under `binding`.
///
/// With temporal binding on, the binding must be supplied; the search can
/// only start once it is known, and `budget` is the work that fits in the
/// window between learning it and committing.
pub fn adversary_prepare(
    config: &BeaconConfig,
    binding: Option<&[u8]>,
    budget: AttackBudget,
    seed: u64,
) -> Result<CollisionPair, Error> {
    config.validate()?;
    if config.adversary_index.is_none() {
        return Err(Error::param("configuration has no adversary"));
    }
    if binding.is_some() != config.temporal_binding {
        return Err(Error::param(
            "binding presence must match the temporal_binding setting",
        ));
    }
    let k = config.reveal_bits;
    let mask = low_mask(k);
    let encoder = FnEncoder::new("reveal", move |counter: u64, out: &mut Vec<u8>| {
        commit_preimage_into(binding, counter & mask, k, out)
    });
    let bits = config.spec.truncation_bits();
    CollisionSearch::new(config.spec, budget).parallel(
        &encoder,
        1,
        default_distinguished_bits(bits),
        seed,
    )
}

/// A round in which the adversary commits to the pair's shared digest and,
/// revealing last, picks the value that makes it proposer if either does.
pub fn run_attacked_round(
    config: &BeaconConfig,
    pair: &CollisionPair,
    rng_seed: u64,
) -> Result<RoundTranscript, Error> {
    config.validate()?;
    let adversary = config
        .adversary_index
        .ok_or_else(|| Error::param("configuration has no adversary"))?;
    let mut inputs = RoundInputs::draw(config, rng_seed);
    let binding = inputs.binding.as_deref();
    let k = config.reveal_bits;
    let decode = |m: &[u8]| {
        decode_commit_preimage(binding, m, k).ok_or_else(|| {
            Error::param("collision pair does not decode under this round's binding")
        })
    };
    let (v, v_alt) = (decode(pair.m1())?, decode(pair.m2())?);
    if v == v_alt || commitment_of(config, binding, v) != commitment_of(config, binding, v_alt) {
        return Err(Error::param("pair values do not share a commitment"));
    }

    let honest = combine_reveals(
        inputs
            .values
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != adversary)
            .map(|(_, &value)| value),
    );
    let picks_adversary =
        |value: u64| select_proposer(honest ^ value, k, config.participants) == adversary;
    let chosen = if !picks_adversary(v) && picks_adversary(v_alt) {
        v_alt
    } else {
        v
    };
    inputs.values[adversary] = chosen;
    run_round_with_values(config, inputs.binding.as_deref(), &inputs.values)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum RejectReason {
    Malformed { detail: String },
    BindingMismatch,
    CommitmentMismatch { participant: usize },
    ResultMismatch,
    ProposerMismatch,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::Malformed { detail } => write!(f, "malformed: {detail}"),
            RejectReason::BindingMismatch => f.write_str("binding-mismatch"),
            RejectReason::CommitmentMismatch { participant } => {
                write!(f, "commitment-mismatch (participant {participant})")
            }
            RejectReason::ResultMismatch => f.write_str("result-mismatch"),
            RejectReason::ProposerMismatch => f.write_str("proposer-mismatch"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

/// The checks an honest node runs: shape, then every commitment, then the
/// XOR, then the proposer. The first failure is reported.
pub fn verify_round(transcript: &RoundTranscript, config: &BeaconConfig) -> Verdict {
    let malformed = |detail: String| Verdict::Reject(RejectReason::Malformed { detail });
    if let Err(e) = config.validate() {
        return malformed(e.to_string());
    }
    let n = config.participants;
    if transcript.commitments.len() != n || transcript.reveals.len() != n {
        return malformed(format!(
            "{} commitments and {} reveals for {n} participants",
            transcript.commitments.len(),
            transcript.reveals.len()
        ));
    }
    for (i, (c, r)) in transcript
        .commitments
        .iter()
        .zip(&transcript.reveals)
        .enumerate()
    {
        if c.participant != i || r.participant != i {
            return malformed(format!("entry {i} is out of participant order"));
        }
        if c.commit.width() != config.spec.truncation_bits() {
            return malformed(format!("commitment {i} has width {}", c.commit.width()));
        }
        if config.check_value(r.value).is_err() {
            return malformed(format!("reveal {i} exceeds {} bits", config.reveal_bits));
        }
    }
    if transcript.binding.is_some() != config.temporal_binding
        || transcript
            .binding
            .as_ref()
            .is_some_and(|b| b.len() > u8::MAX as usize)
    {
        return Verdict::Reject(RejectReason::BindingMismatch);
    }
    if transcript.proposer >= n {
        return malformed(format!("proposer {} out of range", transcript.proposer));
    }

    let binding = transcript.binding.as_deref();
    for (c, r) in transcript.commitments.iter().zip(&transcript.reveals) {
        if commitment_of(config, binding, r.value) != c.commit {
            return Verdict::Reject(RejectReason::CommitmentMismatch {
                participant: r.participant,
            });
        }
    }
    if combine_reveals(transcript.reveals.iter().map(|r| r.value)) != transcript.result {
        return Verdict::Reject(RejectReason::ResultMismatch);
    }
    if select_proposer(transcript.result, config.reveal_bits, n) != transcript.proposer {
        return Verdict::Reject(RejectReason::ProposerMismatch);
    }
    Verdict::Accept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Honest,
    /// No binding: one collision is prepared up front and reused every round.
    Attacked {
        budget: AttackBudget,
    },
    /// Fresh binding per round; the adversary searches within `budget` each round.
    AttackedWithBinding {
        budget: AttackBudget,
    },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Honest => "honest",
            Scenario::Attacked { .. } => "attacked",
            Scenario::AttackedWithBinding { .. } => "attacked_with_binding",
        }
    }

    pub fn budget(&self) -> Option<AttackBudget> {
        match self {
            Scenario::Honest => None,
            Scenario::Attacked { budget } | Scenario::AttackedWithBinding { budget } => {
                Some(*budget)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub scenario: String,
    pub participants: usize,
    pub adversary_index: usize,
    pub truncation_bits: u32,
    pub rounds: u64,
    pub budget: Option<u64>,
    pub adversary_selected: u64,
    pub frequency: f64,
    /// `1/n`.
    pub honest_expected: f64,
    /// `2p - p^2`, the frequency when a collision is in hand.
    pub attacked_predicted: f64,
    pub collisions_found: u64,
    pub collision_rate: f64,
    pub predicted_collision_rate: f64,
    /// `s * attacked + (1 - s) * honest` for predicted collision rate `s`.
    pub predicted_frequency: f64,
    pub transcripts_verified: u64,
    /// How often each participant was selected.
    pub proposer_counts: Vec<u64>,
}

/// Output of [`run_bias_experiment`]: the report plus the raw rounds.
#[derive(Debug, Clone)]
pub struct BiasExperiment {
    pub report: BiasReport,
    pub transcripts: Vec<RoundTranscript>,
    /// The collision reused across rounds in the `attacked` scenario.
    pub prepared: Option<CollisionPair>,
    /// Evaluations spent on the up-front preparation (attacked scenario).
    pub preparation_evaluations: u64,
}

pub fn measure_bias(
    config: &BeaconConfig,
    rounds: u64,
    scenario: Scenario,
    seed: u64,
) -> Result<BiasReport, Error> {
    run_bias_experiment(config, rounds, scenario, seed).map(|e| e.report)
}

struct RoundOutcome {
    transcript: RoundTranscript,
    collision: bool,
}

/// Runs `rounds` independent rounds. Round `i` draws everything from stream
/// `i` of `seed`, so results do not depend on execution order.
pub fn run_bias_experiment(
    config: &BeaconConfig,
    rounds: u64,
    scenario: Scenario,
    seed: u64,
) -> Result<BiasExperiment, Error> {
    config.validate()?;
    // Without an adversary, participant 0 is tracked.
    let adversary = match (scenario, config.adversary_index) {
        (_, Some(i)) => i,
        (Scenario::Honest, None) => 0,
        _ => return Err(Error::param("attacked scenarios need an adversary index")),
    };
    if rounds == 0 {
        return Err(Error::param("at least one round is required"));
    }
    match scenario {
        Scenario::Attacked { .. } if config.temporal_binding => {
            return Err(Error::param(
                "a reusable collision cannot be prepared when temporal binding is on",
            ))
        }
        Scenario::AttackedWithBinding { .. } if !config.temporal_binding => {
            return Err(Error::param(
                "attacked_with_binding needs temporal_binding on",
            ))
        }
        _ => {}
    }

    let (prepared, preparation_evaluations) = match scenario {
        Scenario::Attacked { budget } => {
            match adversary_prepare(config, None, budget, stream_seed(seed, u64::MAX)) {
                Ok(pair) => {
                    let used = pair.evaluations_used();
                    (Some(pair), used)
                }
                Err(Error::Exhausted { evaluations }) => (None, evaluations),
                Err(e) => return Err(e),
            }
        }
        _ => (None, 0),
    };

    let outcomes = (0..rounds)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let round_seed = rng.next_u64();
            let search_seed = rng.next_u64();
            let pair = match scenario {
                Scenario::Honest => None,
                Scenario::Attacked { .. } => prepared.clone(),
                Scenario::AttackedWithBinding { budget } => {
                    let binding = round_binding(config, round_seed);
                    match adversary_prepare(config, binding.as_deref(), budget, search_seed) {
                        Ok(pair) => Some(pair),
                        Err(Error::Exhausted { .. }) => None,
                        Err(e) => return Err(e),
                    }
                }
            };
            let transcript = match &pair {
                Some(pair) => run_attacked_round(config, pair, round_seed)?,
                None => run_honest_round(config, round_seed)?,
            };
            Ok(RoundOutcome {
                transcript,
                collision: pair.is_some(),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let bits = config.spec.truncation_bits();
    let p = 1.0 / config.participants as f64;
    let attacked_predicted = 2.0 * p - p * p;
    let predicted_collision_rate = match scenario {
        Scenario::Honest => 0.0,
        Scenario::Attacked { .. } => f64::from(u8::from(prepared.is_some())),
        Scenario::AttackedWithBinding { budget } => {
            success_probability(budget.max_evaluations(), bits)
        }
    };
    let mut proposer_counts = vec![0u64; config.participants];
    for o in &outcomes {
        proposer_counts[o.transcript.proposer] += 1;
    }
    let adversary_selected = proposer_counts[adversary];
    let collisions_found = outcomes.iter().filter(|o| o.collision).count() as u64;
    let transcripts_verified = outcomes
        .iter()
        .filter(|o| verify_round(&o.transcript, config).is_accept())
        .count() as u64;

    let report = BiasReport {
        scenario: scenario.name().to_owned(),
        participants: config.participants,
        adversary_index: adversary,
        truncation_bits: bits,
        rounds,
        budget: scenario.budget().map(|b| b.max_evaluations()),
        adversary_selected,
        frequency: adversary_selected as f64 / rounds as f64,
        honest_expected: p,
        attacked_predicted,
        collisions_found,
        collision_rate: collisions_found as f64 / rounds as f64,
        predicted_collision_rate,
        predicted_frequency: predicted_collision_rate * attacked_predicted
            + (1.0 - predicted_collision_rate) * p,
        transcripts_verified,
        proposer_counts,
    };
    Ok(BiasExperiment {
        report,
        transcripts: outcomes.into_iter().map(|o| o.transcript).collect(),
        prepared,
        preparation_evaluations,
    })
}

/// Budget used for the one-off preparation in the `attacked` scenario when
/// the caller has no specific figure: 100x the expected work.
pub fn default_preparation_budget(spec: DigestSpec) -> AttackBudget {
    let evaluations = (100.0 * expected_work(spec.truncation_bits())).min(u64::MAX as f64);
    AttackBudget::new(evaluations.max(1.0) as u64).expect("positive budget")
}

/// One line of the transcript log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLogEntry {
    pub scenario: String,
    pub round: u64,
    #[serde(flatten)]
    pub transcript: RoundTranscript,
}

/// Writes one JSON object per round, one round per line.
pub fn write_transcript_log<W: Write>(
    mut out: W,
    scenario: &str,
    transcripts: &[RoundTranscript],
) -> std::io::Result<()> {
    for (round, transcript) in transcripts.iter().enumerate() {
        let entry = TranscriptLogEntry {
            scenario: scenario.to_owned(),
            round: round as u64,
            transcript: transcript.clone(),
        };
        serde_json::to_writer(&mut out, &entry)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_transcript_log<R: BufRead>(input: R) -> Result<Vec<TranscriptLogEntry>, Error> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|line| {
            let line = line.map_err(|e| Error::Format(e.to_string()))?;
            Ok(serde_json::from_str(&line)?)
        })
        .collect()
}
