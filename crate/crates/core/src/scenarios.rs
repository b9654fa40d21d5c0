//! End-to-end attacks with self-verifying evidence.
//!
//! * [`forge_address_collision`]: two contracts, one benign and one
//!   nefarious, that deploy to the same truncated address.
//! * [`narrate_beacon_attack`]: an equivocating beacon participant, with
//!   every round's transcript.
//!
//! Both produce an [`EvidenceBundle`]; [`EvidenceBundle::verify`] recomputes
//! every digest and address from the stored inputs and trusts nothing else.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::address::{
    derive_address, preimage_into, AddressValue, DeploymentRecord, MAX_INITCODE_LEN,
};
use crate::beacon::{
    decode_commit_preimage, run_bias_experiment, verify_round, BeaconConfig, RoundTranscript,
    Scenario, Verdict,
};
use crate::collision::{
    default_distinguished_bits, AttackBudget, CollisionPair, CollisionSearch, FnEncoder,
};
use crate::digest::DigestSpec;
use crate::error::Error;
use crate::hexfmt;
use crate::mitigation::MAX_STUDY_BITS;

pub const EVIDENCE_SCHEMA: &str = "digestlab.evidence/1";

/// Narrowest mutable field accepted, in bytes. Wide enough to hold any
/// search counter.
pub const MIN_FIELD_WIDTH: usize = 8;

/// Nonce sweeps stop after this many candidates.
pub const MAX_NONCE_SWEEP: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateLabel {
    Benign,
    Nefarious,
}

impl fmt::Display for TemplateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateLabel::Benign => "benign",
            TemplateLabel::Nefarious => "nefarious",
        })
    }
}

/// Initcode shaped `prefix || field || suffix`, where the attacker controls
/// only `field`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContractTemplate {
    label: TemplateLabel,
    #[serde(with = "hexfmt::serde_bytes")]
    code_prefix: Vec<u8>,
    mutable_field_width: usize,
    #[serde(with = "hexfmt::serde_bytes")]
    code_suffix: Vec<u8>,
}

impl ContractTemplate {
    pub fn new(
        label: TemplateLabel,
        code_prefix: Vec<u8>,
        code_suffix: Vec<u8>,
    ) -> Result<Self, Error> {
        Self::with_field_width(label, code_prefix, MIN_FIELD_WIDTH, code_suffix)
    }

    pub fn with_field_width(
        label: TemplateLabel,
        code_prefix: Vec<u8>,
        mutable_field_width: usize,
        code_suffix: Vec<u8>,
    ) -> Result<Self, Error> {
        let template = Self {
            label,
            code_prefix,
            mutable_field_width,
            code_suffix,
        };
        template.validate()?;
        Ok(template)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.mutable_field_width < MIN_FIELD_WIDTH {
            return Err(Error::param(format!(
                "mutable field must be at least {MIN_FIELD_WIDTH} bytes"
            )));
        }
        if self.initcode_len() > MAX_INITCODE_LEN {
            return Err(Error::param(format!(
                "template initcode is {} bytes, limit is {MAX_INITCODE_LEN}",
                self.initcode_len()
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> TemplateLabel {
        self.label
    }

    pub fn code_prefix(&self) -> &[u8] {
        &self.code_prefix
    }

    pub fn code_suffix(&self) -> &[u8] {
        &self.code_suffix
    }

    pub fn mutable_field_width(&self) -> usize {
        self.mutable_field_width
    }

    pub fn initcode_len(&self) -> usize {
        self.code_prefix.len() + self.mutable_field_width + self.code_suffix.len()
    }

    /// Initcode with `field` big-endian in the mutable field.
    pub fn fill(&self, field: u64) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.initcode_len());
        out.extend_from_slice(&self.code_prefix);
        out.resize(out.len() + self.mutable_field_width - 8, 0);
        out.extend_from_slice(&field.to_be_bytes());
        out.extend_from_slice(&self.code_suffix);
        out
    }

    /// Whether `initcode` is this template with some field value.
    pub fn matches(&self, initcode: &[u8]) -> bool {
        initcode.len() == self.initcode_len()
            && initcode.starts_with(&self.code_prefix)
            && initcode.ends_with(&self.code_suffix)
    }
}

/// A benign and a nefarious template that differ where a reader would look.
fn check_template_pair(
    benign: &ContractTemplate,
    nefarious: &ContractTemplate,
) -> Result<(), Error> {
    benign.validate()?;
    nefarious.validate()?;
    if benign.label != TemplateLabel::Benign || nefarious.label != TemplateLabel::Nefarious {
        return Err(Error::param(
            "templates must be labelled benign and nefarious",
        ));
    }
    if benign.code_prefix == nefarious.code_prefix && benign.code_suffix == nefarious.code_suffix {
        return Err(Error::param("templates must differ in prefix or suffix"));
    }
    Ok(())
}

/// What the search varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vary {
    /// The template's mutable field; the nonce is fixed.
    Field,
    /// The nonce, counting up from the given one; field fixed at zero.
    Nonce,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForgeryEvidence {
    pub benign: DeploymentRecord,
    pub nefarious: DeploymentRecord,
    pub shared_address: AddressValue,
    pub evaluations_used: u64,
    pub spec: DigestSpec,
    pub benign_template: ContractTemplate,
    pub nefarious_template: ContractTemplate,
    pub mode: Vary,
}

impl ForgeryEvidence {
    /// Re-derives both addresses through [`derive_address`].
    pub fn verify(&self) -> Result<(), Error> {
        let fail =
            |check: &str, detail: String| Err(Error::Verification(format!("{check}: {detail}")));
        if let Err(e) = check_template_pair(&self.benign_template, &self.nefarious_template) {
            return fail("template-pair", e.to_string());
        }
        let benign = derive_address(&self.benign, self.spec);
        let nefarious = derive_address(&self.nefarious, self.spec);
        let (benign, nefarious) = match (benign, nefarious) {
            (Ok(b), Ok(n)) => (b, n),
            (Err(e), _) | (_, Err(e)) => return fail("record", e.to_string()),
        };
        if benign != nefarious {
            return fail(
                "address-mismatch",
                format!("benign {benign}, nefarious {nefarious}"),
            );
        }
        if benign != self.shared_address {
            return fail(
                "shared-address",
                format!("derived {benign}, recorded {}", self.shared_address),
            );
        }
        if self.benign.initcode() == self.nefarious.initcode() {
            return fail(
                "identical-initcode",
                "both records deploy the same code".into(),
            );
        }
        if !self.benign_template.matches(self.benign.initcode()) {
            return fail(
                "template-mismatch",
                "benign initcode does not embed the benign template".into(),
            );
        }
        if !self.nefarious_template.matches(self.nefarious.initcode()) {
            return fail(
                "template-mismatch",
                "nefarious initcode does not embed the nefarious template".into(),
            );
        }
        if self.benign.creator() != self.nefarious.creator() {
            return fail("creator-mismatch", "records have different creators".into());
        }
        if self.mode == Vary::Field && self.benign.nonce() != self.nefarious.nonce() {
            return fail("nonce-mismatch", "field mode keeps the nonce fixed".into());
        }
        Ok(())
    }
}

/// Finds a benign and a nefarious deployment with the same address.
///
/// Field mode fills each template's mutable field with the search counter;
/// nonce mode keeps the field at zero and uses `nonce + counter`, with the
/// budget capped at [`MAX_NONCE_SWEEP`].
#[allow(clippy::too_many_arguments)]
pub fn forge_address_collision(
    creator: [u8; 20],
    benign: &ContractTemplate,
    nefarious: &ContractTemplate,
    nonce: u64,
    spec: DigestSpec,
    seed: u64,
    budget: AttackBudget,
    mode: Vary,
) -> Result<ForgeryEvidence, Error> {
    check_template_pair(benign, nefarious)?;
    let bits = spec.truncation_bits();
    if bits > MAX_STUDY_BITS {
        return Err(Error::param(format!(
            "address forgery is limited to t <= {MAX_STUDY_BITS}, got {bits}"
        )));
    }
    let budget = match mode {
        Vary::Field => budget,
        Vary::Nonce => AttackBudget::new(budget.max_evaluations().min(MAX_NONCE_SWEEP))?,
    };

    let record_for = |template: &ContractTemplate, counter: u64| match mode {
        Vary::Field => DeploymentRecord::new(creator, nonce, template.fill(counter)),
        Vary::Nonce => {
            DeploymentRecord::new(creator, nonce.wrapping_add(counter), template.fill(0))
        }
    };

    // Field mode patches the counter into a precomputed preimage: only the
    // field bytes change, and the RLP lengths stay fixed.
    let field_encoder = |template: &ContractTemplate| {
        let base = {
            let mut out = Vec::new();
            preimage_into(&creator, nonce, &template.fill(0), &mut out);
            out
        };
        let end = base.len() - template.code_suffix.len();
        FnEncoder::new(
            template.label.to_string(),
            move |counter: u64, out: &mut Vec<u8>| {
                let start = out.len();
                out.extend_from_slice(&base);
                out[start + end - 8..start + end].copy_from_slice(&counter.to_be_bytes());
            },
        )
    };
    let nonce_encoder = |template: &ContractTemplate| {
        let code = template.fill(0);
        FnEncoder::new(
            template.label.to_string(),
            move |counter: u64, out: &mut Vec<u8>| {
                preimage_into(&creator, nonce.wrapping_add(counter), &code, out)
            },
        )
    };

    let mut search = CollisionSearch::new(spec, budget);
    let d = default_distinguished_bits(bits);
    let pair = match mode {
        Vary::Field => search.cross_family(
            &field_encoder(benign),
            &field_encoder(nefarious),
            1,
            d,
            seed,
        )?,
        Vary::Nonce => search.cross_family(
            &nonce_encoder(benign),
            &nonce_encoder(nefarious),
            1,
            d,
            seed,
        )?,
    };

    let (benign_counter, nefarious_counter) = pair.counters();
    let benign_record = record_for(benign, benign_counter >> 1)?;
    let nefarious_record = record_for(nefarious, nefarious_counter >> 1)?;
    let shared_address = derive_address(&benign_record, spec)?;
    let evidence = ForgeryEvidence {
        benign: benign_record,
        nefarious: nefarious_record,
        shared_address,
        evaluations_used: pair.evaluations_used(),
        spec,
        benign_template: benign.clone(),
        nefarious_template: nefarious.clone(),
        mode,
    };
    evidence.verify()?;
    Ok(evidence)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Preparation {
    Found {
        pair: CollisionPair,
    },
    /// The search ran out of budget; every round was played honestly.
    Exhausted {
        evaluations: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeaconAttackEvidence {
    pub config: BeaconConfig,
    pub budget: u64,
    pub seed: u64,
    pub preparation: Preparation,
    pub adversary_selected: u64,
    pub frequency: f64,
    /// `2p - p^2` with `p = 1/n`.
    pub predicted_frequency: f64,
    pub honest_frequency: f64,
    pub transcripts: Vec<RoundTranscript>,
}

impl BeaconAttackEvidence {
    /// Re-verifies every transcript and the collision, and recounts the
    /// adversary's selections.
    pub fn verify(&self) -> Result<(), Error> {
        let fail = |detail: String| Err(Error::Verification(detail));
        if let Err(e) = self.config.validate() {
            return fail(format!("config: {e}"));
        }
        let Some(adversary) = self.config.adversary_index() else {
            return fail("config: no adversary".into());
        };
        if self.transcripts.is_empty() {
            return fail("no transcripts".into());
        }
        let candidates = match &self.preparation {
            Preparation::Found { pair } => {
                if let Err(e) = pair.verify(self.config.spec()) {
                    return fail(format!("collision: {e}"));
                }
                let k = self.config.reveal_bits();
                match (
                    decode_commit_preimage(None, pair.m1(), k),
                    decode_commit_preimage(None, pair.m2(), k),
                ) {
                    (Some(v), Some(w)) if v != w => Some((v, w, *pair.digest_value())),
                    _ => return fail("collision: messages are not two distinct reveals".into()),
                }
            }
            Preparation::Exhausted { .. } => None,
        };
        for (round, t) in self.transcripts.iter().enumerate() {
            if let Verdict::Reject(reason) = verify_round(t, &self.config) {
                return fail(format!("round {round}: {reason}"));
            }
            if let Some((v, w, digest)) = candidates {
                let reveal = t.reveals[adversary].value;
                if (reveal != v && reveal != w) || t.commitments[adversary].commit != digest {
                    return fail(format!(
                        "round {round}: adversary did not play the prepared pair"
                    ));
                }
            }
        }
        let selected = self
            .transcripts
            .iter()
            .filter(|t| t.proposer == adversary)
            .count() as u64;
        let frequency = selected as f64 / self.transcripts.len() as f64;
        if selected != self.adversary_selected || frequency != self.frequency {
            return fail(format!(
                "frequency: recorded {} selections, transcripts show {selected}",
                self.adversary_selected
            ));
        }
        let p = 1.0 / self.config.participants() as f64;
        if self.predicted_frequency != 2.0 * p - p * p || self.honest_frequency != p {
            return fail("prediction: recorded values do not match the model".into());
        }
        Ok(())
    }
}

/// Prepares one collision, then plays `rounds` attacked rounds. If the
/// preparation exhausts its budget the rounds are honest, giving the
/// baseline instead.
pub fn narrate_beacon_attack(
    config: &BeaconConfig,
    budget: AttackBudget,
    rounds: u64,
    seed: u64,
) -> Result<BeaconAttackEvidence, Error> {
    config.validate()?;
    if config.adversary_index().is_none() {
        return Err(Error::param("configuration has no adversary"));
    }
    if config.temporal_binding() {
        return Err(Error::param(
            "the narrated attack prepares one collision up front; disable temporal binding",
        ));
    }
    let experiment = run_bias_experiment(config, rounds, Scenario::Attacked { budget }, seed)?;
    let preparation = match experiment.prepared {
        Some(pair) => Preparation::Found { pair },
        None => Preparation::Exhausted {
            evaluations: experiment.preparation_evaluations,
        },
    };
    let report = experiment.report;
    let evidence = BeaconAttackEvidence {
        config: config.clone(),
        budget: budget.max_evaluations(),
        seed,
        preparation,
        adversary_selected: report.adversary_selected,
        frequency: report.frequency,
        predicted_frequency: report.attacked_predicted,
        honest_frequency: report.honest_expected,
        transcripts: experiment.transcripts,
    };
    evidence.verify()?;
    Ok(evidence)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvidenceBundle {
    AddressForgery(ForgeryEvidence),
    BeaconAttack(BeaconAttackEvidence),
}

#[derive(Serialize, Deserialize)]
struct BundleDocument {
    schema: String,
    #[serde(flatten)]
    bundle: EvidenceBundle,
}

impl EvidenceBundle {
    pub fn verify(&self) -> Result<(), Error> {
        match self {
            EvidenceBundle::AddressForgery(e) => e.verify(),
            EvidenceBundle::BeaconAttack(e) => e.verify(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EvidenceBundle::AddressForgery(_) => "address_forgery",
            EvidenceBundle::BeaconAttack(_) => "beacon_attack",
        }
    }

    /// One JSON document with a top-level `schema` and `kind`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&BundleDocument {
            schema: EVIDENCE_SCHEMA.to_owned(),
            bundle: self.clone(),
        })
        .expect("bundles serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, Error> {
        let doc: BundleDocument = serde_json::from_str(s)?;
        if doc.schema != EVIDENCE_SCHEMA {
            return Err(Error::Format(format!("unknown schema `{}`", doc.schema)));
        }
        Ok(doc.bundle)
    }
}
