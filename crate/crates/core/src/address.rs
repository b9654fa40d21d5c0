//! Contract addresses: `keccak256(rlp([creator, nonce, initcode])) mod 2^t`.
//!
//! The three fields are encoded as an RLP list, the same shape Ethereum uses
//! for `rlp([sender, nonce])`. At `t = 160` this is the 20-byte address.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::digest::{truncated_digest, DigestSpec, TruncatedDigest};
use crate::error::Error;
use crate::rlp;

pub const MAX_INITCODE_LEN: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeploymentRecord {
    #[serde(with = "crate::hexfmt::serde_bytes")]
    creator: Vec<u8>,
    nonce: u64,
    #[serde(with = "crate::hexfmt::serde_bytes")]
    initcode: Vec<u8>,
}

impl DeploymentRecord {
    pub fn new(creator: [u8; 20], nonce: u64, initcode: Vec<u8>) -> Result<Self, Error> {
        let record = Self {
            creator: creator.to_vec(),
            nonce,
            initcode,
        };
        record.validate()?;
        Ok(record)
    }

    /// Checks the invariants; needed after deserializing untrusted documents.
    pub fn validate(&self) -> Result<(), Error> {
        if self.creator.len() != 20 {
            return Err(Error::param(format!(
                "creator must be 20 bytes, got {}",
                self.creator.len()
            )));
        }
        if self.initcode.len() > MAX_INITCODE_LEN {
            return Err(Error::param(format!(
                "initcode is {} bytes, limit is {MAX_INITCODE_LEN}",
                self.initcode.len()
            )));
        }
        Ok(())
    }

    pub fn creator(&self) -> &[u8] {
        &self.creator
    }

    pub fn nonce(&self) -> u64 {
        self.nonce
    }

    pub fn initcode(&self) -> &[u8] {
        &self.initcode
    }
}

/// A derived address and the width it was derived at.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct AddressValue(TruncatedDigest);

impl AddressValue {
    pub fn value(&self) -> &TruncatedDigest {
        &self.0
    }

    pub fn width(&self) -> u32 {
        self.0.width()
    }

    /// `0x` + `ceil(t/8)` bytes of hex.
    pub fn to_hex(&self) -> String {
        self.0.to_hex()
    }
}

impl Serialize for AddressValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        crate::hexfmt::serde_truncated::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for AddressValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        crate::hexfmt::serde_truncated::deserialize(d).map(AddressValue)
    }
}

impl fmt::Debug for AddressValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AddressValue({}, {} bits)", self.to_hex(), self.width())
    }
}

impl fmt::Display for AddressValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Appends `rlp([creator, nonce, initcode])` to `out`.
pub(crate) fn preimage_into(creator: &[u8], nonce: u64, initcode: &[u8], out: &mut Vec<u8>) {
    let nonce_bytes = nonce.to_be_bytes();
    let nonce_min = &nonce_bytes[(nonce.leading_zeros() / 8) as usize..];
    let field_len = |b: &[u8]| {
        if b.len() == 1 && b[0] < 0x80 {
            1
        } else if b.len() <= 55 {
            1 + b.len()
        } else {
            1 + (usize::BITS - b.len().leading_zeros()).div_ceil(8) as usize + b.len()
        }
    };
    let payload = field_len(creator) + field_len(nonce_min) + field_len(initcode);
    rlp::encode_list_header_into(payload, out);
    rlp::encode_bytes_into(creator, out);
    rlp::encode_bytes_into(nonce_min, out);
    rlp::encode_bytes_into(initcode, out);
}

/// The exact bytes whose digest is the address.
pub fn address_preimage_bytes(record: &DeploymentRecord) -> Vec<u8> {
    let mut out = Vec::with_capacity(record.initcode.len() + 40);
    preimage_into(&record.creator, record.nonce, &record.initcode, &mut out);
    out
}

pub fn derive_address(record: &DeploymentRecord, spec: DigestSpec) -> Result<AddressValue, Error> {
    record.validate()?;
    Ok(AddressValue(truncated_digest(
        &address_preimage_bytes(record),
        spec,
    )))
}
