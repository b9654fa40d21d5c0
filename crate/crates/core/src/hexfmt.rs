//! `0x`-prefixed lowercase hex, the one textual byte format used throughout.

use crate::error::Error;

pub fn encode(bytes: &[u8]) -> String {
    format!("0x{}", hex::encode(bytes))
}

/// Accepts an optional `0x` prefix and either letter case.
pub fn decode(s: &str) -> Result<Vec<u8>, Error> {
    let digits = s.strip_prefix("0x").unwrap_or(s);
    hex::decode(digits).map_err(|e| Error::param(format!("bad hex `{s}`: {e}")))
}

/// Serde adapter for `Vec<u8>` fields.
pub mod serde_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        super::decode(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Option<Vec<u8>>` fields.
pub mod serde_opt_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match bytes {
            Some(b) => s.serialize_str(&super::encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| super::decode(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Serde adapter for [`TruncatedDigest`](crate::digest::TruncatedDigest):
/// `{"value": "0x..", "width": t}`.
pub mod serde_truncated {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::digest::TruncatedDigest;

    #[derive(Serialize, Deserialize)]
    struct Raw {
        value: String,
        width: u32,
    }

    pub fn serialize<S: Serializer>(d: &TruncatedDigest, s: S) -> Result<S::Ok, S::Error> {
        Raw {
            value: d.to_hex(),
            width: d.width(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<TruncatedDigest, D::Error> {
        let raw = Raw::deserialize(d)?;
        TruncatedDigest::from_hex(&raw.value, raw.width).map_err(serde::de::Error::custom)
    }
}
