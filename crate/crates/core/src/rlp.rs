//! Recursive Length Prefix encoding of byte strings and nested lists.
//!
//! The decoder accepts only canonical encodings: no trailing bytes, minimal
//! length prefixes, and no `0x81` wrapper around a byte below `0x80`. Every
//! byte sequence therefore decodes to at most one item, and every item has
//! exactly one encoding.

use std::fmt;

use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum RlpItem {
    Bytes(Vec<u8>),
    List(Vec<RlpItem>),
}

impl RlpItem {
    pub fn bytes(b: impl Into<Vec<u8>>) -> Self {
        RlpItem::Bytes(b.into())
    }

    pub fn list(items: impl Into<Vec<RlpItem>>) -> Self {
        RlpItem::List(items.into())
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            RlpItem::Bytes(b) => Some(b),
            RlpItem::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[RlpItem]> {
        match self {
            RlpItem::Bytes(_) => None,
            RlpItem::List(items) => Some(items),
        }
    }

    /// Length of [`encode`]'s output, computed from the length rules alone.
    pub fn encoded_len(&self) -> usize {
        match self {
            RlpItem::Bytes(b) if b.len() == 1 && b[0] < 0x80 => 1,
            RlpItem::Bytes(b) => header_len(b.len()) + b.len(),
            RlpItem::List(items) => {
                let payload: usize = items.iter().map(RlpItem::encoded_len).sum();
                header_len(payload) + payload
            }
        }
    }
}

impl fmt::Debug for RlpItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RlpItem::Bytes(b) => write!(f, "0x{}", hex::encode(b)),
            RlpItem::List(items) => f.debug_list().entries(items).finish(),
        }
    }
}

fn header_len(payload: usize) -> usize {
    if payload <= 55 {
        1
    } else {
        1 + be_len(payload)
    }
}

fn be_len(n: usize) -> usize {
    (usize::BITS - n.leading_zeros()).div_ceil(8) as usize
}

fn push_header(out: &mut Vec<u8>, short_base: u8, long_base: u8, len: usize) {
    if len <= 55 {
        out.push(short_base + len as u8);
    } else {
        let width = be_len(len);
        out.push(long_base + width as u8);
        out.extend_from_slice(&len.to_be_bytes()[std::mem::size_of::<usize>() - width..]);
    }
}

pub fn encode(item: &RlpItem) -> Vec<u8> {
    let mut out = Vec::with_capacity(item.encoded_len());
    encode_into(item, &mut out);
    out
}

pub fn encode_into(item: &RlpItem, out: &mut Vec<u8>) {
    match item {
        RlpItem::Bytes(b) => encode_bytes_into(b, out),
        RlpItem::List(items) => {
            let payload: usize = items.iter().map(RlpItem::encoded_len).sum();
            push_header(out, 0xc0, 0xf7, payload);
            for item in items {
                encode_into(item, out);
            }
        }
    }
}

/// Encodes a byte string without building an [`RlpItem`].
pub fn encode_bytes_into(b: &[u8], out: &mut Vec<u8>) {
    if b.len() == 1 && b[0] < 0x80 {
        out.push(b[0]);
    } else {
        push_header(out, 0x80, 0xb7, b.len());
        out.extend_from_slice(b);
    }
}

/// Appends a list header for a payload of `payload_len` bytes.
pub fn encode_list_header_into(payload_len: usize, out: &mut Vec<u8>) {
    push_header(out, 0xc0, 0xf7, payload_len);
}

/// Minimal big-endian bytes of `n`; zero is the empty string.
pub fn uint_bytes(n: u64) -> Vec<u8> {
    let bytes = n.to_be_bytes();
    let skip = (n.leading_zeros() / 8) as usize;
    bytes[skip..].to_vec()
}

pub fn encode_uint(n: u64) -> RlpItem {
    RlpItem::Bytes(uint_bytes(n))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("rlp decode error at byte {offset}: {kind}")]
pub struct RlpError {
    pub offset: usize,
    pub kind: RlpErrorKind,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RlpErrorKind {
    #[error("input ends before the declared length")]
    Truncated,
    #[error("trailing bytes after the top-level item")]
    TrailingBytes,
    #[error("single byte below 0x80 wrapped in a string header")]
    NonCanonicalSingleByte,
    #[error("long-form length used for a payload of 55 bytes or fewer")]
    NonCanonicalLongForm,
    #[error("length prefix has leading zero bytes")]
    LeadingZeroLength,
    #[error("empty input")]
    Empty,
}

fn fail(offset: usize, kind: RlpErrorKind) -> RlpError {
    RlpError { offset, kind }
}

pub fn decode(bytes: &[u8]) -> Result<RlpItem, RlpError> {
    if bytes.is_empty() {
        return Err(fail(0, RlpErrorKind::Empty));
    }
    let (item, used) = decode_at(bytes, 0)?;
    if used != bytes.len() {
        return Err(fail(used, RlpErrorKind::TrailingBytes));
    }
    Ok(item)
}

/// Decodes the item starting at `pos`; returns it with the offset just past it.
fn decode_at(bytes: &[u8], pos: usize) -> Result<(RlpItem, usize), RlpError> {
    let prefix = *bytes.get(pos).ok_or(fail(pos, RlpErrorKind::Truncated))?;
    match prefix {
        0x00..=0x7f => Ok((RlpItem::Bytes(vec![prefix]), pos + 1)),
        0x80..=0xbf => {
            let (start, len) = payload_bounds(bytes, pos, prefix, 0x80, 0xb7)?;
            let payload = &bytes[start..start + len];
            if len == 1 && payload[0] < 0x80 {
                return Err(fail(pos, RlpErrorKind::NonCanonicalSingleByte));
            }
            Ok((RlpItem::Bytes(payload.to_vec()), start + len))
        }
        0xc0..=0xff => {
            let (start, len) = payload_bounds(bytes, pos, prefix, 0xc0, 0xf7)?;
            let end = start + len;
            let mut items = Vec::new();
            let mut cursor = start;
            while cursor < end {
                let (item, next) = decode_at(&bytes[..end], cursor)?;
                items.push(item);
                cursor = next;
            }
            Ok((RlpItem::List(items), end))
        }
    }
}

fn payload_bounds(
    bytes: &[u8],
    pos: usize,
    prefix: u8,
    short_base: u8,
    long_base: u8,
) -> Result<(usize, usize), RlpError> {
    let (start, len) = if prefix <= long_base {
        (pos + 1, (prefix - short_base) as usize)
    } else {
        let width = (prefix - long_base) as usize;
        let len_bytes = bytes
            .get(pos + 1..pos + 1 + width)
            .ok_or(fail(pos + 1, RlpErrorKind::Truncated))?;
        if len_bytes[0] == 0 {
            return Err(fail(pos + 1, RlpErrorKind::LeadingZeroLength));
        }
        if width > std::mem::size_of::<usize>() {
            return Err(fail(pos + 1, RlpErrorKind::Truncated));
        }
        let len = len_bytes
            .iter()
            .fold(0usize, |acc, &b| (acc << 8) | b as usize);
        if len <= 55 {
            return Err(fail(pos, RlpErrorKind::NonCanonicalLongForm));
        }
        (pos + 1 + width, len)
    };
    if bytes.len() < start || bytes.len() - start < len {
        return Err(fail(start.min(bytes.len()), RlpErrorKind::Truncated));
    }
    Ok((start, len))
}
