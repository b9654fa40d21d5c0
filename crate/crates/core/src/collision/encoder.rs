use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The attacker-controlled message space: an injective map from counters to
/// byte strings.
pub trait MessageEncoder: Sync {
    /// Appends the message for `counter` to `out`.
    fn encode_into(&self, counter: u64, out: &mut Vec<u8>);

    fn label(&self) -> &str;

    fn encode(&self, counter: u64) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(counter, &mut out);
        out
    }
}

impl<E: MessageEncoder + ?Sized> MessageEncoder for &E {
    fn encode_into(&self, counter: u64, out: &mut Vec<u8>) {
        (**self).encode_into(counter, out)
    }

    fn label(&self) -> &str {
        (**self).label()
    }
}

/// `prefix || be64(counter + offset)`. Injective because the wrapping add is
/// a bijection on `u64`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterEncoder {
    label: String,
    prefix: Vec<u8>,
    offset: u64,
}

impl CounterEncoder {
    pub fn new(label: impl Into<String>, prefix: Vec<u8>, offset: u64) -> Self {
        Self {
            label: label.into(),
            prefix,
            offset,
        }
    }

    /// An encoder with a seed-derived offset, so different seeds search
    /// unrelated message spaces.
    pub fn seeded(seed: u64) -> Self {
        let offset = ChaCha8Rng::seed_from_u64(seed).next_u64();
        Self::new("counter", b"digestlab".to_vec(), offset)
    }
}

impl MessageEncoder for CounterEncoder {
    fn encode_into(&self, counter: u64, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.prefix);
        out.extend_from_slice(&counter.wrapping_add(self.offset).to_be_bytes());
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// Wraps a closure. The closure must be injective on the counters searched.
pub struct FnEncoder<F> {
    label: String,
    f: F,
}

impl<F: Fn(u64, &mut Vec<u8>) + Sync> FnEncoder<F> {
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self {
            label: label.into(),
            f,
        }
    }
}

impl<F: Fn(u64, &mut Vec<u8>) + Sync> MessageEncoder for FnEncoder<F> {
    fn encode_into(&self, counter: u64, out: &mut Vec<u8>) {
        (self.f)(counter, out)
    }

    fn label(&self) -> &str {
        &self.label
    }
}
