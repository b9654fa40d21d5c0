use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttackBudget, CollisionPair, CollisionSearch, DigestOracle, MessageEncoder, Progress};
use crate::digest::{low_mask, DigestSpec};
use crate::error::Error;

/// Single-walk Pollard rho with Brent cycle detection. Deterministic in
/// `(encoder, spec, seed)`.
pub fn find_collision_rho(
    encoder: &dyn MessageEncoder,
    spec: DigestSpec,
    seed: u64,
    budget: AttackBudget,
) -> Result<CollisionPair, Error> {
    CollisionSearch::new(spec, budget).rho(encoder, seed)
}

/// `x -> h_t(encode(x))` with a running evaluation count capped by the budget.
pub(super) struct Walk<'a, O: DigestOracle> {
    oracle: &'a O,
    encode: &'a (dyn Fn(u64, &mut Vec<u8>) + Sync),
    bits: u32,
    limit: u64,
    pub(super) evaluations: u64,
    buf: Vec<u8>,
}

impl<'a, O: DigestOracle> Walk<'a, O> {
    pub(super) fn new(
        oracle: &'a O,
        encode: &'a (dyn Fn(u64, &mut Vec<u8>) + Sync),
        bits: u32,
        limit: u64,
        evaluations: u64,
    ) -> Self {
        Self {
            oracle,
            encode,
            bits,
            limit,
            evaluations,
            buf: Vec::new(),
        }
    }

    pub(super) fn step(&mut self, x: u64) -> Result<u64, Error> {
        if self.evaluations >= self.limit {
            return Err(Error::Exhausted {
                evaluations: self.evaluations,
            });
        }
        self.evaluations += 1;
        self.buf.clear();
        (self.encode)(x, &mut self.buf);
        Ok(self.oracle.eval(&self.buf, self.bits))
    }
}

/// Outcome of one rho walk.
enum Attempt {
    Found(u64, u64, u64),
    /// The start point lies on its own cycle; no tail means no collision.
    Degenerate,
}

impl<O: DigestOracle> CollisionSearch<'_, O> {
    pub fn rho(&mut self, encoder: &dyn MessageEncoder, seed: u64) -> Result<CollisionPair, Error> {
        let bits = self.walk_bits()?;
        let encode = |x: u64, out: &mut Vec<u8>| encoder.encode_into(x, out);
        let mut walk = Walk::new(self.oracle, &encode, bits, self.budget.max_evaluations(), 0);
        let mut attempt_seed = seed;
        loop {
            let start = ChaCha8Rng::seed_from_u64(attempt_seed).next_u64() & low_mask(bits);
            match brent(&mut walk, start)? {
                Attempt::Found(a, b, d) => {
                    let (m1, m2) = (encoder.encode(a), encoder.encode(b));
                    if m1 != m2 {
                        let evaluations = walk.evaluations;
                        self.report(Progress {
                            evaluations,
                            trails_stored: 0,
                        });
                        return Ok(CollisionPair::new(
                            m1,
                            m2,
                            self.digest_of(d),
                            evaluations,
                            (a, b),
                            None,
                        ));
                    }
                }
                Attempt::Degenerate => {}
            }
            attempt_seed = attempt_seed.wrapping_add(1);
        }
    }
}

/// Finds the cycle length with Brent's power-of-two search, then locates the
/// entry of the cycle, where two distinct inputs map to the same value.
///
/// Each finished Brent epoch that watched `power` steps past its checkpoint
/// without returning proves the checkpoint lies on the tail whenever the
/// cycle length is at most `power`. The entry search starts from the latest
/// such checkpoint instead of from the beginning of the walk.
fn brent<O: DigestOracle>(walk: &mut Walk<'_, O>, start: u64) -> Result<Attempt, Error> {
    let mut checkpoints: Vec<(u64, u64)> = Vec::new(); // (value, epoch length)
    let mut power = 1u64;
    let mut lambda = 1u64;
    let mut tortoise = start;
    let mut hare = walk.step(start)?;
    while tortoise != hare {
        if power == lambda {
            checkpoints.push((tortoise, power));
            tortoise = hare;
            power *= 2;
            lambda = 0;
        }
        hare = walk.step(hare)?;
        lambda += 1;
    }

    let from = checkpoints
        .iter()
        .rev()
        .find(|&&(_, epoch)| epoch >= lambda)
        .map_or(start, |&(value, _)| value);

    let mut a = from;
    let mut b = from;
    for _ in 0..lambda {
        b = walk.step(b)?;
    }
    if a == b {
        return Ok(Attempt::Degenerate);
    }
    loop {
        let fa = walk.step(a)?;
        let fb = walk.step(b)?;
        if fa == fb {
            return Ok(Attempt::Found(a, b, fa));
        }
        a = fa;
        b = fb;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::CounterEncoder;

    #[test]
    fn finds_valid_pairs_at_sixteen_bits() {
        let spec = DigestSpec::keccak(16).unwrap();
        let budget = AttackBudget::new(1_000_000).unwrap();
        for seed in 0..10 {
            let pair =
                find_collision_rho(&CounterEncoder::seeded(seed), spec, seed, budget).unwrap();
            pair.verify(spec).unwrap();
            let (a, b) = pair.counters();
            assert_ne!(a, b);
            assert!(a < 1 << 16 && b < 1 << 16);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = DigestSpec::keccak(20).unwrap();
        let enc = CounterEncoder::seeded(5);
        let budget = AttackBudget::new(1 << 24).unwrap();
        let first = find_collision_rho(&enc, spec, 11, budget).unwrap();
        let second = find_collision_rho(&enc, spec, 11, budget).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn exhausts_on_tiny_budget() {
        let spec = DigestSpec::keccak(32).unwrap();
        let err = find_collision_rho(
            &CounterEncoder::seeded(0),
            spec,
            0,
            AttackBudget::new(100).unwrap(),
        )
        .unwrap_err();
        assert_eq!(err, Error::Exhausted { evaluations: 100 });
    }

    #[test]
    fn degenerate_start_on_cycle_restarts() {
        // A two-element cycle reached immediately: f(0)=1, f(1)=0, and every
        // other point feeds into 0. Starting anywhere on the cycle is
        // degenerate; the tail entry is found from any other start.
        struct Toy;
        impl DigestOracle for Toy {
            fn eval(&self, message: &[u8], _bits: u32) -> u64 {
                match u64::from_be_bytes(message.try_into().unwrap()) {
                    0 => 1,
                    _ => 0,
                }
            }
        }
        let encode = |x: u64, out: &mut Vec<u8>| out.extend_from_slice(&x.to_be_bytes());
        let mut walk = Walk::new(&Toy, &encode, 8, 100, 0);
        assert!(matches!(brent(&mut walk, 0).unwrap(), Attempt::Degenerate));
        let mut walk = Walk::new(&Toy, &encode, 8, 100, 0);
        match brent(&mut walk, 7).unwrap() {
            Attempt::Found(a, b, d) => {
                assert_eq!(d, 0);
                assert_eq!((a.min(b), a.max(b)), (1, 7));
            }
            Attempt::Degenerate => panic!("tail exists"),
        }
    }
}
