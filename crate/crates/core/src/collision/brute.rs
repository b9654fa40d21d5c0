use std::collections::HashMap;

use super::{AttackBudget, CollisionPair, CollisionSearch, DigestOracle, MessageEncoder};
use crate::digest::DigestSpec;
use crate::error::Error;

/// Widest digest the table-based search accepts (the table can reach `2^t` entries).
pub const BRUTE_MAX_BITS: u32 = 32;

/// Hashes `encode(0), encode(1), ...` until a truncated digest repeats.
pub fn find_collision_brute(
    encoder: &dyn MessageEncoder,
    spec: DigestSpec,
    budget: AttackBudget,
) -> Result<CollisionPair, Error> {
    CollisionSearch::new(spec, budget).brute(encoder)
}

impl<O: DigestOracle> CollisionSearch<'_, O> {
    pub fn brute(&mut self, encoder: &dyn MessageEncoder) -> Result<CollisionPair, Error> {
        let bits = self.spec.truncation_bits();
        if bits > BRUTE_MAX_BITS {
            return Err(Error::param(format!(
                "brute-force search is limited to {BRUTE_MAX_BITS} bits, got {bits}"
            )));
        }
        let limit = self.budget.max_evaluations();
        let mut seen: HashMap<u64, u64> = HashMap::new();
        let mut buf = Vec::new();
        let mut counter = 0u64;
        while counter < limit {
            buf.clear();
            encoder.encode_into(counter, &mut buf);
            let d = self.oracle.eval(&buf, bits);
            let evaluations = counter + 1;
            if let Some(&earlier) = seen.get(&d) {
                let first = encoder.encode(earlier);
                if first != buf {
                    self.report(super::Progress {
                        evaluations,
                        trails_stored: seen.len() as u64,
                    });
                    return Ok(CollisionPair::new(
                        first,
                        buf,
                        self.digest_of(d),
                        evaluations,
                        (earlier, counter),
                        None,
                    ));
                }
            } else {
                seen.insert(d, counter);
            }
            counter += 1;
        }
        Err(Error::Exhausted { evaluations: limit })
    }
}
