//! Distinguished-point collision search.
//!
//! Each worker owns eight walks that advance in lockstep through
//! [`DigestOracle::eval_x8`]. A walk ends when its value has its low
//! `distinguished_bits` bits clear; the trail `(start, length, endpoint)` is
//! then queued and a fresh walk starts from a seeded random point. Two trails
//! with the same endpoint have merged, so re-walking them from their starts
//! exposes the colliding step.
//!
//! Workers run in epochs of a fixed number of evaluations. At each epoch
//! boundary the queued trails are merged into the table in worker order, so
//! a search with a given seed and worker count always takes the same path,
//! independent of thread timing. A collision found at a boundary stops every
//! worker before the next epoch.

use std::collections::{HashMap, VecDeque};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rho::Walk;
use super::{AttackBudget, CollisionPair, CollisionSearch, DigestOracle, MessageEncoder, Progress};
use crate::digest::batch::LANES;
use crate::digest::{low_mask, DigestSpec};
use crate::error::Error;

/// Trail-table capacity; the oldest trails are evicted beyond this.
pub const TRAIL_TABLE_CAPACITY: usize = 1 << 22;

/// Walks longer than this multiple of the mean trail length are abandoned
/// (they are almost certainly stuck in a cycle with no distinguished point).
const MAX_TRAIL_FACTOR: u64 = 20;

const PROGRESS_INTERVAL: u64 = 1 << 16;

/// `max(4, floor(t / 4))`.
pub fn default_distinguished_bits(bits: u32) -> u32 {
    (bits / 4).max(4)
}

pub fn find_collision_parallel(
    encoder: &dyn MessageEncoder,
    spec: DigestSpec,
    workers: usize,
    distinguished_bits: u32,
    seed: u64,
    budget: AttackBudget,
) -> Result<CollisionPair, Error> {
    CollisionSearch::new(spec, budget).parallel(encoder, workers, distinguished_bits, seed)
}

/// Searches the union of two message families for a collision with one
/// message from each. The low bit of a walk value picks the family and the
/// remaining bits are that family's counter.
pub fn find_cross_family_collision(
    family_a: &dyn MessageEncoder,
    family_b: &dyn MessageEncoder,
    spec: DigestSpec,
    seed: u64,
    budget: AttackBudget,
) -> Result<CollisionPair, Error> {
    let bits = spec.truncation_bits();
    CollisionSearch::new(spec, budget).cross_family(
        family_a,
        family_b,
        1,
        default_distinguished_bits(bits),
        seed,
    )
}

impl<O: DigestOracle> CollisionSearch<'_, O> {
    pub fn parallel(
        &mut self,
        encoder: &dyn MessageEncoder,
        workers: usize,
        distinguished_bits: u32,
        seed: u64,
    ) -> Result<CollisionPair, Error> {
        let encode = |x: u64, out: &mut Vec<u8>| encoder.encode_into(x, out);
        let found = self.distinguished_point_search(
            &encode,
            workers,
            distinguished_bits,
            seed,
            &|a, b| encoder.encode(a) != encoder.encode(b),
        )?;
        Ok(CollisionPair::new(
            encoder.encode(found.a),
            encoder.encode(found.b),
            self.digest_of(found.digest),
            found.evaluations,
            (found.a, found.b),
            None,
        ))
    }

    pub fn cross_family(
        &mut self,
        family_a: &dyn MessageEncoder,
        family_b: &dyn MessageEncoder,
        workers: usize,
        distinguished_bits: u32,
        seed: u64,
    ) -> Result<CollisionPair, Error> {
        let message = |x: u64| {
            if x & 1 == 0 {
                family_a.encode(x >> 1)
            } else {
                family_b.encode(x >> 1)
            }
        };
        let encode = |x: u64, out: &mut Vec<u8>| {
            if x & 1 == 0 {
                family_a.encode_into(x >> 1, out)
            } else {
                family_b.encode_into(x >> 1, out)
            }
        };
        let found = self.distinguished_point_search(
            &encode,
            workers,
            distinguished_bits,
            seed,
            &|a, b| (a ^ b) & 1 == 1 && message(a) != message(b),
        )?;
        let (a, b) = if found.a & 1 == 0 {
            (found.a, found.b)
        } else {
            (found.b, found.a)
        };
        Ok(CollisionPair::new(
            message(a),
            message(b),
            self.digest_of(found.digest),
            found.evaluations,
            (a, b),
            Some((family_a.label().to_owned(), family_b.label().to_owned())),
        ))
    }

    /// Runs the epoch loop until a merge yields a pair that `accept` allows.
    pub(crate) fn distinguished_point_search(
        &mut self,
        encode: &(dyn Fn(u64, &mut Vec<u8>) + Sync),
        workers: usize,
        distinguished_bits: u32,
        seed: u64,
        accept: &dyn Fn(u64, u64) -> bool,
    ) -> Result<Found, Error> {
        let bits = self.walk_bits()?;
        if workers == 0 {
            return Err(Error::param("at least one worker is required"));
        }
        if bits < 4 || distinguished_bits > bits - 4 {
            return Err(Error::param(format!(
                "distinguished_bits must be at most t - 4 = {}, got {distinguished_bits}",
                bits.saturating_sub(4)
            )));
        }

        let config = WalkConfig {
            bits,
            mask: low_mask(bits),
            distinguished_mask: low_mask(distinguished_bits.max(1))
                * (distinguished_bits > 0) as u64,
            max_trail_len: MAX_TRAIL_FACTOR << distinguished_bits,
        };
        let limit = self.budget.max_evaluations();
        let epoch_quota = epoch_quota(bits, workers);
        let mut states: Vec<WorkerState> = (0..workers)
            .map(|w| WorkerState::new(seed, w as u64, &config))
            .collect();
        let mut table = TrailTable::new(TRAIL_TABLE_CAPACITY);
        let mut evaluations = 0u64;
        let mut next_report = PROGRESS_INTERVAL;

        while evaluations < limit {
            let remaining = limit - evaluations;
            let oracle = self.oracle;
            if workers == 1 {
                let quota = remaining.min(epoch_quota);
                states[0].advance(quota, oracle, encode, &config);
                evaluations += quota;
            } else {
                let quotas: Vec<u64> = (0..workers as u64)
                    .map(|w| {
                        let share =
                            remaining / workers as u64 + u64::from(w < remaining % workers as u64);
                        share.min(epoch_quota)
                    })
                    .collect();
                std::thread::scope(|scope| {
                    for (state, &quota) in states.iter_mut().zip(&quotas) {
                        if quota > 0 {
                            let config = &config;
                            scope.spawn(move || state.advance(quota, oracle, encode, config));
                        }
                    }
                });
                evaluations += quotas.iter().sum::<u64>();
            }

            for state in &mut states {
                for trail in state.finished.drain(..) {
                    let Some(previous) = table.insert(trail) else {
                        continue;
                    };
                    if previous.start == trail.start {
                        continue;
                    }
                    let mut walk = Walk::new(oracle, encode, bits, limit, evaluations);
                    let merged = locate_merge(&mut walk, previous, trail);
                    evaluations = walk.evaluations;
                    match merged? {
                        Some((a, b, digest)) if accept(a, b) => {
                            self.report(Progress {
                                evaluations,
                                trails_stored: table.len() as u64,
                            });
                            return Ok(Found {
                                a,
                                b,
                                digest,
                                evaluations,
                            });
                        }
                        _ => {}
                    }
                }
            }

            if evaluations >= next_report {
                self.report(Progress {
                    evaluations,
                    trails_stored: table.len() as u64,
                });
                next_report = evaluations + PROGRESS_INTERVAL;
            }
        }
        Err(Error::Exhausted { evaluations })
    }
}

pub(crate) struct Found {
    pub(crate) a: u64,
    pub(crate) b: u64,
    pub(crate) digest: u64,
    pub(crate) evaluations: u64,
}

/// Evaluations each worker performs between merges. A lone worker merges
/// after every lockstep batch; with several workers the epoch grows with the
/// expected work so thread start-up stays a small fraction of it.
fn epoch_quota(bits: u32, workers: usize) -> u64 {
    if workers == 1 {
        return LANES as u64;
    }
    let per_worker = super::expected_work(bits) / (32.0 * workers as f64);
    (per_worker as u64).clamp(LANES as u64 * 16, LANES as u64 * 4096) / LANES as u64 * LANES as u64
}

struct WalkConfig {
    bits: u32,
    mask: u64,
    distinguished_mask: u64,
    max_trail_len: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Trail {
    start: u64,
    length: u64,
    end: u64,
}

#[derive(Clone, Copy)]
struct LaneWalk {
    start: u64,
    current: u64,
    length: u64,
}

struct WorkerState {
    rng: ChaCha8Rng,
    lanes: [LaneWalk; LANES],
    buffers: [Vec<u8>; LANES],
    finished: Vec<Trail>,
}

impl WorkerState {
    fn new(seed: u64, worker: u64, config: &WalkConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(worker);
        let lanes = std::array::from_fn(|_| {
            let start = rng.next_u64() & config.mask;
            LaneWalk {
                start,
                current: start,
                length: 0,
            }
        });
        Self {
            rng,
            lanes,
            buffers: Default::default(),
            finished: Vec::new(),
        }
    }

    /// Performs exactly `quota` evaluations.
    fn advance<O: DigestOracle>(
        &mut self,
        mut quota: u64,
        oracle: &O,
        encode: &(dyn Fn(u64, &mut Vec<u8>) + Sync),
        config: &WalkConfig,
    ) {
        while quota > 0 {
            let active = quota.min(LANES as u64) as usize;
            for (lane, buf) in self.lanes.iter().zip(self.buffers.iter_mut()).take(active) {
                buf.clear();
                encode(lane.current, buf);
            }
            let next = if active == LANES {
                oracle.eval_x8(
                    std::array::from_fn(|i| self.buffers[i].as_slice()),
                    config.bits,
                )
            } else {
                let mut out = [0u64; LANES];
                for (o, buf) in out.iter_mut().zip(&self.buffers).take(active) {
                    *o = oracle.eval(buf, config.bits);
                }
                out
            };
            for (i, &value) in next.iter().enumerate().take(active) {
                self.advance_lane(i, value, config);
            }
            quota -= active as u64;
        }
    }

    fn advance_lane(&mut self, i: usize, value: u64, config: &WalkConfig) {
        let lane = &mut self.lanes[i];
        lane.current = value;
        lane.length += 1;
        let distinguished = value & config.distinguished_mask == 0;
        if distinguished || lane.length >= config.max_trail_len {
            if distinguished {
                self.finished.push(Trail {
                    start: lane.start,
                    length: lane.length,
                    end: value,
                });
            }
            let start = self.rng.next_u64() & config.mask;
            *lane = LaneWalk {
                start,
                current: start,
                length: 0,
            };
        }
    }
}

/// Endpoint -> trail, bounded, evicting the oldest entries first.
struct TrailTable {
    entries: HashMap<u64, (Trail, u64)>,
    order: VecDeque<(u64, u64)>,
    capacity: usize,
    sequence: u64,
}

impl TrailTable {
    fn new(capacity: usize) -> Self {
        Self {
            entries: HashMap::new(),
            order: VecDeque::new(),
            capacity,
            sequence: 0,
        }
    }

    fn len(&self) -> usize {
        self.entries.len()
    }

    /// Stores `trail`, returning the trail previously stored at its endpoint.
    fn insert(&mut self, trail: Trail) -> Option<Trail> {
        self.sequence += 1;
        let previous = self
            .entries
            .insert(trail.end, (trail, self.sequence))
            .map(|(t, _)| t);
        self.order.push_back((trail.end, self.sequence));
        while self.entries.len() > self.capacity {
            let Some((end, seq)) = self.order.pop_front() else {
                break;
            };
            if self.entries.get(&end).is_some_and(|&(_, s)| s == seq) {
                self.entries.remove(&end);
            }
        }
        // Stale order entries for replaced trails are dropped lazily.
        if self.order.len() > 2 * self.capacity.max(1) {
            let entries = &self.entries;
            self.order
                .retain(|(end, seq)| entries.get(end).is_some_and(|&(_, s)| s == *seq));
        }
        previous
    }
}

/// Re-walks two trails with a common endpoint to the step where they merge.
/// Returns `None` when one trail starts on the other (no collision exists).
fn locate_merge<O: DigestOracle>(
    walk: &mut Walk<'_, O>,
    first: Trail,
    second: Trail,
) -> Result<Option<(u64, u64, u64)>, Error> {
    let (mut a, mut a_len) = (first.start, first.length);
    let (mut b, mut b_len) = (second.start, second.length);
    while a_len > b_len {
        a = walk.step(a)?;
        a_len -= 1;
    }
    while b_len > a_len {
        b = walk.step(b)?;
        b_len -= 1;
    }
    while a_len > 0 {
        if a == b {
            return Ok(None);
        }
        let fa = walk.step(a)?;
        let fb = walk.step(b)?;
        if fa == fb {
            return Ok(Some((a, b, fa)));
        }
        a = fa;
        b = fb;
        a_len -= 1;
    }
    Ok(None)
}
