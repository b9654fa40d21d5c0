use std::sync::atomic::{AtomicU64, Ordering};

use digestlab::collision::{
    default_distinguished_bits, expected_work, find_collision_brute, find_collision_parallel,
    find_collision_rho, find_cross_family_collision, AttackBudget, CollisionPair, CollisionSearch,
    CounterEncoder, DigestOracle, Keccak, Progress,
};
use digestlab::digest::batch::LANES;
use digestlab::digest::DigestSpec;
use digestlab::Error;
use sha3::{Digest, Keccak256};

/// Keccak through the crate, counting every call.
#[derive(Default)]
struct Counting {
    calls: AtomicU64,
}

impl DigestOracle for Counting {
    fn eval(&self, message: &[u8], bits: u32) -> u64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Keccak.eval(message, bits)
    }

    fn eval_x8(&self, messages: [&[u8]; LANES], bits: u32) -> [u64; LANES] {
        self.calls.fetch_add(LANES as u64, Ordering::Relaxed);
        Keccak.eval_x8(messages, bits)
    }
}

/// Recomputes both digests with the `sha3` crate.
fn independently_valid(pair: &CollisionPair, bits: u32) -> bool {
    let low = |m: &[u8]| {
        let d: [u8; 32] = Keccak256::digest(m).into();
        u64::from_be_bytes(d[24..].try_into().unwrap()) & ((1u64 << bits) - 1)
    };
    pair.m1() != pair.m2()
        && low(pair.m1()) == low(pair.m2())
        && Some(low(pair.m1())) == pair.digest_value().to_u64()
}

fn spec(bits: u32) -> DigestSpec {
    DigestSpec::keccak(bits).unwrap()
}

fn budget(q: u64) -> AttackBudget {
    AttackBudget::new(q).unwrap()
}

#[test]
fn all_engines_return_independently_valid_pairs() {
    for seed in 0..20 {
        let enc = CounterEncoder::seeded(seed);
        let big = budget(1 << 24);
        let brute = find_collision_brute(&enc, spec(16), big).unwrap();
        let rho = find_collision_rho(&enc, spec(16), seed, big).unwrap();
        let dp = find_collision_parallel(&enc, spec(20), 1, 5, seed, big).unwrap();
        assert!(independently_valid(&brute, 16), "brute seed {seed}");
        assert!(independently_valid(&rho, 16), "rho seed {seed}");
        assert!(independently_valid(&dp, 20), "parallel seed {seed}");
    }
}

#[test]
fn accounting_is_exact() {
    let enc = CounterEncoder::seeded(1);
    for bits in [16u32, 24] {
        let s = spec(bits);
        for workers in [1usize, 3] {
            let oracle = Counting::default();
            let pair = CollisionSearch::new(s, budget(1 << 30))
                .with_oracle(&oracle)
                .parallel(&enc, workers, default_distinguished_bits(bits), 9)
                .unwrap();
            assert_eq!(
                pair.evaluations_used(),
                oracle.calls.load(Ordering::Relaxed)
            );
        }
        let oracle = Counting::default();
        let pair = CollisionSearch::new(s, budget(1 << 30))
            .with_oracle(&oracle)
            .rho(&enc, 9)
            .unwrap();
        assert_eq!(
            pair.evaluations_used(),
            oracle.calls.load(Ordering::Relaxed)
        );
        let oracle = Counting::default();
        let pair = CollisionSearch::new(s, budget(1 << 30))
            .with_oracle(&oracle)
            .brute(&enc)
            .unwrap();
        assert_eq!(
            pair.evaluations_used(),
            oracle.calls.load(Ordering::Relaxed)
        );
    }
}

#[test]
fn exhaustion_spends_exactly_the_budget() {
    let enc = CounterEncoder::seeded(2);
    for q in [1u64, 7, 8, 9, 1000, 4097] {
        let run = |f: &dyn Fn(&Counting) -> Result<CollisionPair, Error>| {
            let oracle = Counting::default();
            let r = f(&oracle);
            (r, oracle.calls.load(Ordering::Relaxed))
        };
        let s = spec(48);
        let results = [
            run(&|o| {
                CollisionSearch::new(spec(32), budget(q))
                    .with_oracle(o)
                    .brute(&enc)
            }),
            run(&|o| {
                CollisionSearch::new(s, budget(q))
                    .with_oracle(o)
                    .rho(&enc, 0)
            }),
            run(&|o| {
                CollisionSearch::new(s, budget(q))
                    .with_oracle(o)
                    .parallel(&enc, 1, 12, 0)
            }),
            run(&|o| {
                CollisionSearch::new(s, budget(q))
                    .with_oracle(o)
                    .parallel(&enc, 4, 12, 0)
            }),
        ];
        for (i, (result, calls)) in results.into_iter().enumerate() {
            assert_eq!(
                result,
                Err(Error::Exhausted { evaluations: q }),
                "engine {i} q {q}"
            );
            assert_eq!(calls, q, "engine {i} q {q}");
        }
    }
}

#[test]
fn parameter_errors() {
    let enc = CounterEncoder::seeded(0);
    let b = budget(100);
    assert!(matches!(
        find_collision_brute(&enc, spec(33), b),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        find_collision_rho(&enc, spec(65), 0, b),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        find_collision_parallel(&enc, spec(24), 0, 6, 0, b),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        find_collision_parallel(&enc, spec(24), 1, 21, 0, b),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn searches_are_reproducible() {
    let enc = CounterEncoder::seeded(5);
    let b = budget(1 << 26);
    for workers in [1, 2, 4] {
        let a = find_collision_parallel(&enc, spec(28), workers, 7, 3, b).unwrap();
        let again = find_collision_parallel(&enc, spec(28), workers, 7, 3, b).unwrap();
        assert_eq!(a, again, "workers {workers}");
    }
    assert_eq!(
        find_collision_rho(&enc, spec(24), 3, b).unwrap(),
        find_collision_rho(&enc, spec(24), 3, b).unwrap()
    );
}

#[test]
fn cross_family_pairs_one_of_each() {
    let a = CounterEncoder::new("alpha", b"A".to_vec(), 0);
    let b = CounterEncoder::new("beta", b"B".to_vec(), 0);
    for seed in 0..10 {
        let pair = find_cross_family_collision(&a, &b, spec(24), seed, budget(1 << 26)).unwrap();
        assert!(independently_valid(&pair, 24));
        assert_eq!(pair.families(), Some(("alpha", "beta")));
        assert_eq!(pair.m1()[0], b'A');
        assert_eq!(pair.m2()[0], b'B');
    }
}

#[test]
fn progress_is_reported() {
    let enc = CounterEncoder::seeded(0);
    let mut seen = Vec::new();
    let mut sink = |p: Progress| seen.push(p.evaluations);
    let pair = CollisionSearch::new(spec(36), budget(1 << 30))
        .with_progress(&mut sink)
        .parallel(&enc, 1, 9, 0)
        .unwrap();
    assert!(!seen.is_empty());
    assert!(seen.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*seen.last().unwrap(), pair.evaluations_used());
}

fn median(mut v: Vec<u64>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    (v[(n - 1) / 2] + v[n / 2]) as f64 / 2.0
}

#[test]
fn brute_force_median_tracks_the_birthday_bound() {
    // brute force is the textbook birthday experiment
    let runs: Vec<u64> = (0..101)
        .map(|s| {
            find_collision_brute(&CounterEncoder::seeded(s), spec(20), budget(1 << 22))
                .unwrap()
                .evaluations_used()
        })
        .collect();
    // median of the first-collision time is sqrt(2 ln 2 * 2^t)
    let expected = (2.0 * std::f64::consts::LN_2 * (1u64 << 20) as f64).sqrt();
    let ratio = median(runs) / expected;
    assert!((0.8..1.25).contains(&ratio), "ratio {ratio}");
    assert!(expected_work(20) > expected);
}
