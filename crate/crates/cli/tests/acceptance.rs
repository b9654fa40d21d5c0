//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p digestlab-cli --test acceptance`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use digestlab::address::derive_address;
use digestlab::beacon::{adversary_prepare, measure_bias, BeaconConfig, Scenario};
use digestlab::collision::{
    find_collision_brute, find_collision_parallel, find_collision_rho, success_probability,
    AttackBudget, CollisionPair, CounterEncoder,
};
use digestlab::digest::{keccak256, DigestSpec};
use digestlab::mitigation::{
    run_scaling_study, run_temporal_study, Metric, ScalingStudyConfig, Searcher, StudyReport,
    TemporalStudyConfig,
};
use digestlab::rlp::{decode, encode, encode_uint, RlpItem};
use digestlab::scenarios::{
    forge_address_collision, ContractTemplate, EvidenceBundle, TemplateLabel, Vary,
};
use digestlab::Error;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use sha3::{Digest, Keccak256};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn spec(bits: u32) -> DigestSpec {
    DigestSpec::keccak(bits).unwrap()
}

fn budget(q: u64) -> AttackBudget {
    AttackBudget::new(q).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_digestlab"))
}

/// Recomputes a pair with the `sha3` crate.
fn independently_valid(pair: &CollisionPair, bits: u32) -> bool {
    let low = |m: &[u8]| {
        let d: [u8; 32] = Keccak256::digest(m).into();
        u64::from_be_bytes(d[24..].try_into().unwrap()) & ((1u64 << bits) - 1)
    };
    pair.m1() != pair.m2() && low(pair.m1()) == low(pair.m2())
}

fn within_time(start: Instant, limit: Duration) -> Check {
    let took = start.elapsed();
    ensure!(took <= limit, "took {took:.1?}, limit {limit:?}");
    Ok(format!("{took:.2?}"))
}

fn c1_digest() -> Check {
    let start = Instant::now();
    let vectors: [(&[u8], &str); 2] = [
        (
            b"",
            "0xc5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470",
        ),
        (
            b"abc",
            "0x4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45",
        ),
    ];
    for (m, want) in vectors {
        ensure!(
            keccak256(m).to_hex() == want,
            "{m:?}: got {}",
            keccak256(m).to_hex()
        );
    }
    let long: Vec<u8> = (0..512).map(|i| i as u8).collect();
    ensure!(
        keccak256(&long).to_hex()
            == "0xf55ba327291604f0e5be6651752398b7be2331aad65f5763ce067df95cc13be1",
        "512-byte vector"
    );
    for len in [135, 136, 137, 200, 272, 273, 1000] {
        let m = &long.repeat(2)[..len];
        ensure!(
            keccak256(m).0 == <[u8; 32]>::from(Keccak256::digest(m)),
            "length {len}"
        );
    }
    within_time(start, Duration::from_secs(1))
}

fn rlp_item() -> impl Strategy<Value = RlpItem> {
    let leaf = proptest::collection::vec(any::<u8>(), 0..70).prop_map(RlpItem::Bytes);
    leaf.prop_recursive(6, 128, 6, |inner| {
        proptest::collection::vec(inner, 0..6).prop_map(RlpItem::List)
    })
}

fn c2_rlp() -> Check {
    let start = Instant::now();
    let b = |s: &str| RlpItem::bytes(s.as_bytes());
    ensure!(encode(&RlpItem::bytes(vec![])) == [0x80], "empty string");
    ensure!(encode(&b("dog")) == [0x83, b'd', b'o', b'g'], "dog");
    ensure!(
        encode(&RlpItem::list(vec![b("cat"), b("dog")]))
            == [0xc8, 0x83, b'c', b'a', b't', 0x83, b'd', b'o', b'g'],
        "[cat, dog]"
    );
    ensure!(encode(&encode_uint(0)) == [0x80], "0");
    ensure!(encode(&encode_uint(15)) == [0x0f], "15");
    ensure!(encode(&encode_uint(1024)) == [0x82, 0x04, 0x00], "1024");

    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 1000,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    runner
        .run(&rlp_item(), |x| {
            let bytes = encode(&x);
            prop_assert_eq!(bytes.len(), x.encoded_len());
            prop_assert_eq!(decode(&bytes).unwrap(), x);
            Ok(())
        })
        .map_err(|e| format!("round trip: {e}"))?;

    let bad: [&[u8]; 5] = [
        &[0x81, 0x05],
        &[0xb8, 0x02, 1, 2],
        &[0xb9, 0x00, 0x40],
        &[0x80, 0x80],
        &[0x83, 1],
    ];
    for bytes in bad {
        ensure!(decode(bytes).is_err(), "{bytes:02x?} accepted");
    }
    within_time(start, Duration::from_secs(5))
}

fn c3_validity() -> Check {
    let start = Instant::now();
    for seed in 0..20 {
        let enc = CounterEncoder::seeded(seed);
        let brute =
            find_collision_brute(&enc, spec(16), budget(1 << 20)).map_err(|e| e.to_string())?;
        let rho =
            find_collision_rho(&enc, spec(16), seed, budget(1 << 20)).map_err(|e| e.to_string())?;
        ensure!(independently_valid(&brute, 16), "brute seed {seed}");
        ensure!(independently_valid(&rho, 16), "rho seed {seed}");
    }
    within_time(start, Duration::from_secs(10)).map(|t| format!("40 pairs re-verified, {t}"))
}

const DP: Searcher = Searcher::Parallel {
    workers: 1,
    distinguished_bits: None,
};

fn scaling(t_values: Vec<u32>, seed: u64) -> Result<StudyReport, String> {
    let report = run_scaling_study(&ScalingStudyConfig::new(t_values, 20, DP), seed)
        .map_err(|e| e.to_string())?;
    ensure!(
        report
            .rows
            .iter()
            .all(|r| r.metric == Metric::MedianEvaluations),
        "a search exhausted its budget"
    );
    Ok(report)
}

fn c4_birthday() -> Check {
    let start = Instant::now();
    let report = scaling(vec![16, 24, 28, 32], 4)?;
    let mut ratios = Vec::new();
    for row in &report.rows {
        let r = row.ratio().unwrap();
        ensure!(
            (0.3..=3.0).contains(&r),
            "t={} median/bound {r:.2}",
            row.truncation_bits
        );
        ratios.push(format!("t{}:{r:.2}", row.truncation_bits));
    }
    let g = report
        .growth
        .iter()
        .find(|g| g.from_bits == 24 && g.to_bits == 28)
        .unwrap();
    ensure!(
        (2.8..=5.7).contains(&g.median_ratio),
        "median(28)/median(24) = {:.2}",
        g.median_ratio
    );
    let t = within_time(start, Duration::from_secs(120))?;
    Ok(format!(
        "{} ratio28/24={:.2}, {t}",
        ratios.join(" "),
        g.median_ratio
    ))
}

fn c5_forgery() -> Check {
    let start = Instant::now();
    let benign = ContractTemplate::new(
        TemplateLabel::Benign,
        b"\x60\x80\x60\x40\x52".to_vec(),
        b"\x00".to_vec(),
    )
    .unwrap();
    let nefarious = ContractTemplate::new(
        TemplateLabel::Nefarious,
        b"\x60\x80\x60\x40\xff".to_vec(),
        b"\x00".to_vec(),
    )
    .unwrap();
    let s = spec(32);
    let e = forge_address_collision(
        [0x5a; 20],
        &benign,
        &nefarious,
        1,
        s,
        42,
        budget(10_000_000),
        Vary::Field,
    )
    .map_err(|e| e.to_string())?;
    let a = derive_address(&e.benign, s).unwrap();
    ensure!(
        a == derive_address(&e.nefarious, s).unwrap(),
        "addresses differ"
    );
    ensure!(
        e.benign.initcode() != e.nefarious.initcode(),
        "identical initcode"
    );
    ensure!(
        benign.matches(e.benign.initcode()) && nefarious.matches(e.nefarious.initcode()),
        "records do not embed one benign and one nefarious template"
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("forgery.json");
    let evaluations = e.evaluations_used;
    std::fs::write(&path, EvidenceBundle::AddressForgery(e.clone()).to_json()).unwrap();
    let verify = || {
        bin()
            .args(["verify", "--bundle"])
            .arg(&path)
            .output()
            .unwrap()
            .status
            .code()
    };
    ensure!(verify() == Some(0), "cmd verify rejected a fresh bundle");

    let mut tampered = e;
    let mut code = tampered.benign.initcode().to_vec();
    code[6] ^= 0x01;
    tampered.benign = digestlab::address::DeploymentRecord::new([0x5a; 20], 1, code).unwrap();
    std::fs::write(&path, EvidenceBundle::AddressForgery(tampered).to_json()).unwrap();
    ensure!(verify() == Some(4), "cmd verify accepted a flipped byte");
    let t = within_time(start, Duration::from_secs(30))?;
    Ok(format!("address {a}, {evaluations} evaluations, {t}"))
}

fn c6_beacon() -> Check {
    let start = Instant::now();
    let config = BeaconConfig::new(10, spec(24))
        .unwrap()
        .with_adversary(3)
        .unwrap();
    let honest = measure_bias(&config, 20_000, Scenario::Honest, 1).map_err(|e| e.to_string())?;
    let attacked = measure_bias(
        &config,
        20_000,
        Scenario::Attacked {
            budget: budget(1_000_000),
        },
        2,
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        (honest.frequency - 0.10).abs() <= 0.012,
        "honest frequency {}",
        honest.frequency
    );
    ensure!(
        (attacked.frequency - 0.19).abs() <= 0.012,
        "attacked frequency {}",
        attacked.frequency
    );
    ensure!(
        (attacked.attacked_predicted - 0.19).abs() < 1e-12,
        "model {}",
        attacked.attacked_predicted
    );
    ensure!(
        honest.transcripts_verified == 20_000 && attacked.transcripts_verified == 20_000,
        "unverified transcripts"
    );
    let t = within_time(start, Duration::from_secs(60))?;
    Ok(format!(
        "honest {:.4}, attacked {:.4}, {t}",
        honest.frequency, attacked.frequency
    ))
}

fn c7_digest_size() -> Check {
    let start = Instant::now();
    let report = scaling(vec![20, 22, 24, 26, 28, 30], 7)?;
    for row in &report.rows {
        let r = row.ratio().unwrap();
        ensure!(
            (0.3..=3.0).contains(&r),
            "t={} median/bound {r:.2}",
            row.truncation_bits
        );
    }
    // least-squares slope of log2(median) against t; the model gives 1/2
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .map(|r| (r.truncation_bits as f64, r.empirical.unwrap().log2()))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    ensure!((0.4..=0.6).contains(&slope), "doublings per bit {slope:.3}");

    let wide = BeaconConfig::new(10, spec(64))
        .unwrap()
        .with_adversary(0)
        .unwrap();
    let r = adversary_prepare(&wide, None, budget(1_000_000), 0);
    ensure!(
        r == Err(Error::Exhausted {
            evaluations: 1_000_000
        }),
        "t=64 attack did not fail: {r:?}"
    );
    let p = success_probability(1_000_000, 64);
    ensure!((p - 2.71e-8).abs() < 0.01e-8, "success probability {p}");
    let t = within_time(start, Duration::from_secs(120))?;
    Ok(format!(
        "work x{:.2} per 2 bits, t=64 success p={p:.2e}, {t}",
        2f64.powf(2.0 * slope)
    ))
}

/// Rounds for the composed-frequency check; its standard error is about 0.009.
const TEMPORAL_ROUNDS: u64 = 1500;

fn c8_temporal() -> Check {
    let start = Instant::now();
    let t = 40;
    let q = 1u64 << (t / 2);
    let zero = run_temporal_study(
        &TemporalStudyConfig {
            t,
            hash_rate: 1.0,
            windows: vec![1.0],
            trials_per_window: 200,
        },
        8,
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        zero.rows[0].budget == 1 && zero.rows[0].empirical == Some(0.0),
        "budget 1 succeeded"
    );

    let config = BeaconConfig::new(10, spec(t))
        .unwrap()
        .with_adversary(0)
        .unwrap()
        .with_temporal_binding(true);
    let r = measure_bias(
        &config,
        TEMPORAL_ROUNDS,
        Scenario::AttackedWithBinding { budget: budget(q) },
        8,
    )
    .map_err(|e| e.to_string())?;
    let s = 1.0 - (-0.5f64).exp();
    ensure!(
        (r.predicted_collision_rate - s).abs() < 1e-6,
        "model {}",
        r.predicted_collision_rate
    );
    ensure!(
        (r.collision_rate - s).abs() <= 0.08,
        "collision rate {:.4} vs {s:.4}",
        r.collision_rate
    );
    let composed = s * 0.19 + (1.0 - s) * 0.10;
    ensure!(
        (r.frequency - composed).abs() <= 0.02,
        "frequency {:.4} vs {composed:.4}",
        r.frequency
    );
    ensure!(
        r.transcripts_verified == TEMPORAL_ROUNDS,
        "unverified transcripts"
    );
    let took = within_time(start, Duration::from_secs(180))?;
    Ok(format!(
        "collision rate {:.4} (model {s:.4}), frequency {:.4} (model {composed:.4}), {took}",
        r.collision_rate, r.frequency
    ))
}

fn c9_parallel() -> Check {
    let start = Instant::now();
    let mut wall = [Duration::ZERO; 2];
    for seed in 0..3 {
        let enc = CounterEncoder::seeded(100 + seed);
        for (i, workers) in [1usize, 4].into_iter().enumerate() {
            let t0 = Instant::now();
            let pair = find_collision_parallel(&enc, spec(40), workers, 10, seed, budget(1 << 26))
                .map_err(|e| format!("{workers} workers: {e}"))?;
            wall[i] += t0.elapsed();
            ensure!(
                independently_valid(&pair, 40),
                "{workers}-worker pair invalid"
            );
        }
    }
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let ratio = wall[1].as_secs_f64() / wall[0].as_secs_f64();
    let speed = if cores >= 4 {
        ensure!(ratio <= 0.6, "4-worker/1-worker wall time {ratio:.2}");
        format!("wall ratio {ratio:.2}")
    } else {
        format!("speedup check skipped on {cores} core(s), wall ratio {ratio:.2}")
    };
    let t = within_time(start, Duration::from_secs(120))?;
    Ok(format!("valid pairs from 1 and 4 workers, {speed}, {t}"))
}

fn c10_determinism() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("b.json");
    let out = bin().args(["--json", "forge-address"]).output().unwrap();
    std::fs::write(&bundle, out.stdout).unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["hash", "--input", "0x616263"],
        vec!["collide", "--bits", "24", "--searcher", "brute"],
        vec!["collide", "--bits", "24", "--searcher", "rho"],
        vec![
            "collide",
            "--bits",
            "32",
            "--searcher",
            "parallel",
            "--workers",
            "4",
        ],
        vec!["forge-address", "--bits", "28"],
        vec!["forge-address", "--bits", "24", "--vary", "nonce"],
        vec!["beacon", "--rounds", "2000", "--scenario", "honest"],
        vec!["beacon", "--rounds", "2000", "--scenario", "attacked"],
        vec![
            "beacon",
            "--rounds",
            "200",
            "--scenario",
            "temporal",
            "--bits",
            "28",
            "--hash-rate",
            "16384",
            "--window",
            "1",
        ],
        vec!["scaling", "--t-list", "16,20", "--seeds", "5"],
        vec![
            "temporal",
            "--bits",
            "24",
            "--hash-rate",
            "4096",
            "--windows",
            "0.5,1",
            "--trials",
            "50",
        ],
        vec!["verify", "--bundle", bundle.to_str().unwrap()],
    ];
    for args in &commands {
        let run = || {
            bin()
                .args(["--json", "--seed", "1234"])
                .args(args)
                .output()
                .unwrap()
        };
        let (a, b) = (run(), run());
        ensure!(
            a.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&a.stderr)
        );
        ensure!(a.stdout == b.stdout, "{args:?} output differs between runs");
        ensure!(
            serde_json::from_slice::<serde_json::Value>(&a.stdout)
                .is_ok_and(|v| v["schema"].is_string()),
            "{args:?} output has no schema field"
        );
    }
    let t = within_time(start, Duration::from_secs(120))?;
    Ok(format!("{} commands byte-identical, {t}", commands.len()))
}

fn main() {
    type Criterion = (u32, &'static str, fn() -> Check);
    let criteria: [Criterion; 10] = [
        (1, "digest known-answer suite", c1_digest),
        (2, "rlp vectors, fuzz and canonicality", c2_rlp),
        (3, "collision validity oracle", c3_validity),
        (4, "birthday-bound conformance", c4_birthday),
        (5, "address forgery end to end", c5_forgery),
        (6, "beacon bias reproduction", c6_beacon),
        (7, "digest-size mitigation", c7_digest_size),
        (8, "temporal mitigation", c8_temporal),
        (9, "parallel search contract", c9_parallel),
        (10, "cli determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (n, title, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS {title}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL {title}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
