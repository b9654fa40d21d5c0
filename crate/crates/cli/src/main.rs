//! `digestlab`: collision experiments on truncated Keccak-256.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 budget
//! exhausted, 4 verification failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use digestlab::beacon::{
    default_preparation_budget, run_bias_experiment, write_transcript_log, BeaconConfig,
    BiasReport, Scenario,
};
use digestlab::collision::{
    default_distinguished_bits, expected_work, success_probability, AttackBudget, CollisionPair,
    CollisionSearch, CounterEncoder,
};
use digestlab::digest::{keccak256, truncate, DigestSpec};
use digestlab::hexfmt;
use digestlab::mitigation::{
    measure_hash_rate, run_scaling_study, run_temporal_study, ScalingStudyConfig, Searcher,
    TemporalStudyConfig,
};
use digestlab::scenarios::{
    forge_address_collision, narrate_beacon_attack, ContractTemplate, EvidenceBundle,
    ForgeryEvidence, TemplateLabel, Vary,
};
use digestlab::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_EXHAUSTED: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Widths above this get a reminder that real digests are out of reach.
const DESK_SCALE_BITS: u32 = 48;

#[derive(Parser)]
#[command(
    name = "digestlab",
    version,
    about = "Birthday-collision experiments on truncated Keccak-256"
)]
struct Cli {
    /// Master seed; identical flags and seed give identical output
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Machine-readable JSON output
    #[arg(long, global = true)]
    json: bool,

    /// Also write the output to this file
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Keccak-256 of some bytes, optionally truncated
    Hash(HashArgs),
    /// Find two messages with the same truncated digest
    Collide(CollideArgs),
    /// Forge a benign and a nefarious contract with the same address
    ForgeAddress(ForgeArgs),
    /// Simulate the commit-reveal beacon and measure proposer bias
    Beacon(BeaconArgs),
    /// Work needed per digest width
    Scaling(ScalingArgs),
    /// Attack success within a time window under temporal binding
    Temporal(TemporalArgs),
    /// Re-verify an evidence bundle from scratch
    Verify(VerifyArgs),
    /// Measure this machine's digest throughput (a hash-rate suggestion)
    Bench(BenchArgs),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
struct HashArgs {
    /// Input bytes as hex
    #[arg(long, group = "source", allow_hyphen_values = true)]
    input: Option<String>,
    /// Read input bytes from a file
    #[arg(long, group = "source")]
    infile: Option<PathBuf>,
    /// Keep only the low T bits
    #[arg(long, value_name = "T")]
    truncate: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SearcherKind {
    Brute,
    Rho,
    Parallel,
}

#[derive(Args)]
struct CollideArgs {
    /// Truncation width (desk scale: 16-40)
    #[arg(long, default_value_t = 24)]
    bits: u32,
    #[arg(long, value_enum, default_value = "rho")]
    searcher: SearcherKind,
    /// Worker threads (parallel searcher only)
    #[arg(long)]
    workers: Option<usize>,
    /// Distinguished-point bits (parallel searcher only)
    #[arg(long)]
    distinguished_bits: Option<u32>,
    /// Maximum digest evaluations [default: 100x expected work]
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VaryKind {
    Field,
    Nonce,
}

#[derive(Args)]
struct ForgeArgs {
    /// Truncation width, at most 48 (desk scale: 24-32)
    #[arg(long, default_value_t = 24)]
    bits: u32,
    /// Deploying account, 20 bytes of hex
    #[arg(long, default_value = "0x00000000000000000000000000000000deadbeef")]
    creator: String,
    #[arg(long, default_value_t = 0)]
    nonce: u64,
    /// Code before the mutable field in the benign contract
    #[arg(long, default_value = "0x6080604052")]
    benign_prefix: String,
    /// Code before the mutable field in the nefarious contract
    #[arg(long, default_value = "0x60806040ff")]
    nefarious_prefix: String,
    /// Code after the mutable field (both contracts)
    #[arg(long, default_value = "0x00")]
    suffix: String,
    /// Mutable field width in bytes
    #[arg(long, default_value_t = 8)]
    field_width: usize,
    /// Search over the mutable field or over the nonce
    #[arg(long, value_enum, default_value = "field")]
    vary: VaryKind,
    /// Maximum digest evaluations [default: 200x expected work]
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioKind {
    Honest,
    Attacked,
    Temporal,
}

#[derive(Args)]
struct BeaconArgs {
    /// Number of participants
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Commitment width (desk scale: 24-40)
    #[arg(long, default_value_t = 24)]
    bits: u32,
    #[arg(long, default_value_t = 20_000)]
    rounds: u64,
    #[arg(long, value_enum, default_value = "honest")]
    scenario: ScenarioKind,
    /// Index of the adversarial participant
    #[arg(long, default_value_t = 0)]
    adversary: usize,
    /// Reveal width in bits
    #[arg(long, default_value_t = 64)]
    reveal_bits: u32,
    /// Adversary evaluations per second (temporal scenario)
    #[arg(long)]
    hash_rate: Option<f64>,
    /// Seconds between seeing the binding and committing (temporal scenario)
    #[arg(long)]
    window: Option<f64>,
    /// Collision-search budget; overrides --hash-rate/--window
    #[arg(long)]
    budget: Option<u64>,
    /// Write every round as one JSON line to this file
    #[arg(long)]
    transcripts: Option<PathBuf>,
    /// Write a verifiable evidence bundle (attacked scenario)
    #[arg(long)]
    bundle: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudySearcher {
    Rho,
    Parallel,
}

#[derive(Args)]
struct ScalingArgs {
    /// Comma-separated widths, strictly increasing, each at most 48
    #[arg(long, default_value = "16,20,24,28")]
    t_list: String,
    /// Searches per width
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, value_enum, default_value = "parallel")]
    searcher: StudySearcher,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    distinguished_bits: Option<u32>,
    /// Budget per search as a multiple of the expected work
    #[arg(long, default_value_t = 10.0)]
    multiplier: f64,
}

#[derive(Args)]
struct TemporalArgs {
    /// Commitment width, at most 48
    #[arg(long, default_value_t = 32)]
    bits: u32,
    /// Adversary evaluations per second
    #[arg(long)]
    hash_rate: f64,
    /// Comma-separated window lengths in seconds
    #[arg(long)]
    windows: String,
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Evidence bundle written by forge-address or beacon --bundle
    #[arg(long)]
    bundle: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Measurement time in seconds
    #[arg(long, default_value_t = 1.0)]
    seconds: f64,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Exhausted { .. } => EXIT_EXHAUSTED,
            Error::Verification(_) => EXIT_VERIFY,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// A command's result: JSON body and human-readable text.
struct Output {
    json: String,
    text: String,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'a str,
    #[serde(flatten)]
    body: T,
}

fn output<T: Serialize>(schema: &str, body: T, text: String) -> Output {
    Output {
        json: serde_json::to_string_pretty(&Envelope { schema, body }).expect("output serializes"),
        text,
    }
}

fn spec(bits: u32) -> Result<DigestSpec, Failure> {
    let spec = DigestSpec::keccak(bits)?;
    if bits > DESK_SCALE_BITS {
        eprintln!(
            "warning: t = {bits} is beyond desk scale; expected work is about 2^{:.1} evaluations, \
             and real digests (t = 160 or 256) are far out of reach of this tool",
            expected_work(bits).log2()
        );
    }
    Ok(spec)
}

fn budget_or_default(budget: Option<u64>, bits: u32) -> Result<AttackBudget, Failure> {
    match budget {
        Some(q) => Ok(AttackBudget::new(q)?),
        None => Ok(default_preparation_budget(DigestSpec::keccak(bits)?)),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| usage(format!("bad {what} `{p}`"))))
        .collect()
}

fn parse_creator(s: &str) -> Result<[u8; 20], Failure> {
    let bytes = hexfmt::decode(s)?;
    bytes
        .try_into()
        .map_err(|b: Vec<u8>| usage(format!("creator must be 20 bytes, got {}", b.len())))
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_hash(args: &HashArgs) -> Result<Output, Failure> {
    let input = match (&args.input, &args.infile) {
        (Some(hex), _) => hexfmt::decode(hex)?,
        (None, Some(path)) => {
            fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?
        }
        (None, None) => return Err(usage("one of --input or --infile is required")),
    };
    let full = keccak256(&input);
    #[derive(Serialize)]
    struct Body {
        bits: u32,
        digest: String,
        input_len: usize,
    }
    let (bits, digest) = match args.truncate {
        Some(t) => (t, truncate(&full, t)?.to_hex()),
        None => (256, full.to_hex()),
    };
    let text = format!("{digest}\n");
    Ok(output(
        "digestlab.hash/1",
        Body {
            bits,
            digest,
            input_len: input.len(),
        },
        text,
    ))
}

fn describe_pair(pair: &CollisionPair) -> String {
    let mut text = format!(
        "m1        {}\nm2        {}\ndigest    {} ({} bits)\nevaluations {}\n",
        hexfmt::encode(pair.m1()),
        hexfmt::encode(pair.m2()),
        pair.digest_value(),
        pair.digest_value().width(),
        pair.evaluations_used()
    );
    if let Some((a, b)) = pair.families() {
        text.push_str(&format!("families  {a} / {b}\n"));
    }
    text
}

fn cmd_collide(args: &CollideArgs, seed: u64) -> Result<Output, Failure> {
    let spec = spec(args.bits)?;
    let budget = budget_or_default(args.budget, args.bits)?;
    if !matches!(args.searcher, SearcherKind::Parallel)
        && (args.workers.is_some() || args.distinguished_bits.is_some())
    {
        return Err(usage(
            "--workers and --distinguished-bits apply to --searcher parallel only",
        ));
    }
    let encoder = CounterEncoder::seeded(seed);
    let mut search = CollisionSearch::new(spec, budget);
    let (name, pair) = match args.searcher {
        SearcherKind::Brute => ("brute", search.brute(&encoder)?),
        SearcherKind::Rho => ("rho", search.rho(&encoder, seed)?),
        SearcherKind::Parallel => {
            let workers = args.workers.unwrap_or(1);
            let d = args
                .distinguished_bits
                .unwrap_or_else(|| default_distinguished_bits(args.bits));
            ("parallel", search.parallel(&encoder, workers, d, seed)?)
        }
    };
    pair.verify(spec)?;
    #[derive(Serialize)]
    struct Body<'a> {
        searcher: &'a str,
        bits: u32,
        seed: u64,
        budget: u64,
        expected_work: f64,
        pair: &'a CollisionPair,
    }
    let expected = expected_work(args.bits);
    let text = format!(
        "{}expected  {:.0} (ratio {:.2})\n",
        describe_pair(&pair),
        expected,
        pair.evaluations_used() as f64 / expected
    );
    Ok(output(
        "digestlab.collide/1",
        Body {
            searcher: name,
            bits: args.bits,
            seed,
            budget: budget.max_evaluations(),
            expected_work: expected,
            pair: &pair,
        },
        text,
    ))
}

fn cmd_forge(args: &ForgeArgs, seed: u64) -> Result<Output, Failure> {
    let spec = spec(args.bits)?;
    let creator = parse_creator(&args.creator)?;
    let suffix = hexfmt::decode(&args.suffix)?;
    let benign = ContractTemplate::with_field_width(
        TemplateLabel::Benign,
        hexfmt::decode(&args.benign_prefix)?,
        args.field_width,
        suffix.clone(),
    )?;
    let nefarious = ContractTemplate::with_field_width(
        TemplateLabel::Nefarious,
        hexfmt::decode(&args.nefarious_prefix)?,
        args.field_width,
        suffix,
    )?;
    // Cross-family search needs about sqrt(2) times the plain birthday work.
    let budget = match args.budget {
        Some(q) => AttackBudget::new(q)?,
        None => AttackBudget::new((200.0 * expected_work(args.bits)) as u64)?,
    };
    let mode = match args.vary {
        VaryKind::Field => Vary::Field,
        VaryKind::Nonce => Vary::Nonce,
    };
    let evidence = forge_address_collision(
        creator, &benign, &nefarious, args.nonce, spec, seed, budget, mode,
    )?;
    let text = describe_forgery(&evidence);
    let bundle = EvidenceBundle::AddressForgery(evidence);
    Ok(Output {
        json: bundle.to_json(),
        text,
    })
}

fn describe_forgery(e: &ForgeryEvidence) -> String {
    format!(
        "shared address  {} ({} bits)\nbenign     nonce {}  initcode {}\nnefarious  nonce {}  initcode {}\nevaluations {}\n",
        e.shared_address,
        e.shared_address.width(),
        e.benign.nonce(),
        hexfmt::encode(e.benign.initcode()),
        e.nefarious.nonce(),
        hexfmt::encode(e.nefarious.initcode()),
        e.evaluations_used
    )
}

fn describe_bias(r: &BiasReport) -> String {
    let mut text = format!(
        "scenario            {}\nparticipants        {}\nrounds              {}\nadversary selected  {} ({:.4})\nhonest expectation  {:.4}\nattacked model      {:.4}\n",
        r.scenario,
        r.participants,
        r.rounds,
        r.adversary_selected,
        r.frequency,
        r.honest_expected,
        r.attacked_predicted
    );
    if r.scenario != "honest" {
        text.push_str(&format!(
            "collision rate      {:.4} (model {:.4})\npredicted frequency {:.4}\n",
            r.collision_rate, r.predicted_collision_rate, r.predicted_frequency
        ));
    }
    text.push_str(&format!(
        "transcripts verified {}/{}\n",
        r.transcripts_verified, r.rounds
    ));
    text
}

fn cmd_beacon(args: &BeaconArgs, seed: u64) -> Result<Output, Failure> {
    let spec = spec(args.bits)?;
    let mut config = BeaconConfig::new(args.n, spec)?
        .with_reveal_bits(args.reveal_bits)?
        .with_adversary(args.adversary)?;
    let scenario = match args.scenario {
        ScenarioKind::Honest => Scenario::Honest,
        ScenarioKind::Attacked => Scenario::Attacked {
            budget: budget_or_default(args.budget, args.bits)?,
        },
        ScenarioKind::Temporal => {
            config = config.with_temporal_binding(true);
            let budget = match (args.budget, args.hash_rate, args.window) {
                (Some(q), _, _) => AttackBudget::new(q)?,
                (None, Some(rate), Some(window)) => AttackBudget::from_rate(rate, window)?,
                _ => {
                    return Err(usage(
                        "temporal scenario needs --budget or --hash-rate with --window",
                    ))
                }
            };
            Scenario::AttackedWithBinding { budget }
        }
    };
    if args.bundle.is_some() && !matches!(scenario, Scenario::Attacked { .. }) {
        return Err(usage(
            "--bundle is available for the attacked scenario only",
        ));
    }

    let experiment = run_bias_experiment(&config, args.rounds, scenario, seed)?;
    if let Some(path) = &args.transcripts {
        let mut buf = Vec::new();
        write_transcript_log(&mut buf, scenario.name(), &experiment.transcripts)
            .expect("writing to memory");
        write_file(path, &buf)?;
    }
    if let (Some(path), Scenario::Attacked { budget }) = (&args.bundle, scenario) {
        let evidence = narrate_beacon_attack(&config, budget, args.rounds, seed)?;
        write_file(
            path,
            EvidenceBundle::BeaconAttack(evidence).to_json().as_bytes(),
        )?;
    }
    let report = experiment.report;
    let text = describe_bias(&report);
    Ok(output("digestlab.beacon/1", report, text))
}

fn cmd_scaling(args: &ScalingArgs, seed: u64) -> Result<Output, Failure> {
    let t_values: Vec<u32> = parse_list(&args.t_list, "width")?;
    for &t in &t_values {
        spec(t)?;
    }
    let searcher = match args.searcher {
        StudySearcher::Rho => Searcher::Rho,
        StudySearcher::Parallel => Searcher::Parallel {
            workers: args.workers,
            distinguished_bits: args.distinguished_bits,
        },
    };
    let config = ScalingStudyConfig {
        budget_multiplier: args.multiplier,
        ..ScalingStudyConfig::new(t_values, args.seeds, searcher)
    };
    let report = run_scaling_study(&config, seed)?;
    Ok(Output {
        json: report.to_json(),
        text: report.to_table(),
    })
}

fn cmd_temporal(args: &TemporalArgs, seed: u64) -> Result<Output, Failure> {
    let config = TemporalStudyConfig {
        t: args.bits,
        hash_rate: args.hash_rate,
        windows: parse_list(&args.windows, "window")?,
        trials_per_window: args.trials,
    };
    let report = run_temporal_study(&config, seed)?;
    Ok(Output {
        json: report.to_json(),
        text: report.to_table(),
    })
}

fn cmd_verify(args: &VerifyArgs) -> Result<Output, Failure> {
    let text = fs::read_to_string(&args.bundle)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.bundle.display())))?;
    let bundle = EvidenceBundle::from_json(&text).map_err(|e| Failure {
        code: EXIT_VERIFY,
        message: format!("verification failed: unreadable bundle: {e}"),
    })?;
    bundle.verify()?;
    #[derive(Serialize)]
    struct Body<'a> {
        kind: &'a str,
        verdict: &'a str,
    }
    Ok(output(
        "digestlab.verify/1",
        Body {
            kind: bundle.kind(),
            verdict: "accept",
        },
        format!("accept ({})\n", bundle.kind()),
    ))
}

fn cmd_bench(args: &BenchArgs) -> Result<Output, Failure> {
    if !(args.seconds.is_finite() && args.seconds > 0.0) {
        return Err(usage("--seconds must be positive"));
    }
    let rate = measure_hash_rate(Duration::from_secs_f64(args.seconds));
    #[derive(Serialize)]
    struct Body {
        hash_rate: f64,
        success_probability_1s_t40: f64,
    }
    let text = format!("suggested --hash-rate {rate:.0}\n");
    Ok(output(
        "digestlab.bench/1",
        Body {
            hash_rate: rate,
            success_probability_1s_t40: success_probability(rate as u64, 40),
        },
        text,
    ))
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    match &cli.command {
        Command::Hash(a) => cmd_hash(a),
        Command::Collide(a) => cmd_collide(a, cli.seed),
        Command::ForgeAddress(a) => cmd_forge(a, cli.seed),
        Command::Beacon(a) => cmd_beacon(a, cli.seed),
        Command::Scaling(a) => cmd_scaling(a, cli.seed),
        Command::Temporal(a) => cmd_temporal(a, cli.seed),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let mut bytes = if cli.json { out.json } else { out.text };
            if !bytes.ends_with('\n') {
                bytes.push('\n');
            }
            if let Some(path) = &cli.out {
                if let Err(f) = write_file(path, bytes.as_bytes()) {
                    eprintln!("error: {}", f.message);
                    return ExitCode::from(f.code);
                }
            }
            let _ = std::io::stdout().write_all(bytes.as_bytes());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
