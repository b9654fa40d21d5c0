//! Experiments for the two mitigations: wider digests (work grows as
//! `2^(t/2)`) and temporal binding (the search must fit in a short window).
//!
//! Both studies produce a [`StudyReport`] whose rows pair an empirical value
//! with the model's prediction. Trials draw from independent streams of the
//! master seed, so reports are identical however the trials are scheduled.

use std::fmt::Write as _;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beacon::{adversary_prepare, BeaconConfig, BINDING_LEN};
use crate::collision::{
    default_distinguished_bits, expected_work, success_probability, AttackBudget, CollisionSearch,
    CounterEncoder,
};
use crate::digest::{batch, DigestSpec};
use crate::error::Error;
use crate::seeding::{stream_rng, stream_seed};

/// Largest truncation width the studies accept.
pub const MAX_STUDY_BITS: u32 = 48;

pub const SCALING_SCHEMA: &str = "digestlab.scaling/1";
pub const TEMPORAL_SCHEMA: &str = "digestlab.temporal/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Searcher {
    Rho,
    /// `distinguished_bits: None` uses [`default_distinguished_bits`].
    Parallel {
        workers: usize,
        distinguished_bits: Option<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudyConfig {
    pub t_values: Vec<u32>,
    pub seeds_per_t: usize,
    pub searcher: Searcher,
    /// Each search gets `budget_multiplier * expected_work(t)` evaluations.
    pub budget_multiplier: f64,
}

impl ScalingStudyConfig {
    pub fn new(t_values: Vec<u32>, seeds_per_t: usize, searcher: Searcher) -> Self {
        Self {
            t_values,
            seeds_per_t,
            searcher,
            budget_multiplier: 10.0,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.t_values.is_empty() {
            return Err(Error::param("t_values is empty"));
        }
        if self.t_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("t_values must be strictly increasing"));
        }
        for &t in &self.t_values {
            DigestSpec::keccak(t)?;
            if t > MAX_STUDY_BITS {
                return Err(Error::param(format!(
                    "t = {t} is above the desk-scale ceiling of {MAX_STUDY_BITS}"
                )));
            }
        }
        if self.seeds_per_t < 5 {
            return Err(Error::param("seeds_per_t must be at least 5"));
        }
        if !(self.budget_multiplier >= 10.0 && self.budget_multiplier.is_finite()) {
            return Err(Error::param(
                "budget_multiplier must be a finite value >= 10",
            ));
        }
        if let Searcher::Parallel { workers: 0, .. } = self.searcher {
            return Err(Error::param("at least one worker is required"));
        }
        Ok(())
    }

    fn budget(&self, t: u32) -> u64 {
        (self.budget_multiplier * expected_work(t)).ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalStudyConfig {
    pub t: u32,
    /// Evaluations per second assumed for the attacker.
    pub hash_rate: f64,
    /// Window lengths in seconds.
    pub windows: Vec<f64>,
    pub trials_per_window: usize,
}

impl TemporalStudyConfig {
    pub fn validate(&self) -> Result<(), Error> {
        DigestSpec::keccak(self.t)?;
        if self.t > MAX_STUDY_BITS {
            return Err(Error::param(format!(
                "t = {} is above the desk-scale ceiling of {MAX_STUDY_BITS}",
                self.t
            )));
        }
        if !(self.hash_rate.is_finite() && self.hash_rate > 0.0) {
            return Err(Error::param("hash_rate must be positive and finite"));
        }
        if self.windows.is_empty() {
            return Err(Error::param("windows is empty"));
        }
        if self.windows.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::param("windows must be positive and finite"));
        }
        if self.trials_per_window < 50 {
            return Err(Error::param("trials_per_window must be at least 50"));
        }
        Ok(())
    }

    /// `floor(hash_rate * window)`.
    pub fn budget(&self, window: f64) -> u64 {
        let q = (self.hash_rate * window).floor();
        if q >= u64::MAX as f64 {
            u64::MAX
        } else {
            q as u64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MedianEvaluations,
    SuccessRate,
    /// A search that ran out of budget; `empirical` holds the evaluations spent.
    Exhausted,
}

impl Metric {
    fn as_str(self) -> &'static str {
        match self {
            Metric::MedianEvaluations => "median_evaluations",
            Metric::SuccessRate => "success_rate",
            Metric::Exhausted => "exhausted",
        }
    }
}

/// One row of a study. `empirical` is `None` only when no trial succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub parameter: String,
    pub value: f64,
    pub truncation_bits: u32,
    pub budget: u64,
    pub metric: Metric,
    pub empirical: Option<f64>,
    pub predicted: f64,
    pub samples: u64,
    pub successes: u64,
}

impl StudyRow {
    /// `empirical / predicted`, when both are available and non-zero.
    pub fn ratio(&self) -> Option<f64> {
        self.empirical
            .filter(|_| self.predicted != 0.0)
            .map(|e| e / self.predicted)
    }
}

/// Growth between consecutive widths of a scaling study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub from_bits: u32,
    pub to_bits: u32,
    pub median_ratio: f64,
    pub predicted_ratio: f64,
    /// `log2(median_ratio) / (to_bits - from_bits)`; the model gives 0.5.
    pub doublings_per_bit: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub version: String,
    /// Unix seconds; left out by default so reports are byte-reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema: String,
    pub rows: Vec<StudyRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub growth: Vec<GrowthRow>,
    pub metadata: Metadata,
}

/// Text table columns, in order.
pub const TABLE_COLUMNS: [&str; 9] = [
    "parameter",
    "value",
    "t",
    "budget",
    "metric",
    "empirical",
    "predicted",
    "ratio",
    "samples",
];

impl StudyReport {
    fn new(schema: &str, seed: u64) -> Self {
        Self {
            schema: schema.to_owned(),
            rows: Vec::new(),
            growth: Vec::new(),
            metadata: Metadata {
                seed,
                version: env!("CARGO_PKG_VERSION").to_owned(),
                timestamp: None,
            },
        }
    }

    /// Records the current time in the metadata.
    pub fn stamp_now(&mut self) {
        self.metadata.timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Rows as an aligned table with [`TABLE_COLUMNS`], then the growth rows
    /// if any.
    pub fn to_table(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"));
        let mut cells: Vec<Vec<String>> =
            vec![TABLE_COLUMNS.iter().map(|c| c.to_string()).collect()];
        for row in &self.rows {
            cells.push(vec![
                row.parameter.clone(),
                format!("{}", row.value),
                row.truncation_bits.to_string(),
                row.budget.to_string(),
                row.metric.as_str().to_owned(),
                fmt_opt(row.empirical),
                format!("{:.4}", row.predicted),
                fmt_opt(row.ratio()),
                row.samples.to_string(),
            ]);
        }
        let mut out = String::new();
        write_aligned(&mut out, &cells);
        if !self.growth.is_empty() {
            out.push('\n');
            let mut growth = vec![vec![
                "from_t".to_owned(),
                "to_t".to_owned(),
                "median_ratio".to_owned(),
                "predicted_ratio".to_owned(),
                "doublings_per_bit".to_owned(),
            ]];
            for g in &self.growth {
                growth.push(vec![
                    g.from_bits.to_string(),
                    g.to_bits.to_string(),
                    format!("{:.4}", g.median_ratio),
                    format!("{:.4}", g.predicted_ratio),
                    format!("{:.4}", g.doublings_per_bit),
                ]);
            }
            write_aligned(&mut out, &growth);
        }
        out
    }
}

fn write_aligned(out: &mut String, cells: &[Vec<String>]) {
    let widths: Vec<usize> = (0..cells[0].len())
        .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    for row in cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
}

fn median(sorted: &[u64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
    }
}

/// For each width, `seeds_per_t` independent searches; the median number of
/// evaluations is compared with `expected_work(t)`. Searches that exhaust
/// their budget each add an [`Metric::Exhausted`] row and are left out of the
/// median.
pub fn run_scaling_study(config: &ScalingStudyConfig, seed: u64) -> Result<StudyReport, Error> {
    config.validate()?;
    let mut report = StudyReport::new(SCALING_SCHEMA, seed);
    let mut medians = Vec::new();
    for (ti, &t) in config.t_values.iter().enumerate() {
        let spec = DigestSpec::keccak(t)?;
        let budget = AttackBudget::new(config.budget(t))?;
        let outcomes = (0..config.seeds_per_t as u64)
            .into_par_iter()
            .map(|i| {
                let trial_seed = stream_seed(seed, ((ti as u64) << 32) | i);
                let encoder = CounterEncoder::seeded(trial_seed);
                let mut search = CollisionSearch::new(spec, budget);
                let result = match config.searcher {
                    Searcher::Rho => search.rho(&encoder, trial_seed),
                    Searcher::Parallel {
                        workers,
                        distinguished_bits,
                    } => search.parallel(
                        &encoder,
                        workers,
                        distinguished_bits.unwrap_or_else(|| default_distinguished_bits(t)),
                        trial_seed,
                    ),
                };
                match result {
                    Ok(pair) => Ok(Ok(pair.evaluations_used())),
                    Err(Error::Exhausted { evaluations }) => Ok(Err(evaluations)),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>, Error>>()?;

        let mut found: Vec<u64> = outcomes.iter().filter_map(|o| o.ok()).collect();
        found.sort_unstable();
        let predicted = expected_work(t);
        let empirical = (!found.is_empty()).then(|| median(&found));
        report.rows.push(StudyRow {
            parameter: "t".into(),
            value: t as f64,
            truncation_bits: t,
            budget: budget.max_evaluations(),
            metric: Metric::MedianEvaluations,
            empirical,
            predicted,
            samples: config.seeds_per_t as u64,
            successes: found.len() as u64,
        });
        for spent in outcomes.iter().filter_map(|o| o.err()) {
            report.rows.push(StudyRow {
                parameter: "t".into(),
                value: t as f64,
                truncation_bits: t,
                budget: budget.max_evaluations(),
                metric: Metric::Exhausted,
                empirical: Some(spent as f64),
                predicted,
                samples: 1,
                successes: 0,
            });
        }
        medians.push((t, empirical));
    }

    for pair in medians.windows(2) {
        if let [(t0, Some(m0)), (t1, Some(m1))] = *pair {
            let ratio = m1 / m0;
            report.growth.push(GrowthRow {
                from_bits: t0,
                to_bits: t1,
                median_ratio: ratio,
                predicted_ratio: 2f64.powf((t1 - t0) as f64 / 2.0),
                doublings_per_bit: ratio.log2() / (t1 - t0) as f64,
            });
        }
    }
    Ok(report)
}

/// For each window, `trials_per_window` collision attempts under a fresh
/// random binding with budget `floor(hash_rate * window)`; the success rate
/// is compared with `success_probability(budget, t)`.
pub fn run_temporal_study(config: &TemporalStudyConfig, seed: u64) -> Result<StudyReport, Error> {
    config.validate()?;
    let spec = DigestSpec::keccak(config.t)?;
    let beacon = BeaconConfig::new(2, spec)?
        .with_adversary(0)?
        .with_temporal_binding(true);
    let mut report = StudyReport::new(TEMPORAL_SCHEMA, seed);
    for (wi, &window) in config.windows.iter().enumerate() {
        let budget = config.budget(window);
        let successes = if budget == 0 {
            0
        } else {
            let budget = AttackBudget::new(budget)?;
            (0..config.trials_per_window as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(seed, ((wi as u64) << 32) | i);
                    let mut binding = [0u8; BINDING_LEN];
                    rand::RngCore::fill_bytes(&mut rng, &mut binding);
                    let search_seed = rand::RngCore::next_u64(&mut rng);
                    match adversary_prepare(&beacon, Some(&binding), budget, search_seed) {
                        Ok(_) => Ok(1u64),
                        Err(Error::Exhausted { .. }) => Ok(0),
                        Err(e) => Err(e),
                    }
                })
                .sum::<Result<u64, Error>>()?
        };
        report.rows.push(StudyRow {
            parameter: "window_secs".into(),
            value: window,
            truncation_bits: config.t,
            budget,
            metric: Metric::SuccessRate,
            empirical: Some(successes as f64 / config.trials_per_window as f64),
            predicted: success_probability(budget, config.t),
            samples: config.trials_per_window as u64,
            successes,
        });
    }
    Ok(report)
}

/// Measures this machine's truncated-digest throughput (evaluations per
/// second) for short messages. Only a suggestion for `hash_rate`; studies
/// never read it implicitly.
pub fn measure_hash_rate(duration: Duration) -> f64 {
    let start = Instant::now();
    let mut evaluations = 0u64;
    let mut sink = 0u64;
    let mut messages = [[0u8; 16]; batch::LANES];
    while start.elapsed() < duration {
        for _ in 0..1024 {
            for (lane, m) in messages.iter_mut().enumerate() {
                m[..8].copy_from_slice(&(evaluations + lane as u64).to_be_bytes());
            }
            let refs: [&[u8]; batch::LANES] = std::array::from_fn(|i| &messages[i][..]);
            let out = batch::truncated_u64_x8(refs, 40);
            sink ^= out[0];
            evaluations += batch::LANES as u64;
        }
    }
    std::hint::black_box(sink);
    evaluations as f64 / start.elapsed().as_secs_f64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_config_validation() {
        let ok = ScalingStudyConfig::new(vec![16, 20], 5, Searcher::Rho);
        assert!(ok.validate().is_ok());
        for bad in [
            ScalingStudyConfig::new(vec![], 5, Searcher::Rho),
            ScalingStudyConfig::new(vec![20, 16], 5, Searcher::Rho),
            ScalingStudyConfig::new(vec![16, 16], 5, Searcher::Rho),
            ScalingStudyConfig::new(vec![49], 5, Searcher::Rho),
            ScalingStudyConfig::new(vec![16], 4, Searcher::Rho),
            ScalingStudyConfig {
                budget_multiplier: 9.9,
                ..ok.clone()
            },
            ScalingStudyConfig::new(
                vec![16],
                5,
                Searcher::Parallel {
                    workers: 0,
                    distinguished_bits: None,
                },
            ),
        ] {
            assert!(run_scaling_study(&bad, 0).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn temporal_config_validation() {
        let ok = TemporalStudyConfig {
            t: 24,
            hash_rate: 1000.0,
            windows: vec![1.0],
            trials_per_window: 50,
        };
        assert!(ok.validate().is_ok());
        let with = |f: &dyn Fn(&mut TemporalStudyConfig)| {
            let mut c = ok.clone();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(with(&|c| c.t = 49));
        assert!(with(&|c| c.windows = vec![]));
        assert!(with(&|c| c.windows = vec![0.0]));
        assert!(with(&|c| c.windows = vec![f64::INFINITY]));
        assert!(with(&|c| c.hash_rate = -1.0));
        assert!(with(&|c| c.trials_per_window = 49));
    }

    #[test]
    fn small_scaling_study_is_reproducible() {
        let config = ScalingStudyConfig::new(vec![12, 16], 7, Searcher::Rho);
        let a = run_scaling_study(&config, 5).unwrap();
        let b = run_scaling_study(&config, 5).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.growth.len(), 1);
        assert!(a.rows.iter().all(|r| r.metric == Metric::MedianEvaluations));
        assert_ne!(
            a.to_json(),
            run_scaling_study(&config, 6).unwrap().to_json()
        );
    }

    #[test]
    fn table_has_every_column() {
        let config = ScalingStudyConfig::new(vec![12], 5, Searcher::Rho);
        let table = run_scaling_study(&config, 1).unwrap().to_table();
        let header = table.lines().next().unwrap();
        let names: Vec<&str> = header.split_whitespace().collect();
        assert_eq!(names, TABLE_COLUMNS);
        assert_eq!(table.lines().count(), 2);
    }

    #[test]
    fn exhausted_searches_become_rows() {
        // every trial ends up either in the median or in its own row
        let config = ScalingStudyConfig::new(vec![8], 50, Searcher::Rho);
        let report = run_scaling_study(&config, 3).unwrap();
        let exhausted = report
            .rows
            .iter()
            .filter(|r| r.metric == Metric::Exhausted)
            .count() as u64;
        assert_eq!(report.rows[0].successes + exhausted, 50);
    }

    #[test]
    fn zero_and_one_evaluation_windows_never_succeed() {
        let config = TemporalStudyConfig {
            t: 16,
            hash_rate: 1.0,
            windows: vec![0.5, 1.0],
            trials_per_window: 50,
        };
        let report = run_temporal_study(&config, 0).unwrap();
        assert_eq!(report.rows[0].budget, 0);
        assert_eq!(report.rows[1].budget, 1);
        for row in &report.rows {
            assert_eq!(row.empirical, Some(0.0));
            assert_eq!(row.predicted, 0.0);
        }
    }

    #[test]
    fn hash_rate_is_positive() {
        assert!(measure_hash_rate(Duration::from_millis(20)) > 0.0);
    }
}
