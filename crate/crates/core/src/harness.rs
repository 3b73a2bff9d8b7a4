//! Experiment configuration, the deterministic end-to-end pipeline, and
//! canonical report writers.
//!
//! Every random draw comes from ChaCha8 streams keyed by the configured
//! seed (see [`crate::rng`]), so a configuration fully determines the
//! record. Wall-clock stage timings are returned beside the record, never
//! inside it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::conjugacy::{conjugacy_demo, ConjugacyCertificate, DeviationRow};
use crate::error::{Error, Result};
use crate::independence::IndependenceReport;
use crate::measure::{CellSet, GridMap, GridSpace, MAX_LOG2};
use crate::rational::{self, format_rational, Rational};
use crate::rng;
use crate::symbolic::{AtomUnion, Cylinder};
use crate::topology::{ContainmentRecord, Membership, RefinedCollection};
use crate::towers::{
    build_tower, openness_certificate, partial_rigidity_estimate, perturb, rank_one_membership, OpennessCertificate,
    RankOneResult,
};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "CONJDENSE_OUT_DIR";

/// Stream index reserved for drawing a `random` map, disjoint from the
/// trial streams `0..trials`.
pub const MAP_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// [`GridMap::hash_scrambler`]
    Hash,
    /// [`GridMap::bit_reversal_increment`]
    Bitrev,
    /// [`GridMap::odometer`]
    Odometer,
    /// [`GridMap::cyclic_shift`]
    Cyclic,
    Identity,
    /// Uniform permutation from stream `(seed, MAP_STREAM)`.
    Random,
}

impl MapKind {
    pub fn build(self, space: GridSpace, seed: u64) -> GridMap {
        match self {
            MapKind::Hash => GridMap::hash_scrambler(space),
            MapKind::Bitrev => GridMap::bit_reversal_increment(space),
            MapKind::Odometer => GridMap::odometer(space),
            MapKind::Cyclic => GridMap::cyclic_shift(space),
            MapKind::Identity => GridMap::identity(space),
            MapKind::Random => GridMap::random(space, &mut rng::stream(seed, MAP_STREAM)),
        }
    }
}

fn default_one() -> u32 {
    1
}

fn default_rigidity_window() -> u32 {
    8
}

/// Rank-one and openness experiment on its own grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowersConfig {
    pub resolution_log2: u32,
    pub map: MapKind,
    /// Height budget for the rank-one search.
    pub heights: Vec<usize>,
    pub k: u64,
    /// Test sets as half-open cell intervals `[start, end)`.
    pub sets: Vec<[usize; 2]>,
    pub perturb_seed: u64,
    pub swaps: usize,
    #[serde(default = "default_one")]
    pub window: u32,
    #[serde(default = "default_rigidity_window")]
    pub rigidity_window: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub stem: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), stem: "run".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub resolution_log2: u32,
    /// Largest rank the refinement of `q` may use.
    pub k: u32,
    #[serde(with = "rational::as_str")]
    pub epsilon: Rational,
    pub window: u32,
    pub independence_window: u32,
    pub seed: u64,
    pub trials: u64,
    pub map: MapKind,
    /// Each entry is a union of cylinders.
    pub q: Vec<Vec<Cylinder>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub towers: Option<TowersConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig { field, reason: reason.into() }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution_log2 == 0 || self.resolution_log2 > MAX_LOG2 {
            return Err(invalid("resolution_log2", format!("must lie in 1..={MAX_LOG2}")));
        }
        if self.resolution_log2 < 2 * self.k + 1 {
            return Err(invalid(
                "resolution_log2",
                format!(
                    "atoms unrealizable: rank {} needs resolution_log2 >= {}, got {}",
                    self.k,
                    2 * self.k + 1,
                    self.resolution_log2
                ),
            ));
        }
        if !rational::is_positive(&self.epsilon) {
            return Err(invalid("epsilon", "must be positive"));
        }
        if self.window == 0 {
            return Err(invalid("window", "must be at least 1"));
        }
        if self.independence_window < self.k + self.window {
            return Err(invalid(
                "independence_window",
                format!("must be at least k + window = {}", self.k + self.window),
            ));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.q.is_empty() {
            return Err(invalid("q", "must name at least one set"));
        }
        for (j, union) in self.q.iter().enumerate() {
            let rank = AtomUnion::from_cylinders_auto(union).map_err(|e| invalid("q", format!("set {j}: {e}")))?.rank();
            if self.resolution_log2 < 2 * rank + 1 {
                return Err(invalid("q", format!("set {j}: atoms unrealizable at rank {rank}")));
            }
        }
        if self.output.stem.is_empty() {
            return Err(invalid("output.stem", "must be nonempty"));
        }
        if let Some(t) = &self.towers {
            if t.resolution_log2 == 0 || t.resolution_log2 > MAX_LOG2 {
                return Err(invalid("towers.resolution_log2", format!("must lie in 1..={MAX_LOG2}")));
            }
            if t.heights.is_empty() {
                return Err(invalid("towers.heights", "must be nonempty"));
            }
            if t.heights.iter().any(|&h| h < 2) {
                return Err(invalid("towers.heights", "every height must be at least 2"));
            }
            if t.k == 0 {
                return Err(invalid("towers.k", "must be at least 1"));
            }
            let n = 1usize << t.resolution_log2;
            if t.sets.iter().any(|[a, b]| a > b || *b > n) {
                return Err(invalid("towers.sets", format!("intervals must satisfy start <= end <= {n}")));
            }
            if t.window == 0 || t.rigidity_window == 0 {
                return Err(invalid("towers.window", "windows must be at least 1"));
            }
        }
        Ok(())
    }

    /// Directory for reports: `$CONJDENSE_OUT_DIR` when set, else `output.dir`.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(&self.output.dir))
    }
}

/// Serializes through `serde_json::Value` (keys sorted), pretty-printed with
/// LF line endings and a trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&serde_json::to_value(value)?)?;
    text.push('\n');
    Ok(text)
}

/// Git-style blob hash of the compact canonical config JSON.
pub fn content_hash(config: &ExperimentConfig) -> Result<String> {
    let body = serde_json::to_string(&serde_json::to_value(config)?)?;
    let mut hasher = Sha1::new();
    hasher.update(format!("blob {}\0", body.len()).as_bytes());
    hasher.update(body.as_bytes());
    Ok(hasher.finalize().iter().fold(String::with_capacity(40), |mut out, b| {
        let _ = write!(out, "{b:02x}");
        out
    }))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjugacySection {
    pub refined: RefinedCollection,
    pub independence: IndependenceReport,
    pub search_success: bool,
    pub trials_used: u64,
    pub best_trial: u64,
    #[serde(with = "rational::as_str")]
    pub eta_max_skew: Rational,
    #[serde(with = "rational::vec_as_str")]
    pub gaps: Vec<Rational>,
    pub certificate: ConjugacyCertificate,
    /// Direct membership of `V` in `U(T, q, epsilon)`.
    pub direct: Membership,
    pub audits: Vec<ContainmentRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowersSection {
    pub rank_one: RankOneResult,
    pub openness: Option<OpennessCertificate>,
    pub openness_error: Option<String>,
    /// Windowed rigidity surrogate per test set.
    #[serde(with = "rational::vec_as_str")]
    pub rigidity_a: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub content_hash: String,
    pub conjugacy: ConjugacySection,
    pub towers: Option<TowersSection>,
    pub verdicts: BTreeMap<String, bool>,
}

impl RunRecord {
    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }

    pub fn to_json(&self) -> Result<String> {
        canonical_json(self)
    }
}

/// Wall-clock duration of each pipeline stage, in execution order.
#[derive(Clone, Debug, Default)]
pub struct StageTimings(pub Vec<(&'static str, Duration)>);

impl StageTimings {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.0.push((stage, start.elapsed()));
        out
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    run_experiment_timed(config).map(|(record, _)| record)
}

pub fn run_experiment_timed(config: &ExperimentConfig) -> Result<(RunRecord, StageTimings)> {
    config.validate()?;
    let mut timings = StageTimings::default();
    let space = GridSpace::with_log2(config.resolution_log2)?;
    let s = config.map.build(space, config.seed);
    let q = config.q.iter().map(|u| AtomUnion::from_cylinders_auto(u)).collect::<Result<Vec<_>>>()?;

    let run = timings.time("conjugacy", || {
        conjugacy_demo(
            &s,
            q,
            config.epsilon.clone(),
            config.window,
            config.k,
            Some(config.independence_window),
            config.seed,
            config.trials,
        )
    })?;
    let c = &run.conjugacy;
    let mut verdicts = BTreeMap::new();
    verdicts.insert("ledger_identities".to_string(), c.ledger.holds());
    verdicts.insert("independence_target_met".to_string(), c.search.success);
    verdicts.insert("certificate_bound".to_string(), c.certificate.bound_holds);
    verdicts.insert("certificate_pass".to_string(), c.certificate.pass);
    verdicts.insert("direct_membership".to_string(), run.verdict);
    verdicts.insert("certificate_consistent".to_string(), run.consistent);
    verdicts.insert("containment_audit".to_string(), run.audits.iter().all(ContainmentRecord::implication_holds));
    let conjugacy = ConjugacySection {
        refined: run.refined().clone(),
        independence: c.search.report.clone(),
        search_success: c.search.success,
        trials_used: c.search.trials_used,
        best_trial: c.search.best_trial,
        eta_max_skew: c.eta.max_skew.clone(),
        gaps: c.conjugator.gaps.clone(),
        certificate: c.certificate.clone(),
        direct: run.direct.clone(),
        audits: run.audits.to_vec(),
    };

    let towers = match &config.towers {
        Some(t) => Some(timings.time("towers", || run_towers(t, &mut verdicts))?),
        None => None,
    };

    let record = RunRecord { config: config.clone(), content_hash: content_hash(config)?, conjugacy, towers, verdicts };
    Ok((record, timings))
}

fn run_towers(t: &TowersConfig, verdicts: &mut BTreeMap<String, bool>) -> Result<TowersSection> {
    let space = GridSpace::with_log2(t.resolution_log2)?;
    let s = t.map.build(space, t.perturb_seed);
    let sets = t.sets.iter().map(|&[a, b]| CellSet::interval(space, a, b)).collect::<Result<Vec<_>>>()?;
    let rank_one = rank_one_membership(&s, &sets, t.k, &t.heights)?;
    verdicts.insert("rank_one".to_string(), rank_one.verdict);
    let v = perturb(&s, t.perturb_seed, t.swaps)?;
    let tower = build_tower(&s, rank_one.tower.height())?;
    let (openness, openness_error) = match openness_certificate(&s, &tower, t.k, &sets, &v, t.window) {
        Ok(cert) => (Some(cert), None),
        Err(e @ Error::AccuracyPrecondition { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    match &openness {
        Some(cert) => {
            verdicts.insert("openness_pass".to_string(), cert.pass);
            verdicts.insert("openness_chain".to_string(), cert.chain_holds);
        }
        None => {
            verdicts.insert("openness_pass".to_string(), false);
        }
    }
    let rigidity_a = sets
        .iter()
        .filter(|a| !a.is_empty())
        .map(|a| partial_rigidity_estimate(&s, a, t.rigidity_window))
        .collect::<Result<Vec<_>>>()?;
    Ok(TowersSection { rank_one, openness, openness_error, rigidity_a })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// CSV of certificate rows with header `u,v,m,t_side,v_side,deviation`.
pub fn deviation_csv(rows: &[DeviationRow]) -> String {
    let mut out = String::from(DeviationRow::CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

/// CSV of the openness chain with header `name,value,bound,strict,holds`.
pub fn chain_csv(cert: &OpennessCertificate) -> String {
    let mut out = String::from("name,value,bound,strict,holds\n");
    for e in &cert.chain {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.name,
            format_rational(&e.value),
            format_rational(&e.bound),
            e.strict,
            e.holds
        );
    }
    out
}

/// Writes `<stem>.record.json`, `<stem>.deviations.csv` and, when an
/// openness certificate is present, `<stem>.chain.csv` into `dir`.
pub fn emit_reports(record: &RunRecord, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let stem = &record.config.output.stem;
    let mut written = Vec::new();
    let mut write = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    if formats.contains(&ReportFormat::Json) {
        write(format!("{stem}.record.json"), record.to_json()?)?;
    }
    if formats.contains(&ReportFormat::Csv) {
        write(format!("{stem}.deviations.csv"), deviation_csv(&record.conjugacy.certificate.deviations))?;
        if let Some(cert) = record.towers.as_ref().and_then(|t| t.openness.as_ref()) {
            write(format!("{stem}.chain.csv"), chain_csv(cert))?;
        }
    }
    Ok(written)
}
