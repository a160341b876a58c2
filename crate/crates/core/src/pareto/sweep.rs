//! Grid sweeps over trade-off weights, window length, and temporal
//! resolution, producing one (utility, privacy) point per trained cell.
//!
//! Each (resolution, window) block prepares its data once and trains two
//! standalone reference models — the predictor and the re-identifier — that
//! every weighted cell in the block is compared against. Finished units are
//! cached on disk keyed by a hash of everything that determines them, so an
//! interrupted sweep resumes instead of retraining.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::front::pareto_front;
use crate::dataio::LocationRecord;
use crate::error::SweepError;
use crate::metrics::{
    build_report, evaluate_model, EvaluationReport, ModelEvaluation, PercentConvention,
};
use crate::nnpae::{ArchConfig, LagrangeWeights, ModelDims, ModelKind};
use crate::pipeline::{prepare, PrepConfig, PreparedData};
use crate::seeding::sub_seed;
use crate::training::{train_pae, train_standalone, write_atomic, TrainConfig};

/// The grid to sweep. Every combination of weights × window length ×
/// resolution is trained `repeats` times with distinct derived seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub lambda_grid: Vec<LagrangeWeights>,
    pub sequence_lengths: Vec<usize>,
    pub granularities_minutes: Vec<u32>,
    pub repeats: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            lambda_grid: vec![
                LagrangeWeights { lambda1: 0.1, lambda2: 0.6, lambda3: 0.3 },
                LagrangeWeights { lambda1: 0.1, lambda2: 0.8, lambda3: 0.1 },
            ],
            sequence_lengths: vec![5, 10],
            granularities_minutes: vec![10],
            repeats: 1,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |field, problem| Err(SweepError::BadConfig { field, problem });
        if self.lambda_grid.is_empty() {
            return bad("lambda_grid", "must not be empty");
        }
        if self.sequence_lengths.is_empty() {
            return bad("sequence_lengths", "must not be empty");
        }
        if self.granularities_minutes.is_empty() {
            return bad("granularities_minutes", "must not be empty");
        }
        if self.repeats == 0 {
            return bad("repeats", "must be at least 1");
        }
        Ok(())
    }

    /// Number of training cells the grid describes.
    pub fn cell_count(&self) -> usize {
        self.lambda_grid.len()
            * self.sequence_lengths.len()
            * self.granularities_minutes.len()
            * self.repeats
    }
}

/// One swept configuration's outcome: where it landed on the two axes,
/// which knobs produced it, and the full evaluation behind the numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParetoPoint {
    /// Top-1 next-location accuracy on the test split.
    pub utility: f64,
    /// Top-1 re-identification *inaccuracy* on the test split, so both axes
    /// read "larger is better" and points compare without any reference.
    pub privacy: f64,
    pub weights: LagrangeWeights,
    pub sequence_length: usize,
    pub granularity_minutes: u32,
    /// The derived seed this cell actually trained with.
    pub seed: u64,
    pub report: EvaluationReport,
}

impl ParetoPoint {
    pub fn axes(&self) -> (f64, f64) {
        (self.utility, self.privacy)
    }
}

/// A unit that went wrong, kept as data so the sweep can finish the rest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepFailure {
    /// Which unit failed: `prepare`, `baseline-utility`, `baseline-privacy`,
    /// or `cell`.
    pub stage: String,
    /// The cell's weights; absent for per-block units.
    pub weights: Option<LagrangeWeights>,
    pub sequence_length: usize,
    pub granularity_minutes: u32,
    pub seed: u64,
    pub error: String,
}

/// Everything a sweep produced: finished points plus recorded failures.
#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub points: Vec<ParetoPoint>,
    pub failures: Vec<SweepFailure>,
}

impl SweepOutcome {
    /// Frontier membership over the collected points, as ascending indices
    /// into `points`.
    pub fn front_indices(&self) -> Vec<usize> {
        let axes: Vec<(f64, f64)> = self.points.iter().map(ParetoPoint::axes).collect();
        pareto_front(&axes)
    }
}

/// Writes the flat per-point table: one row per point, `on_front` telling
/// frontier membership. `front` must be ascending indices into `points`.
pub fn write_sweep_csv<W: Write>(
    points: &[ParetoPoint],
    front: &[usize],
    mut writer: W,
) -> std::io::Result<()> {
    writeln!(
        writer,
        "utility,privacy,lambda1,lambda2,lambda3,SL,granularity,seed,on_front"
    )?;
    for (index, point) in points.iter().enumerate() {
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{},{}",
            point.utility,
            point.privacy,
            point.weights.lambda1,
            point.weights.lambda2,
            point.weights.lambda3,
            point.sequence_length,
            point.granularity_minutes,
            point.seed,
            front.binary_search(&index).is_ok(),
        )?;
    }
    Ok(())
}

/// What one cache file holds. Failures are cached too: everything here is
/// deterministic, so a unit that failed once will fail the same way again.
///
/// Externally tagged on purpose: internal tagging buffers the variant body,
/// and buffered JSON keeps map keys as strings, which the integer-keyed
/// top-n maps inside the evaluations refuse to deserialize from.
#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CacheEntry {
    Done { point: ParetoPoint },
    Failed { error: String },
    Baseline { evaluation: ModelEvaluation },
    BaselineFailed { error: String },
}

/// Identity of one cached unit: every input that determines its output.
/// Hashing its canonical JSON gives the cache file name.
#[derive(Serialize)]
struct UnitKey<'a> {
    version: u32,
    dataset_sha256: &'a str,
    prep: &'a PrepConfig,
    arch: &'a ArchConfig,
    /// Fully resolved for the unit (weights and seed already overridden).
    train: &'a TrainConfig,
    unit: &'static str,
}

const CACHE_KEY_VERSION: u32 = 1;

struct Cache<'a> {
    dir: Option<&'a Path>,
}

impl Cache<'_> {
    fn file_name(key: &UnitKey) -> String {
        let json = serde_json::to_string(key).expect("cache key serializes");
        let digest = Sha256::digest(json.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        format!("{hex}.json")
    }

    fn load(&self, name: &str) -> Result<Option<CacheEntry>, SweepError> {
        let Some(dir) = self.dir else { return Ok(None) };
        let path = dir.join(name);
        match std::fs::read_to_string(&path) {
            // A corrupt entry is treated as a miss and recomputed.
            Ok(text) => Ok(serde_json::from_str(&text).ok()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(SweepError::CacheIo { path: path.display().to_string(), source: e }),
        }
    }

    fn store(&self, name: &str, entry: &CacheEntry) -> Result<(), SweepError> {
        let Some(dir) = self.dir else { return Ok(()) };
        let path = dir.join(name);
        let json = serde_json::to_vec_pretty(entry).expect("cache entry serializes");
        write_atomic(&path, &json)
            .map_err(|e| SweepError::CacheIo { path: path.display().to_string(), source: e })
    }
}

/// Content hash of the input records, part of every cache key so a cache
/// directory can never serve results for different data.
fn hash_records(records: &[LocationRecord]) -> String {
    let mut hasher = Sha256::new();
    for record in records {
        hasher.update(record.user_id.as_bytes());
        hasher.update([0u8]);
        let utc = record.timestamp.and_utc();
        hasher.update(utc.timestamp().to_le_bytes());
        hasher.update(utc.timestamp_subsec_nanos().to_le_bytes());
        hasher.update(record.latitude.to_bits().to_le_bytes());
        hasher.update(record.longitude.to_bits().to_le_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn seed_from(master: u64, label: &str) -> u64 {
    let bytes = sub_seed(master, label);
    u64::from_le_bytes(bytes[..8].try_into().expect("sub-seed has at least 8 bytes"))
}

/// One weighted cell waiting to run.
struct CellJob {
    /// Position in the sweep's overall enumeration order.
    slot: usize,
    weights: LagrangeWeights,
    train: TrainConfig,
    cache_name: String,
}

/// Result of one block's reference models; either side may be missing when
/// its training or evaluation failed.
struct BlockBaselines {
    utility: Option<ModelEvaluation>,
    privacy: Option<ModelEvaluation>,
}

/// Runs the whole grid. `train.seed` acts as the master seed every cell and
/// reference seed is derived from; `workers` caps how many cells train
/// concurrently (values below 1 are treated as 1). Cell and reference
/// failures are recorded in the outcome; only configuration and cache I/O
/// problems abort the sweep.
pub fn run_sweep(
    records: &[LocationRecord],
    prep: &PrepConfig,
    arch: &ArchConfig,
    train: &TrainConfig,
    sweep: &SweepConfig,
    cache_dir: Option<&Path>,
    workers: usize,
) -> Result<SweepOutcome, SweepError> {
    sweep.validate()?;
    let workers = workers.max(1);
    let cache = Cache { dir: cache_dir };
    let dataset_sha256 = hash_records(records);
    let master = train.seed;

    let mut slots: Vec<Option<ParetoPoint>> = Vec::new();
    slots.resize_with(sweep.cell_count(), || None);
    let mut failures: Vec<SweepFailure> = Vec::new();
    let mut next_slot = 0;

    for &granularity in &sweep.granularities_minutes {
        for &sequence_length in &sweep.sequence_lengths {
            let block_prep = PrepConfig {
                resolution_minutes: granularity,
                sequence_length,
                ..prep.clone()
            };

            // Resolve every unit in this block up front so cache hits can
            // skip data preparation entirely.
            let mut jobs: Vec<CellJob> = Vec::new();
            for weights in &sweep.lambda_grid {
                for repeat in 0..sweep.repeats {
                    let label = format!(
                        "sweep/g{granularity}/sl{sequence_length}/l1{}/l2{}/l3{}/rep{repeat}",
                        weights.lambda1, weights.lambda2, weights.lambda3
                    );
                    let cell_train = TrainConfig {
                        weights: *weights,
                        seed: seed_from(master, &label),
                        ..train.clone()
                    };
                    let key = UnitKey {
                        version: CACHE_KEY_VERSION,
                        dataset_sha256: &dataset_sha256,
                        prep: &block_prep,
                        arch,
                        train: &cell_train,
                        unit: "cell",
                    };
                    jobs.push(CellJob {
                        slot: next_slot,
                        weights: *weights,
                        cache_name: Cache::file_name(&key),
                        train: cell_train,
                    });
                    next_slot += 1;
                }
            }

            // Reference models share the base config; their weights are
            // inert (single-objective training ignores them), so they are
            // pinned to a canonical value to keep cache keys stable.
            let reference_train = |unit: &str| TrainConfig {
                weights: LagrangeWeights { lambda1: 1.0, lambda2: 1.0, lambda3: 1.0 },
                seed: seed_from(master, &format!("sweep/g{granularity}/sl{sequence_length}/{unit}")),
                ..train.clone()
            };
            let baseline_utility_train = reference_train("baseline-utility");
            let baseline_privacy_train = reference_train("baseline-privacy");
            let baseline_name = |train: &TrainConfig, unit: &'static str| {
                Cache::file_name(&UnitKey {
                    version: CACHE_KEY_VERSION,
                    dataset_sha256: &dataset_sha256,
                    prep: &block_prep,
                    arch,
                    train,
                    unit,
                })
            };
            let utility_name = baseline_name(&baseline_utility_train, "baseline-utility");
            let privacy_name = baseline_name(&baseline_privacy_train, "baseline-privacy");

            // First pass: serve what the cache already has.
            let mut pending: Vec<CellJob> = Vec::new();
            for job in jobs {
                match cache.load(&job.cache_name)? {
                    Some(CacheEntry::Done { point }) => slots[job.slot] = Some(point),
                    Some(CacheEntry::Failed { error }) => failures.push(SweepFailure {
                        stage: "cell".into(),
                        weights: Some(job.weights),
                        sequence_length,
                        granularity_minutes: granularity,
                        seed: job.train.seed,
                        error,
                    }),
                    _ => pending.push(job),
                }
            }
            let cached_baseline = |name: &str| -> Result<Option<CacheEntry>, SweepError> {
                cache.load(name)
            };
            let mut baselines = BlockBaselines { utility: None, privacy: None };
            let mut baseline_pending = Vec::new();
            match cached_baseline(&utility_name)? {
                Some(CacheEntry::Baseline { evaluation }) => baselines.utility = Some(evaluation),
                Some(CacheEntry::BaselineFailed { error }) => failures.push(SweepFailure {
                    stage: "baseline-utility".into(),
                    weights: None,
                    sequence_length,
                    granularity_minutes: granularity,
                    seed: baseline_utility_train.seed,
                    error,
                }),
                _ => baseline_pending.push((
                    "baseline-utility",
                    ModelKind::StandalonePredictor,
                    &baseline_utility_train,
                    &utility_name,
                )),
            }
            match cached_baseline(&privacy_name)? {
                Some(CacheEntry::Baseline { evaluation }) => baselines.privacy = Some(evaluation),
                Some(CacheEntry::BaselineFailed { error }) => failures.push(SweepFailure {
                    stage: "baseline-privacy".into(),
                    weights: None,
                    sequence_length,
                    granularity_minutes: granularity,
                    seed: baseline_privacy_train.seed,
                    error,
                }),
                _ => baseline_pending.push((
                    "baseline-privacy",
                    ModelKind::StandaloneReidentifier,
                    &baseline_privacy_train,
                    &privacy_name,
                )),
            }

            if pending.is_empty() && baseline_pending.is_empty() {
                continue; // Whole block served from cache; no data needed.
            }

            // Something must actually run: prepare this block's data once.
            let prepared = match prepare(records, &block_prep, master) {
                Ok(prepared) => prepared,
                Err(e) => {
                    failures.push(SweepFailure {
                        stage: "prepare".into(),
                        weights: None,
                        sequence_length,
                        granularity_minutes: granularity,
                        seed: master,
                        error: e.to_string(),
                    });
                    continue;
                }
            };
            let dims = ModelDims::for_vocab(&prepared.vocab, sequence_length, arch);

            for (stage, kind, config, name) in baseline_pending {
                match run_reference(kind, config, &dims, &prepared) {
                    Ok(evaluation) => {
                        cache.store(name, &CacheEntry::Baseline { evaluation: evaluation.clone() })?;
                        match kind {
                            ModelKind::StandalonePredictor => baselines.utility = Some(evaluation),
                            _ => baselines.privacy = Some(evaluation),
                        }
                    }
                    Err(error) => {
                        cache.store(name, &CacheEntry::BaselineFailed { error: error.clone() })?;
                        failures.push(SweepFailure {
                            stage: stage.into(),
                            weights: None,
                            sequence_length,
                            granularity_minutes: granularity,
                            seed: config.seed,
                            error,
                        });
                    }
                }
            }

            // Train the remaining cells, possibly in parallel. Results carry
            // their slot so output order never depends on scheduling.
            let next = AtomicUsize::new(0);
            type CellResult = (usize, Result<Result<ParetoPoint, (LagrangeWeights, u64, String)>, SweepError>);
            let results: Mutex<Vec<CellResult>> = Mutex::new(Vec::new());
            std::thread::scope(|scope| {
                for _ in 0..workers.min(pending.len()) {
                    scope.spawn(|| loop {
                        let index = next.fetch_add(1, Ordering::Relaxed);
                        let Some(job) = pending.get(index) else { break };
                        let outcome = run_cell(
                            job,
                            sequence_length,
                            granularity,
                            &dims,
                            &prepared,
                            &baselines,
                            &cache,
                        );
                        results.lock().expect("no panics hold this lock").push((index, outcome));
                    });
                }
            });
            let mut results = results.into_inner().expect("workers finished");
            results.sort_by_key(|(index, _)| *index);
            for ((_, outcome), job) in results.into_iter().zip(&pending) {
                match outcome? {
                    Ok(point) => slots[job.slot] = Some(point),
                    Err((weights, seed, error)) => failures.push(SweepFailure {
                        stage: "cell".into(),
                        weights: Some(weights),
                        sequence_length,
                        granularity_minutes: granularity,
                        seed,
                        error,
                    }),
                }
            }
        }
    }

    Ok(SweepOutcome { points: slots.into_iter().flatten().collect(), failures })
}

/// Trains and evaluates one reference model; any error comes back as a
/// plain string since it becomes failure data, not a sweep abort.
fn run_reference(
    kind: ModelKind,
    config: &TrainConfig,
    dims: &ModelDims,
    prepared: &PreparedData,
) -> Result<ModelEvaluation, String> {
    let outcome = train_standalone(
        kind,
        &prepared.train,
        &prepared.validation,
        dims,
        config,
        &prepared.vocab,
    )
    .map_err(|e| e.to_string())?;
    evaluate_model(
        &outcome.params,
        &prepared.test,
        &prepared.vocab,
        config.batch_size,
    )
    .map_err(|e| e.to_string())
}

/// Trains and evaluates one weighted cell. Outer error = cache I/O (fatal
/// for the sweep); inner error = the cell's own failure (recorded).
#[allow(clippy::type_complexity)]
fn run_cell(
    job: &CellJob,
    sequence_length: usize,
    granularity_minutes: u32,
    dims: &ModelDims,
    prepared: &PreparedData,
    baselines: &BlockBaselines,
    cache: &Cache,
) -> Result<Result<ParetoPoint, (LagrangeWeights, u64, String)>, SweepError> {
    let failed = |error: String| (job.weights, job.train.seed, error);
    let trained = train_pae(
        &prepared.train,
        &prepared.validation,
        dims,
        &job.train,
        &prepared.vocab,
    );
    let point = match trained {
        Err(e) => Err(failed(e.to_string())),
        Ok(outcome) => match evaluate_model(
            &outcome.params,
            &prepared.test,
            &prepared.vocab,
            job.train.batch_size,
        ) {
            Err(e) => Err(failed(e.to_string())),
            Ok(evaluation) => {
                let report = build_report(
                    &evaluation,
                    baselines.utility.as_ref(),
                    baselines.privacy.as_ref(),
                    PercentConvention::default(),
                );
                let top1 = |map: &Option<std::collections::BTreeMap<usize, f64>>, what| {
                    map.as_ref()
                        .and_then(|m| m.get(&1).copied())
                        .ok_or_else(|| failed(format!("evaluation produced no top-1 {what}")))
                };
                match (
                    top1(&evaluation.top_n_utility, "next-location accuracy"),
                    top1(&evaluation.top_n_privacy, "re-identification accuracy"),
                ) {
                    (Ok(utility), Ok(reid)) => Ok(ParetoPoint {
                        utility,
                        privacy: 1.0 - reid,
                        weights: job.weights,
                        sequence_length,
                        granularity_minutes,
                        seed: job.train.seed,
                        report,
                    }),
                    (Err(e), _) | (_, Err(e)) => Err(e),
                }
            }
        },
    };
    match &point {
        Ok(point) => cache.store(&job.cache_name, &CacheEntry::Done { point: point.clone() })?,
        Err((_, _, error)) => {
            cache.store(&job.cache_name, &CacheEntry::Failed { error: error.clone() })?
        }
    }
    Ok(point)
}
