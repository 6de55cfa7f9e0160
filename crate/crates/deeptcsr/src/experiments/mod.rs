//! Config-driven experiment commands: data generation, training,
//! evaluation, method comparison sweeps, and the target-learning-rate
//! ablation. The `dtcsr` binary is a thin shell over these functions.
//!
//! Every command takes a [`KvConfig`] plus an output directory, applies
//! documented defaults, and writes a `resolved_config.json` that pins
//! every value it used; rerunning a command from its resolved config
//! reproduces its outputs byte for byte. Sweep cells are independent and
//! run in parallel, with per-cell sub-seeds derived from the base seed
//! so the schedule never affects the results.

pub mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, EvalReport};
use crate::model::{Architecture, HazardModel, ModelDims};
use crate::seqdata::{dataset_stats, Dataset, DatasetStats};
use crate::synthgen::{calibrate_intercept, default_coefficients, generate_random_walk, RwConfig};
use crate::targets::{self, TableMode};
use crate::trainer::{self, Checkpoint, LossMode, OptimizerKind, TrainConfig};

pub use config::{KvConfig, Resolver};

// Distinct sub-stream salts; every per-cell seed is derived from
// (base seed, salt, index) so cells never share randomness.
const SALT_COEF: u64 = 0x01;
const SALT_TEST: u64 = 0x02;
const SALT_TRAIN: u64 = 0x03;
const SALT_SPLIT: u64 = 0x04;
const SALT_INIT: u64 = 0x05;
const SALT_SHUFFLE: u64 = 0x06;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for one cell of a sweep.
pub fn derive_seed(base: u64, salt: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(salt)) ^ index)
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn opt_to_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------------
// shared resolution helpers

fn resolve_arch(r: &mut Resolver) -> Result<(Architecture, usize)> {
    let arch = r.str_or("model.arch", "linear");
    let hidden = r.usize_or("model.hidden", 16)?;
    let arch = match arch.as_str() {
        "linear" | "linear-cox" => Architecture::LinearCox,
        "feedforward" => Architecture::Feedforward,
        other => {
            return Err(Error::invalid_config(format!(
                "model.arch `{other}` (expected linear | feedforward)"
            )))
        }
    };
    Ok((arch, hidden))
}

fn resolve_train_template(r: &mut Resolver) -> Result<TrainConfig> {
    let loss_mode = match r.str_or("train.loss_mode", "dtcsr").as_str() {
        "dtcsr" => LossMode::Dtcsr,
        "landmarking" => LossMode::Landmarking,
        "init_state" => LossMode::InitState,
        other => {
            return Err(Error::invalid_config(format!(
                "train.loss_mode `{other}` (expected dtcsr | landmarking | init_state)"
            )))
        }
    };
    let table_mode = match r.str_or("train.table_mode", "within_window").as_str() {
        "within_window" => TableMode::WithinWindow,
        "extended" => TableMode::Extended,
        other => {
            return Err(Error::invalid_config(format!(
                "train.table_mode `{other}` (expected within_window | extended)"
            )))
        }
    };
    let optimizer = match r.str_or("train.optimizer", "adam").as_str() {
        "adam" => OptimizerKind::Adam,
        "sgd" => OptimizerKind::Sgd,
        other => {
            return Err(Error::invalid_config(format!(
                "train.optimizer `{other}` (expected adam | sgd)"
            )))
        }
    };
    Ok(TrainConfig {
        lambda: r.f64_or("train.lambda", 0.0)?,
        tau: r.f64_or("train.tau", 0.01)?,
        learning_rate: r.f64_or("train.lr", 0.01)?,
        weight_decay: r.f64_or("train.weight_decay", 0.0001)?,
        batch_size: r.usize_or("train.batch_size", 128)?,
        epochs: r.usize_or("train.epochs", 100)?,
        loss_mode,
        table_mode,
        optimizer,
        beta1: r.f64_or("train.beta1", 0.9)?,
        beta2: r.f64_or("train.beta2", 0.999)?,
        epsilon: r.f64_or("train.epsilon", 1e-8)?,
        seed: 0,
    })
}

struct GeneratorSpec {
    dim: usize,
    horizon: usize,
    a: Vec<f64>,
    b: f64,
}

/// Resolves the random-walk generator block, calibrating the intercept
/// toward `gen.target_censoring` when `gen.b` is not given. The resolved
/// coefficients and intercept are echoed back so a rerun from the
/// resolved config skips calibration and stays bit-identical.
fn resolve_generator(r: &mut Resolver, base_seed: u64, default_horizon: usize) -> Result<GeneratorSpec> {
    let dim = r.usize_or("gen.dim", 20)?;
    let horizon = r.usize_or("gen.horizon", default_horizon)?;
    let a = match r.f64_list("gen.a")? {
        Some(a) => {
            if a.len() != dim {
                return Err(Error::invalid_config(format!(
                    "gen.a has {} entries, gen.dim is {dim}",
                    a.len()
                )));
            }
            a
        }
        None => {
            let a = default_coefficients(dim, derive_seed(base_seed, SALT_COEF, 0));
            r.note(
                "gen.a",
                a.iter()
                    .map(|v| format!("{v:?}"))
                    .collect::<Vec<_>>()
                    .join(","),
            );
            a
        }
    };
    // resolved regardless so a rerun of an echoed config (which carries
    // both the target and the calibrated intercept) stays valid
    let target = r.f64_or("gen.target_censoring", 0.2)?;
    let b = match r.f64_list("gen.b")? {
        Some(b) if b.len() == 1 => b[0],
        Some(_) => return Err(Error::invalid_config("gen.b must be a single number")),
        None => {
            let b = calibrate_intercept(dim, horizon, &a, target, base_seed)?;
            r.note("gen.b", format!("{b:?}"));
            b
        }
    };
    Ok(GeneratorSpec { dim, horizon, a, b })
}

// ---------------------------------------------------------------------
// generate

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateOutcome {
    pub dataset_path: PathBuf,
    pub stats: DatasetStats,
    pub rw_config: RwConfig,
}

/// `generate`: write a random-walk dataset plus its exact generator
/// config and summary statistics.
pub fn cmd_generate(cfg: &KvConfig, out: &Path) -> Result<GenerateOutcome> {
    ensure_out_dir(out)?;
    let mut r = Resolver::new(cfg);
    let seed = r.u64_or("seed", 0)?;
    let n = r.usize_or("gen.n", 1000)?;
    let spec = resolve_generator(&mut r, seed, 11)?;
    r.reject_unknown_keys()?;

    let rw = RwConfig {
        n,
        dim: spec.dim,
        horizon: spec.horizon,
        a: spec.a,
        b: spec.b,
        seed,
    };
    let ds = generate_random_walk(&rw)?;
    let dataset_path = out.join("dataset.jsonl");
    ds.save(&dataset_path)?;
    let stats = dataset_stats(&ds);
    write_json(&out.join("rwconfig.json"), &rw)?;
    write_json(&out.join("stats.json"), &stats)?;
    r.write_resolved(out, "generate")?;
    Ok(GenerateOutcome {
        dataset_path,
        stats,
        rw_config: rw,
    })
}

// ---------------------------------------------------------------------
// train

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
    pub final_loss: f64,
}

/// `train`: fit one model on a dataset file and persist the checkpoint
/// and per-epoch log.
pub fn cmd_train(cfg: &KvConfig, out: &Path) -> Result<TrainOutcome> {
    ensure_out_dir(out)?;
    let mut r = Resolver::new(cfg);
    let seed = r.u64_or("seed", 0)?;
    let data_path = r.require_str("data.path")?;
    let eval_path = r.str_or("train.eval_path", "");
    let resume_path = r.str_or("train.resume", "");
    let include_timing = r.bool_or("log.timing", false)?;
    let (arch, hidden) = resolve_arch(&mut r)?;
    let mut train_cfg = resolve_train_template(&mut r)?;
    r.reject_unknown_keys()?;
    train_cfg.seed = seed;

    let ds = Dataset::load(&data_path)?;
    let eval_ds = if eval_path.is_empty() {
        None
    } else {
        Some(Dataset::load(&eval_path)?)
    };

    let result = if resume_path.is_empty() {
        let dims = ModelDims {
            feature_dim: ds.feature_dim(),
            horizon: ds.horizon(),
            hidden,
        };
        let model = HazardModel::init(arch, dims, seed)?;
        trainer::fit(&ds, model, &train_cfg, eval_ds.as_ref())?
    } else {
        let checkpoint = Checkpoint::load(&resume_path)?;
        trainer::resume(&ds, &checkpoint, &train_cfg, eval_ds.as_ref())?
    };

    let checkpoint_path = out.join("checkpoint.json");
    result.checkpoint().save(&checkpoint_path)?;
    let log_path = out.join("train_log.csv");
    result.log.write_csv(&log_path, include_timing)?;
    r.write_resolved(out, "train")?;
    Ok(TrainOutcome {
        checkpoint_path,
        log_path,
        final_loss: result.log.epochs.last().map(|e| e.mean_loss).unwrap_or(0.0),
    })
}

// ---------------------------------------------------------------------
// evaluate

/// `evaluate`: score a checkpoint on a dataset; writes the report JSON
/// and the Brier curve CSV. An undefined concordance (no comparable
/// pairs) is reported as a null field, not an error.
pub fn cmd_evaluate(cfg: &KvConfig, out: &Path) -> Result<EvalReport> {
    ensure_out_dir(out)?;
    let mut r = Resolver::new(cfg);
    let checkpoint_path = r.require_str("eval.checkpoint")?;
    let data_path = r.require_str("eval.data")?;
    r.reject_unknown_keys()?;

    let checkpoint = Checkpoint::load(&checkpoint_path)?;
    let ds = Dataset::load(&data_path)?;
    let report = metrics::evaluate_model(&checkpoint.model, &ds)?;

    write_json(&out.join("report.json"), &report)?;
    let bs_path = out.join("bs_curve.csv");
    let mut w = csv_writer(&bs_path)?;
    w.write_record(["k", "bs"]).map_err(|e| csv_err(&bs_path, e))?;
    for (k, bs) in report.bs_curve.iter().enumerate() {
        w.write_record([k.to_string(), bs.to_string()])
            .map_err(|e| csv_err(&bs_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&bs_path, e))?;
    r.write_resolved(out, "evaluate")?;
    Ok(report)
}

// ---------------------------------------------------------------------
// compare

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub method: String,
    pub size: usize,
    pub seed: u64,
    pub ci: Option<f64>,
    pub ibs: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub cells: Vec<CellResult>,
    pub n_failed: usize,
    pub cells_csv: PathBuf,
    pub aggregate_csv: PathBuf,
}

#[derive(Debug, Clone, Copy)]
enum Split {
    Holdout(f64),
    KFold(usize),
}

fn parse_split(raw: &str) -> Result<Split> {
    if let Some(frac) = raw.strip_prefix("holdout:") {
        let f: f64 = frac
            .parse()
            .map_err(|_| Error::invalid_config(format!("split fraction `{frac}`")))?;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::invalid_config("holdout fraction must be in (0, 1)"));
        }
        Ok(Split::Holdout(f))
    } else if let Some(k) = raw.strip_prefix("kfold:") {
        let k: usize = k
            .parse()
            .map_err(|_| Error::invalid_config(format!("fold count `{k}`")))?;
        if k < 2 {
            return Err(Error::invalid_config("kfold needs at least 2 folds"));
        }
        Ok(Split::KFold(k))
    } else {
        Err(Error::invalid_config(format!(
            "split `{raw}` (expected holdout:FRACTION | kfold:K)"
        )))
    }
}

enum CompareSource {
    Generator {
        spec: GeneratorSpec,
        pool_n: usize,
        test: Dataset,
    },
    File {
        ds: Dataset,
        split: Split,
    },
}

impl CompareSource {
    /// Train/test data for one cell. Generator cells share the fixed
    /// test set; file cells re-split per seed.
    fn cell_data(
        &self,
        size: usize,
        base_seed: u64,
        cell_seed: u64,
    ) -> Result<(Dataset, Dataset)> {
        match self {
            CompareSource::Generator { spec, pool_n, test } => {
                let pool = generate_random_walk(&RwConfig {
                    n: *pool_n,
                    dim: spec.dim,
                    horizon: spec.horizon,
                    a: spec.a.clone(),
                    b: spec.b,
                    seed: derive_seed(base_seed, SALT_TRAIN, cell_seed),
                })?;
                Ok((pool.take(size), test.clone()))
            }
            CompareSource::File { ds, split } => {
                let n = ds.len();
                if n < 2 {
                    return Err(Error::invalid_config("file source needs >= 2 records"));
                }
                let (test_idx, mut pool_idx): (Vec<usize>, Vec<usize>) = match split {
                    Split::Holdout(f) => {
                        let mut idx: Vec<usize> = (0..n).collect();
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                            base_seed, SALT_SPLIT, cell_seed,
                        ));
                        idx.shuffle(&mut rng);
                        let n_test = ((n as f64 * f).round() as usize).clamp(1, n - 1);
                        (idx[..n_test].to_vec(), idx[n_test..].to_vec())
                    }
                    Split::KFold(k) => {
                        let mut idx: Vec<usize> = (0..n).collect();
                        // fold assignment is fixed per base seed; the cell
                        // seed picks the fold
                        let mut rng =
                            ChaCha8Rng::seed_from_u64(derive_seed(base_seed, SALT_SPLIT, 0));
                        idx.shuffle(&mut rng);
                        let fold = (cell_seed as usize) % k;
                        let fold_size = n.div_ceil(*k);
                        let start = fold * fold_size;
                        let end = (start + fold_size).min(n);
                        let test: Vec<usize> = idx[start..end].to_vec();
                        let pool: Vec<usize> = idx[..start]
                            .iter()
                            .chain(&idx[end..])
                            .copied()
                            .collect();
                        (test, pool)
                    }
                };
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(base_seed, SALT_TRAIN, cell_seed));
                pool_idx.shuffle(&mut rng);
                pool_idx.truncate(size.min(pool_idx.len()));
                Ok((ds.select(&pool_idx), ds.select(&test_idx)))
            }
        }
    }
}

#[derive(Debug, Clone)]
struct MethodSpec {
    label: String,
    loss_mode: LossMode,
    lambda: f64,
}

fn expand_methods(tokens: &[String], lambdas: &[f64]) -> Result<Vec<MethodSpec>> {
    let mut specs = Vec::new();
    for token in tokens {
        match token.as_str() {
            "sa_init" => specs.push(MethodSpec {
                label: "SA Init State".into(),
                loss_mode: LossMode::InitState,
                lambda: 1.0,
            }),
            "sa_landmark" => specs.push(MethodSpec {
                label: "SA Landmarking".into(),
                loss_mode: LossMode::Landmarking,
                lambda: 1.0,
            }),
            "dtcsr" => {
                for &lambda in lambdas {
                    specs.push(MethodSpec {
                        label: format!("DTCSR({lambda:?})"),
                        loss_mode: LossMode::Dtcsr,
                        lambda,
                    });
                }
            }
            other => {
                return Err(Error::invalid_config(format!(
                    "method `{other}` (expected sa_init | sa_landmark | dtcsr)"
                )))
            }
        }
    }
    if specs.is_empty() {
        return Err(Error::invalid_config("compare.methods is empty"));
    }
    Ok(specs)
}

fn fs_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '.' { c } else { '_' })
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `compare`: methods x training sizes x seeds, each cell trained and
/// evaluated independently (in parallel); a failing cell is recorded and
/// the sweep continues. Writes per-cell JSONs, `cells.csv`, and the
/// per-(method, size) `aggregate.csv`.
pub fn cmd_compare(cfg: &KvConfig, out: &Path) -> Result<CompareOutcome> {
    ensure_out_dir(out)?;
    let cells_dir = out.join("cells");
    ensure_out_dir(&cells_dir)?;
    let mut r = Resolver::new(cfg);
    let base_seed = r.u64_or("seed", 0)?;
    let method_tokens = r.str_list_or("compare.methods", "sa_init,sa_landmark,dtcsr");
    let lambdas = r.f64_list_or("compare.lambdas", "0.0")?;
    let sizes = r.usize_list_or("compare.sizes", "50")?;
    let seeds = r.u64_list_or("compare.seeds", "0,1,2,3,4")?;
    let (arch, hidden) = resolve_arch(&mut r)?;
    let template = resolve_train_template(&mut r)?;

    let data_path = r.str_or("data.path", "");
    let source = if data_path.is_empty() {
        let spec = resolve_generator(&mut r, base_seed, 11)?;
        let test_size = r.usize_or("compare.test_size", 1000)?;
        let test = generate_random_walk(&RwConfig {
            n: test_size,
            dim: spec.dim,
            horizon: spec.horizon,
            a: spec.a.clone(),
            b: spec.b,
            seed: derive_seed(base_seed, SALT_TEST, 0),
        })?;
        let pool_n = sizes.iter().copied().max().unwrap_or(1);
        CompareSource::Generator { spec, pool_n, test }
    } else {
        let split = parse_split(&r.str_or("split", "holdout:0.2"))?;
        CompareSource::File {
            ds: Dataset::load(&data_path)?,
            split,
        }
    };
    r.reject_unknown_keys()?;

    let methods = expand_methods(&method_tokens, &lambdas)?;
    let mut jobs = Vec::new();
    for method in &methods {
        for &size in &sizes {
            for &seed in &seeds {
                jobs.push((method.clone(), size, seed));
            }
        }
    }

    let cells: Vec<CellResult> = jobs
        .par_iter()
        .map(|(method, size, cell_seed)| {
            let run = || -> Result<(Option<f64>, f64)> {
                let (train_ds, test_ds) = source.cell_data(*size, base_seed, *cell_seed)?;
                if train_ds.is_empty() {
                    return Err(Error::EmptyDataset);
                }
                let dims = ModelDims {
                    feature_dim: train_ds.feature_dim(),
                    horizon: train_ds.horizon(),
                    hidden,
                };
                let model =
                    HazardModel::init(arch, dims, derive_seed(base_seed, SALT_INIT, *cell_seed))?;
                let cfg = TrainConfig {
                    lambda: method.lambda,
                    loss_mode: method.loss_mode,
                    seed: derive_seed(base_seed, SALT_SHUFFLE, *cell_seed),
                    ..template.clone()
                };
                let fitted = trainer::fit(&train_ds, model, &cfg, None)?;
                let report = metrics::evaluate_model(&fitted.model, &test_ds)?;
                Ok((report.ci, report.ibs))
            };
            match run() {
                Ok((ci, ibs)) => CellResult {
                    method: method.label.clone(),
                    size: *size,
                    seed: *cell_seed,
                    ci,
                    ibs: Some(ibs),
                    error: None,
                },
                Err(e) => CellResult {
                    method: method.label.clone(),
                    size: *size,
                    seed: *cell_seed,
                    ci: None,
                    ibs: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    for cell in &cells {
        let name = format!("{}_s{}_seed{}.json", fs_safe(&cell.method), cell.size, cell.seed);
        write_json(&cells_dir.join(name), cell)?;
    }

    let cells_csv = out.join("cells.csv");
    let mut w = csv_writer(&cells_csv)?;
    w.write_record(["method", "size", "seed", "ci", "ibs", "error"])
        .map_err(|e| csv_err(&cells_csv, e))?;
    for c in &cells {
        w.write_record([
            c.method.clone(),
            c.size.to_string(),
            c.seed.to_string(),
            opt_to_field(c.ci),
            opt_to_field(c.ibs),
            c.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| csv_err(&cells_csv, e))?;
    }
    w.flush().map_err(|e| Error::io(&cells_csv, e))?;

    let aggregate_csv = out.join("aggregate.csv");
    let mut w = csv_writer(&aggregate_csv)?;
    w.write_record([
        "method", "size", "n", "ci_mean", "ci_std", "ibs_mean", "ibs_std",
    ])
    .map_err(|e| csv_err(&aggregate_csv, e))?;
    for method in &methods {
        for &size in &sizes {
            let group: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.method == method.label && c.size == size && c.error.is_none())
                .collect();
            if group.is_empty() {
                continue;
            }
            let cis: Vec<f64> = group.iter().filter_map(|c| c.ci).collect();
            let ibss: Vec<f64> = group.iter().filter_map(|c| c.ibs).collect();
            let (ci_mean, ci_std) = if cis.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&cis);
                (Some(m), Some(s))
            };
            let (ibs_mean, ibs_std) = mean_std(&ibss);
            w.write_record([
                method.label.clone(),
                size.to_string(),
                group.len().to_string(),
                opt_to_field(ci_mean),
                opt_to_field(ci_std),
                ibs_mean.to_string(),
                ibs_std.to_string(),
            ])
            .map_err(|e| csv_err(&aggregate_csv, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&aggregate_csv, e))?;

    r.write_resolved(out, "compare")?;
    let n_failed = cells.iter().filter(|c| c.error.is_some()).count();
    Ok(CompareOutcome {
        cells,
        n_failed,
        cells_csv,
        aggregate_csv,
    })
}

// ---------------------------------------------------------------------
// ablate-tau

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TauRow {
    pub tau: f64,
    /// Mean variability over retained (landmark, offset) entries.
    pub mean_delta: Option<f64>,
    pub n_entries: usize,
    pub n_excluded: usize,
    pub ci_mean: Option<f64>,
    pub ci_std: Option<f64>,
    pub ibs_mean: f64,
    pub ibs_std: f64,
}

#[derive(Debug, Clone)]
pub struct AblateOutcome {
    pub rows: Vec<TauRow>,
    pub delta_samples_csv: PathBuf,
    pub delta_mean_csv: PathBuf,
    pub scores_csv: PathBuf,
}

/// `ablate-tau`: trains one model per (tau, seed) with everything else
/// held fixed, collects the hazard estimates over a frozen test set, and
/// reports the seed-to-seed variability distribution plus mean scores
/// per tau.
pub fn cmd_ablate_tau(cfg: &KvConfig, out: &Path) -> Result<AblateOutcome> {
    ensure_out_dir(out)?;
    let mut r = Resolver::new(cfg);
    let base_seed = r.u64_or("seed", 0)?;
    let taus = r.f64_list_or("ablate.taus", "0.01,0.05,0.1,0.25,0.5,1.0")?;
    let seeds = r.u64_list_or("ablate.seeds", "0,1,2,3,4")?;
    if seeds.len() < 2 {
        return Err(Error::invalid_config("ablate.seeds needs >= 2 seeds"));
    }
    let train_size = r.usize_or("ablate.train_size", 50)?;
    let test_size = r.usize_or("ablate.test_size", 1000)?;
    let spec = resolve_generator(&mut r, base_seed, 30)?;
    let arch_name = r.str_or("model.arch", "feedforward");
    let hidden = r.usize_or("model.hidden", 16)?;
    let arch = match arch_name.as_str() {
        "linear" | "linear-cox" => Architecture::LinearCox,
        "feedforward" => Architecture::Feedforward,
        other => {
            return Err(Error::invalid_config(format!(
                "model.arch `{other}` (expected linear | feedforward)"
            )))
        }
    };
    let mut template = resolve_train_template(&mut r)?;
    template.loss_mode = LossMode::Dtcsr;
    r.reject_unknown_keys()?;

    let test = generate_random_walk(&RwConfig {
        n: test_size,
        dim: spec.dim,
        horizon: spec.horizon,
        a: spec.a.clone(),
        b: spec.b,
        seed: derive_seed(base_seed, SALT_TEST, 0),
    })?;

    struct AblateCell {
        tau: f64,
        hazards: Vec<f64>,
        ci: Option<f64>,
        ibs: f64,
    }

    let mut jobs = Vec::new();
    for &tau in &taus {
        for (idx, &seed) in seeds.iter().enumerate() {
            jobs.push((tau, idx as u64, seed));
        }
    }

    let cells: Vec<AblateCell> = jobs
        .par_iter()
        .map(|&(tau, seed_idx, _seed)| -> Result<AblateCell> {
            let train_ds = generate_random_walk(&RwConfig {
                n: train_size,
                dim: spec.dim,
                horizon: spec.horizon,
                a: spec.a.clone(),
                b: spec.b,
                seed: derive_seed(base_seed, SALT_TRAIN, seed_idx),
            })?;
            let dims = ModelDims {
                feature_dim: spec.dim,
                horizon: spec.horizon,
                hidden,
            };
            let model = HazardModel::init(arch, dims, derive_seed(base_seed, SALT_INIT, seed_idx))?;
            let cfg = TrainConfig {
                tau,
                seed: derive_seed(base_seed, SALT_SHUFFLE, seed_idx),
                ..template.clone()
            };
            let fitted = trainer::fit(&train_ds, model, &cfg, None)?;
            // hazard estimates at every within-window (landmark, offset)
            // of the frozen test set, in a fixed order
            let mut hazards = Vec::new();
            for rec in test.records() {
                let windows =
                    targets::windows_for(rec.duration(), test.horizon(), TableMode::WithinWindow);
                let matrix = fitted.model.hazard_matrix(rec, &windows)?;
                for (l, &w) in windows.iter().enumerate() {
                    for d in 1..=w {
                        hazards.push(matrix.hazard(l, d));
                    }
                }
            }
            let report = metrics::evaluate_model(&fitted.model, &test)?;
            Ok(AblateCell {
                tau,
                hazards,
                ci: report.ci,
                ibs: report.ibs,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let delta_samples_csv = out.join("delta_samples.csv");
    let delta_mean_csv = out.join("delta_mean.csv");
    let scores_csv = out.join("scores.csv");
    let mut samples_w = csv_writer(&delta_samples_csv)?;
    samples_w
        .write_record(["tau", "delta"])
        .map_err(|e| csv_err(&delta_samples_csv, e))?;

    let mut rows = Vec::new();
    for &tau in &taus {
        let group: Vec<&AblateCell> = cells.iter().filter(|c| c.tau == tau).collect();
        let n_entries = group[0].hazards.len();
        let samples: Vec<Vec<f64>> = (0..n_entries)
            .map(|e| group.iter().map(|c| c.hazards[e]).collect())
            .collect();
        let summary = metrics::variability_delta(&samples)?;
        for d in &summary.deltas {
            samples_w
                .write_record([format!("{tau:?}"), d.to_string()])
                .map_err(|e| csv_err(&delta_samples_csv, e))?;
        }
        let cis: Vec<f64> = group.iter().filter_map(|c| c.ci).collect();
        let (ci_mean, ci_std) = if cis.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_std(&cis);
            (Some(m), Some(s))
        };
        let ibss: Vec<f64> = group.iter().map(|c| c.ibs).collect();
        let (ibs_mean, ibs_std) = mean_std(&ibss);
        rows.push(TauRow {
            tau,
            mean_delta: summary.mean,
            n_entries: summary.deltas.len(),
            n_excluded: summary.n_excluded,
            ci_mean,
            ci_std,
            ibs_mean,
            ibs_std,
        });
    }
    samples_w.flush().map_err(|e| Error::io(&delta_samples_csv, e))?;

    let mut w = csv_writer(&delta_mean_csv)?;
    w.write_record(["tau", "mean_delta", "n_entries", "n_excluded"])
        .map_err(|e| csv_err(&delta_mean_csv, e))?;
    for row in &rows {
        w.write_record([
            format!("{:?}", row.tau),
            opt_to_field(row.mean_delta),
            row.n_entries.to_string(),
            row.n_excluded.to_string(),
        ])
        .map_err(|e| csv_err(&delta_mean_csv, e))?;
    }
    w.flush().map_err(|e| Error::io(&delta_mean_csv, e))?;

    let mut w = csv_writer(&scores_csv)?;
    w.write_record(["tau", "ci_mean", "ci_std", "ibs_mean", "ibs_std"])
        .map_err(|e| csv_err(&scores_csv, e))?;
    for row in &rows {
        w.write_record([
            format!("{:?}", row.tau),
            opt_to_field(row.ci_mean),
            opt_to_field(row.ci_std),
            row.ibs_mean.to_string(),
            row.ibs_std.to_string(),
        ])
        .map_err(|e| csv_err(&scores_csv, e))?;
    }
    w.flush().map_err(|e| Error::io(&scores_csv, e))?;

    r.write_resolved(out, "ablate-tau")?;
    Ok(AblateOutcome {
        rows,
        delta_samples_csv,
        delta_mean_csv,
        scores_csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn base_cfg(pairs: &[(&str, &str)]) -> KvConfig {
        let mut cfg = KvConfig::new();
        for (k, v) in pairs {
            cfg.set(k, v);
        }
        cfg
    }

    #[test]
    fn derive_seed_separates_streams() {
        let a = derive_seed(1, SALT_TRAIN, 0);
        let b = derive_seed(1, SALT_TRAIN, 1);
        let c = derive_seed(1, SALT_TEST, 0);
        let d = derive_seed(2, SALT_TRAIN, 0);
        assert!(a != b && a != c && a != d);
        assert_eq!(a, derive_seed(1, SALT_TRAIN, 0));
    }

    #[test]
    fn generate_writes_identical_files_twice() {
        let dir = tempdir().unwrap();
        let cfg = base_cfg(&[
            ("gen.n", "30"),
            ("gen.dim", "3"),
            ("gen.horizon", "6"),
            ("gen.b", "-1.0"),
            ("seed", "5"),
        ]);
        let out1 = dir.path().join("a");
        let out2 = dir.path().join("b");
        cmd_generate(&cfg, &out1).unwrap();
        cmd_generate(&cfg, &out2).unwrap();
        for file in ["dataset.jsonl", "rwconfig.json", "stats.json", "resolved_config.json"] {
            let x = std::fs::read(out1.join(file)).unwrap();
            let y = std::fs::read(out2.join(file)).unwrap();
            assert_eq!(x, y, "{file} differs");
        }
    }

    #[test]
    fn generate_respects_horizon_bound() {
        let dir = tempdir().unwrap();
        let cfg = base_cfg(&[
            ("gen.n", "200"),
            ("gen.dim", "20"),
            ("gen.horizon", "11"),
            ("seed", "1"),
        ]);
        let outcome = cmd_generate(&cfg, dir.path()).unwrap();
        assert!(outcome.stats.max_duration <= 11);
        assert_eq!(outcome.stats.feature_dim, 20);
    }

    #[test]
    fn train_writes_log_rows_and_checkpoint() {
        let dir = tempdir().unwrap();
        let gen_cfg = base_cfg(&[
            ("gen.n", "10"),
            ("gen.dim", "2"),
            ("gen.horizon", "5"),
            ("gen.b", "-0.5"),
            ("seed", "3"),
        ]);
        let gen_out = cmd_generate(&gen_cfg, &dir.path().join("data")).unwrap();

        let train_cfg = base_cfg(&[
            ("data.path", gen_out.dataset_path.to_str().unwrap()),
            ("model.arch", "linear"),
            ("train.epochs", "2"),
            ("seed", "4"),
        ]);
        let out = cmd_train(&train_cfg, &dir.path().join("run")).unwrap();
        let log = std::fs::read_to_string(&out.log_path).unwrap();
        assert_eq!(log.lines().count(), 3); // header + 2 epochs
        assert!(Checkpoint::load(&out.checkpoint_path).is_ok());
    }

    #[test]
    fn train_is_byte_deterministic() {
        let dir = tempdir().unwrap();
        let gen_cfg = base_cfg(&[
            ("gen.n", "15"),
            ("gen.dim", "2"),
            ("gen.horizon", "5"),
            ("gen.b", "-0.5"),
            ("seed", "3"),
        ]);
        let gen_out = cmd_generate(&gen_cfg, &dir.path().join("data")).unwrap();
        let train_cfg = base_cfg(&[
            ("data.path", gen_out.dataset_path.to_str().unwrap()),
            ("train.epochs", "3"),
            ("train.loss_mode", "dtcsr"),
            ("train.tau", "0.25"),
            ("seed", "9"),
        ]);
        let o1 = cmd_train(&train_cfg, &dir.path().join("r1")).unwrap();
        let o2 = cmd_train(&train_cfg, &dir.path().join("r2")).unwrap();
        assert_eq!(
            std::fs::read(&o1.checkpoint_path).unwrap(),
            std::fs::read(&o2.checkpoint_path).unwrap()
        );
        assert_eq!(
            std::fs::read(&o1.log_path).unwrap(),
            std::fs::read(&o2.log_path).unwrap()
        );
    }

    #[test]
    fn evaluate_reports_consistent_ibs() {
        let dir = tempdir().unwrap();
        let gen_cfg = base_cfg(&[
            ("gen.n", "25"),
            ("gen.dim", "2"),
            ("gen.horizon", "5"),
            ("gen.b", "-0.5"),
            ("seed", "3"),
        ]);
        let gen_out = cmd_generate(&gen_cfg, &dir.path().join("data")).unwrap();
        let train_cfg = base_cfg(&[
            ("data.path", gen_out.dataset_path.to_str().unwrap()),
            ("train.epochs", "2"),
            ("seed", "4"),
        ]);
        let train_out = cmd_train(&train_cfg, &dir.path().join("run")).unwrap();
        let eval_cfg = base_cfg(&[
            ("eval.checkpoint", train_out.checkpoint_path.to_str().unwrap()),
            ("eval.data", gen_out.dataset_path.to_str().unwrap()),
        ]);
        let report = cmd_evaluate(&eval_cfg, &dir.path().join("eval")).unwrap();
        let mean = report.bs_curve.iter().sum::<f64>() / report.bs_curve.len() as f64;
        assert!((report.ibs - mean).abs() < 1e-15);
        // zero-initialized-at-start but trained; just check the file exists
        assert!(dir.path().join("eval/report.json").exists());
    }

    #[test]
    fn compare_emits_expected_row_count() {
        let dir = tempdir().unwrap();
        let cfg = base_cfg(&[
            ("gen.dim", "2"),
            ("gen.horizon", "5"),
            ("gen.b", "-0.5"),
            ("compare.methods", "sa_init,dtcsr"),
            ("compare.lambdas", "0.0"),
            ("compare.sizes", "5,10"),
            ("compare.seeds", "0,1"),
            ("compare.test_size", "30"),
            ("train.epochs", "2"),
            ("seed", "7"),
        ]);
        let outcome = cmd_compare(&cfg, dir.path()).unwrap();
        assert_eq!(outcome.cells.len(), 2 * 2 * 2);
        assert_eq!(outcome.n_failed, 0);
        let csv = std::fs::read_to_string(&outcome.cells_csv).unwrap();
        assert_eq!(csv.lines().count(), 1 + 8);
        let agg = std::fs::read_to_string(&outcome.aggregate_csv).unwrap();
        assert_eq!(agg.lines().count(), 1 + 4);
        assert!(csv.contains("DTCSR(0.0)"));
        assert!(csv.contains("SA Init State"));
    }

    #[test]
    fn compare_aggregates_match_cells() {
        let dir = tempdir().unwrap();
        let cfg = base_cfg(&[
            ("gen.dim", "2"),
            ("gen.horizon", "4"),
            ("gen.b", "-0.2"),
            ("compare.methods", "sa_landmark"),
            ("compare.sizes", "8"),
            ("compare.seeds", "0,1,2"),
            ("compare.test_size", "20"),
            ("train.epochs", "2"),
            ("seed", "11"),
        ]);
        let outcome = cmd_compare(&cfg, dir.path()).unwrap();
        let cis: Vec<f64> = outcome.cells.iter().filter_map(|c| c.ci).collect();
        let (expect_mean, expect_std) = mean_std(&cis);
        let agg = std::fs::read_to_string(&outcome.aggregate_csv).unwrap();
        let row = agg.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        let got_mean: f64 = fields[3].parse().unwrap();
        let got_std: f64 = fields[4].parse().unwrap();
        assert!((got_mean - expect_mean).abs() < 1e-12);
        assert!((got_std - expect_std).abs() < 1e-12);
    }

    #[test]
    fn compare_records_failed_cells() {
        let dir = tempdir().unwrap();
        // training size 0 is invalid: the cell must fail but the sweep completes
        let cfg = base_cfg(&[
            ("gen.dim", "2"),
            ("gen.horizon", "4"),
            ("gen.b", "-0.2"),
            ("compare.methods", "sa_landmark"),
            ("compare.sizes", "0,5"),
            ("compare.seeds", "0"),
            ("compare.test_size", "10"),
            ("train.epochs", "1"),
            ("seed", "2"),
        ]);
        let outcome = cmd_compare(&cfg, dir.path()).unwrap();
        assert_eq!(outcome.n_failed, 1);
        let failed = outcome.cells.iter().find(|c| c.error.is_some()).unwrap();
        assert_eq!(failed.size, 0);
    }

    #[test]
    fn ablate_two_taus_two_seeds() {
        let dir = tempdir().unwrap();
        let cfg = base_cfg(&[
            ("gen.dim", "2"),
            ("gen.horizon", "5"),
            ("gen.b", "-0.5"),
            ("ablate.taus", "0.1,1.0"),
            ("ablate.seeds", "0,1"),
            ("ablate.train_size", "10"),
            ("ablate.test_size", "20"),
            ("model.arch", "linear"),
            ("train.epochs", "3"),
            ("seed", "13"),
        ]);
        let outcome = cmd_ablate_tau(&cfg, dir.path()).unwrap();
        assert_eq!(outcome.rows.len(), 2);
        for row in &outcome.rows {
            assert!(row.n_entries > 0);
            assert!(row.mean_delta.is_some());
        }
        assert!(outcome.delta_samples_csv.exists());
        assert!(outcome.delta_mean_csv.exists());
        assert!(outcome.scores_csv.exists());
    }

    #[test]
    fn unknown_key_fails_fast() {
        let dir = tempdir().unwrap();
        let cfg = base_cfg(&[("gen.n", "5"), ("gen.horizonn", "4")]);
        assert!(cmd_generate(&cfg, dir.path()).is_err());
    }

    #[test]
    fn rerunning_from_resolved_config_is_byte_identical() {
        let dir = tempdir().unwrap();
        // calibration path: the resolved config must pin the derived a, b
        let cfg = base_cfg(&[
            ("gen.n", "40"),
            ("gen.dim", "3"),
            ("gen.horizon", "6"),
            ("gen.target_censoring", "0.3"),
            ("seed", "8"),
        ]);
        let out1 = dir.path().join("a");
        cmd_generate(&cfg, &out1).unwrap();

        let resolved = KvConfig::from_resolved_json(out1.join("resolved_config.json")).unwrap();
        assert!(resolved.get("gen.a").is_some());
        assert!(resolved.get("gen.b").is_some());
        let out2 = dir.path().join("b");
        cmd_generate(&resolved, &out2).unwrap();
        for file in ["dataset.jsonl", "rwconfig.json", "stats.json"] {
            assert_eq!(
                std::fs::read(out1.join(file)).unwrap(),
                std::fs::read(out2.join(file)).unwrap(),
                "{file} differs after rerun"
            );
        }
    }

    #[test]
    fn lambda_one_and_landmarking_checkpoints_match_on_disk() {
        let dir = tempdir().unwrap();
        let gen_cfg = base_cfg(&[
            ("gen.n", "20"),
            ("gen.dim", "3"),
            ("gen.horizon", "6"),
            ("gen.b", "-1.0"),
            ("seed", "6"),
        ]);
        let data = cmd_generate(&gen_cfg, &dir.path().join("data")).unwrap();
        let mk = |loss_mode: &str| {
            base_cfg(&[
                ("data.path", data.dataset_path.to_str().unwrap()),
                ("train.loss_mode", loss_mode),
                ("train.lambda", "1.0"),
                ("train.tau", "0.2"),
                ("train.epochs", "4"),
                ("seed", "17"),
            ])
        };
        let a = cmd_train(&mk("dtcsr"), &dir.path().join("dtcsr")).unwrap();
        let b = cmd_train(&mk("landmarking"), &dir.path().join("landmark")).unwrap();
        assert_eq!(
            std::fs::read(&a.checkpoint_path).unwrap(),
            std::fs::read(&b.checkpoint_path).unwrap()
        );
    }

    #[test]
    fn resolved_config_echoes_large_dataset_defaults() {
        let dir = tempdir().unwrap();
        let gen_cfg = base_cfg(&[
            ("gen.n", "8"),
            ("gen.dim", "2"),
            ("gen.horizon", "4"),
            ("gen.b", "-0.5"),
            ("seed", "2"),
        ]);
        let data = cmd_generate(&gen_cfg, &dir.path().join("data")).unwrap();
        let cfg = base_cfg(&[
            ("data.path", data.dataset_path.to_str().unwrap()),
            ("model.arch", "feedforward"),
            ("train.epochs", "1"),
        ]);
        cmd_train(&cfg, &dir.path().join("run")).unwrap();
        let resolved =
            std::fs::read_to_string(dir.path().join("run/resolved_config.json")).unwrap();
        let map: std::collections::BTreeMap<String, String> =
            serde_json::from_str(&resolved).unwrap();
        assert_eq!(map["model.hidden"], "16");
        assert_eq!(map["train.batch_size"], "128");
        assert_eq!(map["train.lr"], "0.01");
        assert_eq!(map["train.weight_decay"], "0.0001");
        assert_eq!(map["train.beta1"], "0.9");
        assert_eq!(map["train.beta2"], "0.999");
    }
}
