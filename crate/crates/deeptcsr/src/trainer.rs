//! Mini-batch training with a slowly moving target network.
//!
//! One fit call owns two parameter vectors: the main network, updated by
//! the optimizer every batch, and the target network, pulled toward the
//! main network by an exponential moving average right after each step.
//! Supervision per batch is chosen by the loss mode: bootstrapped pseudo
//! tables under the target network, plain landmarking labels, or labels
//! restricted to the initial state. All randomness (epoch shuffles) comes
//! from one ChaCha8 stream seeded by the config, so a fit is a pure
//! function of its inputs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{ema_update, HazardModel};
use crate::seqdata::{Dataset, SequenceRecord};
use crate::targets::{self, TableMode, TargetTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossMode {
    /// Hard labels from the initial state only.
    #[serde(rename = "init_state")]
    InitState,
    /// Hard labels from every landmark.
    #[serde(rename = "landmarking")]
    Landmarking,
    /// Pseudo tables bootstrapped from the target network.
    #[serde(rename = "dtcsr")]
    Dtcsr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "sgd")]
    Sgd,
    #[serde(rename = "adam")]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Mix between bootstrapped and observed supervision, in [0, 1].
    pub lambda: f64,
    /// Target-network learning rate, in (0, 1].
    pub tau: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss_mode: LossMode,
    pub table_mode: TableMode,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.0,
            tau: 0.01,
            learning_rate: 0.01,
            weight_decay: 1e-4,
            batch_size: 128,
            epochs: 100,
            loss_mode: LossMode::Dtcsr,
            table_mode: TableMode::WithinWindow,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    // negated comparisons double as NaN rejection
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid_config("lambda must be in [0, 1]"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid_config("tau must be in (0, 1]"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid_config("learning_rate must be > 0"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::invalid_config("weight_decay must be >= 0"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid_config("batch_size must be >= 1"));
        }
        if self.epochs < 1 {
            return Err(Error::invalid_config("epochs must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Total loss over the epoch divided by the number of records.
    pub mean_loss: f64,
    /// Mean L2 gradient norm across batches.
    pub grad_norm: f64,
    /// Measured wall time; excluded from the persisted CSV by default so
    /// repeated runs stay byte-identical.
    pub wall_ms: u64,
    pub ci: Option<f64>,
    pub ibs: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    /// Writes `epoch,loss,grad_norm,wall_ms,ci,ibs`. The `wall_ms` column
    /// is left empty unless `include_timing` is set.
    pub fn write_csv(&self, path: impl AsRef<Path>, include_timing: bool) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let io_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        w.write_record(["epoch", "loss", "grad_norm", "wall_ms", "ci", "ibs"])
            .map_err(io_err)?;
        for r in &self.epochs {
            let wall = if include_timing {
                r.wall_ms.to_string()
            } else {
                String::new()
            };
            w.write_record([
                r.epoch.to_string(),
                r.mean_loss.to_string(),
                r.grad_norm.to_string(),
                wall,
                r.ci.map(|v| v.to_string()).unwrap_or_default(),
                r.ibs.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptimizerState {
    Sgd,
    Adam(AdamState),
}

/// `params <- params - lr * (grad + weight_decay * params)`.
pub fn sgd_step(params: &mut [f64], grad: &[f64], lr: f64, weight_decay: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * (g + weight_decay * *p);
    }
}

/// Adam with bias correction; decoupled weight decay shrinks the
/// parameters before the adaptive step.
#[allow(clippy::too_many_arguments)]
pub fn adam_step(
    params: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    weight_decay: f64,
) {
    if weight_decay != 0.0 {
        for p in params.iter_mut() {
            *p -= lr * weight_decay * *p;
        }
    }
    state.step += 1;
    let bc1 = 1.0 - beta1.powi(state.step as i32);
    let bc2 = 1.0 - beta2.powi(state.step as i32);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grad)
        .zip(state.first_moment.iter_mut().zip(&mut state.second_moment))
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
}

fn build_table(
    rec: &SequenceRecord,
    phi: &HazardModel,
    horizon: usize,
    cfg: &TrainConfig,
) -> Result<TargetTable> {
    match cfg.loss_mode {
        LossMode::Landmarking => Ok(targets::hard_labels(rec)),
        LossMode::InitState => Ok(targets::init_state_labels(rec)),
        LossMode::Dtcsr => {
            let windows = targets::windows_for(rec.duration(), horizon, cfg.table_mode);
            let matrix = phi.hazard_matrix(rec, &windows)?;
            targets::pseudo_table(rec, &matrix, cfg.lambda, cfg.table_mode)
        }
    }
}

/// Everything a finished (or interrupted) fit leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: HazardModel,
    pub target_model: HazardModel,
    pub optimizer: OptimizerState,
    pub log: TrainLog,
}

impl FitResult {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            target_params: Some(self.target_model.params.clone()),
            optimizer: Some(self.optimizer.clone()),
            epoch: self.log.epochs.last().map(|r| r.epoch).unwrap_or(0),
        }
    }
}

fn check_dims(ds: &Dataset, model: &HazardModel) -> Result<()> {
    if model.dims.feature_dim != ds.feature_dim() {
        return Err(Error::invalid_config(format!(
            "model feature_dim {} != dataset feature_dim {}",
            model.dims.feature_dim,
            ds.feature_dim()
        )));
    }
    if ds.horizon() > model.dims.horizon {
        return Err(Error::invalid_config(format!(
            "dataset horizon {} exceeds model horizon {}",
            ds.horizon(),
            model.dims.horizon
        )));
    }
    Ok(())
}

/// Trains `model` on `ds` and returns the fitted main network, the final
/// target network and optimizer state, and the per-epoch log.
/// Deterministic for a fixed config.
///
/// Per batch: target-network tables are built first, the optimizer then
/// takes one step on the main network, and the target network follows by
/// `phi <- tau * theta + (1 - tau) * phi`. If `eval_ds` is given, CI and
/// IBS on it are snapshot after every epoch.
pub fn fit(
    ds: &Dataset,
    model: HazardModel,
    cfg: &TrainConfig,
    eval_ds: Option<&Dataset>,
) -> Result<FitResult> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dims(ds, &model)?;
    let phi = model.clone();
    let opt = match cfg.optimizer {
        OptimizerKind::Sgd => OptimizerState::Sgd,
        OptimizerKind::Adam => OptimizerState::Adam(AdamState::new(model.params.len())),
    };
    train_loop(ds, model, phi, opt, TrainLog::default(), 0, cfg, eval_ds)
}

/// Continues a checkpointed run until `cfg.epochs` total epochs.
///
/// The shuffle stream is replayed from the seed, so resuming reproduces
/// an uninterrupted fit bit for bit. A checkpoint without optimizer or
/// target-network state cannot be resumed faithfully and is rejected.
pub fn resume(
    ds: &Dataset,
    checkpoint: &Checkpoint,
    cfg: &TrainConfig,
    eval_ds: Option<&Dataset>,
) -> Result<FitResult> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dims(ds, &checkpoint.model)?;
    if checkpoint.epoch >= cfg.epochs {
        return Err(Error::invalid_config(format!(
            "checkpoint already at epoch {} of {}",
            checkpoint.epoch, cfg.epochs
        )));
    }
    let opt = checkpoint
        .optimizer
        .clone()
        .ok_or_else(|| Error::invalid_config("checkpoint lacks optimizer state"))?;
    let target_params = checkpoint
        .target_params
        .clone()
        .ok_or_else(|| Error::invalid_config("checkpoint lacks target-network state"))?;
    let theta = checkpoint.model.clone();
    let mut phi = theta.clone();
    phi.params = target_params;
    train_loop(
        ds,
        theta,
        phi,
        opt,
        TrainLog::default(),
        checkpoint.epoch,
        cfg,
        eval_ds,
    )
}

#[allow(clippy::too_many_arguments)]
fn train_loop(
    ds: &Dataset,
    mut theta: HazardModel,
    mut phi: HazardModel,
    mut opt: OptimizerState,
    mut log: TrainLog,
    epochs_done: usize,
    cfg: &TrainConfig,
    eval_ds: Option<&Dataset>,
) -> Result<FitResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    // replay the shuffle stream up to the resume point
    for _ in 0..epochs_done {
        order.shuffle(&mut rng);
    }

    for epoch in epochs_done + 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut grad_norm_sum = 0.0;
        let mut n_batches = 0usize;

        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let wrap = |e: Error| Error::TrainAborted {
                epoch,
                batch: batch_idx,
                source: Box::new(e),
            };
            let mut tables = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let rec = &ds.records()[i];
                tables.push(build_table(rec, &phi, ds.horizon(), cfg).map_err(wrap)?);
            }
            let batch: Vec<(&SequenceRecord, &TargetTable)> = chunk
                .iter()
                .zip(&tables)
                .map(|(&i, t)| (&ds.records()[i], t))
                .collect();
            let (loss, grad) = theta.loss_and_grad(&batch).map_err(wrap)?;
            match &mut opt {
                OptimizerState::Sgd => sgd_step(
                    theta.params.values_mut(),
                    grad.values(),
                    cfg.learning_rate,
                    cfg.weight_decay,
                ),
                OptimizerState::Adam(state) => adam_step(
                    theta.params.values_mut(),
                    grad.values(),
                    state,
                    cfg.learning_rate,
                    cfg.beta1,
                    cfg.beta2,
                    cfg.epsilon,
                    cfg.weight_decay,
                ),
            }
            phi.params = ema_update(&phi.params, &theta.params, cfg.tau)?;
            epoch_loss += loss;
            grad_norm_sum += grad.values().iter().map(|g| g * g).sum::<f64>().sqrt();
            n_batches += 1;
        }

        let (ci, ibs) = match eval_ds {
            Some(eval) => {
                let report = metrics::evaluate_model(&theta, eval)?;
                (report.ci, Some(report.ibs))
            }
            None => (None, None),
        };
        log.epochs.push(EpochRecord {
            epoch,
            mean_loss: epoch_loss / ds.len() as f64,
            grad_norm: grad_norm_sum / n_batches as f64,
            wall_ms: started.elapsed().as_millis() as u64,
            ci,
            ibs,
        });
    }
    Ok(FitResult {
        model: theta,
        target_model: phi,
        optimizer: opt,
        log,
    })
}

/// Resumable training snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: HazardModel,
    /// Target-network parameters at the snapshot; required to resume a
    /// bootstrapped run faithfully.
    pub target_params: Option<crate::model::ParameterVector>,
    pub optimizer: Option<OptimizerState>,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::io(path, std::io::Error::other(e)))
    }
}
