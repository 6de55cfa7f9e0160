//! Shared builders and oracles for the integration test suites.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use deeptcsr::model::{Architecture, HazardModel, ModelDims};
use deeptcsr::seqdata::{Dataset, SequenceRecord, StateVector};
use deeptcsr::targets::{windows_for, TableMode, TargetTable};

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn random_sequence(rng: &mut ChaCha8Rng, id: &str, t: usize, dim: usize) -> SequenceRecord {
    let censored = rng.random::<f64>() < 0.4;
    let states = (0..t)
        .map(|_| StateVector::from((0..dim).map(|_| uniform(rng, -2.0, 2.0)).collect::<Vec<_>>()))
        .collect();
    SequenceRecord::new(id, states, censored).unwrap()
}

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, dim: usize, horizon: usize) -> Dataset {
    let records = (0..n)
        .map(|i| {
            let t = 1 + (rng.random::<u64>() as usize) % horizon;
            random_sequence(rng, &format!("r{i}"), t, dim)
        })
        .collect();
    Dataset::new(records, dim, horizon).unwrap()
}

/// Model with every parameter drawn uniformly from `[-scale, scale]`;
/// small scales keep logits far from the clamp.
pub fn random_model(
    rng: &mut ChaCha8Rng,
    arch: Architecture,
    dim: usize,
    horizon: usize,
    hidden: usize,
    scale: f64,
) -> HazardModel {
    let dims = ModelDims {
        feature_dim: dim,
        horizon,
        hidden,
    };
    let mut model = HazardModel::init(arch, dims, rng.random()).unwrap();
    for v in model.params.values_mut() {
        *v = uniform(rng, -scale, scale);
    }
    model
}

/// Arbitrary soft supervision with some zero weights mixed in.
pub fn random_table(rng: &mut ChaCha8Rng, t: usize, horizon: usize, mode: TableMode) -> TargetTable {
    let windows = windows_for(t, horizon, mode);
    let targets: Vec<Vec<f64>> = windows
        .iter()
        .map(|&w| (0..=w).map(|_| rng.random::<f64>()).collect())
        .collect();
    let weights: Vec<Vec<f64>> = windows
        .iter()
        .map(|&w| {
            (0..=w)
                .map(|_| {
                    if rng.random::<f64>() < 0.2 {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        })
        .collect();
    TargetTable::from_parts(targets, weights, 1.0, mode).unwrap()
}

/// Central finite differences of the batch loss, one entry per parameter.
pub fn fd_gradient(
    model: &HazardModel,
    batch: &[(&SequenceRecord, &TargetTable)],
    step: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(model.params.len());
    for i in 0..model.params.len() {
        let mut plus = model.clone();
        plus.params.values_mut()[i] += step;
        let mut minus = model.clone();
        minus.params.values_mut()[i] -= step;
        let loss_plus = plus.loss_and_grad(batch).unwrap().0;
        let loss_minus = minus.loss_and_grad(batch).unwrap().0;
        out.push((loss_plus - loss_minus) / (2.0 * step));
    }
    out
}

/// True when analytic and numeric derivatives agree to `tol` relative
/// error, with an absolute guard for near-zero coordinates.
pub fn gradients_agree(analytic: f64, numeric: f64, tol: f64) -> bool {
    let diff = (analytic - numeric).abs();
    let magnitude = analytic.abs().max(numeric.abs());
    if magnitude < 1e-6 {
        diff < 1e-8
    } else {
        diff / magnitude < tol
    }
}
