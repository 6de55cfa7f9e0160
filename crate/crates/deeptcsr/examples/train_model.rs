//! Train a linear hazard model with bootstrapped supervision.
//!
//! Fits DTCSR(lambda = 0) on a small random-walk training set while
//! tracking concordance on a held-out test set every epoch.
//!
//! ```sh
//! cargo run --example train_model
//! ```

use deeptcsr::model::{Architecture, HazardModel, ModelDims};
use deeptcsr::synthgen::{calibrate_intercept, default_coefficients, generate_random_walk, RwConfig};
use deeptcsr::trainer::{fit, LossMode, OptimizerKind, TrainConfig};

fn main() -> deeptcsr::Result<()> {
    let dim = 20;
    let horizon = 11;
    let a = default_coefficients(dim, 5);
    let b = calibrate_intercept(dim, horizon, &a, 0.2, 5)?;
    let gen = |n: usize, seed: u64| {
        generate_random_walk(&RwConfig {
            n,
            dim,
            horizon,
            a: a.clone(),
            b,
            seed,
        })
    };
    let train = gen(50, 10)?;
    let test = gen(500, 11)?;

    let model = HazardModel::init(
        Architecture::LinearCox,
        ModelDims {
            feature_dim: dim,
            horizon,
            hidden: 0,
        },
        0,
    )?;
    let cfg = TrainConfig {
        lambda: 0.0,
        tau: 0.1,
        learning_rate: 0.1,
        weight_decay: 0.0,
        batch_size: 128,
        epochs: 100,
        loss_mode: LossMode::Dtcsr,
        optimizer: OptimizerKind::Adam,
        seed: 12,
        ..TrainConfig::default()
    };
    let result = fit(&train, model, &cfg, Some(&test))?;

    println!("epoch  mean_loss  grad_norm  test_ci  test_ibs");
    for record in result.log.epochs.iter().step_by(10) {
        println!(
            "{:>5}  {:>9.4}  {:>9.4}  {:>7.4}  {:>8.4}",
            record.epoch,
            record.mean_loss,
            record.grad_norm,
            record.ci.unwrap_or(f64::NAN),
            record.ibs.unwrap_or(f64::NAN),
        );
    }
    let last = result.log.epochs.last().unwrap();
    println!(
        "final: loss {:.4}, test CI {:.4}, test IBS {:.4}",
        last.mean_loss,
        last.ci.unwrap_or(f64::NAN),
        last.ibs.unwrap_or(f64::NAN)
    );
    Ok(())
}
