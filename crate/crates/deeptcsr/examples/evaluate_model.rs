//! Evaluate a fitted model: concordance, Brier curve, and IBS.
//!
//! ```sh
//! cargo run --example evaluate_model
//! ```

use deeptcsr::metrics::evaluate_model;
use deeptcsr::model::{Architecture, HazardModel, ModelDims};
use deeptcsr::synthgen::{generate_random_walk, RwConfig};
use deeptcsr::trainer::{fit, LossMode, TrainConfig};

fn main() -> deeptcsr::Result<()> {
    let cfg = RwConfig {
        n: 200,
        dim: 5,
        horizon: 10,
        a: vec![0.6, -0.4, 0.2, 0.0, 0.3],
        b: -2.0,
        seed: 21,
    };
    let train = generate_random_walk(&cfg)?;
    let test = generate_random_walk(&RwConfig { seed: 22, ..cfg.clone() })?;

    let model = HazardModel::init(
        Architecture::Feedforward,
        ModelDims {
            feature_dim: 5,
            horizon: 10,
            hidden: 16,
        },
        1,
    )?;
    let fitted = fit(
        &train,
        model,
        &TrainConfig {
            lambda: 0.0,
            tau: 0.05,
            epochs: 60,
            seed: 23,
            loss_mode: LossMode::Dtcsr,
            ..TrainConfig::default()
        },
        None,
    )?;

    let report = evaluate_model(&fitted.model, &test)?;
    println!(
        "CI = {} over {} comparable pairs",
        report
            .ci
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "undefined".into()),
        report.n_pairs_used
    );
    println!("IBS = {:.4}", report.ibs);
    println!("Brier curve:");
    for (k, bs) in report.bs_curve.iter().enumerate() {
        println!("  k={k:<3} bs={bs:.4}");
    }
    Ok(())
}
