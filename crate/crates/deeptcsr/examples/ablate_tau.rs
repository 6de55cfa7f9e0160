//! Measure how the target learning rate changes estimate variability.
//!
//! Trains one model per (tau, seed), collects every within-window hazard
//! estimate on a frozen test set, and reports the seed-to-seed
//! variability `delta = std / (mean * (1 - mean))` per tau. Slower
//! target updates (small tau) give visibly steadier estimates.
//!
//! ```sh
//! cargo run --example ablate_tau
//! ```

use deeptcsr::experiments::{cmd_ablate_tau, KvConfig};

fn main() -> deeptcsr::Result<()> {
    let out = std::env::temp_dir().join("deeptcsr-example-ablate");
    let mut cfg = KvConfig::new();
    cfg.set("seed", 8);
    cfg.set("gen.dim", 10);
    cfg.set("gen.horizon", 15);
    cfg.set("gen.target_censoring", "0.2");
    cfg.set("ablate.taus", "0.01,0.1,0.5,1.0");
    cfg.set("ablate.seeds", "0,1,2");
    cfg.set("ablate.train_size", 40);
    cfg.set("ablate.test_size", 300);
    cfg.set("model.arch", "feedforward");
    cfg.set("model.hidden", 16);
    cfg.set("train.lambda", "0.0");
    cfg.set("train.epochs", 60);

    let outcome = cmd_ablate_tau(&cfg, &out)?;
    println!("tau     mean_delta  ci_mean  ibs_mean");
    for row in &outcome.rows {
        println!(
            "{:<7} {:>10.4}  {:>7.4}  {:>8.4}",
            format!("{:?}", row.tau),
            row.mean_delta.unwrap_or(f64::NAN),
            row.ci_mean.unwrap_or(f64::NAN),
            row.ibs_mean
        );
    }
    println!("sample distributions under {}", out.display());
    Ok(())
}
