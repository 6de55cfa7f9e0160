//! Generate a synthetic churn dataset from a Gaussian random walk.
//!
//! The intercept of the termination logit is calibrated so roughly 20%
//! of sequences censor at the horizon; the dataset round-trips through
//! the JSONL format bit for bit.
//!
//! ```sh
//! cargo run --example generate_dataset
//! ```

use deeptcsr::seqdata::{dataset_stats, Dataset};
use deeptcsr::synthgen::{calibrate_intercept, default_coefficients, generate_random_walk, RwConfig};

fn main() -> deeptcsr::Result<()> {
    let dim = 20;
    let horizon = 11;
    let seed = 1;

    let a = default_coefficients(dim, seed);
    let b = calibrate_intercept(dim, horizon, &a, 0.2, seed)?;
    println!("calibrated intercept b = {b:.4} for ~20% censoring");

    let cfg = RwConfig {
        n: 500,
        dim,
        horizon,
        a,
        b,
        seed,
    };
    let ds = generate_random_walk(&cfg)?;
    let stats = dataset_stats(&ds);
    println!(
        "generated n={} dim={} horizon={} max_duration={} censoring={:.3}",
        stats.n,
        stats.feature_dim,
        stats.horizon,
        stats.max_duration,
        stats.censoring_fraction.unwrap()
    );

    let path = std::env::temp_dir().join("deeptcsr-example-dataset.jsonl");
    ds.save(&path)?;
    let reloaded = Dataset::load(&path)?;
    assert_eq!(ds, reloaded);
    println!("saved and reloaded identically from {}", path.display());
    Ok(())
}
