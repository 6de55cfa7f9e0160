//! Sweep methods x training sizes x seeds and tabulate CI/IBS.
//!
//! A miniature version of the comparison protocol: the init-state
//! baseline, landmarking, and the bootstrapped method at two mixing
//! values, trained on growing subsets and scored on a shared test set.
//!
//! ```sh
//! cargo run --example compare_methods
//! ```

use deeptcsr::experiments::{cmd_compare, KvConfig};

fn main() -> deeptcsr::Result<()> {
    let out = std::env::temp_dir().join("deeptcsr-example-compare");
    let mut cfg = KvConfig::new();
    cfg.set("seed", 3);
    cfg.set("gen.dim", 10);
    cfg.set("gen.horizon", 8);
    cfg.set("gen.target_censoring", "0.2");
    cfg.set("compare.methods", "sa_init,sa_landmark,dtcsr");
    cfg.set("compare.lambdas", "0.0,0.9");
    cfg.set("compare.sizes", "20,50");
    cfg.set("compare.seeds", "0,1,2");
    cfg.set("compare.test_size", 400);
    cfg.set("train.lr", "0.1");
    cfg.set("train.tau", "0.1");
    cfg.set("train.weight_decay", "0.0");
    cfg.set("train.epochs", 60);

    let outcome = cmd_compare(&cfg, &out)?;
    println!(
        "{} cells done ({} failed); aggregate table:",
        outcome.cells.len(),
        outcome.n_failed
    );
    println!("{}", std::fs::read_to_string(&outcome.aggregate_csv).unwrap());
    println!("full results under {}", out.display());
    Ok(())
}
