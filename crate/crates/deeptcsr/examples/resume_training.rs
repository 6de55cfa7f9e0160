//! Checkpoint a run halfway and resume it: the resumed run reproduces an
//! uninterrupted fit bit for bit, because checkpoints carry the main
//! network, the target network, and the optimizer moments, and the
//! shuffle stream is replayed from the seed.
//!
//! ```sh
//! cargo run --example resume_training
//! ```

use deeptcsr::model::{Architecture, HazardModel, ModelDims};
use deeptcsr::synthgen::{generate_random_walk, RwConfig};
use deeptcsr::trainer::{fit, resume, Checkpoint, TrainConfig};

fn main() -> deeptcsr::Result<()> {
    let ds = generate_random_walk(&RwConfig {
        n: 80,
        dim: 4,
        horizon: 9,
        a: vec![0.5, -0.3, 0.2, 0.1],
        b: -1.5,
        seed: 31,
    })?;
    let model = HazardModel::init(
        Architecture::Feedforward,
        ModelDims {
            feature_dim: 4,
            horizon: 9,
            hidden: 8,
        },
        2,
    )?;

    let full = TrainConfig {
        epochs: 40,
        tau: 0.05,
        batch_size: 32,
        seed: 33,
        ..TrainConfig::default()
    };
    let straight = fit(&ds, model.clone(), &full, None)?;

    // stop after 20 epochs, persist, reload, continue to 40
    let half = TrainConfig { epochs: 20, ..full.clone() };
    let first_leg = fit(&ds, model, &half, None)?;
    let path = std::env::temp_dir().join("deeptcsr-example-checkpoint.json");
    first_leg.checkpoint().save(&path)?;
    let restored = Checkpoint::load(&path)?;
    let second_leg = resume(&ds, &restored, &full, None)?;

    assert_eq!(straight.model.params, second_leg.model.params);
    assert_eq!(straight.optimizer, second_leg.optimizer);
    println!(
        "resumed parameters identical to the uninterrupted run ({} parameters)",
        straight.model.params.len()
    );
    println!("checkpoint at {}", path.display());
    Ok(())
}
