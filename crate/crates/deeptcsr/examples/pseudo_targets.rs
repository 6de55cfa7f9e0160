//! Inspect the supervision tables for one short sequence.
//!
//! Shows the hard landmarking labels and the bootstrapped pseudo tables
//! at a few mixing values: `lambda = 1` reproduces the hard labels
//! exactly, `lambda = 0` supervises purely from the target network's
//! view of the successor state.
//!
//! ```sh
//! cargo run --example pseudo_targets
//! ```

use deeptcsr::model::{Architecture, HazardModel, ModelDims};
use deeptcsr::seqdata::{SequenceRecord, StateVector};
use deeptcsr::targets::{hard_labels, pseudo_table, windows_for, TableMode, TargetTable};

fn print_table(name: &str, table: &TargetTable) {
    println!("{name}:");
    for l in 0..table.landmarks() {
        let targets: Vec<String> = (0..=table.window(l))
            .map(|d| format!("{:.3}", table.target(l, d)))
            .collect();
        let weights: Vec<String> = (0..=table.window(l))
            .map(|d| format!("{:.3}", table.weight(l, d)))
            .collect();
        println!("  landmark {l}: targets [{}]", targets.join(", "));
        println!("              weights [{}]", weights.join(", "));
    }
}

fn main() -> deeptcsr::Result<()> {
    // an uncensored sequence of four states: the event sits at index 3
    let states = vec![
        StateVector::from(vec![0.2, -1.0]),
        StateVector::from(vec![0.5, -0.6]),
        StateVector::from(vec![1.1, 0.1]),
        StateVector::from(vec![1.9, 0.8]),
    ];
    let seq = SequenceRecord::new("demo", states, false)?;

    print_table("hard landmarking labels", &hard_labels(&seq));

    // a seeded target network provides the bootstrapped hazards
    let phi = HazardModel::init(
        Architecture::Feedforward,
        ModelDims {
            feature_dim: 2,
            horizon: 6,
            hidden: 8,
        },
        3,
    )?;
    let windows = windows_for(seq.duration(), 6, TableMode::WithinWindow);
    let matrix = phi.hazard_matrix(&seq, &windows)?;

    for lambda in [1.0, 0.5, 0.0] {
        let table = pseudo_table(&seq, &matrix, lambda, TableMode::WithinWindow)?;
        print_table(&format!("pseudo table, lambda = {lambda}"), &table);
        if lambda == 1.0 {
            assert_eq!(table, hard_labels(&seq));
            println!("  (identical to the hard labels, as required)");
        }
    }
    Ok(())
}
