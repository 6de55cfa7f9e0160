//! Property tests for the crate-level invariants: persistence round
//! trips, chunk reconstruction, survival-curve structure, gradient
//! agreement with finite differences, pseudo-table/oracle equivalence,
//! and rank-statistic behaviour of the concordance index.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use deeptcsr::metrics::{concordance_from_curves, kaplan_meier, variability_delta};
use deeptcsr::model::Architecture;
use deeptcsr::seqdata::{chunk_sequences, Dataset, StateVector};
use deeptcsr::targets::{hard_labels, pseudo_table, pseudo_table_oracle, windows_for, TableMode};

use common::{fd_gradient, gradients_agree, random_dataset, random_model, random_table};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn save_load_round_trip(seed: u64, n in 0usize..8, dim in 1usize..4, horizon in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, n, dim, horizon);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.jsonl");
        ds.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        prop_assert_eq!(ds, back);
    }

    #[test]
    fn chunking_preserves_states(seed: u64, n in 1usize..6, chunk_len in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, n, 2, 12);
        let chunked = chunk_sequences(&ds, chunk_len).unwrap();

        let total_before: usize = ds.records().iter().map(|r| r.duration()).sum();
        let total_after: usize = chunked.records().iter().map(|r| r.duration()).sum();
        prop_assert_eq!(total_before, total_after);

        for original in ds.records() {
            let mut rebuilt: Vec<StateVector> = Vec::new();
            let mut events = 0usize;
            for chunk in chunked.records() {
                let base = chunk.id.split('#').next().unwrap();
                if base == original.id {
                    rebuilt.extend(chunk.states().iter().cloned());
                    if !chunk.censored {
                        events += 1;
                    }
                }
            }
            prop_assert_eq!(&rebuilt, &original.states().to_vec());
            prop_assert_eq!(events, usize::from(!original.censored));
        }
    }

    #[test]
    fn survival_curves_telescope(seed: u64, linear: bool, dim in 1usize..4, horizon in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch = if linear { Architecture::LinearCox } else { Architecture::Feedforward };
        let model = random_model(&mut rng, arch, dim, horizon, 3, 1.5);
        let x = StateVector::from((0..dim).map(|_| common::uniform(&mut rng, -2.0, 2.0)).collect::<Vec<_>>());
        let curve = model.survival_curve(&x, horizon).unwrap();
        prop_assert_eq!(curve[0], 1.0);
        for d in 1..=horizon {
            let h = model.hazard(&x, d).unwrap();
            prop_assert!(h > 0.0 && h < 1.0);
            prop_assert!(curve[d] <= curve[d - 1]);
            // exact telescoping, not approximate
            prop_assert_eq!(curve[d], curve[d - 1] * (1.0 - h));
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences(
        seed: u64,
        linear: bool,
        extended: bool,
        dim in 1usize..4,
        t in 1usize..5,
    ) {
        let horizon = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch = if linear { Architecture::LinearCox } else { Architecture::Feedforward };
        let model = random_model(&mut rng, arch, dim, horizon, 3, 1.0);
        let mode = if extended { TableMode::Extended } else { TableMode::WithinWindow };
        let seq = common::random_sequence(&mut rng, "s", t, dim);
        let table = random_table(&mut rng, t, horizon, mode);
        let batch = vec![(&seq, &table)];
        let (_, grad) = model.loss_and_grad(&batch).unwrap();
        let numeric = fd_gradient(&model, &batch, 1e-5);
        for (i, (&a, &n)) in grad.values().iter().zip(&numeric).enumerate() {
            prop_assert!(
                gradients_agree(a, n, 1e-4),
                "coordinate {i}: analytic {a} vs numeric {n}"
            );
        }
    }

    #[test]
    fn pseudo_table_equals_oracle(
        seed: u64,
        lambda_idx in 0usize..4,
        extended: bool,
        t in 1usize..7,
    ) {
        let lambda = [0.0, 0.3, 0.7, 1.0][lambda_idx];
        let horizon = 8;
        let mode = if extended { TableMode::Extended } else { TableMode::WithinWindow };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_model(&mut rng, Architecture::LinearCox, 2, horizon, 0, 1.0);
        let seq = common::random_sequence(&mut rng, "s", t, 2);
        let windows = windows_for(t, horizon, mode);
        let matrix = phi.hazard_matrix(&seq, &windows).unwrap();
        let fast = pseudo_table(&seq, &matrix, lambda, mode).unwrap();
        let slow = pseudo_table_oracle(&seq, &matrix, lambda, mode).unwrap();
        for l in 0..t {
            for d in 0..=fast.window(l) {
                let y = fast.target(l, d);
                let w = fast.weight(l, d);
                prop_assert!((0.0..=1.0).contains(&y) && (0.0..=1.0).contains(&w));
                prop_assert!((y - slow.target(l, d)).abs() < 1e-12);
                prop_assert!((w - slow.weight(l, d)).abs() < 1e-12);
                if d > 0 {
                    prop_assert!(w <= fast.weight(l, d - 1) + 1e-15);
                }
            }
        }
    }

    #[test]
    fn lambda_one_reduction_is_bit_exact(seed: u64, t in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_model(&mut rng, Architecture::Feedforward, 2, 8, 3, 1.0);
        let seq = common::random_sequence(&mut rng, "s", t, 2);
        let windows = windows_for(t, 8, TableMode::WithinWindow);
        let matrix = phi.hazard_matrix(&seq, &windows).unwrap();
        let pseudo = pseudo_table(&seq, &matrix, 1.0, TableMode::WithinWindow).unwrap();
        prop_assert_eq!(pseudo, hard_labels(&seq));
    }

    #[test]
    fn pseudo_tables_are_pure_in_the_matrix(seed: u64, t in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_model(&mut rng, Architecture::LinearCox, 2, 8, 0, 1.0);
        let seq = common::random_sequence(&mut rng, "s", t, 2);
        let windows = windows_for(t, 8, TableMode::Extended);
        let m1 = phi.hazard_matrix(&seq, &windows).unwrap();
        let m2 = phi.hazard_matrix(&seq, &windows).unwrap();
        prop_assert_eq!(
            pseudo_table(&seq, &m1, 0.4, TableMode::Extended).unwrap(),
            pseudo_table(&seq, &m2, 0.4, TableMode::Extended).unwrap()
        );
    }

    #[test]
    fn km_matches_risk_set_simulation(
        durations in prop::collection::vec(1usize..8, 1..10),
        flags_seed: u64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(flags_seed);
        let censored: Vec<bool> = durations.iter().map(|_| rand::Rng::random::<f64>(&mut rng) < 0.5).collect();
        let km = kaplan_meier(&durations, &censored).unwrap();
        for k in 0..10 {
            let mut expect = 1.0;
            for t in 1..=k {
                let at_risk = durations.iter().filter(|&&d| d >= t).count();
                let events = durations
                    .iter()
                    .zip(&censored)
                    .filter(|&(&d, &c)| d == t && !c)
                    .count();
                if at_risk > 0 && events > 0 {
                    expect *= 1.0 - events as f64 / at_risk as f64;
                }
            }
            prop_assert!((km.eval(k) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn concordance_is_a_rank_statistic(seed: u64, n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, n, 1, 6);
        let curves: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..=6).map(|_| common::uniform(&mut rng, 0.0, 1.0)).collect())
            .collect();
        let base = concordance_from_curves(&curves, &ds).unwrap();

        // scaling by a power of two is strictly monotone and exact
        let scaled: Vec<Vec<f64>> = curves
            .iter()
            .map(|c| c.iter().map(|v| 4.0 * v).collect())
            .collect();
        let scaled_ci = concordance_from_curves(&scaled, &ds).unwrap();
        prop_assert_eq!(base.ci, scaled_ci.ci);
        prop_assert_eq!(base.n_pairs, scaled_ci.n_pairs);

        // negating reverses every comparison: the two scores sum to 1
        let negated: Vec<Vec<f64>> = curves
            .iter()
            .map(|c| c.iter().map(|v| -v).collect())
            .collect();
        let negated_ci = concordance_from_curves(&negated, &ds).unwrap();
        if let (Some(a), Some(b)) = (base.ci, negated_ci.ci) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        } else {
            prop_assert_eq!(base.n_pairs, 0);
        }
    }

    #[test]
    fn variability_is_permutation_symmetric(
        entry in prop::collection::vec(0.01f64..0.99, 2..6),
        rotate in 1usize..5,
    ) {
        let mut rotated = entry.clone();
        rotated.rotate_left(rotate % entry.len());
        let a = variability_delta(&[entry]).unwrap();
        let b = variability_delta(&[rotated]).unwrap();
        prop_assert!((a.deltas[0] - b.deltas[0]).abs() < 1e-12);
    }
}
