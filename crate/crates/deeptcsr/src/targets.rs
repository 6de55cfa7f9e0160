//! Supervision tables for training.
//!
//! Tables are indexed by landmark `l` (the state the prediction departs
//! from) and offset `d` (steps ahead). Offset 0 holds the observed event
//! indicator and anchors the recursion; the loss itself only consumes
//! offsets `d >= 1`.
//!
//! `hard_labels` produces the classical landmarking labels: weight 1
//! everywhere in the observed window and a positive label exactly where
//! the event sits. `pseudo_table` interpolates those observed indicators
//! with hazards and survivals bootstrapped from a target network,
//! controlled by `lambda`: each entry mixes the diagonal predecessor
//! `(l+1, d-1)` with the target network's view from the successor state.
//! At `lambda = 1` (within-window) the table collapses to `hard_labels`
//! bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HazardMatrix;
use crate::seqdata::SequenceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableMode {
    /// Offsets stop at the observed window `t - 1 - l` (default).
    #[serde(rename = "within_window")]
    WithinWindow,
    /// Offsets extend to the horizon, `horizon - 1 - l`.
    #[serde(rename = "extended")]
    Extended,
}

/// Per-landmark window lengths for a sequence of duration `t`.
pub fn windows_for(t: usize, horizon: usize, mode: TableMode) -> Vec<usize> {
    match mode {
        TableMode::WithinWindow => (0..t).map(|l| t - 1 - l).collect(),
        TableMode::Extended => (0..t).map(|l| horizon - 1 - l).collect(),
    }
}

/// Targets and weights per (landmark, offset); row `l` covers offsets
/// `0..=window(l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTable {
    targets: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    pub lambda: f64,
    pub mode: TableMode,
}

impl TargetTable {
    pub fn from_parts(
        targets: Vec<Vec<f64>>,
        weights: Vec<Vec<f64>>,
        lambda: f64,
        mode: TableMode,
    ) -> Result<TargetTable> {
        if targets.len() != weights.len()
            || targets
                .iter()
                .zip(&weights)
                .any(|(t, w)| t.len() != w.len() || t.is_empty())
        {
            return Err(Error::invalid_config("target/weight shape mismatch"));
        }
        Ok(TargetTable {
            targets,
            weights,
            lambda,
            mode,
        })
    }

    pub fn landmarks(&self) -> usize {
        self.targets.len()
    }

    pub fn window(&self, landmark: usize) -> usize {
        self.targets[landmark].len() - 1
    }

    pub fn windows(&self) -> Vec<usize> {
        self.targets.iter().map(|row| row.len() - 1).collect()
    }

    pub fn target(&self, landmark: usize, offset: usize) -> f64 {
        self.targets[landmark][offset]
    }

    pub fn weight(&self, landmark: usize, offset: usize) -> f64 {
        self.weights[landmark][offset]
    }

    /// Zeroes every weight at landmarks past the initial state; used for
    /// the init-state baseline so only `l = 0` supervises the model.
    pub fn restrict_to_initial_landmark(&mut self) {
        for row in self.weights.iter_mut().skip(1) {
            for w in row.iter_mut() {
                *w = 0.0;
            }
        }
    }
}

/// Observed landmarking labels: weight 1 over the observed window, label
/// 1 exactly at the event.
pub fn hard_labels(seq: &SequenceRecord) -> TargetTable {
    let t = seq.duration();
    let mut targets = Vec::with_capacity(t);
    let mut weights = Vec::with_capacity(t);
    for l in 0..t {
        let window = t - 1 - l;
        let mut trow = Vec::with_capacity(window + 1);
        trow.push(seq.event_indicator(l));
        for d in 1..=window {
            let hit = l + d == t - 1 && !seq.censored;
            trow.push(if hit { 1.0 } else { 0.0 });
        }
        weights.push(vec![1.0; window + 1]);
        targets.push(trow);
    }
    TargetTable {
        targets,
        weights,
        lambda: 1.0,
        mode: TableMode::WithinWindow,
    }
}

/// Hard labels with supervision restricted to the initial state.
pub fn init_state_labels(seq: &SequenceRecord) -> TargetTable {
    let mut table = hard_labels(seq);
    table.restrict_to_initial_landmark();
    table
}

fn check_matrix_shape(
    seq: &SequenceRecord,
    outputs: &HazardMatrix,
    mode: TableMode,
) -> Result<()> {
    let t = seq.duration();
    if outputs.landmarks() != t {
        return Err(Error::invalid_config(format!(
            "hazard matrix has {} landmarks for sequence `{}` of duration {t}",
            outputs.landmarks(),
            seq.id
        )));
    }
    let w0 = outputs.window(0);
    for l in 0..t {
        if outputs.window(l) + l != w0 {
            return Err(Error::invalid_config(
                "hazard matrix windows must shrink by one per landmark",
            ));
        }
    }
    match mode {
        TableMode::WithinWindow if w0 != t - 1 => Err(Error::invalid_config(format!(
            "within-window matrix must start at window {} (got {w0})",
            t - 1
        ))),
        TableMode::Extended if w0 < t - 1 => Err(Error::invalid_config(
            "extended matrix window shorter than the observed window",
        )),
        _ => Ok(()),
    }
}

/// Pseudo-targets and pseudo-weights bootstrapped from target-network
/// outputs, built by the diagonal recursion
///
/// `target(l, d) = lambda * target(l+1, d-1) + (1-lambda) * h(d-1 | x_{l+1})`
/// `weight(l, d) = lambda * weight(l+1, d-1) + (1-lambda) * S(d-1 | x_{l+1})`
///
/// with `h(0 | x_j)` read as the observed indicator at `j` and
/// `S(0 | .) = 1`. At the final landmark the target is pinned to the
/// observed label; its weight keeps the subject in the risk set with
/// probability `S` when censored and removes it after an event.
pub fn pseudo_table(
    seq: &SequenceRecord,
    target_outputs: &HazardMatrix,
    lambda: f64,
    mode: TableMode,
) -> Result<TargetTable> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid_config(format!(
            "lambda {lambda} outside [0, 1]"
        )));
    }
    check_matrix_shape(seq, target_outputs, mode)?;
    let t = seq.duration();
    let mut targets = vec![Vec::new(); t];
    let mut weights = vec![Vec::new(); t];
    for l in (0..t).rev() {
        let window = target_outputs.window(l);
        let mut trow = Vec::with_capacity(window + 1);
        let mut wrow = Vec::with_capacity(window + 1);
        trow.push(seq.event_indicator(l));
        wrow.push(1.0);
        if l == t - 1 {
            let y_last = seq.event_indicator(t - 1);
            for d in 1..=window {
                trow.push(y_last);
                wrow.push(if seq.censored {
                    target_outputs.survival(t - 1, d - 1)
                } else {
                    0.0
                });
            }
        } else {
            for d in 1..=window {
                let boot_h = if d == 1 {
                    seq.event_indicator(l + 1)
                } else {
                    target_outputs.hazard(l + 1, d - 1)
                };
                let boot_s = target_outputs.survival(l + 1, d - 1);
                trow.push(lambda * targets[l + 1][d - 1] + (1.0 - lambda) * boot_h);
                wrow.push(lambda * weights[l + 1][d - 1] + (1.0 - lambda) * boot_s);
            }
        }
        targets[l] = trow;
        weights[l] = wrow;
    }
    Ok(TargetTable {
        targets,
        weights,
        lambda,
        mode,
    })
}

/// Reference construction of the pseudo table by explicit summation.
///
/// Every entry is computed independently by walking the diagonal chain
/// `(l, d) -> (l+1, d-1) -> ...` to its base case and summing the
/// geometric contributions, with no shared intermediate state. Exists to
/// cross-check [`pseudo_table`]; quadratic per entry, so test-scale only.
pub fn pseudo_table_oracle(
    seq: &SequenceRecord,
    target_outputs: &HazardMatrix,
    lambda: f64,
    mode: TableMode,
) -> Result<TargetTable> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid_config(format!(
            "lambda {lambda} outside [0, 1]"
        )));
    }
    check_matrix_shape(seq, target_outputs, mode)?;
    let t = seq.duration();
    let mut targets = Vec::with_capacity(t);
    let mut weights = Vec::with_capacity(t);
    for l in 0..t {
        let window = target_outputs.window(l);
        let mut trow = Vec::with_capacity(window + 1);
        let mut wrow = Vec::with_capacity(window + 1);
        for d in 0..=window {
            if d == 0 {
                trow.push(seq.event_indicator(l));
                wrow.push(1.0);
                continue;
            }
            let steps = d.min(t - 1 - l);
            let mut acc_y = 0.0;
            let mut acc_w = 0.0;
            for s in 1..=steps {
                let coeff = lambda.powi(s as i32 - 1) * (1.0 - lambda);
                let h = if d - s == 0 {
                    seq.event_indicator(l + s)
                } else {
                    target_outputs.hazard(l + s, d - s)
                };
                acc_y += coeff * h;
                acc_w += coeff * target_outputs.survival(l + s, d - s);
            }
            let tail = lambda.powi(steps as i32);
            let (boundary_y, boundary_w) = if d - steps == 0 {
                (seq.event_indicator(l + steps), 1.0)
            } else {
                // chain hit the final landmark with offset d - steps left
                let y_last = seq.event_indicator(t - 1);
                let w_last = if seq.censored {
                    target_outputs.survival(t - 1, d - steps - 1)
                } else {
                    0.0
                };
                (y_last, w_last)
            };
            trow.push(acc_y + tail * boundary_y);
            wrow.push(acc_w + tail * boundary_w);
        }
        targets.push(trow);
        weights.push(wrow);
    }
    Ok(TargetTable {
        targets,
        weights,
        lambda,
        mode,
    })
}
