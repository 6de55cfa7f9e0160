//! Survival evaluation: Kaplan-Meier estimation, concordance index,
//! Brier score with inverse-censoring weights, and the seed-to-seed
//! variability of hazard estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HazardModel;
use crate::seqdata::Dataset;

/// Denominators below this exclude a Brier term instead of blowing up.
pub const KM_DENOMINATOR_FLOOR: f64 = 1e-12;

/// Product-limit survival estimate as a right-continuous step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    /// Distinct event times, ascending.
    times: Vec<usize>,
    /// Estimate just after each event time.
    values: Vec<f64>,
}

impl KmCurve {
    /// Survival estimate at integer time `k` (right-continuous;
    /// `eval(0) = 1` since durations are at least 1).
    pub fn eval(&self, k: usize) -> f64 {
        match self.times.partition_point(|&t| t <= k) {
            0 => 1.0,
            idx => self.values[idx - 1],
        }
    }

    pub fn step_points(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }
}

/// Kaplan-Meier estimator over integer durations. Censored subjects stay
/// in the risk set through their recorded time and leave afterwards.
pub fn kaplan_meier(durations: &[usize], censored: &[bool]) -> Result<KmCurve> {
    if durations.is_empty() || durations.len() != censored.len() {
        return Err(Error::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..durations.len()).collect();
    order.sort_by_key(|&i| durations[i]);

    let n = durations.len();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut survival = 1.0;
    let mut i = 0;
    let mut at_risk = n;
    while i < n {
        let t = durations[order[i]];
        let mut events = 0usize;
        let mut leaving = 0usize;
        while i < n && durations[order[i]] == t {
            if !censored[order[i]] {
                events += 1;
            }
            leaving += 1;
            i += 1;
        }
        if events > 0 {
            survival *= 1.0 - events as f64 / at_risk as f64;
            times.push(t);
            values.push(survival);
        }
        at_risk -= leaving;
    }
    Ok(KmCurve { times, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceResult {
    /// Fraction of comparable pairs ranked correctly; absent when no
    /// pair is comparable.
    pub ci: Option<f64>,
    pub n_pairs: usize,
}

/// Predicted survival curves from each record's initial state, offsets
/// `0..=horizon`.
fn initial_state_curves(model: &HazardModel, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    ds.records()
        .iter()
        .map(|r| model.survival_curve(r.state(0), ds.horizon()))
        .collect()
}

/// Harrell-style concordance: a pair is comparable when one duration is
/// strictly shorter and that record is uncensored; predictions are
/// compared at the shorter duration, from each initial state. Ties in
/// the prediction earn half credit.
pub fn concordance_index(model: &HazardModel, ds: &Dataset) -> Result<ConcordanceResult> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let curves = initial_state_curves(model, ds)?;
    concordance_from_curves(&curves, ds)
}

/// Concordance over precomputed per-record score curves; `curves[i][k]`
/// is any survival-like ranking score of record `i` at time `k` (only
/// the ordering matters).
pub fn concordance_from_curves(curves: &[Vec<f64>], ds: &Dataset) -> Result<ConcordanceResult> {
    let recs = ds.records();
    let mut pairs = 0usize;
    let mut credit = 0.0;
    for j in 0..recs.len() {
        if recs[j].censored {
            continue;
        }
        let tj = recs[j].duration();
        for (i, rec_i) in recs.iter().enumerate() {
            if rec_i.duration() <= tj {
                continue;
            }
            pairs += 1;
            let si = curves[i][tj];
            let sj = curves[j][tj];
            if si > sj {
                credit += 1.0;
            } else if si == sj {
                credit += 0.5;
            }
        }
    }
    Ok(ConcordanceResult {
        ci: if pairs == 0 {
            None
        } else {
            Some(credit / pairs as f64)
        },
        n_pairs: pairs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrierCurve {
    /// One score per time `k = 0..horizon`.
    pub values: Vec<f64>,
    /// Terms dropped at each `k` because their censoring weight was
    /// degenerate.
    pub excluded: Vec<usize>,
}

/// Weighted Brier score over `k = 0..horizon`.
///
/// A record whose event already occurred by `k` contributes
/// `S(k|x0)^2 / km(t)` (its true survival status is 0); a record still
/// at risk at `k` contributes `(1 - S(k|x0))^2 / km(k)`. Censored
/// records drop out once `k` reaches their recorded time. The weighting
/// curve `km` is the product-limit estimate fitted on the evaluation
/// data itself. Terms whose denominator falls below
/// [`KM_DENOMINATOR_FLOOR`] are dropped from both the sum and the count.
pub fn brier_curve(model: &HazardModel, ds: &Dataset) -> Result<BrierCurve> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let curves = initial_state_curves(model, ds)?;
    brier_from_curves(&curves, ds)
}

#[allow(clippy::needless_range_loop)]
fn brier_from_curves(curves: &[Vec<f64>], ds: &Dataset) -> Result<BrierCurve> {
    let recs = ds.records();
    let durations: Vec<usize> = recs.iter().map(|r| r.duration()).collect();
    let flags: Vec<bool> = recs.iter().map(|r| r.censored).collect();
    let km = kaplan_meier(&durations, &flags)?;

    let horizon = ds.horizon();
    let mut values = Vec::with_capacity(horizon);
    let mut excluded = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let mut sum = 0.0;
        let mut count = recs.len();
        let mut dropped = 0usize;
        for (i, rec) in recs.iter().enumerate() {
            let t = rec.duration();
            let s = curves[i][k];
            if t <= k && !rec.censored {
                let denom = km.eval(t);
                if denom < KM_DENOMINATOR_FLOOR {
                    count -= 1;
                    dropped += 1;
                } else {
                    sum += s * s / denom;
                }
            } else if k < t {
                let denom = km.eval(k);
                if denom < KM_DENOMINATOR_FLOOR {
                    count -= 1;
                    dropped += 1;
                } else {
                    sum += (1.0 - s) * (1.0 - s) / denom;
                }
            }
        }
        values.push(if count == 0 { 0.0 } else { sum / count as f64 });
        excluded.push(dropped);
    }
    Ok(BrierCurve { values, excluded })
}

/// Arithmetic mean of the Brier curve.
pub fn ibs(bs_curve: &[f64]) -> f64 {
    if bs_curve.is_empty() {
        return 0.0;
    }
    bs_curve.iter().sum::<f64>() / bs_curve.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ci: Option<f64>,
    pub bs_curve: Vec<f64>,
    pub ibs: f64,
    pub n_pairs_used: usize,
}

/// Full evaluation of a model on a dataset.
pub fn evaluate_model(model: &HazardModel, ds: &Dataset) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let curves = initial_state_curves(model, ds)?;
    let concordance = concordance_from_curves(&curves, ds)?;
    let brier = brier_from_curves(&curves, ds)?;
    let ibs_value = ibs(&brier.values);
    Ok(EvalReport {
        ci: concordance.ci,
        bs_curve: brier.values,
        ibs: ibs_value,
        n_pairs_used: concordance.n_pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    /// One variability value per retained entry.
    pub deltas: Vec<f64>,
    /// Mean over retained entries; absent if every entry was excluded.
    pub mean: Option<f64>,
    pub n_excluded: usize,
}

/// Seed-to-seed variability of hazard estimates.
///
/// Each inner slice holds the estimates of one (landmark, offset) entry
/// across seeds. Per entry: `delta = std / (mean * (1 - mean))` with the
/// population standard deviation; entries whose mean is exactly 0 or 1
/// are excluded.
pub fn variability_delta(samples: &[Vec<f64>]) -> Result<DeltaSummary> {
    let mut deltas = Vec::with_capacity(samples.len());
    let mut n_excluded = 0usize;
    for entry in samples {
        if entry.len() < 2 {
            return Err(Error::UndefinedMetric {
                msg: format!("variability needs >= 2 samples per entry, got {}", entry.len()),
            });
        }
        let n = entry.len() as f64;
        let mean = entry.iter().sum::<f64>() / n;
        if mean == 0.0 || mean == 1.0 {
            n_excluded += 1;
            continue;
        }
        let var = entry.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        deltas.push(var.sqrt() / (mean * (1.0 - mean)));
    }
    let mean = if deltas.is_empty() {
        None
    } else {
        Some(deltas.iter().sum::<f64>() / deltas.len() as f64)
    };
    Ok(DeltaSummary {
        deltas,
        mean,
        n_excluded,
    })
}
