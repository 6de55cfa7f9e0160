//! Synthetic churn sequences from a Gaussian random walk.
//!
//! Each record starts at a standard-normal state and takes unit-variance
//! Gaussian steps. From the second step onward the sequence terminates
//! with probability `sigmoid(a . x + b)` evaluated at the new state, so
//! the minimum duration is 2. A record that survives all `horizon - 1`
//! termination draws is censored at the horizon.
//!
//! All draws come from a single `ChaCha8Rng` stream seeded with
//! `RwConfig::seed`, consumed record by record in a fixed order
//! (initial state, then per step: increment vector, then one uniform),
//! so identical configs produce bit-identical datasets on any platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqdata::{Dataset, SequenceRecord, StateVector};

/// Configuration of the random-walk generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwConfig {
    pub n: usize,
    pub dim: usize,
    pub horizon: usize,
    /// Termination-logit coefficients, length `dim`.
    pub a: Vec<f64>,
    /// Termination-logit intercept.
    pub b: f64,
    pub seed: u64,
}

impl RwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::invalid_config("n must be >= 1"));
        }
        if self.dim < 1 {
            return Err(Error::invalid_config("dim must be >= 1"));
        }
        if self.horizon < 2 {
            return Err(Error::invalid_config("horizon must be >= 2"));
        }
        if self.a.len() != self.dim {
            return Err(Error::invalid_config(format!(
                "a has length {}, expected dim {}",
                self.a.len(),
                self.dim
            )));
        }
        if !self.a.iter().all(|v| v.is_finite()) || !self.b.is_finite() {
            return Err(Error::invalid_config("a and b must be finite"));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Default coefficient vector: a unit-norm direction drawn from the seed.
pub fn default_coefficients(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dot(&a, &a).sqrt();
    if norm < 1e-12 {
        a[0] = 1.0;
        return a;
    }
    for v in &mut a {
        *v /= norm;
    }
    a
}

/// Generates `cfg.n` random-walk records. Deterministic in `cfg`.
pub fn generate_random_walk(cfg: &RwConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let mut x: Vec<f64> = (0..cfg.dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut states = vec![StateVector::from(x.clone())];
        let mut censored = true;
        for _ in 1..cfg.horizon {
            for v in &mut x {
                let step: f64 = rng.sample(StandardNormal);
                *v += step;
            }
            states.push(StateVector::from(x.clone()));
            let p = sigmoid(dot(&cfg.a, &x) + cfg.b);
            let u: f64 = rng.random();
            if u < p {
                censored = false;
                break;
            }
        }
        records.push(SequenceRecord::new(format!("rw-{i}"), states, censored)?);
    }
    Dataset::new(records, cfg.dim, cfg.horizon)
}

/// Finds an intercept `b` whose pilot generation (n = 2000) censors close
/// to `target_censoring`, by bisection over [-10, 10].
///
/// The censoring fraction decreases in `b`, so the bracket is checked at
/// the endpoints first. Fails if the target is outside the reachable
/// range or the final pilot fraction is off by more than 0.05.
pub fn calibrate_intercept(
    dim: usize,
    horizon: usize,
    a: &[f64],
    target_censoring: f64,
    seed: u64,
) -> Result<f64> {
    if !(target_censoring > 0.0 && target_censoring < 1.0) {
        return Err(Error::Calibration {
            msg: format!("target censoring {target_censoring} outside (0, 1)"),
        });
    }
    let pilot = |b: f64| -> Result<f64> {
        let ds = generate_random_walk(&RwConfig {
            n: 2000,
            dim,
            horizon,
            a: a.to_vec(),
            b,
            seed,
        })?;
        let censored = ds.records().iter().filter(|r| r.censored).count();
        Ok(censored as f64 / ds.len() as f64)
    };

    let (mut lo, mut hi) = (-10.0_f64, 10.0_f64);
    let f_lo = pilot(lo)?;
    let f_hi = pilot(hi)?;
    if f_lo < target_censoring || f_hi > target_censoring {
        return Err(Error::Calibration {
            msg: format!(
                "target {target_censoring} not bracketed: fraction({lo}) = {f_lo}, fraction({hi}) = {f_hi}"
            ),
        });
    }

    let mut mid = 0.5 * (lo + hi);
    let mut frac = pilot(mid)?;
    for _ in 0..60 {
        if (frac - target_censoring).abs() <= 0.01 {
            break;
        }
        if frac > target_censoring {
            // too much censoring: raise the termination rate
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        frac = pilot(mid)?;
    }
    if (frac - target_censoring).abs() > 0.05 {
        return Err(Error::Calibration {
            msg: format!(
                "bisection ended at b = {mid} with pilot fraction {frac}, target {target_censoring}"
            ),
        });
    }
    Ok(mid)
}
