//! Discrete-time hazard models.
//!
//! A model maps a state vector and a step offset `d >= 1` to a hazard
//! probability through a logit link. Two architectures are provided:
//!
//! * `LinearCox` — a discrete Cox-style model `coef . x + offset_bias[d]`
//!   with one baseline logit per offset.
//! * `Feedforward` — a single tanh hidden layer over the state plus the
//!   same per-offset bias at the output unit, so non-proportional
//!   hazards stay expressible.
//!
//! Parameters live in one flat vector with a named block layout, which
//! keeps optimizer steps and target-network averaging trivial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqdata::{SequenceRecord, StateVector};
use crate::targets::TargetTable;

/// Logits are clamped to this magnitude before the sigmoid; far outside
/// any trained range, it only guards the cross-entropy against overflow.
pub const LOGIT_CLAMP: f64 = 30.0;

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Numerically stable binary cross-entropy with a soft label, expressed
/// in terms of the logit: `softplus(z) - y * z`.
fn cross_entropy_from_logit(y: f64, z: f64) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - y * z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "linear-cox")]
    LinearCox,
    #[serde(rename = "feedforward")]
    Feedforward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub feature_dim: usize,
    pub horizon: usize,
    /// Hidden width of the feedforward encoder; unused by `LinearCox`.
    pub hidden: usize,
}

/// Named slice of a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub blocks: Vec<Block>,
}

impl Layout {
    fn from_sizes(sizes: &[(&str, usize)]) -> Layout {
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut offset = 0;
        for (name, len) in sizes {
            blocks.push(Block {
                name: (*name).to_string(),
                offset,
                len: *len,
            });
            offset += len;
        }
        Layout { blocks }
    }

    pub fn total_len(&self) -> usize {
        self.blocks.iter().map(|b| b.len).sum()
    }

    pub fn range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .map(|b| b.offset..b.offset + b.len)
    }
}

/// Flat parameter storage shared by the main and target networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    values: Vec<f64>,
    layout: Layout,
}

impl ParameterVector {
    pub fn zeros(layout: Layout) -> ParameterVector {
        let n = layout.total_len();
        ParameterVector {
            values: vec![0.0; n],
            layout,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, name: &str) -> &[f64] {
        let r = self.layout.range(name).expect("unknown parameter block");
        &self.values[r]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Target-network update: `tau * theta + (1 - tau) * phi` elementwise.
///
/// Components that already agree are returned unchanged and `tau = 1`
/// returns `theta` outright, so the fixed point and the full-copy case
/// hold exactly in floating point.
pub fn ema_update(
    phi: &ParameterVector,
    theta: &ParameterVector,
    tau: f64,
) -> Result<ParameterVector> {
    if phi.layout != theta.layout || phi.values.len() != theta.values.len() {
        return Err(Error::LayoutMismatch);
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid_config(format!(
            "tau {tau} outside (0, 1]"
        )));
    }
    if tau == 1.0 {
        return Ok(theta.clone());
    }
    let values = phi
        .values
        .iter()
        .zip(&theta.values)
        .map(|(&p, &t)| if t == p { p } else { tau * t + (1.0 - tau) * p })
        .collect();
    Ok(ParameterVector {
        values,
        layout: phi.layout.clone(),
    })
}

/// Per-sequence hazard and survival tables under one model.
///
/// Row `l` covers offsets `d = 1..=window[l]` for hazards and
/// `d = 0..=window[l]` for survivals, with `survival(l, 0) = 1` and
/// `survival(l, d) = survival(l, d-1) * (1 - hazard(l, d))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardMatrix {
    hazards: Vec<Vec<f64>>,
    survivals: Vec<Vec<f64>>,
}

impl HazardMatrix {
    pub fn landmarks(&self) -> usize {
        self.hazards.len()
    }

    pub fn window(&self, landmark: usize) -> usize {
        self.hazards[landmark].len()
    }

    /// Hazard at `offset >= 1`.
    pub fn hazard(&self, landmark: usize, offset: usize) -> f64 {
        self.hazards[landmark][offset - 1]
    }

    /// Survival at `offset >= 0`.
    pub fn survival(&self, landmark: usize, offset: usize) -> f64 {
        self.survivals[landmark][offset]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardModel {
    pub arch: Architecture,
    pub dims: ModelDims,
    pub params: ParameterVector,
}

/// Per-landmark forward state reused across offsets.
enum Encoded {
    Linear { base: f64 },
    Feedforward { base: f64, hidden: Vec<f64> },
}

impl Encoded {
    fn base(&self) -> f64 {
        match self {
            Encoded::Linear { base } => *base,
            Encoded::Feedforward { base, .. } => *base,
        }
    }
}

impl HazardModel {
    pub fn layout_for(arch: Architecture, dims: &ModelDims) -> Layout {
        match arch {
            Architecture::LinearCox => Layout::from_sizes(&[
                ("coef", dims.feature_dim),
                ("offset_bias", dims.horizon),
            ]),
            Architecture::Feedforward => Layout::from_sizes(&[
                ("w1", dims.hidden * dims.feature_dim),
                ("b1", dims.hidden),
                ("w2", dims.hidden),
                ("b2", 1),
                ("offset_bias", dims.horizon),
            ]),
        }
    }

    /// Deterministic seeded initialization: the linear model starts at
    /// zero (hazard 0.5 everywhere); feedforward weights are drawn
    /// `N(0, 1) / sqrt(fan_in)` from a ChaCha8 stream, biases zero.
    pub fn init(arch: Architecture, dims: ModelDims, seed: u64) -> Result<HazardModel> {
        if dims.feature_dim == 0 || dims.horizon == 0 {
            return Err(Error::invalid_config("feature_dim and horizon must be >= 1"));
        }
        if arch == Architecture::Feedforward && dims.hidden == 0 {
            return Err(Error::invalid_config("hidden must be >= 1 for feedforward"));
        }
        let layout = Self::layout_for(arch, &dims);
        let mut params = ParameterVector::zeros(layout);
        if arch == Architecture::Feedforward {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w1 = params.layout.range("w1").unwrap();
            let scale1 = 1.0 / (dims.feature_dim as f64).sqrt();
            for i in w1 {
                let g: f64 = rng.sample(StandardNormal);
                params.values[i] = g * scale1;
            }
            let w2 = params.layout.range("w2").unwrap();
            let scale2 = 1.0 / (dims.hidden as f64).sqrt();
            for i in w2 {
                let g: f64 = rng.sample(StandardNormal);
                params.values[i] = g * scale2;
            }
        }
        Ok(HazardModel { arch, dims, params })
    }

    fn check_offset(&self, d: usize, min: usize) -> Result<()> {
        if d < min || d > self.dims.horizon {
            return Err(Error::OffsetOutOfRange {
                offset: d,
                min,
                max: self.dims.horizon,
            });
        }
        Ok(())
    }

    fn check_dim(&self, x: &StateVector) -> Result<()> {
        if x.dim() != self.dims.feature_dim {
            return Err(Error::invalid_config(format!(
                "state dimension {} != model feature_dim {}",
                x.dim(),
                self.dims.feature_dim
            )));
        }
        Ok(())
    }

    fn encode(&self, x: &[f64]) -> Encoded {
        let p = &self.params;
        match self.arch {
            Architecture::LinearCox => {
                let coef = p.block("coef");
                let base = coef.iter().zip(x).map(|(c, v)| c * v).sum();
                Encoded::Linear { base }
            }
            Architecture::Feedforward => {
                let dim = self.dims.feature_dim;
                let hid = self.dims.hidden;
                let w1 = p.block("w1");
                let b1 = p.block("b1");
                let w2 = p.block("w2");
                let b2 = p.block("b2")[0];
                let mut hidden = Vec::with_capacity(hid);
                for h in 0..hid {
                    let row = &w1[h * dim..(h + 1) * dim];
                    let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b1[h];
                    hidden.push(z.tanh());
                }
                let base = w2.iter().zip(&hidden).map(|(w, u)| w * u).sum::<f64>() + b2;
                Encoded::Feedforward { base, hidden }
            }
        }
    }

    fn logit_at(&self, enc: &Encoded, d: usize) -> f64 {
        enc.base() + self.params.block("offset_bias")[d - 1]
    }

    /// Hazard probability at offset `d >= 1` from state `x`.
    pub fn hazard(&self, x: &StateVector, d: usize) -> Result<f64> {
        self.check_offset(d, 1)?;
        self.check_dim(x)?;
        let enc = self.encode(x.values());
        let z = self.logit_at(&enc, d).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
        Ok(sigmoid(z))
    }

    /// Survival past offset `d >= 0` from state `x`: the running product
    /// of `1 - hazard` over offsets `1..=d`.
    pub fn survival(&self, x: &StateVector, d: usize) -> Result<f64> {
        self.check_offset(d, 0)?;
        Ok(self.survival_curve(x, d)?[d])
    }

    /// Survival at every offset `0..=max_d`, sharing one encoding pass.
    pub fn survival_curve(&self, x: &StateVector, max_d: usize) -> Result<Vec<f64>> {
        self.check_offset(max_d, 0)?;
        self.check_dim(x)?;
        let enc = self.encode(x.values());
        let mut out = Vec::with_capacity(max_d + 1);
        let mut s = 1.0;
        out.push(s);
        for d in 1..=max_d {
            let z = self.logit_at(&enc, d).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
            s *= 1.0 - sigmoid(z);
            out.push(s);
        }
        Ok(out)
    }

    /// Hazard/survival tables over every landmark of `seq`, with
    /// per-landmark window lengths given by `windows`.
    pub fn hazard_matrix(&self, seq: &SequenceRecord, windows: &[usize]) -> Result<HazardMatrix> {
        let t = seq.duration();
        if windows.len() != t {
            return Err(Error::invalid_config(format!(
                "windows length {} != sequence duration {t}",
                windows.len()
            )));
        }
        self.check_dim(seq.state(0))?;
        let mut hazards = Vec::with_capacity(t);
        let mut survivals = Vec::with_capacity(t);
        for (l, &w) in windows.iter().enumerate() {
            self.check_offset(w, 0)?;
            let enc = self.encode(seq.state(l).values());
            let mut hrow = Vec::with_capacity(w);
            let mut srow = Vec::with_capacity(w + 1);
            let mut s = 1.0;
            srow.push(s);
            for d in 1..=w {
                let z = self.logit_at(&enc, d).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
                let h = sigmoid(z);
                hrow.push(h);
                s *= 1.0 - h;
                srow.push(s);
            }
            hazards.push(hrow);
            survivals.push(srow);
        }
        Ok(HazardMatrix { hazards, survivals })
    }

    /// Weighted soft-label cross-entropy over a batch and its exact
    /// analytic gradient.
    ///
    /// `loss = sum over sequences, landmarks l, offsets d of
    /// weight(l, d) * CE(target(l, d), hazard(d | x_l))`, offsets
    /// `1..=window(l)`. Entries with zero weight are skipped and
    /// contribute nothing to the loss or the gradient.
    pub fn loss_and_grad(
        &self,
        batch: &[(&SequenceRecord, &TargetTable)],
    ) -> Result<(f64, ParameterVector)> {
        let layout = self.params.layout.clone();
        let ob_start = layout.range("offset_bias").unwrap().start;
        let mut grad = ParameterVector::zeros(layout);
        let mut loss = 0.0;
        let dim = self.dims.feature_dim;

        for (seq, table) in batch {
            if table.landmarks() != seq.duration() {
                return Err(Error::invalid_config(format!(
                    "target table has {} landmarks for sequence `{}` of duration {}",
                    table.landmarks(),
                    seq.id,
                    seq.duration()
                )));
            }
            self.check_dim(seq.state(0))?;
            for l in 0..seq.duration() {
                let window = table.window(l);
                if window > self.dims.horizon {
                    return Err(Error::OffsetOutOfRange {
                        offset: window,
                        min: 0,
                        max: self.dims.horizon,
                    });
                }
                let x = seq.state(l).values();
                let mut enc: Option<Encoded> = None;
                let mut dz_sum = 0.0;
                for d in 1..=window {
                    let w = table.weight(l, d);
                    if w == 0.0 {
                        continue;
                    }
                    let y = table.target(l, d);
                    let enc = enc.get_or_insert_with(|| self.encode(x));
                    let z = self.logit_at(enc, d).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
                    loss += w * cross_entropy_from_logit(y, z);
                    let dz = w * (sigmoid(z) - y);
                    dz_sum += dz;
                    grad.values[ob_start + d - 1] += dz;
                }
                let Some(enc) = enc else { continue };
                match &enc {
                    Encoded::Linear { .. } => {
                        let r = grad.layout.range("coef").unwrap();
                        for (g, v) in grad.values[r].iter_mut().zip(x) {
                            *g += dz_sum * v;
                        }
                    }
                    Encoded::Feedforward { hidden, .. } => {
                        let w2_vals = self.params.block("w2");
                        let b2 = grad.layout.range("b2").unwrap().start;
                        grad.values[b2] += dz_sum;
                        let gw2 = grad.layout.range("w2").unwrap().start;
                        let gb1 = grad.layout.range("b1").unwrap().start;
                        let gw1 = grad.layout.range("w1").unwrap().start;
                        for (h, &u) in hidden.iter().enumerate() {
                            grad.values[gw2 + h] += dz_sum * u;
                            let dv = dz_sum * w2_vals[h] * (1.0 - u * u);
                            grad.values[gb1 + h] += dv;
                            let row = gw1 + h * dim;
                            for (j, &v) in x.iter().enumerate() {
                                grad.values[row + j] += dv * v;
                            }
                        }
                    }
                }
            }
            if !loss.is_finite() || !grad.is_finite() {
                return Err(Error::NumericalFailure {
                    id: seq.id.clone(),
                    msg: "non-finite loss or gradient".into(),
                });
            }
        }
        Ok((loss, grad))
    }
}
