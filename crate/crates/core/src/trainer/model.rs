//! Small dense classifiers over a flat parameter vector.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{SeededRng, StreamKey};

use super::loss::{label_smoothed_ce, softmax};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Multinomial logistic regression.
    Linear,
    /// One tanh hidden layer.
    Mlp { hidden: usize },
}

/// Parameters are laid out as `[W1, b1, W2, b2]` for the MLP and `[W, b]`
/// for the linear model; weights are row-major `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub architecture: Architecture,
    pub input_dim: usize,
    pub classes: usize,
    pub params: Vec<f64>,
}

/// Per-sample result of a training forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub correct: bool,
    /// Softmax probability of the true class.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchGrad {
    pub mean_loss: f64,
    pub grad: Vec<f64>,
    pub predictions: Vec<Prediction>,
}

impl Model {
    pub fn param_count(architecture: Architecture, input_dim: usize, classes: usize) -> usize {
        match architecture {
            Architecture::Linear => classes * input_dim + classes,
            Architecture::Mlp { hidden } => hidden * input_dim + hidden + classes * hidden + classes,
        }
    }

    /// Weights ~ N(0, 1/fan_in), biases zero.
    pub fn new(architecture: Architecture, input_dim: usize, classes: usize, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed, StreamKey::new(0, 0, "init"));
        let mut params = Vec::with_capacity(Self::param_count(architecture, input_dim, classes));
        let mut layer = |params: &mut Vec<f64>, out: usize, fan_in: usize| {
            let scale = 1.0 / (fan_in as f64).sqrt();
            params.extend((0..out * fan_in).map(|_| rng.standard_normal() * scale));
            params.extend(std::iter::repeat_n(0.0, out));
        };
        match architecture {
            Architecture::Linear => layer(&mut params, classes, input_dim),
            Architecture::Mlp { hidden } => {
                layer(&mut params, hidden, input_dim);
                layer(&mut params, classes, hidden);
            }
        }
        Self {
            architecture,
            input_dim,
            classes,
            params,
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim,
                actual: input.len(),
            });
        }
        Ok(())
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        let n = Self::param_count(self.architecture, self.input_dim, self.classes);
        if params.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                actual: params.len(),
            });
        }
        Ok(())
    }

    /// `out = W x + b` for the `out x inp` layer starting at `offset`.
    fn dense(params: &[f64], offset: usize, inp: usize, out: usize, x: &[f64]) -> Vec<f64> {
        let (w, b) = params[offset..offset + out * inp + out].split_at(out * inp);
        w.chunks_exact(inp)
            .zip(b)
            .map(|(row, &bias)| bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// Logits for `input` under an arbitrary parameter vector of this shape
    /// (e.g. the EMA shadow).
    pub fn forward_with(&self, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        self.check_params(params)?;
        Ok(self.forward_unchecked(params, input).0)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_with(&self.params, input)
    }

    /// Returns logits and, for the MLP, the hidden activations.
    fn forward_unchecked(&self, params: &[f64], input: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self.architecture {
            Architecture::Linear => (
                Self::dense(params, 0, self.input_dim, self.classes, input),
                Vec::new(),
            ),
            Architecture::Mlp { hidden } => {
                let h: Vec<f64> = Self::dense(params, 0, self.input_dim, hidden, input)
                    .into_iter()
                    .map(f64::tanh)
                    .collect();
                let off = hidden * self.input_dim + hidden;
                (Self::dense(params, off, hidden, self.classes, &h), h)
            }
        }
    }

    /// Adds `d loss / d params` for one sample to `grad`, given
    /// `d loss / d logits`.
    fn backward(&self, params: &[f64], input: &[f64], hidden_act: &[f64], dlogits: &[f64], scale: f64, grad: &mut [f64]) {
        let accumulate = |grad: &mut [f64], offset: usize, inp: usize, x: &[f64], dout: &[f64]| {
            let out = dout.len();
            let (gw, gb) = grad[offset..offset + out * inp + out].split_at_mut(out * inp);
            for ((row, gbias), &d) in gw.chunks_exact_mut(inp).zip(gb.iter_mut()).zip(dout) {
                let d = d * scale;
                *gbias += d;
                for (g, &xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
        };
        match self.architecture {
            Architecture::Linear => accumulate(grad, 0, self.input_dim, input, dlogits),
            Architecture::Mlp { hidden } => {
                let off = hidden * self.input_dim + hidden;
                accumulate(grad, off, hidden, hidden_act, dlogits);
                let w2 = &params[off..off + self.classes * hidden];
                let dh: Vec<f64> = (0..hidden)
                    .map(|j| {
                        let back: f64 = (0..self.classes).map(|k| w2[k * hidden + j] * dlogits[k]).sum();
                        back * (1.0 - hidden_act[j] * hidden_act[j])
                    })
                    .collect();
                accumulate(grad, 0, self.input_dim, input, &dh);
            }
        }
    }

    /// Mean label-smoothed loss over a batch, its gradient, and per-sample
    /// predictions made before any update.
    pub fn batch_loss_grad<I: AsRef<[f64]>>(&self, inputs: &[I], targets: &[usize], eps: f64) -> Result<BatchGrad> {
        self.batch_loss_grad_with(&self.params, inputs, targets, eps)
    }

    pub fn batch_loss_grad_with<I: AsRef<[f64]>>(
        &self,
        params: &[f64],
        inputs: &[I],
        targets: &[usize],
        eps: f64,
    ) -> Result<BatchGrad> {
        self.check_params(params)?;
        if inputs.len() != targets.len() {
            return Err(Error::ShapeMismatch {
                expected: inputs.len(),
                actual: targets.len(),
            });
        }
        let mut grad = vec![0.0; params.len()];
        let mut total = 0.0;
        let mut predictions = Vec::with_capacity(inputs.len());
        let scale = 1.0 / inputs.len().max(1) as f64;
        for (x, &t) in inputs.iter().zip(targets) {
            let x = x.as_ref();
            self.check_input(x)?;
            let (logits, h) = self.forward_unchecked(params, x);
            let lg = label_smoothed_ce(&logits, t, eps)?;
            total += lg.loss;
            predictions.push(prediction(&logits, t));
            self.backward(params, x, &h, &lg.grad, scale, &mut grad);
        }
        Ok(BatchGrad {
            mean_loss: total * scale,
            grad,
            predictions,
        })
    }

    pub fn predict_with(&self, params: &[f64], input: &[f64], target: usize) -> Result<Prediction> {
        let logits = self.forward_with(params, input)?;
        if target >= self.classes {
            return Err(Error::TargetOutOfRange {
                target,
                classes: self.classes,
            });
        }
        Ok(prediction(&logits, target))
    }
}

fn prediction(logits: &[f64], target: usize) -> Prediction {
    let p = softmax(logits);
    // ties resolve to the lowest index
    let argmax = p
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > p[best] { i } else { best });
    Prediction {
        correct: argmax == target,
        confidence: p[target].clamp(0.0, 1.0),
    }
}

const MAGIC: &[u8; 4] = b"BFMP";
pub const PARAMS_FORMAT_VERSION: u32 = 1;

/// Writes `magic, version, arch, hidden, input_dim, classes, count` (u32 LE,
/// count u64 LE) followed by the parameters as f64 LE.
pub fn write_params<W: Write>(model: &Model, params: &[f64], mut out: W) -> Result<()> {
    model.check_params(params)?;
    let (arch, hidden) = match model.architecture {
        Architecture::Linear => (0u32, 0u32),
        Architecture::Mlp { hidden } => (1, hidden as u32),
    };
    out.write_all(MAGIC)?;
    for v in [PARAMS_FORMAT_VERSION, arch, hidden, model.input_dim as u32, model.classes as u32] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in params {
        out.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_params<R: Read>(mut input: R) -> Result<Model> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("not a parameter checkpoint".into()));
    }
    let mut u32s = [0u32; 5];
    for v in &mut u32s {
        let mut b = [0u8; 4];
        input.read_exact(&mut b)?;
        *v = u32::from_le_bytes(b);
    }
    let [version, arch, hidden, input_dim, classes] = u32s;
    if version != PARAMS_FORMAT_VERSION {
        return Err(Error::SchemaVersion(u64::from(version)));
    }
    let architecture = match arch {
        0 => Architecture::Linear,
        1 => Architecture::Mlp {
            hidden: hidden as usize,
        },
        a => return Err(Error::Parse(format!("unknown architecture tag {a}"))),
    };
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    let count = u64::from_le_bytes(b) as usize;
    let expected = Model::param_count(architecture, input_dim as usize, classes as usize);
    if count != expected {
        return Err(Error::ShapeMismatch {
            expected,
            actual: count,
        });
    }
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut b)?;
        params.push(f64::from_le_bytes(b));
    }
    Ok(Model {
        architecture,
        input_dim: input_dim as usize,
        classes: classes as usize,
        params,
    })
}
