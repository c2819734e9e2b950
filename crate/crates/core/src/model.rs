//! Dual-branch classifier with a per-sample weight head.
//!
//! ```text
//! features ─ encoder+ReLU ─ embedding ─┬─ classifier ─────────────── logits
//!                                       └─ Linear+ReLU ─ Linear ─ σ ─ weight
//! ```
//!
//! The weighted cross-entropy scales the logits by the sample weight before
//! the softmax, so the weight head is trained only through that product.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::format_f64;
use crate::error::{Result, SciuError};
use crate::nn::{
    self, cross_entropy, linear_forward, relu, sigmoid, softmax, LinearLayer, Matrix, LOG_EPS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub embed: usize,
    /// Hidden width of the weight head.
    pub weight_hidden: usize,
    pub classes: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.embed == 0 || self.weight_hidden == 0 || self.classes < 2 {
            return Err(SciuError::Config(format!(
                "invalid model dimensions {self:?}"
            )));
        }
        Ok(())
    }
}

/// Which loss drives training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    /// Cross-entropy on weight-scaled logits; trains every parameter.
    Weighted,
    /// Cross-entropy on raw logits; the weight head receives no gradient.
    Plain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SciuModel {
    pub encoder: LinearLayer,
    pub classifier: LinearLayer,
    pub weight_hidden: LinearLayer,
    pub weight_out: LinearLayer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub embedding: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub weight: f64,
    pub weighted_probs: Vec<f64>,
}

struct Trace {
    encoder_pre: Vec<f64>,
    weight_hidden_pre: Vec<f64>,
    weight_hidden: Vec<f64>,
    out: ForwardOutput,
}

const TENSOR_NAMES: [&str; 8] = [
    "encoder.weight",
    "encoder.bias",
    "classifier.weight",
    "classifier.bias",
    "weight_hidden.weight",
    "weight_hidden.bias",
    "weight_out.weight",
    "weight_out.bias",
];

impl SciuModel {
    pub fn zeros(dims: ModelDims) -> Self {
        SciuModel {
            encoder: LinearLayer::zeros(dims.input, dims.embed),
            classifier: LinearLayer::zeros(dims.embed, dims.classes),
            weight_hidden: LinearLayer::zeros(dims.embed, dims.weight_hidden),
            weight_out: LinearLayer::zeros(dims.weight_hidden, 1),
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            input: self.encoder.input_dim(),
            embed: self.encoder.output_dim(),
            weight_hidden: self.weight_hidden.output_dim(),
            classes: self.classifier.output_dim(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classifier.output_dim()
    }

    /// Parameter tensors in a fixed order.
    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            self.encoder.weight.data(),
            &self.encoder.bias,
            self.classifier.weight.data(),
            &self.classifier.bias,
            self.weight_hidden.weight.data(),
            &self.weight_hidden.bias,
            self.weight_out.weight.data(),
            &self.weight_out.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.encoder.weight.data_mut(),
            &mut self.encoder.bias,
            self.classifier.weight.data_mut(),
            &mut self.classifier.bias,
            self.weight_hidden.weight.data_mut(),
            &mut self.weight_hidden.bias,
            self.weight_out.weight.data_mut(),
            &mut self.weight_out.bias,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(SciuError::Config(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    /// Adds `scale · other` into `self`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &SciuModel, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn trace(&self, features: &[f64]) -> Result<Trace> {
        let encoder_pre = linear_forward(&self.encoder, features)?;
        let embedding = relu(&encoder_pre);
        let logits = linear_forward(&self.classifier, &embedding)?;
        let weight_hidden_pre = linear_forward(&self.weight_hidden, &embedding)?;
        let weight_hidden = relu(&weight_hidden_pre);
        let weight_logit = linear_forward(&self.weight_out, &weight_hidden)?[0];
        let weight = sigmoid(weight_logit);
        let probs = softmax(&logits);
        let scaled: Vec<f64> = logits.iter().map(|z| weight * z).collect();
        let weighted_probs = softmax(&scaled);
        Ok(Trace {
            encoder_pre,
            weight_hidden_pre,
            weight_hidden,
            out: ForwardOutput {
                embedding,
                logits,
                probs,
                weight,
                weighted_probs,
            },
        })
    }

    pub fn forward(&self, features: &[f64]) -> Result<ForwardOutput> {
        Ok(self.trace(features)?.out)
    }

    /// ReLU on/off pattern of both hidden layers; useful to tell whether a
    /// parameter perturbation crossed a kink.
    pub fn activation_pattern(&self, features: &[f64]) -> Result<Vec<bool>> {
        let t = self.trace(features)?;
        Ok(t.encoder_pre
            .iter()
            .chain(&t.weight_hidden_pre)
            .map(|&v| v > 0.0)
            .collect())
    }

    pub fn loss(&self, features: &[f64], label: usize, kind: LossKind) -> Result<f64> {
        let out = self.forward(features)?;
        check_label(label, out.logits.len())?;
        Ok(match kind {
            LossKind::Weighted => wce_loss(&out, label),
            LossKind::Plain => cross_entropy(&out.probs, label),
        })
    }

    /// Loss and its analytic gradient for one sample. The gradient has the
    /// same shape as the model.
    pub fn backward(
        &self,
        features: &[f64],
        label: usize,
        kind: LossKind,
    ) -> Result<(f64, SciuModel)> {
        let mut grads = SciuModel::zeros(self.dims());
        let loss = self.backward_accumulate(features, label, kind, &mut grads)?;
        Ok((loss, grads))
    }

    /// Like [`SciuModel::backward`] but adds the gradient into `grads`.
    pub fn backward_accumulate(
        &self,
        features: &[f64],
        label: usize,
        kind: LossKind,
        grads: &mut SciuModel,
    ) -> Result<f64> {
        let t = self.trace(features)?;
        let out = &t.out;
        check_label(label, out.logits.len())?;

        let (loss, target_probs) = match kind {
            LossKind::Weighted => (wce_loss(out, label), &out.weighted_probs),
            LossKind::Plain => (cross_entropy(&out.probs, label), &out.probs),
        };
        // d loss / d (softmax input); zero where the log clamp is active
        let mut d_softmax_in: Vec<f64> = target_probs.clone();
        d_softmax_in[label] -= 1.0;
        if target_probs[label] < LOG_EPS {
            d_softmax_in.iter_mut().for_each(|v| *v = 0.0);
        }

        let mut d_embedding = match kind {
            LossKind::Weighted => {
                let d_logits: Vec<f64> = d_softmax_in.iter().map(|g| out.weight * g).collect();
                let d_weight = nn::dot(&d_softmax_in, &out.logits);
                let d_weight_logit = d_weight * out.weight * (1.0 - out.weight);

                let d_hidden = self.weight_out.backward_accumulate(
                    &t.weight_hidden,
                    &[d_weight_logit],
                    &mut grads.weight_out,
                );
                let d_hidden_pre = relu_backward(&d_hidden, &t.weight_hidden_pre);
                let from_weight = self.weight_hidden.backward_accumulate(
                    &out.embedding,
                    &d_hidden_pre,
                    &mut grads.weight_hidden,
                );
                let mut d_emb = self.classifier.backward_accumulate(
                    &out.embedding,
                    &d_logits,
                    &mut grads.classifier,
                );
                for (a, b) in d_emb.iter_mut().zip(from_weight) {
                    *a += b;
                }
                d_emb
            }
            LossKind::Plain => self.classifier.backward_accumulate(
                &out.embedding,
                &d_softmax_in,
                &mut grads.classifier,
            ),
        };
        d_embedding = relu_backward(&d_embedding, &t.encoder_pre);
        self.encoder
            .backward_accumulate(features, &d_embedding, &mut grads.encoder);
        Ok(loss)
    }

    /// Writes all tensors as text: a `name dims...` header line followed by
    /// one line of full-precision values.
    pub fn to_checkpoint_string(&self) -> String {
        let dims = self.dims();
        let shapes: [Vec<usize>; 8] = [
            vec![dims.embed, dims.input],
            vec![dims.embed],
            vec![dims.classes, dims.embed],
            vec![dims.classes],
            vec![dims.weight_hidden, dims.embed],
            vec![dims.weight_hidden],
            vec![1, dims.weight_hidden],
            vec![1],
        ];
        let mut out = String::from("# sciu checkpoint v1\n");
        for ((name, shape), values) in TENSOR_NAMES.iter().zip(&shapes).zip(self.tensors()) {
            out.push_str(name);
            for d in shape {
                let _ = write!(out, " {d}");
            }
            out.push('\n');
            let line: Vec<String> = values.iter().map(|v| format_f64(*v)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let mut parsed: Vec<(Vec<usize>, Vec<f64>)> = Vec::with_capacity(8);
        for name in TENSOR_NAMES {
            let (ln, header) = lines.next().ok_or_else(|| SciuError::Parse {
                line: text.lines().count(),
                message: format!("missing tensor {name}"),
            })?;
            let mut parts = header.split_whitespace();
            if parts.next() != Some(name) {
                return Err(SciuError::Parse {
                    line: ln + 1,
                    message: format!("expected tensor {name}"),
                });
            }
            let shape = parts
                .map(|p| p.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| SciuError::Parse {
                    line: ln + 1,
                    message: e.to_string(),
                })?;
            let (vln, body) = lines.next().ok_or_else(|| SciuError::Parse {
                line: ln + 2,
                message: format!("missing values for {name}"),
            })?;
            let values = body
                .split_whitespace()
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| SciuError::Parse {
                    line: vln + 1,
                    message: e.to_string(),
                })?;
            if values.len() != shape.iter().product::<usize>() {
                return Err(SciuError::Parse {
                    line: vln + 1,
                    message: format!(
                        "{name}: shape {shape:?} does not match {} values",
                        values.len()
                    ),
                });
            }
            parsed.push((shape, values));
        }
        let layer =
            |w: &(Vec<usize>, Vec<f64>), b: &(Vec<usize>, Vec<f64>)| -> Result<LinearLayer> {
                if w.0.len() != 2 {
                    return Err(SciuError::Config("weight tensors must be 2-D".into()));
                }
                LinearLayer::new(Matrix::from_vec(w.0[0], w.0[1], w.1.clone())?, b.1.clone())
            };
        let model = SciuModel {
            encoder: layer(&parsed[0], &parsed[1])?,
            classifier: layer(&parsed[2], &parsed[3])?,
            weight_hidden: layer(&parsed[4], &parsed[5])?,
            weight_out: layer(&parsed[6], &parsed[7])?,
        };
        let d = model.dims();
        if model.classifier.input_dim() != d.embed
            || model.weight_hidden.input_dim() != d.embed
            || model.weight_out.input_dim() != d.weight_hidden
            || model.weight_out.output_dim() != 1
        {
            return Err(SciuError::Config(
                "checkpoint layer shapes are inconsistent".into(),
            ));
        }
        Ok(model)
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint_string()).map_err(|e| SciuError::io(path, e))
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| SciuError::io(path, e))?;
        SciuModel::from_checkpoint_str(&text)
    }
}

fn check_label(label: usize, classes: usize) -> Result<()> {
    if label >= classes {
        return Err(SciuError::Config(format!(
            "label {label} out of range for {classes} classes"
        )));
    }
    Ok(())
}

fn relu_backward(upstream: &[f64], pre: &[f64]) -> Vec<f64> {
    upstream
        .iter()
        .zip(pre)
        .map(|(&g, &p)| if p > 0.0 { g } else { 0.0 })
        .collect()
}

/// Cross-entropy of the annotated label under the weight-scaled softmax.
pub fn wce_loss(output: &ForwardOutput, label: usize) -> f64 {
    cross_entropy(&output.weighted_probs, label)
}

/// Uniform(±1/√fan_in) initialization for every tensor, with the weight head's
/// output bias at zero so initial weights sit near 0.5.
pub fn init_model(dims: ModelDims, seed: u64) -> Result<SciuModel> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = |input: usize, output: usize| {
        let bound = 1.0 / (input as f64).sqrt();
        let mut l = LinearLayer::zeros(input, output);
        for v in l.weight.data_mut().iter_mut().chain(l.bias.iter_mut()) {
            *v = rng.random_range(-bound..bound);
        }
        l
    };
    let mut model = SciuModel {
        encoder: layer(dims.input, dims.embed),
        classifier: layer(dims.embed, dims.classes),
        weight_hidden: layer(dims.embed, dims.weight_hidden),
        weight_out: layer(dims.weight_hidden, 1),
    };
    model.weight_out.bias[0] = 0.0;
    Ok(model)
}

/// Heavy-ball momentum SGD over every model tensor.
#[derive(Clone, Debug)]
pub struct MomentumSgd {
    velocity: SciuModel,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl MomentumSgd {
    pub fn new(dims: ModelDims, learning_rate: f64, momentum: f64) -> Self {
        MomentumSgd {
            velocity: SciuModel::zeros(dims),
            learning_rate,
            momentum,
        }
    }

    pub fn step(&mut self, model: &mut SciuModel, grads: &SciuModel) -> Result<()> {
        for ((p, g), v) in model
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.velocity.tensors_mut())
        {
            nn::sgd_momentum_step(p, g, v, self.learning_rate, self.momentum)?;
        }
        Ok(())
    }
}
