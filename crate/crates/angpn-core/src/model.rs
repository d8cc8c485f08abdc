//! The propagation network: stacked propagation + linear + activation
//! layers, softmax output, semi-supervised cross-entropy loss.
//!
//! Two variants share the architecture: `angpn` re-solves the neighbor graph
//! from the current features inside every layer, while `ngpn` builds the
//! graph from distances once (beta = 0) so it never adapts. Setting beta to
//! zero makes the two forwards bit-identical.
//!
//! `loss_and_gradients` records the full forward on a tape. In `unrolled`
//! mode gradients flow through every propagation iteration including the
//! graph solve; in `frozen-graph` mode the solved graphs are recorded as
//! constants.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graphlearn::{
    effective_gammas, eta_paper, record_s_step, s_step, DistanceMatrix, GammaMode, GraphMode,
    ThresholdRule,
};
use crate::numkit::{Matrix, Tape};
use crate::propagation::{anfp_propagate, ngpn_propagate, GradMode, HyperParams};

/// Network variant: adaptive graph or fixed distance-only graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Angpn,
    Ngpn,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Angpn => write!(f, "angpn"),
            Variant::Ngpn => write!(f, "ngpn"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "angpn" => Ok(Variant::Angpn),
            "ngpn" => Ok(Variant::Ngpn),
            other => Err(Error::Param(format!(
                "unknown variant '{other}' (expected angpn or ngpn)"
            ))),
        }
    }
}

/// Trainable weights plus the configuration that shapes them.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub weights: Vec<Matrix>,
    pub layer_dims: Vec<usize>,
    pub hyper: HyperParams,
    pub variant: Variant,
}

impl ModelState {
    /// Builds a model from explicit weights; dims are inferred and must chain.
    pub fn from_weights(weights: Vec<Matrix>, hyper: HyperParams, variant: Variant) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Param("model needs at least one weight matrix".into()));
        }
        let mut dims = vec![weights[0].rows()];
        for w in &weights {
            if w.rows() != *dims.last().unwrap() {
                return Err(Error::shape(
                    "model weights",
                    format!("{}", dims.last().unwrap()),
                    format!("{}x{}", w.rows(), w.cols()),
                ));
            }
            dims.push(w.cols());
        }
        Ok(ModelState {
            weights,
            layer_dims: dims,
            hyper,
            variant,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }
}

/// Disjoint train/validation/test indices with the full label vector and the
/// one-hot target matrix restricted to the training rows.
#[derive(Debug, Clone)]
pub struct LabeledSplit {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    /// n-by-c matrix: one-hot rows for training indices, zero elsewhere.
    pub one_hot: Matrix,
}

impl LabeledSplit {
    pub fn new(
        labels: Vec<usize>,
        class_count: usize,
        train_idx: Vec<usize>,
        val_idx: Vec<usize>,
        test_idx: Vec<usize>,
    ) -> Result<Self> {
        let n = labels.len();
        if train_idx.is_empty() {
            return Err(Error::Contract("training index set is empty".into()));
        }
        let mut seen = vec![false; n];
        for (name, set) in [("train", &train_idx), ("val", &val_idx), ("test", &test_idx)] {
            for &i in set.iter() {
                if i >= n {
                    return Err(Error::Contract(format!("{name} index {i} out of range")));
                }
                if seen[i] {
                    return Err(Error::Contract(format!(
                        "index {i} appears in more than one split set"
                    )));
                }
                seen[i] = true;
            }
        }
        for &l in &labels {
            if l >= class_count {
                return Err(Error::Data(format!(
                    "label {l} out of range for {class_count} classes"
                )));
            }
        }
        let mut class_in_train = vec![false; class_count];
        for &i in &train_idx {
            class_in_train[labels[i]] = true;
        }
        if let Some(missing) = class_in_train.iter().position(|&p| !p) {
            return Err(Error::Data(format!(
                "class {missing} has no training examples"
            )));
        }
        let mut one_hot = Matrix::zeros(n, class_count);
        for &i in &train_idx {
            one_hot.set(i, labels[i], 1.0);
        }
        Ok(LabeledSplit {
            train_idx,
            val_idx,
            test_idx,
            labels,
            class_count,
            one_hot,
        })
    }
}

fn propagate(state: &ModelState, dist: &DistanceMatrix, h: &Matrix) -> Result<Matrix> {
    Ok(match state.variant {
        Variant::Angpn => anfp_propagate(dist, h, &state.hyper)?.0,
        Variant::Ngpn => ngpn_propagate(dist, h, &state.hyper)?.0,
    })
}

/// One layer: propagate, project by the layer weight, then ReLU on hidden
/// layers (identity on the final layer; softmax is applied separately).
pub fn layer_forward(
    state: &ModelState,
    layer: usize,
    dist: &DistanceMatrix,
    h_in: &Matrix,
) -> Result<Matrix> {
    if layer >= state.weights.len() {
        return Err(Error::Contract(format!(
            "layer {layer} out of range for {} layers",
            state.weights.len()
        )));
    }
    if h_in.cols() != state.layer_dims[layer] {
        return Err(Error::shape(
            "layer_forward",
            format!("{} input columns", h_in.cols()),
            format!("layer dim {}", state.layer_dims[layer]),
        ));
    }
    let p = propagate(state, dist, h_in)?;
    let z = p.matmul(&state.weights[layer])?;
    Ok(if layer + 1 < state.weights.len() {
        z.relu()
    } else {
        z
    })
}

/// Full forward pass: chained layers then row-wise softmax. Rows of the
/// returned class-probability matrix sum to 1.
pub fn network_forward(state: &ModelState, dist: &DistanceMatrix, x: &Matrix) -> Result<Matrix> {
    let mut h = x.clone();
    for layer in 0..state.weights.len() {
        h = layer_forward(state, layer, dist, &h)?;
    }
    Ok(h.rowwise_softmax())
}

/// Sum (not mean) of cross-entropy over the labeled training rows, with the
/// probability clamped at 1e-12 before the logarithm.
pub fn semi_ce_loss(z: &Matrix, split: &LabeledSplit) -> Result<f64> {
    if split.train_idx.is_empty() {
        return Err(Error::Contract("training index set is empty".into()));
    }
    let max_idx = *split.train_idx.iter().max().unwrap();
    if z.rows() <= max_idx {
        return Err(Error::Contract(format!(
            "predictions have {} rows but labeled index {max_idx} is required",
            z.rows()
        )));
    }
    let mut loss = 0.0;
    for &i in &split.train_idx {
        let p = z.get(i, split.labels[i]).max(1e-12);
        loss -= p.ln();
    }
    Ok(loss)
}

/// Records the forward pass on a tape and returns the loss along with the
/// gradient of every layer weight.
pub fn loss_and_gradients(
    state: &ModelState,
    dist: &DistanceMatrix,
    x: &Matrix,
    split: &LabeledSplit,
) -> Result<(f64, Vec<Matrix>)> {
    let (loss, grads, _) = loss_gradients_predictions(state, dist, x, split)?;
    Ok((loss, grads))
}

/// Like [`loss_and_gradients`] but also returns the class probabilities the
/// taped forward already computed, so training can score validation accuracy
/// without a second forward pass.
pub fn loss_gradients_predictions(
    state: &ModelState,
    dist: &DistanceMatrix,
    x: &Matrix,
    split: &LabeledSplit,
) -> Result<(f64, Vec<Matrix>, Matrix)> {
    if x.cols() != state.input_dim() {
        return Err(Error::shape(
            "loss_and_gradients",
            format!("{} input columns", x.cols()),
            format!("model input dim {}", state.input_dim()),
        ));
    }
    if x.rows() != dist.n() {
        return Err(Error::shape(
            "loss_and_gradients",
            format!("{} feature rows", x.rows()),
            format!("{} distance rows", dist.n()),
        ));
    }
    let p = &state.hyper;
    let n = dist.n();

    // Distance-derived constants of the graph solve, fixed across layers.
    let gammas = effective_gammas(dist, p.k, p.gamma, p.mode.gamma_mode)?;
    let etas: Option<Vec<f64>> = match p.mode.rule {
        ThresholdRule::PaperLiteral => Some(
            (0..n)
                .map(|i| eta_paper(dist, i, p.k, gammas[i]))
                .collect::<Result<_>>()?,
        ),
        ThresholdRule::ExactSimplex => None,
    };

    let mut tape = Tape::new();
    let x_node = tape.constant(x.clone());
    let d_node = tape.constant(dist.matrix().clone());
    let w_nodes: Vec<_> = state.weights.iter().map(|w| tape.param(w.clone())).collect();

    let last = state.weights.len() - 1;
    let mut h = x_node;
    for (layer, &w) in w_nodes.iter().enumerate() {
        let prop = match state.variant {
            Variant::Ngpn => {
                // The fixed graph has no feature dependence; record it as a
                // constant in either gradient mode.
                let fixed = HyperParams { beta: 0.0, ..*p };
                let sol = s_step(dist, tape.value(h), &fixed, p.mode)?;
                let s_node = tape.constant(sol.affinity.matrix().clone());
                let sh = tape.matmul(s_node, h)?;
                let scaled = tape.scale(sh, p.alpha);
                let kept = tape.scale(h, 1.0 - p.alpha);
                tape.add(scaled, kept)?
            }
            Variant::Angpn => {
                let mut f = h;
                for _ in 0..p.t_steps {
                    let s_node = match p.grad_mode {
                        GradMode::Unrolled => {
                            let costs = if p.beta == 0.0 {
                                d_node
                            } else {
                                let ft = tape.transpose(f);
                                let gram = tape.matmul(f, ft)?;
                                let scaled = tape.scale(gram, -p.beta);
                                tape.add(d_node, scaled)?
                            };
                            let (s_node, _) =
                                record_s_step(&mut tape, costs, p.k, &gammas, p.mode, etas.as_deref());
                            s_node
                        }
                        GradMode::FrozenGraph => {
                            let sol = s_step(dist, tape.value(f), p, p.mode)?;
                            tape.constant(sol.affinity.matrix().clone())
                        }
                    };
                    let sh = tape.matmul(s_node, h)?;
                    let scaled = tape.scale(sh, p.alpha);
                    let kept = tape.scale(h, 1.0 - p.alpha);
                    f = tape.add(scaled, kept)?;
                }
                f
            }
        };
        let z = tape.matmul(prop, w)?;
        h = if layer < last { tape.relu(z) } else { z };
    }

    let probs = tape.rowwise_softmax(h);
    let log_probs = tape.ln_clamped(probs, 1e-12);
    let targets = tape.constant(split.one_hot.clone());
    let picked = tape.hadamard(log_probs, targets)?;
    let total = tape.sum_all(picked);
    let loss_node = tape.scale(total, -1.0);

    let loss = tape.value(loss_node).get(0, 0);
    let predictions = tape.value(probs).clone();
    let mut all = tape.backward(loss_node)?;
    let grads = w_nodes
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            all.take(id)
                .unwrap_or_else(|| Matrix::zeros(state.weights[i].rows(), state.weights[i].cols()))
        })
        .collect();
    Ok((loss, grads, predictions))
}

const CHECKPOINT_MAGIC: &[u8; 6] = b"ANGPN1";

/// Serializes a model to the self-describing binary checkpoint format:
/// magic "ANGPN1", u32 layer count, u32 dims, hyperparameters, then
/// row-major little-endian f64 weights.
pub fn checkpoint_to_bytes(state: &ModelState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(state.weights.len() as u32).to_le_bytes());
    for &d in &state.layer_dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    let p = &state.hyper;
    out.extend_from_slice(&p.alpha.to_le_bytes());
    out.extend_from_slice(&p.beta.to_le_bytes());
    out.extend_from_slice(&p.gamma.to_le_bytes());
    out.extend_from_slice(&(p.k as u32).to_le_bytes());
    out.extend_from_slice(&(p.t_steps as u32).to_le_bytes());
    out.push(match p.mode.rule {
        ThresholdRule::PaperLiteral => 0,
        ThresholdRule::ExactSimplex => 1,
    });
    out.push(match p.mode.gamma_mode {
        GammaMode::Global => 0,
        GammaMode::PerRowK => 1,
    });
    out.push(match p.grad_mode {
        GradMode::Unrolled => 0,
        GradMode::FrozenGraph => 1,
    });
    out.push(match state.variant {
        Variant::Angpn => 0,
        Variant::Ngpn => 1,
    });
    for w in &state.weights {
        for &v in w.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parses the binary checkpoint format produced by [`checkpoint_to_bytes`].
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<ModelState> {
    let mut cursor = Cursor { bytes, pos: 0 };
    let magic = cursor.take(6)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Data(format!(
            "bad checkpoint magic {:?}, expected {:?}",
            &magic[..magic.len().min(6)],
            CHECKPOINT_MAGIC
        )));
    }
    let layer_count = cursor.read_u32()? as usize;
    if layer_count == 0 || layer_count > 1024 {
        return Err(Error::Data(format!("implausible layer count {layer_count}")));
    }
    let mut dims = Vec::with_capacity(layer_count + 1);
    for _ in 0..=layer_count {
        dims.push(cursor.read_u32()? as usize);
    }
    let alpha = cursor.read_f64()?;
    let beta = cursor.read_f64()?;
    let gamma = cursor.read_f64()?;
    let k = cursor.read_u32()? as usize;
    let t_steps = cursor.read_u32()? as usize;
    let rule = match cursor.read_u8()? {
        0 => ThresholdRule::PaperLiteral,
        1 => ThresholdRule::ExactSimplex,
        other => return Err(Error::Data(format!("bad threshold rule tag {other}"))),
    };
    let gamma_mode = match cursor.read_u8()? {
        0 => GammaMode::Global,
        1 => GammaMode::PerRowK,
        other => return Err(Error::Data(format!("bad gamma mode tag {other}"))),
    };
    let grad_mode = match cursor.read_u8()? {
        0 => GradMode::Unrolled,
        1 => GradMode::FrozenGraph,
        other => return Err(Error::Data(format!("bad grad mode tag {other}"))),
    };
    let variant = match cursor.read_u8()? {
        0 => Variant::Angpn,
        1 => Variant::Ngpn,
        other => return Err(Error::Data(format!("bad variant tag {other}"))),
    };
    let hyper = HyperParams {
        alpha,
        beta,
        gamma,
        k,
        t_steps,
        mode: GraphMode { rule, gamma_mode },
        grad_mode,
    };
    let mut weights = Vec::with_capacity(layer_count);
    for l in 0..layer_count {
        let (r, c) = (dims[l], dims[l + 1]);
        let mut data = Vec::with_capacity(r * c);
        for _ in 0..r * c {
            data.push(cursor.read_f64()?);
        }
        weights.push(Matrix::from_vec(r, c, data)?);
    }
    if cursor.pos != bytes.len() {
        return Err(Error::Data(format!(
            "trailing bytes in checkpoint: {} of {} consumed",
            cursor.pos,
            bytes.len()
        )));
    }
    ModelState::from_weights(weights, hyper, variant)
}

pub fn save_checkpoint(state: &ModelState, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&checkpoint_to_bytes(state))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    checkpoint_from_bytes(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::Data("checkpoint truncated".into()));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn read_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn read_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn read_f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
