//! Weight initialization, the Adam optimizer, the full-batch training loop
//! with validation-based model selection, and evaluation metrics.
//!
//! Randomness comes from a seeded ChaCha8 generator with a fixed
//! stream-splitting rule: stream 0 drives data splits (see
//! [`crate::data::stratified_split`]) and stream `1 + i` initializes weight
//! matrix `i`. Two runs with the same seed and config are bit-identical on a
//! single thread.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphlearn::DistanceMatrix;
use crate::model::{loss_gradients_predictions, LabeledSplit, ModelState, Variant};
use crate::numkit::Matrix;
use crate::propagation::HyperParams;

/// Training loop configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Stop after this many epochs without validation improvement.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            max_epochs: 10_000,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            patience: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Param(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_epochs < 1 {
            return Err(Error::Param("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// RNG stream for data splitting under the documented splitting rule.
pub fn split_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// RNG stream for initializing weight matrix `index`.
pub fn weight_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + index as u64);
    rng
}

/// Uniform initialization on the open interval (-b, b) with
/// `b = sqrt(6 / (rows + cols))`.
pub fn glorot_init(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| loop {
        let v: f64 = rng.gen_range(-bound..bound);
        if v > -bound && v < bound {
            break v;
        }
    })
}

/// Fresh model with Glorot-initialized weights, one RNG stream per matrix.
pub fn init_model(
    dims: &[usize],
    hyper: HyperParams,
    variant: Variant,
    seed: u64,
) -> Result<ModelState> {
    if dims.len() < 2 {
        return Err(Error::Param(
            "layer dims need at least input and output".into(),
        ));
    }
    let weights = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| glorot_init(w[0], w[1], &mut weight_rng(seed, i)))
        .collect();
    ModelState::from_weights(weights, hyper, variant)
}

/// First and second moment accumulators, one pair per parameter matrix.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u32,
}

impl AdamState {
    pub fn new(params: &[Matrix]) -> Self {
        AdamState {
            m: params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect(),
            v: params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u32 {
        self.t
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [Matrix],
    grads: &[Matrix],
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Contract(format!(
            "adam_step got {} params, {} grads, {} accumulators",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::Contract(format!(
                "adam_step shape mismatch: param {}x{} vs grad {}x{}",
                p.rows(),
                p.cols(),
                g.rows(),
                g.cols()
            )));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.adam_beta1.powi(t);
    let bc2 = 1.0 - cfg.adam_beta2.powi(t);
    for idx in 0..params.len() {
        let p = &mut params[idx];
        let g = &grads[idx];
        for i in 0..p.rows() {
            for j in 0..p.cols() {
                let grad = g.get(i, j);
                let m = cfg.adam_beta1 * state.m[idx].get(i, j) + (1.0 - cfg.adam_beta1) * grad;
                let v = cfg.adam_beta2 * state.v[idx].get(i, j) + (1.0 - cfg.adam_beta2) * grad * grad;
                state.m[idx].set(i, j, m);
                state.v[idx].set(i, j, v);
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                p.set(i, j, p.get(i, j) - cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps));
            }
        }
    }
    Ok(())
}

/// Fraction of `idx` where the argmax of the prediction row equals the
/// label; argmax ties go to the smallest class index.
pub fn accuracy(z: &Matrix, labels: &[usize], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::Contract("accuracy over an empty index set".into()));
    }
    let mut correct = 0usize;
    for &i in idx {
        let mut best = 0;
        for c in 1..z.cols() {
            if z.get(i, c) > z.get(i, best) {
                best = c;
            }
        }
        if best == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / idx.len() as f64)
}

/// One epoch's record in the training history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
}

/// Training outcome: the model at the best validation epoch plus history.
pub struct FitOutcome {
    pub model: ModelState,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Full-batch training with per-epoch validation. Each epoch scores the
/// current weights on the validation set using the predictions from the loss
/// forward pass, then applies one Adam update. Returns the weights from the
/// epoch with the highest validation accuracy (ties: earlier epoch). Stops
/// at `max_epochs` or after `patience` epochs without improvement.
pub fn fit(
    mut model: ModelState,
    x: &Matrix,
    dist: &DistanceMatrix,
    split: &LabeledSplit,
    cfg: &TrainConfig,
) -> Result<FitOutcome> {
    cfg.validate()?;
    model.hyper.validate()?;
    let mut adam = AdamState::new(&model.weights);
    let mut history = Vec::new();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_weights = model.weights.clone();
    let mut since_best = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let (loss, grads, z) = loss_gradients_predictions(&model, dist, x, split)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                message: format!("loss {loss}"),
            });
        }
        let val_acc = accuracy(&z, &split.labels, &split.val_idx)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_acc,
        });
        if val_acc > best_acc {
            best_acc = val_acc;
            best_epoch = epoch;
            best_weights = model.weights.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
        adam_step(&mut adam, &mut model.weights, &grads, cfg)?;
    }

    model.weights = best_weights;
    Ok(FitOutcome {
        model,
        history,
        best_epoch,
    })
}

/// History serialized as CSV with an `epoch,train_loss,val_acc` header.
pub fn history_to_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_acc\n");
    for rec in history {
        out.push_str(&format!("{},{},{}\n", rec.epoch, rec.train_loss, rec.val_acc));
    }
    out
}

/// Final metrics for one run, serialized to JSON by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub dataset: String,
    pub label_rate: f64,
    pub seed: u64,
    pub variant: String,
    pub test_accuracy: f64,
    pub epochs_run: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_blobs, stratified_split};
    use crate::graphlearn::{pairwise_euclidean, GraphMode};
    use crate::oracles::ScalarAdamOracle;
    use crate::propagation::GradMode;

    #[test]
    fn glorot_bounds_and_determinism() {
        let bound = (6.0f64 / 57.0).sqrt();
        assert!((bound - 0.324443).abs() < 1e-6);
        let mut rng = weight_rng(7, 0);
        let w = glorot_init(50, 7, &mut rng);
        for &v in w.as_slice() {
            assert!(v > -bound && v < bound);
        }
        let mut rng2 = weight_rng(7, 0);
        let w2 = glorot_init(50, 7, &mut rng2);
        assert_eq!(w, w2);

        let single = (6.0f64 / 2.0).sqrt();
        assert!((single - 1.732051).abs() < 1e-6);
        let mut rng3 = weight_rng(1, 0);
        let w3 = glorot_init(1, 1, &mut rng3);
        assert!(w3.get(0, 0).abs() < single);
    }

    #[test]
    fn weight_streams_differ() {
        let a = glorot_init(4, 4, &mut weight_rng(3, 0));
        let b = glorot_init(4, 4, &mut weight_rng(3, 1));
        assert_ne!(a, b);
    }

    #[test]
    fn adam_first_step_magnitude() {
        let cfg = TrainConfig::default();
        let mut params = vec![Matrix::zeros(2, 2)];
        let grads = vec![Matrix::from_fn(2, 2, |_, _| 1.0)];
        let mut adam = AdamState::new(&params);
        adam_step(&mut adam, &mut params, &grads, &cfg).unwrap();
        let expect = -0.005 * (1.0 / (1.0 + 1e-8));
        for &v in params[0].as_slice() {
            assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let cfg = TrainConfig::default();
        let mut params = vec![Matrix::from_fn(2, 3, |i, j| (i + j) as f64)];
        let before = params[0].clone();
        let grads = vec![Matrix::zeros(2, 3)];
        let mut adam = AdamState::new(&params);
        adam_step(&mut adam, &mut params, &grads, &cfg).unwrap();
        assert_eq!(params[0], before);
    }

    #[test]
    fn adam_matches_scalar_oracle() {
        let cfg = TrainConfig::default();
        let mut params = vec![Matrix::from_fn(2, 2, |i, j| 0.3 * (i as f64) - 0.2 * (j as f64))];
        let mut flat: Vec<f64> = params[0].as_slice().to_vec();
        let mut adam = AdamState::new(&params);
        let mut oracle = ScalarAdamOracle::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let g = Matrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            adam_step(&mut adam, &mut params, &[g.clone()], &cfg).unwrap();
            oracle.step(
                &mut flat,
                g.as_slice(),
                cfg.learning_rate,
                cfg.adam_beta1,
                cfg.adam_beta2,
                cfg.adam_eps,
            );
            for (a, b) in params[0].as_slice().iter().zip(&flat) {
                assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn accuracy_counts_and_tie_breaks() {
        let z = Matrix::from_rows(&[
            vec![0.9, 0.1],
            vec![0.2, 0.8],
            vec![0.6, 0.4],
            vec![0.3, 0.7],
        ])
        .unwrap();
        let labels = vec![0, 1, 1, 1];
        let all: Vec<usize> = (0..4).collect();
        assert!((accuracy(&z, &labels, &all).unwrap() - 0.75).abs() < 1e-15);

        // Uniform predictions tie-break to class 0.
        let z = Matrix::from_fn(3, 2, |_, _| 0.5);
        let labels = vec![1, 1, 1];
        let idx: Vec<usize> = (0..3).collect();
        assert_eq!(accuracy(&z, &labels, &idx).unwrap(), 0.0);

        assert!(accuracy(&z, &labels, &[]).is_err());
    }

    #[test]
    fn fit_rejects_zero_epochs() {
        let cfg = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn fit_learns_separable_blobs_and_is_deterministic() {
        let ds = gen_blobs(
            20,
            &[vec![0.0, 0.0], vec![8.0, 0.0]],
            0.5,
            11,
        )
        .unwrap();
        let dist = pairwise_euclidean(&ds.features).unwrap();
        let split = stratified_split(&ds, 0.1, 0.1, 11).unwrap();
        let hyper = HyperParams::new(
            0.5,
            0.3,
            1.0,
            5,
            2,
            GraphMode::default(),
            GradMode::Unrolled,
        )
        .unwrap();
        let cfg = TrainConfig {
            max_epochs: 200,
            patience: 50,
            seed: 11,
            ..TrainConfig::default()
        };
        let run = |_: ()| {
            let model = init_model(&[2, 16, 2], hyper, Variant::Angpn, cfg.seed).unwrap();
            fit(model, &ds.features, &dist, &split, &cfg).unwrap()
        };
        let out1 = run(());
        let best = out1
            .history
            .iter()
            .map(|r| r.val_acc)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (best - 1.0).abs() < 1e-12 && out1.best_epoch <= 200,
            "validation accuracy {best} at epoch {}",
            out1.best_epoch
        );
        // All losses finite, selected model's val acc is the history max.
        assert!(out1.history.iter().all(|r| r.train_loss.is_finite()));

        let out2 = run(());
        assert_eq!(out1.history, out2.history);
        for (a, b) in out1.model.weights.iter().zip(&out2.model.weights) {
            assert_eq!(a, b);
        }
    }
}
