//! Minibatch training with validation-based early stopping.

use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::{bce_with_logits, mse, LossKind};
use super::network::{Network, NetworkSpec, Task};
use super::tensor::Tensor3;
use super::NnError;
use crate::geom::Point;
use crate::seed::{derive_seed, rng};

/// Task-appropriate ground truth for a set of inputs.
#[derive(Clone, Debug, PartialEq)]
pub enum TaskLabels {
    /// 0.0 = null, 1.0 = target, one per input.
    Detect(Vec<f64>),
    /// Target position in meters, one per input.
    Position(Vec<Point>),
}

impl TaskLabels {
    pub fn len(&self) -> usize {
        match self {
            TaskLabels::Detect(v) => v.len(),
            TaskLabels::Position(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            TaskLabels::Detect(_) => Task::Detect,
            TaskLabels::Position(_) => Task::Position,
        }
    }

    fn gather(&self, idx: &[usize]) -> TaskLabels {
        match self {
            TaskLabels::Detect(v) => TaskLabels::Detect(idx.iter().map(|&i| v[i]).collect()),
            TaskLabels::Position(v) => TaskLabels::Position(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Inputs (each `channels * len` values) with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainData {
    pub inputs: Vec<Vec<f64>>,
    pub labels: TaskLabels,
}

impl TrainData {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn validate(&self, channels: usize, len: usize) -> Result<(), NnError> {
        if self.inputs.len() != self.labels.len() {
            return Err(NnError::ShapeMismatch(format!(
                "{} inputs vs {} labels",
                self.inputs.len(),
                self.labels.len()
            )));
        }
        for (i, x) in self.inputs.iter().enumerate() {
            if x.len() != channels * len {
                return Err(NnError::ShapeMismatch(format!(
                    "input {i} has {} values, expected {}",
                    x.len(),
                    channels * len
                )));
            }
        }
        Ok(())
    }
}

/// Training hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Hyper {
    /// Detection converges quickly; a short budget keeps runs fast.
    pub fn detect_default(seed: u64) -> Self {
        Hyper {
            epochs: 80,
            batch_size: 32,
            learning_rate: 1e-3,
            seed,
            patience: 10,
        }
    }

    /// Position regression needs a longer budget.
    pub fn position_default(seed: u64) -> Self {
        Hyper {
            epochs: 300,
            batch_size: 32,
            learning_rate: 1e-3,
            seed,
            patience: 20,
        }
    }
}

/// Per-epoch loss traces.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainCurves {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

/// A trained network with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub network: Network,
    pub hyper: Hyper,
    pub curves: TrainCurves,
    /// Epoch whose parameters were kept (best validation loss).
    pub best_epoch: usize,
}

fn gather_batch(data: &TrainData, idx: &[usize], channels: usize, len: usize) -> Tensor3 {
    let mut t = Tensor3::zeros(idx.len(), channels, len);
    let stride = channels * len;
    for (b, &i) in idx.iter().enumerate() {
        t.data[b * stride..(b + 1) * stride].copy_from_slice(&data.inputs[i]);
    }
    t
}

fn batch_loss(net: &Network, x: &Tensor3, labels: &TaskLabels) -> Result<(f64, Tensor3, super::network::NetCache), NnError> {
    let (y, cache) = net.forward_cached(x)?;
    let (loss, grad) = match labels {
        TaskLabels::Detect(l) => bce_with_logits(&y, l),
        TaskLabels::Position(l) => mse(&y, l),
    };
    Ok((loss, grad, cache))
}

/// Mean loss of `data` under `net`, evaluated in deterministic batches.
pub fn evaluate_loss(net: &Network, data: &TrainData, batch_size: usize) -> Result<f64, NnError> {
    if data.is_empty() {
        return Ok(f64::NAN);
    }
    let (channels, len) = (net.input_channels, net.input_len);
    let mut total = 0.0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let x = gather_batch(data, chunk, channels, len);
        let y = net.forward(&x)?;
        let labels = data.labels.gather(chunk);
        let (loss, _) = match &labels {
            TaskLabels::Detect(l) => bce_with_logits(&y, l),
            TaskLabels::Position(l) => mse(&y, l),
        };
        total += loss * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}

/// Trains `spec` on `train`, early-stopping on `val` loss, and returns the
/// model at its best validation epoch.
///
/// With an empty validation set the training loss drives early stopping.
/// Everything is deterministic in `hyper.seed`: initialization, shuffling,
/// batching and all reductions.
pub fn train(
    spec: NetworkSpec,
    input_channels: usize,
    input_len: usize,
    train: &TrainData,
    val: &TrainData,
    hyper: Hyper,
) -> Result<TrainedModel, NnError> {
    if train.is_empty() {
        return Err(NnError::ShapeMismatch("empty training set".into()));
    }
    train.validate(input_channels, input_len)?;
    val.validate(input_channels, input_len)?;
    let expect_task = match &train.labels {
        TaskLabels::Detect(_) => Task::Detect,
        TaskLabels::Position(_) => Task::Position,
    };
    if expect_task != spec.task {
        return Err(NnError::ShapeMismatch(format!(
            "labels are for {:?} but spec task is {:?}",
            expect_task, spec.task
        )));
    }
    if spec.task == Task::Detect && spec.loss != LossKind::BinaryCrossEntropy
        || spec.task == Task::Position && spec.loss != LossKind::MeanSquaredError
    {
        return Err(NnError::BadSpec(format!(
            "loss {:?} does not fit task {:?}",
            spec.loss, spec.task
        )));
    }

    let mut net = Network::new(spec, input_channels, input_len, derive_seed(hyper.seed, &[0]))?;
    let mut adam = Adam::new(hyper.learning_rate, &net.param_sizes());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = rng(derive_seed(hyper.seed, &[1]));

    let mut curves = TrainCurves::default();
    let mut best_loss = f64::INFINITY;
    let mut best_params = net.snapshot_params();
    let mut best_epoch = 0;
    let mut since_best = 0usize;

    for epoch in 0..hyper.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, chunk) in order.chunks(hyper.batch_size.max(1)).enumerate() {
            let x = gather_batch(train, chunk, input_channels, input_len);
            let labels = train.labels.gather(chunk);
            let (loss, grad, cache) = batch_loss(&net, &x, &labels)?;
            if !loss.is_finite() {
                return Err(NnError::Divergence {
                    epoch,
                    batch: batch_idx,
                    loss,
                });
            }
            epoch_loss += loss * chunk.len() as f64;
            let grads = net.backward(&cache, &grad);
            let mut params = net.params_mut();
            adam.step(&mut params, &grads);
        }
        let train_loss = epoch_loss / train.len() as f64;
        let monitored = if val.is_empty() {
            train_loss
        } else {
            let v = evaluate_loss(&net, val, hyper.batch_size)?;
            if !v.is_finite() {
                return Err(NnError::Divergence { epoch, batch: 0, loss: v });
            }
            v
        };
        curves.train_loss.push(train_loss);
        curves.val_loss.push(monitored);

        if monitored < best_loss {
            best_loss = monitored;
            best_params = net.snapshot_params();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hyper.patience {
                break;
            }
        }
    }
    net.restore_params(&best_params);
    Ok(TrainedModel {
        network: net,
        hyper,
        curves,
        best_epoch,
    })
}

impl TrainedModel {
    /// Raw network outputs for a set of inputs, batched deterministically.
    pub fn predict_raw(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NnError> {
        let (channels, len) = (self.network.input_channels, self.network.input_len);
        let mut out = Vec::with_capacity(inputs.len());
        let idx: Vec<usize> = (0..inputs.len()).collect();
        for chunk in idx.chunks(self.hyper.batch_size.max(1)) {
            let mut x = Tensor3::zeros(chunk.len(), channels, len);
            let stride = channels * len;
            for (b, &i) in chunk.iter().enumerate() {
                if inputs[i].len() != stride {
                    return Err(NnError::ShapeMismatch(format!(
                        "input {i} has {} values, expected {stride}",
                        inputs[i].len()
                    )));
                }
                x.data[b * stride..(b + 1) * stride].copy_from_slice(&inputs[i]);
            }
            let y = self.network.forward(&x)?;
            for b in 0..chunk.len() {
                out.push(y.row(b, 0).to_vec());
            }
        }
        Ok(out)
    }

    /// Detection probabilities (sigmoid of the logit).
    pub fn detect_probabilities(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, NnError> {
        if self.network.spec.task != Task::Detect {
            return Err(NnError::ShapeMismatch("model is not a detector".into()));
        }
        Ok(self
            .predict_raw(inputs)?
            .into_iter()
            .map(|v| 1.0 / (1.0 + (-v[0]).exp()))
            .collect())
    }

    /// Predicted positions in meters.
    pub fn predict_positions(&self, inputs: &[Vec<f64>]) -> Result<Vec<Point>, NnError> {
        if self.network.spec.task != Task::Position {
            return Err(NnError::ShapeMismatch("model is not a position net".into()));
        }
        Ok(self
            .predict_raw(inputs)?
            .into_iter()
            .map(|v| Point { x: v[0], y: v[1] })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::super::network::Variant;
    use super::*;
    use rand::Rng;

    fn toy_spec(task: Task) -> NetworkSpec {
        NetworkSpec {
            variant: Variant::TypeA,
            num_links: 1,
            per_pipeline: vec![
                super::super::layers::LayerSpec::Conv1d {
                    out_channels: 4,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                },
                super::super::layers::LayerSpec::Relu,
                super::super::layers::LayerSpec::Flatten,
            ],
            fusion_head: vec![
                super::super::layers::LayerSpec::Dense { out_units: 8 },
                super::super::layers::LayerSpec::Relu,
            ],
            task,
            loss: task.default_loss(),
        }
    }

    /// Two well-separated Gaussian-ish blobs as length-8 inputs.
    fn separable_detection_set() -> TrainData {
        let mut rng = crate::seed::rng(1000);
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let class = i % 2;
            let base = if class == 0 { 0.2 } else { 0.8 };
            inputs.push((0..8).map(|_| base + 0.05 * (rng.random::<f64>() - 0.5)).collect());
            labels.push(class as f64);
        }
        TrainData {
            inputs,
            labels: TaskLabels::Detect(labels),
        }
    }

    #[test]
    fn learns_linearly_separable_detection() {
        let data = separable_detection_set();
        let hyper = Hyper {
            epochs: 200,
            batch_size: 4,
            learning_rate: 1e-2,
            seed: 3,
            patience: 200,
        };
        let model = train(toy_spec(Task::Detect), 1, 8, &data, &data, hyper).unwrap();
        let probs = model.detect_probabilities(&data.inputs).unwrap();
        let labels = match &data.labels {
            TaskLabels::Detect(l) => l,
            _ => unreachable!(),
        };
        let correct = probs
            .iter()
            .zip(labels)
            .filter(|(p, &y)| (**p >= 0.5) == (y >= 0.5))
            .count();
        assert_eq!(correct, data.len(), "toy set must be fully separable");
    }

    #[test]
    fn memorizes_four_point_grid() {
        let inputs: Vec<Vec<f64>> = vec![
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        ];
        let labels = TaskLabels::Position(vec![
            Point { x: 0.0, y: 0.0 },
            Point { x: 0.0, y: 1.0 },
            Point { x: 1.0, y: 0.0 },
            Point { x: 1.0, y: 1.0 },
        ]);
        let data = TrainData { inputs, labels };
        let hyper = Hyper {
            epochs: 400,
            batch_size: 4,
            learning_rate: 1e-2,
            seed: 5,
            patience: 400,
        };
        let model = train(toy_spec(Task::Position), 1, 8, &data, &data, hyper).unwrap();
        let mse = evaluate_loss(&model.network, &data, 4).unwrap();
        assert!(mse < 0.01, "memorization MSE {mse} too high");
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable_detection_set();
        let hyper = Hyper {
            epochs: 10,
            batch_size: 4,
            learning_rate: 1e-3,
            seed: 11,
            patience: 10,
        };
        let a = train(toy_spec(Task::Detect), 1, 8, &data, &data, hyper).unwrap();
        let b = train(toy_spec(Task::Detect), 1, 8, &data, &data, hyper).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.curves, b.curves);
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let data = separable_detection_set();
        let hyper = Hyper {
            epochs: 100,
            batch_size: 4,
            learning_rate: 1e-2,
            seed: 7,
            patience: 3,
        };
        let model = train(toy_spec(Task::Detect), 1, 8, &data, &data, hyper).unwrap();
        let best = model.curves.val_loss[model.best_epoch];
        assert!(model
            .curves
            .val_loss
            .iter()
            .all(|&v| v >= best - 1e-12));
        // the loop stops within patience epochs of the best
        assert!(model.curves.val_loss.len() <= model.best_epoch + hyper.patience + 1);
    }

    #[test]
    fn divergence_is_reported() {
        // one optimizer step at this rate pushes the parameters far enough
        // that the next forward pass overflows to non-finite loss
        let inputs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 + 1.0; 8]).collect();
        let labels = TaskLabels::Position(vec![Point { x: 1e6, y: -1e6 }; 8]);
        let data = TrainData { inputs, labels };
        let hyper = Hyper {
            epochs: 10,
            batch_size: 4,
            learning_rate: 1e160,
            seed: 1,
            patience: 10,
        };
        match train(toy_spec(Task::Position), 1, 8, &data, &data, hyper) {
            Err(NnError::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_labels_rejected() {
        let data = separable_detection_set();
        let hyper = Hyper::detect_default(0);
        assert!(matches!(
            train(toy_spec(Task::Position), 1, 8, &data, &data, hyper),
            Err(NnError::ShapeMismatch(_))
        ));
    }
}
