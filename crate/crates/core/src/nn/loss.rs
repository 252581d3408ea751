//! Task losses with their gradients w.r.t. the network output.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor3;
use crate::geom::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    BinaryCrossEntropy,
    MeanSquaredError,
}

/// Mean binary cross-entropy of sigmoid logits against 0/1 labels.
///
/// Uses the overflow-safe form `max(z,0) - z y + ln(1 + e^{-|z|})`; the
/// gradient w.r.t. each logit is `(sigmoid(z) - y) / batch`.
pub fn bce_with_logits(logits: &Tensor3, labels: &[f64]) -> (f64, Tensor3) {
    assert_eq!(logits.channels, 1, "detection output must be a single logit");
    assert_eq!(logits.len, 1, "detection output must be a single logit");
    assert_eq!(logits.batch, labels.len(), "label count mismatch");
    let n = labels.len() as f64;
    let mut grad = Tensor3::zeros(logits.batch, 1, 1);
    let mut loss = 0.0;
    for (b, &y) in labels.iter().enumerate() {
        let z = logits.at(b, 0, 0);
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        let sigma = 1.0 / (1.0 + (-z).exp());
        *grad.at_mut(b, 0, 0) = (sigma - y) / n;
    }
    (loss / n, grad)
}

/// Mean squared error over batch and both coordinates.
pub fn mse(preds: &Tensor3, labels: &[Point]) -> (f64, Tensor3) {
    assert_eq!(preds.channels, 1, "position output must be flat");
    assert_eq!(preds.len, 2, "position output must be (x, y)");
    assert_eq!(preds.batch, labels.len(), "label count mismatch");
    let n = (labels.len() * 2) as f64;
    let mut grad = Tensor3::zeros(preds.batch, 1, 2);
    let mut loss = 0.0;
    for (b, y) in labels.iter().enumerate() {
        for (i, target) in [y.x, y.y].into_iter().enumerate() {
            let d = preds.at(b, 0, i) - target;
            loss += d * d;
            *grad.at_mut(b, 0, i) = 2.0 * d / n;
        }
    }
    (loss / n, grad)
}
