//! Model checkpoints: versioned `CIRM` frames holding the architecture, its
//! provenance (seeds, feature preprocessing, link subset) and the parameter
//! blob.

use std::path::Path;

use super::layers::LayerSpec;
use super::loss::LossKind;
use super::network::{Network, NetworkSpec, Task, Variant};
use super::train::{Hyper, TrainCurves, TrainedModel};
use super::NnError;
use crate::dsp::{FeatureLayout, FeatureMode, Normalize};
use crate::io::{self, PayloadReader, PayloadWriter};

/// Feature preprocessing a model was trained with, stored so inference can
/// verify its inputs come from the same featureization.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelMeta {
    pub layout: FeatureLayout,
    pub link_ids: Vec<usize>,
}

fn put_layers(w: &mut PayloadWriter, layers: &[LayerSpec]) {
    w.put_u32(layers.len() as u32);
    for l in layers {
        match *l {
            LayerSpec::Conv1d { out_channels, kernel, stride, padding } => {
                w.put_u8(0);
                w.put_u32(out_channels as u32);
                w.put_u32(kernel as u32);
                w.put_u32(stride as u32);
                w.put_u32(padding as u32);
            }
            LayerSpec::Relu => w.put_u8(1),
            LayerSpec::MaxPool { size, stride } => {
                w.put_u8(2);
                w.put_u32(size as u32);
                w.put_u32(stride as u32);
            }
            LayerSpec::Flatten => w.put_u8(3),
            LayerSpec::Dense { out_units } => {
                w.put_u8(4);
                w.put_u32(out_units as u32);
            }
        }
    }
}

fn get_layers(r: &mut PayloadReader) -> Result<Vec<LayerSpec>, NnError> {
    let n = r.get_u32()? as usize;
    let mut layers = Vec::with_capacity(n.min(1 << 12));
    for _ in 0..n {
        let layer = match r.get_u8()? {
            0 => LayerSpec::Conv1d {
                out_channels: r.get_u32()? as usize,
                kernel: r.get_u32()? as usize,
                stride: r.get_u32()? as usize,
                padding: r.get_u32()? as usize,
            },
            1 => LayerSpec::Relu,
            2 => LayerSpec::MaxPool {
                size: r.get_u32()? as usize,
                stride: r.get_u32()? as usize,
            },
            3 => LayerSpec::Flatten,
            4 => LayerSpec::Dense {
                out_units: r.get_u32()? as usize,
            },
            t => return Err(r.malformed(format!("unknown layer tag {t}")).into()),
        };
        layers.push(layer);
    }
    Ok(layers)
}

/// Writes a trained model and its metadata as a framed `CIRM` file.
pub fn save_model(path: &Path, model: &TrainedModel, meta: &ModelMeta) -> Result<(), NnError> {
    let mut w = PayloadWriter::new();
    let spec = &model.network.spec;
    w.put_u8(match spec.variant {
        Variant::TypeA => 0,
        Variant::TypeB => 1,
    });
    w.put_u8(match spec.task {
        Task::Detect => 0,
        Task::Position => 1,
    });
    w.put_u8(match spec.loss {
        LossKind::BinaryCrossEntropy => 0,
        LossKind::MeanSquaredError => 1,
    });
    w.put_u32(spec.num_links as u32);
    put_layers(&mut w, &spec.per_pipeline);
    put_layers(&mut w, &spec.fusion_head);
    w.put_u32(model.network.input_channels as u32);
    w.put_u64(model.network.input_len as u64);

    let l = &meta.layout;
    w.put_u32(l.num_links as u32);
    w.put_u32(l.channels_per_link as u32);
    w.put_u64(l.k_taps as u64);
    w.put_u8(match l.mode {
        FeatureMode::Magnitude => 0,
        FeatureMode::RealImag => 1,
    });
    w.put_u8(match l.normalize {
        Normalize::PerLinkMax => 0,
        Normalize::None => 1,
    });
    w.put_u32(meta.link_ids.len() as u32);
    for &id in &meta.link_ids {
        w.put_u32(id as u32);
    }

    w.put_u64(model.hyper.epochs as u64);
    w.put_u64(model.hyper.batch_size as u64);
    w.put_f64(model.hyper.learning_rate);
    w.put_u64(model.hyper.seed);
    w.put_u64(model.hyper.patience as u64);
    w.put_u64(model.best_epoch as u64);
    w.put_f64_slice(&model.curves.train_loss);
    w.put_f64_slice(&model.curves.val_loss);

    let params = model.network.params();
    w.put_u32(params.len() as u32);
    for p in params {
        w.put_f64_slice(p);
    }
    io::write_framed(path, io::MODEL_MAGIC, &w.into_bytes())?;
    Ok(())
}

/// Reads back a `CIRM` file into a model and its metadata.
pub fn load_model(path: &Path) -> Result<(TrainedModel, ModelMeta), NnError> {
    let payload = io::read_framed(path, io::MODEL_MAGIC)?;
    let mut r = PayloadReader::new(&payload);
    let variant = match r.get_u8()? {
        0 => Variant::TypeA,
        1 => Variant::TypeB,
        v => return Err(r.malformed(format!("unknown variant {v}")).into()),
    };
    let task = match r.get_u8()? {
        0 => Task::Detect,
        1 => Task::Position,
        t => return Err(r.malformed(format!("unknown task {t}")).into()),
    };
    let loss = match r.get_u8()? {
        0 => LossKind::BinaryCrossEntropy,
        1 => LossKind::MeanSquaredError,
        l => return Err(r.malformed(format!("unknown loss {l}")).into()),
    };
    let num_links = r.get_u32()? as usize;
    let per_pipeline = get_layers(&mut r)?;
    let fusion_head = get_layers(&mut r)?;
    let input_channels = r.get_u32()? as usize;
    let input_len = r.get_u64()? as usize;

    let layout = FeatureLayout {
        num_links: r.get_u32()? as usize,
        channels_per_link: r.get_u32()? as usize,
        k_taps: r.get_u64()? as usize,
        mode: match r.get_u8()? {
            0 => FeatureMode::Magnitude,
            1 => FeatureMode::RealImag,
            m => return Err(r.malformed(format!("unknown feature mode {m}")).into()),
        },
        normalize: match r.get_u8()? {
            0 => Normalize::PerLinkMax,
            1 => Normalize::None,
            n => return Err(r.malformed(format!("unknown normalize {n}")).into()),
        },
    };
    let n_ids = r.get_u32()? as usize;
    let mut link_ids = Vec::with_capacity(n_ids.min(1 << 10));
    for _ in 0..n_ids {
        link_ids.push(r.get_u32()? as usize);
    }

    let hyper = Hyper {
        epochs: r.get_u64()? as usize,
        batch_size: r.get_u64()? as usize,
        learning_rate: r.get_f64()?,
        seed: r.get_u64()?,
        patience: r.get_u64()? as usize,
    };
    let best_epoch = r.get_u64()? as usize;
    let curves = TrainCurves {
        train_loss: r.get_f64_vec()?,
        val_loss: r.get_f64_vec()?,
    };

    let spec = NetworkSpec {
        variant,
        num_links,
        per_pipeline,
        fusion_head,
        task,
        loss,
    };
    let mut network = Network::new(spec, input_channels, input_len, hyper.seed)?;
    let n_slots = r.get_u32()? as usize;
    let expected = network.param_sizes();
    if n_slots != expected.len() {
        return Err(r
            .malformed(format!(
                "checkpoint has {n_slots} parameter slots, architecture has {}",
                expected.len()
            ))
            .into());
    }
    let mut snapshot = Vec::with_capacity(n_slots);
    for (slot, &size) in expected.iter().enumerate() {
        let vs = r.get_f64_vec()?;
        if vs.len() != size {
            return Err(r
                .malformed(format!(
                    "slot {slot} holds {} values, architecture expects {size}",
                    vs.len()
                ))
                .into());
        }
        snapshot.push(vs);
    }
    r.finish()?;
    network.restore_params(&snapshot);
    Ok((
        TrainedModel {
            network,
            hyper,
            curves,
            best_epoch,
        },
        ModelMeta { layout, link_ids },
    ))
}

#[cfg(test)]
mod tests {
    use super::super::layers::LayerSpec;
    use super::super::train::{train, TaskLabels, TrainData};
    use super::*;

    fn toy_model() -> TrainedModel {
        let spec = NetworkSpec {
            variant: Variant::TypeB,
            num_links: 2,
            per_pipeline: vec![
                LayerSpec::Conv1d { out_channels: 3, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::Relu,
                LayerSpec::MaxPool { size: 2, stride: 2 },
                LayerSpec::Flatten,
            ],
            fusion_head: vec![LayerSpec::Dense { out_units: 5 }, LayerSpec::Relu],
            task: Task::Detect,
            loss: LossKind::BinaryCrossEntropy,
        };
        let mut rng = crate::seed::rng(2024);
        use rand::Rng;
        let inputs: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..2 * 8).map(|_| rng.random::<f64>()).collect())
            .collect();
        let labels = TaskLabels::Detect((0..12).map(|i| (i % 2) as f64).collect());
        let data = TrainData { inputs, labels };
        let hyper = Hyper {
            epochs: 5,
            batch_size: 4,
            learning_rate: 1e-3,
            seed: 77,
            patience: 5,
        };
        train(spec, 2, 8, &data, &data, hyper).unwrap()
    }

    fn meta() -> ModelMeta {
        ModelMeta {
            layout: FeatureLayout {
                num_links: 2,
                channels_per_link: 1,
                k_taps: 8,
                mode: FeatureMode::Magnitude,
                normalize: Normalize::PerLinkMax,
            },
            link_ids: vec![0, 2],
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = toy_model();
        let dir = std::env::temp_dir().join("cirsense-ckpt-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("model.cirm");
        save_model(&p, &model, &meta()).unwrap();
        let (back, back_meta) = load_model(&p).unwrap();
        assert_eq!(back.network, model.network);
        assert_eq!(back.hyper, model.hyper);
        assert_eq!(back.curves, model.curves);
        assert_eq!(back.best_epoch, model.best_epoch);
        assert_eq!(back_meta, meta());

        // identical predictions after reload
        let probe: Vec<Vec<f64>> = vec![(0..16).map(|i| i as f64 / 16.0).collect()];
        assert_eq!(
            model.detect_probabilities(&probe).unwrap(),
            back.detect_probabilities(&probe).unwrap()
        );
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        let model = toy_model();
        let dir = std::env::temp_dir().join("cirsense-ckpt-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("trunc.cirm");
        save_model(&p, &model, &meta()).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 40]).unwrap();
        assert!(load_model(&p).is_err());
    }
}
