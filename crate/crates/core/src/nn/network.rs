//! Network assembly: one shared pipeline for Type-A, one pipeline per link
//! for Type-B with the flattened pipeline outputs concatenated into a fusion
//! head. The task head (1 logit for detection, 2 coordinates for
//! positioning) is appended automatically at build time so specs cannot
//! produce a wrongly-shaped output.

use serde::{Deserialize, Serialize};

use super::layers::{Layer, LayerCache, LayerSpec};
use super::loss::LossKind;
use super::tensor::Tensor3;
use super::NnError;
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// One pipeline consuming all link channels together.
    TypeA,
    /// One pipeline per link; flattened outputs fused by a dense head.
    TypeB,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Detect,
    Position,
}

impl Task {
    pub fn output_dims(self) -> usize {
        match self {
            Task::Detect => 1,
            Task::Position => 2,
        }
    }

    pub fn default_loss(self) -> LossKind {
        match self {
            Task::Detect => LossKind::BinaryCrossEntropy,
            Task::Position => LossKind::MeanSquaredError,
        }
    }
}

/// Architecture description, independent of concrete input shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub variant: Variant,
    pub num_links: usize,
    pub per_pipeline: Vec<LayerSpec>,
    pub fusion_head: Vec<LayerSpec>,
    pub task: Task,
    pub loss: LossKind,
}

impl NetworkSpec {
    /// The default trunk: 3 x [conv(32, k5, s1, p2) -> relu -> maxpool(2,2)],
    /// flattened, then dense(64) -> relu ahead of the task head.
    pub fn default_for(variant: Variant, num_links: usize, task: Task) -> Self {
        let mut per_pipeline = Vec::new();
        for _ in 0..3 {
            per_pipeline.push(LayerSpec::Conv1d {
                out_channels: 32,
                kernel: 5,
                stride: 1,
                padding: 2,
            });
            per_pipeline.push(LayerSpec::Relu);
            per_pipeline.push(LayerSpec::MaxPool { size: 2, stride: 2 });
        }
        per_pipeline.push(LayerSpec::Flatten);
        NetworkSpec {
            variant,
            num_links,
            per_pipeline,
            fusion_head: vec![LayerSpec::Dense { out_units: 64 }, LayerSpec::Relu],
            task,
            loss: task.default_loss(),
        }
    }

    pub fn num_pipelines(&self) -> usize {
        match self.variant {
            Variant::TypeA => 1,
            Variant::TypeB => self.num_links,
        }
    }
}

/// An instantiated network: pipelines, head, concrete shapes, parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub input_channels: usize,
    pub input_len: usize,
    pipelines: Vec<Vec<Layer>>,
    head: Vec<Layer>,
}

/// Forward-pass caches for one batch, consumed by [`Network::backward`].
pub struct NetCache {
    pipeline_caches: Vec<Vec<LayerCache>>,
    pipeline_out_len: Vec<usize>,
    head_caches: Vec<LayerCache>,
    batch: usize,
}

impl Network {
    /// Builds and initializes a network for `(input_channels, input_len)`
    /// inputs. Parameters are seeded from `(seed, pipeline, layer)` so
    /// construction is reproducible.
    pub fn new(
        spec: NetworkSpec,
        input_channels: usize,
        input_len: usize,
        seed: u64,
    ) -> Result<Network, NnError> {
        if spec.num_links == 0 {
            return Err(NnError::BadSpec("num_links must be >= 1".into()));
        }
        let n_pipes = spec.num_pipelines();
        if spec.variant == Variant::TypeB && input_channels % spec.num_links != 0 {
            return Err(NnError::BadSpec(format!(
                "{input_channels} input channels do not divide over {} links",
                spec.num_links
            )));
        }
        let pipe_in_channels = match spec.variant {
            Variant::TypeA => input_channels,
            Variant::TypeB => input_channels / spec.num_links,
        };

        let mut pipelines = Vec::with_capacity(n_pipes);
        let mut pipe_out = (0usize, 0usize);
        for p in 0..n_pipes {
            let mut layers = Vec::with_capacity(spec.per_pipeline.len());
            let (mut ch, mut len) = (pipe_in_channels, input_len);
            for (li, lspec) in spec.per_pipeline.iter().enumerate() {
                let (layer, och, olen) =
                    Layer::build(lspec, ch, len, derive_seed(seed, &[p as u64, li as u64]))?;
                layers.push(layer);
                ch = och;
                len = olen;
            }
            if ch != 1 {
                return Err(NnError::BadSpec(format!(
                    "pipeline must end flattened (got {ch} channels); end it with a flatten layer"
                )));
            }
            pipe_out = (ch, len);
            pipelines.push(layers);
        }

        let head_group = n_pipes as u64;
        let mut head = Vec::with_capacity(spec.fusion_head.len() + 1);
        let (mut ch, mut len) = (1usize, pipe_out.1 * n_pipes);
        for (li, lspec) in spec.fusion_head.iter().enumerate() {
            let (layer, och, olen) =
                Layer::build(lspec, ch, len, derive_seed(seed, &[head_group, li as u64]))?;
            head.push(layer);
            ch = och;
            len = olen;
        }
        let task_spec = LayerSpec::Dense {
            out_units: spec.task.output_dims(),
        };
        let (task_head, _, _) = Layer::build(
            &task_spec,
            ch,
            len,
            derive_seed(seed, &[head_group, spec.fusion_head.len() as u64]),
        )?;
        head.push(task_head);

        Ok(Network {
            spec,
            input_channels,
            input_len,
            pipelines,
            head,
        })
    }

    fn check_input(&self, x: &Tensor3) -> Result<(), NnError> {
        if x.channels != self.input_channels || x.len != self.input_len {
            return Err(NnError::ShapeMismatch(format!(
                "network expects ({}, {}) inputs, got ({}, {})",
                self.input_channels, self.input_len, x.channels, x.len
            )));
        }
        Ok(())
    }

    /// Channels of `x` owned by pipeline `p`.
    fn pipeline_slice(&self, x: &Tensor3, p: usize) -> Tensor3 {
        match self.spec.variant {
            Variant::TypeA => x.clone(),
            Variant::TypeB => {
                let cpl = self.input_channels / self.spec.num_links;
                let mut out = Tensor3::zeros(x.batch, cpl, x.len);
                for b in 0..x.batch {
                    for c in 0..cpl {
                        out.row_mut(b, c).copy_from_slice(x.row(b, p * cpl + c));
                    }
                }
                out
            }
        }
    }

    /// Forward pass with caches kept for [`Network::backward`].
    pub fn forward_cached(&self, x: &Tensor3) -> Result<(Tensor3, NetCache), NnError> {
        self.check_input(x)?;
        let n_pipes = self.pipelines.len();
        let mut pipeline_caches = Vec::with_capacity(n_pipes);
        let mut pipeline_out_len = Vec::with_capacity(n_pipes);
        let mut outs = Vec::with_capacity(n_pipes);
        for (p, layers) in self.pipelines.iter().enumerate() {
            let mut t = self.pipeline_slice(x, p);
            let mut caches = Vec::with_capacity(layers.len());
            for layer in layers {
                let (out, cache) = layer.forward(&t);
                caches.push(cache);
                t = out;
            }
            pipeline_out_len.push(t.len);
            pipeline_caches.push(caches);
            outs.push(t);
        }

        // concatenate flattened pipeline features
        let total: usize = pipeline_out_len.iter().sum();
        let mut fused = Tensor3::zeros(x.batch, 1, total);
        for b in 0..x.batch {
            let frow = fused.row_mut(b, 0);
            let mut off = 0;
            for t in &outs {
                frow[off..off + t.len].copy_from_slice(t.row(b, 0));
                off += t.len;
            }
        }

        let mut t = fused;
        let mut head_caches = Vec::with_capacity(self.head.len());
        for layer in &self.head {
            let (out, cache) = layer.forward(&t);
            head_caches.push(cache);
            t = out;
        }
        Ok((
            t,
            NetCache {
                pipeline_caches,
                pipeline_out_len,
                head_caches,
                batch: x.batch,
            },
        ))
    }

    /// Forward pass without caches.
    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3, NnError> {
        Ok(self.forward_cached(x)?.0)
    }

    /// The flattened output of each pipeline (before fusion).
    pub fn pipeline_outputs(&self, x: &Tensor3) -> Result<Vec<Tensor3>, NnError> {
        self.check_input(x)?;
        let mut outs = Vec::with_capacity(self.pipelines.len());
        for (p, layers) in self.pipelines.iter().enumerate() {
            let mut t = self.pipeline_slice(x, p);
            for layer in layers {
                t = layer.forward(&t).0;
            }
            outs.push(t);
        }
        Ok(outs)
    }

    /// Reverse traversal: head first, then the gradient is split back across
    /// pipelines. Returns parameter gradients in walk order.
    pub fn backward(&self, cache: &NetCache, grad_out: &Tensor3) -> Vec<Vec<f64>> {
        let mut grads_by_slot: Vec<Vec<f64>> = Vec::new();
        // head, reversed
        let mut head_grads = Vec::with_capacity(self.head.len());
        let mut g = grad_out.clone();
        for (layer, lcache) in self.head.iter().zip(&cache.head_caches).rev() {
            let (gx, lg) = layer.backward(lcache, &g);
            head_grads.push(lg);
            g = gx;
        }
        head_grads.reverse();

        // split fused gradient back to pipelines
        let mut pipe_grads_in = Vec::with_capacity(self.pipelines.len());
        let mut off = 0;
        for &plen in &cache.pipeline_out_len {
            let mut t = Tensor3::zeros(cache.batch, 1, plen);
            for b in 0..cache.batch {
                t.row_mut(b, 0).copy_from_slice(&g.row(b, 0)[off..off + plen]);
            }
            off += plen;
            pipe_grads_in.push(t);
        }

        for ((layers, caches), mut pg) in self
            .pipelines
            .iter()
            .zip(&cache.pipeline_caches)
            .zip(pipe_grads_in)
        {
            let mut layer_grads = Vec::with_capacity(layers.len());
            for (layer, lcache) in layers.iter().zip(caches).rev() {
                let (gx, lg) = layer.backward(lcache, &pg);
                layer_grads.push(lg);
                pg = gx;
            }
            layer_grads.reverse();
            for (layer, lg) in layers.iter().zip(layer_grads) {
                if !layer.params().is_empty() {
                    grads_by_slot.push(lg.weights);
                    grads_by_slot.push(lg.bias);
                }
            }
        }
        for (layer, lg) in self.head.iter().zip(head_grads) {
            if !layer.params().is_empty() {
                grads_by_slot.push(lg.weights);
                grads_by_slot.push(lg.bias);
            }
        }
        grads_by_slot
    }

    /// Immutable parameter walk: pipelines in order, then the head; within a
    /// layer, weights before bias. This order defines optimizer slots.
    pub fn params(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for layers in &self.pipelines {
            for layer in layers {
                out.extend(layer.params());
            }
        }
        for layer in &self.head {
            out.extend(layer.params());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for layers in &mut self.pipelines {
            for layer in layers {
                out.extend(layer.params_mut());
            }
        }
        for layer in &mut self.head {
            out.extend(layer.params_mut());
        }
        out
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn snapshot_params(&self) -> Vec<Vec<f64>> {
        self.params().into_iter().cloned().collect()
    }

    pub fn restore_params(&mut self, snapshot: &[Vec<f64>]) {
        let mut params = self.params_mut();
        assert_eq!(params.len(), snapshot.len(), "snapshot slot mismatch");
        for (p, s) in params.iter_mut().zip(snapshot) {
            assert_eq!(p.len(), s.len(), "snapshot size mismatch");
            p.clone_from(s);
        }
    }

    /// Structural signature: layer shapes of every pipeline and the head.
    pub fn shape_signature(&self) -> Vec<String> {
        let mut sig = Vec::new();
        for (p, layers) in self.pipelines.iter().enumerate() {
            for layer in layers {
                sig.push(format!("pipeline[{p}]:{}", layer.signature()));
            }
        }
        for layer in &self.head {
            sig.push(format!("head:{}", layer.signature()));
        }
        sig
    }
}
