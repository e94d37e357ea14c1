use rand::Rng as _;
use rand_distr::{Distribution, Uniform};

use super::float::Float;
use super::layers::{
    conv_relu, conv_relu_backward, dense, dense_backward, max_pool, max_pool_backward,
    relu_in_place, relu_mask,
};
use super::tensor::Tensor;
use super::{ModelConfig, ModelError};
use crate::seed::Rng;

/// Offsets of one weight/bias pair inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Affine {
    weight: usize,
    bias: usize,
    outputs: usize,
    inputs: usize,
}

impl Affine {
    fn weight_len(&self) -> usize {
        self.outputs * self.inputs
    }
}

#[derive(Debug, Clone)]
struct Layout {
    convs: Vec<Affine>,
    dense: Affine,
    project: Affine,
    hidden: Affine,
    output: Affine,
    total: usize,
    /// (channels, height, width) at the input of every conv block.
    shapes: Vec<(usize, usize, usize)>,
}

impl Layout {
    fn new(config: &ModelConfig) -> Self {
        let mut total = 0;
        let mut take = |outputs: usize, inputs: usize| {
            let a = Affine {
                weight: total,
                bias: total + outputs * inputs,
                outputs,
                inputs,
            };
            total += outputs * inputs + outputs;
            a
        };
        let (mut c, mut h, mut w) = (1, config.backbone.input[0], config.backbone.input[1]);
        let mut convs = Vec::new();
        let mut shapes = Vec::new();
        for &out in &config.backbone.conv_channels {
            shapes.push((c, h, w));
            convs.push(take(out, c * 9));
            c = out;
            h /= 2;
            w /= 2;
        }
        let flat = c * h * w;
        let dense = take(config.backbone.dense_dim, flat);
        let project = take(config.embed_dim, config.backbone.dense_dim);
        let hidden = take(config.regression_hidden, config.embed_dim);
        let output = take(1, config.regression_hidden);
        Self {
            convs,
            dense,
            project,
            hidden,
            output,
            total,
            shapes,
        }
    }

    fn affines(&self) -> Vec<(String, Affine)> {
        let mut v: Vec<(String, Affine)> = self
            .convs
            .iter()
            .enumerate()
            .map(|(i, a)| (format!("conv{}", i + 1), *a))
            .collect();
        v.push(("dense".into(), self.dense));
        v.push(("project".into(), self.project));
        v.push(("regress.hidden".into(), self.hidden));
        v.push(("regress.output".into(), self.output));
        v
    }
}

/// Embeddings and regression outputs for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs<T> {
    pub embeddings: Vec<Vec<T>>,
    pub regression: Vec<T>,
}

/// Everything a sample's backward pass needs.
#[derive(Debug)]
struct SampleCache<T> {
    block_inputs: Vec<Vec<T>>,
    activations: Vec<Vec<T>>,
    argmax: Vec<Vec<u32>>,
    dropout_mask: Option<Vec<T>>,
    flat: Vec<T>,
    dense_out: Vec<T>,
    embedding: Vec<T>,
    hidden: Vec<T>,
}

/// Convolutional backbone, linear projector and two-layer regression head.
#[derive(Debug)]
pub struct Network<T: Float> {
    config: ModelConfig,
    layout: Layout,
    params: Vec<T>,
    grads: Vec<T>,
    tape: Option<Vec<SampleCache<T>>>,
}

impl<T: Float> Network<T> {
    /// Fan-in scaled uniform weights, zero biases.
    pub fn new(config: ModelConfig, rng: &mut Rng) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![T::zero(); layout.total];
        for (_, a) in layout.affines() {
            let bound = (6.0 / a.inputs as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for p in &mut params[a.weight..a.weight + a.weight_len()] {
                *p = T::of(dist.sample(rng));
            }
        }
        Ok(Self::from_parts(config, layout, params))
    }

    fn from_parts(config: ModelConfig, layout: Layout, params: Vec<T>) -> Self {
        let grads = vec![T::zero(); params.len()];
        Self {
            config,
            layout,
            params,
            grads,
            tape: None,
        }
    }

    pub fn from_params(config: ModelConfig, params: Vec<T>) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(ModelError::ShapeMismatch {
                expected: layout.total,
                got: params.len(),
            });
        }
        Ok(Self::from_parts(config, layout, params))
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn grads(&self) -> &[T] {
        &self.grads
    }

    pub fn params_and_grads(&mut self) -> (&mut [T], &[T]) {
        (&mut self.params, &self.grads)
    }

    pub fn zero_grad(&mut self) {
        self.grads.fill(T::zero());
    }

    /// Named weight and bias tensors with their current gradients.
    pub fn named_parameters(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::new();
        for (name, a) in self.layout.affines() {
            let w = a.weight..a.weight + a.weight_len();
            let b = a.bias..a.bias + a.outputs;
            out.push((
                format!("{name}.weight"),
                Tensor::with_grad(
                    vec![a.outputs, a.inputs],
                    self.params[w.clone()].to_vec(),
                    self.grads[w].to_vec(),
                ),
            ));
            out.push((
                format!("{name}.bias"),
                Tensor::with_grad(
                    vec![a.outputs],
                    self.params[b.clone()].to_vec(),
                    self.grads[b].to_vec(),
                ),
            ));
        }
        out
    }

    fn slice(&self, start: usize, len: usize) -> &[T] {
        &self.params[start..start + len]
    }

    fn weight(&self, a: &Affine) -> &[T] {
        self.slice(a.weight, a.weight_len())
    }

    fn bias(&self, a: &Affine) -> &[T] {
        self.slice(a.bias, a.outputs)
    }

    fn check_input(&self, x: &[T]) -> Result<(), ModelError> {
        let expected = self.config.backbone.input[0] * self.config.backbone.input[1];
        if x.len() != expected {
            return Err(ModelError::ShapeMismatch {
                expected,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn run(&self, x: &[T], dropout: Option<&mut Rng>) -> SampleCache<T> {
        let mut block_inputs = Vec::new();
        let mut activations = Vec::new();
        let mut argmax = Vec::new();
        let mut current = x.to_vec();
        for (a, &(c, h, w)) in self.layout.convs.iter().zip(&self.layout.shapes) {
            let act = conv_relu(&current, c, h, w, self.weight(a), self.bias(a), a.outputs);
            let (pooled, arg) = max_pool(&act, a.outputs, h, w);
            block_inputs.push(std::mem::replace(&mut current, pooled));
            activations.push(act);
            argmax.push(arg);
        }
        let mut flat = current;
        let dropout_mask = dropout
            .filter(|_| self.config.backbone.dropout > 0.0)
            .map(|rng| {
                let p = self.config.backbone.dropout;
                let keep = T::of(1.0 / (1.0 - p));
                let mask: Vec<T> = (0..flat.len())
                    .map(|_| {
                        if rng.gen::<f64>() < p {
                            T::zero()
                        } else {
                            keep
                        }
                    })
                    .collect();
                for (v, &m) in flat.iter_mut().zip(&mask) {
                    *v = *v * m;
                }
                mask
            });
        let mut dense_out = dense(
            &flat,
            self.weight(&self.layout.dense),
            self.bias(&self.layout.dense),
        );
        relu_in_place(&mut dense_out);
        let embedding = dense(
            &dense_out,
            self.weight(&self.layout.project),
            self.bias(&self.layout.project),
        );
        let hidden = self.hidden(&embedding);
        SampleCache {
            block_inputs,
            activations,
            argmax,
            dropout_mask,
            flat,
            dense_out,
            embedding,
            hidden,
        }
    }

    fn hidden(&self, embedding: &[T]) -> Vec<T> {
        let mut h = dense(
            embedding,
            self.weight(&self.layout.hidden),
            self.bias(&self.layout.hidden),
        );
        relu_in_place(&mut h);
        h
    }

    fn head(&self, hidden: &[T]) -> T {
        dense(
            hidden,
            self.weight(&self.layout.output),
            self.bias(&self.layout.output),
        )[0]
    }

    /// Deep features of one map: conv blocks then the dense layer (no dropout).
    pub fn backbone_forward(&self, x: &[T]) -> Result<Vec<T>, ModelError> {
        self.check_input(x)?;
        Ok(self.run(x, None).dense_out)
    }

    /// Linear projection of deep features onto the embedding space.
    pub fn project(&self, features: &[T]) -> Result<Vec<T>, ModelError> {
        if features.len() != self.layout.project.inputs {
            return Err(ModelError::ShapeMismatch {
                expected: self.layout.project.inputs,
                got: features.len(),
            });
        }
        Ok(dense(
            features,
            self.weight(&self.layout.project),
            self.bias(&self.layout.project),
        ))
    }

    /// Scalar parameter estimate from an embedding.
    pub fn regress(&self, embedding: &[T]) -> Result<T, ModelError> {
        if embedding.len() != self.config.embed_dim {
            return Err(ModelError::ShapeMismatch {
                expected: self.config.embed_dim,
                got: embedding.len(),
            });
        }
        Ok(self.head(&self.hidden(embedding)))
    }

    /// Evaluation pass: no dropout, nothing recorded.
    pub fn infer(&self, batch: &[&[T]]) -> Result<Outputs<T>, ModelError> {
        let mut out = Outputs {
            embeddings: Vec::with_capacity(batch.len()),
            regression: Vec::with_capacity(batch.len()),
        };
        for x in batch {
            self.check_input(x)?;
            let cache = self.run(x, None);
            out.regression.push(self.head(&cache.hidden));
            out.embeddings.push(cache.embedding);
        }
        Ok(out)
    }

    /// Forward pass that records what [`Network::backward`] needs. Dropout
    /// is applied when an RNG is given.
    pub fn forward(
        &mut self,
        batch: &[&[T]],
        mut dropout: Option<&mut Rng>,
    ) -> Result<Outputs<T>, ModelError> {
        for x in batch {
            self.check_input(x)?;
        }
        let mut tape = Vec::with_capacity(batch.len());
        let mut out = Outputs {
            embeddings: Vec::with_capacity(batch.len()),
            regression: Vec::with_capacity(batch.len()),
        };
        for x in batch {
            let cache = self.run(x, dropout.as_deref_mut());
            out.regression.push(self.head(&cache.hidden));
            out.embeddings.push(cache.embedding.clone());
            tape.push(cache);
        }
        self.tape = Some(tape);
        Ok(out)
    }

    /// Accumulates parameter gradients given the loss gradient with respect
    /// to every embedding and regression output of the recorded batch.
    pub fn backward(
        &mut self,
        d_embeddings: &[Vec<T>],
        d_regression: &[T],
    ) -> Result<(), ModelError> {
        let tape = self.tape.take().ok_or(ModelError::GraphNotRecorded)?;
        if d_embeddings.len() != tape.len() || d_regression.len() != tape.len() {
            return Err(ModelError::ShapeMismatch {
                expected: tape.len(),
                got: d_embeddings.len().min(d_regression.len()),
            });
        }
        let mut grads = std::mem::take(&mut self.grads);
        for ((cache, de), &dr) in tape.iter().zip(d_embeddings).zip(d_regression) {
            if de.len() != self.config.embed_dim {
                self.grads = grads;
                return Err(ModelError::ShapeMismatch {
                    expected: self.config.embed_dim,
                    got: de.len(),
                });
            }
            self.backward_sample(cache, de, dr, &mut grads);
        }
        self.grads = grads;
        Ok(())
    }

    fn backward_sample(
        &self,
        cache: &SampleCache<T>,
        d_embedding: &[T],
        d_out: T,
        grads: &mut [T],
    ) {
        let l = &self.layout;
        let (dw, db) = split(grads, &l.output);
        let mut dh = dense_backward(&cache.hidden, self.weight(&l.output), &[d_out], dw, db);
        relu_mask(&cache.hidden, &mut dh);
        let (dw, db) = split(grads, &l.hidden);
        let mut de = dense_backward(&cache.embedding, self.weight(&l.hidden), &dh, dw, db);
        for (a, &b) in de.iter_mut().zip(d_embedding) {
            *a = *a + b;
        }
        let (dw, db) = split(grads, &l.project);
        let mut dd = dense_backward(&cache.dense_out, self.weight(&l.project), &de, dw, db);
        relu_mask(&cache.dense_out, &mut dd);
        let (dw, db) = split(grads, &l.dense);
        let mut dflat = dense_backward(&cache.flat, self.weight(&l.dense), &dd, dw, db);
        if let Some(mask) = &cache.dropout_mask {
            for (g, &m) in dflat.iter_mut().zip(mask) {
                *g = *g * m;
            }
        }
        let mut upstream = dflat;
        for i in (0..l.convs.len()).rev() {
            let a = &l.convs[i];
            let (c, h, w) = l.shapes[i];
            let dact = max_pool_backward(&upstream, &cache.argmax[i], cache.activations[i].len());
            let (dw, db) = split(grads, a);
            let dx = conv_relu_backward(
                &cache.block_inputs[i],
                c,
                h,
                w,
                self.weight(a),
                a.outputs,
                &cache.activations[i],
                dact,
                dw,
                db,
                i > 0,
            );
            match dx {
                Some(dx) => upstream = dx,
                None => break,
            }
        }
    }
}

fn split<'a, T>(grads: &'a mut [T], a: &Affine) -> (&'a mut [T], &'a mut [T]) {
    let (w, rest) = grads[a.weight..].split_at_mut(a.weight_len());
    (w, &mut rest[..a.outputs])
}

impl Network<f32> {
    /// Same parameters at 64-bit precision.
    pub fn to_f64(&self) -> Network<f64> {
        Network::from_parts(
            self.config.clone(),
            self.layout.clone(),
            self.params.iter().map(|&p| p as f64).collect(),
        )
    }
}
