use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::layers::{self, Activation, LstmCache, LstmParams};
use super::tensor::Tensor;
use super::NnError;

/// One layer of a feed-forward stack.
///
/// `Concat` appends the side input (one row of `width` values per sample)
/// to the flattened activations; it is how the currently available beams
/// enter the final dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        length: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Lstm {
        inputs: usize,
        hidden: usize,
    },
    Dropout {
        rate: f64,
    },
    Activation {
        function: Activation,
    },
    Concat {
        width: usize,
    },
}

impl LayerSpec {
    /// Shapes of the trainable tensors of this layer, in storage order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![vec![out_channels, in_channels, kernel], vec![out_channels]],
            LayerSpec::Dense { inputs, outputs } => vec![vec![outputs, inputs], vec![outputs]],
            LayerSpec::Lstm { inputs, hidden } => {
                vec![vec![4 * hidden, inputs], vec![4 * hidden, hidden], vec![4 * hidden]]
            }
            LayerSpec::Dropout { .. } | LayerSpec::Activation { .. } | LayerSpec::Concat { .. } => Vec::new(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Activation { .. } => "activation",
            LayerSpec::Concat { .. } => "concat",
        }
    }
}

/// Checks that consecutive layers agree and returns the per-sample output width.
pub fn validate_specs(specs: &[LayerSpec], input_width: usize) -> Result<usize, NnError> {
    let bad = |i: usize, s: &LayerSpec, msg: String| NnError::InvalidSpec(format!("layer {i} ({}): {msg}", s.name()));
    let mut width = input_width;
    let mut concat_seen = false;
    for (i, spec) in specs.iter().enumerate() {
        width = match *spec {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                length,
            } => {
                if in_channels == 0 || out_channels == 0 || kernel == 0 {
                    return Err(bad(i, spec, "zero-sized dimension".into()));
                }
                if kernel > length {
                    return Err(bad(i, spec, format!("kernel {kernel} exceeds input length {length}")));
                }
                if width != in_channels * length {
                    return Err(bad(i, spec, format!("expects {} inputs, receives {width}", in_channels * length)));
                }
                out_channels * (length - kernel + 1)
            }
            LayerSpec::Dense { inputs, outputs } => {
                if outputs == 0 {
                    return Err(bad(i, spec, "zero outputs".into()));
                }
                if width != inputs {
                    return Err(bad(i, spec, format!("expects {inputs} inputs, receives {width}")));
                }
                outputs
            }
            LayerSpec::Lstm { inputs, hidden } => {
                if inputs == 0 || hidden == 0 || width == 0 || !width.is_multiple_of(inputs) {
                    return Err(bad(i, spec, format!("input width {width} is not a sequence of {inputs}-vectors")));
                }
                hidden
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(bad(i, spec, format!("rate {rate} outside [0, 1)")));
                }
                width
            }
            LayerSpec::Activation { .. } => width,
            LayerSpec::Concat { width: extra } => {
                if concat_seen {
                    return Err(bad(i, spec, "only one concat layer is supported".into()));
                }
                concat_seen = true;
                width + extra
            }
        };
    }
    Ok(width)
}

/// Layer topology, parameters and ADAM moments of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub specs: Vec<LayerSpec>,
    /// Per-sample input shape (without the batch dimension).
    pub input_shape: Vec<usize>,
    pub params: Vec<Tensor>,
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub step: u64,
    pub training: bool,
}

impl ModelState {
    /// Builds a state from explicit parameters (moments zeroed).
    pub fn from_params(specs: Vec<LayerSpec>, input_shape: Vec<usize>, params: Vec<Tensor>) -> Result<Self, NnError> {
        validate_specs(&specs, input_shape.iter().product())?;
        let expected: Vec<Vec<usize>> = specs.iter().flat_map(LayerSpec::param_shapes).collect();
        if expected.len() != params.len() {
            return Err(NnError::ShapeMismatch(format!(
                "{} parameter tensors supplied, layers need {}",
                params.len(),
                expected.len()
            )));
        }
        for (i, (want, got)) in expected.iter().zip(&params).enumerate() {
            if want.as_slice() != got.shape() {
                return Err(NnError::ShapeMismatch(format!(
                    "parameter {i}: expected shape {want:?}, found {:?}",
                    got.shape()
                )));
            }
        }
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Ok(Self {
            specs,
            input_shape,
            params,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
            training: false,
        })
    }

    /// Weights uniform in `±√(1/fan_in)`, biases zero except the LSTM forget gate (1.0).
    pub fn init<R: Rng + ?Sized>(specs: Vec<LayerSpec>, input_shape: Vec<usize>, rng: &mut R) -> Result<Self, NnError> {
        validate_specs(&specs, input_shape.iter().product())?;
        let mut params = Vec::new();
        let uniform = |shape: &[usize], fan_in: usize, rng: &mut R| {
            let bound = (1.0 / fan_in as f64).sqrt();
            let n = shape.iter().product();
            Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-bound..=bound)).collect()).expect("sized")
        };
        for spec in &specs {
            match *spec {
                LayerSpec::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    ..
                } => {
                    params.push(uniform(&[out_channels, in_channels, kernel], in_channels * kernel, rng));
                    params.push(Tensor::zeros(&[out_channels]));
                }
                LayerSpec::Dense { inputs, outputs } => {
                    params.push(uniform(&[outputs, inputs], inputs, rng));
                    params.push(Tensor::zeros(&[outputs]));
                }
                LayerSpec::Lstm { inputs, hidden } => {
                    params.push(uniform(&[4 * hidden, inputs], inputs, rng));
                    params.push(uniform(&[4 * hidden, hidden], hidden, rng));
                    let mut b = Tensor::zeros(&[4 * hidden]);
                    b.data_mut()[hidden..2 * hidden].fill(1.0);
                    params.push(b);
                }
                _ => {}
            }
        }
        Self::from_params(specs, input_shape, params)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn output_width(&self) -> usize {
        validate_specs(&self.specs, self.input_shape.iter().product()).expect("validated at construction")
    }

    /// Width of the side input consumed by the `Concat` layer, if any.
    pub fn side_width(&self) -> usize {
        self.specs
            .iter()
            .find_map(|s| match s {
                LayerSpec::Concat { width } => Some(*width),
                _ => None,
            })
            .unwrap_or(0)
    }
}

enum LayerCache {
    Conv1d { input: Tensor },
    Dense { input: Tensor },
    Lstm(LstmCache),
    Dropout { mask: Option<Vec<f64>> },
    Activation { output: Tensor },
    Concat { width: usize, input_shape: Vec<usize> },
}

/// A [`ModelState`] plus the activations cached by the last training forward pass.
pub struct Network {
    pub state: ModelState,
    cache: Option<Vec<LayerCache>>,
}

impl Network {
    pub fn new(state: ModelState) -> Self {
        Self { state, cache: None }
    }

    fn check_inputs(&self, input: &Tensor, side: Option<&Tensor>) -> Result<(), NnError> {
        if input.shape().len() < 2 || input.shape()[1..] != self.state.input_shape[..] {
            return Err(NnError::ShapeMismatch(format!(
                "network expects input [B, {:?}], got {:?}",
                self.state.input_shape,
                input.shape()
            )));
        }
        let width = self.state.side_width();
        match side {
            Some(s) if width > 0 && s.batch() == input.batch() && s.row_len() == width => Ok(()),
            None if width == 0 => Ok(()),
            _ => Err(NnError::ShapeMismatch(format!(
                "network expects a side input of width {width} for each of {} samples",
                input.batch()
            ))),
        }
    }

    fn run(
        &self,
        input: &Tensor,
        side: Option<&Tensor>,
        training: bool,
        rng: Option<&mut dyn RngCore>,
        mut caches: Option<&mut Vec<LayerCache>>,
    ) -> Result<Tensor, NnError> {
        self.check_inputs(input, side)?;
        let batch = input.batch();
        let mut rng = rng;
        let mut x = input.clone();
        let mut pi = 0;
        let params = &self.state.params;
        for spec in &self.state.specs {
            let (next, cache) = match *spec {
                LayerSpec::Conv1d {
                    in_channels, length, ..
                } => {
                    let xin = x.reshape(&[batch, in_channels, length])?;
                    let out = layers::conv1d_fwd(&xin, &params[pi], &params[pi + 1])?;
                    pi += 2;
                    (out, LayerCache::Conv1d { input: xin })
                }
                LayerSpec::Dense { inputs, .. } => {
                    let xin = x.reshape(&[batch, inputs])?;
                    let out = layers::dense_fwd(&xin, &params[pi], &params[pi + 1])?;
                    pi += 2;
                    (out, LayerCache::Dense { input: xin })
                }
                LayerSpec::Lstm { inputs, .. } => {
                    let steps = x.row_len() / inputs;
                    let xin = x.reshape(&[batch, steps, inputs])?;
                    let p = LstmParams {
                        w_ih: &params[pi],
                        w_hh: &params[pi + 1],
                        bias: &params[pi + 2],
                    };
                    let (h, cache) = layers::lstm_fwd(&xin, p)?;
                    pi += 3;
                    (h, LayerCache::Lstm(cache))
                }
                LayerSpec::Dropout { rate } => {
                    if training && rate > 0.0 {
                        let r = rng.as_deref_mut().ok_or_else(|| {
                            NnError::InvalidSpec("dropout in training mode needs a random source".into())
                        })?;
                        let mask = layers::dropout_mask(x.len(), rate, r);
                        let mut out = x;
                        for (v, m) in out.data_mut().iter_mut().zip(&mask) {
                            *v *= m;
                        }
                        (out, LayerCache::Dropout { mask: Some(mask) })
                    } else {
                        (x, LayerCache::Dropout { mask: None })
                    }
                }
                LayerSpec::Activation { function } => {
                    let mut out = x;
                    for v in out.data_mut() {
                        *v = function.apply(*v);
                    }
                    let cache = if caches.is_some() {
                        out.clone()
                    } else {
                        Tensor::zeros(&[0])
                    };
                    (out, LayerCache::Activation { output: cache })
                }
                LayerSpec::Concat { width } => {
                    let side = side.expect("checked in check_inputs");
                    let n = x.row_len();
                    let input_shape = x.shape().to_vec();
                    let mut data = Vec::with_capacity(batch * (n + width));
                    for b in 0..batch {
                        data.extend_from_slice(x.row(b));
                        data.extend_from_slice(side.row(b));
                    }
                    (
                        Tensor::from_vec(&[batch, n + width], data)?,
                        LayerCache::Concat { width, input_shape },
                    )
                }
            };
            if let Some(c) = caches.as_deref_mut() {
                c.push(cache);
            }
            x = next;
        }
        let width = x.row_len();
        x.reshape(&[batch, width])
    }

    /// Forward pass honouring `state.training`; caches activations for [`Network::backward`].
    pub fn forward(&mut self, input: &Tensor, side: Option<&Tensor>, rng: &mut dyn RngCore) -> Result<Tensor, NnError> {
        self.cache = None;
        let mut caches = Vec::with_capacity(self.state.specs.len());
        let out = self.run(input, side, self.state.training, Some(rng), Some(&mut caches))?;
        self.cache = Some(caches);
        Ok(out)
    }

    /// Inference-mode forward pass (dropout disabled); does not touch the cache.
    pub fn predict(&self, input: &Tensor, side: Option<&Tensor>) -> Result<Tensor, NnError> {
        self.run(input, side, false, None, None)
    }

    /// Gradients of every parameter given `∂loss/∂output` for the cached pass.
    pub fn backward(&mut self, output_grad: &Tensor) -> Result<Vec<Tensor>, NnError> {
        let caches = self.cache.take().ok_or(NnError::NoForwardCache)?;
        let params = &self.state.params;
        let mut grads: Vec<Option<Tensor>> = vec![None; params.len()];
        let mut pi = params.len();
        let mut dy = output_grad.clone();
        for (spec, cache) in self.state.specs.iter().zip(caches.iter()).rev() {
            dy = match (spec, cache) {
                (LayerSpec::Conv1d { .. }, LayerCache::Conv1d { input }) => {
                    pi -= 2;
                    let dy = dy.reshape(&[input.batch(), params[pi].shape()[0], input.shape()[2] - params[pi].shape()[2] + 1])?;
                    let (dx, dw, db) = layers::conv1d_bwd(input, &params[pi], &dy);
                    grads[pi] = Some(dw);
                    grads[pi + 1] = Some(db);
                    dx
                }
                (LayerSpec::Dense { outputs, .. }, LayerCache::Dense { input }) => {
                    pi -= 2;
                    let dy = dy.reshape(&[input.batch(), *outputs])?;
                    let (dx, dw, db) = layers::dense_bwd(input, &params[pi], &dy);
                    grads[pi] = Some(dw);
                    grads[pi + 1] = Some(db);
                    dx
                }
                (LayerSpec::Lstm { .. }, LayerCache::Lstm(cache)) => {
                    pi -= 3;
                    let p = LstmParams {
                        w_ih: &params[pi],
                        w_hh: &params[pi + 1],
                        bias: &params[pi + 2],
                    };
                    let (dx, dw_ih, dw_hh, db) = layers::lstm_bwd(cache, p, &dy);
                    grads[pi] = Some(dw_ih);
                    grads[pi + 1] = Some(dw_hh);
                    grads[pi + 2] = Some(db);
                    dx
                }
                (LayerSpec::Dropout { .. }, LayerCache::Dropout { mask }) => {
                    if let Some(mask) = mask {
                        for (g, m) in dy.data_mut().iter_mut().zip(mask) {
                            *g *= m;
                        }
                    }
                    dy
                }
                (LayerSpec::Activation { function }, LayerCache::Activation { output }) => {
                    for (g, y) in dy.data_mut().iter_mut().zip(output.data()) {
                        *g *= function.derivative_from_output(*y);
                    }
                    dy
                }
                (LayerSpec::Concat { .. }, LayerCache::Concat { width, input_shape }) => {
                    let batch = input_shape[0];
                    let n: usize = input_shape[1..].iter().product();
                    let mut data = Vec::with_capacity(batch * n);
                    for b in 0..batch {
                        data.extend_from_slice(&dy.data()[b * (n + width)..b * (n + width) + n]);
                    }
                    Tensor::from_vec(input_shape, data)?
                }
                _ => unreachable!("cache built from the same spec list"),
            };
        }
        Ok(grads.into_iter().map(|g| g.expect("every parameter has a gradient")).collect())
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }
}
