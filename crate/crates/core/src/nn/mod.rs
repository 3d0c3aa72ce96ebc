//! Feed-forward networks with hand-written backpropagation.

mod layer;
mod optim;

pub use layer::{BatchNorm, Layer, LayerSpec, BN_EPS, BN_MOMENTUM};
pub use optim::Sgd;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::{gemm, Matrix, Trans};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Ordered stack of layers.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

/// Activations recorded by [`MlpModel::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub mode: Mode,
    /// `inputs[i]` is the input to layer `i`.
    pub inputs: Vec<Matrix>,
    pub output: Matrix,
    /// Per batch-norm layer (indexed like `inputs`): normalised activations
    /// and `1/sqrt(var + eps)` of the mini-batch.
    pub bn_cache: Vec<Option<(Matrix, Vec<f64>)>>,
}

/// Gradient for one layer, shaped like its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerGrad {
    Affine { w: Matrix, b: Vec<f64> },
    BatchNorm { gamma: Vec<f64>, beta: Vec<f64> },
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    /// Flat views in the same order as [`MlpModel::param_slices`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for g in &self.layers {
            match g {
                LayerGrad::Affine { w, b } => {
                    out.push(w.data());
                    out.push(b.as_slice());
                }
                LayerGrad::BatchNorm { gamma, beta } => {
                    out.push(gamma.as_slice());
                    out.push(beta.as_slice());
                }
                LayerGrad::None => {}
            }
        }
        out
    }

    pub fn flat(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn max_abs(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl MlpModel {
    /// Builds a model from a layer list with Glorot-uniform weights
    /// (`a = sqrt(6/(fan_in+fan_out))`), zero biases, and identity batch
    /// norms.
    pub fn init(specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        validate_specs(specs)?;
        let layers = specs
            .iter()
            .map(|spec| match *spec {
                LayerSpec::Affine { input, output } => {
                    let a = (6.0 / (input + output) as f64).sqrt();
                    let w = Matrix::from_fn(input, output, |_, _| rng.random_range(-a..a));
                    Layer::Affine {
                        w,
                        b: vec![0.0; output],
                    }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::BatchNorm { dim } => Layer::BatchNorm(BatchNorm::new(dim)),
            })
            .collect();
        Ok(MlpModel { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(Layer::spec).collect();
        validate_specs(&specs)?;
        Ok(MlpModel { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| l.spec().input_dim())
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.iter().rev().find_map(|l| l.spec().output_dim())
    }

    pub fn has_batchnorm(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::BatchNorm(_)))
    }

    /// Learnable parameters as flat slices: per affine `W` then `b`, per
    /// batch norm `γ` then `β`.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Affine { w, b } => {
                    out.push(w.data());
                    out.push(b.as_slice());
                }
                Layer::BatchNorm(bn) => {
                    out.push(bn.gamma.as_slice());
                    out.push(bn.beta.as_slice());
                }
                Layer::Relu => {}
            }
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Affine { w, b } => {
                    out.push(w.data_mut());
                    out.push(b.as_mut_slice());
                }
                Layer::BatchNorm(bn) => {
                    out.push(bn.gamma.as_mut_slice());
                    out.push(bn.beta.as_mut_slice());
                }
                Layer::Relu => {}
            }
        }
        out
    }

    /// Non-learnable state (batch-norm running mean then variance).
    pub fn buffer_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            if let Layer::BatchNorm(bn) = l {
                out.push(bn.running_mean.as_slice());
                out.push(bn.running_var.as_slice());
            }
        }
        out
    }

    pub fn buffer_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            if let Layer::BatchNorm(bn) = l {
                out.push(bn.running_mean.as_mut_slice());
                out.push(bn.running_var.as_mut_slice());
            }
        }
        out
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.num_params();
        if flat.len() != n {
            return Err(Error::shape(format!(
                "model has {n} parameters, got {}",
                flat.len()
            )));
        }
        let mut off = 0;
        for s in self.param_slices_mut() {
            s.copy_from_slice(&flat[off..off + s.len()]);
            off += s.len();
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Runs the network. In train mode batch norm normalises with mini-batch
    /// statistics and updates its running averages.
    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<ForwardTrace> {
        if let Some(d) = self.input_dim() {
            if x.cols() != d {
                return Err(Error::shape(format!(
                    "model expects {d} input features, got {}",
                    x.cols()
                )));
            }
        }
        if mode == Mode::Train && x.rows() < 2 && self.has_batchnorm() {
            return Err(Error::DegenerateBatch(format!(
                "batch norm in train mode needs at least 2 rows, got {}",
                x.rows()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut bn_cache = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &mut self.layers {
            let (next, cache) = layer.forward(&cur, mode)?;
            inputs.push(cur);
            bn_cache.push(cache);
            cur = next;
        }
        Ok(ForwardTrace {
            mode,
            inputs,
            output: cur,
            bn_cache,
        })
    }

    /// Eval-mode forward that leaves the model untouched.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut cur = x.clone();
        if let Some(d) = self.input_dim() {
            if x.cols() != d {
                return Err(Error::shape(format!(
                    "model expects {d} input features, got {}",
                    x.cols()
                )));
            }
        }
        for layer in &self.layers {
            cur = layer.forward_eval(&cur)?;
        }
        Ok(cur)
    }

    /// Exact gradients of `<grad_out, output>` with respect to every
    /// parameter and to the input, including batch norm's dependence on the
    /// mini-batch statistics.
    pub fn backward(&self, trace: &ForwardTrace, grad_out: &Matrix) -> Result<(Gradients, Matrix)> {
        self.backward_impl(trace, grad_out, true)
    }

    /// Like [`backward`](Self::backward) but skips the input gradient of the
    /// first layer.
    pub fn backward_params(&self, trace: &ForwardTrace, grad_out: &Matrix) -> Result<Gradients> {
        Ok(self.backward_impl(trace, grad_out, false)?.0)
    }

    fn backward_impl(
        &self,
        trace: &ForwardTrace,
        grad_out: &Matrix,
        input_grad: bool,
    ) -> Result<(Gradients, Matrix)> {
        if trace.mode != Mode::Train {
            return Err(Error::State("backward needs a train-mode trace".into()));
        }
        if trace.inputs.len() != self.layers.len() {
            return Err(Error::State(
                "trace was produced by a different model".into(),
            ));
        }
        if grad_out.shape() != trace.output.shape() {
            return Err(Error::shape(format!(
                "grad_out is {}x{}, output is {}x{}",
                grad_out.rows(),
                grad_out.cols(),
                trace.output.rows(),
                trace.output.cols()
            )));
        }
        let mut grads = vec![LayerGrad::None; self.layers.len()];
        let mut g = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[i];
            match layer {
                Layer::Affine { w, .. } => {
                    let mut gw = Matrix::zeros(w.rows(), w.cols());
                    gemm(1.0, input, Trans::Yes, &g, Trans::No, 0.0, &mut gw)?;
                    let gb = column_sums(&g);
                    grads[i] = LayerGrad::Affine { w: gw, b: gb };
                    if i == 0 && !input_grad {
                        g = Matrix::zeros(0, 0);
                        continue;
                    }
                    let mut gx = Matrix::zeros(g.rows(), w.rows());
                    gemm(1.0, &g, Trans::No, w, Trans::Yes, 0.0, &mut gx)?;
                    g = gx;
                }
                Layer::Relu => {
                    for (gv, &xv) in g.data_mut().iter_mut().zip(input.data()) {
                        if xv <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                }
                Layer::BatchNorm(bn) => {
                    let (xhat, inv_std) = trace.bn_cache[i]
                        .as_ref()
                        .ok_or_else(|| Error::State("missing batch-norm cache".into()))?;
                    let (gx, dgamma, dbeta) = bn.backward(&g, xhat, inv_std);
                    grads[i] = LayerGrad::BatchNorm {
                        gamma: dgamma,
                        beta: dbeta,
                    };
                    g = gx;
                }
            }
        }
        Ok((Gradients { layers: grads }, g))
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Affine { w, b } => LayerGrad::Affine {
                        w: Matrix::zeros(w.rows(), w.cols()),
                        b: vec![0.0; b.len()],
                    },
                    Layer::BatchNorm(bn) => LayerGrad::BatchNorm {
                        gamma: vec![0.0; bn.dim()],
                        beta: vec![0.0; bn.dim()],
                    },
                    Layer::Relu => LayerGrad::None,
                })
                .collect(),
        }
    }
}

pub(crate) fn column_sums(x: &Matrix) -> Vec<f64> {
    let mut s = vec![0.0; x.cols()];
    for r in 0..x.rows() {
        for (a, v) in s.iter_mut().zip(x.row(r)) {
            *a += v;
        }
    }
    s
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    let mut width: Option<usize> = None;
    for (i, s) in specs.iter().enumerate() {
        if let Some(inp) = s.input_dim() {
            if inp == 0 {
                return Err(Error::config(format!("layer {i} has zero width")));
            }
            if let Some(w) = width {
                if w != inp {
                    return Err(Error::config(format!(
                        "layer {i} expects {inp} inputs but the previous layer produces {w}"
                    )));
                }
            }
        }
        if let Some(out) = s.output_dim() {
            if out == 0 {
                return Err(Error::config(format!("layer {i} has zero width")));
            }
            width = Some(out);
        }
    }
    Ok(())
}

/// `[affine, relu]*` over `widths` with no activation after the last affine.
pub fn mlp_specs(input: usize, hidden: &[usize], output: usize) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    let mut prev = input;
    for &h in hidden {
        specs.push(LayerSpec::Affine {
            input: prev,
            output: h,
        });
        specs.push(LayerSpec::Relu);
        prev = h;
    }
    specs.push(LayerSpec::Affine {
        input: prev,
        output,
    });
    specs
}
