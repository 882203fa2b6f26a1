//! The recording tape and its reverse pass.
//!
//! A [`Graph`] is built fresh for every forward pass. Leaves are created with
//! [`Graph::input`] (constants) or [`Graph::param`] (trainable), and every
//! operation appends a node holding its value plus whatever the backward rule
//! needs. Nodes are appended in evaluation order, so walking them in reverse
//! is a valid topological order for [`Graph::backward`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, AutodiffError, Result};
use crate::ops::conv::{conv1d_backward, conv1d_forward, Conv1dSpec, ConvGeom, Padding};
use crate::ops::norm::{batchnorm_backward, batchnorm_forward, BatchStats};
use crate::ops::pointwise;
use crate::tensor::{as_bcl, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Backward rule for an operation defined outside this crate.
///
/// Receives the values of the op's inputs and the upstream gradient of its
/// output, and returns one gradient per input (`None` for inputs that need
/// none).
pub trait CustomBackward {
    fn backward(&self, inputs: &[&Tensor], grad_output: &[f64]) -> Vec<Option<Vec<f64>>>;
}

enum Op {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    Conv1d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        geom: ConvGeom,
    },
    BatchNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    Gelu(Var),
    Dropout {
        input: Var,
        mask: Vec<f64>,
    },
    LogCosh(Var),
    Custom {
        inputs: Vec<Var>,
        rule: Box<dyn CustomBackward>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Option<Vec<Option<Vec<f64>>>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A constant leaf; receives no gradient.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last [`backward`](Self::backward) loss w.r.t. `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.as_ref()?.get(v.0)?.as_deref()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("add", ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("mul", ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let ta = self.value(a);
        let t = Tensor::from_fn(ta.shape(), |i| ta.data()[i] * s);
        let rg = self.needs(&[a]);
        self.push(t, Op::Scale(a, s), rg)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshape(shape)?;
        let rg = self.needs(&[a]);
        Ok(self.push(t, Op::Reshape(a), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let s = ta.data().iter().sum::<f64>() / ta.len() as f64;
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(s), Op::Mean(a), rg)
    }

    /// Grouped, dilated 1-D convolution.
    ///
    /// `input` is `[C_in, L]` or `[B, C_in, L]`, `weight` is
    /// `[C_out, C_in / groups, K]` and `bias` is `[C_out]`.
    pub fn conv1d(&mut self, input: Var, weight: Var, bias: Option<Var>, spec: Conv1dSpec) -> Result<Var> {
        let xs = self.shape(input).to_vec();
        let ws = self.shape(weight).to_vec();
        let (batch, c_in, len_in) = as_bcl(&xs).ok_or_else(|| shape_err("conv1d", &xs, &ws))?;
        let &[c_out, ipg, kernel] = ws.as_slice() else {
            return Err(shape_err("conv1d", &xs, &ws));
        };
        if spec.groups == 0 || spec.dilation == 0 || kernel == 0 {
            return Err(AutodiffError::InvalidArgument(
                "conv1d needs groups, dilation and kernel length >= 1".into(),
            ));
        }
        if c_in % spec.groups != 0 || c_out % spec.groups != 0 || ipg != c_in / spec.groups {
            return Err(shape_err("conv1d", &xs, &ws));
        }
        if let Some(b) = bias {
            if self.shape(b) != [c_out] {
                return Err(shape_err("conv1d bias", self.shape(b), &[c_out]));
            }
        }
        let reach = spec.dilation * (kernel - 1);
        let (pad_left, len_out) = match spec.padding {
            Padding::CausalLeft => (reach, len_in),
            Padding::None => {
                if len_in <= reach {
                    return Err(shape_err("conv1d (input shorter than kernel reach)", &xs, &ws));
                }
                (0, len_in - reach)
            }
        };
        let geom = ConvGeom {
            batch,
            c_in,
            c_out,
            len_in,
            len_out,
            kernel,
            groups: spec.groups,
            dilation: spec.dilation,
            pad_left,
        };
        let out = conv1d_forward(
            &geom,
            self.value(input).data(),
            self.value(weight).data(),
            bias.map(|b| self.value(b).data()),
        );
        let shape = if xs.len() == 2 {
            vec![c_out, len_out]
        } else {
            vec![batch, c_out, len_out]
        };
        let t = Tensor::new(shape, out)?;
        let mut deps = vec![input, weight];
        deps.extend(bias);
        let rg = self.needs(&deps);
        Ok(self.push(
            t,
            Op::Conv1d {
                input,
                weight,
                bias,
                geom,
            },
            rg,
        ))
    }

    /// Batch normalisation over the channel axis of a `[C, L]` / `[B, C, L]`
    /// tensor.
    ///
    /// In [`Mode::Train`] the batch statistics are used and returned so the
    /// caller can fold them into its running averages; in [`Mode::Eval`]
    /// `running` (mean, variance) is used.
    pub fn batchnorm1d(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        running: (&[f64], &[f64]),
        mode: Mode,
    ) -> Result<(Var, Option<BatchStats>)> {
        let xs = self.shape(input).to_vec();
        let (b, c, l) = as_bcl(&xs).ok_or_else(|| shape_err("batchnorm1d", &xs, &[]))?;
        for v in [gamma, beta] {
            if self.shape(v) != [c] {
                return Err(shape_err("batchnorm1d affine", self.shape(v), &[c]));
            }
        }
        if running.0.len() != c || running.1.len() != c {
            return Err(shape_err("batchnorm1d running stats", &[running.0.len()], &[c]));
        }
        let batch_stats = mode == Mode::Train;
        if batch_stats && b * l < 2 {
            return Err(AutodiffError::InvalidArgument(
                "batchnorm1d in train mode needs at least 2 samples per channel".into(),
            ));
        }
        let fwd = batchnorm_forward(
            (b, c, l),
            self.value(input).data(),
            self.value(gamma).data(),
            self.value(beta).data(),
            (!batch_stats).then_some(running),
        );
        let t = Tensor::new(xs, fwd.out)?;
        let rg = self.needs(&[input, gamma, beta]);
        let v = self.push(
            t,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat: fwd.xhat,
                inv_std: fwd.inv_std,
                batch_stats,
            },
            rg,
        );
        Ok((v, fwd.stats))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let t = Tensor::from_fn(ta.shape(), |i| pointwise::gelu(ta.data()[i]));
        let rg = self.needs(&[a]);
        self.push(t, Op::Gelu(a), rg)
    }

    /// Inverted dropout: in train mode each element is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`.
    pub fn dropout(&mut self, a: Var, p: f64, mode: Mode, seed: u64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(AutodiffError::InvalidArgument(format!(
                "dropout probability {p} outside [0, 1)"
            )));
        }
        if mode == Mode::Eval || p == 0.0 {
            return Ok(a);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = 1.0 / (1.0 - p);
        let ta = self.value(a);
        let mask: Vec<f64> = (0..ta.len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let data = ta.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.needs(&[a]);
        Ok(self.push(t, Op::Dropout { input: a, mask }, rg))
    }

    pub fn logcosh(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let t = Tensor::from_fn(ta.shape(), |i| pointwise::logcosh(ta.data()[i]));
        let rg = self.needs(&[a]);
        self.push(t, Op::LogCosh(a), rg)
    }

    /// Records an externally computed value whose gradient rule is `rule`.
    pub fn custom(&mut self, inputs: &[Var], output: Tensor, rule: Box<dyn CustomBackward>) -> Var {
        let rg = self.needs(inputs);
        self.push(
            output,
            Op::Custom {
                inputs: inputs.to_vec(),
                rule,
            },
            rg,
        )
    }

    /// Reverse pass from a scalar `loss`. A graph supports exactly one call.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.grads.is_some() {
            return Err(AutodiffError::Usage(
                "backward was already run on this graph; record a new forward pass".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(AutodiffError::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if self.nodes[idx].requires_grad {
                self.propagate(idx, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        for (slot, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.requires_grad {
                *slot = None;
            }
        }
        self.grads = Some(grads);
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| self.nodes[v.0].value.data();
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        let mut acc = |v: Var, contrib: Vec<f64>| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.iter_mut().zip(&contrib).for_each(|(e, c)| *e += c),
                slot => *slot = Some(contrib),
            }
        };
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, g.to_vec());
                acc(*b, g.to_vec());
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    acc(*a, g.iter().zip(val(*b)).map(|(g, y)| g * y).collect());
                }
                if wants(*b) {
                    acc(*b, g.iter().zip(val(*a)).map(|(g, x)| g * x).collect());
                }
            }
            Op::Scale(a, s) => acc(*a, g.iter().map(|g| g * s).collect()),
            Op::Reshape(a) => acc(*a, g.to_vec()),
            Op::Sum(a) => acc(*a, vec![g[0]; val(*a).len()]),
            Op::Mean(a) => {
                let n = val(*a).len();
                acc(*a, vec![g[0] / n as f64; n]);
            }
            Op::Conv1d {
                input,
                weight,
                bias,
                geom,
            } => {
                let want_bias = bias.is_some_and(&wants);
                let (d_in, d_w, d_b) = conv1d_backward(geom, val(*input), val(*weight), g, wants(*input), want_bias);
                if let Some(d) = d_in {
                    acc(*input, d);
                }
                acc(*weight, d_w);
                if let (Some(b), Some(d)) = (bias, d_b) {
                    acc(*b, d);
                }
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let shape = self.nodes[input.0].value.shape();
                let bcl = as_bcl(shape).expect("validated at record time");
                let (dx, dgamma, dbeta) = batchnorm_backward(bcl, xhat, inv_std, val(*gamma), g, *batch_stats);
                acc(*input, dx);
                acc(*gamma, dgamma);
                acc(*beta, dbeta);
            }
            Op::Gelu(a) => acc(
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(g, x)| g * pointwise::gelu_grad(*x))
                    .collect(),
            ),
            Op::Dropout { input, mask } => acc(*input, g.iter().zip(mask).map(|(g, m)| g * m).collect()),
            Op::LogCosh(a) => acc(
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(g, x)| g * pointwise::logcosh_grad(*x))
                    .collect(),
            ),
            Op::Custom { inputs, rule } => {
                let values: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
                for (v, d) in inputs.iter().zip(rule.backward(&values, g)) {
                    if let Some(d) = d {
                        acc(*v, d);
                    }
                }
            }
        }
    }
}
