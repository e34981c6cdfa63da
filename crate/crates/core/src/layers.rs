//! Differentiable layer primitives with analytic gradients.
//!
//! Parameters are always a flat `&[f64]`. For `affine` the layout is the
//! row-major `out × in` weight matrix followed by the `out` biases; for `mse`
//! the parameters are the regression target.

use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::tensor::Tensor;
#[allow(unused_imports)]
use crate::float::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LayerKind {
    Affine,
    Relu,
    Sigmoid,
    /// Elementwise maximum over the rows of a `[members, dim]` set.
    SetMax,
    /// Mean squared error against the target held in `params`.
    Mse,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn expect_len(operand: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::dim(operand, expected, found))
    }
}

/// Infers `(in_dim, out_dim)` of an affine layer from its parameter count.
fn affine_dims(params: &[f64], in_dim: usize) -> Result<usize> {
    if !params.len().is_multiple_of(in_dim + 1) {
        return Err(Error::dim("affine params", in_dim + 1, params.len()));
    }
    Ok(params.len() / (in_dim + 1))
}

fn set_dims(input: &Tensor) -> Result<(usize, usize)> {
    match input.shape() {
        [members, dim] => Ok((*members, *dim)),
        shape => Err(Error::dim("set_max input rank", 2, shape.len())),
    }
}

pub fn layer_forward(kind: LayerKind, params: &[f64], input: &Tensor) -> Result<Tensor> {
    let x = input.as_real()?;
    match kind {
        LayerKind::Affine => {
            let out_dim = affine_dims(params, x.len())?;
            let mut out = vec![0.0; out_dim];
            affine_forward(params, x, &mut out);
            Ok(Tensor::vector(out))
        }
        LayerKind::Relu => {
            expect_len("relu params", 0, params.len())?;
            Ok(Tensor::vector(x.iter().map(|&v| v.max(0.0)).collect()))
        }
        LayerKind::Sigmoid => {
            expect_len("sigmoid params", 0, params.len())?;
            Ok(Tensor::vector(x.iter().map(|&v| sigmoid(v)).collect()))
        }
        LayerKind::SetMax => {
            expect_len("set_max params", 0, params.len())?;
            let (members, dim) = set_dims(input)?;
            let (out, _) = set_max_forward(x, members, dim);
            Ok(Tensor::vector(out))
        }
        LayerKind::Mse => {
            expect_len("mse target", x.len(), params.len())?;
            Ok(Tensor::vector(vec![mse(x, params)]))
        }
    }
}

/// Returns `(param_grads, input_grad)` for the loss whose gradient with
/// respect to this layer's output is `upstream`.
pub fn layer_backward(
    kind: LayerKind,
    params: &[f64],
    input: &Tensor,
    upstream: &Tensor,
) -> Result<(Vec<f64>, Tensor)> {
    let x = input.as_real()?;
    let up = upstream.as_real()?;
    match kind {
        LayerKind::Affine => {
            let out_dim = affine_dims(params, x.len())?;
            expect_len("upstream_grad", out_dim, up.len())?;
            let mut grad = vec![0.0; params.len()];
            let mut gx = vec![0.0; x.len()];
            affine_backward(params, x, up, &mut grad, &mut gx);
            Ok((grad, Tensor::real(input.shape(), gx)?))
        }
        LayerKind::Relu => {
            expect_len("upstream_grad", x.len(), up.len())?;
            let gx = x.iter().zip(up).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect();
            Ok((Vec::new(), Tensor::real(input.shape(), gx)?))
        }
        LayerKind::Sigmoid => {
            expect_len("upstream_grad", x.len(), up.len())?;
            let gx = x
                .iter()
                .zip(up)
                .map(|(&v, &g)| {
                    let s = sigmoid(v);
                    g * s * (1.0 - s)
                })
                .collect();
            Ok((Vec::new(), Tensor::real(input.shape(), gx)?))
        }
        LayerKind::SetMax => {
            let (members, dim) = set_dims(input)?;
            expect_len("upstream_grad", dim, up.len())?;
            let (_, arg) = set_max_forward(x, members, dim);
            let mut gx = vec![0.0; x.len()];
            for (d, a) in arg.iter().enumerate() {
                if let Some(m) = a {
                    gx[m * dim + d] += up[d];
                }
            }
            Ok((Vec::new(), Tensor::real(input.shape(), gx)?))
        }
        LayerKind::Mse => {
            expect_len("mse target", x.len(), params.len())?;
            expect_len("upstream_grad", 1, up.len())?;
            let (gx, gy) = mse_grad(x, params, up[0]);
            Ok((gy, Tensor::real(input.shape(), gx)?))
        }
    }
}

/// `out = W x + b` with `params = [W (row-major, out × in), b]`.
pub fn affine_forward(params: &[f64], x: &[f64], out: &mut [f64]) {
    let in_dim = x.len();
    let out_dim = out.len();
    let (w, b) = params.split_at(out_dim * in_dim);
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(in_dim).zip(b)) {
        *o = bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Accumulates weight/bias gradients into `grad` and writes the input
/// gradient into `gx`.
pub fn affine_backward(params: &[f64], x: &[f64], up: &[f64], grad: &mut [f64], gx: &mut [f64]) {
    let in_dim = x.len();
    let out_dim = up.len();
    let (w, _) = params.split_at(out_dim * in_dim);
    let (gw, gb) = grad.split_at_mut(out_dim * in_dim);
    gx.iter_mut().for_each(|v| *v = 0.0);
    for o in 0..out_dim {
        let g = up[o];
        gb[o] += g;
        if g == 0.0 {
            continue;
        }
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let grow = &mut gw[o * in_dim..(o + 1) * in_dim];
        for i in 0..in_dim {
            grow[i] += g * x[i];
            gx[i] += g * row[i];
        }
    }
}

/// Elementwise max over set members. An empty set yields zeros and no
/// argmax. Ties go to the lowest member index.
pub fn set_max_forward(x: &[f64], members: usize, dim: usize) -> (Vec<f64>, Vec<Option<usize>>) {
    let mut out = vec![0.0; dim];
    let mut arg = vec![None; dim];
    for m in 0..members {
        let row = &x[m * dim..(m + 1) * dim];
        for d in 0..dim {
            if arg[d].is_none() || row[d] > out[d] {
                out[d] = row[d];
                arg[d] = Some(m);
            }
        }
    }
    (out, arg)
}

pub fn mse(x: &[f64], y: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
}

fn mse_grad(x: &[f64], y: &[f64], up: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len().max(1) as f64;
    let gx: Vec<f64> = x.iter().zip(y).map(|(a, b)| 2.0 * (a - b) / n * up).collect();
    let gy = gx.iter().map(|g| -g).collect();
    (gx, gy)
}

/// One layer of a feed-forward stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LayerSpec {
    pub fn affine(in_dim: usize, out_dim: usize) -> Self {
        Self { kind: LayerKind::Affine, in_dim, out_dim }
    }

    pub fn relu(dim: usize) -> Self {
        Self { kind: LayerKind::Relu, in_dim: dim, out_dim: dim }
    }

    pub fn sigmoid(dim: usize) -> Self {
        Self { kind: LayerKind::Sigmoid, in_dim: dim, out_dim: dim }
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            LayerKind::Affine => self.out_dim * self.in_dim + self.out_dim,
            _ => 0,
        }
    }
}

/// A feed-forward stack of affine and pointwise layers over one parameter
/// slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    specs: Vec<LayerSpec>,
    param_count: usize,
}

/// Activations of one forward pass: `acts[0]` is the input, `acts[i + 1]`
/// the output of layer `i`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Stack {
    pub fn new(specs: Vec<LayerSpec>) -> Result<Self> {
        for pair in specs.windows(2) {
            expect_len("stack layer input", pair[0].out_dim, pair[1].in_dim)?;
        }
        for s in &specs {
            match s.kind {
                LayerKind::Affine => {}
                LayerKind::Relu | LayerKind::Sigmoid => expect_len("pointwise layer", s.in_dim, s.out_dim)?,
                LayerKind::SetMax | LayerKind::Mse => {
                    return Err(Error::config("set_max and mse cannot appear inside a stack"))
                }
            }
        }
        let param_count = specs.iter().map(LayerSpec::param_count).sum();
        Ok(Self { specs, param_count })
    }

    /// Affine layers of the given widths with ReLU between them; the last
    /// affine layer has no activation.
    pub fn relu_mlp(widths: &[usize]) -> Result<Self> {
        let mut specs = Vec::new();
        for (i, w) in widths.windows(2).enumerate() {
            specs.push(LayerSpec::affine(w[0], w[1]));
            if i + 2 < widths.len() {
                specs.push(LayerSpec::relu(w[1]));
            }
        }
        Self::new(specs)
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn in_dim(&self) -> usize {
        self.specs.first().map_or(0, |s| s.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.specs.last().map_or(0, |s| s.out_dim)
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> Trace {
        debug_assert_eq!(params.len(), self.param_count);
        debug_assert_eq!(input.len(), self.in_dim());
        let mut acts = Vec::with_capacity(self.specs.len() + 1);
        acts.push(input.to_vec());
        let mut offset = 0;
        for spec in &self.specs {
            let x = acts.last().expect("input pushed");
            let y = match spec.kind {
                LayerKind::Affine => {
                    let n = spec.param_count();
                    let mut y = vec![0.0; spec.out_dim];
                    affine_forward(&params[offset..offset + n], x, &mut y);
                    offset += n;
                    y
                }
                LayerKind::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
                LayerKind::Sigmoid => x.iter().map(|&v| sigmoid(v)).collect(),
                LayerKind::SetMax | LayerKind::Mse => unreachable!("rejected in Stack::new"),
            };
            acts.push(y);
        }
        Trace { acts }
    }

    /// Backpropagates `upstream` (gradient wrt the stack output), adding
    /// parameter gradients into `grad`. Returns the gradient wrt the input.
    pub fn backward(&self, params: &[f64], trace: &Trace, upstream: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let mut g = upstream.to_vec();
        let mut offset = self.param_count;
        for (i, spec) in self.specs.iter().enumerate().rev() {
            let x = &trace.acts[i];
            match spec.kind {
                LayerKind::Affine => {
                    let n = spec.param_count();
                    offset -= n;
                    let mut gx = vec![0.0; spec.in_dim];
                    affine_backward(&params[offset..offset + n], x, &g, &mut grad[offset..offset + n], &mut gx);
                    g = gx;
                }
                LayerKind::Relu => {
                    for (gv, &xv) in g.iter_mut().zip(x) {
                        if xv <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                }
                LayerKind::Sigmoid => {
                    let y = &trace.acts[i + 1];
                    for (gv, &s) in g.iter_mut().zip(y) {
                        *gv *= s * (1.0 - s);
                    }
                }
                LayerKind::SetMax | LayerKind::Mse => unreachable!("rejected in Stack::new"),
            }
        }
        g
    }
}

/// Compares an analytic gradient with central finite differences.
///
/// `model_eval` returns `(loss, gradient)` at the given parameters. Returns
/// the maximum over probed coordinates of
/// `|analytic − central| / max(1e-12, |central|)`. When `probe_count` is
/// smaller than the parameter count, coordinates are probed at an even
/// stride.
pub fn check_gradient<F>(model_eval: F, params: &[f64], probe_count: usize, step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(step > 0.0) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    if probe_count == 0 {
        return Err(Error::domain("probe_count must be at least 1"));
    }
    let n = params.len();
    if n == 0 {
        return Ok(0.0);
    }
    let (loss, analytic) = model_eval(params)?;
    if !loss.is_finite() {
        return Err(Error::numeric("loss is not finite at the base point"));
    }
    expect_len("analytic gradient", n, analytic.len())?;
    let probes = probe_count.min(n);
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for p in 0..probes {
        let i = p * n / probes;
        work[i] = params[i] + step;
        let (plus, _) = model_eval(&work)?;
        work[i] = params[i] - step;
        let (minus, _) = model_eval(&work)?;
        work[i] = params[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::numeric("loss is not finite at a probe point"));
        }
        let central = (plus - minus) / (2.0 * step);
        let rel = (analytic[i] - central).abs() / central.abs().max(1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}
