//! The two data-driven architectures compared in the gap experiments: a
//! plain MLP over the flattened gain matrix and a message-passing GNN with
//! MAX aggregation.

mod gnn;
mod mlp;

pub use gnn::{BetaKind, GnnConfig, GnnModel};
pub use mlp::{MlpModel, Standardizer};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layers::{LayerKind, LayerSpec};
use crate::netgen::NetworkInstance;
use crate::rng::SeedKey;
#[allow(unused_imports)]
use crate::float::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Arch {
    Mlp,
    Mpgnn,
    Oamp,
}

impl core::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(Arch::Mlp),
            "mpgnn" | "gnn" => Ok(Arch::Mpgnn),
            "oamp" => Ok(Arch::Oamp),
            other => Err(Error::config(alloc::format!("unknown arch `{other}` (expected mlp, mpgnn)"))),
        }
    }
}

/// Flat learnable parameters plus the layer layout they belong to.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    pub arch: Arch,
    pub layer_specs: Vec<LayerSpec>,
    pub values: Vec<f64>,
    pub init_key: SeedKey,
}

impl ModelParams {
    pub fn param_count(specs: &[LayerSpec]) -> usize {
        specs.iter().map(LayerSpec::param_count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let expected = Self::param_count(&self.layer_specs);
        if self.values.len() != expected {
            return Err(Error::dim("parameter vector", expected, self.values.len()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite parameter"));
        }
        Ok(())
    }
}

/// Zero-mean Gaussian weights with variance `1 / fan_in`, zero biases.
pub fn init_params(arch: Arch, layer_specs: Vec<LayerSpec>, key: SeedKey) -> ModelParams {
    let mut stream = key.stream();
    let mut values = Vec::with_capacity(ModelParams::param_count(&layer_specs));
    for spec in &layer_specs {
        if spec.kind == LayerKind::Affine {
            let scale = 1.0 / (spec.in_dim.max(1) as f64).sqrt();
            values.extend((0..spec.in_dim * spec.out_dim).map(|_| scale * stream.normal()));
            values.extend(core::iter::repeat_n(0.0, spec.out_dim));
        }
    }
    ModelParams { arch, layer_specs, values, init_key: key }
}

/// Scalar loss of a model output: returns `(loss, dloss/doutput)`.
pub type LossFn<'a> = dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)> + 'a;

/// A model that maps a network instance to a feasible power vector.
pub trait PowerModel {
    fn params(&self) -> &ModelParams;

    fn params_mut(&mut self) -> &mut ModelParams;

    /// Forward pass with explicit parameter values.
    fn forward_with(&self, values: &[f64], instance: &NetworkInstance) -> Result<Vec<f64>>;

    /// Loss of the forward output and its gradient with respect to `values`,
    /// accumulated into `grad`.
    fn backward_with(
        &self,
        values: &[f64],
        instance: &NetworkInstance,
        loss: &LossFn<'_>,
        grad: &mut [f64],
    ) -> Result<f64>;

    fn forward(&self, instance: &NetworkInstance) -> Result<Vec<f64>> {
        self.forward_with(&self.params().values, instance)
    }
}

/// Analytic gradient of `loss(model(instance))` with respect to the model
/// parameters, evaluated at `values`.
pub fn model_gradient<M: PowerModel + ?Sized>(
    model: &M,
    values: &[f64],
    instance: &NetworkInstance,
    loss: &LossFn<'_>,
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; values.len()];
    let value = model.backward_with(values, instance, loss, &mut grad)?;
    if !value.is_finite() {
        return Err(Error::numeric("loss is not finite"));
    }
    Ok((value, grad))
}

/// Either architecture behind one type, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(MlpModel),
    Gnn(GnnModel),
}

impl PowerModel for Model {
    fn params(&self) -> &ModelParams {
        match self {
            Model::Mlp(m) => m.params(),
            Model::Gnn(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> &mut ModelParams {
        match self {
            Model::Mlp(m) => m.params_mut(),
            Model::Gnn(m) => m.params_mut(),
        }
    }

    fn forward_with(&self, values: &[f64], instance: &NetworkInstance) -> Result<Vec<f64>> {
        match self {
            Model::Mlp(m) => m.forward_with(values, instance),
            Model::Gnn(m) => m.forward_with(values, instance),
        }
    }

    fn backward_with(
        &self,
        values: &[f64],
        instance: &NetworkInstance,
        loss: &LossFn<'_>,
        grad: &mut [f64],
    ) -> Result<f64> {
        match self {
            Model::Mlp(m) => m.backward_with(values, instance, loss, grad),
            Model::Gnn(m) => m.backward_with(values, instance, loss, grad),
        }
    }
}
