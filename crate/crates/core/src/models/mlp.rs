use alloc::vec;
use alloc::vec::Vec;

use super::{init_params, Arch, LossFn, ModelParams, PowerModel};
use crate::error::{Error, Result};
use crate::layers::{LayerSpec, Stack};
use crate::netgen::NetworkInstance;
use crate::rng::SeedKey;
#[allow(unused_imports)]
use crate::float::*;

/// Per-feature affine standardization `(x − mean) / std`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Fits mean and standard deviation of each flattened gain entry.
    /// Features with (near) zero spread keep unit scale.
    pub fn fit(instances: &[NetworkInstance]) -> Result<Self> {
        let first = instances.first().ok_or_else(|| Error::domain("cannot fit on an empty set"))?;
        let dim = first.gains.len();
        let n = instances.len() as f64;
        let mut mean = vec![0.0; dim];
        for inst in instances {
            if inst.gains.len() != dim {
                return Err(Error::dim("standardizer input", dim, inst.gains.len()));
            }
            for (m, g) in mean.iter_mut().zip(&inst.gains) {
                *m += g / n;
            }
        }
        let mut var = vec![0.0; dim];
        for inst in instances {
            for ((v, g), m) in var.iter_mut().zip(&inst.gains).zip(&mean) {
                *v += (g - m) * (g - m) / n;
            }
        }
        let std = var.iter().map(|v| if *v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect()
    }
}

/// Fully connected network from the row-major `K²` gain matrix to `K`
/// powers, with a sigmoid output scaled to `[0, p_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    k: usize,
    hidden: Vec<usize>,
    stack: Stack,
    standardizer: Standardizer,
    params: ModelParams,
}

impl MlpModel {
    pub fn layer_specs(k: usize, hidden: &[usize]) -> Vec<LayerSpec> {
        let mut widths = vec![k * k];
        widths.extend_from_slice(hidden);
        widths.push(k);
        let mut specs = Vec::new();
        for (i, w) in widths.windows(2).enumerate() {
            specs.push(LayerSpec::affine(w[0], w[1]));
            if i + 2 < widths.len() {
                specs.push(LayerSpec::relu(w[1]));
            }
        }
        specs.push(LayerSpec::sigmoid(k));
        specs
    }

    pub fn new(k: usize, hidden: &[usize], key: SeedKey) -> Result<Self> {
        if k == 0 || hidden.contains(&0) {
            return Err(Error::config("mlp dimensions must be positive"));
        }
        let params = init_params(Arch::Mlp, Self::layer_specs(k, hidden), key);
        Self::from_parts(k, hidden.to_vec(), Standardizer::identity(k * k), params)
    }

    pub fn from_parts(k: usize, hidden: Vec<usize>, standardizer: Standardizer, params: ModelParams) -> Result<Self> {
        if params.arch != Arch::Mlp {
            return Err(Error::config("parameters are not for an mlp"));
        }
        if params.layer_specs != Self::layer_specs(k, &hidden) {
            return Err(Error::config("layer layout does not match k and hidden widths"));
        }
        params.validate()?;
        if standardizer.mean.len() != k * k || standardizer.std.len() != k * k {
            return Err(Error::dim("standardizer", k * k, standardizer.mean.len()));
        }
        let stack = Stack::new(params.layer_specs.clone())?;
        Ok(Self { k, hidden, stack, standardizer, params })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn set_standardizer(&mut self, standardizer: Standardizer) -> Result<()> {
        if standardizer.mean.len() != self.k * self.k {
            return Err(Error::dim("standardizer", self.k * self.k, standardizer.mean.len()));
        }
        self.standardizer = standardizer;
        Ok(())
    }

    fn check(&self, values: &[f64], instance: &NetworkInstance) -> Result<()> {
        if instance.k != self.k {
            return Err(Error::dim("instance k", self.k, instance.k));
        }
        if values.len() != self.stack.param_count() {
            return Err(Error::dim("parameter vector", self.stack.param_count(), values.len()));
        }
        Ok(())
    }
}

impl PowerModel for MlpModel {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    fn forward_with(&self, values: &[f64], instance: &NetworkInstance) -> Result<Vec<f64>> {
        self.check(values, instance)?;
        let x = self.standardizer.apply(&instance.gains);
        let trace = self.stack.forward(values, &x);
        Ok(trace.output().iter().map(|s| s * instance.p_max).collect())
    }

    fn backward_with(
        &self,
        values: &[f64],
        instance: &NetworkInstance,
        loss: &LossFn<'_>,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.check(values, instance)?;
        if grad.len() != values.len() {
            return Err(Error::dim("gradient buffer", values.len(), grad.len()));
        }
        let x = self.standardizer.apply(&instance.gains);
        let trace = self.stack.forward(values, &x);
        let p_hat: Vec<f64> = trace.output().iter().map(|s| s * instance.p_max).collect();
        let (value, g_out) = loss(&p_hat)?;
        if g_out.len() != self.k {
            return Err(Error::dim("loss gradient", self.k, g_out.len()));
        }
        let upstream: Vec<f64> = g_out.iter().map(|g| g * instance.p_max).collect();
        self.stack.backward(values, &trace, &upstream, grad);
        Ok(value)
    }
}
