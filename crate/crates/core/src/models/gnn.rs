//! Message-passing GNN with MAX aggregation.
//!
//! Round `r` updates every node `i` as
//!
//! ```text
//! y_i = MLP2(x_i, MAX_{j ∈ N(i)} MLP1(x_j, e_ji))
//! x_i = (static_i, β(y_i))
//! ```
//!
//! where `static_i` is the node feature `(gains[i][i], weight)` carried
//! unchanged, `β` is a sigmoid scaled to `[0, p_max]`, and the dynamic part of
//! the state starts at zero. The power of user `i` is the first dynamic
//! entry after the last round.

use alloc::vec;
use alloc::vec::Vec;

use super::{init_params, Arch, LossFn, ModelParams, PowerModel};
use crate::error::{Error, Result};
use crate::layers::{set_max_forward, LayerSpec, Stack, Trace};
use crate::netgen::{build_graph, Graph, NetworkInstance};
use crate::rng::SeedKey;

const STATIC_DIM: usize = 2;
const EDGE_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BetaKind {
    /// `p_max · sigmoid(y)`
    ScaledSigmoid,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GnnConfig {
    pub num_rounds: usize,
    pub hidden_dim: usize,
    /// Width of the learned part of each node state.
    pub state_dim: usize,
    pub mlp1_depth: usize,
    pub mlp2_depth: usize,
    pub beta: BetaKind,
    /// One MLP1/MLP2 pair reused by every round when true.
    pub shared_rounds: bool,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self {
            num_rounds: 2,
            hidden_dim: 64,
            state_dim: 4,
            mlp1_depth: 2,
            mlp2_depth: 2,
            beta: BetaKind::ScaledSigmoid,
            shared_rounds: true,
        }
    }
}

impl GnnConfig {
    fn validate(&self) -> Result<()> {
        if self.num_rounds == 0 || self.hidden_dim == 0 || self.state_dim == 0 {
            return Err(Error::config("num_rounds, hidden_dim and state_dim must be positive"));
        }
        if self.mlp1_depth == 0 || self.mlp2_depth == 0 {
            return Err(Error::config("mlp depths must be positive"));
        }
        Ok(())
    }

    fn node_dim(&self) -> usize {
        STATIC_DIM + self.state_dim
    }

    fn mlp1_specs(&self) -> Vec<LayerSpec> {
        let mut widths = vec![self.node_dim() + EDGE_DIM];
        widths.extend(core::iter::repeat_n(self.hidden_dim, self.mlp1_depth));
        relu_specs(&widths)
    }

    fn mlp2_specs(&self) -> Vec<LayerSpec> {
        let mut widths = vec![self.node_dim() + self.hidden_dim];
        widths.extend(core::iter::repeat_n(self.hidden_dim, self.mlp2_depth - 1));
        widths.push(self.state_dim);
        let mut specs = relu_specs(&widths);
        specs.push(LayerSpec::sigmoid(self.state_dim));
        specs
    }

    fn blocks(&self) -> usize {
        if self.shared_rounds {
            1
        } else {
            self.num_rounds
        }
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        for _ in 0..self.blocks() {
            specs.extend(self.mlp1_specs());
            specs.extend(self.mlp2_specs());
        }
        specs
    }
}

fn relu_specs(widths: &[usize]) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    for (i, w) in widths.windows(2).enumerate() {
        specs.push(LayerSpec::affine(w[0], w[1]));
        if i + 2 < widths.len() {
            specs.push(LayerSpec::relu(w[1]));
        }
    }
    specs
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    config: GnnConfig,
    mlp1: Stack,
    mlp2: Stack,
    params: ModelParams,
}

struct RoundCache {
    edge_traces: Vec<Trace>,
    argmax: Vec<Vec<Option<usize>>>,
    node_traces: Vec<Trace>,
}

impl GnnModel {
    pub fn new(config: GnnConfig, key: SeedKey) -> Result<Self> {
        config.validate()?;
        let params = init_params(Arch::Mpgnn, config.layer_specs(), key);
        Self::from_parts(config, params)
    }

    pub fn from_parts(config: GnnConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        if params.arch != Arch::Mpgnn {
            return Err(Error::config("parameters are not for an mpgnn"));
        }
        if params.layer_specs != config.layer_specs() {
            return Err(Error::config("layer layout does not match the gnn config"));
        }
        params.validate()?;
        let mlp1 = Stack::new(config.mlp1_specs())?;
        let mlp2 = Stack::new(config.mlp2_specs())?;
        Ok(Self { config, mlp1, mlp2, params })
    }

    pub fn config(&self) -> &GnnConfig {
        &self.config
    }

    /// Parameter ranges `(mlp1, mlp2)` used in round `round` (0-based).
    fn block(&self, round: usize) -> (core::ops::Range<usize>, core::ops::Range<usize>) {
        let b = if self.config.shared_rounds { 0 } else { round };
        let n1 = self.mlp1.param_count();
        let n2 = self.mlp2.param_count();
        let start = b * (n1 + n2);
        (start..start + n1, start + n1..start + n1 + n2)
    }

    fn check(&self, values: &[f64], graph: &Graph) -> Result<()> {
        if values.len() != self.params.values.len() {
            return Err(Error::dim("parameter vector", self.params.values.len(), values.len()));
        }
        if graph.edge_features.len() != graph.edges.len() {
            return Err(Error::dim("edge features", graph.edges.len(), graph.edge_features.len()));
        }
        Ok(())
    }

    fn initial_states(&self, graph: &Graph) -> Vec<Vec<f64>> {
        graph
            .node_features
            .iter()
            .map(|f| {
                let mut x = vec![0.0; self.config.node_dim()];
                x[..STATIC_DIM].copy_from_slice(f);
                x
            })
            .collect()
    }

    fn round(&self, values: &[f64], graph: &Graph, round: usize, states: &[Vec<f64>]) -> (Vec<Vec<f64>>, RoundCache) {
        let (r1, r2) = self.block(round);
        let (p1, p2) = (&values[r1], &values[r2]);
        let hidden = self.config.hidden_dim;
        let mut input = Vec::with_capacity(self.mlp1.in_dim().max(self.mlp2.in_dim()));
        let edge_traces: Vec<Trace> = graph
            .edges
            .iter()
            .zip(&graph.edge_features)
            .map(|(&(j, _), e)| {
                input.clear();
                input.extend_from_slice(&states[j]);
                input.extend_from_slice(e);
                self.mlp1.forward(p1, &input)
            })
            .collect();
        let mut argmax = Vec::with_capacity(graph.node_count);
        let mut node_traces = Vec::with_capacity(graph.node_count);
        let mut next = Vec::with_capacity(graph.node_count);
        let mut messages = Vec::new();
        for i in 0..graph.node_count {
            messages.clear();
            for &e in &graph.adjacency[i] {
                messages.extend_from_slice(edge_traces[e].output());
            }
            let members = graph.adjacency[i].len();
            let (agg, arg) = set_max_forward(&messages, members, hidden);
            argmax.push(arg.into_iter().map(|a| a.map(|m| graph.adjacency[i][m])).collect());
            input.clear();
            input.extend_from_slice(&states[i]);
            input.extend_from_slice(&agg);
            let trace = self.mlp2.forward(p2, &input);
            let mut x = Vec::with_capacity(self.config.node_dim());
            x.extend_from_slice(&states[i][..STATIC_DIM]);
            x.extend(trace.output().iter().map(|s| s * graph.p_max));
            next.push(x);
            node_traces.push(trace);
        }
        (next, RoundCache { edge_traces, argmax, node_traces })
    }

    /// Power vector for every node of `graph`.
    pub fn forward_graph(&self, values: &[f64], graph: &Graph) -> Result<Vec<f64>> {
        self.check(values, graph)?;
        let mut states = self.initial_states(graph);
        for r in 0..self.config.num_rounds {
            states = self.round(values, graph, r, &states).0;
        }
        Ok(states.iter().map(|x| x[STATIC_DIM]).collect())
    }

    pub fn backward_graph(&self, values: &[f64], graph: &Graph, loss: &LossFn<'_>, grad: &mut [f64]) -> Result<f64> {
        self.check(values, graph)?;
        if grad.len() != values.len() {
            return Err(Error::dim("gradient buffer", values.len(), grad.len()));
        }
        let rounds = self.config.num_rounds;
        let mut history = Vec::with_capacity(rounds + 1);
        let mut caches = Vec::with_capacity(rounds);
        history.push(self.initial_states(graph));
        for r in 0..rounds {
            let (next, cache) = self.round(values, graph, r, &history[r]);
            history.push(next);
            caches.push(cache);
        }
        let p_hat: Vec<f64> = history[rounds].iter().map(|x| x[STATIC_DIM]).collect();
        let (value, g_out) = loss(&p_hat)?;
        if g_out.len() != graph.node_count {
            return Err(Error::dim("loss gradient", graph.node_count, g_out.len()));
        }

        let node_dim = self.config.node_dim();
        let hidden = self.config.hidden_dim;
        // gradient wrt the node states entering the current round
        let mut g_state: Vec<Vec<f64>> = g_out
            .iter()
            .map(|&g| {
                let mut v = vec![0.0; node_dim];
                v[STATIC_DIM] = g;
                v
            })
            .collect();
        for r in (0..rounds).rev() {
            let (r1, r2) = self.block(r);
            let cache = &caches[r];
            let states = &history[r];
            let mut g_prev = vec![vec![0.0; node_dim]; graph.node_count];
            let mut g_msg = vec![vec![0.0; hidden]; graph.edges.len()];
            for i in 0..graph.node_count {
                let up: Vec<f64> = g_state[i][STATIC_DIM..].iter().map(|g| g * graph.p_max).collect();
                if up.iter().all(|&g| g == 0.0) {
                    continue;
                }
                let g_in = self.mlp2.backward(&values[r2.clone()], &cache.node_traces[i], &up, &mut grad[r2.clone()]);
                for (a, b) in g_prev[i].iter_mut().zip(&g_in[..node_dim]) {
                    *a += b;
                }
                for (d, e) in cache.argmax[i].iter().enumerate() {
                    if let Some(e) = e {
                        g_msg[*e][d] += g_in[node_dim + d];
                    }
                }
            }
            for (e, &(j, _)) in graph.edges.iter().enumerate() {
                if g_msg[e].iter().all(|&g| g == 0.0) {
                    continue;
                }
                let g_in =
                    self.mlp1.backward(&values[r1.clone()], &cache.edge_traces[e], &g_msg[e], &mut grad[r1.clone()]);
                for (a, b) in g_prev[j].iter_mut().zip(&g_in[..node_dim]) {
                    *a += b;
                }
            }
            let _ = states;
            g_state = g_prev;
        }
        Ok(value)
    }
}

impl PowerModel for GnnModel {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    fn forward_with(&self, values: &[f64], instance: &NetworkInstance) -> Result<Vec<f64>> {
        self.forward_graph(values, &build_graph(instance))
    }

    fn backward_with(
        &self,
        values: &[f64],
        instance: &NetworkInstance,
        loss: &LossFn<'_>,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.backward_graph(values, &build_graph(instance), loss, grad)
    }
}
