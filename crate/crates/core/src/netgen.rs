//! K-user interference-channel instances, their graph view, and labelled
//! datasets.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::oracles::OracleName;
use crate::rng::SeedKey;
#[allow(unused_imports)]
use crate::float::*;

/// Channel gains `gains[i][j] = |h_ij|²` (row-major), noise power and power
/// ceiling of one interference channel.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkInstance {
    pub k: usize,
    pub gains: Vec<f64>,
    pub noise_power: f64,
    pub p_max: f64,
}

impl NetworkInstance {
    pub fn new(k: usize, gains: Vec<f64>, noise_power: f64, p_max: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        if gains.len() != k * k {
            return Err(Error::dim("gains", k * k, gains.len()));
        }
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::domain(alloc::format!("invalid gain {g}")));
        }
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::domain("noise_power must be positive"));
        }
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(Error::domain("p_max must be positive"));
        }
        Ok(Self { k, gains, noise_power, p_max })
    }

    /// Gain from transmitter `j` to receiver `i`.
    #[inline]
    pub fn gain(&self, i: usize, j: usize) -> f64 {
        self.gains[i * self.k + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.gains[i * self.k..(i + 1) * self.k]
    }

    /// Relabels users so that new user `a` is old user `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.k)?;
        let k = self.k;
        let mut gains = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                gains[a * k + b] = self.gain(perm[a], perm[b]);
            }
        }
        Ok(Self { k, gains, noise_power: self.noise_power, p_max: self.p_max })
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::dim("permutation", n, perm.len()));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || core::mem::replace(&mut seen[p], true) {
            return Err(Error::domain("not a permutation"));
        }
    }
    Ok(())
}

/// Applies `perm` to per-user values: `out[a] = values[perm[a]]`.
pub fn permute_values<T: Clone>(values: &[T], perm: &[usize]) -> Vec<T> {
    perm.iter().map(|&p| values[p].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case"))]
pub enum ChannelModel {
    /// `gains[i][j] = |g|²`, `g ~ CN(0, 1)`.
    #[default]
    RayleighIid,
    /// Transmitters uniform in a square, each receiver at a uniform distance
    /// in `[pair_min, pair_max]` from its transmitter; gain is
    /// `max(d, pair_min)^(−exponent)` times Rayleigh fading.
    Geometric { side: f64, pair_min: f64, pair_max: f64, path_loss_exponent: f64 },
}

impl ChannelModel {
    pub fn geometric_default() -> Self {
        ChannelModel::Geometric { side: 10.0, pair_min: 1.0, pair_max: 2.0, path_loss_exponent: 2.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ChannelModel::RayleighIid => "rayleigh_iid",
            ChannelModel::Geometric { .. } => "geometric",
        }
    }
}

impl core::str::FromStr for ChannelModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rayleigh_iid" | "rayleigh" => Ok(ChannelModel::RayleighIid),
            "geometric" => Ok(ChannelModel::geometric_default()),
            other => Err(Error::config(alloc::format!(
                "unknown channel model `{other}` (expected rayleigh_iid, geometric)"
            ))),
        }
    }
}

/// Draws one instance with unit noise and unit power ceiling.
pub fn sample_instance(k: usize, channel_model: &ChannelModel, key: SeedKey) -> Result<NetworkInstance> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    let mut s = key.stream();
    let gains = match *channel_model {
        ChannelModel::RayleighIid => (0..k * k).map(|_| s.complex_normal().norm_sqr()).collect(),
        ChannelModel::Geometric { side, pair_min, pair_max, path_loss_exponent } => {
            if !(side > 0.0 && pair_min > 0.0 && pair_max >= pair_min && path_loss_exponent >= 0.0) {
                return Err(Error::config("invalid geometric channel parameters"));
            }
            let tx: Vec<(f64, f64)> = (0..k).map(|_| (side * s.uniform(), side * s.uniform())).collect();
            let rx: Vec<(f64, f64)> = tx
                .iter()
                .map(|&(x, y)| {
                    let d = pair_min + (pair_max - pair_min) * s.uniform();
                    let a = 2.0 * core::f64::consts::PI * s.uniform();
                    (x + d * a.cos(), y + d * a.sin())
                })
                .collect();
            let mut gains = Vec::with_capacity(k * k);
            for r in &rx {
                for t in &tx {
                    let d = ((r.0 - t.0).powi(2) + (r.1 - t.1).powi(2)).sqrt().max(pair_min);
                    gains.push(d.powf(-path_loss_exponent) * s.complex_normal().norm_sqr());
                }
            }
            gains
        }
    };
    NetworkInstance::new(k, gains, 1.0, 1.0)
}

/// Node/edge view of an instance for message passing.
///
/// Edges are directed `j → i` for all `j ≠ i`, grouped by receiving node and
/// ordered by sender. Node features are `(gains[i][i], weight)`, edge
/// features are `(gains[i][j], gains[j][i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub node_count: usize,
    pub node_features: Vec<[f64; 2]>,
    pub edges: Vec<(usize, usize)>,
    pub edge_features: Vec<[f64; 2]>,
    /// `adjacency[i]` lists the edge indices arriving at node `i`.
    pub adjacency: Vec<Vec<usize>>,
    pub p_max: f64,
}

impl Graph {
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().map(move |&e| self.edges[e].0)
    }

    /// Relabels nodes so that new node `a` is old node `perm[a]`, keeping the
    /// canonical edge order.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.node_count)?;
        let n = self.node_count;
        let mut lookup = vec![usize::MAX; n * n];
        for (e, &(j, i)) in self.edges.iter().enumerate() {
            lookup[j * n + i] = e;
        }
        let mut g = Graph {
            node_count: n,
            node_features: permute_values(&self.node_features, perm),
            edges: Vec::with_capacity(self.edges.len()),
            edge_features: Vec::with_capacity(self.edges.len()),
            adjacency: vec![Vec::new(); n],
            p_max: self.p_max,
        };
        for a in 0..n {
            for b in 0..n {
                let old = lookup[perm[b] * n + perm[a]];
                if old != usize::MAX {
                    g.adjacency[a].push(g.edges.len());
                    g.edges.push((b, a));
                    g.edge_features.push(self.edge_features[old]);
                }
            }
        }
        Ok(g)
    }
}

pub fn build_graph(instance: &NetworkInstance) -> Graph {
    let k = instance.k;
    let mut g = Graph {
        node_count: k,
        node_features: (0..k).map(|i| [instance.gain(i, i), 1.0]).collect(),
        edges: Vec::with_capacity(k * k.saturating_sub(1)),
        edge_features: Vec::with_capacity(k * k.saturating_sub(1)),
        adjacency: vec![Vec::new(); k],
        p_max: instance.p_max,
    };
    for i in 0..k {
        for j in 0..k {
            if i != j {
                g.adjacency[i].push(g.edges.len());
                g.edges.push((j, i));
                g.edge_features.push([instance.gain(i, j), instance.gain(j, i)]);
            }
        }
    }
    g
}

/// Provenance recorded with every dataset.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetMeta {
    pub channel_model: ChannelModel,
    pub seed: SeedKey,
    pub oracle: OracleName,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub instances: Vec<NetworkInstance>,
    pub labels: Option<Vec<Vec<f64>>>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(instances: Vec<NetworkInstance>, labels: Option<Vec<Vec<f64>>>, meta: DatasetMeta) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != instances.len() {
                return Err(Error::dim("labels", instances.len(), labels.len()));
            }
            for (i, (inst, p)) in instances.iter().zip(labels).enumerate() {
                if p.len() != inst.k {
                    return Err(Error::dim("label", inst.k, p.len()));
                }
                if p.iter().any(|v| !(0.0..=inst.p_max).contains(v)) {
                    return Err(Error::domain(alloc::format!("label {i} is infeasible")));
                }
            }
        }
        Ok(Self { instances, labels, meta })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }
}

/// Key of instance `index` in a dataset generated from `key`.
pub fn instance_key(key: SeedKey, index: usize) -> SeedKey {
    key.with_stream(key.stream_index.wrapping_add(index as u64))
}

/// Generates `n` instances on consecutive streams of `key` and labels them
/// with `oracle`.
pub fn gen_dataset(n: usize, k: usize, channel_model: &ChannelModel, oracle: OracleName, key: SeedKey) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let instances = (0..n)
        .map(|i| sample_instance(k, channel_model, instance_key(key, i)))
        .collect::<Result<Vec<_>>>()?;
    let labels = label_instances(&instances, oracle)?;
    let meta = DatasetMeta {
        channel_model: channel_model.clone(),
        seed: key,
        oracle,
        note: String::from("unit noise, p_max = 1, unweighted sum rate"),
    };
    Dataset::new(instances, labels, meta)
}

/// Oracle labels for each instance, or `None` for [`OracleName::None`].
pub fn label_instances(instances: &[NetworkInstance], oracle: OracleName) -> Result<Option<Vec<Vec<f64>>>> {
    if oracle == OracleName::None {
        return Ok(None);
    }
    instances
        .iter()
        .enumerate()
        .map(|(i, inst)| match oracle.solve(inst) {
            Ok(Some(a)) => Ok(a.p),
            Ok(None) => unreachable!("oracle is not None"),
            Err(e) => Err(e.at_index(i)),
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{brute_force, sum_rate};

    #[test]
    fn single_user_rayleigh_mean() {
        let n = 100_000;
        let mean = (0..n)
            .map(|i| sample_instance(1, &ChannelModel::RayleighIid, SeedKey::new(3, i)).unwrap().gains[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_instance(3, &ChannelModel::RayleighIid, SeedKey::new(5, 2)).unwrap();
        let b = sample_instance(3, &ChannelModel::RayleighIid, SeedKey::new(5, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_exponent_geometric_is_rayleigh() {
        let model = ChannelModel::Geometric { side: 10.0, pair_min: 1.0, pair_max: 2.0, path_loss_exponent: 0.0 };
        let n = 20_000;
        let gains: Vec<f64> = (0..n)
            .flat_map(|i| sample_instance(2, &model, SeedKey::new(8, i)).unwrap().gains)
            .collect();
        let mean = gains.iter().sum::<f64>() / gains.len() as f64;
        let second = gains.iter().map(|g| g * g).sum::<f64>() / gains.len() as f64;
        // exponential(1): E[g] = 1, E[g²] = 2
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        assert!((second - 2.0).abs() < 0.08, "second moment {second}");
        let tail = gains.iter().filter(|&&g| g > 1.0).count() as f64 / gains.len() as f64;
        assert!((tail - (-1.0f64).exp()).abs() < 0.01, "tail {tail}");
    }

    #[test]
    fn unknown_model_is_a_config_error() {
        assert!(matches!("bogus".parse::<ChannelModel>(), Err(Error::Config(_))));
    }

    #[test]
    fn graph_sizes() {
        let g1 = build_graph(&sample_instance(1, &ChannelModel::RayleighIid, SeedKey::new(0, 0)).unwrap());
        assert_eq!((g1.node_count, g1.edges.len()), (1, 0));
        let inst = sample_instance(3, &ChannelModel::RayleighIid, SeedKey::new(0, 1)).unwrap();
        let g3 = build_graph(&inst);
        assert_eq!(g3.edges.len(), 6);
        for (e, &(j, i)) in g3.edges.iter().enumerate() {
            assert_eq!(g3.edge_features[e], [inst.gain(i, j), inst.gain(j, i)]);
            assert!(g3.adjacency[i].contains(&e));
        }
        assert_eq!(g3.neighbors(0).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn graph_permutation_commutes() {
        let inst = sample_instance(4, &ChannelModel::RayleighIid, SeedKey::new(0, 2)).unwrap();
        let perm = [2, 0, 3, 1];
        let lhs = build_graph(&inst).permuted(&perm).unwrap();
        let rhs = build_graph(&inst.permuted(&perm).unwrap());
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn unlabeled_dataset() {
        let d = gen_dataset(10, 3, &ChannelModel::RayleighIid, OracleName::None, SeedKey::new(1, 0)).unwrap();
        assert_eq!(d.len(), 10);
        assert!(d.labels.is_none());
    }

    #[test]
    fn wmmse_labels_are_near_optimal() {
        let d = gen_dataset(100, 3, &ChannelModel::RayleighIid, OracleName::Wmmse, SeedKey::new(2, 0)).unwrap();
        let labels = d.labels.as_ref().unwrap();
        let good = d
            .instances
            .iter()
            .zip(labels)
            .filter(|(inst, p)| {
                let best = brute_force(inst, 11).unwrap().achieved_rate;
                sum_rate(inst, p).unwrap() >= 0.98 * best
            })
            .count();
        assert!(good >= 90, "{good}/100 within 2%");
    }

    #[test]
    fn dataset_rejects_bad_labels() {
        let inst = sample_instance(2, &ChannelModel::RayleighIid, SeedKey::new(0, 0)).unwrap();
        let meta = DatasetMeta {
            channel_model: ChannelModel::RayleighIid,
            seed: SeedKey::new(0, 0),
            oracle: OracleName::Wmmse,
            note: String::new(),
        };
        assert!(Dataset::new(vec![inst.clone()], Some(vec![vec![1.5, 0.0]]), meta.clone()).is_err());
        assert!(Dataset::new(vec![inst], Some(vec![]), meta).is_err());
    }
}
