//! Planted-anomaly generator.
//!
//! Nodes are grouped into clusters whose feature means are scaled one-hot
//! directions. Inlier hyperedges draw all members from one cluster; anomaly
//! hyperedges span at least two clusters, so their members' features are
//! diverse.
//!
//! Aggregation sums over incident hyperedges, so a node's embedding also
//! reflects its degree. Inlier members are therefore drawn so that degrees
//! inside a cluster stay level.

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Label, LabeledHypergraphDataset};
use crate::error::{HadError, Result};
use crate::hypergraph::Hypergraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub num_clusters: usize,
    pub nodes_per_cluster: usize,
    pub feature_dim: usize,
    pub num_inlier_edges: usize,
    pub num_anomaly_edges: usize,
    pub edge_size: usize,
    pub noise_sigma: f64,
    /// Length of each cluster mean vector.
    pub cluster_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_clusters: 2,
            nodes_per_cluster: 20,
            feature_dim: 8,
            num_inlier_edges: 60,
            num_anomaly_edges: 20,
            edge_size: 4,
            noise_sigma: 0.1,
            cluster_scale: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn num_nodes(&self) -> usize {
        self.num_clusters * self.nodes_per_cluster
    }

    /// Cluster of node `v`; nodes are numbered cluster by cluster.
    pub fn cluster_of(&self, node: usize) -> usize {
        node / self.nodes_per_cluster
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(HadError::InvalidConfig(format!("synthetic: {m}")));
        if self.num_clusters == 0 || self.nodes_per_cluster == 0 || self.edge_size == 0 {
            return fail("cluster count, cluster size and edge size must be positive");
        }
        if self.num_inlier_edges == 0 {
            return fail("need at least one inlier hyperedge");
        }
        if self.feature_dim < self.num_clusters {
            return fail("feature_dim must be >= num_clusters so cluster means are distinct");
        }
        if self.edge_size > self.nodes_per_cluster {
            return fail("edge_size exceeds nodes_per_cluster");
        }
        if self.num_anomaly_edges > 0 && (self.num_clusters < 2 || self.edge_size < 2) {
            return fail("anomalies need at least two clusters and edge_size >= 2");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail("noise_sigma must be finite and >= 0");
        }
        Ok(())
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<LabeledHypergraphDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.num_nodes();

    let noise = Normal::new(0.0, cfg.noise_sigma).expect("sigma validated");
    let mut features = Array2::zeros((n, cfg.feature_dim));
    for v in 0..n {
        features[[v, cfg.cluster_of(v)]] = cfg.cluster_scale;
        if cfg.noise_sigma > 0.0 {
            for j in 0..cfg.feature_dim {
                features[[v, j]] += noise.sample(&mut rng);
            }
        }
    }

    let mut edges: Vec<(Vec<usize>, Label)> =
        Vec::with_capacity(cfg.num_inlier_edges + cfg.num_anomaly_edges);
    // Members are dealt from a reshuffled per-cluster deck, which keeps node
    // degrees within a cluster nearly level.
    let mut decks: Vec<Vec<usize>> = vec![Vec::new(); cfg.num_clusters];
    for _ in 0..cfg.num_inlier_edges {
        let c = rng.random_range(0..cfg.num_clusters);
        let mut members = Vec::with_capacity(cfg.edge_size);
        while members.len() < cfg.edge_size {
            let deck = &mut decks[c];
            // Refill when only current members remain.
            if deck.iter().all(|v| members.contains(v)) {
                let base = c * cfg.nodes_per_cluster;
                let mut fresh: Vec<usize> = (base..base + cfg.nodes_per_cluster).collect();
                fresh.shuffle(&mut rng);
                deck.splice(0..0, fresh);
            }
            let pos = deck
                .iter()
                .rposition(|v| !members.contains(v))
                .expect("deck refilled");
            members.push(deck.remove(pos));
        }
        edges.push((members, Label::Inlier));
    }
    for _ in 0..cfg.num_anomaly_edges {
        let pair = index::sample(&mut rng, cfg.num_clusters, 2);
        let mut members: Vec<usize> = pair
            .iter()
            .map(|c| c * cfg.nodes_per_cluster + rng.random_range(0..cfg.nodes_per_cluster))
            .collect();
        while members.len() < cfg.edge_size {
            let v = rng.random_range(0..n);
            if !members.contains(&v) {
                members.push(v);
            }
        }
        edges.push((members, Label::Anomaly));
    }
    edges.shuffle(&mut rng);

    let (raw, labels): (Vec<_>, Vec<_>) = edges.into_iter().unzip();
    let h = Hypergraph::new(n, raw, features)?;
    LabeledHypergraphDataset::new(format!("synthetic-{}", cfg.seed), h, labels)
}
