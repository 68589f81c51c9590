//! The hyperedge anomaly detection network.
//!
//! Node embeddings come from `L` rounds of two-stage message passing:
//! `Z_V^0 = VNN^0(X)`, then for `l = 1..L`
//! `Z_E^l = ENN^l(A_H Z_V^{l-1})` and `Z_V^l = VNN^l(A_H^T Z_E^l)`.
//! A hyperedge embedding is pooled from the final node embeddings of its
//! members (element-wise max minus element-wise min, or the mean for the
//! ablation), the centroid is the mean hyperedge embedding, a hyperedge's
//! anomaly score is its Euclidean distance to the centroid and the loss is
//! the mean score.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HadError, Result};
use crate::hypergraph::Hypergraph;
use crate::nn::{Activation, CheckpointReader, Mlp, MlpTrace, ParameterStore};

/// Below this distance the norm's subgradient is taken to be zero.
pub const NORM_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[serde(rename = "maxmin")]
    MaxMin,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidMode {
    /// Recomputed from the current embeddings on every forward pass.
    Dynamic,
    /// Computed once from the initial network and frozen.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub embedding_dim: usize,
    pub mlp_depth: usize,
    pub pooling: Pooling,
    pub centroid: CentroidMode,
    /// Stop gradients from flowing through a dynamic centroid.
    pub detach_centroid: bool,
    /// Activation of the first layer of `VNN^0`.
    pub input_activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_layers: 2,
            hidden_dim: 64,
            embedding_dim: 64,
            mlp_depth: 1,
            pooling: Pooling::MaxMin,
            centroid: CentroidMode::Dynamic,
            detach_centroid: false,
            input_activation: Activation::Relu,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0
            || self.hidden_dim == 0
            || self.embedding_dim == 0
            || self.mlp_depth == 0
        {
            return Err(HadError::InvalidConfig(
                "num_layers, hidden_dim, embedding_dim and mlp_depth must all be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Output width of `VNN^l`.
    pub fn node_dim(&self, layer: usize) -> usize {
        if layer + 1 == self.num_layers {
            self.embedding_dim
        } else {
            self.hidden_dim
        }
    }

    /// Seeded Glorot initialization of every MLP.
    pub fn init_parameters(&self, feature_dim: usize, seed: u64) -> Result<ParameterStore> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vnn = Vec::with_capacity(self.num_layers);
        let mut enn = Vec::with_capacity(self.num_layers - 1);
        vnn.push(Mlp::glorot(
            feature_dim,
            self.node_dim(0),
            self.mlp_depth,
            self.input_activation,
            &mut rng,
        )?);
        for l in 1..self.num_layers {
            enn.push(Mlp::glorot(
                self.node_dim(l - 1),
                self.hidden_dim,
                self.mlp_depth,
                Activation::Relu,
                &mut rng,
            )?);
            vnn.push(Mlp::glorot(
                self.hidden_dim,
                self.node_dim(l),
                self.mlp_depth,
                Activation::Relu,
                &mut rng,
            )?);
        }
        ParameterStore::new(vnn, enn)
    }

    fn check_parameters(&self, params: &ParameterStore, feature_dim: usize) -> Result<()> {
        if params.num_layers() != self.num_layers {
            return Err(HadError::DimensionMismatch {
                context: "number of message-passing layers",
                expected: self.num_layers,
                found: params.num_layers(),
            });
        }
        if params.input_dim() != feature_dim {
            return Err(HadError::DimensionMismatch {
                context: "feature dimension vs first node MLP input",
                expected: params.input_dim(),
                found: feature_dim,
            });
        }
        Ok(())
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    vnn: Vec<MlpTrace>,
    enn: Vec<MlpTrace>,
    pooling: Pooling,
    pooled: Array2<f64>,
    argmax: Array2<usize>,
    argmin: Array2<usize>,
    centroid: Array1<f64>,
    centroid_trainable: bool,
    scores: Vec<f64>,
    loss: f64,
}

impl ForwardTrace {
    /// `Z_V^l`.
    pub fn node_embeddings(&self, layer: usize) -> &Array2<f64> {
        self.vnn[layer].output()
    }

    pub fn final_node_embeddings(&self) -> &Array2<f64> {
        self.vnn.last().expect("at least one layer").output()
    }

    /// `Z_E^l` for `l >= 1`.
    pub fn edge_embeddings(&self, layer: usize) -> &Array2<f64> {
        self.enn[layer - 1].output()
    }

    /// Pooled final-layer hyperedge embeddings, one row per hyperedge.
    pub fn pooled(&self) -> &Array2<f64> {
        &self.pooled
    }

    /// Node index holding the element-wise maximum for each
    /// (hyperedge, dimension); ties go to the lowest index.
    pub fn argmax(&self) -> &Array2<usize> {
        &self.argmax
    }

    pub fn argmin(&self) -> &Array2<usize> {
        &self.argmin
    }

    pub fn centroid(&self) -> &Array1<f64> {
        &self.centroid
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn to_trained_model(&self) -> TrainedModel {
        TrainedModel {
            node_embeddings: self.final_node_embeddings().clone(),
            centroid: self.centroid.clone(),
            pooling: self.pooling,
        }
    }
}

/// Pools one hyperedge's node rows into `out`, recording arg-extrema.
fn pool_into(
    z: ArrayView2<'_, f64>,
    nodes: &[usize],
    pooling: Pooling,
    out: &mut [f64],
    argmax: &mut [usize],
    argmin: &mut [usize],
) {
    let first = nodes[0];
    match pooling {
        Pooling::MaxMin => {
            for j in 0..out.len() {
                let (mut hi, mut lo) = (z[[first, j]], z[[first, j]]);
                let (mut hi_at, mut lo_at) = (first, first);
                for &v in &nodes[1..] {
                    let x = z[[v, j]];
                    if x > hi {
                        hi = x;
                        hi_at = v;
                    }
                    if x < lo {
                        lo = x;
                        lo_at = v;
                    }
                }
                out[j] = hi - lo;
                argmax[j] = hi_at;
                argmin[j] = lo_at;
            }
        }
        Pooling::Mean => {
            let n = nodes.len() as f64;
            for j in 0..out.len() {
                let mut acc = 0.0;
                for &v in nodes {
                    acc += z[[v, j]];
                }
                out[j] = acc / n;
                argmax[j] = first;
                argmin[j] = first;
            }
        }
    }
}

fn distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Arithmetic mean of the rows.
pub fn compute_centroid(edge_embeddings: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let n = edge_embeddings.nrows();
    if n == 0 {
        return Err(HadError::EmptyEdgeSet);
    }
    let mut acc = Array1::zeros(edge_embeddings.ncols());
    for row in edge_embeddings.rows() {
        acc += &row;
    }
    Ok(acc / n as f64)
}

/// Runs the network over `h`. With `frozen_centroid`, that vector is used
/// as `C_H` instead of the mean of the pooled embeddings.
pub fn forward(
    h: &Hypergraph,
    params: &ParameterStore,
    cfg: &ModelConfig,
    frozen_centroid: Option<&Array1<f64>>,
) -> Result<ForwardTrace> {
    cfg.check_parameters(params, h.feature_dim())?;
    if h.num_edges() == 0 {
        return Err(HadError::EmptyEdgeSet);
    }
    let mut vnn = Vec::with_capacity(cfg.num_layers);
    let mut enn = Vec::with_capacity(cfg.num_layers - 1);
    vnn.push(params.vnn()[0].forward(h.features().clone())?);
    for l in 1..cfg.num_layers {
        let to_edges = h.edge_sum_aggregate(vnn[l - 1].output().view())?;
        enn.push(params.enn()[l - 1].forward(to_edges)?);
        let to_nodes = h.node_sum_aggregate(enn[l - 1].output().view())?;
        vnn.push(params.vnn()[l].forward(to_nodes)?);
    }

    let z = vnn.last().expect("nonempty").output().view();
    let (num_edges, dim) = (h.num_edges(), z.ncols());
    let mut pooled = Array2::zeros((num_edges, dim));
    let mut argmax = Array2::zeros((num_edges, dim));
    let mut argmin = Array2::zeros((num_edges, dim));
    for (i, nodes) in h.edges().iter().enumerate() {
        pool_into(
            z,
            nodes,
            cfg.pooling,
            pooled.row_mut(i).as_slice_mut().expect("row-major"),
            argmax.row_mut(i).as_slice_mut().expect("row-major"),
            argmin.row_mut(i).as_slice_mut().expect("row-major"),
        );
    }

    let centroid = match frozen_centroid {
        Some(c) => {
            if c.len() != dim {
                return Err(HadError::DimensionMismatch {
                    context: "frozen centroid length",
                    expected: dim,
                    found: c.len(),
                });
            }
            c.clone()
        }
        None => compute_centroid(pooled.view())?,
    };
    let scores: Vec<f64> = pooled
        .rows()
        .into_iter()
        .map(|row| distance(row, centroid.view()))
        .collect();
    let loss = scores.iter().sum::<f64>() / num_edges as f64;
    let centroid_trainable =
        frozen_centroid.is_none() && cfg.centroid == CentroidMode::Dynamic && !cfg.detach_centroid;
    Ok(ForwardTrace {
        vnn,
        enn,
        pooling: cfg.pooling,
        pooled,
        argmax,
        argmin,
        centroid,
        centroid_trainable,
        scores,
        loss,
    })
}

/// Accumulates the gradient of the trace's loss into `params`.
pub fn backward(
    h: &Hypergraph,
    params: &mut ParameterStore,
    cfg: &ModelConfig,
    trace: &ForwardTrace,
) -> Result<()> {
    cfg.check_parameters(params, h.feature_dim())?;
    if trace.vnn.len() != params.num_layers()
        || trace.enn.len() + 1 != params.num_layers()
        || trace.pooled.nrows() != h.num_edges()
        || trace.vnn[0].input().nrows() != h.num_nodes()
        || trace.pooling != cfg.pooling
    {
        return Err(HadError::TraceMismatch(
            "trace was produced for a different hypergraph or configuration".into(),
        ));
    }
    let num_edges = h.num_edges();
    let inv_edges = 1.0 / num_edges as f64;

    // d loss / d pooled embedding.
    let mut grad_pooled = &trace.pooled - &trace.centroid;
    for (mut row, &score) in grad_pooled.rows_mut().into_iter().zip(&trace.scores) {
        row *= inv_edges / score.max(NORM_EPSILON);
    }
    if trace.centroid_trainable {
        // C_H is the mean of the pooled rows, so each row also receives
        // 1/|E| of the centroid's gradient (-sum of the direct terms).
        let shared = grad_pooled.sum_axis(ndarray::Axis(0)) * inv_edges;
        grad_pooled -= &shared;
    }

    let z = trace.final_node_embeddings();
    let mut grad_nodes = Array2::zeros(z.raw_dim());
    for (i, nodes) in h.edges().iter().enumerate() {
        let g = grad_pooled.row(i);
        match cfg.pooling {
            Pooling::MaxMin => {
                for j in 0..g.len() {
                    grad_nodes[[trace.argmax[[i, j]], j]] += g[j];
                    grad_nodes[[trace.argmin[[i, j]], j]] -= g[j];
                }
            }
            Pooling::Mean => {
                let share = 1.0 / nodes.len() as f64;
                for &v in nodes {
                    for j in 0..g.len() {
                        grad_nodes[[v, j]] += g[j] * share;
                    }
                }
            }
        }
    }

    for l in (1..cfg.num_layers).rev() {
        let grad_node_input = params.vnn_mut()[l].backward(&trace.vnn[l], grad_nodes)?;
        let grad_edges = h.edge_sum_aggregate(grad_node_input.view())?;
        let grad_edge_input = params.enn_mut()[l - 1].backward(&trace.enn[l - 1], grad_edges)?;
        grad_nodes = h.node_sum_aggregate(grad_edge_input.view())?;
    }
    params.vnn_mut()[0].backward(&trace.vnn[0], grad_nodes)?;
    Ok(())
}

/// Final node embeddings and centroid: all that is needed to score any
/// candidate hyperedge over the training node universe.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub node_embeddings: Array2<f64>,
    pub centroid: Array1<f64>,
    pub pooling: Pooling,
}

const MODEL_MAGIC: &[u8; 8] = b"HADMODEL";

impl TrainedModel {
    pub fn num_nodes(&self) -> usize {
        self.node_embeddings.nrows()
    }

    pub fn embedding_dim(&self) -> usize {
        self.node_embeddings.ncols()
    }

    /// Pooled embedding of an arbitrary node set.
    pub fn embed(&self, candidate: &[usize]) -> Result<Array1<f64>> {
        if candidate.is_empty() {
            return Err(HadError::EmptyCandidate);
        }
        if let Some(&bad) = candidate.iter().find(|&&v| v >= self.num_nodes()) {
            return Err(HadError::NodeIndexOutOfRange {
                node: bad,
                num_nodes: self.num_nodes(),
                edge: None,
            });
        }
        let mut nodes = candidate.to_vec();
        nodes.sort_unstable();
        nodes.dedup();
        let dim = self.embedding_dim();
        let mut out = vec![0.0; dim];
        let (mut hi, mut lo) = (vec![0; dim], vec![0; dim]);
        pool_into(
            self.node_embeddings.view(),
            &nodes,
            self.pooling,
            &mut out,
            &mut hi,
            &mut lo,
        );
        Ok(Array1::from(out))
    }

    /// Anomaly score: distance of the pooled embedding to the centroid.
    pub fn score(&self, candidate: &[usize]) -> Result<f64> {
        let e = self.embed(candidate)?;
        Ok(distance(e.view(), self.centroid.view()))
    }

    pub fn score_all<'a, I>(&self, candidates: I) -> Result<Vec<f64>>
    where
        I: IntoIterator<Item = &'a [usize]>,
    {
        candidates.into_iter().map(|c| self.score(c)).collect()
    }

    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&crate::nn::CHECKPOINT_VERSION.to_le_bytes())?;
        let pooling = match self.pooling {
            Pooling::MaxMin => 0u8,
            Pooling::Mean => 1u8,
        };
        w.write_all(&[pooling])?;
        w.write_all(&(self.num_nodes() as u64).to_le_bytes())?;
        w.write_all(&(self.embedding_dim() as u64).to_le_bytes())?;
        for x in self.node_embeddings.iter().chain(self.centroid.iter()) {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut reader = CheckpointReader::new(&mut r);
        reader.expect_magic(MODEL_MAGIC)?;
        let pooling = match reader.u8()? {
            0 => Pooling::MaxMin,
            1 => Pooling::Mean,
            c => return Err(HadError::Checkpoint(format!("unknown pooling code {c}"))),
        };
        let num_nodes = reader.u64()? as usize;
        let dim = reader.u64()? as usize;
        let node_embeddings =
            Array2::from_shape_vec((num_nodes, dim), reader.f64s(num_nodes * dim)?)
                .expect("length matches");
        let centroid = Array1::from(reader.f64s(dim)?);
        reader.expect_end()?;
        Ok(Self {
            node_embeddings,
            centroid,
            pooling,
        })
    }
}

/// Scores a candidate hyperedge, which need not be one of the training
/// hyperedges.
pub fn score_hyperedge(candidate: &[usize], model: &TrainedModel) -> Result<f64> {
    model.score(candidate)
}
