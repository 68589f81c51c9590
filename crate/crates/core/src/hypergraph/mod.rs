//! Hypergraph data model: a node universe, a list of hyperedges (each a
//! sorted set of node indices) and a dense node feature matrix.
//!
//! The incidence matrix `A_H` (|E| x |V|) is never materialized. The two
//! aggregation kernels walk the edge list (`A_H * P`) or its transpose
//! (`A_H^T * Q`), which are adjoint to each other; the backward pass of the
//! model relies on that duality.

pub mod io;

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{HadError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    num_nodes: usize,
    edges: Vec<Vec<usize>>,
    features: Arc<Array2<f64>>,
    node_to_edges: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Validates and normalizes `raw_edges`: node indices are sorted and
    /// deduplicated, so an edge is treated as a set.
    pub fn new(
        num_nodes: usize,
        raw_edges: Vec<Vec<usize>>,
        features: Array2<f64>,
    ) -> Result<Self> {
        Self::with_shared_features(num_nodes, raw_edges, Arc::new(features))
    }

    pub fn with_shared_features(
        num_nodes: usize,
        raw_edges: Vec<Vec<usize>>,
        features: Arc<Array2<f64>>,
    ) -> Result<Self> {
        if features.nrows() != num_nodes {
            return Err(HadError::FeatureRowMismatch {
                expected: num_nodes,
                found: features.nrows(),
            });
        }
        let mut edges = raw_edges;
        for (i, edge) in edges.iter_mut().enumerate() {
            edge.sort_unstable();
            edge.dedup();
            if edge.is_empty() {
                return Err(HadError::EmptyEdge { edge: i });
            }
            if let Some(&last) = edge.last() {
                if last >= num_nodes {
                    return Err(HadError::NodeIndexOutOfRange {
                        node: last,
                        num_nodes,
                        edge: Some(i),
                    });
                }
            }
        }
        let mut node_to_edges = vec![Vec::new(); num_nodes];
        for (i, edge) in edges.iter().enumerate() {
            for &v in edge {
                node_to_edges[v].push(i);
            }
        }
        Ok(Self {
            num_nodes,
            edges,
            features,
            node_to_edges,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &[usize] {
        &self.edges[i]
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn shared_features(&self) -> Arc<Array2<f64>> {
        Arc::clone(&self.features)
    }

    /// Sorted indices of the hyperedges containing `node` (`E_v`).
    pub fn edges_of(&self, node: usize) -> &[usize] {
        &self.node_to_edges[node]
    }

    pub fn incidence(&self) -> IncidenceView<'_> {
        IncidenceView { graph: self }
    }

    /// The same node universe and features with only the listed hyperedges,
    /// in the given order.
    pub fn restrict_edges(&self, edge_ids: &[usize]) -> Result<Self> {
        let edges = edge_ids
            .iter()
            .map(|&i| {
                self.edges
                    .get(i)
                    .cloned()
                    .ok_or(HadError::DimensionMismatch {
                        context: "restrict_edges edge index",
                        expected: self.edges.len(),
                        found: i,
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_shared_features(self.num_nodes, edges, self.shared_features())
    }

    /// `A_H * node_matrix`: row `i` is the sum of the rows of `node_matrix`
    /// indexed by `edges[i]`.
    pub fn edge_sum_aggregate(&self, node_matrix: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if node_matrix.nrows() != self.num_nodes {
            return Err(HadError::DimensionMismatch {
                context: "edge_sum_aggregate rows",
                expected: self.num_nodes,
                found: node_matrix.nrows(),
            });
        }
        let mut out = Array2::zeros((self.edges.len(), node_matrix.ncols()));
        for (mut row, edge) in out.axis_iter_mut(Axis(0)).zip(&self.edges) {
            for &v in edge {
                row += &node_matrix.row(v);
            }
        }
        Ok(out)
    }

    /// `A_H^T * edge_matrix`: row `v` is the sum of the rows of `edge_matrix`
    /// indexed by `E_v`. Nodes in no hyperedge get a zero row.
    pub fn node_sum_aggregate(&self, edge_matrix: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if edge_matrix.nrows() != self.edges.len() {
            return Err(HadError::DimensionMismatch {
                context: "node_sum_aggregate rows",
                expected: self.edges.len(),
                found: edge_matrix.nrows(),
            });
        }
        let mut out = Array2::zeros((self.num_nodes, edge_matrix.ncols()));
        for (mut row, incident) in out.axis_iter_mut(Axis(0)).zip(&self.node_to_edges) {
            for &e in incident {
                row += &edge_matrix.row(e);
            }
        }
        Ok(out)
    }
}

/// Logical 0/1 incidence matrix over a [`Hypergraph`].
#[derive(Debug, Clone, Copy)]
pub struct IncidenceView<'a> {
    graph: &'a Hypergraph,
}

impl<'a> IncidenceView<'a> {
    pub fn shape(&self) -> (usize, usize) {
        (self.graph.num_edges(), self.graph.num_nodes())
    }

    pub fn contains(&self, edge: usize, node: usize) -> bool {
        self.graph
            .edges
            .get(edge)
            .is_some_and(|e| e.binary_search(&node).is_ok())
    }

    pub fn nnz(&self) -> usize {
        self.graph.edges.iter().map(Vec::len).sum()
    }

    /// Nonzero `(edge, node)` coordinates in row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize)> + 'a {
        self.graph
            .edges
            .iter()
            .enumerate()
            .flat_map(|(i, e)| e.iter().map(move |&v| (i, v)))
    }
}
