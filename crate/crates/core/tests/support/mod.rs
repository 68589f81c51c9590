//! Straight-line reference implementation of the network, plus random
//! instance generation for property tests. Everything here is nested loops
//! over `Vec<f64>` so it shares no code with the library's matrix path.
#![allow(dead_code, clippy::needless_range_loop)]

use had_core::nn::{Activation, ParameterStore};
use had_core::{CentroidMode, Hypergraph, ModelConfig, Pooling};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct RefLayer {
    /// `w[i][j]` maps input `i` to output `j`.
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub relu: bool,
}

pub struct RefNet {
    pub vnn: Vec<Vec<RefLayer>>,
    pub enn: Vec<Vec<RefLayer>>,
}

impl RefNet {
    pub fn from_store(store: &ParameterStore) -> Self {
        let convert = |mlps: &[had_core::nn::Mlp]| {
            mlps.iter()
                .map(|m| {
                    m.layers()
                        .iter()
                        .map(|l| RefLayer {
                            w: l.weight().rows().into_iter().map(|r| r.to_vec()).collect(),
                            b: l.bias().to_vec(),
                            relu: l.activation() == Activation::Relu,
                        })
                        .collect()
                })
                .collect()
        };
        Self {
            vnn: convert(store.vnn()),
            enn: convert(store.enn()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefOutput {
    pub loss: f64,
    pub scores: Vec<f64>,
    pub pooled: Vec<Vec<f64>>,
    pub centroid: Vec<f64>,
    /// Smallest distance from any ReLU pre-activation to the kink at 0.
    pub kink_margin: f64,
    /// Smallest gap between an edge's extreme value and the runner-up in
    /// the same dimension.
    pub extremum_gap: f64,
}

/// Applies one MLP row by row, tracking the distance to ReLU kinks.
fn apply_mlp(layers: &[RefLayer], rows: Vec<Vec<f64>>, kink_margin: &mut f64) -> Vec<Vec<f64>> {
    let mut rows = rows;
    for layer in layers {
        let mut next = Vec::with_capacity(rows.len());
        for row in &rows {
            let mut out = vec![0.0; layer.b.len()];
            for j in 0..out.len() {
                let mut s = layer.b[j];
                for i in 0..row.len() {
                    s += row[i] * layer.w[i][j];
                }
                if layer.relu {
                    *kink_margin = kink_margin.min(s.abs());
                    s = if s > 0.0 { s } else { 0.0 };
                }
                out[j] = s;
            }
            next.push(out);
        }
        rows = next;
    }
    rows
}

pub fn reference_forward(
    num_nodes: usize,
    edges: &[Vec<usize>],
    x: &[Vec<f64>],
    net: &RefNet,
    pooling: Pooling,
    fixed_centroid: Option<&[f64]>,
) -> RefOutput {
    let mut kink_margin = f64::INFINITY;
    let mut z = apply_mlp(&net.vnn[0], x.to_vec(), &mut kink_margin);
    for l in 1..net.vnn.len() {
        let width = z[0].len();
        let mut to_edges = Vec::new();
        for e in edges {
            let mut s = vec![0.0; width];
            for &v in e {
                for k in 0..width {
                    s[k] += z[v][k];
                }
            }
            to_edges.push(s);
        }
        let ze = apply_mlp(&net.enn[l - 1], to_edges, &mut kink_margin);
        let width = ze[0].len();
        let mut to_nodes = vec![vec![0.0; width]; num_nodes];
        for (i, e) in edges.iter().enumerate() {
            for &v in e {
                for k in 0..width {
                    to_nodes[v][k] += ze[i][k];
                }
            }
        }
        z = apply_mlp(&net.vnn[l], to_nodes, &mut kink_margin);
    }

    let dim = z[0].len();
    let mut extremum_gap = f64::INFINITY;
    let mut pooled = Vec::new();
    for e in edges {
        let mut p = vec![0.0; dim];
        for k in 0..dim {
            let mut vals: Vec<f64> = e.iter().map(|&v| z[v][k]).collect();
            match pooling {
                Pooling::MaxMin => {
                    vals.sort_by(f64::total_cmp);
                    let n = vals.len();
                    if n > 1 {
                        extremum_gap = extremum_gap
                            .min(vals[n - 1] - vals[n - 2])
                            .min(vals[1] - vals[0]);
                    }
                    p[k] = vals[n - 1] - vals[0];
                }
                Pooling::Mean => {
                    p[k] = vals.iter().sum::<f64>() / vals.len() as f64;
                }
            }
        }
        pooled.push(p);
    }

    let centroid: Vec<f64> = match fixed_centroid {
        Some(c) => c.to_vec(),
        None => (0..dim)
            .map(|k| pooled.iter().map(|p| p[k]).sum::<f64>() / pooled.len() as f64)
            .collect(),
    };
    let scores: Vec<f64> = pooled
        .iter()
        .map(|p| {
            (0..dim)
                .map(|k| (p[k] - centroid[k]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let loss = scores.iter().sum::<f64>() / scores.len() as f64;
    RefOutput {
        loss,
        scores,
        pooled,
        centroid,
        kink_margin,
        extremum_gap,
    }
}

pub fn reference_for(
    h: &Hypergraph,
    store: &ParameterStore,
    pooling: Pooling,
    fixed: Option<&[f64]>,
) -> RefOutput {
    let x: Vec<Vec<f64>> = h
        .features()
        .rows()
        .into_iter()
        .map(|r| r.to_vec())
        .collect();
    reference_forward(
        h.num_nodes(),
        h.edges(),
        &x,
        &RefNet::from_store(store),
        pooling,
        fixed,
    )
}

pub struct Instance {
    pub h: Hypergraph,
    pub cfg: ModelConfig,
    pub params: ParameterStore,
}

/// Random instance with at most 10 nodes, 6 edges, feature dim 4 and
/// layer widths 4. Parameters are re-drawn with positive-leaning biases so
/// that most ReLUs are active.
pub fn random_instance(seed: u64, pooling: Pooling, centroid: CentroidMode) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_nodes = rng.random_range(3..=10);
    let num_edges = rng.random_range(2..=6);
    let d = rng.random_range(1..=4);
    let edges: Vec<Vec<usize>> = (0..num_edges)
        .map(|_| {
            let size = rng.random_range(2..=num_nodes.min(4));
            rand::seq::index::sample(&mut rng, num_nodes, size).into_vec()
        })
        .collect();
    let x = Array2::from_shape_fn((num_nodes, d), |_| rng.random_range(-1.0..1.0));
    let h = Hypergraph::new(num_nodes, edges, x).unwrap();
    let cfg = ModelConfig {
        num_layers: 2,
        hidden_dim: rng.random_range(2..=4),
        embedding_dim: rng.random_range(2..=4),
        pooling,
        centroid,
        ..ModelConfig::default()
    };
    let mut params = cfg.init_parameters(d, seed).unwrap();
    // Tensors are visited as weight, bias, weight, bias, ...
    let mut tensor = 0usize;
    params.for_each_tensor_mut(|p, _| {
        let is_bias = tensor % 2 == 1;
        tensor += 1;
        for v in p.iter_mut() {
            *v = if is_bias {
                rng.random_range(0.1..0.6)
            } else {
                rng.random_range(-1.0..1.0)
            };
        }
    });
    Instance { h, cfg, params }
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
pub const FD_ABS_FLOOR: f64 = 1e-7;
/// Points closer than this to a kink, a pooling tie or a zero score are
/// skipped.
pub const FD_MARGIN: f64 = 1e-3;

#[derive(Debug)]
pub enum GradCheck {
    Skipped,
    Passed { checked: usize },
    Failed(String),
}

/// Compares `backward` against central differences of the forward loss.
/// Fixed-centroid instances use the initial centroid as a constant.
pub fn check_gradients(inst: &mut Instance) -> GradCheck {
    let (h, cfg) = (&inst.h, &inst.cfg);
    let trace0 = had_core::forward(h, &inst.params, cfg, None).unwrap();
    let frozen = (cfg.centroid == CentroidMode::Fixed).then(|| trace0.centroid().clone());
    let reference = reference_for(
        h,
        &inst.params,
        cfg.pooling,
        frozen.as_ref().map(|c| c.as_slice().unwrap()),
    );
    let min_score = reference
        .scores
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if reference.kink_margin < FD_MARGIN
        || reference.extremum_gap < FD_MARGIN
        || min_score < FD_MARGIN
    {
        return GradCheck::Skipped;
    }

    let trace = had_core::forward(h, &inst.params, cfg, frozen.as_ref()).unwrap();
    inst.params.zero_grads();
    had_core::model::backward(h, &mut inst.params, cfg, &trace).unwrap();
    let analytic = inst.params.flat_gradients();
    let theta = inst.params.flat_parameters();

    let mut probe = inst.params.clone();
    let mut loss_at = |values: &[f64]| {
        probe.set_flat_parameters(values).unwrap();
        had_core::forward(h, &probe, cfg, frozen.as_ref())
            .unwrap()
            .loss()
    };
    for i in 0..theta.len() {
        let mut plus = theta.clone();
        plus[i] += FD_STEP;
        let mut minus = theta.clone();
        minus[i] -= FD_STEP;
        let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * FD_STEP);
        let err = (analytic[i] - numeric).abs();
        let allowed = FD_ABS_FLOOR.max(FD_REL_TOL * analytic[i].abs().max(numeric.abs()));
        if err > allowed {
            return GradCheck::Failed(format!(
                "parameter {i}: analytic {} vs numeric {numeric} (err {err:.3e})",
                analytic[i]
            ));
        }
    }
    GradCheck::Passed {
        checked: theta.len(),
    }
}
