//! Labeled datasets, their on-disk formats and the cross-validation splits
//! used for evaluation.
//!
//! Besides the hypergraph formats in [`crate::hypergraph::io`]:
//!
//! * node labels: `node_index class_id` per line;
//! * hyperedge labels: `edge_index {0|1}` per line, 1 = anomaly;
//! * a JSON manifest ([`DatasetManifest`]) naming the component files.

pub mod mushroom;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HadError, Result};
use crate::hypergraph::io::{
    content_lines, open, read_dense_features, read_edge_list, read_sparse_features,
    write_dense_features, write_edge_list,
};
use crate::hypergraph::Hypergraph;

pub use synthetic::{generate_synthetic, SyntheticConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Inlier,
    Anomaly,
}

impl Label {
    pub fn is_anomaly(self) -> bool {
        self == Label::Anomaly
    }

    pub fn as_flag(self) -> u8 {
        match self {
            Label::Inlier => 0,
            Label::Anomaly => 1,
        }
    }

    pub fn from_flag(flag: u8) -> Option<Self> {
        match flag {
            0 => Some(Label::Inlier),
            1 => Some(Label::Anomaly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledHypergraphDataset {
    pub name: String,
    pub hypergraph: Hypergraph,
    pub labels: Vec<Label>,
}

impl LabeledHypergraphDataset {
    pub fn new(
        name: impl Into<String>,
        hypergraph: Hypergraph,
        labels: Vec<Label>,
    ) -> Result<Self> {
        if labels.len() != hypergraph.num_edges() {
            return Err(HadError::DimensionMismatch {
                context: "hyperedge labels",
                expected: hypergraph.num_edges(),
                found: labels.len(),
            });
        }
        if !labels.contains(&Label::Inlier) {
            return Err(HadError::TooFewInliers {
                needed: 1,
                found: 0,
            });
        }
        Ok(Self {
            name: name.into(),
            hypergraph,
            labels,
        })
    }

    pub fn inliers(&self) -> Vec<usize> {
        self.indices_with(Label::Inlier)
    }

    pub fn anomalies(&self) -> Vec<usize> {
        self.indices_with(Label::Anomaly)
    }

    fn indices_with(&self, label: Label) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == label).then_some(i))
            .collect()
    }

    /// Writes `edges.txt`, `features.txt`, `edge_labels.txt` and
    /// `manifest.json` into `dir` and returns the manifest path.
    pub fn export(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| HadError::io(dir, e))?;
        write_file(&dir.join("edges.txt"), |w| {
            write_edge_list(w, self.hypergraph.edges())
        })?;
        write_file(&dir.join("features.txt"), |w| {
            write_dense_features(w, self.hypergraph.features())
        })?;
        write_file(&dir.join("edge_labels.txt"), |w| {
            write_edge_labels(w, &self.labels)
        })?;
        let manifest = DatasetManifest {
            name: self.name.clone(),
            edges: "edges.txt".into(),
            features: Some("features.txt".into()),
            feature_format: FeatureFormat::Dense,
            edge_labels: Some("edge_labels.txt".into()),
            node_labels: None,
            num_nodes: Some(self.hypergraph.num_nodes()),
        };
        let path = dir.join("manifest.json");
        write_file(&path, |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest).map_err(std::io::Error::other)?;
            writeln!(w)
        })?;
        Ok(path)
    }
}

pub(crate) fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| HadError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| HadError::io(path, e))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFormat {
    #[default]
    Dense,
    Sparse,
}

/// Dataset manifest. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub edges: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(default)]
    pub feature_format: FeatureFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_labels: Option<PathBuf>,
    /// Needed only when neither features nor the edge list determine the
    /// node count (trailing isolated nodes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_nodes: Option<usize>,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HadError::io(path, e))?;
        let mut manifest: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut manifest.edges);
        manifest.features.as_mut().map(resolve);
        manifest.edge_labels.as_mut().map(resolve);
        manifest.node_labels.as_mut().map(resolve);
        Ok(manifest)
    }

    fn for_files(edges: &Path) -> Self {
        Self {
            name: edges
                .file_stem()
                .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned()),
            edges: edges.to_path_buf(),
            features: None,
            feature_format: FeatureFormat::Dense,
            edge_labels: None,
            node_labels: None,
            num_nodes: None,
        }
    }

    /// Builds the hypergraph. Without a feature file every node gets a
    /// one-hot identity feature row.
    pub fn load_hypergraph(&self) -> Result<Hypergraph> {
        let edges = read_edge_list(open(&self.edges)?, &self.edges.display().to_string())?;
        let features = match &self.features {
            Some(path) => {
                let name = path.display().to_string();
                Some(match self.feature_format {
                    FeatureFormat::Dense => read_dense_features(open(path)?, &name)?,
                    FeatureFormat::Sparse => read_sparse_features(open(path)?, &name)?,
                })
            }
            None => None,
        };
        let inferred = edges.iter().flatten().max().map_or(0, |&m| m + 1);
        let num_nodes = features
            .as_ref()
            .map(Array2::nrows)
            .or(self.num_nodes)
            .unwrap_or(inferred);
        let features = features.unwrap_or_else(|| Array2::eye(num_nodes));
        Hypergraph::new(num_nodes, edges, features)
    }

    pub fn load(&self) -> Result<LabeledHypergraphDataset> {
        let h = self.load_hypergraph()?;
        let labels = match (&self.edge_labels, &self.node_labels) {
            (Some(path), _) => read_edge_labels_file(path, h.num_edges())?,
            (None, Some(path)) => {
                let classes = read_node_labels_file(path, h.num_nodes())?;
                derive_labels(&h, &classes)?
            }
            (None, None) => {
                return Err(HadError::MissingLabels(
                    "neither a hyperedge label file nor a node label file was given".into(),
                ))
            }
        };
        LabeledHypergraphDataset::new(self.name.clone(), h, labels)
    }
}

/// Loads a labeled dataset from individual files; see [`DatasetManifest`]
/// for the manifest-driven equivalent. Dense feature format.
pub fn load_dataset(
    edge_file: &Path,
    feature_file: Option<&Path>,
    label_file: Option<&Path>,
    node_label_file: Option<&Path>,
) -> Result<LabeledHypergraphDataset> {
    let mut manifest = DatasetManifest::for_files(edge_file);
    manifest.features = feature_file.map(Path::to_path_buf);
    manifest.edge_labels = label_file.map(Path::to_path_buf);
    manifest.node_labels = node_label_file.map(Path::to_path_buf);
    manifest.load()
}

fn read_index_value_pairs<R: BufRead>(
    reader: R,
    source_name: &str,
    len: usize,
    what: &str,
) -> Result<Vec<Option<usize>>> {
    let mut out = vec![None; len];
    for item in content_lines(reader, source_name) {
        let (line_no, line) = item?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let parsed = match toks.as_slice() {
            [i, v] => i.parse::<usize>().ok().zip(v.parse::<usize>().ok()),
            _ => None,
        };
        let (idx, value) = parsed.ok_or_else(|| {
            HadError::parse(
                source_name,
                line_no,
                format!("expected `{what}_index value`"),
            )
        })?;
        if idx >= len {
            return Err(HadError::parse(
                source_name,
                line_no,
                format!("{what} index {idx} out of range ({len} {what}s)"),
            ));
        }
        if out[idx].replace(value).is_some() {
            return Err(HadError::parse(
                source_name,
                line_no,
                format!("duplicate {what} {idx}"),
            ));
        }
    }
    Ok(out)
}

fn require_all(values: Vec<Option<usize>>, source_name: &str, what: &str) -> Result<Vec<usize>> {
    let missing = values.iter().filter(|v| v.is_none()).count();
    if missing > 0 {
        return Err(HadError::MissingLabels(format!(
            "{source_name}: {missing} {what}s have no label"
        )));
    }
    Ok(values.into_iter().flatten().collect())
}

pub fn read_edge_labels<R: BufRead>(
    reader: R,
    source_name: &str,
    num_edges: usize,
) -> Result<Vec<Label>> {
    let raw = read_index_value_pairs(reader, source_name, num_edges, "edge")?;
    require_all(raw, source_name, "edge")?
        .into_iter()
        .map(|flag| {
            u8::try_from(flag)
                .ok()
                .and_then(Label::from_flag)
                .ok_or_else(|| {
                    HadError::MissingLabels(format!("{source_name}: label {flag} is not 0 or 1"))
                })
        })
        .collect()
}

fn read_edge_labels_file(path: &Path, num_edges: usize) -> Result<Vec<Label>> {
    read_edge_labels(open(path)?, &path.display().to_string(), num_edges)
}

pub fn read_node_labels<R: BufRead>(
    reader: R,
    source_name: &str,
    num_nodes: usize,
) -> Result<Vec<usize>> {
    let raw = read_index_value_pairs(reader, source_name, num_nodes, "node")?;
    require_all(raw, source_name, "node")
}

fn read_node_labels_file(path: &Path, num_nodes: usize) -> Result<Vec<usize>> {
    read_node_labels(open(path)?, &path.display().to_string(), num_nodes)
}

pub fn write_edge_labels<W: Write>(mut w: W, labels: &[Label]) -> std::io::Result<()> {
    for (i, l) in labels.iter().enumerate() {
        writeln!(w, "{i} {}", l.as_flag())?;
    }
    Ok(())
}

/// The most frequent node class (lowest class id on ties); `None` when
/// there are no nodes.
pub fn most_frequent_class(node_labels: &[usize]) -> Option<usize> {
    let mut counts = BTreeMap::new();
    for &c in node_labels {
        *counts.entry(c).or_insert(0usize) += 1;
    }
    // max_by_key keeps the last maximum; iterate in reverse so the lowest id wins.
    counts
        .into_iter()
        .rev()
        .max_by_key(|&(_, n)| n)
        .map(|(c, _)| c)
}

/// A hyperedge is an inlier iff it contains at least one node of the most
/// frequent node class.
pub fn derive_labels(h: &Hypergraph, node_labels: &[usize]) -> Result<Vec<Label>> {
    if node_labels.len() != h.num_nodes() {
        return Err(HadError::DimensionMismatch {
            context: "node labels",
            expected: h.num_nodes(),
            found: node_labels.len(),
        });
    }
    let Some(top) = most_frequent_class(node_labels) else {
        return Ok(vec![Label::Anomaly; h.num_edges()]);
    };
    Ok(h.edges()
        .iter()
        .map(|e| {
            if e.iter().any(|&v| node_labels[v] == top) {
                Label::Inlier
            } else {
                Label::Anomaly
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub num_folds: usize,
    /// Held-out inliers are resampled to `round(ratio * anomaly_count)`
    /// test entries.
    pub oversample_ratio: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            num_folds: 5,
            oversample_ratio: 1.0,
        }
    }
}

/// One cross-validation fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSplit {
    pub fold_id: usize,
    pub seed: u64,
    /// Inlier hyperedges used for training.
    pub train_edges: Vec<usize>,
    /// The distinct inliers held out in this fold.
    pub held_out_inliers: Vec<usize>,
    /// Test multiset: resampled held-out inliers followed by every anomaly.
    pub test_edges: Vec<usize>,
    pub test_labels: Vec<Label>,
}

pub fn make_splits(
    ds: &LabeledHypergraphDataset,
    num_folds: usize,
    seed: u64,
) -> Result<Vec<EvalSplit>> {
    make_splits_with(
        ds,
        &SplitConfig {
            num_folds,
            ..SplitConfig::default()
        },
        seed,
    )
}

/// Shuffles the inliers with `seed`, cuts them into `num_folds` near-equal
/// folds and builds one split per held-out fold. Fold `k` resamples with
/// its own stream of the same seed, so folds are independent of each other.
pub fn make_splits_with(
    ds: &LabeledHypergraphDataset,
    cfg: &SplitConfig,
    seed: u64,
) -> Result<Vec<EvalSplit>> {
    if cfg.num_folds < 2 {
        return Err(HadError::InvalidConfig("num_folds must be >= 2".into()));
    }
    if !(cfg.oversample_ratio >= 0.0 && cfg.oversample_ratio.is_finite()) {
        return Err(HadError::InvalidConfig(
            "oversample_ratio must be finite and >= 0".into(),
        ));
    }
    let mut inliers = ds.inliers();
    if inliers.len() < cfg.num_folds {
        return Err(HadError::TooFewInliers {
            needed: cfg.num_folds,
            found: inliers.len(),
        });
    }
    let anomalies = ds.anomalies();
    let target = (cfg.oversample_ratio * anomalies.len() as f64).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    inliers.shuffle(&mut rng);
    let (base, extra) = (inliers.len() / cfg.num_folds, inliers.len() % cfg.num_folds);
    let mut bounds = Vec::with_capacity(cfg.num_folds + 1);
    bounds.push(0);
    for k in 0..cfg.num_folds {
        bounds.push(bounds[k] + base + usize::from(k < extra));
    }

    Ok((0..cfg.num_folds)
        .map(|k| {
            let held: Vec<usize> = inliers[bounds[k]..bounds[k + 1]].to_vec();
            let train: Vec<usize> = inliers[..bounds[k]]
                .iter()
                .chain(&inliers[bounds[k + 1]..])
                .copied()
                .collect();
            let mut fold_rng = ChaCha8Rng::seed_from_u64(seed);
            fold_rng.set_stream(k as u64 + 1);
            let mut test_edges = oversample(&held, target, &mut fold_rng);
            let num_inlier_entries = test_edges.len();
            test_edges.extend(&anomalies);
            let mut test_labels = vec![Label::Inlier; num_inlier_entries];
            test_labels.resize(test_edges.len(), Label::Anomaly);
            EvalSplit {
                fold_id: k,
                seed,
                train_edges: train,
                held_out_inliers: held,
                test_edges,
                test_labels,
            }
        })
        .collect())
}

/// Exactly `target` draws from `pool`: every element once plus uniform
/// draws with replacement when `target` exceeds the pool, otherwise a
/// uniform subset without replacement.
fn oversample<R: Rng>(pool: &[usize], target: usize, rng: &mut R) -> Vec<usize> {
    if target >= pool.len() {
        let mut out = pool.to_vec();
        out.extend((pool.len()..target).map(|_| pool[rng.random_range(0..pool.len())]));
        out
    } else {
        index::sample(rng, pool.len(), target)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    }
}
