//! Evaluation: exact AUROC, min-max score normalization, k-fold
//! cross-validation and plot-data export.

use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    make_splits_with, write_file, EvalSplit, Label, LabeledHypergraphDataset, SplitConfig,
};
use crate::error::{HadError, Result};
use crate::hypergraph::io::content_lines;
use crate::model::ModelConfig;
use crate::train::{train, Termination, TrainConfig, TrainingRecord};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Area under the ROC curve via the Mann-Whitney rank sum, with average
/// ranks for tied scores: P(anomaly > inlier) + 0.5 P(tie).
pub fn auroc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(HadError::DimensionMismatch {
            context: "auroc labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    let positives = labels.iter().filter(|l| l.is_anomaly()).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(HadError::SingleClassOnly);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]].total_cmp(&scores[order[start]]).is_eq() {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their average.
        let rank = (start + end + 1) as f64 / 2.0;
        let tied_positives = order[start..end]
            .iter()
            .filter(|&&i| labels[i].is_anomaly())
            .count();
        rank_sum += rank * tied_positives as f64;
        start = end;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Min-max scaling onto `[0, 1]`; a constant input maps to all zeros.
pub fn normalize_scores(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !range.is_finite() || range <= 0.0 {
        return vec![0.0; raw.len()];
    }
    raw.iter()
        .map(|&x| ((x - lo) / range).clamp(0.0, 1.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub edge_id: usize,
    pub raw: f64,
    pub normalized: f64,
    pub label: Label,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredTestSet {
    pub entries: Vec<ScoredEntry>,
}

impl ScoredTestSet {
    pub fn new(edge_ids: &[usize], raw: &[f64], labels: &[Label]) -> Result<Self> {
        if edge_ids.len() != raw.len() || labels.len() != raw.len() {
            return Err(HadError::DimensionMismatch {
                context: "scored test set columns",
                expected: raw.len(),
                found: edge_ids.len().min(labels.len()),
            });
        }
        let normalized = normalize_scores(raw);
        let entries = edge_ids
            .iter()
            .zip(raw)
            .zip(&normalized)
            .zip(labels)
            .map(|(((&edge_id, &raw), &normalized), &label)| ScoredEntry {
                edge_id,
                raw,
                normalized,
                label,
            })
            .collect();
        Ok(Self { entries })
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.normalized).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn auroc(&self) -> Result<f64> {
        auroc(&self.normalized(), &self.labels())
    }

    fn summary(&self, label: Label) -> ScoreSummary {
        let xs: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| e.label == label)
            .map(|e| e.normalized)
            .collect();
        ScoreSummary::of(&xs)
    }

    /// CSV `index,score,label` with the normalized score and 0/1 labels.
    pub fn write_scatter_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,score,label")?;
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(w, "{i},{},{}", e.normalized, e.label.as_flag())?;
        }
        Ok(())
    }
}

/// Parses the scatter CSV back into `(score, label)` pairs.
pub fn read_scatter_csv<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<(f64, Label)>> {
    let mut out = Vec::new();
    for item in content_lines(reader, source_name) {
        let (line_no, line) = item?;
        if line_no == 1 {
            if line.trim() != "index,score,label" {
                return Err(HadError::parse(
                    source_name,
                    1,
                    "expected header `index,score,label`",
                ));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = match fields.as_slice() {
            [_, s, l] => s
                .parse::<f64>()
                .ok()
                .zip(l.parse::<u8>().ok().and_then(Label::from_flag)),
            _ => None,
        };
        out.push(parsed.ok_or_else(|| HadError::parse(source_name, line_no, "malformed row"))?);
    }
    Ok(out)
}

pub fn export_score_scatter(sts: &ScoredTestSet, path: &Path) -> Result<()> {
    write_file(path, |w| sts.write_scatter_csv(w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl ScoreSummary {
    fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self {
                count: 0,
                min: 0.0,
                mean: 0.0,
                max: 0.0,
            };
        }
        Self {
            count: xs.len(),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold_id: usize,
    pub auroc: f64,
    pub auroc_percent: f64,
    pub epochs: usize,
    pub termination: Termination,
    pub final_loss: f64,
    pub num_train_edges: usize,
    pub inlier_scores: ScoreSummary,
    pub anomaly_scores: ScoreSummary,
}

/// Per-fold artifacts that do not go into the JSON report.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldDetails {
    pub split: EvalSplit,
    pub scored: ScoredTestSet,
    pub record: TrainingRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub dataset: String,
    pub seed: u64,
    pub config_hash: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitConfig,
    pub folds: Vec<FoldReport>,
    pub mean_auroc: f64,
    pub mean_auroc_percent: f64,
    /// Excluded from the JSON so that reports are byte-reproducible.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub fold_details: Vec<FoldDetails>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub split: SplitConfig,
    /// Seed for the fold assignment and oversampling.
    pub seed: u64,
    /// Folds trained concurrently; results do not depend on it.
    pub jobs: usize,
}

impl EvalOptions {
    pub fn new(num_folds: usize, seed: u64) -> Self {
        Self {
            split: SplitConfig {
                num_folds,
                ..SplitConfig::default()
            },
            seed,
            jobs: 1,
        }
    }
}

/// Cross-validation with the split seed taken from `tcfg.seed`.
pub fn evaluate_cv(
    ds: &LabeledHypergraphDataset,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    num_folds: usize,
) -> Result<EvalReport> {
    evaluate_cv_with(ds, cfg, tcfg, &EvalOptions::new(num_folds, tcfg.seed))
}

/// Trains each fold on the hypergraph restricted to its training inliers
/// (all nodes and features stay visible), scores the fold's test multiset
/// and averages the fold AUROCs. Fold `k` trains with seed
/// `tcfg.seed ^ k`.
pub fn evaluate_cv_with(
    ds: &LabeledHypergraphDataset,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let started = Instant::now();
    let splits = make_splits_with(ds, &opts.split, opts.seed)?;
    let run_fold = |split: &EvalSplit| -> Result<(FoldReport, FoldDetails)> {
        let train_graph = ds.hypergraph.restrict_edges(&split.train_edges)?;
        let fold_tcfg = TrainConfig {
            seed: tcfg.seed ^ split.fold_id as u64,
            ..tcfg.clone()
        };
        let (model, record) = train(&train_graph, cfg, &fold_tcfg)?;
        let raw = model.score_all(split.test_edges.iter().map(|&e| ds.hypergraph.edge(e)))?;
        let scored = ScoredTestSet::new(&split.test_edges, &raw, &split.test_labels)?;
        let auc = scored.auroc()?;
        let report = FoldReport {
            fold_id: split.fold_id,
            auroc: auc,
            auroc_percent: 100.0 * auc,
            epochs: record.epochs,
            termination: record.termination,
            final_loss: record.final_loss(),
            num_train_edges: split.train_edges.len(),
            inlier_scores: scored.summary(Label::Inlier),
            anomaly_scores: scored.summary(Label::Anomaly),
        };
        Ok((
            report,
            FoldDetails {
                split: split.clone(),
                scored,
                record,
            },
        ))
    };
    let results: Vec<Result<(FoldReport, FoldDetails)>> = if opts.jobs <= 1 {
        splits.iter().map(run_fold).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| HadError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| splits.par_iter().map(run_fold).collect())
    };
    let (folds, fold_details): (Vec<_>, Vec<_>) = results
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let mean_auroc = folds.iter().map(|f| f.auroc).sum::<f64>() / folds.len() as f64;
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: ds.name.clone(),
        seed: opts.seed,
        config_hash: config_hash(&ds.name, cfg, tcfg, &opts.split, opts.seed)?,
        model: cfg.clone(),
        train: tcfg.clone(),
        split: opts.split,
        folds,
        mean_auroc,
        mean_auroc_percent: 100.0 * mean_auroc,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        fold_details,
    })
}

fn config_hash(
    dataset: &str,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    split: &SplitConfig,
    seed: u64,
) -> Result<String> {
    let canonical = serde_json::to_vec(&(dataset, cfg, tcfg, split, seed))?;
    Ok(hex::encode(&Sha256::digest(&canonical)[..8]))
}
