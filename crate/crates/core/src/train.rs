//! Full-batch training loop.
//!
//! Each epoch runs a forward pass over every hyperedge, checks the stop
//! condition against that pass's loss, and only then back-propagates and
//! takes an optimizer step. The returned model is the state of the pass that
//! triggered the stop.

use std::io::Write;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{HadError, Result};
use crate::hypergraph::Hypergraph;
use crate::model::{backward, forward, CentroidMode, ModelConfig, TrainedModel};
use crate::nn::{AdamConfig, OptimizerState, ParameterStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss_threshold: f64,
    pub max_epochs: usize,
    /// Run exactly this many optimizer steps and ignore `loss_threshold`.
    pub fixed_epochs: Option<usize>,
    pub seed: u64,
    pub optimizer: AdamConfig,
    pub loss_log_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_threshold: 1e-4,
            max_epochs: 10_000,
            fixed_epochs: None,
            seed: 0,
            optimizer: AdamConfig::default(),
            loss_log_interval: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.loss_threshold.is_nan() || self.loss_threshold <= 0.0 {
            return Err(HadError::InvalidConfig("loss_threshold must be > 0".into()));
        }
        if self.max_epochs == 0 {
            return Err(HadError::InvalidConfig("max_epochs must be >= 1".into()));
        }
        if self.loss_log_interval == 0 {
            return Err(HadError::InvalidConfig(
                "loss_log_interval must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ThresholdReached,
    EpochCap,
    FixedEpochsDone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    /// Losses at every `loss_log_interval`-th epoch plus the final epoch.
    pub losses: Vec<LossPoint>,
    pub termination: Termination,
    /// Optimizer steps taken.
    pub epochs: usize,
    /// Centroid used at every epoch when the centroid is fixed.
    pub fixed_centroid: Option<Vec<f64>>,
}

impl TrainingRecord {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().map_or(f64::NAN, |p| p.loss)
    }

    pub fn loss_at(&self, epoch: usize) -> Option<f64> {
        self.losses
            .iter()
            .find(|p| p.epoch == epoch)
            .map(|p| p.loss)
    }

    /// CSV with header `epoch,loss`.
    pub fn write_loss_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,loss")?;
        for p in &self.losses {
            writeln!(w, "{},{}", p.epoch, p.loss)?;
        }
        Ok(())
    }
}

/// Initializes parameters from `tcfg.seed` and trains.
pub fn train(
    h: &Hypergraph,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<(TrainedModel, TrainingRecord)> {
    let mut params = cfg.init_parameters(h.feature_dim(), tcfg.seed)?;
    train_from(h, cfg, tcfg, &mut params)
}

/// Trains starting from (and updating) the given parameters.
pub fn train_from(
    h: &Hypergraph,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    params: &mut ParameterStore,
) -> Result<(TrainedModel, TrainingRecord)> {
    cfg.validate()?;
    tcfg.validate()?;
    let mut optimizer = OptimizerState::new(tcfg.optimizer);
    let mut frozen: Option<Array1<f64>> = None;
    let mut losses = Vec::new();
    params.zero_grads();
    let mut epoch = 0;
    loop {
        let trace = forward(h, params, cfg, frozen.as_ref())?;
        let loss = trace.loss();
        if !loss.is_finite() {
            return Err(HadError::NonFiniteLoss { epoch, loss });
        }
        if cfg.centroid == CentroidMode::Fixed && frozen.is_none() {
            frozen = Some(trace.centroid().clone());
        }
        let stop = match tcfg.fixed_epochs {
            Some(n) if epoch >= n => Some(Termination::FixedEpochsDone),
            Some(_) => None,
            None if loss <= tcfg.loss_threshold => Some(Termination::ThresholdReached),
            None if epoch >= tcfg.max_epochs => Some(Termination::EpochCap),
            None => None,
        };
        if epoch % tcfg.loss_log_interval == 0 || stop.is_some() {
            losses.push(LossPoint { epoch, loss });
        }
        if let Some(termination) = stop {
            let record = TrainingRecord {
                losses,
                termination,
                epochs: epoch,
                fixed_centroid: frozen.map(|c| c.to_vec()),
            };
            return Ok((trace.to_trained_model(), record));
        }
        backward(h, params, cfg, &trace)?;
        optimizer.step(params);
        params.zero_grads();
        epoch += 1;
    }
}
