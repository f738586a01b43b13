//! Experiment configuration: a strict TOML schema with per-experiment
//! validation. Unknown keys are rejected, and every validation error names
//! the offending key.
//!
//! Five experiments are known: `degenerate`, `size-heatmap`,
//! `size-heatmap-batched`, `stuck`, and `linearity`. Each ships with two
//! config tiers under `configs/`: a `-paper` file at the scale of the
//! original measurements (long-running) and a `-desk` file that preserves
//! the qualitative behavior in minutes on one machine.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{AdadeltaParams, BatchPolicy};

pub const KNOWN_EXPERIMENTS: &str =
    "degenerate, size-heatmap, size-heatmap-batched, stuck, linearity";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Degenerate,
    SizeHeatmap,
    SizeHeatmapBatched,
    Stuck,
    Linearity,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ExperimentKind::Degenerate => "degenerate",
            ExperimentKind::SizeHeatmap => "size-heatmap",
            ExperimentKind::SizeHeatmapBatched => "size-heatmap-batched",
            ExperimentKind::Stuck => "stuck",
            ExperimentKind::Linearity => "linearity",
        };
        f.write_str(name)
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degenerate" => Ok(ExperimentKind::Degenerate),
            "size-heatmap" => Ok(ExperimentKind::SizeHeatmap),
            "size-heatmap-batched" => Ok(ExperimentKind::SizeHeatmapBatched),
            "stuck" => Ok(ExperimentKind::Stuck),
            "linearity" => Ok(ExperimentKind::Linearity),
            _ => Err(Error::UnknownExperiment {
                name: s.to_string(),
                known: KNOWN_EXPERIMENTS,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub base_seed: u64,
    pub n_trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub network: NetworkSection,
    pub data: DataSection,
    pub train: TrainSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub inputs: usize,
    pub outputs: usize,
    pub width: usize,
    /// Hidden-layer count for single-depth experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_layers: Option<usize>,
    /// Hidden-layer counts for the heatmap experiments (one grid per depth).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<usize>>,
}

impl NetworkSection {
    /// `[inputs, width x depth, outputs]`.
    pub fn layer_sizes(&self, depth: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(depth + 2);
        sizes.push(self.inputs);
        sizes.extend(std::iter::repeat(self.width).take(depth));
        sizes.push(self.outputs);
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Training-set size for single-dataset experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    /// Dataset sizes (heatmap rows).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    /// Sawtooth teeth for `stuck`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_teeth: Option<usize>,
    /// Spline knot count for `linearity`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spline_knots: Option<usize>,
    /// Noise level for `linearity`: a number, or "auto" for
    /// 0.3 x SD(clean targets). Defaults to auto.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<toml::Value>,
    /// Input domain for the 1-D experiments.
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
}

fn default_domain() -> [f64; 2] {
    [-1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_true")]
    pub shuffle: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<BatchSection>,
    /// For `linearity`: metric checkpoints. For `stuck`: function-dump epochs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    /// `linearity` only: also run the carrier-boost workflow.
    #[serde(default)]
    pub boost: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adadelta: Option<AdadeltaSection>,
}

fn default_snapshot_every() -> usize {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdadeltaSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl AdadeltaSection {
    pub fn to_params(self) -> AdadeltaParams {
        let d = AdadeltaParams::default();
        AdadeltaParams {
            lr: self.lr.unwrap_or(d.lr),
            rho: self.rho.unwrap_or(d.rho),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchMode {
    Full,
    Fixed,
    FixedDrop,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSection {
    pub mode: BatchMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    /// Batch only when the dataset has at least this many points; below the
    /// threshold a full batch is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_epoch: Option<usize>,
}

impl BatchSection {
    /// Resolve the policy for a dataset of `n` points.
    pub fn policy_for(&self, n: usize) -> Result<BatchPolicy> {
        let need_size = || {
            self.size.ok_or_else(|| {
                Error::Config(format!(
                    "train.batch.size is required for mode {:?}",
                    self.mode
                ))
            })
        };
        if let Some(threshold) = self.threshold {
            if n < threshold && self.mode != BatchMode::Full {
                return Ok(BatchPolicy::FullBatch);
            }
        }
        match self.mode {
            BatchMode::Full => Ok(BatchPolicy::FullBatch),
            BatchMode::Fixed => Ok(BatchPolicy::FixedWithRemainder(need_size()?)),
            BatchMode::FixedDrop => Ok(BatchPolicy::FixedDropRemainder(need_size()?)),
            BatchMode::Random => {
                let steps = self.steps_per_epoch.ok_or_else(|| {
                    Error::Config("train.batch.steps_per_epoch is required for mode random".into())
                })?;
                Ok(BatchPolicy::RandomSample {
                    size: need_size()?,
                    steps_per_epoch: steps,
                })
            }
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Noise sigma for `linearity`: explicit number, or None for auto.
    pub fn noise_sigma(&self) -> Result<Option<f64>> {
        match &self.data.noise_sigma {
            None => Ok(None),
            Some(toml::Value::String(s)) if s == "auto" => Ok(None),
            Some(toml::Value::Float(v)) if *v >= 0.0 => Ok(Some(*v)),
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(Some(*v as f64)),
            Some(other) => Err(Error::Config(format!(
                "data.noise_sigma must be a nonnegative number or \"auto\", got {other}"
            ))),
        }
    }

    fn require<T: Copy>(field: Option<T>, key: &str) -> Result<T> {
        field.ok_or_else(|| Error::Config(format!("missing required key {key}")))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_trials < 1 {
            return fail("n_trials must be >= 1".into());
        }
        if self.train.epochs < 1 {
            return fail("train.epochs must be >= 1".into());
        }
        if self.train.snapshot_every < 1 {
            return fail("train.snapshot_every must be >= 1".into());
        }
        if self.network.inputs < 1 || self.network.outputs < 1 || self.network.width < 1 {
            return fail("network.inputs/outputs/width must be >= 1".into());
        }
        if !(self.data.domain[0] < self.data.domain[1]) {
            return fail(format!(
                "data.domain must satisfy domain[0] < domain[1], got {:?}",
                self.data.domain
            ));
        }
        if let Some(batch) = &self.train.batch {
            // surface size/steps errors now, for the largest dataset in play
            let n = self
                .data
                .sizes
                .as_ref()
                .and_then(|s| s.iter().max().copied())
                .or(self.data.n_points)
                .unwrap_or(1);
            batch.policy_for(n)?;
        }
        if let Some(cps) = &self.train.checkpoints {
            if cps.is_empty() {
                return fail("train.checkpoints must be nonempty when present".into());
            }
            if cps.windows(2).any(|w| w[0] > w[1]) {
                return fail("train.checkpoints must be nondecreasing".into());
            }
            if *cps.last().unwrap() > self.train.epochs {
                return fail(format!(
                    "train.checkpoints last entry {} exceeds train.epochs {}",
                    cps.last().unwrap(),
                    self.train.epochs
                ));
            }
        }
        self.noise_sigma()?;
        match self.experiment {
            ExperimentKind::Degenerate => {
                Self::require(self.network.hidden_layers, "network.hidden_layers")?;
                Self::require(self.data.n_points, "data.n_points")?;
            }
            ExperimentKind::SizeHeatmap | ExperimentKind::SizeHeatmapBatched => {
                let depths = self
                    .network
                    .depths
                    .as_ref()
                    .ok_or_else(|| Error::Config("missing required key network.depths".into()))?;
                if depths.is_empty() || depths.iter().any(|&d| d == 0) {
                    return fail("network.depths must be nonempty, all >= 1".into());
                }
                let sizes = self
                    .data
                    .sizes
                    .as_ref()
                    .ok_or_else(|| Error::Config("missing required key data.sizes".into()))?;
                if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
                    return fail("data.sizes must be nonempty and strictly increasing".into());
                }
                if self.experiment == ExperimentKind::SizeHeatmapBatched
                    && self.train.batch.is_none()
                {
                    return fail("missing required key train.batch for size-heatmap-batched".into());
                }
            }
            ExperimentKind::Stuck => {
                Self::require(self.network.hidden_layers, "network.hidden_layers")?;
                Self::require(self.data.n_points, "data.n_points")?;
                if self.train.checkpoints.is_none() {
                    return fail("missing required key train.checkpoints (dump epochs)".into());
                }
            }
            ExperimentKind::Linearity => {
                Self::require(self.network.hidden_layers, "network.hidden_layers")?;
                Self::require(self.data.n_points, "data.n_points")?;
                if self.network.inputs != 1 || self.network.outputs != 1 {
                    return fail("linearity requires network.inputs = network.outputs = 1".into());
                }
                if self.train.checkpoints.is_none() {
                    return fail("missing required key train.checkpoints".into());
                }
            }
        }
        Ok(())
    }

    pub fn adadelta_params(&self) -> AdadeltaParams {
        self.train
            .adadelta
            .map(AdadeltaSection::to_params)
            .unwrap_or_default()
    }
}

/// `load_config`: read, parse, and validate an experiment config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_degenerate() -> String {
        r#"
experiment = "degenerate"
base_seed = 7
n_trials = 10

[network]
inputs = 3
outputs = 1
width = 64
hidden_layers = 20

[data]
n_points = 1000

[train]
epochs = 5
"#
        .to_string()
    }

    #[test]
    fn parses_a_minimal_config() {
        let cfg = ExperimentConfig::parse(&minimal_degenerate()).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Degenerate);
        assert_eq!(cfg.network.layer_sizes(20).len(), 22);
        assert!(cfg.train.shuffle);
        assert_eq!(cfg.train.snapshot_every, 1);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::parse(&minimal_degenerate()).unwrap();
        let text = cfg.to_toml();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys_by_name() {
        let text = minimal_degenerate().replace("[data]", "frobnicate = 3\n[data]");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("frobnicate"), "{err}");
    }

    #[test]
    fn rejects_negative_epochs_by_key() {
        let text = minimal_degenerate().replace("epochs = 5", "epochs = -5");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("epochs"), "{err}");
    }

    #[test]
    fn names_missing_required_keys() {
        let text = minimal_degenerate().replace("n_points = 1000", "");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("data.n_points"), "{err}");
    }

    #[test]
    fn batch_threshold_rule() {
        let batch = BatchSection {
            mode: BatchMode::Fixed,
            size: Some(256),
            threshold: Some(1024),
            steps_per_epoch: None,
        };
        assert_eq!(
            batch.policy_for(1030).unwrap(),
            BatchPolicy::FixedWithRemainder(256)
        );
        assert_eq!(batch.policy_for(1000).unwrap(), BatchPolicy::FullBatch);
        assert_eq!(
            batch.policy_for(1024).unwrap(),
            BatchPolicy::FixedWithRemainder(256)
        );
    }

    #[test]
    fn noise_sigma_accepts_auto_and_numbers() {
        let base = r#"
experiment = "linearity"
base_seed = 1
n_trials = 2

[network]
inputs = 1
outputs = 1
width = 32
hidden_layers = 4

[data]
n_points = 64
spline_knots = 8
noise_sigma = SIGMA

[train]
epochs = 100
checkpoints = [10, 100]
"#;
        let auto = base.replace("SIGMA", "\"auto\"");
        let cfg = ExperimentConfig::parse(&auto).unwrap();
        assert_eq!(cfg.noise_sigma().unwrap(), None);
        let fixed = base.replace("SIGMA", "0.25");
        let cfg = ExperimentConfig::parse(&fixed).unwrap();
        assert_eq!(cfg.noise_sigma().unwrap(), Some(0.25));
        let bad = base.replace("SIGMA", "\"lots\"");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn unknown_experiment_name_is_an_error() {
        let err = "resonance".parse::<ExperimentKind>().unwrap_err().to_string();
        assert!(err.contains("resonance") && err.contains("degenerate"), "{err}");
    }

    #[test]
    fn checkpoints_must_fit_in_epochs() {
        let text = minimal_degenerate().replace(
            "epochs = 5",
            "epochs = 5\ncheckpoints = [2, 9]",
        );
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("checkpoints"), "{err}");
    }
}
