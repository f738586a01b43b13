//! Adadelta, batching policies, and the checkpointed training loop.
//!
//! The optimizer is plain Adadelta with the era's framework defaults
//! (lr = 1.0, rho = 0.95, epsilon = 1e-7), all four knobs configurable:
//!
//! ```text
//! E[g²]  <- rho E[g²]  + (1 - rho) g²
//! delta   = -sqrt(E[dx²] + eps) / sqrt(E[g²] + eps) * g
//! E[dx²] <- rho E[dx²] + (1 - rho) delta²
//! p      <- p + lr * delta
//! ```
//!
//! A batch is the set of samples taken for one gradient step; an epoch is one
//! pass over the data (a single step under [`BatchPolicy::FullBatch`]).
//! Checkpoint metrics (MSE, optional size and dead-neuron fractions) are
//! always computed on the full training set, regardless of batching.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::analysis;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::{backprop_from_trace, mse, Gradients, MlpNetwork};
use crate::parallel;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdadeltaParams {
    pub lr: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for AdadeltaParams {
    fn default() -> Self {
        AdadeltaParams {
            lr: 1.0,
            rho: 0.95,
            epsilon: 1e-7,
        }
    }
}

/// Per-parameter accumulators E[g²] and E[dx²], flat per block, initialized
/// to zero.
#[derive(Debug, Clone)]
pub struct AdadeltaState {
    params: AdadeltaParams,
    eg2: Vec<Vec<f64>>,  // one block per weight matrix, then per bias vector
    edx2: Vec<Vec<f64>>,
    n_weight_blocks: usize,
}

impl AdadeltaState {
    pub fn new(net: &MlpNetwork, params: AdadeltaParams) -> Self {
        let mut eg2 = Vec::new();
        for w in net.weights() {
            eg2.push(vec![0.0; w.data().len()]);
        }
        for b in net.biases() {
            eg2.push(vec![0.0; b.len()]);
        }
        let edx2 = eg2.clone();
        AdadeltaState {
            params,
            n_weight_blocks: net.weights().len(),
            eg2,
            edx2,
        }
    }

    pub fn params(&self) -> &AdadeltaParams {
        &self.params
    }

    /// One Adadelta update of every parameter in the network.
    pub fn step(&mut self, net: &mut MlpNetwork, grads: &Gradients) -> Result<()> {
        for (l, gw) in grads.weights.iter().enumerate() {
            if !gw.all_finite() {
                return Err(Error::NonFiniteGradient {
                    block: format!("W{}", l + 1),
                });
            }
        }
        for (l, gb) in grads.biases.iter().enumerate() {
            if gb.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    block: format!("b{}", l + 1),
                });
            }
        }
        let (weights, biases) = net.params_mut();
        let prm = self.params;
        for (l, w) in weights.iter_mut().enumerate() {
            update_block(
                w.data_mut(),
                grads.weights[l].data(),
                &mut self.eg2[l],
                &mut self.edx2[l],
                &prm,
            );
        }
        let off = self.n_weight_blocks;
        for (l, b) in biases.iter_mut().enumerate() {
            update_block(
                b,
                &grads.biases[l],
                &mut self.eg2[off + l],
                &mut self.edx2[off + l],
                &prm,
            );
        }
        Ok(())
    }
}

fn update_block(p: &mut [f64], g: &[f64], eg2: &mut [f64], edx2: &mut [f64], prm: &AdadeltaParams) {
    debug_assert!(p.len() == g.len() && g.len() == eg2.len() && eg2.len() == edx2.len());
    for i in 0..p.len() {
        let gi = g[i];
        eg2[i] = prm.rho * eg2[i] + (1.0 - prm.rho) * gi * gi;
        let delta = -((edx2[i] + prm.epsilon).sqrt() / (eg2[i] + prm.epsilon).sqrt()) * gi;
        edx2[i] = prm.rho * edx2[i] + (1.0 - prm.rho) * delta * delta;
        p[i] += prm.lr * delta;
    }
}

/// Single-parameter Adadelta, handy for hand-checked update values and toy
/// objectives.
#[derive(Debug, Clone)]
pub struct ScalarAdadelta {
    params: AdadeltaParams,
    eg2: f64,
    edx2: f64,
}

impl ScalarAdadelta {
    pub fn new(params: AdadeltaParams) -> Self {
        ScalarAdadelta {
            params,
            eg2: 0.0,
            edx2: 0.0,
        }
    }

    /// Returns the applied update `lr * delta` for gradient `g`.
    pub fn step(&mut self, g: f64) -> f64 {
        let prm = self.params;
        self.eg2 = prm.rho * self.eg2 + (1.0 - prm.rho) * g * g;
        let delta = -((self.edx2 + prm.epsilon).sqrt() / (self.eg2 + prm.epsilon).sqrt()) * g;
        self.edx2 = prm.rho * self.edx2 + (1.0 - prm.rho) * delta * delta;
        prm.lr * delta
    }
}

/// How samples are grouped into gradient steps within an epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BatchPolicy {
    /// One gradient step per epoch with all the data.
    FullBatch,
    /// Fixed-size batches; a final smaller batch takes a gradient step with
    /// the leftover samples.
    FixedWithRemainder(usize),
    /// Fixed-size batches; leftover samples are discarded for the epoch.
    FixedDropRemainder(usize),
    /// Every batch drawn uniformly with replacement from the whole set.
    RandomSample { size: usize, steps_per_epoch: usize },
}

impl BatchPolicy {
    pub fn batches_per_epoch(&self, n: usize) -> usize {
        match *self {
            BatchPolicy::FullBatch => 1,
            BatchPolicy::FixedWithRemainder(b) => n / b + usize::from(n % b != 0),
            BatchPolicy::FixedDropRemainder(b) => n / b,
            BatchPolicy::RandomSample { steps_per_epoch, .. } => steps_per_epoch,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            BatchPolicy::FullBatch => true,
            BatchPolicy::FixedWithRemainder(b) | BatchPolicy::FixedDropRemainder(b) => b >= 1,
            BatchPolicy::RandomSample {
                size,
                steps_per_epoch,
            } => size >= 1 && steps_per_epoch >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid batch policy {self:?}")))
        }
    }
}

/// Index lists for one epoch. For the sliced policies, `shuffle` permutes
/// 0..n before slicing; `FullBatch` ignores both the RNG and the flag.
pub fn make_batches(
    n: usize,
    policy: &BatchPolicy,
    rng: &mut RngStream,
    shuffle: bool,
) -> Vec<Vec<usize>> {
    match *policy {
        BatchPolicy::FullBatch => vec![(0..n).collect()],
        BatchPolicy::FixedWithRemainder(b) => {
            let order = epoch_order(n, rng, shuffle);
            order.chunks(b).map(<[usize]>::to_vec).collect()
        }
        BatchPolicy::FixedDropRemainder(b) => {
            let order = epoch_order(n, rng, shuffle);
            order
                .chunks_exact(b)
                .map(<[usize]>::to_vec)
                .collect()
        }
        BatchPolicy::RandomSample {
            size,
            steps_per_epoch,
        } => (0..steps_per_epoch)
            .map(|_| (0..size).map(|_| rng.next_index(n)).collect())
            .collect(),
    }
}

fn epoch_order(n: usize, rng: &mut RngStream, shuffle: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        rng.shuffle(&mut order);
    }
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_policy: BatchPolicy,
    pub shuffle_each_epoch: bool,
    pub snapshot_every: usize,
    pub seed: u64,
    pub record_census: bool,
    pub record_size: bool,
    pub adadelta: AdadeltaParams,
}

impl TrainConfig {
    /// Full-batch training with metrics every epoch.
    pub fn full_batch(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            epochs,
            batch_policy: BatchPolicy::FullBatch,
            shuffle_each_epoch: true,
            snapshot_every: 1,
            seed,
            record_census: false,
            record_size: false,
            adadelta: AdadeltaParams::default(),
        }
    }

    pub fn with_policy(mut self, policy: BatchPolicy) -> Self {
        self.batch_policy = policy;
        self
    }

    pub fn with_snapshot_every(mut self, every: usize) -> Self {
        self.snapshot_every = every;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidArgument("train: epochs must be >= 1".into()));
        }
        if self.snapshot_every < 1 {
            return Err(Error::InvalidArgument(
                "train: snapshot_every must be >= 1".into(),
            ));
        }
        self.batch_policy.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub mse: f64,
    pub size: Option<f64>,
    pub dead_fracs: Option<Vec<f64>>,
}

/// One training run's checkpoint history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub checkpoints: Vec<Checkpoint>,
    pub total_steps: usize,
    pub diverged: bool,
    pub diverged_at: Option<usize>,
}

/// Train in place, recording checkpoint metrics at epoch 0 (pre-training),
/// every `snapshot_every` epochs, and the final epoch. Deterministic given
/// `config.seed`. If the loss or a gradient goes non-finite, training stops
/// with the divergence flag set and the last good checkpoint kept.
pub fn train(
    net: &mut MlpNetwork,
    x: &Matrix,
    y: &Matrix,
    config: &TrainConfig,
) -> Result<TrialRecord> {
    train_observed(net, x, y, config, &[], |_, _| {})
}

/// [`train`] with a snapshot callback invoked at each epoch in
/// `observe_epochs` (after that many epochs have run; 0 means pre-training).
pub fn train_observed<F>(
    net: &mut MlpNetwork,
    x: &Matrix,
    y: &Matrix,
    config: &TrainConfig,
    observe_epochs: &[usize],
    mut observer: F,
) -> Result<TrialRecord>
where
    F: FnMut(usize, &MlpNetwork),
{
    config.validate()?;
    if x.rows() != y.rows() {
        return Err(Error::dim(
            "train",
            format!("{} input rows", x.rows()),
            format!("{} target rows", y.rows()),
        ));
    }
    if x.rows() == 0 {
        return Err(Error::InvalidArgument("train: empty dataset".into()));
    }
    let n = x.rows();
    let observe: BTreeSet<usize> = observe_epochs.iter().copied().collect();
    let mut rng = RngStream::new(config.seed);
    let mut state = AdadeltaState::new(net, config.adadelta);
    let mut record = TrialRecord {
        checkpoints: Vec::new(),
        total_steps: 0,
        diverged: false,
        diverged_at: None,
    };

    match checkpoint_metrics(net, x, y, config)? {
        Some(cp) => record.checkpoints.push(cp),
        None => {
            record.diverged = true;
            record.diverged_at = Some(0);
            return Ok(record);
        }
    }
    if observe.contains(&0) {
        observer(0, net);
    }

    for epoch in 1..=config.epochs {
        let batches = make_batches(n, &config.batch_policy, &mut rng, config.shuffle_each_epoch);
        for batch in &batches {
            let xb = x.select_rows(batch);
            let yb = y.select_rows(batch);
            let trace = net.forward(&xb)?;
            let grads = backprop_from_trace(net, &trace, &yb)?;
            if !grads.all_finite() {
                record.diverged = true;
                record.diverged_at = Some(epoch);
                return Ok(record);
            }
            state.step(net, &grads)?;
            record.total_steps += 1;
        }
        if !net.all_finite() {
            record.diverged = true;
            record.diverged_at = Some(epoch);
            return Ok(record);
        }
        if epoch % config.snapshot_every == 0 || epoch == config.epochs {
            match checkpoint_metrics(net, x, y, config)? {
                Some(mut cp) => {
                    cp.epoch = epoch;
                    // the final epoch may coincide with the cadence; keep one entry
                    if record.checkpoints.last().map(|c| c.epoch) != Some(epoch) {
                        record.checkpoints.push(cp);
                    }
                }
                None => {
                    record.diverged = true;
                    record.diverged_at = Some(epoch);
                    return Ok(record);
                }
            }
        }
        if observe.contains(&epoch) {
            observer(epoch, net);
        }
    }
    Ok(record)
}

/// Metrics on the full training set; `None` signals a non-finite loss.
fn checkpoint_metrics(
    net: &MlpNetwork,
    x: &Matrix,
    y: &Matrix,
    config: &TrainConfig,
) -> Result<Option<Checkpoint>> {
    let trace = net.forward(x)?;
    let loss = mse(trace.output(), y)?;
    if !loss.is_finite() {
        return Ok(None);
    }
    let size = config
        .record_size
        .then(|| trace.output().sum_of_squares());
    let dead_fracs = config
        .record_census
        .then(|| analysis::dead_fractions_from_trace(&trace, net.hidden_layers()));
    Ok(Some(Checkpoint {
        epoch: 0,
        mse: loss,
        size,
        dead_fracs,
    }))
}

/// Per-checkpoint mean and standard deviation across trials. Diverged trials
/// are excluded from the statistics and listed by index.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialAggregate {
    pub epochs: Vec<usize>,
    pub mean_mse: Vec<f64>,
    pub std_mse: Vec<f64>,
    pub mean_size: Option<Vec<f64>>,
    pub std_size: Option<Vec<f64>>,
    /// `[checkpoint][hidden layer]`, when the trials recorded a census.
    pub mean_dead_fracs: Option<Vec<Vec<f64>>>,
    pub n_trials: usize,
    pub diverged_trials: Vec<usize>,
}

/// Run `n_trials` independent trials, trial i seeded `base_seed + i`, and
/// aggregate. Trials execute in parallel under the `parallel` feature;
/// aggregation runs in trial-index order either way, so completion order
/// never affects the result.
pub fn run_trials<F>(base_seed: u64, n_trials: usize, runner: F) -> Result<TrialAggregate>
where
    F: Fn(u64, usize) -> Result<TrialRecord> + Sync,
{
    if n_trials == 0 {
        return Err(Error::InvalidArgument("run_trials: need n_trials >= 1".into()));
    }
    let results = parallel::map_indexed(n_trials, |i| runner(base_seed + i as u64, i));
    let mut records = Vec::with_capacity(n_trials);
    for r in results {
        records.push(r?);
    }
    aggregate(&records)
}

/// Pure reduction of trial records (in the given order) to per-checkpoint
/// means and standard deviations.
pub fn aggregate(records: &[TrialRecord]) -> Result<TrialAggregate> {
    let diverged_trials: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.diverged)
        .map(|(i, _)| i)
        .collect();
    let used: Vec<&TrialRecord> = records.iter().filter(|r| !r.diverged).collect();
    if used.is_empty() {
        return Err(Error::InvalidArgument(
            "aggregate: every trial diverged".into(),
        ));
    }
    let epochs: Vec<usize> = used[0].checkpoints.iter().map(|c| c.epoch).collect();
    for r in &used {
        let e: Vec<usize> = r.checkpoints.iter().map(|c| c.epoch).collect();
        if e != epochs {
            return Err(Error::InvalidArgument(format!(
                "aggregate: checkpoint epochs differ across trials ({epochs:?} vs {e:?})"
            )));
        }
    }
    let n_cp = epochs.len();
    let collect_stat = |get: &dyn Fn(&Checkpoint) -> f64| -> (Vec<f64>, Vec<f64>) {
        let mut means = Vec::with_capacity(n_cp);
        let mut stds = Vec::with_capacity(n_cp);
        for c in 0..n_cp {
            let vals: Vec<f64> = used.iter().map(|r| get(&r.checkpoints[c])).collect();
            let (m, s) = mean_std(&vals);
            means.push(m);
            stds.push(s);
        }
        (means, stds)
    };
    let (mean_mse, std_mse) = collect_stat(&|c| c.mse);
    let has_size = used.iter().all(|r| r.checkpoints.iter().all(|c| c.size.is_some()));
    let (mean_size, std_size) = if has_size {
        let (m, s) = collect_stat(&|c| c.size.unwrap());
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    let has_census = used
        .iter()
        .all(|r| r.checkpoints.iter().all(|c| c.dead_fracs.is_some()));
    let mean_dead_fracs = if has_census {
        let n_layers = used[0].checkpoints[0].dead_fracs.as_ref().unwrap().len();
        let mut out = Vec::with_capacity(n_cp);
        for c in 0..n_cp {
            let mut layer_means = Vec::with_capacity(n_layers);
            for l in 0..n_layers {
                let vals: Vec<f64> = used
                    .iter()
                    .map(|r| r.checkpoints[c].dead_fracs.as_ref().unwrap()[l])
                    .collect();
                layer_means.push(mean_std(&vals).0);
            }
            out.push(layer_means);
        }
        Some(out)
    } else {
        None
    };
    Ok(TrialAggregate {
        epochs,
        mean_mse,
        std_mse,
        mean_size,
        std_size,
        mean_dead_fracs,
        n_trials: records.len(),
        diverged_trials,
    })
}

/// Sample standard deviation; 0 for a single value.
fn mean_std(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV for a set of trial records: `trial,epoch,mse[,size][,dead_frac_layer_i...]`,
/// one row per checkpoint, columns fixed by what the config recorded.
pub fn trial_records_csv(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    let with_size = records
        .iter()
        .any(|r| r.checkpoints.iter().any(|c| c.size.is_some()));
    let n_layers = records
        .iter()
        .flat_map(|r| &r.checkpoints)
        .filter_map(|c| c.dead_fracs.as_ref().map(Vec::len))
        .max()
        .unwrap_or(0);
    out.push_str("trial,epoch,mse");
    if with_size {
        out.push_str(",size");
    }
    for l in 1..=n_layers {
        let _ = write!(out, ",dead_frac_layer_{l}");
    }
    out.push('\n');
    for (t, rec) in records.iter().enumerate() {
        for cp in &rec.checkpoints {
            let _ = write!(out, "{t},{},{}", cp.epoch, fmt_f64(cp.mse));
            if with_size {
                let _ = write!(out, ",{}", fmt_f64(cp.size.unwrap_or(f64::NAN)));
            }
            if let Some(fracs) = &cp.dead_fracs {
                for f in fracs {
                    let _ = write!(out, ",{}", fmt_f64(*f));
                }
            }
            out.push('\n');
        }
    }
    out
}
