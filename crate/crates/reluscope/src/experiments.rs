//! Config-driven experiment runners and their file outputs.
//!
//! Every experiment is a pure function of its config (seed included):
//! rerunning writes byte-identical CSVs. Each output directory gets a
//! `manifest.txt` with the tool version, the seed, and the canonical config
//! echo that reproduces the run.
//!
//! Seeding layout: trial k of an experiment uses `base_seed + k` (data, then
//! init, then batching, drawn in that order from one stream per trial). The
//! `linearity` experiment draws its shared dataset from `base_seed` itself
//! and seeds trials from `base_seed + 1` upward.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::{
    artificial_boost, dead_neuron_census, noise_decomposition, perfect_fit_reference, BoostResult,
    CensusReport, DecompositionResult,
};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::heatmap::{render_heatmap, HeatmapGrid, HeatmapStyle};
use crate::matrix::Matrix;
use crate::network::MlpNetwork;
use crate::optim::{run_trials, train, train_observed, TrainConfig, TrialRecord};
use crate::parallel;
use crate::pwl::{
    extract_pwl, random_linear_spline, sawtooth_dataset, spline_plus_noise, uniform_grid,
    PwlFunction, SplineData,
};
use crate::rng::RngStream;
use crate::util::fmt_f64;

/// Evaluation grid resolution for function dumps.
pub const EVAL_GRID_POINTS: usize = 512;

/// Auto noise level: 0.3 x the sample SD of the clean targets.
pub const AUTO_NOISE_RATIO: f64 = 0.3;

fn desk_toml(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Degenerate => include_str!("../configs/degenerate-desk.toml"),
        ExperimentKind::SizeHeatmap => include_str!("../configs/size-heatmap-desk.toml"),
        ExperimentKind::SizeHeatmapBatched => {
            include_str!("../configs/size-heatmap-batched-desk.toml")
        }
        ExperimentKind::Stuck => include_str!("../configs/stuck-desk.toml"),
        ExperimentKind::Linearity => include_str!("../configs/linearity-desk.toml"),
    }
}

/// Built-in desk-tier config for an experiment (the same files shipped under
/// `configs/`).
pub fn desk_config(kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig::parse(desk_toml(kind)).expect("shipped desk config is valid")
}

fn train_config_from(cfg: &ExperimentConfig, seed: u64, n: usize) -> Result<TrainConfig> {
    let mut tc = TrainConfig::full_batch(cfg.train.epochs, seed);
    tc.shuffle_each_epoch = cfg.train.shuffle;
    tc.snapshot_every = cfg.train.snapshot_every;
    tc.adadelta = cfg.adadelta_params();
    if let Some(batch) = &cfg.train.batch {
        tc.batch_policy = batch.policy_for(n)?;
    }
    Ok(tc)
}

// ---------------------------------------------------------------------------
// degenerate

#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateLayer {
    pub layer: usize,
    pub neurons: usize,
    pub mean_dead: f64,
    pub mean_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateOutcome {
    pub layers: Vec<DegenerateLayer>,
    pub per_trial: Vec<CensusReport>,
    pub diverged_trials: Vec<usize>,
}

/// Train on Gaussian noise for a few steps, then census dead neurons,
/// averaged over trials.
pub fn run_degenerate(cfg: &ExperimentConfig) -> Result<DegenerateOutcome> {
    let depth = cfg.network.hidden_layers.expect("validated");
    let sizes = cfg.network.layer_sizes(depth);
    let n = cfg.data.n_points.expect("validated");

    let results = parallel::map_indexed(cfg.n_trials, |i| -> Result<(CensusReport, bool)> {
        let seed = cfg.base_seed + i as u64;
        let mut rng = RngStream::new(seed);
        let x = rng.standard_normal(n, cfg.network.inputs);
        let y = rng.standard_normal(n, cfg.network.outputs);
        let mut net = MlpNetwork::glorot_uniform(&sizes, &mut rng)?;
        let mut tc = train_config_from(cfg, seed, n)?;
        tc.snapshot_every = cfg.train.epochs; // metrics only at 0 and the end
        let record = train(&mut net, &x, &y, &tc)?;
        let report = dead_neuron_census(&net, &x)?;
        Ok((report, record.diverged))
    });

    let mut per_trial = Vec::with_capacity(cfg.n_trials);
    let mut diverged_trials = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let (report, diverged) = r?;
        if diverged {
            diverged_trials.push(i);
        }
        per_trial.push(report);
    }
    let used: Vec<&CensusReport> = per_trial
        .iter()
        .enumerate()
        .filter(|(i, _)| !diverged_trials.contains(i))
        .map(|(_, r)| r)
        .collect();
    if used.is_empty() {
        return Err(Error::InvalidArgument(
            "degenerate: every trial diverged".into(),
        ));
    }
    let layers = (0..depth)
        .map(|l| {
            let neurons = used[0].layers[l].neurons;
            let mean_dead =
                used.iter().map(|r| r.layers[l].dead as f64).sum::<f64>() / used.len() as f64;
            let mean_frac =
                used.iter().map(|r| r.layers[l].frac).sum::<f64>() / used.len() as f64;
            DegenerateLayer {
                layer: l + 1,
                neurons,
                mean_dead,
                mean_frac,
            }
        })
        .collect();
    Ok(DegenerateOutcome {
        layers,
        per_trial,
        diverged_trials,
    })
}

// ---------------------------------------------------------------------------
// size-heatmap (plain and batched)

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapOutcome {
    pub depth: usize,
    pub mse: HeatmapGrid,
    pub size: HeatmapGrid,
    /// Mean over trials of the perfect-fit reference, per dataset size.
    pub perfect_fit_mean: Vec<f64>,
    pub n_diverged: usize,
}

/// Checkpoint epochs used as heatmap columns: every `snapshot_every` epochs,
/// plus the final epoch (pre-training epoch 0 is not a column).
fn heatmap_epochs(epochs: usize, every: usize) -> Vec<usize> {
    let mut cols: Vec<usize> = (1..=epochs / every).map(|k| k * every).collect();
    if cols.last() != Some(&epochs) {
        cols.push(epochs);
    }
    cols
}

/// Train across a (dataset size x epoch) grid for each depth: networks on
/// fresh Gaussian data per trial, mean training MSE and mean sum-of-squares
/// size per cell.
pub fn run_size_heatmap(cfg: &ExperimentConfig) -> Result<Vec<HeatmapOutcome>> {
    let depths = cfg.network.depths.clone().expect("validated");
    let ns = cfg.data.sizes.clone().expect("validated");
    let cols = heatmap_epochs(cfg.train.epochs, cfg.train.snapshot_every);

    let mut outcomes = Vec::with_capacity(depths.len());
    for &depth in &depths {
        let sizes = cfg.network.layer_sizes(depth);
        let mut mse_cells = Vec::with_capacity(ns.len());
        let mut size_cells = Vec::with_capacity(ns.len());
        let mut perfect_fit_mean = Vec::with_capacity(ns.len());
        let mut n_diverged = 0;
        for &n in &ns {
            let runner = |seed: u64, _i: usize| -> Result<TrialRecord> {
                let mut rng = RngStream::new(seed);
                let x = rng.standard_normal(n, cfg.network.inputs);
                let y = rng.standard_normal(n, cfg.network.outputs);
                let mut net = MlpNetwork::glorot_uniform(&sizes, &mut rng)?;
                let mut tc = train_config_from(cfg, seed, n)?;
                tc.record_size = true;
                train(&mut net, &x, &y, &tc)
            };
            let agg = run_trials(cfg.base_seed, cfg.n_trials, runner)?;
            n_diverged += agg.diverged_trials.len();
            // epoch 0 is the first aggregate entry; the grid starts at the
            // first post-training checkpoint
            debug_assert_eq!(agg.epochs[0], 0);
            debug_assert_eq!(&agg.epochs[1..], cols.as_slice());
            mse_cells.push(agg.mean_mse[1..].to_vec());
            let mean_size = agg
                .mean_size
                .as_ref()
                .expect("record_size was set")[1..]
                .to_vec();
            size_cells.push(mean_size);
            // mean perfect-fit reference over trials, regenerating the
            // targets from the trial seeds
            let mut acc = 0.0;
            for i in 0..cfg.n_trials {
                let mut rng = RngStream::new(cfg.base_seed + i as u64);
                let _x = rng.standard_normal(n, cfg.network.inputs);
                let y = rng.standard_normal(n, cfg.network.outputs);
                acc += perfect_fit_reference(&y);
            }
            perfect_fit_mean.push(acc / cfg.n_trials as f64);
        }
        outcomes.push(HeatmapOutcome {
            depth,
            mse: HeatmapGrid::new(ns.clone(), cols.clone(), mse_cells)?,
            size: HeatmapGrid::new(ns.clone(), cols.clone(), size_cells)?,
            perfect_fit_mean,
            n_diverged,
        });
    }
    Ok(outcomes)
}

// ---------------------------------------------------------------------------
// stuck

#[derive(Debug, Clone, PartialEq)]
pub struct StuckDump {
    pub trial: usize,
    pub epoch: usize,
    /// Network outputs on the evaluation grid.
    pub values: Vec<f64>,
    pub pwl: PwlFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StuckOutcome {
    pub grid: Vec<f64>,
    pub x: Matrix,
    pub y: Matrix,
    pub dumps: Vec<StuckDump>,
    pub records: Vec<TrialRecord>,
}

/// Train on a high-frequency sawtooth and dump the learned function at the
/// configured epochs.
pub fn run_stuck(cfg: &ExperimentConfig) -> Result<StuckOutcome> {
    let depth = cfg.network.hidden_layers.expect("validated");
    let sizes = cfg.network.layer_sizes(depth);
    let n = cfg.data.n_points.expect("validated");
    let teeth = cfg.data.n_teeth.unwrap_or(16);
    let [a, b] = cfg.data.domain;
    let (x, y) = sawtooth_dataset(n, teeth, a, b)?;
    let dump_epochs = cfg.train.checkpoints.clone().expect("validated");
    let grid = uniform_grid(a, b, EVAL_GRID_POINTS);

    let results = parallel::map_indexed(cfg.n_trials, |i| -> Result<(Vec<StuckDump>, TrialRecord)> {
        let seed = cfg.base_seed + i as u64;
        let mut rng = RngStream::new(seed);
        let mut net = MlpNetwork::glorot_uniform(&sizes, &mut rng)?;
        let mut tc = train_config_from(cfg, seed, n)?;
        tc.snapshot_every = cfg.train.snapshot_every.max(cfg.train.epochs / 10).max(1);
        let mut dumps = Vec::new();
        let mut observer_err = None;
        let record = train_observed(&mut net, &x, &y, &tc, &dump_epochs, |epoch, snapshot| {
            if observer_err.is_some() {
                return;
            }
            match (snapshot.eval_at(&grid), extract_pwl(snapshot, a, b)) {
                (Ok(values), Ok(pwl)) => dumps.push(StuckDump {
                    trial: i,
                    epoch,
                    values,
                    pwl,
                }),
                (Err(e), _) | (_, Err(e)) => observer_err = Some(e),
            }
        })?;
        if let Some(e) = observer_err {
            return Err(e);
        }
        Ok((dumps, record))
    });

    let mut dumps = Vec::new();
    let mut records = Vec::new();
    for r in results {
        let (d, rec) = r?;
        dumps.extend(d);
        records.push(rec);
    }
    Ok(StuckOutcome {
        grid,
        x,
        y,
        dumps,
        records,
    })
}

// ---------------------------------------------------------------------------
// linearity

#[derive(Debug, Clone, PartialEq)]
pub struct LinearityOutcome {
    pub data: SplineData,
    pub noise_sigma: f64,
    pub result: DecompositionResult,
    /// Per-trial carrier-boost runs, when enabled.
    pub boost: Option<Vec<BoostResult>>,
}

/// Sample standard deviation of a column.
fn sample_sd(m: &Matrix) -> f64 {
    let n = m.data().len() as f64;
    let mean = m.data().iter().sum::<f64>() / n;
    if m.data().len() < 2 {
        return 0.0;
    }
    let var = m
        .data()
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (n - 1.0);
    var.sqrt()
}

/// The spline-plus-noise decomposition: train ensembles on noisy, clean, and
/// noise-only targets from shared initializations and compare the two
/// approximations to the noise over training time.
pub fn run_linearity(cfg: &ExperimentConfig) -> Result<LinearityOutcome> {
    let depth = cfg.network.hidden_layers.expect("validated");
    let sizes = cfg.network.layer_sizes(depth);
    let n = cfg.data.n_points.expect("validated");
    let knots = cfg.data.spline_knots.unwrap_or(8);
    let [a, b] = cfg.data.domain;
    let checkpoints = cfg.train.checkpoints.clone().expect("validated");
    let grid = uniform_grid(a, b, EVAL_GRID_POINTS);

    // the dataset is shared across trials and comes from the base seed itself
    let mut data_rng = RngStream::new(cfg.base_seed);
    let spline = random_linear_spline(knots, a, b, &mut data_rng)?;
    let noise_sigma = match cfg.noise_sigma()? {
        Some(v) => v,
        None => {
            let xs = uniform_grid(a, b, n);
            let clean: Vec<f64> = xs.iter().map(|&t| spline.eval(t)).collect();
            AUTO_NOISE_RATIO * sample_sd(&Matrix::from_vec_unchecked(n, 1, clean))
        }
    };
    let data = spline_plus_noise(&spline, n, noise_sigma, &mut data_rng)?;

    let mut tc = train_config_from(cfg, cfg.base_seed + 1, n)?;
    tc.snapshot_every = cfg.train.epochs; // metrics come from the checkpoints
    let result = noise_decomposition(&data, &sizes, &tc, cfg.n_trials, &checkpoints, &grid)?;

    let boost = if cfg.train.boost {
        let runs = parallel::map_indexed(cfg.n_trials, |k| -> Result<BoostResult> {
            let mut trial_tc = tc.clone();
            trial_tc.seed = cfg.base_seed + 1 + k as u64;
            artificial_boost(&data.x, &data.noise, &spline, &sizes, &trial_tc, &grid)
        });
        let mut out = Vec::with_capacity(cfg.n_trials);
        for r in runs {
            out.push(r?);
        }
        Some(out)
    } else {
        None
    };

    Ok(LinearityOutcome {
        data,
        noise_sigma,
        result,
        boost,
    })
}

// ---------------------------------------------------------------------------
// file outputs

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn manifest(cfg: &ExperimentConfig, extra: &[(String, String)]) -> String {
    let mut out = String::new();
    out.push_str("manifest_version: 1\n");
    let _ = writeln!(out, "tool: reluscope {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "format: net {}", crate::network::NET_FORMAT_VERSION);
    let _ = writeln!(out, "experiment: {}", cfg.experiment);
    let _ = writeln!(out, "base_seed: {}", cfg.base_seed);
    let _ = writeln!(out, "n_trials: {}", cfg.n_trials);
    for (k, v) in extra {
        let _ = writeln!(out, "{k}: {v}");
    }
    out.push_str("config: |\n");
    for line in cfg.to_toml().lines() {
        let _ = writeln!(out, "  {line}");
    }
    out
}

fn xy_csv(x: &Matrix, y: &Matrix) -> String {
    let mut out = String::from("x,y\n");
    for i in 0..x.rows() {
        let _ = writeln!(out, "{},{}", fmt_f64(x.get(i, 0)), fmt_f64(y.get(i, 0)));
    }
    out
}

fn grid_fn_csv(grid: &[f64], values: &[f64]) -> String {
    let mut out = String::from("x,f\n");
    for (x, v) in grid.iter().zip(values) {
        let _ = writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*v));
    }
    out
}

/// Run the experiment named by the config and write its artifacts into
/// `out_dir` (created if needed). Returns the written paths, manifest first.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();
    match cfg.experiment {
        ExperimentKind::Degenerate => {
            let outcome = run_degenerate(cfg)?;
            let mut mean = String::from("layer,neurons,dead,frac\n");
            for l in &outcome.layers {
                let _ = writeln!(
                    mean,
                    "{},{},{},{}",
                    l.layer,
                    l.neurons,
                    fmt_f64(l.mean_dead),
                    fmt_f64(l.mean_frac)
                );
            }
            let mut trials = String::from("trial,layer,neurons,dead,frac\n");
            for (t, report) in outcome.per_trial.iter().enumerate() {
                for l in &report.layers {
                    let _ = writeln!(
                        trials,
                        "{t},{},{},{},{}",
                        l.layer,
                        l.neurons,
                        l.dead,
                        fmt_f64(l.frac)
                    );
                }
            }
            let extra = vec![(
                "diverged_trials".to_string(),
                outcome.diverged_trials.len().to_string(),
            )];
            files.push(write_file(out_dir, "manifest.txt", &manifest(cfg, &extra))?);
            files.push(write_file(out_dir, "census_mean.csv", &mean)?);
            files.push(write_file(out_dir, "census_trials.csv", &trials)?);
        }
        ExperimentKind::SizeHeatmap | ExperimentKind::SizeHeatmapBatched => {
            let outcomes = run_size_heatmap(cfg)?;
            let n_diverged: usize = outcomes.iter().map(|o| o.n_diverged).sum();
            let extra = vec![("diverged_trials".to_string(), n_diverged.to_string())];
            files.push(write_file(out_dir, "manifest.txt", &manifest(cfg, &extra))?);
            let mut perfect = String::from("depth,n,mean_perfect_fit\n");
            for o in &outcomes {
                for (n, v) in o.mse.rows.iter().zip(&o.perfect_fit_mean) {
                    let _ = writeln!(perfect, "{},{n},{}", o.depth, fmt_f64(*v));
                }
                let d = o.depth;
                files.push(write_file(out_dir, &format!("mse_depth{d}.csv"), &o.mse.to_csv())?);
                files.push(write_file(
                    out_dir,
                    &format!("size_depth{d}.csv"),
                    &o.size.to_csv(),
                )?);
                let style = |metric: &str| HeatmapStyle {
                    title: Some(format!("{metric}, depth {d}")),
                    bounds: None,
                };
                files.push(write_file(
                    out_dir,
                    &format!("mse_depth{d}.svg"),
                    &render_heatmap(&o.mse, &style("mse"))?,
                )?);
                files.push(write_file(
                    out_dir,
                    &format!("size_depth{d}.svg"),
                    &render_heatmap(&o.size, &style("size"))?,
                )?);
            }
            files.push(write_file(out_dir, "perfect_fit.csv", &perfect)?);
        }
        ExperimentKind::Stuck => {
            let outcome = run_stuck(cfg)?;
            files.push(write_file(out_dir, "manifest.txt", &manifest(cfg, &[]))?);
            files.push(write_file(out_dir, "target.csv", &xy_csv(&outcome.x, &outcome.y))?);
            for d in &outcome.dumps {
                files.push(write_file(
                    out_dir,
                    &format!("trial{}_epoch{}_fn.csv", d.trial, d.epoch),
                    &grid_fn_csv(&outcome.grid, &d.values),
                )?);
                files.push(write_file(
                    out_dir,
                    &format!("trial{}_epoch{}_pwl.csv", d.trial, d.epoch),
                    &d.pwl.to_csv(),
                )?);
            }
        }
        ExperimentKind::Linearity => {
            let outcome = run_linearity(cfg)?;
            let extra = vec![
                ("noise_sigma".to_string(), fmt_f64(outcome.noise_sigma)),
                (
                    "diverged_trials".to_string(),
                    outcome.result.diverged_trials.len().to_string(),
                ),
            ];
            files.push(write_file(out_dir, "manifest.txt", &manifest(cfg, &extra))?);
            let mut data_csv = String::from("x,y_clean,noise,y_noisy\n");
            for i in 0..outcome.data.x.rows() {
                let _ = writeln!(
                    data_csv,
                    "{},{},{},{}",
                    fmt_f64(outcome.data.x.get(i, 0)),
                    fmt_f64(outcome.data.y_clean.get(i, 0)),
                    fmt_f64(outcome.data.noise.get(i, 0)),
                    fmt_f64(outcome.data.y_noisy.get(i, 0))
                );
            }
            files.push(write_file(out_dir, "data.csv", &data_csv)?);
            files.push(write_file(
                out_dir,
                "decomposition.csv",
                &outcome.result.metrics_csv(),
            )?);
            for (c, epoch) in outcome.result.checkpoint_epochs.iter().enumerate() {
                files.push(write_file(
                    out_dir,
                    &format!("functions_epoch{epoch}.csv"),
                    &outcome.result.functions_csv(c),
                )?);
            }
            if let Some(boost) = &outcome.boost {
                let mut summary = String::from("trial,mse_vs_noise\n");
                for (k, run) in boost.iter().enumerate() {
                    let _ = writeln!(summary, "{k},{}", fmt_f64(run.mse_vs_noise));
                    let mut dump = String::from("x,trained,carrier,denoised\n");
                    for (g, x) in run.grid.iter().enumerate() {
                        let _ = writeln!(
                            dump,
                            "{},{},{},{}",
                            fmt_f64(*x),
                            fmt_f64(run.trained[g]),
                            fmt_f64(run.carrier[g]),
                            fmt_f64(run.denoised[g])
                        );
                    }
                    files.push(write_file(out_dir, &format!("boost_trial{k}.csv"), &dump)?);
                }
                files.push(write_file(out_dir, "boost.csv", &summary)?);
            }
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_epoch_columns() {
        assert_eq!(heatmap_epochs(5000, 500), (1..=10).map(|k| k * 500).collect::<Vec<_>>());
        assert_eq!(heatmap_epochs(7, 3), vec![3, 6, 7]);
        assert_eq!(heatmap_epochs(4, 10), vec![4]);
    }

    #[test]
    fn desk_configs_parse_and_validate() {
        for kind in [
            ExperimentKind::Degenerate,
            ExperimentKind::SizeHeatmap,
            ExperimentKind::SizeHeatmapBatched,
            ExperimentKind::Stuck,
            ExperimentKind::Linearity,
        ] {
            let cfg = desk_config(kind);
            assert_eq!(cfg.experiment, kind);
        }
    }

    #[test]
    fn degenerate_small_run_reports_all_layers() {
        let mut cfg = desk_config(ExperimentKind::Degenerate);
        cfg.n_trials = 2;
        cfg.network.hidden_layers = Some(4);
        cfg.network.width = 16;
        cfg.data.n_points = Some(100);
        let outcome = run_degenerate(&cfg).unwrap();
        assert_eq!(outcome.layers.len(), 4);
        assert!(outcome
            .layers
            .iter()
            .all(|l| (0.0..=1.0).contains(&l.mean_frac)));
        assert_eq!(outcome.per_trial.len(), 2);
    }

    #[test]
    fn manifest_echoes_the_config() {
        let cfg = desk_config(ExperimentKind::Degenerate);
        let m = manifest(&cfg, &[("k".into(), "v".into())]);
        assert!(m.contains("experiment: degenerate"));
        assert!(m.contains("k: v"));
        assert!(m.contains("config: |"));
        // the echo round-trips
        let echoed: String = m
            .lines()
            .skip_while(|l| *l != "config: |")
            .skip(1)
            .map(|l| format!("{}\n", l.strip_prefix("  ").unwrap_or(l)))
            .collect();
        let back = ExperimentConfig::parse(&echoed).unwrap();
        assert_eq!(back, cfg);
    }
}
