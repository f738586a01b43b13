//! Measurement instruments: dead-neuron census, sum-of-squares size metric,
//! perfect-fit reference, and the noise/signal training decomposition.
//!
//! A hidden neuron is *dead* when its postactivation is exactly 0.0 on every
//! sample of the dataset — no epsilon: ReLU emits exact zeros, and a
//! tolerance would silently reclassify small-but-alive neurons. Dead is
//! relative to the data, not to the whole input space.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::{mse, ForwardTrace, MlpNetwork};
use crate::optim::{train_observed, TrainConfig};
use crate::parallel;
use crate::pwl::{PwlFunction, SplineData};
use crate::rng::RngStream;
use crate::util::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCensus {
    /// 1-based hidden layer index.
    pub layer: usize,
    pub neurons: usize,
    pub dead: usize,
    pub frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusReport {
    pub layers: Vec<LayerCensus>,
}

impl CensusReport {
    /// CSV `layer,neurons,dead,frac`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,neurons,dead,frac\n");
        for l in &self.layers {
            let _ = writeln!(out, "{},{},{},{}", l.layer, l.neurons, l.dead, fmt_f64(l.frac));
        }
        out
    }
}

/// Fraction of dataset-dead neurons per hidden layer, straight off a trace.
pub(crate) fn dead_fractions_from_trace(trace: &ForwardTrace, hidden_layers: usize) -> Vec<f64> {
    (1..=hidden_layers)
        .map(|l| {
            let post = trace.postactivation(l);
            let dead = count_dead(post);
            dead as f64 / post.cols() as f64
        })
        .collect()
}

fn count_dead(post: &Matrix) -> usize {
    let (rows, cols) = post.shape();
    let mut dead = 0;
    'neuron: for j in 0..cols {
        for i in 0..rows {
            if post.get(i, j) != 0.0 {
                continue 'neuron;
            }
        }
        dead += 1;
    }
    dead
}

/// Count hidden neurons whose postactivation is exactly zero on every sample
/// of `x`.
pub fn dead_neuron_census(net: &MlpNetwork, x: &Matrix) -> Result<CensusReport> {
    if x.rows() == 0 {
        return Err(Error::InvalidArgument(
            "dead_neuron_census: empty dataset".into(),
        ));
    }
    let trace = net.forward(x)?;
    let layers = (1..=net.hidden_layers())
        .map(|l| {
            let post = trace.postactivation(l);
            let dead = count_dead(post);
            LayerCensus {
                layer: l,
                neurons: post.cols(),
                dead,
                frac: dead as f64 / post.cols() as f64,
            }
        })
        .collect();
    Ok(CensusReport { layers })
}

/// Sum of squared predictions over samples and output dimensions (a sum,
/// not a mean): the operational Gaussian-complexity size of the model on
/// this data.
pub fn size_metric(net: &MlpNetwork, x: &Matrix) -> Result<f64> {
    Ok(net.output(x)?.sum_of_squares())
}

/// Sum of squared targets: the size a zero-error fit would attain.
pub fn perfect_fit_reference(y: &Matrix) -> f64 {
    y.sum_of_squares()
}

/// Pointwise mean of 1-in/1-out network outputs over an ensemble.
pub fn ensemble_mean_function(nets: &[MlpNetwork], grid: &[f64]) -> Result<Vec<f64>> {
    if nets.is_empty() {
        return Err(Error::InvalidArgument(
            "ensemble_mean_function: empty ensemble".into(),
        ));
    }
    for net in nets {
        if net.input_dim() != 1 || net.output_dim() != 1 {
            return Err(Error::NotOneDimensional {
                d_in: net.input_dim(),
                d_out: net.output_dim(),
            });
        }
    }
    let mut mean = vec![0.0; grid.len()];
    for net in nets {
        let vals = net.eval_at(grid)?;
        for (m, v) in mean.iter_mut().zip(&vals) {
            *m += v;
        }
    }
    let inv = 1.0 / nets.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    Ok(mean)
}

/// Outputs of the three-ensemble decomposition experiment.
///
/// `mse_pure[c]` is the mean over trials of MSE(noise-trained net, noise) at
/// checkpoint c; `mse_diff[c]` is the mean over trials of MSE(diff_k, noise)
/// with `diff_k = f_k^{noisy} - mean_j f_j^{clean}` evaluated at the training
/// inputs. Function dumps (`f_*`) are on the evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub checkpoint_epochs: Vec<usize>,
    pub mse_pure: Vec<f64>,
    pub mse_diff: Vec<f64>,
    pub grid: Vec<f64>,
    /// `[checkpoint][trial][grid point]`
    pub f_noisy: Vec<Vec<Vec<f64>>>,
    pub f_noise: Vec<Vec<Vec<f64>>>,
    /// `[checkpoint][grid point]`: ensemble mean of the clean-trained nets.
    pub f_clean_mean: Vec<Vec<f64>>,
    pub diverged_trials: Vec<usize>,
}

struct TrialFunctions {
    noisy_train: Vec<Matrix>,
    noisy_grid: Vec<Vec<f64>>,
    clean_train: Vec<Matrix>,
    clean_grid: Vec<Vec<f64>>,
    noise_train: Vec<Matrix>,
    noise_grid: Vec<Vec<f64>>,
    diverged: bool,
}

/// Train three ensembles — on the noisy targets, the clean targets, and the
/// noise itself — from identical per-trial initializations (trial k is
/// seeded `config.seed + k`), and compare the two routes to the noise at
/// each checkpoint.
pub fn noise_decomposition(
    data: &SplineData,
    layer_sizes: &[usize],
    config: &TrainConfig,
    n_trials: usize,
    checkpoints: &[usize],
    grid: &[f64],
) -> Result<DecompositionResult> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument(
            "noise_decomposition: need n_trials >= 1".into(),
        ));
    }
    if checkpoints.is_empty() {
        return Err(Error::InvalidArgument(
            "noise_decomposition: need at least one checkpoint".into(),
        ));
    }
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "noise_decomposition: checkpoints must be nondecreasing".into(),
        ));
    }
    if *checkpoints.last().unwrap() > config.epochs {
        return Err(Error::InvalidArgument(format!(
            "noise_decomposition: checkpoint {} exceeds epochs {}",
            checkpoints.last().unwrap(),
            config.epochs
        )));
    }

    let results = parallel::map_indexed(n_trials, |k| -> Result<TrialFunctions> {
        let seed = config.seed + k as u64;
        let mut init_rng = RngStream::new(seed);
        let net0 = MlpNetwork::glorot_uniform(layer_sizes, &mut init_rng)?;
        let mut trial_cfg = config.clone();
        trial_cfg.seed = seed;
        let run = |target: &Matrix| -> Result<(Vec<Matrix>, Vec<Vec<f64>>, bool)> {
            let mut net = net0.clone();
            let mut at_train = Vec::with_capacity(checkpoints.len());
            let mut at_grid = Vec::with_capacity(checkpoints.len());
            let mut observer_err = None;
            let record = train_observed(
                &mut net,
                &data.x,
                target,
                &trial_cfg,
                checkpoints,
                |_, snapshot| {
                    if observer_err.is_some() {
                        return;
                    }
                    match (snapshot.output(&data.x), snapshot.eval_at(grid)) {
                        (Ok(t), Ok(g)) => {
                            at_train.push(t);
                            at_grid.push(g);
                        }
                        (Err(e), _) | (_, Err(e)) => observer_err = Some(e),
                    }
                },
            )?;
            if let Some(e) = observer_err {
                return Err(e);
            }
            Ok((at_train, at_grid, record.diverged))
        };
        let (noisy_train, noisy_grid, d1) = run(&data.y_noisy)?;
        let (clean_train, clean_grid, d2) = run(&data.y_clean)?;
        let (noise_train, noise_grid, d3) = run(&data.noise)?;
        Ok(TrialFunctions {
            noisy_train,
            noisy_grid,
            clean_train,
            clean_grid,
            noise_train,
            noise_grid,
            diverged: d1 || d2 || d3,
        })
    });

    let mut trials = Vec::with_capacity(n_trials);
    for r in results {
        trials.push(r?);
    }
    let diverged_trials: Vec<usize> = trials
        .iter()
        .enumerate()
        .filter(|(_, t)| t.diverged)
        .map(|(k, _)| k)
        .collect();
    let used: Vec<&TrialFunctions> = trials.iter().filter(|t| !t.diverged).collect();
    if used.is_empty() {
        return Err(Error::InvalidArgument(
            "noise_decomposition: every trial diverged".into(),
        ));
    }

    // checkpoints may repeat in the input; dedup to the observer's schedule
    let mut unique_cp: Vec<usize> = checkpoints.to_vec();
    unique_cp.dedup();
    let n_cp = unique_cp.len();
    debug_assert!(used.iter().all(|t| t.noisy_train.len() == n_cp));

    let n_used = used.len() as f64;
    let mut mse_pure = Vec::with_capacity(n_cp);
    let mut mse_diff = Vec::with_capacity(n_cp);
    let mut f_noisy = Vec::with_capacity(n_cp);
    let mut f_noise = Vec::with_capacity(n_cp);
    let mut f_clean_mean = Vec::with_capacity(n_cp);
    for c in 0..n_cp {
        // ensemble mean of the clean-trained nets at the training inputs
        let mut clean_mean = Matrix::zeros(data.x.rows(), 1);
        for t in &used {
            let m = &t.clean_train[c];
            for (acc, v) in clean_mean.data_mut().iter_mut().zip(m.data()) {
                *acc += v;
            }
        }
        for v in clean_mean.data_mut() {
            *v /= n_used;
        }

        let mut pure_acc = 0.0;
        let mut diff_acc = 0.0;
        for t in &used {
            pure_acc += mse(&t.noise_train[c], &data.noise)?;
            let diff = t.noisy_train[c].sub(&clean_mean)?;
            diff_acc += mse(&diff, &data.noise)?;
        }
        mse_pure.push(pure_acc / n_used);
        mse_diff.push(diff_acc / n_used);

        f_noisy.push(used.iter().map(|t| t.noisy_grid[c].clone()).collect());
        f_noise.push(used.iter().map(|t| t.noise_grid[c].clone()).collect());
        let mut grid_mean = vec![0.0; grid.len()];
        for t in &used {
            for (m, v) in grid_mean.iter_mut().zip(&t.clean_grid[c]) {
                *m += v;
            }
        }
        for m in &mut grid_mean {
            *m /= n_used;
        }
        f_clean_mean.push(grid_mean);
    }

    Ok(DecompositionResult {
        checkpoint_epochs: unique_cp,
        mse_pure,
        mse_diff,
        grid: grid.to_vec(),
        f_noisy,
        f_noise,
        f_clean_mean,
        diverged_trials,
    })
}

impl DecompositionResult {
    /// CSV `checkpoint,mse_pure,mse_diff`.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("checkpoint,mse_pure,mse_diff\n");
        for (c, epoch) in self.checkpoint_epochs.iter().enumerate() {
            let _ = writeln!(
                out,
                "{epoch},{},{}",
                fmt_f64(self.mse_pure[c]),
                fmt_f64(self.mse_diff[c])
            );
        }
        out
    }

    /// Per-trial function dump at one checkpoint:
    /// `trial,x,f_noisy,f_clean_mean,f_noise,diff`.
    pub fn functions_csv(&self, checkpoint_index: usize) -> String {
        let mut out = String::from("trial,x,f_noisy,f_clean_mean,f_noise,diff\n");
        let c = checkpoint_index;
        for (k, (noisy, noise)) in self.f_noisy[c].iter().zip(&self.f_noise[c]).enumerate() {
            for (g, &x) in self.grid.iter().enumerate() {
                let clean_mean = self.f_clean_mean[c][g];
                let _ = writeln!(
                    out,
                    "{k},{},{},{},{},{}",
                    fmt_f64(x),
                    fmt_f64(noisy[g]),
                    fmt_f64(clean_mean),
                    fmt_f64(noise[g]),
                    fmt_f64(noisy[g] - clean_mean)
                );
            }
        }
        out
    }
}

/// Result of the carrier-boost workflow: train on noise + carrier, subtract
/// the known carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostResult {
    pub grid: Vec<f64>,
    /// Trained network on the grid.
    pub trained: Vec<f64>,
    /// Carrier on the grid.
    pub carrier: Vec<f64>,
    /// `trained - carrier`: the denoised approximation to the noise.
    pub denoised: Vec<f64>,
    /// MSE of (trained - carrier) against the noise at the training inputs.
    pub mse_vs_noise: f64,
    pub diverged: bool,
}

/// Fit the noise by adding a known low-frequency carrier, training on the
/// sum, and subtracting the carrier afterwards.
pub fn artificial_boost(
    x: &Matrix,
    noise: &Matrix,
    carrier: &PwlFunction,
    layer_sizes: &[usize],
    config: &TrainConfig,
    grid: &[f64],
) -> Result<BoostResult> {
    if x.rows() != noise.rows() || x.cols() != 1 {
        return Err(Error::dim(
            "artificial_boost",
            format!("{}x1 inputs", x.rows()),
            format!("{}x{} noise", noise.rows(), noise.cols()),
        ));
    }
    let carrier_at_x: Vec<f64> = x.data().iter().map(|&t| carrier.eval(t)).collect();
    let target_data: Vec<f64> = noise
        .data()
        .iter()
        .zip(&carrier_at_x)
        .map(|(n, c)| n + c)
        .collect();
    let target = Matrix::from_vec(noise.rows(), 1, target_data)?;

    let mut init_rng = RngStream::new(config.seed);
    let mut net = MlpNetwork::glorot_uniform(layer_sizes, &mut init_rng)?;
    let record = crate::optim::train(&mut net, x, &target, config)?;

    let trained_at_x = net.output(x)?;
    let denoised_at_x: Vec<f64> = trained_at_x
        .data()
        .iter()
        .zip(&carrier_at_x)
        .map(|(t, c)| t - c)
        .collect();
    let mse_vs_noise = mse(&Matrix::from_vec_unchecked(x.rows(), 1, denoised_at_x), noise)?;

    let trained = net.eval_at(grid)?;
    let carrier_on_grid: Vec<f64> = grid.iter().map(|&t| carrier.eval(t)).collect();
    let denoised: Vec<f64> = trained
        .iter()
        .zip(&carrier_on_grid)
        .map(|(t, c)| t - c)
        .collect();
    Ok(BoostResult {
        grid: grid.to_vec(),
        trained,
        carrier: carrier_on_grid,
        denoised,
        mse_vs_noise,
        diverged: record.diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::BatchPolicy;
    use crate::pwl::{random_linear_spline, spline_plus_noise, uniform_grid};

    #[test]
    fn census_finds_constructed_dead_and_alive_neurons() {
        // neuron 0: zero weights, bias -1 => dead anywhere
        // neuron 1: zero weights, bias +1 => alive anywhere
        let net = MlpNetwork::from_parameters(
            vec![1, 2, 1],
            vec![
                Matrix::from_vec(2, 1, vec![0.0, 0.0]).unwrap(),
                Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap(),
            ],
            vec![vec![-1.0, 1.0], vec![0.0]],
        )
        .unwrap();
        let x = Matrix::column(&[-5.0, 0.0, 5.0]).unwrap();
        let report = dead_neuron_census(&net, &x).unwrap();
        assert_eq!(report.layers.len(), 1);
        assert_eq!(report.layers[0].neurons, 2);
        assert_eq!(report.layers[0].dead, 1);
        assert_eq!(report.layers[0].frac, 0.5);
    }

    #[test]
    fn census_rejects_empty_dataset() {
        let mut rng = RngStream::new(0);
        let net = MlpNetwork::glorot_uniform(&[1, 4, 1], &mut rng).unwrap();
        assert!(dead_neuron_census(&net, &Matrix::zeros(0, 1)).is_err());
    }

    #[test]
    fn census_is_monotone_under_data_growth() {
        let mut rng = RngStream::new(44);
        let net = MlpNetwork::glorot_uniform(&[2, 32, 32, 1], &mut rng).unwrap();
        let big = rng.standard_normal(200, 2);
        let small = big.select_rows(&(0..50).collect::<Vec<_>>());
        let r_small = dead_neuron_census(&net, &small).unwrap();
        let r_big = dead_neuron_census(&net, &big).unwrap();
        for (s, b) in r_small.layers.iter().zip(&r_big.layers) {
            assert!(b.dead <= s.dead, "layer {}: {} > {}", s.layer, b.dead, s.dead);
        }
    }

    #[test]
    fn size_metric_examples() {
        let mut rng = RngStream::new(1);
        let net = MlpNetwork::glorot_uniform(&[1, 8, 1], &mut rng).unwrap();
        // zero-bias fresh net predicts 0 at x = 0
        let zeros = Matrix::zeros(10, 1);
        assert_eq!(size_metric(&net, &zeros).unwrap(), 0.0);
        // identity on predictions: size == perfect-fit reference of the outputs
        let x = rng.standard_normal(50, 1);
        let out = net.output(&x).unwrap();
        assert_eq!(size_metric(&net, &x).unwrap(), perfect_fit_reference(&out));
    }

    #[test]
    fn perfect_fit_examples() {
        assert_eq!(perfect_fit_reference(&Matrix::column(&[3.0, 4.0]).unwrap()), 25.0);
        assert_eq!(perfect_fit_reference(&Matrix::zeros(7, 1)), 0.0);
        let mut rng = RngStream::new(2);
        let y = rng.standard_normal(2500, 1);
        let s = perfect_fit_reference(&y);
        // chi-squared with 2500 dof: mean 2500, 3 sigma = 3 sqrt(5000)
        let three_sigma = 3.0 * (2.0 * 2500.0f64).sqrt();
        assert!(
            (s - 2500.0).abs() < three_sigma,
            "sum of squares {s} outside 2500 +- {three_sigma}"
        );
    }

    #[test]
    fn ensemble_mean_examples() {
        let mut rng = RngStream::new(3);
        let net = MlpNetwork::glorot_uniform(&[1, 6, 1], &mut rng).unwrap();
        let grid = uniform_grid(-1.0, 1.0, 9);
        let single = ensemble_mean_function(std::slice::from_ref(&net), &grid).unwrap();
        assert_eq!(single, net.eval_at(&grid).unwrap());

        // f and -f average to zero
        let mut neg = net.clone();
        {
            let (w, b) = neg.params_mut();
            let last = w.len() - 1;
            for v in w[last].data_mut() {
                *v = -*v;
            }
            for v in &mut b[last] {
                *v = -*v;
            }
        }
        let mean = ensemble_mean_function(&[net.clone(), neg.clone()], &grid).unwrap();
        assert!(mean.iter().all(|&v| v.abs() < 1e-15), "{mean:?}");

        // permutation invariance
        let a = ensemble_mean_function(&[net.clone(), neg.clone()], &grid).unwrap();
        let b = ensemble_mean_function(&[neg, net], &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    fn small_decomposition_input(sigma: f64) -> (SplineData, Vec<f64>) {
        let mut rng = RngStream::new(77);
        let spline = random_linear_spline(4, -1.0, 1.0, &mut rng).unwrap();
        let data = spline_plus_noise(&spline, 16, sigma, &mut rng).unwrap();
        let grid = uniform_grid(-1.0, 1.0, 33);
        (data, grid)
    }

    #[test]
    fn decomposition_checkpoint_zero_reflects_initial_nets() {
        let (data, grid) = small_decomposition_input(0.25);
        let cfg = TrainConfig::full_batch(1, 500);
        let res = noise_decomposition(&data, &[1, 8, 1], &cfg, 3, &[0], &grid).unwrap();
        assert_eq!(res.checkpoint_epochs, vec![0]);
        // untrained nets: both routes measure roughly the initial spread
        assert!(res.mse_pure[0].is_finite() && res.mse_pure[0] >= 0.0);
        assert!(res.mse_diff[0].is_finite() && res.mse_diff[0] >= 0.0);
    }

    #[test]
    fn decomposition_with_zero_noise_collapses() {
        let (data, grid) = small_decomposition_input(0.0);
        let cfg = TrainConfig::full_batch(400, 501).with_snapshot_every(400);
        let res = noise_decomposition(&data, &[1, 16, 1], &cfg, 2, &[0, 400], &grid).unwrap();
        // with N = 0, the noise-trained nets chase the zero function and the
        // noisy/clean ensembles coincide, so both MSEs shrink
        assert!(res.mse_pure[1] < res.mse_pure[0]);
        assert!(res.mse_diff[1] < res.mse_diff[0]);
    }

    #[test]
    fn boost_with_zero_carrier_matches_plain_training() {
        let (data, grid) = small_decomposition_input(0.3);
        let zero_carrier = PwlFunction::new(vec![-1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let cfg = TrainConfig::full_batch(50, 42);
        let boosted =
            artificial_boost(&data.x, &data.noise, &zero_carrier, &[1, 8, 1], &cfg, &grid)
                .unwrap();

        // same seed, same data: training on noise + 0 equals training on noise
        let mut rng = RngStream::new(42);
        let mut net = MlpNetwork::glorot_uniform(&[1, 8, 1], &mut rng).unwrap();
        crate::optim::train(&mut net, &data.x, &data.noise, &cfg).unwrap();
        let direct = net.eval_at(&grid).unwrap();
        for (b, d) in boosted.denoised.iter().zip(&direct) {
            assert_eq!(b, d);
        }
    }

    #[test]
    fn boost_reconstruction_identity() {
        let (data, grid) = small_decomposition_input(0.3);
        let mut rng = RngStream::new(5);
        let carrier = random_linear_spline(4, -1.0, 1.0, &mut rng).unwrap();
        let cfg = TrainConfig::full_batch(30, 43);
        let res =
            artificial_boost(&data.x, &data.noise, &carrier, &[1, 8, 1], &cfg, &grid).unwrap();
        assert!(res.mse_vs_noise.is_finite());
        for ((d, c), t) in res.denoised.iter().zip(&res.carrier).zip(&res.trained) {
            // d is defined as t - c; adding c back reconstructs t to rounding
            let tol = 2.0 * f64::EPSILON * (1.0 + t.abs().max(c.abs()));
            assert!((d + c - t).abs() <= tol, "{d} + {c} vs {t}");
        }
    }

    #[test]
    fn decomposition_rejects_bad_checkpoints() {
        let (data, grid) = small_decomposition_input(0.1);
        let cfg = TrainConfig::full_batch(10, 0);
        assert!(noise_decomposition(&data, &[1, 4, 1], &cfg, 1, &[5, 3], &grid).is_err());
        assert!(noise_decomposition(&data, &[1, 4, 1], &cfg, 1, &[11], &grid).is_err());
        assert!(noise_decomposition(&data, &[1, 4, 1], &cfg, 0, &[1], &grid).is_err());
    }

    #[test]
    fn decomposition_respects_batch_policy_determinism() {
        let (data, grid) = small_decomposition_input(0.2);
        let cfg = TrainConfig::full_batch(20, 9)
            .with_policy(BatchPolicy::FixedWithRemainder(5))
            .with_snapshot_every(10);
        let a = noise_decomposition(&data, &[1, 8, 1], &cfg, 2, &[10, 20], &grid).unwrap();
        let b = noise_decomposition(&data, &[1, 8, 1], &cfg, 2, &[10, 20], &grid).unwrap();
        assert_eq!(a, b);
    }
}
