// Temporary probe for calibrating acceptance expectations. Not shipped.
use std::time::Instant;

use reluscope::analysis::noise_decomposition;
use reluscope::config::ExperimentKind;
use reluscope::experiments::{desk_config, run_degenerate, run_linearity, run_size_heatmap};
use reluscope::network::MlpNetwork;
use reluscope::optim::TrainConfig;
use reluscope::pwl::{extract_pwl, random_linear_spline, spline_plus_noise, uniform_grid, DEFAULT_SLOPE_TOL};
use reluscope::rng::RngStream;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    match which.as_str() {
        "degenerate" => probe_degenerate(),
        "init" => probe_init_census(),
        "linearity" => probe_linearity(),
        "exactness" => probe_exactness(),
        "simplicity" => probe_simplicity(),
        "heatmap" => probe_heatmap(),
        _ => eprintln!("usage: probe <degenerate|linearity|exactness|simplicity|heatmap>"),
    }
}

fn probe_degenerate() {
    let epsilon: f64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1e-7);
    let epochs: usize = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let t0 = Instant::now();
    let mut cfg = desk_config(ExperimentKind::Degenerate);
    cfg.network.hidden_layers = Some(20);
    cfg.network.width = 64;
    cfg.data.n_points = Some(1000);
    cfg.n_trials = 10;
    cfg.base_seed = 7;
    cfg.train.epochs = epochs;
    cfg.train.snapshot_every = epochs;
    let lr: Option<f64> = std::env::args().nth(4).and_then(|s| s.parse().ok());
    cfg.train.adadelta = Some(reluscope::config::AdadeltaSection {
        lr,
        rho: None,
        epsilon: Some(epsilon),
    });
    let out = run_degenerate(&cfg).unwrap();
    print!("eps {epsilon:.0e} epochs {epochs}:");
    for l in [3, 10, 20] {
        print!("  L{l} {:.4}", out.layers[l - 1].mean_frac);
    }
    println!("  ({:?})", t0.elapsed());
}

fn probe_init_census() {
    use reluscope::analysis::dead_neuron_census;
    let mut fracs3 = Vec::new();
    let mut fracs10 = Vec::new();
    let mut fracs20 = Vec::new();
    for trial in 0..10u64 {
        let mut rng = RngStream::new(7 + trial);
        let x = rng.standard_normal(1000, 3);
        let _y = rng.standard_normal(1000, 1);
        let mut sizes = vec![3];
        sizes.extend(std::iter::repeat(64).take(20));
        sizes.push(1);
        let net = MlpNetwork::glorot_uniform(&sizes, &mut rng).unwrap();
        let report = dead_neuron_census(&net, &x).unwrap();
        fracs3.push(report.layers[2].frac);
        fracs10.push(report.layers[9].frac);
        fracs20.push(report.layers[19].frac);
    }
    let stat = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
        (m, sd)
    };
    println!("init L3  {:?}", stat(&fracs3));
    println!("init L10 {:?}", stat(&fracs10));
    println!("init L20 {:?}", stat(&fracs20));
}

fn probe_linearity() {
    let t0 = Instant::now();
    let cfg = desk_config(ExperimentKind::Linearity);
    let out = run_linearity(&cfg).unwrap();
    println!("sigma = {:.4}", out.noise_sigma);
    for (i, e) in out.result.checkpoint_epochs.iter().enumerate() {
        let p = out.result.mse_pure[i];
        let d = out.result.mse_diff[i];
        println!("epoch {e:>5}: pure {p:.6}  diff {d:.6}  ratio {:.3}", d / p);
    }
    println!("elapsed {:?}", t0.elapsed());
}

fn probe_exactness() {
    for sizes in [vec![1usize, 64, 1], vec![1, 64, 64, 1]] {
        let t0 = Instant::now();
        let mut rng = RngStream::new(123);
        let spline = random_linear_spline(4, -1.0, 1.0, &mut rng).unwrap();
        let data = spline_plus_noise(&spline, 8, 0.3, &mut rng).unwrap();
        let grid = uniform_grid(-1.0, 1.0, 9);
        let cfg = TrainConfig::full_batch(20_000, 200).with_snapshot_every(20_000);
        let res = noise_decomposition(&data, &sizes, &cfg, 3, &[20_000], &grid).unwrap();
        println!(
            "sizes {sizes:?}: mse_diff {:.2e}, mse_pure {:.2e}, elapsed {:?}",
            res.mse_diff[0],
            res.mse_pure[0],
            t0.elapsed()
        );
    }
}

fn probe_simplicity() {
    let t0 = Instant::now();
    for k in [2usize, 3, 4] {
        for n in [16usize, 32] {
            let mut counts = Vec::new();
            let mut over = 0;
            for trial in 0..100u64 {
                let seed = 9000 + trial;
                let mut rng = RngStream::new(seed);
                let spline = random_linear_spline(8, -1.0, 1.0, &mut rng).unwrap();
                let data = spline_plus_noise(&spline, 64, 0.3, &mut rng).unwrap();
                let mut sizes = vec![1];
                sizes.extend(std::iter::repeat(n).take(k));
                sizes.push(1);
                let mut net = MlpNetwork::glorot_uniform(&sizes, &mut rng).unwrap();
                let cfg = TrainConfig::full_batch(100, seed).with_snapshot_every(100);
                reluscope::optim::train(&mut net, &data.x, &data.y_noisy, &cfg).unwrap();
                let pwl = extract_pwl(&net, -1.0, 1.0).unwrap();
                let pieces = pwl.count_pieces(DEFAULT_SLOPE_TOL);
                counts.push(pieces);
                if pieces > 10 * n * k {
                    over += 1;
                }
            }
            let max = counts.iter().max().unwrap();
            let mean: f64 = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
            println!(
                "K={k} N={n}: bound {}, mean pieces {mean:.1}, max {max}, over-bound {over}/100",
                10 * n * k
            );
        }
    }
    println!("elapsed {:?}", t0.elapsed());
}

fn probe_heatmap() {
    let t0 = Instant::now();
    let cfg = desk_config(ExperimentKind::SizeHeatmap);
    let out = run_size_heatmap(&cfg).unwrap();
    for o in &out {
        println!("depth {}:", o.depth);
        for (r, n) in o.size.rows.iter().enumerate() {
            let cells = &o.size.cells[r];
            let reference = o.perfect_fit_mean[r];
            let max_cell = cells.iter().cloned().fold(f64::MIN, f64::max);
            println!(
                "  n={n:>4}: perfect {reference:8.1}  max size {max_cell:8.2}  first {:8.3} last {:8.3}",
                cells[0],
                cells[cells.len() - 1]
            );
        }
    }
    println!("elapsed {:?}", t0.elapsed());
}
