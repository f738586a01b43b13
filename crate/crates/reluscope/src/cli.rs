//! Command-line interface.
//!
//! ```text
//! reluscope experiment run <name> [--config FILE] [--trials K] [--seed S] [--out DIR]
//! reluscope train --shape 1,32,32,1 --data spline-noise --epochs 2000 --out DIR ...
//! reluscope census --net FILE --data FILE [--out FILE]
//! reluscope size --net FILE --data FILE
//! reluscope pwl extract --net FILE [--domain A B] [--line "p0,..;v0,.."] [--out FILE]
//! reluscope plot heatmap <CSV> [--out FILE] [--title T]
//! ```

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{dead_neuron_census, size_metric};
use crate::config::{load_config, ExperimentKind};
use crate::error::{Error, Result};
use crate::experiments::{desk_config, run_experiment};
use crate::heatmap::{render_heatmap, HeatmapGrid, HeatmapStyle};
use crate::matrix::Matrix;
use crate::network::{self, MlpNetwork};
use crate::optim::{train, trial_records_csv, BatchPolicy, TrainConfig};
use crate::pwl::{
    extract_pwl, random_linear_spline, restrict_to_line, sawtooth_dataset, spline_plus_noise,
    uniform_grid, DEFAULT_SLOPE_TOL,
};
use crate::rng::RngStream;
use crate::util::fmt_f64;

#[derive(Parser, Debug)]
#[command(
    name = "reluscope",
    version,
    about = "Train small dense ReLU networks and analyze them as piecewise-linear functions"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a built-in experiment and write its CSV/SVG artifacts
    Experiment {
        #[command(subcommand)]
        command: ExperimentCommand,
    },
    /// Train one network on a generated dataset
    Train(TrainArgs),
    /// Dead-neuron census of a saved network on a dataset
    Census(CensusArgs),
    /// Sum-of-squares size of a saved network on a dataset
    Size(SizeArgs),
    /// Piecewise-linear analysis of saved networks
    Pwl {
        #[command(subcommand)]
        command: PwlCommand,
    },
    /// Render plots from experiment CSVs
    Plot {
        #[command(subcommand)]
        command: PlotCommand,
    },
}

#[derive(Subcommand, Debug)]
enum ExperimentCommand {
    /// Run one of: degenerate, size-heatmap, size-heatmap-batched, stuck,
    /// linearity. Uses the built-in desk config unless --config is given.
    Run {
        /// Experiment name
        name: String,
        /// Config file (TOML); defaults to the built-in desk tier
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the config's trial count
        #[arg(long)]
        trials: Option<usize>,
        /// Override the config's base seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: out/<name>)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Comma-separated layer sizes, e.g. 1,32,32,1
    #[arg(long)]
    shape: String,
    /// Dataset generator: gaussian | sawtooth | spline-noise
    #[arg(long)]
    data: String,
    /// Number of training points
    #[arg(long, default_value_t = 256)]
    points: usize,
    /// Sawtooth teeth (sawtooth data)
    #[arg(long, default_value_t = 16)]
    teeth: usize,
    /// Spline knots (spline-noise data)
    #[arg(long, default_value_t = 8)]
    knots: usize,
    /// Noise level for spline-noise: a number or "auto"
    #[arg(long, default_value = "auto")]
    sigma: String,
    /// Input domain for the 1-D generators
    #[arg(long, num_args = 2, value_names = ["A", "B"], default_values_t = [-1.0, 1.0])]
    domain: Vec<f64>,
    #[arg(long)]
    epochs: usize,
    /// Batching: full | fixed:SIZE | fixed-drop:SIZE | random:SIZExSTEPS
    #[arg(long, default_value = "full")]
    batch: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint cadence in epochs
    #[arg(long, default_value_t = 1)]
    snapshot_every: usize,
    /// Record the dead-neuron census at each checkpoint
    #[arg(long)]
    census: bool,
    /// Record the sum-of-squares size at each checkpoint
    #[arg(long)]
    size: bool,
    /// Output directory for net.txt, record.csv, data.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CensusArgs {
    /// Saved network (reluscope-net text format)
    #[arg(long)]
    net: PathBuf,
    /// Numeric CSV whose first columns are the network inputs
    #[arg(long)]
    data: PathBuf,
    /// Write the census CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SizeArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Subcommand, Debug)]
enum PwlCommand {
    /// Extract the exact piecewise-linear form of a saved network
    Extract {
        #[arg(long)]
        net: PathBuf,
        /// Extraction interval
        #[arg(long, num_args = 2, value_names = ["A", "B"], default_values_t = [-1.0, 1.0])]
        domain: Vec<f64>,
        /// Restrict a multi-input network to a line: "p0,p1,..;v0,v1,.."
        #[arg(long)]
        line: Option<String>,
        /// Write the breakpoint CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Slope tolerance for the reported piece count
        #[arg(long, default_value_t = DEFAULT_SLOPE_TOL)]
        slope_tol: f64,
    },
}

#[derive(Subcommand, Debug)]
enum PlotCommand {
    /// Render a heatmap-grid CSV to SVG
    Heatmap {
        /// Grid CSV (as written by the size-heatmap experiments)
        csv: PathBuf,
        /// Output SVG path (default: the CSV path with .svg)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
}

/// Parse and dispatch; returns the process exit code. Errors come back as
/// one-line messages, never a panic trace.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Experiment {
            command:
                ExperimentCommand::Run {
                    name,
                    config,
                    trials,
                    seed,
                    out,
                },
        } => {
            let kind: ExperimentKind = name.parse()?;
            let mut cfg = match config {
                Some(path) => load_config(&path)?,
                None => desk_config(kind),
            };
            if cfg.experiment != kind {
                return Err(Error::Config(format!(
                    "config is for experiment {}, but {} was requested",
                    cfg.experiment, kind
                )));
            }
            if let Some(t) = trials {
                cfg.n_trials = t;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            cfg.validate()?;
            let out_dir = out
                .or_else(|| cfg.out_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out").join(kind.to_string()));
            let files = run_experiment(&cfg, &out_dir)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Train(args) => run_train(args),
        Command::Census(args) => {
            let net = network::load(&args.net)?;
            let x = read_data_csv(&args.data, net.input_dim())?;
            let report = dead_neuron_census(&net, &x)?;
            match args.out {
                Some(path) => {
                    std::fs::write(&path, report.to_csv()).map_err(|e| Error::io(&path, e))?;
                    println!("{}", path.display());
                }
                None => print!("{}", report.to_csv()),
            }
            Ok(())
        }
        Command::Size(args) => {
            let net = network::load(&args.net)?;
            let x = read_data_csv(&args.data, net.input_dim())?;
            println!("{}", fmt_f64(size_metric(&net, &x)?));
            Ok(())
        }
        Command::Pwl {
            command:
                PwlCommand::Extract {
                    net,
                    domain,
                    line,
                    out,
                    slope_tol,
                },
        } => {
            let net = network::load(&net)?;
            let (a, b) = (domain[0], domain[1]);
            let restricted;
            let target = match &line {
                Some(spec) => {
                    let (p, v) = parse_line_spec(spec, net.input_dim())?;
                    restricted = restrict_to_line(&net, &p, &v)?;
                    &restricted.net
                }
                None => &net,
            };
            let pwl = extract_pwl(target, a, b)?;
            let pieces = pwl.count_pieces(slope_tol);
            match out {
                Some(path) => {
                    std::fs::write(&path, pwl.to_csv()).map_err(|e| Error::io(&path, e))?;
                    println!("{}", path.display());
                    println!("pieces: {pieces}");
                }
                None => {
                    print!("{}", pwl.to_csv());
                    eprintln!("pieces: {pieces}");
                }
            }
            Ok(())
        }
        Command::Plot {
            command: PlotCommand::Heatmap { csv, out, title },
        } => {
            let text = std::fs::read_to_string(&csv).map_err(|e| Error::io(&csv, e))?;
            let grid = HeatmapGrid::from_csv(&text, &csv.display().to_string())?;
            let svg = render_heatmap(&grid, &HeatmapStyle { title, bounds: None })?;
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            std::fs::write(&out, svg).map_err(|e| Error::io(&out, e))?;
            println!("{}", out.display());
            Ok(())
        }
    }
}

fn run_train(args: TrainArgs) -> Result<()> {
    let shape = parse_shape(&args.shape)?;
    let (a, b) = (args.domain[0], args.domain[1]);
    let mut rng = RngStream::new(args.seed);
    let d_in = shape[0];
    let d_out = *shape.last().unwrap();
    let (x, y) = match args.data.as_str() {
        "gaussian" => {
            let x = rng.standard_normal(args.points, d_in);
            let y = rng.standard_normal(args.points, d_out);
            (x, y)
        }
        "sawtooth" => {
            require_1d(&shape, "sawtooth")?;
            sawtooth_dataset(args.points, args.teeth, a, b)?
        }
        "spline-noise" => {
            require_1d(&shape, "spline-noise")?;
            let spline = random_linear_spline(args.knots, a, b, &mut rng)?;
            let sigma = parse_sigma(&args.sigma, &spline, args.points)?;
            let data = spline_plus_noise(&spline, args.points, sigma, &mut rng)?;
            (data.x, data.y_noisy)
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "--data must be gaussian, sawtooth, or spline-noise, got {other:?}"
            )))
        }
    };
    let mut net = MlpNetwork::glorot_uniform(&shape, &mut rng)?;
    let mut tc = TrainConfig::full_batch(args.epochs, args.seed);
    tc.batch_policy = parse_batch_spec(&args.batch)?;
    tc.snapshot_every = args.snapshot_every;
    tc.record_census = args.census;
    tc.record_size = args.size;
    let record = train(&mut net, &x, &y, &tc)?;

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    network::save(&net, &args.out.join("net.txt"))?;
    let record_csv = trial_records_csv(std::slice::from_ref(&record));
    let path = args.out.join("record.csv");
    std::fs::write(&path, record_csv).map_err(|e| Error::io(&path, e))?;
    let mut data_csv = String::from(
        &(0..d_in).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",")[..],
    );
    data_csv.push(',');
    data_csv.push_str(&(0..d_out).map(|i| format!("y{i}")).collect::<Vec<_>>().join(","));
    data_csv.push('\n');
    for r in 0..x.rows() {
        let row: Vec<String> = x
            .row(r)
            .iter()
            .chain(y.row(r))
            .map(|v| fmt_f64(*v))
            .collect();
        data_csv.push_str(&row.join(","));
        data_csv.push('\n');
    }
    let path = args.out.join("data.csv");
    std::fs::write(&path, data_csv).map_err(|e| Error::io(&path, e))?;

    let last = record.checkpoints.last();
    println!(
        "trained {} epochs ({} steps), final mse {}{}",
        args.epochs,
        record.total_steps,
        last.map_or_else(|| "n/a".into(), |c| fmt_f64(c.mse)),
        if record.diverged { " [diverged]" } else { "" }
    );
    println!("{}", args.out.display());
    Ok(())
}

fn require_1d(shape: &[usize], what: &str) -> Result<()> {
    if shape[0] != 1 || *shape.last().unwrap() != 1 {
        return Err(Error::InvalidArgument(format!(
            "{what} data needs a 1-input 1-output network, got shape {shape:?}"
        )));
    }
    Ok(())
}

fn parse_shape(spec: &str) -> Result<Vec<usize>> {
    let sizes: Vec<usize> = spec
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidArgument(format!("bad --shape entry {t:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidArgument(format!(
            "--shape needs at least input,output sizes, all >= 1, got {spec:?}"
        )));
    }
    Ok(sizes)
}

fn parse_sigma(spec: &str, spline: &crate::pwl::PwlFunction, n_points: usize) -> Result<f64> {
    if spec == "auto" {
        let (a, b) = spline.domain();
        let xs = uniform_grid(a, b, n_points);
        let clean: Vec<f64> = xs.iter().map(|&t| spline.eval(t)).collect();
        let n = clean.len() as f64;
        let mean = clean.iter().sum::<f64>() / n;
        let var = clean.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        Ok(crate::experiments::AUTO_NOISE_RATIO * var.sqrt())
    } else {
        let v: f64 = spec
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("bad --sigma {spec:?}: {e}")))?;
        if v < 0.0 {
            return Err(Error::InvalidArgument("--sigma must be >= 0".into()));
        }
        Ok(v)
    }
}

fn parse_batch_spec(spec: &str) -> Result<BatchPolicy> {
    if spec == "full" {
        return Ok(BatchPolicy::FullBatch);
    }
    let bad = || {
        Error::InvalidArgument(format!(
            "bad --batch {spec:?}: expected full, fixed:SIZE, fixed-drop:SIZE, or random:SIZExSTEPS"
        ))
    };
    let (mode, rest) = spec.split_once(':').ok_or_else(bad)?;
    match mode {
        "fixed" => Ok(BatchPolicy::FixedWithRemainder(
            rest.parse().map_err(|_| bad())?,
        )),
        "fixed-drop" => Ok(BatchPolicy::FixedDropRemainder(
            rest.parse().map_err(|_| bad())?,
        )),
        "random" => {
            let (size, steps) = rest.split_once('x').ok_or_else(bad)?;
            Ok(BatchPolicy::RandomSample {
                size: size.parse().map_err(|_| bad())?,
                steps_per_epoch: steps.parse().map_err(|_| bad())?,
            })
        }
        _ => Err(bad()),
    }
}

/// "p0,p1,..;v0,v1,.." -> (base point, direction).
fn parse_line_spec(spec: &str, d_in: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let bad = |msg: &str| {
        Error::InvalidArgument(format!(
            "bad --line {spec:?}: {msg} (expected \"p0,p1,..;v0,v1,..\" with {d_in} entries each)"
        ))
    };
    let (p_spec, v_spec) = spec.split_once(';').ok_or_else(|| bad("missing ';'"))?;
    let parse_vec = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(&format!("bad number {t:?}")))
            })
            .collect()
    };
    let p = parse_vec(p_spec)?;
    let v = parse_vec(v_spec)?;
    if p.len() != d_in || v.len() != d_in {
        return Err(bad("wrong length"));
    }
    Ok((p, v))
}

/// Numeric CSV reader: takes the first `d_in` columns as network inputs;
/// a non-numeric first row is treated as a header.
fn read_data_csv(path: &Path, d_in: usize) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|t| t.trim().parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if values.len() < d_in {
                    return Err(Error::ParseFile {
                        path: path.display().to_string(),
                        line: ln + 1,
                        msg: format!("need at least {d_in} columns, got {}", values.len()),
                    });
                }
                rows.push(values[..d_in].to_vec());
            }
            Err(e) => {
                if ln == 0 {
                    continue; // header
                }
                return Err(Error::ParseFile {
                    path: path.display().to_string(),
                    line: ln + 1,
                    msg: format!("bad number: {e}"),
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::ParseFile {
            path: path.display().to_string(),
            line: 1,
            msg: "no data rows".into(),
        });
    }
    Matrix::from_rows(&rows)
}
