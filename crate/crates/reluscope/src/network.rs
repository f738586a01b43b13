//! Dense ReLU MLP with a linear output layer.
//!
//! Layer sizes are `[d_in, n_1, ..., n_K, d_out]`: K hidden ReLU layers plus
//! one linear output layer. Weights are Glorot-uniform, biases start at
//! exactly zero (the bias-at-zero behavior is part of what the experiments
//! study, so it is not configurable). The ReLU derivative at exactly 0 is
//! taken to be 0, which keeps dead neurons dead under backprop.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

pub const NET_FORMAT_VERSION: &str = "reluscope-net-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix>,   // weights[l]: (sizes[l+1] x sizes[l])
    biases: Vec<Vec<f64>>,  // biases[l]: sizes[l+1]
}

/// Per-layer pre- and post-activations for one batch of inputs.
///
/// `acts[0]` is the input batch; `acts[l]` for hidden l is
/// `relu(preacts[l-1])`, and the final activation equals the final
/// preactivation (linear output).
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    preacts: Vec<Matrix>,
    acts: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("trace has at least the input")
    }

    /// Preactivation of layer `l` (1-based over weights, hidden and output).
    pub fn preactivation(&self, l: usize) -> &Matrix {
        &self.preacts[l - 1]
    }

    /// Postactivation of hidden layer `l` (1-based).
    pub fn postactivation(&self, l: usize) -> &Matrix {
        &self.acts[l]
    }

    pub fn num_layers(&self) -> usize {
        self.preacts.len()
    }
}

/// Parameter gradients, shaped exactly like the network's weights and biases.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(Matrix::all_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }
}

impl MlpNetwork {
    /// Glorot-uniform weights on [-L, L), L = sqrt(6 / (fan_in + fan_out));
    /// all biases exactly zero.
    pub fn glorot_uniform(layer_sizes: &[usize], rng: &mut RngStream) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "glorot_uniform_init: need at least input and output sizes, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!(
                "glorot_uniform_init: all layer sizes must be >= 1, got {layer_sizes:?}"
            )));
        }
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(rng.uniform(-limit, limit, fan_out, fan_in)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(MlpNetwork {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Build from explicit parameters (shape-checked).
    pub fn from_parameters(
        layer_sizes: Vec<usize>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!(
                "invalid layer sizes {layer_sizes:?}"
            )));
        }
        let n_layers = layer_sizes.len() - 1;
        if weights.len() != n_layers || biases.len() != n_layers {
            return Err(Error::InvalidArgument(format!(
                "expected {n_layers} weight/bias blocks, got {}/{}",
                weights.len(),
                biases.len()
            )));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            let expect = (layer_sizes[l + 1], layer_sizes[l]);
            if w.shape() != expect {
                return Err(Error::dim(
                    "MlpNetwork::from_parameters",
                    format!("W{} {}x{}", l + 1, expect.0, expect.1),
                    format!("{}x{}", w.shape().0, w.shape().1),
                ));
            }
            if b.len() != layer_sizes[l + 1] {
                return Err(Error::dim(
                    "MlpNetwork::from_parameters",
                    format!("b{} len {}", l + 1, layer_sizes[l + 1]),
                    format!("len {}", b.len()),
                ));
            }
            if !w.all_finite() || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "non-finite parameter in layer {}",
                    l + 1
                )));
            }
        }
        Ok(MlpNetwork {
            layer_sizes,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of hidden layers K (total layers minus the linear output).
    pub fn hidden_layers(&self) -> usize {
        self.layer_sizes.len() - 2
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Matrix], &mut [Vec<f64>]) {
        (&mut self.weights, &mut self.biases)
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(Matrix::all_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    /// Forward pass over a batch (rows are samples), keeping per-layer
    /// pre- and post-activations.
    pub fn forward(&self, x: &Matrix) -> Result<ForwardTrace> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim(
                "forward",
                format!("network input dim {}", self.input_dim()),
                format!("data with {} columns", x.cols()),
            ));
        }
        let n_layers = self.weights.len();
        let mut preacts = Vec::with_capacity(n_layers);
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.clone());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].matmul_nt(w)?;
            z.add_row_broadcast(b);
            let a = if l + 1 < n_layers { z.relu() } else { z.clone() };
            preacts.push(z);
            acts.push(a);
        }
        Ok(ForwardTrace { preacts, acts })
    }

    /// Forward pass returning only the output batch.
    pub fn output(&self, x: &Matrix) -> Result<Matrix> {
        let mut trace = self.forward(x)?;
        Ok(trace.acts.pop().expect("trace has at least the input"))
    }

    /// Evaluate a 1-input network at scalar points.
    pub fn eval_at(&self, ts: &[f64]) -> Result<Vec<f64>> {
        if self.input_dim() != 1 || self.output_dim() != 1 {
            return Err(Error::NotOneDimensional {
                d_in: self.input_dim(),
                d_out: self.output_dim(),
            });
        }
        let x = Matrix::from_vec_unchecked(ts.len(), 1, ts.to_vec());
        Ok(self.output(&x)?.data().to_vec())
    }

    /// Deep, independent copy.
    pub fn clone_network(&self) -> MlpNetwork {
        self.clone()
    }
}

/// Mean squared error over all entries (samples x output dims).
pub fn mse(pred: &Matrix, target: &Matrix) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::dim(
            "mse",
            format!("{}x{}", pred.shape().0, pred.shape().1),
            format!("{}x{}", target.shape().0, target.shape().1),
        ));
    }
    let n = pred.data().len() as f64;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n)
}

/// Exact gradient of `mse(forward(net, x), target)` w.r.t. every parameter.
pub fn backprop(net: &MlpNetwork, x: &Matrix, target: &Matrix) -> Result<Gradients> {
    let trace = net.forward(x)?;
    backprop_from_trace(net, &trace, target)
}

pub fn backprop_from_trace(
    net: &MlpNetwork,
    trace: &ForwardTrace,
    target: &Matrix,
) -> Result<Gradients> {
    let out = trace.output();
    if out.shape() != target.shape() {
        return Err(Error::dim(
            "backprop",
            format!("{}x{}", out.shape().0, out.shape().1),
            format!("{}x{}", target.shape().0, target.shape().1),
        ));
    }
    let n_layers = net.weights.len();
    let scale = 2.0 / out.data().len() as f64;
    // dL/dZ for the linear output layer
    let mut g = out.sub(target)?.scale(scale);

    let mut d_weights = vec![Matrix::zeros(0, 0); n_layers];
    let mut d_biases = vec![Vec::new(); n_layers];
    for l in (0..n_layers).rev() {
        d_weights[l] = g.matmul_tn(&trace.acts[l])?;
        d_biases[l] = g.col_sums();
        if l > 0 {
            // dL/dA_{l-1}, then through the ReLU of layer l-1
            let da = g.matmul(&net.weights[l])?;
            g = da.mask_by_positive(&trace.preacts[l - 1])?;
        }
    }
    Ok(Gradients {
        weights: d_weights,
        biases: d_biases,
    })
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serialize to the plain-text network format: a version line, a layer-sizes
/// line, then one line per parameter matrix (W1, b1, W2, b2, ...) in
/// row-major decimal floats with 17 significant digits.
pub fn to_text(net: &MlpNetwork) -> String {
    let mut out = String::new();
    out.push_str(NET_FORMAT_VERSION);
    out.push('\n');
    let sizes: Vec<String> = net.layer_sizes.iter().map(|s| s.to_string()).collect();
    out.push_str(&sizes.join(" "));
    out.push('\n');
    for (w, b) in net.weights.iter().zip(&net.biases) {
        let row: Vec<String> = w.data().iter().copied().map(fmt_f64).collect();
        let _ = writeln!(out, "{}", row.join(" "));
        let row: Vec<String> = b.iter().copied().map(fmt_f64).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn from_text(text: &str, origin: &str) -> Result<MlpNetwork> {
    let parse_err = |line: usize, msg: String| Error::ParseFile {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (ln, version) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    if version.trim() != NET_FORMAT_VERSION {
        return Err(parse_err(
            ln + 1,
            format!("expected version line {NET_FORMAT_VERSION:?}, got {version:?}"),
        ));
    }
    let (ln, sizes_line) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing layer-sizes line".into()))?;
    let layer_sizes: Vec<usize> = sizes_line
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| parse_err(ln + 1, format!("bad layer size {t:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    if layer_sizes.len() < 2 {
        return Err(parse_err(ln + 1, "need at least two layer sizes".into()));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let (ln, wl) = lines
            .next()
            .ok_or_else(|| parse_err(0, "missing weight line".into()))?;
        let data = parse_floats(wl).map_err(|msg| parse_err(ln + 1, msg))?;
        if data.len() != fan_in * fan_out {
            return Err(parse_err(
                ln + 1,
                format!("expected {} weights, got {}", fan_in * fan_out, data.len()),
            ));
        }
        weights.push(Matrix::from_vec(fan_out, fan_in, data).map_err(|e| {
            parse_err(ln + 1, e.to_string())
        })?);
        let (ln, bl) = lines
            .next()
            .ok_or_else(|| parse_err(0, "missing bias line".into()))?;
        let data = parse_floats(bl).map_err(|msg| parse_err(ln + 1, msg))?;
        if data.len() != fan_out {
            return Err(parse_err(
                ln + 1,
                format!("expected {fan_out} biases, got {}", data.len()),
            ));
        }
        biases.push(data);
    }
    MlpNetwork::from_parameters(layer_sizes, weights, biases)
}

fn parse_floats(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| format!("bad float {t:?}: {e}")))
        .collect()
}

pub fn save(net: &MlpNetwork, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(net)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<MlpNetwork> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_net() -> MlpNetwork {
        // 1 -> 2 -> 1 with hand-picked parameters
        MlpNetwork::from_parameters(
            vec![1, 2, 1],
            vec![
                Matrix::from_vec(2, 1, vec![1.0, -1.0]).unwrap(),
                Matrix::from_vec(1, 2, vec![0.5, 2.0]).unwrap(),
            ],
            vec![vec![0.0, 0.25], vec![-0.125]],
        )
        .unwrap()
    }

    #[test]
    fn glorot_limit_and_zero_biases() {
        let mut rng = RngStream::new(5);
        let net = MlpNetwork::glorot_uniform(&[3, 3, 3], &mut rng).unwrap();
        // fan_in = fan_out = 3 gives limit sqrt(6/6) = 1
        for w in net.weights() {
            assert!(w.data().iter().all(|v| v.abs() <= 1.0));
        }
        for b in net.biases() {
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn glorot_empirical_moments() {
        let mut rng = RngStream::new(17);
        // fan 64 -> 64 over ~25 layers gives ~100k weight samples
        let sizes: Vec<usize> = std::iter::repeat(64).take(26).collect();
        let net = MlpNetwork::glorot_uniform(&sizes, &mut rng).unwrap();
        let limit = (6.0 / 128.0f64).sqrt();
        let all: Vec<f64> = net
            .weights()
            .iter()
            .flat_map(|w| w.data().iter().copied())
            .collect();
        assert!(all.len() >= 100_000);
        let max = all.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max <= limit, "max |w| = {max} > {limit}");
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        // 3 sigma of the mean of U(-L, L): 3 * L / sqrt(3 n)
        let bound = 3.0 * limit / (3.0 * all.len() as f64).sqrt();
        assert!(mean.abs() < bound, "mean {mean} vs bound {bound}");
    }

    #[test]
    fn glorot_rejects_bad_sizes() {
        let mut rng = RngStream::new(0);
        assert!(MlpNetwork::glorot_uniform(&[], &mut rng).is_err());
        assert!(MlpNetwork::glorot_uniform(&[4], &mut rng).is_err());
        assert!(MlpNetwork::glorot_uniform(&[4, 0, 1], &mut rng).is_err());
    }

    #[test]
    fn forward_zero_input_fresh_net_is_zero() {
        let mut rng = RngStream::new(9);
        let net = MlpNetwork::glorot_uniform(&[2, 8, 8, 1], &mut rng).unwrap();
        let x = Matrix::zeros(5, 2);
        let out = net.output(&x).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_hand_computed() {
        let net = tiny_net();
        // x = 1: z1 = [1, -0.75] -> a1 = [1, 0]; out = 0.5*1 + 2*0 - 0.125
        let out = net.output(&Matrix::column(&[1.0]).unwrap()).unwrap();
        assert_eq!(out.get(0, 0), 0.375);
        // x = -1: z1 = [-1, 1.25] -> a1 = [0, 1.25]; out = 2*1.25 - 0.125
        let out = net.output(&Matrix::column(&[-1.0]).unwrap()).unwrap();
        assert_eq!(out.get(0, 0), 2.375);
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = RngStream::new(2);
        let net = MlpNetwork::glorot_uniform(&[3, 16, 16, 2], &mut rng).unwrap();
        let x = rng.standard_normal(10, 3);
        let t1 = net.forward(&x).unwrap();
        let t2 = net.forward(&x).unwrap();
        assert_eq!(t1.output(), t2.output());
        for l in 1..=t1.num_layers() {
            assert_eq!(t1.preactivation(l), t2.preactivation(l));
        }
    }

    #[test]
    fn forward_shape_mismatch() {
        let net = tiny_net();
        assert!(net.forward(&Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn mse_examples() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = Matrix::from_vec(2, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(mse(&b, &a).unwrap(), 4.0);
        assert!(mse(&a, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn mse_matches_naive_loop() {
        let mut rng = RngStream::new(33);
        let p = rng.standard_normal(31, 4);
        let t = rng.standard_normal(31, 4);
        let fast = mse(&p, &t).unwrap();
        let mut acc = 0.0;
        let mut count = 0usize;
        for i in 0..31 {
            for j in 0..4 {
                let d = p.get(i, j) - t.get(i, j);
                acc += d * d;
                count += 1;
            }
        }
        let naive = acc / count as f64;
        assert!((fast - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }

    /// Central finite differences over every parameter; the independent
    /// oracle for backprop.
    fn finite_difference_check(sizes: &[usize], seed: u64, n: usize) -> f64 {
        let mut rng = RngStream::new(seed);
        let mut net = MlpNetwork::glorot_uniform(sizes, &mut rng).unwrap();
        let x = rng.standard_normal(n, sizes[0]);
        let y = rng.standard_normal(n, *sizes.last().unwrap());
        // skip seeds that land a preactivation on the ReLU kink
        let trace = net.forward(&x).unwrap();
        for l in 1..trace.num_layers() {
            if trace.preactivation(l).data().iter().any(|z| z.abs() < 1e-8) {
                return 0.0;
            }
        }
        let grads = backprop(&net, &x, &y).unwrap();
        let h = 1e-5;
        let mut max_rel = 0.0f64;
        let n_layers = net.weights.len();
        for l in 0..n_layers {
            for idx in 0..net.weights[l].data().len() {
                let orig = net.weights[l].data()[idx];
                net.weights[l].data_mut()[idx] = orig + h;
                let up = mse(&net.output(&x).unwrap(), &y).unwrap();
                net.weights[l].data_mut()[idx] = orig - h;
                let dn = mse(&net.output(&x).unwrap(), &y).unwrap();
                net.weights[l].data_mut()[idx] = orig;
                let fd = (up - dn) / (2.0 * h);
                let bp = grads.weights[l].data()[idx];
                let rel = (bp - fd).abs() / bp.abs().max(fd.abs()).max(1.0);
                max_rel = max_rel.max(rel);
            }
            for idx in 0..net.biases[l].len() {
                let orig = net.biases[l][idx];
                net.biases[l][idx] = orig + h;
                let up = mse(&net.output(&x).unwrap(), &y).unwrap();
                net.biases[l][idx] = orig - h;
                let dn = mse(&net.output(&x).unwrap(), &y).unwrap();
                net.biases[l][idx] = orig;
                let fd = (up - dn) / (2.0 * h);
                let bp = grads.biases[l][idx];
                let rel = (bp - fd).abs() / bp.abs().max(fd.abs()).max(1.0);
                max_rel = max_rel.max(rel);
            }
        }
        max_rel
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let err = finite_difference_check(&[1, 8, 8, 1], 7, 16);
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn backprop_matches_finite_differences_across_shapes() {
        for (sizes, seeds) in [
            (vec![1usize, 4, 1], 0u64..4),
            (vec![2, 4, 4, 1], 4..8),
            (vec![3, 32, 2], 8..10),
            (vec![1, 32, 32, 32, 32, 1], 10..12),
        ] {
            for seed in seeds {
                let err = finite_difference_check(&sizes, seed, 8);
                assert!(err < 1e-6, "sizes {sizes:?} seed {seed}: {err}");
            }
        }
    }

    #[test]
    fn dead_neuron_gets_zero_gradient() {
        // first hidden neuron has zero weights and negative bias: dead on any data
        let net = MlpNetwork::from_parameters(
            vec![1, 2, 1],
            vec![
                Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap(),
                Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap(),
            ],
            vec![vec![-1.0, 0.0], vec![0.0]],
        )
        .unwrap();
        let x = Matrix::column(&[0.5, -0.25, 2.0]).unwrap();
        let y = Matrix::column(&[1.0, 1.0, 1.0]).unwrap();
        let grads = backprop(&net, &x, &y).unwrap();
        assert_eq!(grads.weights[0].get(0, 0), 0.0);
        assert_eq!(grads.biases[0][0], 0.0);
    }

    #[test]
    fn perfect_fit_gives_zero_gradients() {
        let net = tiny_net();
        let x = Matrix::column(&[1.0, -1.0]).unwrap();
        let y = net.output(&x).unwrap();
        let grads = backprop(&net, &x, &y).unwrap();
        for w in &grads.weights {
            assert!(w.data().iter().all(|&v| v == 0.0));
        }
        for b in &grads.biases {
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn clone_is_deep_and_equal() {
        let mut rng = RngStream::new(12);
        let net = MlpNetwork::glorot_uniform(&[2, 4, 1], &mut rng).unwrap();
        let mut copy = net.clone_network();
        assert_eq!(copy, net);
        assert_eq!(copy.clone_network(), net);
        copy.params_mut().0[0].data_mut()[0] += 1.0;
        assert_ne!(copy, net);
    }

    #[test]
    fn positive_homogeneity_at_zero_bias() {
        let mut rng = RngStream::new(21);
        let net = MlpNetwork::glorot_uniform(&[1, 16, 16, 1], &mut rng).unwrap();
        for i in 0..100 {
            let x = rng.uniform_scalar(-2.0, 2.0);
            let c = rng.uniform_scalar(0.01, 10.0);
            let fx = net.eval_at(&[x]).unwrap()[0];
            let fcx = net.eval_at(&[c * x]).unwrap()[0];
            let tol = 1e-9 * (1.0 + (c * fx).abs());
            assert!((fcx - c * fx).abs() <= tol, "pair {i}: {fcx} vs {}", c * fx);
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = RngStream::new(40);
        let net = MlpNetwork::glorot_uniform(&[3, 5, 2], &mut rng).unwrap();
        let text = to_text(&net);
        let back = from_text(&text, "mem").unwrap();
        assert_eq!(back, net);
        assert_eq!(to_text(&back), text);
    }

    #[test]
    fn text_parse_errors_name_the_line() {
        let err = from_text("wrong-header\n1 1\n", "m").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
        let err = from_text(&format!("{NET_FORMAT_VERSION}\n1 2 1\n1.0 2.0\n"), "m")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bias") || err.contains("line"), "{err}");
    }
}
