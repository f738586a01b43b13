//! Exact piecewise-linear view of a network, plus the 1-D target generators
//! (sawtooth, random linear spline, spline-plus-noise).
//!
//! Extraction works layer by layer over a shared global knot list: after
//! processing layer l, the network restricted to the interval between any two
//! consecutive knots is affine through layer l for every neuron. Each hidden
//! layer's preactivations are therefore affine on each current piece, so
//! their interior zero crossings — the only places ReLU can bend the
//! function — are found by linear interpolation between knot values.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::MlpNetwork;
use crate::rng::RngStream;
use crate::util::fmt_f64;

/// Default slope-comparison tolerance for [`PwlFunction::count_pieces`];
/// sized for double-precision slope noise across small pieces.
pub const DEFAULT_SLOPE_TOL: f64 = 1e-8;

/// Continuous piecewise-linear function on `[a, b]`: strictly increasing
/// breakpoints (first = a, last = b) with values, linear interpolation in
/// between. Evaluation outside the domain extrapolates the boundary slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PwlFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidArgument(
                "PwlFunction: need at least two breakpoints".into(),
            ));
        }
        if breakpoints.len() != values.len() {
            return Err(Error::dim(
                "PwlFunction::new",
                format!("{} breakpoints", breakpoints.len()),
                format!("{} values", values.len()),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "PwlFunction: breakpoints must be strictly increasing".into(),
            ));
        }
        if let Some((i, &v)) = breakpoints
            .iter()
            .chain(values.iter())
            .enumerate()
            .find(|(_, v)| !v.is_finite())
        {
            return Err(Error::NonFinite {
                op: "PwlFunction::new",
                what: "breakpoints/values",
                value: v,
                index: i,
            });
        }
        Ok(PwlFunction {
            breakpoints,
            values,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn num_breakpoints(&self) -> usize {
        self.breakpoints.len()
    }

    /// Segment slopes, one per breakpoint interval.
    pub fn slopes(&self) -> Vec<f64> {
        self.breakpoints
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, v)| (v[1] - v[0]) / (x[1] - x[0]))
            .collect()
    }

    pub fn first_slope(&self) -> f64 {
        let (x, v) = (&self.breakpoints, &self.values);
        (v[1] - v[0]) / (x[1] - x[0])
    }

    pub fn last_slope(&self) -> f64 {
        let n = self.breakpoints.len();
        let (x, v) = (&self.breakpoints, &self.values);
        (v[n - 1] - v[n - 2]) / (x[n - 1] - x[n - 2])
    }

    pub fn eval(&self, t: f64) -> f64 {
        let bp = &self.breakpoints;
        let n = bp.len();
        if t <= bp[0] {
            return self.values[0] + self.first_slope() * (t - bp[0]);
        }
        if t >= bp[n - 1] {
            return self.values[n - 1] + self.last_slope() * (t - bp[n - 1]);
        }
        let i = bp.partition_point(|&x| x <= t) - 1;
        let w = (t - bp[i]) / (bp[i + 1] - bp[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Number of maximal constant-slope intervals. Adjacent segments merge
    /// when their slopes differ by at most `slope_tol * (1 + max |slope|)`
    /// over the pair.
    pub fn count_pieces(&self, slope_tol: f64) -> usize {
        let slopes = self.slopes();
        let mut pieces = 1;
        for w in slopes.windows(2) {
            let scale = 1.0 + w[0].abs().max(w[1].abs());
            if (w[1] - w[0]).abs() > slope_tol * scale {
                pieces += 1;
            }
        }
        pieces
    }

    /// Two-column CSV `x,y`, one row per breakpoint; linear interpolation
    /// reconstructs the function exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for (x, y) in self.breakpoints.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*y));
        }
        out
    }
}

/// Uniform grid of `n` points on `[a, b]`, endpoints exact.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let step = (b - a) / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n).map(|i| a + i as f64 * step).collect();
    grid[n - 1] = b;
    grid
}

/// Exact piecewise-linear representation of a 1-input 1-output network on
/// `[a, b]`.
pub fn extract_pwl(net: &MlpNetwork, a: f64, b: f64) -> Result<PwlFunction> {
    if net.input_dim() != 1 || net.output_dim() != 1 {
        return Err(Error::NotOneDimensional {
            d_in: net.input_dim(),
            d_out: net.output_dim(),
        });
    }
    if !(a < b) {
        return Err(Error::InvalidArgument(format!(
            "extract_pwl: need a < b, got [{a}, {b}]"
        )));
    }
    // a new crossing this close to an existing breakpoint merges with it
    let dedup_tol = 1e-12 * (b - a);
    let mut knots = vec![a, b];
    for layer in 1..=net.hidden_layers() {
        let x = Matrix::from_vec_unchecked(knots.len(), 1, knots.clone());
        let trace = net.forward(&x)?;
        let z = trace.preactivation(layer);
        let mut crossings = Vec::new();
        for i in 0..knots.len() - 1 {
            for j in 0..z.cols() {
                let z0 = z.get(i, j);
                let z1 = z.get(i + 1, j);
                if (z0 > 0.0 && z1 < 0.0) || (z0 < 0.0 && z1 > 0.0) {
                    crossings.push(knots[i] + (knots[i + 1] - knots[i]) * (z0 / (z0 - z1)));
                }
            }
        }
        merge_knots(&mut knots, crossings, dedup_tol);
    }
    let values = net.eval_at(&knots)?;
    PwlFunction::new(knots, values)
}

fn merge_knots(knots: &mut Vec<f64>, mut candidates: Vec<f64>, tol: f64) {
    candidates.sort_by(f64::total_cmp);
    for t in candidates {
        let pos = knots.partition_point(|&k| k < t);
        let near_prev = pos > 0 && (t - knots[pos - 1]) <= tol;
        let near_next = pos < knots.len() && (knots[pos] - t) <= tol;
        if !near_prev && !near_next {
            knots.insert(pos, t);
        }
    }
}

/// A network restricted to the line `t -> p + t v`.
#[derive(Debug, Clone)]
pub struct LineRestriction {
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
    /// 1-input network with `net(t) = original(p + t v)`.
    pub net: MlpNetwork,
}

/// Rewrite the first layer so the network takes the scalar line parameter:
/// `W1' = W1 v` (a column), `b1' = W1 p + b1`; deeper layers are unchanged.
pub fn restrict_to_line(net: &MlpNetwork, p: &[f64], v: &[f64]) -> Result<LineRestriction> {
    let d_in = net.input_dim();
    if p.len() != d_in || v.len() != d_in {
        return Err(Error::dim(
            "restrict_to_line",
            format!("network input dim {d_in}"),
            format!("base len {} / direction len {}", p.len(), v.len()),
        ));
    }
    if v.iter().all(|&c| c == 0.0) {
        return Err(Error::InvalidArgument(
            "restrict_to_line: direction must be nonzero".into(),
        ));
    }
    let w1 = &net.weights()[0];
    let n1 = w1.rows();
    let mut new_w = Vec::with_capacity(n1);
    let mut new_b = Vec::with_capacity(n1);
    for r in 0..n1 {
        let row = w1.row(r);
        new_w.push(row.iter().zip(v).map(|(w, vi)| w * vi).sum::<f64>());
        let shift: f64 = row.iter().zip(p).map(|(w, pi)| w * pi).sum();
        new_b.push(shift + net.biases()[0][r]);
    }
    let mut sizes = net.layer_sizes().to_vec();
    sizes[0] = 1;
    let mut weights = net.weights().to_vec();
    weights[0] = Matrix::from_vec(n1, 1, new_w)?;
    let mut biases = net.biases().to_vec();
    biases[0] = new_b;
    Ok(LineRestriction {
        base: p.to_vec(),
        direction: v.to_vec(),
        net: MlpNetwork::from_parameters(sizes, weights, biases)?,
    })
}

/// Uniform grid on `[a, b]` with the periodic unit sawtooth: y ramps 0 -> 1
/// over each tooth and drops to 0 exactly at tooth boundaries
/// (left-continuous ramp).
pub fn sawtooth_dataset(
    n_points: usize,
    n_teeth: usize,
    a: f64,
    b: f64,
) -> Result<(Matrix, Matrix)> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(
            "sawtooth_dataset: need n_points >= 2".into(),
        ));
    }
    if n_teeth < 1 {
        return Err(Error::InvalidArgument(
            "sawtooth_dataset: need n_teeth >= 1".into(),
        ));
    }
    if !(a < b) {
        return Err(Error::InvalidArgument(format!(
            "sawtooth_dataset: need a < b, got [{a}, {b}]"
        )));
    }
    let xs = uniform_grid(a, b, n_points);
    let span = b - a;
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| {
            let u = (x - a) / span * n_teeth as f64;
            // rounding can land an exact tooth boundary a hair below the
            // integer; snap so the drop stays on the boundary
            if (u - u.round()).abs() <= 1e-9 * (1.0 + u.abs()) {
                0.0
            } else {
                u.fract()
            }
        })
        .collect();
    Ok((
        Matrix::from_vec_unchecked(n_points, 1, xs),
        Matrix::from_vec_unchecked(n_points, 1, ys),
    ))
}

/// Random linear spline: `n_knots` breakpoints with the endpoints fixed at
/// the domain ends, interior knots uniform, values i.i.d. N(0, 1).
pub fn random_linear_spline(
    n_knots: usize,
    a: f64,
    b: f64,
    rng: &mut RngStream,
) -> Result<PwlFunction> {
    if n_knots < 2 {
        return Err(Error::InvalidArgument(
            "random_linear_spline: need n_knots >= 2".into(),
        ));
    }
    if !(a < b) {
        return Err(Error::InvalidArgument(format!(
            "random_linear_spline: need a < b, got [{a}, {b}]"
        )));
    }
    // ties have probability ~0; retry rather than nudge
    let xs = loop {
        let mut xs = Vec::with_capacity(n_knots);
        xs.push(a);
        for _ in 0..n_knots - 2 {
            xs.push(rng.uniform_scalar(a, b));
        }
        xs.push(b);
        xs[1..n_knots - 1].sort_by(f64::total_cmp);
        if xs.windows(2).all(|w| w[0] < w[1]) {
            break xs;
        }
    };
    let values = rng.standard_normal(n_knots, 1).data().to_vec();
    PwlFunction::new(xs, values)
}

/// A spline sampled on a uniform grid with additive Gaussian noise; all four
/// pieces are kept so experiments can train on clean, noisy, and noise-only
/// targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineData {
    pub x: Matrix,
    pub y_clean: Matrix,
    pub noise: Matrix,
    pub y_noisy: Matrix,
}

pub fn spline_plus_noise(
    spline: &PwlFunction,
    n_points: usize,
    noise_sigma: f64,
    rng: &mut RngStream,
) -> Result<SplineData> {
    if n_points < 1 {
        return Err(Error::InvalidArgument(
            "spline_plus_noise: need n_points >= 1".into(),
        ));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "spline_plus_noise: noise_sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let (a, b) = spline.domain();
    let xs = uniform_grid(a, b, n_points);
    let y_clean: Vec<f64> = xs.iter().map(|&t| spline.eval(t)).collect();
    let sampled = rng.standard_normal(n_points, 1).scale(noise_sigma);
    let y_noisy: Vec<f64> = y_clean
        .iter()
        .zip(sampled.data())
        .map(|(c, n)| c + n)
        .collect();
    // store the realized difference (within 1 ulp of the sample) so
    // y_noisy - y_clean == noise holds bitwise
    let noise: Vec<f64> = y_noisy
        .iter()
        .zip(&y_clean)
        .map(|(ny, c)| ny - c)
        .collect();
    Ok(SplineData {
        x: Matrix::from_vec_unchecked(n_points, 1, xs),
        y_clean: Matrix::from_vec_unchecked(n_points, 1, y_clean),
        noise: Matrix::from_vec_unchecked(n_points, 1, noise),
        y_noisy: Matrix::from_vec_unchecked(n_points, 1, y_noisy),
    })
}
