//! Small numerical kernels shared by the modules: pairwise summation,
//! adaptive Gauss–Kronrod quadrature and natural cubic splines.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Pairwise (cascade) summation. The result does not depend on how the
/// values were produced, only on their order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
/// The output order is always the index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sample mean and standard error of the mean (unbiased variance).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = pairwise_mean(values);
    if n < 2 {
        return (mean, f64::NAN);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// `points` equally spaced values on `[start, end]`, both ends included.
pub fn linspace(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (points - 1) as f64;
            (0..points)
                .map(|i| if i + 1 == points { end } else { start + step * i as f64 })
                .collect()
        }
    }
}

/// Cumulative trapezoidal integral; `out[0] = 0`.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        }
        out.push(acc);
    }
    out
}

pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    let terms: Vec<f64> = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .collect();
    pairwise_sum(&terms)
}

// 15-point Kronrod nodes on [-1, 1] (non-negative half) and weights, with
// the embedded 7-point Gauss weights on the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a quadrature: value and estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Quadrature {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Quadrature {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

struct Segment {
    a: f64,
    b: f64,
    q: Quadrature,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.q.error == other.q.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.q.error.total_cmp(&other.q.error)
    }
}

/// Tolerances and budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
    /// Number of equal panels the interval is split into before adapting.
    pub initial_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_segments: 20_000,
            initial_panels: 1,
        }
    }
}

impl QuadratureOptions {
    pub fn with_panels(mut self, panels: usize) -> Self {
        self.initial_panels = panels.max(1);
        self
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadratureOptions) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, error: 0.0 };
    }
    let panels = opts.initial_panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(panels * 4);
    for p in 0..panels {
        let lo = a + width * p as f64;
        let hi = if p + 1 == panels { b } else { a + width * (p + 1) as f64 };
        heap.push(Segment { a: lo, b: hi, q: gk15(&f, lo, hi) });
    }
    let totals = |heap: &BinaryHeap<Segment>| {
        let values: Vec<f64> = heap.iter().map(|s| s.q.value).collect();
        let errors: Vec<f64> = heap.iter().map(|s| s.q.error).collect();
        (pairwise_sum(&values), pairwise_sum(&errors))
    };
    let (mut value, mut error) = totals(&heap);
    while error > opts.abs_tol.max(opts.rel_tol * value.abs()) && heap.len() < opts.max_segments {
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        value += left.value + right.value - worst.q.value;
        error += left.error + right.error - worst.q.error;
        heap.push(Segment { a: worst.a, b: mid, q: left });
        heap.push(Segment { a: mid, b: worst.b, q: right });
    }
    // Re-sum to drop the drift of the running updates.
    let (value, error) = totals(&heap);
    Quadrature { value, error }
}

/// `∫_a^b |f|` for a smooth `f`: sign changes are bracketed on a grid of
/// spacing at most `scan_step` and located by bisection, and `f` is
/// integrated on each piece of constant sign.
pub fn integrate_abs<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, scan_step: f64, opts: QuadratureOptions) -> Quadrature {
    if !(b > a) {
        return Quadrature { value: 0.0, error: 0.0 };
    }
    let cells = ((b - a) / scan_step).ceil().max(1.0) as usize;
    let h = (b - a) / cells as f64;
    let mut cuts = vec![a];
    let mut prev = f(a);
    for i in 1..=cells {
        let t = if i == cells { b } else { a + h * i as f64 };
        let v = f(t);
        if prev * v < 0.0 {
            let (mut lo, mut hi, mut flo) = (t - h, t, prev);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
        prev = v;
    }
    cuts.push(b);
    let pieces: Vec<Quadrature> = cuts
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], QuadratureOptions { initial_panels: 1, ..opts }))
        .collect();
    Quadrature {
        value: pairwise_sum(&pieces.iter().map(|q| q.value.abs()).collect::<Vec<_>>()),
        error: pairwise_sum(&pieces.iter().map(|q| q.error).collect::<Vec<_>>()),
    }
}

/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    /// Panics if fewer than two knots are given or lengths differ; callers
    /// validate their grids first.
    pub fn natural(knots: &[f64], values: &[f64]) -> Self {
        assert!(knots.len() >= 2 && knots.len() == values.len());
        let n = knots.len();
        let mut second = vec![0.0; n];
        if n > 2 {
            // Tridiagonal solve (Thomas algorithm) for the interior moments.
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = knots[i] - knots[i - 1];
                let h1 = knots[i + 1] - knots[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
            }
            for i in 2..n - 1 {
                let lower = knots[i] - knots[i - 1];
                let m = lower / diag[i - 1];
                diag[i] -= m * upper[i - 1];
                rhs[i] -= m * rhs[i - 1];
            }
            for i in (1..n - 1).rev() {
                let next = if i + 1 < n - 1 { second[i + 1] } else { 0.0 };
                second[i] = (rhs[i] - upper[i] * next) / diag[i];
            }
        }
        Self {
            knots: knots.to_vec(),
            values: values.to_vec(),
            second,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.knots.len();
        match self.knots.binary_search_by(|k| k.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Value, first and second derivative at `t`.
    pub fn eval_all(&self, t: f64) -> (f64, f64, f64) {
        let i = self.locate(t);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let d2 = a * m0 + b * m1;
        (value, d1, d2)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval_all(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval_all(t).1
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        self.eval_all(t).2
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
    }

    #[test]
    fn gauss_kronrod_integrates_smooth_functions() {
        let q = integrate(|t: f64| t.exp(), 0.0, 1.0, QuadratureOptions::default());
        assert!((q.value - (std::f64::consts::E - 1.0)).abs() < 1e-14);
        let q = integrate(
            |t: f64| (40.0 * t).cos(),
            0.0,
            3.0,
            QuadratureOptions::default().with_panels(16),
        );
        assert!((q.value - (120.0f64).sin() / 40.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_quadrature_handles_kinks() {
        let q = integrate(|t: f64| (t - 0.3).abs(), 0.0, 1.0, QuadratureOptions::default());
        assert!((q.value - (0.09 / 2.0 + 0.49 / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn spline_reproduces_smooth_data() {
        let knots = linspace(0.0, 3.0, 301);
        let values: Vec<f64> = knots.iter().map(|t| t.sin()).collect();
        let s = CubicSpline::natural(&knots, &values);
        let (v, d1, d2) = s.eval_all(1.2345);
        assert!((v - 1.2345f64.sin()).abs() < 1e-8);
        assert!((d1 - 1.2345f64.cos()).abs() < 1e-5);
        assert!((d2 + 1.2345f64.sin()).abs() < 1e-3);
    }

    #[test]
    fn linspace_hits_endpoints() {
        let g = linspace(0.0, 10.0, 7);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[6], 10.0);
        assert_eq!(g.len(), 7);
    }
}
