//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Integrands may be vector valued (`[f64; N]`), which lets callers share
//! one set of abscissae between several related integrals. The error of a
//! vector integral is the largest component error, and a run converges once
//! that error drops below `max(abs_tol, rel_tol * max_k |I_k|)`.
//!
//! The 2D helpers integrate iterated over `x` then `y(x)` and forward the
//! tolerance to the inner integrals scaled by the outer interval length.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Result, TdError};

/// Kronrod abscissae on [0, 1]; odd indices are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl QuadOptions {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            rel_tol,
            max_segments: 4000,
        }
    }

    pub fn max_segments(mut self, n: usize) -> Self {
        self.max_segments = n;
        self
    }

    fn scaled(&self, factor: f64) -> Self {
        QuadOptions {
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

impl<const N: usize> Quadrature<N> {
    pub fn checked(self, opts: &QuadOptions) -> Result<[f64; N]> {
        if self.converged && self.value.iter().all(|v| v.is_finite()) {
            Ok(self.value)
        } else {
            Err(TdError::QuadratureFailure {
                estimate: self.value[0],
                error: self.error,
                tolerance: opts.abs_tol,
            })
        }
    }
}

pub type QuadResult = Quadrature<1>;

impl QuadResult {
    pub fn scalar(&self) -> f64 {
        self.value[0]
    }
}

struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 15-point Kronrod panel with the QUADPACK error heuristic.
pub fn gk15<const N: usize, F>(f: &mut F, a: f64, b: f64) -> ([f64; N], f64)
where
    F: FnMut(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();
    let fc = f(center);
    let mut f1 = [[0.0; N]; 7];
    let mut f2 = [[0.0; N]; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        f1[j] = f(center - dx);
        f2[j] = f(center + dx);
    }
    let mut value = [0.0; N];
    let mut error: f64 = 0.0;
    for k in 0..N {
        let mut resk = WGK[7] * fc[k];
        let mut resg = WG[3] * fc[k];
        let mut resabs = resk.abs();
        for j in 0..7 {
            let s = f1[j][k] + f2[j][k];
            resk += WGK[j] * s;
            resabs += WGK[j] * (f1[j][k].abs() + f2[j][k].abs());
            if j % 2 == 1 {
                resg += WG[j / 2] * s;
            }
        }
        let mean = 0.5 * resk;
        let mut resasc = WGK[7] * (fc[k] - mean).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((f1[j][k] - mean).abs() + (f2[j][k] - mean).abs());
        }
        let resasc = resasc * abs_half;
        let resabs = resabs * abs_half;
        let mut err = ((resk - resg) * half).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * resabs);
        }
        value[k] = resk * half;
        error = error.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    (value, error)
}

fn tolerance<const N: usize>(value: &[f64; N], opts: &QuadOptions) -> f64 {
    let scale = value.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    opts.abs_tol.max(opts.rel_tol * scale)
}

/// Integrate a vector-valued function over consecutive intervals between
/// sorted `breaks` (at least two points).
pub fn integrate_vec<const N: usize, F>(
    mut f: F,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Quadrature<N>
where
    F: FnMut(f64) -> [f64; N],
{
    debug_assert!(breaks.len() >= 2);
    let mut heap: BinaryHeap<Segment<N>> = BinaryHeap::new();
    let mut frozen_value = [0.0; N];
    let mut frozen_error = 0.0;
    let mut evals = 0usize;
    for w in breaks.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let (value, error) = gk15(&mut f, w[0], w[1]);
        evals += 15;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    let totals = |heap: &BinaryHeap<Segment<N>>, fv: &[f64; N], fe: f64| {
        let mut v = *fv;
        let mut e = fe;
        for s in heap.iter() {
            for k in 0..N {
                v[k] += s.value[k];
            }
            e += s.error;
        }
        (v, e)
    };

    let mut segments = heap.len();
    loop {
        let (value, error) = totals(&heap, &frozen_value, frozen_error);
        let tol = tolerance(&value, opts);
        if error <= tol || heap.is_empty() {
            return Quadrature {
                value,
                error,
                evals,
                converged: error <= tol,
            };
        }
        if segments >= opts.max_segments {
            return Quadrature {
                value,
                error,
                evals,
                converged: false,
            };
        }
        // Refine the worst few segments before re-summing.
        let batch = (heap.len() / 4).clamp(1, 16);
        for _ in 0..batch {
            let Some(worst) = heap.pop() else { break };
            let mid = 0.5 * (worst.a + worst.b);
            let tiny = 64.0 * f64::EPSILON * (worst.a.abs() + worst.b.abs()).max(f64::MIN_POSITIVE);
            if (worst.b - worst.a).abs() <= tiny || mid == worst.a || mid == worst.b {
                for k in 0..N {
                    frozen_value[k] += worst.value[k];
                }
                frozen_error += worst.error;
                continue;
            }
            let (v1, e1) = gk15(&mut f, worst.a, mid);
            let (v2, e2) = gk15(&mut f, mid, worst.b);
            evals += 30;
            segments += 1;
            heap.push(Segment {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Segment {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
        }
    }
}

pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> QuadResult
where
    F: FnMut(f64) -> f64,
{
    integrate_vec(|x| [f(x)], &[a, b], opts)
}

pub fn integrate_breaks<F>(mut f: F, breaks: &[f64], opts: &QuadOptions) -> QuadResult
where
    F: FnMut(f64) -> f64,
{
    integrate_vec(|x| [f(x)], breaks, opts)
}

/// Iterated integral `∫_{x} ∫_{y ∈ inner(x)} f(x, y) dy dx`.
///
/// `inner(x)` returns the sorted breakpoints of the `y` range at `x`.
/// The result is flagged unconverged if any inner integral failed.
pub fn integrate_2d<const N: usize, F, G>(
    mut f: F,
    x_breaks: &[f64],
    mut inner: G,
    opts: &QuadOptions,
) -> Quadrature<N>
where
    F: FnMut(f64, f64) -> [f64; N],
    G: FnMut(f64) -> Vec<f64>,
{
    let span = (x_breaks[x_breaks.len() - 1] - x_breaks[0]).abs().max(1e-300);
    let inner_opts = opts.scaled(0.1 / span);
    let inner_ok = Cell::new(true);
    let inner_evals = Cell::new(0usize);
    let mut outer = integrate_vec(
        |x| {
            let ys = inner(x);
            if ys.len() < 2 || ys[ys.len() - 1] <= ys[0] {
                return [0.0; N];
            }
            let q = integrate_vec(|y| f(x, y), &ys, &inner_opts);
            if !q.converged {
                inner_ok.set(false);
            }
            inner_evals.set(inner_evals.get() + q.evals);
            q.value
        },
        x_breaks,
        opts,
    );
    outer.evals += inner_evals.get();
    outer.converged &= inner_ok.get();
    outer
}
