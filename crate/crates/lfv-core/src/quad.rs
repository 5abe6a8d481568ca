//! Quadrature: cached Gauss-Legendre rules on [0,1], adaptive Gauss-Kronrod,
//! and a Beta-weighted integrator that removes algebraic endpoint singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let h = b - a;
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(a + h * x);
        }
        s * h
    }
}

const SIZES: [usize; 6] = [16, 32, 64, 128, 256, 512];
static RULES: [OnceLock<Rule>; 6] = [const { OnceLock::new() }; 6];

pub const MAX_GL_NODES: usize = 512;

/// Smallest cached Gauss-Legendre rule on [0,1] with at least `min_nodes` nodes.
///
/// Panics if more than [`MAX_GL_NODES`] are requested.
pub fn gl01(min_nodes: usize) -> &'static Rule {
    let idx = SIZES
        .iter()
        .position(|&n| n >= min_nodes)
        .unwrap_or_else(|| panic!("no Gauss-Legendre rule with {min_nodes} nodes"));
    RULES[idx].get_or_init(|| {
        let gl = GaussLegendre::new(NonZeroUsize::new(SIZES[idx]).unwrap());
        let (nodes, weights) = gl
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .unzip();
        Rule { nodes, weights }
    })
}

/// Rule integrating polynomials of degree `deg` exactly.
pub fn gl01_exact(deg: usize) -> &'static Rule {
    gl01(deg / 2 + 1)
}

// Gauss-Kronrod 7/15 abscissae and weights.
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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

const MAX_INTERVALS: usize = 4000;

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol*|I|)`.
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    if a == b {
        return Integral { value: 0.0, error: 0.0, intervals: 0 };
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, error: e });
    let (mut total, mut err) = (v, e);
    while err > abs_tol.max(rel_tol * total.abs()) && heap.len() < MAX_INTERVALS {
        let p = heap.pop().unwrap();
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // interval cannot be split further in floating point
            heap.push(Piece { error: 0.0, ..p });
            err = heap.iter().map(|q| q.error).sum();
            continue;
        }
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Piece { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, error: e2 });
    }
    // re-sum to shed drift from the running updates
    let value = heap.iter().map(|q| q.value).sum();
    let error = heap.iter().map(|q| q.error).sum();
    Integral { value, error, intervals: heap.len() }
}

/// `∫_lo^hi g(y, 1-y) y^(a-1) (1-y)^(b-1) dy` for `0 <= lo < hi <= 1`.
///
/// The closure receives both `y` and `1-y` so that callers can stay accurate
/// near `y = 1`. Endpoint singularities at 0 and 1 are removed by the
/// substitutions `s = y^a` and `s = (1-y)^b`.
pub fn beta_weighted(
    g: impl Fn(f64, f64) -> f64,
    a: f64,
    b: f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> f64 {
    assert!((0.0..1.0).contains(&lo) && hi > lo && hi <= 1.0);
    let abs_tol = 1e-300;
    let mid = 0.5f64.clamp(lo, hi);
    let mut total = 0.0;
    if mid > lo {
        total += if lo == 0.0 {
            assert!(a > 0.0, "left exponent must be positive on [0, ·]");
            let ia = 1.0 / a;
            adaptive(
                |s| {
                    let y = s.powf(ia);
                    g(y, 1.0 - y) * (1.0 - y).powf(b - 1.0) * ia
                },
                0.0,
                mid.powf(a),
                abs_tol,
                rel_tol,
            )
            .value
        } else {
            adaptive(
                |y| g(y, 1.0 - y) * y.powf(a - 1.0) * (1.0 - y).powf(b - 1.0),
                lo,
                mid,
                abs_tol,
                rel_tol,
            )
            .value
        };
    }
    if hi > mid {
        total += if hi == 1.0 {
            let ib = 1.0 / b;
            adaptive(
                |s| {
                    let yb = s.powf(ib);
                    let y = 1.0 - yb;
                    g(y, yb) * y.powf(a - 1.0) * ib
                },
                0.0,
                (1.0 - mid).powf(b),
                abs_tol,
                rel_tol,
            )
            .value
        } else {
            adaptive(
                |y| g(y, 1.0 - y) * y.powf(a - 1.0) * (1.0 - y).powf(b - 1.0),
                mid,
                hi,
                abs_tol,
                rel_tol,
            )
            .value
        };
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_rules_are_exact_for_polynomials() {
        for deg in [0usize, 5, 31, 63, 200, 1000] {
            let r = gl01_exact(deg);
            let v = r.integrate(0.0, 1.0, |x| (deg as f64 + 1.0) * x.powi(deg as i32));
            assert!((v - 1.0).abs() < 1e-13, "deg {deg}: {v}");
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let v = adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 0.0, 1e-12).value;
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert!(((v - exact) / exact).abs() < 1e-11);
    }

    #[test]
    fn beta_weighted_matches_beta_function() {
        // ∫ y^(a-1)(1-y)^(b-1) = B(a,b)
        for &(a, b) in &[(0.5, 1.5), (0.3, 0.7), (2.5, 0.2), (1.0, 1.0)] {
            let v = beta_weighted(|_, _| 1.0, a, b, 0.0, 1.0, 1e-13);
            let exact = statrs::function::beta::beta(a, b);
            assert!(((v - exact) / exact).abs() < 1e-11, "{a} {b}: {v} vs {exact}");
        }
        // partial range, log singularity at 1
        let v = beta_weighted(|_, yb| -yb.ln(), 1.0, 1.0, 0.0, 1.0, 1e-13);
        assert!((v - 1.0).abs() < 1e-11);
    }
}
