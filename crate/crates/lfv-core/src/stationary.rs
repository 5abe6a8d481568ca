//! Grid solvers for the stationary density of the two-type process, the
//! infinitely-many-alleles frequency spectrum and the θ = 0 Green's function,
//! plus Monte Carlo checks of the size-biased distributional identities.
//!
//! Densities are piecewise constant on G cells of width h = 1/G and the
//! homogeneous integral equations are collocated at the cell midpoints. The
//! solution is the right singular vector of the smallest singular value of
//! the collocation matrix; the size of the remaining residual measures how well the grid
//! equation is solved. Kernel integrals over cells are exact for atoms and
//! use a singularity-removing substitution for the Beta component.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::generator::ModelSpec;
use crate::measure::LambdaMeasure;
use crate::quad::gl01;
use crate::rates::cdi_criteria;

pub const DEFAULT_GRID: usize = 1024;
/// Residual (relative to max f) below which a grid solution is accepted.
pub const RESIDUAL_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// ∫ f = 1.
    Probability,
    /// ∫ z β(z) dz = 1.
    FirstMoment,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridDensity {
    pub h: f64,
    /// Cell midpoints (i + 1/2)/G.
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub normalization: Normalization,
    /// Max collocation residual of the defining equation divided by max value.
    pub residual: f64,
    /// Same for the companion equation (stationary density only).
    pub second_residual: Option<f64>,
    /// Most negative raw value clipped to zero.
    pub clipped: f64,
    pub analytic: bool,
    /// Inverse-iteration sweeps; zero for closed forms.
    pub iterations: usize,
    /// residual ≤ RESIDUAL_TOL.
    pub converged: bool,
    pub advisory: Option<String>,
}

impl GridDensity {
    /// Exact ∫ z^a (1-z)^b f(z) dz for the piecewise-constant density.
    pub fn weighted_integral(&self, a: u32, b: u32) -> f64 {
        (0..self.values.len())
            .map(|i| {
                let lo = i as f64 * self.h;
                self.values[i] * poly_integral(a, b, lo, lo + self.h)
            })
            .sum()
    }

    pub fn moment(&self, k: u32) -> f64 {
        self.weighted_integral(k, 0)
    }

    /// Probability mass of [lo, hi] under the density (lo, hi on cell edges or not).
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        (0..self.values.len())
            .map(|i| {
                let a = (i as f64 * self.h).max(lo);
                let b = ((i + 1) as f64 * self.h).min(hi);
                if b > a { self.values[i] * (b - a) } else { 0.0 }
            })
            .sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// ∫_lo^hi z^a (1-z)^b dz by expanding (1-z)^b.
fn poly_integral(a: u32, b: u32, lo: f64, hi: f64) -> f64 {
    let mut s = 0.0;
    let mut c = 1.0;
    for k in 0..=b {
        let p = (a + k + 1) as i32;
        s += c * (hi.powi(p) - lo.powi(p)) / p as f64;
        c *= -((b - k) as f64) / (k + 1) as f64;
    }
    s
}

#[derive(Debug, Clone, Copy)]
enum Weight {
    Z,
    OneMinusZ,
    One,
    /// (1-z)/z
    Ratio,
}

impl Weight {
    fn eval(self, z: f64) -> f64 {
        match self {
            Weight::Z => z,
            Weight::OneMinusZ => 1.0 - z,
            Weight::One => 1.0,
            Weight::Ratio => (1.0 - z) / z,
        }
    }
    fn antiderivative(self, z: f64) -> f64 {
        match self {
            Weight::Z => 0.5 * z * z,
            Weight::OneMinusZ => z - 0.5 * z * z,
            Weight::One => z,
            Weight::Ratio => z.ln() - z,
        }
    }
    fn integral(self, lo: f64, hi: f64) -> f64 {
        if hi > lo { self.antiderivative(hi) - self.antiderivative(lo) } else { 0.0 }
    }
}

/// Kernel matrices at the cell midpoints u_e:
/// left[e][i] = ∫_{cell i, z<u} 2F⁺(1-(1-u)/(1-z)) ψ_L(z) dz and
/// right[e][i] = ∫_{cell i, z>u} 2F⁺(1-u/z) ψ_R(z) dz.
struct Kernel {
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
}

fn check_kernel_measure(m: &LambdaMeasure) -> Result<()> {
    if m.p_w0() > 0.0 {
        return Err(Error::Refused("the integral equations need F without an atom at zero".into()));
    }
    if let Some((alpha, _)) = m.beta_alpha() {
        if alpha >= 1.0 {
            return Err(Error::Refused(format!(
                "the F⁺ kernel is not integrable at z = u for a Beta component with α = {alpha} ≥ 1"
            )));
        }
    }
    Ok(())
}

fn kernel(m: &LambdaMeasure, g: usize, psi_left: Weight, psi_right: Weight) -> Kernel {
    let h = 1.0 / g as f64;
    let mut left = vec![vec![0.0; g]; g];
    let mut right = vec![vec![0.0; g]; g];
    let rule = gl01(16);
    let beta = m.beta_alpha().map(|(alpha, wb)| (alpha, wb / (alpha * ln_beta(2.0 - alpha, alpha).exp())));
    for e in 0..g {
        let u = (e as f64 + 0.5) * h;
        // cells i ≤ e reach below u, cells i ≥ e reach above it
        for (y, w) in m.atom_list() {
            let c = 2.0 * w / (y * y);
            let (lo_l, hi_r) = if y < 1.0 { ((u - y) / (1.0 - y), u / (1.0 - y)) } else { (0.0, 1.0) };
            for i in 0..=e {
                let a = (i as f64 * h).max(lo_l);
                let b = ((i + 1) as f64 * h).min(u);
                left[e][i] += c * psi_left.integral(a, b);
            }
            for i in e..g {
                let a = (i as f64 * h).max(u);
                let b = ((i + 1) as f64 * h).min(hi_r);
                right[e][i] += c * psi_right.integral(a, b);
            }
        }
        if let Some((alpha, cb)) = beta {
            // 2F⁺ = 2cb (1-u)^α (u-z)^{-α} on the left and 2cb u^α (z-u)^{-α} on the right;
            // s = |z-u|^{1-α} makes each cell integral smooth
            let p = 1.0 - alpha;
            let ip = 1.0 / p;
            let cl = 2.0 * cb * (1.0 - u).powf(alpha) * ip;
            let cr = 2.0 * cb * u.powf(alpha) * ip;
            for i in 0..=e {
                let s0 = (u - (i + 1) as f64 * h).max(0.0).powf(p);
                let s1 = (u - i as f64 * h).powf(p);
                left[e][i] += cl * rule.integrate(s0, s1, |s| psi_left.eval(u - s.powf(ip)));
            }
            for i in e..g {
                let s0 = (i as f64 * h - u).max(0.0).powf(p);
                let s1 = ((i + 1) as f64 * h - u).powf(p);
                right[e][i] += cr * rule.integrate(s0, s1, |s| psi_right.eval(u + s.powf(ip)));
            }
        }
    }
    Kernel { left, right }
}

/// Right singular vector of the smallest singular value of diag(coef(u_e)) - op,
/// by inverse iteration on AᵀA, scaled to h·Σv = 1. The collocation matrix is
/// far from normal, so plain inverse iteration on A can stall on the wrong
/// eigenvector while AᵀA is symmetric.
fn solve_null(g: usize, coef: impl Fn(f64) -> f64, op: &[Vec<f64>]) -> Result<Vec<f64>> {
    let h = 1.0 / g as f64;
    let mut a = DMatrix::<f64>::zeros(g, g);
    for e in 0..g {
        for i in 0..g {
            a[(e, i)] = -op[e][i];
        }
        a[(e, e)] += coef((e as f64 + 0.5) * h);
    }
    let lu_t = a.transpose().lu();
    let lu = a.lu();
    let fail = || Error::NonConvergence { message: "singular-vector iteration broke down".into(), residual: f64::NAN };
    let mut v = DVector::<f64>::from_element(g, 1.0);
    for _ in 0..INVERSE_ITERATIONS {
        let y = lu_t.solve(&v).ok_or_else(fail)?;
        v = lu.solve(&(&y / y.amax())).ok_or_else(fail)?;
        let scale = v.amax();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(fail());
        }
        v /= scale;
    }
    let s = v.sum() * h;
    Ok(v.iter().map(|x| x / s).collect())
}

const INVERSE_ITERATIONS: usize = 3;

fn clip_and_normalize(v: &mut [f64], h: f64) -> f64 {
    let mut clipped = 0.0f64;
    for x in v.iter_mut() {
        if *x < 0.0 {
            clipped = clipped.min(*x);
            *x = 0.0;
        }
    }
    let s: f64 = v.iter().sum::<f64>() * h;
    v.iter_mut().for_each(|x| *x /= s);
    clipped
}

/// max_e |coef(u_e) v_e - Σ_i op[e][i] v_i| / max v.
fn collocation_residual(v: &[f64], coef: impl Fn(f64) -> f64, op: &[Vec<f64>]) -> f64 {
    let g = v.len();
    let h = 1.0 / g as f64;
    let mut worst = 0.0f64;
    for e in 0..g {
        let lhs = coef((e as f64 + 0.5) * h) * v[e];
        let rhs: f64 = op[e].iter().zip(v).map(|(k, x)| k * x).sum();
        worst = worst.max((lhs - rhs).abs());
    }
    worst / v.iter().copied().fold(0.0, f64::max)
}

fn midpoints(g: usize) -> Vec<f64> {
    (0..g).map(|i| (i as f64 + 0.5) / g as f64).collect()
}

/// Stationary density f_X of the two-type process with mutation rates θ₁, θ₂ > 0,
/// from (θ₁ - θu) f(u) = -∫_0^u 2F⁺(1-(1-u)/(1-z)) z f dz + ∫_u^1 2F⁺(1-u/z)(1-z) f dz.
pub fn solve_stationary_density(model: &ModelSpec, g: usize) -> Result<GridDensity> {
    if model.d() != 2 || model.beta != 0.0 {
        return Err(Error::domain("the stationary solver handles the neutral two-type model"));
    }
    let (t1, t2) = (model.theta_i[0], model.theta_i[1]);
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::domain("both mutation rates must be positive"));
    }
    if g < 4 {
        return Err(Error::domain("the grid needs at least 4 cells"));
    }
    check_kernel_measure(&model.measure)?;
    let theta = t1 + t2;
    let k = kernel(&model.measure, g, Weight::Z, Weight::OneMinusZ);
    // R = right - left
    let op: Vec<Vec<f64>> = k.left.iter().zip(&k.right).map(|(l, r)| r.iter().zip(l).map(|(r, l)| r - l).collect()).collect();
    let coef = |u: f64| t1 - theta * u;
    let mut f = solve_null(g, coef, &op)?;
    let h = 1.0 / g as f64;
    let clipped = clip_and_normalize(&mut f, h);
    let residual = collocation_residual(&f, coef, &op);
    let neg: Vec<Vec<f64>> = op.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
    let second = collocation_residual(&f, |u| t2 - theta * (1.0 - u), &neg);
    Ok(GridDensity {
        h,
        grid: midpoints(g),
        values: f,
        normalization: Normalization::Probability,
        residual,
        second_residual: Some(second),
        clipped,
        analytic: false,
        iterations: INVERSE_ITERATIONS,
        converged: residual <= RESIDUAL_TOL,
        advisory: None,
    })
}

/// Frequency spectrum β of the infinitely-many-alleles model, normalized so
/// that ∫ z β(z) dz = 1. The unknown on the grid is p = zβ, which solves
/// θ p(u) = ∫_0^u 2F⁺(1-(1-u)/(1-z)) p dz - ∫_u^1 2F⁺(1-u/z) (1-z)/z p dz.
pub fn solve_frequency_spectrum(m: &LambdaMeasure, theta: f64, g: usize) -> Result<GridDensity> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain(format!("θ = {theta} must be positive")));
    }
    if g < 4 {
        return Err(Error::domain("the grid needs at least 4 cells"));
    }
    let h = 1.0 / g as f64;
    if m.is_kingman() {
        let values = midpoints(g).iter().map(|z| theta / z * (1.0 - z).powf(theta - 1.0)).collect();
        return Ok(GridDensity {
            h,
            grid: midpoints(g),
            values,
            normalization: Normalization::FirstMoment,
            residual: 0.0,
            second_residual: None,
            clipped: 0.0,
            analytic: true,
            iterations: 0,
            converged: true,
            advisory: None,
        });
    }
    check_kernel_measure(m)?;
    let advisory = (!cdi_criteria(m).pitman.value).then(|| {
        "the coalescent does not come down from infinity, so the spectrum equation is solved without its hypothesis".to_string()
    });
    let k = kernel(m, g, Weight::One, Weight::Ratio);
    let op: Vec<Vec<f64>> = k.left.iter().zip(&k.right).map(|(l, r)| l.iter().zip(r).map(|(l, r)| l - r).collect()).collect();
    let mut p = solve_null(g, |_| theta, &op)?;
    let clipped = clip_and_normalize(&mut p, h);
    let residual = collocation_residual(&p, |_| theta, &op);
    let grid = midpoints(g);
    let values = p.iter().zip(&grid).map(|(p, z)| p / z).collect();
    Ok(GridDensity {
        h,
        grid,
        values,
        normalization: Normalization::FirstMoment,
        residual,
        second_residual: None,
        clipped,
        analytic: false,
        iterations: INVERSE_ITERATIONS,
        converged: residual <= RESIDUAL_TOL,
        advisory,
    })
}

/// Sampler for the density ∝ z^a (1-z)^b f(z) with f piecewise constant.
struct CellSampler {
    h: f64,
    cdf: Vec<f64>,
    a: i32,
    b: i32,
    bounds: Vec<f64>,
}

impl CellSampler {
    fn new(values: &[f64], h: f64, a: i32, b: i32) -> Self {
        let q = |z: f64| z.powi(a) * (1.0 - z).powi(b);
        let mut cdf = Vec::with_capacity(values.len());
        let mut bounds = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        for (i, v) in values.iter().enumerate() {
            let lo = i as f64 * h;
            let hi = lo + h;
            acc += v * if a >= 0 && b >= 0 { poly_integral(a as u32, b as u32, lo, hi) } else { h * q(lo + 0.5 * h) };
            cdf.push(acc);
            let mut m = q(lo).max(q(hi));
            if a > 0 && b > 0 {
                let mode = a as f64 / (a + b) as f64;
                if mode > lo && mode < hi {
                    m = m.max(q(mode));
                }
            }
            bounds.push(m);
        }
        CellSampler { h, cdf, a, b, bounds }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cdf.last().unwrap();
        let u: f64 = rng.random::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        loop {
            let z = (i as f64 + rng.random::<f64>()) * self.h;
            let q = z.powi(self.a) * (1.0 - z).powi(self.b);
            if rng.random::<f64>() * self.bounds[i] <= q {
                return z;
            }
        }
    }
}

/// Asymptotic Kolmogorov tail P(K > λ).
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(mut x: Vec<f64>, mut y: Vec<f64>) -> KsReport {
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    KsReport { statistic: d, p_value: kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d), n: x.len() }
}

#[derive(Debug, Clone, Copy)]
pub enum IdentityKind {
    /// VZ_* = (1-B)VZ + B(Z^*(1-W)+WV) with P(B=1) = θ₂/(θ(θ₁+1)).
    Stationary { theta1: f64, theta2: f64 },
    /// VZ_* = Z^*(1-W)+WV.
    Spectrum,
}

/// Sample both sides of the size-biased identity from a grid density and
/// compare them with a two-sample KS test.
pub fn identity_check(density: &GridDensity, m: &LambdaMeasure, kind: IdentityKind, replicates: usize, seed: u64) -> Result<KsReport> {
    if replicates == 0 {
        return Err(Error::domain("at least one sample is needed"));
    }
    // base exponent turning the stored values into the density of Z
    let (za, first) = match (kind, density.normalization) {
        (IdentityKind::Stationary { .. }, Normalization::Probability) => (1, 1),
        (IdentityKind::Spectrum, Normalization::FirstMoment) => (1, 1),
        _ => return Err(Error::domain("identity kind does not match the density's normalization")),
    };
    let _ = first;
    let z = CellSampler::new(&density.values, density.h, za, 0);
    let z_low = CellSampler::new(&density.values, density.h, za + 1, 0);
    let z_up = CellSampler::new(&density.values, density.h, za, 1);
    let mut r1 = ChaCha8Rng::seed_from_u64(seed);
    r1.set_stream(1);
    let mut r2 = ChaCha8Rng::seed_from_u64(seed);
    r2.set_stream(2);
    let lhs: Vec<f64> = (0..replicates).map(|_| r1.random::<f64>() * z_low.sample(&mut r1)).collect();
    let pb = match kind {
        IdentityKind::Stationary { theta1, theta2 } => theta2 / ((theta1 + theta2) * (theta1 + 1.0)),
        IdentityKind::Spectrum => 1.0,
    };
    let rhs: Vec<f64> = (0..replicates)
        .map(|_| {
            if r2.random::<f64>() < pb {
                let w = m.sample_w(&mut r2);
                let v: f64 = r2.random();
                z_up.sample(&mut r2) * (1.0 - w) + w * v
            } else {
                r2.random::<f64>() * z.sample(&mut r2)
            }
        })
        .collect();
    Ok(ks_two_sample(lhs, rhs))
}

#[derive(Debug, Clone, Serialize)]
pub struct GreensReport {
    /// Nodes j/G, j = 0..G.
    pub nodes: Vec<f64>,
    /// Mean absorption time γ at the nodes.
    pub gamma: Vec<f64>,
    pub residual: f64,
    /// γ(1/2) on the grid of half the size, and the change to this grid.
    pub coarse_mid: f64,
    pub refinement_change: f64,
    pub converged: bool,
    pub advisory: Option<String>,
}

/// Quadrature nodes (w, weight·(1-w)^{-2}) for the part of W's law on (0,1).
fn w_nodes(m: &LambdaMeasure, panels: usize) -> Result<Vec<(f64, f64)>> {
    let rule = gl01(4);
    let mut out = Vec::new();
    for (y, wt) in m.atom_list() {
        if y >= 1.0 {
            return Err(Error::Refused("E[(1-W)^{-2}] is infinite with an atom at 1".into()));
        }
        // W = u y with density 2u
        for p in 0..panels {
            let (a, b) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let u = a + (b - a) * x;
                let ww = u * y;
                out.push((ww, wt * 2.0 * u * w * (b - a) / ((1.0 - ww) * (1.0 - ww))));
            }
        }
    }
    if let Some((alpha, wb)) = m.beta_alpha() {
        if alpha <= 1.0 {
            return Err(Error::Refused(format!("E[(1-W)^{{-2}}] is infinite for a Beta component with α = {alpha} ≤ 1")));
        }
        // (1-W)^{-2} against Beta(2-α, 1+α): w^{1-α}(1-w)^{α-2}/B(2-α, 1+α)
        let (a, b) = (2.0 - alpha, alpha - 1.0);
        let norm = wb / ln_beta(2.0 - alpha, 1.0 + alpha).exp();
        let (sa, sb) = (0.5f64.powf(a), 0.5f64.powf(b));
        for p in 0..panels {
            let (p0, p1) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let t = p0 + (p1 - p0) * x;
                // s = w^a on (0, 1/2]
                let s = t * sa;
                let ww = s.powf(1.0 / a);
                out.push((ww, norm * w * (p1 - p0) * sa / a * (1.0 - ww).powf(b - 1.0)));
                // s = (1-w)^b on [1/2, 1)
                let s = t * sb;
                let wb1 = s.powf(1.0 / b);
                out.push((1.0 - wb1, norm * w * (p1 - p0) * sb / b * (1.0 - wb1).powf(a - 1.0)));
            }
        }
    }
    Ok(out)
}

/// Add weight·E_V[φ_j(lo + V(hi-lo))] for the hat functions on the interior nodes.
fn add_hat_average(row: &mut [f64], g: usize, lo: f64, hi: f64, weight: f64) {
    let h = 1.0 / g as f64;
    let len = hi - lo;
    let j0 = ((lo * g as f64).floor() as usize).max(1);
    let j1 = ((hi * g as f64).ceil() as usize).min(g - 1);
    for (j, cell) in row.iter_mut().enumerate().take(j1 + 1).skip(j0) {
        let xl = (j - 1) as f64 * h;
        let xc = j as f64 * h;
        let xr = (j + 1) as f64 * h;
        let mut s = 0.0;
        let (p, q) = (lo.max(xl), hi.min(xc));
        if q > p {
            s += ((q - xl).powi(2) - (p - xl).powi(2)) / (2.0 * h);
        }
        let (p, q) = (lo.max(xc), hi.min(xr));
        if q > p {
            s += ((xr - p).powi(2) - (xr - q).powi(2)) / (2.0 * h);
        }
        *cell += weight * s / len;
    }
}

fn hat(g: usize, j: usize, x: f64) -> f64 {
    (1.0 - (x * g as f64 - j as f64).abs()).max(0.0)
}

fn greens_on_grid(m: &LambdaMeasure, g: usize) -> Result<(Vec<f64>, f64)> {
    let nodes = w_nodes(m, g)?;
    let a0 = m.p_w0();
    // K rows for x_i, i = 0..G, over interior unknowns (index j, 1..G-1)
    let krow = |x: f64| {
        let mut row = vec![0.0; g];
        for &(w, wt) in &nodes {
            let lo = x * (1.0 - w);
            add_hat_average(&mut row, g, lo, lo + w, wt);
        }
        if a0 > 0.0 {
            for (j, cell) in row.iter_mut().enumerate().skip(1) {
                *cell += a0 * hat(g, j, x);
            }
        }
        row
    };
    let k0 = krow(0.0);
    let k1 = krow(1.0);
    let n = g - 1;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 1..g {
        let x = i as f64 / g as f64;
        let r = krow(x);
        for j in 1..g {
            a[(i - 1, j - 1)] = r[j] - (1.0 - x) * k0[j] - x * k1[j];
        }
        rhs[i - 1] = -2.0 * (1.0 - x) * (1.0 - x).ln() - 2.0 * x * x.ln();
    }
    let sol = a
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonConvergence { message: "singular Green's-function system".into(), residual: f64::INFINITY })?;
    let residual = (&a * &sol - &rhs).amax();
    let mut gamma = vec![0.0];
    gamma.extend(sol.iter());
    gamma.push(0.0);
    Ok((gamma, residual))
}

/// Mean absorption time γ for θ = 0 from
/// K[γ](x) = K[γ](0)(1-x) + K[γ](1)x - 2(1-x)log(1-x) - 2x log x,
/// K[γ](x) = E[(1-W)^{-2} γ(x(1-W)+WV)], with γ piecewise linear on j/G.
/// The grid of half the size is solved as well; a large change in γ(1/2)
/// flags an answer that does not converge under refinement.
pub fn greens_function_theta0(m: &LambdaMeasure, g: usize) -> Result<GreensReport> {
    if g < 8 || g % 4 != 0 {
        return Err(Error::domain("the Green's-function grid needs a multiple of 4, at least 8"));
    }
    let (gamma, residual) = greens_on_grid(m, g)?;
    let (coarse, _) = greens_on_grid(m, g / 2)?;
    let fine_mid = gamma[g / 2];
    let coarse_mid = coarse[g / 4];
    let change = (fine_mid - coarse_mid).abs();
    let converged = change <= 1e-4 * fine_mid.abs().max(1.0);
    let mut advisory = None;
    if !converged {
        advisory = Some(format!(
            "γ(1/2) moved by {change:.3e} when the grid was halved; the mean absorption time may be infinite"
        ));
    } else if !cdi_criteria(m).pitman.value {
        advisory = Some("the coalescent does not come down from infinity; γ may be infinite".into());
    }
    Ok(GreensReport {
        nodes: (0..=g).map(|j| j as f64 / g as f64).collect(),
        gamma,
        residual,
        coarse_mid,
        refinement_change: change,
        converged,
        advisory,
    })
}
