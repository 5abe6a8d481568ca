//! The dual death process N(t) with rates λ_n = (n/2)[(n-1)E[(1-W)^{n-2}] + θ].

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::ModelSpec;
use crate::measure::LambdaMeasure;
use crate::quad::adaptive;
use crate::rates::cdi_criteria;
use crate::sim::{estimate_dual_lhs, estimate_moment_dual_rhs, EstimateOptions, Summary};
use crate::special::{binom, Sum};
use crate::spectral::spectral_table;

/// Largest starting state handled by the eigen-expansion; uniformization above.
pub const EIGEN_MAX_I: usize = 25;
// falls back well before the eigen-expansion loses 1e-9 accuracy
const ROW_DEFECT_LIMIT: f64 = 1e-9;

/// Death rates and the triangular eigenvector tables of the bidiagonal generator.
#[derive(Debug, Clone, Serialize)]
pub struct DeathProcessSpec {
    pub theta: f64,
    /// λ_0 = 0, λ_1, ..., λ_N.
    pub lambda: Vec<f64>,
}

/// λ_n for a real argument, used for the tail of the entrance-law product.
fn rate_real(m: &LambdaMeasure, theta: f64, q: f64) -> f64 {
    0.5 * q * ((q - 1.0) * m.w_moment(q - 2.0) + theta)
}

impl DeathProcessSpec {
    pub fn new(measure: &LambdaMeasure, theta: f64, n_max: usize) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::domain(format!("mutation rate θ = {theta} must be finite and non-negative")));
        }
        let mut lambda = vec![0.0];
        for n in 1..=n_max {
            let nf = n as f64;
            let mom = if n >= 2 { measure.w_moment((n - 2) as f64) } else { 0.0 };
            lambda.push(0.5 * nf * ((nf - 1.0) * mom + theta));
        }
        let first = if theta > 0.0 { 0 } else { 1 };
        for n in first + 1..=n_max {
            if lambda[n] <= lambda[n - 1] {
                return Err(Error::domain(format!("death rates are not distinct at n = {n}")));
            }
        }
        Ok(DeathProcessSpec { theta, lambda })
    }

    pub fn n_max(&self) -> usize {
        self.lambda.len() - 1
    }

    /// Lowest reachable state: 0 when θ > 0, else 1.
    fn floor_state(&self) -> usize {
        usize::from(self.theta == 0.0)
    }

    /// l_j^{(k)} = λ_{j+1}⋯λ_k / ∏_{m=j}^{k-1}(λ_m - λ_k) for j ≤ k.
    pub fn left(&self, j: usize, k: usize) -> f64 {
        if j > k {
            return 0.0;
        }
        let lam = &self.lambda;
        (j..k).map(|m| lam[m + 1] / (lam[m] - lam[k])).product()
    }

    /// r_i^{(k)} = λ_i⋯λ_{k+1} / ∏_{m=k+1}^{i}(λ_m - λ_k) for i ≥ k.
    pub fn right(&self, i: usize, k: usize) -> f64 {
        if i < k {
            return 0.0;
        }
        let lam = &self.lambda;
        (k + 1..=i).map(|m| lam[m] / (lam[m] - lam[k])).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionMethod {
    Eigen,
    Uniformization,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionMatrix {
    /// p[i][j] = P(N(t) = j | N(0) = i) for 0 ≤ j ≤ i ≤ i_max.
    pub p: Vec<Vec<f64>>,
    pub method: TransitionMethod,
    /// Largest |row sum - 1| before clamping and renormalization.
    pub raw_row_defect: f64,
}

fn eigen_rows(spec: &DeathProcessSpec, t: f64, i_max: usize) -> Vec<Vec<f64>> {
    let lam = &spec.lambda;
    let lo = spec.floor_state();
    let decay: Vec<f64> = lam.iter().map(|l| (-l * t).exp()).collect();
    (0..=i_max)
        .map(|i| {
            let mut row = vec![0.0; i + 1];
            if i < lo {
                row[i] = 1.0;
                return row;
            }
            for (j, cell) in row.iter_mut().enumerate().skip(lo) {
                let mut s = Sum::default();
                for k in j..=i {
                    s.add(decay[k] * spec.right(i, k) * spec.left(j, k));
                }
                *cell = s.value();
            }
            row
        })
        .collect()
}

/// Poisson(μ) probabilities up to the point where the tail is below 1e-17.
fn poisson_weights(mu: f64) -> Vec<f64> {
    use statrs::function::gamma::ln_gamma;
    let n_max = (mu + 12.0 * mu.sqrt() + 40.0).ceil() as usize;
    (0..=n_max).map(|n| (n as f64 * mu.ln() - mu - ln_gamma(n as f64 + 1.0)).exp()).collect()
}

fn uniformized_rows(spec: &DeathProcessSpec, t: f64, i_max: usize) -> Vec<Vec<f64>> {
    let lam = &spec.lambda;
    let q = lam[i_max].max(1e-300);
    let weights = poisson_weights(q * t);
    (0..=i_max)
        .map(|i| {
            // v K^n with K = I + Q/q, bidiagonal
            let mut v = vec![0.0; i + 1];
            v[i] = 1.0;
            let mut acc: Vec<Sum> = vec![Sum::default(); i + 1];
            for (n, &w) in weights.iter().enumerate() {
                if n > 0 {
                    for j in 0..=i {
                        let stay = v[j] * (1.0 - lam[j] / q);
                        let from_above = if j < i { v[j + 1] * lam[j + 1] / q } else { 0.0 };
                        v[j] = stay + from_above;
                    }
                }
                for j in 0..=i {
                    acc[j].add(w * v[j]);
                }
            }
            acc.iter().map(Sum::value).collect()
        })
        .collect()
}

fn defect(rows: &[Vec<f64>]) -> f64 {
    rows.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
}

/// P(N(t)=j | N(0)=i) for all 0 ≤ j ≤ i ≤ i_max.
pub fn transition_matrix(spec: &DeathProcessSpec, t: f64, i_max: usize) -> Result<TransitionMatrix> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("time {t} must be finite and non-negative")));
    }
    if i_max > spec.n_max() {
        return Err(Error::domain(format!("i_max = {i_max} exceeds the spec's N = {}", spec.n_max())));
    }
    if t == 0.0 {
        let p = (0..=i_max).map(|i| (0..=i).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        return Ok(TransitionMatrix { p, method: TransitionMethod::Eigen, raw_row_defect: 0.0 });
    }
    let (mut rows, mut method) = if i_max <= EIGEN_MAX_I {
        (eigen_rows(spec, t, i_max), TransitionMethod::Eigen)
    } else {
        (uniformized_rows(spec, t, i_max), TransitionMethod::Uniformization)
    };
    let mut raw = defect(&rows);
    let negative = rows.iter().flatten().any(|&p| p < -1e-8 || p > 1.0 + 1e-8);
    if method == TransitionMethod::Eigen && (raw > ROW_DEFECT_LIMIT || negative) {
        rows = uniformized_rows(spec, t, i_max);
        method = TransitionMethod::Uniformization;
        raw = defect(&rows);
    }
    for row in &mut rows {
        for p in row.iter_mut() {
            *p = p.clamp(0.0, 1.0);
        }
        let s: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= s;
        }
    }
    Ok(TransitionMatrix { p: rows, method, raw_row_defect: raw })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntranceMethod {
    Eigen,
    /// Eigen-expansion where it is accurate, Laplace inversion of the
    /// occupation transforms for the states where it cancels badly.
    Mixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntranceLaw {
    pub t: f64,
    pub method: EntranceMethod,
    /// P(N(t) = j | N(0) = ∞) for j = 0..probs.len()-1; the remainder is negligible.
    pub probs: Vec<f64>,
    /// Number of eigen-terms summed.
    pub terms: usize,
    /// Index after which the r_∞ product was closed by its integral tail.
    pub product_index: usize,
    /// max term / result, a measure of cancellation in the alternating sum.
    pub cancellation: f64,
}

const ENTRANCE_K_MAX: usize = 400;
const PRODUCT_EXPLICIT: usize = 4000;
// largest eigen-term that still leaves about 1e-11 absolute accuracy
const TERM_LIMIT: f64 = 1e5;
// inversion parameters: discretization error e^{-A}, roundoff about e^{A/2}·ε
const EULER_A: f64 = 24.0;
const EULER_TERMS: (usize, usize) = (40, 2560);
// agreement between successive term counts accepted as converged
const EULER_TOL: f64 = 1e-11;
const EULER_AVERAGED: usize = 15;

/// Σ_{l>L} ln(1 + s/λ_l) for the explicit cutoff L, by the midpoint-rule
/// integral over q = (L+1/2)/u.
fn log_product_tail(measure: &LambdaMeasure, theta: f64, s: Complex64) -> Complex64 {
    let cutoff = PRODUCT_EXPLICIT as f64 + 0.5;
    let f = |u: f64| {
        if u == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        ln_1p(s / rate_real(measure, theta, cutoff / u)) * (cutoff / (u * u))
    };
    let re = adaptive(|u| f(u).re, 0.0, 1.0, 1e-300, 1e-12).value;
    let im = adaptive(|u| f(u).im, 0.0, 1.0, 1e-300, 1e-12).value;
    Complex64::new(re, im)
}

fn ln_1p(z: Complex64) -> Complex64 {
    Complex64::new(0.5 * (z.re * (2.0 + z.re) + z.im * z.im).ln_1p(), z.im.atan2(1.0 + z.re))
}

fn exp_m1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)))
    } else {
        z.exp() - 1.0
    }
}

/// Euler-accelerated Fourier-series inversion along Re s = A/(2t). Returns, for
/// j = lo..=k_max, P(N(t) = j) from the occupation transform
/// ∏_{l>j}λ_l/(λ_l + s) / (λ_j + s) and P(N(t) > j) from the survival
/// transform (1 - ∏_{l>j}λ_l/(λ_l + s)) / s. The contour never enters the left
/// half-plane, where these transforms grow too fast for a Talbot contour when
/// the measure comes down slowly.
fn euler_inversion(
    spec: &DeathProcessSpec,
    measure: &LambdaMeasure,
    t: f64,
    lo: usize,
    k_max: usize,
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    let m = EULER_AVERAGED;
    let lam = &spec.lambda;
    let mut run_occ = vec![0.0; k_max + 1];
    let mut run_surv = vec![0.0; k_max + 1];
    let mut occ = vec![0.0; k_max + 1];
    let mut surv = vec![0.0; k_max + 1];
    let binom_total = 2f64.powi(m as i32);
    let mut weight = 1.0;
    for k in 0..=n + m {
        let s = Complex64::new(EULER_A, 2.0 * std::f64::consts::PI * k as f64) / (2.0 * t);
        let factor = match k {
            0 => 0.5,
            _ if k % 2 == 0 => 1.0,
            _ => -1.0,
        };
        let mut log_prod = log_product_tail(measure, spec.theta, s);
        for l in (k_max + 1..=PRODUCT_EXPLICIT).rev() {
            log_prod += ln_1p(s / lam[l]);
        }
        for j in (lo..=k_max).rev() {
            run_occ[j] += factor * ((-log_prod).exp() / (s + lam[j])).re;
            run_surv[j] += factor * (-exp_m1(-log_prod) / s).re;
            log_prod += ln_1p(s / lam[j]);
        }
        if k >= n {
            for j in lo..=k_max {
                occ[j] += weight * run_occ[j];
                surv[j] += weight * run_surv[j];
            }
            weight *= (n + m - k) as f64 / (k - n + 1) as f64;
        }
    }
    let scale = (EULER_A / 2.0).exp() / t / binom_total;
    let fix = |v: Vec<f64>| v.into_iter().map(|x| (x * scale).clamp(0.0, 1.0)).collect::<Vec<_>>();
    (fix(occ), fix(surv))
}

/// Distribution of N(t) started from the entrance boundary at infinity.
pub fn entrance_distribution(measure: &LambdaMeasure, theta: f64, t: f64) -> Result<EntranceLaw> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("entrance law needs t > 0, got {t}")));
    }
    let cdi = cdi_criteria(measure);
    if !cdi.death_process.value {
        return Err(Error::Refused(
            "the death process does not come down from infinity for this measure".into(),
        ));
    }
    let spec = DeathProcessSpec::new(measure, theta, PRODUCT_EXPLICIT)?;
    let lam = &spec.lambda;
    let cutoff = PRODUCT_EXPLICIT as f64 + 0.5;
    // k beyond which e^{-λ_k t} is below any representable contribution
    let mut k_end = spec.floor_state();
    while k_end < ENTRANCE_K_MAX && lam[k_end] * t < 745.0 {
        k_end += 1;
    }
    let log_r_inf: Vec<f64> = (0..=k_end)
        .map(|k| {
            let lk = lam[k];
            let explicit: f64 = lam[k + 1..].iter().map(|&l| -(-lk / l).ln_1p()).sum();
            // midpoint-rule tail Σ_{l>L} ≈ ∫_{L+1/2}^∞, with q = cutoff/u
            let tail = if lk == 0.0 {
                0.0
            } else {
                adaptive(
                    |u| {
                        if u == 0.0 {
                            return 0.0;
                        }
                        let q = cutoff / u;
                        -(-lk / rate_real(measure, theta, q)).ln_1p() * cutoff / (u * u)
                    },
                    0.0,
                    1.0,
                    1e-300,
                    1e-12,
                )
                .value
            };
            explicit + tail
        })
        .collect();
    let lo = spec.floor_state();
    let mut probs = vec![0.0; k_end + 1];
    let mut big = vec![0.0f64; k_end + 1];
    let mut worst = 0.0f64;
    for j in lo..=k_end {
        let mut s = Sum::default();
        for k in j..=k_end {
            let term = (-lam[k] * t + log_r_inf[k]).exp() * spec.left(j, k);
            big[j] = big[j].max(term.abs());
            s.add(term);
        }
        probs[j] = s.value();
        if !big[j].is_finite() {
            worst = f64::INFINITY;
        } else if probs[j].abs() > 1e-300 {
            worst = worst.max(big[j] / probs[j].abs());
        }
    }
    let mut method = EntranceMethod::Eigen;
    if big.iter().any(|b| !(*b <= TERM_LIMIT)) {
        // a sharply peaked law needs many Fourier terms; double until stable
        let mut n = EULER_TERMS.0;
        let (mut occ, mut surv) = euler_inversion(&spec, measure, t, lo, PRODUCT_EXPLICIT, n);
        loop {
            if n >= EULER_TERMS.1 {
                return Err(Error::NonConvergence {
                    message: format!("Laplace inversion not settled after {n} terms"),
                    residual: f64::NAN,
                });
            }
            n *= 2;
            let (o, s) = euler_inversion(&spec, measure, t, lo, PRODUCT_EXPLICIT, n);
            // only the range that carries mass has to agree
            let end = s.iter().position(|&v| v < 1e-14).unwrap_or(s.len() - 1);
            let change = occ[..=end]
                .iter()
                .zip(&o)
                .chain(surv[..=end].iter().zip(&s))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            (occ, surv) = (o, s);
            if change < EULER_TOL {
                break;
            }
        }
        probs.resize(PRODUCT_EXPLICIT + 1, 0.0);
        big.resize(PRODUCT_EXPLICIT + 1, f64::INFINITY);
        for j in lo..=PRODUCT_EXPLICIT {
            if big[j] <= TERM_LIMIT {
                continue;
            }
            // in the upper tail the survival difference keeps relative accuracy
            probs[j] = if j > lo && surv[j - 1] < 1e-3 { (surv[j - 1] - surv[j]).max(0.0) } else { occ[j] };
        }
        match (lo..=PRODUCT_EXPLICIT).find(|&j| surv[j] < 1e-14) {
            Some(end) => probs.truncate(end + 1),
            None => {
                return Err(Error::NonConvergence {
                    message: format!(
                        "N(t) exceeds {PRODUCT_EXPLICIT} with probability {:.3e}",
                        surv[PRODUCT_EXPLICIT]
                    ),
                    residual: surv[PRODUCT_EXPLICIT],
                })
            }
        }
        method = EntranceMethod::Mixed;
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::NonConvergence {
            message: format!("entrance law sums to {total}; cancellation factor {worst:.3e}"),
            residual: (total - 1.0).abs(),
        });
    }
    while probs.len() > 1 && probs.last().is_some_and(|p| p.abs() < 1e-300 || (method == EntranceMethod::Mixed && p.abs() < 1e-15)) {
        probs.pop();
    }
    Ok(EntranceLaw { t, method, probs, terms: k_end + 1, product_index: PRODUCT_EXPLICIT, cancellation: worst })
}

pub fn entrance_law(measure: &LambdaMeasure, theta: f64, t: f64, j: usize) -> Result<f64> {
    Ok(entrance_distribution(measure, theta, t)?.probs.get(j).copied().unwrap_or(0.0))
}

/// Multitype death transition: hypergeometric thinning of the total count.
pub fn multitype_transition(spec: &DeathProcessSpec, t: f64, n_vec: &[i64], m_vec: &[i64]) -> Result<f64> {
    if n_vec.len() != m_vec.len() {
        return Err(Error::domain("count vectors have different lengths"));
    }
    if n_vec.iter().chain(m_vec).any(|&c| c < 0) {
        return Err(Error::domain("counts must be non-negative"));
    }
    if n_vec.iter().zip(m_vec).any(|(n, m)| m > n) {
        return Err(Error::domain("m must not exceed n componentwise"));
    }
    let n: i64 = n_vec.iter().sum();
    let m: i64 = m_vec.iter().sum();
    let tm = transition_matrix(spec, t, n as usize)?;
    let hyper: f64 =
        n_vec.iter().zip(m_vec).map(|(&a, &b)| binom(a as u64, b as u64)).product::<f64>() / binom(n as u64, m as u64);
    Ok(hyper * tm.p[n as usize][m as usize])
}

/// Both sides of the h-dual E_x[h_n(X(t))] = E_n[h_{N(t)}(x)] (θ > 0) or of
/// the moment dual E_x[X(t)^n] = E_n[x^{L(t)}] (θ = 0).
#[derive(Debug, Clone, Serialize)]
pub struct DualReport {
    pub n: usize,
    pub x: f64,
    pub t: f64,
    /// Σ_j P(N(t)=j | n) h_j(x).
    pub h_exact: Option<f64>,
    pub h_simulated: Option<Summary>,
    pub h_z: Option<f64>,
    pub moment_forward: Option<Summary>,
    pub moment_backward: Option<Summary>,
    /// Difference of the two moment estimates over their combined SE.
    pub moment_z: Option<f64>,
}

pub fn dual_identity_check(model: &ModelSpec, n: usize, x: f64, t: f64, replicates: usize, opts: EstimateOptions) -> Result<DualReport> {
    if model.d() != 2 || model.beta != 0.0 {
        return Err(Error::domain("the duality check needs the neutral two-type model"));
    }
    if !(0.0..=1.0).contains(&x) || n == 0 {
        return Err(Error::domain("need n ≥ 1 and x in [0, 1]"));
    }
    let theta = model.theta();
    let lhs = estimate_dual_lhs(model, n, x, t, replicates, opts)?;
    let mut report = DualReport {
        n,
        x,
        t,
        h_exact: None,
        h_simulated: None,
        h_z: None,
        moment_forward: None,
        moment_backward: None,
        moment_z: None,
    };
    if theta > 0.0 {
        let tab = spectral_table(model, n)?;
        let spec = DeathProcessSpec::new(&model.measure, theta, n)?;
        let row = &transition_matrix(&spec, t, n)?.p[n];
        let exact: Sum = row.iter().enumerate().map(|(j, p)| p * tab.g[j].eval(x) / tab.omega[j]).collect();
        let exact = exact.value();
        let sim = lhs.h.ok_or_else(|| Error::domain("no h-polynomial estimate"))?;
        report.h_exact = Some(exact);
        report.h_z = Some(sim.z(exact));
        report.h_simulated = Some(sim);
    } else {
        let back = estimate_moment_dual_rhs(&model.measure, n as u64, x, t, replicates, opts.seed.wrapping_add(1))?;
        let fwd = lhs.monomial;
        let se = (fwd.se * fwd.se + back.se * back.se).sqrt();
        report.moment_z = Some(if se > 0.0 { (fwd.mean - back.mean) / se } else { 0.0 });
        report.moment_forward = Some(fwd);
        report.moment_backward = Some(back);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measures() -> Vec<LambdaMeasure> {
        vec![
            LambdaMeasure::kingman(),
            LambdaMeasure::point_mass(0.5).unwrap(),
            LambdaMeasure::beta_coalescent(1.5).unwrap(),
        ]
    }

    #[test]
    fn rates_and_eigenvectors() {
        let k = DeathProcessSpec::new(&LambdaMeasure::kingman(), 1.0, 10).unwrap();
        for n in 0..=10 {
            let nf = n as f64;
            assert!((k.lambda[n] - nf * nf / 2.0).abs() < 1e-12);
            assert_eq!(k.left(n, n), 1.0);
            assert_eq!(k.right(n, n), 1.0);
        }
        assert_eq!(k.left(5, 3), 0.0);
        assert_eq!(k.right(3, 5), 0.0);
    }

    #[test]
    fn trivial_entries() {
        for m in measures() {
            let s = DeathProcessSpec::new(&m, 1.0, 20).unwrap();
            let id = transition_matrix(&s, 0.0, 20).unwrap();
            for i in 0..=20 {
                for j in 0..=i {
                    assert!((id.p[i][j] - f64::from(u8::from(i == j))).abs() < 1e-10);
                }
            }
            let p = transition_matrix(&s, 0.7, 20).unwrap();
            for i in 0..=20 {
                assert!((p.p[i][i] - (-s.lambda[i] * 0.7).exp()).abs() < 1e-12);
            }
            let sub = 1.0 - (-s.lambda[1] * 0.7).exp();
            assert!((p.p[1][0] - sub).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_are_probability_vectors() {
        for m in measures() {
            for theta in [0.5, 2.0] {
                let s = DeathProcessSpec::new(&m, theta, 25).unwrap();
                for t in [0.05, 0.5, 2.0] {
                    let p = transition_matrix(&s, t, 25).unwrap();
                    assert!(p.raw_row_defect < 1e-8, "defect {}", p.raw_row_defect);
                    for row in &p.p {
                        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn uniformization_matches_eigen() {
        let s = DeathProcessSpec::new(&LambdaMeasure::point_mass(0.5).unwrap(), 1.0, 40).unwrap();
        let e = transition_matrix(&s, 0.4, 20).unwrap();
        let u = uniformized_rows(&s, 0.4, 20);
        for i in 0..=20 {
            for j in 0..=i {
                assert!((e.p[i][j] - u[i][j]).abs() < 1e-11, "i={i} j={j}");
            }
        }
        let big = transition_matrix(&s, 0.4, 40).unwrap();
        assert_eq!(big.method, TransitionMethod::Uniformization);
        for i in 0..=20 {
            for j in 0..=i {
                assert!((big.p[i][j] - e.p[i][j]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn theta_zero_keeps_one_lineage() {
        let s = DeathProcessSpec::new(&LambdaMeasure::kingman(), 0.0, 8).unwrap();
        let p = transition_matrix(&s, 1.0, 8).unwrap();
        assert_eq!(p.p[5][0], 0.0);
        // two lineages coalesce at rate 1
        assert!((p.p[2][1] - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn entrance_law_basics() {
        let k = LambdaMeasure::kingman();
        let mut prev = f64::INFINITY;
        for t in [0.1, 0.2, 0.5, 1.0, 2.0] {
            let e = entrance_distribution(&k, 1.0, t).unwrap();
            let total: f64 = e.probs.iter().sum();
            assert!((total - 1.0).abs() < 1e-6, "t={t}: {total}");
            let mean: f64 = e.probs.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
            assert!(mean < prev);
            prev = mean;
        }
        let pm = LambdaMeasure::point_mass(0.5).unwrap();
        assert!(matches!(entrance_distribution(&pm, 1.0, 1.0), Err(Error::Refused(_))));
    }

    #[test]
    fn multitype_reduces_and_sums() {
        let s = DeathProcessSpec::new(&LambdaMeasure::point_mass(0.5).unwrap(), 1.0, 10).unwrap();
        let tm = transition_matrix(&s, 0.5, 5).unwrap();
        assert!((multitype_transition(&s, 0.5, &[5], &[3]).unwrap() - tm.p[5][3]).abs() < 1e-15);
        let mut total = 0.0;
        for a in 0..=2 {
            for b in 0..=1 {
                total += multitype_transition(&s, 0.5, &[2, 1], &[a, b]).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-8);
        assert!(multitype_transition(&s, 0.5, &[2, 1], &[3, 0]).is_err());
        assert!(multitype_transition(&s, 0.5, &[2, -1], &[0, 0]).is_err());
    }

    #[test]
    fn dual_identity_at_time_zero_and_kingman() {
        let opts = EstimateOptions { dt: 1e-3, eps: 1e-2, seed: 5, ..Default::default() };
        let model = ModelSpec::two_type(LambdaMeasure::point_mass(0.5).unwrap(), 1.0, 1.0, 0.0).unwrap();
        let r = dual_identity_check(&model, 3, 0.4, 0.0, 100, opts).unwrap();
        assert!(r.h_z.unwrap().abs() < 1e-9, "{r:?}");
        let k = ModelSpec::two_type(LambdaMeasure::kingman(), 1.0, 1.0, 0.0).unwrap();
        let r = dual_identity_check(&k, 3, 0.4, 0.5, 20_000, opts).unwrap();
        assert!(r.h_z.unwrap().abs() < 3.0, "{r:?}");
    }

    #[test]
    fn moment_dual_point_mass() {
        let opts = EstimateOptions { dt: 1e-3, eps: 1e-2, seed: 8, ..Default::default() };
        let model = ModelSpec::two_type(LambdaMeasure::point_mass(0.5).unwrap(), 0.0, 0.0, 0.0).unwrap();
        let r = dual_identity_check(&model, 4, 0.3, 1.0, 20_000, opts).unwrap();
        assert!(r.moment_z.unwrap().abs() < 3.0, "{r:?}");
    }
}
