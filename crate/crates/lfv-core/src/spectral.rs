//! Eigenvalues and eigenpolynomials of the two-type generator, the g_n
//! family with its stationary expectations, basis changes, a Dirichlet-moment
//! analogue and the Ewens-type sampling formula.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::{Generator, ModelSpec};
use crate::measure::WLaw;
use crate::poly::{Basis, Polynomial};
use crate::special::{factorial, Sum};

pub const MAX_EIGEN_N: usize = 512;
pub const MAX_POLY_N: usize = 64;
/// Above this degree the triangular recursions lose digits quickly.
pub const ACCURACY_ADVISORY_N: usize = 30;

/// (n-1)E[(1-W)^{n-2}], taken as 0 for n ≤ 1.
fn pair_term(law: &WLaw, n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        (n - 1) as f64 * law.moment(n - 2)
    }
}

/// λ_n = (n/2)[(n-1)E[(1-W)^{n-2}] + θ] for n = 0..=N.
pub fn eigenvalues(model: &ModelSpec, n_max: usize) -> Result<Vec<f64>> {
    if n_max > MAX_EIGEN_N {
        return Err(Error::domain(format!("at most {MAX_EIGEN_N} eigenvalues are supported")));
    }
    let law = WLaw::with_cache(&model.measure, n_max);
    Ok(rates_with(&law, model.theta(), n_max))
}

fn rates_with(law: &WLaw, theta: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max).map(|n| 0.5 * n as f64 * (pair_term(law, n) + theta)).collect()
}

/// Eigenvalue for a general mutation matrix with non-unit eigenvalues φ_k,
/// (1/2)n(n-1)E[(1-W)^{n-2}] + (θ/2)Σ_k (1-φ_k) n_k with n = Σ n_k.
pub fn eigenvalue_general(law: &WLaw, theta: f64, phi: &[f64], n_vec: &[usize]) -> Result<f64> {
    if phi.len() != n_vec.len() {
        return Err(Error::domain("one mutation eigenvalue is needed per index component"));
    }
    let n: usize = n_vec.iter().sum();
    let mutation: f64 = phi.iter().zip(n_vec).map(|(p, &k)| (1.0 - p) * k as f64).sum();
    Ok(0.5 * n as f64 * pair_term(law, n) + 0.5 * theta * mutation)
}

/// λ_n° = (n/2)[(n-1)E[(1-W)^{n-2}] + θ₁].
fn rates_circ(law: &WLaw, theta1: f64, n_max: usize) -> Vec<f64> {
    rates_with(law, theta1, n_max)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralTable {
    pub lambda: Vec<f64>,
    pub lambda_circ: Vec<f64>,
    pub p: Vec<Polynomial>,
    pub g: Vec<Polynomial>,
    pub omega: Vec<f64>,
    /// Set when N exceeds the conditioning advisory threshold.
    pub accuracy_advisory: bool,
}

fn check_model(model: &ModelSpec, n_max: usize) -> Result<()> {
    if model.d() != 2 {
        return Err(Error::domain("spectral polynomials are built for two types"));
    }
    if n_max > MAX_POLY_N {
        return Err(Error::DegreeOverflow { got: n_max, max: MAX_POLY_N });
    }
    Ok(())
}

/// Expand a polynomial of degree ≤ n in the monic basis `basis[0..=n]`.
fn expand_in(basis: &[Polynomial], p: &Polynomial) -> Vec<f64> {
    let mut rest = p.coeffs().to_vec();
    let n = rest.len();
    let mut c = vec![0.0; n];
    for m in (0..n).rev() {
        let a = rest[m];
        c[m] = a;
        for (i, b) in basis[m].coeffs().iter().enumerate() {
            rest[i] -= a * b;
        }
    }
    c
}

/// Monic P_0..P_N with L P_n = -λ_n P_n, by triangular correction in the
/// P-basis: P_n = xⁿ - Σ_{m<n} a_{nm}P_m with a_{nm} = b_{nm}/(λ_n - λ_m),
/// where L xⁿ + λ_n xⁿ = Σ_m b_{nm}P_m.
pub fn eigen_polynomials(model: &ModelSpec, n_max: usize) -> Result<Vec<Polynomial>> {
    check_model(model, n_max)?;
    let gen = Generator::with_degree(model, n_max.max(2));
    let a = gen.monomial_matrix(n_max);
    let lambda: Vec<f64> = (0..=n_max).map(|n| -a[n][n]).collect();
    let mut ps: Vec<Polynomial> = Vec::with_capacity(n_max + 1);
    ps.push(Polynomial::tagged(vec![1.0], Basis::Eigen));
    for n in 1..=n_max {
        // L xⁿ + λ_n xⁿ has degree < n
        let lx = Polynomial::new((0..n).map(|m| a[m][n]).collect());
        let b = expand_in(&ps, &lx);
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = 1.0;
        for (m, &bm) in b.iter().enumerate() {
            let gap = lambda[n] - lambda[m];
            if gap == 0.0 {
                return Err(Error::domain(format!("repeated eigenvalue λ_{m} = λ_{n}")));
            }
            let coef = bm / gap;
            for (i, c) in ps[m].coeffs().iter().enumerate() {
                coeffs[i] -= coef * c;
            }
        }
        ps.push(Polynomial::tagged(coeffs, Basis::Eigen));
    }
    Ok(ps)
}

/// Monic g_n solving L g_n + λ_n g_n = λ_n° g_{n-1}, coefficients of x^r
/// found from r = n-1 down to 0.
pub fn g_polynomials(model: &ModelSpec, n_max: usize) -> Result<Vec<Polynomial>> {
    check_model(model, n_max)?;
    if model.theta() <= 0.0 {
        return Err(Error::domain("g-polynomials need θ > 0"));
    }
    let gen = Generator::with_degree(model, n_max.max(2));
    let a = gen.monomial_matrix(n_max);
    let lambda: Vec<f64> = (0..=n_max).map(|n| -a[n][n]).collect();
    let circ = rates_circ(gen.law(), model.theta1(), n_max);
    let mut gs = vec![Polynomial::tagged(vec![1.0], Basis::G)];
    for n in 1..=n_max {
        let prev = gs[n - 1].coeffs().to_vec();
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        for r in (0..n).rev() {
            let mut s = Sum::default();
            s.add(circ[n] * prev.get(r).copied().unwrap_or(0.0));
            for k in r + 1..=n {
                s.add(-a[r][k] * c[k]);
            }
            c[r] = s.value() / (lambda[n] - lambda[r]);
        }
        gs.push(Polynomial::tagged(c, Basis::G));
    }
    Ok(gs)
}

/// E[g_n(X)] at stationarity: ∏_{j≤n} ((j-1)E[(1-W)^{j-2}] + θ₁)/((j-1)E[(1-W)^{j-2}] + θ).
pub fn omega(model: &ModelSpec, n: usize) -> Result<f64> {
    if model.theta() <= 0.0 {
        return Err(Error::domain("ω_n needs θ > 0"));
    }
    let law = WLaw::with_cache(&model.measure, n);
    Ok(omega_with(&law, model.theta1(), model.theta(), n))
}

fn omega_with(law: &WLaw, theta1: f64, theta: f64, n: usize) -> f64 {
    (1..=n).map(|j| (pair_term(law, j) + theta1) / (pair_term(law, j) + theta)).product()
}

pub fn spectral_table(model: &ModelSpec, n_max: usize) -> Result<SpectralTable> {
    let law = WLaw::with_cache(&model.measure, n_max);
    Ok(SpectralTable {
        lambda: rates_with(&law, model.theta(), n_max),
        lambda_circ: rates_circ(&law, model.theta1(), n_max),
        p: eigen_polynomials(model, n_max)?,
        g: g_polynomials(model, n_max)?,
        omega: (0..=n_max).map(|n| omega_with(&law, model.theta1(), model.theta(), n)).collect(),
        accuracy_advisory: n_max > ACCURACY_ADVISORY_N,
    })
}

/// Lower-triangular tables: `b[n][r]` expands g_n in the P-basis and
/// `c[n][r]` expands P_n in the g-basis.
#[derive(Debug, Clone, Serialize)]
pub struct BasisChange {
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

/// b_{nr} = ∏_{m=r+1}^n λ_m°/(λ_m - λ_r),
/// c_{nr} = ∏_{m=r+1}^n λ_m° / ∏_{m=r}^{n-1}(λ_m - λ_n).
pub fn basis_change(model: &ModelSpec, n_max: usize) -> Result<BasisChange> {
    if model.theta() <= 0.0 {
        return Err(Error::domain("basis change needs θ > 0"));
    }
    let law = WLaw::with_cache(&model.measure, n_max);
    let lam = rates_with(&law, model.theta(), n_max);
    let circ = rates_circ(&law, model.theta1(), n_max);
    let mut b = vec![vec![0.0; n_max + 1]; n_max + 1];
    let mut c = vec![vec![0.0; n_max + 1]; n_max + 1];
    for n in 0..=n_max {
        for r in 0..=n {
            b[n][r] = (r + 1..=n).map(|m| circ[m] / (lam[m] - lam[r])).product();
            let num: f64 = (r + 1..=n).map(|m| circ[m]).product();
            let den: f64 = (r..n).map(|m| lam[m] - lam[n]).product();
            c[n][r] = num / den;
        }
    }
    Ok(BasisChange { b, c })
}

/// ∏_i∏_{j=1}^{n_i}((j-1)E[(1-W)^{j-2}] + θ_i) / ∏_{j=1}^{n}((j-1)E[(1-W)^{j-2}] + θ).
pub fn g_expectation_d(model: &ModelSpec, n_vec: &[usize]) -> Result<f64> {
    if n_vec.len() != model.d() {
        return Err(Error::domain("index length must equal the number of types"));
    }
    if model.theta_i.iter().any(|&t| t <= 0.0) {
        return Err(Error::domain("every θ_i must be positive"));
    }
    let n: usize = n_vec.iter().sum();
    let law = WLaw::with_cache(&model.measure, n);
    let mut v = 1.0;
    for (&ni, &ti) in n_vec.iter().zip(&model.theta_i) {
        for j in 1..=ni {
            v *= pair_term(&law, j) + ti;
        }
    }
    for j in 1..=n {
        v /= pair_term(&law, j) + model.theta();
    }
    Ok(v)
}

/// Labelled sampling formula for block sizes (n_1..n_k), in the order given:
/// n!θᵏ/(n_1⋯n_k) · ∏_i∏_{j=2}^{n_i}E[(1-W)^{j-2}] / ∏_{j=1}^{n}((j-1)E[(1-W)^{j-2}] + θ).
pub fn esf_labelled(law: &WLaw, theta: f64, parts: &[usize]) -> Result<f64> {
    if theta <= 0.0 {
        return Err(Error::domain("the sampling formula needs θ > 0"));
    }
    if parts.is_empty() || parts.contains(&0) {
        return Err(Error::domain("block sizes must be positive"));
    }
    let n: usize = parts.iter().sum();
    let mut ln = factorial(n as u32).ln() + parts.len() as f64 * theta.ln();
    for &ni in parts {
        ln -= (ni as f64).ln();
        for j in 2..=ni {
            ln += law.moment(j - 2).ln();
        }
    }
    for j in 1..=n {
        ln -= (pair_term(law, j) + theta).ln();
    }
    Ok(ln.exp())
}

/// Probability of the unordered allelic partition with the given block sizes;
/// the labelled formula divided by ∏_j a_j!, a_j the multiplicity of size j.
pub fn esf_analogue(law: &WLaw, theta: f64, parts: &[usize]) -> Result<f64> {
    let lab = esf_labelled(law, theta, parts)?;
    let n: usize = parts.iter().sum();
    let mut mult = vec![0u32; n + 1];
    for &p in parts {
        mult[p] += 1;
    }
    Ok(lab / mult.iter().map(|&a| factorial(a)).product::<f64>())
}

/// All partitions of n as non-increasing size lists.
pub fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 0 {
            out.push(cur.clone());
            return;
        }
        for p in (1..=n.min(max)).rev() {
            cur.push(p);
            rec(n - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = vec![];
    rec(n, n, &mut vec![], &mut out);
    out
}

/// Σ over partitions of n of [`esf_analogue`]; equals one when W ≡ 0.
pub fn esf_total(law: &WLaw, theta: f64, n: usize) -> Result<f64> {
    let mut s = Sum::default();
    for p in partitions(n) {
        s.add(esf_analogue(law, theta, &p)?);
    }
    Ok(s.value())
}
