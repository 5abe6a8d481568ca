//! Fixation probability of type 1 under genic selection β, two types and no
//! mutation: the threshold β* and the H_n polynomial series.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::{Generator, ModelSpec};
use crate::measure::{LambdaMeasure, WLaw};
use crate::poly::{Basis, Polynomial};
use crate::quad::adaptive;
use crate::rates::{lambda_nk, total_rate};
use crate::special::{binom, factorial, Sum};

pub const MAX_TERMS: usize = 64;

/// β* = -∫ log(1-y) y⁻² F(dy); infinite with an atom at 0 or 1, or a Beta
/// component with α ≥ 1.
pub fn beta_star(m: &LambdaMeasure) -> f64 {
    if m.p_w0() > 0.0 || m.has_atom_at_one() || m.beta_alpha().is_some_and(|(al, _)| al >= 1.0) {
        return f64::INFINITY;
    }
    let mut s: f64 = m.atom_list().map(|(y, w)| -w * (-y).ln_1p() / (y * y)).sum();
    // -log(1-y)/y² against y^{1-α}(1-y)^{α-1}: g = -log(1-y)/y, exponents shifted by -1 at 0
    s += m.beta_integral_shifted(|y, yb| match y {
        _ if y < 1e-8 => 1.0 + 0.5 * y,
        _ if y < 0.5 => -(-y).ln_1p() / y,
        _ => -yb.ln() / y,
    }, -1.0, 0.0, 0.0, 1.0);
    s
}

/// The same threshold as (1/2)E[1/(W(1-W))].
pub fn beta_star_w(m: &LambdaMeasure) -> f64 {
    if m.p_w0() > 0.0 || m.has_atom_at_one() || m.beta_alpha().is_some_and(|(al, _)| al >= 1.0) {
        return f64::INFINITY;
    }
    let mut e = 0.0;
    for (y, w) in m.atom_list() {
        // W = uy with density 2u: 2u/(uy(1-uy)) = 2/(y(1-uy))
        e += w * adaptive(|u| 2.0 / (y * (1.0 - u * y)), 0.0, 1.0, 0.0, 1e-15).value;
    }
    if let Some((al, wb)) = m.beta_alpha() {
        // W ~ Beta(2-α, 1+α) so E[1/(W(1-W))] = B(1-α, α)/B(2-α, 1+α)
        use statrs::function::beta::ln_beta;
        e += wb * (ln_beta(1.0 - al, al) - ln_beta(2.0 - al, 1.0 + al)).exp();
    }
    0.5 * e
}

/// Table of E[(1-W)^a W^b] for a + b ≤ n.
struct Mixed(Vec<Vec<f64>>);

impl Mixed {
    fn new(law: &WLaw, n: usize) -> Self {
        Mixed((0..=n).map(|a| (0..=n - a).map(|b| law.mixed(a as u32, b as u32)).collect()).collect())
    }
    fn get(&self, a: usize, b: usize) -> f64 {
        self.0[a][b]
    }
}

fn check_moments(mx: &Mixed, n: usize) -> Result<()> {
    for j in 0..n {
        if mx.get(j, 0) <= 0.0 {
            return Err(Error::domain(format!("E[(1-W)^{j}] vanishes; the recursion is undefined")));
        }
    }
    Ok(())
}

/// Coefficients a_{nr} of h_0..h_N, solving
/// Σ_{r>j} C(r,j)E[(1-W)^j W^{r-j-1}] a_{nr} = n a_{n-1,j}, with
/// a_{nn} = 1/∏_{j<n}E[(1-W)^j] and a_{n0} fixed by ∫_0^1 (n+1)h_n = 1.
pub fn h_coefficients(m: &LambdaMeasure, n_max: usize) -> Result<Vec<Vec<f64>>> {
    if n_max > MAX_TERMS {
        return Err(Error::DegreeOverflow { got: n_max, max: MAX_TERMS });
    }
    let law = WLaw::with_cache(m, n_max + 1);
    let mx = Mixed::new(&law, n_max + 1);
    check_moments(&mx, n_max)?;
    let mut a = vec![vec![1.0]];
    for n in 1..=n_max {
        let prev = &a[n - 1];
        let mut c = vec![0.0; n + 1];
        for j in (0..n).rev() {
            let mut s = Sum::default();
            s.add(n as f64 * prev[j]);
            for r in j + 2..=n {
                s.add(-binom(r as u64, j as u64) * mx.get(j, r - j - 1) * c[r]);
            }
            c[j + 1] = s.value() / ((j + 1) as f64 * mx.get(j, 0));
        }
        let tail: f64 = (1..=n).map(|r| c[r] / (r + 1) as f64).sum();
        c[0] = 1.0 / (n + 1) as f64 - tail;
        a.push(c);
    }
    Ok(a)
}

pub fn h_polynomials(m: &LambdaMeasure, n_max: usize) -> Result<Vec<Polynomial>> {
    Ok(h_coefficients(m, n_max)?.into_iter().map(Polynomial::new).collect())
}

/// H_n(x) = ∫_0^x n h_{n-1}; index 0 holds the zero polynomial.
fn big_h_from(a: &[Vec<f64>], n_max: usize) -> Vec<Polynomial> {
    let mut out = vec![Polynomial::tagged(vec![], Basis::H)];
    for n in 1..=n_max {
        let mut b = vec![0.0; n + 1];
        for j in 1..=n {
            b[j] = n as f64 * a[n - 1][j - 1] / j as f64;
        }
        out.push(Polynomial::tagged(b, Basis::H));
    }
    out
}

/// H_1..H_N through the coefficient recursion of the h_n family.
pub fn big_h_polynomials(m: &LambdaMeasure, n_max: usize) -> Result<Vec<Polynomial>> {
    let a = h_coefficients(m, n_max.saturating_sub(1))?;
    Ok(big_h_from(&a, n_max))
}

/// H_n coefficients directly: for j = n..1,
/// Σ_{r=j}^n C(r,j-1)E[(1-W)^{j-1}W^{r-j}](r+1) b_{n+1,r+1} = (n+1) j b_{nj},
/// then b_{n+1,1} = 1 - Σ_{j≥2} b_{n+1,j}.
pub fn big_h_direct(m: &LambdaMeasure, n_max: usize) -> Result<Vec<Polynomial>> {
    if n_max > MAX_TERMS {
        return Err(Error::DegreeOverflow { got: n_max, max: MAX_TERMS });
    }
    let law = WLaw::with_cache(m, n_max + 1);
    let mx = Mixed::new(&law, n_max + 1);
    check_moments(&mx, n_max)?;
    let mut bs: Vec<Vec<f64>> = vec![vec![], vec![0.0, 1.0]];
    for n in 1..n_max {
        let prev = &bs[n];
        let mut b = vec![0.0; n + 2];
        for j in (1..=n).rev() {
            let mut s = Sum::default();
            s.add(((n + 1) * j) as f64 * prev[j]);
            for r in j + 1..=n {
                s.add(-binom(r as u64, (j - 1) as u64) * mx.get(j - 1, r - j) * (r + 1) as f64 * b[r + 1]);
            }
            b[j + 1] = s.value() / (j as f64 * mx.get(j - 1, 0) * (j + 1) as f64);
        }
        b[1] = 1.0 - b[2..].iter().sum::<f64>();
        bs.push(b);
    }
    Ok(finish(bs, n_max))
}

/// The same recursion written with merger rates:
/// 2Σ_{r=j+1}^{n+1}[Σ_{k=r-j+1}^r C(r,k)λ_{rk}] b_{n+1,r} = (n+1) j b_{nj}.
pub fn big_h_rate_form(m: &LambdaMeasure, n_max: usize) -> Result<Vec<Polynomial>> {
    if n_max > MAX_TERMS {
        return Err(Error::DegreeOverflow { got: n_max, max: MAX_TERMS });
    }
    let law = WLaw::with_cache(m, n_max + 1);
    // s[r][j] = Σ_{k=r-j+1}^r C(r,k) λ_{rk}
    let mut cl = vec![vec![0.0; n_max + 2]; n_max + 2];
    for r in 2..=n_max + 1 {
        for k in 2..=r {
            cl[r][k] = binom(r as u64, k as u64) * lambda_nk(m, r as u64, k as u64)?;
        }
    }
    let s = |r: usize, j: usize| -> f64 { (r - j + 1..=r).filter(|&k| k >= 2).map(|k| cl[r][k]).sum() };
    let mut bs: Vec<Vec<f64>> = vec![vec![], vec![0.0, 1.0]];
    for n in 1..n_max {
        let prev = &bs[n];
        let mut b = vec![0.0; n + 2];
        for j in (1..=n).rev() {
            let mut acc = Sum::default();
            acc.add(((n + 1) * j) as f64 * prev[j]);
            for r in j + 2..=n + 1 {
                acc.add(-2.0 * s(r, j) * b[r]);
            }
            let diag = 2.0 * total_rate(&law, (j + 1) as u64);
            if diag <= 0.0 {
                return Err(Error::domain("vanishing merger rate in the H recursion"));
            }
            b[j + 1] = acc.value() / diag;
        }
        b[1] = 1.0 - b[2..].iter().sum::<f64>();
        bs.push(b);
    }
    Ok(finish(bs, n_max))
}

fn finish(mut bs: Vec<Vec<f64>>, n_max: usize) -> Vec<Polynomial> {
    bs.truncate(n_max + 1);
    bs.into_iter().map(|b| Polynomial::tagged(b, Basis::H)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Series terms decayed below the tolerance.
    Series,
    /// Terms stopped decreasing; summed to the smallest term (optimal truncation).
    Asymptotic,
    /// β ≥ β*: fixation is certain from any x > 0.
    Certain,
    /// x at a boundary, or β = 0 where P(x) = x.
    Exact,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FixationValue {
    pub p: f64,
    pub method: Method,
    pub terms: usize,
    /// Size of the first omitted contribution; zero for exact answers.
    pub error_estimate: f64,
}

/// Precomputed H_n polynomials for one (measure, β) pair.
#[derive(Debug, Clone, Serialize)]
pub struct FixationSolution {
    pub beta: f64,
    pub beta_star: f64,
    pub h: Vec<Polynomial>,
    pub tol: f64,
}

impl FixationSolution {
    pub fn new(m: &LambdaMeasure, beta: f64, tol: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::domain(format!("selection coefficient {beta} must be finite and non-negative")));
        }
        let bs = beta_star(m);
        let h = if beta > 0.0 && beta < bs { big_h_rate_form(m, MAX_TERMS)? } else { vec![] };
        Ok(FixationSolution { beta, beta_star: bs, h, tol })
    }

    fn norm(&self) -> f64 {
        1.0 / -(-2.0 * self.beta).exp_m1()
    }

    /// Series coefficient (-1)^{n-1}(2β)^n/n! times the normalization.
    fn coef(&self, n: usize) -> f64 {
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        sign * self.norm() * ((n as f64) * (2.0 * self.beta).ln() - factorial(n as u32).ln()).exp()
    }

    pub fn eval(&self, x: f64) -> Result<FixationValue> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("frequency {x} outside [0,1]")));
        }
        let exact = |p| Ok(FixationValue { p, method: Method::Exact, terms: 0, error_estimate: 0.0 });
        if x == 0.0 {
            return exact(0.0);
        }
        if x == 1.0 {
            return exact(1.0);
        }
        if self.beta == 0.0 {
            return exact(x);
        }
        if self.beta >= self.beta_star {
            return Ok(FixationValue { p: 1.0, method: Method::Certain, terms: 0, error_estimate: 0.0 });
        }
        let terms: Vec<f64> = (1..=MAX_TERMS).map(|n| self.coef(n) * self.h[n].eval(x)).collect();
        let mut sum = Sum::default();
        let mut best = (f64::INFINITY, 0usize, 0.0);
        let mut decayed = false; // set once past the peak term
        let mut rising = 0;
        for (i, &t) in terms.iter().enumerate() {
            let n = i + 1;
            let prev = if i > 0 { terms[i - 1].abs() } else { f64::INFINITY };
            if i > 0 && t.abs() < prev {
                decayed = true;
                rising = 0;
            } else if decayed {
                rising += 1;
            }
            if decayed && t.abs() < best.0 {
                best = (t.abs(), n, sum.value() + 0.5 * t);
            }
            sum.add(t);
            if decayed && t.abs() <= self.tol * sum.value().abs() && t.abs() < prev {
                return Ok(FixationValue { p: sum.value().clamp(0.0, 1.0), method: Method::Series, terms: n, error_estimate: t.abs() });
            }
            if rising >= 3 {
                break;
            }
        }
        if !decayed {
            return Err(Error::NonConvergence {
                message: format!("fixation series terms never decreased within {MAX_TERMS} terms"),
                residual: terms.last().copied().unwrap_or(f64::NAN).abs(),
            });
        }
        let (err, n, p) = best;
        Ok(FixationValue { p: p.clamp(0.0, 1.0), method: Method::Asymptotic, terms: n, error_estimate: 0.5 * err })
    }

    /// The polynomial Σ_{n≤N} coef_n H_n used by a truncation at N terms.
    pub fn partial_polynomial(&self, n_terms: usize) -> Polynomial {
        let mut p = Polynomial::zero();
        for n in 1..=n_terms.min(self.h.len().saturating_sub(1)) {
            p = &p + &self.h[n].scale(self.coef(n));
        }
        p
    }
}

pub fn fixation_probability(m: &LambdaMeasure, beta: f64, x: f64, tol: f64) -> Result<FixationValue> {
    FixationSolution::new(m, beta, tol)?.eval(x)
}

/// Residual of E[P''(x(1-W)+WV)] + 2βP'(x) for a polynomial P; this is the
/// V-integrated fixation equation.
pub fn fixation_residual(m: &LambdaMeasure, beta: f64, p: &Polynomial, x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain("residual is evaluated inside (0,1)"));
    }
    let model = ModelSpec::two_type(m.clone(), 0.0, 0.0, beta)?;
    let gen = Generator::with_degree(&model, p.degree().unwrap_or(0).max(2));
    Ok(2.0 * gen.apply_wf_form(p, x)? / (x * (1.0 - x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::gl01;

    #[test]
    fn thresholds() {
        let pm = LambdaMeasure::point_mass(0.5).unwrap();
        assert!((beta_star(&pm) - 4.0 * 2f64.ln()).abs() < 1e-12);
        assert!((beta_star_w(&pm) - 4.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(beta_star(&LambdaMeasure::kingman()), f64::INFINITY);
        assert_eq!(beta_star(&LambdaMeasure::point_mass(1.0).unwrap()), f64::INFINITY);
        assert_eq!(beta_star(&LambdaMeasure::beta_coalescent(1.5).unwrap()), f64::INFINITY);
        let p9 = LambdaMeasure::point_mass(0.9).unwrap();
        assert!((beta_star(&p9) - (-(0.1f64.ln()) / 0.81)).abs() < 1e-12);
        for alpha in [0.3, 0.5, 0.8] {
            let b = LambdaMeasure::beta_coalescent(alpha).unwrap();
            let (a, w) = (beta_star(&b), beta_star_w(&b));
            assert!(((a - w) / w).abs() < 1e-8, "α={alpha}: {a} vs {w}");
        }
    }

    #[test]
    fn kingman_h_polynomials_are_monomials() {
        let k = LambdaMeasure::kingman();
        let h = h_polynomials(&k, 10).unwrap();
        let hh = big_h_polynomials(&k, 10).unwrap();
        for n in 1..=10 {
            for r in 0..=n {
                let want = if r == n { 1.0 } else { 0.0 };
                assert!((h[n].coeff(r) - want).abs() < 1e-15);
                assert!((hh[n].coeff(r) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn h_leading_coefficient() {
        let pm = LambdaMeasure::point_mass(0.5).unwrap();
        let a = h_coefficients(&pm, 6).unwrap();
        assert_eq!(a[1][1], 1.0);
        let law = WLaw::new(&pm);
        for n in 1..=6 {
            let lead = 1.0 / (1..n).map(|j| law.moment(j)).product::<f64>();
            assert!((a[n][n] - lead).abs() < 1e-13 * lead);
        }
    }

    #[test]
    fn h3_solves_defining_equation() {
        // E[(h(x(1-W)+W) - h(x(1-W)))/W] = n h_{n-1}(x), W = u/2 by quadrature in u
        let pm = LambdaMeasure::point_mass(0.5).unwrap();
        let h = h_polynomials(&pm, 3).unwrap();
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            let lhs = gl01(64).integrate(0.0, 1.0, |u| {
                let w = 0.5 * u;
                2.0 * u * (h[3].eval(x * (1.0 - w) + w) - h[3].eval(x * (1.0 - w))) / w
            });
            assert!((lhs - 3.0 * h[2].eval(x)).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn h_routes_agree() {
        for m in [
            LambdaMeasure::point_mass(0.5).unwrap(),
            LambdaMeasure::beta_coalescent(0.6).unwrap(),
            LambdaMeasure::beta_coalescent(1.5).unwrap(),
        ] {
            let a = big_h_polynomials(&m, 12).unwrap();
            let b = big_h_direct(&m, 12).unwrap();
            let c = big_h_rate_form(&m, 12).unwrap();
            assert_eq!(a[1].coeffs(), &[0.0, 1.0]);
            for n in 1..=12 {
                let scale: f64 = a[n].coeffs().iter().map(|c| c.abs()).sum();
                assert!(a[n].eval(0.0).abs() < 1e-12 && (a[n].eval(1.0) - 1.0).abs() < 1e-14 * scale, "n={n}");
                for r in 0..=n {
                    let s = 1e-2 * scale.max(1.0);
                    assert!((a[n].coeff(r) - b[n].coeff(r)).abs() < 1e-10 * s, "n={n} r={r}");
                    assert!((a[n].coeff(r) - c[n].coeff(r)).abs() < 1e-10 * s, "n={n} r={r}");
                }
            }
        }
    }

    #[test]
    fn kingman_series_matches_closed_form() {
        let k = LambdaMeasure::kingman();
        for beta in [0.1, 1.0, 2.5, 4.0] {
            let sol = FixationSolution::new(&k, beta, 1e-14).unwrap();
            for i in 0..=20 {
                let x = i as f64 / 20.0;
                let exact = -(-2.0 * beta * x).exp_m1() / -(-2.0 * beta).exp_m1();
                let v = sol.eval(x).unwrap();
                assert!((v.p - exact).abs() < 1e-9, "β={beta} x={x}: {} vs {exact}", v.p);
            }
        }
        let v = fixation_probability(&k, 1.0, 0.5, 1e-12).unwrap();
        assert!((v.p - 0.731_058_578_630_004_9).abs() < 1e-9);
    }

    #[test]
    fn certain_and_boundary_branches() {
        let p9 = LambdaMeasure::point_mass(0.9).unwrap();
        let v = fixation_probability(&p9, 3.0, 0.01, 1e-10).unwrap();
        assert_eq!((v.p, v.method), (1.0, Method::Certain));
        let pm = LambdaMeasure::point_mass(0.5).unwrap();
        assert_eq!(fixation_probability(&pm, 1.0, 0.0, 1e-10).unwrap().p, 0.0);
        assert_eq!(fixation_probability(&pm, 1.0, 1.0, 1e-10).unwrap().p, 1.0);
        assert_eq!(fixation_probability(&pm, 0.0, 0.3, 1e-10).unwrap().p, 0.3);
    }

    #[test]
    fn convergent_series_solves_the_equation() {
        // a mostly-Kingman measure has a convergent series
        let m = LambdaMeasure::new(0.9, vec![crate::measure::Atom { y: 0.3, w: 0.1 }], None).unwrap();
        let tol = 1e-10;
        let sol = FixationSolution::new(&m, 1.5, tol).unwrap();
        let v = sol.eval(0.5).unwrap();
        assert_eq!(v.method, Method::Series);
        let p = sol.partial_polynomial(40);
        for i in 1..10 {
            let x = i as f64 / 10.0;
            let r = fixation_residual(&m, 1.5, &p, x).unwrap();
            assert!(r.abs() < 10.0 * tol, "x={x}: residual {r}");
        }
        let mut prev = 0.0;
        for i in 0..=20 {
            let p = sol.eval(i as f64 / 20.0).unwrap().p;
            assert!(p >= prev - 1e-12);
            prev = p;
        }
    }

    #[test]
    fn monotone_in_beta() {
        let pm = LambdaMeasure::point_mass(0.5).unwrap();
        let mut prev = 0.0;
        for i in 0..=10 {
            let beta = 0.2 * i as f64;
            let p = fixation_probability(&pm, beta, 0.4, 1e-10).unwrap().p;
            assert!(p >= prev - 1e-4, "β={beta}: {p} < {prev}");
            prev = p;
        }
    }
}
