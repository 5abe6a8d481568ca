//! The Λ-Fleming-Viot generator on polynomials, in the jump-integral form
//! and in the Wright-Fisher form with random argument `x(1-W) + WV`.

use crate::error::{Error, Result};
use crate::measure::{LambdaMeasure, WLaw};
use crate::poly::{MultiPoly, Polynomial};
use crate::special::binom;

pub const MAX_DEGREE: usize = 64;
pub const MAX_DEGREE_D: u32 = 12;
pub const MAX_TYPES: usize = 6;

/// Measure plus parent-independent mutation rates and genic selection.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub measure: LambdaMeasure,
    /// Per-type mutation rates θ_i; the total rate is their sum.
    pub theta_i: Vec<f64>,
    /// Genic selection in favour of type 1 (two types only).
    pub beta: f64,
}

impl ModelSpec {
    pub fn new(measure: LambdaMeasure, theta_i: Vec<f64>, beta: f64) -> Result<Self> {
        if theta_i.len() < 2 {
            return Err(Error::domain("a model needs at least two types"));
        }
        if theta_i.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::domain("mutation rates must be finite and non-negative"));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::domain("selection coefficient must be finite and non-negative"));
        }
        if beta != 0.0 && theta_i.len() != 2 {
            return Err(Error::domain("selection is only supported for two types"));
        }
        Ok(ModelSpec { measure, theta_i, beta })
    }

    /// Check a separately supplied total rate against the per-type rates.
    pub fn with_total(measure: LambdaMeasure, theta: f64, theta_i: Vec<f64>, beta: f64) -> Result<Self> {
        let s: f64 = theta_i.iter().sum();
        if (s - theta).abs() > 1e-12 {
            return Err(Error::domain(format!("per-type mutation rates sum to {s}, not θ = {theta}")));
        }
        Self::new(measure, theta_i, beta)
    }

    pub fn two_type(measure: LambdaMeasure, theta1: f64, theta2: f64, beta: f64) -> Result<Self> {
        Self::new(measure, vec![theta1, theta2], beta)
    }

    pub fn neutral(measure: LambdaMeasure) -> Self {
        ModelSpec { measure, theta_i: vec![0.0, 0.0], beta: 0.0 }
    }

    pub fn d(&self) -> usize {
        self.theta_i.len()
    }

    pub fn theta(&self) -> f64 {
        self.theta_i.iter().sum()
    }

    pub fn theta1(&self) -> f64 {
        self.theta_i[0]
    }
}

/// Generator evaluator with moment tables precomputed up to a degree cap.
#[derive(Debug, Clone)]
pub struct Generator {
    model: ModelSpec,
    law: WLaw,
    max_deg: usize,
    /// `mixed[a][b]` = E[(1-W)^a W^b] for a + b ≤ max_deg.
    mixed: Vec<Vec<f64>>,
    /// ∫ y^k F(dy) for k ≤ max_deg.
    y_moments: Vec<f64>,
}

impl Generator {
    pub fn new(model: &ModelSpec) -> Self {
        Self::with_degree(model, MAX_DEGREE)
    }

    pub fn with_degree(model: &ModelSpec, max_deg: usize) -> Self {
        let law = WLaw::with_cache(&model.measure, max_deg.max(crate::measure::DEFAULT_MOMENT_CACHE));
        let mixed = (0..=max_deg)
            .map(|a| (0..=max_deg - a).map(|b| law.mixed(a as u32, b as u32)).collect())
            .collect();
        let y_moments = (0..=max_deg).map(|k| model.measure.y_moment(k as u32)).collect();
        Generator { model: model.clone(), law, max_deg, mixed, y_moments }
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn law(&self) -> &WLaw {
        &self.law
    }

    /// E[(1-W)^a W^b].
    pub fn mixed(&self, a: usize, b: usize) -> f64 {
        match self.mixed.get(a).and_then(|r| r.get(b)) {
            Some(&v) => v,
            None => self.law.mixed(a as u32, b as u32),
        }
    }

    fn check_degree(&self, g: &Polynomial) -> Result<()> {
        let d = g.degree().unwrap_or(0);
        if d > self.max_deg {
            return Err(Error::DegreeOverflow { got: d, max: self.max_deg });
        }
        Ok(())
    }

    fn drift(&self, g: &Polynomial, x: f64) -> f64 {
        let m = &self.model;
        let dg = g.derivative().eval(x);
        if m.d() != 2 {
            panic!("two-type drift requested for a {}-type model", m.d());
        }
        0.5 * (m.theta1() - m.theta() * x) * dg + m.beta * x * (1.0 - x) * dg
    }

    /// ∫[x(g(x(1-y)+y) - g(x)) + (1-x)(g(x(1-y)) - g(x))] y⁻² F(dy) plus drift.
    ///
    /// Taylor-expanding about x turns the bracket into
    /// Σ_{m≥2} g^{(m)}(x)/m! [x(1-x)^m + (1-x)(-x)^m] y^m, so only the
    /// moments ∫ y^{m-2} F(dy) are needed; the atom at zero enters through
    /// m = 2 alone, which is the Wright-Fisher term.
    pub fn apply_jump_form(&self, g: &Polynomial, x: f64) -> Result<f64> {
        self.check_two_type(x)?;
        self.check_degree(g)?;
        let t = g.taylor_at(x);
        let mut s = 0.0;
        let (mut pa, mut pb) = (1.0 - x, -x);
        for m in 1..t.len() {
            if m >= 2 {
                s += t[m] * (x * pa + (1.0 - x) * pb) * self.y_moments[m - 2];
            }
            pa *= 1.0 - x;
            pb *= -x;
        }
        Ok(s + self.drift(g, x))
    }

    /// (1/2)x(1-x)E[g''(x(1-W)+WV)] plus drift, with the expectation taken
    /// exactly through E[(x(1-W)+VW)^j] = Σ_i C(j,i) x^i E[(1-W)^i W^{j-i}]/(j-i+1).
    pub fn apply_wf_form(&self, g: &Polynomial, x: f64) -> Result<f64> {
        self.check_two_type(x)?;
        self.check_degree(g)?;
        let g2 = g.derivative().derivative();
        let mut e = 0.0;
        for (j, &a) in g2.coeffs().iter().enumerate() {
            if a != 0.0 {
                e += a * self.shifted_power(x, j);
            }
        }
        Ok(0.5 * x * (1.0 - x) * e + self.drift(g, x))
    }

    /// E[(x(1-W) + VW)^j].
    pub fn shifted_power(&self, x: f64, j: usize) -> f64 {
        let mut s = 0.0;
        let mut xi = 1.0;
        for i in 0..=j {
            s += binom(j as u64, i as u64) * xi * self.mixed(i, j - i) / (j - i + 1) as f64;
            xi *= x;
        }
        s
    }

    fn check_two_type(&self, x: f64) -> Result<()> {
        if self.model.d() != 2 {
            return Err(Error::domain("the one-dimensional forms need a two-type model"));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("frequency {x} outside [0,1]")));
        }
        Ok(())
    }

    /// d-dimensional Wright-Fisher form with parent-independent mutation,
    /// (1/2)Σ_{ij} x_i(δ_ij - x_j) E[g_ij(x(1-W) + WV e_i)] + (1/2)Σ_i(θ_i - θx_i) g_i.
    ///
    /// `x` has one coordinate per type; a total below one is read as an
    /// extra type of frequency 1 - Σx that `g` does not depend on.
    pub fn apply_d_dim(&self, g: &MultiPoly, x: &[f64]) -> Result<f64> {
        let d = self.model.d();
        if d > MAX_TYPES {
            return Err(Error::domain(format!("at most {MAX_TYPES} types are supported")));
        }
        if g.d != d || x.len() != d {
            return Err(Error::domain("polynomial, point and model dimensions differ"));
        }
        let deg = g.total_degree();
        if deg > MAX_DEGREE_D {
            return Err(Error::DegreeOverflow { got: deg as usize, max: MAX_DEGREE_D as usize });
        }
        let sx: f64 = x.iter().sum();
        if x.iter().any(|&v| v < 0.0) || sx > 1.0 + 1e-12 {
            return Err(Error::domain("point is outside the simplex"));
        }
        if self.model.beta != 0.0 {
            return Err(Error::domain("selection is not part of the d-dimensional form"));
        }
        let mut s = 0.0;
        for i in 0..d {
            let gi = g.partial(i);
            for j in 0..d {
                let coef = x[i] * (if i == j { 1.0 } else { 0.0 } - x[j]);
                if coef == 0.0 {
                    continue;
                }
                let gij = gi.partial(j);
                let e: f64 = gij.terms.iter().map(|(m, c)| c * self.shifted_monomial(x, m, i)).sum();
                s += 0.5 * coef * e;
            }
            let th = self.model.theta();
            s += 0.5 * (self.model.theta_i[i] - th * x[i]) * gi.eval(x);
        }
        Ok(s)
    }

    /// E[∏_k z_k^{m_k}] for z = x(1-W) + WV e_i.
    fn shifted_monomial(&self, x: &[f64], m: &[u32], i: usize) -> f64 {
        let total: u32 = m.iter().sum();
        let others: f64 = m.iter().enumerate().filter(|&(k, _)| k != i).map(|(k, &e)| x[k].powi(e as i32)).product();
        let mi = m[i];
        let mut s = 0.0;
        for l in 0..=mi {
            let a = (total - mi + l) as usize;
            let b = (mi - l) as usize;
            s += binom(mi as u64, l as u64) * x[i].powi(l as i32) * self.mixed(a, b) / (b + 1) as f64;
        }
        others * s
    }

    /// Matrix of the neutral generator in the monomial basis: `L x^n = Σ_m a[m][n] x^m`.
    ///
    /// Upper triangular with diagonal -λ_n. Selection is ignored.
    pub fn monomial_matrix(&self, n_max: usize) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; n_max + 1]; n_max + 1];
        let (t1, t) = (self.model.theta1(), self.model.theta());
        for n in 1..=n_max {
            let nf = n as f64;
            // mutation: (1/2)(θ₁ - θx) n x^{n-1}
            a[n - 1][n] += 0.5 * t1 * nf;
            a[n][n] -= 0.5 * t * nf;
            if n >= 2 {
                // (1/2)n(n-1)(x - x²) Σ_i c_i x^i
                let j = n - 2;
                for i in 0..=j {
                    let c = 0.5 * nf * (nf - 1.0) * binom(j as u64, i as u64) * self.mixed(i, j - i) / (j - i + 1) as f64;
                    a[i + 1][n] += c;
                    a[i + 2][n] -= c;
                }
            }
        }
        a
    }
}

pub fn apply_jump_form(model: &ModelSpec, g: &Polynomial, x: f64) -> Result<f64> {
    Generator::with_degree(model, g.degree().unwrap_or(0).max(2)).apply_jump_form(g, x)
}

pub fn apply_wf_form(model: &ModelSpec, g: &Polynomial, x: f64) -> Result<f64> {
    Generator::with_degree(model, g.degree().unwrap_or(0).max(2)).apply_wf_form(g, x)
}

pub fn apply_d_dim(model: &ModelSpec, g: &MultiPoly, x: &[f64]) -> Result<f64> {
    Generator::with_degree(model, g.total_degree().max(2) as usize).apply_d_dim(g, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, BetaPart};

    fn pm() -> LambdaMeasure {
        LambdaMeasure::point_mass(0.5).unwrap()
    }

    #[test]
    fn identity_and_square() {
        for m in [LambdaMeasure::kingman(), pm(), LambdaMeasure::beta_coalescent(1.5).unwrap()] {
            let model = ModelSpec::neutral(m);
            let gen = Generator::new(&model);
            let id = Polynomial::monomial(1);
            let sq = Polynomial::monomial(2);
            for x in [0.0, 0.2, 0.65, 1.0] {
                assert_eq!(gen.apply_jump_form(&id, x).unwrap(), 0.0);
                assert_eq!(gen.apply_wf_form(&id, x).unwrap(), 0.0);
                assert!((gen.apply_jump_form(&sq, x).unwrap() - x * (1.0 - x)).abs() < 1e-14);
                assert!((gen.apply_wf_form(&sq, x).unwrap() - x * (1.0 - x)).abs() < 1e-14);
            }
            assert_eq!(gen.apply_wf_form(&Polynomial::new(vec![3.0]), 0.4).unwrap(), 0.0);
            assert_eq!(gen.apply_jump_form(&Polynomial::new(vec![3.0]), 0.4).unwrap(), 0.0);
        }
    }

    #[test]
    fn forms_agree_on_examples() {
        let model = ModelSpec::neutral(pm());
        let g = Polynomial::monomial(5);
        let a = apply_jump_form(&model, &g, 0.3).unwrap();
        let b = apply_wf_form(&model, &g, 0.3).unwrap();
        assert!((a - b).abs() < 1e-10);

        let model = ModelSpec::with_total(LambdaMeasure::beta_coalescent(1.2).unwrap(), 1.0, vec![0.3, 0.7], 0.0).unwrap();
        let g = Polynomial::new(vec![0.0, 0.0, -1.0, 0.0, 1.0]);
        let a = apply_jump_form(&model, &g, 0.7).unwrap();
        let b = apply_wf_form(&model, &g, 0.7).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn kingman_is_wright_fisher() {
        let model = ModelSpec::two_type(LambdaMeasure::kingman(), 0.4, 1.1, 0.8).unwrap();
        let g = Polynomial::new(vec![0.3, -1.0, 2.0, 0.5, -0.7, 0.2]);
        let (d1, d2) = (g.derivative(), g.derivative().derivative());
        for x in [0.1, 0.5, 0.9] {
            let wf = 0.5 * x * (1.0 - x) * d2.eval(x) + 0.5 * (0.4 - 1.5 * x) * d1.eval(x) + 0.8 * x * (1.0 - x) * d1.eval(x);
            assert!((apply_wf_form(&model, &g, x).unwrap() - wf).abs() < 1e-13);
            assert!((apply_jump_form(&model, &g, x).unwrap() - wf).abs() < 1e-13);
        }
    }

    #[test]
    fn degree_cap() {
        let model = ModelSpec::neutral(pm());
        let gen = Generator::new(&model);
        assert!(matches!(gen.apply_wf_form(&Polynomial::monomial(65), 0.5), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn d_dim_examples() {
        let model = ModelSpec::neutral(pm());
        let model = ModelSpec { theta_i: vec![0.0; 3], ..model };
        let x = [0.2, 0.3, 0.5];
        let xi = MultiPoly::monomial(vec![1, 0, 0]);
        assert_eq!(apply_d_dim(&model, &xi, &x).unwrap(), 0.0);
        let xij = MultiPoly::monomial(vec![1, 1, 0]);
        assert!((apply_d_dim(&model, &xij, &x).unwrap() + 0.06).abs() < 1e-15);
        assert!(apply_d_dim(&model, &xi, &[0.5, 0.6, 0.1]).is_err());
    }

    #[test]
    fn d_dim_reduces_to_two_types() {
        let m = LambdaMeasure::new(0.2, vec![Atom { y: 0.4, w: 0.5 }], Some(BetaPart { alpha: 1.4, w: 0.3 })).unwrap();
        let model = ModelSpec::two_type(m, 0.6, 0.9, 0.0).unwrap();
        // g(x1, x2) = x1^4 with x2 = 1 - x1
        let g = MultiPoly::monomial(vec![4, 0]);
        let x = 0.35;
        let a = apply_d_dim(&model, &g, &[x, 1.0 - x]).unwrap();
        let b = apply_wf_form(&model, &Polynomial::monomial(4), x).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn monomial_matrix_matches_wf_form() {
        let model = ModelSpec::two_type(pm(), 0.5, 0.5, 0.0).unwrap();
        let gen = Generator::new(&model);
        let a = gen.monomial_matrix(8);
        for n in 0..=8 {
            let col = Polynomial::new((0..=8).map(|m| a[m][n]).collect());
            for x in [0.15, 0.8] {
                let direct = gen.apply_wf_form(&Polynomial::monomial(n), x).unwrap();
                assert!((col.eval(x) - direct).abs() < 1e-13);
            }
        }
    }
}
