//! Dense univariate polynomials and sparse multivariate polynomials.

use std::ops::{Add, Mul, Sub};

use serde::Serialize;

/// Which polynomial family a [`Polynomial`] belongs to. Coefficients are
/// always stored in the monomial basis; the tag records provenance so that
/// eigen-, g- and H-polynomials are not mixed up downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Monomial,
    Eigen,
    G,
    H,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
    pub basis: Basis,
}

impl Polynomial {
    /// Coefficients lowest degree first; trailing zeros are dropped.
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self::tagged(coeffs, Basis::Monomial)
    }

    pub fn tagged(mut coeffs: Vec<f64>, basis: Basis) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs, basis }
    }

    pub fn zero() -> Self {
        Self::new(vec![])
    }

    pub fn monomial(n: usize) -> Self {
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of x^r, zero beyond the degree.
    pub fn coeff(&self, r: usize) -> f64 {
        self.coeffs.get(r).copied().unwrap_or(0.0)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        let c = self.coeffs.iter().enumerate().skip(1).map(|(i, &c)| i as f64 * c).collect();
        Self::tagged(c, self.basis)
    }

    /// The antiderivative vanishing at 0.
    pub fn integral(&self) -> Self {
        let mut c = vec![0.0];
        c.extend(self.coeffs.iter().enumerate().map(|(i, &c)| c / (i + 1) as f64));
        Self::tagged(c, self.basis)
    }

    /// Taylor coefficients g^{(m)}(x)/m! for m = 0..=degree.
    pub fn taylor_at(&self, x: f64) -> Vec<f64> {
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                c[j] += x * c[j + 1];
            }
        }
        c
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::tagged(self.coeffs.iter().map(|c| c * s).collect(), self.basis)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, o: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(o.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, o: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(o.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) - o.coeff(i)).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, o: &Polynomial) -> Polynomial {
        if self.coeffs.is_empty() || o.coeffs.is_empty() {
            return Polynomial::zero();
        }
        let mut c = vec![0.0; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Polynomial::new(c)
    }
}

/// Sparse polynomial in d variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPoly {
    pub d: usize,
    pub terms: Vec<(Vec<u32>, f64)>,
}

impl MultiPoly {
    pub fn new(d: usize, terms: Vec<(Vec<u32>, f64)>) -> Self {
        assert!(terms.iter().all(|(e, _)| e.len() == d), "exponent vectors must have length d");
        MultiPoly { d, terms }
    }

    pub fn monomial(exps: Vec<u32>) -> Self {
        MultiPoly { d: exps.len(), terms: vec![(exps, 1.0)] }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.iter().map(|(e, _)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn partial(&self, i: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[i] > 0)
            .map(|(e, c)| {
                let mut e2 = e.clone();
                e2[i] -= 1;
                (e2, c * e[i] as f64)
            })
            .collect();
        MultiPoly { d: self.d, terms }
    }
}
