//! The measure `F` on [0,1] and the derived law of `W = UY`.
//!
//! `F` is a mixture of an atom at zero, finitely many atoms in (0,1] and an
//! optional Beta(2-α, α) density. `U` has density `2u` on (0,1), `V` is
//! uniform, and all three are independent of `Y ~ F`.

use rand::{Rng, RngExt};
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad::{beta_weighted, gl01, gl01_exact, MAX_GL_NODES};
use crate::special::ln_gamma_ratio;

const WEIGHT_TOL: f64 = 1e-12;
const RENORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub y: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaPart {
    pub alpha: f64,
    pub w: f64,
}

impl BetaPart {
    /// ln B(2-α, α), the normalizer of the Beta(2-α, α) density.
    fn ln_norm(&self) -> f64 {
        ln_beta(2.0 - self.alpha, self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaMeasure {
    #[serde(default)]
    pub atom0: f64,
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaPart>,
}

impl LambdaMeasure {
    pub fn new(atom0: f64, atoms: Vec<Atom>, beta: Option<BetaPart>) -> Result<Self> {
        let m = LambdaMeasure { atom0, atoms, beta };
        m.check_components()?;
        let s = m.total_weight();
        if (s - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {s}, expected 1")));
        }
        Ok(m)
    }

    pub fn kingman() -> Self {
        LambdaMeasure { atom0: 1.0, atoms: vec![], beta: None }
    }

    pub fn point_mass(y: f64) -> Result<Self> {
        Self::new(0.0, vec![Atom { y, w: 1.0 }], None)
    }

    pub fn beta_coalescent(alpha: f64) -> Result<Self> {
        Self::new(0.0, vec![], Some(BetaPart { alpha, w: 1.0 }))
    }

    /// Parse the JSON form `{"atom0":…, "atoms":[{"y":…,"w":…}], "beta":{"alpha":…,"w":…}}`.
    ///
    /// Weights within 1e-9 of summing to one are renormalized; anything else
    /// is rejected.
    pub fn from_json(s: &str) -> Result<Self> {
        let mut m: LambdaMeasure = serde_json::from_str(s)?;
        m.check_components()?;
        let total = m.total_weight();
        if (total - 1.0).abs() > RENORM_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}; they must sum to 1 (within {RENORM_TOL:e})"
            )));
        }
        m.atom0 /= total;
        for a in &mut m.atoms {
            a.w /= total;
        }
        if let Some(b) = &mut m.beta {
            b.w /= total;
        }
        Ok(m)
    }

    fn check_components(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidMeasure(msg));
        if !(self.atom0.is_finite() && self.atom0 >= 0.0) {
            return bad(format!("atom0 weight {} must be finite and non-negative", self.atom0));
        }
        for a in &self.atoms {
            if !(a.w.is_finite() && a.w >= 0.0) {
                return bad(format!("atom weight {} must be finite and non-negative", a.w));
            }
            if !(a.y > 0.0 && a.y <= 1.0) {
                return bad(format!("atom location {} must lie in (0,1]", a.y));
            }
        }
        if let Some(b) = &self.beta {
            if !(b.w.is_finite() && b.w >= 0.0) {
                return bad(format!("beta weight {} must be finite and non-negative", b.w));
            }
            if !(b.alpha > 0.0 && b.alpha < 2.0) {
                return bad(format!("beta alpha {} must lie in (0,2)", b.alpha));
            }
        }
        Ok(())
    }

    fn total_weight(&self) -> f64 {
        self.atom0 + self.atoms.iter().map(|a| a.w).sum::<f64>() + self.beta.as_ref().map_or(0.0, |b| b.w)
    }

    fn active_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| a.w > 0.0)
    }

    fn active_beta(&self) -> Option<&BetaPart> {
        self.beta.as_ref().filter(|b| b.w > 0.0)
    }

    /// P(W = 0), the mass of the atom of F at zero.
    pub fn p_w0(&self) -> f64 {
        self.atom0
    }

    pub fn is_kingman(&self) -> bool {
        self.atom0 == 1.0
    }

    pub fn has_atom_at_one(&self) -> bool {
        self.active_atoms().any(|a| a.y == 1.0)
    }

    /// Beta component parameters (α, weight) when present with positive weight.
    pub fn beta_alpha(&self) -> Option<(f64, f64)> {
        self.active_beta().map(|b| (b.alpha, b.w))
    }

    pub fn atom_list(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.active_atoms().map(|a| (a.y, a.w))
    }

    /// Integrate `g(y, 1-y) * y^(a-1) (1-y)^(b-1)` against the Beta component,
    /// returning `w_b / B(2-α, α) * ∫…` with exponent shifts (a, b) applied on
    /// top of the Beta(2-α, α) density. Zero when there is no Beta component.
    pub(crate) fn beta_integral_shifted(
        &self,
        g: impl Fn(f64, f64) -> f64,
        da: f64,
        db: f64,
        lo: f64,
        hi: f64,
    ) -> f64 {
        match self.active_beta() {
            None => 0.0,
            Some(b) => {
                let v = beta_weighted(g, 2.0 - b.alpha + da, b.alpha + db, lo, hi, 1e-13);
                b.w * v * (-b.ln_norm()).exp()
            }
        }
    }

    /// F⁺(w) = ∫_w^1 y⁻² F(dy).
    pub fn f_plus(&self, w: f64) -> Result<f64> {
        if !(w > 0.0 && w <= 1.0) {
            return Err(Error::domain(format!("f_plus needs w in (0,1], got {w}")));
        }
        let atoms: f64 = self.active_atoms().filter(|a| a.y >= w).map(|a| a.w / (a.y * a.y)).sum();
        let beta = if w < 1.0 {
            self.beta_integral_shifted(|_, _| 1.0, -2.0, 0.0, w, 1.0)
        } else {
            0.0
        };
        Ok(atoms + beta)
    }

    /// Density of W on (0,1), excluding its atom at zero.
    pub fn w_density(&self, w: f64) -> Result<f64> {
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::domain(format!("w_density needs w in (0,1), got {w}")));
        }
        Ok(2.0 * w * self.f_plus(w)?)
    }

    /// E[(1-W)^q] for real q ≥ 0.
    ///
    /// Atoms use the bounded closed form
    /// `(2/y²)[1 - (1-y)^{q+1}(1+(q+1)y)] / ((q+1)(q+2))`, switching to direct
    /// quadrature in `u` when the bracket would cancel.
    pub fn w_moment(&self, q: f64) -> f64 {
        assert!(q >= 0.0, "moment order must be non-negative");
        let mut s = self.atom0;
        for a in self.active_atoms() {
            s += a.w * atom_moment(a.y, q);
        }
        if let Some(b) = self.active_beta() {
            s += b.w * beta_w_moment(b.alpha, q);
        }
        s
    }

    /// E[(1-W)^a W^b] for non-negative integers, exact for every component.
    pub fn mixed_moment(&self, a: u32, b: u32) -> f64 {
        let mut s = if b == 0 { self.atom0 } else { 0.0 };
        let deg = (a + b + 1) as usize;
        for at in self.active_atoms() {
            let y = at.y;
            let f = |u: f64| {
                let w = u * y;
                2.0 * u * (1.0 - w).powi(a as i32) * w.powi(b as i32)
            };
            let v = if deg < 2 * MAX_GL_NODES {
                gl01_exact(deg).integrate(0.0, 1.0, f)
            } else {
                crate::quad::adaptive(f, 0.0, 1.0, 0.0, 1e-14).value
            };
            s += at.w * v;
        }
        if let Some(bp) = self.active_beta() {
            let al = bp.alpha;
            let (a, b) = (a as f64, b as f64);
            s += bp.w * (ln_beta(2.0 - al + b, 1.0 + al + a) - ln_beta(2.0 - al, 1.0 + al)).exp();
        }
        s
    }

    /// ∫ y^k F(dy); the atom at zero only contributes to k = 0.
    pub fn y_moment(&self, k: u32) -> f64 {
        let mut s = if k == 0 { self.atom0 } else { 0.0 };
        for a in self.active_atoms() {
            s += a.w * a.y.powi(k as i32);
        }
        if let Some(b) = self.active_beta() {
            let al = b.alpha;
            s += b.w * (ln_beta(2.0 - al + k as f64, al) - b.ln_norm()).exp();
        }
        s
    }

    /// Draw Y ~ F.
    pub fn sample_y<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u: f64 = rng.random::<f64>() * self.total_weight();
        if u < self.atom0 {
            return 0.0;
        }
        u -= self.atom0;
        for a in self.active_atoms() {
            if u < a.w {
                return a.y;
            }
            u -= a.w;
        }
        match self.active_beta() {
            Some(b) => Beta::new(2.0 - b.alpha, b.alpha).unwrap().sample(rng),
            // rounding pushed u past the last atom
            None => self.active_atoms().last().map_or(0.0, |a| a.y),
        }
    }

    /// Draw W = UY with U of density 2u.
    pub fn sample_w<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let y = self.sample_y(rng);
        if y == 0.0 {
            return 0.0;
        }
        y * rng.random::<f64>().sqrt()
    }
}

fn atom_moment(y: f64, q: f64) -> f64 {
    let q1 = q + 1.0;
    if q1 * y < 0.1 {
        gl01(32).integrate(0.0, 1.0, |u| 2.0 * u * (q * (-u * y).ln_1p()).exp())
    } else {
        let tail = (q1 * (-y).ln_1p()).exp() * (1.0 + q1 * y);
        2.0 / (y * y) * (1.0 - tail) / (q1 * (q + 2.0))
    }
}

/// E[(1-W)^q] for W ~ Beta(2-α, 1+α).
fn beta_w_moment(alpha: f64, q: f64) -> f64 {
    if q.fract() == 0.0 && q <= 2048.0 {
        (0..q as u32).fold(1.0, |p, j| p * (1.0 + alpha + j as f64) / (3.0 + j as f64))
    } else {
        (ln_gamma_ratio(q, 1.0 + alpha, 3.0) + 2f64.ln() - ln_gamma(1.0 + alpha)).exp()
    }
}

/// Cached table of E[(1-W)^m] for integer m.
#[derive(Debug, Clone)]
pub struct WLaw {
    measure: LambdaMeasure,
    moments: Vec<f64>,
}

pub const DEFAULT_MOMENT_CACHE: usize = 256;

impl WLaw {
    pub fn new(measure: &LambdaMeasure) -> Self {
        Self::with_cache(measure, DEFAULT_MOMENT_CACHE)
    }

    pub fn with_cache(measure: &LambdaMeasure, m_max: usize) -> Self {
        let moments = (0..=m_max)
            .map(|m| if m == 0 { 1.0 } else { measure.w_moment(m as f64) })
            .collect();
        WLaw { measure: measure.clone(), moments }
    }

    pub fn measure(&self) -> &LambdaMeasure {
        &self.measure
    }

    /// E[(1-W)^m]; computed directly beyond the cached range.
    pub fn moment(&self, m: usize) -> f64 {
        self.moments.get(m).copied().unwrap_or_else(|| self.measure.w_moment(m as f64))
    }

    pub fn mixed(&self, a: u32, b: u32) -> f64 {
        if b == 0 {
            self.moment(a as usize)
        } else {
            self.measure.mixed_moment(a, b)
        }
    }

    /// Extend the cache so that `moment(m)` is a table lookup for m ≤ `m_max`.
    pub fn extend(&mut self, m_max: usize) {
        for m in self.moments.len()..=m_max {
            self.moments.push(self.measure.w_moment(m as f64));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn family() -> Vec<LambdaMeasure> {
        vec![
            LambdaMeasure::kingman(),
            LambdaMeasure::point_mass(0.5).unwrap(),
            LambdaMeasure::point_mass(1.0).unwrap(),
            LambdaMeasure::beta_coalescent(1.5).unwrap(),
            LambdaMeasure::beta_coalescent(0.7).unwrap(),
            LambdaMeasure::new(
                0.2,
                vec![Atom { y: 0.3, w: 0.3 }, Atom { y: 0.9, w: 0.1 }],
                Some(BetaPart { alpha: 1.2, w: 0.4 }),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn f_plus_examples() {
        let pm = LambdaMeasure::point_mass(0.5).unwrap();
        assert_eq!(pm.f_plus(0.25).unwrap(), 4.0);
        assert_eq!(pm.f_plus(0.75).unwrap(), 0.0);
        assert!(pm.f_plus(0.0).is_err());

        // Beta(0.5,1.5) density times y^-2 integrated over [0.5,1] directly
        let b = LambdaMeasure::beta_coalescent(1.5).unwrap();
        let norm = statrs::function::beta::beta(0.5, 1.5);
        let oracle = adaptive(|y| y.powf(-2.5) * (1.0 - y).sqrt() / norm, 0.5, 1.0, 0.0, 1e-13).value;
        assert!((b.f_plus(0.5).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn w_density_examples() {
        let k = LambdaMeasure::kingman();
        assert_eq!(k.w_density(0.3).unwrap(), 0.0);
        assert_eq!(k.p_w0(), 1.0);
        let one = LambdaMeasure::point_mass(1.0).unwrap();
        assert!((one.w_density(0.37).unwrap() - 0.74).abs() < 1e-15);
        // Y ~ Beta(2-α,α) gives W ~ Beta(2-α,1+α)
        for alpha in [0.4, 1.0, 1.5] {
            let b = LambdaMeasure::beta_coalescent(alpha).unwrap();
            for w in [0.01, 0.2, 0.5, 0.9] {
                let dens = (-(ln_beta(2.0 - alpha, 1.0 + alpha)) + (1.0 - alpha) * f64::ln(w)
                    + alpha * f64::ln(1.0 - w))
                .exp();
                let got = b.w_density(w).unwrap();
                assert!((got / dens - 1.0).abs() < 1e-9, "α={alpha} w={w}: {got} vs {dens}");
            }
        }
    }

    #[test]
    fn w_moment_examples() {
        assert_eq!(LambdaMeasure::kingman().w_moment(7.0), 1.0);
        let one = LambdaMeasure::point_mass(1.0).unwrap();
        assert!((one.w_moment(1.0) - 1.0 / 3.0).abs() < 1e-15);
        let b = LambdaMeasure::beta_coalescent(1.5).unwrap();
        for m in 0..30u32 {
            let oracle: f64 = (0..m).map(|j| (2.5 + j as f64) / (3.0 + j as f64)).product();
            assert!((b.w_moment(m as f64) / oracle - 1.0).abs() < 1e-13);
        }
        // the gamma-function path for non-integer orders agrees with the product path nearby
        let lo = beta_w_moment(1.5, 10.0);
        let hi = (ln_gamma(12.5) + 2f64.ln() - ln_gamma(2.5) - ln_gamma(13.0)).exp();
        assert!((lo / hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moment_routes_agree() {
        // E[(1-W)^m] against P(W=0) + ∫(1-w)^m f_W(w) dw
        for m in family() {
            for k in [0u32, 1, 2, 5, 13, 40] {
                let direct = m.p_w0()
                    + adaptive(|w| (1.0 - w).powi(k as i32) * m.w_density(w).unwrap(), 1e-300, 1.0 - 1e-16, 0.0, 1e-12)
                        .value;
                let fast = m.w_moment(k as f64);
                assert!((direct - fast).abs() < 1e-8, "{m:?} m={k}: {direct} vs {fast}");
            }
        }
    }

    #[test]
    fn atom_moment_branches_join() {
        // the cancellation-safe quadrature branch meets the closed form at the switch
        // integer q: ∫(1-uy)^2 2u du = 1 - 4y/3 + y²/2
        let exact = |y: f64| 1.0 - 4.0 * y / 3.0 + y * y / 2.0;
        for y in [0.1 / 3.0 * 0.9999999, 0.1 / 3.0 * 1.0000001, 0.3, 1e-5] {
            assert!((atom_moment(y, 2.0) - exact(y)).abs() < 1e-14, "y={y}");
        }
    }

    #[test]
    fn mixed_moments_reduce_to_plain_moments() {
        for m in family() {
            for a in [0u32, 3, 17] {
                assert!((m.mixed_moment(a, 0) - m.w_moment(a as f64)).abs() < 1e-13);
                // (1-W)^a = (1-W)^{a+1} + W(1-W)^a
                let lhs = m.mixed_moment(a, 0);
                let rhs = m.mixed_moment(a + 1, 0) + m.mixed_moment(a, 1);
                assert!((lhs - rhs).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn density_shape_is_admissible() {
        for m in family() {
            let mut prev = f64::INFINITY;
            for i in 1..200 {
                let w = i as f64 / 200.0;
                let r = m.w_density(w).unwrap() / w;
                assert!(r <= prev * (1.0 + 1e-12));
                prev = r;
            }
            assert_eq!(m.f_plus(1.0).unwrap() * 0.0, 0.0);
        }
    }

    #[test]
    fn json_validation() {
        let ok = LambdaMeasure::from_json(r#"{"atoms":[{"y":0.5,"w":0.6}],"beta":{"alpha":1.5,"w":0.4}}"#).unwrap();
        assert_eq!(ok.atom0, 0.0);
        let nearly = LambdaMeasure::from_json(r#"{"atom0":0.5,"atoms":[{"y":0.5,"w":0.5000000001}]}"#).unwrap();
        assert!((nearly.total_weight() - 1.0).abs() < 1e-15);
        assert!(LambdaMeasure::from_json(r#"{"atom0":0.8}"#).is_err());
        assert!(LambdaMeasure::from_json(r#"{"atom0":1.0,"extra":1}"#).is_err());
        assert!(LambdaMeasure::from_json(r#"{"atoms":[{"y":0.0,"w":1.0}]}"#).is_err());
        assert!(LambdaMeasure::from_json(r#"{"beta":{"alpha":2.0,"w":1.0}}"#).is_err());
    }

    #[test]
    fn sampling_point_mass_cdf() {
        let m = LambdaMeasure::point_mass(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut xs: Vec<f64> = (0..n).map(|_| m.sample_w(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let cdf = |w: f64| if w >= 0.5 { 1.0 } else { w * w / 0.25 };
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = cdf(x);
                (c - i as f64 / n as f64).abs().max((c - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 0.01, "Kolmogorov distance {d}");
    }

    #[test]
    fn sampling_mixture_zero_fraction() {
        let m = LambdaMeasure::new(0.5, vec![Atom { y: 1.0, w: 0.5 }], None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let zeros = (0..n).filter(|_| m.sample_w(&mut rng) == 0.0).count() as f64;
        let z = (zeros - 0.5 * n as f64) / (0.25 * n as f64).sqrt();
        assert!(z.abs() < 4.0, "z = {z}");
        assert!(LambdaMeasure::kingman().sample_w(&mut rng) == 0.0);
    }

    #[test]
    fn sampled_moments_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000;
        for m in family() {
            for k in [1u32, 3] {
                let xs: Vec<f64> = (0..n).map(|_| (1.0 - m.sample_w(&mut rng)).powi(k as i32)).collect();
                let mean = xs.iter().sum::<f64>() / n as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let se = (var / n as f64).sqrt().max(1e-15);
                assert!(((mean - m.w_moment(k as f64)) / se).abs() < 4.0, "{m:?} k={k}");
            }
        }
    }
}
