//! Small special-function helpers built on `statrs`.

use statrs::function::gamma::ln_gamma;

/// Binomial coefficient as a float; exact integer arithmetic up to n = 50,
/// log-gamma beyond.
pub fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if n <= 50 {
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        c as f64
    } else {
        ln_binom(n, k).exp()
    }
}

pub fn ln_binom(n: u64, k: u64) -> f64 {
    let (n, k) = (n as f64, k as f64);
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// ln Γ(x+a) - ln Γ(x+b) without the cancellation of two large log-gammas.
pub fn ln_gamma_ratio(x: f64, a: f64, b: f64) -> f64 {
    let (z1, z2) = (x + a, x + b);
    if z1.min(z2) < 100.0 {
        return ln_gamma(z1) - ln_gamma(z2);
    }
    let stirling = |z: f64| {
        let r = 1.0 / (z * z);
        (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0))) / z
    };
    (a - b) * x.ln() + (z1 - 0.5) * (a / x).ln_1p() - (z2 - 0.5) * (b / x).ln_1p() - (a - b) + stirling(z1)
        - stirling(z2)
}

/// Rising factorial a(a+1)…(a+n-1).
pub fn pochhammer(a: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |p, j| p * (a + j as f64))
}

pub fn factorial(n: u32) -> f64 {
    pochhammer(1.0, n)
}

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

impl FromIterator<f64> for Sum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Sum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn neumaier(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().collect::<Sum>().value()
}

/// `e^{-z} - 1 + z`, accurate for small z.
pub fn exp_rem(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        let z2 = z * z;
        z2 * (0.5 - z / 6.0 + z2 / 24.0 - z2 * z / 120.0 + z2 * z2 / 720.0 - z2 * z2 * z / 5040.0)
    } else {
        (-z).exp_m1() + z
    }
}
