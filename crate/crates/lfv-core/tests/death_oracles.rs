use lfv_core::death::{entrance_distribution, multitype_transition, transition_matrix, DeathProcessSpec, TransitionMethod};
use lfv_core::measure::LambdaMeasure;
use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use std::num::NonZeroUsize;

/// exp(Q t) by scaling and squaring with a Taylor series.
fn expm(q: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = q.len();
    let norm = q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max) * t;
    let squarings = norm.log2().ceil().max(0.0) as u32 + 4;
    let h = t / 2f64.powi(squarings as i32);
    let mul = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
    };
    let a: Vec<Vec<f64>> = q.iter().map(|r| r.iter().map(|v| v * h).collect()).collect();
    let mut sum: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut term = sum.clone();
    for k in 1..=30 {
        term = mul(&term, &a).into_iter().map(|r| r.into_iter().map(|v| v / k as f64).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mul(&sum, &sum);
    }
    sum
}

fn generator(spec: &DeathProcessSpec, n: usize) -> Vec<Vec<f64>> {
    let mut q = vec![vec![0.0; n + 1]; n + 1];
    for j in 1..=n {
        q[j][j] = -spec.lambda[j];
        q[j][j - 1] = spec.lambda[j];
    }
    q
}

#[test]
fn eigen_expansion_matches_matrix_exponential() {
    let spec = DeathProcessSpec::new(&LambdaMeasure::point_mass(0.5).unwrap(), 1.0, 12).unwrap();
    let tm = transition_matrix(&spec, 0.3, 12).unwrap();
    assert_eq!(tm.method, TransitionMethod::Eigen);
    let oracle = expm(&generator(&spec, 12), 0.3);
    for i in 0..=12 {
        for j in 0..=i {
            assert!((tm.p[i][j] - oracle[i][j]).abs() < 1e-9, "i={i} j={j}");
        }
    }
}

#[test]
fn uniformization_above_the_eigen_range() {
    let spec = DeathProcessSpec::new(&LambdaMeasure::beta_coalescent(1.5).unwrap(), 0.5, 40).unwrap();
    let (s, u) = (0.05, 0.15);
    let a = transition_matrix(&spec, s, 40).unwrap();
    let b = transition_matrix(&spec, u, 40).unwrap();
    let c = transition_matrix(&spec, s + u, 40).unwrap();
    assert_eq!(c.method, TransitionMethod::Uniformization);
    let oracle = expm(&generator(&spec, 40), s + u);
    for i in 0..=40 {
        assert!((c.p[i].iter().sum::<f64>() - 1.0).abs() < 1e-8);
        for j in 0..=i {
            let comp: f64 = (j..=i).map(|k| a.p[i][k] * b.p[k][j]).sum();
            assert!((comp - c.p[i][j]).abs() < 1e-7, "CK i={i} j={j}");
            assert!((c.p[i][j] - oracle[i][j]).abs() < 1e-9, "expm i={i} j={j}");
        }
    }
}

fn ln_1p(z: Complex64) -> Complex64 {
    let w = 1.0 + z;
    // |1+z|² - 1 formed without the leading 1, so tiny z keeps its real part
    Complex64::new(0.5 * (2.0 * z.re + z.norm_sqr()).ln_1p(), w.im.atan2(w.re))
}

/// Σ_{k>j} ln(1 + s/λ_k) for all j ≤ j_max. Past K = lambda.len() - 1 the sum
/// is closed by Euler-Maclaurin on the continuous rate q ↦ q((q-1)E[y^(q-2)] + θ)/2.
fn log_tail_sums(m: &LambdaMeasure, theta: f64, lambda: &[f64], s: Complex64, j_max: usize) -> Vec<Complex64> {
    let k_max = lambda.len() - 1;
    let kf = k_max as f64;
    let f = |q: f64| ln_1p(s / (0.5 * q * ((q - 1.0) * m.w_moment(q - 2.0) + theta)));
    // q = K / v², which removes the v → 0 singularity for slowly growing rates
    let gl = GaussLegendre::new(NonZeroUsize::new(400).unwrap());
    let re = gl.integrate(0.0, 1.0, |v| f(kf / (v * v)).re * 2.0 * kf / (v * v * v));
    let im = gl.integrate(0.0, 1.0, |v| f(kf / (v * v)).im * 2.0 * kf / (v * v * v));
    let slope = (f(kf + 0.5) - f(kf - 0.5)) / 12.0;
    let mut acc = Complex64::new(re, im) - 0.5 * f(kf) - slope;
    let mut out = vec![Complex64::new(0.0, 0.0); j_max + 1];
    for k in (1..=k_max).rev() {
        if k <= j_max {
            out[k] = acc;
        }
        acc += ln_1p(s / lambda[k]);
    }
    out[0] = acc;
    out
}

/// P(N(t) = j) from infinity by Euler inversion of the occupation transforms
/// ∏_{k>j} λ_k/(λ_k+s) / (λ_j+s).
fn entrance_by_inversion(measure: &LambdaMeasure, theta: f64, lambda: &[f64], t: f64, j_max: usize) -> Vec<f64> {
    let (a, n, m) = (18.4, 40usize, 15usize);
    let transform = |s: Complex64| -> Vec<Complex64> {
        log_tail_sums(measure, theta, lambda, s, j_max).into_iter().enumerate().map(|(j, l)| (-l).exp() / (s + lambda[j])).collect()
    };
    let mut partial = vec![vec![0.0; j_max + 1]; n + m + 1];
    let f0 = transform(Complex64::new(a / (2.0 * t), 0.0));
    let mut run: Vec<f64> = f0.iter().map(|v| 0.5 * v.re).collect();
    for k in 1..=n + m {
        let fk = transform(Complex64::new(a, 2.0 * k as f64 * std::f64::consts::PI) / (2.0 * t));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for j in 0..=j_max {
            run[j] += sign * fk[j].re;
        }
        partial[k].clone_from(&run);
    }
    let scale = (a / 2.0).exp() / t;
    let mut out = vec![0.0; j_max + 1];
    for i in 0..=m {
        let w = (0..i).fold(1.0, |acc, r| acc * (m - r) as f64 / (r + 1) as f64) / 2f64.powi(m as i32);
        for j in 0..=j_max {
            out[j] += w * scale * partial[n + i][j];
        }
    }
    out
}

#[test]
fn entrance_law_matches_laplace_inversion() {
    // Kingman with θ = 1 at t = 0.1, computed independently at 40 digits from
    // the closed product ∏ k²/(k² + a²) = πa / sinh(πa)
    let spec = DeathProcessSpec::new(&LambdaMeasure::kingman(), 1.0, 20_000).unwrap();
    let law = entrance_distribution(&LambdaMeasure::kingman(), 1.0, 0.1).unwrap();
    let euler = entrance_by_inversion(&LambdaMeasure::kingman(), 1.0, &spec.lambda, 0.1, 26);
    for (j, want) in [(10, 5.29375549684532e-5), (26, 0.00968190067834997)] {
        assert!((law.probs[j] - want).abs() < 1e-9, "j={j}: {}", law.probs[j]);
        assert!((euler[j] - want).abs() < 1e-9, "oracle j={j}: {}", euler[j]);
    }
    for m in [LambdaMeasure::kingman(), LambdaMeasure::beta_coalescent(1.5).unwrap()] {
        let spec = DeathProcessSpec::new(&m, 1.0, 20_000).unwrap();
        for t in [0.1, 1.0] {
            let law = entrance_distribution(&m, 1.0, t).unwrap_or_else(|e| panic!("{m:?} t={t}: {e}"));
            let j_max = law.probs.len().min(30) - 1;
            let oracle = entrance_by_inversion(&m, 1.0, &spec.lambda, t, j_max);
            for j in 0..=j_max {
                assert!((law.probs[j] - oracle[j]).abs() < 1e-6, "{m:?} t={t} j={j}: {} vs {}", law.probs[j], oracle[j]);
            }
        }
    }
}

#[test]
fn multitype_totals() {
    let spec = DeathProcessSpec::new(&LambdaMeasure::point_mass(0.5).unwrap(), 1.0, 10).unwrap();
    let mut total = 0.0;
    for a in 0..=2 {
        for b in 0..=1 {
            total += multitype_transition(&spec, 0.5, &[2, 1], &[a, b]).unwrap();
        }
    }
    assert!((total - 1.0).abs() < 1e-8);
    let row = &transition_matrix(&spec, 0.5, 3).unwrap().p[3];
    let one = multitype_transition(&spec, 0.5, &[3], &[2]).unwrap();
    assert!((one - row[2]).abs() < 1e-14);
}
