//! Monte Carlo engines: the Λ-Fleming-Viot jump process with mutation and
//! selection, and the block-counting chain of the Λ-coalescent.
//!
//! Jumps of size y > eps happen at their exact rates. Jumps below eps, plus
//! any atom at zero, are replaced by a Wright-Fisher diffusion with the same
//! infinitesimal variance and stepped by Euler-Maruyama.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::fixation::beta_star;
use crate::generator::ModelSpec;
use crate::measure::LambdaMeasure;
use crate::rates::RateTable;
use crate::special::{binom, Sum};
use crate::spectral::spectral_table;

/// Above this total rate of exact jumps the truncation eps is too small.
pub const MAX_JUMP_RATE: f64 = 1e8;
pub const FIX_THRESHOLD: f64 = 1e-12;
/// Step for integrating the deterministic drift when it has no closed form.
const FLOW_STEP: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Stop at a fixed time.
    Fixed(f64),
    /// Run until x leaves (loss, 1 - FIX_THRESHOLD), giving up at max_time.
    Absorption { max_time: f64 },
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: ModelSpec,
    pub x0: f64,
    pub horizon: Horizon,
    pub dt: f64,
    pub eps: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(model: ModelSpec, x0: f64, horizon: Horizon) -> Self {
        SimConfig { model, x0, horizon, dt: 1e-4, eps: 1e-3, replicates: 10_000, seed: 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.model.d() != 2 {
            return Err(Error::domain("the two-type simulator needs a two-type model"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::domain(format!("eps = {} must lie in (0, 0.5)", self.eps)));
        }
        if self.replicates == 0 {
            return Err(Error::domain("at least one replicate is needed"));
        }
        if !(0.0..=1.0).contains(&self.x0) {
            return Err(Error::domain(format!("x0 = {} outside [0,1]", self.x0)));
        }
        match self.horizon {
            Horizon::Fixed(t) if !(t >= 0.0 && t.is_finite()) => Err(Error::domain("horizon must be finite and non-negative")),
            Horizon::Absorption { max_time } if !(max_time > 0.0) => Err(Error::domain("max_time must be positive")),
            Horizon::Absorption { .. } if self.model.theta() > 0.0 => {
                Err(Error::domain("absorption needs θ = 0; with mutation the boundaries are not absorbing"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Running,
    Fixed,
    Lost,
    /// Absorption mode hit max_time first.
    Timeout,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Replicate {
    pub x: f64,
    pub time: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Summary::default();
        }
        let mean = values.iter().copied().collect::<Sum>().value() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).collect::<Sum>().value() / (n - 1) as f64
        } else {
            0.0
        };
        Summary { mean, variance, se: (variance / n as f64).sqrt(), n }
    }

    /// z-score of `self.mean - other`. Without spread, rounding-level
    /// differences count as zero.
    pub fn z(&self, other: f64) -> f64 {
        if self.se == 0.0 {
            if (self.mean - other).abs() <= 1e-12 * (1.0 + other.abs()) { 0.0 } else { f64::INFINITY.copysign(self.mean - other) }
        } else {
            (self.mean - other) / self.se
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub replicates: Vec<Replicate>,
    /// Terminal frequencies.
    pub x: Summary,
    pub fixed: usize,
    pub lost: usize,
    pub timeouts: usize,
    /// Absorption time over absorbed replicates.
    pub absorption_time: Summary,
}

impl SimResult {
    fn new(replicates: Vec<Replicate>) -> Self {
        let xs: Vec<f64> = replicates.iter().map(|r| r.x).collect();
        let count = |o| replicates.iter().filter(|r| r.outcome == o).count();
        let times: Vec<f64> = replicates
            .iter()
            .filter(|r| matches!(r.outcome, Outcome::Fixed | Outcome::Lost))
            .map(|r| r.time)
            .collect();
        SimResult {
            x: Summary::of(&xs),
            fixed: count(Outcome::Fixed),
            lost: count(Outcome::Lost),
            timeouts: count(Outcome::Timeout),
            absorption_time: Summary::of(&times),
            replicates,
        }
    }
}

/// Rejection sampler for y on (eps, 1) with density ∝ y^{-1-α}(1-y)^{α-1}.
#[derive(Debug, Clone)]
struct BetaJumps {
    alpha: f64,
    eps: f64,
    /// Envelope masses of the pieces (eps, 1/2) and [1/2, 1).
    mass_low: f64,
    mass_high: f64,
    low_bound: f64,
}

impl BetaJumps {
    fn new(alpha: f64, eps: f64) -> Self {
        let low_bound = if alpha < 1.0 { 2f64.powf(1.0 - alpha) } else { 1.0 };
        let mass_low = low_bound * (eps.powf(-alpha) - 2f64.powf(alpha)) / alpha;
        let mass_high = 2.0 / alpha;
        BetaJumps { alpha, eps, mass_low, mass_high, low_bound }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.alpha;
        loop {
            let pick: f64 = rng.random::<f64>() * (self.mass_low + self.mass_high);
            let u: f64 = rng.random();
            let acc: f64 = rng.random();
            if pick < self.mass_low {
                // y^{-1-α} on (eps, 1/2) by inversion
                let lo = self.eps.powf(-a);
                let hi = 2f64.powf(a);
                let y = (lo - u * (lo - hi)).powf(-1.0 / a);
                if acc * self.low_bound <= (1.0 - y).powf(a - 1.0) {
                    return y;
                }
            } else {
                // 2^{1+α}(1-y)^{α-1} on [1/2, 1)
                let yb = 0.5 * u.powf(1.0 / a);
                let y = 1.0 - yb;
                if yb > 0.0 && acc * 2f64.powf(1.0 + a) <= y.powf(-1.0 - a) {
                    return y;
                }
            }
        }
    }
}

/// Everything a path needs, derived once from the config.
#[derive(Debug, Clone)]
struct Dynamics {
    /// (y, cumulative rate) for the atoms in (0,1].
    atoms: Vec<(f64, f64)>,
    atom_rate: f64,
    beta_jumps: Option<BetaJumps>,
    rate: f64,
    /// Variance coefficient c of the diffusion c·x(1-x).
    diffusion: f64,
    theta1: f64,
    theta: f64,
    sel: f64,
    dt: f64,
    loss_threshold: f64,
}

impl Dynamics {
    fn new(cfg: &SimConfig) -> Result<Self> {
        let m = &cfg.model.measure;
        let mut atoms = Vec::new();
        let mut cum = 0.0;
        for (y, w) in m.atom_list() {
            cum += w / (y * y);
            atoms.push((y, cum));
        }
        let mut diffusion = m.atom0;
        let (mut beta_jumps, mut beta_rate) = (None, 0.0);
        if let Some((alpha, wb)) = m.beta_alpha() {
            beta_rate = m.beta_integral_shifted(|_, _| 1.0, -2.0, 0.0, cfg.eps, 1.0);
            beta_jumps = Some(BetaJumps::new(alpha, cfg.eps));
            diffusion += wb * beta_reg(2.0 - alpha, alpha, cfg.eps);
        }
        let rate = cum + beta_rate;
        if rate > MAX_JUMP_RATE {
            return Err(Error::domain(format!(
                "exact jump rate {rate:.3e} exceeds {MAX_JUMP_RATE:.0e}; raise eps"
            )));
        }
        let sel = cfg.model.beta;
        // with β ≥ β* paths that dip low still recover, so only a floor counts as loss
        let loss_threshold = if sel >= beta_star(m) { 1e-300 } else { FIX_THRESHOLD };
        Ok(Dynamics {
            atoms,
            atom_rate: cum,
            beta_jumps,
            rate,
            diffusion,
            theta1: cfg.model.theta1(),
            theta: cfg.model.theta(),
            sel,
            dt: cfg.dt,
            loss_threshold,
        })
    }

    fn drift(&self, x: f64) -> f64 {
        0.5 * (self.theta1 - self.theta * x) + self.sel * x * (1.0 - x)
    }

    /// Solve the drift ODE exactly over time h.
    fn flow(&self, x: f64, h: f64) -> f64 {
        match (self.theta > 0.0, self.sel > 0.0) {
            (false, false) => x,
            (true, false) => {
                let eq = self.theta1 / self.theta;
                eq + (x - eq) * (-0.5 * self.theta * h).exp()
            }
            (false, true) => {
                if x <= 0.0 || x >= 1.0 {
                    x
                } else {
                    x / (x + (1.0 - x) * (-self.sel * h).exp())
                }
            }
            (true, true) => {
                let steps = (h / FLOW_STEP).ceil().max(1.0) as usize;
                let s = h / steps as f64;
                let mut x = x;
                for _ in 0..steps {
                    let k1 = self.drift(x);
                    let k2 = self.drift(x + 0.5 * s * k1);
                    let k3 = self.drift(x + 0.5 * s * k2);
                    let k4 = self.drift(x + s * k3);
                    x += s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
                x.clamp(0.0, 1.0)
            }
        }
    }

    fn jump_size<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>() * self.rate;
        if u < self.atom_rate || self.beta_jumps.is_none() {
            let i = self.atoms.partition_point(|&(_, c)| c <= u);
            return self.atoms[i.min(self.atoms.len() - 1)].0;
        }
        self.beta_jumps.as_ref().unwrap().sample(rng)
    }

    fn next_wait<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.rate > 0.0 {
            let e: f64 = Exp1.sample(rng);
            e / self.rate
        } else {
            f64::INFINITY
        }
    }

    fn run<R: Rng + ?Sized>(&self, x0: f64, horizon: Horizon, rng: &mut R) -> Replicate {
        let (t_end, absorbing) = match horizon {
            Horizon::Fixed(t) => (t, false),
            Horizon::Absorption { max_time } => (max_time, true),
        };
        let mut x = x0;
        let mut t = 0.0;
        let mut next_jump = self.next_wait(rng);
        loop {
            if absorbing {
                if x >= 1.0 - FIX_THRESHOLD {
                    return Replicate { x: 1.0, time: t, outcome: Outcome::Fixed };
                }
                if x <= self.loss_threshold {
                    return Replicate { x: 0.0, time: t, outcome: Outcome::Lost };
                }
            }
            if t >= t_end {
                let outcome = if absorbing { Outcome::Timeout } else { Outcome::Running };
                return Replicate { x, time: t, outcome };
            }
            let stop = next_jump.min(t_end);
            if self.diffusion > 0.0 {
                let h = self.dt.min(stop - t);
                let z: f64 = StandardNormal.sample(rng);
                let sd = (self.diffusion * x * (1.0 - x) * h).max(0.0).sqrt();
                x = (x + self.drift(x) * h + sd * z).clamp(0.0, 1.0);
                t = if h == stop - t { stop } else { t + h };
            } else {
                x = self.flow(x, stop - t);
                t = stop;
            }
            if t >= next_jump {
                let y = self.jump_size(rng);
                x = if rng.random::<f64>() < x { x * (1.0 - y) + y } else { x * (1.0 - y) };
                next_jump = t + self.next_wait(rng);
            }
        }
    }
}

fn replicate_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Simulate independent replicates of the two-type process.
pub fn simulate_fv_2type(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let dynamics = Dynamics::new(cfg)?;
    let reps: Vec<Replicate> = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| dynamics.run(cfg.x0, cfg.horizon, &mut replicate_rng(cfg.seed, i)))
        .collect();
    Ok(SimResult::new(reps))
}

/// Terminal frequencies of `n` replicates run to `burn_in`, as draws from the
/// stationary law.
pub fn sample_stationary(model: &ModelSpec, n: usize, burn_in: f64, dt: f64, eps: f64, seed: u64) -> Result<Vec<f64>> {
    if model.theta() <= 0.0 {
        return Err(Error::domain("a stationary law needs θ > 0"));
    }
    let x0 = model.theta1() / model.theta();
    let cfg = SimConfig { model: model.clone(), x0, horizon: Horizon::Fixed(burn_in), dt, eps, replicates: n, seed };
    Ok(simulate_fv_2type(&cfg)?.replicates.into_iter().map(|r| r.x).collect())
}

/// D-type neutral process with parent-independent mutation, returning
/// terminal frequency vectors.
pub fn simulate_fv_dtype(model: &ModelSpec, x0: &[f64], t_end: f64, dt: f64, eps: f64, replicates: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let d = model.d();
    if x0.len() != d || x0.iter().any(|v| *v < 0.0) || (x0.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::domain("x0 must be a point of the simplex with one entry per type"));
    }
    if model.beta != 0.0 {
        return Err(Error::domain("the d-type simulator is neutral"));
    }
    let two = ModelSpec::two_type(model.measure.clone(), model.theta_i[0], model.theta() - model.theta_i[0], 0.0)?;
    let probe = SimConfig { model: two, x0: 0.5, horizon: Horizon::Fixed(t_end), dt, eps, replicates: 1, seed };
    probe.validate()?;
    let dy = Dynamics::new(&probe)?;
    let theta = model.theta();
    let out = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let mut x = x0.to_vec();
            let mut t = 0.0;
            let mut next_jump = dy.next_wait(&mut rng);
            let mut z = vec![0.0; d];
            while t < t_end {
                let stop = next_jump.min(t_end);
                if dy.diffusion > 0.0 {
                    let h = dt.min(stop - t);
                    // covariance x_i δ_ij - x_i x_j
                    for zi in z.iter_mut() {
                        *zi = StandardNormal.sample(&mut rng);
                    }
                    let root: Vec<f64> = x.iter().map(|v| v.max(0.0).sqrt()).collect();
                    let common: f64 = root.iter().zip(&z).map(|(r, z)| r * z).sum();
                    let sd = (dy.diffusion * h).sqrt();
                    for k in 0..d {
                        let drift = 0.5 * (model.theta_i[k] - theta * x[k]);
                        x[k] += drift * h + sd * (root[k] * z[k] - x[k] * common);
                        x[k] = x[k].max(0.0);
                    }
                    let s: f64 = x.iter().sum();
                    x.iter_mut().for_each(|v| *v /= s);
                    t = if h == stop - t { stop } else { t + h };
                } else {
                    let h = stop - t;
                    if theta > 0.0 {
                        let decay = (-0.5 * theta * h).exp();
                        for k in 0..d {
                            let eq = model.theta_i[k] / theta;
                            x[k] = eq + (x[k] - eq) * decay;
                        }
                    }
                    t = stop;
                }
                if t >= next_jump && t < t_end {
                    let y = dy.jump_size(&mut rng);
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut parent = d - 1;
                    for (k, v) in x.iter().enumerate() {
                        acc += v;
                        if u < acc {
                            parent = k;
                            break;
                        }
                    }
                    for (k, v) in x.iter_mut().enumerate() {
                        *v = *v * (1.0 - y) + if k == parent { y } else { 0.0 };
                    }
                    next_jump = t + dy.next_wait(&mut rng);
                }
            }
            x
        })
        .collect();
    Ok(out)
}

/// Block-counting chain of the Λ-coalescent: from n blocks a k-merger
/// happens with probability C(n,k)λ_{nk}/total and leaves n-k+1 blocks.
#[derive(Debug, Clone)]
pub struct BlockCounting {
    /// cum[n][k]: cumulative C(n,k)λ_{nk} over 2..=k.
    cum: Vec<Vec<f64>>,
    total: Vec<f64>,
}

impl BlockCounting {
    pub fn new(m: &LambdaMeasure, n_max: u64) -> Self {
        let table = RateTable::new(m, n_max);
        let cum = (0..=n_max as usize)
            .map(|n| {
                let mut c = 0.0;
                (0..=n)
                    .map(|k| {
                        if k >= 2 {
                            c += binom(n as u64, k as u64) * table.lam[n][k];
                        }
                        c
                    })
                    .collect()
            })
            .collect();
        BlockCounting { cum, total: table.total }
    }

    pub fn n_max(&self) -> u64 {
        self.total.len() as u64 - 1
    }

    /// L(t) for L(0) = n0.
    pub fn sample<R: Rng + ?Sized>(&self, n0: u64, t: f64, rng: &mut R) -> u64 {
        assert!(n0 >= 1 && n0 <= self.n_max(), "n0 outside the precomputed table");
        let mut n = n0 as usize;
        let mut clock = 0.0;
        while n >= 2 {
            let rate = self.total[n];
            if rate <= 0.0 {
                break;
            }
            let e: f64 = Exp1.sample(rng);
            clock += e / rate;
            if clock > t {
                break;
            }
            let u = rng.random::<f64>() * self.cum[n][n];
            let k = self.cum[n].partition_point(|&c| c <= u).clamp(2, n);
            n = n - k + 1;
        }
        n as u64
    }

    /// Holding time and jump sizes only; useful as a sanity probe.
    pub fn total_rate(&self, n: u64) -> f64 {
        self.total[n as usize]
    }
}

pub fn simulate_block_counting<R: Rng + ?Sized>(m: &LambdaMeasure, n0: u64, t: f64, rng: &mut R) -> Result<u64> {
    if n0 == 0 {
        return Err(Error::domain("the chain starts from at least one block"));
    }
    Ok(BlockCounting::new(m, n0).sample(n0, t, rng))
}

/// E_n[x^{L(t)}] by simulating the block-counting chain.
pub fn estimate_moment_dual_rhs(m: &LambdaMeasure, n: u64, x: f64, t: f64, replicates: usize, seed: u64) -> Result<Summary> {
    if n == 0 || replicates == 0 {
        return Err(Error::domain("need n ≥ 1 and at least one replicate"));
    }
    let chain = BlockCounting::new(m, n);
    let vals: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|i| x.powi(chain.sample(n, t, &mut replicate_rng(seed, i)) as i32))
        .collect();
    Ok(Summary::of(&vals))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FixationEstimate {
    pub p: f64,
    pub se: f64,
    pub replicates: usize,
    pub timeouts: usize,
    pub absorption_time: Summary,
}

#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    pub dt: f64,
    pub eps: f64,
    pub max_time: f64,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { dt: 1e-4, eps: 1e-3, max_time: 1e4, seed: 0 }
    }
}

/// Fraction of replicates started at x0 that fix, with timeouts counted as
/// non-fixation and reported.
pub fn estimate_fixation(m: &LambdaMeasure, beta: f64, x0: f64, replicates: usize, opts: EstimateOptions) -> Result<FixationEstimate> {
    let model = ModelSpec::two_type(m.clone(), 0.0, 0.0, beta)?;
    let cfg = SimConfig {
        model,
        x0,
        horizon: Horizon::Absorption { max_time: opts.max_time },
        dt: opts.dt,
        eps: opts.eps,
        replicates,
        seed: opts.seed,
    };
    let res = simulate_fv_2type(&cfg)?;
    let fixed: Vec<f64> = res.replicates.iter().map(|r| f64::from(u8::from(r.outcome == Outcome::Fixed))).collect();
    let s = Summary::of(&fixed);
    Ok(FixationEstimate { p: s.mean, se: s.se, replicates, timeouts: res.timeouts, absorption_time: res.absorption_time })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DualLhs {
    /// E_x[h_n(X(t))]; absent when θ = 0.
    pub h: Option<Summary>,
    /// E_x[X(t)^n].
    pub monomial: Summary,
}

/// Monte Carlo left-hand sides of the h-dual and the moment dual.
pub fn estimate_dual_lhs(model: &ModelSpec, n: usize, x0: f64, t: f64, replicates: usize, opts: EstimateOptions) -> Result<DualLhs> {
    let h = if model.theta() > 0.0 && model.beta == 0.0 {
        let tab = spectral_table(model, n)?;
        Some(tab.g[n].scale(1.0 / tab.omega[n]))
    } else {
        None
    };
    let cfg = SimConfig {
        model: model.clone(),
        x0,
        horizon: Horizon::Fixed(t),
        dt: opts.dt,
        eps: opts.eps,
        replicates,
        seed: opts.seed,
    };
    let res = simulate_fv_2type(&cfg)?;
    let xs: Vec<f64> = res.replicates.iter().map(|r| r.x).collect();
    let mono: Vec<f64> = xs.iter().map(|x| x.powi(n as i32)).collect();
    Ok(DualLhs {
        h: h.map(|p| Summary::of(&xs.iter().map(|&x| p.eval(x)).collect::<Vec<_>>())),
        monomial: Summary::of(&mono),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: LambdaMeasure, th1: f64, th2: f64, beta: f64, x0: f64, horizon: Horizon, reps: usize) -> SimConfig {
        let mut c = SimConfig::new(ModelSpec::two_type(m, th1, th2, beta).unwrap(), x0, horizon);
        c.replicates = reps;
        c.seed = 17;
        c.dt = 1e-3;
        c.eps = 1e-2;
        c
    }

    #[test]
    fn beta_jump_sampler_matches_density() {
        for alpha in [0.5, 1.5] {
            let eps = 0.05;
            let s = BetaJumps::new(alpha, eps);
            let mut rng = replicate_rng(3, 0);
            let n = 200_000;
            let draws: Vec<f64> = (0..n).map(|_| s.sample(&mut rng)).collect();
            assert!(draws.iter().all(|y| *y > eps && *y < 1.0));
            // P(Y < 0.5) against quadrature of the density
            let dens = |y: f64| y.powf(-1.0 - alpha) * (1.0 - y).powf(alpha - 1.0);
            let m = LambdaMeasure::beta_coalescent(alpha).unwrap();
            let lo = m.beta_integral_shifted(|_, _| 1.0, -2.0, 0.0, eps, 0.5);
            let all = m.beta_integral_shifted(|_, _| 1.0, -2.0, 0.0, eps, 1.0);
            let p = lo / all;
            let frac = draws.iter().filter(|y| **y < 0.5).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((frac - p).abs() < 4.0 * se, "α={alpha}: {frac} vs {p}");
            assert!(dens(0.3) > 0.0);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let c = cfg(LambdaMeasure::beta_coalescent(1.5).unwrap(), 1.0, 1.0, 0.0, 0.3, Horizon::Fixed(0.5), 64);
        let a = simulate_fv_2type(&c).unwrap();
        let b = simulate_fv_2type(&c).unwrap();
        for (r, s) in a.replicates.iter().zip(&b.replicates) {
            assert_eq!(r.x.to_bits(), s.x.to_bits());
        }
    }

    #[test]
    fn martingale_without_drift() {
        for m in [
            LambdaMeasure::kingman(),
            LambdaMeasure::point_mass(0.5).unwrap(),
            LambdaMeasure::beta_coalescent(1.5).unwrap(),
        ] {
            let c = cfg(m, 0.0, 0.0, 0.0, 0.3, Horizon::Fixed(0.5), 20_000);
            let r = simulate_fv_2type(&c).unwrap();
            assert!(r.x.z(0.3).abs() < 3.0, "z = {}", r.x.z(0.3));
        }
    }

    #[test]
    fn kingman_second_moment() {
        // E[X(t)^2] = x² + x(1-x)(1-e^{-t})
        let c = cfg(LambdaMeasure::kingman(), 0.0, 0.0, 0.0, 0.4, Horizon::Fixed(0.5), 20_000);
        let r = simulate_fv_2type(&c).unwrap();
        let sq = Summary::of(&r.replicates.iter().map(|r| r.x * r.x).collect::<Vec<_>>());
        let exact = 0.16 + 0.24 * (1.0 - (-0.5f64).exp());
        assert!(sq.z(exact).abs() < 3.0);
    }

    #[test]
    fn kingman_fixation_probability() {
        let opts = EstimateOptions { dt: 1e-3, ..Default::default() };
        let est = estimate_fixation(&LambdaMeasure::kingman(), 1.0, 0.5, 4000, opts).unwrap();
        let exact = 0.731_058_578_630_004_9;
        assert!(((est.p - exact) / est.se).abs() < 3.0, "{} ± {}", est.p, est.se);
        assert_eq!(est.timeouts, 0);
    }

    #[test]
    fn neutral_fixation_is_x0() {
        let est = estimate_fixation(&LambdaMeasure::point_mass(0.5).unwrap(), 0.0, 0.3, 20_000, Default::default()).unwrap();
        assert!(((est.p - 0.3) / est.se).abs() < 3.0);
    }

    #[test]
    fn block_counting_cases() {
        let mut rng = replicate_rng(1, 0);
        let k = BlockCounting::new(&LambdaMeasure::kingman(), 10);
        // Kingman only ever loses one block per event
        for _ in 0..100 {
            let l = k.sample(10, 0.05, &mut rng);
            assert!((1..=10).contains(&l));
        }
        let star = BlockCounting::new(&LambdaMeasure::point_mass(1.0).unwrap(), 8);
        for _ in 0..100 {
            let l = star.sample(8, 10.0, &mut rng);
            assert!(l == 8 || l == 1);
        }
        assert!((star.total_rate(8) - 1.0).abs() < 1e-12);
        let mean_l: f64 = (0..20_000).map(|_| star.sample(8, 1.0, &mut rng) as f64).sum::<f64>() / 20_000.0;
        // P(no event by t=1) = e^{-1}
        let p = (-1.0f64).exp();
        let want = 8.0 * p + (1.0 - p);
        assert!((mean_l - want).abs() < 4.0 * 7.0 * (p * (1.0 - p) / 20_000.0).sqrt());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = cfg(LambdaMeasure::kingman(), 1.0, 1.0, 0.0, 0.5, Horizon::Fixed(1.0), 10);
        c.eps = 0.7;
        assert!(simulate_fv_2type(&c).is_err());
        let c = cfg(LambdaMeasure::kingman(), 1.0, 1.0, 0.0, 0.5, Horizon::Absorption { max_time: 1.0 }, 10);
        assert!(simulate_fv_2type(&c).is_err());
        let mut c = cfg(LambdaMeasure::beta_coalescent(1.9).unwrap(), 0.0, 0.0, 0.0, 0.5, Horizon::Fixed(1.0), 10);
        c.eps = 1e-9;
        assert!(simulate_fv_2type(&c).is_err());
    }

    #[test]
    fn dtype_mean_tracks_mutation() {
        let model = ModelSpec::new(LambdaMeasure::point_mass(0.5).unwrap(), vec![1.0, 0.5, 0.5], 0.0).unwrap();
        let xs = simulate_fv_dtype(&model, &[1.0, 0.0, 0.0], 1.0, 1e-3, 1e-3, 4000, 5).unwrap();
        // E[X_1(t)] = θ_1/θ + (x_1 - θ_1/θ)e^{-θt/2}
        let want = 0.5 + 0.5 * (-1.0f64).exp();
        let s = Summary::of(&xs.iter().map(|x| x[0]).collect::<Vec<_>>());
        assert!(s.z(want).abs() < 3.0);
        assert!(xs.iter().all(|x| (x.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }
}
