use std::fmt;

use serde_json::json;

use lfv_core::death::{entrance_distribution, transition_matrix, DeathProcessSpec};
use lfv_core::fixation::{FixationSolution, Method};
use lfv_core::generator::{Generator, ModelSpec};
use lfv_core::poly::Polynomial;
use lfv_core::rates::{cdi_criteria, RateTable};
use lfv_core::sim::{simulate_fv_2type, Horizon, Outcome, SimConfig};
use lfv_core::spectral::{eigenvalues, esf_analogue, omega};
use lfv_core::stationary::{greens_function_theta0, solve_frequency_spectrum, solve_stationary_density, GridDensity};
use lfv_core::{LambdaMeasure, WLaw};

use crate::output::Artifacts;
use crate::{Cli, Command};

pub enum Status {
    Done,
    NotConverged(String),
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numeric { message: String, residual: f64 },
    Io(std::io::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Numeric { message, .. } => write!(f, "{message}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<lfv_core::Error> for CliError {
    fn from(e: lfv_core::Error) -> Self {
        match e {
            lfv_core::Error::NonConvergence { residual, .. } => CliError::Numeric { message: e.to_string(), residual },
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type Res<T> = Result<T, CliError>;

fn load_measure(cli: &Cli) -> Res<LambdaMeasure> {
    let path = cli.measure.as_ref().ok_or_else(|| CliError::Input("--measure FILE is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(LambdaMeasure::from_json(&text)?)
}

pub fn run(cli: &Cli) -> Res<Status> {
    let measure = load_measure(cli)?;
    let config = json!({ "command": cli.command, "measure": measure, "seed": cli.seed });
    eprintln!("lfv: config {config}");
    let mut art = Artifacts::new(&cli.out, config, cli.seed)?;
    let result = dispatch(cli, &measure, &mut art);
    if let Err(CliError::Numeric { message, residual }) = &result {
        art.json("nonconvergence", &json!({ "message": message, "residual": residual }))?;
    }
    result
}

fn dispatch(cli: &Cli, m: &LambdaMeasure, art: &mut Artifacts) -> Res<Status> {
    match &cli.command {
        Command::Rates(a) => {
            let tab = RateTable::new(m, a.n);
            let mut rows = Vec::new();
            for n in 2..=a.n {
                for k in 2..=n {
                    rows.push(vec![n.into(), k.into(), tab.lam[n as usize][k as usize].into(), tab.total[n as usize].into()]);
                }
            }
            art.csv("rates", &["n", "k", "lambda_nk", "total_n"], rows)?;
        }
        Command::Spectrum(a) => {
            let model = ModelSpec::two_type(m.clone(), a.theta1, a.theta2, 0.0)?;
            let lam = eigenvalues(&model, a.n)?;
            let mut rows = Vec::new();
            for (n, l) in lam.iter().enumerate() {
                rows.push(vec![n.into(), (*l).into(), omega(&model, n)?.into()]);
            }
            art.csv("spectrum", &["n", "lambda_n", "omega_n"], rows)?;
        }
        Command::Esf(a) => {
            let parts = parse_partition(&a.partition)?;
            let n: usize = parts.iter().sum();
            let p = esf_analogue(&WLaw::with_cache(m, n), a.theta, &parts)?;
            art.csv("esf", &["partition", "probability"], vec![vec![a.partition.as_str().into(), p.into()]])?;
        }
        Command::Fixation(a) => {
            let xs = parse_grid(&a.x_grid)?;
            let sol = FixationSolution::new(m, a.beta, a.tol)?;
            let mut rows = Vec::new();
            for x in xs {
                let v = sol.eval(x)?;
                rows.push(vec![x.into(), v.p.into(), method_name(v.method).into(), v.terms.into(), v.error_estimate.into()]);
            }
            art.csv("fixation", &["x", "p", "method", "terms", "error_estimate"], rows)?;
            art.json("fixation_meta", &json!({ "beta": a.beta, "beta_star": sol.beta_star, "tol": a.tol }))?;
        }
        Command::Death(a) => return death(m, a, art),
        Command::Stationary(a) => {
            let model = ModelSpec::two_type(m.clone(), a.theta1, a.theta2, 0.0)?;
            let f = solve_stationary_density(&model, a.grid)?;
            return grid_artifacts(art, "stationary", &f);
        }
        Command::FrequencySpectrum(a) => {
            let f = solve_frequency_spectrum(m, a.theta, a.grid)?;
            return grid_artifacts(art, "frequency_spectrum", &f);
        }
        Command::Green(a) => {
            let r = greens_function_theta0(m, a.grid)?;
            let rows = r.nodes.iter().zip(&r.gamma).map(|(x, g)| vec![(*x).into(), (*g).into()]).collect();
            art.csv("green", &["x", "gamma"], rows)?;
            art.json(
                "green_report",
                &json!({
                    "residual": r.residual,
                    "coarse_mid": r.coarse_mid,
                    "refinement_change": r.refinement_change,
                    "converged": r.converged,
                    "advisory": r.advisory,
                }),
            )?;
            if !r.converged {
                return Ok(Status::NotConverged(r.advisory.unwrap_or_else(|| "Green's function did not converge".into())));
            }
        }
        Command::Simulate(a) => {
            let model = ModelSpec::two_type(m.clone(), a.theta1, a.theta2, a.beta)?;
            let horizon = match a.t_end {
                Some(t) => Horizon::Fixed(t),
                None => Horizon::Absorption { max_time: a.max_time },
            };
            let cfg = SimConfig {
                model,
                x0: a.x0,
                horizon,
                dt: a.dt,
                eps: a.eps,
                replicates: a.replicates,
                seed: cli.seed,
            };
            let res = simulate_fv_2type(&cfg)?;
            art.json(
                "simulate",
                &json!({
                    "replicates": res.replicates.len(),
                    "x": res.x,
                    "fixed": res.fixed,
                    "lost": res.lost,
                    "timeouts": res.timeouts,
                    "absorption_time": res.absorption_time,
                }),
            )?;
            if a.per_replicate {
                let rows = res
                    .replicates
                    .iter()
                    .enumerate()
                    .map(|(i, r)| vec![i.into(), r.x.into(), r.time.into(), outcome_name(r.outcome).into()])
                    .collect();
                art.csv("simulate_replicates", &["replicate", "x", "time", "outcome"], rows)?;
            }
        }
        Command::CheckGenerator(a) => {
            if a.points < 2 {
                return Err(CliError::Input("--points must be at least 2".into()));
            }
            let model = ModelSpec::two_type(m.clone(), a.theta1, a.theta2, a.beta)?;
            let gen = Generator::with_degree(&model, a.degree);
            let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
            for d in 0..=a.degree {
                let g = Polynomial::monomial(d);
                for i in 0..a.points {
                    let x = i as f64 / (a.points - 1) as f64;
                    let jump = gen.apply_jump_form(&g, x)?;
                    let wf = gen.apply_wf_form(&g, x)?;
                    max_abs = max_abs.max((jump - wf).abs());
                    max_rel = max_rel.max((jump - wf).abs() / (1.0 + wf.abs()));
                }
            }
            art.json(
                "check_generator",
                &json!({ "degree": a.degree, "points": a.points, "max_abs": max_abs, "max_rel": max_rel }),
            )?;
        }
        Command::Cdi(_) => art.json("cdi", &cdi_criteria(m))?,
    }
    Ok(Status::Done)
}

fn death(m: &LambdaMeasure, a: &crate::DeathArgs, art: &mut Artifacts) -> Res<Status> {
    if a.n.trim() == "inf" {
        let law = entrance_distribution(m, a.theta, a.t)?;
        let rows = law.probs.iter().enumerate().map(|(j, p)| vec![j.into(), (*p).into()]).collect();
        art.csv("death", &["j", "probability"], rows)?;
        art.json("death_meta", &json!({ "method": law.method, "cancellation": law.cancellation, "product_index": law.product_index }))?;
    } else {
        let n: usize = a.n.trim().parse().map_err(|_| CliError::Input(format!("--n must be an integer or \"inf\", got {:?}", a.n)))?;
        let spec = DeathProcessSpec::new(m, a.theta, n)?;
        let tm = transition_matrix(&spec, a.t, n)?;
        let rows = tm.p[n].iter().enumerate().map(|(j, p)| vec![j.into(), (*p).into()]).collect();
        art.csv("death", &["j", "probability"], rows)?;
        art.json("death_meta", &json!({ "method": tm.method, "raw_row_defect": tm.raw_row_defect }))?;
    }
    Ok(Status::Done)
}

fn grid_artifacts(art: &mut Artifacts, stem: &str, f: &GridDensity) -> Res<Status> {
    let rows = f.grid.iter().zip(&f.values).map(|(u, v)| vec![(*u).into(), (*v).into()]).collect();
    art.csv(stem, &["u", "f"], rows)?;
    art.json(
        &format!("{stem}_report"),
        &json!({
            "normalization": f.normalization,
            "residual": f.residual,
            "second_residual": f.second_residual,
            "clipped": f.clipped,
            "iterations": f.iterations,
            "analytic": f.analytic,
            "converged": f.converged,
            "advisory": f.advisory,
        }),
    )?;
    if f.converged {
        Ok(Status::Done)
    } else {
        let why = f.advisory.clone().unwrap_or_default();
        Ok(Status::NotConverged(format!("{stem} residual {:e}; {why}", f.residual)))
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Series => "series",
        Method::Asymptotic => "asymptotic",
        Method::Certain => "certain",
        Method::Exact => "exact",
    }
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Running => "running",
        Outcome::Fixed => "fixed",
        Outcome::Lost => "lost",
        Outcome::Timeout => "timeout",
    }
}

fn parse_partition(s: &str) -> Res<Vec<usize>> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().ok().filter(|&v| v > 0))
        .collect::<Option<_>>()
        .ok_or_else(|| CliError::Input(format!("partition {s:?} must be positive integers separated by commas")))?;
    Ok(parts)
}

/// "start:stop:step", inclusive of stop up to rounding.
fn parse_grid(s: &str) -> Res<Vec<f64>> {
    let bad = || CliError::Input(format!("grid {s:?} must look like start:stop:step with step > 0"));
    let v: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [a, b, h] = v[..] else { return Err(bad()) };
    if !(h > 0.0 && a.is_finite() && b.is_finite() && b >= a) {
        return Err(bad());
    }
    let n = ((b - a) / h + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| (a + i as f64 * h).min(b)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0:1:0.05").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[20], 1.0);
        assert!((g[7] - 0.35).abs() < 1e-15);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn partition_parsing() {
        assert_eq!(parse_partition("2,1,1").unwrap(), vec![2, 1, 1]);
        assert!(parse_partition("2,0").is_err());
        assert!(parse_partition("a").is_err());
    }
}
