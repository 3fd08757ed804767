use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use strongsec::channel::induced_joint;
use strongsec::codec::{estimate_error, generate_codebook, CodeParams, Epsilons};
use strongsec::region::{code_rate_constraints, interior_point, optimize_region, theorem1_rates, RatePoint, SearchConfig};
use strongsec::rng::{self, tag};
use strongsec::secrecy::{
    definition1_leakage, effective_secrecy_exact, effective_secrecy_mc, leakage_vs_rate_sweep, Mode, SweepConfig,
};
use strongsec::suites::{self, SuiteOutcome};

use crate::config::{scheme_spec, ExperimentConfig, Loaded, SearchSpec, SecrecySpec, VerifySpec};
use crate::error::CliError;
use crate::output::{prefixed, row};

/// Settings shared by every command after applying flag overrides.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub trials: Option<usize>,
    pub n: Vec<usize>,
    pub epsilons: Epsilons,
}

impl Settings {
    pub fn blocklengths(&self) -> Result<&[usize], CliError> {
        if self.n.is_empty() {
            return Err(CliError::Config("no blocklength given; set `n` in the config or pass --n".into()));
        }
        Ok(&self.n)
    }
}

pub type Rows = Vec<Map<String, Value>>;

fn rate_fields(r: &RatePoint) -> Map<String, Value> {
    row(r)
}

fn rate_points(loaded: &Loaded) -> Result<&[RatePoint], CliError> {
    if loaded.config.rates.is_empty() {
        return Err(CliError::Config("no rate point given; add a `rates` entry".into()));
    }
    Ok(&loaded.config.rates)
}

pub fn region_eval(loaded: &Loaded) -> Result<Rows, CliError> {
    let scheme = loaded.scheme()?;
    let joint = induced_joint(&loaded.channel, scheme)?;
    let mut points: Vec<(String, RatePoint)> =
        loaded.config.rates.iter().enumerate().map(|(i, r)| (format!("rates[{i}]"), *r)).collect();
    if points.is_empty() {
        if let Some(p) = interior_point(&joint, 1e-3)? {
            points.push(("interior".into(), p));
        }
    }
    if points.is_empty() {
        let (r1, r2) = theorem1_rates(&joint)?;
        return Ok(vec![Map::from_iter([
            ("source".to_string(), json!("none")),
            ("r1_max".to_string(), json!(r1)),
            ("r2_max".to_string(), json!(r2)),
        ])]);
    }
    points
        .into_iter()
        .map(|(source, p)| {
            let rep = code_rate_constraints(&joint, p)?;
            let mut m = Map::new();
            m.insert("source".into(), json!(source));
            m.insert("r1_max".into(), json!(rep.r1_max));
            m.insert("r2_max".into(), json!(rep.r2_max));
            m.extend(row(&rep.terms));
            m.extend(rate_fields(&rep.point));
            m.insert("feasible".into(), json!(rep.feasible));
            m.insert("violated".into(), json!(rep.violated().join(";")));
            for s in &rep.slacks {
                m.insert(format!("slack_{}", s.name), json!(s.slack));
            }
            Ok(m)
        })
        .collect()
}

pub fn search_config(spec: Option<&SearchSpec>, seed: u64) -> SearchConfig {
    let d = SearchConfig::default();
    let s = spec.cloned().unwrap_or_default();
    SearchConfig {
        v1_size: s.v1_size.unwrap_or(d.v1_size),
        v2_size: s.v2_size.unwrap_or(d.v2_size),
        restarts: s.restarts.unwrap_or(d.restarts),
        sweeps: s.sweeps.unwrap_or(d.sweeps),
        initial_step: s.initial_step.unwrap_or(d.initial_step),
        margin: s.margin.unwrap_or(d.margin),
        seed,
    }
}

pub fn region_search(loaded: &Loaded, settings: &Settings, configs_dir: Option<&Path>) -> Result<Rows, CliError> {
    let cfg = search_config(loaded.config.search.as_ref(), settings.seed);
    let frontier = optimize_region(&loaded.channel, &cfg)?;
    if let Some(dir) = configs_dir {
        std::fs::create_dir_all(dir)?;
    }
    frontier
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let joint = induced_joint(&loaded.channel, &f.scheme)?;
            let (r1_max, r2_max) = theorem1_rates(&joint)?;
            let mut m = Map::new();
            m.insert("index".into(), json!(i));
            m.extend(rate_fields(&f.point));
            m.insert("r1_max".into(), json!(r1_max));
            m.insert("r2_max".into(), json!(r2_max));
            m.insert("trivial".into(), json!(f.trivial));
            m.insert("v1_size".into(), json!(f.scheme.v1().size()));
            m.insert("v2_size".into(), json!(f.scheme.v2().size()));
            let path = configs_dir.map(|d| d.join(format!("frontier_{i:03}.json")));
            if let Some(p) = &path {
                let cfg = ExperimentConfig {
                    channel: loaded.config.channel.clone(),
                    scheme: Some(scheme_spec(&f.scheme)),
                    rates: vec![f.point],
                    n: loaded.config.n.clone(),
                    epsilons: loaded.config.epsilons,
                    trials: None,
                    seed: Some(settings.seed),
                    outputs: None,
                    search: None,
                    simulate: None,
                    secrecy: None,
                    sweep: None,
                    verify: None,
                };
                let mut bytes = serde_json::to_vec_pretty(&cfg).expect("config serializes");
                bytes.push(b'\n');
                std::fs::write(p, bytes)?;
            }
            m.insert("config".into(), json!(path.as_ref().and_then(|p| p.file_name()).map(|n| n.to_string_lossy())));
            Ok(m)
        })
        .collect()
}

fn code_params(n: usize, rates: RatePoint, settings: &Settings) -> Result<CodeParams, CliError> {
    Ok(CodeParams::new(n, rates, settings.epsilons, settings.seed)?)
}

pub fn simulate(loaded: &Loaded, settings: &Settings) -> Result<Rows, CliError> {
    let scheme = loaded.scheme()?;
    let mode = loaded.config.simulate.clone().unwrap_or_default().mode;
    let trials = settings.trials.unwrap_or(1000);
    let mut rows = Vec::new();
    for &n in settings.blocklengths()? {
        for r in rate_points(loaded)? {
            let est = estimate_error(scheme, &loaded.channel, &code_params(n, *r, settings)?, trials, mode)?;
            rows.push(prefixed(rate_fields(r), row(&est)));
        }
    }
    Ok(rows)
}

pub fn secrecy(loaded: &Loaded, settings: &Settings) -> Result<Rows, CliError> {
    let scheme = loaded.scheme()?;
    let spec = loaded.config.secrecy.clone().unwrap_or_default();
    let mut rows = Vec::new();
    for &n in settings.blocklengths()? {
        for r in rate_points(loaded)? {
            let cb = generate_codebook(scheme, &code_params(n, *r, settings)?)?;
            let rep = secrecy_report(&cb, loaded, &spec, settings.seed, rows.len() as u64)?;
            let mut m = row(&rep);
            if spec.averaged {
                m.insert("definition1_leakage".into(), json!(definition1_leakage(&cb, scheme, &loaded.channel)?));
            }
            rows.push(m);
        }
    }
    Ok(rows)
}

fn secrecy_report(
    cb: &strongsec::codec::Codebook,
    loaded: &Loaded,
    spec: &SecrecySpec,
    seed: u64,
    index: u64,
) -> Result<strongsec::secrecy::SecrecyReport, CliError> {
    let scheme = loaded.scheme()?;
    Ok(match spec.mode {
        Mode::Exact => effective_secrecy_exact(cb, scheme, &loaded.channel, spec.m2, spec.s2)?,
        Mode::MonteCarlo => {
            let mut rng = rng::derive(seed, tag::SAMPLE, index);
            effective_secrecy_mc(cb, scheme, &loaded.channel, spec.m2, spec.s2, spec.samples, &mut rng)?
        }
    })
}

pub fn secrecy_sweep(loaded: &Loaded, settings: &Settings) -> Result<Rows, CliError> {
    let scheme = loaded.scheme()?;
    let spec = loaded
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("--sweep needs a `sweep` section".into()))?;
    let mut rows = Vec::new();
    for &n in settings.blocklengths()? {
        let cfg = SweepConfig {
            n,
            r1: spec.r1,
            rco: spec.rco,
            epsilons: settings.epsilons,
            draws: spec.draws.or(settings.trials).unwrap_or(50),
            seed: settings.seed,
        };
        for r in leakage_vs_rate_sweep(scheme, &loaded.channel, &spec.grid, &cfg)? {
            rows.push(prefixed(Map::from_iter([("n".to_string(), json!(n))]), row(&r)));
        }
    }
    Ok(rows)
}

/// Runs every suite; the second value is false when any suite failed.
pub fn verify(loaded: &Loaded, settings: &Settings) -> Result<(Rows, bool), CliError> {
    let spec: VerifySpec = loaded.config.verify.clone().unwrap_or_default();
    let seed = |k| rng::child_seed(settings.seed, tag::SUITE, k);
    let epsilon = spec.epsilon.unwrap_or(0.1);
    let typical_n = spec.typical_n.clone().unwrap_or_else(|| vec![4, 6, 8]);
    let mut outcomes: Vec<(&str, SuiteOutcome)> = Vec::new();

    outcomes.push(("random", suites::divergence_bound_suite(spec.divergence_pairs.unwrap_or(10_000), seed(0))));
    outcomes.push((
        "random",
        suites::decomposition_suite(spec.random_instances.unwrap_or(100), 4, 4, seed(1))?,
    ));
    let joints = suites::random_joints(spec.random_joints.unwrap_or(20), seed(2));
    outcomes.push(("random", suites::output_bound_suite(&joints, &typical_n, epsilon)?));
    let tables = suites::random_joints(spec.random_tables.unwrap_or(1000), seed(3));
    outcomes.push(("random", suites::letter_stealth_suite(&tables)?));

    if let Some(scheme) = &loaded.scheme {
        let joint = induced_joint(&loaded.channel, scheme)?;
        let ns = spec.decomposition_n.clone().unwrap_or_else(|| vec![2, 3, 4]);
        let codebooks = spec.codebooks.unwrap_or(4);
        outcomes.push(("configured", suites::decomposition_for(scheme, &loaded.channel, &ns, codebooks, seed(4))?));
        outcomes.push(("configured", suites::output_bound_suite(std::slice::from_ref(&joint), &typical_n, epsilon)?));
        outcomes.push(("configured", suites::letter_stealth_suite(std::slice::from_ref(&joint))?));
    }

    let passed = outcomes.iter().all(|(_, o)| o.passed());
    let rows = outcomes
        .iter()
        .map(|(scope, o)| {
            let mut m = Map::new();
            m.insert("suite".into(), json!(o.suite));
            m.insert("scope".into(), json!(scope));
            m.insert("cases".into(), json!(o.cases));
            m.insert("failures".into(), json!(o.failures));
            m.insert("worst".into(), json!(o.worst));
            m.insert("tolerance".into(), json!(o.tolerance));
            m.insert("passed".into(), json!(o.passed()));
            m.insert("detail".into(), json!(o.detail));
            m
        })
        .collect();
    Ok((rows, passed))
}

pub fn configs_dir(flag: Option<PathBuf>, config: &ExperimentConfig) -> Option<PathBuf> {
    flag.or_else(|| config.outputs.as_ref().and_then(|o| o.configs_dir.clone()).map(PathBuf::from))
}
