//! One function per subcommand; each resolves its parameters, runs the
//! library, and hands the results to the record sink.

use std::fmt::Write as _;
use std::fs;

use serde::Serialize;
use spikelattice::dynamics::{dual_extinction_time, simulate_finite_spikes};
use spikelattice::experiments::{
    covariance_decay, estimate_alpha, estimate_rho, extinction_law_experiment, gamma_sweep,
    sigma_tail, site_sum, superlinear_mean_growth, superlinearity_check,
    thermalization_experiment, ExperimentConfig,
};
use spikelattice::lattice::{Configuration, SiteWindow};
use spikelattice::oracle::{build_generator, GeneratorKind};
use spikelattice::rng::{StreamKey, StreamRole};
use spikelattice::verify::{run_suites, VerifyOptions};

use crate::config::resolve;
use crate::record::{RawFile, Sink};
use crate::{CliError, CliResult, Command, Overrides};

pub fn dispatch(command: &Command, overrides: &Overrides) -> CliResult<u8> {
    let sink = Sink::new(overrides);
    match command {
        Command::Simulate => simulate(overrides, &sink),
        Command::Dual => dual(overrides, &sink),
        Command::Oracle => oracle(overrides, &sink),
        Command::Experiment { name } => experiment(name, overrides, &sink),
        Command::Verify => verify(overrides, &sink),
        Command::Sweep => sweep(overrides, &sink),
    }
}

fn initial_config(config: &ExperimentConfig) -> Configuration {
    config.initial()
}

#[derive(Serialize)]
struct SimulateParams {
    gamma: f64,
    n: i64,
    horizon: f64,
    master_seed: u64,
    init_sites: Option<Vec<i64>>,
}

#[derive(Serialize)]
struct SimulateResults {
    survived: bool,
    end_time: f64,
    spike_total: usize,
}

fn simulate(overrides: &Overrides, sink: &Sink) -> CliResult<u8> {
    let config = resolve(overrides)?;
    let params = SimulateParams {
        gamma: config.gamma,
        n: config.n,
        horizon: config.horizon,
        master_seed: config.master_seed,
        init_sites: config.init_sites.clone(),
    };
    let key = StreamKey::new(config.master_seed, 0, StreamRole::ForwardMarks);
    let run = simulate_finite_spikes(
        config.n,
        &initial_config(&config),
        config.gamma,
        config.horizon,
        key,
    )?;
    let results = SimulateResults {
        survived: run.survived,
        end_time: run.end_time,
        spike_total: run.log.total(),
    };
    let mut rows = String::new();
    run.log.write_csv(0, &mut rows);
    let raw = vec![RawFile { name: "spikes", header: "replica,site,time", rows }];
    sink.finish("simulate".into(), &params, &results, raw, 0)
}

#[derive(Serialize)]
struct DualParams {
    gamma: f64,
    horizon: f64,
    replicas: usize,
    master_seed: u64,
    init_sites: Vec<i64>,
}

#[derive(Serialize)]
struct DualResults {
    replicas: usize,
    deaths: usize,
    survival_fraction: f64,
    mean_death_time: Option<f64>,
}

fn dual(overrides: &Overrides, sink: &Sink) -> CliResult<u8> {
    let config = resolve(overrides)?;
    let init_sites = config.init_sites.clone().unwrap_or_else(|| vec![0]);
    let init = Configuration::from_sites(init_sites.iter().copied());
    let params = DualParams {
        gamma: config.gamma,
        horizon: config.horizon,
        replicas: config.replicas,
        master_seed: config.master_seed,
        init_sites,
    };
    let mut rows = String::new();
    let mut deaths = Vec::new();
    for replica in 0..config.replicas as u64 {
        let key = StreamKey::new(config.master_seed, replica, StreamRole::DualMarks);
        let death = dual_extinction_time(&init, config.gamma, config.horizon, key)?;
        match death {
            Some(t) => {
                deaths.push(t);
                writeln!(rows, "{replica},1,{t}").expect("string write");
            }
            None => writeln!(rows, "{replica},0,").expect("string write"),
        }
    }
    let results = DualResults {
        replicas: config.replicas,
        deaths: deaths.len(),
        survival_fraction: 1.0 - deaths.len() as f64 / config.replicas as f64,
        mean_death_time: if deaths.is_empty() {
            None
        } else {
            Some(deaths.iter().sum::<f64>() / deaths.len() as f64)
        },
    };
    let raw = vec![RawFile { name: "duals", header: "replica,died,death_time", rows }];
    sink.finish("dual".into(), &params, &results, raw, 0)
}

#[derive(Serialize)]
struct OracleParams {
    gamma: f64,
    n: i64,
}

#[derive(Serialize)]
struct OracleResults {
    sites: usize,
    mean_extinction_full: f64,
    quadrature_cross_check: f64,
    dual_mean_from_center: f64,
}

fn oracle(overrides: &Overrides, sink: &Sink) -> CliResult<u8> {
    // The exact solver enumerates all 2^sites states, so the default window
    // is deliberately small; --n widens it up to the solver cap.
    let n = overrides.n.unwrap_or(2);
    let gamma = overrides.gamma.unwrap_or(ExperimentConfig::default().gamma);
    if n < 0 {
        return Err(CliError::Usage(format!("--n must be non-negative, got {n}")));
    }
    let params = OracleParams { gamma, n };
    let sites = 2 * n as usize + 1;
    let auxiliary = build_generator(sites, gamma, GeneratorKind::Auxiliary)?;
    let mean = auxiliary.mean_extinction(auxiliary.full_state())?;
    let quadrature = auxiliary.mean_extinction_quadrature(auxiliary.full_state())?;
    let dual = build_generator(sites, gamma, GeneratorKind::Dual)?;
    let center = dual.encode(SiteWindow::centered(n), &Configuration::single(0))?;
    let results = OracleResults {
        sites,
        mean_extinction_full: mean,
        quadrature_cross_check: quadrature,
        dual_mean_from_center: dual.mean_extinction(center)?,
    };
    sink.finish("oracle".into(), &params, &results, Vec::new(), 0)
}

fn experiment(name: &str, overrides: &Overrides, sink: &Sink) -> CliResult<u8> {
    let config = resolve(overrides)?;
    let label = format!("experiment {name}");
    match name {
        "thermalization" => {
            let report = thermalization_experiment(&config)?;
            let mut rows = String::new();
            for rep in &report.per_replica {
                writeln!(
                    rows,
                    "{},{},{},{}",
                    rep.replica, rep.rate_per_site, rep.survived as u8, rep.end_time
                )
                .expect("string write");
            }
            let raw = vec![RawFile {
                name: "replicas",
                header: "replica,rate_per_site,survived,end_time",
                rows,
            }];
            sink.finish(label, &config, &report, raw, 0)
        }
        "extinction-law" => {
            let report = extinction_law_experiment(
                config.gamma,
                config.n,
                config.replicas,
                config.time_cap,
                config.master_seed,
                config.calibration_reps,
            )?;
            let mut rows = String::new();
            for (index, sample) in report.samples.iter().enumerate() {
                writeln!(rows, "{index},{sample}").expect("string write");
            }
            let raw = vec![RawFile { name: "samples", header: "index,value", rows }];
            sink.finish(label, &config, &report, raw, 0)
        }
        "mean-growth" => {
            let report = superlinear_mean_growth(
                config.gamma,
                &config.n_grid,
                config.replicas,
                config.time_cap,
                config.master_seed,
            )?;
            let mut rows = String::new();
            for point in &report.points {
                writeln!(
                    rows,
                    "{},{},{},{}",
                    point.n, point.mean.estimate, point.mean.std_error, point.cap_hits
                )
                .expect("string write");
            }
            let raw = vec![RawFile { name: "points", header: "n,mean,se,cap_hits", rows }];
            sink.finish(label, &config, &report, raw, 0)
        }
        "density" => {
            let report = estimate_rho(
                config.gamma,
                config.t_offset,
                config.block_halfwidth,
                config.replicas,
                config.master_seed,
                config.speed_bound(),
            )?;
            sink.finish(label, &config, &report, Vec::new(), 0)
        }
        "edge-speed" => {
            let report = estimate_alpha(
                config.gamma,
                config.horizon,
                config.replicas,
                config.master_seed,
                config.speed_bound(),
            )?;
            sink.finish(label, &config, &report, Vec::new(), 0)
        }
        "superlinearity" => {
            let report = superlinearity_check(
                config.gamma,
                config.lambda,
                config.horizon,
                config.replicas,
                config.master_seed,
                config.speed_bound(),
            )?;
            sink.finish(label, &config, &report, Vec::new(), 0)
        }
        "covariance" => {
            let report = covariance_decay(
                config.gamma,
                config.t_offset,
                &config.lags,
                config.replicas,
                site_sum(&config.f_sites),
                &config.f_sites,
                config.master_seed,
                config.speed_bound(),
            )?;
            let mut rows = String::new();
            for lag in &report.lags {
                writeln!(
                    rows,
                    "{},{},{},{}",
                    lag.lag, lag.covariance, lag.std_error, lag.null as u8
                )
                .expect("string write");
            }
            let raw =
                vec![RawFile { name: "lags", header: "lag,covariance,se,null", rows }];
            sink.finish(label, &config, &report, raw, 0)
        }
        "sigma-tail" => {
            let report = sigma_tail(
                config.gamma,
                &config.t_grid,
                config.horizon,
                config.replicas,
                config.master_seed,
            )?;
            let mut rows = String::new();
            for point in &report.points {
                writeln!(
                    rows,
                    "{},{},{},{}",
                    point.t,
                    point.estimate.estimate,
                    point.estimate.std_error,
                    point.deaths_after
                )
                .expect("string write");
            }
            let raw =
                vec![RawFile { name: "tail", header: "t,estimate,se,deaths_after", rows }];
            sink.finish(label, &config, &report, raw, 0)
        }
        other => Err(CliError::Usage(format!(
            "unknown experiment `{other}`; expected one of: thermalization, \
             extinction-law, mean-growth, density, edge-speed, superlinearity, \
             covariance, sigma-tail"
        ))),
    }
}

fn verify(overrides: &Overrides, sink: &Sink) -> CliResult<u8> {
    let defaults = VerifyOptions::default();
    let options = VerifyOptions {
        diagrams: overrides.replicas.unwrap_or(defaults.diagrams),
        halfwidth: overrides.n.unwrap_or(defaults.halfwidth),
        horizon: overrides.horizon.unwrap_or(defaults.horizon),
        gammas: match overrides.gamma {
            Some(gamma) => vec![gamma],
            None => defaults.gammas,
        },
        master_seed: overrides.seed.unwrap_or(defaults.master_seed),
    };
    let report = run_suites(&options)?;
    // Every failing path is reproducible: drop its diagram dump next to the
    // summary before reporting the verdict.
    for (index, failure) in report.failures.iter().enumerate() {
        let path = sink.sibling(&format!("failure-{index}.txt"));
        let text = format!(
            "# suite: {}\n# diagram: {}\n# detail: {}\n{}",
            failure.suite, failure.diagram_index, failure.detail, failure.dump
        );
        fs::write(&path, text)?;
        eprintln!("verify: {} failed on diagram {}: {}", failure.suite, failure.diagram_index, path.display());
    }
    let exit = u8::from(!report.passed());
    let options = report.options.clone();
    sink.finish("verify".into(), &options, &report, Vec::new(), exit)
}

fn sweep(overrides: &Overrides, sink: &Sink) -> CliResult<u8> {
    let config = resolve(overrides)?;
    let report = gamma_sweep(
        &config.gamma_grid,
        config.horizon,
        config.replicas,
        config.threshold,
        config.master_seed,
        config.speed_bound(),
    )?;
    let mut rows = String::new();
    for point in &report.points {
        writeln!(
            rows,
            "{},{},{},{},{}",
            point.gamma,
            point.survival.estimate,
            point.survival.std_error,
            point.survival.ci_lower,
            point.survival.ci_upper
        )
        .expect("string write");
    }
    let raw = vec![RawFile { name: "grid", header: "gamma,survival,se,ci_lower,ci_upper", rows }];
    sink.finish("sweep".into(), &config, &report, raw, 0)
}
