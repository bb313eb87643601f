//! Spike-rate concentration before extinction: the per-site spike average
//! over a long window concentrates near the occupancy density while the
//! finite system is still alive. Also the exact time averages of cylinder
//! observables that bridge spike counts to occupation times.

use rayon::prelude::*;
use serde::Serialize;

use super::density::{estimate_rho, DensityReport};
use super::ExperimentConfig;
use crate::dynamics::{simulate_finite_spikes, ObservedTrajectory};
use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::rng::{StreamKey, StreamRole};

/// Replicas behind the reference density estimate; chosen so the density's
/// own error bar is well below the concentration tolerance.
const RHO_REPLICAS: usize = 2000;

/// Per-replica outcome of the spike-rate study.
#[derive(Debug, Clone, Serialize)]
pub struct ThermalReplica {
    pub replica: u64,
    /// Spike average per site: total spikes on the observed set over
    /// [t, t+R], divided by R and by the number of observed sites.
    pub rate_per_site: f64,
    /// Alive at t + R; the average only means something on this event.
    pub survived: bool,
    /// Extinction time capped at t + R.
    pub end_time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermalizationReport {
    pub gamma: f64,
    pub n: i64,
    pub t: f64,
    pub r: f64,
    pub f_sites: Vec<i64>,
    pub delta: f64,
    /// The reference density with its own confidence interval.
    pub rho_hat: DensityReport,
    pub replicas: usize,
    pub survivors: usize,
    pub survivor_fraction: f64,
    /// Among survivors: fraction with |rate_per_site - rho| <= delta.
    pub concentration_fraction: f64,
    /// Same, but measuring distance to the density's confidence interval
    /// instead of its point estimate (both uncertainties propagated).
    pub concentration_fraction_wide: f64,
    /// Mean of min(extinction, t+R): a valid lower bound on the mean
    /// extinction time, since every survivor is censored.
    pub e_tau_lower_bound: f64,
    /// Upper bound on R over the mean extinction time, from the bound above;
    /// the averaging-window hypothesis wants this ratio small in the limit.
    pub r_over_tau_upper: f64,
    pub per_replica: Vec<ThermalReplica>,
}

/// Run the finite system `config.replicas` times, average spikes on the
/// observed set over [t, t+R], and measure how the per-site averages
/// concentrate around the independently estimated density. Replicas extinct
/// before the window closes are reported separately, never averaged in.
pub fn thermalization_experiment(config: &ExperimentConfig) -> Result<ThermalizationReport> {
    config.validate()?;
    let window = config.window();
    for &site in &config.f_sites {
        if !window.contains(site) {
            return Err(Error::InvalidConfig {
                field: "f_sites",
                reason: "observed sites must lie inside the window".into(),
            });
        }
    }
    let r = config.r_for(config.n).ok_or(Error::InvalidConfig {
        field: "r_schedule",
        reason: format!("no averaging window listed for n = {}", config.n),
    })?;
    let t = config.t_offset;
    let horizon = t + r;
    let init = config.initial();
    let f_sites = config.f_sites.clone();
    let per_replica: Vec<ThermalReplica> = (0..config.replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let key = StreamKey::new(config.master_seed, replica, StreamRole::ForwardMarks);
            let run = simulate_finite_spikes(config.n, &init, config.gamma, horizon, key)?;
            Ok(ThermalReplica {
                replica,
                rate_per_site: spike_average(&run.log, &f_sites, t, r) / f_sites.len() as f64,
                survived: run.survived,
                end_time: run.end_time,
            })
        })
        .collect::<Result<_>>()?;

    let rho = estimate_rho(
        config.gamma,
        t.max(1.0),
        config.block_halfwidth,
        RHO_REPLICAS,
        // A different master stream family than the replicas above, so the
        // reference density is statistically independent of the spike runs.
        config.master_seed ^ 0x9e37_79b9_7f4a_7c15,
        config.speed_bound(),
    )?;

    let survivors: Vec<&ThermalReplica> =
        per_replica.iter().filter(|rep| rep.survived).collect();
    let near = |target_lo: f64, target_hi: f64| {
        survivors
            .iter()
            .filter(|rep| {
                rep.rate_per_site >= target_lo - config.delta
                    && rep.rate_per_site <= target_hi + config.delta
            })
            .count()
    };
    let concentration_fraction = if survivors.is_empty() {
        0.0
    } else {
        near(rho.site.estimate, rho.site.estimate) as f64 / survivors.len() as f64
    };
    let concentration_fraction_wide = if survivors.is_empty() {
        0.0
    } else {
        near(rho.site.ci_lower, rho.site.ci_upper) as f64 / survivors.len() as f64
    };
    let e_tau_lower_bound =
        per_replica.iter().map(|rep| rep.end_time).sum::<f64>() / per_replica.len() as f64;
    Ok(ThermalizationReport {
        gamma: config.gamma,
        n: config.n,
        t,
        r,
        f_sites,
        delta: config.delta,
        rho_hat: rho,
        replicas: config.replicas,
        survivors: survivors.len(),
        survivor_fraction: survivors.len() as f64 / per_replica.len() as f64,
        concentration_fraction,
        concentration_fraction_wide,
        e_tau_lower_bound,
        r_over_tau_upper: r / e_tau_lower_bound,
        per_replica,
    })
}

/// The spike average over `[t, t+r]`: spikes landed on the observed sites,
/// summed, per unit of averaged time.
pub(crate) fn spike_average(
    log: &crate::dynamics::SpikeLog,
    sites: &[i64],
    t: f64,
    r: f64,
) -> f64 {
    let spikes: usize = sites.iter().map(|&site| log.count_in(site, t, t + r)).sum();
    spikes as f64 / r
}

/// Number of active sites among `sites`: the additive cylinder observable.
pub fn site_sum(sites: &[i64]) -> impl Fn(&Configuration) -> f64 + Sync + '_ {
    move |config| sites.iter().filter(|&&s| config.contains(s)).count() as f64
}

/// Indicator that `site` is active: the basic cylinder observable.
pub fn active_indicator(site: i64) -> impl Fn(&Configuration) -> f64 + Sync {
    move |config| f64::from(u8::from(config.contains(site)))
}

/// Time average `(1/R) * integral over [t, t+R] of f(state(s)) ds` of a
/// cylinder observable along a trajectory. Trajectories are step functions
/// between events, so the integral is a finite sum evaluated exactly.
pub fn time_average<F>(trajectory: &ObservedTrajectory, t: f64, r: f64, f: F) -> Result<f64>
where
    F: Fn(&Configuration) -> f64,
{
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidHorizon(r));
    }
    time_average_samples(&trajectory.samples, trajectory.horizon, t, r, f)
}

/// The integral itself, over raw `(time, state)` change points covering
/// `[0, end_time]` with the first sample at time 0.
pub(crate) fn time_average_samples<F>(
    samples: &[(f64, Configuration)],
    end_time: f64,
    t: f64,
    r: f64,
    f: F,
) -> Result<f64>
where
    F: Fn(&Configuration) -> f64,
{
    debug_assert!(!samples.is_empty() && samples[0].0 == 0.0);
    if t < 0.0 || t + r > end_time {
        return Err(Error::CoverageGap { available: end_time, from: t, to: t + r });
    }
    // Index of the last change point at or before t.
    let mut idx = samples.partition_point(|(time, _)| *time <= t) - 1;
    let mut acc = 0.0;
    let mut cursor = t;
    while cursor < t + r {
        let seg_end = match samples.get(idx + 1) {
            Some((next, _)) if *next < t + r => *next,
            _ => t + r,
        };
        acc += f(&samples[idx].1) * (seg_end - cursor);
        cursor = seg_end;
        idx += 1;
    }
    Ok(acc / r)
}
