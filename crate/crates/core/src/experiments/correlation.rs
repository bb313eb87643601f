//! Time-correlation decay of cylinder observables under the truncated
//! infinite system, with jackknife error bars and a log-linear decay fit.

use rayon::prelude::*;
use serde::Serialize;

use super::stats::{covariance_loo, jackknife_se, weighted_line_fit, LineFit};
use super::{require_rate, Z95};
use crate::dynamics::simulate_windowed_infinite;
use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::rng::{StreamKey, StreamRole};

/// Covariance of the observable at the base time against itself one lag
/// later. `null` marks lags statistically indistinguishable from zero at two
/// jackknife standard errors; those are excluded from the decay fit.
#[derive(Debug, Clone, Serialize)]
pub struct LagCovariance {
    pub lag: f64,
    pub covariance: f64,
    pub std_error: f64,
    pub null: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceReport {
    pub gamma: f64,
    pub base_time: f64,
    pub replicas: usize,
    pub lags: Vec<LagCovariance>,
    /// Weighted fit of log-covariance against lag over the non-null lags;
    /// absent when fewer than two lags survive.
    pub fit: Option<LineFit>,
    pub fitted_lags: usize,
    /// Every lag was null: the signal decayed below the noise floor. A
    /// finding about resolution, not a failure.
    pub noise_floor: bool,
    /// Adjacent covariances non-increasing within two jackknife standard
    /// errors of their paired difference.
    pub monotone_within_ci: bool,
}

/// Estimate `Cov(f(state at s), f(state at s + lag))` across replicas of the
/// truncated infinite system from full occupancy, for each lag. Jackknife
/// standard errors, since the lags within a replica share randomness and
/// only the replicas are independent.
#[allow(clippy::too_many_arguments)]
pub fn covariance_decay<F>(
    gamma: f64,
    base_time: f64,
    lags: &[f64],
    replicas: usize,
    observable: F,
    support: &[i64],
    master_seed: u64,
    speed_bound: f64,
) -> Result<CovarianceReport>
where
    F: Fn(&Configuration) -> f64 + Sync,
{
    require_rate(gamma)?;
    if !base_time.is_finite() || base_time <= 0.0 {
        return Err(Error::InvalidHorizon(base_time));
    }
    if lags.is_empty()
        || !lags.windows(2).all(|w| w[0] < w[1])
        || lags.iter().any(|l| !l.is_finite() || *l < 0.0)
    {
        return Err(Error::InvalidConfig {
            field: "lags",
            reason: "lags must be non-empty, non-negative and strictly increasing".into(),
        });
    }
    if replicas < 3 {
        return Err(Error::InvalidConfig {
            field: "replicas",
            reason: "jackknife needs at least three replicas".into(),
        });
    }
    if support.is_empty() {
        return Err(Error::InvalidConfig {
            field: "support",
            reason: "the observable needs a non-empty support".into(),
        });
    }
    let observed = Configuration::from_sites(support.iter().copied());
    let horizon = base_time + lags.last().unwrap();
    // Per replica: the observable at the base time and at every lag.
    let rows: Vec<(f64, Vec<f64>)> = (0..replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let key = StreamKey::new(master_seed, replica, StreamRole::ForwardMarks);
            let traj = simulate_windowed_infinite(gamma, horizon, &observed, key, speed_bound)?;
            let base = observable(traj.at(base_time)?);
            let lagged = lags
                .iter()
                .map(|&lag| Ok(observable(traj.at(base_time + lag)?)))
                .collect::<Result<Vec<f64>>>()?;
            Ok((base, lagged))
        })
        .collect::<Result<_>>()?;

    let mut per_lag = Vec::with_capacity(lags.len());
    let mut loo_per_lag = Vec::with_capacity(lags.len());
    for (j, &lag) in lags.iter().enumerate() {
        let pairs: Vec<(f64, f64)> = rows.iter().map(|(base, row)| (*base, row[j])).collect();
        let cov = covariance_loo(&pairs);
        let se = jackknife_se(&cov.leave_one_out);
        let null = cov.estimate.abs() <= 2.0 * se;
        per_lag.push(LagCovariance { lag, covariance: cov.estimate, std_error: se, null });
        loo_per_lag.push(cov.leave_one_out);
    }

    // Paired monotonicity: jackknife the difference of adjacent covariances,
    // which shares leave-one-out indices, instead of pretending independence.
    let monotone_within_ci = per_lag.windows(2).enumerate().all(|(j, w)| {
        let diffs: Vec<f64> = loo_per_lag[j + 1]
            .iter()
            .zip(&loo_per_lag[j])
            .map(|(hi, lo)| hi - lo)
            .collect();
        let se = jackknife_se(&diffs);
        w[1].covariance - w[0].covariance <= Z95 * se
    });

    let fit_points: Vec<(f64, f64, f64)> = per_lag
        .iter()
        .filter(|l| !l.null && l.covariance > 0.0)
        .map(|l| (l.lag, l.covariance.ln(), l.std_error / l.covariance))
        .collect();
    let noise_floor = per_lag.iter().all(|l| l.null);
    Ok(CovarianceReport {
        gamma,
        base_time,
        replicas,
        fitted_lags: fit_points.len(),
        fit: weighted_line_fit(&fit_points),
        noise_floor,
        monotone_within_ci,
        lags: per_lag,
    })
}
