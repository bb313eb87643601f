//! Extinction-time studies: the exponential law after rescaling, the
//! faster-than-linear growth of the mean in the system size, and the
//! exponential tail of the dual's extinction time.

use rayon::prelude::*;
use serde::Serialize;

use super::stats::{ks_exponential_test, weighted_line_fit, KsReport, LineFit};
use super::{require_rate, Diagnostics, EstimateResult};
use crate::dynamics::{dual_extinction_time, sample_extinction_capped, sample_extinction_time};
use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::rng::{StreamKey, StreamRole};

fn forward_key(master_seed: u64, replica: u64) -> StreamKey {
    StreamKey::new(master_seed, replica, StreamRole::ForwardMarks)
}

/// Extinction-time sample with the goodness-of-fit verdict against the
/// exponential law.
#[derive(Debug, Clone, Serialize)]
pub struct ExtinctionLawReport {
    pub gamma: f64,
    pub n: i64,
    /// Mean extinction time over the uncensored replicas.
    pub mean: EstimateResult,
    pub ks: KsReport,
    pub used_replicas: usize,
    pub cap_hits: usize,
    /// Raw uncensored extinction times, for external plotting.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Sample the all-active finite system's extinction time `replicas` times,
/// rescale by the sample mean, and test against the unit exponential.
/// Replicas still alive at `time_cap` are excluded from the law and counted.
pub fn extinction_law_experiment(
    gamma: f64,
    n: i64,
    replicas: usize,
    time_cap: Option<f64>,
    master_seed: u64,
    calibration_reps: usize,
) -> Result<ExtinctionLawReport> {
    require_rate(gamma)?;
    if replicas < 500 {
        return Err(Error::InvalidConfig {
            field: "replicas",
            reason: format!("the law test needs at least 500 replicas, got {replicas}"),
        });
    }
    let outcomes: Vec<(f64, bool)> = (0..replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let key = forward_key(master_seed, replica);
            match time_cap {
                Some(cap) => {
                    let s = sample_extinction_capped(n, gamma, key, cap)?;
                    Ok((s.value, s.censored))
                }
                None => Ok((sample_extinction_time(n, gamma, key, None)?, false)),
            }
        })
        .collect::<Result<_>>()?;
    let samples: Vec<f64> =
        outcomes.iter().filter(|(_, censored)| !censored).map(|(v, _)| *v).collect();
    let cap_hits = replicas - samples.len();
    if samples.len() < 2 {
        return Err(Error::InvalidConfig {
            field: "time_cap",
            reason: "fewer than two replicas went extinct before the cap".into(),
        });
    }
    let diagnostics = Diagnostics { margin_violations: 0, cap_hits };
    let mean = EstimateResult::from_samples(&samples, diagnostics);
    // Calibration draws its own stream so the replica streams stay untouched
    // however many resamples the p-value asks for.
    let mut calibration =
        StreamKey::new(master_seed, u64::MAX, StreamRole::OracleCheck).stream();
    let ks = ks_exponential_test(&samples, calibration_reps, &mut calibration);
    Ok(ExtinctionLawReport {
        gamma,
        n,
        mean,
        ks,
        used_replicas: samples.len(),
        cap_hits,
        samples,
    })
}

/// One system size in the mean-growth study.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthPoint {
    pub n: i64,
    /// Mean extinction time (of the censored values where capped).
    pub mean: EstimateResult,
    /// The figure of merit: mean extinction time over n.
    pub ratio: EstimateResult,
    pub cap_hits: usize,
    /// When set, the point is only a lower bound: some replicas were still
    /// alive at the cap, and E[min(tau, cap)] <= E[tau].
    pub lower_bound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairVerdict {
    /// The larger size's lower confidence edge clears the smaller size's
    /// upper edge, so the ratio grew.
    Certified,
    /// Both sizes uncensored and the larger size's upper edge sits below the
    /// smaller size's lower edge.
    Refuted,
    /// Overlapping intervals, or censoring robbed the comparison of an
    /// upper bound on the smaller size.
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthPair {
    pub n_lo: i64,
    pub n_hi: i64,
    pub verdict: PairVerdict,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanGrowthReport {
    pub gamma: f64,
    pub points: Vec<GrowthPoint>,
    pub pairs: Vec<GrowthPair>,
    /// `Some(true)` when every adjacent pair certified strict growth; absent
    /// for a single-point grid, which carries no verdict.
    pub increasing: Option<bool>,
}

/// Estimate mean extinction time over n for each size in the grid and judge
/// whether the ratio strictly increases within confidence intervals. Mean
/// extinction times explode with n, so capped runs enter as censored lower
/// bounds: a censored point can still certify growth over an uncensored
/// smaller one, but never the reverse comparison.
pub fn superlinear_mean_growth(
    gamma: f64,
    n_grid: &[i64],
    replicas: usize,
    time_cap: Option<f64>,
    master_seed: u64,
) -> Result<MeanGrowthReport> {
    require_rate(gamma)?;
    if n_grid.is_empty() || !n_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig {
            field: "n_grid",
            reason: "sizes must be non-empty and strictly increasing".into(),
        });
    }
    if replicas == 0 {
        return Err(Error::InvalidConfig {
            field: "replicas",
            reason: "need at least one replica".into(),
        });
    }
    let mut points = Vec::with_capacity(n_grid.len());
    for (slot, &n) in n_grid.iter().enumerate() {
        // Different sizes must not share replica streams; fold the grid slot
        // into the replica id.
        let base = (slot as u64) << 32;
        let outcomes: Vec<(f64, bool)> = (0..replicas as u64)
            .into_par_iter()
            .map(|replica| {
                let key = forward_key(master_seed, base | replica);
                match time_cap {
                    Some(cap) => {
                        let s = sample_extinction_capped(n, gamma, key, cap)?;
                        Ok((s.value, s.censored))
                    }
                    None => Ok((sample_extinction_time(n, gamma, key, None)?, false)),
                }
            })
            .collect::<Result<_>>()?;
        let values: Vec<f64> = outcomes.iter().map(|(v, _)| *v).collect();
        let cap_hits = outcomes.iter().filter(|(_, censored)| *censored).count();
        let diagnostics = Diagnostics { margin_violations: 0, cap_hits };
        let mean = EstimateResult::from_samples(&values, diagnostics);
        let ratios: Vec<f64> = values.iter().map(|v| v / n as f64).collect();
        let ratio = EstimateResult::from_samples(&ratios, diagnostics);
        points.push(GrowthPoint { n, mean, ratio, cap_hits, lower_bound: cap_hits > 0 });
    }
    let pairs: Vec<GrowthPair> = points.windows(2).map(|w| judge_pair(&w[0], &w[1])).collect();
    let increasing = if points.len() < 2 {
        None
    } else {
        Some(pairs.iter().all(|p| p.verdict == PairVerdict::Certified))
    };
    Ok(MeanGrowthReport { gamma, points, pairs, increasing })
}

fn judge_pair(lo: &GrowthPoint, hi: &GrowthPoint) -> GrowthPair {
    let (verdict, note) = if lo.lower_bound {
        (
            PairVerdict::Indeterminate,
            format!(
                "n = {} was censored at the cap, so its ratio has no upper confidence \
                 bound to compare against",
                lo.n
            ),
        )
    } else if hi.ratio.ci_lower > lo.ratio.ci_upper {
        let qualifier =
            if hi.lower_bound { " (already from the censored lower bound)" } else { "" };
        (PairVerdict::Certified, format!("ratio grew from n = {} to n = {}{qualifier}", lo.n, hi.n))
    } else if !hi.lower_bound && hi.ratio.ci_upper < lo.ratio.ci_lower {
        (PairVerdict::Refuted, "the larger size's ratio sits strictly below".to_string())
    } else {
        (PairVerdict::Indeterminate, "confidence intervals overlap".to_string())
    };
    GrowthPair { n_lo: lo.n, n_hi: hi.n, verdict, note }
}

/// One cutoff in the tail study.
#[derive(Debug, Clone, Serialize)]
pub struct TailPoint {
    pub t: f64,
    /// Probability of dying strictly after t but by the horizon.
    pub estimate: EstimateResult,
    pub deaths_after: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaTailReport {
    pub gamma: f64,
    pub horizon: f64,
    pub replicas: usize,
    pub deaths: usize,
    /// Fraction still alive at the horizon; stands in for the event of
    /// surviving forever, and is excluded from the tail by construction.
    pub survivor_fraction: f64,
    pub points: Vec<TailPoint>,
    /// Weighted fit of log-probability against t over the non-empty points.
    pub fit: Option<LineFit>,
    /// Non-increasing in t, checked exactly on the counts (the events nest).
    pub monotone: bool,
}

/// Tail of the dual-from-one-site extinction time: for each cutoff t, the
/// fraction of replicas with `t < sigma <= horizon`, plus a log-linear decay
/// fit. "Dies eventually" is operationalized as "dies by the horizon"; the
/// surviving mass is reported alongside.
pub fn sigma_tail(
    gamma: f64,
    t_grid: &[f64],
    horizon: f64,
    replicas: usize,
    master_seed: u64,
) -> Result<SigmaTailReport> {
    require_rate(gamma)?;
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::InvalidHorizon(horizon));
    }
    if t_grid.is_empty()
        || !t_grid.windows(2).all(|w| w[0] < w[1])
        || t_grid.iter().any(|t| !t.is_finite() || *t < 0.0 || *t >= horizon)
    {
        return Err(Error::InvalidConfig {
            field: "t_grid",
            reason: "cutoffs must be strictly increasing within [0, horizon)".into(),
        });
    }
    if replicas == 0 {
        return Err(Error::InvalidConfig {
            field: "replicas",
            reason: "need at least one replica".into(),
        });
    }
    let deaths: Vec<Option<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let key = StreamKey::new(master_seed, replica, StreamRole::DualMarks);
            dual_extinction_time(&Configuration::single(0), gamma, horizon, key)
        })
        .collect::<Result<_>>()?;
    let died: Vec<f64> = deaths.iter().flatten().copied().collect();
    let survivor_fraction = 1.0 - died.len() as f64 / replicas as f64;
    let points: Vec<TailPoint> = t_grid
        .iter()
        .map(|&t| {
            let after = died.iter().filter(|&&sigma| sigma > t).count();
            TailPoint {
                t,
                estimate: EstimateResult::from_binomial(after, replicas, Diagnostics::default()),
                deaths_after: after,
            }
        })
        .collect();
    let monotone = points.windows(2).all(|w| w[0].deaths_after >= w[1].deaths_after);
    let fit_points: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|p| p.deaths_after > 0 && p.estimate.std_error > 0.0)
        .map(|p| {
            // Delta method: se(log p) ~= se(p) / p.
            (p.t, p.estimate.estimate.ln(), p.estimate.std_error / p.estimate.estimate)
        })
        .collect();
    Ok(SigmaTailReport {
        gamma,
        horizon,
        replicas,
        deaths: died.len(),
        survivor_fraction,
        points,
        fit: weighted_line_fit(&fit_points),
        monotone,
    })
}
