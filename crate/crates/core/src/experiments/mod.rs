//! Statistical experiments over the simulators: density and edge-speed
//! estimators, the extinction-law and mean-growth studies, spike-rate
//! concentration, correlation decay, tail decay, and the survival sweep that
//! brackets the phase transition.
//!
//! Every experiment fans its replicas out with rayon, keys each replica's
//! randomness independently of scheduling, and reduces with plain means, so a
//! run is reproducible bit for bit from `(parameters, master_seed)` alone.

mod correlation;
mod density;
mod edge;
mod extinction;
mod phase;
pub mod stats;
mod thermal;


pub use correlation::{covariance_decay, CovarianceReport, LagCovariance};
pub use density::{estimate_rho, DensityReport};
pub use edge::{estimate_alpha, superlinearity_check, SuperlinearityReport};
pub use extinction::{
    extinction_law_experiment, sigma_tail, superlinear_mean_growth, ExtinctionLawReport,
    GrowthPair, GrowthPoint, MeanGrowthReport, PairVerdict, SigmaTailReport, TailPoint,
};
pub use phase::{gamma_sweep, PhasePoint, PhaseReport};
pub use thermal::{
    active_indicator, site_sum, thermalization_experiment, time_average, ThermalReplica,
    ThermalizationReport,
};

use serde::{Deserialize, Serialize};

use crate::dynamics::DEFAULT_SPEED_BOUND;
use crate::error::{Error, Result};
use crate::lattice::{Configuration, SiteWindow};

/// Two-sided 95% normal quantile; every confidence interval here uses it.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Counts of the things that can quietly undermine an estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    /// Replicas whose truncation margin came under suspicion (edge too close
    /// to the window bound, or a margin below the default light-cone rate).
    pub margin_violations: usize,
    /// Replicas stopped by a time or event cap before reaching their goal.
    pub cap_hits: usize,
}

/// A point estimate with its uncertainty and the bookkeeping needed to judge
/// it: replica count and diagnostic counters. The interval is the plain
/// normal 95% interval, which is all the downstream verdicts consume.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub replicas: usize,
    pub diagnostics: Diagnostics,
}

impl EstimateResult {
    /// Mean, standard error and CI of raw per-replica values. A single
    /// sample yields a degenerate zero-width interval.
    pub fn from_samples(samples: &[f64], diagnostics: Diagnostics) -> Self {
        assert!(!samples.is_empty(), "estimate over zero samples");
        let (estimate, std_error) = stats::mean_se(samples);
        Self::from_parts(estimate, std_error, samples.len(), diagnostics)
    }

    /// Binomial proportion with the Wald standard error; adequate at the
    /// replica counts used here and degenerate (zero SE) at 0 or 1.
    pub fn from_binomial(hits: usize, trials: usize, diagnostics: Diagnostics) -> Self {
        assert!(trials > 0, "proportion over zero trials");
        let p = hits as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        Self::from_parts(p, se, trials, diagnostics)
    }

    pub fn from_parts(
        estimate: f64,
        std_error: f64,
        replicas: usize,
        diagnostics: Diagnostics,
    ) -> Self {
        Self {
            estimate,
            std_error,
            ci_lower: estimate - Z95 * std_error,
            ci_upper: estimate + Z95 * std_error,
            replicas,
            diagnostics,
        }
    }
}

fn require(ok: bool, field: &'static str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig { field, reason: reason.to_string() })
    }
}

fn require_rate(value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRate(value))
    }
}

/// Everything an experiment run can be told. Unset fields take the defaults
/// below; `validate` names the offending field on rejection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Leak rate.
    pub gamma: f64,
    /// Window half-width; the finite system lives on the 2n+1 centered sites.
    pub n: i64,
    pub replicas: usize,
    /// Time horizon; doubles as the observation time t* for the density runs.
    pub horizon: f64,
    /// (n, R) pairs: how long an averaging window each system size gets.
    pub r_schedule: Vec<(i64, f64)>,
    /// Start of the averaging window.
    pub t_offset: f64,
    /// The finite site set whose spikes are averaged.
    pub f_sites: Vec<i64>,
    /// Lags for the correlation study.
    pub lags: Vec<f64>,
    pub master_seed: u64,
    /// Concentration tolerance for the spike-rate study, in per-site units.
    /// A harness choice, not a derived quantity.
    pub delta: f64,
    /// Scales the default light-cone rate that sizes truncation margins;
    /// values below 1 are legal but flagged in diagnostics.
    pub margin_factor: f64,
    /// Initial active set; all-active when absent.
    pub init_sites: Option<Vec<i64>>,
    /// Perturbation rate for the superlinearity check.
    pub lambda: f64,
    /// Half-width of the spatial averaging block for density estimates.
    pub block_halfwidth: i64,
    /// System sizes for the mean-growth study.
    pub n_grid: Vec<i64>,
    /// Cutoff grid for the extinction-tail study.
    pub t_grid: Vec<f64>,
    /// Leak rates for the survival sweep.
    pub gamma_grid: Vec<f64>,
    /// Survival frequency whose crossing the sweep brackets.
    pub threshold: f64,
    /// Wall-clock-bounding cap on simulated time; runs still alive at the cap
    /// are censored and flagged, never silently dropped.
    pub time_cap: Option<f64>,
    /// Null-calibration resamples behind each goodness-of-fit p-value.
    pub calibration_reps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            n: 50,
            replicas: 200,
            horizon: 50.0,
            r_schedule: vec![(50, 200.0)],
            t_offset: 10.0,
            f_sites: (-2..=2).collect(),
            lags: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            master_seed: 0x5eed_1a77,
            delta: 0.1,
            margin_factor: 1.0,
            init_sites: None,
            lambda: 0.1,
            block_halfwidth: 2,
            n_grid: vec![10, 20, 40],
            t_grid: vec![2.0, 4.0, 8.0, 16.0],
            gamma_grid: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2],
            threshold: 0.25,
            time_cap: None,
            calibration_reps: 2000,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidRate(self.gamma));
        }
        require(self.n >= 0, "n", "window half-width must be non-negative")?;
        require(self.replicas >= 1, "replicas", "need at least one replica")?;
        require(
            self.horizon.is_finite() && self.horizon > 0.0,
            "horizon",
            "horizon must be finite and positive",
        )?;
        require(
            self.t_offset.is_finite() && self.t_offset >= 0.0,
            "t_offset",
            "averaging start must be finite and non-negative",
        )?;
        require(
            self.delta.is_finite() && self.delta > 0.0,
            "delta",
            "concentration tolerance must be positive",
        )?;
        require(
            self.margin_factor.is_finite() && self.margin_factor > 0.0,
            "margin_factor",
            "margin factor must be positive",
        )?;
        require(!self.r_schedule.is_empty(), "r_schedule", "schedule must not be empty")?;
        for pair in self.r_schedule.windows(2) {
            require(
                pair[0].0 < pair[1].0,
                "r_schedule",
                "system sizes must be strictly increasing",
            )?;
            require(
                pair[0].1 < pair[1].1,
                "r_schedule",
                "averaging windows must be strictly increasing: the concentration \
                 hypothesis needs R_n -> +infinity",
            )?;
        }
        for &(n, r) in &self.r_schedule {
            require(n >= 0, "r_schedule", "system sizes must be non-negative")?;
            require(
                r.is_finite() && r > 0.0,
                "r_schedule",
                "averaging windows must be finite and positive",
            )?;
        }
        require(!self.f_sites.is_empty(), "f_sites", "observed site set must not be empty")?;
        // `f_sites` containment in the window is checked by the experiments
        // that pair the two (thermalization); most experiments use one or the
        // other, so coupling them here would reject valid runs.
        let window = self.window();
        if let Some(sites) = &self.init_sites {
            for &site in sites {
                require(
                    window.contains(site),
                    "init_sites",
                    "initial sites must lie inside the window",
                )?;
            }
        }
        require(
            self.lags.windows(2).all(|w| w[0] < w[1]),
            "lags",
            "lags must be strictly increasing",
        )?;
        require(
            self.lags.iter().all(|l| l.is_finite() && *l >= 0.0),
            "lags",
            "lags must be finite and non-negative",
        )?;
        require(
            self.t_grid.windows(2).all(|w| w[0] < w[1]),
            "t_grid",
            "cutoffs must be strictly increasing",
        )?;
        require(
            self.t_grid.iter().all(|t| t.is_finite() && *t >= 0.0),
            "t_grid",
            "cutoffs must be finite and non-negative",
        )?;
        require(
            self.gamma_grid.windows(2).all(|w| w[0] < w[1]),
            "gamma_grid",
            "sweep rates must be strictly increasing",
        )?;
        for &g in &self.gamma_grid {
            if !g.is_finite() || g < 0.0 {
                return Err(Error::InvalidRate(g));
            }
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidRate(self.lambda));
        }
        require(
            self.threshold > 0.0 && self.threshold < 1.0,
            "threshold",
            "survival threshold must lie strictly between 0 and 1",
        )?;
        require(self.block_halfwidth >= 0, "block_halfwidth", "block must be non-negative")?;
        if let Some(cap) = self.time_cap {
            require(
                cap.is_finite() && cap > 0.0,
                "time_cap",
                "time cap must be finite and positive",
            )?;
        }
        require(
            self.calibration_reps >= 100,
            "calibration_reps",
            "p-values need at least 100 calibration resamples",
        )?;
        Ok(())
    }

    pub fn window(&self) -> SiteWindow {
        SiteWindow::centered(self.n)
    }

    /// Initial configuration: all-active unless overridden.
    pub fn initial(&self) -> Configuration {
        match &self.init_sites {
            Some(sites) => Configuration::from_sites(sites.iter().copied()),
            None => Configuration::full(self.window()),
        }
    }

    /// Averaging window for size `n`, if the schedule has one.
    pub fn r_for(&self, n: i64) -> Option<f64> {
        self.r_schedule.iter().find(|(m, _)| *m == n).map(|(_, r)| *r)
    }

    /// The light-cone rate margins are sized with.
    pub fn speed_bound(&self) -> f64 {
        DEFAULT_SPEED_BOUND * self.margin_factor
    }
}
