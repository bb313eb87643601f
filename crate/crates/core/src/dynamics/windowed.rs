//! Windowed stand-in for the infinite activity process started all-active.
//!
//! A full-line window with light-cone margin around the observation span runs
//! the plain finite engine; within the horizon, influence from the missing
//! sites beyond the truncation reaches the observed sites only with the
//! probability the margin was sized to suppress. Margin adequacy is a
//! construction-time invariant here (see [`Window::full_line`]); the
//! statistical margin-doubling self-test lives with the experiments.

use crate::error::{Error, Result};
use crate::lattice::{Configuration, SiteWindow};
use crate::rng::StreamKey;

use super::aux_engine::{AuxEngine, AuxObserver};
use super::Window;

/// Observed-site states of one windowed run, recorded at t = 0 and at every
/// event that changed the observed restriction.
#[derive(Debug, Clone)]
pub struct ObservedTrajectory {
    pub samples: Vec<(f64, Configuration)>,
    pub horizon: f64,
    /// Margin the window used; the record keeps it so a result can always be
    /// audited against the light-cone invariant.
    pub margin: i64,
    pub window: SiteWindow,
}

impl ObservedTrajectory {
    /// Observed configuration at `t` (right-continuous).
    pub fn at(&self, t: f64) -> Result<&Configuration> {
        if t > self.horizon {
            return Err(Error::BeyondHorizon { requested: t, horizon: self.horizon });
        }
        let idx = self.samples.partition_point(|&(s, _)| s <= t);
        Ok(&self.samples[idx.saturating_sub(1)].1)
    }
}

/// Run the all-active windowed engine to `horizon`, driving `obs` with every
/// event; returns the engine in its final state for the caller to read.
pub(crate) fn run_windowed<O: AuxObserver>(
    gamma: f64,
    horizon: f64,
    observed: SiteWindow,
    key: StreamKey,
    speed_bound: f64,
    obs: &mut O,
) -> Result<AuxEngine> {
    let window = Window::full_line(observed, horizon, speed_bound)?.bounds();
    let mut engine = AuxEngine::new(window, &Configuration::full(window), gamma)?;
    let mut stream = key.stream();
    while engine.step_bounded(&mut stream, horizon, obs) {}
    Ok(engine)
}

struct ObservedStates {
    observed: Configuration,
    current: Configuration,
    samples: Vec<(f64, Configuration)>,
}

impl AuxObserver for ObservedStates {
    fn on_event(&mut self, time: f64, site: i64, _kind: super::EventKind, engine: &AuxEngine) {
        // Only an event at an observed site or its neighbor can move the
        // observed restriction.
        let near = [site - 1, site, site + 1]
            .into_iter()
            .any(|s| self.observed.contains(s));
        if !near {
            return;
        }
        let now = Configuration::from_sites(
            self.observed.iter().filter(|&s| engine.is_active(s)),
        );
        if now != self.current {
            self.current = now.clone();
            self.samples.push((time, now));
        }
    }
}

/// Observed-site trajectory of the infinite process started all-active,
/// approximated on a light-cone window with `margin =
/// ceil(speed_bound * horizon)` sites beyond the observation span.
pub fn simulate_windowed_infinite(
    gamma: f64,
    horizon: f64,
    observed: &Configuration,
    key: StreamKey,
    speed_bound: f64,
) -> Result<ObservedTrajectory> {
    let (Some(lo), Some(hi)) = (observed.min(), observed.max()) else {
        return Err(Error::InvalidConfig {
            field: "observed",
            reason: "observation set is empty".into(),
        });
    };
    let span = SiteWindow::new(lo, hi)?;
    let margin = Window::full_line(span, horizon, speed_bound)?.margin();
    let mut recorder = ObservedStates {
        observed: observed.clone(),
        current: observed.clone(),
        samples: vec![(0.0, observed.clone())],
    };
    run_windowed(gamma, horizon, span, key, speed_bound, &mut recorder)?;
    Ok(ObservedTrajectory {
        samples: recorder.samples,
        horizon,
        margin,
        window: SiteWindow::new(span.lo - margin, span.hi + margin)?,
    })
}
