//! Event-driven simulators: the finite activity process, its membrane-potential
//! twin, the dual process (free-range, half-line, and coupled variants), and
//! windowed stand-ins for the infinite system.
//!
//! All engines follow the same clock discipline: only sites that can change
//! state carry clocks, so dropped events are no-ops and the law is unchanged.
//! Every simulator is a pure function of its `StreamKey`.

mod aux_engine;
mod dual;
mod sweep;
mod windowed;


use serde::Serialize;

use crate::error::{Error, PartialRun, Result};
use crate::graphical::{Diagram, MarkKind};
use crate::lattice::{Configuration, SiteWindow};
use crate::rng::{Stream, StreamKey};

pub(crate) use aux_engine::{AuxEngine, AuxObserver, NullObserver};
pub use dual::{simulate_dual, dual_extinction_time, DualTrajectory};
pub use sweep::{
    simulate_dual_coupled, simulate_dual_halfline_edge, simulate_dual_survival_ladder,
    CoupledEdgeTracks, EdgeTrack,
};
pub use windowed::{simulate_windowed_infinite, ObservedTrajectory};

/// Default light-cone rate used to size truncation margins. Arrows fire at
/// rate 1 per side, so influence rarely travels further than ~2 sites per unit
/// time; 4 doubles that. Statistical experiments inherit this default; the
/// zero-tolerance pathwise tests pick much larger margins explicitly.
pub const DEFAULT_SPEED_BOUND: f64 = 4.0;

/// What a simulation window stands in for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    /// The finite system itself; no approximation, no margin.
    Finite,
    /// Truncated stand-in for a half line extending right, `[origin, +inf)`.
    HalfLineRight,
    /// Truncated stand-in for a half line extending left, `(-inf, origin]`.
    HalfLineLeft,
    /// Light-cone window standing in for the full line.
    FullLine,
}

/// A concrete simulation window together with the truncation margin that
/// justifies reading it as an approximation of an infinite region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    kind: WindowKind,
    bounds: SiteWindow,
    margin: i64,
}

impl Window {
    /// The finite system on `[-n, n]`.
    pub fn finite(n: i64) -> Result<Self> {
        if n < 0 {
            return Err(Error::InvalidWindow { lo: -n, hi: n });
        }
        Ok(Window { kind: WindowKind::Finite, bounds: SiteWindow::centered(n), margin: 0 })
    }

    /// Stand-in for `(-inf, origin]` over `[0, horizon]`: bounds reach
    /// `margin` sites beyond the origin on both sides, with
    /// `margin = ceil(speed_bound * horizon)`.
    pub fn half_line_left(origin: i64, horizon: f64, speed_bound: f64) -> Result<Self> {
        let margin = required_margin(horizon, speed_bound)?;
        Ok(Window {
            kind: WindowKind::HalfLineLeft,
            bounds: SiteWindow::new(origin - margin, origin + margin)?,
            margin,
        })
    }

    /// Stand-in for `[origin, +inf)`; mirror of [`Window::half_line_left`].
    pub fn half_line_right(origin: i64, horizon: f64, speed_bound: f64) -> Result<Self> {
        let margin = required_margin(horizon, speed_bound)?;
        Ok(Window {
            kind: WindowKind::HalfLineRight,
            bounds: SiteWindow::new(origin - margin, origin + margin)?,
            margin,
        })
    }

    /// Stand-in for the full line around a finite observation span.
    pub fn full_line(observed: SiteWindow, horizon: f64, speed_bound: f64) -> Result<Self> {
        let margin = required_margin(horizon, speed_bound)?;
        Ok(Window {
            kind: WindowKind::FullLine,
            bounds: SiteWindow::new(observed.lo - margin, observed.hi + margin)?,
            margin,
        })
    }

    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn bounds(&self) -> SiteWindow {
        self.bounds
    }

    pub fn margin(&self) -> i64 {
        self.margin
    }
}

/// margin >= ceil(speed_bound * horizon), the light-cone invariant for every
/// approximating window kind.
fn required_margin(horizon: f64, speed_bound: f64) -> Result<i64> {
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(Error::InvalidHorizon(horizon));
    }
    if !speed_bound.is_finite() || speed_bound < 0.0 {
        return Err(Error::InvalidRate(speed_bound));
    }
    Ok((speed_bound * horizon).ceil() as i64)
}

/// Which of the two clock outcomes fired at an active site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    /// Reset self, activate both in-window neighbors.
    Spike,
    /// Reset self.
    Leak,
}

/// One applied event, in the shape the JSON-lines trajectory export uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryEvent {
    pub t: f64,
    pub site: i64,
    pub kind: EventKind,
    /// Change in the number of active sites caused by this event.
    pub state_delta: i32,
}

/// Per-site spike timestamps of one run, each strictly inside the run span.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeLog {
    window: SiteWindow,
    times: Vec<Vec<f64>>,
}

impl SpikeLog {
    pub(crate) fn new(window: SiteWindow) -> Self {
        SpikeLog { window, times: vec![Vec::new(); window.len()] }
    }

    pub(crate) fn push(&mut self, site: i64, time: f64) {
        self.times[(site - self.window.lo) as usize].push(time);
    }

    pub fn window(&self) -> SiteWindow {
        self.window
    }

    /// Spike instants of one site, ascending.
    pub fn site_times(&self, site: i64) -> &[f64] {
        &self.times[(site - self.window.lo) as usize]
    }

    /// Number of spikes of `site` inside `[from, to]`.
    pub fn count_in(&self, site: i64, from: f64, to: f64) -> usize {
        let ts = self.site_times(site);
        let a = ts.partition_point(|&t| t < from);
        let b = ts.partition_point(|&t| t <= to);
        b - a
    }

    pub fn total(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }

    /// Append `replica,site,time` CSV rows (no header).
    pub fn write_csv(&self, replica: u64, out: &mut String) {
        use std::fmt::Write;
        for site in self.window.sites() {
            for &t in self.site_times(site) {
                writeln!(out, "{replica},{site},{t}").expect("string write");
            }
        }
    }
}

/// Membrane potentials on a window; the activity indicator `X > 0` is the
/// coupled activity configuration at all times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembraneState {
    window: SiteWindow,
    potentials: Vec<u32>,
}

impl MembraneState {
    pub fn new(window: SiteWindow, potentials: Vec<u32>) -> Result<Self> {
        if potentials.len() != window.len() {
            return Err(Error::InvalidConfig {
                field: "potentials",
                reason: format!(
                    "{} values for a window of {} sites",
                    potentials.len(),
                    window.len()
                ),
            });
        }
        Ok(MembraneState { window, potentials })
    }

    /// Every site at the same level.
    pub fn uniform(window: SiteWindow, level: u32) -> Self {
        MembraneState { window, potentials: vec![level; window.len()] }
    }

    pub fn window(&self) -> SiteWindow {
        self.window
    }

    pub fn potential(&self, site: i64) -> u32 {
        self.potentials[(site - self.window.lo) as usize]
    }

    /// The activity configuration `{i : X_i > 0}`.
    pub fn indicator(&self) -> Configuration {
        Configuration::from_sites(
            self.window.sites().filter(|&s| self.potential(s) > 0),
        )
    }
}

/// Outcome of a single activity-process step.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    /// The configuration was empty; nothing can ever happen again.
    Extinct,
    Event {
        /// Configuration after the event.
        state: Configuration,
        site: i64,
        kind: EventKind,
        /// Exponential holding time that elapsed before the event.
        dwell: f64,
    },
}

/// One event of the finite activity process on `window`: the holding time is
/// Exponential(k(1+gamma)) with k active sites, the site is uniform among the
/// active ones, and the event is a spike with probability 1/(1+gamma).
pub fn step_auxiliary(
    window: SiteWindow,
    config: &Configuration,
    gamma: f64,
    stream: &mut Stream,
) -> Result<StepOutcome> {
    let mut engine = AuxEngine::new(window, config, gamma)?;
    let mut last = LastEvent::default();
    if !engine.step(stream, &mut last) {
        return Ok(StepOutcome::Extinct);
    }
    // The engine clock started at zero, so its post-event time IS the dwell.
    let (dwell, site, kind) = last.0.expect("step applied an event");
    Ok(StepOutcome::Event { state: engine.configuration(), site, kind, dwell })
}

#[derive(Default)]
struct LastEvent(Option<(f64, i64, EventKind)>);

impl AuxObserver for LastEvent {
    fn on_event(&mut self, time: f64, site: i64, kind: EventKind, _engine: &AuxEngine) {
        self.0 = Some((time, site, kind));
    }
}

struct SpikeLogObserver(SpikeLog);

impl AuxObserver for SpikeLogObserver {
    fn on_event(&mut self, time: f64, site: i64, kind: EventKind, _engine: &AuxEngine) {
        if kind == EventKind::Spike {
            self.0.push(site, time);
        }
    }
}

struct EventListObserver {
    events: Vec<TrajectoryEvent>,
    prev_active: i32,
}

impl AuxObserver for EventListObserver {
    fn on_event(&mut self, time: f64, site: i64, kind: EventKind, engine: &AuxEngine) {
        let now = engine.active_count() as i32;
        self.events.push(TrajectoryEvent {
            t: time,
            site,
            kind,
            state_delta: now - self.prev_active,
        });
        self.prev_active = now;
    }
}

fn run_to_extinction<O: AuxObserver>(
    engine: &mut AuxEngine,
    stream: &mut Stream,
    cap: Option<u64>,
    obs: &mut O,
) -> Result<f64> {
    let cap = cap.unwrap_or(u64::MAX);
    let mut events = 0u64;
    while engine.step(stream, obs) {
        events += 1;
        if events >= cap && engine.active_count() > 0 {
            return Err(Error::EventCap {
                cap,
                partial: Box::new(PartialRun {
                    time: engine.time(),
                    active: engine.configuration().iter().collect(),
                    events,
                }),
            });
        }
    }
    Ok(engine.time())
}

/// Run the finite activity process on `[-n, n]` from `init` until the empty
/// configuration absorbs it. Returns the extinction time and the spike log.
/// `cap` bounds the number of events; hitting it returns [`Error::EventCap`]
/// with the partial state.
pub fn simulate_extinction(
    n: i64,
    init: &Configuration,
    gamma: f64,
    key: StreamKey,
    cap: Option<u64>,
) -> Result<(f64, SpikeLog)> {
    let window = Window::finite(n)?.bounds();
    let mut engine = AuxEngine::new(window, init, gamma)?;
    let mut obs = SpikeLogObserver(SpikeLog::new(window));
    let tau = run_to_extinction(&mut engine, &mut key.stream(), cap, &mut obs)?;
    Ok((tau, obs.0))
}

/// [`simulate_extinction`] with the full event list instead of the spike log,
/// in the shape the JSON-lines export wants.
pub fn simulate_extinction_events(
    n: i64,
    init: &Configuration,
    gamma: f64,
    key: StreamKey,
    cap: Option<u64>,
) -> Result<(f64, Vec<TrajectoryEvent>)> {
    let window = Window::finite(n)?.bounds();
    let mut engine = AuxEngine::new(window, init, gamma)?;
    let mut obs =
        EventListObserver { events: Vec::new(), prev_active: engine.active_count() as i32 };
    let tau = run_to_extinction(&mut engine, &mut key.stream(), cap, &mut obs)?;
    Ok((tau, obs.events))
}

/// Extinction time of the all-active finite system, nothing logged. This is
/// the hot path: the replica studies burn ~1e9 events per call at the larger
/// sizes, so it allocates nothing per event.
pub fn sample_extinction_time(
    n: i64,
    gamma: f64,
    key: StreamKey,
    cap: Option<u64>,
) -> Result<f64> {
    let window = Window::finite(n)?.bounds();
    let mut engine = AuxEngine::new(window, &Configuration::full(window), gamma)?;
    run_to_extinction(&mut engine, &mut key.stream(), cap, &mut NullObserver)
}

/// An extinction time observed up to a deadline. When `censored` is set the
/// system was still alive at `value` (= the deadline), so `value` is a valid
/// lower bound for the true extinction time and `E[min(tau, cap)] <= E[tau]`
/// makes censored means honest lower bounds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CappedSample {
    pub value: f64,
    pub censored: bool,
}

/// [`sample_extinction_time`] truncated at `time_cap` instead of an event
/// budget, for the sizes whose mean extinction time is out of desk reach.
pub fn sample_extinction_capped(
    n: i64,
    gamma: f64,
    key: StreamKey,
    time_cap: f64,
) -> Result<CappedSample> {
    if !time_cap.is_finite() || time_cap < 0.0 {
        return Err(Error::InvalidHorizon(time_cap));
    }
    let window = Window::finite(n)?.bounds();
    let mut engine = AuxEngine::new(window, &Configuration::full(window), gamma)?;
    let mut stream = key.stream();
    while engine.step_bounded(&mut stream, time_cap, &mut NullObserver) {}
    let censored = engine.active_count() > 0;
    Ok(CappedSample { value: if censored { time_cap } else { engine.time() }, censored })
}

/// One finite-window run stopped at extinction or `horizon`, whichever comes
/// first, with every spike on record.
#[derive(Debug, Clone)]
pub struct FiniteRun {
    pub log: SpikeLog,
    /// Still active when the horizon arrived.
    pub survived: bool,
    /// Extinction time if `!survived`, the horizon otherwise.
    pub end_time: f64,
}

/// Run the finite activity system and keep its spike log, stopping at the
/// horizon; the spike-rate studies read their counts from the log.
pub fn simulate_finite_spikes(
    n: i64,
    init: &Configuration,
    gamma: f64,
    horizon: f64,
    key: StreamKey,
) -> Result<FiniteRun> {
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(Error::InvalidHorizon(horizon));
    }
    let window = Window::finite(n)?.bounds();
    let mut engine = AuxEngine::new(window, init, gamma)?;
    let mut obs = SpikeLogObserver(SpikeLog::new(window));
    let mut stream = key.stream();
    while engine.step_bounded(&mut stream, horizon, &mut obs) {}
    let survived = engine.active_count() > 0;
    Ok(FiniteRun { log: obs.0, survived, end_time: if survived { horizon } else { engine.time() } })
}

/// Run the membrane model to `horizon`: sites with positive potential spike at
/// rate 1 (reset self, raise both in-window neighbors by one) and leak at rate
/// gamma (reset self). Consumes randomness in exactly the order of the
/// activity engine, so the indicator coupling is bit-exact on a shared key.
pub fn simulate_membrane(
    init: &MembraneState,
    gamma: f64,
    horizon: f64,
    key: StreamKey,
) -> Result<(MembraneState, SpikeLog)> {
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(Error::InvalidHorizon(horizon));
    }
    let window = init.window();
    let mut engine = aux_engine::MembraneEngine::new(init, gamma)?;
    let mut obs = SpikeLogObserver(SpikeLog::new(window));
    let mut stream = key.stream();
    while engine.step_bounded(&mut stream, horizon, &mut obs) {}
    Ok((engine.into_state(), obs.0))
}

/// Drive the activity engine with the marks of a prebuilt diagram instead of
/// fresh randomness; returns the post-event configuration at every mark time
/// (inert marks repeat the previous configuration).
pub fn replay_auxiliary(
    diagram: &Diagram,
    init: &Configuration,
) -> Result<Vec<(f64, Configuration)>> {
    let mut engine = AuxEngine::new(diagram.window(), init, diagram.gamma())?;
    let mut states = Vec::with_capacity(diagram.events().len());
    for ev in diagram.events() {
        engine.apply_mark(ev.site, ev.kind, ev.time);
        states.push((ev.time, engine.configuration()));
    }
    Ok(states)
}

/// Replay a diagram through the membrane model; returns the indicator
/// configuration at every mark time plus the final potentials.
pub fn replay_membrane(
    diagram: &Diagram,
    init: &MembraneState,
) -> Result<(Vec<(f64, Configuration)>, MembraneState)> {
    if init.window() != diagram.window() {
        return Err(Error::InvalidConfig {
            field: "init",
            reason: format!(
                "membrane window {} differs from diagram window {}",
                init.window(),
                diagram.window()
            ),
        });
    }
    let mut engine = aux_engine::MembraneEngine::new(init, diagram.gamma())?;
    let mut states = Vec::with_capacity(diagram.events().len());
    for ev in diagram.events() {
        let kind = match ev.kind {
            MarkKind::Spike => EventKind::Spike,
            MarkKind::Delta => EventKind::Leak,
        };
        engine.apply_kind(ev.site, kind, ev.time);
        states.push((ev.time, engine.indicator()));
    }
    Ok((states, engine.into_state()))
}
