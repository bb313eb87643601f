//! Time-space diagrams of Poisson marks and the exact sweeps over them.
//!
//! A diagram carries, for every site of a finite window, its rate-1 spike
//! marks and rate-gamma kill marks on [0, horizon]. Three deterministic
//! sweeps read it:
//!
//! * [`Diagram::forward_state`]: the activity process. A spike mark at an
//!   active site resets that site and activates both neighbors; a kill mark
//!   resets its site.
//! * [`Diagram::backward_dual_state`]: the set of space-time starting points
//!   from which a target set is reachable, computed by running the event list
//!   backwards. At a spike mark at site i the new state of i is the OR of its
//!   two neighbors; a kill mark clears i.
//! * [`Diagram::dual_forward_state`]: the same OR rule applied forwards,
//!   reading the diagram as the reversed-arrow structure.
//!
//! The reachability semantics (which paths count as open) is fixed by the
//! post-jump convention: the state at an event time is the state just after
//! the event. All three sweeps and the brute-force path enumeration used in
//! tests share that convention, so their agreement is exact, not approximate.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Configuration, SiteWindow};
use crate::rng::{poisson_marks, Stream};

#[cfg(test)]
mod enumeration;
#[cfg(test)]
mod tests;

/// The two Poisson mark species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MarkKind {
    /// Rate-1 mark: forward reading resets the site and activates neighbors;
    /// dual reading sets the site to the OR of its neighbors.
    Spike,
    /// Rate-gamma mark: resets the site in every reading.
    Delta,
}

/// Sorted mark times of one species at one site.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkSequence {
    pub site: i64,
    pub kind: MarkKind,
    pub times: Vec<f64>,
}

impl MarkSequence {
    pub fn generate(
        stream: &mut Stream,
        site: i64,
        kind: MarkKind,
        rate: f64,
        horizon: f64,
    ) -> Result<Self> {
        Ok(MarkSequence { site, kind, times: poisson_marks(stream, rate, horizon)? })
    }
}

/// One mark of the diagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramEvent {
    pub time: f64,
    pub site: i64,
    pub kind: MarkKind,
}

/// All marks of a window up to a horizon, sorted by time with no duplicate
/// timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagram {
    window: SiteWindow,
    horizon: f64,
    gamma: f64,
    events: Vec<DiagramEvent>,
}

impl Diagram {
    /// Draw a fresh diagram from the stream. If two marks collide on the same
    /// timestamp (probability ~2^-53 per pair) the whole diagram is redrawn
    /// from the advanced stream, so timestamps are always strictly distinct.
    pub fn build(
        window: SiteWindow,
        horizon: f64,
        gamma: f64,
        stream: &mut Stream,
    ) -> Result<Self> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidRate(gamma));
        }
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(Error::InvalidHorizon(horizon));
        }
        for _attempt in 0..64 {
            let mut events = Vec::new();
            for site in window.sites() {
                for (kind, rate) in [(MarkKind::Spike, 1.0), (MarkKind::Delta, gamma)] {
                    let seq = MarkSequence::generate(stream, site, kind, rate, horizon)?;
                    events.extend(
                        seq.times.into_iter().map(|time| DiagramEvent { time, site, kind }),
                    );
                }
            }
            events.sort_unstable_by(|a, b| a.time.total_cmp(&b.time));
            let collision = events.windows(2).any(|w| w[0].time == w[1].time);
            if !collision {
                return Ok(Diagram { window, horizon, gamma, events });
            }
        }
        unreachable!("64 consecutive timestamp collisions");
    }

    /// Assemble from explicit events. Validates ordering, distinctness, window
    /// membership, and time bounds; used by `load` and by tests that need
    /// hand-built diagrams.
    pub fn from_events(
        window: SiteWindow,
        horizon: f64,
        gamma: f64,
        events: Vec<DiagramEvent>,
    ) -> Result<Self> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidRate(gamma));
        }
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(Error::InvalidHorizon(horizon));
        }
        for (idx, ev) in events.iter().enumerate() {
            if !window.contains(ev.site) {
                return Err(Error::SiteOutsideWindow {
                    site: ev.site,
                    lo: window.lo,
                    hi: window.hi,
                });
            }
            if !ev.time.is_finite() || ev.time < 0.0 || ev.time > horizon {
                return Err(Error::BadDump {
                    line: idx + 1,
                    reason: format!("time {} outside [0, {horizon}]", ev.time),
                });
            }
            if idx > 0 && events[idx - 1].time >= ev.time {
                return Err(Error::BadDump {
                    line: idx + 1,
                    reason: "event times must be strictly increasing".into(),
                });
            }
        }
        Ok(Diagram { window, horizon, gamma, events })
    }

    pub fn window(&self) -> SiteWindow {
        self.window
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn events(&self) -> &[DiagramEvent] {
        &self.events
    }

    fn check_init(&self, init: &Configuration) -> Result<()> {
        for site in init.iter() {
            if !self.window.contains(site) {
                return Err(Error::SiteOutsideWindow {
                    site,
                    lo: self.window.lo,
                    hi: self.window.hi,
                });
            }
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::BeyondHorizon { requested: t, horizon: self.horizon });
        }
        Ok(())
    }

    #[inline]
    fn idx(&self, site: i64) -> usize {
        (site - self.window.lo) as usize
    }

    fn pack(&self, state: &[bool]) -> Configuration {
        Configuration::from_sites(
            state
                .iter()
                .enumerate()
                .filter(|(_, on)| **on)
                .map(|(i, _)| self.window.lo + i as i64),
        )
    }

    fn unpack(&self, config: &Configuration) -> Vec<bool> {
        let mut state = vec![false; self.window.len()];
        for site in config.iter() {
            state[self.idx(site)] = true;
        }
        state
    }

    /// Activity-process state at time `t` started from `init` at time 0.
    pub fn forward_state(&self, init: &Configuration, t: f64) -> Result<Configuration> {
        self.check_init(init)?;
        self.check_time(t)?;
        let mut state = self.unpack(init);
        for ev in &self.events {
            if ev.time > t {
                break;
            }
            self.apply_forward(&mut state, ev);
        }
        Ok(self.pack(&state))
    }

    #[inline]
    fn apply_forward(&self, state: &mut [bool], ev: &DiagramEvent) {
        let i = self.idx(ev.site);
        match ev.kind {
            MarkKind::Spike => {
                if state[i] {
                    state[i] = false;
                    if ev.site > self.window.lo {
                        state[i - 1] = true;
                    }
                    if ev.site < self.window.hi {
                        state[i + 1] = true;
                    }
                }
            }
            MarkKind::Delta => state[i] = false,
        }
    }

    /// Sites at time `s - t` from which `target` at time `s` is reachable,
    /// computed by sweeping the event list backwards over [s - t, s].
    pub fn backward_dual_state(
        &self,
        target: &Configuration,
        s: f64,
        t: f64,
    ) -> Result<Configuration> {
        self.backward_sweep(target, s, t, DualRule::Or)
    }

    pub(crate) fn backward_sweep(
        &self,
        target: &Configuration,
        s: f64,
        t: f64,
        rule: DualRule,
    ) -> Result<Configuration> {
        self.check_init(target)?;
        self.check_time(s)?;
        if !(0.0..=s).contains(&t) {
            return Err(Error::BeyondHorizon { requested: t, horizon: s });
        }
        let from = s - t;
        let mut state = self.unpack(target);
        for ev in self.events.iter().rev() {
            if ev.time > s {
                continue;
            }
            if ev.time < from {
                break;
            }
            self.apply_dual(&mut state, ev, rule);
        }
        Ok(self.pack(&state))
    }

    /// Dual-process state at time `t` started from `init` at time 0, reading
    /// the diagram as the reversed-arrow structure: a spike mark at site i is
    /// i's own clock and sets i to the OR of its neighbors.
    pub fn dual_forward_state(&self, init: &Configuration, t: f64) -> Result<Configuration> {
        self.check_init(init)?;
        self.check_time(t)?;
        let mut state = self.unpack(init);
        for ev in &self.events {
            if ev.time > t {
                break;
            }
            self.apply_dual(&mut state, ev, DualRule::Or);
        }
        Ok(self.pack(&state))
    }

    #[inline]
    fn apply_dual(&self, state: &mut [bool], ev: &DiagramEvent, rule: DualRule) {
        let i = self.idx(ev.site);
        match ev.kind {
            MarkKind::Spike => {
                let left = ev.site > self.window.lo && state[i - 1];
                let right = ev.site < self.window.hi && state[i + 1];
                state[i] = rule.combine(left, right);
            }
            MarkKind::Delta => state[i] = false,
        }
    }

    /// Shift every site by `shift`; mark times are untouched.
    pub fn translate(&self, shift: i64) -> Diagram {
        Diagram {
            window: self.window.translate(shift),
            horizon: self.horizon,
            gamma: self.gamma,
            events: self
                .events
                .iter()
                .map(|ev| DiagramEvent { site: ev.site + shift, ..*ev })
                .collect(),
        }
    }

    /// Events with sites inside `sub` only; the window-clipped system on the
    /// same marks.
    pub fn restrict(&self, sub: SiteWindow) -> Diagram {
        Diagram {
            window: sub,
            horizon: self.horizon,
            gamma: self.gamma,
            events: self.events.iter().filter(|ev| sub.contains(ev.site)).copied().collect(),
        }
    }

    /// Events with times in [from, to], rebased so `from` becomes 0.
    pub fn time_slice(&self, from: f64, to: f64) -> Result<Diagram> {
        if !(0.0 <= from && from <= to && to <= self.horizon) {
            return Err(Error::CoverageGap { available: self.horizon, from, to });
        }
        Ok(Diagram {
            window: self.window,
            horizon: to - from,
            gamma: self.gamma,
            events: self
                .events
                .iter()
                .filter(|ev| from <= ev.time && ev.time <= to)
                .map(|ev| DiagramEvent { time: ev.time - from, ..*ev })
                .collect(),
        })
    }

    /// Time-reversed diagram: a mark at time u moves to horizon - u. Running
    /// the dual forwards on the mirror is the same computation as running the
    /// backward sweep on the original.
    pub fn mirrored(&self) -> Diagram {
        let mut events: Vec<DiagramEvent> = self
            .events
            .iter()
            .map(|ev| DiagramEvent { time: self.horizon - ev.time, ..*ev })
            .collect();
        events.reverse();
        Diagram {
            window: self.window,
            horizon: self.horizon,
            gamma: self.gamma,
            events,
        }
    }

    /// Line-oriented text form: header comments with window, horizon, and
    /// gamma, then one `site time kind` line per event in time order. Times
    /// are printed shortest-roundtrip, so `load(dump(d)) == d` exactly.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# window {} {}", self.window.lo, self.window.hi);
        let _ = writeln!(out, "# horizon {}", self.horizon);
        let _ = writeln!(out, "# gamma {}", self.gamma);
        for ev in &self.events {
            let kind = match ev.kind {
                MarkKind::Spike => "spike",
                MarkKind::Delta => "delta",
            };
            let _ = writeln!(out, "{} {} {}", ev.site, ev.time, kind);
        }
        out
    }

    pub fn load(text: &str) -> Result<Diagram> {
        let bad = |line: usize, reason: &str| Error::BadDump { line, reason: reason.into() };
        let mut window = None;
        let mut horizon = None;
        let mut gamma = None;
        let mut events = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let s = raw.trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('#') {
                let mut parts = rest.split_whitespace();
                match parts.next() {
                    Some("window") => {
                        let lo = parse(parts.next(), line, "window lo")?;
                        let hi = parse(parts.next(), line, "window hi")?;
                        window = Some(SiteWindow::new(lo, hi)?);
                    }
                    Some("horizon") => horizon = Some(parse(parts.next(), line, "horizon")?),
                    Some("gamma") => gamma = Some(parse(parts.next(), line, "gamma")?),
                    _ => return Err(bad(line, "unknown header")),
                }
                continue;
            }
            let mut parts = s.split_whitespace();
            let site: i64 = parse(parts.next(), line, "site")?;
            let time: f64 = parse(parts.next(), line, "time")?;
            let kind = match parts.next() {
                Some("spike") => MarkKind::Spike,
                Some("delta") => MarkKind::Delta,
                _ => return Err(bad(line, "kind must be `spike` or `delta`")),
            };
            if parts.next().is_some() {
                return Err(bad(line, "trailing tokens"));
            }
            events.push(DiagramEvent { time, site, kind });
        }
        let window = window.ok_or_else(|| bad(0, "missing `# window` header"))?;
        let horizon = horizon.ok_or_else(|| bad(0, "missing `# horizon` header"))?;
        let gamma = gamma.ok_or_else(|| bad(0, "missing `# gamma` header"))?;
        Diagram::from_events(window, horizon, gamma, events)
    }
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::BadDump {
        line,
        reason: format!("missing or malformed {what}"),
    })
}

/// How a spike mark combines the two neighbor states in the dual sweeps. The
/// construction uses OR; the AND variant exists so the test suite can prove
/// the duality checks have teeth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DualRule {
    Or,
    #[allow(dead_code)]
    And,
}

impl DualRule {
    #[inline]
    fn combine(self, left: bool, right: bool) -> bool {
        match self {
            DualRule::Or => left || right,
            DualRule::And => left && right,
        }
    }
}
