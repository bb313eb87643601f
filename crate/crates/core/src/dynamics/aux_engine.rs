//! Array-backed event engines for the finite activity process and its
//! membrane twin.
//!
//! Only active sites carry clocks (each at rate 1+gamma); a ring is a spike
//! with probability 1/(1+gamma), a leak otherwise. Dropping the clocks of
//! inactive sites is exact thinning: their leak would not change state and
//! their spike term is switched off. The per-event cost is O(1): an active
//! list plus a position index, swap-removal, no allocation.

use rand::{Rng, RngCore};
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::graphical::MarkKind;
use crate::lattice::{Configuration, SiteWindow};
use crate::rng::Stream;

use super::{EventKind, MembraneState};

const NO_POS: u32 = u32::MAX;

/// Observer of applied events; the engine reference carries the post-event
/// state. Implementations live next to the runs that need them.
pub(crate) trait AuxObserver {
    fn on_event(&mut self, time: f64, site: i64, kind: EventKind, engine: &AuxEngine);
}

/// Observer that ignores everything (the bare extinction-time path).
pub(crate) struct NullObserver;

impl AuxObserver for NullObserver {
    #[inline]
    fn on_event(&mut self, _: f64, _: i64, _: EventKind, _: &AuxEngine) {}
}

/// Event engine for the activity process on a finite window.
pub(crate) struct AuxEngine {
    lo: i64,
    width: usize,
    /// 1 + gamma: total clock rate of one active site.
    clock_rate: f64,
    /// A u64 draw at or below this is a spike. Exact for gamma = 0; for
    /// gamma > 0 the rounding bias is below 2^-52 relative, far under every
    /// statistical tolerance in the crate.
    spike_cut: u64,
    active: Vec<u32>,
    pos: Vec<u32>,
    time: f64,
}

impl AuxEngine {
    pub fn new(window: SiteWindow, init: &Configuration, gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidRate(gamma));
        }
        let width = window.len();
        let mut engine = AuxEngine {
            lo: window.lo,
            width,
            clock_rate: 1.0 + gamma,
            spike_cut: if gamma == 0.0 {
                u64::MAX
            } else {
                (2f64.powi(64) / (1.0 + gamma)) as u64
            },
            active: Vec::with_capacity(width),
            pos: vec![NO_POS; width],
            time: 0.0,
        };
        for site in init.iter() {
            if !window.contains(site) {
                return Err(Error::SiteOutsideWindow { site, lo: window.lo, hi: window.hi });
            }
            engine.activate((site - window.lo) as usize);
        }
        Ok(engine)
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.time
    }

    #[inline]
    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    /// Total exit rate of the current state: |active| * (1 + gamma).
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn exit_rate(&self) -> f64 {
        self.active.len() as f64 * self.clock_rate
    }

    #[inline]
    pub fn is_active(&self, site: i64) -> bool {
        let idx = site - self.lo;
        idx >= 0 && (idx as usize) < self.width && self.pos[idx as usize] != NO_POS
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::from_sites(self.active.iter().map(|&l| self.lo + l as i64))
    }

    /// Draw and apply one event; `false` means the state was already empty.
    #[inline]
    pub fn step<O: AuxObserver>(&mut self, stream: &mut Stream, obs: &mut O) -> bool {
        let k = self.active.len();
        if k == 0 {
            return false;
        }
        let e: f64 = stream.sample(Exp1);
        self.time += e / (k as f64 * self.clock_rate);
        self.fire(stream, obs);
        true
    }

    /// Like [`AuxEngine::step`] but discards any event past `horizon` and
    /// parks the clock there; `false` once the horizon is reached or the
    /// state is empty. Discarding is sound by memorylessness: nothing after
    /// the horizon is ever reported. A dead system keeps its clock at the
    /// last event, so extinction times survive repeated bounded calls.
    #[inline]
    pub fn step_bounded<O: AuxObserver>(
        &mut self,
        stream: &mut Stream,
        horizon: f64,
        obs: &mut O,
    ) -> bool {
        let k = self.active.len();
        if k == 0 {
            return false;
        }
        if self.time >= horizon {
            self.time = horizon;
            return false;
        }
        let e: f64 = stream.sample(Exp1);
        let next = self.time + e / (k as f64 * self.clock_rate);
        if next > horizon {
            self.time = horizon;
            return false;
        }
        self.time = next;
        self.fire(stream, obs);
        true
    }

    /// Site selection (uniform among active) and outcome draw shared by the
    /// stepping variants.
    #[inline]
    fn fire<O: AuxObserver>(&mut self, stream: &mut Stream, obs: &mut O) {
        let k = self.active.len();
        let idx = ((stream.next_u64() as u128 * k as u128) >> 64) as usize;
        let local = self.active[idx] as usize;
        let kind = if stream.next_u64() <= self.spike_cut {
            self.apply_spike(idx);
            EventKind::Spike
        } else {
            self.deactivate_at(idx);
            EventKind::Leak
        };
        obs.on_event(self.time, self.lo + local as i64, kind, self);
    }

    /// Apply one graphical mark at an absolute time; marks at inactive sites
    /// are inert. This is the replay path: it must visit states in exactly
    /// the order the forward sweep of the diagram does.
    pub fn apply_mark(&mut self, site: i64, kind: MarkKind, time: f64) {
        self.time = time;
        let local = (site - self.lo) as usize;
        if self.pos[local] == NO_POS {
            return;
        }
        let idx = self.pos[local] as usize;
        match kind {
            MarkKind::Spike => self.apply_spike(idx),
            MarkKind::Delta => self.deactivate_at(idx),
        }
    }

    /// Spike of the active site at `active[idx]`: reset self, activate the
    /// in-window neighbors.
    #[inline]
    fn apply_spike(&mut self, idx: usize) {
        let local = self.active[idx] as usize;
        self.deactivate_at(idx);
        if local > 0 {
            self.activate(local - 1);
        }
        if local + 1 < self.width {
            self.activate(local + 1);
        }
    }

    #[inline]
    fn activate(&mut self, local: usize) {
        if self.pos[local] == NO_POS {
            self.pos[local] = self.active.len() as u32;
            self.active.push(local as u32);
        }
    }

    #[inline]
    fn deactivate_at(&mut self, idx: usize) {
        let local = self.active[idx] as usize;
        let last = *self.active.last().expect("deactivate on empty active list");
        self.active.swap_remove(idx);
        if idx < self.active.len() {
            self.pos[last as usize] = idx as u32;
        }
        self.pos[local] = NO_POS;
    }
}

/// Membrane-potential engine. Owns an [`AuxEngine`] whose active list is, by
/// construction, `{i : X_i > 0}`; stepping consumes randomness in exactly the
/// same order, which makes the indicator coupling bit-exact on a shared key.
pub(crate) struct MembraneEngine {
    core: AuxEngine,
    potentials: Vec<u32>,
}

impl MembraneEngine {
    pub fn new(init: &MembraneState, gamma: f64) -> Result<Self> {
        let window = init.window();
        let active = init.indicator();
        Ok(MembraneEngine {
            core: AuxEngine::new(window, &active, gamma)?,
            potentials: window.sites().map(|s| init.potential(s)).collect(),
        })
    }

    pub fn indicator(&self) -> Configuration {
        self.core.configuration()
    }

    pub fn into_state(self) -> MembraneState {
        let window = SiteWindow::new(self.core.lo, self.core.lo + self.core.width as i64 - 1)
            .expect("engine window is valid");
        MembraneState::new(window, self.potentials).expect("length preserved")
    }

    /// One bounded step; same contract as [`AuxEngine::step_bounded`].
    pub fn step_bounded<O: AuxObserver>(
        &mut self,
        stream: &mut Stream,
        horizon: f64,
        obs: &mut O,
    ) -> bool {
        let k = self.core.active.len();
        if k == 0 {
            return false;
        }
        if self.core.time >= horizon {
            self.core.time = horizon;
            return false;
        }
        let e: f64 = stream.sample(Exp1);
        let next = self.core.time + e / (k as f64 * self.core.clock_rate);
        if next > horizon {
            self.core.time = horizon;
            return false;
        }
        self.core.time = next;
        let idx = ((stream.next_u64() as u128 * k as u128) >> 64) as usize;
        let local = self.core.active[idx] as usize;
        let kind = if stream.next_u64() <= self.core.spike_cut {
            self.spike(idx, local);
            EventKind::Spike
        } else {
            self.potentials[local] = 0;
            self.core.deactivate_at(idx);
            EventKind::Leak
        };
        obs.on_event(self.core.time, self.core.lo + local as i64, kind, &self.core);
        true
    }

    /// Replay path; see [`AuxEngine::apply_mark`]. Marks at sites with zero
    /// potential are inert.
    pub fn apply_kind(&mut self, site: i64, kind: EventKind, time: f64) {
        self.core.time = time;
        let local = (site - self.core.lo) as usize;
        if self.core.pos[local] == NO_POS {
            return;
        }
        let idx = self.core.pos[local] as usize;
        match kind {
            EventKind::Spike => self.spike(idx, local),
            EventKind::Leak => {
                self.potentials[local] = 0;
                self.core.deactivate_at(idx);
            }
        }
    }

    /// Spike: own potential resets, each in-window neighbor gains one (and
    /// thereby becomes active if it was at zero).
    fn spike(&mut self, idx: usize, local: usize) {
        self.potentials[local] = 0;
        self.core.apply_spike(idx);
        if local > 0 {
            self.potentials[local - 1] += 1;
        }
        if local + 1 < self.core.width {
            self.potentials[local + 1] += 1;
        }
    }
}
