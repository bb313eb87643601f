//! Free-range event engine for the dual process.
//!
//! Each site's rate-1 clock sets its state to the OR of its two neighbors;
//! active sites additionally die at rate gamma. Only sites whose state
//! differs from that OR can change at their clock, so the engine keeps that
//! "frontier" set explicitly and thins everything else away. The active set
//! stays finite forever when the start is finite, and the representation is
//! sparse: no window is needed.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, RngCore};
use rand_distr::Exp1;

use crate::error::{Error, PartialRun, Result};
use crate::lattice::Configuration;
use crate::rng::StreamKey;

/// Dual run record: post-event configurations, both edge tracks, and the
/// extinction time when it happened before the horizon. Edges are recorded at
/// their change points and are only defined while the configuration is
/// nonempty.
#[derive(Debug, Clone)]
pub struct DualTrajectory {
    pub events: Vec<(f64, Configuration)>,
    pub right_edge: Vec<(f64, i64)>,
    pub left_edge: Vec<(f64, i64)>,
    pub extinction: Option<f64>,
    pub horizon: f64,
}

/// Indexed set with O(1) uniform choice and O(1) removal.
#[derive(Default)]
struct IndexedSet {
    items: Vec<i64>,
    pos: HashMap<i64, u32>,
}

impl IndexedSet {
    fn len(&self) -> usize {
        self.items.len()
    }

    fn insert(&mut self, site: i64) {
        if !self.pos.contains_key(&site) {
            self.pos.insert(site, self.items.len() as u32);
            self.items.push(site);
        }
    }

    fn remove(&mut self, site: i64) {
        if let Some(idx) = self.pos.remove(&site) {
            let idx = idx as usize;
            let last = *self.items.last().expect("remove from empty set");
            self.items.swap_remove(idx);
            if idx < self.items.len() {
                self.pos.insert(last, idx as u32);
            }
        }
    }

    fn get(&self, idx: usize) -> i64 {
        self.items[idx]
    }
}

struct FreeDual {
    state: BTreeSet<i64>,
    active: IndexedSet,
    frontier: IndexedSet,
    gamma: f64,
    time: f64,
}

impl FreeDual {
    fn new(init: &Configuration, gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidRate(gamma));
        }
        let mut dual = FreeDual {
            state: BTreeSet::new(),
            active: IndexedSet::default(),
            frontier: IndexedSet::default(),
            gamma,
            time: 0.0,
        };
        for site in init.iter() {
            dual.state.insert(site);
            dual.active.insert(site);
        }
        for site in init.iter() {
            for s in [site - 1, site, site + 1] {
                dual.refresh_frontier(s);
            }
        }
        Ok(dual)
    }

    fn or_of_neighbors(&self, site: i64) -> bool {
        self.state.contains(&(site - 1)) || self.state.contains(&(site + 1))
    }

    /// Re-derive whether `site` belongs to {i : state(i) != OR(neighbors)}.
    fn refresh_frontier(&mut self, site: i64) {
        let should = self.state.contains(&site) != self.or_of_neighbors(site);
        if should {
            self.frontier.insert(site);
        } else {
            self.frontier.remove(site);
        }
    }

    /// Flip `site` to the value its clock would impose and repair the
    /// bookkeeping of the three sites whose frontier membership that touches.
    fn set_state(&mut self, site: i64, value: bool) {
        if value {
            self.state.insert(site);
            self.active.insert(site);
        } else {
            self.state.remove(&site);
            self.active.remove(site);
        }
        for s in [site - 1, site, site + 1] {
            self.refresh_frontier(s);
        }
    }

    /// One event. Returns `false` when extinct (total rate zero) or when the
    /// next event falls past `horizon`.
    fn step(&mut self, stream: &mut crate::rng::Stream, horizon: f64) -> bool {
        let kf = self.frontier.len();
        let ka = self.active.len();
        // A nonempty configuration always exposes at least one frontier site
        // (one past its maximum), so rate zero is exactly extinction.
        let flip_rate = kf as f64;
        let kill_rate = self.gamma * ka as f64;
        let total = flip_rate + kill_rate;
        if total == 0.0 {
            return false;
        }
        let e: f64 = stream.sample(Exp1);
        let next = self.time + e / total;
        if next > horizon {
            self.time = horizon;
            return false;
        }
        self.time = next;
        let kill_cut = ((kill_rate / total) * 2f64.powi(64)) as u64;
        if stream.next_u64() < kill_cut {
            let idx = ((stream.next_u64() as u128 * ka as u128) >> 64) as usize;
            self.set_state(self.active.get(idx), false);
        } else {
            let idx = ((stream.next_u64() as u128 * kf as u128) >> 64) as usize;
            let site = self.frontier.get(idx);
            self.set_state(site, self.or_of_neighbors(site));
        }
        true
    }

    fn is_extinct(&self) -> bool {
        self.state.is_empty()
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(Error::InvalidHorizon(horizon));
    }
    Ok(())
}

/// Run the dual from a finite start until extinction or `horizon`, recording
/// the full trajectory and both edge tracks.
pub fn simulate_dual(
    init: &Configuration,
    gamma: f64,
    horizon: f64,
    key: StreamKey,
    cap: Option<u64>,
) -> Result<DualTrajectory> {
    check_horizon(horizon)?;
    let mut dual = FreeDual::new(init, gamma)?;
    let mut stream = key.stream();
    let cap = cap.unwrap_or(u64::MAX);
    let mut out = DualTrajectory {
        events: vec![(0.0, init.clone())],
        right_edge: Vec::new(),
        left_edge: Vec::new(),
        extinction: None,
        horizon,
    };
    if let (Some(mn), Some(mx)) = (init.min(), init.max()) {
        out.left_edge.push((0.0, mn));
        out.right_edge.push((0.0, mx));
    } else {
        out.extinction = Some(0.0);
        return Ok(out);
    }
    let mut events = 0u64;
    while dual.step(&mut stream, horizon) {
        events += 1;
        let config = Configuration::from_sites(dual.state.iter().copied());
        out.events.push((dual.time, config));
        if dual.is_extinct() {
            out.extinction = Some(dual.time);
            break;
        }
        let mn = *dual.state.first().expect("nonempty");
        let mx = *dual.state.last().expect("nonempty");
        if out.left_edge.last().map(|&(_, v)| v) != Some(mn) {
            out.left_edge.push((dual.time, mn));
        }
        if out.right_edge.last().map(|&(_, v)| v) != Some(mx) {
            out.right_edge.push((dual.time, mx));
        }
        if events >= cap {
            return Err(Error::EventCap {
                cap,
                partial: Box::new(PartialRun {
                    time: dual.time,
                    active: dual.state.iter().copied().collect(),
                    events,
                }),
            });
        }
    }
    Ok(out)
}

/// Extinction time of the dual from `init`, or `None` when it survives to the
/// horizon. Nothing is recorded; this is the tail-sampling path.
pub fn dual_extinction_time(
    init: &Configuration,
    gamma: f64,
    horizon: f64,
    key: StreamKey,
) -> Result<Option<f64>> {
    check_horizon(horizon)?;
    let mut dual = FreeDual::new(init, gamma)?;
    if dual.is_extinct() {
        return Ok(Some(0.0));
    }
    let mut stream = key.stream();
    while dual.step(&mut stream, horizon) {
        if dual.is_extinct() {
            return Ok(Some(dual.time));
        }
    }
    Ok(None)
}
