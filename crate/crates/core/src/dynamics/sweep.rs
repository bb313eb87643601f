//! Superposition sweep for half-line and coupled dual runs.
//!
//! Every site of a truncated window carries a flip clock (rate 1) plus one
//! kill clock per layer; events are generated slab by slab, globally
//! time-ordered, and applied to every track. Tracks differ only in how many
//! kill layers they accept, so two tracks fed the same events are coupled by
//! construction: the event stream IS the shared marks. Thinning is deliberately
//! not attempted here — no-op events are cheap and exact sharing is the point.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::Result;
use crate::graphical::{Diagram, MarkKind};
use crate::lattice::{Configuration, SiteWindow};
use crate::rng::{Stream, StreamKey, StreamRole};

use super::Window;

/// Right-edge history of one dual run on a truncated window.
#[derive(Debug, Clone)]
pub struct EdgeTrack {
    /// Change points `(time, edge)`, starting at `(0, origin)`.
    pub samples: Vec<(f64, i64)>,
    pub final_edge: i64,
    pub horizon: f64,
    /// Truncation margin of the window the run used.
    pub margin: i64,
    /// Set when any state change landed in the innermost quarter of either
    /// margin; the run should be repeated with a larger `speed_bound`.
    pub boundary_flagged: bool,
}

impl EdgeTrack {
    /// Edge position at `t` (piecewise constant, right-continuous).
    pub fn at(&self, t: f64) -> i64 {
        let idx = self.samples.partition_point(|&(s, _)| s <= t);
        self.samples[idx.saturating_sub(1)].1
    }

    /// Average displacement rate over the whole run.
    pub fn mean_speed(&self) -> f64 {
        let (t0, x0) = self.samples[0];
        (self.final_edge - x0) as f64 / (self.horizon - t0)
    }
}

/// Edge tracks of a coupled pair driven by identical flip and base-kill marks;
/// the perturbed track additionally accepts the extra kill layer.
#[derive(Debug, Clone)]
pub struct CoupledEdgeTracks {
    pub base: EdgeTrack,
    pub perturbed: EdgeTrack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SweepEventKind {
    Flip,
    Kill(u8),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SweepEvent {
    pub time: f64,
    pub site: i64,
    pub kind: SweepEventKind,
}

/// One dual configuration evolving under swept events.
pub(crate) struct SweepTrack {
    window: SiteWindow,
    state: Vec<bool>,
    active_count: usize,
    /// Site `window.lo - 1` is treated as permanently active (the truncated
    /// remainder of a left half line).
    pinned_left: bool,
    /// Kill layers this track accepts: `Kill(layer)` applies iff layer < layers.
    layers: u8,
    right: Option<i64>,
    left: Option<i64>,
    record_edges: bool,
    edge_record: Vec<(f64, i64)>,
    extinction: Option<f64>,
    /// Distance from either window bound within which a state change trips
    /// the boundary flag.
    quarter: i64,
    boundary_flagged: bool,
}

impl SweepTrack {
    pub fn new(
        window: SiteWindow,
        init: &Configuration,
        pinned_left: bool,
        layers: u8,
        margin: i64,
    ) -> Self {
        let mut state = vec![false; window.len()];
        let mut active_count = 0;
        for site in init.iter() {
            let idx = (site - window.lo) as usize;
            if !state[idx] {
                state[idx] = true;
                active_count += 1;
            }
        }
        let right = init.max();
        let left = init.min();
        let mut track = SweepTrack {
            window,
            state,
            active_count,
            pinned_left,
            layers,
            right,
            left,
            record_edges: false,
            edge_record: Vec::new(),
            extinction: None,
            quarter: (margin / 4).max(1),
            boundary_flagged: false,
        };
        if active_count == 0 && !pinned_left {
            track.extinction = Some(0.0);
        }
        track
    }

    pub fn recording_edges(mut self) -> Self {
        self.record_edges = true;
        self.edge_record.push((0.0, self.right_edge()));
        self
    }

    fn local(&self, site: i64) -> usize {
        (site - self.window.lo) as usize
    }

    /// Current right edge; for a pinned track this falls back to the boundary
    /// site when the window is empty (the half line itself never is).
    pub fn right_edge(&self) -> i64 {
        self.right.unwrap_or(self.window.lo - 1)
    }

    pub fn extinction(&self) -> Option<f64> {
        self.extinction
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub fn is_alive(&self) -> bool {
        self.active_count > 0 || self.pinned_left
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub fn configuration(&self) -> Configuration {
        Configuration::from_sites(
            self.window.sites().filter(|&s| self.state[self.local(s)]),
        )
    }

    fn or_of_neighbors(&self, site: i64) -> bool {
        let left = if site == self.window.lo {
            self.pinned_left
        } else {
            self.state[self.local(site - 1)]
        };
        if left {
            return true;
        }
        if site == self.window.hi {
            false
        } else {
            self.state[self.local(site + 1)]
        }
    }

    #[inline]
    pub fn apply(&mut self, ev: &SweepEvent) {
        let target = match ev.kind {
            SweepEventKind::Kill(layer) => {
                if layer >= self.layers || !self.state[self.local(ev.site)] {
                    return;
                }
                false
            }
            SweepEventKind::Flip => {
                let target = self.or_of_neighbors(ev.site);
                if target == self.state[self.local(ev.site)] {
                    return;
                }
                target
            }
        };
        self.set_site(ev.site, target, ev.time);
    }

    fn set_site(&mut self, site: i64, value: bool, time: f64) {
        let idx = self.local(site);
        self.state[idx] = value;
        if value {
            self.active_count += 1;
            if self.right.is_none_or(|r| site > r) {
                self.right = Some(site);
            }
            if self.left.is_none_or(|l| site < l) {
                self.left = Some(site);
            }
        } else {
            self.active_count -= 1;
            if self.active_count == 0 {
                self.right = None;
                self.left = None;
                if !self.pinned_left && self.extinction.is_none() {
                    self.extinction = Some(time);
                }
            } else {
                if self.right == Some(site) {
                    let mut r = site - 1;
                    while !self.state[self.local(r)] {
                        r -= 1;
                    }
                    self.right = Some(r);
                }
                if self.left == Some(site) {
                    let mut l = site + 1;
                    while !self.state[self.local(l)] {
                        l += 1;
                    }
                    self.left = Some(l);
                }
            }
        }
        // The truncation is trustworthy only while the edge keeps its
        // distance from both bounds; a pinned boundary radiates frozen-active
        // influence and the far bound cannot be crossed at all.
        if let Some(r) = self.right {
            if r - self.window.lo < self.quarter || self.window.hi - r < self.quarter {
                self.boundary_flagged = true;
            }
        }
        if self.record_edges {
            let edge = self.right_edge();
            if self.edge_record.last().map(|&(_, e)| e) != Some(edge) {
                self.edge_record.push((time, edge));
            }
        }
    }

    fn into_edge_track(self, horizon: f64, margin: i64) -> EdgeTrack {
        let final_edge = self.right_edge();
        EdgeTrack {
            samples: self.edge_record,
            final_edge,
            horizon,
            margin,
            boundary_flagged: self.boundary_flagged,
        }
    }
}

/// Resumable per-site next-arrival times: one flip stream plus one stream per
/// kill layer. Keeping the layers on disjoint streams means adding a layer
/// (or changing its rate) never shifts any other layer's draws, which is what
/// makes cross-run mark sharing exact.
struct MarkWells {
    window: SiteWindow,
    flip_next: Vec<f64>,
    flip_stream: Stream,
    kill_rates: Vec<f64>,
    kill_next: Vec<Vec<f64>>,
    kill_streams: Vec<Stream>,
}

impl MarkWells {
    fn new(window: SiteWindow, kill_rates: Vec<f64>, key: StreamKey) -> Self {
        let mut flip_stream = StreamKey { role: StreamRole::DualMarks, ..key }.stream();
        let width = window.len();
        let flip_next: Vec<f64> =
            (0..width).map(|_| flip_stream.sample::<f64, _>(Exp1)).collect();
        let mut kill_streams: Vec<Stream> = (0..kill_rates.len())
            .map(|k| StreamKey { role: StreamRole::KillLayer(k as u16), ..key }.stream())
            .collect();
        let kill_next: Vec<Vec<f64>> = kill_rates
            .iter()
            .zip(kill_streams.iter_mut())
            .map(|(&rate, stream)| {
                (0..width)
                    .map(|_| {
                        if rate > 0.0 {
                            stream.sample::<f64, _>(Exp1) / rate
                        } else {
                            f64::INFINITY
                        }
                    })
                    .collect()
            })
            .collect();
        MarkWells { window, flip_next, flip_stream, kill_rates, kill_next, kill_streams }
    }

    /// Append every event in `[from, to)` to `out`, globally sorted. Ties
    /// across streams are measure-zero but possible in floating point; they
    /// break deterministically by site then layer.
    fn fill_slab(&mut self, to: f64, out: &mut Vec<SweepEvent>) {
        out.clear();
        for idx in 0..self.flip_next.len() {
            let site = self.window.lo + idx as i64;
            let mut t = self.flip_next[idx];
            while t < to {
                out.push(SweepEvent { time: t, site, kind: SweepEventKind::Flip });
                t += self.flip_stream.sample::<f64, _>(Exp1);
            }
            self.flip_next[idx] = t;
        }
        for layer in 0..self.kill_rates.len() {
            let rate = self.kill_rates[layer];
            if rate == 0.0 {
                continue;
            }
            for idx in 0..self.kill_next[layer].len() {
                let site = self.window.lo + idx as i64;
                let mut t = self.kill_next[layer][idx];
                while t < to {
                    out.push(SweepEvent {
                        time: t,
                        site,
                        kind: SweepEventKind::Kill(layer as u8),
                    });
                    t += self.kill_streams[layer].sample::<f64, _>(Exp1) / rate;
                }
                self.kill_next[layer][idx] = t;
            }
        }
        out.sort_unstable_by(|a, b| {
            a.time
                .total_cmp(&b.time)
                .then(a.site.cmp(&b.site))
                .then(kind_rank(a.kind).cmp(&kind_rank(b.kind)))
        });
    }
}

fn kind_rank(kind: SweepEventKind) -> u8 {
    match kind {
        SweepEventKind::Flip => 0,
        SweepEventKind::Kill(layer) => 1 + layer,
    }
}

/// Slab length in time units; bounds the event buffer to ~O(window) entries.
const SLAB: f64 = 4.0;

fn run_sweep(horizon: f64, wells: &mut MarkWells, tracks: &mut [&mut SweepTrack]) {
    let mut buf = Vec::new();
    let mut t = 0.0;
    loop {
        let to = (t + SLAB).min(horizon);
        wells.fill_slab(to, &mut buf);
        for ev in &buf {
            for track in tracks.iter_mut() {
                track.apply(ev);
            }
        }
        if to >= horizon {
            break;
        }
        t = to;
    }
}

/// Replay a diagram's marks through sweep tracks (spike = flip, delta = kill
/// layer 0), in mark order. Lets tests pin the track update rule against the
/// graphical dual reading on identical marks.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn diagram_sweep_tracks(diagram: &Diagram, tracks: &mut [&mut SweepTrack]) {
    for ev in diagram.events() {
        let kind = match ev.kind {
            MarkKind::Spike => SweepEventKind::Flip,
            MarkKind::Delta => SweepEventKind::Kill(0),
        };
        let swept = SweepEvent { time: ev.time, site: ev.site, kind };
        for track in tracks.iter_mut() {
            track.apply(&swept);
        }
    }
}

/// Right-edge trajectory of the dual started from the half line `(-inf, 0]`,
/// truncated `margin = ceil(speed_bound * horizon)` sites away on both sides
/// with the left remainder pinned active.
pub fn simulate_dual_halfline_edge(
    gamma: f64,
    horizon: f64,
    key: StreamKey,
    speed_bound: f64,
) -> Result<EdgeTrack> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(crate::error::Error::InvalidRate(gamma));
    }
    let window = Window::half_line_left(0, horizon, speed_bound)?;
    let bounds = window.bounds();
    let init = Configuration::from_sites(bounds.lo..=0);
    let mut track =
        SweepTrack::new(bounds, &init, true, 1, window.margin()).recording_edges();
    let mut wells = MarkWells::new(bounds, vec![gamma], key);
    run_sweep(horizon, &mut wells, &mut [&mut track]);
    Ok(track.into_edge_track(horizon, window.margin()))
}

/// Coupled pair of half-line duals on shared marks: both see the flip marks
/// and the rate-gamma kill layer; the second also sees an independent
/// rate-lambda layer. With lambda = 0 the tracks are identical by
/// construction.
pub fn simulate_dual_coupled(
    gamma: f64,
    lambda: f64,
    horizon: f64,
    key: StreamKey,
    speed_bound: f64,
) -> Result<CoupledEdgeTracks> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(crate::error::Error::InvalidRate(gamma));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(crate::error::Error::InvalidRate(lambda));
    }
    let window = Window::half_line_left(0, horizon, speed_bound)?;
    let bounds = window.bounds();
    let init = Configuration::from_sites(bounds.lo..=0);
    let mut base =
        SweepTrack::new(bounds, &init, true, 1, window.margin()).recording_edges();
    let mut perturbed =
        SweepTrack::new(bounds, &init, true, 2, window.margin()).recording_edges();
    let mut wells = MarkWells::new(bounds, vec![gamma, lambda], key);
    run_sweep(horizon, &mut wells, &mut [&mut base, &mut perturbed]);
    Ok(CoupledEdgeTracks {
        base: base.into_edge_track(horizon, window.margin()),
        perturbed: perturbed.into_edge_track(horizon, window.margin()),
    })
}

/// Duals from `{0}` at every rate in `gammas`, all driven by one mark well:
/// track j sees the kill layers of every rate up to `gammas[j]`, so survival
/// is monotone non-increasing along the ladder pathwise, replica by replica.
/// Returns, per rate, whether the dual was still alive at the horizon.
pub fn simulate_dual_survival_ladder(
    gammas: &[f64],
    horizon: f64,
    key: StreamKey,
    speed_bound: f64,
) -> Result<Vec<bool>> {
    if gammas.is_empty() || gammas.len() > u8::MAX as usize {
        return Err(crate::error::Error::InvalidConfig {
            field: "gammas",
            reason: format!("need between 1 and 255 rates, got {}", gammas.len()),
        });
    }
    let mut deltas = Vec::with_capacity(gammas.len());
    let mut prev = 0.0;
    for &g in gammas {
        if !g.is_finite() || g < prev {
            return Err(crate::error::Error::InvalidConfig {
                field: "gammas",
                reason: "rates must be finite, nonnegative and nondecreasing".into(),
            });
        }
        deltas.push(g - prev);
        prev = g;
    }
    let span = SiteWindow::new(0, 0).expect("degenerate window");
    let window = Window::full_line(span, horizon, speed_bound)?;
    let bounds = window.bounds();
    let init = Configuration::single(0);
    let mut tracks: Vec<SweepTrack> = (0..gammas.len())
        .map(|j| SweepTrack::new(bounds, &init, false, (j + 1) as u8, window.margin()))
        .collect();
    let mut wells = MarkWells::new(bounds, deltas, key);
    let mut refs: Vec<&mut SweepTrack> = tracks.iter_mut().collect();
    run_sweep(horizon, &mut wells, &mut refs);
    Ok(tracks.iter().map(|t| t.extinction().is_none()).collect())
}
