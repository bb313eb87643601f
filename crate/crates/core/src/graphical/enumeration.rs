//! Brute-force reachability by explicit search over mark-to-mark paths.
//!
//! Nothing here shares code with the sweeps: paths are walked arrow by arrow
//! with the blocking rules applied to each vertical segment. Only tests use
//! this module; it is the independent referee for `forward_state` and
//! `dual_forward_state`.

use std::collections::HashSet;

use super::{Diagram, MarkKind};
use crate::lattice::Configuration;

struct SiteMarks {
    spikes: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    lo: i64,
}

impl SiteMarks {
    fn of(diagram: &Diagram) -> Self {
        let w = diagram.window();
        let mut spikes = vec![Vec::new(); w.len()];
        let mut deltas = vec![Vec::new(); w.len()];
        for ev in diagram.events() {
            let idx = (ev.site - w.lo) as usize;
            match ev.kind {
                MarkKind::Spike => spikes[idx].push(ev.time),
                MarkKind::Delta => deltas[idx].push(ev.time),
            }
        }
        SiteMarks { spikes, deltas, lo: w.lo }
    }

    fn spikes(&self, site: i64) -> &[f64] {
        &self.spikes[(site - self.lo) as usize]
    }

    fn deltas(&self, site: i64) -> &[f64] {
        &self.deltas[(site - self.lo) as usize]
    }
}

fn first_after(times: &[f64], u: f64) -> Option<f64> {
    let idx = times.partition_point(|&t| t <= u);
    times.get(idx).copied()
}

fn has_in(times: &[f64], from_excl: f64, to_incl: f64) -> bool {
    matches!(first_after(times, from_excl), Some(t) if t <= to_incl)
}

fn has_at(times: &[f64], u: f64) -> bool {
    times.binary_search_by(|t| t.total_cmp(&u)).is_ok()
}

/// Sites reachable at time `s` from `init` at time 0 along valid forward
/// paths: a segment at site j may contain no kill mark of j and no spike mark
/// of j in its interior or at its bottom endpoint; at j's first spike the
/// path may jump to either neighbor.
pub fn forward_reachable(diagram: &Diagram, init: &Configuration, s: f64) -> Configuration {
    reachable(diagram, init, s, Reading::Forward)
}

/// Sites reachable at time `s` from `init` at time 0 along dual-valid paths:
/// a segment at site j may contain no kill mark of j and no spike mark of j
/// in its interior or at its top endpoint; at a neighbor's spike the path may
/// jump into that neighbor.
pub fn dual_reachable(diagram: &Diagram, init: &Configuration, s: f64) -> Configuration {
    reachable(diagram, init, s, Reading::Dual)
}

#[derive(Clone, Copy, PartialEq)]
enum Reading {
    Forward,
    Dual,
}

fn reachable(diagram: &Diagram, init: &Configuration, s: f64, reading: Reading) -> Configuration {
    let marks = SiteMarks::of(diagram);
    let window = diagram.window();
    let mut seen: HashSet<(i64, u64)> = HashSet::new();
    let mut stack: Vec<(i64, f64)> = Vec::new();
    let mut out = Configuration::empty();

    for site in init.iter() {
        stack.push((site, 0.0));
    }

    while let Some((j, u)) = stack.pop() {
        if !seen.insert((j, u.to_bits())) {
            continue;
        }
        // Entry instants that coincide with a blocking mark of j kill the
        // path outright, except that a dual path enters exactly at j's own
        // spike (the arrow tip) by construction.
        if has_at(marks.deltas(j), u) {
            continue;
        }
        if reading == Reading::Forward && has_at(marks.spikes(j), u) {
            continue;
        }

        // Standing at j from u onward: reachable at s when no blocker sits in
        // (u, s]. The post-jump convention makes j's own spike at exactly s a
        // blocker in both readings.
        if !has_in(marks.deltas(j), u, s) && !has_in(marks.spikes(j), u, s) {
            out.insert(j);
        }

        let own_delta = first_after(marks.deltas(j), u).unwrap_or(f64::INFINITY);
        let own_spike = first_after(marks.spikes(j), u).unwrap_or(f64::INFINITY);
        match reading {
            Reading::Forward => {
                // Ride to j's first spike (top endpoint allowed) and jump out.
                let w = own_spike;
                if w <= s && w < own_delta {
                    for n in [j - 1, j + 1] {
                        if window.contains(n) {
                            stack.push((n, w));
                        }
                    }
                }
            }
            Reading::Dual => {
                // Jump into a neighbor at any of its spikes strictly below
                // j's first blocker of either species.
                let block = own_delta.min(own_spike);
                for n in [j - 1, j + 1] {
                    if !window.contains(n) {
                        continue;
                    }
                    for &w in marks.spikes(n) {
                        if w > u && w <= s && w < block {
                            stack.push((n, w));
                        }
                    }
                }
            }
        }
    }
    out
}
