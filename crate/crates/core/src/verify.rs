//! Exact pathwise verification of the structural identities the whole
//! project leans on: duality, additivity, monotonicity, translation
//! covariance, the absorbing empty state, time-reversal of the dual reading,
//! skeleton equivalence of the event-driven engines against the mark-by-mark
//! diagram readings, and the membrane/activity coupling.
//!
//! Every pathwise check is an exact equality of configurations on a shared
//! diagram — zero tolerance, any single failure fails the suite. A failure
//! record carries the full diagram dump so the offending path can be reloaded
//! and replayed. The oracle pass is the one exception: it compares two
//! independent solvers, so it allows solver-precision slack (1e-8 relative).

use rand::RngCore;
use serde::Serialize;

use crate::dynamics::{replay_auxiliary, replay_membrane, MembraneState};
use crate::error::Result;
use crate::graphical::Diagram;
#[cfg(test)]
use crate::graphical::DualRule;
use crate::lattice::{Configuration, SiteWindow};
use crate::oracle::{build_generator, GeneratorKind};
use crate::rng::{Stream, StreamKey, StreamRole};

/// Corpus shape for one verification run. The defaults match the acceptance
/// corpus: 10^4 diagrams on 21 sites, horizon 5, leak rates cycling through
/// {0.1, 0.5, 1.0}.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyOptions {
    pub diagrams: usize,
    pub halfwidth: i64,
    pub horizon: f64,
    pub gammas: Vec<f64>,
    pub master_seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            diagrams: 10_000,
            halfwidth: 10,
            horizon: 5.0,
            gammas: vec![0.1, 0.5, 1.0],
            master_seed: 0x7061_7468,
        }
    }
}

/// One failed check: which suite, which corpus index, what differed, and the
/// diagram that reproduces it (empty for the diagram-free oracle pass).
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub suite: &'static str,
    pub diagram_index: usize,
    pub detail: String,
    pub dump: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub checks: u64,
    pub failures: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub suites: Vec<SuiteOutcome>,
    /// At most [`MAX_FAILURE_RECORDS`] reproducing records; the per-suite
    /// counters keep the true totals.
    pub failures: Vec<Failure>,
}

/// Dumps are a few kilobytes each; keep a handful, count the rest.
pub const MAX_FAILURE_RECORDS: usize = 8;

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.failures == 0)
    }

    pub fn total_checks(&self) -> u64 {
        self.suites.iter().map(|s| s.checks).sum()
    }

    pub fn total_failures(&self) -> u64 {
        self.suites.iter().map(|s| s.failures).sum()
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteOutcome> {
        self.suites.iter().find(|s| s.name == name)
    }
}

const SUITE_NAMES: [&str; 10] = [
    "duality",
    "additivity",
    "monotonicity",
    "translation",
    "absorbing-empty",
    "time-reversal",
    "skeleton",
    "membrane-coupling",
    "dual-additivity",
    "oracle",
];

const DUALITY: usize = 0;
const ADDITIVITY: usize = 1;
const MONOTONICITY: usize = 2;
const TRANSLATION: usize = 3;
const ABSORBING: usize = 4;
const TIME_REVERSAL: usize = 5;
const SKELETON: usize = 6;
const MEMBRANE: usize = 7;
const DUAL_ADDITIVITY: usize = 8;
const ORACLE: usize = 9;

struct Recorder {
    checks: [u64; SUITE_NAMES.len()],
    failures: [u64; SUITE_NAMES.len()],
    records: Vec<Failure>,
}

impl Recorder {
    fn new() -> Self {
        Recorder {
            checks: [0; SUITE_NAMES.len()],
            failures: [0; SUITE_NAMES.len()],
            records: Vec::new(),
        }
    }

    fn check(
        &mut self,
        suite: usize,
        ok: bool,
        index: usize,
        dump: impl FnOnce() -> String,
        detail: impl FnOnce() -> String,
    ) {
        self.checks[suite] += 1;
        if ok {
            return;
        }
        self.failures[suite] += 1;
        if self.records.len() < MAX_FAILURE_RECORDS {
            self.records.push(Failure {
                suite: SUITE_NAMES[suite],
                diagram_index: index,
                detail: detail(),
                dump: dump(),
            });
        }
    }

    fn into_report(self, options: VerifyOptions) -> VerifyReport {
        let suites = SUITE_NAMES
            .iter()
            .enumerate()
            .map(|(i, &name)| SuiteOutcome {
                name,
                checks: self.checks[i],
                failures: self.failures[i],
            })
            .collect();
        VerifyReport { options, suites, failures: self.records }
    }
}

fn show(config: &Configuration) -> String {
    let sites: Vec<String> = config.iter().map(|s| s.to_string()).collect();
    format!("{{{}}}", sites.join(","))
}

/// Fair-coin subset of the window.
fn random_subset(stream: &mut Stream, window: SiteWindow) -> Configuration {
    let mut bits = 0u64;
    let mut left = 0u32;
    Configuration::from_sites(window.sites().filter(|_| {
        if left == 0 {
            bits = stream.next_u64();
            left = 64;
        }
        let take = bits & 1 == 1;
        bits >>= 1;
        left -= 1;
        take
    }))
}

/// Run every suite over a deterministic diagram corpus. Diagram 0 is the
/// empty diagram (no marks at all) so the edge case is always in the corpus;
/// a sprinkling of full/empty initial sets covers the boundary subsets that
/// fair coins essentially never produce.
pub fn run_suites(options: &VerifyOptions) -> Result<VerifyReport> {
    let window = SiteWindow::centered(options.halfwidth);
    let mut rec = Recorder::new();

    for index in 0..options.diagrams {
        let gamma = options.gammas[index % options.gammas.len()];
        let mut stream =
            StreamKey::new(options.master_seed, index as u64, StreamRole::OracleCheck)
                .stream();
        let diagram = if index == 0 {
            Diagram::from_events(window, options.horizon, gamma, Vec::new())?
        } else {
            Diagram::build(window, options.horizon, gamma, &mut stream)?
        };

        let a = match index % 50 {
            1 => Configuration::full(window),
            2 => Configuration::empty(),
            _ => random_subset(&mut stream, window),
        };
        let b = match index % 50 {
            3 => Configuration::full(window),
            4 => Configuration::empty(),
            _ => random_subset(&mut stream, window),
        };
        let c = random_subset(&mut stream, window);
        let mid = stream.uniform() * options.horizon;

        check_diagram(&mut rec, &diagram, index, &a, &b, &c, mid)?;
    }

    oracle_pass(&mut rec, &options.gammas)?;
    Ok(rec.into_report(options.clone()))
}

/// All pathwise suites on one diagram with initial sets `a`, `b`, `c` and an
/// interior probe time `mid`.
#[allow(clippy::too_many_arguments)]
fn check_diagram(
    rec: &mut Recorder,
    diagram: &Diagram,
    index: usize,
    a: &Configuration,
    b: &Configuration,
    c: &Configuration,
    mid: f64,
) -> Result<()> {
    let horizon = diagram.horizon();
    let dump = || diagram.dump();

    // Duality: the forward run from `a` meets `b` at time s iff the dual run
    // backwards from `b` meets `a` at time 0 — on the same marks.
    for s in [horizon, mid] {
        let fwd_hits = diagram.forward_state(a, s)?.intersects(b);
        let dual_hits = diagram.backward_dual_state(b, s, s)?.intersects(a);
        rec.check(DUALITY, fwd_hits == dual_hits, index, dump, || {
            format!("a={} b={} s={s}: forward hit {fwd_hits}, dual hit {dual_hits}", show(a), show(b))
        });
    }
    // Same identity meeting at an interior time: forward to `mid`, dual back
    // from the horizon by `horizon - mid`.
    let fwd_hits = diagram.forward_state(a, horizon)?.intersects(b);
    let met = diagram
        .backward_dual_state(b, horizon, horizon - mid)?
        .intersects(&diagram.forward_state(a, mid)?);
    rec.check(DUALITY, fwd_hits == met, index, dump, || {
        format!(
            "a={} b={} meet at {mid}: endpoint hit {fwd_hits}, interior hit {met}",
            show(a),
            show(b)
        )
    });

    // Replays drive the event engine over the shared marks; each returns the
    // post-event configuration at every mark time.
    let run_a = replay_auxiliary(diagram, a)?;
    let run_c = replay_auxiliary(diagram, c)?;
    let union = a.union(c);
    let run_union = replay_auxiliary(diagram, &union)?;

    for (k, ((ta, sa), (sc, su))) in run_a
        .iter()
        .zip(run_c.iter().map(|(_, s)| s).zip(run_union.iter().map(|(_, s)| s)))
        .enumerate()
    {
        rec.check(ADDITIVITY, sa.union(sc) == *su, index, dump, || {
            format!("event {k} at {ta}: from {} u {} got {}", show(sa), show(sc), show(su))
        });
        rec.check(MONOTONICITY, sa.is_subset(su), index, dump, || {
            format!("event {k} at {ta}: {} escapes {}", show(sa), show(su))
        });
    }
    // Horizon closes both identities even when the diagram carries no marks.
    let end_a = diagram.forward_state(a, horizon)?;
    let end_c = diagram.forward_state(c, horizon)?;
    let end_union = diagram.forward_state(&union, horizon)?;
    rec.check(ADDITIVITY, end_a.union(&end_c) == end_union, index, dump, || {
        format!("horizon: {} u {} != {}", show(&end_a), show(&end_c), show(&end_union))
    });
    rec.check(MONOTONICITY, end_a.is_subset(&end_union), index, dump, || {
        format!("horizon: {} escapes {}", show(&end_a), show(&end_union))
    });

    // Translation covariance: shifting sites commutes with the run.
    let shift = 7;
    let shifted = replay_auxiliary(&diagram.translate(shift), &a.translate(shift))?;
    rec.check(
        TRANSLATION,
        shifted.len() == run_a.len()
            && shifted
                .iter()
                .zip(&run_a)
                .all(|((ts, ss), (t, s))| ts == t && *ss == s.translate(shift)),
        index,
        dump,
        || format!("shift {shift} changed the path from {}", show(a)),
    );

    // The empty state is absorbing under every mark.
    let run_empty = replay_auxiliary(diagram, &Configuration::empty())?;
    rec.check(
        ABSORBING,
        run_empty.iter().all(|(_, s)| s.is_empty())
            && diagram.forward_state(&Configuration::empty(), horizon)?.is_empty(),
        index,
        dump,
        || "empty state produced activity".into(),
    );

    // Backward dual reading == forward dual reading of the time-reversed
    // diagram, over both a full and a partial stretch.
    let reversed = diagram.mirrored();
    for t in [horizon, mid] {
        let back = diagram.backward_dual_state(b, horizon, t)?;
        let fwd = reversed.dual_forward_state(b, t)?;
        rec.check(TIME_REVERSAL, back == fwd, index, dump, || {
            format!("b={} t={t}: backward {} vs reversed-forward {}", show(b), show(&back), show(&fwd))
        });
    }

    // Skeleton equivalence: the event engine matches the mark-by-mark
    // diagram reading at every event time, and at the horizon.
    for (k, (t, state)) in run_a.iter().enumerate() {
        let swept = diagram.forward_state(a, *t)?;
        rec.check(SKELETON, *state == swept, index, dump, || {
            format!("event {k} at {t}: engine {} vs sweep {}", show(state), show(&swept))
        });
    }
    let engine_end = run_a.last().map_or_else(|| a.clone(), |(_, s)| s.clone());
    rec.check(SKELETON, engine_end == end_a, index, dump, || {
        format!("horizon: engine {} vs sweep {}", show(&engine_end), show(&end_a))
    });

    // Membrane coupling: potentials whose indicator starts at `a` keep the
    // indicator equal to the activity path, mark for mark.
    let levels: Vec<u32> = diagram
        .window()
        .sites()
        .map(|s| if a.contains(s) { 1 + (s.rem_euclid(3)) as u32 } else { 0 })
        .collect();
    let membrane = MembraneState::new(diagram.window(), levels)?;
    rec.check(MEMBRANE, membrane.indicator() == *a, index, dump, || {
        "membrane start indicator diverges".into()
    });
    let (run_membrane, _) = replay_membrane(diagram, &membrane)?;
    rec.check(
        MEMBRANE,
        run_membrane.len() == run_a.len()
            && run_membrane.iter().zip(&run_a).all(|((tm, sm), (t, s))| tm == t && sm == s),
        index,
        dump,
        || format!("indicator path diverged from activity path from {}", show(a)),
    );

    // The dual reading is additive too: OR over neighbours distributes over
    // unions of initial sets.
    for t in [horizon, mid] {
        let da = diagram.dual_forward_state(a, t)?;
        let dc = diagram.dual_forward_state(c, t)?;
        let du = diagram.dual_forward_state(&union, t)?;
        rec.check(DUAL_ADDITIVITY, da.union(&dc) == du, index, dump, || {
            format!("t={t}: {} u {} != {}", show(&da), show(&dc), show(&du))
        });
    }

    Ok(())
}

/// Structural checks on the exact solver: the two independent absorption-time
/// methods agree, the single-site law is analytic, and means move the right
/// way in size and leak rate.
fn oracle_pass(rec: &mut Recorder, gammas: &[f64]) -> Result<()> {
    let no_dump = String::new;
    for &gamma in gammas {
        let mut previous: Option<f64> = None;
        for sites in [1usize, 3, 5] {
            let matrix = build_generator(sites, gamma, GeneratorKind::Auxiliary)?;
            let mean = matrix.mean_extinction(matrix.full_state())?;
            let quad = matrix.mean_extinction_quadrature(matrix.full_state())?;
            rec.check(
                ORACLE,
                (mean - quad).abs() <= 1e-8 * (1.0 + mean.abs()),
                0,
                no_dump,
                || format!("{sites} sites, gamma {gamma}: solve {mean} vs quadrature {quad}"),
            );
            if sites == 1 {
                let analytic = 1.0 / (1.0 + gamma);
                rec.check(
                    ORACLE,
                    (mean - analytic).abs() <= 1e-12,
                    0,
                    no_dump,
                    || format!("single site, gamma {gamma}: {mean} vs analytic {analytic}"),
                );
            }
            if let Some(smaller) = previous {
                rec.check(ORACLE, mean > smaller, 0, no_dump, || {
                    format!("gamma {gamma}: mean fell from {smaller} to {mean} as sites grew")
                });
            }
            previous = Some(mean);
        }
    }
    // More leak kills faster at a fixed size, for both readings.
    for kind in [GeneratorKind::Auxiliary, GeneratorKind::Dual] {
        let mut previous: Option<f64> = None;
        for &gamma in gammas {
            let matrix = build_generator(5, gamma, kind)?;
            let mean = matrix.mean_extinction(matrix.full_state())?;
            rec.check(ORACLE, mean.is_finite() && mean > 0.0, 0, no_dump, || {
                format!("{kind:?} 5 sites, gamma {gamma}: mean {mean}")
            });
            if let Some(easier) = previous {
                rec.check(ORACLE, mean < easier, 0, no_dump, || {
                    format!("{kind:?}: mean rose from {easier} to {mean} as gamma grew")
                });
            }
            previous = Some(mean);
        }
    }
    Ok(())
}

/// Duality checker with a pluggable dual rule, so the tests can prove the
/// suite has teeth: replacing OR by AND must break the identity.
#[cfg(test)]
fn duality_holds_with_rule(
    diagram: &Diagram,
    a: &Configuration,
    b: &Configuration,
    s: f64,
    rule: DualRule,
) -> Result<bool> {
    let fwd_hits = diagram.forward_state(a, s)?.intersects(b);
    let dual_hits = diagram.backward_sweep(b, s, s, rule)?.intersects(a);
    Ok(fwd_hits == dual_hits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_options(diagrams: usize) -> VerifyOptions {
        VerifyOptions { diagrams, ..Default::default() }
    }

    #[test]
    fn a_small_corpus_passes_every_suite() {
        let report = run_suites(&small_options(120)).unwrap();
        assert!(report.passed(), "failures: {:#?}", report.failures);
        assert!(report.failures.is_empty());
        for suite in &report.suites {
            assert!(suite.checks > 0, "suite {} ran no checks", suite.name);
        }
        assert!(report.total_checks() > 10_000);
    }

    #[test]
    fn the_empty_diagram_is_in_the_corpus_and_passes() {
        let report = run_suites(&small_options(1)).unwrap();
        assert!(report.passed(), "failures: {:#?}", report.failures);
        // With no marks the eventwise loops are empty, but every suite still
        // closes at the horizon.
        assert!(report.suite("duality").unwrap().checks >= 3);
        assert!(report.suite("skeleton").unwrap().checks >= 1);
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_suites(&small_options(40)).unwrap();
        let b = run_suites(&small_options(40)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn mutated_dual_rule_fails_the_duality_suite() {
        let window = SiteWindow::centered(10);
        let mut broken = 0usize;
        for index in 0..200u64 {
            let mut stream = StreamKey::new(99, index, StreamRole::OracleCheck).stream();
            let diagram = Diagram::build(window, 5.0, 0.5, &mut stream).unwrap();
            let a = random_subset(&mut stream, window);
            let b = random_subset(&mut stream, window);
            assert!(duality_holds_with_rule(&diagram, &a, &b, 5.0, DualRule::Or).unwrap());
            if !duality_holds_with_rule(&diagram, &a, &b, 5.0, DualRule::And).unwrap() {
                broken += 1;
            }
        }
        assert!(broken > 0, "the AND mutant slipped through 200 diagrams");
    }

    #[test]
    fn failure_records_carry_a_reproducing_dump() {
        // Force a failure through the recorder directly; the plumbing must
        // keep the dump and cap the record list.
        let window = SiteWindow::centered(2);
        let mut stream = StreamKey::new(7, 0, StreamRole::OracleCheck).stream();
        let diagram = Diagram::build(window, 2.0, 0.5, &mut stream).unwrap();
        let mut rec = Recorder::new();
        for i in 0..(MAX_FAILURE_RECORDS + 3) {
            rec.check(DUALITY, false, i, || diagram.dump(), || "forced".into());
        }
        let report = rec.into_report(small_options(0));
        assert!(!report.passed());
        assert_eq!(report.failures.len(), MAX_FAILURE_RECORDS);
        assert_eq!(report.total_failures(), (MAX_FAILURE_RECORDS + 3) as u64);
        let reloaded = Diagram::load(&report.failures[0].dump).unwrap();
        assert_eq!(reloaded, diagram);
    }
}
