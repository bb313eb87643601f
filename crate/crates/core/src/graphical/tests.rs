use proptest::prelude::*;

use super::enumeration::{dual_reachable, forward_reachable};
use super::*;
use crate::rng::{StreamKey, StreamRole};

fn check_stream(replica: u64) -> Stream {
    StreamKey::new(0x6d61726b73, replica, StreamRole::OracleCheck).stream()
}

fn random_config(window: SiteWindow, p: f64, stream: &mut Stream) -> Configuration {
    Configuration::from_sites(window.sites().filter(|_| stream.chance(p)))
}

fn spike(site: i64, time: f64) -> DiagramEvent {
    DiagramEvent { time, site, kind: MarkKind::Spike }
}

fn delta(site: i64, time: f64) -> DiagramEvent {
    DiagramEvent { time, site, kind: MarkKind::Delta }
}

#[test]
fn build_is_deterministic_per_key() {
    let window = SiteWindow::centered(5);
    let a = Diagram::build(window, 4.0, 0.7, &mut check_stream(1)).unwrap();
    let b = Diagram::build(window, 4.0, 0.7, &mut check_stream(1)).unwrap();
    assert_eq!(a, b);
    let c = Diagram::build(window, 4.0, 0.7, &mut check_stream(2)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn zero_gamma_has_no_kill_marks() {
    let d = Diagram::build(SiteWindow::centered(4), 6.0, 0.0, &mut check_stream(3)).unwrap();
    assert!(d.events().iter().all(|ev| ev.kind == MarkKind::Spike));
}

#[test]
fn kill_mark_count_concentrates() {
    // 11 sites, horizon 3, gamma 0.5: mean count 16.5 per diagram, SE of the
    // mean over 1000 diagrams = sqrt(16.5/1000) = 0.128.
    let window = SiteWindow::centered(5);
    let mut total = 0usize;
    for r in 0..1000 {
        let d = Diagram::build(window, 3.0, 0.5, &mut check_stream(100 + r)).unwrap();
        total += d.events().iter().filter(|ev| ev.kind == MarkKind::Delta).count();
    }
    let mean = total as f64 / 1000.0;
    assert!((mean - 16.5).abs() < 4.0 * 0.128, "mean kill count {mean}");
}

#[test]
fn timestamps_strictly_increase() {
    let d = Diagram::build(SiteWindow::centered(8), 5.0, 1.0, &mut check_stream(4)).unwrap();
    assert!(d.events().windows(2).all(|w| w[0].time < w[1].time));
}

#[test]
fn empty_state_is_absorbing() {
    let d = Diagram::build(SiteWindow::centered(5), 5.0, 0.4, &mut check_stream(5)).unwrap();
    let out = d.forward_state(&Configuration::empty(), 5.0).unwrap();
    assert!(out.is_empty());
}

#[test]
fn spike_resets_and_activates_neighbors() {
    let w = SiteWindow::centered(2);
    let d = Diagram::from_events(w, 2.0, 0.5, vec![spike(0, 1.0)]).unwrap();
    assert_eq!(
        d.forward_state(&Configuration::single(0), 2.0).unwrap(),
        Configuration::from_sites([-1, 1])
    );
    // Spike at an inactive site does nothing.
    assert_eq!(
        d.forward_state(&Configuration::single(1), 2.0).unwrap(),
        Configuration::single(1)
    );
    // Before the mark the state is untouched.
    assert_eq!(
        d.forward_state(&Configuration::single(0), 0.5).unwrap(),
        Configuration::single(0)
    );
}

#[test]
fn spike_at_window_edge_clips() {
    let w = SiteWindow::new(0, 2).unwrap();
    let d = Diagram::from_events(w, 1.0, 0.0, vec![spike(0, 0.5)]).unwrap();
    assert_eq!(
        d.forward_state(&Configuration::single(0), 1.0).unwrap(),
        Configuration::single(1)
    );
}

#[test]
fn kill_mark_resets() {
    let w = SiteWindow::centered(2);
    let d = Diagram::from_events(w, 2.0, 0.5, vec![delta(0, 1.0)]).unwrap();
    assert!(d.forward_state(&Configuration::single(0), 2.0).unwrap().is_empty());
}

#[test]
fn dual_spike_applies_or_of_neighbors() {
    let w = SiteWindow::centered(3);
    let d = Diagram::from_events(w, 2.0, 0.5, vec![spike(0, 1.0)]).unwrap();
    // No active neighbors: site 0 turns off.
    assert!(d.dual_forward_state(&Configuration::single(0), 2.0).unwrap().is_empty());
    // One active neighbor keeps it on.
    let d1 = Diagram::from_events(w, 2.0, 0.5, vec![spike(1, 1.0)]).unwrap();
    assert_eq!(
        d1.dual_forward_state(&Configuration::from_sites([0, 1]), 2.0).unwrap(),
        Configuration::from_sites([0, 1])
    );
    // Inactive site with an active neighbor turns on.
    assert_eq!(
        d1.dual_forward_state(&Configuration::single(0), 2.0).unwrap(),
        Configuration::from_sites([0, 1])
    );
}

#[test]
fn forward_sweep_matches_path_enumeration() {
    let window = SiteWindow::centered(3);
    for r in 0..300u64 {
        let gamma = [0.3, 0.8, 1.5][(r % 3) as usize];
        let mut s = check_stream(1000 + r);
        let d = Diagram::build(window, 2.0, gamma, &mut s).unwrap();
        let init = random_config(window, 0.4, &mut s);
        for t in [1.1, 2.0] {
            let swept = d.forward_state(&init, t).unwrap();
            let walked = forward_reachable(&d, &init, t);
            assert_eq!(swept, walked, "replica {r} t {t}\n{}", d.dump());
        }
    }
}

#[test]
fn dual_sweep_matches_path_enumeration() {
    let window = SiteWindow::centered(3);
    for r in 0..300u64 {
        let gamma = [0.3, 0.8, 1.5][(r % 3) as usize];
        let mut s = check_stream(2000 + r);
        let d = Diagram::build(window, 2.0, gamma, &mut s).unwrap();
        let init = random_config(window, 0.4, &mut s);
        for t in [0.7, 2.0] {
            let swept = d.dual_forward_state(&init, t).unwrap();
            let walked = dual_reachable(&d, &init, t);
            assert_eq!(swept, walked, "replica {r} t {t}\n{}", d.dump());
        }
    }
}

#[test]
fn backward_dual_base_cases() {
    let d = Diagram::build(SiteWindow::centered(5), 4.0, 0.6, &mut check_stream(6)).unwrap();
    let b = Configuration::from_sites([-1, 2]);
    assert!(d.backward_dual_state(&Configuration::empty(), 4.0, 4.0).unwrap().is_empty());
    // Zero look-back: the target itself (built diagrams carry no mark at
    // exactly time s).
    assert_eq!(d.backward_dual_state(&b, 3.0, 0.0).unwrap(), b);
}

#[test]
fn backward_dual_equals_dual_forward_on_mirror() {
    for r in 0..200u64 {
        let window = SiteWindow::centered(4);
        let mut s = check_stream(3000 + r);
        let d = Diagram::build(window, 3.0, 0.8, &mut s).unwrap();
        let b = random_config(window, 0.35, &mut s);
        // Full span.
        let back = d.backward_dual_state(&b, 3.0, 3.0).unwrap();
        let fwd = d.mirrored().dual_forward_state(&b, 3.0).unwrap();
        assert_eq!(back, fwd, "replica {r}\n{}", d.dump());
        // Partial span [s - t, s].
        let (qs, qt) = (2.2, 1.4);
        let back = d.backward_dual_state(&b, qs, qt).unwrap();
        let slice = d.time_slice(qs - qt, qs).unwrap().mirrored();
        let fwd = slice.dual_forward_state(&b, qt).unwrap();
        assert_eq!(back, fwd, "replica {r} partial\n{}", d.dump());
    }
}

#[test]
fn duality_event_identity() {
    // One diagram serves both directions: forward from A hits B at s exactly
    // when the backward dual from B hits A at time 0.
    for r in 0..500u64 {
        let window = SiteWindow::centered(5);
        let gamma = [0.2, 0.6, 1.2][(r % 3) as usize];
        let mut s = check_stream(4000 + r);
        let d = Diagram::build(window, 3.0, gamma, &mut s).unwrap();
        let a = random_config(window, 0.3, &mut s);
        let b = random_config(window, 0.3, &mut s);
        let fwd_hits = d.forward_state(&a, 3.0).unwrap().intersects(&b);
        let dual_hits = d.backward_dual_state(&b, 3.0, 3.0).unwrap().intersects(&a);
        assert_eq!(fwd_hits, dual_hits, "replica {r}\n{}", d.dump());
    }
}

#[test]
fn translation_covariance() {
    for r in 0..100u64 {
        let window = SiteWindow::centered(4);
        let mut s = check_stream(5000 + r);
        let d = Diagram::build(window, 2.5, 0.5, &mut s).unwrap();
        let a = random_config(window, 0.4, &mut s);
        let shift = (r as i64 % 7) - 3;
        let moved = d.translate(shift).forward_state(&a.translate(shift), 2.5).unwrap();
        let fixed = d.forward_state(&a, 2.5).unwrap().translate(shift);
        assert_eq!(moved, fixed);
    }
}

#[test]
fn restrict_drops_outside_events() {
    let d = Diagram::build(SiteWindow::centered(6), 3.0, 0.7, &mut check_stream(7)).unwrap();
    let sub = SiteWindow::centered(2);
    let r = d.restrict(sub);
    assert!(r.events().iter().all(|ev| sub.contains(ev.site)));
    assert!(r.events().len() < d.events().len());
}

#[test]
fn dump_load_roundtrip_is_exact() {
    for r in 0..20u64 {
        let d =
            Diagram::build(SiteWindow::centered(5), 4.0, 0.9, &mut check_stream(6000 + r))
                .unwrap();
        let text = d.dump();
        let back = Diagram::load(&text).unwrap();
        assert_eq!(d, back);
    }
}

#[test]
fn load_rejects_malformed_input() {
    let ok = "# window -1 1\n# horizon 2\n# gamma 0.5\n0 0.5 spike\n1 1.5 delta\n";
    assert!(Diagram::load(ok).is_ok());
    let cases = [
        "# horizon 2\n# gamma 0.5\n0 0.5 spike\n",                    // no window
        "# window -1 1\n# gamma 0.5\n0 0.5 spike\n",                  // no horizon
        "# window -1 1\n# horizon 2\n0 0.5 spike\n",                  // no gamma
        "# window -1 1\n# horizon 2\n# gamma 0.5\n0 0.5 burst\n",     // bad kind
        "# window -1 1\n# horizon 2\n# gamma 0.5\n5 0.5 spike\n",     // outside window
        "# window -1 1\n# horizon 2\n# gamma 0.5\n0 3.5 spike\n",     // beyond horizon
        "# window -1 1\n# horizon 2\n# gamma 0.5\n0 1.5 spike\n1 0.5 spike\n", // unsorted
        "# window -1 1\n# horizon 2\n# gamma 0.5\n0 0.5 spike\n1 0.5 spike\n", // tie
        "# window -1 1\n# horizon 2\n# gamma 0.5\n0 0.5 spike extra\n", // trailing
    ];
    for text in cases {
        assert!(Diagram::load(text).is_err(), "accepted: {text}");
    }
}

#[test]
fn query_validation() {
    let d = Diagram::build(SiteWindow::centered(2), 2.0, 0.5, &mut check_stream(8)).unwrap();
    let a = Configuration::single(0);
    assert!(matches!(d.forward_state(&a, 3.0), Err(Error::BeyondHorizon { .. })));
    assert!(matches!(
        d.forward_state(&Configuration::single(9), 1.0),
        Err(Error::SiteOutsideWindow { .. })
    ));
    assert!(matches!(d.backward_dual_state(&a, 1.0, 2.0), Err(Error::BeyondHorizon { .. })));
}

#[test]
fn and_rule_breaks_duality() {
    // Sanity for the whole apparatus: with OR replaced by AND the event
    // identity must fail somewhere on a modest corpus.
    let window = SiteWindow::centered(5);
    let mut failures = 0;
    for r in 0..200u64 {
        let mut s = check_stream(7000 + r);
        let d = Diagram::build(window, 3.0, 0.4, &mut s).unwrap();
        let a = random_config(window, 0.3, &mut s);
        let b = random_config(window, 0.3, &mut s);
        let fwd = d.forward_state(&a, 3.0).unwrap().intersects(&b);
        let mutated =
            d.backward_sweep(&b, 3.0, 3.0, DualRule::And).unwrap().intersects(&a);
        if fwd != mutated {
            failures += 1;
        }
    }
    assert!(failures > 0, "AND-rule dual never disagreed; the check has no teeth");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_additive_and_monotone(seed in 0u64..10_000, gamma in 0.0f64..1.5) {
        let window = SiteWindow::centered(4);
        let mut s = StreamKey::new(seed, 0, StreamRole::OracleCheck).stream();
        let d = Diagram::build(window, 2.0, gamma, &mut s).unwrap();
        let a = random_config(window, 0.35, &mut s);
        let b = random_config(window, 0.35, &mut s);
        let fa = d.forward_state(&a, 2.0).unwrap();
        let fb = d.forward_state(&b, 2.0).unwrap();
        let fab = d.forward_state(&a.union(&b), 2.0).unwrap();
        prop_assert_eq!(&fab, &fa.union(&fb));
        // Monotonicity is additivity seen from a subset.
        prop_assert!(fa.is_subset(&fab));
    }

    #[test]
    fn dual_sweeps_additive(seed in 0u64..10_000, gamma in 0.0f64..1.5) {
        let window = SiteWindow::centered(4);
        let mut s = StreamKey::new(seed, 1, StreamRole::OracleCheck).stream();
        let d = Diagram::build(window, 2.0, gamma, &mut s).unwrap();
        let a = random_config(window, 0.35, &mut s);
        let b = random_config(window, 0.35, &mut s);
        let da = d.dual_forward_state(&a, 2.0).unwrap();
        let db = d.dual_forward_state(&b, 2.0).unwrap();
        let dab = d.dual_forward_state(&a.union(&b), 2.0).unwrap();
        prop_assert_eq!(&dab, &da.union(&db));
        let ba = d.backward_dual_state(&a, 2.0, 2.0).unwrap();
        let bb = d.backward_dual_state(&b, 2.0, 2.0).unwrap();
        let bab = d.backward_dual_state(&a.union(&b), 2.0, 2.0).unwrap();
        prop_assert_eq!(&bab, &ba.union(&bb));
    }

    #[test]
    fn dump_load_roundtrip_property(seed in 0u64..10_000, gamma in 0.0f64..2.0) {
        let mut s = StreamKey::new(seed, 2, StreamRole::OracleCheck).stream();
        let d = Diagram::build(SiteWindow::centered(3), 1.5, gamma, &mut s).unwrap();
        prop_assert_eq!(Diagram::load(&d.dump()).unwrap(), d);
    }
}
