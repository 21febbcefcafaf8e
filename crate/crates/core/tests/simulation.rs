use std::collections::{BTreeSet, VecDeque};

use cv2x_sps::channel::PeriodView;
use cv2x_sps::config::{AttackerInterval, IntRange, ScenarioConfig, SelectionPolicy};
use cv2x_sps::sps::{sensing_candidates, SpsParams};
use cv2x_sps::{run_replication, Simulation};

fn cfg(targets: usize, attackers: usize, oneshot: bool, periods: u64) -> ScenarioConfig {
    ScenarioConfig {
        num_targets: targets,
        num_attackers: attackers,
        oneshot_enabled: oneshot,
        sim_periods: periods,
        ..Default::default()
    }
}

#[test]
fn conservation_and_attacker_lethality() {
    for (v, a, os) in [(5, 5, false), (20, 3, true), (70, 5, true), (40, 0, false)] {
        let c = cfg(v, a, os, 3000);
        let mut periods = 0;
        let mut check = |view: &PeriodView<'_>| {
            periods += 1;
            let r = view.report;
            assert_eq!(r.resources.len(), v);
            assert_eq!(r.delivered.len(), v);
            let jammed: BTreeSet<usize> = view.attackers.iter().map(|x| x.attack_resource).collect();
            for (i, &res) in r.resources.iter().enumerate() {
                assert_eq!(res, view.decisions[i].resource);
                let alone = r.resources.iter().filter(|&&x| x == res).count() == 1;
                if jammed.contains(&res) {
                    assert!(!r.delivered[i], "jammed target {i} delivered at {}", view.period);
                }
                assert_eq!(r.delivered[i], alone && !jammed.contains(&res));
            }
            let collided = r.delivered.iter().filter(|&&d| !d).count();
            assert_eq!(r.delivered_count() + collided, v);
        };
        Simulation::new(&c, 0).unwrap().run_with(&mut check);
        assert_eq!(periods, 3000);
    }
}

#[test]
fn replications_are_deterministic() {
    let c = cfg(10, 3, true, 20_000);
    let a = run_replication(&c, 2).unwrap();
    let b = run_replication(&c, 2).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.summary(100), b.summary(100));
    let other = run_replication(&c, 3).unwrap();
    assert_ne!(a.summary(100), other.summary(100));
}

#[test]
fn aoi_zero_probability_is_pdr() {
    for (v, a, os) in [(2, 0, false), (5, 5, true), (30, 2, false), (60, 5, true)] {
        let s = run_replication(&cfg(v, a, os, 20_000), 0).unwrap().summary(100);
        assert_eq!(s.pdr.map(f64::to_bits), s.prob_aoi_0ms.map(f64::to_bits));
    }
}

#[test]
fn attackers_always_reselect_on_expiry() {
    for interval in [AttackerInterval::Fixed(1), AttackerInterval::Fixed(7), AttackerInterval::Range(IntRange::new(5, 15))] {
        let c = ScenarioConfig {
            attacker_interval: interval,
            ..cfg(5, 4, false, 20_000)
        };
        let mut sim = Simulation::new(&c, 0).unwrap();
        for _ in 0..c.sim_periods {
            sim.step(&mut ());
        }
        let s = sim.stats();
        assert!(s.attacker_expiries > 0);
        assert_eq!(s.attacker_reselections, s.attacker_expiries);
    }
}

#[test]
fn target_set_matches_decodable_history() {
    let c = cfg(20, 3, true, 5000);
    let window = c.sensing_window_periods;
    let mut sim = Simulation::new(&c, 1).unwrap();
    let mut history: VecDeque<Vec<usize>> = VecDeque::new();
    for _ in 0..c.sim_periods {
        let mut seen_set_size = 0;
        let mut decodable = Vec::new();
        let mut obs = |view: &PeriodView<'_>| {
            seen_set_size = view.target_set_size;
            decodable = view.report.decodable.clone();
        };
        sim.step(&mut obs);

        // Before this period was recorded, S was the union of the previous window.
        let before: BTreeSet<usize> = history.iter().flatten().copied().collect();
        assert_eq!(seen_set_size, before.len());

        history.push_back(decodable);
        if history.len() > window {
            history.pop_front();
        }
        let after: BTreeSet<usize> = history.iter().flatten().copied().collect();
        assert_eq!(sim.ledger().used_resources(), after.into_iter().collect::<Vec<_>>());
    }
}

#[test]
fn selections_only_see_past_periods() {
    let c = cfg(70, 5, true, 2000);
    let params = SpsParams::from_config(&c);
    let mut sim = Simulation::new(&c, 0).unwrap();
    let mut checked = 0;
    for _ in 0..c.sim_periods {
        let ledger = sim.ledger().clone();
        let pending: Vec<(usize, Vec<usize>)> = sim
            .vehicles()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.pending_oneshot)
            .map(|(i, v)| (i, sensing_candidates(&ledger, Some(v.current_resource), params.min_fraction)))
            .collect();
        let mut obs = |view: &PeriodView<'_>| {
            for (i, pool) in &pending {
                let d = view.decisions[*i];
                assert!(d.is_oneshot);
                assert!(pool.contains(&d.resource), "one-shot at {} outside the pool built from earlier periods", view.period);
            }
        };
        checked += pending.len();
        sim.step(&mut obs);
    }
    assert!(checked > 1000);
}

#[test]
fn adding_attackers_lowers_mean_pdr() {
    const SEEDS: u64 = 20;
    let mean_pdr = |attackers: usize| {
        (0..SEEDS)
            .map(|seed| {
                let c = ScenarioConfig {
                    master_seed: seed,
                    ..cfg(5, attackers, false, 20_000)
                };
                run_replication(&c, 0).unwrap().pdr().unwrap()
            })
            .sum::<f64>()
            / SEEDS as f64
    };
    let pdrs: Vec<f64> = (0..4).map(mean_pdr).collect();
    for w in pdrs.windows(2) {
        assert!(w[1] < w[0], "mean PDR by attacker count: {pdrs:?}");
    }
}

#[test]
fn target_draws_are_shared_across_attack_variants() {
    // With uniform selection the targets never look at the ledger, so their
    // transmissions must be identical whether or not attackers are present.
    let uniform = |attackers: usize| ScenarioConfig {
        selection_policy: SelectionPolicy::Uniform,
        oneshot_policy: SelectionPolicy::Uniform,
        ..cfg(10, attackers, true, 3000)
    };
    let resources = |c: &ScenarioConfig| {
        let mut out = Vec::new();
        let mut obs = |view: &PeriodView<'_>| out.push(view.report.resources.clone());
        Simulation::new(c, 0).unwrap().run_with(&mut obs);
        out
    };
    assert_eq!(resources(&uniform(0)), resources(&uniform(5)));

    // Under sensing, initial grants still coincide.
    let quiet = Simulation::new(&cfg(10, 0, true, 10), 0).unwrap();
    let loud = Simulation::new(&cfg(10, 5, true, 10), 0).unwrap();
    assert_eq!(quiet.vehicles(), loud.vehicles());
}

#[test]
fn keep_forever_without_oneshot_holds_the_grant() {
    let c = ScenarioConfig {
        keep_prob: 1.0,
        ..cfg(8, 2, false, 5000)
    };
    let mut first: Option<Vec<usize>> = None;
    let mut obs = |view: &PeriodView<'_>| {
        let r = view.report.resources.clone();
        match &first {
            Some(f) => assert_eq!(f, &r),
            None => first = Some(r),
        }
    };
    Simulation::new(&c, 0).unwrap().run_with(&mut obs);
}
