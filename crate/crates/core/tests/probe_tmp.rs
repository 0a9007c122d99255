//! Temporary diagnostics while bringing up the scenarios (deleted later).

use resetless::reset::{reset_rollout, ResetConfig, ResetOutcome};
use resetless::sim::{Action, ScenarioSpec, WorldState};

#[test]
fn probe_scenarios() {
    for name in resetless::sim::scenario::BUILTIN_SCENARIOS {
        let spec = ScenarioSpec::builtin(name).unwrap();
        println!("=== {name}: n={} edges={}", spec.n_initial(), spec.graph.edges.len());
        for (a, b) in spec.graph.conflict_pairs() {
            let z = spec.graph.conflict(a, b).unwrap();
            println!(
                "  conflict {} x {}: [{:.1},{:.1}] x [{:.1},{:.1}]",
                spec.graph.edge(a).name,
                spec.graph.edge(b).name,
                z.range_a.0,
                z.range_a.1,
                z.range_b.0,
                z.range_b.1
            );
        }
        // center-cross ranges
        for e in &spec.graph.edges {
            if !e.center_cross.is_empty() {
                println!("  center-cross {}: {:?}", e.name, e.center_cross);
            }
        }
        // traffic-free reset from every anchor to every anchor
        let cfg = ResetConfig::default();
        let mut fails = 0;
        for start in 1..=spec.n_initial() {
            for target in 1..=spec.n_initial() {
                let mut w = WorldState::reset(&spec, start, 1).unwrap();
                w.scripted.clear();
                w.mode.traffic_enabled = false;
                let r = reset_rollout(w, &spec, target, &cfg, spec.limits.t_reset, None).unwrap();
                if r.outcome != ResetOutcome::Reached {
                    fails += 1;
                    println!("  RESET FAIL {start}->{target} steps={}", r.steps);
                }
            }
        }
        println!("  traffic-free reset fails: {fails}");
        // with-traffic: drive ego forward blindly, look at gap dynamics
        let mut w = WorldState::reset(&spec, 1, 7).unwrap();
        let mut min_gap = f64::INFINITY;
        let mut collided = false;
        for _ in 0..spec.limits.t_forward {
            match resetless::sim::step_world(&w, Action::Go, &spec) {
                Ok(o) => {
                    min_gap = min_gap.min(o.flags.min_gap);
                    if o.flags.collision_or_unsafe {
                        collided = true;
                        break;
                    }
                    if o.flags.reached_goal {
                        println!("  blind GO reached goal at step {}", o.world.episode_step);
                        break;
                    }
                    w = o.world;
                }
                Err(e) => {
                    println!("  step error: {e}");
                    break;
                }
            }
        }
        println!("  blind GO: collided={collided} min_gap={min_gap:.2} scripted={}", w.scripted.len());
        // with-traffic controller resets
        let mut ok = 0;
        let mut coll = 0;
        for seed in 0..50u64 {
            let w = WorldState::reset(&spec, 1, seed).unwrap();
            let r = reset_rollout(w, &spec, 1, &cfg, spec.limits.t_reset, None).unwrap();
            match r.outcome {
                ResetOutcome::Reached => ok += 1,
                ResetOutcome::Failed => {
                    coll += 1;
                    println!("  with-traffic reset failed seed={seed} steps={}", r.steps);
                }
            }
        }
        println!("  with-traffic resets: ok={ok} failed={coll}");
    }
}
