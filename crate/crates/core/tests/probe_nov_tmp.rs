use resetless::agent::agent_observation;
use resetless::agent::ActMode;
use resetless::rnd::observe;
use resetless::run::{load_checkpoint, train, RunConfig, Variant};
use resetless::sim::{step_world, ScenarioSpec, WorldState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn probe_novelty_scale() {
    let mut cfg = RunConfig::desk("four_way", Variant::Ours, 7);
    cfg.episodes = 60;
    cfg.eval_every = 10;
    cfg.eval_episodes = 5;
    let out = train(&cfg).unwrap();
    let spec = ScenarioSpec::builtin("four_way").unwrap();
    let aborts = out.episodes.iter().filter(|r| r.abort_step.is_some()).count();
    println!("aborts over 60 eps: {aborts}; MR={}", out.summary.manual_resets);
    for ckpt in &out.checkpoints {
        let (bundle, model) = load_checkpoint(&ckpt.bytes, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut values = Vec::new();
        for e in 0..6u64 {
            let idx = rng.random_range(1..=spec.n_initial());
            let mut w = WorldState::reset(&spec, idx, 1000 + e).unwrap();
            for _ in 0..spec.limits.t_forward {
                values.push(model.novelty(&observe(&w, &spec, &cfg.rnd)));
                let obs = agent_observation(&w, &spec, &cfg.features);
                let a = bundle.act(&obs, ActMode::Sample, &mut rng).unwrap();
                match step_world(&w, a, &spec) {
                    Ok(o) => {
                        if o.flags.collision_or_unsafe || o.flags.reached_goal { break; }
                        w = o.world;
                    }
                    Err(_) => break,
                }
            }
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pct = |q: f64| values[((values.len() - 1) as f64 * q) as usize];
        println!(
            "ckpt@{}: lambda0={:.3} novelty p10={:.3} p50={:.3} p90={:.3} p99={:.3} max={:.3} over_l0={:.1}%",
            ckpt.after_episode, model.lambda0, pct(0.1), pct(0.5), pct(0.9), pct(0.99),
            values.last().unwrap(),
            100.0 * values.iter().filter(|v| **v >= model.lambda0).count() as f64 / values.len() as f64
        );
    }
}
