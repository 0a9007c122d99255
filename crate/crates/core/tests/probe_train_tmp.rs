use resetless::run::{train, RunConfig, Variant};
use std::time::Instant;

#[test]
fn probe_train_corridor() {
    let mut cfg = RunConfig::desk("corridor", Variant::Ours, 7);
    cfg.episodes = 40;
    cfg.eval_every = 10;
    cfg.eval_episodes = 10;
    let t0 = Instant::now();
    let out = train(&cfg).unwrap();
    println!("corridor ours 40 eps: {:.2?}", t0.elapsed());
    println!("MR={} SR={:.2} AS={:.1} skipped={}", out.summary.manual_resets, out.summary.success_rate, out.summary.avg_steps, out.skipped_updates);
    println!("visitation={:?}", out.summary.visitation);
    for e in &out.summary.eval { println!("  eval@{}: sr={:.2} as={:.1}", e.after_episode, e.success_rate, e.avg_steps); }
    let causes: Vec<_> = out.episodes.iter().map(|r| format!("{:?}{}", r.cause, if r.abort_step.is_some() {"*"} else {""})).collect();
    println!("causes: {:?}", causes);
}

#[test]
fn probe_train_four_way_short() {
    let mut cfg = RunConfig::desk("four_way", Variant::Ours, 7);
    cfg.episodes = 30;
    cfg.eval_every = 15;
    cfg.eval_episodes = 10;
    let t0 = Instant::now();
    let out = train(&cfg).unwrap();
    println!("four_way ours 30 eps: {:.2?}", t0.elapsed());
    println!("MR={} SR={:.2} AS={:.1}", out.summary.manual_resets, out.summary.success_rate, out.summary.avg_steps);
    let causes: Vec<_> = out.episodes.iter().map(|r| format!("{:?} f{} r{}", r.cause, r.forward_steps, r.reset_steps)).collect();
    for c in causes { println!("  {c}"); }
}
