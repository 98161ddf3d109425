use bess_core::dqn::{train, EpisodeLog, Hyperparams};
use bess_core::env::rollout;
use bess_core::policy::Greedy;
use bess_core::{BessEnv, DqnPolicy, ScenarioConfig};

fn smoothed(log: &[EpisodeLog], window: usize) -> (f64, f64) {
    let mean = |s: &[EpisodeLog]| s.iter().map(|e| e.total_cost).sum::<f64>() / s.len() as f64;
    (mean(&log[..window]), mean(&log[log.len() - window..]))
}

#[test]
fn default_run_lowers_episode_cost() {
    let cfg = ScenarioConfig::default();
    let mut env = BessEnv::new(&cfg).unwrap();
    let out = train(&mut env, &Hyperparams::default(), cfg.rng_seed).unwrap();
    assert_eq!(out.log.len(), 200);
    let (first, last) = smoothed(&out.log, 20);
    assert!(last < first, "first {first:.2}, last {last:.2}");
}

#[test]
fn trained_policy_runs_on_fresh_env() {
    let cfg = ScenarioConfig::default();
    let mut env = BessEnv::new(&cfg).unwrap();
    let hyper = Hyperparams {
        episodes: 3,
        ..Hyperparams::default()
    };
    let out = train(&mut env, &hyper, 5).unwrap();
    let mut fresh = BessEnv::new(&cfg).unwrap();
    let dqn = rollout(&mut fresh, &mut DqnPolicy::new(out.net)).unwrap();
    let greedy = rollout(&mut fresh, &mut Greedy).unwrap();
    assert_eq!(dqn.reports.len(), fresh.horizon());
    assert_eq!(greedy.reports.len(), fresh.horizon());
    assert!(dqn.breakdown.total.is_finite());
}
