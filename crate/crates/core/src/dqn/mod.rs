//! Deep Q-learning: epsilon-greedy acting, experience replay, a periodically
//! synchronized target network and plain SGD on the squared TD error.

mod network;
mod replay;
pub mod toy;

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{BessEnv, Policy, OBSERVATION_LEN};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub use network::{argmax, Gradients, Layer, QNetwork, Sample};
pub use replay::{ReplayBuffer, Transition};

const DOMAIN_INIT: u64 = 11;
const DOMAIN_ACT: u64 = 12;
const DOMAIN_REPLAY: u64 = 13;

/// Result of one environment step as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub cost: f64,
    pub done: bool,
}

/// Episodic environment with a discrete action set.
pub trait Environment {
    fn observation_len(&self) -> usize;

    fn action_count(&self) -> usize;

    fn reset(&mut self) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Result<StepOutcome>;
}

impl Environment for BessEnv {
    fn observation_len(&self) -> usize {
        OBSERVATION_LEN
    }

    fn action_count(&self) -> usize {
        self.actions().len()
    }

    fn reset(&mut self) -> Vec<f64> {
        BessEnv::reset(self);
        self.observation().0.to_vec()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let (report, done) = BessEnv::step(self, action)?;
        Ok(StepOutcome {
            obs: self.observation().0.to_vec(),
            reward: report.reward,
            cost: report.cost.total(),
            done,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub learning_rate: f64,
    /// Probability of taking the greedy action.
    pub epsilon: f64,
    /// When set, epsilon ramps linearly from this value to `epsilon` over
    /// `anneal_episodes`.
    pub epsilon_start: Option<f64>,
    pub anneal_episodes: usize,
    pub gamma: f64,
    /// Steps between target-network synchronizations.
    pub target_sync: usize,
    /// Steps between gradient updates.
    pub update_every: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub episodes: usize,
    pub hidden: Vec<usize>,
    /// Episodes between greedy evaluations; the best evaluated network is
    /// returned. Zero returns the final network.
    pub eval_every: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epsilon: 0.9,
            epsilon_start: None,
            anneal_episodes: 0,
            gamma: 0.9,
            target_sync: 2000,
            update_every: 4,
            batch_size: 64,
            replay_capacity: 10_000,
            episodes: 200,
            hidden: vec![64, 64],
            eval_every: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::NonPositive {
                name: "learning_rate",
                value: self.learning_rate,
            });
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.epsilon) || !self.epsilon_start.map_or(true, unit) {
            return Err(Error::InvalidConfig("epsilon must lie in [0, 1]".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        for (name, v) in [
            ("target_sync", self.target_sync),
            ("update_every", self.update_every),
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer of width 0".into()));
        }
        Ok(())
    }

    pub fn epsilon_at(&self, episode: usize) -> f64 {
        match self.epsilon_start {
            Some(start) if episode < self.anneal_episodes => {
                let frac = episode as f64 / self.anneal_episodes as f64;
                start + (self.epsilon - start) * frac
            }
            _ => self.epsilon,
        }
    }

    pub fn layer_sizes(&self, inputs: usize, actions: usize) -> Vec<usize> {
        let mut s = vec![inputs];
        s.extend(&self.hidden);
        s.push(actions);
        s
    }
}

/// Greedy with probability `epsilon`, otherwise uniform over all actions.
pub fn select_action<R: Rng + ?Sized>(net: &QNetwork, obs: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if rng.gen::<f64>() < epsilon {
        argmax(&net.q_values(obs))
    } else {
        rng.gen_range(0..net.output_len())
    }
}

/// Bootstrapped regression targets from the target network.
pub fn compute_target(batch: &[&Transition], target: &QNetwork, gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                t.reward
            } else {
                let q = target.q_values(&t.next_obs);
                t.reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect()
}

/// One SGD step on the batch; returns the pre-update loss.
pub fn train_step(net: &mut QNetwork, batch: &[&Transition], targets: &[f64], lr: f64) -> Result<f64> {
    if batch.len() != targets.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} transitions, {} targets",
            batch.len(),
            targets.len()
        )));
    }
    let samples: Vec<Sample<'_>> = batch
        .iter()
        .zip(targets)
        .map(|(t, &target)| Sample {
            obs: &t.obs,
            action: t.action,
            target,
        })
        .collect();
    let (loss, grads) = net.gradients(&samples)?;
    if !loss.is_finite() {
        return Err(divergence(format!("loss is {loss}")));
    }
    if !grads
        .layers
        .iter()
        .all(|l| l.weights.iter().chain(&l.biases).all(|g| g.is_finite()))
    {
        return Err(divergence("non-finite gradient".into()));
    }
    net.apply_gradients(&grads, lr);
    Ok(loss)
}

fn divergence(reason: String) -> Error {
    Error::Divergence { episode: 0, reason }
}

pub fn sync_target(main: &QNetwork, target: &mut QNetwork) -> Result<()> {
    target.copy_from(main)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub total_cost: f64,
    pub total_reward: f64,
    pub epsilon: f64,
    /// Mean training loss over the episode's updates; NaN when none ran.
    pub loss_mean: f64,
}

pub const EPISODE_CSV_HEADER: &str = "episode,total_cost,total_reward,epsilon,loss_mean";

pub fn write_log_csv<W: Write>(log: &[EpisodeLog], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EPISODE_CSV_HEADER.split(','))?;
    for e in log {
        w.write_record(&[
            e.episode.to_string(),
            e.total_cost.to_string(),
            e.total_reward.to_string(),
            e.epsilon.to_string(),
            e.loss_mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Training {
    pub net: QNetwork,
    pub log: Vec<EpisodeLog>,
    /// Episode whose network was returned, with its greedy evaluation cost.
    pub selected: Option<(usize, f64)>,
}

/// Total cost of one greedy episode.
pub fn evaluate_greedy<E: Environment + ?Sized>(env: &mut E, net: &QNetwork) -> Result<f64> {
    let mut obs = env.reset();
    let mut cost = 0.0;
    loop {
        let out = env.step(argmax(&net.q_values(&obs)))?;
        cost += out.cost;
        if out.done {
            return Ok(cost);
        }
        obs = out.obs;
    }
}

/// Deep Q-learning on `env`. Deterministic for a given seed.
pub fn train<E: Environment + ?Sized>(env: &mut E, hyper: &Hyperparams, seed: u64) -> Result<Training> {
    hyper.validate()?;
    let sizes = hyper.layer_sizes(env.observation_len(), env.action_count());
    let mut net = QNetwork::new(&sizes, &mut stream_rng(seed, DOMAIN_INIT, 0))?;
    let mut target = net.clone();
    let mut act_rng = stream_rng(seed, DOMAIN_ACT, 0);
    let mut replay_rng = stream_rng(seed, DOMAIN_REPLAY, 0);
    let mut buffer = ReplayBuffer::new(hyper.replay_capacity);
    let mut log = Vec::with_capacity(hyper.episodes);
    let mut steps = 0usize;
    let mut best: Option<(usize, f64, QNetwork)> = None;

    for episode in 0..hyper.episodes {
        let epsilon = hyper.epsilon_at(episode);
        let mut obs = env.reset();
        let (mut total_cost, mut total_reward) = (0.0, 0.0);
        let (mut loss_sum, mut updates) = (0.0, 0usize);
        loop {
            let action = select_action(&net, &obs, epsilon, &mut act_rng);
            let out = env.step(action)?;
            total_cost += out.cost;
            total_reward += out.reward;
            let done = out.done;
            let next = out.obs;
            buffer.push(Transition {
                obs,
                action,
                reward: out.reward,
                next_obs: next.clone(),
                done,
            });
            steps += 1;

            if steps % hyper.update_every == 0 && buffer.len() >= hyper.batch_size {
                let batch = buffer.sample(hyper.batch_size, &mut replay_rng);
                let targets = compute_target(&batch, &target, hyper.gamma);
                let loss = train_step(&mut net, &batch, &targets, hyper.learning_rate)
                    .map_err(|e| with_episode(e, episode))?;
                loss_sum += loss;
                updates += 1;
            }
            if steps % hyper.target_sync == 0 {
                sync_target(&net, &mut target)?;
            }
            if done {
                break;
            }
            obs = next;
        }
        log.push(EpisodeLog {
            episode,
            total_cost,
            total_reward,
            epsilon,
            loss_mean: if updates > 0 { loss_sum / updates as f64 } else { f64::NAN },
        });
        log::debug!("episode {episode}: cost {total_cost:.3}, reward {total_reward:.3}");

        let last = episode + 1 == hyper.episodes;
        if hyper.eval_every > 0 && ((episode + 1) % hyper.eval_every == 0 || last) {
            let cost = evaluate_greedy(env, &net)?;
            if best.as_ref().map_or(true, |b| cost < b.1) {
                best = Some((episode, cost, net.clone()));
            }
        }
    }

    Ok(match best {
        Some((episode, cost, net)) => Training {
            net,
            log,
            selected: Some((episode, cost)),
        },
        None => Training {
            net,
            log,
            selected: None,
        },
    })
}

fn with_episode(e: Error, episode: usize) -> Error {
    match e {
        Error::Divergence { reason, .. } => Error::Divergence { episode, reason },
        other => other,
    }
}

/// Acts greedily with respect to a trained network.
#[derive(Debug, Clone)]
pub struct DqnPolicy {
    pub net: QNetwork,
}

impl DqnPolicy {
    pub fn new(net: QNetwork) -> Self {
        Self { net }
    }
}

impl Policy for DqnPolicy {
    fn choose(&mut self, env: &BessEnv) -> usize {
        argmax(&self.net.q_values(env.observation().as_slice()))
    }

    fn name(&self) -> String {
        "dqn".into()
    }
}
