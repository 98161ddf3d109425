//! A two-state, two-action decision process small enough to solve by value
//! iteration, used to check that the learner finds the optimal policy.
//!
//! | state | action 0           | action 1        |
//! |-------|--------------------|-----------------|
//! | A     | reward 0.5, ends   | reward 0, to B  |
//! | B     | reward 1.0, ends   | reward 0, to A  |
//!
//! Episodes start in a random state and are cut off after `max_steps`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

const DOMAIN_TOY: u64 = 21;

/// `REWARD[state][action]`
const REWARD: [[f64; 2]; 2] = [[0.5, 0.0], [1.0, 0.0]];
/// Successor for action 1; action 0 always terminates.
const NEXT: [usize; 2] = [1, 0];

#[derive(Debug, Clone)]
pub struct ToyMdp {
    rng: ChaCha8Rng,
    state: usize,
    steps: usize,
    max_steps: usize,
    done: bool,
}

impl ToyMdp {
    pub fn new(seed: u64, max_steps: usize) -> Self {
        Self {
            rng: stream_rng(seed, DOMAIN_TOY, 0),
            state: 0,
            steps: 0,
            max_steps: max_steps.max(1),
            done: true,
        }
    }

    pub fn one_hot(state: usize) -> Vec<f64> {
        let mut v = vec![0.0; 2];
        v[state] = 1.0;
        v
    }
}

impl Environment for ToyMdp {
    fn observation_len(&self) -> usize {
        2
    }

    fn action_count(&self) -> usize {
        2
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = self.rng.gen_range(0..2);
        self.steps = 0;
        self.done = false;
        Self::one_hot(self.state)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        if action > 1 {
            return Err(Error::InvalidConfig(format!("toy action {action}")));
        }
        let reward = REWARD[self.state][action];
        self.steps += 1;
        let terminal = action == 0;
        if !terminal {
            self.state = NEXT[self.state];
        }
        self.done = terminal || self.steps >= self.max_steps;
        Ok(StepOutcome {
            obs: Self::one_hot(self.state),
            reward,
            cost: -reward,
            done: self.done,
        })
    }
}

/// Optimal action per state by value iteration.
pub fn optimal_policy(gamma: f64) -> [usize; 2] {
    let mut v = [0.0f64; 2];
    for _ in 0..1000 {
        let q = q_table(&v, gamma);
        v = [q[0][0].max(q[0][1]), q[1][0].max(q[1][1])];
    }
    let q = q_table(&v, gamma);
    [usize::from(q[0][1] > q[0][0]), usize::from(q[1][1] > q[1][0])]
}

fn q_table(v: &[f64; 2], gamma: f64) -> [[f64; 2]; 2] {
    let mut q = [[0.0; 2]; 2];
    for s in 0..2 {
        q[s][0] = REWARD[s][0];
        q[s][1] = REWARD[s][1] + gamma * v[NEXT[s]];
    }
    q
}
