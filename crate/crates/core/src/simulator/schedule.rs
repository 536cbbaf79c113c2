use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::agents::AgentId;

/// Source of activation, transmission and delay decisions.
///
/// The engine queries it in a fixed order every tick, so any deterministic
/// implementation yields a reproducible run.
pub trait Schedule: Send {
    fn activate(&mut self, tick: u64, agent: usize) -> bool;
    fn transmit(&mut self, tick: u64, from: AgentId, to: AgentId) -> bool;
    fn extra_delay(&mut self, tick: u64, from: AgentId, to: AgentId) -> u64;
}

/// Bernoulli activations and transmissions with geometric in-flight delays.
#[derive(Clone, Debug)]
pub struct RandomSchedule {
    rng: ChaCha8Rng,
    p_update: f64,
    p_comm: f64,
    delay: Option<Geometric>,
}

impl RandomSchedule {
    /// `delay` is the per-tick probability that a message stays in flight one more tick.
    pub fn new(seed: u64, p_update: f64, p_comm: f64, delay: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            p_update,
            p_comm,
            delay: (delay > 0.0).then(|| Geometric::new(1.0 - delay).expect("delay in [0, 1)")),
        }
    }

    fn coin(&mut self, p: f64) -> bool {
        p >= 1.0 || self.rng.random_bool(p)
    }
}

impl Schedule for RandomSchedule {
    fn activate(&mut self, _tick: u64, _agent: usize) -> bool {
        let p = self.p_update;
        self.coin(p)
    }

    fn transmit(&mut self, _tick: u64, from: AgentId, _to: AgentId) -> bool {
        match from {
            AgentId::Primal(_) => {
                let p = self.p_comm;
                self.coin(p)
            }
            AgentId::Dual(_) => true,
        }
    }

    fn extra_delay(&mut self, _tick: u64, _from: AgentId, _to: AgentId) -> u64 {
        match &self.delay {
            Some(g) => g.sample(&mut self.rng),
            None => 0,
        }
    }
}

/// Every agent computes and every channel transmits on every tick, with no delay.
#[derive(Clone, Copy, Debug, Default)]
pub struct SynchronousSchedule;

impl Schedule for SynchronousSchedule {
    fn activate(&mut self, _tick: u64, _agent: usize) -> bool {
        true
    }
    fn transmit(&mut self, _tick: u64, _from: AgentId, _to: AgentId) -> bool {
        true
    }
    fn extra_delay(&mut self, _tick: u64, _from: AgentId, _to: AgentId) -> u64 {
        0
    }
}
