use serde::{Deserialize, Serialize};

use crate::agents::{DualStamp, DualUpdate, Topology};

/// Round count reached before a stamp change.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stamp: DualStamp,
    pub start_tick: u64,
    pub end_tick: u64,
    pub final_ops: u64,
}

/// Realized earliest-block data for one dual update.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KappaRecord {
    pub tick: u64,
    pub dual: usize,
    pub t: u64,
    pub kappa_tick: u64,
    pub kappa_ops: u64,
}

/// Omniscient bookkeeping of `ops`, `T` and `K`.
#[derive(Clone, Debug)]
pub struct Observer {
    live: DualStamp,
    ops: u64,
    increments: u64,
    t_min: u64,
    k: Option<u64>,
    epochs: Vec<EpochRecord>,
    kappa: Vec<KappaRecord>,
    listeners: Vec<Vec<usize>>,
    computed: Vec<bool>,
    delivered: Vec<Vec<bool>>,
    watermark: u64,
    epoch_start: u64,
}

impl Observer {
    pub fn new(topo: &Topology) -> Self {
        let np = topo.listeners.len();
        Self {
            live: DualStamp::zeros(topo.constrained_primals.len()),
            ops: 0,
            increments: 0,
            t_min: 0,
            k: None,
            epochs: Vec::new(),
            kappa: Vec::new(),
            listeners: topo.listeners.clone(),
            computed: vec![false; np],
            delivered: topo.listeners.iter().map(|l| vec![false; l.len()]).collect(),
            watermark: 0,
            epoch_start: 0,
        }
    }

    /// The global vector of dual update counts.
    pub fn live(&self) -> &DualStamp {
        &self.live
    }

    pub fn ops(&self) -> u64 {
        self.ops
    }

    /// Total number of completed rounds across all epochs.
    pub fn increments(&self) -> u64 {
        self.increments
    }

    /// `T`: the smallest dual update count.
    pub fn t_min(&self) -> u64 {
        self.t_min
    }

    /// `K`: the smallest round count among primal blocks consumed by any dual update so far.
    /// Zero before the first dual update.
    pub fn k(&self) -> u64 {
        self.k.unwrap_or(0)
    }

    pub fn epochs(&self) -> &[EpochRecord] {
        &self.epochs
    }

    pub fn kappa_records(&self) -> &[KappaRecord] {
        &self.kappa
    }

    /// True when `stamp` agrees with the live stamp on `comps`.
    pub fn is_live(&self, stamp: &DualStamp, comps: &[usize]) -> bool {
        stamp.matches_on(&self.live, comps)
    }

    fn reset_round(&mut self, watermark: u64) {
        self.computed.iter_mut().for_each(|c| *c = false);
        self.delivered.iter_mut().for_each(|d| d.iter_mut().for_each(|v| *v = false));
        self.watermark = watermark;
    }

    fn try_complete(&mut self, latest_compute_id: u64) -> bool {
        let done = self.computed.iter().all(|c| *c) && self.delivered.iter().all(|d| d.iter().all(|v| *v));
        if done {
            self.ops += 1;
            self.increments += 1;
            self.reset_round(latest_compute_id);
        }
        done
    }

    /// Records a primal computation; returns true when it completes a round.
    pub fn on_compute(&mut self, agent: usize, compute_id: u64, counted: bool) -> bool {
        if counted && compute_id > self.watermark {
            self.computed[agent] = true;
        }
        self.try_complete(compute_id)
    }

    /// Records adoption of a primal block by a listening neighbor; returns true when it completes a round.
    pub fn on_adopt(
        &mut self,
        sender: usize,
        recipient: usize,
        compute_id: u64,
        counted: bool,
        latest_compute_id: u64,
    ) -> bool {
        if counted && compute_id > self.watermark {
            if let Some(k) = self.listeners[sender].iter().position(|&j| j == recipient) {
                self.delivered[sender][k] = true;
            }
        }
        self.try_complete(latest_compute_id)
    }

    /// Records a dual update: the live stamp changes and `ops` restarts from zero.
    pub fn on_dual_update(&mut self, tick: u64, update: &DualUpdate, latest_compute_id: u64) {
        self.epochs.push(EpochRecord {
            stamp: self.live.clone(),
            start_tick: self.epoch_start,
            end_tick: tick,
            final_ops: self.ops,
        });
        self.epoch_start = tick;
        self.live.0[update.dual] = update.t;
        self.ops = 0;
        self.reset_round(latest_compute_id);
        self.t_min = self.live.min_count();
        self.kappa.push(KappaRecord {
            tick,
            dual: update.dual,
            t: update.t,
            kappa_tick: update.kappa_tick,
            kappa_ops: update.kappa_ops,
        });
        self.k = Some(self.k.map_or(update.kappa_ops, |k| k.min(update.kappa_ops)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_agent_topology() -> Topology {
        Topology {
            neighbors: vec![vec![1], vec![0]],
            listeners: vec![vec![1], vec![0]],
            relevant_duals: vec![vec![0], vec![1]],
            constrained_primals: vec![vec![0], vec![1]],
        }
    }

    #[test]
    fn round_needs_compute_and_delivery() {
        let mut o = Observer::new(&two_agent_topology());
        assert!(!o.on_compute(0, 1, true));
        assert!(!o.on_compute(1, 2, true));
        assert!(!o.on_adopt(0, 1, 1, true, 2));
        assert_eq!(o.ops(), 0);
        assert!(o.on_adopt(1, 0, 2, true, 2));
        assert_eq!(o.ops(), 1);
    }

    #[test]
    fn blocks_from_before_the_round_do_not_count() {
        let mut o = Observer::new(&two_agent_topology());
        o.on_compute(0, 1, true);
        o.on_compute(1, 2, true);
        o.on_adopt(0, 1, 1, true, 2);
        o.on_adopt(1, 0, 2, true, 2);
        assert_eq!(o.ops(), 1);
        o.on_compute(0, 3, true);
        o.on_compute(1, 4, true);
        // Re-delivery of round-one blocks cannot complete round two.
        o.on_adopt(0, 1, 1, true, 4);
        o.on_adopt(1, 0, 2, true, 4);
        assert_eq!(o.ops(), 1);
        o.on_adopt(0, 1, 3, true, 4);
        o.on_adopt(1, 0, 4, true, 4);
        assert_eq!(o.ops(), 2);
    }

    #[test]
    fn uncounted_computations_are_ignored() {
        let mut o = Observer::new(&two_agent_topology());
        o.on_compute(0, 1, false);
        o.on_compute(1, 2, true);
        o.on_adopt(0, 1, 1, false, 2);
        o.on_adopt(1, 0, 2, true, 2);
        assert_eq!(o.ops(), 0);
    }

    #[test]
    fn dual_update_resets_ops_and_tracks_t_and_k() {
        let mut o = Observer::new(&two_agent_topology());
        o.on_compute(0, 1, true);
        o.on_compute(1, 2, true);
        o.on_adopt(0, 1, 1, true, 2);
        o.on_adopt(1, 0, 2, true, 2);
        assert_eq!(o.ops(), 1);
        let up = |dual, t, ops| DualUpdate {
            dual,
            t,
            kappa_tick: 0,
            kappa_ops: ops,
        };
        o.on_dual_update(5, &up(0, 1, 1), 2);
        assert_eq!(o.ops(), 0);
        assert_eq!(o.t_min(), 0);
        assert_eq!(o.k(), 1);
        assert_eq!(o.epochs()[0].final_ops, 1);
        for t in 2..=3 {
            o.on_dual_update(6, &up(0, t, 4), 2);
        }
        for t in 1..=5 {
            o.on_dual_update(7, &up(1, t, 3), 2);
        }
        assert_eq!(o.live(), &DualStamp(vec![3, 5]));
        assert_eq!(o.t_min(), 3);
        assert_eq!(o.k(), 1);
    }
}
