//! Deterministic discrete-event engine for the asynchronous primal-dual method.
//!
//! Each tick runs five phases in order:
//! 1. deliver due messages,
//! 2. activated primal agents compute (optionally in parallel, applied in id order),
//! 3. primal agents transmit their latest block on each outgoing channel,
//! 4. deliver due messages again,
//! 5. dual agents with fresh inputs update and broadcast.
//!
//! A message sent in tick `s` with extra delay `d` becomes due in tick `s + d`;
//! channels are FIFO, so a message waits for every earlier one on its channel.

mod observer;
mod schedule;
mod trace;

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use observer::{EpochRecord, KappaRecord, Observer};
pub use schedule::{RandomSchedule, Schedule, SynchronousSchedule};
pub use trace::{
    write_trace_csv, BoundSummary, ContractionSample, ContractionSummary, Counters, DualUpdateRecord,
    RunSummary, TraceRecord, TRACE_HEADER,
};

use crate::agents::{
    AgentId, ComputeRecord, DualAgent, DualStamp, Message, MessageKind, Payload, PrimalAgent, Proposal,
    Receipt, Topology,
};
use crate::error::{Error, Result};
use crate::problem::{DualGeometry, ProblemConstants, ProblemSpec};
use crate::reference::{
    default_rho, fixed_mu_minimizer, rate_constants, saddle_oracle, theorem_bound_terms, RateConstants,
    SaddlePoint, Stepsizes,
};

/// Sup-norm errors below this are not used for contraction ratios.
pub const CONTRACTION_FLOOR: f64 = 1e-9;

/// Run parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    /// Tick budget.
    pub steps: u64,
    /// Per-agent, per-tick probability of computing.
    pub p_update: f64,
    /// Per-channel, per-tick probability that a primal agent transmits its latest block.
    pub p_comm: f64,
    /// Per-tick probability that a message stays in flight one more tick (0 = no extra delay).
    pub delay: f64,
    pub gamma: f64,
    pub rho: f64,
    pub delta: f64,
    /// Stop once the successive-iterate distance stays below this for `stop_window` ticks (0 disables).
    pub stop_tol: f64,
    pub stop_window: u64,
    pub snapshot_every: u64,
    /// Worker threads for primal computations within a tick.
    pub workers: usize,
    pub init_x: Option<Vec<f64>>,
    pub init_mu: Option<Vec<f64>>,
    /// Keep dual variables at their initial value.
    pub freeze_dual: bool,
    /// Sample sup-norm errors at every round completion.
    pub audit_contraction: bool,
    /// Compute the saddle point and evaluate distances and the bound.
    pub track_bound: bool,
    /// Also report the distance to the unregularized solution.
    pub compare_unregularized: bool,
    pub oracle_tol: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 10_000,
            p_update: 1.0,
            p_comm: 1.0,
            delay: 0.0,
            gamma: 0.01,
            rho: default_rho(0.1),
            delta: 0.1,
            stop_tol: 1e-6,
            stop_window: 10,
            snapshot_every: 1,
            workers: 1,
            init_x: None,
            init_mu: None,
            freeze_dual: false,
            audit_contraction: false,
            track_bound: true,
            compare_unregularized: false,
            oracle_tol: 1e-10,
        }
    }
}

impl SimulationConfig {
    /// Checks every precondition against the problem; returns the validated stepsizes.
    pub fn validate(&self, p: &ProblemSpec, geom: &DualGeometry, consts: &ProblemConstants) -> Result<Stepsizes> {
        let prob = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must lie in (0, 1]")))
            }
        };
        prob("p_update", self.p_update)?;
        prob("p_comm", self.p_comm)?;
        if !(0.0..1.0).contains(&self.delay) {
            return Err(Error::Config(format!("delay = {} must lie in [0, 1)", self.delay)));
        }
        if (self.delta - geom.delta).abs() > 1e-15 * self.delta.abs().max(1.0) {
            return Err(Error::Config(format!(
                "config delta = {} differs from the dual geometry delta = {}",
                self.delta, geom.delta
            )));
        }
        if self.steps == 0 || self.snapshot_every == 0 || self.workers == 0 || self.stop_window == 0 {
            return Err(Error::Config(
                "steps, snapshot_every, stop_window and workers must be positive".into(),
            ));
        }
        if !(self.stop_tol >= 0.0) || !(self.oracle_tol > 0.0) {
            return Err(Error::Config("stop_tol must be >= 0 and oracle_tol > 0".into()));
        }
        if let Some(x) = &self.init_x {
            let x = DVector::from_column_slice(x);
            if x.len() != p.n() || !p.bounds.contains(&x, 0.0) {
                return Err(Error::Config("init_x must be a point of the box".into()));
            }
        }
        if let Some(mu) = &self.init_mu {
            if mu.len() != p.m() {
                return Err(Error::Config(format!("init_mu must have length {}", p.m())));
            }
            geom.check_dual(p, &DVector::from_column_slice(mu))
                .map_err(|e| Error::Config(format!("init_mu: {e}")))?;
        }
        Stepsizes::new(self.gamma, self.rho, geom, consts)
    }
}

/// Everything produced by a run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub trace: Vec<TraceRecord>,
    pub summary: RunSummary,
    pub contraction: Vec<ContractionSample>,
    pub dual_updates: Vec<DualUpdateRecord>,
    pub epochs: Vec<EpochRecord>,
    pub kappa: Vec<KappaRecord>,
    pub saddle: Option<SaddlePoint>,
    pub rates: Option<RateConstants>,
}

/// Validates the configuration and runs to the tick budget or the stop rule.
pub fn run(
    p: &ProblemSpec,
    geom: &DualGeometry,
    consts: &ProblemConstants,
    cfg: &SimulationConfig,
) -> Result<RunResult> {
    Simulation::new(p, geom, consts, cfg.clone())?.run()
}

/// A simulation in progress.
pub struct Simulation {
    p: ProblemSpec,
    geom: DualGeometry,
    consts: ProblemConstants,
    cfg: SimulationConfig,
    steps: Stepsizes,
    topo: Topology,
    primals: Vec<PrimalAgent>,
    duals: Vec<DualAgent>,
    channels: BTreeMap<(AgentId, AgentId), VecDeque<Message>>,
    last_sent: HashMap<(AgentId, AgentId), u64>,
    last_delivered: HashMap<(AgentId, AgentId), u64>,
    schedule: Box<dyn Schedule>,
    observer: Observer,
    pool: Option<rayon::ThreadPool>,
    saddle: Option<SaddlePoint>,
    rates: Option<RateConstants>,
    mu0_dist_sq: f64,
    fixed_mu_cache: HashMap<DualStamp, DVector<f64>>,
    tick: u64,
    compute_counter: u64,
    seq: u64,
    counters: Counters,
    prev_x: DVector<f64>,
    recent: VecDeque<f64>,
    stop_tick: Option<u64>,
    trace: Vec<TraceRecord>,
    contraction: Vec<ContractionSample>,
    dual_records: Vec<DualUpdateRecord>,
    bound_violations: u64,
    min_slack_ratio: f64,
}

impl Simulation {
    pub fn new(
        p: &ProblemSpec,
        geom: &DualGeometry,
        consts: &ProblemConstants,
        cfg: SimulationConfig,
    ) -> Result<Self> {
        let steps = cfg.validate(p, geom, consts)?;
        let topo = Topology::new(p, geom);
        let x0 = cfg
            .init_x
            .as_ref()
            .map_or_else(|| p.bounds.midpoint(), |v| DVector::from_column_slice(v));
        let mu0 = cfg
            .init_mu
            .as_ref()
            .map_or_else(|| DVector::zeros(p.m()), |v| DVector::from_column_slice(v));
        let primals = (0..p.primal_partition.len())
            .map(|i| PrimalAgent::new(p, &topo, i, &x0, &mu0))
            .collect();
        let duals = (0..p.dual_partition.len())
            .map(|c| DualAgent::new(p, geom, &topo, c, &x0, &mu0))
            .collect();
        let (saddle, rates, mu0_dist_sq) = if cfg.track_bound {
            let sp = saddle_oracle(p, geom, consts, cfg.oracle_tol)?;
            let rc = rate_constants(p, geom, consts, cfg.gamma, cfg.rho)?;
            let d = (&mu0 - &sp.mu).norm_squared();
            (Some(sp), Some(rc), d)
        } else {
            (None, None, f64::NAN)
        };
        let pool = if cfg.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(cfg.workers)
                    .build()
                    .map_err(|e| Error::Config(format!("worker pool: {e}")))?,
            )
        } else {
            None
        };
        let schedule = Box::new(RandomSchedule::new(cfg.seed, cfg.p_update, cfg.p_comm, cfg.delay));
        Ok(Self {
            p: p.clone(),
            geom: geom.clone(),
            consts: consts.clone(),
            steps,
            observer: Observer::new(&topo),
            topo,
            primals,
            duals,
            channels: BTreeMap::new(),
            last_sent: HashMap::new(),
            last_delivered: HashMap::new(),
            schedule,
            pool,
            saddle,
            rates,
            mu0_dist_sq,
            fixed_mu_cache: HashMap::new(),
            tick: 0,
            compute_counter: 0,
            seq: 0,
            counters: Counters::default(),
            prev_x: x0,
            recent: VecDeque::new(),
            stop_tick: None,
            trace: Vec::new(),
            contraction: Vec::new(),
            dual_records: Vec::new(),
            bound_violations: 0,
            min_slack_ratio: f64::INFINITY,
            cfg,
        })
    }

    /// Replaces the random schedule (used by tests to script asynchrony).
    pub fn with_schedule(mut self, schedule: Box<dyn Schedule>) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn observer(&self) -> &Observer {
        &self.observer
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn primal_agents(&self) -> &[PrimalAgent] {
        &self.primals
    }

    pub fn dual_agents(&self) -> &[DualAgent] {
        &self.duals
    }

    pub fn counters(&self) -> Counters {
        let mut c = self.counters.clone();
        c.ops = self.observer.ops();
        c.ops_increments = self.observer.increments();
        c.t_min = self.observer.t_min();
        c.k = self.observer.k();
        c.messages_pending = self.channels.values().map(|q| q.len() as u64).sum();
        c.discards = self.primals.iter().map(|a| a.discards).sum();
        c.regressions = self.primals.iter().map(|a| a.regressions).sum();
        c.mixed_stamp_computations = self.primals.iter().map(|a| a.mixed_stamp_computations).sum();
        c
    }

    /// Concatenation of every primal agent's own block.
    pub fn primal_iterate(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.p.n());
        for a in &self.primals {
            for &i in &a.block {
                x[i] = a.x[i];
            }
        }
        x
    }

    /// Concatenation of every dual agent's own block.
    pub fn dual_iterate(&self) -> DVector<f64> {
        let mut mu = DVector::zeros(self.p.m());
        for d in &self.duals {
            for (k, &r) in d.rows.iter().enumerate() {
                mu[r] = d.mu[k];
            }
        }
        mu
    }

    /// True once the stop rule fired.
    pub fn stopped(&self) -> bool {
        self.stop_tick.is_some()
    }

    fn enqueue(&mut self, from: AgentId, to: AgentId, kind: MessageKind, payload: Payload) {
        let now = self.tick;
        let delay = self.schedule.extra_delay(now, from, to);
        self.seq += 1;
        let msg = Message {
            kind,
            sender: from,
            recipient: to,
            payload,
            sent_tick: now,
            due_tick: now + delay,
            seq: self.seq,
        };
        self.channels.entry((from, to)).or_default().push_back(msg);
        self.counters.messages_sent += 1;
    }

    fn deliver_due(&mut self) -> Result<()> {
        let now = self.tick;
        let keys: Vec<_> = self.channels.keys().copied().collect();
        for key in keys {
            loop {
                let queue = self.channels.get_mut(&key).expect("channel exists");
                if !queue.front().is_some_and(|m| m.due_tick <= now) {
                    break;
                }
                let msg = queue.pop_front().expect("front checked");
                let last = self.last_delivered.entry(key).or_insert(0);
                if msg.seq <= *last {
                    self.counters.fifo_violations += 1;
                }
                *last = msg.seq;
                self.counters.messages_delivered += 1;
                self.dispatch(msg)?;
            }
        }
        Ok(())
    }

    fn dispatch(&mut self, msg: Message) -> Result<()> {
        match (msg.sender, msg.recipient, msg.payload) {
            (AgentId::Primal(i), AgentId::Primal(j), Payload::Primal { values, record }) => {
                let receipt = self.primals[j].receive_primal(i, &values, &record.stamp)?;
                if receipt == Receipt::Adopted
                    && self.observer.on_adopt(i, j, record.compute_id, record.counted, self.compute_counter)
                {
                    self.on_increment()?;
                }
            }
            (AgentId::Primal(i), AgentId::Dual(c), Payload::Primal { values, record }) => {
                self.duals[c].receive_primal(i, &values, record)?;
            }
            (AgentId::Dual(c), AgentId::Primal(i), Payload::Dual { values, t }) => {
                let rows = self.p.dual_partition.block(c).to_vec();
                self.primals[i].receive_dual(c, &rows, &values, t);
            }
            (s, r, _) => {
                return Err(Error::Protocol(format!("malformed message from {s} to {r}")));
            }
        }
        Ok(())
    }

    fn compute_phase(&mut self) -> Result<()> {
        let now = self.tick;
        let active: Vec<bool> = (0..self.primals.len()).map(|i| self.schedule.activate(now, i)).collect();
        let p = &self.p;
        let steps = &self.steps;
        let propose = |(a, on): (&PrimalAgent, &bool)| -> Option<Result<Proposal>> {
            on.then(|| a.propose(p, steps))
        };
        let proposals: Vec<Option<Result<Proposal>>> = match &self.pool {
            Some(pool) => pool.install(|| self.primals.par_iter().zip(active.par_iter()).map(propose).collect()),
            None => self.primals.iter().zip(active.iter()).map(propose).collect(),
        };
        for (i, prop) in proposals.into_iter().enumerate() {
            let Some(prop) = prop else { continue };
            let prop = prop?;
            self.primals[i].apply(&prop);
            self.compute_counter += 1;
            self.counters.primal_computations += 1;
            let agent = &self.primals[i];
            let counted = self.observer.is_live(&agent.stamp, &agent.relevant_duals);
            let record = ComputeRecord {
                compute_id: self.compute_counter,
                tick: now,
                stamp: agent.stamp.clone(),
                ops: if counted { self.observer.ops() } else { 0 },
                counted,
            };
            self.primals[i].latest = Some(record);
            if self.observer.on_compute(i, self.compute_counter, counted) {
                self.on_increment()?;
            }
        }
        Ok(())
    }

    fn transmit_phase(&mut self) {
        let now = self.tick;
        for i in 0..self.primals.len() {
            let Some(record) = self.primals[i].latest.clone() else { continue };
            let targets: Vec<(AgentId, MessageKind)> = self.topo.listeners[i]
                .iter()
                .map(|&j| (AgentId::Primal(j), MessageKind::PrimalToPrimal))
                .chain(
                    self.topo.relevant_duals[i]
                        .iter()
                        .map(|&c| (AgentId::Dual(c), MessageKind::PrimalToDual)),
                )
                .collect();
            for (to, kind) in targets {
                let key = (AgentId::Primal(i), to);
                if self.last_sent.get(&key).is_some_and(|&id| id >= record.compute_id) {
                    continue;
                }
                if !self.schedule.transmit(now, key.0, to) {
                    continue;
                }
                self.last_sent.insert(key, record.compute_id);
                let values = self.primals[i].own_values();
                self.enqueue(key.0, to, kind, Payload::Primal {
                    values,
                    record: record.clone(),
                });
            }
        }
    }

    fn dual_phase(&mut self) -> Result<()> {
        if self.cfg.freeze_dual {
            return Ok(());
        }
        for c in 0..self.duals.len() {
            if !self.duals[c].is_fresh() {
                continue;
            }
            let before = self.dual_block_dist_sq(c);
            let update = self.duals[c].dual_compute(&self.p, &self.geom, self.steps.rho)?;
            let after = self.dual_block_dist_sq(c);
            self.counters.dual_updates += 1;
            self.observer.on_dual_update(self.tick, &update, self.compute_counter);
            self.dual_records.push(DualUpdateRecord {
                tick: self.tick,
                dual: c,
                t: update.t,
                kappa_ops: update.kappa_ops,
                dist_before_sq: before,
                dist_after_sq: after,
            });
            let values = self.duals[c].mu.clone();
            let t = self.duals[c].t;
            for i in self.topo.constrained_primals[c].clone() {
                self.enqueue(AgentId::Dual(c), AgentId::Primal(i), MessageKind::DualToPrimal, Payload::Dual {
                    values: values.clone(),
                    t,
                });
            }
        }
        Ok(())
    }

    fn dual_block_dist_sq(&self, c: usize) -> f64 {
        match &self.saddle {
            Some(sp) => {
                let d = &self.duals[c];
                d.rows.iter().enumerate().map(|(k, &r)| (d.mu[k] - sp.mu[r]).powi(2)).sum()
            }
            None => f64::NAN,
        }
    }

    fn on_increment(&mut self) -> Result<()> {
        if !self.cfg.audit_contraction {
            return Ok(());
        }
        let live = self.observer.live().clone();
        if !self.fixed_mu_cache.contains_key(&live) {
            let mu = self.dual_iterate();
            let target = fixed_mu_minimizer(&self.p, &self.geom, &self.consts, &mu, 1e-14)?;
            self.fixed_mu_cache.insert(live.clone(), target);
        }
        let target = &self.fixed_mu_cache[&live];
        let mut sup = 0.0f64;
        for a in &self.primals {
            for i in a.held_coords() {
                sup = sup.max((a.x[i] - target[i]).abs());
            }
        }
        for ((from, to), queue) in &self.channels {
            let (AgentId::Primal(i), AgentId::Primal(_)) = (from, to) else { continue };
            for msg in queue {
                if let Payload::Primal { values, record } = &msg.payload {
                    if self.observer.is_live(&record.stamp, &self.topo.relevant_duals[*i]) {
                        for (k, &c) in self.primals[*i].block.iter().enumerate() {
                            sup = sup.max((values[k] - target[c]).abs());
                        }
                    }
                }
            }
        }
        let ops = self.observer.ops();
        let ratio = self
            .contraction
            .last()
            .filter(|s| s.stamp == live && s.ops + 1 == ops && s.sup_error > CONTRACTION_FLOOR)
            .map(|s| sup / s.sup_error);
        self.contraction.push(ContractionSample {
            tick: self.tick,
            stamp: live,
            ops,
            sup_error: sup,
            ratio,
        });
        Ok(())
    }

    fn snapshot(&mut self, successive: f64) {
        let counters = self.counters();
        let stamp = self.observer.live().clone();
        let (agent_dist_sq, global_dist_sq, bound) = match (&self.saddle, &self.rates) {
            (Some(sp), Some(rc)) => {
                let agents: Vec<f64> = self
                    .primals
                    .iter()
                    .map(|a| a.held_coords().iter().map(|&i| (a.x[i] - sp.x[i]).powi(2)).sum())
                    .collect();
                let global = (self.primal_iterate() - &sp.x).norm_squared();
                let terms = theorem_bound_terms(
                    rc,
                    self.observer.ops(),
                    self.observer.t_min(),
                    self.observer.k(),
                    self.mu0_dist_sq,
                    None,
                );
                (agents, global, terms.total())
            }
            _ => (vec![f64::NAN; self.primals.len()], f64::NAN, f64::NAN),
        };
        let max_agent = agent_dist_sq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if bound.is_finite() {
            if max_agent > bound {
                self.bound_violations += 1;
            }
            if max_agent > 0.0 {
                self.min_slack_ratio = self.min_slack_ratio.min(bound / max_agent);
            }
        }
        self.trace.push(TraceRecord {
            tick: self.tick,
            stamp,
            ops: counters.ops,
            t_min: counters.t_min,
            k: counters.k,
            global_dist_sq,
            max_agent_dist_sq: max_agent,
            agent_dist_sq,
            bound,
            successive_dist: successive,
            discards: counters.discards,
            dual_updates: counters.dual_updates,
            mixed_stamp: counters.mixed_stamp_computations,
        });
    }

    /// Runs one tick.
    pub fn step(&mut self) -> Result<()> {
        self.deliver_due()?;
        self.compute_phase()?;
        self.transmit_phase();
        self.deliver_due()?;
        self.dual_phase()?;

        let x = self.primal_iterate();
        let successive = (&x - &self.prev_x).norm();
        self.prev_x = x;
        self.recent.push_back(successive);
        if self.recent.len() as u64 > self.cfg.stop_window {
            self.recent.pop_front();
        }
        let last = self.tick + 1 == self.cfg.steps;
        let window_full = self.recent.len() as u64 == self.cfg.stop_window;
        if self.cfg.stop_tol > 0.0
            && self.stop_tick.is_none()
            && window_full
            && self.recent.iter().all(|d| *d < self.cfg.stop_tol)
        {
            self.stop_tick = Some(self.tick);
        }
        if self.tick.is_multiple_of(self.cfg.snapshot_every) || last || self.stop_tick.is_some() {
            self.snapshot(successive);
        }
        self.tick += 1;
        Ok(())
    }

    /// Runs to the tick budget or the stop rule and assembles the results.
    pub fn run(mut self) -> Result<RunResult> {
        while self.tick < self.cfg.steps && self.stop_tick.is_none() {
            self.step()?;
        }
        self.finish()
    }

    /// Assembles results without running further ticks.
    pub fn finish(self) -> Result<RunResult> {
        let counters = self.counters();
        let x = self.primal_iterate();
        let mu = self.dual_iterate();
        let unregularized = if self.cfg.compare_unregularized {
            let g0 = DualGeometry::unregularized(&self.p)?;
            Some(saddle_oracle(&self.p, &g0, &self.consts, self.cfg.oracle_tol)?.x)
        } else {
            None
        };
        let bound = match (&self.rates, self.trace.last()) {
            (Some(rc), Some(_)) => {
                let terms = theorem_bound_terms(
                    rc,
                    counters.ops,
                    counters.t_min,
                    counters.k,
                    self.mu0_dist_sq,
                    None,
                );
                Some(BoundSummary {
                    violations: self.bound_violations,
                    min_slack_ratio: self.min_slack_ratio,
                    final_bound: terms.total(),
                    final_terms: terms,
                    mu0_dist_sq: self.mu0_dist_sq,
                })
            }
            _ => None,
        };
        let contraction = self.cfg.audit_contraction.then(|| {
            let q_p = 1.0 - self.steps.gamma * self.consts.beta;
            let ratios: Vec<f64> = self.contraction.iter().filter_map(|s| s.ratio).collect();
            ContractionSummary {
                q_p,
                samples: self.contraction.len(),
                checked_ratios: ratios.len(),
                max_ratio: ratios.iter().copied().fold(0.0, f64::max),
                violations: ratios.iter().filter(|r| **r > q_p + 1e-9).count(),
            }
        });
        let summary = RunSummary {
            seed: self.cfg.seed,
            config: self.cfg.clone(),
            n: self.p.n(),
            m: self.p.m(),
            primal_agents: self.primals.len(),
            dual_agents: self.duals.len(),
            ticks: self.tick,
            converged: self.stop_tick.is_some(),
            stop_tick: self.stop_tick,
            final_x: x.iter().copied().collect(),
            final_mu: mu.iter().copied().collect(),
            x_hat_delta: self.saddle.as_ref().map(|s| s.x.iter().copied().collect()),
            mu_hat_delta: self.saddle.as_ref().map(|s| s.mu.iter().copied().collect()),
            final_dist_to_saddle: self.saddle.as_ref().map(|s| (&x - &s.x).norm()),
            final_dist_to_unregularized: unregularized.as_ref().map(|u| (&x - u).norm()),
            x_hat_unregularized: unregularized.map(|u| u.iter().copied().collect()),
            counters,
            bound,
            contraction,
        };
        Ok(RunResult {
            trace: self.trace,
            summary,
            contraction: self.contraction,
            dual_updates: self.dual_records,
            epochs: self.observer.epochs().to_vec(),
            kappa: self.observer.kappa_records().to_vec(),
            saddle: self.saddle,
            rates: self.rates,
        })
    }
}
