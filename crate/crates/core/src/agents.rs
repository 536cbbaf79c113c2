//! Primal and dual agent state machines with stamp-tagged messages.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{DualGeometry, ProblemSpec};
use crate::projection::{project_box, project_nonneg_l1, BoxSet, NonnegL1Ball};
use crate::reference::Stepsizes;

/// Per-dual-agent update counters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DualStamp(pub Vec<u64>);

impl DualStamp {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when both stamps agree on every listed component.
    pub fn matches_on(&self, other: &DualStamp, comps: &[usize]) -> bool {
        comps.iter().all(|&c| self.0[c] == other.0[c])
    }

    /// Smallest update count.
    pub fn min_count(&self) -> u64 {
        self.0.iter().copied().min().unwrap_or(0)
    }
}

impl fmt::Display for DualStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(";")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Communication graph derived from Hessian and constraint sparsity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    /// Essential neighbors `N_i`: primal agents whose blocks enter agent `i`'s gradient.
    pub neighbors: Vec<Vec<usize>>,
    /// Primal agents that must receive agent `i`'s block.
    pub listeners: Vec<Vec<usize>>,
    /// Dual blocks whose constraints involve agent `i`'s block.
    pub relevant_duals: Vec<Vec<usize>>,
    /// Primal agents constrained by dual block `c`.
    pub constrained_primals: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(p: &ProblemSpec, geom: &DualGeometry) -> Self {
        let owner = p.primal_partition.owners();
        let np = p.primal_partition.len();
        let nd = p.dual_partition.len();
        let coupling = p.hessian_coupling(geom);
        let mut neighbors = vec![Vec::new(); np];
        for (i, block) in p.primal_partition.blocks().iter().enumerate() {
            let mut set = vec![false; np];
            for &a in block {
                for (b, &on) in coupling[a].iter().enumerate() {
                    if on && owner[b] != i {
                        set[owner[b]] = true;
                    }
                }
            }
            neighbors[i] = (0..np).filter(|&j| set[j]).collect();
        }
        let mut listeners = vec![Vec::new(); np];
        for (i, ns) in neighbors.iter().enumerate() {
            for &j in ns {
                listeners[j].push(i);
            }
        }
        let constrained_primals: Vec<Vec<usize>> = (0..nd).map(|c| dual_broadcast_targets(p, c)).collect();
        let mut relevant_duals = vec![Vec::new(); np];
        for (c, ps) in constrained_primals.iter().enumerate() {
            for &i in ps {
                relevant_duals[i].push(c);
            }
        }
        Self {
            neighbors,
            listeners,
            relevant_duals,
            constrained_primals,
        }
    }
}

/// Primal agents whose blocks appear with nonzero sensitivity in dual block `c`.
pub fn dual_broadcast_targets(p: &ProblemSpec, c: usize) -> Vec<usize> {
    let pattern = p.constraint_sparsity();
    let rows = p.dual_partition.block(c);
    p.primal_partition
        .blocks()
        .iter()
        .enumerate()
        .filter(|(_, cols)| rows.iter().any(|&r| cols.iter().any(|&i| pattern[r][i])))
        .map(|(i, _)| i)
        .collect()
}

/// Where a held neighbor block came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CopyOrigin {
    /// The common initial point.
    Initial,
    /// Adopted from a message under the current stamp.
    Message,
    /// Held over from an earlier stamp; the starting value for the current one.
    CarryOver,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborCopy {
    pub origin: CopyOrigin,
    /// Stamp of the holder when the copy was adopted or retagged.
    pub epoch: DualStamp,
    /// Stamp under which the sender computed the block.
    pub source_stamp: Option<DualStamp>,
}

/// Bookkeeping attached to every primal computation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeRecord {
    pub compute_id: u64,
    pub tick: u64,
    pub stamp: DualStamp,
    /// Observer round count at compute time (zero when not computed under the live stamp).
    pub ops: u64,
    /// Computed under the live stamp on every relevant dual block.
    pub counted: bool,
}

/// Identifier of an agent in the simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentId {
    Primal(usize),
    Dual(usize),
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentId::Primal(i) => write!(f, "p{i}"),
            AgentId::Dual(c) => write!(f, "d{c}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    PrimalToPrimal,
    PrimalToDual,
    DualToPrimal,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Primal { values: DVector<f64>, record: ComputeRecord },
    Dual { values: DVector<f64>, t: u64 },
}

/// An immutable message in flight.
#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: AgentId,
    pub recipient: AgentId,
    pub payload: Payload,
    pub sent_tick: u64,
    pub due_tick: u64,
    pub seq: u64,
}

/// Result of handing a message to an agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Receipt {
    Adopted,
    /// Primal block under a different stamp; discarded.
    Discarded,
    /// Dual block older than the one held; dropped.
    Regressed,
}

/// A computed but not yet applied primal step.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub values: DVector<f64>,
    /// Every consumed input belonged to the agent's current stamp.
    pub consistent: bool,
}

/// Working memory of a primal agent.
#[derive(Clone, Debug)]
pub struct PrimalAgent {
    pub id: usize,
    pub block: Vec<usize>,
    pub bounds: BoxSet,
    /// Local view of the full primal vector.
    pub x: DVector<f64>,
    /// Local view of the full dual vector.
    pub mu: DVector<f64>,
    pub stamp: DualStamp,
    pub neighbors: Vec<usize>,
    pub neighbor_blocks: Vec<Vec<usize>>,
    pub neighbor_duals: Vec<Vec<usize>>,
    pub relevant_duals: Vec<usize>,
    pub copies: Vec<NeighborCopy>,
    pub latest: Option<ComputeRecord>,
    pub computations: u64,
    pub discards: u64,
    pub regressions: u64,
    pub mixed_stamp_computations: u64,
}

impl PrimalAgent {
    pub fn new(
        p: &ProblemSpec,
        topo: &Topology,
        id: usize,
        x0: &DVector<f64>,
        mu0: &DVector<f64>,
    ) -> Self {
        let block = p.primal_partition.block(id).to_vec();
        let neighbors = topo.neighbors[id].clone();
        let stamp = DualStamp::zeros(p.dual_partition.len());
        Self {
            id,
            bounds: p.bounds.restrict(&block),
            block,
            x: x0.clone(),
            mu: mu0.clone(),
            neighbor_blocks: neighbors.iter().map(|&j| p.primal_partition.block(j).to_vec()).collect(),
            neighbor_duals: neighbors.iter().map(|&j| topo.relevant_duals[j].clone()).collect(),
            copies: neighbors
                .iter()
                .map(|_| NeighborCopy {
                    origin: CopyOrigin::Initial,
                    epoch: stamp.clone(),
                    source_stamp: None,
                })
                .collect(),
            neighbors,
            relevant_duals: topo.relevant_duals[id].clone(),
            stamp,
            latest: None,
            computations: 0,
            discards: 0,
            regressions: 0,
            mixed_stamp_computations: 0,
        }
    }

    pub fn own_values(&self) -> DVector<f64> {
        DVector::from_iterator(self.block.len(), self.block.iter().map(|&i| self.x[i]))
    }

    /// Coordinates this agent holds: its own block followed by its neighbors' blocks.
    pub fn held_coords(&self) -> Vec<usize> {
        let mut v = self.block.clone();
        for b in &self.neighbor_blocks {
            v.extend_from_slice(b);
        }
        v
    }

    /// True when every consumed neighbor block belongs to the current stamp epoch.
    pub fn inputs_consistent(&self) -> bool {
        self.copies.iter().zip(self.neighbor_duals.iter()).all(|(c, duals)| {
            c.epoch == self.stamp
                && match c.origin {
                    CopyOrigin::Message => c
                        .source_stamp
                        .as_ref()
                        .is_some_and(|s| s.matches_on(&self.stamp, duals)),
                    _ => true,
                }
        })
    }

    /// Computes the next own block from the current local view without applying it.
    pub fn propose(&self, p: &ProblemSpec, steps: &Stepsizes) -> Result<Proposal> {
        if !(steps.gamma > 0.0) || !steps.gamma.is_finite() {
            return Err(Error::Stepsize(format!("gamma = {} must be positive", steps.gamma)));
        }
        let grad = p.grad_x_coords(&self.x, &self.mu, &self.block);
        let values = project_box(&self.bounds, &(self.own_values() - grad * steps.gamma));
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("primal agent {} update", self.id)));
        }
        Ok(Proposal {
            values,
            consistent: self.inputs_consistent(),
        })
    }

    pub fn apply(&mut self, proposal: &Proposal) {
        if !proposal.consistent {
            self.mixed_stamp_computations += 1;
        }
        for (k, &i) in self.block.iter().enumerate() {
            self.x[i] = proposal.values[k];
        }
        self.computations += 1;
    }

    /// Projected gradient step on the own block; returns the new block values.
    pub fn primal_compute(&mut self, p: &ProblemSpec, steps: &Stepsizes) -> Result<DVector<f64>> {
        let proposal = self.propose(p, steps)?;
        self.apply(&proposal);
        Ok(proposal.values)
    }

    fn retag(&mut self) {
        for c in &mut self.copies {
            if c.epoch != self.stamp {
                c.origin = match c.origin {
                    CopyOrigin::Initial => CopyOrigin::Initial,
                    _ => CopyOrigin::CarryOver,
                };
                c.epoch = self.stamp.clone();
            }
        }
    }

    /// Adopt a neighbor block when it was computed under this agent's stamp.
    pub fn receive_primal(&mut self, sender: usize, values: &DVector<f64>, stamp: &DualStamp) -> Result<Receipt> {
        let k = self.neighbors.iter().position(|&j| j == sender).ok_or_else(|| {
            Error::Protocol(format!("primal agent {} got a block from non-neighbor {sender}", self.id))
        })?;
        let mut changed = false;
        for c in 0..self.stamp.len() {
            if !self.relevant_duals.contains(&c) && stamp.0[c] > self.stamp.0[c] {
                self.stamp.0[c] = stamp.0[c];
                changed = true;
            }
        }
        if changed {
            self.retag();
        }
        if !stamp.matches_on(&self.stamp, &self.neighbor_duals[k]) {
            self.discards += 1;
            return Ok(Receipt::Discarded);
        }
        for (v, &i) in self.neighbor_blocks[k].iter().enumerate() {
            self.x[i] = values[v];
        }
        self.copies[k] = NeighborCopy {
            origin: CopyOrigin::Message,
            epoch: self.stamp.clone(),
            source_stamp: Some(stamp.clone()),
        };
        Ok(Receipt::Adopted)
    }

    /// Adopt a dual block unless it is older than the one held.
    pub fn receive_dual(&mut self, c: usize, rows: &[usize], values: &DVector<f64>, t: u64) -> Receipt {
        if t < self.stamp.0[c] {
            self.regressions += 1;
            return Receipt::Regressed;
        }
        for (k, &r) in rows.iter().enumerate() {
            self.mu[r] = values[k];
        }
        if t > self.stamp.0[c] {
            self.stamp.0[c] = t;
            self.retag();
        }
        Receipt::Adopted
    }
}

/// A primal block held by a dual agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReceivedBlock {
    pub record: ComputeRecord,
}

/// Summary of a dual update for the observer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualUpdate {
    pub dual: usize,
    pub t: u64,
    /// Earliest compute tick among the primal blocks used.
    pub kappa_tick: u64,
    /// Smallest round count among the primal blocks used.
    pub kappa_ops: u64,
}

/// Working memory of a dual agent.
#[derive(Clone, Debug)]
pub struct DualAgent {
    pub id: usize,
    pub rows: Vec<usize>,
    pub set: NonnegL1Ball,
    pub mu: DVector<f64>,
    pub t: u64,
    /// Local view of the full primal vector.
    pub x: DVector<f64>,
    pub primals: Vec<usize>,
    pub primal_blocks: Vec<Vec<usize>>,
    pub received: Vec<Option<ReceivedBlock>>,
    pub updates: u64,
}

impl DualAgent {
    pub fn new(
        p: &ProblemSpec,
        geom: &DualGeometry,
        topo: &Topology,
        id: usize,
        x0: &DVector<f64>,
        mu0: &DVector<f64>,
    ) -> Self {
        let rows = p.dual_partition.block(id).to_vec();
        let primals = topo.constrained_primals[id].clone();
        Self {
            id,
            mu: DVector::from_iterator(rows.len(), rows.iter().map(|&r| mu0[r])),
            rows,
            set: geom.block_sets[id],
            t: 0,
            x: x0.clone(),
            primal_blocks: primals.iter().map(|&i| p.primal_partition.block(i).to_vec()).collect(),
            received: vec![None; primals.len()],
            primals,
            updates: 0,
        }
    }

    /// Store the latest block from `sender`; later blocks always replace earlier ones.
    pub fn receive_primal(&mut self, sender: usize, values: &DVector<f64>, record: ComputeRecord) -> Result<Receipt> {
        let k = self.primals.iter().position(|&i| i == sender).ok_or_else(|| {
            Error::Protocol(format!("dual agent {} got a block from unconstrained primal {sender}", self.id))
        })?;
        for (v, &i) in self.primal_blocks[k].iter().enumerate() {
            self.x[i] = values[v];
        }
        self.received[k] = Some(ReceivedBlock { record });
        Ok(Receipt::Adopted)
    }

    /// True when every constrained primal agent delivered a block computed under the current `t`.
    pub fn is_fresh(&self) -> bool {
        self.received
            .iter()
            .all(|r| r.as_ref().is_some_and(|b| b.record.stamp.0[self.id] == self.t))
    }

    /// Projected ascent step on the own block.
    pub fn dual_compute(&mut self, p: &ProblemSpec, geom: &DualGeometry, rho: f64) -> Result<DualUpdate> {
        let rho_max = 2.0 * geom.delta / (geom.delta * geom.delta + 2.0);
        if !(rho > 0.0 && rho < rho_max) {
            return Err(Error::Stepsize(format!(
                "rho = {rho} must satisfy 0 < rho < 2*delta/(delta^2 + 2) = {rho_max}"
            )));
        }
        if !self.is_fresh() {
            return Err(Error::Protocol(format!(
                "dual agent {} updated without fresh blocks at t = {}",
                self.id, self.t
            )));
        }
        let g = p.constraints.value_rows(&self.x, &self.rows);
        let next = project_nonneg_l1(&self.set, &(&self.mu + (g - &self.mu * geom.delta) * rho));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("dual agent {} update", self.id)));
        }
        self.mu = next;
        self.t += 1;
        self.updates += 1;
        let records = self.received.iter().flatten().map(|b| &b.record);
        let kappa_tick = records.clone().map(|r| r.tick).min().unwrap_or(0);
        let kappa_ops = records.map(|r| r.ops).min().unwrap_or(0);
        Ok(DualUpdate {
            dual: self.id,
            t: self.t,
            kappa_tick,
            kappa_ops,
        })
    }
}
