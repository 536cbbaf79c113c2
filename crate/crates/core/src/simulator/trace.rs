use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::agents::DualStamp;
use crate::error::Result;
use crate::reference::BoundTerms;

use super::SimulationConfig;

/// Column names of the trace CSV, in order.
pub const TRACE_HEADER: [&str; 13] = [
    "tick",
    "stamp",
    "ops",
    "T",
    "K",
    "global_dist_sq",
    "max_agent_dist_sq",
    "agent_dist_sq",
    "bound",
    "successive_dist",
    "discards",
    "dual_updates",
    "mixed_stamp",
];

/// Snapshot of the run after a tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u64,
    pub stamp: DualStamp,
    pub ops: u64,
    pub t_min: u64,
    pub k: u64,
    /// `|x - x_hat_delta|^2` for the concatenated iterate.
    pub global_dist_sq: f64,
    pub max_agent_dist_sq: f64,
    /// Per primal agent, squared distance over the coordinates it holds.
    pub agent_dist_sq: Vec<f64>,
    pub bound: f64,
    /// `|x(k) - x(k-1)|` of the concatenated iterate.
    pub successive_dist: f64,
    pub discards: u64,
    pub dual_updates: u64,
    pub mixed_stamp: u64,
}

fn float(v: f64) -> String {
    format!("{v:e}")
}

/// Writes records as headered CSV; list columns use `;` separators.
pub fn write_trace_csv<W: Write>(out: W, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        let agents = r.agent_dist_sq.iter().map(|v| float(*v)).collect::<Vec<_>>().join(";");
        w.write_record([
            r.tick.to_string(),
            r.stamp.to_string(),
            r.ops.to_string(),
            r.t_min.to_string(),
            r.k.to_string(),
            float(r.global_dist_sq),
            float(r.max_agent_dist_sq),
            agents,
            float(r.bound),
            float(r.successive_dist),
            r.discards.to_string(),
            r.dual_updates.to_string(),
            r.mixed_stamp.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Event counters accumulated over a run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub ops_increments: u64,
    pub ops: u64,
    pub t_min: u64,
    pub k: u64,
    pub dual_updates: u64,
    pub primal_computations: u64,
    pub messages_sent: u64,
    pub messages_delivered: u64,
    pub messages_pending: u64,
    pub discards: u64,
    pub regressions: u64,
    pub mixed_stamp_computations: u64,
    pub fifo_violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    /// Snapshots where some agent's distance exceeded the bound.
    pub violations: u64,
    /// Smallest ratio of bound to measured distance over all snapshots.
    pub min_slack_ratio: f64,
    pub final_bound: f64,
    pub final_terms: BoundTerms,
    pub mu0_dist_sq: f64,
}

/// One sup-norm error sample taken at a round completion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionSample {
    pub tick: u64,
    pub stamp: DualStamp,
    pub ops: u64,
    pub sup_error: f64,
    /// Ratio to the previous sample under the same stamp, when that sample exceeded the floor.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionSummary {
    pub q_p: f64,
    pub samples: usize,
    pub checked_ratios: usize,
    pub max_ratio: f64,
    pub violations: usize,
}

/// Per-update check data for the dual block recursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualUpdateRecord {
    pub tick: u64,
    pub dual: usize,
    pub t: u64,
    pub kappa_ops: u64,
    pub dist_before_sq: f64,
    pub dist_after_sq: f64,
}

/// JSON run summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub config: SimulationConfig,
    pub n: usize,
    pub m: usize,
    pub primal_agents: usize,
    pub dual_agents: usize,
    pub ticks: u64,
    pub converged: bool,
    pub stop_tick: Option<u64>,
    pub final_x: Vec<f64>,
    pub final_mu: Vec<f64>,
    pub x_hat_delta: Option<Vec<f64>>,
    pub mu_hat_delta: Option<Vec<f64>>,
    pub final_dist_to_saddle: Option<f64>,
    pub x_hat_unregularized: Option<Vec<f64>>,
    pub final_dist_to_unregularized: Option<f64>,
    pub counters: Counters,
    pub bound: Option<BoundSummary>,
    pub contraction: Option<ContractionSummary>,
}
