//! Network-flow benchmark: route traffic over fixed source-target paths
//! subject to edge capacities, maximizing `W * sum log(1 + x_i)`.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Constraints, Objective, Partition, ProblemSpec};
use crate::projection::BoxSet;
use crate::reference::default_rho;
use crate::simulator::SimulationConfig;

pub const SOURCE: usize = 0;
pub const TARGET: usize = 1;
pub const TERMINAL_CAPACITY: f64 = 50.0;
pub const INTERIOR_CAPACITY: (f64, f64) = (5.0, 40.0);
pub const FLOW_UPPER: f64 = 10.0;
/// Utility weight giving a diagonal-dominance margin of 0.25.
pub const DEFAULT_WEIGHT: f64 = 30.25;

const ATTEMPTS_PER_SHAPE: usize = 20_000;

/// Instance size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Scale {
    /// 3 groups of 5 paths and 22 edges (n = 15, m = 66).
    Full,
    /// One group of 3 paths and 8 edges.
    Small,
    Custom {
        groups: usize,
        paths_per_group: usize,
        edges_per_group: usize,
    },
}

impl Scale {
    /// `(groups, paths_per_group, edges_per_group)`.
    pub fn shape(self) -> (usize, usize, usize) {
        match self {
            Scale::Full => (3, 5, 22),
            Scale::Small => (1, 3, 8),
            Scale::Custom {
                groups,
                paths_per_group,
                edges_per_group,
            } => (groups, paths_per_group, edges_per_group),
        }
    }
}

/// How paths and edges are assigned to agents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionPreset {
    /// One agent per path and one per edge.
    Scalar,
    /// One primal and one dual agent per edge group.
    Grouped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
    pub group: usize,
}

/// A layered source-target network with paths grouped into edge-disjoint clusters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowNetwork {
    pub seed: u64,
    pub scale: Scale,
    /// Each path as a list of edge indices from source to target.
    pub paths: Vec<Vec<usize>>,
    pub edges: Vec<Edge>,
    /// Path indices of each group.
    pub path_groups: Vec<Vec<usize>>,
    /// Edge indices of each group.
    pub edge_groups: Vec<Vec<usize>>,
    pub weight: f64,
}

impl FlowNetwork {
    pub fn n(&self) -> usize {
        self.paths.len()
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// `A[k, i] = 1` iff path `i` traverses edge `k`.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.m(), self.n());
        for (i, path) in self.paths.iter().enumerate() {
            for &k in path {
                a[(k, i)] = 1.0;
            }
        }
        a
    }

    pub fn capacities(&self) -> DVector<f64> {
        DVector::from_iterator(self.m(), self.edges.iter().map(|e| e.capacity))
    }

    /// The same network with a different utility weight.
    pub fn with_weight(&self, weight: f64) -> Self {
        Self {
            weight,
            ..self.clone()
        }
    }

    pub fn partitions(&self, preset: PartitionPreset) -> Result<(Partition, Partition)> {
        match preset {
            PartitionPreset::Scalar => Ok((Partition::scalar(self.n()), Partition::scalar(self.m()))),
            PartitionPreset::Grouped => Ok((
                Partition::new(self.path_groups.clone(), self.n())?,
                Partition::new(self.edge_groups.clone(), self.m())?,
            )),
        }
    }

    /// `min -W sum log(1 + x_i)` over `[0, 10]^n` subject to `A x <= b`.
    pub fn to_problem(&self, preset: PartitionPreset) -> Result<ProblemSpec> {
        if !(self.weight > 0.0) {
            return Err(Error::InvalidProblem(format!("weight {} must be positive", self.weight)));
        }
        let n = self.n();
        let bounds = BoxSet::new(DVector::zeros(n), DVector::from_element(n, FLOW_UPPER))?;
        let p = ProblemSpec::new(
            Objective::LogUtility { weight: self.weight },
            Constraints::Affine {
                matrix: self.incidence(),
                offset: self.capacities(),
            },
            bounds,
            DVector::zeros(n),
            -self.weight * n as f64 * (1.0 + FLOW_UPPER).ln(),
        )?;
        let (primal, dual) = self.partitions(preset)?;
        p.with_partitions(primal, dual)
    }

    /// Writes `edge,from,to,capacity,group,paths` rows; `paths` is `;`-separated.
    pub fn write_edge_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut users: Vec<Vec<usize>> = vec![Vec::new(); self.m()];
        for (i, path) in self.paths.iter().enumerate() {
            for &k in path {
                users[k].push(i);
            }
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["edge", "from", "to", "capacity", "group", "paths"])?;
        for (k, e) in self.edges.iter().enumerate() {
            let paths = users[k].iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
            w.write_record([
                k.to_string(),
                e.from.to_string(),
                e.to.to_string(),
                e.capacity.to_string(),
                e.group.to_string(),
                paths,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Layer count and width candidates, nearest to `edges / paths` layers first.
fn group_shapes(paths: usize, edges: usize) -> Vec<(usize, usize)> {
    let base = edges.div_ceil(paths).max(1);
    let mut layers: Vec<usize> = (1..=edges).collect();
    layers.sort_by_key(|&l| (l.abs_diff(base), l));
    let mut widths: Vec<usize> = (2..=paths.max(2)).collect();
    widths.sort_by_key(|&w| (w.abs_diff(3), w));
    layers
        .into_iter()
        .flat_map(|l| widths.iter().map(move |&w| (l, w)))
        .filter(|&(l, w)| {
            let max_union = paths.min(w) * 2 + (l - 1) * paths.min(w * w);
            max_union >= edges && l < edges
        })
        .collect()
}

/// A route as its `(from, to)` hops.
type Route = Vec<(usize, usize)>;

/// Samples `paths` distinct layered routes whose union has exactly `edges` edges.
/// Returns the hops of each route and the number of interior nodes used.
fn sample_group(
    rng: &mut ChaCha8Rng,
    paths: usize,
    edges: usize,
    first_node: usize,
) -> Option<(Vec<Route>, usize)> {
    for (layers, width) in group_shapes(paths, edges) {
        if width.checked_pow(layers as u32).is_some_and(|v| v < paths) {
            continue;
        }
        let layer_nodes: Vec<Vec<usize>> = (0..layers)
            .map(|l| (0..width).map(|w| first_node + l * width + w).collect())
            .collect();
        for _ in 0..ATTEMPTS_PER_SHAPE {
            let routes: Vec<Vec<usize>> = (0..paths)
                .map(|_| layer_nodes.iter().map(|nodes| *nodes.choose(rng).expect("width >= 2")).collect())
                .collect();
            let distinct: BTreeSet<_> = routes.iter().collect();
            if distinct.len() != paths {
                continue;
            }
            let hops: Vec<Vec<(usize, usize)>> = routes
                .iter()
                .map(|r| {
                    let mut nodes = vec![SOURCE];
                    nodes.extend(r);
                    nodes.push(TARGET);
                    nodes.windows(2).map(|w| (w[0], w[1])).collect()
                })
                .collect();
            let union: BTreeSet<_> = hops.iter().flatten().collect();
            if union.len() == edges {
                return Some((hops, layers * width));
            }
        }
    }
    None
}

/// Generates a seeded benchmark instance with the default weight.
pub fn generate_benchmark(seed: u64, scale: Scale) -> Result<(FlowNetwork, ProblemSpec)> {
    let (groups, ppg, epg) = scale.shape();
    if groups == 0 || ppg == 0 || epg < 2 {
        return Err(Error::Config(format!("degenerate scale {scale:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = Vec::new();
    let mut edges = Vec::new();
    let mut path_groups = Vec::new();
    let mut edge_groups = Vec::new();
    let mut next_node = 2;
    for g in 0..groups {
        let (hops, used) = sample_group(&mut rng, ppg, epg, next_node)
            .ok_or_else(|| Error::Config(format!("no layered group with {ppg} paths and {epg} edges found")))?;
        next_node += used;
        let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &(a, b) in hops.iter().flatten() {
            if let Entry::Vacant(slot) = index.entry((a, b)) {
                let capacity = if a == SOURCE || b == TARGET {
                    TERMINAL_CAPACITY
                } else {
                    rng.random_range(INTERIOR_CAPACITY.0..=INTERIOR_CAPACITY.1)
                };
                slot.insert(edges.len());
                edges.push(Edge {
                    from: a,
                    to: b,
                    capacity,
                    group: g,
                });
            }
        }
        let mut group_paths = Vec::new();
        for h in &hops {
            group_paths.push(paths.len());
            paths.push(h.iter().map(|e| index[e]).collect());
        }
        path_groups.push(group_paths);
        edge_groups.push(index.values().copied().collect::<BTreeSet<_>>().into_iter().collect());
    }
    let net = FlowNetwork {
        seed,
        scale,
        paths,
        edges,
        path_groups,
        edge_groups,
        weight: DEFAULT_WEIGHT,
    };
    let p = net.to_problem(PartitionPreset::Scalar)?;
    Ok((net, p))
}

/// Groups paths and edges into connected components of the path-edge incidence graph.
pub fn connected_groups(p: &ProblemSpec) -> Result<(Partition, Partition)> {
    let sparsity = p.constraint_sparsity();
    let (n, m) = (p.n(), p.m());
    if let Some(j) = sparsity.iter().position(|row| !row.iter().any(|&s| s)) {
        return Err(Error::NotBlockSeparable(format!("constraint {j} involves no primal variable")));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        r
    }
    for row in &sparsity {
        let vars: Vec<usize> = (0..n).filter(|&i| row[i]).collect();
        for w in vars.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut primal: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        primal.entry(r).or_default().push(i);
    }
    let mut dual: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (j, row) in sparsity.iter().enumerate() {
        let i = row.iter().position(|&s| s).expect("row checked non-empty");
        dual.entry(find(&mut parent, i)).or_default().push(j);
    }
    let roots: Vec<usize> = primal.keys().copied().collect();
    let primal_blocks = roots.iter().map(|r| primal[r].clone()).collect();
    let dual_blocks: Vec<Vec<usize>> = roots.iter().filter_map(|r| dual.get(r).cloned()).collect();
    Ok((Partition::new(primal_blocks, n)?, Partition::new(dual_blocks, m)?))
}

/// One configuration of an experiment sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub experiment: String,
    pub label: String,
    pub preset: PartitionPreset,
    pub weight: f64,
    pub config: SimulationConfig,
}

impl SweepRun {
    pub fn problem(&self, net: &FlowNetwork) -> Result<ProblemSpec> {
        net.with_weight(self.weight).to_problem(self.preset)
    }
}

pub const BETA_SWEEP: [f64; 3] = [0.10, 0.25, 0.75];
pub const COMM_SWEEP: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Weight giving diagonal-dominance margin `beta` on the `[0, 10]` box.
pub fn weight_for_beta(beta: f64) -> f64 {
    beta * (1.0 + FLOW_UPPER).powi(2)
}

/// Default algorithm parameters for the benchmark on top of `base`.
pub fn benchmark_config(base: &SimulationConfig) -> SimulationConfig {
    SimulationConfig {
        gamma: 0.01,
        delta: 0.1,
        rho: default_rho(0.1),
        ..base.clone()
    }
}

/// Block-structure, diagonal-dominance and communication-rate sweeps.
pub fn experiment_sweeps(net: &FlowNetwork, base: &SimulationConfig) -> Vec<SweepRun> {
    let base = benchmark_config(base);
    let mut runs = Vec::new();
    for (label, preset) in [("scalar", PartitionPreset::Scalar), ("grouped", PartitionPreset::Grouped)] {
        runs.push(SweepRun {
            experiment: "blocks".into(),
            label: label.into(),
            preset,
            weight: net.weight,
            config: SimulationConfig {
                p_update: 0.5,
                p_comm: 0.75,
                ..base.clone()
            },
        });
    }
    for beta in BETA_SWEEP {
        runs.push(SweepRun {
            experiment: "beta".into(),
            label: format!("beta={beta}"),
            preset: PartitionPreset::Grouped,
            weight: weight_for_beta(beta),
            config: SimulationConfig {
                p_update: 1.0,
                p_comm: 0.75,
                ..base.clone()
            },
        });
    }
    for rate in COMM_SWEEP {
        runs.push(SweepRun {
            experiment: "commrate".into(),
            label: format!("p_comm={rate}"),
            preset: PartitionPreset::Grouped,
            weight: net.weight,
            config: SimulationConfig {
                p_update: 1.0,
                p_comm: rate,
                ..base.clone()
            },
        });
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::dual_broadcast_targets;

    #[test]
    fn full_scale_shape() {
        let (net, p) = generate_benchmark(7, Scale::Full).unwrap();
        assert_eq!((p.n(), p.m()), (15, 66));
        assert!(net.path_groups.iter().all(|g| g.len() == 5));
        assert!(net.edge_groups.iter().all(|g| g.len() == 22));
        let a = net.incidence();
        for k in 0..net.m() {
            assert!((0..net.n()).any(|i| a[(k, i)] == 1.0), "edge {k} unused");
        }
    }

    #[test]
    fn groups_are_edge_disjoint() {
        let (net, _) = generate_benchmark(3, Scale::Full).unwrap();
        for (g, paths) in net.path_groups.iter().enumerate() {
            for &i in paths {
                assert!(net.paths[i].iter().all(|&k| net.edges[k].group == g));
            }
        }
    }

    #[test]
    fn capacities_follow_edge_position() {
        let (net, _) = generate_benchmark(11, Scale::Full).unwrap();
        for e in &net.edges {
            if e.from == SOURCE || e.to == TARGET {
                assert_eq!(e.capacity, TERMINAL_CAPACITY);
            } else {
                assert!((INTERIOR_CAPACITY.0..=INTERIOR_CAPACITY.1).contains(&e.capacity));
            }
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let a = generate_benchmark(5, Scale::Full).unwrap().0;
        let b = generate_benchmark(5, Scale::Full).unwrap().0;
        let c = generate_benchmark(6, Scale::Full).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn small_scale_has_slater_slack_at_origin() {
        let (_, p) = generate_benchmark(1, Scale::Small).unwrap();
        assert_eq!((p.n(), p.m()), (3, 8));
        let g = p.constraints.value(&DVector::zeros(3));
        assert!(g.iter().all(|v| *v <= -INTERIOR_CAPACITY.0));
    }

    #[test]
    fn grouped_preset_matches_components() {
        let (net, p) = generate_benchmark(2, Scale::Full).unwrap();
        let (primal, dual) = connected_groups(&p).unwrap();
        assert_eq!(primal.len(), 3);
        assert_eq!(dual.len(), 3);
        let grouped = net.to_problem(PartitionPreset::Grouped).unwrap();
        for c in 0..grouped.dual_partition.len() {
            assert_eq!(dual_broadcast_targets(&grouped, c).len(), 1);
        }
    }

    #[test]
    fn weight_inversion() {
        assert!((weight_for_beta(0.25) - 30.25).abs() < 1e-12);
    }

    #[test]
    fn sweeps_cover_experiments() {
        let (net, _) = generate_benchmark(0, Scale::Full).unwrap();
        let runs = experiment_sweeps(&net, &SimulationConfig::default());
        assert_eq!(runs.len(), 2 + BETA_SWEEP.len() + COMM_SWEEP.len());
        assert!(runs.iter().all(|r| r.config.gamma == 0.01 && r.config.delta == 0.1));
        assert!((runs[0].config.rho - 0.1 / 1.01).abs() < 1e-15);
    }
}
