//! Convex problem instances, the regularized Lagrangian and problem-derived constants.
//!
//! The regularized Lagrangian is `L(x, mu) = f(x) + mu'g(x) - (delta/2)|mu|^2` over
//! `X x M`, where `X` is a box and `M = {mu >= 0, |mu|_1 <= B}`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{BoxSet, NonnegL1Ball};

/// Safety factor applied to sampled (non-certified) constant estimates.
pub const SAMPLED_SAFETY: f64 = 0.9;

/// Grid resolution per axis for sampled Hessian and gradient bounds.
pub const GRID_POINTS_PER_AXIS: usize = 17;

const FULL_GRID_LIMIT: usize = 5_000;
const HALTON_SAMPLES: usize = 512;
const CORNER_DIM_LIMIT: usize = 10;

/// User-supplied smooth convex objective.
pub trait ObjectiveFn: Send + Sync + fmt::Debug {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// User-supplied smooth convex constraint map `g: R^n -> R^m`.
pub trait ConstraintFn: Send + Sync + fmt::Debug {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn value(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `m x n` Jacobian.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// `sum_j w_j * hess g_j(x)`.
    fn weighted_hessian(&self, x: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Clone, Debug)]
pub enum Objective {
    /// `0.5 x'Qx + c'x + k`.
    Quadratic {
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        constant: f64,
    },
    /// `-w * sum_i ln(1 + x_i)`.
    LogUtility { weight: f64 },
    Custom(Arc<dyn ObjectiveFn>),
}

impl Objective {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Objective::Quadratic {
                hessian,
                linear,
                constant,
            } => 0.5 * x.dot(&(hessian * x)) + linear.dot(x) + constant,
            Objective::LogUtility { weight } => -weight * x.iter().map(|v| v.ln_1p()).sum::<f64>(),
            Objective::Custom(f) => f.value(x),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Objective::Quadratic {
                hessian, linear, ..
            } => hessian * x + linear,
            Objective::LogUtility { weight } => x.map(|v| -weight / (1.0 + v)),
            Objective::Custom(f) => f.gradient(x),
        }
    }

    /// Gradient entries for the listed coordinates only.
    pub fn gradient_coords(&self, x: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
        match self {
            Objective::Quadratic {
                hessian, linear, ..
            } => DVector::from_iterator(
                idx.len(),
                idx.iter().map(|&i| hessian.row(i).transpose().dot(x) + linear[i]),
            ),
            Objective::LogUtility { weight } => {
                DVector::from_iterator(idx.len(), idx.iter().map(|&i| -weight / (1.0 + x[i])))
            }
            Objective::Custom(f) => {
                let g = f.gradient(x);
                DVector::from_iterator(idx.len(), idx.iter().map(|&i| g[i]))
            }
        }
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Objective::Quadratic { hessian, .. } => hessian.clone(),
            Objective::LogUtility { weight } => {
                DMatrix::from_diagonal(&x.map(|v| weight / ((1.0 + v) * (1.0 + v))))
            }
            Objective::Custom(f) => f.hessian(x),
        }
    }

    /// Minimizer of `f(x) + a'x` over `bounds` when `f` is separable with a closed form.
    pub fn separable_linear_minimizer(
        &self,
        a: &DVector<f64>,
        bounds: &BoxSet,
    ) -> Option<DVector<f64>> {
        match self {
            Objective::LogUtility { weight } => Some(DVector::from_iterator(
                a.len(),
                (0..a.len()).map(|i| {
                    let (lo, hi) = (bounds.lower[i], bounds.upper[i]);
                    if a[i] > 0.0 {
                        (weight / a[i] - 1.0).clamp(lo, hi)
                    } else {
                        hi
                    }
                }),
            )),
            Objective::Quadratic {
                hessian, linear, ..
            } if is_diagonal(hessian) => Some(DVector::from_iterator(
                a.len(),
                (0..a.len()).map(|i| {
                    (-(linear[i] + a[i]) / hessian[(i, i)]).clamp(bounds.lower[i], bounds.upper[i])
                }),
            )),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Constraints {
    /// `g(x) = A x - b`.
    Affine {
        matrix: DMatrix<f64>,
        offset: DVector<f64>,
    },
    Custom(Arc<dyn ConstraintFn>),
}

impl Constraints {
    /// No constraints on an `n`-dimensional problem.
    pub fn none(n: usize) -> Self {
        Constraints::Affine {
            matrix: DMatrix::zeros(0, n),
            offset: DVector::zeros(0),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Constraints::Affine { offset, .. } => offset.len(),
            Constraints::Custom(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, Constraints::Affine { .. })
    }

    pub fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Constraints::Affine { matrix, offset } => matrix * x - offset,
            Constraints::Custom(g) => g.value(x),
        }
    }

    /// Constraint values for the listed rows only.
    pub fn value_rows(&self, x: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
        match self {
            Constraints::Affine { matrix, offset } => DVector::from_iterator(
                rows.len(),
                rows.iter().map(|&r| matrix.row(r).transpose().dot(x) - offset[r]),
            ),
            Constraints::Custom(g) => {
                let v = g.value(x);
                DVector::from_iterator(rows.len(), rows.iter().map(|&r| v[r]))
            }
        }
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Constraints::Affine { matrix, .. } => matrix.clone(),
            Constraints::Custom(g) => g.jacobian(x),
        }
    }

    /// Entries of `J(x)' mu` for the listed coordinates.
    pub fn jt_mu_coords(&self, x: &DVector<f64>, mu: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
        let col_dot = |jac: &DMatrix<f64>, i: usize| -> f64 {
            mu.iter()
                .enumerate()
                .filter(|(_, m)| **m != 0.0)
                .map(|(j, m)| jac[(j, i)] * m)
                .sum()
        };
        match self {
            Constraints::Affine { matrix, .. } => {
                DVector::from_iterator(idx.len(), idx.iter().map(|&i| col_dot(matrix, i)))
            }
            Constraints::Custom(g) => {
                let jac = g.jacobian(x);
                DVector::from_iterator(idx.len(), idx.iter().map(|&i| col_dot(&jac, i)))
            }
        }
    }

    /// `sum_j mu_j hess g_j(x)`, or `None` when every constraint is affine.
    pub fn weighted_hessian(&self, x: &DVector<f64>, mu: &DVector<f64>) -> Option<DMatrix<f64>> {
        match self {
            Constraints::Affine { .. } => None,
            Constraints::Custom(g) => Some(g.weighted_hessian(x, mu)),
        }
    }
}

/// Constraint map `g(x) - shift`.
#[derive(Debug)]
pub struct ShiftedConstraints {
    pub inner: Arc<dyn ConstraintFn>,
    pub shift: DVector<f64>,
}

impl ConstraintFn for ShiftedConstraints {
    fn len(&self) -> usize {
        self.inner.len()
    }
    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.value(x) - &self.shift
    }
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.inner.jacobian(x)
    }
    fn weighted_hessian(&self, x: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        self.inner.weighted_hessian(x, w)
    }
}

/// Ordered disjoint index blocks covering `0..dim`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(blocks: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        let mut seen = vec![false; dim];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidProblem(format!("partition block {b} is empty")));
            }
            if block.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidProblem(format!(
                    "partition block {b} is not strictly increasing"
                )));
            }
            for &i in block {
                if i >= dim {
                    return Err(Error::InvalidProblem(format!(
                        "partition block {b} references index {i} outside 0..{dim}"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidProblem(format!(
                        "index {i} appears in more than one partition block"
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidProblem(format!("index {i} is not covered by the partition")));
        }
        Ok(Self { blocks })
    }

    /// One block per index.
    pub fn scalar(dim: usize) -> Self {
        Self {
            blocks: (0..dim).map(|i| vec![i]).collect(),
        }
    }

    /// A single block holding every index (empty when `dim == 0`).
    pub fn single(dim: usize) -> Self {
        Self {
            blocks: if dim == 0 { vec![] } else { vec![(0..dim).collect()] },
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, b: usize) -> &[usize] {
        &self.blocks[b]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// `owner[i]` is the block containing index `i`.
    pub fn owners(&self) -> Vec<usize> {
        let mut owner = vec![0; self.dim()];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                owner[i] = b;
            }
        }
        owner
    }
}

/// A constrained convex program with block partitions.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub objective: Objective,
    pub constraints: Constraints,
    pub bounds: BoxSet,
    pub slater_point: DVector<f64>,
    pub f_star_lower: f64,
    pub primal_partition: Partition,
    pub dual_partition: Partition,
}

impl ProblemSpec {
    /// Builds and validates a problem with scalar partitions.
    pub fn new(
        objective: Objective,
        constraints: Constraints,
        bounds: BoxSet,
        slater_point: DVector<f64>,
        f_star_lower: f64,
    ) -> Result<Self> {
        let n = bounds.dim();
        let m = constraints.len();
        let p = Self {
            objective,
            constraints,
            bounds,
            slater_point,
            f_star_lower,
            primal_partition: Partition::scalar(n),
            dual_partition: Partition::scalar(m),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_partitions(mut self, primal: Partition, dual: Partition) -> Result<Self> {
        if primal.dim() != self.n() {
            return Err(Error::InvalidProblem(format!(
                "primal partition covers {} indices, problem has n = {}",
                primal.dim(),
                self.n()
            )));
        }
        if dual.dim() != self.m() {
            return Err(Error::InvalidProblem(format!(
                "dual partition covers {} indices, problem has m = {}",
                dual.dim(),
                self.m()
            )));
        }
        self.primal_partition = primal;
        self.dual_partition = dual;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.bounds.dim()
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidProblem("primal dimension is zero".into()));
        }
        if self.bounds.lower.iter().zip(self.bounds.upper.iter()).any(|(lo, hi)| lo >= hi) {
            return Err(Error::InvalidProblem("box must satisfy lower < upper componentwise".into()));
        }
        match &self.objective {
            Objective::Quadratic {
                hessian,
                linear,
                constant,
            } => {
                if hessian.shape() != (n, n) || linear.len() != n {
                    return Err(Error::InvalidProblem(format!(
                        "quadratic objective has shape {:?} / {}, expected ({n}, {n}) / {n}",
                        hessian.shape(),
                        linear.len()
                    )));
                }
                if (hessian - hessian.transpose()).amax() > 1e-12 * (1.0 + hessian.amax()) {
                    return Err(Error::InvalidProblem("quadratic Hessian is not symmetric".into()));
                }
                if !hessian.iter().chain(linear.iter()).all(|v| v.is_finite()) || !constant.is_finite() {
                    return Err(Error::NonFinite("quadratic objective coefficients".into()));
                }
            }
            Objective::LogUtility { weight } => {
                if !(*weight > 0.0) || !weight.is_finite() {
                    return Err(Error::InvalidProblem(format!(
                        "log-utility weight must be positive, got {weight}"
                    )));
                }
                if self.bounds.lower.iter().any(|lo| *lo <= -1.0) {
                    return Err(Error::InvalidProblem(
                        "log-utility objective requires box_lower > -1".into(),
                    ));
                }
            }
            Objective::Custom(_) => {}
        }
        if let Constraints::Affine { matrix, offset } = &self.constraints {
            if matrix.shape() != (offset.len(), n) {
                return Err(Error::InvalidProblem(format!(
                    "constraint matrix has shape {:?}, expected ({}, {n})",
                    matrix.shape(),
                    offset.len()
                )));
            }
            if !matrix.iter().chain(offset.iter()).all(|v| v.is_finite()) {
                return Err(Error::NonFinite("constraint coefficients".into()));
            }
        }
        if self.slater_point.len() != n || !self.bounds.contains(&self.slater_point, 0.0) {
            return Err(Error::InvalidProblem("Slater point must lie in the box".into()));
        }
        let g = self.constraints.value(&self.slater_point);
        if g.len() != self.m() {
            return Err(Error::InvalidProblem(format!(
                "constraint map returned {} values, declared {}",
                g.len(),
                self.m()
            )));
        }
        if let Some(worst) = g.iter().copied().reduce(f64::max) {
            if !(worst < 0.0) {
                return Err(Error::InvalidSlaterPoint { min_slack: -worst });
            }
        }
        let f_bar = self.objective.value(&self.slater_point);
        if !f_bar.is_finite() || !self.f_star_lower.is_finite() {
            return Err(Error::NonFinite("objective at the Slater point or f_star_lower".into()));
        }
        if f_bar < self.f_star_lower {
            return Err(Error::InvalidProblem(format!(
                "f(slater_point) = {f_bar} is below f_star_lower = {}",
                self.f_star_lower
            )));
        }
        if self.primal_partition.dim() != n || self.dual_partition.dim() != self.m() {
            return Err(Error::InvalidProblem("partitions do not match dimensions".into()));
        }
        Ok(())
    }

    /// Hessian of the Lagrangian in `x`.
    pub fn hessian_x(&self, x: &DVector<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
        let mut h = self.objective.hessian(x);
        if let Some(w) = self.constraints.weighted_hessian(x, mu) {
            h += w;
        }
        h
    }

    /// `grad_x L` restricted to the listed coordinates, without domain checks.
    pub fn grad_x_coords(&self, x: &DVector<f64>, mu: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
        let mut g = self.objective.gradient_coords(x, idx);
        if !self.constraints.is_empty() {
            g += self.constraints.jt_mu_coords(x, mu, idx);
        }
        g
    }

    /// Full `grad_x L` without domain checks.
    pub fn grad_x_unchecked(&self, x: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64> {
        let mut g = self.objective.gradient(x);
        if !self.constraints.is_empty() {
            g += self.constraints.jacobian(x).transpose() * mu;
        }
        g
    }

    /// Boolean `m x n` pattern of constraint dependence.
    pub fn constraint_sparsity(&self) -> Vec<Vec<bool>> {
        let (n, m) = (self.n(), self.m());
        let mut pattern = vec![vec![false; n]; m];
        match &self.constraints {
            Constraints::Affine { matrix, .. } => {
                for j in 0..m {
                    for i in 0..n {
                        pattern[j][i] = matrix[(j, i)] != 0.0;
                    }
                }
            }
            Constraints::Custom(g) => {
                for x in sample_points(&self.bounds) {
                    let jac = g.jacobian(&x);
                    for j in 0..m {
                        for i in 0..n {
                            pattern[j][i] |= jac[(j, i)] != 0.0;
                        }
                    }
                }
            }
        }
        pattern
    }

    /// Boolean `n x n` pattern of Hessian coupling over `X x M`.
    pub fn hessian_coupling(&self, geom: &DualGeometry) -> Vec<Vec<bool>> {
        let n = self.n();
        let mut pattern = vec![vec![false; n]; n];
        let mut mark = |h: &DMatrix<f64>| {
            for i in 0..n {
                for j in 0..n {
                    pattern[i][j] |= h[(i, j)] != 0.0;
                }
            }
        };
        match (&self.objective, &self.constraints) {
            (Objective::Quadratic { hessian, .. }, Constraints::Affine { .. }) => mark(hessian),
            (Objective::LogUtility { .. }, Constraints::Affine { .. }) => {
                mark(&DMatrix::identity(n, n))
            }
            _ => {
                for x in sample_points(&self.bounds) {
                    for mu in dual_vertices(self.m(), geom.bound) {
                        mark(&self.hessian_x(&x, &mu));
                    }
                }
            }
        }
        pattern
    }

    /// Returns an error when `x` is outside `X` or `mu` is outside the dual set.
    pub fn check_domain(&self, geom: &DualGeometry, x: &DVector<f64>, mu: &DVector<f64>) -> Result<()> {
        if x.len() != self.n() || mu.len() != self.m() {
            return Err(Error::Domain(format!(
                "expected x in R^{} and mu in R^{}, got lengths {} and {}",
                self.n(),
                self.m(),
                x.len(),
                mu.len()
            )));
        }
        let scale = 1e-9 * (1.0 + self.bounds.lower.amax().max(self.bounds.upper.amax()));
        if !self.bounds.contains(x, scale) {
            return Err(Error::Domain("x lies outside the box X".into()));
        }
        geom.check_dual(self, mu)
    }
}

fn is_diagonal(h: &DMatrix<f64>) -> bool {
    let n = h.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || h[(i, j)] == 0.0))
}

/// Regularization weight, dual radius and per-block dual sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualGeometry {
    pub delta: f64,
    pub bound: f64,
    pub block_sets: Vec<NonnegL1Ball>,
}

impl DualGeometry {
    pub fn new(p: &ProblemSpec, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!("delta must be positive and finite, got {delta}")));
        }
        Self::build(p, delta)
    }

    /// Geometry with `delta = 0`, used only to pose the unregularized problem.
    pub fn unregularized(p: &ProblemSpec) -> Result<Self> {
        Self::build(p, 0.0)
    }

    fn build(p: &ProblemSpec, delta: f64) -> Result<Self> {
        let bound = compute_dual_bound(p)?;
        let block_sets = p
            .dual_partition
            .blocks()
            .iter()
            .map(|b| NonnegL1Ball::new(bound, b.len()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            delta,
            bound,
            block_sets,
        })
    }

    pub(crate) fn check_dual(&self, p: &ProblemSpec, mu: &DVector<f64>) -> Result<()> {
        for (c, rows) in p.dual_partition.blocks().iter().enumerate() {
            let block = DVector::from_iterator(rows.len(), rows.iter().map(|&r| mu[r]));
            if !self.block_sets[c].contains(&block, 1e-9) {
                return Err(Error::Domain(format!("mu block {c} lies outside its dual set")));
            }
        }
        Ok(())
    }
}

/// `B = (f(x_bar) - f_star_lower) / min_j(-g_j(x_bar))`; zero when there are no constraints.
pub fn compute_dual_bound(p: &ProblemSpec) -> Result<f64> {
    let g = p.constraints.value(&p.slater_point);
    let Some(slack) = g.iter().map(|v| -v).reduce(f64::min) else {
        return Ok(0.0);
    };
    if !(slack > 0.0) {
        return Err(Error::InvalidSlaterPoint { min_slack: slack });
    }
    let gap = p.objective.value(&p.slater_point) - p.f_star_lower;
    let b = gap.max(0.0) / slack;
    if !b.is_finite() {
        return Err(Error::NonFinite("dual bound B".into()));
    }
    Ok(b)
}

pub fn eval_lagrangian(
    p: &ProblemSpec,
    geom: &DualGeometry,
    x: &DVector<f64>,
    mu: &DVector<f64>,
) -> Result<f64> {
    p.check_domain(geom, x, mu)?;
    let g = p.constraints.value(x);
    Ok(p.objective.value(x) + mu.dot(&g) - 0.5 * geom.delta * mu.norm_squared())
}

pub fn grad_x(
    p: &ProblemSpec,
    geom: &DualGeometry,
    x: &DVector<f64>,
    mu: &DVector<f64>,
) -> Result<DVector<f64>> {
    p.check_domain(geom, x, mu)?;
    Ok(p.grad_x_unchecked(x, mu))
}

pub fn grad_mu(
    p: &ProblemSpec,
    geom: &DualGeometry,
    x: &DVector<f64>,
    mu: &DVector<f64>,
) -> Result<DVector<f64>> {
    p.check_domain(geom, x, mu)?;
    Ok(p.constraints.value(x) - mu * geom.delta)
}

/// Extreme values of Hessian row statistics over `X x M`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HessianEnvelope {
    /// `max_i max_{x,mu} sum_j |H_ij|`.
    pub max_row_sum: f64,
    /// `min_i min_{x,mu} (|H_ii| - sum_{j != i} |H_ij|)`.
    pub min_margin: f64,
    pub worst_row: usize,
    /// True when both values are exact rather than sampled.
    pub exact: bool,
}

fn row_stats(h: &DMatrix<f64>) -> Result<(f64, f64, usize)> {
    let n = h.nrows();
    let (mut max_sum, mut min_margin, mut worst) = (0.0f64, f64::INFINITY, 0);
    for i in 0..n {
        let row = h.row(i);
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("Hessian row {i}")));
        }
        let abs_sum: f64 = row.iter().map(|v| v.abs()).sum();
        let diag = h[(i, i)].abs();
        let margin = 2.0 * diag - abs_sum;
        max_sum = max_sum.max(abs_sum);
        if margin < min_margin {
            min_margin = margin;
            worst = i;
        }
    }
    Ok((max_sum, min_margin, worst))
}

/// Hessian row statistics, exact for the structured classes and sampled otherwise.
pub fn hessian_envelope(p: &ProblemSpec, geom: &DualGeometry) -> Result<HessianEnvelope> {
    match (&p.objective, &p.constraints) {
        (Objective::Quadratic { hessian, .. }, Constraints::Affine { .. }) => {
            let (max_row_sum, min_margin, worst_row) = row_stats(hessian)?;
            Ok(HessianEnvelope {
                max_row_sum,
                min_margin,
                worst_row,
                exact: true,
            })
        }
        (Objective::LogUtility { weight }, Constraints::Affine { .. }) => {
            let mut env = HessianEnvelope {
                max_row_sum: 0.0,
                min_margin: f64::INFINITY,
                worst_row: 0,
                exact: true,
            };
            for i in 0..p.n() {
                let hi = weight / (1.0 + p.bounds.lower[i]).powi(2);
                let lo = weight / (1.0 + p.bounds.upper[i]).powi(2);
                env.max_row_sum = env.max_row_sum.max(hi);
                if lo < env.min_margin {
                    env.min_margin = lo;
                    env.worst_row = i;
                }
            }
            Ok(env)
        }
        _ => {
            let mut env = HessianEnvelope {
                max_row_sum: 0.0,
                min_margin: f64::INFINITY,
                worst_row: 0,
                exact: false,
            };
            let vertices = dual_vertices(p.m(), geom.bound);
            for x in sample_points(&p.bounds) {
                for mu in &vertices {
                    let (s, margin, row) = row_stats(&p.hessian_x(&x, mu))?;
                    env.max_row_sum = env.max_row_sum.max(s);
                    if margin < env.min_margin {
                        env.min_margin = margin;
                        env.worst_row = row;
                    }
                }
            }
            Ok(env)
        }
    }
}

/// Strict upper bound for the primal stepsize.
pub fn compute_gamma_bound(p: &ProblemSpec, geom: &DualGeometry) -> Result<f64> {
    gamma_from_envelope(&hessian_envelope(p, geom)?)
}

fn gamma_from_envelope(env: &HessianEnvelope) -> Result<f64> {
    if !(env.max_row_sum > 0.0) || !env.max_row_sum.is_finite() {
        return Err(Error::NonFinite(format!(
            "maximum Hessian row sum is {}",
            env.max_row_sum
        )));
    }
    let g = 1.0 / env.max_row_sum;
    Ok(if env.exact { g } else { SAMPLED_SAFETY * g })
}

/// Diagonal-dominance margin of the Hessian.
pub fn compute_beta(p: &ProblemSpec, geom: &DualGeometry) -> Result<f64> {
    beta_from_envelope(&hessian_envelope(p, geom)?)
}

fn beta_from_envelope(env: &HessianEnvelope) -> Result<f64> {
    if !(env.min_margin > 0.0) {
        return Err(Error::NotDiagonallyDominant {
            row: env.worst_row,
            margin: env.min_margin,
        });
    }
    Ok(if env.exact {
        env.min_margin
    } else {
        SAMPLED_SAFETY * env.min_margin
    })
}

/// Box diameter and constraint gradient norm bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzConstants {
    pub diameter: f64,
    pub m_global: f64,
    pub m_per_constraint: Vec<f64>,
    pub m_per_block: Vec<f64>,
}

/// Euclidean norms of stacked Jacobian rows, exact for affine `g`.
pub fn compute_diameter_and_lipschitz(p: &ProblemSpec) -> Result<LipschitzConstants> {
    let diameter = p.bounds.diameter();
    if !diameter.is_finite() {
        return Err(Error::InvalidProblem("box is unbounded".into()));
    }
    let m = p.m();
    let norms_at = |jac: &DMatrix<f64>| -> (f64, Vec<f64>, Vec<f64>) {
        let per: Vec<f64> = (0..m).map(|j| jac.row(j).norm_squared()).collect();
        let block: Vec<f64> = p
            .dual_partition
            .blocks()
            .iter()
            .map(|rows| rows.iter().map(|&r| per[r]).sum::<f64>())
            .collect();
        (per.iter().sum::<f64>(), per, block)
    };
    let (global_sq, per_sq, block_sq, factor) = match &p.constraints {
        Constraints::Affine { matrix, .. } => {
            let (g, per, block) = norms_at(matrix);
            (g, per, block, 1.0)
        }
        Constraints::Custom(g) => {
            let mut acc = (0.0f64, vec![0.0f64; m], vec![0.0f64; p.dual_partition.len()]);
            for x in sample_points(&p.bounds) {
                let (gs, per, block) = norms_at(&g.jacobian(&x));
                acc.0 = acc.0.max(gs);
                for (a, v) in acc.1.iter_mut().zip(per) {
                    *a = a.max(v);
                }
                for (a, v) in acc.2.iter_mut().zip(block) {
                    *a = a.max(v);
                }
            }
            (acc.0, acc.1, acc.2, 1.0 / SAMPLED_SAFETY)
        }
    };
    let out = LipschitzConstants {
        diameter,
        m_global: global_sq.sqrt() * factor,
        m_per_constraint: per_sq.iter().map(|v| v.sqrt() * factor).collect(),
        m_per_block: block_sq.iter().map(|v| v.sqrt() * factor).collect(),
    };
    if !out.m_global.is_finite() {
        return Err(Error::NonFinite("constraint Jacobian norm".into()));
    }
    Ok(out)
}

/// All problem-derived constants used by stepsize checks and bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub beta: f64,
    pub gamma_max: f64,
    pub m_global: f64,
    pub m_per_constraint: Vec<f64>,
    pub m_per_block: Vec<f64>,
    pub diameter: f64,
    /// True when `beta` and `gamma_max` are exact rather than sampled.
    pub exact: bool,
}

impl ProblemConstants {
    pub fn compute(p: &ProblemSpec, geom: &DualGeometry) -> Result<Self> {
        let env = hessian_envelope(p, geom)?;
        let lip = compute_diameter_and_lipschitz(p)?;
        Ok(Self {
            beta: beta_from_envelope(&env)?,
            gamma_max: gamma_from_envelope(&env)?,
            m_global: lip.m_global,
            m_per_constraint: lip.m_per_constraint,
            m_per_block: lip.m_per_block,
            diameter: lip.diameter,
            exact: env.exact,
        })
    }
}

/// Deterministic sample of `X` used for non-certified constant estimates.
pub fn sample_points(bounds: &BoxSet) -> Vec<DVector<f64>> {
    let n = bounds.dim();
    let k = GRID_POINTS_PER_AXIS;
    let at = |i: usize, s: f64| bounds.lower[i] + s * (bounds.upper[i] - bounds.lower[i]);
    let axis = |j: usize| j as f64 / (k - 1) as f64;
    let mut pts = Vec::new();
    let full = k.checked_pow(n as u32).filter(|c| *c <= FULL_GRID_LIMIT);
    if let Some(count) = full {
        for mut code in 0..count {
            let mut x = DVector::zeros(n);
            for i in 0..n {
                x[i] = at(i, axis(code % k));
                code /= k;
            }
            pts.push(x);
        }
        return pts;
    }
    let mid = bounds.midpoint();
    for i in 0..n {
        for j in 0..k {
            let mut x = mid.clone();
            x[i] = at(i, axis(j));
            pts.push(x);
        }
    }
    if n <= CORNER_DIM_LIMIT {
        for code in 0..(1usize << n) {
            pts.push(DVector::from_iterator(
                n,
                (0..n).map(|i| if code >> i & 1 == 1 { bounds.upper[i] } else { bounds.lower[i] }),
            ));
        }
    }
    let primes = first_primes(n);
    for s in 1..=HALTON_SAMPLES {
        pts.push(DVector::from_iterator(
            n,
            (0..n).map(|i| at(i, radical_inverse(s, primes[i]))),
        ));
    }
    pts
}

/// Vertices of `{mu >= 0, |mu|_1 <= B}`.
pub fn dual_vertices(m: usize, bound: f64) -> Vec<DVector<f64>> {
    let mut v = vec![DVector::zeros(m)];
    if bound > 0.0 {
        for j in 0..m {
            let mut e = DVector::zeros(m);
            e[j] = bound;
            v.push(e);
        }
    }
    v
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

fn first_primes(count: usize) -> Vec<usize> {
    let mut primes = Vec::with_capacity(count);
    let mut c = 2;
    while primes.len() < count {
        if primes.iter().all(|p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

/// JSON form of a problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub n: usize,
    pub m: usize,
    pub objective: ObjectiveDocument,
    pub constraints: ConstraintsDocument,
    pub box_lower: Vec<f64>,
    pub box_upper: Vec<f64>,
    pub slater_point: Vec<f64>,
    #[serde(default)]
    pub f_star_lower: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primal_partition: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_partition: Option<Vec<Vec<usize>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveDocument {
    Quadratic {
        hessian: Vec<Vec<f64>>,
        linear: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
    LogUtility {
        weight: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintsDocument {
    /// `g(x) = matrix * x - offset`.
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
}

fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidProblem(format!("{what} must be {nrows} x {ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn rows_from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn vector_of_len(v: &[f64], len: usize, what: &str) -> Result<DVector<f64>> {
    if v.len() != len {
        return Err(Error::InvalidProblem(format!("{what} has length {}, expected {len}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

impl ProblemDocument {
    pub fn into_problem(self) -> Result<ProblemSpec> {
        let (n, m) = (self.n, self.m);
        let objective = match self.objective {
            ObjectiveDocument::Quadratic {
                hessian,
                linear,
                constant,
            } => Objective::Quadratic {
                hessian: matrix_from_rows(&hessian, n, n, "objective.hessian")?,
                linear: vector_of_len(&linear, n, "objective.linear")?,
                constant,
            },
            ObjectiveDocument::LogUtility { weight } => Objective::LogUtility { weight },
        };
        let constraints = match self.constraints {
            ConstraintsDocument::Affine { matrix, offset } => Constraints::Affine {
                matrix: if m == 0 {
                    DMatrix::zeros(0, n)
                } else {
                    matrix_from_rows(&matrix, m, n, "constraints.matrix")?
                },
                offset: vector_of_len(&offset, m, "constraints.offset")?,
            },
        };
        let bounds = BoxSet::new(
            vector_of_len(&self.box_lower, n, "box_lower")?,
            vector_of_len(&self.box_upper, n, "box_upper")?,
        )?;
        let slater = vector_of_len(&self.slater_point, n, "slater_point")?;
        let p = ProblemSpec::new(objective, constraints, bounds, slater, self.f_star_lower)?;
        let primal = match self.primal_partition {
            Some(b) => Partition::new(b, n)?,
            None => Partition::scalar(n),
        };
        let dual = match self.dual_partition {
            Some(b) => Partition::new(b, m)?,
            None => Partition::scalar(m),
        };
        p.with_partitions(primal, dual)
    }

    pub fn from_problem(p: &ProblemSpec) -> Result<Self> {
        let objective = match &p.objective {
            Objective::Quadratic {
                hessian,
                linear,
                constant,
            } => ObjectiveDocument::Quadratic {
                hessian: rows_from_matrix(hessian),
                linear: linear.iter().copied().collect(),
                constant: *constant,
            },
            Objective::LogUtility { weight } => ObjectiveDocument::LogUtility { weight: *weight },
            Objective::Custom(_) => {
                return Err(Error::Unsupported("custom objectives have no JSON form".into()))
            }
        };
        let constraints = match &p.constraints {
            Constraints::Affine { matrix, offset } => ConstraintsDocument::Affine {
                matrix: rows_from_matrix(matrix),
                offset: offset.iter().copied().collect(),
            },
            Constraints::Custom(_) => {
                return Err(Error::Unsupported("custom constraints have no JSON form".into()))
            }
        };
        Ok(Self {
            n: p.n(),
            m: p.m(),
            objective,
            constraints,
            box_lower: p.bounds.lower.iter().copied().collect(),
            box_upper: p.bounds.upper.iter().copied().collect(),
            slater_point: p.slater_point.iter().copied().collect(),
            f_star_lower: p.f_star_lower,
            primal_partition: Some(p.primal_partition.blocks().to_vec()),
            dual_partition: Some(p.dual_partition.blocks().to_vec()),
        })
    }
}

impl ProblemSpec {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str::<ProblemDocument>(s)?.into_problem()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ProblemDocument::from_problem(self)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn half_square_1d() -> ProblemSpec {
        ProblemSpec::new(
            Objective::Quadratic {
                hessian: DMatrix::from_element(1, 1, 1.0),
                linear: dv(&[0.0]),
                constant: 0.0,
            },
            Constraints::Affine {
                matrix: DMatrix::from_element(1, 1, 1.0),
                offset: dv(&[1.0]),
            },
            BoxSet::new(dv(&[-5.0]), dv(&[5.0])).unwrap(),
            dv(&[0.0]),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn lagrangian_hand_value() {
        let p = half_square_1d();
        let mut geom = DualGeometry::new(&p, 0.1).unwrap();
        geom.bound = 10.0;
        geom.block_sets[0].radius = 10.0;
        let v = eval_lagrangian(&p, &geom, &dv(&[1.0]), &dv(&[2.0])).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
    }

    #[test]
    fn lagrangian_rejects_out_of_domain() {
        let p = half_square_1d();
        let geom = DualGeometry::new(&p, 0.1).unwrap();
        assert!(matches!(
            eval_lagrangian(&p, &geom, &dv(&[6.0]), &dv(&[0.0])),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            eval_lagrangian(&p, &geom, &dv(&[0.0]), &dv(&[-1.0])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn grad_x_hand_value() {
        let p = ProblemSpec::new(
            Objective::Quadratic {
                hessian: DMatrix::identity(2, 2),
                linear: dv(&[0.0, 0.0]),
                constant: 0.0,
            },
            Constraints::Affine {
                matrix: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
                offset: dv(&[1.0]),
            },
            BoxSet::new(dv(&[-5.0, -5.0]), dv(&[5.0, 5.0])).unwrap(),
            dv(&[0.0, 0.0]),
            0.0,
        )
        .unwrap();
        let mut geom = DualGeometry::new(&p, 0.1).unwrap();
        geom.block_sets[0].radius = 5.0;
        let g = grad_x(&p, &geom, &dv(&[1.0, 2.0]), &dv(&[3.0])).unwrap();
        assert_eq!(g, dv(&[4.0, 5.0]));
    }

    #[test]
    fn grad_mu_hand_value() {
        // g(x) = (x1 - 2, x2 + 1) evaluated at (1, 1) gives (-1, 2).
        let p = ProblemSpec::new(
            Objective::Quadratic {
                hessian: DMatrix::identity(2, 2),
                linear: dv(&[0.0, 0.0]),
                constant: 0.0,
            },
            Constraints::Affine {
                matrix: DMatrix::identity(2, 2),
                offset: dv(&[2.0, -1.0]),
            },
            BoxSet::new(dv(&[-5.0, -5.0]), dv(&[5.0, 5.0])).unwrap(),
            dv(&[0.0, -2.0]),
            0.0,
        )
        .unwrap();
        let geom = DualGeometry::new(&p, 0.5).unwrap();
        let g = grad_mu(&p, &geom, &dv(&[1.0, 1.0]), &dv(&[1.0, 0.0])).unwrap();
        assert_eq!(g, dv(&[-1.5, 2.0]));
    }

    #[test]
    fn dual_bound_hand_value() {
        // f = (x-1)^2 on [-1,1], g = x - 0.5, x_bar = 0.
        let p = ProblemSpec::new(
            Objective::Quadratic {
                hessian: DMatrix::from_element(1, 1, 2.0),
                linear: dv(&[-2.0]),
                constant: 1.0,
            },
            Constraints::Affine {
                matrix: DMatrix::from_element(1, 1, 1.0),
                offset: dv(&[0.5]),
            },
            BoxSet::new(dv(&[-1.0]), dv(&[1.0])).unwrap(),
            dv(&[0.0]),
            0.0,
        )
        .unwrap();
        assert!((compute_dual_bound(&p).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dual_bound_zero_when_slater_is_optimal() {
        let p = ProblemSpec::new(
            Objective::Quadratic {
                hessian: DMatrix::from_element(1, 1, 1.0),
                linear: dv(&[0.0]),
                constant: 0.0,
            },
            Constraints::Affine {
                matrix: DMatrix::from_element(1, 1, 1.0),
                offset: dv(&[1.0]),
            },
            BoxSet::new(dv(&[-1.0]), dv(&[1.0])).unwrap(),
            dv(&[0.0]),
            0.0,
        )
        .unwrap();
        assert_eq!(compute_dual_bound(&p).unwrap(), 0.0);
    }

    #[test]
    fn slater_point_must_be_strict() {
        let r = ProblemSpec::new(
            Objective::LogUtility { weight: 1.0 },
            Constraints::Affine {
                matrix: DMatrix::from_element(1, 1, 1.0),
                offset: dv(&[0.0]),
            },
            BoxSet::new(dv(&[0.0]), dv(&[10.0])).unwrap(),
            dv(&[0.0]),
            -100.0,
        );
        assert!(matches!(r, Err(Error::InvalidSlaterPoint { .. })));
    }

    #[test]
    fn identity_hessian_constants() {
        let p = ProblemSpec::new(
            Objective::Quadratic {
                hessian: DMatrix::identity(3, 3),
                linear: dv(&[0.0, 0.0, 0.0]),
                constant: 0.0,
            },
            Constraints::Affine {
                matrix: DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
                offset: dv(&[1.0]),
            },
            BoxSet::new(dv(&[0.0, 0.0, 0.0]), dv(&[1.0, 1.0, 1.0])).unwrap(),
            dv(&[0.0, 0.0, 0.0]),
            0.0,
        )
        .unwrap();
        let geom = DualGeometry::new(&p, 0.1).unwrap();
        assert_eq!(compute_gamma_bound(&p, &geom).unwrap(), 1.0);
        assert_eq!(compute_beta(&p, &geom).unwrap(), 1.0);
        let lip = compute_diameter_and_lipschitz(&p).unwrap();
        assert!((lip.diameter - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(lip.m_per_constraint, vec![1.0]);
    }

    #[test]
    fn off_diagonal_margin() {
        let p = ProblemSpec::new(
            Objective::Quadratic {
                hessian: DMatrix::from_row_slice(2, 2, &[2.0, -0.5, -0.5, 2.0]),
                linear: dv(&[0.0, 0.0]),
                constant: 0.0,
            },
            Constraints::none(2),
            BoxSet::new(dv(&[0.0, 0.0]), dv(&[1.0, 1.0])).unwrap(),
            dv(&[0.0, 0.0]),
            0.0,
        )
        .unwrap();
        let geom = DualGeometry::new(&p, 0.1).unwrap();
        assert_eq!(compute_beta(&p, &geom).unwrap(), 1.5);
        assert_eq!(compute_gamma_bound(&p, &geom).unwrap(), 0.4);
    }

    #[test]
    fn non_dominant_hessian_rejected() {
        let p = ProblemSpec::new(
            Objective::Quadratic {
                hessian: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
                linear: dv(&[0.0, 0.0]),
                constant: 0.0,
            },
            Constraints::none(2),
            BoxSet::new(dv(&[0.0, 0.0]), dv(&[1.0, 1.0])).unwrap(),
            dv(&[0.0, 0.0]),
            0.0,
        )
        .unwrap();
        let geom = DualGeometry::new(&p, 0.1).unwrap();
        assert!(matches!(
            compute_beta(&p, &geom),
            Err(Error::NotDiagonallyDominant { .. })
        ));
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![vec![0, 1], vec![2]], 3).is_ok());
        assert!(Partition::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(Partition::new(vec![vec![0]], 2).is_err());
        assert!(Partition::new(vec![vec![1, 0]], 2).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = half_square_1d();
        let s = p.to_json_string().unwrap();
        let q = ProblemSpec::from_json_str(&s).unwrap();
        assert_eq!(
            ProblemDocument::from_problem(&p).unwrap(),
            ProblemDocument::from_problem(&q).unwrap()
        );
    }

    #[test]
    fn json_rejects_unknown_kind() {
        let s = r#"{"n":1,"m":0,"objective":{"kind":"cubic"},
            "constraints":{"kind":"affine","matrix":[],"offset":[]},
            "box_lower":[0],"box_upper":[1],"slater_point":[0]}"#;
        assert!(matches!(ProblemSpec::from_json_str(s), Err(Error::Json(_))));
    }
}
