//! Centralized baselines, saddle-point oracles and analytical bound evaluators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Constraints, DualGeometry, ProblemConstants, ProblemSpec, ShiftedConstraints};
use crate::projection::{project_box, project_nonneg_l1};

/// Primal and dual stepsizes that satisfy the convergence conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stepsizes {
    pub gamma: f64,
    pub rho: f64,
}

impl Stepsizes {
    /// Checks `0 < gamma < gamma_max` and `0 < rho < 2 delta / (delta^2 + 2)`.
    pub fn new(gamma: f64, rho: f64, geom: &DualGeometry, consts: &ProblemConstants) -> Result<Self> {
        Self::check_gamma(gamma, consts)?;
        let rho_max = 2.0 * geom.delta / (geom.delta * geom.delta + 2.0);
        if !(rho > 0.0 && rho < rho_max) {
            return Err(Error::Stepsize(format!(
                "rho = {rho} must satisfy 0 < rho < 2*delta/(delta^2 + 2) = {rho_max}"
            )));
        }
        Ok(Self { gamma, rho })
    }

    pub fn check_gamma(gamma: f64, consts: &ProblemConstants) -> Result<()> {
        if !(gamma > 0.0 && gamma < consts.gamma_max) {
            return Err(Error::Stepsize(format!(
                "gamma = {gamma} must satisfy 0 < gamma < 1/(max_i max_(x,mu) sum_j |H_ij|) = {}",
                consts.gamma_max
            )));
        }
        Ok(())
    }
}

/// `rho = delta / (1 + delta^2)`.
pub fn default_rho(delta: f64) -> f64 {
    delta / (1.0 + delta * delta)
}

/// Projection of a full dual vector onto the product of block sets.
pub fn project_dual(p: &ProblemSpec, geom: &DualGeometry, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for (c, rows) in p.dual_partition.blocks().iter().enumerate() {
        let block = DVector::from_iterator(rows.len(), rows.iter().map(|&r| v[r]));
        let proj = project_nonneg_l1(&geom.block_sets[c], &block);
        for (k, &r) in rows.iter().enumerate() {
            out[r] = proj[k];
        }
    }
    out
}

/// An approximate saddle point of the regularized Lagrangian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddlePoint {
    pub x: DVector<f64>,
    pub mu: DVector<f64>,
    /// Natural-map residual of the projected gradient iteration.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Update order of the centralized primal-dual iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UzawaOrder {
    /// Both steps read `(x_k, mu_k)`.
    Simultaneous,
    /// The dual step reads the fresh `x_{k+1}`.
    Sequential,
}

fn all_indices(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// One centralized primal-dual step.
pub fn uzawa_step(
    p: &ProblemSpec,
    geom: &DualGeometry,
    steps: &Stepsizes,
    order: UzawaOrder,
    x: &DVector<f64>,
    mu: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let all_x = all_indices(p.n());
    let all_mu = all_indices(p.m());
    let grad = p.grad_x_coords(x, mu, &all_x);
    let x_next = project_box(&p.bounds, &(x - grad * steps.gamma));
    let x_dual = match order {
        UzawaOrder::Simultaneous => x,
        UzawaOrder::Sequential => &x_next,
    };
    let g = p.constraints.value_rows(x_dual, &all_mu);
    let mu_next = project_dual(p, geom, &(mu + (g - mu * geom.delta) * steps.rho));
    (x_next, mu_next)
}

/// `|x - P_X[x - gamma grad_x]| + |mu - P_M[mu + rho grad_mu]|`.
pub fn uzawa_residual(
    p: &ProblemSpec,
    geom: &DualGeometry,
    steps: &Stepsizes,
    x: &DVector<f64>,
    mu: &DVector<f64>,
) -> f64 {
    let (xn, mn) = uzawa_step(p, geom, steps, UzawaOrder::Simultaneous, x, mu);
    (xn - x).norm() + (mn - mu).norm()
}

/// Iterates of the centralized method, starting with `(x0, mu0)`.
pub fn uzawa_trajectory(
    p: &ProblemSpec,
    geom: &DualGeometry,
    steps: &Stepsizes,
    order: UzawaOrder,
    x0: DVector<f64>,
    mu0: DVector<f64>,
    count: usize,
) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut out = Vec::with_capacity(count + 1);
    out.push((x0, mu0));
    for _ in 0..count {
        let (x, mu) = out.last().expect("trajectory is never empty");
        let next = uzawa_step(p, geom, steps, order, x, mu);
        out.push(next);
    }
    out
}

/// Options for [`uzawa_solve_with`].
#[derive(Clone, Debug)]
pub struct UzawaOptions {
    pub order: UzawaOrder,
    pub iters: usize,
    pub tol: f64,
    pub x0: Option<DVector<f64>>,
    pub mu0: Option<DVector<f64>>,
}

impl Default for UzawaOptions {
    fn default() -> Self {
        Self {
            order: UzawaOrder::Simultaneous,
            iters: 1_000_000,
            tol: 1e-10,
            x0: None,
            mu0: None,
        }
    }
}

/// Centralized Uzawa iteration from the box midpoint and `mu = 0`.
pub fn uzawa_solve(
    p: &ProblemSpec,
    geom: &DualGeometry,
    gamma: f64,
    rho: f64,
    iters: usize,
    tol: f64,
) -> Result<SaddlePoint> {
    uzawa_solve_with(
        p,
        geom,
        gamma,
        rho,
        &UzawaOptions {
            iters,
            tol,
            ..UzawaOptions::default()
        },
    )
}

pub fn uzawa_solve_with(
    p: &ProblemSpec,
    geom: &DualGeometry,
    gamma: f64,
    rho: f64,
    opts: &UzawaOptions,
) -> Result<SaddlePoint> {
    let consts = ProblemConstants::compute(p, geom)?;
    let steps = Stepsizes::new(gamma, rho, geom, &consts)?;
    let mut x = opts.x0.clone().unwrap_or_else(|| p.bounds.midpoint());
    let mut mu = opts.mu0.clone().unwrap_or_else(|| DVector::zeros(p.m()));
    p.check_domain(geom, &x, &mu)?;
    let mut best = (f64::INFINITY, x.clone(), mu.clone());
    for k in 0..opts.iters {
        let (xn, mn) = uzawa_step(p, geom, &steps, opts.order, &x, &mu);
        x = xn;
        mu = mn;
        let r = uzawa_residual(p, geom, &steps, &x, &mu);
        if !r.is_finite() {
            return Err(Error::NonFinite(format!("Uzawa residual at iteration {k}")));
        }
        if r < best.0 {
            best = (r, x.clone(), mu.clone());
        }
        if r <= opts.tol {
            return Ok(SaddlePoint {
                x,
                mu,
                residual: r,
                converged: true,
                iterations: k + 1,
            });
        }
    }
    Ok(SaddlePoint {
        x: best.1,
        mu: best.2,
        residual: best.0,
        converged: false,
        iterations: opts.iters,
    })
}

const INNER_MAX_ITERS: usize = 5_000_000;

/// Minimizer of `L(., mu)` over `X`, optionally warm-started.
fn minimize_x(
    p: &ProblemSpec,
    consts: &ProblemConstants,
    mu: &DVector<f64>,
    x0: Option<&DVector<f64>>,
    tol: f64,
) -> Result<DVector<f64>> {
    if let Constraints::Affine { matrix, .. } = &p.constraints {
        let a = matrix.transpose() * mu;
        if let Some(x) = p.objective.separable_linear_minimizer(&a, &p.bounds) {
            return Ok(x);
        }
    }
    let gamma = 0.99 * consts.gamma_max;
    let q = (1.0 - gamma * consts.beta).clamp(0.0, 1.0);
    let all = all_indices(p.n());
    let mut x = x0.cloned().unwrap_or_else(|| p.bounds.midpoint());
    for _ in 0..INNER_MAX_ITERS {
        let grad = p.grad_x_coords(&x, mu, &all);
        let xn = project_box(&p.bounds, &(&x - grad * gamma));
        let step = (&xn - &x).amax();
        x = xn;
        if !step.is_finite() {
            return Err(Error::NonFinite("fixed-mu iteration".into()));
        }
        if step <= tol * (1.0 - q) {
            return Ok(x);
        }
    }
    Err(Error::NotConverged(format!(
        "fixed-mu minimizer did not reach tolerance {tol} in {INNER_MAX_ITERS} iterations"
    )))
}

/// The fixed point of `h(x) = P_X[x - gamma grad_x L(x, mu)]`, to sup-norm accuracy `tol`.
pub fn fixed_mu_minimizer(
    p: &ProblemSpec,
    geom: &DualGeometry,
    consts: &ProblemConstants,
    mu: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    p.check_domain(geom, &p.bounds.midpoint(), mu)?;
    minimize_x(p, consts, mu, None, tol)
}

/// Saddle point by accelerated projected ascent on the dual function with exact inner solves.
///
/// Works for `delta = 0` as well, which gives the unregularized solution.
pub fn saddle_oracle(
    p: &ProblemSpec,
    geom: &DualGeometry,
    consts: &ProblemConstants,
    tol: f64,
) -> Result<SaddlePoint> {
    let m = p.m();
    let inner_tol = (tol * 1e-2).max(1e-15);
    if m == 0 {
        let x = minimize_x(p, consts, &DVector::zeros(0), None, inner_tol)?;
        return Ok(SaddlePoint {
            x,
            mu: DVector::zeros(0),
            residual: 0.0,
            converged: true,
            iterations: 0,
        });
    }
    let lipschitz = consts.m_global * consts.m_global / consts.beta + geom.delta;
    let step = 1.0 / lipschitz;
    let all_mu = all_indices(m);
    let max_iters = 2_000_000;
    let mut mu = DVector::zeros(m);
    let mut y = mu.clone();
    let mut t = 1.0f64;
    let mut x = minimize_x(p, consts, &y, None, inner_tol)?;
    let mut converged = false;
    let mut iterations = max_iters;
    for k in 0..max_iters {
        x = minimize_x(p, consts, &y, Some(&x), inner_tol)?;
        let grad = p.constraints.value_rows(&x, &all_mu) - &y * geom.delta;
        let mu_next = project_dual(p, geom, &(&y + grad * step));
        let mapping = (&mu_next - &y).norm() / step;
        if !mapping.is_finite() {
            return Err(Error::NonFinite("dual ascent gradient mapping".into()));
        }
        if (&y - &mu_next).dot(&(&mu_next - &mu)) > 0.0 {
            t = 1.0;
            y = mu_next.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &mu_next + (&mu_next - &mu) * ((t - 1.0) / t_next);
            t = t_next;
        }
        mu = mu_next;
        if mapping <= tol {
            converged = true;
            iterations = k + 1;
            break;
        }
    }
    let x = minimize_x(p, consts, &mu, Some(&x), inner_tol)?;
    let steps = Stepsizes {
        gamma: 0.99 * consts.gamma_max,
        rho: step,
    };
    let residual = uzawa_residual(p, geom, &steps, &x, &mu);
    Ok(SaddlePoint {
        x,
        mu,
        residual,
        converged,
        iterations,
    })
}

/// Which contraction condition failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractionCondition {
    /// `gamma * sum_j |H_ij| < 1`.
    StepRowSum,
    /// `G` strictly diagonally dominant, hence positive definite.
    GPositiveDefinite,
    /// `F = I - gamma G` strictly diagonally dominant, hence positive definite.
    FPositiveDefinite,
}

/// Comparison matrix `G`, iteration matrix `F = I - gamma G` and their certificates.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionCertificate {
    pub g: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub f_row_sums: Vec<f64>,
}

impl ContractionCertificate {
    pub fn max_f_row_sum(&self) -> f64 {
        self.f_row_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn contraction_matrices(
    p: &ProblemSpec,
    geom: &DualGeometry,
    gamma: f64,
    x: &DVector<f64>,
    mu: &DVector<f64>,
) -> Result<ContractionCertificate> {
    p.check_domain(geom, x, mu)?;
    let h = p.hessian_x(x, mu);
    let n = h.nrows();
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Hessian".into()));
    }
    let g = DMatrix::from_fn(n, n, |i, j| if i == j { h[(i, i)].abs() } else { -h[(i, j)].abs() });
    let f = DMatrix::identity(n, n) - &g * gamma;
    let fail = |cond: ContractionCondition, row: usize| {
        Err(Error::Certificate(format!("{cond:?} violated at row {row}")))
    };
    for i in 0..n {
        let abs_sum: f64 = h.row(i).iter().map(|v| v.abs()).sum();
        if !(gamma * abs_sum < 1.0) {
            return fail(ContractionCondition::StepRowSum, i);
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| g[(i, j)].abs()).sum();
        if !(g[(i, i)] > off) {
            return fail(ContractionCondition::GPositiveDefinite, i);
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| f[(i, j)].abs()).sum();
        if !(f[(i, i)] > off) {
            return fail(ContractionCondition::FPositiveDefinite, i);
        }
    }
    let f_row_sums = (0..n).map(|i| f.row(i).iter().sum()).collect();
    Ok(ContractionCertificate { g, f, f_row_sums })
}

/// Contraction factors and asynchrony constants of the convergence bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub q_p: f64,
    pub q_d: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub e3: Vec<f64>,
    pub n: usize,
    pub dual_blocks: usize,
    pub diameter: f64,
    pub m_global: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub delta: f64,
}

pub fn rate_constants(
    p: &ProblemSpec,
    geom: &DualGeometry,
    consts: &ProblemConstants,
    gamma: f64,
    rho: f64,
) -> Result<RateConstants> {
    Stepsizes::check_gamma(gamma, consts)?;
    let delta = geom.delta;
    if !(rho > 0.0) {
        return Err(Error::Stepsize(format!("rho = {rho} must be positive")));
    }
    let q_p = 1.0 - gamma * consts.beta;
    let q_d = (1.0 - rho * delta).powi(2) + 2.0 * rho * rho;
    if !(q_d < 1.0) {
        return Err(Error::Stepsize(format!(
            "q_d = (1 - rho*delta)^2 + 2 rho^2 = {q_d} must be below 1; \
             requires rho < 2*delta/(delta^2 + 2) = {}",
            2.0 * delta / (delta * delta + 2.0)
        )));
    }
    let n = p.n() as f64;
    let nd = p.dual_partition.len() as f64;
    let (m, d, beta) = (consts.m_global, consts.diameter, consts.beta);
    let core = m.powi(4) * d * d / (beta * beta * (1.0 - q_d));
    let c3 = 2.0 * nd * core * (q_d - rho * rho);
    let e = |mc: f64| -> (f64, f64, f64) {
        let base = mc * mc * d * d;
        (
            (q_d - rho * rho) * n * base,
            2.0 * rho * rho * n.sqrt() * base,
            (q_d - rho * rho) * base,
        )
    };
    let per_block: Vec<_> = consts.m_per_block.iter().map(|&mc| e(mc)).collect();
    Ok(RateConstants {
        q_p,
        q_d,
        c1: n * c3,
        c2: 4.0 * rho * rho * n.sqrt() * nd * core,
        c3,
        e1: per_block.iter().map(|v| v.0).collect(),
        e2: per_block.iter().map(|v| v.1).collect(),
        e3: per_block.iter().map(|v| v.2).collect(),
        n: p.n(),
        dual_blocks: p.dual_partition.len(),
        diameter: d,
        m_global: m,
        beta,
        gamma,
        rho,
        delta,
    })
}

/// The five additive terms of the convergence bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub primal: f64,
    pub dual: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// True when the primal term uses a measured initial deviation.
    pub tightened: bool,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.primal + self.dual + self.c1 + self.c2 + self.c3
    }
}

fn pow(q: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        q.powf(e)
    }
}

pub fn theorem_bound_terms(
    rc: &RateConstants,
    ops: u64,
    t: u64,
    k: u64,
    mu0_dist_sq: f64,
    initial_dev_inf: Option<f64>,
) -> BoundTerms {
    let n = rc.n as f64;
    let (ops, t, k) = (ops as f64, t as f64, k as f64);
    let spread = initial_dev_inf.map_or(rc.diameter * rc.diameter, |d| d * d);
    BoundTerms {
        primal: pow(rc.q_p, 2.0 * ops) * 2.0 * n * spread,
        dual: pow(rc.q_d, t) * 2.0 * rc.m_global * rc.m_global / (rc.beta * rc.beta) * mu0_dist_sq,
        c1: pow(rc.q_p, 2.0 * k) * rc.c1,
        c2: pow(rc.q_p, k) * rc.c2,
        c3: rc.c3,
        tightened: initial_dev_inf.is_some(),
    }
}

/// Upper bound on `|x^i - x_hat|^2` after `ops` rounds, `t` dual updates and `k` consumed rounds.
pub fn theorem_bound(
    rc: &RateConstants,
    ops: u64,
    t: u64,
    k: u64,
    mu0_dist_sq: f64,
    initial_dev_inf: Option<f64>,
) -> f64 {
    theorem_bound_terms(rc, ops, t, k, mu0_dist_sq, initial_dev_inf).total()
}

/// Right-hand side of the per-block dual recursion.
pub fn dual_block_step_bound(rc: &RateConstants, c: usize, prev_dist_sq: f64, ops_kappa: u64) -> f64 {
    let o = ops_kappa as f64;
    rc.q_d * prev_dist_sq + pow(rc.q_p, 2.0 * o) * rc.e1[c] + pow(rc.q_p, o) * rc.e2[c] + rc.e3[c]
}

/// Error bounds caused by the Tikhonov term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizationBounds {
    /// Bound on `|x_hat_delta - x_hat|^2`.
    pub solution_gap_sq: f64,
    /// Bound on `g_j(x_hat_delta)` per constraint.
    pub violation: Vec<f64>,
}

pub fn regularization_error_bounds(
    _p: &ProblemSpec,
    geom: &DualGeometry,
    consts: &ProblemConstants,
) -> RegularizationBounds {
    let b = geom.bound;
    let ratio = geom.delta / consts.beta;
    RegularizationBounds {
        solution_gap_sq: ratio * b * b,
        violation: consts.m_per_constraint.iter().map(|mj| mj * b * ratio.sqrt()).collect(),
    }
}

/// Largest `delta` for which tightening keeps the Slater point strictly feasible.
pub fn max_tightening_delta(p: &ProblemSpec, geom: &DualGeometry, consts: &ProblemConstants) -> f64 {
    if geom.bound == 0.0 {
        return f64::INFINITY;
    }
    let g = p.constraints.value(&p.slater_point);
    g.iter()
        .zip(consts.m_per_constraint.iter())
        .filter(|(_, mj)| **mj > 0.0)
        .map(|(gj, mj)| consts.beta * (-gj / (mj * geom.bound)).powi(2))
        .fold(f64::INFINITY, f64::min)
}

/// Replaces each `g_j` by `g_j + M_j B sqrt(delta/beta)`.
pub fn tighten_constraints(
    p: &ProblemSpec,
    geom: &DualGeometry,
    consts: &ProblemConstants,
) -> Result<ProblemSpec> {
    let shift = DVector::from_vec(regularization_error_bounds(p, geom, consts).violation);
    if geom.bound == 0.0 || shift.iter().all(|s| *s == 0.0) {
        return Ok(p.clone());
    }
    let g = p.constraints.value(&p.slater_point);
    if (0..p.m()).any(|j| !(g[j] + shift[j] < 0.0)) {
        return Err(Error::TighteningInfeasible {
            max_delta: max_tightening_delta(p, geom, consts),
        });
    }
    let constraints = match &p.constraints {
        Constraints::Affine { matrix, offset } => Constraints::Affine {
            matrix: matrix.clone(),
            offset: offset - &shift,
        },
        Constraints::Custom(inner) => Constraints::Custom(std::sync::Arc::new(ShiftedConstraints {
            inner: inner.clone(),
            shift: -shift,
        })),
    };
    let mut out = ProblemSpec::new(
        p.objective.clone(),
        constraints,
        p.bounds.clone(),
        p.slater_point.clone(),
        p.f_star_lower,
    )?;
    out.primal_partition = p.primal_partition.clone();
    out.dual_partition = p.dual_partition.clone();
    Ok(out)
}

/// Source of `|mu(0) - mu_hat|^2` in the dual-count recipe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mu0Source {
    /// Distance from `mu(0) = 0` to the oracle dual solution.
    Oracle,
    /// Squared diameter `(2B)^2` of the dual set.
    DiameterFallback,
    Supplied,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mu0Distance {
    Oracle,
    DiameterFallback,
    Supplied(f64),
}

/// Parameters that achieve `|x^i - x_hat|^2 <= eps1 + eps2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryParameters {
    pub eps1: f64,
    pub eps2: f64,
    pub delta: f64,
    pub rho: f64,
    pub k_min: u64,
    pub t_min: u64,
    pub mu0_dist_sq: f64,
    pub mu0_source: Mu0Source,
    pub rates: RateConstants,
    /// Bound evaluated at `ops = K = k_min`, `T = t_min`.
    pub round_trip_bound: f64,
}

fn c3_at(p: &ProblemSpec, geom: &DualGeometry, consts: &ProblemConstants, gamma: f64, delta: f64) -> f64 {
    let g = DualGeometry { delta, ..geom.clone() };
    rate_constants(p, &g, consts, gamma, default_rho(delta)).map_or(f64::INFINITY, |rc| rc.c3)
}

/// Largest `delta` examined by the regularization search.
pub const DELTA_SEARCH_MAX: f64 = 1e6;

/// Smallest `delta` (with `rho = delta/(1+delta^2)`) whose asynchrony penalty is at most `eps2`.
pub fn minimal_delta(
    p: &ProblemSpec,
    geom: &DualGeometry,
    consts: &ProblemConstants,
    gamma: f64,
    eps2: f64,
) -> Result<f64> {
    let c3 = |d: f64| c3_at(p, geom, consts, gamma, d);
    let mut hi = 10.0f64.min(DELTA_SEARCH_MAX);
    while c3(hi) > eps2 {
        if hi >= DELTA_SEARCH_MAX {
            return Err(Error::CorollaryInfeasible {
                eps2,
                frontier: c3(DELTA_SEARCH_MAX),
                delta_at_frontier: DELTA_SEARCH_MAX,
            });
        }
        hi = (hi * 10.0).min(DELTA_SEARCH_MAX);
    }
    let mut lo = 0.0f64;
    while hi - lo > 1e-8 * hi {
        let mid = 0.5 * (lo + hi);
        if c3(mid) <= eps2 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn corollary_parameters(
    p: &ProblemSpec,
    geom: &DualGeometry,
    consts: &ProblemConstants,
    gamma: f64,
    eps1: f64,
    eps2: f64,
    mu0: Mu0Distance,
) -> Result<CorollaryParameters> {
    if !(eps1 > 0.0 && eps2 > 0.0) {
        return Err(Error::Config(format!("eps1 = {eps1} and eps2 = {eps2} must be positive")));
    }
    Stepsizes::check_gamma(gamma, consts)?;
    let delta = minimal_delta(p, geom, consts, gamma, eps2)?;
    let rho = default_rho(delta);
    let g = DualGeometry { delta, ..geom.clone() };
    let rates = rate_constants(p, &g, consts, gamma, rho)?;
    let (mu0_dist_sq, mu0_source) = match mu0 {
        Mu0Distance::Oracle => {
            let sp = saddle_oracle(p, &g, consts, 1e-10)?;
            (sp.mu.norm_squared(), Mu0Source::Oracle)
        }
        Mu0Distance::DiameterFallback => ((2.0 * g.bound).powi(2), Mu0Source::DiameterFallback),
        Mu0Distance::Supplied(v) => (v, Mu0Source::Supplied),
    };
    let n = p.n() as f64;
    let d = consts.diameter;
    let ceil_nonneg = |v: f64| if v.is_finite() && v > 0.0 { v.ceil() as u64 } else { 0 };
    let k_min = if rates.q_p > 0.0 {
        ceil_nonneg(
            (eps1.ln() - (4.0 * n * d * d + 2.0 * rates.c1 + 2.0 * rates.c2).ln()) / rates.q_p.ln(),
        )
    } else {
        0
    };
    let m = consts.m_global;
    let t_min = if mu0_dist_sq > 0.0 && m > 0.0 && rates.q_d > 0.0 {
        ceil_nonneg(
            ((eps1 * consts.beta * consts.beta).ln() - (4.0 * m * m * mu0_dist_sq).ln())
                / rates.q_d.ln(),
        )
    } else {
        0
    };
    let round_trip_bound = theorem_bound(&rates, k_min, t_min, k_min, mu0_dist_sq, None);
    Ok(CorollaryParameters {
        eps1,
        eps2,
        delta,
        rho,
        k_min,
        t_min,
        mu0_dist_sq,
        mu0_source,
        rates,
        round_trip_bound,
    })
}
