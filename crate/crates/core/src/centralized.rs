//! Centralized benchmark: batch weighted nonlinear least squares, the
//! information matrix `Γ_θ` and the closed-form asymptotic covariances of
//! the centralized and distributed estimators.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensing::{FeasibleSet, SensingModel};

/// Smallest eigenvalue of `Γ` treated as invertible.
pub const SINGULARITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CovarianceError {
    #[error("information matrix is singular (min eigenvalue {min_eigenvalue:e})")]
    Singular { min_eigenvalue: f64 },
    #[error("innovation gain a = {a} violates a > 1/(2 Λ_min) = {bound}")]
    InfeasibleGain { a: f64, bound: f64 },
    #[error("k*_max = {k_star_max} must exceed 1/(2a) = {bound}")]
    InvalidLipschitzBound { k_star_max: f64, bound: f64 },
    #[error("no gain a gives trace {target}; the smallest attainable trace is {min_trace} at a = {argmin}")]
    NoRoot { target: f64, min_trace: f64, argmin: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Eigenvalues (ascending) and matching eigenvectors of a symmetric matrix.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sorted_symmetric_eigen(m).0.first().copied().unwrap_or(f64::NAN)
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_spectral_norm(m: &DMatrix<f64>) -> f64 {
    sorted_symmetric_eigen(m).0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `Γ_θ = (1/N) Σ_n ∇f_n(θ) R_n⁻¹ ∇f_n(θ)ᵀ`.
pub fn gamma_matrix(model: &SensingModel, theta: &DVector<f64>) -> DMatrix<f64> {
    let m = model.param_dim();
    let mut gamma = DMatrix::zeros(m, m);
    for n in 0..model.n_agents() {
        let g = model.grad(n, theta);
        gamma += &g * model.noise_cov_inv(n) * g.transpose();
    }
    gamma /= model.n_agents() as f64;
    (&gamma + gamma.transpose()) * 0.5
}

fn spd_inverse(m: DMatrix<f64>) -> Result<DMatrix<f64>, CovarianceError> {
    Cholesky::new(m.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| CovarianceError::Singular {
            min_eigenvalue: min_eigenvalue(&m),
        })
}

fn checked_min_eigenvalue(gamma: &DMatrix<f64>) -> Result<f64, CovarianceError> {
    if !gamma.is_square() {
        return Err(CovarianceError::DimensionMismatch(format!(
            "gamma is {}x{}",
            gamma.nrows(),
            gamma.ncols()
        )));
    }
    let min = min_eigenvalue(gamma);
    if !(min > SINGULARITY_TOLERANCE) {
        return Err(CovarianceError::Singular { min_eigenvalue: min });
    }
    Ok(min)
}

/// Centralized asymptotic covariance `Σ_c = (N Γ)⁻¹`.
pub fn sigma_centralized(gamma: &DMatrix<f64>, n_agents: usize) -> Result<DMatrix<f64>, CovarianceError> {
    checked_min_eigenvalue(gamma)?;
    spd_inverse(gamma * n_agents as f64)
}

/// Distributed asymptotic covariance
/// `Σ_d = a I/(2N) + (N Γ − N I/(2a))⁻¹ / 4`, defined for `a > 1/(2 Λ_min)`.
///
/// Evaluated in the eigenbasis of Γ. Near the feasibility edge the shifted
/// matrix is badly conditioned and inverting it directly loses accuracy in
/// proportion; the spectral form does not.
pub fn sigma_distributed(gamma: &DMatrix<f64>, n_agents: usize, a: f64) -> Result<DMatrix<f64>, CovarianceError> {
    let lambda_min = checked_min_eigenvalue(gamma)?;
    let bound = 1.0 / (2.0 * lambda_min);
    if !(a > bound && a.is_finite()) {
        return Err(CovarianceError::InfeasibleGain { a, bound });
    }
    let n = n_agents as f64;
    let (eigs, v) = sorted_symmetric_eigen(gamma);
    let d = DVector::from_iterator(
        eigs.len(),
        eigs.iter().map(|&l| a / (2.0 * n) + 0.25 / (n * (l - 1.0 / (2.0 * a)))),
    );
    let s = &v * DMatrix::from_diagonal(&d) * v.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

fn gap_eigenvalue(a: f64, lambda: f64, n: f64) -> f64 {
    (a * lambda - 1.0).powi(2) / (n * lambda * (2.0 * a * lambda - 1.0))
}

/// Upper bound on `‖Σ_d − Σ_c‖`:
/// `max{(aΛ_min−1)²/(NΛ_min(2aΛ_min−1)), (a k*−1)²/(N k*(2a k*−1))}`.
pub fn covariance_gap_bound(
    gamma: &DMatrix<f64>,
    a: f64,
    n_agents: usize,
    k_star_max: f64,
) -> Result<f64, CovarianceError> {
    let lambda_min = checked_min_eigenvalue(gamma)?;
    let bound = 1.0 / (2.0 * lambda_min);
    if !(a > bound && a.is_finite()) {
        return Err(CovarianceError::InfeasibleGain { a, bound });
    }
    if !(k_star_max > 1.0 / (2.0 * a)) {
        return Err(CovarianceError::InvalidLipschitzBound {
            k_star_max,
            bound: 1.0 / (2.0 * a),
        });
    }
    let n = n_agents as f64;
    Ok(gap_eigenvalue(a, lambda_min, n).max(gap_eigenvalue(a, k_star_max, n)))
}

/// `tr Σ_d(a)` from the eigenvalues of `Γ`.
pub fn distributed_trace(gamma_eigenvalues: &[f64], n_agents: usize, a: f64) -> f64 {
    let n = n_agents as f64;
    gamma_eigenvalues
        .iter()
        .map(|&l| a / (2.0 * n) + 0.25 / (n * l - n / (2.0 * a)))
        .sum()
}

/// Gains solving `tr Σ_d(a) = target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRecovery {
    pub target_trace: f64,
    /// Ascending; one root on each side of the trace minimiser.
    pub roots: Vec<f64>,
    pub min_trace: f64,
    pub argmin: f64,
}

impl GainRecovery {
    pub fn largest(&self) -> f64 {
        *self.roots.last().expect("at least one root")
    }
}

/// Solves `tr Σ_d(a) = target` over the feasible range `a > 1/(2 Λ_min)`.
///
/// `tr Σ_d` is convex in `a` on that range and grows without bound at both
/// ends, so there are zero, one or two roots.
pub fn recover_innovation_gain(
    gamma: &DMatrix<f64>,
    n_agents: usize,
    target: f64,
) -> Result<GainRecovery, CovarianceError> {
    let lambda_min = checked_min_eigenvalue(gamma)?;
    let eigen = sorted_symmetric_eigen(gamma).0;
    let trace = |a: f64| distributed_trace(&eigen, n_agents, a);
    let lo = 1.0 / (2.0 * lambda_min);

    // bracket the minimiser: trace decreases then increases
    let mut hi = lo * 2.0;
    while trace(hi * 2.0) < trace(hi) {
        hi *= 2.0;
    }
    hi *= 2.0;
    let (mut left, mut right) = (lo, hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let m1 = right - inv_phi * (right - left);
        let m2 = left + inv_phi * (right - left);
        if trace(m1) <= trace(m2) {
            right = m2;
        } else {
            left = m1;
        }
        if right - left <= 1e-14 * right {
            break;
        }
    }
    let argmin = 0.5 * (left + right);
    let min_trace = trace(argmin);
    if min_trace > target {
        return Err(CovarianceError::NoRoot {
            target,
            min_trace,
            argmin,
        });
    }

    let bisect = |mut inside: f64, mut outside: f64| {
        // trace(inside) <= target < trace(outside)
        for _ in 0..400 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if trace(mid) <= target {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        0.5 * (inside + outside)
    };
    let mut left_out = argmin;
    while trace(left_out) <= target {
        left_out = lo + 0.5 * (left_out - lo);
    }
    let mut right_out = argmin * 2.0;
    while trace(right_out) <= target {
        right_out *= 2.0;
    }
    let mut roots = vec![bisect(argmin, left_out), bisect(argmin, right_out)];
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs());
    Ok(GainRecovery {
        target_trace: target,
        roots,
        min_trace,
        argmin,
    })
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Closed-form covariances at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub theta: Vec<f64>,
    pub n_agents: usize,
    pub gamma: Vec<Vec<f64>>,
    pub gamma_eigenvalues: Vec<f64>,
    pub sigma_c: Vec<Vec<f64>>,
    pub trace_sigma_c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_d: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_sigma_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_star_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_bound: Option<f64>,
}

impl CovarianceReport {
    /// `Σ_c` always; `Σ_d` and the gap when `a` is given; the gap bound when
    /// `k_star_max` is also given.
    pub fn compute(
        model: &SensingModel,
        theta: &DVector<f64>,
        n_agents: usize,
        a: Option<f64>,
        k_star_max: Option<f64>,
    ) -> Result<Self, CovarianceError> {
        if theta.len() != model.param_dim() {
            return Err(CovarianceError::DimensionMismatch(format!(
                "theta has {} entries, model expects {}",
                theta.len(),
                model.param_dim()
            )));
        }
        let gamma = gamma_matrix(model, theta);
        let sigma_c = sigma_centralized(&gamma, n_agents)?;
        let mut report = Self {
            theta: theta.iter().copied().collect(),
            n_agents,
            gamma: rows(&gamma),
            gamma_eigenvalues: sorted_symmetric_eigen(&gamma).0,
            sigma_c: rows(&sigma_c),
            trace_sigma_c: sigma_c.trace(),
            a,
            sigma_d: None,
            trace_sigma_d: None,
            gap_norm: None,
            k_star_max,
            gap_bound: None,
        };
        if let Some(a) = a {
            let sigma_d = sigma_distributed(&gamma, n_agents, a)?;
            report.gap_norm = Some(symmetric_spectral_norm(&(&sigma_d - &sigma_c)));
            report.trace_sigma_d = Some(sigma_d.trace());
            report.sigma_d = Some(rows(&sigma_d));
            if let Some(k) = k_star_max {
                report.gap_bound = Some(covariance_gap_bound(&gamma, a, n_agents, k)?);
            }
        }
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Raw observations `y_n(s)`, `s = 0..t`, one vector per agent per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationHistory {
    pub epochs: Vec<Vec<DVector<f64>>>,
}

impl ObservationHistory {
    pub fn push(&mut self, observations: Vec<DVector<f64>>) {
        self.epochs.push(observations);
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn summary(&self, model: &SensingModel) -> ObservationSummary {
        let mut s = ObservationSummary::new(model);
        for obs in &self.epochs {
            s.add(model, obs);
        }
        s
    }
}

/// `Q_t(z) = Σ_s Σ_n (y_n(s) − f_n(z))ᵀ R_n⁻¹ (y_n(s) − f_n(z))`.
pub fn wnls_cost(model: &SensingModel, history: &ObservationHistory, z: &DVector<f64>) -> f64 {
    let f = model.eval_all(z);
    history
        .epochs
        .iter()
        .flat_map(|obs| obs.iter().enumerate())
        .map(|(n, y)| {
            let r = y - &f[n];
            r.dot(&(model.noise_cov_inv(n) * &r))
        })
        .sum()
}

/// Running per-agent sums of observations; the WNLS cost depends on the
/// history only through these.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSummary {
    count: u64,
    sums: Vec<DVector<f64>>,
    weighted_sq: f64,
}

impl ObservationSummary {
    pub fn new(model: &SensingModel) -> Self {
        Self {
            count: 0,
            sums: (0..model.n_agents()).map(|n| DVector::zeros(model.obs_dim(n))).collect(),
            weighted_sq: 0.0,
        }
    }

    pub fn add(&mut self, model: &SensingModel, observations: &[DVector<f64>]) {
        for (n, y) in observations.iter().enumerate() {
            self.sums[n] += y;
            self.weighted_sq += y.dot(&(model.noise_cov_inv(n) * y));
        }
        self.count += 1;
    }

    /// Number of epochs `t + 1`.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn means(&self) -> Vec<DVector<f64>> {
        let c = self.count.max(1) as f64;
        self.sums.iter().map(|s| s / c).collect()
    }

    /// `Q_t(z)` rebuilt from the sums.
    pub fn cost(&self, model: &SensingModel, z: &DVector<f64>) -> f64 {
        let means = self.means();
        let c = self.count as f64;
        let mean_part = mean_cost(model, &means, z);
        let const_part = self.weighted_sq
            - c * means
                .iter()
                .enumerate()
                .map(|(n, m)| m.dot(&(model.noise_cov_inv(n) * m)))
                .sum::<f64>();
        c * mean_part + const_part
    }
}

fn mean_cost(model: &SensingModel, means: &[DVector<f64>], z: &DVector<f64>) -> f64 {
    means
        .iter()
        .enumerate()
        .map(|(n, ybar)| {
            let r = ybar - model.eval(n, z);
            r.dot(&(model.noise_cov_inv(n) * &r))
        })
        .sum()
}

fn mean_cost_gradient(model: &SensingModel, means: &[DVector<f64>], z: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(z.len());
    for (n, ybar) in means.iter().enumerate() {
        g += model.weighted_residual_gradient(n, z, ybar) * 2.0;
    }
    g
}

/// Settings of the multi-start batch solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WnlsOptions {
    /// Uniform random starts in Θ on top of the caller's starts.
    pub random_starts: usize,
    pub max_iterations: usize,
    /// Stop once `‖P_Θ(z − ∇q(z)) − z‖` falls below this, where
    /// `q = Q_t/(t+1)`.
    pub gradient_tolerance: f64,
    pub seed: u64,
}

impl Default for WnlsOptions {
    fn default() -> Self {
        Self {
            random_starts: 8,
            max_iterations: 10_000,
            gradient_tolerance: 1e-10,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WnlsError {
    #[error("no starting point: pass at least one start or use a bounded feasible set")]
    NoStart,
    #[error("observation history is empty")]
    EmptyHistory,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WnlsEstimate {
    pub theta: DVector<f64>,
    /// `Q_t` at `theta`.
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Index into the combined start list (caller starts first).
    pub start_index: usize,
}

struct LocalSolve {
    z: DVector<f64>,
    q: f64,
    converged: bool,
    iterations: usize,
}

fn projected_step_norm(set: &FeasibleSet, z: &DVector<f64>, grad: &DVector<f64>) -> f64 {
    (set.project(&(z - grad)) - z).norm()
}

// Exact Hessian of the means cost: Gauss–Newton part plus residual curvature.
// The curvature term matters when residuals are large (few observations);
// without it the iteration only converges linearly and stalls below the
// resolution of the cost.
fn mean_cost_hessian(model: &SensingModel, means: &[DVector<f64>], z: &DVector<f64>) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(z.len(), z.len());
    for (n, ybar) in means.iter().enumerate() {
        let g = model.grad(n, z);
        let w = model.noise_cov_inv(n) * (model.eval(n, z) - ybar);
        h += (&g * model.noise_cov_inv(n) * g.transpose() + model.weighted_hessian(n, z, &w)) * 2.0;
    }
    h
}

// Size of the rounding error in `mean_cost` at `z`: residuals `ȳ − f` carry
// an absolute error of order ε(|ȳ| + |f|), which dominates once the cost is
// small.
fn cost_rounding(model: &SensingModel, means: &[DVector<f64>], z: &DVector<f64>) -> f64 {
    means
        .iter()
        .enumerate()
        .map(|(n, ybar)| {
            let f = model.eval(n, z);
            let r = ybar - &f;
            let w = model.noise_cov_inv(n) * &r;
            w.iter()
                .zip(ybar.iter().zip(f.iter()))
                .map(|(wk, (yk, fk))| wk.abs() * (yk.abs() + fk.abs()))
                .sum::<f64>()
        })
        .sum::<f64>()
        * f64::EPSILON
}

// Coordinates pinned at a bound with the gradient pushing outward.
fn active_mask(set: &FeasibleSet, z: &DVector<f64>, g: &DVector<f64>) -> Vec<bool> {
    match set {
        FeasibleSet::Box { lower, upper } => (0..z.len())
            .map(|i| (z[i] <= lower[i] && g[i] > 0.0) || (z[i] >= upper[i] && g[i] < 0.0))
            .collect(),
        FeasibleSet::WholeSpace => vec![false; z.len()],
    }
}

// Damped projected Newton on the free coordinates. A rejected step
// raises the damping, so the trial point slides toward a short projected
// gradient step and some decrease is always found away from stationary
// points; an indefinite Hessian is handled the same way. Costs are compared
// with a few ulps of slack: near the minimum the Newton step still shrinks
// the gradient after the cost has stopped resolving.
fn local_solve(
    model: &SensingModel,
    means: &[DVector<f64>],
    set: &FeasibleSet,
    start: &DVector<f64>,
    options: &WnlsOptions,
) -> LocalSolve {
    let mut z = set.project(start);
    let mut q = mean_cost(model, means, &z);
    let mut damping = 1e-3;
    for it in 0..options.max_iterations {
        let g = mean_cost_gradient(model, means, &z);
        if projected_step_norm(set, &z, &g) <= options.gradient_tolerance {
            return LocalSolve {
                z,
                q,
                converged: true,
                iterations: it,
            };
        }
        let active = active_mask(set, &z, &g);
        let free: Vec<usize> = (0..z.len()).filter(|&i| !active[i]).collect();
        let h_full = mean_cost_hessian(model, means, &z);
        let h = h_full.select_rows(&free).select_columns(&free);
        let g_free = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
        let scale = h.diagonal().amax().max(1.0);
        let slack = 8.0 * cost_rounding(model, means, &z).max(f64::EPSILON * q.abs());
        let mut accepted = false;
        for _ in 0..80 {
            let shifted = &h + DMatrix::identity(free.len(), free.len()) * (damping * scale);
            let Some(chol) = shifted.cholesky() else {
                damping *= 4.0;
                continue;
            };
            let d = chol.solve(&g_free);
            let mut trial = z.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] -= d[k];
            }
            let candidate = set.project(&trial);
            if candidate == z {
                break;
            }
            let q_new = mean_cost(model, means, &candidate);
            if q_new <= q + slack {
                z = candidate;
                q = q_new;
                damping = (damping / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            damping *= 4.0;
        }
        if !accepted {
            // no representable descent left
            let g = mean_cost_gradient(model, means, &z);
            let converged = projected_step_norm(set, &z, &g) <= options.gradient_tolerance;
            return LocalSolve {
                z,
                q,
                converged,
                iterations: it + 1,
            };
        }
    }
    let g = mean_cost_gradient(model, means, &z);
    LocalSolve {
        converged: projected_step_norm(set, &z, &g) <= options.gradient_tolerance,
        z,
        q,
        iterations: options.max_iterations,
    }
}

/// Multi-start minimiser of `Q_t` over Θ from running sums.
pub fn wnls_estimate_from_summary(
    model: &SensingModel,
    summary: &ObservationSummary,
    set: &FeasibleSet,
    starts: &[DVector<f64>],
    options: &WnlsOptions,
) -> Result<WnlsEstimate, WnlsError> {
    if summary.count == 0 {
        return Err(WnlsError::EmptyHistory);
    }
    let m = model.param_dim();
    if let Some(bad) = starts.iter().find(|s| s.len() != m) {
        return Err(WnlsError::DimensionMismatch(format!(
            "start has {} entries, model expects {m}",
            bad.len()
        )));
    }
    set.check_dim(m).map_err(|e| WnlsError::DimensionMismatch(e.to_string()))?;
    let mut all_starts: Vec<DVector<f64>> = starts.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for _ in 0..options.random_starts {
        if let Some(s) = set.sample_uniform(&mut rng) {
            all_starts.push(s);
        }
    }
    if all_starts.is_empty() {
        return Err(WnlsError::NoStart);
    }

    let means = summary.means();
    let solves: Vec<LocalSolve> = all_starts
        .par_iter()
        .map(|s| local_solve(model, &means, set, s, options))
        .collect();
    let (start_index, best) = solves
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.q.total_cmp(&b.q).then(i.cmp(j)))
        .expect("non-empty");
    Ok(WnlsEstimate {
        cost: summary.cost(model, &best.z),
        theta: best.z,
        converged: best.converged,
        iterations: best.iterations,
        start_index,
    })
}

/// Multi-start minimiser of `Q_t` over Θ.
pub fn wnls_estimate(
    model: &SensingModel,
    history: &ObservationHistory,
    set: &FeasibleSet,
    starts: &[DVector<f64>],
    options: &WnlsOptions,
) -> Result<WnlsEstimate, WnlsError> {
    wnls_estimate_from_summary(model, &history.summary(model), set, starts, options)
}
