//! Sampling-based certificates for the modelling assumptions and the gain
//! conditions.
//!
//! Every constant here is the best value found over a finite sample of Θ
//! (a deterministic grid plus seeded random draws). Extremes over a sample
//! are estimates of the true infimum/supremum, not proofs.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::centralized::{gamma_matrix, min_eigenvalue};
use crate::estimator::GainSchedule;
use crate::graph::{NetworkGraph, CONNECTIVITY_TOLERANCE};
use crate::sensing::{spectral_norm, FeasibleSet, SensingModel};

/// Gaussian noise has moments of every order.
pub const DEFAULT_EPSILON1: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum AuditError {
    #[error("the audit samples Θ and needs a bounded box")]
    Unbounded,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// `1/2 − 1/(2 + ε₁)`, the supremum of admissible δ₁.
pub fn delta1_upper_bound(epsilon1: f64) -> f64 {
    0.5 - 1.0 / (2.0 + epsilon1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// Random pairs per pair family (far, near-diagonal, axis-aligned).
    pub random_pairs: usize,
    /// Random single points for the Lipschitz and Γ sweeps.
    pub random_points: usize,
    /// Grid resolution per axis for pair anchors.
    pub pair_grid_points: usize,
    /// Grid resolution per axis for the Γ eigenvalue sweep.
    pub gamma_grid_points: usize,
    /// Cap on the number of grid points in either grid.
    pub max_grid_samples: usize,
    pub near_diagonal_radius: f64,
    pub observability_tolerance: f64,
    pub epsilon1: f64,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            random_pairs: 10_000,
            random_points: 10_000,
            pair_grid_points: 5,
            gamma_grid_points: 9,
            max_grid_samples: 100_000,
            near_diagonal_radius: 1e-3,
            observability_tolerance: 1e-10,
            epsilon1: DEFAULT_EPSILON1,
            seed: 0xa0d17,
        }
    }
}

fn box_bounds(set: &FeasibleSet) -> Result<(&[f64], &[f64]), AuditError> {
    match set {
        FeasibleSet::Box { lower, upper } => Ok((lower, upper)),
        FeasibleSet::WholeSpace => Err(AuditError::Unbounded),
    }
}

/// Tensor grid with `per_axis` points per coordinate (endpoints included),
/// coarsened until it holds at most `cap` points.
pub fn grid_points(set: &FeasibleSet, per_axis: usize, cap: usize) -> Result<Vec<DVector<f64>>, AuditError> {
    let (lower, upper) = box_bounds(set)?;
    let dim = lower.len();
    let mut k = per_axis.max(2);
    while k > 2 && (k as f64).powi(dim as i32) > cap as f64 {
        k -= 1;
    }
    let total = (k as f64).powi(dim as i32);
    if total > cap as f64 {
        return Ok(Vec::new());
    }
    let total = total as usize;
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let p = DVector::from_fn(dim, |i, _| {
            let step = idx % k;
            idx /= k;
            lower[i] + (upper[i] - lower[i]) * step as f64 / (k - 1) as f64
        });
        out.push(p);
    }
    Ok(out)
}

fn random_points(set: &FeasibleSet, count: usize, rng: &mut impl Rng) -> Result<Vec<DVector<f64>>, AuditError> {
    box_bounds(set)?;
    Ok((0..count).map(|_| set.sample_uniform(rng).expect("bounded")).collect())
}

fn random_unit(dim: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Pairs `(θ, θ′)`, `θ ≠ θ′`, from three families around every anchor:
/// an independent uniform partner, a partner within `near_radius` and a
/// partner displaced along a single coordinate.
fn sample_pairs(
    set: &FeasibleSet,
    anchors: &[DVector<f64>],
    near_radius: f64,
    rng: &mut impl Rng,
) -> Vec<(DVector<f64>, DVector<f64>)> {
    let dim = anchors.first().map_or(0, DVector::len);
    let mut pairs = Vec::with_capacity(anchors.len() * 3);
    for (k, theta) in anchors.iter().enumerate() {
        let far = set.sample_uniform(rng).expect("bounded");
        let near = set.project(&(theta + random_unit(dim, rng) * near_radius * rng.random_range(0.1..1.0)));
        let axis = k % dim;
        let mut aligned = theta.clone();
        aligned[axis] = set.sample_uniform(rng).expect("bounded")[axis];
        for partner in [far, near, aligned] {
            if (&partner - theta).norm() > 0.0 {
                pairs.push((theta.clone(), partner));
            }
        }
    }
    pairs
}

/// Minimum of `values` with the index of its first occurrence.
fn argmin(values: &[f64]) -> Option<(usize, f64)> {
    values
        .iter()
        .copied()
        .enumerate()
        .fold(None, |best, (i, v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((i, v)),
        })
}

/// `Σ_n (θ−θ′)ᵀ ∇f_n(θ) R_n⁻¹ (f_n(θ) − f_n(θ′)) / ‖θ−θ′‖²`.
pub fn monotonicity_ratio(model: &SensingModel, theta: &DVector<f64>, other: &DVector<f64>) -> f64 {
    let d = theta - other;
    let mut total = 0.0;
    for n in 0..model.n_agents() {
        let diff = model.eval(n, theta) - model.eval(n, other);
        total += d.dot(&(model.grad(n, theta) * (model.noise_cov_inv(n) * diff)));
    }
    total / d.norm_squared()
}

/// `Σ_n ‖f_n(θ) − f_n(θ′)‖² / ‖θ−θ′‖²`.
pub fn observability_ratio(model: &SensingModel, theta: &DVector<f64>, other: &DVector<f64>) -> f64 {
    let total: f64 = (0..model.n_agents())
        .map(|n| (model.eval(n, theta) - model.eval(n, other)).norm_squared())
        .sum();
    total / (theta - other).norm_squared()
}

fn lipschitz_over(model: &SensingModel, n: usize, points: &[DVector<f64>]) -> f64 {
    points
        .par_iter()
        .map(|p| spectral_norm(&model.grad(n, p)))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// Largest sampled `‖∇f_n(θ)‖` over `samples` uniform draws from Θ.
pub fn estimate_lipschitz<R: Rng>(
    model: &SensingModel,
    n: usize,
    set: &FeasibleSet,
    samples: usize,
    rng: &mut R,
) -> Result<f64, AuditError> {
    let points = random_points(set, samples.max(1), rng)?;
    Ok(lipschitz_over(model, n, &points))
}

/// A sampled extreme together with the pair that attains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairWitness {
    pub value: f64,
    pub theta: Vec<f64>,
    pub other: Vec<f64>,
}

fn min_over_pairs(
    pairs: &[(DVector<f64>, DVector<f64>)],
    f: impl Fn(&DVector<f64>, &DVector<f64>) -> f64 + Sync,
) -> (Vec<f64>, Option<PairWitness>) {
    let values: Vec<f64> = pairs.par_iter().map(|(a, b)| f(a, b)).collect();
    let witness = argmin(&values).map(|(i, v)| PairWitness {
        value: v,
        theta: pairs[i].0.iter().copied().collect(),
        other: pairs[i].1.iter().copied().collect(),
    });
    (values, witness)
}

/// Smallest sampled monotonicity ratio over `pair_samples` random anchors,
/// each with a far, a near-diagonal and an axis-aligned partner.
pub fn estimate_monotonicity_constant<R: Rng>(
    model: &SensingModel,
    set: &FeasibleSet,
    pair_samples: usize,
    rng: &mut R,
) -> Result<f64, AuditError> {
    let anchors = random_points(set, pair_samples.max(1), rng)?;
    let pairs = sample_pairs(set, &anchors, AuditConfig::default().near_diagonal_radius, rng);
    let (_, w) = min_over_pairs(&pairs, |a, b| monotonicity_ratio(model, a, b));
    Ok(w.map_or(f64::NAN, |w| w.value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityCheck {
    pub passed: bool,
    pub tolerance: f64,
    pub witness: Option<PairWitness>,
}

/// Checks `Σ_n ‖f_n(θ)−f_n(θ′)‖² > tolerance · ‖θ−θ′‖²` on sampled pairs.
pub fn check_global_observability<R: Rng>(
    model: &SensingModel,
    set: &FeasibleSet,
    pair_samples: usize,
    tolerance: f64,
    rng: &mut R,
) -> Result<ObservabilityCheck, AuditError> {
    let anchors = random_points(set, pair_samples.max(1), rng)?;
    let pairs = sample_pairs(set, &anchors, AuditConfig::default().near_diagonal_radius, rng);
    let (_, witness) = min_over_pairs(&pairs, |a, b| observability_ratio(model, a, b));
    Ok(ObservabilityCheck {
        passed: witness.as_ref().is_some_and(|w| w.value > tolerance),
        tolerance,
        witness,
    })
}

/// Theorem-level gain conditions and their margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainFeasibility {
    /// `a ĉ₁ ≥ 1`.
    pub consistency_ok: bool,
    pub consistency_margin: f64,
    /// `a > max{1/ĉ₁, 1/(2 Λ̂_min)}`.
    pub normality_ok: bool,
    pub normality_margin: f64,
    /// `δ₁ < 1/2 − 1/(2+ε₁)`.
    pub delta1_ok: bool,
    pub delta1_margin: f64,
}

impl GainFeasibility {
    pub fn all_ok(&self) -> bool {
        self.consistency_ok && self.normality_ok && self.delta1_ok
    }
}

pub fn gain_feasibility(a: f64, delta1: f64, c1: f64, gamma_min_eig: f64, delta1_max: f64) -> GainFeasibility {
    let a_bound = (1.0 / c1).max(1.0 / (2.0 * gamma_min_eig));
    GainFeasibility {
        consistency_ok: a * c1 >= 1.0,
        consistency_margin: a * c1 - 1.0,
        normality_ok: a > a_bound,
        normality_margin: a - a_bound,
        delta1_ok: delta1 > 0.0 && delta1 < delta1_max,
        delta1_margin: delta1_max - delta1,
    }
}

pub fn check_gain_feasible(schedule: &GainSchedule, report: &AuditReport) -> GainFeasibility {
    gain_feasibility(
        schedule.a(),
        schedule.delta1(),
        report.monotonicity.value,
        report.gamma_min_eig,
        report.delta1_max,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub id: String,
    pub passed: bool,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointWitness {
    pub value: f64,
    pub theta: Vec<f64>,
}

/// Audited constants for a sensing model over a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Per-agent `k̂_n = max ‖∇f_n‖` over sampled points.
    pub lipschitz: Vec<f64>,
    /// `max_n k̂_n² ‖R_n⁻¹‖`.
    pub k_star_max: f64,
    /// Smallest sampled monotonicity ratio, ĉ₁.
    pub monotonicity: PairWitness,
    pub observability: ObservabilityCheck,
    /// Smallest sampled eigenvalue of Γ_θ, clamped at zero.
    pub gamma_min_eig: f64,
    pub gamma_min_witness: PointWitness,
    pub epsilon1: f64,
    pub delta1_max: f64,
    /// `1/ĉ₁`, absent when ĉ₁ is not positive.
    pub consistency_a_min: Option<f64>,
    /// `max{1/ĉ₁, 1/(2 Λ̂_min)}`, absent when either constant is not
    /// positive.
    pub a_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fiedler_value: Option<f64>,
    pub checks: Vec<AssumptionCheck>,
    pub pair_count: usize,
    pub point_count: usize,
    pub pair_grid_points: usize,
    pub gamma_grid_points: usize,
    pub seed: u64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit report serializes")
    }

    /// Human-readable pass/fail table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<4} {:<6} {:>14}  detail", "id", "status", "margin");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<4} {:<6} {:>14.6e}  {}",
                c.id,
                if c.passed { "pass" } else { "FAIL" },
                c.margin,
                c.detail
            );
        }
        let _ = writeln!(
            s,
            "a_min = {}",
            self.a_min.map_or_else(|| "unbounded".to_string(), |a| format!("{a:.6}"))
        );
        s
    }
}

/// Audits the model over the box `set`. `graph` and `theta_true` add the
/// connectivity and interior-truth checks when given.
pub fn run_audit(
    model: &SensingModel,
    set: &FeasibleSet,
    graph: Option<&NetworkGraph>,
    theta_true: Option<&DVector<f64>>,
    config: &AuditConfig,
) -> Result<AuditReport, AuditError> {
    box_bounds(set)?;
    set.check_dim(model.param_dim())
        .map_err(|e| AuditError::DimensionMismatch(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut points = grid_points(set, config.gamma_grid_points, config.max_grid_samples)?;
    let gamma_grid_len = points.len();
    points.extend(random_points(set, config.random_points, &mut rng)?);

    let mut anchors = grid_points(set, config.pair_grid_points, config.max_grid_samples)?;
    anchors.extend(random_points(set, config.random_pairs, &mut rng)?);
    let pairs = sample_pairs(set, &anchors, config.near_diagonal_radius, &mut rng);

    let lipschitz: Vec<f64> = (0..model.n_agents()).map(|n| lipschitz_over(model, n, &points)).collect();
    let k_star_max = model.max_weighted_lipschitz(&lipschitz);

    let (_, monotonicity) = min_over_pairs(&pairs, |a, b| monotonicity_ratio(model, a, b));
    let monotonicity = monotonicity.expect("pairs sampled");
    let (_, obs_witness) = min_over_pairs(&pairs, |a, b| observability_ratio(model, a, b));
    let observability = ObservabilityCheck {
        passed: obs_witness
            .as_ref()
            .is_some_and(|w| w.value > config.observability_tolerance),
        tolerance: config.observability_tolerance,
        witness: obs_witness,
    };

    let gamma_eigs: Vec<f64> = points
        .par_iter()
        .map(|p| min_eigenvalue(&gamma_matrix(model, p)))
        .collect();
    let (gi, gmin) = argmin(&gamma_eigs).expect("points sampled");
    let gamma_min_eig = gmin.max(0.0);
    let gamma_min_witness = PointWitness {
        value: gamma_min_eig,
        theta: points[gi].iter().copied().collect(),
    };

    let tol = config.observability_tolerance;
    let c1 = monotonicity.value;
    let consistency_a_min = (c1 > tol).then(|| 1.0 / c1);
    let a_min = match consistency_a_min {
        Some(inv_c1) if gamma_min_eig > tol => Some(inv_c1.max(1.0 / (2.0 * gamma_min_eig))),
        _ => None,
    };
    let delta1_max = delta1_upper_bound(config.epsilon1);

    let mut checks = Vec::new();
    let interior_margin = theta_true.map_or(f64::NAN, |t| match set {
        FeasibleSet::Box { lower, upper } => t
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(v, (lo, hi))| (v - lo).min(hi - v))
            .fold(f64::INFINITY, f64::min),
        FeasibleSet::WholeSpace => f64::INFINITY,
    });
    checks.push(AssumptionCheck {
        id: "M1".into(),
        passed: theta_true.is_none_or(|t| set.is_interior(t.as_slice())),
        margin: interior_margin,
        detail: match theta_true {
            Some(_) => "closed convex box; true parameter strictly inside".into(),
            None => "closed convex box; no true parameter given".into(),
        },
    });
    checks.push(AssumptionCheck {
        id: "M2".into(),
        passed: observability.passed,
        margin: observability.witness.as_ref().map_or(f64::NAN, |w| w.value),
        detail: format!("min sampled Σ‖f(θ)−f(θ′)‖²/‖θ−θ′‖² over {} pairs", pairs.len()),
    });
    checks.push(AssumptionCheck {
        id: "M3".into(),
        passed: gamma_min_eig > tol,
        margin: gamma_min_eig,
        detail: format!("min sampled eigenvalue of Γ_θ over {} points", points.len()),
    });
    checks.push(AssumptionCheck {
        id: "M4".into(),
        passed: config.epsilon1 > 0.0,
        margin: config.epsilon1,
        detail: "noise moment exponent ε₁".into(),
    });
    if let Some(g) = graph {
        checks.push(AssumptionCheck {
            id: "M5".into(),
            passed: g.is_connected(),
            margin: g.fiedler_value(),
            detail: format!("λ₂(L) > {CONNECTIVITY_TOLERANCE:e}"),
        });
    }
    checks.push(AssumptionCheck {
        id: "M6".into(),
        passed: lipschitz.iter().all(|k| k.is_finite()),
        margin: lipschitz.iter().copied().fold(0.0, f64::max),
        detail: "max sampled ‖∇f_n‖ over agents".into(),
    });
    checks.push(AssumptionCheck {
        id: "M7".into(),
        passed: c1 > tol,
        margin: c1,
        detail: format!("min sampled monotonicity ratio ĉ₁ over {} pairs", pairs.len()),
    });

    Ok(AuditReport {
        lipschitz,
        k_star_max,
        monotonicity,
        observability,
        gamma_min_eig,
        gamma_min_witness,
        epsilon1: config.epsilon1,
        delta1_max,
        consistency_a_min,
        a_min,
        fiedler_value: graph.map(NetworkGraph::fiedler_value),
        checks,
        pair_count: pairs.len(),
        point_count: points.len(),
        pair_grid_points: config.pair_grid_points,
        gamma_grid_points: if gamma_grid_len > 0 { config.gamma_grid_points } else { 0 },
        seed: config.seed,
    })
}
