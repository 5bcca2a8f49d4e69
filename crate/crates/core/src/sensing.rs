//! Per-agent observation models `y_n(t) = f_n(θ) + ζ_n(t)` and the feasible
//! parameter set.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default central-difference step.
pub const FINITE_DIFFERENCE_STEP: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum SensingError {
    #[error("agent index {index} out of range for {n_agents} agents")]
    AgentOutOfRange { index: usize, n_agents: usize },
    #[error("component index {index} out of range 1..={param_dim}")]
    ComponentOutOfRange { index: usize, param_dim: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("noise covariance of agent {agent} is not symmetric positive definite")]
    NotPositiveDefinite { agent: usize },
    #[error("noise variance must be positive and finite, got {0}")]
    InvalidVariance(f64),
    #[error("invalid feasible set: {0}")]
    InvalidSet(String),
    #[error("model json: {0}")]
    Json(String),
}

/// Additive observation-noise generator. `factor` is the lower Cholesky
/// factor `C_n` of the agent's covariance, `C_n C_nᵀ = R_n`.
pub trait NoiseSource: Send + Sync + fmt::Debug {
    fn sample(&self, factor: &DMatrix<f64>, rng: &mut dyn RngCore) -> DVector<f64>;
}

/// Zero-mean Gaussian noise `C_n z` with `z ~ N(0, I)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianNoise;

impl NoiseSource for GaussianNoise {
    fn sample(&self, factor: &DMatrix<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
        let z = DVector::from_fn(factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        factor * z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SensorFunction {
    /// `sin(θ_i + θ_j)`, 0-based components.
    PairwiseSine { i: usize, j: usize },
    /// `F θ` with `F` of shape `M_n × M`.
    Linear(DMatrix<f64>),
}

#[derive(Debug, Clone)]
struct AgentSensor {
    function: SensorFunction,
    noise_cov: DMatrix<f64>,
    noise_cov_inv: DMatrix<f64>,
    noise_factor: DMatrix<f64>,
}

impl AgentSensor {
    fn new(agent: usize, function: SensorFunction, noise_cov: DMatrix<f64>) -> Result<Self, SensingError> {
        let asym = (&noise_cov - noise_cov.transpose()).abs().max();
        let scale = noise_cov.abs().max().max(1.0);
        if !noise_cov.iter().all(|v| v.is_finite()) || asym > 1e-12 * scale {
            return Err(SensingError::NotPositiveDefinite { agent });
        }
        let chol = Cholesky::new(noise_cov.clone()).ok_or(SensingError::NotPositiveDefinite { agent })?;
        if chol.l_dirty().diagonal().iter().any(|d| *d <= 0.0) {
            return Err(SensingError::NotPositiveDefinite { agent });
        }
        Ok(Self {
            function,
            noise_cov_inv: chol.inverse(),
            noise_factor: chol.l(),
            noise_cov,
        })
    }
}

/// Sensing functions, their gradients and noise covariances for every
/// agent of the network.
#[derive(Clone)]
pub struct SensingModel {
    param_dim: usize,
    agents: Vec<AgentSensor>,
    noise: Arc<dyn NoiseSource>,
    spec: ModelSpec,
}

impl fmt::Debug for SensingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SensingModel")
            .field("param_dim", &self.param_dim)
            .field("n_agents", &self.agents.len())
            .field("noise", &self.noise)
            .finish()
    }
}

impl SensingModel {
    /// Agent `n` observes `sin(θ_i + θ_j)` with scalar noise variance
    /// `variance`. Pairs are 1-based.
    pub fn pairwise_sine(pairs: &[[usize; 2]], variance: f64, param_dim: usize) -> Result<Self, SensingError> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(SensingError::InvalidVariance(variance));
        }
        if pairs.is_empty() {
            return Err(SensingError::DimensionMismatch("no agents".into()));
        }
        let agents = pairs
            .iter()
            .enumerate()
            .map(|(n, &[i, j])| {
                for idx in [i, j] {
                    if idx == 0 || idx > param_dim {
                        return Err(SensingError::ComponentOutOfRange { index: idx, param_dim });
                    }
                }
                AgentSensor::new(
                    n,
                    SensorFunction::PairwiseSine { i: i - 1, j: j - 1 },
                    DMatrix::from_element(1, 1, variance),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            param_dim,
            agents,
            noise: Arc::new(GaussianNoise),
            spec: ModelSpec::PairwiseSine {
                pairs: pairs.to_vec(),
                variance,
                param_dim,
            },
        })
    }

    /// Agent `n` observes `F_n θ` with noise covariance `R_n`.
    pub fn linear(matrices: Vec<DMatrix<f64>>, noise_covs: Vec<DMatrix<f64>>) -> Result<Self, SensingError> {
        if matrices.is_empty() {
            return Err(SensingError::DimensionMismatch("no agents".into()));
        }
        if matrices.len() != noise_covs.len() {
            return Err(SensingError::DimensionMismatch(format!(
                "{} sensing matrices but {} noise covariances",
                matrices.len(),
                noise_covs.len()
            )));
        }
        let param_dim = matrices[0].ncols();
        if param_dim == 0 {
            return Err(SensingError::DimensionMismatch("zero parameter dimension".into()));
        }
        let spec = ModelSpec::Linear {
            sensing: matrices.iter().map(matrix_rows).collect(),
            noise: noise_covs.iter().map(matrix_rows).collect(),
        };
        let agents = matrices
            .into_iter()
            .zip(noise_covs)
            .enumerate()
            .map(|(n, (f, r))| {
                if f.ncols() != param_dim || f.nrows() == 0 {
                    return Err(SensingError::DimensionMismatch(format!(
                        "agent {}: sensing matrix is {}x{}, expected M_n x {param_dim}",
                        n + 1,
                        f.nrows(),
                        f.ncols()
                    )));
                }
                if r.nrows() != f.nrows() || r.ncols() != f.nrows() {
                    return Err(SensingError::DimensionMismatch(format!(
                        "agent {}: covariance is {}x{}, expected {}x{}",
                        n + 1,
                        r.nrows(),
                        r.ncols(),
                        f.nrows(),
                        f.nrows()
                    )));
                }
                AgentSensor::new(n, SensorFunction::Linear(f), r)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            param_dim,
            agents,
            noise: Arc::new(GaussianNoise),
            spec,
        })
    }

    /// Replaces the Gaussian noise generator.
    pub fn with_noise_source(mut self, noise: Arc<dyn NoiseSource>) -> Self {
        self.noise = noise;
        self
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self, SensingError> {
        match spec {
            ModelSpec::PairwiseSine {
                pairs,
                variance,
                param_dim,
            } => Self::pairwise_sine(pairs, *variance, *param_dim),
            ModelSpec::Linear { sensing, noise } => {
                let f = sensing.iter().map(|m| rows_matrix(m)).collect::<Result<Vec<_>, _>>()?;
                let r = noise.iter().map(|m| rows_matrix(m)).collect::<Result<Vec<_>, _>>()?;
                Self::linear(f, r)
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SensingError> {
        let spec: ModelSpec = serde_json::from_str(text).map_err(|e| SensingError::Json(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn obs_dim(&self, n: usize) -> usize {
        self.agent(n).noise_cov.nrows()
    }

    pub fn function(&self, n: usize) -> &SensorFunction {
        &self.agent(n).function
    }

    pub fn noise_cov(&self, n: usize) -> &DMatrix<f64> {
        &self.agent(n).noise_cov
    }

    pub fn noise_cov_inv(&self, n: usize) -> &DMatrix<f64> {
        &self.agent(n).noise_cov_inv
    }

    pub fn noise_factor(&self, n: usize) -> &DMatrix<f64> {
        &self.agent(n).noise_factor
    }

    pub fn check_agent(&self, n: usize) -> Result<(), SensingError> {
        if n < self.agents.len() {
            Ok(())
        } else {
            Err(SensingError::AgentOutOfRange {
                index: n,
                n_agents: self.agents.len(),
            })
        }
    }

    fn agent(&self, n: usize) -> &AgentSensor {
        &self.agents[n]
    }

    /// `f_n(θ)`.
    pub fn eval(&self, n: usize, theta: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(theta.len(), self.param_dim);
        match &self.agent(n).function {
            SensorFunction::PairwiseSine { i, j } => DVector::from_element(1, (theta[*i] + theta[*j]).sin()),
            SensorFunction::Linear(f) => f * theta,
        }
    }

    /// `∇f_n(θ)` laid out `M × M_n`, entry `[i][j] = ∂[f_n]_j / ∂θ_i`.
    pub fn grad(&self, n: usize, theta: &DVector<f64>) -> DMatrix<f64> {
        debug_assert_eq!(theta.len(), self.param_dim);
        match &self.agent(n).function {
            SensorFunction::PairwiseSine { i, j } => {
                let c = (theta[*i] + theta[*j]).cos();
                let mut g = DMatrix::zeros(self.param_dim, 1);
                g[(*i, 0)] += c;
                g[(*j, 0)] += c;
                g
            }
            SensorFunction::Linear(f) => f.transpose(),
        }
    }

    /// Central differences, same layout as [`SensingModel::grad`].
    pub fn finite_difference_gradient(&self, n: usize, theta: &DVector<f64>, h: f64) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.param_dim, self.obs_dim(n));
        let mut probe = theta.clone();
        for i in 0..self.param_dim {
            probe[i] = theta[i] + h;
            let up = self.eval(n, &probe);
            probe[i] = theta[i] - h;
            let down = self.eval(n, &probe);
            probe[i] = theta[i];
            for j in 0..up.len() {
                g[(i, j)] = (up[j] - down[j]) / (2.0 * h);
            }
        }
        g
    }

    /// Draws `f_n(θ) + ζ_n`.
    pub fn sample_observation<R: Rng>(&self, n: usize, theta: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        self.eval(n, theta) + self.sample_noise(n, rng)
    }

    pub fn sample_noise<R: Rng>(&self, n: usize, rng: &mut R) -> DVector<f64> {
        self.noise.sample(&self.agent(n).noise_factor, rng)
    }

    /// One observation per agent in agent order.
    pub fn sample_all<R: Rng>(&self, theta: &DVector<f64>, rng: &mut R) -> Vec<DVector<f64>> {
        (0..self.n_agents()).map(|n| self.sample_observation(n, theta, rng)).collect()
    }

    /// Noise-free observations at `theta`.
    pub fn eval_all(&self, theta: &DVector<f64>) -> Vec<DVector<f64>> {
        (0..self.n_agents()).map(|n| self.eval(n, theta)).collect()
    }

    /// `∇f_n(θ) R_n⁻¹ (f_n(θ) − y_n)`.
    pub fn weighted_residual_gradient(&self, n: usize, theta: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let residual = self.eval(n, theta) - y;
        self.grad(n, theta) * (self.noise_cov_inv(n) * residual)
    }

    /// `Σ_k w_k ∇²[f_n]_k(θ)`, the curvature of `wᵀf_n` at `θ`.
    pub fn weighted_hessian(&self, n: usize, theta: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.param_dim, self.param_dim);
        if let SensorFunction::PairwiseSine { i, j } = &self.agent(n).function {
            let s = -w[0] * (theta[*i] + theta[*j]).sin();
            for a in [*i, *j] {
                for b in [*i, *j] {
                    h[(a, b)] += s;
                }
            }
        }
        h
    }

    /// Largest spectral norm of `R_n⁻¹` over agents scaled by `k_n²`, given
    /// per-agent Lipschitz constants.
    pub fn max_weighted_lipschitz(&self, lipschitz: &[f64]) -> f64 {
        lipschitz
            .iter()
            .enumerate()
            .map(|(n, k)| k * k * spectral_norm(self.noise_cov_inv(n)))
            .fold(0.0, f64::max)
    }
}

/// Model description file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    PairwiseSine {
        pairs: Vec<[usize; 2]>,
        variance: f64,
        param_dim: usize,
    },
    Linear {
        #[serde(rename = "F")]
        sensing: Vec<Vec<Vec<f64>>>,
        #[serde(rename = "R")]
        noise: Vec<Vec<Vec<f64>>>,
    },
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn rows_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, SensingError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(SensingError::DimensionMismatch("ragged or empty matrix".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Closed convex parameter set Θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeasibleSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    WholeSpace,
}

impl FeasibleSet {
    pub fn bounded(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SensingError> {
        let set = FeasibleSet::Box { lower, upper };
        set.validate()?;
        Ok(set)
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, SensingError> {
        Self::bounded(vec![lo; dim], vec![hi; dim])
    }

    pub fn validate(&self) -> Result<(), SensingError> {
        match self {
            FeasibleSet::WholeSpace => Ok(()),
            FeasibleSet::Box { lower, upper } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    return Err(SensingError::InvalidSet(format!(
                        "{} lower bounds and {} upper bounds",
                        lower.len(),
                        upper.len()
                    )));
                }
                for (i, (lo, hi)) in lower.iter().zip(upper).enumerate() {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(SensingError::InvalidSet(format!(
                            "coordinate {}: need finite lower < upper, got [{lo}, {hi}]",
                            i + 1
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SensingError> {
        let set: FeasibleSet = serde_json::from_str(text).map_err(|e| SensingError::Json(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            FeasibleSet::Box { lower, .. } => Some(lower.len()),
            FeasibleSet::WholeSpace => None,
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<(), SensingError> {
        match self.dim() {
            Some(d) if d != dim => Err(SensingError::DimensionMismatch(format!(
                "feasible set has dimension {d}, model has {dim}"
            ))),
            _ => Ok(()),
        }
    }

    /// Euclidean projection, in place. Coordinatewise clamp for boxes.
    pub fn project_in_place(&self, x: &mut [f64]) {
        if let FeasibleSet::Box { lower, upper } = self {
            debug_assert_eq!(x.len(), lower.len());
            for ((xi, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
                if *xi >= *hi {
                    *xi = *hi;
                } else if *xi < *lo {
                    *xi = *lo;
                }
            }
        }
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        self.project_in_place(out.as_mut_slice());
        out
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            FeasibleSet::WholeSpace => x.iter().all(|v| v.is_finite()),
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi),
        }
    }

    pub fn is_interior(&self, x: &[f64]) -> bool {
        match self {
            FeasibleSet::WholeSpace => x.iter().all(|v| v.is_finite()),
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (lo, hi))| *lo < *v && *v < *hi),
        }
    }

    /// Uniform draw from a box; `None` for the unbounded set.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<DVector<f64>> {
        match self {
            FeasibleSet::WholeSpace => None,
            FeasibleSet::Box { lower, upper } => Some(DVector::from_iterator(
                lower.len(),
                lower.iter().zip(upper).map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()),
            )),
        }
    }
}
