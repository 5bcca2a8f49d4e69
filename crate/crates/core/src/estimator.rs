//! The distributed consensus+innovations recursion.
//!
//! Every agent holds `x_n(t) ∈ Θ` and, synchronously with all others,
//! computes
//!
//! ```text
//! x̂_n(t+1) = x_n(t) − β_t Σ_{l∈Ω_n} (x_n(t) − x_l(t))
//!                   − α_t ∇f_n(x_n(t)) R_n⁻¹ (f_n(x_n(t)) − y_n(t))
//! x_n(t+1) = P_Θ[x̂_n(t+1)]
//! ```
//!
//! with `α_t = a/(t+1)` and `β_t = b/(t+1)^δ₁`.

use std::io::Write;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{delta1_upper_bound, AuditReport, DEFAULT_EPSILON1};
use crate::graph::NetworkGraph;
use crate::sensing::{FeasibleSet, SensingModel};

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("invalid gain schedule: {0}")]
    InvalidSchedule(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite estimate at epoch {epoch}, agent {}", agent + 1)]
    NonFinite { epoch: u64, agent: usize },
}

/// Innovation and consensus weight sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct GainSchedule {
    a: f64,
    b: f64,
    delta1: f64,
    epsilon1: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    a: f64,
    b: f64,
    delta1: f64,
    #[serde(default = "default_epsilon1")]
    epsilon1: f64,
}

fn default_epsilon1() -> f64 {
    DEFAULT_EPSILON1
}

impl TryFrom<RawSchedule> for GainSchedule {
    type Error = EstimatorError;
    fn try_from(raw: RawSchedule) -> Result<Self, Self::Error> {
        GainSchedule::new(raw.a, raw.b, raw.delta1, raw.epsilon1)
    }
}

impl From<GainSchedule> for RawSchedule {
    fn from(s: GainSchedule) -> Self {
        RawSchedule {
            a: s.a,
            b: s.b,
            delta1: s.delta1,
            epsilon1: s.epsilon1,
        }
    }
}

impl GainSchedule {
    pub const DEFAULT_B: f64 = 1.0;
    pub const DEFAULT_DELTA1: f64 = 0.25;

    /// Requires `a, b > 0`, `ε₁ > 0` and `0 < δ₁ < 1/2 − 1/(2+ε₁)`.
    pub fn new(a: f64, b: f64, delta1: f64, epsilon1: f64) -> Result<Self, EstimatorError> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(EstimatorError::InvalidSchedule(format!("a must be positive, got {a}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(EstimatorError::InvalidSchedule(format!("b must be positive, got {b}")));
        }
        if !(epsilon1 > 0.0) {
            return Err(EstimatorError::InvalidSchedule(format!(
                "epsilon1 must be positive, got {epsilon1}"
            )));
        }
        let bound = delta1_upper_bound(epsilon1);
        if !(delta1 > 0.0 && delta1 < bound) {
            return Err(EstimatorError::InvalidSchedule(format!(
                "delta1 must lie in (0, {bound}), got {delta1}"
            )));
        }
        Ok(Self { a, b, delta1, epsilon1 })
    }

    /// `b = 1`, `δ₁ = 1/4`, `ε₁ = 10⁶` and the given `a`.
    pub fn with_innovation_gain(a: f64) -> Result<Self, EstimatorError> {
        Self::new(a, Self::DEFAULT_B, Self::DEFAULT_DELTA1, DEFAULT_EPSILON1)
    }

    /// Default schedule with `a = ⌈1.1 · max{1/ĉ₁, 1/(2 Λ̂_min)}⌉` from an
    /// audit. `None` when the audit found no finite lower bound on `a`.
    pub fn audited_default(report: &AuditReport) -> Option<Self> {
        let a_min = report.a_min?;
        Self::new(
            (1.1 * a_min).ceil(),
            Self::DEFAULT_B,
            Self::DEFAULT_DELTA1,
            report.epsilon1,
        )
        .ok()
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn epsilon1(&self) -> f64 {
        self.epsilon1
    }

    /// Innovation weight `α_t = a/(t+1)`.
    pub fn alpha(&self, t: u64) -> f64 {
        self.a / (t as f64 + 1.0)
    }

    /// Consensus weight `β_t = b/(t+1)^δ₁`.
    pub fn beta(&self, t: u64) -> f64 {
        self.b / (t as f64 + 1.0).powf(self.delta1)
    }
}

/// Stacked network estimate `x(t)`, agent-major, plus the epoch counter.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub epoch: u64,
    pub x: DVector<f64>,
}

impl EstimatorState {
    /// Every agent starts at `x0`.
    pub fn replicated(n_agents: usize, x0: &DVector<f64>) -> Self {
        let m = x0.len();
        Self {
            epoch: 0,
            x: DVector::from_fn(n_agents * m, |k, _| x0[k % m]),
        }
    }

    pub fn zeros(n_agents: usize, param_dim: usize) -> Self {
        Self {
            epoch: 0,
            x: DVector::zeros(n_agents * param_dim),
        }
    }

    pub fn block(&self, n: usize, m: usize) -> &[f64] {
        &self.x.as_slice()[n * m..(n + 1) * m]
    }

    pub fn agent_estimate(&self, n: usize, m: usize) -> DVector<f64> {
        DVector::from_column_slice(self.block(n, m))
    }

    /// `‖x_n − θ‖` for every agent.
    pub fn agent_errors(&self, theta: &DVector<f64>) -> Vec<f64> {
        let m = theta.len();
        self.x
            .as_slice()
            .chunks_exact(m)
            .map(|b| b.iter().zip(theta.iter()).map(|(x, t)| (x - t) * (x - t)).sum::<f64>().sqrt())
            .collect()
    }
}

/// `Σ_{l∈Ω_n} (x_n − x_l)` for an agent-major stacked vector with blocks of
/// size `m`.
pub fn consensus_term(graph: &NetworkGraph, x: &[f64], m: usize, n: usize) -> DVector<f64> {
    let xn = &x[n * m..(n + 1) * m];
    let mut acc = DVector::zeros(m);
    for &l in graph.neighbors(n).expect("agent index in range") {
        let xl = &x[l * m..(l + 1) * m];
        for k in 0..m {
            acc[k] += xn[k] - xl[k];
        }
    }
    acc
}

/// `∇f_n(x_n) R_n⁻¹ (f_n(x_n) − y_n)`.
pub fn innovation_term(model: &SensingModel, n: usize, x_n: &DVector<f64>, y_n: &DVector<f64>) -> DVector<f64> {
    model.weighted_residual_gradient(n, x_n, y_n)
}

/// Which epochs a run records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordStride {
    /// Every epoch up to and including this one is kept.
    pub dense_until: u64,
    /// Afterwards only multiples of this.
    pub every: u64,
}

impl Default for RecordStride {
    fn default() -> Self {
        Self {
            dense_until: 1000,
            every: 10,
        }
    }
}

impl RecordStride {
    pub fn all() -> Self {
        Self {
            dense_until: u64::MAX,
            every: 1,
        }
    }

    pub fn keeps(&self, t: u64) -> bool {
        t <= self.dense_until || t % self.every.max(1) == 0
    }
}

/// Recorded states of one run, in epoch order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub param_dim: usize,
    pub states: Vec<EstimatorState>,
}

impl Trajectory {
    pub fn last(&self) -> &EstimatorState {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Rows `epoch,agent,coordinate,value`, 1-based agent and coordinate.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["epoch", "agent", "coordinate", "value"])?;
        let m = self.param_dim;
        for s in &self.states {
            for (k, v) in s.x.iter().enumerate() {
                w.write_record([
                    s.epoch.to_string(),
                    (k / m + 1).to_string(),
                    (k % m + 1).to_string(),
                    format!("{v:.16e}"),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Rows `epoch,agent,error_norm,scaled_sq_error` with the scaled error
    /// `(t+1)‖x_n(t) − θ‖²`.
    pub fn write_error_csv<W: Write>(&self, theta: &DVector<f64>, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["epoch", "agent", "error_norm", "scaled_sq_error"])?;
        for s in &self.states {
            for (n, e) in s.agent_errors(theta).into_iter().enumerate() {
                w.write_record([
                    s.epoch.to_string(),
                    (n + 1).to_string(),
                    format!("{e:.16e}"),
                    format!("{:.16e}", (s.epoch as f64 + 1.0) * e * e),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// CIWNLS bound to a graph, sensing model, gain schedule and feasible set.
#[derive(Debug, Clone, Copy)]
pub struct Ciwnls<'a> {
    graph: &'a NetworkGraph,
    model: &'a SensingModel,
    schedule: GainSchedule,
    set: &'a FeasibleSet,
}

impl<'a> Ciwnls<'a> {
    pub fn new(
        graph: &'a NetworkGraph,
        model: &'a SensingModel,
        schedule: GainSchedule,
        set: &'a FeasibleSet,
    ) -> Result<Self, EstimatorError> {
        if graph.n_agents() != model.n_agents() {
            return Err(EstimatorError::DimensionMismatch(format!(
                "graph has {} agents, sensing model has {}",
                graph.n_agents(),
                model.n_agents()
            )));
        }
        set.check_dim(model.param_dim())
            .map_err(|e| EstimatorError::DimensionMismatch(e.to_string()))?;
        Ok(Self {
            graph,
            model,
            schedule,
            set,
        })
    }

    pub fn schedule(&self) -> &GainSchedule {
        &self.schedule
    }

    fn check_inputs(&self, state: &EstimatorState, observations: &[DVector<f64>]) -> Result<(), EstimatorError> {
        let (n_agents, m) = (self.model.n_agents(), self.model.param_dim());
        if state.x.len() != n_agents * m {
            return Err(EstimatorError::DimensionMismatch(format!(
                "state has {} entries, expected {}",
                state.x.len(),
                n_agents * m
            )));
        }
        if observations.len() != n_agents {
            return Err(EstimatorError::DimensionMismatch(format!(
                "{} observations for {} agents",
                observations.len(),
                n_agents
            )));
        }
        for (n, y) in observations.iter().enumerate() {
            if y.len() != self.model.obs_dim(n) {
                return Err(EstimatorError::DimensionMismatch(format!(
                    "agent {} observation has {} entries, expected {}",
                    n + 1,
                    y.len(),
                    self.model.obs_dim(n)
                )));
            }
        }
        Ok(())
    }

    /// One synchronous update of every agent from the snapshot `state`.
    pub fn step(&self, state: &EstimatorState, observations: &[DVector<f64>]) -> Result<EstimatorState, EstimatorError> {
        self.check_inputs(state, observations)?;
        let m = self.model.param_dim();
        let (alpha, beta) = (self.schedule.alpha(state.epoch), self.schedule.beta(state.epoch));
        let x = state.x.as_slice();
        let mut next = DVector::zeros(x.len());
        for n in 0..self.model.n_agents() {
            let x_n = DVector::from_column_slice(&x[n * m..(n + 1) * m]);
            let consensus = consensus_term(self.graph, x, m, n);
            let innovation = innovation_term(self.model, n, &x_n, &observations[n]);
            let block = &mut next.as_mut_slice()[n * m..(n + 1) * m];
            for k in 0..m {
                block[k] = x_n[k] - beta * consensus[k] - alpha * innovation[k];
            }
            if block.iter().any(|v| !v.is_finite()) {
                return Err(EstimatorError::NonFinite {
                    epoch: state.epoch,
                    agent: n,
                });
            }
            self.set.project_in_place(block);
        }
        Ok(EstimatorState {
            epoch: state.epoch + 1,
            x: next,
        })
    }

    /// The same update in stacked form,
    /// `x − β_t (L⊗I_M) x + α_t G(x) R⁻¹ (y − f(x))`, then projection.
    pub fn step_stacked(
        &self,
        state: &EstimatorState,
        observations: &[DVector<f64>],
    ) -> Result<EstimatorState, EstimatorError> {
        self.check_inputs(state, observations)?;
        let m = self.model.param_dim();
        let (alpha, beta) = (self.schedule.alpha(state.epoch), self.schedule.beta(state.epoch));
        let lx = self.graph.laplacian_kron_apply(state.x.as_slice(), m);
        let mut correction = Vec::with_capacity(state.x.len());
        for (n, y) in observations.iter().enumerate() {
            let x_n = state.agent_estimate(n, m);
            let residual = y - self.model.eval(n, &x_n);
            let g = self.model.grad(n, &x_n) * (self.model.noise_cov_inv(n) * residual);
            correction.extend(g.iter().copied());
        }
        let mut next = DVector::from_iterator(
            state.x.len(),
            state
                .x
                .iter()
                .zip(&lx)
                .zip(&correction)
                .map(|((x, l), g)| x - beta * l + alpha * g),
        );
        for (n, block) in next.as_mut_slice().chunks_exact_mut(m).enumerate() {
            if block.iter().any(|v| !v.is_finite()) {
                return Err(EstimatorError::NonFinite {
                    epoch: state.epoch,
                    agent: n,
                });
            }
            self.set.project_in_place(block);
        }
        Ok(EstimatorState {
            epoch: state.epoch + 1,
            x: next,
        })
    }

    /// Runs `horizon` epochs with fresh observations of `theta_true` drawn
    /// agent-major from `rng`, calling `visit` on the initial state and on
    /// every new state. Returns the final state.
    pub fn run_with<R: Rng, F: FnMut(&EstimatorState)>(
        &self,
        initial: EstimatorState,
        horizon: u64,
        theta_true: &DVector<f64>,
        rng: &mut R,
        mut visit: F,
    ) -> Result<EstimatorState, EstimatorError> {
        let mut state = initial;
        visit(&state);
        for _ in 0..horizon {
            let y = self.model.sample_all(theta_true, rng);
            state = self.step(&state, &y)?;
            visit(&state);
        }
        Ok(state)
    }

    /// Runs `horizon` epochs and keeps the states selected by `stride`
    /// (the initial and final states are always kept).
    pub fn run<R: Rng>(
        &self,
        initial: EstimatorState,
        horizon: u64,
        theta_true: &DVector<f64>,
        rng: &mut R,
        stride: RecordStride,
    ) -> Result<Trajectory, EstimatorError> {
        let start = initial.epoch;
        let end = start + horizon;
        let mut states = Vec::new();
        self.run_with(initial, horizon, theta_true, rng, |s| {
            if s.epoch == start || s.epoch == end || stride.keeps(s.epoch) {
                states.push(s.clone());
            }
        })?;
        Ok(Trajectory {
            param_dim: self.model.param_dim(),
            states,
        })
    }
}
