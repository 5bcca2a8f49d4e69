//! Acceptance criteria, one PASS/FAIL line each. Lines tagged `+` are
//! supporting checks printed next to the criterion they qualify; they count
//! toward the exit status like any other line.

mod oracle;

use std::sync::Arc;
use std::time::Instant;

use ciwnls::audit::{check_gain_feasible, run_audit};
use ciwnls::centralized::{
    distributed_trace, gamma_matrix, covariance_gap_bound, recover_innovation_gain, sigma_centralized,
    sigma_distributed, wnls_estimate_from_summary, ObservationSummary,
};
use ciwnls::harness::{
    benchmark_gain, benchmark_model, benchmark_preset, benchmark_set, benchmark_theta, run_monte_carlo, run_trial,
    trial_seed, Experiment, BENCHMARK_AGENTS, BENCHMARK_PAIRS, BENCHMARK_VARIANCE,
    REFERENCE_TRACE_SIGMA_C, REFERENCE_TRACE_SIGMA_D,
};
use ciwnls::sensing::NoiseSource;
use ciwnls::{AuditConfig, Ciwnls, EstimatorState, ExperimentConfig, FeasibleSet, GainSchedule, NetworkGraph, SensingModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRACE_SIGMA_C_TOL: f64 = 0.005;
const ENSEMBLE_REL_TOL: f64 = 0.15;
const AGENT_SPREAD_TOL: f64 = 0.20;
const CONSISTENCY_RATIO: f64 = 0.5;
const GAP_TOL: f64 = 1e-9;
const LINEAR_MEAN_TOL: f64 = 0.02;
const WNLS_ORACLE_TOL: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-5;
const FIEDLER_TOL: f64 = 1e-9;

struct Line {
    id: String,
    pass: bool,
    text: String,
}

#[derive(Default)]
struct Report {
    lines: Vec<Line>,
}

impl Report {
    fn check(&mut self, id: &str, pass: bool, text: impl Into<String>) {
        let line = Line {
            id: id.to_string(),
            pass,
            text: text.into(),
        };
        println!(
            "criterion {:<4} {}  {}",
            line.id,
            if line.pass { "PASS" } else { "FAIL" },
            line.text
        );
        self.lines.push(line);
    }
}

fn rel(x: f64, target: f64) -> f64 {
    (x - target).abs() / target.abs()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn zero_based_pairs() -> Vec<(usize, usize)> {
    BENCHMARK_PAIRS.iter().map(|p| (p[0] - 1, p[1] - 1)).collect()
}

fn criterion_1(r: &mut Report) {
    let theta = benchmark_theta();
    let gamma = gamma_matrix(&benchmark_model(), &theta);
    let trace = sigma_centralized(&gamma, BENCHMARK_AGENTS).expect("Γ invertible at θ*").trace();

    let oracle_gamma = oracle::sine_gamma(&zero_based_pairs(), BENCHMARK_VARIANCE, theta.as_slice());
    let oracle_trace: f64 = oracle::jacobi_eigenvalues(&oracle_gamma)
        .iter()
        .map(|l| 1.0 / (BENCHMARK_AGENTS as f64 * l))
        .sum();
    r.check(
        "1+",
        rel(trace, oracle_trace) < 1e-12,
        format!("tr Σ_c = {trace:.6} agrees with independent eigen oracle {oracle_trace:.6}"),
    );
    r.check(
        "1",
        (trace - REFERENCE_TRACE_SIGMA_C).abs() <= TRACE_SIGMA_C_TOL,
        format!("tr Σ_c at θ* = {trace:.6}, required {REFERENCE_TRACE_SIGMA_C} ± {TRACE_SIGMA_C_TOL}"),
    );
}

/// Criteria 2 and 3 share one ensemble.
fn criteria_2_3(r: &mut Report) {
    let model = benchmark_model();
    let theta = benchmark_theta();
    let gamma = gamma_matrix(&model, &theta);
    match recover_innovation_gain(&gamma, BENCHMARK_AGENTS, REFERENCE_TRACE_SIGMA_D) {
        Ok(rec) => r.check(
            "2a",
            true,
            format!("tr Σ_d(a) = {REFERENCE_TRACE_SIGMA_D} solved, roots {:?}", rec.roots),
        ),
        Err(e) => r.check("2a", false, format!("tr Σ_d(a) = {REFERENCE_TRACE_SIGMA_D} has no root: {e}")),
    }

    let gain = benchmark_gain();
    let config = benchmark_preset();
    let a = config.schedule.a();
    let eigs = ciwnls::centralized::sorted_symmetric_eigen(&gamma).0;
    let trace_d = distributed_trace(&eigs, BENCHMARK_AGENTS, a);
    let trace_c = gain.trace_sigma_c;
    r.check(
        "2+",
        rel(trace_d / trace_c, REFERENCE_TRACE_SIGMA_D / REFERENCE_TRACE_SIGMA_C) < 1e-6,
        format!(
            "gain in use a = {a:.4} reproduces the reference loss ratio: tr Σ_d/tr Σ_c = {trace_d:.4}/{trace_c:.4} = {:.4}",
            trace_d / trace_c
        ),
    );

    let experiment = Experiment::from_config(config).expect("preset is valid");
    let audit = run_audit(
        &model,
        &benchmark_set(),
        Some(&experiment.graph),
        Some(&theta),
        &AuditConfig::default(),
    )
    .expect("box audit");
    let feas = check_gain_feasible(&experiment.config.schedule, &audit);
    r.check(
        "2b",
        feas.normality_ok,
        format!(
            "a = {a:.4} vs max(1/ĉ₁, 1/(2Λ̂_min)) with audited ĉ₁ = {:.3e}, Λ̂_min = {:.3e} over the closed box",
            audit.monotonicity.value, audit.gamma_min_eig
        ),
    );

    let start = Instant::now();
    let result = run_monte_carlo(&experiment, None, None).expect("ensemble runs");
    let secs = start.elapsed().as_secs_f64();
    let last = result.terminal();
    let per_agent = &last.mean_scaled_sq_error;
    let worst = |target: f64| per_agent.iter().map(|&v| rel(v, target)).fold(0.0, f64::max);
    let (lo, hi) = per_agent
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    r.check(
        "2c",
        worst(REFERENCE_TRACE_SIGMA_D) <= ENSEMBLE_REL_TOL,
        format!(
            "{} trials, T = {}: per-agent (t+1)‖x_n − θ*‖² in [{lo:.4}, {hi:.4}], required within {:.0}% of {REFERENCE_TRACE_SIGMA_D} ({secs:.0}s)",
            last.trials,
            last.epoch,
            ENSEMBLE_REL_TOL * 100.0
        ),
    );
    r.check(
        "2+",
        worst(trace_d) <= ENSEMBLE_REL_TOL,
        format!(
            "same ensemble vs tr Σ_d(a) = {trace_d:.4} for the gain in use: worst agent off by {:.1}%",
            worst(trace_d) * 100.0
        ),
    );
    let mean_d = per_agent.iter().sum::<f64>() / per_agent.len() as f64;
    r.check(
        "2+",
        (hi - lo) / mean_d <= AGENT_SPREAD_TOL,
        format!("per-agent terminal spread {:.1}% of the mean", (hi - lo) / mean_d * 100.0),
    );
    let tenth = result
        .records
        .iter()
        .find(|rec| rec.epoch >= last.epoch / 10)
        .expect("epoch T/10 recorded");
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    r.check(
        "2+",
        avg(&last.mean_norm_error) < avg(&tenth.mean_norm_error),
        format!(
            "mean normalized error {:.4e} at t = {} falls to {:.4e} at t = {}",
            avg(&tenth.mean_norm_error),
            tenth.epoch,
            avg(&last.mean_norm_error),
            last.epoch
        ),
    );

    let central = result.terminal_centralized().expect("centralized track enabled");
    let c = central.centralized_scaled_sq_error.expect("value present");
    r.check(
        "3",
        rel(c, REFERENCE_TRACE_SIGMA_C) <= ENSEMBLE_REL_TOL,
        format!(
            "{} trials, T = {}: batch WNLS (t+1)‖θ̂ − θ*‖² = {c:.4}, required within {:.0}% of {REFERENCE_TRACE_SIGMA_C}",
            central.centralized_trials,
            central.epoch,
            ENSEMBLE_REL_TOL * 100.0
        ),
    );
    r.check(
        "3+",
        rel(c, trace_c) <= ENSEMBLE_REL_TOL,
        format!(
            "same track vs tr Σ_c = {trace_c:.4} at θ*: off by {:.1}%",
            rel(c, trace_c) * 100.0
        ),
    );
    let unconverged: usize = result.traces.iter().map(|t| t.centralized_unconverged).sum();
    r.check(
        "3+",
        unconverged == 0,
        format!("{unconverged} batch solves stopped at the iteration cap"),
    );
}

fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        let dx = x.ln() - mx;
        (a + dx * (y.ln() - my), b + dx * dx)
    });
    num / den
}

fn criterion_4(r: &mut Report) {
    let horizon = 8000;
    let config = ExperimentConfig {
        horizon,
        run_centralized: false,
        ..benchmark_preset()
    };
    let experiment = Experiment::from_config(config).expect("preset is valid");
    let result = run_monte_carlo(&experiment, None, None).expect("ensemble runs");
    let max_err = |epoch: u64| -> Vec<f64> {
        result
            .traces
            .iter()
            .map(|t| t.errors_at(epoch).expect("epoch recorded").iter().copied().fold(0.0, f64::max))
            .collect()
    };
    let (early, late) = (median(max_err(2000)), median(max_err(horizon)));
    r.check(
        "4a",
        late < CONSISTENCY_RATIO * early,
        format!(
            "median max_n ‖x_n − θ*‖: {early:.4e} at t = 2000, {late:.4e} at t = {horizon} (ratio {:.3}, required < {CONSISTENCY_RATIO})",
            late / early
        ),
    );

    let trace0 = &result.traces[0];
    let n_agents = experiment.graph.n_agents();
    let mut slopes = Vec::new();
    for n in 0..n_agents {
        let pts: Vec<(f64, f64)> = trace0
            .epochs
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= horizon / 2)
            .map(|(k, &t)| {
                let s = (t as f64 + 1.0).powf(0.4);
                let mean = result.traces.iter().map(|tr| tr.agent_errors[k][n]).sum::<f64>() / result.traces.len() as f64;
                (t as f64 + 1.0, s * mean)
            })
            .collect();
        slopes.push(log_log_slope(&pts));
    }
    let worst = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    r.check(
        "4b",
        worst <= 0.0,
        format!("log-log slope of trial-mean (t+1)^0.4‖x_n − θ*‖ over t ∈ [{}, {horizon}]: max over agents {worst:.4}", horizon / 2),
    );
}

fn random_orthogonal(m: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    g.qr().q()
}

fn criterion_5(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_min = f64::INFINITY;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_oracle = 0.0f64;
    for _ in 0..200 {
        let m = rng.random_range(1..=6usize);
        let n_agents = rng.random_range(1..=20usize);
        let lambdas: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.random_range(-1.3..0.5))).collect();
        let q = random_orthogonal(m, &mut rng);
        let gamma = &q * DMatrix::from_diagonal(&DVector::from_vec(lambdas.clone())) * q.transpose();
        let gamma = (&gamma + gamma.transpose()) * 0.5;
        let gamma_eigs = oracle::jacobi_eigenvalues(&to_rows(&gamma));
        let l_min = gamma_eigs[0];
        let l_max = gamma_eigs[m - 1];
        let a = 1.0 / (2.0 * l_min) * (1.0 + 10f64.powf(rng.random_range(-3.0..1.0)));
        let k_star = l_max * (1.0 + rng.random_range(0.0..1.0));

        let sd = sigma_distributed(&gamma, n_agents, a).expect("feasible a");
        let sc = sigma_centralized(&gamma, n_agents).expect("Γ positive definite");
        let bound = covariance_gap_bound(&gamma, a, n_agents, k_star).expect("valid bound inputs");
        let gap = to_rows(&(&sd - &sc));
        let gap_eigs = oracle::jacobi_eigenvalues(&gap);
        let norm = gap_eigs.iter().map(|e| e.abs()).fold(0.0, f64::max);
        worst_min = worst_min.min(gap_eigs[0]);
        worst_excess = worst_excess.max(norm - bound);

        let mut want = oracle::sigma_d_eigenvalues(&gamma_eigs, n_agents as f64, a);
        want.sort_by(f64::total_cmp);
        let got = oracle::jacobi_eigenvalues(&to_rows(&sd));
        for (g, w) in got.iter().zip(&want) {
            worst_oracle = worst_oracle.max(rel(*g, *w));
        }
    }
    r.check(
        "5",
        worst_min >= -GAP_TOL && worst_excess <= GAP_TOL,
        format!(
            "200 instances, M ≤ 6: min eig(Σ_d − Σ_c) = {worst_min:.3e}, max ‖Σ_d − Σ_c‖ − bound = {worst_excess:.3e}, tolerance {GAP_TOL:e}"
        ),
    );
    r.check(
        "5+",
        worst_oracle < 1e-9,
        format!("Σ_d spectrum vs closed-form eigen oracle: worst relative error {worst_oracle:.2e}"),
    );
}

struct LinearCase {
    f: Vec<DMatrix<f64>>,
    r: Vec<DMatrix<f64>>,
}

fn linear_case() -> LinearCase {
    LinearCase {
        f: vec![
            DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
            DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]),
            DMatrix::from_row_slice(2, 3, &[0.0, 1.0, -1.0, 1.0, 0.0, 1.0]),
        ],
        r: vec![
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.8]),
            DMatrix::from_element(1, 1, 1.5),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
        ],
    }
}

/// Normal equations `(Σ FᵀR⁻¹F) θ = Σ FᵀR⁻¹ (ȳ_n)` from raw sums.
fn closed_form_wls(case: &LinearCase, sums: &[Vec<f64>], count: f64) -> Vec<f64> {
    let m = 3;
    let mut lhs = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for (n, f) in case.f.iter().enumerate() {
        let k = f.nrows();
        let r_rows = to_rows(&case.r[n]);
        // columns of R⁻¹ one at a time
        let r_inv: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                let e: Vec<f64> = (0..k).map(|i| if i == c { 1.0 } else { 0.0 }).collect();
                oracle::solve(&r_rows, &e)
            })
            .collect();
        let w = |i: usize, j: usize| r_inv[j][i];
        for p in 0..m {
            for s in 0..m {
                for i in 0..k {
                    for j in 0..k {
                        lhs[p][s] += count * f[(i, p)] * w(i, j) * f[(j, s)];
                    }
                }
            }
            for i in 0..k {
                for j in 0..k {
                    rhs[p] += f[(i, p)] * w(i, j) * sums[n][j];
                }
            }
        }
    }
    oracle::solve(&lhs, &rhs)
}

fn criterion_6(r: &mut Report) {
    let case = linear_case();
    let model = SensingModel::linear(case.f.clone(), case.r.clone()).expect("linear model");
    let graph = NetworkGraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).expect("ring");
    let set = FeasibleSet::cube(3, -10.0, 10.0).expect("box");
    let theta = DVector::from_vec(vec![0.7, -0.4, 1.1]);
    let audit = run_audit(&model, &set, Some(&graph), Some(&theta), &AuditConfig::default()).expect("audit");
    let schedule = GainSchedule::audited_default(&audit).expect("linear model audits positive");
    let est = Ciwnls::new(&graph, &model, schedule, &set).expect("estimator");
    let horizon = 20_000;
    let trials = 50;
    let mut mean = vec![DVector::zeros(3); 4];
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(6, trial));
        let last = est
            .run_with(EstimatorState::zeros(4, 3), horizon, &theta, &mut rng, |_| {})
            .expect("finite run");
        for (n, acc) in mean.iter_mut().enumerate() {
            *acc += last.agent_estimate(n, 3) / trials as f64;
        }
    }
    let dev = mean.iter().map(|m| (m - &theta).amax()).fold(0.0, f64::max);
    r.check(
        "6a",
        dev <= LINEAR_MEAN_TOL,
        format!(
            "4 agents, M = 3, a = {:.3}, T = {horizon}, {trials} trials: max |mean x_n(T) − θ*| = {dev:.3e}, required ≤ {LINEAR_MEAN_TOL}",
            schedule.a()
        ),
    );

    let checkpoints = ciwnls::harness::log_checkpoints(horizon, 20);
    let mut worst = 0.0f64;
    let mut solves = 0;
    for trial in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(60, trial));
        let mut summary = ObservationSummary::new(&model);
        let mut sums: Vec<Vec<f64>> = case.f.iter().map(|f| vec![0.0; f.nrows()]).collect();
        let mut next = checkpoints.iter().peekable();
        for t in 0..=horizon {
            let y = model.sample_all(&theta, &mut rng);
            summary.add(&model, &y);
            for (s, yn) in sums.iter_mut().zip(&y) {
                for (a, b) in s.iter_mut().zip(yn.iter()) {
                    *a += b;
                }
            }
            if next.peek() == Some(&&t) {
                next.next();
                let want = closed_form_wls(&case, &sums, (t + 1) as f64);
                let got = wnls_estimate_from_summary(&model, &summary, &set, &[DVector::zeros(3)], &Default::default())
                    .expect("batch solve");
                let err = got.theta.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
                worst = worst.max(err);
                solves += 1;
            }
        }
    }
    r.check(
        "6b",
        worst <= WNLS_ORACLE_TOL,
        format!("{solves} checkpoint solves vs closed-form WLS: max abs difference {worst:.2e}, required ≤ {WNLS_ORACLE_TOL:e}"),
    );
}

#[derive(Debug)]
struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn sample(&self, factor: &DMatrix<f64>, _rng: &mut dyn RngCore) -> DVector<f64> {
        DVector::zeros(factor.nrows())
    }
}

fn random_edges(n: usize, p: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                e.push((a, b));
            }
        }
    }
    e
}

fn criterion_7(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // projection
    let set = benchmark_set();
    let mut expansive = 0;
    let mut not_idempotent = 0;
    for _ in 0..10_000 {
        let x = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
        let (px, py) = (set.project(&x), set.project(&y));
        if (&px - &py).norm() > (&x - &y).norm() {
            expansive += 1;
        }
        if set.project(&px) != px {
            not_idempotent += 1;
        }
    }
    r.check(
        "7a",
        expansive == 0 && not_idempotent == 0,
        format!("projection on 10⁴ pairs: {expansive} expansive, {not_idempotent} not idempotent"),
    );

    // fixed point at consensus with noiseless data
    let experiment = Experiment::from_config(benchmark_preset()).expect("preset");
    let model = benchmark_model();
    let theta = benchmark_theta();
    let est = Ciwnls::new(&experiment.graph, &model, experiment.config.schedule, &set).expect("estimator");
    let y = model.eval_all(&theta);
    let mut moved = 0;
    for epoch in [0u64, 1, 10, 1000, 100_000] {
        let state = EstimatorState {
            epoch,
            ..EstimatorState::replicated(BENCHMARK_AGENTS, &theta)
        };
        if est.step(&state, &y).expect("finite").x != state.x {
            moved += 1;
        }
    }
    let mut zero_cfg = benchmark_preset();
    zero_cfg.initial_estimate = Some(theta.iter().copied().collect());
    zero_cfg.horizon = 500;
    zero_cfg.trials = 1;
    zero_cfg.run_centralized = false;
    let mut zero = Experiment::from_config(zero_cfg).expect("config");
    zero.model = zero.model.clone().with_noise_source(Arc::new(ZeroNoise));
    let trace = run_trial(&zero, 0).expect("trial");
    let flat = trace.agent_errors.iter().flatten().all(|&e| e == 0.0);
    r.check(
        "7b",
        moved == 0 && flat,
        format!("step at 1⊗θ* with noiseless data moved the state at {moved} of 5 epochs; zero-noise 500-epoch trace identically zero: {flat}"),
    );

    // stacked vs per-agent
    let mut mismatches = 0;
    let graphs = [
        experiment.graph.clone(),
        NetworkGraph::new(10, &(0..9).map(|i| (i, i + 1)).collect::<Vec<_>>()).expect("path"),
    ];
    for g in &graphs {
        let est = Ciwnls::new(g, &model, experiment.config.schedule, &set).expect("estimator");
        for _ in 0..200 {
            let state = EstimatorState {
                epoch: rng.random_range(0..10_000),
                x: DVector::from_fn(50, |_, _| rng.random_range(-1.5..1.5)),
            };
            let y = model.sample_all(&theta, &mut rng);
            if est.step(&state, &y).expect("finite") != est.step_stacked(&state, &y).expect("finite") {
                mismatches += 1;
            }
        }
    }
    r.check(
        "7c",
        mismatches == 0,
        format!("stacked vs per-agent step on 400 random states: {mismatches} mismatches (exact equality)"),
    );

    // gradients
    let pairs = zero_based_pairs();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = set.sample_uniform(&mut rng).expect("bounded");
        for (n, &(i, j)) in pairs.iter().enumerate() {
            let fd = oracle::central_gradient(|p| (p[i] + p[j]).sin(), x.as_slice(), 1e-5);
            let g = model.grad(n, &x);
            let diff: f64 = fd.iter().enumerate().map(|(k, v)| (g[(k, 0)] - v).powi(2)).sum::<f64>().sqrt();
            let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
            worst = worst.max(diff / scale);
        }
    }
    r.check(
        "7d",
        worst < FD_REL_TOL,
        format!("analytic vs central-difference gradients at 100 points: worst relative error {worst:.2e}"),
    );

    // algebraic connectivity
    let mut graphs_checked = 0;
    let mut worst = 0.0f64;
    let mut check = |n: usize, edges: &[(usize, usize)]| {
        let g = NetworkGraph::new(n, edges).expect("valid edge list");
        let want = oracle::jacobi_eigenvalues(&oracle::laplacian(n, edges));
        worst = worst.max((g.fiedler_value() - want[1].max(0.0)).abs());
        for (a, b) in g.laplacian_spectrum().iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
        graphs_checked += 1;
    };
    for n in 2..=5usize {
        let all: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        for mask in 0u32..(1 << all.len()) {
            let edges: Vec<_> = all.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, e)| *e).collect();
            check(n, &edges);
        }
    }
    for n in 6..=12usize {
        check(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>());
        check(n, &(0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n))).collect::<Vec<_>>());
        check(n, &(1..n).map(|i| (0, i)).collect::<Vec<_>>());
        check(n, &(0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect::<Vec<_>>());
        for k in 0..200 {
            let p = 0.05 + 0.9 * k as f64 / 200.0;
            check(n, &random_edges(n, p, &mut rng));
        }
    }
    r.check(
        "7e",
        worst <= FIEDLER_TOL,
        format!(
            "{graphs_checked} graphs (all graphs on 2–5 nodes, families and random draws on 6–12): max |λ − λ_oracle| = {worst:.2e}"
        ),
    );
}

fn main() {
    let mut report = Report::default();
    let start = Instant::now();
    criterion_1(&mut report);
    criteria_2_3(&mut report);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criterion_6(&mut report);
    criterion_7(&mut report);
    println!("criterion 8    NOTE  figure curves are not reproducible (unreported graph seed and gains); shape is covered by 4, traces by 1–3");
    let failed: Vec<&str> = report.lines.iter().filter(|l| !l.pass).map(|l| l.id.as_str()).collect();
    println!(
        "acceptance: {} of {} lines pass in {:.0}s; failing: {}",
        report.lines.len() - failed.len(),
        report.lines.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() { "none".to_string() } else { failed.join(", ") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
