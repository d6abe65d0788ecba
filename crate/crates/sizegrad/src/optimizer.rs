//! The gradient-descent sizing loop.
//!
//! Per iteration: golden STA and path extraction at the current rounded
//! sizes, differentiable (τ, ω) through the straight-through round, the
//! smoothed timing target, one backward sweep for its size gradients,
//! Gumbel-Softmax per-gate learning rates, an Adam update, and best-seen
//! tracking against the golden metrics. The target is a negative penalty
//! (0 when timing is clean), so the update ascends it.

use crate::layout::{net_multipliers, LayoutConfig};
use crate::model::{CellLibrary, CircuitGraph, SizingAssignment};
use crate::sta::{extract_critical_paths, gatewise_metrics, propagate_with, DelayState};
use crate::surrogate::{
    evaluate_on_tape, physical_features, EvalContext, Rounding, SurrogateMode, SurrogateModel,
};
use crate::tape::Tape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SizeError {
    #[error(transparent)]
    Layout(#[from] crate::layout::LayoutError),
}

/// Objective weights and temperatures. Paper defaults: μ = 0.5 each,
/// γ = 10 ps, λ = 5.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetWeights {
    pub mu_tau: f64,
    pub mu_omega: f64,
    /// Smoothing temperature in ps.
    pub gamma: f64,
    /// Gumbel-Softmax temperature.
    pub lambda: f64,
    /// Base learning rate in size steps per iteration.
    pub eta: f64,
}

impl Default for TargetWeights {
    fn default() -> Self {
        TargetWeights {
            mu_tau: 0.5,
            mu_omega: 0.5,
            gamma: 10.0,
            lambda: 5.0,
            eta: 0.25,
        }
    }
}

/// Sharp (unsmoothed) timing target:
/// `μτ/N · Σ min(0, τ_v) + μω · min_v ω_v`, with the TNS term defined as 0
/// when no gate has negative τ.
pub fn timing_target_sharp(tau: &[f64], omega: &[f64], w: &TargetWeights) -> f64 {
    let n = tau.iter().filter(|&&t| t < 0.0).count();
    let tns = if n == 0 {
        0.0
    } else {
        (w.mu_tau / n as f64) * tau.iter().map(|&t| t.min(0.0)).sum::<f64>()
    };
    let wns = if omega.is_empty() {
        0.0
    } else {
        w.mu_omega * omega.iter().copied().fold(f64::INFINITY, f64::min)
    };
    tns + wns
}

/// `-γ · ln Σ exp(-x_i/γ)`: smooth lower bound of the minimum, within
/// `γ·ln n` of it.
pub fn smoothmin(xs: &[f64], gamma: f64) -> f64 {
    assert!(!xs.is_empty() && gamma > 0.0);
    let m = xs.iter().map(|&x| -x / gamma).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = xs.iter().map(|&x| (-x / gamma - m).exp()).sum();
    -gamma * (m + sum.ln())
}

/// Smooth `min(0, x)`: `-γ · ln(1 + exp(-x/γ))`.
pub fn softmin0(x: f64, gamma: f64) -> f64 {
    let z = -x / gamma;
    -gamma * (z.max(0.0) + (-z.abs()).exp().ln_1p())
}

/// Taped counterpart of [`smoothmin`]. The max shift is a constant of the
/// evaluation point; the resulting gradient is the exact softmin weighting.
pub fn smoothmin_tape(tape: &mut Tape, xs: &[crate::tape::Var], gamma: f64) -> crate::tape::Var {
    assert!(!xs.is_empty() && gamma > 0.0);
    let m = xs
        .iter()
        .map(|&x| -tape.value(x) / gamma)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<crate::tape::Var> = xs
        .iter()
        .map(|&x| {
            let z = tape.mulc(x, -1.0 / gamma);
            let zs = tape.addc(z, -m);
            tape.exp(zs)
        })
        .collect();
    let s = tape.sum(&exps);
    let l = tape.ln(s);
    let shifted = tape.addc(l, m);
    tape.mulc(shifted, -gamma)
}

/// Taped counterpart of [`softmin0`].
pub fn softmin0_tape(tape: &mut Tape, x: crate::tape::Var, gamma: f64) -> crate::tape::Var {
    let z = tape.mulc(x, -1.0 / gamma);
    let sp = tape.softplus(z);
    tape.mulc(sp, -gamma)
}

/// Smoothed timing target on the tape. `n_violating` is frozen by the
/// caller (the count of gates with τ < 0 at the evaluation point) so the
/// target stays differentiable through it.
pub fn timing_target_tape(
    tape: &mut Tape,
    tau: &[crate::tape::Var],
    omega: &[crate::tape::Var],
    w: &TargetWeights,
    n_violating: usize,
    gamma: f64,
) -> crate::tape::Var {
    let tns = if n_violating == 0 {
        tape.c(0.0)
    } else {
        let terms: Vec<crate::tape::Var> =
            tau.iter().map(|&t| softmin0_tape(tape, t, gamma)).collect();
        let s = tape.sum(&terms);
        tape.mulc(s, w.mu_tau / n_violating as f64)
    };
    let wns = if omega.is_empty() {
        tape.c(0.0)
    } else {
        let sm = smoothmin_tape(tape, omega, gamma);
        tape.mulc(sm, w.mu_omega)
    };
    tape.add(tns, wns)
}

/// Count of gates with negative τ at the current tape values.
pub fn count_violating(tape: &Tape, tau: &[crate::tape::Var]) -> usize {
    tau.iter().filter(|&&t| tape.value(t) < 0.0).count()
}

/// One standard Gumbel(0,1) draw.
pub fn sample_gumbel(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    -(-u.ln()).ln()
}

/// Raw Gumbel-Softmax weights over severities: `softmax((ln w + n)/λ)`.
/// Sums to 1 by construction.
pub fn gumbel_weights(severities: &[f64], noise: &[f64], lambda: f64) -> Vec<f64> {
    assert_eq!(severities.len(), noise.len());
    assert!(lambda > 0.0);
    let logits: Vec<f64> = severities
        .iter()
        .zip(noise)
        .map(|(&w, &n)| (w.ln() + n) / lambda)
        .collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let denom: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / denom).collect()
}

/// Severity floor in ps: ω is negative for violating gates, and the sampled
/// weight uses `ln(severity)`, so severities are bounded away from zero.
pub const SEVERITY_FLOOR_PS: f64 = 0.01;

/// Per-gate adaptive learning rates. Gates with nonnegative ω are frozen;
/// the active ones share a total budget of `η·|active|`, allocated by
/// Gumbel-Softmax over slack severities so the worst bottlenecks move first.
pub fn gumbel_rates(
    omega: &[f64],
    w: &TargetWeights,
    rng: &mut ChaCha20Rng,
) -> Vec<f64> {
    let active: Vec<usize> = (0..omega.len()).filter(|&i| omega[i] < 0.0).collect();
    let mut rates = vec![0.0; omega.len()];
    if active.is_empty() {
        return rates;
    }
    let severities: Vec<f64> = active
        .iter()
        .map(|&i| (-omega[i]).max(SEVERITY_FLOOR_PS))
        .collect();
    let noise: Vec<f64> = active.iter().map(|_| sample_gumbel(rng)).collect();
    let weights = gumbel_weights(&severities, &noise, w.lambda);
    let budget = w.eta * active.len() as f64;
    for (&i, &wt) in active.iter().zip(&weights) {
        rates[i] = budget * wt;
    }
    rates
}

/// Adam with per-parameter learning rates (β₁ = 0.9, β₂ = 0.999,
/// ε = 1e-8).
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: usize,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], rates: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), rates.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= rates[i] * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeConfig {
    pub weights: TargetWeights,
    pub max_iters: usize,
    pub patience: usize,
    pub seed: u64,
    pub mode: SurrogateMode,
    pub layout: LayoutConfig,
    pub k_max: usize,
    pub slack_threshold: f64,
    /// Ablation: replace Gumbel-Softmax rates with a uniform η on the
    /// active set.
    pub uniform_rates: bool,
}

impl Default for SizeConfig {
    fn default() -> Self {
        SizeConfig {
            weights: TargetWeights::default(),
            max_iters: 200,
            patience: 20,
            seed: 1,
            mode: SurrogateMode::Analytical,
            layout: LayoutConfig::default(),
            k_max: 8,
            slack_threshold: 0.0,
            uniform_rates: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub iter: usize,
    pub wns: f64,
    pub tns: f64,
    pub nve: usize,
    /// Smoothed target value seen by the optimizer this iteration (0 for
    /// the initial row).
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    Converged,
    Patience,
    MaxIters,
    NoSizableGates,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeOutcome {
    pub initial: SizingAssignment,
    pub best: SizingAssignment,
    pub best_wns: f64,
    pub best_tns: f64,
    pub best_nve: usize,
    pub iterations: usize,
    pub stop: StopReason,
    pub trajectory: Vec<TrajectoryRow>,
    pub diagnostics: Vec<String>,
}

/// Golden circuit metrics at one assignment, with multipliers rebuilt for
/// that assignment.
pub fn golden_metrics(
    graph: &CircuitGraph,
    library: &CellLibrary,
    assignment: &SizingAssignment,
    layout: &LayoutConfig,
) -> Result<(f64, f64, usize), SizeError> {
    let multipliers = net_multipliers(graph, library, assignment, layout)?;
    let delays = DelayState::build(graph, library, assignment, &multipliers);
    let ann = propagate_with(graph, &delays, graph.clock_period);
    Ok((ann.wns, ann.tns, ann.nve))
}

fn round_assignment(
    coords: &[f64],
    graph: &CircuitGraph,
    library: &CellLibrary,
) -> SizingAssignment {
    SizingAssignment {
        indices: coords
            .iter()
            .enumerate()
            .map(|(gi, &c)| {
                let n = library.cell(graph.gates[gi].cell).n_sizes();
                (c.round().clamp(0.0, (n - 1) as f64)) as usize
            })
            .collect(),
    }
}

/// The full sizing loop. Returns the best assignment seen under golden
/// scoring, which is never worse than the initial one.
pub fn size_loop(
    graph: &CircuitGraph,
    library: &CellLibrary,
    model: &SurrogateModel,
    config: &SizeConfig,
) -> Result<SizeOutcome, SizeError> {
    let initial = SizingAssignment::initial(graph);
    let mut coords: Vec<f64> = initial.indices.iter().map(|&i| i as f64).collect();
    let mut adam = Adam::new(coords.len());
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut diagnostics = Vec::new();

    let (wns0, tns0, nve0) = golden_metrics(graph, library, &initial, &config.layout)?;
    let mut best = initial.clone();
    let (mut best_wns, mut best_tns, mut best_nve) = (wns0, tns0, nve0);
    let mut trajectory = vec![TrajectoryRow {
        iter: 0,
        wns: wns0,
        tns: tns0,
        nve: nve0,
        target: 0.0,
    }];

    let mut stop = StopReason::MaxIters;
    let mut no_improve = 0usize;
    let mut iterations = 0usize;

    for iter in 1..=config.max_iters {
        iterations = iter;
        let assignment = round_assignment(&coords, graph, library);
        let multipliers = net_multipliers(graph, library, &assignment, &config.layout)?;
        let delays = DelayState::build(graph, library, &assignment, &multipliers);
        let annotation = propagate_with(graph, &delays, graph.clock_period);
        let paths = extract_critical_paths(
            graph,
            &delays,
            &annotation,
            config.slack_threshold,
            config.k_max,
        );
        if paths.is_empty() {
            stop = StopReason::Converged;
            iterations = iter;
            break;
        }
        if paths.iter().all(|p| p.gates().next().is_none()) {
            stop = StopReason::NoSizableGates;
            break;
        }
        let gatewise = gatewise_metrics(graph, &paths);
        let h_features = match model.mode {
            SurrogateMode::Learned => Some(physical_features(
                graph,
                library,
                &assignment,
                &config.layout,
                &model.psi,
            )?),
            SurrogateMode::Analytical => None,
        };
        let ctx = EvalContext {
            graph,
            library,
            paths: &paths,
            gatewise: &gatewise,
            multipliers: &multipliers,
            h_features: h_features.as_deref(),
        };

        let mut tape = Tape::new();
        let eval = evaluate_on_tape(
            &mut tape,
            model,
            &ctx,
            &coords,
            Rounding::Ste,
            config.weights.gamma,
        );
        // The violation count and the rate sampling read the hard metric
        // values; the differentiated target uses the smoothed aggregations.
        let n_violating = count_violating(&tape, &eval.tau);
        let target = timing_target_tape(
            &mut tape,
            &eval.tau_smooth,
            &eval.omega_smooth,
            &config.weights,
            n_violating,
            config.weights.gamma,
        );
        let target_value = tape.value(target);
        let grads = tape.backward(target);
        let ascent: Vec<f64> = eval.size_vars.iter().map(|&v| grads.wrt(v)).collect();

        if ascent.iter().any(|g| !g.is_finite()) {
            diagnostics.push(format!("iteration {iter}: non-finite gradient, update skipped"));
            no_improve += 1;
            if no_improve >= config.patience {
                stop = StopReason::Patience;
                break;
            }
            continue;
        }

        let omega_values: Vec<f64> = eval.omega.iter().map(|&v| tape.value(v)).collect();
        let rates = if config.uniform_rates {
            omega_values
                .iter()
                .map(|&w| if w < 0.0 { config.weights.eta } else { 0.0 })
                .collect()
        } else {
            gumbel_rates(&omega_values, &config.weights, &mut rng)
        };

        // Adam minimizes; the target is ascended.
        let descent: Vec<f64> = ascent.iter().map(|g| -g).collect();
        adam.step(&mut coords, &descent, &rates);
        for (gi, c) in coords.iter_mut().enumerate() {
            let hi = (library.cell(graph.gates[gi].cell).n_sizes() - 1) as f64;
            *c = c.clamp(0.0, hi);
        }

        let new_assignment = round_assignment(&coords, graph, library);
        let (wns, tns, nve) = golden_metrics(graph, library, &new_assignment, &config.layout)?;
        trajectory.push(TrajectoryRow {
            iter,
            wns,
            tns,
            nve,
            target: target_value,
        });
        if tns > best_tns || (tns == best_tns && wns > best_wns) {
            let improved_tns = tns > best_tns;
            best = new_assignment;
            best_tns = tns;
            best_wns = wns;
            best_nve = nve;
            if improved_tns {
                no_improve = 0;
            } else {
                no_improve += 1;
            }
        } else {
            no_improve += 1;
        }
        if no_improve >= config.patience {
            stop = StopReason::Patience;
            break;
        }
    }

    Ok(SizeOutcome {
        initial,
        best,
        best_wns,
        best_tns,
        best_nve,
        iterations,
        stop,
        trajectory,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_circuit;

    #[test]
    fn sharp_target_matches_hand_value() {
        let w = TargetWeights::default();
        let tau = vec![-100.0, 50.0];
        let omega = vec![-120.0, -30.0];
        // N = 1, TNS term 0.5 * (-100), WNS term 0.5 * (-120).
        assert_eq!(timing_target_sharp(&tau, &omega, &w), -110.0);
    }

    #[test]
    fn sharp_target_zero_when_clean() {
        let w = TargetWeights::default();
        assert_eq!(timing_target_sharp(&[10.0, 5.0], &[3.0, 8.0], &w), 0.5 * 3.0);
        assert_eq!(timing_target_sharp(&[10.0], &[], &w), 0.0);
    }

    #[test]
    fn smoothmin_closed_form_and_bound() {
        let v = smoothmin(&[-120.0, -90.0], 10.0);
        let want = -10.0 * ((12.0f64).exp() + (9.0f64).exp()).ln();
        assert!((v - want).abs() < 1e-9);
        assert!((v - (-120.486)).abs() < 1e-3);
        // Bound check over random vectors.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n = rng.gen_range(1..64);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-200.0..200.0)).collect();
            for gamma in [1.0, 10.0, 100.0] {
                let sm = smoothmin(&xs, gamma);
                let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
                assert!(sm <= min + 1e-9);
                assert!((sm - min).abs() <= gamma * (n as f64).ln() + 1e-9);
            }
        }
    }

    #[test]
    fn softmin0_limits() {
        assert!((softmin0(-100.0, 0.01) - -100.0).abs() < 1e-6);
        assert!(softmin0(100.0, 0.01).abs() < 1e-6);
        // Smooth version sits below the sharp one.
        for x in [-5.0, -0.5, 0.0, 0.5, 5.0] {
            assert!(softmin0(x, 10.0) <= x.min(0.0) + 1e-12);
        }
    }

    #[test]
    fn tape_smoothing_matches_plain() {
        let xs = [-120.0, -90.0, -3.0, 40.0];
        let mut tape = Tape::new();
        let vars: Vec<_> = xs.iter().map(|&x| tape.var(x)).collect();
        let sm = smoothmin_tape(&mut tape, &vars, 10.0);
        assert!((tape.value(sm) - smoothmin(&xs, 10.0)).abs() < 1e-12);
        let s0 = softmin0_tape(&mut tape, vars[2], 10.0);
        assert!((tape.value(s0) - softmin0(-3.0, 10.0)).abs() < 1e-12);
    }

    #[test]
    fn gumbel_weights_sum_to_one_and_symmetric() {
        let w = gumbel_weights(&[50.0, 50.0], &[0.0, 0.0], 5.0);
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gumbel_low_temperature_concentrates() {
        let w = gumbel_weights(&[100.0, 1.0], &[0.0, 0.0], 0.001);
        assert!(w[0] > 1.0 - 1e-9);
        assert!(w[1] < 1e-9);
    }

    #[test]
    fn gumbel_rates_budget_and_freezing() {
        use rand::SeedableRng;
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let w = TargetWeights::default();
        let omega = vec![-50.0, 10.0, -1.0, 0.0];
        let rates = gumbel_rates(&omega, &w, &mut rng);
        assert_eq!(rates[1], 0.0);
        assert_eq!(rates[3], 0.0);
        let total: f64 = rates.iter().sum();
        assert!((total - w.eta * 2.0).abs() < 1e-9);
    }

    #[test]
    fn adam_first_step_magnitude_is_rate() {
        let mut adam = Adam::new(1);
        let mut p = vec![0.0];
        adam.step(&mut p, &[3.7], &[0.25]);
        assert!((p[0] + 0.25).abs() < 1e-6);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut adam = Adam::new(2);
        let mut p = vec![1.0, -2.0];
        adam.step(&mut p, &[0.0, 0.0], &[0.5, 0.5]);
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn adam_zero_rate_freezes_param() {
        let mut adam = Adam::new(2);
        let mut p = vec![1.0, 1.0];
        adam.step(&mut p, &[5.0, 5.0], &[0.0, 0.1]);
        assert_eq!(p[0], 1.0);
        assert!(p[1] < 1.0);
    }

    const LIB: &str = r#"{"INV": [
        {"p": 10.0, "r": 2.0, "q": 2.0, "a": 1.0},
        {"p": 8.0, "r": 1.0, "q": 4.0, "a": 2.0},
        {"p": 6.5, "r": 0.5, "q": 7.0, "a": 4.0}
    ]}"#;

    fn no_physical() -> LayoutConfig {
        LayoutConfig {
            enabled: false,
            ..LayoutConfig::default()
        }
    }

    #[test]
    fn clean_circuit_returns_initial_after_one_iteration() {
        let ckt = "\
clock 100
port_in a
port_out z
gate U1 INV 0 1.0 1.0
gate U2 INV 0 3.0 1.0
net n0 a U1
net n1 U1 U2
net n2 U2 z
";
        let (g, lib) = parse_circuit(ckt, LIB, "net n1 R=0.5 C=4\n").unwrap();
        let model = SurrogateModel::seeded(
            &lib,
            &no_physical(),
            SurrogateMode::Analytical,
            8,
            16,
            3,
        );
        let config = SizeConfig {
            layout: no_physical(),
            ..SizeConfig::default()
        };
        let out = size_loop(&g, &lib, &model, &config).unwrap();
        assert_eq!(out.stop, StopReason::Converged);
        assert_eq!(out.best, out.initial);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn single_gate_bottleneck_improves_to_exhaustive_optimum() {
        // One driver into a heavy load; upsizing strictly helps its only
        // path. Checked against trying every size by hand.
        let ckt = "\
clock 30
port_in a
port_out z
gate U1 INV 0 1.0 1.0
net n0 a U1
net n1 U1 z
";
        let spf = "net n1 R=2 C=20\n";
        let (g, lib) = parse_circuit(ckt, LIB, spf).unwrap();
        let model = SurrogateModel::seeded(
            &lib,
            &no_physical(),
            SurrogateMode::Analytical,
            8,
            16,
            3,
        );
        let config = SizeConfig {
            layout: no_physical(),
            seed: 5,
            ..SizeConfig::default()
        };
        // Exhaustive check over the 3 sizes.
        let mut best_tns = f64::NEG_INFINITY;
        let mut best_idx = 0;
        for s in 0..3 {
            let a = SizingAssignment { indices: vec![s] };
            let (_, tns, _) = golden_metrics(&g, &lib, &a, &config.layout).unwrap();
            if tns > best_tns {
                best_tns = tns;
                best_idx = s;
            }
        }
        let out = size_loop(&g, &lib, &model, &config).unwrap();
        let (_, tns0, _) =
            golden_metrics(&g, &lib, &out.initial, &config.layout).unwrap();
        assert!(out.best_tns > tns0, "must strictly improve");
        assert_eq!(out.best.indices[0], best_idx);
        assert!((out.best_tns - best_tns).abs() < 1e-9);
    }

    #[test]
    fn best_tracking_never_worsens_and_is_monotone() {
        let ckt = "\
clock 40
port_in a
port_out z
gate U1 INV 0 1.0 1.0
gate U2 INV 0 3.0 1.0
gate U3 INV 0 5.0 1.0
net n0 a U1
net n1 U1 U2
net n2 U2 U3
net n3 U3 z
";
        let spf = "net n1 R=1 C=6\nnet n2 R=1 C=6\nnet n3 R=1 C=10\n";
        let (g, lib) = parse_circuit(ckt, LIB, spf).unwrap();
        let model = SurrogateModel::seeded(
            &lib,
            &no_physical(),
            SurrogateMode::Analytical,
            8,
            16,
            3,
        );
        let config = SizeConfig {
            layout: no_physical(),
            seed: 11,
            ..SizeConfig::default()
        };
        let out = size_loop(&g, &lib, &model, &config).unwrap();
        let (_, tns0, _) = golden_metrics(&g, &lib, &out.initial, &config.layout).unwrap();
        assert!(out.best_tns >= tns0);
        // Running best over the trajectory is nondecreasing.
        let mut run_best = f64::NEG_INFINITY;
        for row in &out.trajectory {
            run_best = run_best.max(row.tns);
            assert!(out.best_tns >= row.tns - 1e-12 || run_best >= row.tns);
        }
    }

    #[test]
    fn determinism_same_seed_same_outcome() {
        let ckt = "\
clock 35
port_in a
port_out z
gate U1 INV 0 1.0 1.0
gate U2 INV 0 3.0 1.0
net n0 a U1
net n1 U1 U2
net n2 U2 z
";
        let spf = "net n0 R=1 C=4\nnet n1 R=1 C=8\nnet n2 R=1 C=10\n";
        let (g, lib) = parse_circuit(ckt, LIB, spf).unwrap();
        let model = SurrogateModel::seeded(
            &lib,
            &no_physical(),
            SurrogateMode::Analytical,
            8,
            16,
            3,
        );
        let config = SizeConfig {
            layout: no_physical(),
            seed: 42,
            ..SizeConfig::default()
        };
        let a = size_loop(&g, &lib, &model, &config).unwrap();
        let b = size_loop(&g, &lib, &model, &config).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.trajectory.len(), b.trajectory.len());
        for (x, y) in a.trajectory.iter().zip(&b.trajectory) {
            assert_eq!(x.tns.to_bits(), y.tns.to_bits());
            assert_eq!(x.target.to_bits(), y.target.to_bits());
        }
    }
}
