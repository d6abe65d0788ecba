//! Training of the learned timing model: squared error against slack labels
//! plus squared error of the model's size-direction (a symmetric finite
//! difference over the size feature, step 0.5) against gradient labels.

use super::{gate_features, EvalContext, FeatureSnapshot, LearnedOnTape, SurrogateModel};
use crate::model::{CellLibrary, CircuitGraph, TimingPath};
use crate::optimizer::Adam;
use crate::sta::GatewiseMetrics;
use crate::tape::{Tape, Var};

/// One labeled circuit.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub graph: CircuitGraph,
    pub library: CellLibrary,
    pub paths: Vec<TimingPath>,
    pub gatewise: GatewiseMetrics,
    pub multipliers: Vec<f64>,
    pub h_features: Option<Vec<Vec<f64>>>,
    /// Original (labeled) size coordinates.
    pub coords: Vec<f64>,
    pub slack_tot: Vec<f64>,
    pub slack_wst: Vec<f64>,
    pub d_tot: Vec<f64>,
    pub d_wst: Vec<f64>,
}

impl TrainSample {
    fn ctx(&self) -> EvalContext<'_> {
        EvalContext {
            graph: &self.graph,
            library: &self.library,
            paths: &self.paths,
            gatewise: &self.gatewise,
            multipliers: &self.multipliers,
            h_features: self.h_features.as_deref(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 200,
            lr: 0.0004,
        }
    }
}

/// Build the two loss terms for one sample on an existing tape. `bound`
/// decides whether parameters are constants (evaluation) or variables
/// (training).
fn sample_loss(tape: &mut Tape, bound: &LearnedOnTape, sample: &TrainSample) -> (Var, Var) {
    let ctx = sample.ctx();
    let snapshot = FeatureSnapshot {
        pin_cap: sample
            .graph
            .gates
            .iter()
            .enumerate()
            .map(|(gi, g)| {
                let idx = sample.coords[gi].round() as usize;
                sample.library.cell(g.cell).variants[idx.min(
                    sample.library.cell(g.cell).n_sizes() - 1,
                )]
                .input_pin_cap
            })
            .collect(),
    };
    let features: Vec<Vec<Var>> = (0..sample.graph.gates.len())
        .map(|gi| {
            let size_c = tape.c(sample.coords[gi]);
            gate_features(tape, &sample.graph, &sample.library, &snapshot, gi, size_c)
        })
        .collect();
    let encodings: Vec<Vec<Vec<Var>>> = sample
        .paths
        .iter()
        .map(|p| bound.encode_path(tape, &features, p))
        .collect();

    let mut l_tau = tape.c(0.0);
    let mut l_omega = tape.c(0.0);
    for gi in 0..sample.graph.gates.len() {
        let (tau, omega) = bound.heads_for_gate(tape, &ctx, &encodings, gi);

        let (fd_tau, fd_omega) = if ctx.gatewise.groups[gi].is_empty() {
            (tape.c(0.0), tape.c(0.0))
        } else {
            let (tau_p, omega_p) =
                shifted_heads(tape, bound, sample, &features, &encodings, gi, 0.5);
            let (tau_m, omega_m) =
                shifted_heads(tape, bound, sample, &features, &encodings, gi, -0.5);
            (tape.sub(tau_p, tau_m), tape.sub(omega_p, omega_m))
        };

        let st = tape.c(sample.slack_tot[gi]);
        let dt = tape.sub(st, tau);
        let dt2 = tape.mul(dt, dt);
        l_tau = tape.add(l_tau, dt2);
        let gt = tape.c(sample.d_tot[gi]);
        let gdt = tape.sub(gt, fd_tau);
        let gdt2 = tape.mul(gdt, gdt);
        l_tau = tape.add(l_tau, gdt2);

        let sw = tape.c(sample.slack_wst[gi]);
        let dw = tape.sub(sw, omega);
        let dw2 = tape.mul(dw, dw);
        l_omega = tape.add(l_omega, dw2);
        let gw = tape.c(sample.d_wst[gi]);
        let gdw = tape.sub(gw, fd_omega);
        let gdw2 = tape.mul(gdw, gdw);
        l_omega = tape.add(l_omega, gdw2);
    }
    (l_tau, l_omega)
}

/// Re-evaluate one gate's heads with its size feature shifted, re-encoding
/// only the paths in that gate's group.
fn shifted_heads(
    tape: &mut Tape,
    bound: &LearnedOnTape,
    sample: &TrainSample,
    features: &[Vec<Var>],
    encodings: &[Vec<Vec<Var>>],
    gate: usize,
    shift: f64,
) -> (Var, Var) {
    let ctx = sample.ctx();
    let mut shifted: Vec<Vec<Var>> = features.to_vec();
    shifted[gate][0] = tape.c(sample.coords[gate] + shift);
    let mut local: Vec<Vec<Vec<Var>>> = encodings.to_vec();
    for &pid in &ctx.gatewise.groups[gate] {
        local[pid] = bound.encode_path(tape, &shifted, &sample.paths[pid]);
    }
    bound.heads_for_gate(tape, &ctx, &local, gate)
}

/// Eq-style loss of the whole dataset at the model's current parameters.
pub fn dataset_loss(model: &SurrogateModel, samples: &[TrainSample]) -> (f64, f64) {
    let mut tot = (0.0, 0.0);
    for s in samples {
        let mut tape = Tape::new();
        let bound = LearnedOnTape::consts(&mut tape, model);
        let (lt, lw) = sample_loss(&mut tape, &bound, s);
        tot.0 += tape.value(lt);
        tot.1 += tape.value(lw);
    }
    tot
}

/// Adam over encoder and head parameters, one step per sample per epoch.
/// Returns the per-epoch training loss (sum of both terms at visit time).
pub fn train(
    model: &mut SurrogateModel,
    samples: &[TrainSample],
    options: TrainOptions,
) -> Vec<f64> {
    let mut params = model.params_flat();
    let mut adam = Adam::new(params.len());
    let rates = vec![options.lr; params.len()];
    let mut curve = Vec::with_capacity(options.epochs);
    for _ in 0..options.epochs {
        let mut epoch_loss = 0.0;
        for sample in samples {
            let mut tape = Tape::new();
            let mut flat_vars = Vec::with_capacity(params.len());
            let bound = LearnedOnTape {
                encoder: model.encoder.vars_on_tape(&mut tape, &mut flat_vars),
                head_tau: model.head_tau.vars_on_tape(&mut tape, &mut flat_vars),
                head_omega: model.head_omega.vars_on_tape(&mut tape, &mut flat_vars),
                pred_scale: model.pred_scale,
            };
            let (lt, lw) = sample_loss(&mut tape, &bound, sample);
            let loss = tape.add(lt, lw);
            epoch_loss += tape.value(loss);
            let grads = tape.backward(loss);
            let grad_vec: Vec<f64> = flat_vars.iter().map(|&v| grads.wrt(v)).collect();
            adam.step(&mut params, &grad_vec, &rates);
            model.set_params_flat(&params);
        }
        curve.push(epoch_loss);
    }
    curve
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::LayoutConfig;
    use crate::model::{parse_circuit, SizingAssignment};
    use crate::sta::{extract_critical_paths, gatewise_metrics, propagate_with, DelayState};
    use crate::surrogate::SurrogateMode;

    fn toy_sample() -> TrainSample {
        let lib_text = r#"{"INV": [
            {"p": 10.0, "r": 2.0, "q": 2.0, "a": 1.0},
            {"p": 8.0, "r": 1.0, "q": 4.0, "a": 2.0}
        ]}"#;
        let ckt = "\
clock 50
port_in a
port_out z
gate U1 INV 0 1.0 1.0
gate U2 INV 0 3.0 1.0
net n0 a U1
net n1 U1 U2
net n2 U2 z
";
        let spf = "net n0 R=1 C=8\nnet n1 R=0.5 C=4\nnet n2 R=2 C=8\n";
        let (graph, library) = parse_circuit(ckt, lib_text, spf).unwrap();
        let a = SizingAssignment::initial(&graph);
        let m = vec![1.0; graph.nets.len()];
        let d = DelayState::build(&graph, &library, &a, &m);
        let ann = propagate_with(&graph, &d, graph.clock_period);
        let paths = extract_critical_paths(&graph, &d, &ann, 0.0, 8);
        let gatewise = gatewise_metrics(&graph, &paths);
        TrainSample {
            coords: a.indices.iter().map(|&i| i as f64).collect(),
            slack_tot: gatewise.tot.clone(),
            slack_wst: gatewise.wst.clone(),
            d_tot: vec![10.0; graph.gates.len()],
            d_wst: vec![5.0; graph.gates.len()],
            gatewise,
            paths,
            multipliers: m,
            h_features: None,
            graph,
            library,
        }
    }

    #[test]
    fn perfect_predictions_zero_the_slack_term() {
        // Force the heads to output exactly the labels via bias-only heads
        // on a sample whose labels coincide for every gate.
        let mut sample = toy_sample();
        sample.d_tot = vec![0.0; sample.graph.gates.len()];
        sample.d_wst = vec![0.0; sample.graph.gates.len()];
        let mut model = SurrogateModel::seeded(
            &sample.library,
            &LayoutConfig::default(),
            SurrogateMode::Learned,
            4,
            8,
            3,
        );
        for layer in model
            .head_tau
            .layers
            .iter_mut()
            .chain(model.head_omega.layers.iter_mut())
        {
            for row in &mut layer.w {
                row.iter_mut().for_each(|v| *v = 0.0);
            }
            layer.b.iter_mut().for_each(|v| *v = 0.0);
        }
        // Both gates share the single violating path, so labels agree.
        let label_tot = sample.slack_tot[0];
        let label_wst = sample.slack_wst[0];
        model.head_tau.layers.last_mut().unwrap().b[0] = label_tot / model.pred_scale;
        model.head_omega.layers.last_mut().unwrap().b[0] = label_wst / model.pred_scale;
        let (lt, lw) = dataset_loss(&model, &[sample]);
        assert!(lt.abs() < 1e-18, "slack+gradient tau loss {lt}");
        assert!(lw.abs() < 1e-18, "slack+gradient omega loss {lw}");
    }

    #[test]
    fn constant_zero_model_pays_squared_labels() {
        let mut sample = toy_sample();
        sample.slack_tot = vec![-285.0, 0.0];
        sample.slack_wst = vec![0.0, 0.0];
        sample.d_tot = vec![0.0, 0.0];
        sample.d_wst = vec![0.0, 0.0];
        let mut model = SurrogateModel::seeded(
            &sample.library,
            &LayoutConfig::default(),
            SurrogateMode::Learned,
            4,
            8,
            3,
        );
        for layer in model
            .head_tau
            .layers
            .iter_mut()
            .chain(model.head_omega.layers.iter_mut())
        {
            for row in &mut layer.w {
                row.iter_mut().for_each(|v| *v = 0.0);
            }
            layer.b.iter_mut().for_each(|v| *v = 0.0);
        }
        let (lt, lw) = dataset_loss(&model, &[sample]);
        assert!((lt - 285.0 * 285.0).abs() < 1e-9);
        assert_eq!(lw, 0.0);
    }

    #[test]
    fn doubling_labels_and_predictions_quadruples_loss() {
        let sample = toy_sample();
        let mut model = SurrogateModel::seeded(
            &sample.library,
            &LayoutConfig::default(),
            SurrogateMode::Learned,
            4,
            8,
            3,
        );
        let (lt1, lw1) = dataset_loss(&model, &[sample.clone()]);
        let mut doubled = sample.clone();
        for v in doubled
            .slack_tot
            .iter_mut()
            .chain(doubled.slack_wst.iter_mut())
            .chain(doubled.d_tot.iter_mut())
            .chain(doubled.d_wst.iter_mut())
        {
            *v *= 2.0;
        }
        model.pred_scale *= 2.0;
        let (lt2, lw2) = dataset_loss(&model, &[doubled]);
        assert!((lt2 / lt1 - 4.0).abs() < 1e-9);
        assert!((lw2 / lw1 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn a_few_epochs_reduce_the_loss() {
        let sample = toy_sample();
        let mut model = SurrogateModel::seeded(
            &sample.library,
            &LayoutConfig::default(),
            SurrogateMode::Learned,
            4,
            8,
            3,
        );
        let before = dataset_loss(&model, &[sample.clone()]);
        let _ = train(
            &mut model,
            &[sample.clone()],
            TrainOptions {
                epochs: 30,
                lr: 0.01,
            },
        );
        let after = dataset_loss(&model, &[sample]);
        assert!(
            after.0 + after.1 < before.0 + before.1,
            "loss should drop: {before:?} -> {after:?}"
        );
    }
}
