//! The differentiable sizing-aware timing model.
//!
//! Two modes share one contract: per-gate (τ, ω) on the tape, differentiable
//! with respect to each gate's continuous size coordinate through the
//! straight-through round.
//!
//! * Analytical mode runs the golden delay model on the tape with
//!   piecewise-linear size interpolation of the cell tables. At integer
//!   coordinates it reproduces the golden gate-wise metrics bit for bit.
//! * Learned mode encodes each extracted path with a small attention
//!   encoder, pools the encodings into the three-block path-aggregated
//!   feature, concatenates the scale-aggregated physical feature, and feeds
//!   two MLP heads. Heads and encoder train against slack labels and
//!   finite-difference gradient labels.

mod train;

pub use train::{dataset_loss, train, TrainOptions, TrainSample};

use crate::layout::{
    aggregate_scales, build_grids, gate_mask, scale_attention, upsample_all, LayoutConfig,
    LayoutError,
};
use crate::model::{CellLibrary, CircuitGraph, PinRef, SizingAssignment, TimingPath};
use crate::nn::{ConvStack, Mlp, MlpT, PathEncoder, PathEncoderT};
use crate::sta::{
    forward_path_delay_e, gate_delay_e, gatewise_from_group, net_sink_cap_sum, node_load,
    slack_from_delay, wire_delay_e, GatewiseMetrics,
};
use crate::tape::{Tape, Var};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

/// Capacitance features are scaled into O(1) range for the encoder.
const CAP_SCALE: f64 = 0.1;
/// Head outputs are scaled to picoseconds.
const PRED_SCALE: f64 = 100.0;
/// Number of physical channels in h_v (density, h-congestion, v-congestion).
pub const PHYS_CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurrogateMode {
    Analytical,
    Learned,
}

/// Whether the forward pass rounds the size coordinate. `Bypass` exists for
/// gradient checks against central finite differences of the interpolated
/// model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    Ste,
    Bypass,
}

/// Model parameters plus the shape header that makes a dump portable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub mode: SurrogateMode,
    pub feature_dim: usize,
    pub width: usize,
    pub pred_scale: f64,
    /// One-hot gate-type vocabulary, taken from the library at build time.
    pub type_vocab: Vec<String>,
    pub scales: Vec<usize>,
    pub encoder: PathEncoder,
    pub psi: ConvStack,
    pub head_tau: Mlp,
    pub head_omega: Mlp,
}

impl SurrogateModel {
    pub fn seeded(
        library: &CellLibrary,
        layout_config: &LayoutConfig,
        mode: SurrogateMode,
        width: usize,
        head_hidden: usize,
        seed: u64,
    ) -> Self {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let feature_dim = feature_dim(library);
        let n_scales = layout_config.scales.len();
        let head_in = 3 * width + PHYS_CHANNELS;
        SurrogateModel {
            mode,
            feature_dim,
            width,
            pred_scale: PRED_SCALE,
            type_vocab: library.cells.iter().map(|c| c.name.clone()).collect(),
            scales: layout_config.scales.clone(),
            encoder: PathEncoder::seeded(feature_dim, width, &mut rng),
            psi: ConvStack::seeded(PHYS_CHANNELS * n_scales, 4, n_scales, &mut rng),
            head_tau: Mlp::seeded(&[head_in, head_hidden, 1], &mut rng),
            head_omega: Mlp::seeded(&[head_in, head_hidden, 1], &mut rng),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Trainable parameters (encoder and both heads; the grid logit stack
    /// stays at its seeded values) as one flat vector.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        self.encoder.store_flat(&mut flat);
        self.head_tau.store_flat(&mut flat);
        self.head_omega.store_flat(&mut flat);
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut cursor = 0;
        self.encoder.load_flat(flat, &mut cursor);
        self.head_tau.load_flat(flat, &mut cursor);
        self.head_omega.load_flat(flat, &mut cursor);
        assert_eq!(cursor, flat.len());
    }
}

/// Width of the per-gate timing feature vector:
/// size ‖ one-hot type ‖ out R/C ‖ mean in R/C ‖ pin cap.
pub fn feature_dim(library: &CellLibrary) -> usize {
    1 + library.n_types() + 5
}

/// Per-iteration constants entering the feature vector.
#[derive(Debug, Clone)]
pub struct FeatureSnapshot {
    /// Pin cap at the current rounded size, per gate.
    pub pin_cap: Vec<f64>,
}

impl FeatureSnapshot {
    pub fn at(
        graph: &CircuitGraph,
        library: &CellLibrary,
        assignment: &SizingAssignment,
    ) -> Self {
        FeatureSnapshot {
            pin_cap: graph
                .gates
                .iter()
                .enumerate()
                .map(|(gi, g)| library.cell(g.cell).variants[assignment.of(gi)].input_pin_cap)
                .collect(),
        }
    }
}

/// Build one gate's feature vector on the tape. Only `size_var` carries
/// gradient; everything else is a constant of the current iteration.
pub fn gate_features(
    tape: &mut Tape,
    graph: &CircuitGraph,
    library: &CellLibrary,
    snapshot: &FeatureSnapshot,
    gate: usize,
    size_var: Var,
) -> Vec<Var> {
    let g = &graph.gates[gate];
    let mut f = Vec::with_capacity(feature_dim(library));
    f.push(size_var);
    for ci in 0..library.n_types() {
        f.push(tape.c(if ci == g.cell { 1.0 } else { 0.0 }));
    }
    let pin = PinRef::Gate(gate);
    let (mut out_r, mut out_c) = (0.0, 0.0);
    for &ni in graph.fanout_nets(pin) {
        out_r += graph.nets[ni].wire_res;
        out_c += graph.nets[ni].wire_cap;
    }
    let fanin = graph.fanin_nets(pin);
    let (mut in_r, mut in_c) = (0.0, 0.0);
    for &ni in fanin {
        in_r += graph.nets[ni].wire_res;
        in_c += graph.nets[ni].wire_cap;
    }
    if !fanin.is_empty() {
        in_r /= fanin.len() as f64;
        in_c /= fanin.len() as f64;
    }
    f.push(tape.c(out_r));
    f.push(tape.c(out_c * CAP_SCALE));
    f.push(tape.c(in_r));
    f.push(tape.c(in_c * CAP_SCALE));
    f.push(tape.c(snapshot.pin_cap[gate] * CAP_SCALE));
    f
}

/// Piecewise-linear interpolation of one size table at coordinate `s`. At
/// integer coordinates the value equals the table entry bit for bit; the
/// derivative is the slope of the floor segment (top entry uses the last
/// segment).
fn pwl_param(tape: &mut Tape, s: Var, table: &[f64]) -> Var {
    let n = table.len();
    if n == 1 {
        return tape.c(table[0]);
    }
    let sval = tape.value(s);
    let i = (sval.floor() as isize).clamp(0, n as isize - 2) as usize;
    let frac = tape.addc(s, -(i as f64));
    let neg = tape.neg(frac);
    let omf = tape.addc(neg, 1.0);
    let a = tape.mulc(omf, table[i]);
    let b = tape.mulc(frac, table[i + 1]);
    tape.add(a, b)
}

/// Everything the per-iteration evaluation needs besides the coordinates.
pub struct EvalContext<'a> {
    pub graph: &'a CircuitGraph,
    pub library: &'a CellLibrary,
    pub paths: &'a [TimingPath],
    pub gatewise: &'a GatewiseMetrics,
    pub multipliers: &'a [f64],
    /// Scale-aggregated physical feature per gate (learned mode).
    pub h_features: Option<&'a [Vec<f64>]>,
}

/// Per-gate (τ, ω) on the tape plus the input coordinates.
///
/// `tau`/`omega` aggregate the path slacks with hard mins, so at integer
/// coordinates they equal the golden gate-wise metrics bit for bit. The
/// `_smooth` pair replaces those inner mins with the γ-tempered forms (the
/// timing target smooths every minimum it contains); in learned mode the
/// heads are already smooth and both pairs coincide.
pub struct TapeEvaluation {
    /// One var per gate: g_v^con.
    pub size_vars: Vec<Var>,
    /// Post-round (or bypassed) size nodes.
    pub sizes: Vec<Var>,
    pub tau: Vec<Var>,
    pub omega: Vec<Var>,
    pub tau_smooth: Vec<Var>,
    pub omega_smooth: Vec<Var>,
}

pub fn evaluate_on_tape(
    tape: &mut Tape,
    model: &SurrogateModel,
    ctx: &EvalContext,
    coords: &[f64],
    rounding: Rounding,
    smooth_gamma: f64,
) -> TapeEvaluation {
    assert_eq!(coords.len(), ctx.graph.gates.len());
    let size_vars: Vec<Var> = coords.iter().map(|&c| tape.var(c)).collect();
    let sizes: Vec<Var> = size_vars
        .iter()
        .enumerate()
        .map(|(gi, &v)| {
            let n = ctx.library.cell(ctx.graph.gates[gi].cell).n_sizes();
            match rounding {
                Rounding::Ste => tape.ste_round(v, n),
                Rounding::Bypass => v,
            }
        })
        .collect();
    let (tau, omega, tau_smooth, omega_smooth) = match model.mode {
        SurrogateMode::Analytical => analytical_tau_omega(tape, ctx, &sizes, smooth_gamma),
        SurrogateMode::Learned => {
            let (t, w) = learned_tau_omega(tape, model, ctx, &sizes);
            (t.clone(), w.clone(), t, w)
        }
    };
    TapeEvaluation {
        size_vars,
        sizes,
        tau,
        omega,
        tau_smooth,
        omega_smooth,
    }
}

/// Golden delay model on the tape: same shared arithmetic routines, cell
/// parameters interpolated piecewise-linearly in the size coordinate.
fn analytical_tau_omega(
    tape: &mut Tape,
    ctx: &EvalContext,
    sizes: &[Var],
    smooth_gamma: f64,
) -> (Vec<Var>, Vec<Var>, Vec<Var>, Vec<Var>) {
    let graph = ctx.graph;
    let lib = ctx.library;
    let ng = graph.gates.len();

    let mut p_of = Vec::with_capacity(ng);
    let mut r_of = Vec::with_capacity(ng);
    let mut q_of = Vec::with_capacity(ng);
    for (gi, gate) in graph.gates.iter().enumerate() {
        let vs = &lib.cell(gate.cell).variants;
        let p_table: Vec<f64> = vs.iter().map(|v| v.intrinsic_delay).collect();
        let r_table: Vec<f64> = vs.iter().map(|v| v.drive_resistance).collect();
        let q_table: Vec<f64> = vs.iter().map(|v| v.input_pin_cap).collect();
        p_of.push(pwl_param(tape, sizes[gi], &p_table));
        r_of.push(pwl_param(tape, sizes[gi], &r_table));
        q_of.push(pwl_param(tape, sizes[gi], &q_table));
    }

    let sink_sums: Vec<Var> = graph
        .nets
        .iter()
        .map(|n| net_sink_cap_sum(tape, n, &q_of))
        .collect();
    let wire_delays: Vec<Var> = graph
        .nets
        .iter()
        .enumerate()
        .map(|(ni, n)| wire_delay_e(tape, n, sink_sums[ni], ctx.multipliers[ni]))
        .collect();
    let gate_delays: Vec<Var> = (0..ng)
        .map(|gi| {
            let load = node_load(tape, graph, PinRef::Gate(gi), &sink_sums);
            gate_delay_e(tape, p_of[gi], r_of[gi], load)
        })
        .collect();

    let slacks: Vec<Var> = ctx
        .paths
        .iter()
        .map(|p| {
            let d = forward_path_delay_e(tape, &p.nodes, &p.nets, &gate_delays, &wire_delays);
            slack_from_delay(tape, graph.clock_period, d)
        })
        .collect();

    let mut tau = Vec::with_capacity(ng);
    let mut omega = Vec::with_capacity(ng);
    let mut tau_smooth = Vec::with_capacity(ng);
    let mut omega_smooth = Vec::with_capacity(ng);
    for gi in 0..ng {
        let group = &ctx.gatewise.groups[gi];
        if group.is_empty() {
            tau.push(tape.c(0.0));
            omega.push(tape.c(0.0));
            tau_smooth.push(tape.c(0.0));
            omega_smooth.push(tape.c(0.0));
        } else {
            let (wst, tot) = gatewise_from_group(tape, &slacks, group);
            tau.push(tot);
            omega.push(wst);
            let group_slacks: Vec<Var> = group.iter().map(|&p| slacks[p]).collect();
            let softs: Vec<Var> = group_slacks
                .iter()
                .map(|&s| crate::optimizer::softmin0_tape(tape, s, smooth_gamma))
                .collect();
            tau_smooth.push(tape.sum(&softs));
            omega_smooth.push(crate::optimizer::smoothmin_tape(
                tape,
                &group_slacks,
                smooth_gamma,
            ));
        }
    }
    (tau, omega, tau_smooth, omega_smooth)
}

/// Bound learned-model components for one tape.
pub(crate) struct LearnedOnTape {
    pub encoder: PathEncoderT,
    pub head_tau: MlpT,
    pub head_omega: MlpT,
    pub pred_scale: f64,
}

impl LearnedOnTape {
    pub fn consts(tape: &mut Tape, model: &SurrogateModel) -> Self {
        LearnedOnTape {
            encoder: model.encoder.on_tape(tape),
            head_tau: model.head_tau.on_tape(tape),
            head_omega: model.head_omega.on_tape(tape),
            pred_scale: model.pred_scale,
        }
    }

    /// Encode one path's gate sequence.
    pub fn encode_path(
        &self,
        tape: &mut Tape,
        features: &[Vec<Var>],
        path: &TimingPath,
    ) -> Vec<Vec<Var>> {
        let inputs: Vec<Vec<Var>> = path.gates().map(|g| features[g].clone()).collect();
        self.encoder.encode(tape, &inputs)
    }

    /// (τ, ω) for one gate from already-encoded paths.
    pub fn heads_for_gate(
        &self,
        tape: &mut Tape,
        ctx: &EvalContext,
        encodings: &[Vec<Vec<Var>>],
        gate: usize,
    ) -> (Var, Var) {
        let width = self.encoder_width();
        let group = &ctx.gatewise.groups[gate];
        let t_v = if group.is_empty() {
            vec![tape.c(0.0); 3 * width]
        } else {
            let crit = ctx.gatewise.critical[gate].expect("critical path of a grouped gate");
            let crit_gates: Vec<usize> = ctx.paths[crit].gates().collect();
            let my_pos = crit_gates
                .iter()
                .position(|&g| g == gate)
                .expect("gate lies on its critical path");
            let inter: Vec<&Vec<Var>> = group
                .iter()
                .map(|&pid| {
                    let pos = ctx.paths[pid]
                        .gates()
                        .position(|g| g == gate)
                        .expect("gate lies on every path of its group");
                    &encodings[pid][pos]
                })
                .collect();
            aggregate_timing(tape, &encodings[crit], my_pos, &inter)
        };
        let h_v: Vec<Var> = match ctx.h_features {
            Some(h) => h[gate].iter().map(|&v| tape.c(v)).collect(),
            None => vec![tape.c(0.0); PHYS_CHANNELS],
        };
        let mut input = t_v;
        input.extend(h_v);
        let t = self.head_tau.apply(tape, &input);
        let w = self.head_omega.apply(tape, &input);
        (
            tape.mulc(t[0], self.pred_scale),
            tape.mulc(w[0], self.pred_scale),
        )
    }

    fn encoder_width(&self) -> usize {
        self.encoder.w_out.w.len()
    }
}

/// The three-block path-aggregated timing feature:
/// critical encoding ‖ sum over the critical path ‖ mean over the group.
pub fn aggregate_timing(
    tape: &mut Tape,
    critical_path_encodings: &[Vec<Var>],
    my_pos: usize,
    group_encodings: &[&Vec<Var>],
) -> Vec<Var> {
    let width = critical_path_encodings[0].len();
    let mut t_v = Vec::with_capacity(3 * width);
    t_v.extend(critical_path_encodings[my_pos].iter().copied());
    for d in 0..width {
        let mut acc = critical_path_encodings[0][d];
        for enc in &critical_path_encodings[1..] {
            acc = tape.add(acc, enc[d]);
        }
        t_v.push(acc);
    }
    let inv = 1.0 / group_encodings.len() as f64;
    for d in 0..width {
        let mut acc = group_encodings[0][d];
        for enc in &group_encodings[1..] {
            acc = tape.add(acc, enc[d]);
        }
        t_v.push(tape.mulc(acc, inv));
    }
    t_v
}

fn learned_tau_omega(
    tape: &mut Tape,
    model: &SurrogateModel,
    ctx: &EvalContext,
    sizes: &[Var],
) -> (Vec<Var>, Vec<Var>) {
    let bound = LearnedOnTape::consts(tape, model);
    let snapshot = snapshot_at_current_values(tape, ctx, sizes);
    let features: Vec<Vec<Var>> = (0..ctx.graph.gates.len())
        .map(|gi| gate_features(tape, ctx.graph, ctx.library, &snapshot, gi, sizes[gi]))
        .collect();
    let encodings: Vec<Vec<Vec<Var>>> = ctx
        .paths
        .iter()
        .map(|p| bound.encode_path(tape, &features, p))
        .collect();
    let mut tau = Vec::with_capacity(sizes.len());
    let mut omega = Vec::with_capacity(sizes.len());
    for gi in 0..sizes.len() {
        let (t, w) = bound.heads_for_gate(tape, ctx, &encodings, gi);
        tau.push(t);
        omega.push(w);
    }
    (tau, omega)
}

fn snapshot_at_current_values(
    tape: &Tape,
    ctx: &EvalContext,
    sizes: &[Var],
) -> FeatureSnapshot {
    let pin_cap = sizes
        .iter()
        .enumerate()
        .map(|(gi, &s)| {
            let idx = (tape.value(s).round() as isize)
                .clamp(0, ctx.library.cell(ctx.graph.gates[gi].cell).n_sizes() as isize - 1)
                as usize;
            ctx.library.cell(ctx.graph.gates[gi].cell).variants[idx].input_pin_cap
        })
        .collect();
    FeatureSnapshot { pin_cap }
}

/// Scale-aggregated physical feature per gate: grids at the current sizes,
/// attention over scales, gate-wise masking of the aggregated channels.
pub fn physical_features(
    graph: &CircuitGraph,
    library: &CellLibrary,
    assignment: &SizingAssignment,
    layout_config: &LayoutConfig,
    psi: &ConvStack,
) -> Result<Vec<Vec<f64>>, LayoutError> {
    let grids = build_grids(graph, library, assignment, layout_config)?;
    let upsampled = upsample_all(&grids);
    let attention = scale_attention(&upsampled, psi);
    let aggregated = aggregate_scales(&upsampled, &attention);
    (0..graph.gates.len())
        .map(|gi| {
            aggregated
                .iter()
                .map(|ch| gate_mask(graph, library, assignment, &grids.die, ch, gi))
                .collect()
        })
        .collect()
}

/// Finite-difference sizing direction labels from an original and an
/// optimized assignment: `(s_op - s_or) / (g_op - g_or)` in ps per size step,
/// zero where the size did not change.
pub fn make_gradient_labels(
    g_or: &SizingAssignment,
    g_op: &SizingAssignment,
    s_or: &[f64],
    s_op: &[f64],
) -> Vec<f64> {
    assert_eq!(g_or.indices.len(), g_op.indices.len());
    g_or.indices
        .iter()
        .zip(&g_op.indices)
        .zip(s_or.iter().zip(s_op))
        .map(|((&go, &gp), (&so, &sp))| {
            if go == gp {
                0.0
            } else {
                (sp - so) / (gp as f64 - go as f64)
            }
        })
        .collect()
}
