//! Synthetic benchmarks and ground truth: a seeded layered-DAG circuit
//! generator, an exhaustive sizing oracle, a greedy sensitivity baseline,
//! and the suite harness that produces the result tables.

use crate::layout::LayoutConfig;
use crate::model::{
    emit_circuit, Cell, CellLibrary, CellVariant, CircuitFiles, CircuitGraph, Gate, Net, PinRef,
    Port, PortDir, SizingAssignment,
};
use crate::optimizer::{golden_metrics, size_loop, SizeConfig, SizeError, TargetWeights};
use crate::sta::{extract_critical_paths, gatewise_metrics, propagate_with, DelayState};
use crate::surrogate::{
    make_gradient_labels, physical_features, SurrogateModel, TrainSample,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("infeasible bench spec: {0}")]
    Infeasible(String),
    #[error("assignment space {space} exceeds oracle budget {budget}")]
    BudgetExceeded { space: u128, budget: u64 },
    #[error(transparent)]
    Size(#[from] SizeError),
}

/// Knobs of the synthetic benchmark generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSpec {
    pub seed: u64,
    pub n_circuits: usize,
    pub gates_min: usize,
    pub gates_max: usize,
    pub max_fanin: usize,
    pub sizes_per_cell: usize,
    pub n_cell_types: usize,
    /// Clock = tightness × unoptimized critical delay; < 1 guarantees
    /// initial violations.
    pub tightness: f64,
    /// Gate pitch in µm.
    pub spacing: f64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            seed: 1,
            n_circuits: 20,
            gates_min: 8,
            gates_max: 8,
            max_fanin: 2,
            sizes_per_cell: 4,
            n_cell_types: 2,
            tightness: 0.8,
            spacing: 3.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedCircuit {
    pub name: String,
    pub graph: CircuitGraph,
    pub library: CellLibrary,
    pub files: CircuitFiles,
}

/// Snap to three decimals so every emitted value's shortest decimal form is
/// short enough to survive any 15-digit JSON printer bit-exactly.
fn snap3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

const CELL_NAMES: [&str; 5] = ["INV", "NAND2", "NOR2", "AND2", "BUF"];

fn generate_library(spec: &BenchSpec, rng: &mut ChaCha20Rng) -> CellLibrary {
    let cells = (0..spec.n_cell_types.min(CELL_NAMES.len()))
        .map(|t| {
            let p0 = snap3(rng.gen_range(8.0..15.0));
            let r0 = snap3(rng.gen_range(1.5..3.0));
            let q0 = snap3(rng.gen_range(1.0..3.0));
            let a0 = snap3(rng.gen_range(0.8..1.5));
            Cell {
                name: CELL_NAMES[t].to_string(),
                variants: (0..spec.sizes_per_cell)
                    .map(|k| CellVariant {
                        size_index: k,
                        intrinsic_delay: snap3(p0 * 0.93f64.powi(k as i32)),
                        drive_resistance: snap3(r0 * 0.62f64.powi(k as i32)),
                        input_pin_cap: snap3(q0 * 1.45f64.powi(k as i32)),
                        area: snap3(a0 * 1.8f64.powi(k as i32)),
                    })
                    .collect(),
            }
        })
        .collect();
    CellLibrary::new(cells)
}

/// One seeded circuit: a layered DAG with grouped fanout nets, random
/// parasitics, jittered-grid placement, and a clock derived from the
/// unoptimized critical delay.
pub fn generate_circuit(spec: &BenchSpec, index: usize) -> Result<GeneratedCircuit, BenchError> {
    if spec.gates_min == 0 || spec.gates_max < spec.gates_min {
        return Err(BenchError::Infeasible("gate count range is empty".into()));
    }
    if spec.sizes_per_cell == 0 || spec.n_cell_types == 0 {
        return Err(BenchError::Infeasible("empty library requested".into()));
    }
    if !(spec.tightness > 0.0) {
        return Err(BenchError::Infeasible("tightness must be positive".into()));
    }
    let mut rng =
        ChaCha20Rng::seed_from_u64(spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index as u64);
    let library = generate_library(spec, &mut rng);
    let n_gates = rng.gen_range(spec.gates_min..=spec.gates_max);
    let depth = rng.gen_range(3..=3.max(n_gates / 2).min(6));

    // Assign each gate a layer; every layer gets at least one gate.
    let mut layer_of: Vec<usize> = (0..n_gates)
        .map(|i| {
            if i < depth {
                i
            } else {
                rng.gen_range(0..depth)
            }
        })
        .collect();
    layer_of.sort_unstable();

    // Minimum drive everywhere, the usual post-synthesis starting point;
    // closing timing is then an upsizing trade-off against fanin loading.
    let side = snap3((n_gates as f64).sqrt().ceil() * spec.spacing + 2.0);
    let gates: Vec<Gate> = (0..n_gates)
        .map(|i| Gate {
            name: format!("U{i}"),
            cell: rng.gen_range(0..library.n_types()),
            size_index: 0,
            x: snap3(rng.gen_range(1.0..side - 1.0)),
            y: snap3(rng.gen_range(1.0..side - 1.0)),
        })
        .collect();

    let n_in = rng.gen_range(1..=2);
    let mut ports: Vec<Port> = (0..n_in)
        .map(|i| Port {
            name: format!("in{i}"),
            dir: PortDir::Input,
        })
        .collect();

    // Edges: each gate pulls fanin from earlier layers (or input ports for
    // layer 0), grouped per driver into single nets afterwards.
    let mut edges: Vec<(PinRef, usize)> = Vec::new();
    for gi in 0..n_gates {
        let fanin = rng.gen_range(1..=spec.max_fanin);
        for _ in 0..fanin {
            let earlier: Vec<usize> = (0..n_gates)
                .filter(|&o| layer_of[o] < layer_of[gi])
                .collect();
            let driver = if earlier.is_empty() {
                PinRef::Port(rng.gen_range(0..n_in))
            } else if layer_of[gi] > 0 && rng.gen_bool(0.15) {
                PinRef::Port(rng.gen_range(0..n_in))
            } else {
                PinRef::Gate(earlier[rng.gen_range(0..earlier.len())])
            };
            if !edges.contains(&(driver, gi)) {
                edges.push((driver, gi));
            }
        }
    }

    // Dangling gates feed output ports.
    let driven: std::collections::HashSet<usize> = edges
        .iter()
        .filter_map(|&(d, _)| match d {
            PinRef::Gate(g) => Some(g),
            PinRef::Port(_) => None,
        })
        .collect();
    let mut sink_ports: Vec<(usize, usize)> = Vec::new();
    for gi in 0..n_gates {
        if !driven.contains(&gi) {
            let pi = ports.len();
            ports.push(Port {
                name: format!("out{}", pi - n_in),
                dir: PortDir::Output,
            });
            sink_ports.push((gi, pi));
        }
    }

    let mut nets = Vec::new();
    let mut drivers: Vec<PinRef> = edges.iter().map(|&(d, _)| d).collect();
    drivers.sort_unstable();
    drivers.dedup();
    for driver in drivers {
        let mut sinks: Vec<PinRef> = edges
            .iter()
            .filter(|&&(d, _)| d == driver)
            .map(|&(_, s)| PinRef::Gate(s))
            .collect();
        if let PinRef::Gate(g) = driver {
            if let Some(&(_, pi)) = sink_ports.iter().find(|&&(gi, _)| gi == g) {
                sinks.push(PinRef::Port(pi));
            }
        }
        nets.push(Net {
            name: format!("n{}", nets.len()),
            drivers: vec![driver],
            sinks,
            wire_res: snap3(rng.gen_range(0.1..1.2)),
            wire_cap: snap3(rng.gen_range(1.0..8.0)),
        });
    }
    for &(gi, pi) in &sink_ports {
        if !edges.iter().any(|&(d, _)| d == PinRef::Gate(gi)) {
            nets.push(Net {
                name: format!("n{}", nets.len()),
                drivers: vec![PinRef::Gate(gi)],
                sinks: vec![PinRef::Port(pi)],
                wire_res: snap3(rng.gen_range(0.1..1.2)),
                wire_cap: snap3(rng.gen_range(1.0..8.0)),
            });
        }
    }

    let name = format!("bench_s{}_{index:03}", spec.seed);
    let mut graph = CircuitGraph::new(name.clone(), ports, gates, nets, 1.0);
    // Clock from the unoptimized critical delay, physically unpenalized.
    let assignment = SizingAssignment::initial(&graph);
    let delays = DelayState::build(&graph, &library, &assignment, &vec![1.0; graph.nets.len()]);
    let probe = propagate_with(&graph, &delays, 0.0);
    let critical = probe
        .endpoint_slacks
        .iter()
        .map(|&(_, s)| -s)
        .fold(0.0f64, f64::max);
    graph.clock_period = snap3((spec.tightness * critical).max(0.001));
    let files = emit_circuit(&graph, &library);
    Ok(GeneratedCircuit {
        name,
        graph,
        library,
        files,
    })
}

pub fn generate_suite(spec: &BenchSpec) -> Result<Vec<GeneratedCircuit>, BenchError> {
    (0..spec.n_circuits).map(|i| generate_circuit(spec, i)).collect()
}

/// Oracle objective: weighted violation magnitudes, smaller is better.
pub fn violation_score(wns: f64, tns: f64, w: &TargetWeights) -> f64 {
    w.mu_tau * (-tns).max(0.0) + w.mu_omega * (-wns).max(0.0)
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub assignment: SizingAssignment,
    pub wns: f64,
    pub tns: f64,
    pub nve: usize,
    pub score: f64,
    pub evaluated: u64,
}

fn decode_assignment(mut code: u128, radices: &[usize]) -> Vec<usize> {
    // Most significant digit first: lexicographic order matches the code
    // order.
    let mut out = vec![0usize; radices.len()];
    for i in (0..radices.len()).rev() {
        out[i] = (code % radices[i] as u128) as usize;
        code /= radices[i] as u128;
    }
    out
}

/// Enumerate every assignment and keep the minimum-score one, ties broken
/// toward the lexicographically smallest index vector.
pub fn exhaustive_size(
    graph: &CircuitGraph,
    library: &CellLibrary,
    weights: &TargetWeights,
    layout: &LayoutConfig,
    budget: u64,
) -> Result<OracleOutcome, BenchError> {
    let radices: Vec<usize> = graph
        .gates
        .iter()
        .map(|g| library.cell(g.cell).n_sizes())
        .collect();
    let space: u128 = radices.iter().map(|&r| r as u128).product();
    if space > budget as u128 {
        return Err(BenchError::BudgetExceeded { space, budget });
    }
    let n = space as u64;
    let best = (0..n)
        .into_par_iter()
        .map(|code| {
            let indices = decode_assignment(code as u128, &radices);
            let a = SizingAssignment { indices };
            let (wns, tns, _) =
                golden_metrics(graph, library, &a, layout).expect("generated layout is valid");
            (violation_score(wns, tns, weights), code)
        })
        .reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    let assignment = SizingAssignment {
        indices: decode_assignment(best.1 as u128, &radices),
    };
    let (wns, tns, nve) = golden_metrics(graph, library, &assignment, layout)?;
    Ok(OracleOutcome {
        assignment,
        wns,
        tns,
        nve,
        score: best.0,
        evaluated: n,
    })
}

/// Repeatedly apply the move with the best golden-TNS improvement per unit
/// area increase until nothing improves. Deterministic.
pub fn greedy_sensitivity_size(
    graph: &CircuitGraph,
    library: &CellLibrary,
    layout: &LayoutConfig,
) -> Result<SizingAssignment, BenchError> {
    let mut current = SizingAssignment::initial(graph);
    let (_, mut base_tns, _) = golden_metrics(graph, library, &current, layout)?;
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for gi in 0..graph.gates.len() {
            let n = library.cell(graph.gates[gi].cell).n_sizes();
            let cur_size = current.of(gi);
            let cur_area = library.cell(graph.gates[gi].cell).variants[cur_size].area;
            for s in 0..n {
                if s == cur_size {
                    continue;
                }
                let mut cand = current.clone();
                cand.indices[gi] = s;
                let (_, tns, _) = golden_metrics(graph, library, &cand, layout)?;
                let improvement = tns - base_tns;
                if improvement <= 0.0 {
                    continue;
                }
                let d_area =
                    (library.cell(graph.gates[gi].cell).variants[s].area - cur_area).max(1e-6);
                let eff = improvement / d_area;
                let better = match best {
                    None => true,
                    Some((b_eff, b_gi, b_s)) => {
                        eff > b_eff || (eff == b_eff && (gi, s) < (b_gi, b_s))
                    }
                };
                if better {
                    best = Some((eff, gi, s));
                }
            }
        }
        match best {
            Some((_, gi, s)) => {
                current.indices[gi] = s;
                let (_, tns, _) = golden_metrics(graph, library, &current, layout)?;
                base_tns = tns;
            }
            None => return Ok(current),
        }
    }
}

/// Assemble one labeled training sample: slack labels from the golden STA at
/// the original sizes, gradient labels from the greedy-optimized sizes (the
/// stand-in for a commercial sizer's output).
pub fn build_train_sample(
    circuit: &GeneratedCircuit,
    layout: &LayoutConfig,
    psi: &crate::nn::ConvStack,
    k_max: usize,
) -> Result<TrainSample, BenchError> {
    let graph = &circuit.graph;
    let library = &circuit.library;
    let or_assign = SizingAssignment::initial(graph);
    let multipliers = crate::layout::net_multipliers(graph, library, &or_assign, layout)
        .map_err(SizeError::Layout)?;
    let delays = DelayState::build(graph, library, &or_assign, &multipliers);
    let ann = propagate_with(graph, &delays, graph.clock_period);
    let paths = extract_critical_paths(graph, &delays, &ann, 0.0, k_max);
    let gatewise = gatewise_metrics(graph, &paths);

    let op_assign = greedy_sensitivity_size(graph, library, layout)?;
    let op_multipliers = crate::layout::net_multipliers(graph, library, &op_assign, layout)
        .map_err(SizeError::Layout)?;
    let op_delays = DelayState::build(graph, library, &op_assign, &op_multipliers);
    let op_ann = propagate_with(graph, &op_delays, graph.clock_period);
    let op_paths = extract_critical_paths(graph, &op_delays, &op_ann, 0.0, k_max);
    let op_gatewise = gatewise_metrics(graph, &op_paths);

    let d_tot = make_gradient_labels(&or_assign, &op_assign, &gatewise.tot, &op_gatewise.tot);
    let d_wst = make_gradient_labels(&or_assign, &op_assign, &gatewise.wst, &op_gatewise.wst);

    let h_features = if layout.enabled {
        Some(
            physical_features(graph, library, &or_assign, layout, psi)
                .map_err(SizeError::Layout)?,
        )
    } else {
        None
    };

    Ok(TrainSample {
        graph: graph.clone(),
        library: library.clone(),
        coords: or_assign.indices.iter().map(|&i| i as f64).collect(),
        slack_tot: gatewise.tot.clone(),
        slack_wst: gatewise.wst.clone(),
        d_tot,
        d_wst,
        gatewise,
        paths,
        multipliers,
        h_features,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Initial,
    Greedy,
    Gradient,
    Exhaustive,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Initial => "initial",
            Method::Greedy => "greedy",
            Method::Gradient => "grad",
            Method::Exhaustive => "exhaustive",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "initial" => Some(Method::Initial),
            "greedy" => Some(Method::Greedy),
            "grad" | "gradient" => Some(Method::Gradient),
            "exhaustive" | "oracle" => Some(Method::Exhaustive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub circuit: String,
    pub method: &'static str,
    pub status: &'static str,
    pub wns: f64,
    pub tns: f64,
    pub nve: usize,
    pub runtime_ms: f64,
    /// Violation ratios against the initial netlist (1 = unchanged,
    /// 0 = closed).
    pub tns_norm_initial: f64,
    pub wns_norm_initial: f64,
    pub tns_norm_oracle: Option<f64>,
    pub wns_norm_oracle: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub mu_omega: f64,
    pub mu_tau: f64,
    pub mean_norm_wns: f64,
    pub mean_norm_tns: f64,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub rows: Vec<SuiteRow>,
    pub sweep: Vec<SweepRow>,
}

fn ratio(violation: f64, baseline: f64) -> f64 {
    if baseline > 0.0 {
        violation / baseline
    } else if violation > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Run every requested method on every circuit; optionally sweep the target
/// weights. Rows come out in (circuit, method) order with no omissions.
pub fn run_suite(
    circuits: &[GeneratedCircuit],
    methods: &[Method],
    size_config: &SizeConfig,
    model_seed: u64,
    oracle_budget: u64,
    sweep_mu: bool,
) -> Result<SuiteResult, BenchError> {
    let mut rows = Vec::new();
    for c in circuits {
        let initial = SizingAssignment::initial(&c.graph);
        let (wns0, tns0, nve0) =
            golden_metrics(&c.graph, &c.library, &initial, &size_config.layout)?;
        let base_tns_viol = (-tns0).max(0.0);
        let base_wns_viol = (-wns0).max(0.0);
        let oracle = if methods.contains(&Method::Exhaustive) {
            match exhaustive_size(
                &c.graph,
                &c.library,
                &size_config.weights,
                &size_config.layout,
                oracle_budget,
            ) {
                Ok(o) => Some(o),
                Err(BenchError::BudgetExceeded { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };

        for &method in methods {
            let start = std::time::Instant::now();
            let result: Result<(f64, f64, usize), BenchError> = match method {
                Method::Initial => Ok((wns0, tns0, nve0)),
                Method::Greedy => {
                    let a = greedy_sensitivity_size(&c.graph, &c.library, &size_config.layout)?;
                    Ok(golden_metrics(&c.graph, &c.library, &a, &size_config.layout)?)
                }
                Method::Gradient => {
                    let model = SurrogateModel::seeded(
                        &c.library,
                        &size_config.layout,
                        size_config.mode,
                        8,
                        16,
                        model_seed,
                    );
                    let out = size_loop(&c.graph, &c.library, &model, size_config)?;
                    Ok((out.best_wns, out.best_tns, out.best_nve))
                }
                Method::Exhaustive => match &oracle {
                    Some(o) => Ok((o.wns, o.tns, o.nve)),
                    None => Err(BenchError::BudgetExceeded {
                        space: 0,
                        budget: oracle_budget,
                    }),
                },
            };
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            match result {
                Ok((wns, tns, nve)) => rows.push(SuiteRow {
                    circuit: c.name.clone(),
                    method: method.name(),
                    status: "ok",
                    wns,
                    tns,
                    nve,
                    runtime_ms,
                    tns_norm_initial: ratio((-tns).max(0.0), base_tns_viol),
                    wns_norm_initial: ratio((-wns).max(0.0), base_wns_viol),
                    tns_norm_oracle: oracle
                        .as_ref()
                        .map(|o| ratio((-tns).max(0.0), (-o.tns).max(0.0))),
                    wns_norm_oracle: oracle
                        .as_ref()
                        .map(|o| ratio((-wns).max(0.0), (-o.wns).max(0.0))),
                }),
                Err(e) => rows.push(SuiteRow {
                    circuit: c.name.clone(),
                    method: method.name(),
                    status: if matches!(e, BenchError::BudgetExceeded { .. }) {
                        "budget_exceeded"
                    } else {
                        "error"
                    },
                    wns: f64::NAN,
                    tns: f64::NAN,
                    nve: 0,
                    runtime_ms,
                    tns_norm_initial: f64::NAN,
                    wns_norm_initial: f64::NAN,
                    tns_norm_oracle: None,
                    wns_norm_oracle: None,
                }),
            }
        }
    }

    let sweep = if sweep_mu {
        mu_sweep(circuits, size_config, model_seed)?
    } else {
        Vec::new()
    };
    Ok(SuiteResult { rows, sweep })
}

/// Re-run the gradient sizer across μω ∈ {0.1 … 0.9} (μτ = 1 − μω) and
/// average the normalized violations.
pub fn mu_sweep(
    circuits: &[GeneratedCircuit],
    base: &SizeConfig,
    model_seed: u64,
) -> Result<Vec<SweepRow>, BenchError> {
    let mut out = Vec::new();
    for step in 1..=9 {
        let mu_omega = step as f64 / 10.0;
        let mut config = base.clone();
        config.weights.mu_omega = mu_omega;
        config.weights.mu_tau = 1.0 - mu_omega;
        let mut norm_wns = 0.0;
        let mut norm_tns = 0.0;
        for c in circuits {
            let initial = SizingAssignment::initial(&c.graph);
            let (wns0, tns0, _) = golden_metrics(&c.graph, &c.library, &initial, &config.layout)?;
            let model = SurrogateModel::seeded(
                &c.library,
                &config.layout,
                config.mode,
                8,
                16,
                model_seed,
            );
            let outc = size_loop(&c.graph, &c.library, &model, &config)?;
            norm_wns += ratio((-outc.best_wns).max(0.0), (-wns0).max(0.0));
            norm_tns += ratio((-outc.best_tns).max(0.0), (-tns0).max(0.0));
        }
        out.push(SweepRow {
            mu_omega,
            mu_tau: 1.0 - mu_omega,
            mean_norm_wns: norm_wns / circuits.len() as f64,
            mean_norm_tns: norm_tns / circuits.len() as f64,
        });
    }
    Ok(out)
}

pub fn rows_to_csv(rows: &[SuiteRow]) -> String {
    let mut out = String::from(
        "circuit,method,status,wns,tns,nve,runtime_ms,tns_norm_initial,wns_norm_initial,tns_norm_oracle,wns_norm_oracle\n",
    );
    for r in rows {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{},{:.3},{:.6},{:.6},{},{}\n",
            r.circuit,
            r.method,
            r.status,
            r.wns,
            r.tns,
            r.nve,
            r.runtime_ms,
            r.tns_norm_initial,
            r.wns_norm_initial,
            opt(r.tns_norm_oracle),
            opt(r.wns_norm_oracle),
        ));
    }
    out
}

pub fn rows_to_markdown(rows: &[SuiteRow]) -> String {
    let mut out = String::from(
        "| circuit | method | WNS (ps) | TNS (ps) | NVE | TNS/initial | WNS/initial |\n|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {:.3} | {:.3} | {} | {:.4} | {:.4} |\n",
            r.circuit, r.method, r.wns, r.tns, r.nve, r.tns_norm_initial, r.wns_norm_initial
        ));
    }
    out
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("mu_omega,mu_tau,mean_norm_wns,mean_norm_tns\n");
    for r in rows {
        out.push_str(&format!(
            "{:.1},{:.1},{:.6},{:.6}\n",
            r.mu_omega, r.mu_tau, r.mean_norm_wns, r.mean_norm_tns
        ));
    }
    out
}

/// A small fixture with a deliberately crowded region: upsizing the gates in
/// the cluster overfills their density cell, so the physical penalty changes
/// the trade-off the sizer sees there.
pub fn congested_fixture() -> GeneratedCircuit {
    let spec = BenchSpec {
        seed: 77,
        gates_min: 6,
        gates_max: 6,
        sizes_per_cell: 4,
        n_cell_types: 1,
        tightness: 0.75,
        spacing: 1.1,
        ..BenchSpec::default()
    };
    let mut c = generate_circuit(&spec, 0).expect("fixture spec is feasible");
    // Crowd every gate into one tight cluster.
    for (i, g) in c.graph.gates.iter_mut().enumerate() {
        g.x = 2.0 + 0.4 * (i % 3) as f64;
        g.y = 2.0 + 0.4 * (i / 3) as f64;
    }
    c.files = emit_circuit(&c.graph, &c.library);
    c
}
