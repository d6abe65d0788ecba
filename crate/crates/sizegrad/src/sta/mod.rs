//! Golden static timing analysis: linear delay model, arrival/required
//! propagation, k-worst path extraction, and per-gate slack metrics.
//!
//! All delay arithmetic is written against [`Engine`], so the differentiable
//! evaluation in the surrogate runs the exact same float operation sequence
//! as this golden timer and agrees bit for bit at integer sizes.

use crate::model::{CellLibrary, CellVariant, CircuitGraph, Net, PinRef, SizingAssignment, TimingPath};
use crate::tape::{Engine, Plain};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// `p + r * load`. The delay model is linear in load per variant; kΩ·fF = ps.
pub fn gate_delay(variant: &CellVariant, load_cap: f64) -> f64 {
    assert!(load_cap >= 0.0, "negative load {load_cap}");
    gate_delay_e(
        &mut Plain,
        variant.intrinsic_delay,
        variant.drive_resistance,
        load_cap,
    )
}

/// `m × R × (C/2 + Σ sink pin caps)`: lumped Elmore delay of one net with a
/// congestion/density multiplier from the layout module (1 when physical
/// awareness is off).
pub fn wire_delay(net: &Net, sink_cap_sum: f64, multiplier: f64) -> f64 {
    wire_delay_e(&mut Plain, net, sink_cap_sum, multiplier)
}

pub fn gate_delay_e<E: Engine>(e: &mut E, p: E::V, r: E::V, load: E::V) -> E::V {
    let rl = e.mul(r, load);
    e.add(p, rl)
}

pub fn wire_delay_e<E: Engine>(e: &mut E, net: &Net, sink_cap_sum: E::V, multiplier: f64) -> E::V {
    let c_term = e.addc(sink_cap_sum, net.wire_cap * 0.5);
    let r_term = e.mulc(c_term, net.wire_res);
    e.mulc(r_term, multiplier)
}

/// Sum of sink pin capacitances of a net, in sink order.
pub fn net_sink_cap_sum<E: Engine>(e: &mut E, net: &Net, pin_cap: &[E::V]) -> E::V {
    let mut acc = e.c(0.0);
    for &s in &net.sinks {
        if let PinRef::Gate(g) = s {
            acc = e.add(acc, pin_cap[g]);
        }
    }
    acc
}

/// Load seen by a driver: full wire cap plus sink pin caps, summed over the
/// nets it drives. Resizing a sink therefore changes this driver's delay.
pub fn node_load<E: Engine>(
    e: &mut E,
    graph: &CircuitGraph,
    node: PinRef,
    sink_cap_sum: &[E::V],
) -> E::V {
    let mut acc = e.c(0.0);
    for &ni in graph.fanout_nets(node) {
        let with_wire = e.addc(sink_cap_sum[ni], graph.nets[ni].wire_cap);
        acc = e.add(acc, with_wire);
    }
    acc
}

/// All per-element delays at one sizing assignment.
#[derive(Debug, Clone)]
pub struct DelayState {
    /// Per gate: input pin cap at the assigned size.
    pub pin_cap: Vec<f64>,
    /// Per net: sum of sink pin caps.
    pub sink_cap_sum: Vec<f64>,
    /// Per net: wire delay with its multiplier applied.
    pub wire_delay: Vec<f64>,
    /// Per gate: output load.
    pub load: Vec<f64>,
    /// Per gate: delay at that load.
    pub gate_delay: Vec<f64>,
}

impl DelayState {
    pub fn build(
        graph: &CircuitGraph,
        library: &CellLibrary,
        assignment: &SizingAssignment,
        multipliers: &[f64],
    ) -> Self {
        assert_eq!(multipliers.len(), graph.nets.len());
        let e = &mut Plain;
        let pin_cap: Vec<f64> = graph
            .gates
            .iter()
            .enumerate()
            .map(|(gi, g)| library.cell(g.cell).variants[assignment.of(gi)].input_pin_cap)
            .collect();
        let sink_cap_sum: Vec<f64> = graph
            .nets
            .iter()
            .map(|n| net_sink_cap_sum(e, n, &pin_cap))
            .collect();
        let wire_delay: Vec<f64> = graph
            .nets
            .iter()
            .enumerate()
            .map(|(ni, n)| wire_delay_e(e, n, sink_cap_sum[ni], multipliers[ni]))
            .collect();
        let load: Vec<f64> = (0..graph.gates.len())
            .map(|gi| node_load(e, graph, PinRef::Gate(gi), &sink_cap_sum))
            .collect();
        let gate_delay: Vec<f64> = graph
            .gates
            .iter()
            .enumerate()
            .map(|(gi, g)| {
                let v = &library.cell(g.cell).variants[assignment.of(gi)];
                gate_delay_e(e, v.intrinsic_delay, v.drive_resistance, load[gi])
            })
            .collect();
        DelayState {
            pin_cap,
            sink_cap_sum,
            wire_delay,
            load,
            gate_delay,
        }
    }
}

/// Arrival/required times and circuit-level slack metrics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TimingAnnotation {
    /// Per node (ports then gates): arrival at the node's output.
    pub arrival: Vec<f64>,
    /// Per node: required time; `inf` where unconstrained.
    pub required: Vec<f64>,
    /// (node index, slack) per endpoint, in endpoint order.
    pub endpoint_slacks: Vec<(usize, f64)>,
    /// Worst endpoint slack (may be positive when timing is met).
    pub wns: f64,
    /// Sum of negative endpoint slacks.
    pub tns: f64,
    /// Number of violating endpoints.
    pub nve: usize,
}

/// Forward/backward sweep over the DAG.
pub fn propagate(
    graph: &CircuitGraph,
    library: &CellLibrary,
    assignment: &SizingAssignment,
    multipliers: &[f64],
) -> TimingAnnotation {
    let delays = DelayState::build(graph, library, assignment, multipliers);
    propagate_with(graph, &delays, graph.clock_period)
}

pub fn propagate_with(graph: &CircuitGraph, delays: &DelayState, clock: f64) -> TimingAnnotation {
    let order = graph.topo_order().expect("timing graph is a DAG");
    let n = graph.n_nodes();
    let mut arrival = vec![0.0_f64; n];
    for &node in &order {
        let idx = graph.node_index(node);
        let mut worst = f64::NEG_INFINITY;
        for &ni in graph.fanin_nets(node) {
            let d = graph.node_index(graph.nets[ni].driver());
            let a = arrival[d] + delays.wire_delay[ni];
            if a > worst {
                worst = a;
            }
        }
        if worst == f64::NEG_INFINITY {
            worst = 0.0;
        }
        arrival[idx] = match node {
            PinRef::Gate(g) => worst + delays.gate_delay[g],
            PinRef::Port(_) => worst,
        };
    }

    let mut required = vec![f64::INFINITY; n];
    for ep in graph.endpoints() {
        required[graph.node_index(ep)] = clock;
    }
    for &node in order.iter().rev() {
        let idx = graph.node_index(node);
        for &ni in graph.fanout_nets(node) {
            for &s in &graph.nets[ni].sinks {
                let si = graph.node_index(s);
                let need = match s {
                    PinRef::Gate(g) => required[si] - delays.gate_delay[g] - delays.wire_delay[ni],
                    PinRef::Port(_) => required[si] - delays.wire_delay[ni],
                };
                if need < required[idx] {
                    required[idx] = need;
                }
            }
        }
    }

    let mut endpoint_slacks = Vec::new();
    let mut wns = f64::INFINITY;
    let mut tns = 0.0;
    let mut nve = 0;
    for ep in graph.endpoints() {
        let idx = graph.node_index(ep);
        let slack = clock - arrival[idx];
        if slack < wns {
            wns = slack;
        }
        if slack < 0.0 {
            tns += slack;
            nve += 1;
        }
        endpoint_slacks.push((idx, slack));
    }
    if wns == f64::INFINITY {
        wns = 0.0;
    }
    TimingAnnotation {
        arrival,
        required,
        endpoint_slacks,
        wns,
        tns,
        nve,
    }
}

struct Suffix {
    bound: f64,
    seq: u64,
    node: PinRef,
    /// Nodes from this one to the endpoint, reversed (endpoint first).
    rev_nodes: Vec<PinRef>,
    /// Connecting nets, reversed, aligned with `rev_nodes` transitions.
    rev_nets: Vec<usize>,
    suffix_delay: f64,
}

impl PartialEq for Suffix {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Suffix {}
impl PartialOrd for Suffix {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Suffix {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on bound; earlier discovery wins ties for determinism.
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Worst paths per violating endpoint, found by best-first backward traversal
/// over worst-arrival fanins. The bound `arrival(u) + suffix delay` is exact
/// for longest paths, so completed paths pop in worst-first order. At most
/// `k_max` paths per endpoint with slack below `slack_threshold` are kept.
///
/// Each returned path's slack is recomputed by a forward walk in the same
/// association order the arrival sweep uses, so a worst path's slack equals
/// its endpoint slack bit for bit. Paths are globally ordered by
/// (slack, endpoint, discovery order).
pub fn extract_critical_paths(
    graph: &CircuitGraph,
    delays: &DelayState,
    annotation: &TimingAnnotation,
    slack_threshold: f64,
    k_max: usize,
) -> Vec<TimingPath> {
    let clock = graph.clock_period;
    let mut all: Vec<(f64, usize, u64, TimingPath)> = Vec::new();
    for ep in graph.endpoints() {
        let ep_idx = graph.node_index(ep);
        if clock - annotation.arrival[ep_idx] >= slack_threshold {
            continue;
        }
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        heap.push(Suffix {
            bound: annotation.arrival[ep_idx],
            seq,
            node: ep,
            rev_nodes: vec![ep],
            rev_nets: Vec::new(),
            suffix_delay: 0.0,
        });
        let mut found = 0usize;
        while let Some(top) = heap.pop() {
            if found >= k_max {
                break;
            }
            // Everything still in the heap is no worse than this bound; once
            // it cannot violate the threshold, nothing after it can either.
            if clock - top.bound >= slack_threshold {
                break;
            }
            let fanins = graph.fanin_nets(top.node);
            if fanins.is_empty() {
                let mut nodes = top.rev_nodes.clone();
                nodes.reverse();
                let mut nets = top.rev_nets.clone();
                nets.reverse();
                let delay =
                    forward_path_delay_e(&mut Plain, &nodes, &nets, &delays.gate_delay, &delays.wire_delay);
                let slack = slack_from_delay(&mut Plain, clock, delay);
                if slack < slack_threshold {
                    all.push((slack, ep_idx, seq, TimingPath { nodes, nets, slack }));
                    found += 1;
                }
                continue;
            }
            let step = top.suffix_delay
                + match top.node {
                    PinRef::Gate(g) => delays.gate_delay[g],
                    PinRef::Port(_) => 0.0,
                };
            for &ni in fanins {
                let driver = graph.nets[ni].driver();
                let suffix_delay = step + delays.wire_delay[ni];
                seq += 1;
                let mut rev_nodes = top.rev_nodes.clone();
                rev_nodes.push(driver);
                let mut rev_nets = top.rev_nets.clone();
                rev_nets.push(ni);
                heap.push(Suffix {
                    bound: annotation.arrival[graph.node_index(driver)] + suffix_delay,
                    seq,
                    node: driver,
                    rev_nodes,
                    rev_nets,
                    suffix_delay,
                });
            }
        }
    }
    all.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    all.into_iter().map(|(_, _, _, p)| p).collect()
}

/// Left-associated delay walk from startpoint to endpoint, mirroring the
/// arrival sweep's accumulation order. Shared by the golden timer and the
/// taped evaluation so both produce bit-identical sums.
pub fn forward_path_delay_e<E: Engine>(
    e: &mut E,
    nodes: &[PinRef],
    nets: &[usize],
    gate_delay: &[E::V],
    wire_delay: &[E::V],
) -> E::V {
    debug_assert_eq!(nets.len() + 1, nodes.len());
    let mut d = e.c(0.0);
    if let PinRef::Gate(g) = nodes[0] {
        d = e.add(d, gate_delay[g]);
    }
    for (k, &ni) in nets.iter().enumerate() {
        d = e.add(d, wire_delay[ni]);
        if let PinRef::Gate(g) = nodes[k + 1] {
            d = e.add(d, gate_delay[g]);
        }
    }
    d
}

/// `clock - delay`, expressed as `(-delay) + clock` so the taped and plain
/// forms agree bit for bit.
pub fn slack_from_delay<E: Engine>(e: &mut E, clock: f64, delay: E::V) -> E::V {
    let neg = e.mulc(delay, -1.0);
    e.addc(neg, clock)
}

/// Per-gate restriction of the circuit metrics to the extracted path set.
#[derive(Debug, Clone)]
pub struct GatewiseMetrics {
    /// Per gate: slack of the gate-wise critical path (0 off all paths).
    pub wst: Vec<f64>,
    /// Per gate: sum of negative slacks over the gate-wise path group.
    pub tot: Vec<f64>,
    /// Per gate: path ids through the gate, in global path order.
    pub groups: Vec<Vec<usize>>,
    /// Per gate: id of the gate-wise critical path.
    pub critical: Vec<Option<usize>>,
}

/// Fold a gate's path-group slacks: hard min for the worst, sum of negative
/// parts for the total. Shared with the differentiable evaluation.
pub fn gatewise_from_group<E: Engine>(e: &mut E, slacks: &[E::V], group: &[usize]) -> (E::V, E::V) {
    debug_assert!(!group.is_empty());
    let mut wst = slacks[group[0]];
    let mut tot = e.min0(slacks[group[0]]);
    for &pid in &group[1..] {
        wst = e.min2(wst, slacks[pid]);
        let neg = e.min0(slacks[pid]);
        tot = e.add(tot, neg);
    }
    (wst, tot)
}

pub fn gatewise_metrics(graph: &CircuitGraph, paths: &[TimingPath]) -> GatewiseMetrics {
    let ng = graph.gates.len();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); ng];
    for (pid, path) in paths.iter().enumerate() {
        for g in path.gates() {
            groups[g].push(pid);
        }
    }
    let slacks: Vec<f64> = paths.iter().map(|p| p.slack).collect();
    let mut wst = vec![0.0_f64; ng];
    let mut tot = vec![0.0_f64; ng];
    let mut critical = vec![None; ng];
    for g in 0..ng {
        if groups[g].is_empty() {
            continue;
        }
        let (w, t) = gatewise_from_group(&mut Plain, &slacks, &groups[g]);
        wst[g] = w;
        tot[g] = t;
        // Paths are globally sorted worst-first, so the first group member
        // attaining the min is the gate-wise critical path under the
        // (slack, endpoint, discovery) tie-break.
        critical[g] = groups[g].iter().copied().find(|&p| slacks[p] == w);
    }
    GatewiseMetrics {
        wst,
        tot,
        groups,
        critical,
    }
}
