//! Circuit data model: cells, gates, nets, ports, sizing assignments, and the
//! on-disk text formats (`.ckt` netlist, `.lib.json` library, `.spf`
//! parasitics).
//!
//! Units are fixed by convention: picoseconds, kiloohms, femtofarads, square
//! micrometers. The product kΩ·fF is exactly ps, which keeps every delay
//! expression unit-clean.

mod emit;
mod parse;
mod validate;

pub use emit::{emit_circuit, CircuitFiles};
pub use parse::{parse_circuit, parse_library, ParseError};
pub use validate::{validate_graph, Diagnostic, DiagnosticKind};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// One discrete size option of a cell. Tables are ordered by `size_index`:
/// drive resistance strictly decreases and input pin capacitance strictly
/// increases with the index, which is what makes upsizing a trade-off
/// (stronger drive, heavier load on the fanin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellVariant {
    pub size_index: usize,
    /// ps
    pub intrinsic_delay: f64,
    /// kΩ
    pub drive_resistance: f64,
    /// fF
    pub input_pin_cap: f64,
    /// µm²
    pub area: f64,
}

/// A library cell with its ordered size table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub variants: Vec<CellVariant>,
}

impl Cell {
    pub fn n_sizes(&self) -> usize {
        self.variants.len()
    }
}

/// Cell library. Cells are kept sorted by name so the one-hot gate-type
/// vocabulary and every iteration order are deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLibrary {
    pub cells: Vec<Cell>,
    #[serde(skip)]
    by_name: HashMap<String, usize>,
}

impl CellLibrary {
    pub fn new(mut cells: Vec<Cell>) -> Self {
        cells.sort_by(|a, b| a.name.cmp(&b.name));
        let by_name = cells
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.clone(), i))
            .collect();
        CellLibrary { cells, by_name }
    }

    pub fn cell_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn cell(&self, idx: usize) -> &Cell {
        &self.cells[idx]
    }

    /// Number of distinct cell types; the width of the one-hot type encoding.
    pub fn n_types(&self) -> usize {
        self.cells.len()
    }
}

/// Reference to a node of the timing graph: a primary port or a gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PinRef {
    Port(usize),
    Gate(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PortDir {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub dir: PortDir,
}

/// A sizable gate instance. `size_index` is the index it was parsed with;
/// the optimizer carries its own [`SizingAssignment`] and never mutates the
/// graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub cell: usize,
    pub size_index: usize,
    /// µm
    pub x: f64,
    /// µm
    pub y: f64,
}

/// A net with lumped parasitics. `drivers` holds one entry for every
/// well-formed circuit; the vector form exists so [`validate_graph`] can
/// diagnose a multiply-driven net instead of making it unrepresentable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub name: String,
    pub drivers: Vec<PinRef>,
    pub sinks: Vec<PinRef>,
    /// kΩ
    pub wire_res: f64,
    /// fF
    pub wire_cap: f64,
}

impl Net {
    /// The unique driver. Only valid after validation.
    pub fn driver(&self) -> PinRef {
        self.drivers[0]
    }
}

/// Gate-level timing graph: a DAG from input ports to output ports, with
/// sequential elements modeled only as path start/end points under a single
/// clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitGraph {
    pub name: String,
    pub ports: Vec<Port>,
    pub gates: Vec<Gate>,
    pub nets: Vec<Net>,
    /// ps
    pub clock_period: f64,
    fanout_nets: Vec<Vec<usize>>,
    fanin_nets: Vec<Vec<usize>>,
}

impl CircuitGraph {
    pub fn new(
        name: String,
        ports: Vec<Port>,
        gates: Vec<Gate>,
        nets: Vec<Net>,
        clock_period: f64,
    ) -> Self {
        let mut g = CircuitGraph {
            name,
            ports,
            gates,
            nets,
            clock_period,
            fanout_nets: Vec::new(),
            fanin_nets: Vec::new(),
        };
        g.rebuild_adjacency();
        g
    }

    /// Dense node index: ports first, then gates.
    pub fn node_index(&self, pin: PinRef) -> usize {
        match pin {
            PinRef::Port(p) => p,
            PinRef::Gate(g) => self.ports.len() + g,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.ports.len() + self.gates.len()
    }

    pub fn node_name(&self, pin: PinRef) -> &str {
        match pin {
            PinRef::Port(p) => &self.ports[p].name,
            PinRef::Gate(g) => &self.gates[g].name,
        }
    }

    pub fn rebuild_adjacency(&mut self) {
        let n = self.n_nodes();
        self.fanout_nets = vec![Vec::new(); n];
        self.fanin_nets = vec![Vec::new(); n];
        let n_ports = self.ports.len();
        let idx = |pin: PinRef| match pin {
            PinRef::Port(p) => p,
            PinRef::Gate(g) => n_ports + g,
        };
        for (ni, net) in self.nets.iter().enumerate() {
            for &d in &net.drivers {
                self.fanout_nets[idx(d)].push(ni);
            }
            for &s in &net.sinks {
                self.fanin_nets[idx(s)].push(ni);
            }
        }
    }

    /// Nets driven by this node.
    pub fn fanout_nets(&self, pin: PinRef) -> &[usize] {
        &self.fanout_nets[self.node_index(pin)]
    }

    /// Nets feeding this node.
    pub fn fanin_nets(&self, pin: PinRef) -> &[usize] {
        &self.fanin_nets[self.node_index(pin)]
    }

    /// Path startpoints: the input ports.
    pub fn startpoints(&self) -> impl Iterator<Item = PinRef> + '_ {
        self.ports
            .iter()
            .enumerate()
            .filter(|(_, p)| p.dir == PortDir::Input)
            .map(|(i, _)| PinRef::Port(i))
    }

    /// Path endpoints: the output ports.
    pub fn endpoints(&self) -> impl Iterator<Item = PinRef> + '_ {
        self.ports
            .iter()
            .enumerate()
            .filter(|(_, p)| p.dir == PortDir::Output)
            .map(|(i, _)| PinRef::Port(i))
    }

    /// Nodes in topological order (fanin before fanout). `None` if cyclic.
    /// Robust against malformed nets: a sink waits once per driver of each
    /// fanin net, so driverless or multiply-driven nets cannot underflow the
    /// indegree bookkeeping.
    pub fn topo_order(&self) -> Option<Vec<PinRef>> {
        let n = self.n_nodes();
        let mut indeg = vec![0usize; n];
        for net in &self.nets {
            for &s in &net.sinks {
                indeg[self.node_index(s)] += net.drivers.len();
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        queue.sort_unstable();
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            order.push(self.pin_of_index(u));
            for &ni in &self.fanout_nets[u] {
                for &s in &self.nets[ni].sinks {
                    let si = self.node_index(s);
                    indeg[si] -= 1;
                    if indeg[si] == 0 {
                        queue.push(si);
                    }
                }
            }
        }
        if order.len() == n {
            Some(order)
        } else {
            None
        }
    }

    pub fn pin_of_index(&self, idx: usize) -> PinRef {
        if idx < self.ports.len() {
            PinRef::Port(idx)
        } else {
            PinRef::Gate(idx - self.ports.len())
        }
    }
}

/// One ordered path from a startpoint to an endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingPath {
    /// Startpoint, intermediate gates, endpoint.
    pub nodes: Vec<PinRef>,
    /// Net taken between consecutive nodes; `nets.len() == nodes.len() - 1`.
    pub nets: Vec<usize>,
    /// ps
    pub slack: f64,
}

impl TimingPath {
    pub fn endpoint(&self) -> PinRef {
        *self.nodes.last().expect("path has an endpoint")
    }

    pub fn gates(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|p| match p {
            PinRef::Gate(g) => Some(*g),
            PinRef::Port(_) => None,
        })
    }
}

/// Discrete size choice for every gate, indexed like `graph.gates`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizingAssignment {
    pub indices: Vec<usize>,
}

impl SizingAssignment {
    pub fn initial(graph: &CircuitGraph) -> Self {
        SizingAssignment {
            indices: graph.gates.iter().map(|g| g.size_index).collect(),
        }
    }

    pub fn of(&self, gate: usize) -> usize {
        self.indices[gate]
    }
}

#[derive(Debug, Error)]
pub enum ChangelistError {
    #[error("assignments cover different gate sets ({0} vs {1} gates)")]
    MismatchedGateSets(usize, usize),
}

/// ECO-style sizing changelist: one line per changed gate,
/// `<gate> <cell> <old> -> <new>`, sorted by gate name.
pub fn emit_sizing_changelist(
    graph: &CircuitGraph,
    library: &CellLibrary,
    before: &SizingAssignment,
    after: &SizingAssignment,
) -> Result<String, ChangelistError> {
    if before.indices.len() != after.indices.len() || before.indices.len() != graph.gates.len() {
        return Err(ChangelistError::MismatchedGateSets(
            before.indices.len(),
            after.indices.len(),
        ));
    }
    let mut changed: Vec<usize> = (0..graph.gates.len())
        .filter(|&i| before.indices[i] != after.indices[i])
        .collect();
    changed.sort_by(|&a, &b| graph.gates[a].name.cmp(&graph.gates[b].name));
    let mut out = String::new();
    for gi in changed {
        let gate = &graph.gates[gi];
        out.push_str(&format!(
            "{} {} {} -> {}\n",
            gate.name,
            library.cell(gate.cell).name,
            before.indices[gi],
            after.indices[gi],
        ));
    }
    Ok(out)
}
