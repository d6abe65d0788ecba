//! Structural validation. Returns one diagnostic per violated invariant
//! instead of failing fast, so a report covers everything at once.

use super::{CellLibrary, CircuitGraph};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    MultipleDrivers,
    NoDriver,
    NonMonotoneSizeTable,
    NegativeCellParameter,
    UnresolvedCell,
    SizeIndexOutOfRange,
    NegativeParasitic,
    NonPositiveClock,
    CombinationalCycle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

fn diag(kind: DiagnosticKind, subject: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        kind,
        subject: subject.into(),
        message: message.into(),
    }
}

/// Check every model invariant; empty result means the pair is well formed.
pub fn validate_graph(graph: &CircuitGraph, library: &CellLibrary) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    for cell in &library.cells {
        for v in &cell.variants {
            if !(v.drive_resistance > 0.0) {
                out.push(diag(
                    DiagnosticKind::NegativeCellParameter,
                    &cell.name,
                    format!("size {}: drive resistance must be positive", v.size_index),
                ));
            }
            if v.intrinsic_delay < 0.0 || v.input_pin_cap < 0.0 || v.area < 0.0 {
                out.push(diag(
                    DiagnosticKind::NegativeCellParameter,
                    &cell.name,
                    format!("size {}: negative parameter", v.size_index),
                ));
            }
        }
        for w in cell.variants.windows(2) {
            if w[1].drive_resistance >= w[0].drive_resistance {
                out.push(diag(
                    DiagnosticKind::NonMonotoneSizeTable,
                    &cell.name,
                    format!(
                        "drive resistance not strictly decreasing at size {}",
                        w[1].size_index
                    ),
                ));
            }
            if w[1].input_pin_cap <= w[0].input_pin_cap {
                out.push(diag(
                    DiagnosticKind::NonMonotoneSizeTable,
                    &cell.name,
                    format!(
                        "input pin cap not strictly increasing at size {}",
                        w[1].size_index
                    ),
                ));
            }
        }
    }

    for gate in &graph.gates {
        if gate.cell >= library.cells.len() {
            out.push(diag(
                DiagnosticKind::UnresolvedCell,
                &gate.name,
                format!("cell index {} outside library", gate.cell),
            ));
            continue;
        }
        let n = library.cell(gate.cell).n_sizes();
        if gate.size_index >= n {
            out.push(diag(
                DiagnosticKind::SizeIndexOutOfRange,
                &gate.name,
                format!("size index {} outside table of {} sizes", gate.size_index, n),
            ));
        }
    }

    for net in &graph.nets {
        match net.drivers.len() {
            0 => out.push(diag(DiagnosticKind::NoDriver, &net.name, "net has no driver")),
            1 => {}
            n => out.push(diag(
                DiagnosticKind::MultipleDrivers,
                &net.name,
                format!("net has {n} drivers"),
            )),
        }
        if net.wire_res < 0.0 || net.wire_cap < 0.0 {
            out.push(diag(
                DiagnosticKind::NegativeParasitic,
                &net.name,
                "negative wire parasitic",
            ));
        }
    }

    if !(graph.clock_period > 0.0) {
        out.push(diag(
            DiagnosticKind::NonPositiveClock,
            &graph.name,
            "clock period must be positive",
        ));
    }

    if graph.topo_order().is_none() {
        out.push(diag(
            DiagnosticKind::CombinationalCycle,
            &graph.name,
            "graph contains a combinational cycle",
        ));
    }

    out
}
