//! Serializers for the circuit documents. Floats are written with Rust's
//! shortest round-trip formatting, so `parse(emit(g))` reproduces the exact
//! same values.

use super::{CellLibrary, CircuitGraph, PortDir};
use serde_json::{json, Map, Value};

#[derive(Debug, Clone)]
pub struct CircuitFiles {
    pub ckt: String,
    pub lib_json: String,
    pub spf: String,
}

pub fn emit_circuit(graph: &CircuitGraph, library: &CellLibrary) -> CircuitFiles {
    let mut ckt = String::new();
    ckt.push_str(&format!("clock {}\n", graph.clock_period));
    for p in &graph.ports {
        if p.dir == PortDir::Input {
            ckt.push_str(&format!("port_in {}\n", p.name));
        }
    }
    for p in &graph.ports {
        if p.dir == PortDir::Output {
            ckt.push_str(&format!("port_out {}\n", p.name));
        }
    }
    for g in &graph.gates {
        ckt.push_str(&format!(
            "gate {} {} {} {} {}\n",
            g.name,
            library.cell(g.cell).name,
            g.size_index,
            g.x,
            g.y
        ));
    }
    let mut spf = String::new();
    for n in &graph.nets {
        let mut line = format!("net {}", n.name);
        for &d in &n.drivers {
            line.push(' ');
            line.push_str(graph.node_name(d));
        }
        for &s in &n.sinks {
            line.push(' ');
            line.push_str(graph.node_name(s));
        }
        ckt.push_str(&line);
        ckt.push('\n');
        spf.push_str(&format!("net {} R={} C={}\n", n.name, n.wire_res, n.wire_cap));
    }

    // serde_json maps preserve insertion order only with a feature flag;
    // build from the already-sorted library so output is deterministic.
    let mut cells = Map::new();
    for cell in &library.cells {
        let variants: Vec<Value> = cell
            .variants
            .iter()
            .map(|v| {
                json!({
                    "p": v.intrinsic_delay,
                    "r": v.drive_resistance,
                    "q": v.input_pin_cap,
                    "a": v.area,
                })
            })
            .collect();
        cells.insert(cell.name.clone(), Value::Array(variants));
    }
    let lib_json = serde_json::to_string_pretty(&Value::Object(cells)).expect("library is plain data");

    CircuitFiles { ckt, lib_json, spf }
}
