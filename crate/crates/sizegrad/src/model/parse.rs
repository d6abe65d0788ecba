//! Parsers for the three circuit documents.
//!
//! `.ckt` netlist, line oriented:
//! ```text
//! clock <ps>
//! port_in <id>
//! port_out <id>
//! gate <id> <cell> <size_index> <x> <y>
//! net <id> <driver_pin> <sink_pin>...
//! ```
//! `.lib.json`: `{"CELL": [{"p":..,"r":..,"q":..,"a":..}, ...]}` ordered by
//! size index. `.spf`: `net <id> R=<kΩ> C=<fF>` per line; nets without an
//! entry default to R=0, C=0.

use super::{Cell, CellLibrary, CellVariant, CircuitGraph, Gate, Net, PinRef, Port, PortDir};
use serde::Deserialize;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{doc} line {line}, column {col}: {msg}")]
    Syntax {
        doc: &'static str,
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{doc} line {line}: duplicate id '{id}'")]
    DuplicateId {
        doc: &'static str,
        line: usize,
        id: String,
    },
    #[error(".ckt line {line}: unresolved cell '{name}'")]
    UnresolvedCell { line: usize, name: String },
    #[error("{doc} line {line}: unresolved reference '{name}'")]
    UnresolvedRef {
        doc: &'static str,
        line: usize,
        name: String,
    },
    #[error(".ckt line {line}: gate '{gate}' size index {index} out of range for cell '{cell}' ({n} sizes)")]
    SizeIndexOutOfRange {
        line: usize,
        gate: String,
        cell: String,
        index: usize,
        n: usize,
    },
    #[error(".ckt line {line}: {port} port '{name}' cannot be a net {role}")]
    PortDirection {
        line: usize,
        port: &'static str,
        name: String,
        role: &'static str,
    },
    #[error(".ckt: missing clock directive")]
    MissingClock,
    #[error("combinational cycle through '{node}'")]
    CyclicGraph { node: String },
    #[error(".lib.json: {0}")]
    LibJson(#[from] serde_json::Error),
    #[error(".lib.json: cell '{0}' has an empty size table")]
    EmptyCell(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariantJson {
    p: f64,
    r: f64,
    q: f64,
    a: f64,
}

/// Parse the library document. Cells come out sorted by name.
pub fn parse_library(text: &str) -> Result<CellLibrary, ParseError> {
    let raw: std::collections::BTreeMap<String, Vec<VariantJson>> = serde_json::from_str(text)?;
    let mut cells = Vec::with_capacity(raw.len());
    for (name, variants) in raw {
        if variants.is_empty() {
            return Err(ParseError::EmptyCell(name));
        }
        cells.push(Cell {
            variants: variants
                .into_iter()
                .enumerate()
                .map(|(i, v)| CellVariant {
                    size_index: i,
                    intrinsic_delay: v.p,
                    drive_resistance: v.r,
                    input_pin_cap: v.q,
                    area: v.a,
                })
                .collect(),
            name,
        });
    }
    Ok(CellLibrary::new(cells))
}

struct Line<'a> {
    number: usize,
    tokens: Vec<(usize, &'a str)>,
}

fn tokenize(doc: &str) -> impl Iterator<Item = Line<'_>> {
    doc.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut col = 0;
        for tok in line.split_whitespace() {
            let at = line[col..].find(tok).map(|o| col + o).unwrap_or(col);
            tokens.push((at + 1, tok));
            col = at + tok.len();
        }
        if tokens.is_empty() {
            None
        } else {
            Some(Line {
                number: i + 1,
                tokens,
            })
        }
    })
}

fn syntax(doc: &'static str, line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        doc,
        line,
        col,
        msg: msg.into(),
    }
}

fn parse_f64(doc: &'static str, line: usize, tok: (usize, &str), what: &str) -> Result<f64, ParseError> {
    tok.1
        .parse::<f64>()
        .map_err(|_| syntax(doc, line, tok.0, format!("expected {what}, got '{}'", tok.1)))
}

fn parse_usize(
    doc: &'static str,
    line: usize,
    tok: (usize, &str),
    what: &str,
) -> Result<usize, ParseError> {
    tok.1
        .parse::<usize>()
        .map_err(|_| syntax(doc, line, tok.0, format!("expected {what}, got '{}'", tok.1)))
}

/// Parse and cross-resolve the netlist, library, and parasitics documents.
/// The returned graph has passed reference resolution and the DAG check;
/// structural diagnostics beyond that are [`super::validate_graph`]'s job.
pub fn parse_circuit(
    netlist_text: &str,
    library_text: &str,
    parasitics_text: &str,
) -> Result<(CircuitGraph, CellLibrary), ParseError> {
    let library = parse_library(library_text)?;

    let mut ports: Vec<Port> = Vec::new();
    let mut gates: Vec<Gate> = Vec::new();
    let mut clock: Option<f64> = None;
    // Net pin lists are resolved in a second pass so forward references work.
    struct RawNet<'a> {
        line: usize,
        name: String,
        pins: Vec<(usize, &'a str)>,
    }
    let mut raw_nets: Vec<RawNet> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();

    let mut claim_id = |ids: &mut HashMap<String, usize>,
                        line: usize,
                        id: &str|
     -> Result<(), ParseError> {
        if ids.insert(id.to_string(), line).is_some() {
            return Err(ParseError::DuplicateId {
                doc: ".ckt",
                line,
                id: id.to_string(),
            });
        }
        Ok(())
    };

    for l in tokenize(netlist_text) {
        let (col0, directive) = l.tokens[0];
        let need = |n: usize| -> Result<(), ParseError> {
            if l.tokens.len() != n {
                Err(syntax(
                    ".ckt",
                    l.number,
                    col0,
                    format!("'{directive}' takes {} fields, got {}", n - 1, l.tokens.len() - 1),
                ))
            } else {
                Ok(())
            }
        };
        match directive {
            "clock" => {
                need(2)?;
                let period = parse_f64(".ckt", l.number, l.tokens[1], "clock period in ps")?;
                if !(period > 0.0) {
                    return Err(syntax(".ckt", l.number, l.tokens[1].0, "clock period must be positive"));
                }
                if clock.replace(period).is_some() {
                    return Err(syntax(".ckt", l.number, col0, "duplicate clock directive"));
                }
            }
            "port_in" | "port_out" => {
                need(2)?;
                let name = l.tokens[1].1;
                claim_id(&mut ids, l.number, name)?;
                ports.push(Port {
                    name: name.to_string(),
                    dir: if directive == "port_in" {
                        PortDir::Input
                    } else {
                        PortDir::Output
                    },
                });
            }
            "gate" => {
                need(6)?;
                let name = l.tokens[1].1;
                claim_id(&mut ids, l.number, name)?;
                let cell_name = l.tokens[2].1;
                let cell = library.cell_index(cell_name).ok_or(ParseError::UnresolvedCell {
                    line: l.number,
                    name: cell_name.to_string(),
                })?;
                let size_index = parse_usize(".ckt", l.number, l.tokens[3], "size index")?;
                let n = library.cell(cell).n_sizes();
                if size_index >= n {
                    return Err(ParseError::SizeIndexOutOfRange {
                        line: l.number,
                        gate: name.to_string(),
                        cell: cell_name.to_string(),
                        index: size_index,
                        n,
                    });
                }
                let x = parse_f64(".ckt", l.number, l.tokens[4], "x coordinate")?;
                let y = parse_f64(".ckt", l.number, l.tokens[5], "y coordinate")?;
                gates.push(Gate {
                    name: name.to_string(),
                    cell,
                    size_index,
                    x,
                    y,
                });
            }
            "net" => {
                if l.tokens.len() < 3 {
                    return Err(syntax(
                        ".ckt",
                        l.number,
                        col0,
                        "'net' needs an id and at least a driver pin",
                    ));
                }
                let name = l.tokens[1].1;
                claim_id(&mut ids, l.number, name)?;
                raw_nets.push(RawNet {
                    line: l.number,
                    name: name.to_string(),
                    pins: l.tokens[2..].to_vec(),
                });
            }
            other => {
                return Err(syntax(
                    ".ckt",
                    l.number,
                    col0,
                    format!("unknown directive '{other}'"),
                ));
            }
        }
    }

    let clock_period = clock.ok_or(ParseError::MissingClock)?;

    let mut node_by_name: HashMap<&str, PinRef> = HashMap::new();
    for (i, p) in ports.iter().enumerate() {
        node_by_name.insert(&p.name, PinRef::Port(i));
    }
    for (i, g) in gates.iter().enumerate() {
        node_by_name.insert(&g.name, PinRef::Gate(i));
    }

    let mut nets = Vec::with_capacity(raw_nets.len());
    for raw in &raw_nets {
        let mut resolved = Vec::with_capacity(raw.pins.len());
        for &(col, pin) in &raw.pins {
            let node = *node_by_name.get(pin).ok_or(ParseError::UnresolvedRef {
                doc: ".ckt",
                line: raw.line,
                name: pin.to_string(),
            })?;
            resolved.push((col, node));
        }
        let (_, driver) = resolved[0];
        if let PinRef::Port(p) = driver {
            if ports[p].dir == PortDir::Output {
                return Err(ParseError::PortDirection {
                    line: raw.line,
                    port: "output",
                    name: ports[p].name.clone(),
                    role: "driver",
                });
            }
        }
        let mut sinks = Vec::with_capacity(resolved.len() - 1);
        for &(_, sink) in &resolved[1..] {
            if let PinRef::Port(p) = sink {
                if ports[p].dir == PortDir::Input {
                    return Err(ParseError::PortDirection {
                        line: raw.line,
                        port: "input",
                        name: ports[p].name.clone(),
                        role: "sink",
                    });
                }
            }
            sinks.push(sink);
        }
        nets.push(Net {
            name: raw.name.clone(),
            drivers: vec![driver],
            sinks,
            wire_res: 0.0,
            wire_cap: 0.0,
        });
    }

    let net_by_name: HashMap<String, usize> = nets
        .iter()
        .enumerate()
        .map(|(i, n)| (n.name.clone(), i))
        .collect();

    for l in tokenize(parasitics_text) {
        let (col0, directive) = l.tokens[0];
        if directive != "net" {
            return Err(syntax(
                ".spf",
                l.number,
                col0,
                format!("unknown directive '{directive}'"),
            ));
        }
        if l.tokens.len() != 4 {
            return Err(syntax(
                ".spf",
                l.number,
                col0,
                "'net' takes an id plus R=<kΩ> C=<fF>",
            ));
        }
        let name = l.tokens[1].1;
        let &ni = net_by_name.get(name).ok_or(ParseError::UnresolvedRef {
            doc: ".spf",
            line: l.number,
            name: name.to_string(),
        })?;
        for &(col, field) in &l.tokens[2..4] {
            let (key, value) = field.split_once('=').ok_or_else(|| {
                syntax(".spf", l.number, col, format!("expected K=value, got '{field}'"))
            })?;
            let value = parse_f64(".spf", l.number, (col, value), "a number")?;
            match key {
                "R" => nets[ni].wire_res = value,
                "C" => nets[ni].wire_cap = value,
                other => {
                    return Err(syntax(
                        ".spf",
                        l.number,
                        col,
                        format!("unknown field '{other}' (expected R or C)"),
                    ))
                }
            }
        }
    }

    let graph = CircuitGraph::new("circuit".into(), ports, gates, nets, clock_period);
    if graph.topo_order().is_none() {
        // Name some node on a cycle: any node whose indegree never reached
        // zero; pick the smallest name for a stable message.
        let node = cycle_witness(&graph);
        return Err(ParseError::CyclicGraph { node });
    }
    Ok((graph, library))
}

fn cycle_witness(graph: &CircuitGraph) -> String {
    let n = graph.n_nodes();
    let mut indeg = vec![0usize; n];
    for net in &graph.nets {
        for &s in &net.sinks {
            indeg[graph.node_index(s)] += net.drivers.len();
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut head = 0;
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        for &ni in graph.fanout_nets(graph.pin_of_index(u)) {
            for &s in &graph.nets[ni].sinks {
                let si = graph.node_index(s);
                indeg[si] -= 1;
                if indeg[si] == 0 {
                    queue.push(si);
                }
            }
        }
    }
    (0..n)
        .filter(|&i| indeg[i] > 0)
        .map(|i| graph.node_name(graph.pin_of_index(i)).to_string())
        .min()
        .unwrap_or_else(|| "<unknown>".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIB: &str = r#"{"INV": [
        {"p": 10.0, "r": 2.0, "q": 2.0, "a": 1.0},
        {"p": 8.0, "r": 1.0, "q": 4.0, "a": 2.0}
    ]}"#;

    const CHAIN: &str = "\
# two-inverter chain
clock 100
port_in a
port_out z
gate U1 INV 0 1.0 1.0
gate U2 INV 0 3.0 1.0
net n0 a U1
net n1 U1 U2
net n2 U2 z
";

    const SPF: &str = "\
net n0 R=1 C=8
net n1 R=0.5 C=4
net n2 R=2 C=8
";

    #[test]
    fn parses_two_inverter_chain() {
        let (g, lib) = parse_circuit(CHAIN, LIB, SPF).unwrap();
        assert_eq!(g.gates.len(), 2);
        assert_eq!(g.ports.len(), 2);
        assert_eq!(g.nets.len(), 3);
        assert_eq!(g.clock_period, 100.0);
        assert_eq!(lib.n_types(), 1);
        // One internal net (gate-to-gate).
        let internal = g
            .nets
            .iter()
            .filter(|n| {
                matches!(n.driver(), PinRef::Gate(_))
                    && n.sinks.iter().all(|s| matches!(s, PinRef::Gate(_)))
            })
            .count();
        assert_eq!(internal, 1);
        assert_eq!(g.nets[1].wire_res, 0.5);
        assert_eq!(g.nets[1].wire_cap, 4.0);
    }

    #[test]
    fn library_table_ordered_by_size_index() {
        let lib = parse_library(LIB).unwrap();
        let cell = &lib.cells[0];
        assert_eq!(cell.variants[0].size_index, 0);
        assert_eq!(cell.variants[1].size_index, 1);
        assert!(cell.variants[0].drive_resistance > cell.variants[1].drive_resistance);
        assert!(cell.variants[0].input_pin_cap < cell.variants[1].input_pin_cap);
    }

    #[test]
    fn unresolved_cell_is_named() {
        let bad = CHAIN.replace("gate U2 INV", "gate U2 NAND9");
        let err = parse_circuit(&bad, LIB, SPF).unwrap_err();
        match err {
            ParseError::UnresolvedCell { name, .. } => assert_eq!(name, "NAND9"),
            other => panic!("expected unresolved cell, got {other}"),
        }
    }

    #[test]
    fn unresolved_pin_is_named() {
        let bad = CHAIN.replace("net n1 U1 U2", "net n1 U1 U9");
        let err = parse_circuit(&bad, LIB, SPF).unwrap_err();
        match err {
            ParseError::UnresolvedRef { name, .. } => assert_eq!(name, "U9"),
            other => panic!("expected unresolved ref, got {other}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let bad = CHAIN.replace("gate U2 INV", "gate U1 INV");
        assert!(matches!(
            parse_circuit(&bad, LIB, SPF).unwrap_err(),
            ParseError::DuplicateId { .. }
        ));
    }

    #[test]
    fn cycle_detected() {
        let bad = "\
clock 100
port_in a
port_out z
gate U1 INV 0 1.0 1.0
gate U2 INV 0 3.0 1.0
net n0 a U1
net n1 U1 U2
net nb U2 U1
net n2 U2 z
";
        let err = parse_circuit(bad, LIB, "").unwrap_err();
        assert!(matches!(err, ParseError::CyclicGraph { .. }));
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        let bad = CHAIN.replace("gate U1 INV 0 1.0 1.0", "gate U1 INV x 1.0 1.0");
        match parse_circuit(&bad, LIB, SPF).unwrap_err() {
            ParseError::Syntax { line, col, .. } => {
                assert_eq!(line, 5);
                assert!(col > 1);
            }
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn spf_defaults_missing_nets_to_zero() {
        let (g, _) = parse_circuit(CHAIN, LIB, "net n1 R=0.5 C=4\n").unwrap();
        assert_eq!(g.nets[0].wire_res, 0.0);
        assert_eq!(g.nets[0].wire_cap, 0.0);
        assert_eq!(g.nets[1].wire_res, 0.5);
    }
}
