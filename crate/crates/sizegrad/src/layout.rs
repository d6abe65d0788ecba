//! Multi-scale physical feature grids: gate density, RUDY-style wire
//! congestion, bilinear upsampling, per-cell scale attention, gate-wise
//! masking, and the density/congestion wire-delay multiplier that stands in
//! for re-placement and re-routing after a resize.

use crate::model::{CellLibrary, CircuitGraph, PinRef, SizingAssignment};
use crate::nn::ConvStack;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("gate '{0}' placed outside the die box")]
    GateOutsideDie(String),
    #[error("gate '{0}' has an empty footprint")]
    EmptyFootprint(String),
    #[error("no scales configured")]
    NoScales,
}

/// Layout model knobs. `alpha`/`beta`/`density_threshold` parameterize the
/// resize penalty `m = 1 + alpha·congestion + beta·max(0, density - d0)`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LayoutConfig {
    /// Grid scales, ascending powers of two; the largest is the main scale.
    pub scales: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub density_threshold: f64,
    /// Routing capacity in wire-µm per µm² per direction; normalizes RUDY
    /// demand into a utilization.
    pub congestion_capacity: f64,
    /// Minimum net bounding-box extent in µm, so zero-span nets still have a
    /// well-defined demand footprint.
    pub bbox_pad: f64,
    /// When false every multiplier is exactly 1 (physical awareness off).
    pub enabled: bool,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            scales: vec![1, 2, 4, 8, 16, 32, 64],
            alpha: 0.5,
            beta: 1.0,
            density_threshold: 0.8,
            congestion_capacity: 0.5,
            bbox_pad: 1.0,
            enabled: true,
        }
    }
}

/// Axis-aligned rectangle in µm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }
    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
    fn overlap(&self, other: &Rect) -> f64 {
        let w = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let h = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        w * h
    }
    fn contains(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 - 1e-9
            && other.y0 >= self.y0 - 1e-9
            && other.x1 <= self.x1 + 1e-9
            && other.y1 <= self.y1 + 1e-9
    }
}

/// One M×M channel of dimensionless cell values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub m: usize,
    pub cells: Vec<f64>,
}

impl FeatureGrid {
    pub fn zeros(m: usize) -> Self {
        FeatureGrid {
            m,
            cells: vec![0.0; m * m],
        }
    }
    pub fn constant(m: usize, v: f64) -> Self {
        FeatureGrid {
            m,
            cells: vec![v; m * m],
        }
    }
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.cells[y * self.m + x]
    }
    pub fn at_mut(&mut self, x: usize, y: usize) -> &mut f64 {
        &mut self.cells[y * self.m + x]
    }
}

/// The three physical channels at one scale.
#[derive(Debug, Clone)]
pub struct ScaleGrids {
    pub scale: usize,
    pub density: FeatureGrid,
    pub h_congestion: FeatureGrid,
    pub v_congestion: FeatureGrid,
}

/// All configured scales over one shared die box.
#[derive(Debug, Clone)]
pub struct LayoutGrids {
    pub die: Rect,
    pub per_scale: Vec<ScaleGrids>,
}

impl LayoutGrids {
    pub fn main(&self) -> &ScaleGrids {
        self.per_scale.last().expect("at least one scale")
    }
}

/// Square footprint of side `sqrt(area)` centered on the gate's placement.
pub fn gate_footprint(
    graph: &CircuitGraph,
    library: &CellLibrary,
    assignment: &SizingAssignment,
    gate: usize,
) -> Rect {
    let g = &graph.gates[gate];
    let area = library.cell(g.cell).variants[assignment.of(gate)].area;
    let half = area.sqrt() * 0.5;
    Rect {
        x0: g.x - half,
        y0: g.y - half,
        x1: g.x + half,
        y1: g.y + half,
    }
}

/// Die box derived from gate footprints at the given assignment, expanded to
/// nonzero extent.
pub fn derive_die(
    graph: &CircuitGraph,
    library: &CellLibrary,
    assignment: &SizingAssignment,
) -> Rect {
    let mut die = Rect {
        x0: f64::INFINITY,
        y0: f64::INFINITY,
        x1: f64::NEG_INFINITY,
        y1: f64::NEG_INFINITY,
    };
    for gi in 0..graph.gates.len() {
        // Size the bound by the largest variant so one die covers every
        // assignment of the same circuit.
        let g = &graph.gates[gi];
        let max_area = library
            .cell(g.cell)
            .variants
            .iter()
            .map(|v| v.area)
            .fold(0.0, f64::max);
        let half = max_area.sqrt() * 0.5;
        die.x0 = die.x0.min(g.x - half);
        die.y0 = die.y0.min(g.y - half);
        die.x1 = die.x1.max(g.x + half);
        die.y1 = die.y1.max(g.y + half);
        let _ = assignment;
    }
    if !die.x0.is_finite() {
        return Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
        };
    }
    if die.width() <= 0.0 {
        die.x1 = die.x0 + 1.0;
    }
    if die.height() <= 0.0 {
        die.y1 = die.y0 + 1.0;
    }
    die
}

fn cell_rect(die: &Rect, m: usize, x: usize, y: usize) -> Rect {
    let cw = die.width() / m as f64;
    let ch = die.height() / m as f64;
    Rect {
        x0: die.x0 + x as f64 * cw,
        y0: die.y0 + y as f64 * ch,
        x1: die.x0 + (x + 1) as f64 * cw,
        y1: die.y0 + (y + 1) as f64 * ch,
    }
}

/// Cells of an M-grid covered by `r`, clamped to the die.
fn covered_cells(die: &Rect, m: usize, r: &Rect) -> Vec<(usize, usize)> {
    let cw = die.width() / m as f64;
    let ch = die.height() / m as f64;
    let x_lo = (((r.x0 - die.x0) / cw).floor() as isize).clamp(0, m as isize - 1) as usize;
    let x_hi = (((r.x1 - die.x0) / cw).ceil() as isize - 1).clamp(0, m as isize - 1) as usize;
    let y_lo = (((r.y0 - die.y0) / ch).floor() as isize).clamp(0, m as isize - 1) as usize;
    let y_hi = (((r.y1 - die.y0) / ch).ceil() as isize - 1).clamp(0, m as isize - 1) as usize;
    let mut out = Vec::new();
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            out.push((x, y));
        }
    }
    out
}

/// Rasterize density and congestion channels at every configured scale.
pub fn build_grids(
    graph: &CircuitGraph,
    library: &CellLibrary,
    assignment: &SizingAssignment,
    config: &LayoutConfig,
) -> Result<LayoutGrids, LayoutError> {
    let die = derive_die(graph, library, assignment);
    build_grids_in(graph, library, assignment, config, die)
}

pub fn build_grids_in(
    graph: &CircuitGraph,
    library: &CellLibrary,
    assignment: &SizingAssignment,
    config: &LayoutConfig,
    die: Rect,
) -> Result<LayoutGrids, LayoutError> {
    if config.scales.is_empty() {
        return Err(LayoutError::NoScales);
    }
    let footprints: Vec<Rect> = (0..graph.gates.len())
        .map(|gi| gate_footprint(graph, library, assignment, gi))
        .collect();
    for (gi, fp) in footprints.iter().enumerate() {
        if fp.area() > 0.0 && !die.contains(fp) {
            return Err(LayoutError::GateOutsideDie(graph.gates[gi].name.clone()));
        }
    }

    // Net bounding boxes over placed pins (ports carry no placement).
    let net_boxes: Vec<Option<Rect>> = graph
        .nets
        .iter()
        .map(|net| {
            let mut b: Option<Rect> = None;
            let mut add = |x: f64, y: f64| {
                b = Some(match b {
                    None => Rect {
                        x0: x,
                        y0: y,
                        x1: x,
                        y1: y,
                    },
                    Some(r) => Rect {
                        x0: r.x0.min(x),
                        y0: r.y0.min(y),
                        x1: r.x1.max(x),
                        y1: r.y1.max(y),
                    },
                });
            };
            for &p in net.drivers.iter().chain(&net.sinks) {
                if let PinRef::Gate(g) = p {
                    add(graph.gates[g].x, graph.gates[g].y);
                }
            }
            b
        })
        .collect();

    let mut per_scale = Vec::with_capacity(config.scales.len());
    for &m in &config.scales {
        let mut density = FeatureGrid::zeros(m);
        let mut h_congestion = FeatureGrid::zeros(m);
        let mut v_congestion = FeatureGrid::zeros(m);
        let cell_area = die.area() / (m * m) as f64;

        for fp in &footprints {
            if fp.area() <= 0.0 {
                continue;
            }
            for (x, y) in covered_cells(&die, m, fp) {
                let ov = fp.overlap(&cell_rect(&die, m, x, y));
                *density.at_mut(x, y) += ov / cell_area;
            }
        }

        for bbox in net_boxes.iter().flatten() {
            // Pad degenerate extents so demand per area stays finite; the
            // padded box is re-centered and clamped into the die.
            let w = bbox.width().max(config.bbox_pad);
            let h = bbox.height().max(config.bbox_pad);
            let cx = 0.5 * (bbox.x0 + bbox.x1);
            let cy = 0.5 * (bbox.y0 + bbox.y1);
            let padded = Rect {
                x0: (cx - 0.5 * w).max(die.x0),
                y0: (cy - 0.5 * h).max(die.y0),
                x1: (cx + 0.5 * w).min(die.x1),
                y1: (cy + 0.5 * h).min(die.y1),
            };
            if padded.area() <= 0.0 {
                continue;
            }
            // RUDY: horizontal wire length ~ width, spread over the box area,
            // normalized by per-direction routing capacity.
            let h_demand = 1.0 / h / config.congestion_capacity;
            let v_demand = 1.0 / w / config.congestion_capacity;
            for (x, y) in covered_cells(&die, m, &padded) {
                let ov = padded.overlap(&cell_rect(&die, m, x, y));
                *h_congestion.at_mut(x, y) += ov * h_demand / cell_area;
                *v_congestion.at_mut(x, y) += ov * v_demand / cell_area;
            }
        }

        per_scale.push(ScaleGrids {
            scale: m,
            density,
            h_congestion,
            v_congestion,
        });
    }

    Ok(LayoutGrids { die, per_scale })
}

/// Corner-aligned bilinear upsampling. Constants stay constant; a 2x2 ramp
/// becomes the same monotone ramp at any resolution.
pub fn upsample_bilinear(grid: &FeatureGrid, target: usize) -> FeatureGrid {
    assert!(
        target >= grid.m,
        "upsample target {target} below source {}",
        grid.m
    );
    assert!(grid.m.is_power_of_two() && target.is_power_of_two());
    if target == grid.m {
        return grid.clone();
    }
    let mut out = FeatureGrid::zeros(target);
    let src = grid.m;
    for y in 0..target {
        for x in 0..target {
            let (sx, sy) = if src == 1 {
                (0.0, 0.0)
            } else {
                (
                    x as f64 * (src - 1) as f64 / (target - 1) as f64,
                    y as f64 * (src - 1) as f64 / (target - 1) as f64,
                )
            };
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let x1 = (x0 + 1).min(src - 1);
            let y1 = (y0 + 1).min(src - 1);
            let fx = sx - x0 as f64;
            let fy = sy - y0 as f64;
            let top = grid.at(x0, y0) * (1.0 - fx) + grid.at(x1, y0) * fx;
            let bot = grid.at(x0, y1) * (1.0 - fx) + grid.at(x1, y1) * fx;
            *out.at_mut(x, y) = top * (1.0 - fy) + bot * fy;
        }
    }
    out
}

/// Per-cell softmax over the scale axis.
#[derive(Debug, Clone)]
pub struct ScaleAttention {
    /// One main-resolution weight grid per scale; weights sum to 1 per cell.
    pub weights: Vec<FeatureGrid>,
}

pub fn softmax_over_scales(logits: &[FeatureGrid]) -> ScaleAttention {
    assert!(!logits.is_empty());
    let m = logits[0].m;
    let mut weights: Vec<FeatureGrid> = logits.iter().map(|_| FeatureGrid::zeros(m)).collect();
    for i in 0..m * m {
        let max = logits
            .iter()
            .map(|g| g.cells[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|g| (g.cells[i] - max).exp()).collect();
        let denom: f64 = exps.iter().sum();
        for (w, e) in weights.iter_mut().zip(&exps) {
            w.cells[i] = e / denom;
        }
    }
    ScaleAttention { weights }
}

/// Upsample every scale's channels to the main resolution.
pub fn upsample_all(grids: &LayoutGrids) -> Vec<Vec<FeatureGrid>> {
    let main = grids.main().scale;
    grids
        .per_scale
        .iter()
        .map(|s| {
            vec![
                upsample_bilinear(&s.density, main),
                upsample_bilinear(&s.h_congestion, main),
                upsample_bilinear(&s.v_congestion, main),
            ]
        })
        .collect()
}

/// Attention over scales: concatenate every upsampled channel, run the logit
/// stack, softmax per cell across scales.
pub fn scale_attention(upsampled: &[Vec<FeatureGrid>], psi: &ConvStack) -> ScaleAttention {
    assert!(!upsampled.is_empty());
    let stacked: Vec<FeatureGrid> = upsampled.iter().flatten().cloned().collect();
    let logits = psi.apply(&stacked);
    assert_eq!(logits.len(), upsampled.len(), "one logit grid per scale");
    softmax_over_scales(&logits)
}

/// Attention-weighted sum of the upsampled per-scale channels.
pub fn aggregate_scales(
    upsampled: &[Vec<FeatureGrid>],
    attention: &ScaleAttention,
) -> Vec<FeatureGrid> {
    assert_eq!(upsampled.len(), attention.weights.len());
    let n_channels = upsampled[0].len();
    let m = attention.weights[0].m;
    (0..n_channels)
        .map(|c| {
            let mut h = FeatureGrid::zeros(m);
            for (per_scale, w) in upsampled.iter().zip(&attention.weights) {
                for i in 0..m * m {
                    h.cells[i] += w.cells[i] * per_scale[c].cells[i];
                }
            }
            h
        })
        .collect()
}

/// Footprint-overlap-weighted average of a main-scale map over the cells the
/// gate covers: the gate-wise mask.
pub fn gate_mask(
    graph: &CircuitGraph,
    library: &CellLibrary,
    assignment: &SizingAssignment,
    die: &Rect,
    map: &FeatureGrid,
    gate: usize,
) -> Result<f64, LayoutError> {
    let fp = gate_footprint(graph, library, assignment, gate);
    if fp.area() <= 0.0 {
        return Err(LayoutError::EmptyFootprint(graph.gates[gate].name.clone()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in covered_cells(die, map.m, &fp) {
        let ov = fp.overlap(&cell_rect(die, map.m, x, y));
        num += ov * map.at(x, y);
        den += ov;
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

fn cell_of_point(die: &Rect, m: usize, x: f64, y: f64) -> (usize, usize) {
    let cw = die.width() / m as f64;
    let ch = die.height() / m as f64;
    let cx = (((x - die.x0) / cw).floor() as isize).clamp(0, m as isize - 1) as usize;
    let cy = (((y - die.y0) / ch).floor() as isize).clamp(0, m as isize - 1) as usize;
    (cx, cy)
}

/// Wire-delay multiplier of one main-scale cell:
/// `1 + alpha·congestion + beta·max(0, density - d0)`.
pub fn cell_multiplier(config: &LayoutConfig, density: f64, congestion: f64) -> f64 {
    1.0 + config.alpha * congestion + config.beta * (density - config.density_threshold).max(0.0)
}

/// Per-net wire-delay multipliers at one assignment, taken at the driver
/// gate's main-scale cell. Port-driven nets and disabled physical awareness
/// give exactly 1.
pub fn net_multipliers(
    graph: &CircuitGraph,
    library: &CellLibrary,
    assignment: &SizingAssignment,
    config: &LayoutConfig,
) -> Result<Vec<f64>, LayoutError> {
    if !config.enabled {
        return Ok(vec![1.0; graph.nets.len()]);
    }
    let grids = build_grids(graph, library, assignment, config)?;
    Ok(multipliers_from_grids(graph, &grids, config))
}

pub fn multipliers_from_grids(
    graph: &CircuitGraph,
    grids: &LayoutGrids,
    config: &LayoutConfig,
) -> Vec<f64> {
    let main = grids.main();
    graph
        .nets
        .iter()
        .map(|net| match net.drivers.first() {
            Some(&PinRef::Gate(g)) => {
                let (cx, cy) =
                    cell_of_point(&grids.die, main.scale, graph.gates[g].x, graph.gates[g].y);
                let cong = 0.5 * (main.h_congestion.at(cx, cy) + main.v_congestion.at(cx, cy));
                cell_multiplier(config, main.density.at(cx, cy), cong)
            }
            _ => 1.0,
        })
        .collect()
}

/// Multiplier updates for the nets incident to one gate after a proposed
/// resize: the local density cells are recomputed with the new variant's
/// area.
pub fn resize_penalty(
    graph: &CircuitGraph,
    library: &CellLibrary,
    assignment: &SizingAssignment,
    config: &LayoutConfig,
    gate: usize,
    new_size: usize,
) -> Result<Vec<(usize, f64)>, LayoutError> {
    let mut proposed = assignment.clone();
    proposed.indices[gate] = new_size;
    let multipliers = net_multipliers(graph, library, &proposed, config)?;
    let mut incident: Vec<usize> = graph
        .fanin_nets(PinRef::Gate(gate))
        .iter()
        .chain(graph.fanout_nets(PinRef::Gate(gate)))
        .copied()
        .collect();
    incident.sort_unstable();
    incident.dedup();
    Ok(incident.into_iter().map(|ni| (ni, multipliers[ni])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cell, CellVariant, Gate, Net, Port, PortDir};
    use rand::SeedableRng;

    fn lib_with_areas(areas: &[f64]) -> CellLibrary {
        CellLibrary::new(vec![Cell {
            name: "INV".into(),
            variants: areas
                .iter()
                .enumerate()
                .map(|(i, &a)| CellVariant {
                    size_index: i,
                    intrinsic_delay: 10.0 - i as f64,
                    drive_resistance: 2.0 / (i + 1) as f64,
                    input_pin_cap: 2.0 + i as f64,
                    area: a,
                })
                .collect(),
        }])
    }

    fn graph_with_gates(positions: &[(f64, f64)]) -> CircuitGraph {
        let gates: Vec<Gate> = positions
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Gate {
                name: format!("U{i}"),
                cell: 0,
                size_index: 0,
                x,
                y,
            })
            .collect();
        let ports = vec![
            Port {
                name: "a".into(),
                dir: PortDir::Input,
            },
            Port {
                name: "z".into(),
                dir: PortDir::Output,
            },
        ];
        let mut nets = vec![Net {
            name: "n_in".into(),
            drivers: vec![PinRef::Port(0)],
            sinks: vec![PinRef::Gate(0)],
            wire_res: 0.1,
            wire_cap: 1.0,
        }];
        for i in 1..positions.len() {
            nets.push(Net {
                name: format!("n{i}"),
                drivers: vec![PinRef::Gate(i - 1)],
                sinks: vec![PinRef::Gate(i)],
                wire_res: 0.1,
                wire_cap: 1.0,
            });
        }
        nets.push(Net {
            name: "n_out".into(),
            drivers: vec![PinRef::Gate(positions.len() - 1)],
            sinks: vec![PinRef::Port(1)],
            wire_res: 0.1,
            wire_cap: 1.0,
        });
        CircuitGraph::new("layout_test".into(), ports, gates, nets, 100.0)
    }

    fn cfg(scales: Vec<usize>) -> LayoutConfig {
        LayoutConfig {
            scales,
            ..LayoutConfig::default()
        }
    }

    #[test]
    fn single_gate_density_is_area_over_die_area() {
        let lib = lib_with_areas(&[4.0]);
        let g = graph_with_gates(&[(5.0, 5.0)]);
        let a = SizingAssignment::initial(&g);
        let die = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 8.0,
            y1: 8.0,
        };
        let grids = build_grids_in(&g, &lib, &a, &cfg(vec![1]), die).unwrap();
        assert!((grids.per_scale[0].density.at(0, 0) - 4.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn colocated_gates_double_their_cell() {
        let lib = lib_with_areas(&[1.0]);
        let g = graph_with_gates(&[(2.5, 2.5), (2.5, 2.5)]);
        let a = SizingAssignment::initial(&g);
        let die = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 8.0,
            y1: 8.0,
        };
        let grids = build_grids_in(&g, &lib, &a, &cfg(vec![2]), die).unwrap();
        let d = &grids.per_scale[0].density;
        let cell_area = 16.0;
        assert!((d.at(0, 0) - 2.0 / cell_area).abs() < 1e-12);
        assert_eq!(d.at(1, 0), 0.0);
        assert_eq!(d.at(1, 1), 0.0);
    }

    #[test]
    fn density_conserves_total_gate_area() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let lib = lib_with_areas(&[1.0, 2.0, 3.5]);
        let positions: Vec<(f64, f64)> = (0..12)
            .map(|_| (rng.gen_range(2.0..30.0), rng.gen_range(2.0..30.0)))
            .collect();
        let g = graph_with_gates(&positions);
        let mut a = SizingAssignment::initial(&g);
        for i in 0..a.indices.len() {
            a.indices[i] = rng.gen_range(0..3);
        }
        let config = cfg(vec![1, 2, 4, 8, 16]);
        let grids = build_grids(&g, &lib, &a, &config).unwrap();
        let total_area: f64 = (0..g.gates.len())
            .map(|gi| lib.cell(0).variants[a.of(gi)].area)
            .sum();
        for s in &grids.per_scale {
            let cell_area = grids.die.area() / (s.scale * s.scale) as f64;
            let sum: f64 = s.density.cells.iter().map(|d| d * cell_area).sum();
            assert!(
                (sum - total_area).abs() / total_area < 1e-6,
                "scale {} sums {} vs {}",
                s.scale,
                sum,
                total_area
            );
        }
    }

    #[test]
    fn zero_span_net_contributes_nothing_far_away() {
        let lib = lib_with_areas(&[1.0]);
        // Two co-located gates: their net bbox is a point, padded locally.
        let g = graph_with_gates(&[(2.0, 2.0), (2.0, 2.0)]);
        let a = SizingAssignment::initial(&g);
        let die = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 32.0,
            y1: 32.0,
        };
        let grids = build_grids_in(&g, &lib, &a, &cfg(vec![8]), die).unwrap();
        let h = &grids.per_scale[0].h_congestion;
        // Far corner cell sees nothing.
        assert_eq!(h.at(7, 7), 0.0);
        assert!(h.at(0, 0) > 0.0);
    }

    #[test]
    fn upsample_keeps_constants() {
        let g = FeatureGrid::constant(2, 0.3);
        let up = upsample_bilinear(&g, 8);
        assert!(up.cells.iter().all(|&v| (v - 0.3).abs() < 1e-12));
        let single = FeatureGrid::constant(1, 0.7);
        let up = upsample_bilinear(&single, 4);
        assert!(up.cells.iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn upsample_ramp_rows() {
        let mut g = FeatureGrid::zeros(2);
        *g.at_mut(1, 0) = 1.0;
        *g.at_mut(1, 1) = 1.0;
        let up = upsample_bilinear(&g, 4);
        let want = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for y in 0..4 {
            for x in 0..4 {
                assert!((up.at(x, y) - want[x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_uniform_and_closed_form() {
        let l = vec![
            FeatureGrid::constant(2, 1.0),
            FeatureGrid::constant(2, 1.0),
            FeatureGrid::constant(2, 1.0),
        ];
        let att = softmax_over_scales(&l);
        for w in &att.weights {
            assert!(w.cells.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-12));
        }

        let one = softmax_over_scales(&[FeatureGrid::constant(2, 5.0)]);
        assert!(one.weights[0].cells.iter().all(|&v| v == 1.0));

        let two = softmax_over_scales(&[
            FeatureGrid::constant(1, 0.0),
            FeatureGrid::constant(1, 3f64.ln()),
        ]);
        assert!((two.weights[0].at(0, 0) - 0.25).abs() < 1e-12);
        assert!((two.weights[1].at(0, 0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn attention_weights_sum_to_one() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(4);
        let psi = ConvStack::seeded(6, 4, 2, &mut rng);
        let upsampled = vec![
            vec![
                FeatureGrid::constant(4, 0.2),
                FeatureGrid::constant(4, 0.4),
                FeatureGrid::constant(4, 0.1),
            ],
            vec![
                FeatureGrid::constant(4, 0.9),
                FeatureGrid::constant(4, 0.0),
                FeatureGrid::constant(4, 0.3),
            ],
        ];
        let att = scale_attention(&upsampled, &psi);
        for i in 0..16 {
            let s: f64 = att.weights.iter().map(|w| w.cells[i]).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn aggregate_one_hot_attention_picks_that_scale() {
        let upsampled = vec![
            vec![FeatureGrid::constant(2, 0.1)],
            vec![FeatureGrid::constant(2, 0.9)],
        ];
        let att = ScaleAttention {
            weights: vec![FeatureGrid::constant(2, 0.0), FeatureGrid::constant(2, 1.0)],
        };
        let h = aggregate_scales(&upsampled, &att);
        assert!(h[0].cells.iter().all(|&v| (v - 0.9).abs() < 1e-12));

        let uniform = ScaleAttention {
            weights: vec![FeatureGrid::constant(2, 0.5), FeatureGrid::constant(2, 0.5)],
        };
        let same = vec![
            vec![FeatureGrid::constant(2, 0.4)],
            vec![FeatureGrid::constant(2, 0.4)],
        ];
        let h = aggregate_scales(&same, &uniform);
        assert!(h[0].cells.iter().all(|&v| (v - 0.4).abs() < 1e-12));
    }

    #[test]
    fn aggregate_invariant_under_scale_permutation() {
        let a = vec![FeatureGrid::constant(2, 0.25)];
        let b = vec![FeatureGrid::constant(2, 0.75)];
        let wa = FeatureGrid::constant(2, 0.3);
        let wb = FeatureGrid::constant(2, 0.7);
        let h1 = aggregate_scales(
            &[a.clone(), b.clone()],
            &ScaleAttention {
                weights: vec![wa.clone(), wb.clone()],
            },
        );
        let h2 = aggregate_scales(
            &[b, a],
            &ScaleAttention {
                weights: vec![wb, wa],
            },
        );
        for (x, y) in h1[0].cells.iter().zip(&h2[0].cells) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gate_mask_averages_covered_cells() {
        let lib = lib_with_areas(&[4.0]);
        // Footprint 2x2 centered on the boundary between two 4x4 cells of an
        // 8x8 die at scale 2.
        let g = graph_with_gates(&[(4.0, 2.0)]);
        let a = SizingAssignment::initial(&g);
        let die = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 8.0,
            y1: 8.0,
        };
        let mut map = FeatureGrid::zeros(2);
        *map.at_mut(0, 0) = 0.2;
        *map.at_mut(1, 0) = 0.4;
        let h = gate_mask(&g, &lib, &a, &die, &map, 0).unwrap();
        assert!((h - 0.3).abs() < 1e-12);
    }

    #[test]
    fn multiplier_formula_cases() {
        let config = LayoutConfig::default();
        assert_eq!(cell_multiplier(&config, 0.5, 0.0), 1.0);
        assert!((cell_multiplier(&config, 1.0, 0.0) - 1.2).abs() < 1e-12);
        assert!(cell_multiplier(&config, 0.5, 0.4) > 1.0);
    }

    #[test]
    fn multiplier_monotone_in_gate_area() {
        let lib = lib_with_areas(&[1.0, 4.0, 9.0]);
        let g = graph_with_gates(&[(2.0, 2.0), (2.5, 2.0)]);
        let mut a = SizingAssignment::initial(&g);
        let config = cfg(vec![1, 2, 4]);
        let mut last = 0.0;
        for s in 0..3 {
            a.indices[0] = s;
            let ms = net_multipliers(&g, &lib, &a, &config).unwrap();
            assert!(ms.iter().all(|&m| m >= 1.0));
            let m0 = ms[1];
            assert!(m0 >= last);
            last = m0;
        }
        assert!(last > 1.0, "overfilled cell should be penalized");
    }

    #[test]
    fn resize_penalty_covers_incident_nets_and_shrinks_on_downsize() {
        let lib = lib_with_areas(&[1.0, 4.0, 9.0]);
        let g = graph_with_gates(&[(2.0, 2.0), (2.5, 2.0)]);
        let mut a = SizingAssignment::initial(&g);
        a.indices[0] = 2;
        a.indices[1] = 2;
        let config = cfg(vec![1, 2]);
        let up = resize_penalty(&g, &lib, &a, &config, 0, 2).unwrap();
        let down = resize_penalty(&g, &lib, &a, &config, 0, 0).unwrap();
        assert_eq!(up.len(), 2);
        for ((ni_u, mu), (ni_d, md)) in up.iter().zip(&down) {
            assert_eq!(ni_u, ni_d);
            assert!(md <= mu, "downsizing must not raise the multiplier");
        }
        assert!(down.iter().zip(&up).any(|((_, d), (_, u))| d < u));
    }

    #[test]
    fn disabled_config_gives_unit_multipliers() {
        let lib = lib_with_areas(&[1.0, 9.0]);
        let g = graph_with_gates(&[(2.0, 2.0), (2.0, 2.0)]);
        let mut a = SizingAssignment::initial(&g);
        a.indices = vec![1, 1];
        let config = LayoutConfig {
            enabled: false,
            ..cfg(vec![1, 2])
        };
        let ms = net_multipliers(&g, &lib, &a, &config).unwrap();
        assert!(ms.iter().all(|&m| m == 1.0));
    }

    #[test]
    fn gate_outside_die_is_an_error() {
        let lib = lib_with_areas(&[4.0]);
        let g = graph_with_gates(&[(20.0, 20.0)]);
        let a = SizingAssignment::initial(&g);
        let die = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 8.0,
            y1: 8.0,
        };
        assert!(matches!(
            build_grids_in(&g, &lib, &a, &cfg(vec![2]), die),
            Err(LayoutError::GateOutsideDie(_))
        ));
    }
}
