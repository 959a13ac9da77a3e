//! Seeded dataset generation and schematic rendering.
//!
//! A dataset is a set of circuits sampled uniformly without replacement from
//! the enumerated coupling-triple space, each carrying its transfer signature,
//! a canonical structure-info prompt line and a deterministic schematic SVG.
//! Identical `(n, seed, catalog, frequency)` inputs reproduce byte-identical
//! manifests; the shuffle runs on a pinned ChaCha stream with an in-crate
//! rejection sampler so no library upgrade can silently reorder it.
//!
//! Output layout: `manifest.json` plus `svg/<id>.svg`, with manifest record
//! fields `id, seed, prompt, circuit, signature, svg_path, format_version`.

use crate::catalog::{Catalog, ComponentKind};
use crate::design::{circuit_for_triple, component_budget_of, triple_count, DesignError};
use crate::lattice::{ChainCircuit, CircuitError};
use crate::signals::{signature, TransferSignature};
use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Manifest format identifier, bumped on any prompt or schema change.
pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("requested {requested} records, space holds {available}")]
    SpaceTooSmall { requested: usize, available: usize },
    #[error("only {got} of {requested} candidates were solvable")]
    SpaceExhausted { requested: usize, got: usize },
}

/// One dataset entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub seed: u64,
    pub prompt: String,
    pub circuit: ChainCircuit,
    pub signature: TransferSignature,
    pub svg_path: String,
    pub format_version: String,
}

/// Scientific-notation complex entry: three significant digits, lowercase
/// exponent, explicit sign on the imaginary part (`8.57e-18+7.06e-17i`).
fn format_complex(c: Complex64) -> String {
    let re = if c.re == 0.0 { 0.0 } else { c.re };
    let im = if c.im == 0.0 { 0.0 } else { c.im };
    let sign = if im < 0.0 { '-' } else { '+' };
    format!("{re:.2e}{sign}{:.2e}i", im.abs())
}

/// Minimal decimal rendering for budget multiples (`6`, `1.5`).
fn format_multiple(v: f64) -> String {
    format!("{v}")
}

/// Canonical single-line structure-info prompt for a record.
pub fn prompt_text(
    signature: &TransferSignature,
    budget: (f64, f64),
    cells: usize,
    couplings: usize,
) -> String {
    format!(
        "transfer function coefficient vector [{}, {}, {}]; node connection components {}C + {}R; circuit composition: {} C3 units, {} couplings",
        format_complex(signature.vec[0]),
        format_complex(signature.vec[1]),
        format_complex(signature.vec[2]),
        format_multiple(budget.0),
        format_multiple(budget.1),
        cells,
        couplings,
    )
}

/// Parse a prompt line back into its signature and budget (inverse of
/// [`prompt_text`] up to the 3-significant-digit rounding).
pub fn parse_prompt(text: &str) -> Option<(TransferSignature, (f64, f64))> {
    let vector = text.strip_prefix("transfer function coefficient vector [")?;
    let (vector, rest) = vector.split_once("]; node connection components ")?;
    let (budget_text, _) = rest.split_once("; circuit composition:")?;

    let mut entries = vector.split(", ");
    let mut vec = [Complex64::new(0.0, 0.0); 3];
    for slot in vec.iter_mut() {
        let entry = entries.next()?;
        let body = entry.strip_suffix('i')?;
        // The imaginary part starts at the last sign that is not an exponent
        // sign and not the leading real sign.
        let split = body
            .char_indices()
            .rev()
            .find(|(idx, ch)| {
                (*ch == '+' || *ch == '-') && *idx > 0 && body.as_bytes()[idx - 1] != b'e'
            })
            .map(|(idx, _)| idx)?;
        let re: f64 = body[..split].parse().ok()?;
        let im: f64 = body[split..].parse().ok()?;
        *slot = Complex64::new(re, im);
    }
    if entries.next().is_some() {
        return None;
    }

    let (cap_text, res_text) = budget_text.split_once("C + ")?;
    let res_text = res_text.strip_suffix('R')?;
    let cap: f64 = cap_text.parse().ok()?;
    let res: f64 = res_text.parse().ok()?;
    Some((TransferSignature { vec }, (cap, res)))
}

/// Unbiased bounded sample from the raw ChaCha stream (modulo rejection).
fn next_below(rng: &mut ChaCha12Rng, bound: u32) -> u32 {
    let zone = u32::MAX - (u32::MAX % bound);
    loop {
        let x = rng.next_u32();
        if x < zone {
            return x % bound;
        }
    }
}

/// Sample `n` distinct solvable circuits from the triple space, uniformly
/// without replacement via a seeded shuffle. Resonant candidates are skipped
/// (logged) and the walk continues down the shuffled order.
pub fn generate_dataset(
    n: usize,
    seed: u64,
    catalog: &Catalog,
    frequency_hz: f64,
) -> Result<Vec<DatasetRecord>, DatasetError> {
    let available = triple_count(catalog);
    if available == 0 {
        return Err(DesignError::CatalogTooSmall(catalog.len()).into());
    }
    if n > available {
        return Err(DatasetError::SpaceTooSmall {
            requested: n,
            available,
        });
    }
    let s = crate::s_at_hz(frequency_hz);

    let mut order: Vec<u32> = (0..available as u32).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for i in (1..order.len()).rev() {
        let j = next_below(&mut rng, (i + 1) as u32) as usize;
        order.swap(i, j);
    }

    let mut records = Vec::with_capacity(n);
    let entry_count = catalog.len();
    for &flat in &order {
        if records.len() == n {
            break;
        }
        let triple = crate::design::triple_at(entry_count, flat as usize);
        let circuit = circuit_for_triple(catalog, &triple);
        let sig = match signature(&circuit, catalog, s) {
            Ok(sig) if sig.is_finite() => sig,
            Ok(_) | Err(_) => {
                log::warn!(
                    "skipping resonant candidate {:?} at {frequency_hz} Hz",
                    circuit.couplings
                );
                continue;
            }
        };
        let budget = component_budget_of(&circuit, catalog)?;
        let idx = records.len();
        let id = format!("c3-{idx:05}");
        records.push(DatasetRecord {
            svg_path: format!("svg/{id}.svg"),
            prompt: prompt_text(&sig, budget, circuit.cells, circuit.couplings.len()),
            circuit,
            signature: sig,
            seed,
            format_version: FORMAT_VERSION.to_string(),
            id,
        });
    }
    if records.len() < n {
        return Err(DatasetError::SpaceExhausted {
            requested: n,
            got: records.len(),
        });
    }
    Ok(records)
}

/// Manifest text for a record list (a JSON array in record order).
pub fn manifest_json(records: &[DatasetRecord]) -> String {
    let mut text = serde_json::to_string_pretty(records).expect("records serialize");
    text.push('\n');
    text
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Write `manifest.json` and every record's schematic under `dir`.
pub fn write_dataset(
    records: &[DatasetRecord],
    dir: impl AsRef<Path>,
    catalog: &Catalog,
) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("svg"))?;
    std::fs::write(dir.join("manifest.json"), manifest_json(records))?;
    for record in records {
        let svg = render_svg(&record.circuit, catalog)?;
        std::fs::write(dir.join(&record.svg_path), svg)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Schematic rendering.
// ---------------------------------------------------------------------------

const CELL_DX: i64 = 240;
const MARGIN_X: i64 = 120;
const CELL_CY: i64 = 170;
const NODE_R: i64 = 5;

/// Node coordinates of one cell: node 1 on top, 2 bottom-left, 3
/// bottom-right.
fn node_pos(cell: usize, node: usize) -> (i64, i64) {
    let cx = MARGIN_X + CELL_DX * cell as i64;
    match node {
        0 => (cx, CELL_CY - 70),
        1 => (cx - 56, CELL_CY + 38),
        _ => (cx + 56, CELL_CY + 38),
    }
}

fn stroke_attrs(kind: ComponentKind) -> &'static str {
    match kind {
        ComponentKind::Capacitor => "",
        ComponentKind::Resistor => " stroke-dasharray=\"7 4\"",
        ComponentKind::Inductor => " stroke-dasharray=\"9 3 2 3\"",
    }
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn format_ground_multiple(v: f64) -> String {
    // Grounding deficits are sums/differences of small multiples; trim float
    // noise for the label only.
    let rounded = (v * 1e6).round() / 1e6;
    format!("{rounded}")
}

/// Deterministic schematic: triangles left to right, coupling wires per
/// pattern entry (solid capacitors, dashed resistors), arrowheads on the
/// directed branches of non-reciprocal patterns and on negative-admittance
/// branches, grounding glyphs under each cell. Identical circuits give
/// byte-identical documents.
pub fn render_svg(circuit: &ChainCircuit, catalog: &Catalog) -> Result<String, DatasetError> {
    circuit.validate(catalog)?;
    let cells = circuit.resolved_cells(catalog)?;
    let width = 2 * MARGIN_X + CELL_DX * (circuit.cells as i64 - 1);
    let height = 2 * CELL_CY;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" width=\"{width}\" height=\"{height}\">"
    );
    let _ = writeln!(
        svg,
        "  <defs>\n    <marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"7\" markerHeight=\"7\" orient=\"auto-start-reverse\">\n      <path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"#444444\"/>\n    </marker>\n  </defs>"
    );
    let _ = writeln!(
        svg,
        "  <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
    );

    for (m, cell) in cells.iter().enumerate() {
        let _ = writeln!(svg, "  <g id=\"cell-{m}\">");
        let tri_stroke = stroke_attrs(cell.triangle.kind);
        for (a, b) in [(0usize, 1usize), (1, 2), (2, 0)] {
            let (x1, y1) = node_pos(m, a);
            let (x2, y2) = node_pos(m, b);
            let _ = writeln!(
                svg,
                "    <line id=\"cell-{m}-edge-{a}{b}\" x1=\"{x1}\" y1=\"{y1}\" x2=\"{x2}\" y2=\"{y2}\" stroke=\"#222222\" stroke-width=\"2\"{tri_stroke}/>"
            );
        }
        for node in 0..3 {
            let (x, y) = node_pos(m, node);
            let _ = writeln!(
                svg,
                "    <circle id=\"cell-{m}-node-{}\" cx=\"{x}\" cy=\"{y}\" r=\"{NODE_R}\" fill=\"#222222\"/>",
                node + 1
            );
            let label_y = if node == 0 { y - 10 } else { y + 18 };
            let _ = writeln!(
                svg,
                "    <text x=\"{x}\" y=\"{label_y}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#222222\">{}</text>",
                node + 1
            );
        }
        // Grounding glyph and the per-cell shunt label; multiples are equal
        // across the three nodes for balanced circuits.
        let (gx, gy) = (MARGIN_X + CELL_DX * m as i64, CELL_CY + 72);
        let _ = writeln!(
            svg,
            "    <line x1=\"{gx}\" y1=\"{}\" x2=\"{gx}\" y2=\"{gy}\" stroke=\"#222222\" stroke-width=\"1.5\"/>",
            gy - 14
        );
        for (i, half) in [(0i64, 10i64), (5, 6), (10, 3)] {
            let y = gy + i;
            let _ = writeln!(
                svg,
                "    <line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#222222\" stroke-width=\"1.5\"/>",
                gx - half,
                gx + half
            );
        }
        let g = &cell.grounding[0];
        let label = format!(
            "gnd {}C + {}R",
            format_ground_multiple(g.cap_mult),
            format_ground_multiple(g.res_mult)
        );
        let _ = writeln!(
            svg,
            "    <text x=\"{gx}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" fill=\"#555555\">{}</text>",
            gy + 26,
            xml_escape(&label)
        );
        let _ = writeln!(svg, "  </g>");
    }

    for (m, id) in circuit.couplings.iter().enumerate() {
        let module = catalog.require(id).map_err(CircuitError::from)?;
        let _ = writeln!(
            svg,
            "  <g id=\"coupling-{m}\"><title>{}</title>",
            xml_escape(id)
        );
        for (p, (pattern, component)) in module.parts.iter().enumerate() {
            let dash = stroke_attrs(component.kind);
            let symmetric = pattern.is_symmetric();
            let entries = pattern.entries();
            for a in 0..3 {
                for b in 0..3 {
                    let value = entries[a][b];
                    if value == 0 {
                        continue;
                    }
                    // Symmetric patterns draw one wire per branch pair.
                    if symmetric && b < a {
                        continue;
                    }
                    let (x1, y1) = node_pos(m, a);
                    let (x2, y2) = node_pos(m + 1, b);
                    // Bow each part and wire differently so overlapping
                    // branches stay distinguishable.
                    let bow = 10 + 9 * p as i64 + 3 * (a as i64 - b as i64).abs();
                    let mx = (x1 + x2) / 2;
                    let my = (y1 + y2) / 2 - bow;
                    let directed = !symmetric;
                    let negative = value < 0;
                    let marker = if directed || negative {
                        " marker-end=\"url(#arrow)\""
                    } else {
                        ""
                    };
                    let class = if negative { " class=\"neg\"" } else { "" };
                    let _ = writeln!(
                        svg,
                        "    <path id=\"coupling-{m}-p{p}-w{a}{b}\" d=\"M {x1} {y1} Q {mx} {my} {x2} {y2}\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1.5\"{dash}{marker}{class}/>"
                    );
                }
            }
        }
        let _ = writeln!(svg, "  </g>");
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}
