//! Chain circuits of C3 triangle cells and their nodal admittance matrices.
//!
//! A [`ChainCircuit`] is N identical triangle cells joined by N-1 catalog
//! couplings. Assembly produces a block-tridiagonal 3N x 3N matrix: diagonal
//! blocks are the on-site triangle operator minus a per-node shunt, the upper
//! coupling block is the module's node matrix and the lower block is its
//! transpose.
//!
//! Per-node shunts (grounding) are auto-balanced so that every cell presents
//! the same diagonal block. The diagonal load a coupling places on its end
//! cells is counted per component kind from the signed row/column sums of the
//! combined pattern; a non-reciprocal (non-symmetric) combined pattern splits
//! its load evenly between the two sides.
//!
//! Circuit files are JSON:
//!
//! ```text
//! { "cells": 4,
//!   "triangle": { "kind": "C", "value": 2.7, "unit": "nF" },
//!   "couplings": ["s1p-CC-base", "s2p-CC-base", "is3p-CR-base"],
//!   "C0_nF": 2.7, "R0_kOhm": 1.0,
//!   "grounding": "auto" }
//! ```
//!
//! `grounding` may instead list `[capMult, resMult]` pairs for the 3 nodes of
//! every cell, as multiples of the reference admittances `s C0` and `1/R0`.

use crate::catalog::{Catalog, CatalogError, Component, ComponentKind};
use crate::spinspace::Mat3;
use crate::{DEFAULT_C0_NF, DEFAULT_R0_KOHM};
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{cells} cells need {} couplings, got {couplings}", cells - 1)]
    CellCount { cells: usize, couplings: usize },
    #[error("reference value {name} = {value} must be > 0")]
    BadReference { name: &'static str, value: f64 },
    #[error("triangle component must be a capacitor or an inductor")]
    BadTriangleKind,
    #[error("grounding lists {got} cells, circuit has {expected}")]
    GroundingLength { expected: usize, got: usize },
    #[error("grounding multiple at cell {cell}, node {node} must be finite and >= 0")]
    BadGrounding { cell: usize, node: usize },
    #[error("coupling `{0}` uses an inductive part; diagonal load balancing supports C and R parts only")]
    InductiveCoupling(String),
}

/// Extra shunt admittance at one node, in multiples of `s C0` and `1/R0`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NodeGrounding {
    pub cap_mult: f64,
    pub res_mult: f64,
}

/// Diagonal load a node receives from its attached couplings, in the same
/// multiples as [`NodeGrounding`].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NodeLoad {
    pub cap_mult: f64,
    pub res_mult: f64,
}

/// One triangle cell with resolved grounding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub triangle: Component,
    pub grounding: [NodeGrounding; 3],
}

/// Grounding policy of a circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum GroundingSpec {
    /// Balance shunts so all diagonal blocks are equal.
    Auto,
    /// Explicit per-cell, per-node multiples.
    Explicit(Vec<[NodeGrounding; 3]>),
}

/// A chain of C3 cells joined by catalog couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainCircuit {
    pub cells: usize,
    pub triangle: Component,
    pub couplings: Vec<String>,
    pub c0_nf: f64,
    pub r0_kohm: f64,
    pub grounding: GroundingSpec,
}

/// The triangle operator: each cell edge couples its two end nodes.
pub fn triangle_operator() -> Mat3 {
    Mat3::from_real([[-2.0, 1.0, 1.0], [1.0, -2.0, 1.0], [1.0, 1.0, -2.0]])
}

impl ChainCircuit {
    /// Chain with stock references (2.7 nF triangle and C0, 1 kOhm R0) and
    /// auto grounding; the cell count is one more than the couplings given.
    pub fn stock(couplings: Vec<String>) -> Self {
        ChainCircuit {
            cells: couplings.len() + 1,
            triangle: Component::capacitor_nf(DEFAULT_C0_NF),
            couplings,
            c0_nf: DEFAULT_C0_NF,
            r0_kohm: DEFAULT_R0_KOHM,
            grounding: GroundingSpec::Auto,
        }
    }

    /// Structural checks plus catalog resolution of every coupling id.
    pub fn validate(&self, catalog: &Catalog) -> Result<(), CircuitError> {
        self.validate_structure()?;
        for id in &self.couplings {
            catalog.require(id)?;
        }
        Ok(())
    }

    fn validate_structure(&self) -> Result<(), CircuitError> {
        if self.cells == 0 || self.couplings.len() + 1 != self.cells {
            return Err(CircuitError::CellCount {
                cells: self.cells,
                couplings: self.couplings.len(),
            });
        }
        if !(self.c0_nf.is_finite() && self.c0_nf > 0.0) {
            return Err(CircuitError::BadReference {
                name: "C0_nF",
                value: self.c0_nf,
            });
        }
        if !(self.r0_kohm.is_finite() && self.r0_kohm > 0.0) {
            return Err(CircuitError::BadReference {
                name: "R0_kOhm",
                value: self.r0_kohm,
            });
        }
        if self.triangle.kind == ComponentKind::Resistor {
            return Err(CircuitError::BadTriangleKind);
        }
        if !(self.triangle.value.is_finite() && self.triangle.value > 0.0) {
            return Err(CircuitError::BadReference {
                name: "triangle value",
                value: self.triangle.value,
            });
        }
        if let GroundingSpec::Explicit(cells) = &self.grounding {
            if cells.len() != self.cells {
                return Err(CircuitError::GroundingLength {
                    expected: self.cells,
                    got: cells.len(),
                });
            }
            for (ci, cell) in cells.iter().enumerate() {
                for (ni, g) in cell.iter().enumerate() {
                    let ok = g.cap_mult.is_finite()
                        && g.res_mult.is_finite()
                        && g.cap_mult >= 0.0
                        && g.res_mult >= 0.0;
                    if !ok {
                        return Err(CircuitError::BadGrounding { cell: ci, node: ni });
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether every coupling id is used at most once.
    pub fn has_distinct_couplings(&self) -> bool {
        let mut ids: Vec<&str> = self.couplings.iter().map(String::as_str).collect();
        ids.sort_unstable();
        ids.windows(2).all(|w| w[0] != w[1])
    }

    /// Cells with grounding resolved (balancing it first when `Auto`).
    pub fn resolved_cells(&self, catalog: &Catalog) -> Result<Vec<Cell>, CircuitError> {
        let grounds = match &self.grounding {
            GroundingSpec::Explicit(g) => g.clone(),
            GroundingSpec::Auto => balanced_grounding(self, catalog)?,
        };
        Ok(grounds
            .into_iter()
            .map(|grounding| Cell {
                triangle: self.triangle,
                grounding,
            })
            .collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CircuitError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CircuitError> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self, CircuitError> {
        let circuit: ChainCircuit = serde_json::from_str(text)?;
        circuit.validate_structure()?;
        Ok(circuit)
    }

    pub fn to_json_string(&self) -> Result<String, CircuitError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

#[derive(Serialize, Deserialize)]
struct TriangleFile {
    kind: String,
    value: f64,
    unit: String,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GroundingFile {
    Mode(String),
    Explicit(Vec<[[f64; 2]; 3]>),
}

#[derive(Serialize, Deserialize)]
struct CircuitFile {
    cells: usize,
    triangle: TriangleFile,
    couplings: Vec<String>,
    #[serde(rename = "C0_nF")]
    c0_nf: f64,
    #[serde(rename = "R0_kOhm")]
    r0_kohm: f64,
    grounding: GroundingFile,
}

impl Serialize for ChainCircuit {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let file = CircuitFile {
            cells: self.cells,
            triangle: TriangleFile {
                kind: self.triangle.kind.letter().to_string(),
                value: self.triangle.value,
                unit: self.triangle.kind.unit().to_string(),
            },
            couplings: self.couplings.clone(),
            c0_nf: self.c0_nf,
            r0_kohm: self.r0_kohm,
            grounding: match &self.grounding {
                GroundingSpec::Auto => GroundingFile::Mode("auto".to_string()),
                GroundingSpec::Explicit(cells) => GroundingFile::Explicit(
                    cells
                        .iter()
                        .map(|c| {
                            [
                                [c[0].cap_mult, c[0].res_mult],
                                [c[1].cap_mult, c[1].res_mult],
                                [c[2].cap_mult, c[2].res_mult],
                            ]
                        })
                        .collect(),
                ),
            },
        };
        file.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ChainCircuit {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = CircuitFile::deserialize(deserializer)?;
        let kind = ComponentKind::from_letter(&file.triangle.kind)
            .map_err(|e| D::Error::custom(e.to_string()))?;
        if file.triangle.unit != kind.unit() {
            return Err(D::Error::custom(format!(
                "triangle unit `{}` does not match kind `{}`",
                file.triangle.unit, file.triangle.kind
            )));
        }
        let grounding = match file.grounding {
            GroundingFile::Mode(mode) if mode == "auto" => GroundingSpec::Auto,
            GroundingFile::Mode(mode) => {
                return Err(D::Error::custom(format!(
                    "unknown grounding mode `{mode}` (expected \"auto\" or explicit multiples)"
                )))
            }
            GroundingFile::Explicit(cells) => GroundingSpec::Explicit(
                cells
                    .into_iter()
                    .map(|c| {
                        [
                            NodeGrounding {
                                cap_mult: c[0][0],
                                res_mult: c[0][1],
                            },
                            NodeGrounding {
                                cap_mult: c[1][0],
                                res_mult: c[1][1],
                            },
                            NodeGrounding {
                                cap_mult: c[2][0],
                                res_mult: c[2][1],
                            },
                        ]
                    })
                    .collect(),
            ),
        };
        Ok(ChainCircuit {
            cells: file.cells,
            triangle: Component {
                kind,
                value: file.triangle.value,
            },
            couplings: file.couplings,
            c0_nf: file.c0_nf,
            r0_kohm: file.r0_kohm,
            grounding,
        })
    }
}

/// Per-kind combined pattern of one coupling, weighted by each part's value
/// multiple relative to the circuit references.
fn kind_matrices(
    module_id: &str,
    parts: &[(crate::catalog::ConnectionPattern, Component)],
    c0_nf: f64,
    r0_kohm: f64,
) -> Result<[[[f64; 3]; 3]; 2], CircuitError> {
    let mut out = [[[0.0f64; 3]; 3]; 2]; // [cap, res]
    for (pattern, component) in parts {
        let (slot, mult) = match component.kind {
            ComponentKind::Capacitor => (0, component.value / c0_nf),
            // Resistive load counts multiples of the reference conductance.
            ComponentKind::Resistor => (1, r0_kohm / component.value),
            ComponentKind::Inductor => {
                return Err(CircuitError::InductiveCoupling(module_id.to_string()))
            }
        };
        let e = pattern.entries();
        for i in 0..3 {
            for j in 0..3 {
                out[slot][i][j] += mult * e[i][j] as f64;
            }
        }
    }
    Ok(out)
}

fn is_symmetric(m: &[[f64; 3]; 3]) -> bool {
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for i in 0..3 {
        for j in (i + 1)..3 {
            if (m[i][j] - m[j][i]).abs() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

/// Diagonal load every node receives from the couplings attached to its cell.
///
/// Reciprocal (symmetric) combined patterns load the left cell with their row
/// sums and the right cell with their column sums; non-reciprocal patterns
/// split the same totals evenly across the two sides.
pub fn coupling_node_loads(
    circuit: &ChainCircuit,
    catalog: &Catalog,
) -> Result<Vec<[NodeLoad; 3]>, CircuitError> {
    circuit.validate(catalog)?;
    let mut loads = vec![[NodeLoad::default(); 3]; circuit.cells];
    for (m, id) in circuit.couplings.iter().enumerate() {
        let module = catalog.require(id)?;
        let mats = kind_matrices(id, &module.parts, circuit.c0_nf, circuit.r0_kohm)?;
        for (slot, mat) in mats.iter().enumerate() {
            let weight = if is_symmetric(mat) { 1.0 } else { 0.5 };
            for node in 0..3 {
                let row: f64 = mat[node].iter().sum();
                let col: f64 = (0..3).map(|i| mat[i][node]).sum();
                let (left, right) = (weight * row, weight * col);
                match slot {
                    0 => {
                        loads[m][node].cap_mult += left;
                        loads[m + 1][node].cap_mult += right;
                    }
                    _ => {
                        loads[m][node].res_mult += left;
                        loads[m + 1][node].res_mult += right;
                    }
                }
            }
        }
    }
    Ok(loads)
}

fn balanced_grounding(
    circuit: &ChainCircuit,
    catalog: &Catalog,
) -> Result<Vec<[NodeGrounding; 3]>, CircuitError> {
    let loads = coupling_node_loads(circuit, catalog)?;
    let mut max_cap = 0.0f64;
    let mut max_res = 0.0f64;
    for cell in &loads {
        for load in cell {
            max_cap = max_cap.max(load.cap_mult);
            max_res = max_res.max(load.res_mult);
        }
    }
    Ok(loads
        .iter()
        .map(|cell| {
            let mut g = [NodeGrounding::default(); 3];
            for (node, load) in cell.iter().enumerate() {
                g[node] = NodeGrounding {
                    cap_mult: max_cap - load.cap_mult,
                    res_mult: max_res - load.res_mult,
                };
            }
            g
        })
        .collect())
}

/// Fill in explicit grounding multiples that equalize every cell's diagonal
/// block; deficits are non-negative by the max construction.
pub fn equalize_onsite(
    circuit: &ChainCircuit,
    catalog: &Catalog,
) -> Result<ChainCircuit, CircuitError> {
    let mut out = circuit.clone();
    out.grounding = GroundingSpec::Explicit(balanced_grounding(circuit, catalog)?);
    Ok(out)
}

/// Diagonal block of one cell: triangle operator minus the per-node shunt
/// (coupling load plus grounding).
pub fn onsite_block(
    cell: &Cell,
    coupling_load: &[NodeLoad; 3],
    c0_nf: f64,
    r0_kohm: f64,
    s: Complex64,
) -> Result<Mat3, CircuitError> {
    let y_tri = cell.triangle.admittance(s)?;
    let y_cap = s * (c0_nf * 1e-9);
    let y_res = Complex64::new(1.0 / (r0_kohm * 1e3), 0.0);
    let mut block = triangle_operator().scale(y_tri);
    for node in 0..3 {
        let cap = coupling_load[node].cap_mult + cell.grounding[node].cap_mult;
        let res = coupling_load[node].res_mult + cell.grounding[node].res_mult;
        block.0[node][node] -= cap * y_cap + res * y_res;
    }
    Ok(block)
}

/// Dense nodal admittance matrix of an assembled circuit.
///
/// Assembly only ever writes the 3x3 tridiagonal blocks; everything else is
/// exactly zero.
#[derive(Clone, Debug)]
pub struct AdmittanceMatrix {
    pub frequency: Complex64,
    size: usize,
    data: Vec<Complex64>,
}

impl AdmittanceMatrix {
    pub fn zero(size: usize, frequency: Complex64) -> Self {
        AdmittanceMatrix {
            frequency,
            size,
            data: vec![Complex64::new(0.0, 0.0); size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.size + col] = value;
    }

    pub fn set_block(&mut self, block_row: usize, block_col: usize, block: &Mat3) {
        for i in 0..3 {
            for j in 0..3 {
                self.set(3 * block_row + i, 3 * block_col + j, block.0[i][j]);
            }
        }
    }

    pub fn block(&self, block_row: usize, block_col: usize) -> Mat3 {
        let mut out = Mat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.get(3 * block_row + i, 3 * block_col + j);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.size {
            for j in (i + 1)..self.size {
                if self.get(i, j) != self.get(j, i) {
                    return false;
                }
            }
        }
        true
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
}

/// Assemble the block-tridiagonal nodal matrix of a circuit at complex
/// frequency `s`. Auto grounding is balanced on the fly.
pub fn assemble(
    circuit: &ChainCircuit,
    catalog: &Catalog,
    s: Complex64,
) -> Result<AdmittanceMatrix, CircuitError> {
    circuit.validate(catalog)?;
    let cells = circuit.resolved_cells(catalog)?;
    let loads = coupling_node_loads(circuit, catalog)?;
    let mut y = AdmittanceMatrix::zero(3 * circuit.cells, s);
    for (m, cell) in cells.iter().enumerate() {
        let block = onsite_block(cell, &loads[m], circuit.c0_nf, circuit.r0_kohm, s)?;
        y.set_block(m, m, &block);
    }
    for (m, id) in circuit.couplings.iter().enumerate() {
        let upper = catalog.require(id)?.node_matrix(s)?;
        y.set_block(m, m + 1, &upper);
        y.set_block(m + 1, m, &upper.transpose());
    }
    Ok(y)
}
