//! Catalog of coupling connection modules between adjacent triangle cells.
//!
//! A coupling module is a named list of `(pattern, component)` parts. A
//! pattern is a 3x3 matrix over `{-1, 0, +1}` whose entry `(a, b)` is the
//! admittance multiple wired from node `b` of the right cell into node `a` of
//! the left cell; a negative entry marks a negative-admittance branch and
//! makes the assembled block non-reciprocal. Every pattern must split cleanly
//! into constant + pseudospin parts under the C3 basis.
//!
//! Catalogs are plain data and can be loaded from JSON:
//!
//! ```text
//! { "entries": [ { "id": "...", "parts": [ { "pattern": [[0,1,0],...],
//!   "component": { "kind": "C", "value": 2.7, "unit": "nF" } } ] } ] }
//! ```
//!
//! Component values are stored in the file units exactly (`nF`, `kOhm`, `mH`).

use crate::spinspace::{block_decompose, BlockDecomposition, C3Basis, Mat2, Mat3};
use crate::{DEFAULT_C0_NF, DEFAULT_R0_KOHM};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("entry outside {{-1,0,1}}: {0}")]
    EntryOutOfRange(i64),
    #[error("pattern does not decompose cleanly (sector leakage {0:.3e})")]
    Unclean(f64),
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("entry `{id}`: {source}")]
    Pattern {
        id: String,
        #[source]
        source: PatternError,
    },
    #[error("duplicate entry id `{0}`")]
    DuplicateId(String),
    #[error("entry `{id}`: component value {value} must be > 0")]
    NonPositiveValue { id: String, value: f64 },
    #[error("entry `{id}`: unit `{unit}` does not match component kind `{kind}`")]
    UnitMismatch {
        id: String,
        kind: String,
        unit: String,
    },
    #[error("unknown component kind `{0}` (expected C, R or L)")]
    UnknownKind(String),
    #[error("unknown coupling id `{0}`")]
    UnknownId(String),
    #[error("inductive part evaluated at zero complex frequency")]
    InductorAtZeroFrequency,
}

/// Two-terminal component family of a coupling branch or triangle edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentKind {
    Capacitor,
    Resistor,
    Inductor,
}

impl ComponentKind {
    pub fn letter(&self) -> &'static str {
        match self {
            ComponentKind::Capacitor => "C",
            ComponentKind::Resistor => "R",
            ComponentKind::Inductor => "L",
        }
    }

    /// File unit the component value is stored in.
    pub fn unit(&self) -> &'static str {
        match self {
            ComponentKind::Capacitor => "nF",
            ComponentKind::Resistor => "kOhm",
            ComponentKind::Inductor => "mH",
        }
    }

    fn si_factor(&self) -> f64 {
        match self {
            ComponentKind::Capacitor => 1e-9,
            ComponentKind::Resistor => 1e3,
            ComponentKind::Inductor => 1e-3,
        }
    }

    pub fn from_letter(s: &str) -> Result<Self, CatalogError> {
        match s {
            "C" => Ok(ComponentKind::Capacitor),
            "R" => Ok(ComponentKind::Resistor),
            "L" => Ok(ComponentKind::Inductor),
            other => Err(CatalogError::UnknownKind(other.to_string())),
        }
    }
}

/// A component with its value kept in file units (nF / kOhm / mH) so that
/// save/load round-trips are bit-exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Component {
    pub kind: ComponentKind,
    pub value: f64,
}

impl Component {
    pub fn capacitor_nf(value: f64) -> Self {
        Component {
            kind: ComponentKind::Capacitor,
            value,
        }
    }

    pub fn resistor_kohm(value: f64) -> Self {
        Component {
            kind: ComponentKind::Resistor,
            value,
        }
    }

    pub fn inductor_mh(value: f64) -> Self {
        Component {
            kind: ComponentKind::Inductor,
            value,
        }
    }

    /// Value in SI units (farads, ohms, henries).
    pub fn si_value(&self) -> f64 {
        self.value * self.kind.si_factor()
    }

    /// Branch admittance at complex frequency `s`.
    pub fn admittance(&self, s: Complex64) -> Result<Complex64, CatalogError> {
        match self.kind {
            ComponentKind::Capacitor => Ok(s * self.si_value()),
            ComponentKind::Resistor => Ok(Complex64::new(1.0 / self.si_value(), 0.0)),
            ComponentKind::Inductor => {
                if s == Complex64::new(0.0, 0.0) {
                    return Err(CatalogError::InductorAtZeroFrequency);
                }
                Ok(Complex64::new(1.0, 0.0) / (s * self.si_value()))
            }
        }
    }
}

/// 3x3 signed connection pattern between two adjacent cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConnectionPattern {
    entries: [[i8; 3]; 3],
}

impl ConnectionPattern {
    /// Validates the entry range and the clean constant/spin split.
    pub fn new(entries: [[i8; 3]; 3]) -> Result<Self, PatternError> {
        for row in &entries {
            for &e in row {
                if !(-1..=1).contains(&e) {
                    return Err(PatternError::EntryOutOfRange(e as i64));
                }
            }
        }
        let p = ConnectionPattern { entries };
        let d = p.decompose();
        let norm = p.node_matrix().max_abs().max(1.0);
        if !d.is_clean_for(norm) {
            return Err(PatternError::Unclean(d.offdiag_norm));
        }
        Ok(p)
    }

    pub fn entries(&self) -> &[[i8; 3]; 3] {
        &self.entries
    }

    pub fn node_matrix(&self) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = self.entries[i][j] as f64;
            }
        }
        Mat3::from_real(m)
    }

    pub fn transpose(&self) -> ConnectionPattern {
        let mut t = [[0i8; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                t[i][j] = self.entries[j][i];
            }
        }
        ConnectionPattern { entries: t }
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries == self.transpose().entries
    }

    pub fn row_sums(&self) -> [i32; 3] {
        let mut out = [0i32; 3];
        for (i, row) in self.entries.iter().enumerate() {
            out[i] = row.iter().map(|&e| e as i32).sum();
        }
        out
    }

    pub fn col_sums(&self) -> [i32; 3] {
        let mut out = [0i32; 3];
        for row in &self.entries {
            for (j, &e) in row.iter().enumerate() {
                out[j] += e as i32;
            }
        }
        out
    }

    pub fn decompose(&self) -> BlockDecomposition {
        block_decompose(&self.node_matrix(), C3Basis::standard())
    }
}

/// Named patterns the stock catalog is assembled from.
///
/// The names describe the pseudospin content after decomposition:
/// `sigma1` gives `s1`, `neg_sigma1` gives `-s1` (plus constant 2),
/// `sigma2` gives `sqrt(3) s2`, `i_sigma3` gives `i sqrt(3) s3`, and `ones`
/// is the all-ones pattern carrying constant 3 with no spin content.
pub fn builtin_patterns() -> BTreeMap<&'static str, ConnectionPattern> {
    let mk = |e| ConnectionPattern::new(e).expect("builtin pattern must validate");
    let mut map = BTreeMap::new();
    map.insert("sigma0", mk([[1, 0, 0], [0, 1, 0], [0, 0, 1]]));
    map.insert("sigma1", mk([[0, 1, 0], [1, 0, 0], [0, 0, 1]]));
    map.insert("neg_sigma1", mk([[1, 0, 1], [0, 1, 1], [1, 1, 0]]));
    map.insert("sigma2", mk([[-1, 0, 1], [0, 1, -1], [1, -1, 0]]));
    map.insert("neg_sigma2", mk([[1, 0, -1], [0, -1, 1], [-1, 1, 0]]));
    map.insert("i_sigma3", mk([[0, 1, -1], [-1, 0, 1], [1, -1, 0]]));
    map.insert("neg_i_sigma3", mk([[0, -1, 1], [1, 0, -1], [-1, 1, 0]]));
    map.insert("ones", mk([[1, 1, 1], [1, 1, 1], [1, 1, 1]]));
    map
}

/// One coupling connection: an id plus its `(pattern, component)` parts.
///
/// The frequency signature is always recomputed from the parts.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingModule {
    pub id: String,
    pub parts: Vec<(ConnectionPattern, Component)>,
}

impl CouplingModule {
    pub fn new(id: impl Into<String>, parts: Vec<(ConnectionPattern, Component)>) -> Self {
        CouplingModule {
            id: id.into(),
            parts,
        }
    }

    /// Full 3x3 node matrix of the coupling at complex frequency `s`.
    pub fn node_matrix(&self, s: Complex64) -> Result<Mat3, CatalogError> {
        let mut m = Mat3::zero();
        for (pattern, component) in &self.parts {
            let y = component.admittance(s)?;
            m = m + pattern.node_matrix().scale(y);
        }
        Ok(m)
    }

    /// Constant coefficient and pseudospin block at complex frequency `s`,
    /// summed part by part.
    pub fn signature_at(&self, s: Complex64) -> Result<(Complex64, Mat2), CatalogError> {
        let mut constant = Complex64::new(0.0, 0.0);
        let mut spin = Mat2::zero();
        for (pattern, component) in &self.parts {
            let y = component.admittance(s)?;
            let d = pattern.decompose();
            constant += y * d.constant;
            spin = spin + d.spin.scale(y);
        }
        Ok((constant, spin))
    }
}

/// Ordered collection of coupling modules with unique ids.
#[derive(Clone, Debug)]
pub struct Catalog {
    entries: Vec<CouplingModule>,
    by_id: HashMap<String, usize>,
}

impl Catalog {
    pub fn new(entries: Vec<CouplingModule>) -> Result<Self, CatalogError> {
        let mut by_id = HashMap::with_capacity(entries.len());
        for (idx, entry) in entries.iter().enumerate() {
            if by_id.insert(entry.id.clone(), idx).is_some() {
                return Err(CatalogError::DuplicateId(entry.id.clone()));
            }
            for (_, component) in &entry.parts {
                if !(component.value.is_finite() && component.value > 0.0) {
                    return Err(CatalogError::NonPositiveValue {
                        id: entry.id.clone(),
                        value: component.value,
                    });
                }
            }
        }
        Ok(Catalog { entries, by_id })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CouplingModule] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&CouplingModule> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    pub fn require(&self, id: &str) -> Result<&CouplingModule, CatalogError> {
        self.get(id)
            .ok_or_else(|| CatalogError::UnknownId(id.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CatalogError> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile = serde_json::from_str(text)?;
        let mut entries = Vec::with_capacity(file.entries.len());
        for entry in file.entries {
            let mut parts = Vec::with_capacity(entry.parts.len());
            for part in entry.parts {
                let mut raw = [[0i8; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        let v = part.pattern[i][j];
                        if !(-1..=1).contains(&v) {
                            return Err(CatalogError::Pattern {
                                id: entry.id.clone(),
                                source: PatternError::EntryOutOfRange(v),
                            });
                        }
                        raw[i][j] = v as i8;
                    }
                }
                let pattern =
                    ConnectionPattern::new(raw).map_err(|source| CatalogError::Pattern {
                        id: entry.id.clone(),
                        source,
                    })?;
                let kind = ComponentKind::from_letter(&part.component.kind)?;
                if part.component.unit != kind.unit() {
                    return Err(CatalogError::UnitMismatch {
                        id: entry.id.clone(),
                        kind: part.component.kind.clone(),
                        unit: part.component.unit.clone(),
                    });
                }
                parts.push((
                    pattern,
                    Component {
                        kind,
                        value: part.component.value,
                    },
                ));
            }
            entries.push(CouplingModule::new(entry.id, parts));
        }
        Catalog::new(entries)
    }

    pub fn to_json_string(&self) -> String {
        let file = CatalogFile {
            entries: self
                .entries
                .iter()
                .map(|e| EntryFile {
                    id: e.id.clone(),
                    parts: e
                        .parts
                        .iter()
                        .map(|(pattern, component)| PartFile {
                            pattern: {
                                let mut m = [[0i64; 3]; 3];
                                for i in 0..3 {
                                    for j in 0..3 {
                                        m[i][j] = pattern.entries[i][j] as i64;
                                    }
                                }
                                m
                            },
                            component: ComponentFile {
                                kind: component.kind.letter().to_string(),
                                value: component.value,
                                unit: component.kind.unit().to_string(),
                            },
                        })
                        .collect(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("catalog serializes");
        text.push('\n');
        text
    }
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    entries: Vec<EntryFile>,
}

#[derive(Serialize, Deserialize)]
struct EntryFile {
    id: String,
    parts: Vec<PartFile>,
}

#[derive(Serialize, Deserialize)]
struct PartFile {
    pattern: [[i64; 3]; 3],
    component: ComponentFile,
}

#[derive(Serialize, Deserialize)]
struct ComponentFile {
    kind: String,
    value: f64,
    unit: String,
}

/// The stock 48-entry catalog.
///
/// Entries enumerate twist target x base component x twist component x
/// base inclusion:
///
/// * twist targets `s1p, s1n, s2p, s2n, is3p, is3n` give pseudospin content
///   `+s1, -s1, +sqrt(3) s2, -sqrt(3) s2, +i sqrt(3) s3, -i sqrt(3) s3`;
/// * `base`/`solo` adds or omits an identity-pattern branch set;
/// * each of the base and twist slots can be wired in capacitors (2.7 nF)
///   or resistors (1 kOhm).
///
/// The sigma2/sigma3 twists carry an all-ones part: their physical assembly
/// uses a full branch set, which contributes 3 units to the constant channel
/// while the signed pattern supplies the spin content.
pub fn default_catalog() -> Catalog {
    let patterns = builtin_patterns();
    let p = |name: &str| *patterns.get(name).expect("builtin pattern");
    let component = |kind: ComponentKind| match kind {
        ComponentKind::Capacitor => Component::capacitor_nf(DEFAULT_C0_NF),
        ComponentKind::Resistor => Component::resistor_kohm(DEFAULT_R0_KOHM),
        ComponentKind::Inductor => unreachable!("stock catalog has no inductive couplings"),
    };

    // Twist parts used with a sigma0 base (full branch sets, including the
    // all-ones assembly of the sigma2/sigma3 realizations) and when standing
    // alone (bare signed pattern, no constant-channel content beyond what the
    // pattern itself carries).
    let twists: [(&str, Vec<ConnectionPattern>, Vec<ConnectionPattern>); 6] = [
        ("s1p", vec![p("sigma1")], vec![p("sigma1")]),
        ("s1n", vec![p("neg_sigma1")], vec![p("neg_sigma1")]),
        ("s2p", vec![p("ones"), p("sigma2")], vec![p("sigma2")]),
        (
            "s2n",
            vec![p("ones"), p("neg_sigma2")],
            vec![p("neg_sigma2")],
        ),
        ("is3p", vec![p("ones"), p("i_sigma3")], vec![p("i_sigma3")]),
        (
            "is3n",
            vec![p("ones"), p("neg_i_sigma3")],
            vec![p("neg_i_sigma3")],
        ),
    ];
    let kinds = [ComponentKind::Capacitor, ComponentKind::Resistor];

    let mut entries = Vec::with_capacity(48);
    for (tau, based_patterns, solo_patterns) in &twists {
        for base_kind in kinds {
            for twist_kind in kinds {
                for with_base in [true, false] {
                    let flag = if with_base { "base" } else { "solo" };
                    let id = format!("{tau}-{}{}-{flag}", base_kind.letter(), twist_kind.letter());
                    let mut parts = Vec::new();
                    let twist_patterns = if with_base {
                        parts.push((p("sigma0"), component(base_kind)));
                        based_patterns
                    } else {
                        solo_patterns
                    };
                    for pattern in twist_patterns {
                        parts.push((*pattern, component(twist_kind)));
                    }
                    entries.push(CouplingModule::new(id, parts));
                }
            }
        }
    }
    Catalog::new(entries).expect("stock catalog validates")
}
