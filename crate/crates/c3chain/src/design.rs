//! Exhaustive inverse design over ordered coupling triples.
//!
//! The search space is every ordered triple of distinct catalog entries
//! mounted on a stock 4-cell chain. The space is small enough (48 entries
//! give 48 * 47 * 46 = 103,776 circuits) that exact enumeration replaces any
//! learned or heuristic generator: a query either has matches or provably
//! has none.
//!
//! Query files are JSON:
//!
//! ```text
//! { "target": [[re,im],[re,im],[re,im]], "tolerance": 0.05,
//!   "budget": {"C": 5.0, "R": 1.5} | null,
//!   "frequency_khz": 15.0, "max_results": 10 }
//! ```

use crate::catalog::Catalog;
use crate::lattice::{coupling_node_loads, ChainCircuit, CircuitError};
use crate::signals::{signature, TransferSignature};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Absolute floor applied to the per-entry relative error so that near-zero
/// target entries stay matchable.
pub const DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("tolerance must lie in (0, 1), got {0}")]
    BadTolerance(f64),
    #[error("max_results must be >= 1")]
    BadMaxResults,
    #[error("frequency must be > 0, got {0} Hz")]
    BadFrequency(f64),
    #[error("target entries must be finite")]
    BadTarget,
    #[error("catalog needs at least 3 entries to form triples, has {0}")]
    CatalogTooSmall(usize),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Per-node component budget filter, in multiples of `C0` and `1/R0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budget {
    pub cap: f64,
    pub res: f64,
}

/// An inverse-design request.
#[derive(Clone, Debug)]
pub struct DesignQuery {
    pub target: TransferSignature,
    /// Relative per-entry tolerance in (0, 1).
    pub tolerance: f64,
    pub budget: Option<Budget>,
    pub frequency_hz: f64,
    pub max_results: usize,
}

#[derive(Serialize, Deserialize)]
struct BudgetFile {
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "R")]
    r: f64,
}

#[derive(Serialize, Deserialize)]
struct QueryFile {
    target: TransferSignature,
    tolerance: f64,
    budget: Option<BudgetFile>,
    frequency_khz: f64,
    max_results: usize,
}

impl DesignQuery {
    pub fn validate(&self) -> Result<(), DesignError> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(DesignError::BadTolerance(self.tolerance));
        }
        if self.max_results == 0 {
            return Err(DesignError::BadMaxResults);
        }
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(DesignError::BadFrequency(self.frequency_hz));
        }
        if !self.target.is_finite() {
            return Err(DesignError::BadTarget);
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DesignError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, DesignError> {
        let file: QueryFile = serde_json::from_str(text)?;
        let query = DesignQuery {
            target: file.target,
            tolerance: file.tolerance,
            budget: file.budget.map(|b| Budget { cap: b.c, res: b.r }),
            frequency_hz: file.frequency_khz * 1e3,
            max_results: file.max_results,
        };
        query.validate()?;
        Ok(query)
    }

    pub fn to_json_string(&self) -> String {
        let file = QueryFile {
            target: self.target,
            tolerance: self.tolerance,
            budget: self.budget.map(|b| BudgetFile { c: b.cap, r: b.res }),
            frequency_khz: self.frequency_hz / 1e3,
            max_results: self.max_results,
        };
        let mut text = serde_json::to_string_pretty(&file).expect("query serializes");
        text.push('\n');
        text
    }
}

/// One search hit, ranked by distance with id-triple tie-breaks.
#[derive(Clone, Debug)]
pub struct DesignResult {
    pub circuit: ChainCircuit,
    pub achieved: TransferSignature,
    pub distance: f64,
    pub rank: usize,
}

/// Maximum per-entry relative error between two signatures, with the
/// absolute floor of [`DISTANCE_FLOOR`] in the denominator.
pub fn signature_distance(achieved: &TransferSignature, target: &TransferSignature) -> f64 {
    achieved
        .vec
        .iter()
        .zip(target.vec.iter())
        .map(|(a, t)| (a - t).norm() / t.norm().max(DISTANCE_FLOOR))
        .fold(0.0, f64::max)
}

/// Number of ordered triples of distinct entries.
pub fn triple_count(catalog: &Catalog) -> usize {
    let n = catalog.len();
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2)
    }
}

/// Ordered triples of distinct catalog indices in lexicographic order.
pub fn enumerate_space(
    catalog: &Catalog,
) -> Result<impl Iterator<Item = [usize; 3]> + '_, DesignError> {
    let n = catalog.len();
    if n < 3 {
        return Err(DesignError::CatalogTooSmall(n));
    }
    Ok((0..n).flat_map(move |i| {
        (0..n).filter(move |&j| j != i).flat_map(move |j| {
            (0..n)
                .filter(move |&k| k != i && k != j)
                .map(move |k| [i, j, k])
        })
    }))
}

/// Triple at a given lexicographic position (inverse of the enumeration).
pub(crate) fn triple_at(n: usize, index: usize) -> [usize; 3] {
    let per_i = (n - 1) * (n - 2);
    let i = index / per_i;
    let rem = index % per_i;
    let j_slot = rem / (n - 2);
    let k_slot = rem % (n - 2);
    let j = if j_slot >= i { j_slot + 1 } else { j_slot };
    let mut k = k_slot;
    for skip in [i.min(j), i.max(j)] {
        if k >= skip {
            k += 1;
        }
    }
    [i, j, k]
}

/// Stock 4-cell circuit for an ordered coupling triple.
pub fn circuit_for_triple(catalog: &Catalog, triple: &[usize; 3]) -> ChainCircuit {
    ChainCircuit::stock(
        triple
            .iter()
            .map(|&i| catalog.entries()[i].id.clone())
            .collect(),
    )
}

/// Per-node coupling + grounding totals of a circuit, in multiples of `C0`
/// and `1/R0` (the budget every node shares after balancing).
pub fn component_budget_of(
    circuit: &ChainCircuit,
    catalog: &Catalog,
) -> Result<(f64, f64), CircuitError> {
    let loads = coupling_node_loads(circuit, catalog)?;
    let cells = circuit.resolved_cells(catalog)?;
    let mut cap = 0.0f64;
    let mut res = 0.0f64;
    for (cell, load) in cells.iter().zip(loads.iter()) {
        for node in 0..3 {
            cap = cap.max(load[node].cap_mult + cell.grounding[node].cap_mult);
            res = res.max(load[node].res_mult + cell.grounding[node].res_mult);
        }
    }
    Ok((cap, res))
}

/// One enumerated candidate with its precomputed signature and budget.
/// `signature` is `None` when the circuit is resonant at the index frequency.
#[derive(Clone, Debug)]
struct Candidate {
    triple: [usize; 3],
    signature: Option<TransferSignature>,
    budget: (f64, f64),
}

/// Every candidate of the search space evaluated once at one frequency.
///
/// Building the index costs one pass over the full space; queries against it
/// are cheap scans, so batches of searches at a shared frequency amortize the
/// evaluation.
pub struct SearchIndex {
    pub frequency_hz: f64,
    candidates: Vec<Candidate>,
}

impl SearchIndex {
    pub fn build(catalog: &Catalog, frequency_hz: f64) -> Result<Self, DesignError> {
        if catalog.len() < 3 {
            return Err(DesignError::CatalogTooSmall(catalog.len()));
        }
        if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
            return Err(DesignError::BadFrequency(frequency_hz));
        }
        let s = crate::s_at_hz(frequency_hz);
        let count = triple_count(catalog);
        let n = catalog.len();
        // Candidate evaluations are independent; results are collected in
        // enumeration order so the outcome never depends on thread count.
        let candidates: Vec<Candidate> = (0..count)
            .into_par_iter()
            .map(|index| {
                let triple = triple_at(n, index);
                let circuit = circuit_for_triple(catalog, &triple);
                let budget =
                    component_budget_of(&circuit, catalog).expect("stock circuit has a budget");
                let signature = match signature(&circuit, catalog, s) {
                    Ok(sig) if sig.is_finite() => Some(sig),
                    Ok(_) => None,
                    Err(err) => {
                        log::debug!("candidate {:?} skipped at {frequency_hz} Hz: {err}", triple);
                        None
                    }
                };
                Candidate {
                    triple,
                    signature,
                    budget,
                }
            })
            .collect();
        Ok(SearchIndex {
            frequency_hz,
            candidates,
        })
    }

    /// Closest solvable candidate to a target regardless of tolerance or
    /// budget, for diagnostics on empty searches.
    pub fn closest(&self, target: &TransferSignature, catalog: &Catalog) -> Option<DesignResult> {
        let (candidate, distance) = self
            .candidates
            .iter()
            .filter_map(|c| {
                let sig = c.signature.as_ref()?;
                Some((c, signature_distance(sig, target)))
            })
            .min_by(|(_, a), (_, b)| a.total_cmp(b))?;
        Some(DesignResult {
            circuit: circuit_for_triple(catalog, &candidate.triple),
            achieved: candidate.signature.unwrap(),
            distance,
            rank: 0,
        })
    }

    /// All candidates within tolerance of the query target, sorted by
    /// distance (id-triple lexicographic tie-break) and truncated to
    /// `max_results`.
    pub fn query(&self, query: &DesignQuery, catalog: &Catalog) -> Vec<DesignResult> {
        let mut hits: Vec<(&Candidate, f64)> = self
            .candidates
            .iter()
            .filter_map(|candidate| {
                let sig = candidate.signature.as_ref()?;
                if let Some(budget) = &query.budget {
                    let (cap, res) = candidate.budget;
                    if (cap - budget.cap).abs() > 1e-9 || (res - budget.res).abs() > 1e-9 {
                        return None;
                    }
                }
                let distance = signature_distance(sig, &query.target);
                (distance <= query.tolerance).then_some((candidate, distance))
            })
            .collect();
        hits.sort_by(|(a, da), (b, db)| {
            da.total_cmp(db).then_with(|| {
                let ids = |c: &Candidate| c.triple.map(|i| catalog.entries()[i].id.as_str());
                ids(a).cmp(&ids(b))
            })
        });
        hits.truncate(query.max_results);
        hits.into_iter()
            .enumerate()
            .map(|(rank, (candidate, distance))| DesignResult {
                circuit: circuit_for_triple(catalog, &candidate.triple),
                achieved: candidate.signature.unwrap(),
                distance,
                rank,
            })
            .collect()
    }
}

/// Full-space exact search: evaluate every ordered triple at the query
/// frequency and return the matches. Deterministic regardless of internal
/// parallelism; an empty result is a valid answer.
pub fn search(query: &DesignQuery, catalog: &Catalog) -> Result<Vec<DesignResult>, DesignError> {
    query.validate()?;
    let index = SearchIndex::build(catalog, query.frequency_hz)?;
    Ok(index.query(query, catalog))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{builtin_patterns, default_catalog, Component, CouplingModule};
    use crate::DEFAULT_FREQUENCY_HZ;
    use num_complex::Complex64;

    fn s15() -> Complex64 {
        Complex64::new(0.0, 2.0 * std::f64::consts::PI * DEFAULT_FREQUENCY_HZ)
    }

    fn small_catalog() -> Catalog {
        let patterns = builtin_patterns();
        let c0 = Component::capacitor_nf(2.7);
        let r0 = Component::resistor_kohm(1.0);
        Catalog::new(vec![
            CouplingModule::new(
                "a",
                vec![(patterns["sigma0"], c0), (patterns["sigma1"], c0)],
            ),
            CouplingModule::new(
                "b",
                vec![
                    (patterns["sigma0"], c0),
                    (patterns["ones"], c0),
                    (patterns["sigma2"], c0),
                ],
            ),
            CouplingModule::new(
                "c",
                vec![
                    (patterns["sigma0"], c0),
                    (patterns["ones"], r0),
                    (patterns["i_sigma3"], r0),
                ],
            ),
            CouplingModule::new("d", vec![(patterns["neg_sigma1"], r0)]),
        ])
        .unwrap()
    }

    #[test]
    fn three_entry_catalog_enumerates_all_permutations() {
        let patterns = builtin_patterns();
        let c0 = Component::capacitor_nf(2.7);
        let catalog = Catalog::new(vec![
            CouplingModule::new("x", vec![(patterns["sigma0"], c0)]),
            CouplingModule::new("y", vec![(patterns["sigma1"], c0)]),
            CouplingModule::new("z", vec![(patterns["sigma2"], c0)]),
        ])
        .unwrap();
        let triples: Vec<[usize; 3]> = enumerate_space(&catalog).unwrap().collect();
        assert_eq!(triples.len(), 6);
        assert_eq!(triples.len(), triple_count(&catalog));
        for t in &triples {
            assert!(t[0] != t[1] && t[1] != t[2] && t[0] != t[2]);
        }
        assert_eq!(triples[0], [0, 1, 2]);
        assert_eq!(triples[5], [2, 1, 0]);
    }

    #[test]
    fn stock_catalog_space_has_expected_size() {
        let catalog = default_catalog();
        assert_eq!(triple_count(&catalog), 103_776);
        assert_eq!(enumerate_space(&catalog).unwrap().count(), 103_776);
    }

    #[test]
    fn triple_at_inverts_enumeration() {
        let catalog = small_catalog();
        let n = catalog.len();
        for (index, triple) in enumerate_space(&catalog).unwrap().enumerate() {
            assert_eq!(triple_at(n, index), triple);
        }
    }

    #[test]
    fn undersized_catalog_is_rejected() {
        let patterns = builtin_patterns();
        let c0 = Component::capacitor_nf(2.7);
        let catalog = Catalog::new(vec![
            CouplingModule::new("x", vec![(patterns["sigma0"], c0)]),
            CouplingModule::new("y", vec![(patterns["sigma1"], c0)]),
        ])
        .unwrap();
        assert!(matches!(
            enumerate_space(&catalog).err(),
            Some(DesignError::CatalogTooSmall(2))
        ));
    }

    #[test]
    fn demo_chain_budget_matches_balanced_shunts() {
        let catalog = default_catalog();
        let circuit = ChainCircuit::stock(vec![
            "s1p-CC-base".into(),
            "s2p-CC-base".into(),
            "is3p-CR-base".into(),
        ]);
        let (cap, res) = component_budget_of(&circuit, &catalog).unwrap();
        assert!((cap - 6.0).abs() <= 1e-12);
        assert!((res - 1.5).abs() <= 1e-12);

        // Reordering the same couplings shifts the peak load: the resistive
        // link between interior cells replaces one capacitive neighbor.
        let swapped = ChainCircuit::stock(vec![
            "s1p-CC-base".into(),
            "is3p-CR-base".into(),
            "s2p-CC-base".into(),
        ]);
        let (cap, res) = component_budget_of(&swapped, &catalog).unwrap();
        assert!((cap - 5.0).abs() <= 1e-12);
        assert!((res - 1.5).abs() <= 1e-12);
    }

    #[test]
    fn single_identity_link_budget() {
        let patterns = builtin_patterns();
        let catalog = Catalog::new(vec![CouplingModule::new(
            "id-C",
            vec![(patterns["sigma0"], Component::capacitor_nf(2.7))],
        )])
        .unwrap();
        let circuit = ChainCircuit::stock(vec!["id-C".into()]);
        let (cap, res) = component_budget_of(&circuit, &catalog).unwrap();
        assert_eq!(cap, 1.0);
        assert_eq!(res, 0.0);
    }

    #[test]
    fn distance_floor_keeps_tiny_targets_matchable() {
        let achieved = TransferSignature {
            vec: [
                Complex64::new(0.0, 0.0),
                Complex64::new(0.05, -0.13),
                Complex64::new(0.10, -0.01),
            ],
        };
        let target = TransferSignature {
            vec: [
                Complex64::new(8.57e-18, 7.06e-17),
                Complex64::new(0.05, -0.13),
                Complex64::new(0.10, -0.01),
            ],
        };
        let d = signature_distance(&achieved, &target);
        assert!(d < 1e-3, "floored distance {d} should be tiny");
    }

    #[test]
    fn planted_circuit_is_recovered_exactly() {
        let catalog = small_catalog();
        let planted = ChainCircuit::stock(vec!["c".into(), "a".into(), "d".into()]);
        let target = signature(&planted, &catalog, s15()).unwrap();
        let query = DesignQuery {
            target,
            tolerance: 1e-6,
            budget: None,
            frequency_hz: DEFAULT_FREQUENCY_HZ,
            max_results: 10,
        };
        let results = search(&query, &catalog).unwrap();
        assert!(!results.is_empty());
        assert!(results[0].distance <= 1e-9);
        assert!(results
            .iter()
            .any(|r| r.circuit.couplings == planted.couplings));
        for (rank, r) in results.iter().enumerate() {
            assert_eq!(r.rank, rank);
        }
    }

    #[test]
    fn infeasible_target_yields_empty_result() {
        let catalog = small_catalog();
        let query = DesignQuery {
            target: TransferSignature {
                vec: [
                    Complex64::new(1e6, 0.0),
                    Complex64::new(1e6, 0.0),
                    Complex64::new(1e6, 0.0),
                ],
            },
            tolerance: 0.5,
            budget: None,
            frequency_hz: DEFAULT_FREQUENCY_HZ,
            max_results: 5,
        };
        assert!(search(&query, &catalog).unwrap().is_empty());
    }

    #[test]
    fn shrinking_tolerance_never_adds_results() {
        let catalog = small_catalog();
        let planted = ChainCircuit::stock(vec!["a".into(), "b".into(), "c".into()]);
        let target = signature(&planted, &catalog, s15()).unwrap();
        let index = SearchIndex::build(&catalog, DEFAULT_FREQUENCY_HZ).unwrap();
        let mut query = DesignQuery {
            target,
            tolerance: 0.9,
            budget: None,
            frequency_hz: DEFAULT_FREQUENCY_HZ,
            max_results: usize::MAX,
        };
        let loose = index.query(&query, &catalog);
        query.tolerance = 1e-6;
        let tight = index.query(&query, &catalog);
        assert!(tight.len() <= loose.len());
        let loose_ids: Vec<_> = loose.iter().map(|r| r.circuit.couplings.clone()).collect();
        for r in &tight {
            assert!(loose_ids.contains(&r.circuit.couplings));
        }
    }

    #[test]
    fn budget_filter_restricts_results() {
        let catalog = small_catalog();
        let planted = ChainCircuit::stock(vec!["a".into(), "b".into(), "c".into()]);
        let target = signature(&planted, &catalog, s15()).unwrap();
        let (cap, res) = component_budget_of(&planted, &catalog).unwrap();
        let index = SearchIndex::build(&catalog, DEFAULT_FREQUENCY_HZ).unwrap();

        let with_budget = index.query(
            &DesignQuery {
                target,
                tolerance: 1e-6,
                budget: Some(Budget { cap, res }),
                frequency_hz: DEFAULT_FREQUENCY_HZ,
                max_results: usize::MAX,
            },
            &catalog,
        );
        assert!(with_budget
            .iter()
            .any(|r| r.circuit.couplings == planted.couplings));

        let wrong_budget = index.query(
            &DesignQuery {
                target,
                tolerance: 1e-6,
                budget: Some(Budget {
                    cap: cap + 1.0,
                    res,
                }),
                frequency_hz: DEFAULT_FREQUENCY_HZ,
                max_results: usize::MAX,
            },
            &catalog,
        );
        assert!(wrong_budget.is_empty());
    }

    #[test]
    fn search_is_deterministic_across_worker_counts() {
        let catalog = small_catalog();
        let planted = ChainCircuit::stock(vec!["d".into(), "b".into(), "a".into()]);
        let target = signature(&planted, &catalog, s15()).unwrap();
        let query = DesignQuery {
            target,
            tolerance: 0.75,
            budget: None,
            frequency_hz: DEFAULT_FREQUENCY_HZ,
            max_results: usize::MAX,
        };

        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| search(&query, &catalog).unwrap())
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.len(), four.len());
        for (a, b) in one.iter().zip(four.iter()) {
            assert_eq!(a.circuit.couplings, b.circuit.couplings);
            assert_eq!(a.distance.to_bits(), b.distance.to_bits());
            assert_eq!(a.rank, b.rank);
        }
    }

    #[test]
    fn query_file_roundtrip_and_validation() {
        let text = r#"{
            "target": [[0.0, 0.0], [0.05, -0.13], [0.1, -0.01]],
            "tolerance": 0.05,
            "budget": {"C": 5.0, "R": 1.5},
            "frequency_khz": 15.0,
            "max_results": 10
        }"#;
        let query = DesignQuery::from_json_str(text).unwrap();
        assert_eq!(query.frequency_hz, 15_000.0);
        assert_eq!(query.budget, Some(Budget { cap: 5.0, res: 1.5 }));
        let back = DesignQuery::from_json_str(&query.to_json_string()).unwrap();
        assert_eq!(back.tolerance, query.tolerance);

        let bad = r#"{
            "target": [[0,0],[0,0],[0,0]], "tolerance": 2.0,
            "budget": null, "frequency_khz": 15.0, "max_results": 1
        }"#;
        assert!(matches!(
            DesignQuery::from_json_str(bad),
            Err(DesignError::BadTolerance(_))
        ));
    }
}
