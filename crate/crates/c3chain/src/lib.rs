//! Frequency-domain toolkit for chain circuits built from C3-symmetric
//! triangle cells.
//!
//! A chain circuit is a row of identical three-node triangle cells joined by
//! modular coupling connections. Conjugating the nodal admittance matrix with
//! the threefold symmetry basis splits every such circuit into a scalar
//! "constant" channel and a 2x2 "pseudospin" channel, where the couplings act
//! as (possibly non-reciprocal) Pauli-built blocks. This crate provides:
//!
//! * [`spinspace`] — the symmetry basis, Pauli algebra and block decomposition;
//! * [`catalog`] — the library of coupling connection modules;
//! * [`lattice`] — circuit assembly into nodal admittance matrices;
//! * [`solver`] — direct solves, block extraction and closed-form transfer;
//! * [`signals`] — Bloch-sphere drive encoding and transfer signatures;
//! * [`design`] — exhaustive inverse design over coupling triples;
//! * [`datagen`] — seeded dataset generation and schematic SVG rendering.

#![allow(clippy::needless_range_loop)]

pub mod catalog;
pub mod datagen;
pub mod design;
pub mod lattice;
pub mod signals;
pub mod solver;
pub mod spinspace;

/// Reference capacitance used by the stock catalog and circuits, in nF.
pub const DEFAULT_C0_NF: f64 = 2.7;
/// Reference resistance used by the stock catalog and circuits, in kOhm.
pub const DEFAULT_R0_KOHM: f64 = 1.0;
/// Operating frequency most examples and datasets are evaluated at, in Hz.
pub const DEFAULT_FREQUENCY_HZ: f64 = 15_000.0;

/// Steady-state complex frequency `s = i 2 pi f` for a drive frequency in Hz.
///
/// All tools must build `s` through this one expression: a different
/// multiplication order rounds differently and shifts every downstream
/// result by a few ulps.
pub fn s_at_hz(f_hz: f64) -> num_complex::Complex64 {
    num_complex::Complex64::new(0.0, 2.0 * std::f64::consts::PI * f_hz)
}
