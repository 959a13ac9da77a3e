//! Node-voltage solves and channel transfer functions.
//!
//! Two independent routes compute the cell-1 to cell-N transfer:
//!
//! * [`transfer_direct`] solves the full 3N x 3N nodal system and projects
//!   input/output onto the symmetry basis — the ground truth;
//! * [`extract_blocks`] + [`transfer_closed_form`] read the constant and
//!   pseudospin chain parameters off the transformed matrix and evaluate the
//!   tridiagonal closed form for the constant channel plus a direct inversion
//!   of the 2N x 2N pseudospin chain.
//!
//! The printed product form for the pseudospin channel
//! (`h21 h32 h43 / Delta`) divides matrices as if they were scalars; it is
//! exposed as [`spin_chain_delta_form`] and is exact only when all coupling
//! blocks commute. The chain inversion is authoritative otherwise.

use crate::catalog::Catalog;
use crate::lattice::{assemble, AdmittanceMatrix, ChainCircuit, CircuitError};
use crate::spinspace::{block_decompose, phase_deg, C3Basis, Mat2, Mat3};
use num_complex::Complex64;
use thiserror::Error;

/// Condition-number threshold above which a solve is treated as operating at
/// a circuit resonance.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Relative residual bound every accepted direct solve must satisfy.
pub const RESIDUAL_BOUND: f64 = 1e-10;
/// Relative tolerance for constant/pseudospin sector leakage.
pub const LEAKAGE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("vector length {got} does not match system size {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("matrix is singular or resonant (condition estimate {condition:.3e})")]
    Resonant { condition: f64 },
    #[error("solve residual {residual:.3e} exceeds bound {bound:.3e}")]
    Residual { residual: f64, bound: f64 },
    #[error("constant/pseudospin sector leakage {leakage:.3e} above tolerance {tolerance:.3e}")]
    SectorLeakage { leakage: f64, tolerance: f64 },
    #[error("diagonal blocks differ across cells by {deviation:.3e}; balance grounding first")]
    UnequalDiagonals { deviation: f64 },
    #[error("on-site pseudospin block is not scalar (deviation {deviation:.3e})")]
    NonScalarOnsite { deviation: f64 },
    #[error("closed-form transfer supports 3- and 4-cell chains, got {0}")]
    UnsupportedChainLength(usize),
    #[error("invalid sweep grid: {0}")]
    BadGrid(&'static str),
}

// ---------------------------------------------------------------------------
// Dense LU with partial pivoting.
// ---------------------------------------------------------------------------

struct LuFactors {
    n: usize,
    lu: Vec<Complex64>,
    pivots: Vec<usize>,
}

fn lu_factor(a: &[Complex64], n: usize) -> Option<LuFactors> {
    let mut lu = a.to_vec();
    let mut pivots = vec![0usize; n];
    for col in 0..n {
        let mut pivot = col;
        let mut best = lu[col * n + col].norm();
        for row in (col + 1)..n {
            let mag = lu[row * n + col].norm();
            if mag > best {
                best = mag;
                pivot = row;
            }
        }
        if best == 0.0 {
            return None;
        }
        pivots[col] = pivot;
        if pivot != col {
            for k in 0..n {
                lu.swap(col * n + k, pivot * n + k);
            }
        }
        let diag = lu[col * n + col];
        for row in (col + 1)..n {
            let factor = lu[row * n + col] / diag;
            lu[row * n + col] = factor;
            for k in (col + 1)..n {
                let sub = factor * lu[col * n + k];
                lu[row * n + k] -= sub;
            }
        }
    }
    Some(LuFactors { n, lu, pivots })
}

impl LuFactors {
    fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        // The stored factors are in final row order, so all pivot swaps must
        // be applied to the right-hand side before substitution starts.
        for col in 0..n {
            b.swap(col, self.pivots[col]);
        }
        for col in 0..n {
            for row in (col + 1)..n {
                let sub = self.lu[row * n + col] * b[col];
                b[row] -= sub;
            }
        }
        for col in (0..n).rev() {
            b[col] /= self.lu[col * n + col];
            for row in 0..col {
                let sub = self.lu[row * n + col] * b[col];
                b[row] -= sub;
            }
        }
    }

    fn inverse(&self) -> Vec<Complex64> {
        let n = self.n;
        let mut inv = vec![Complex64::new(0.0, 0.0); n * n];
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            col.fill(Complex64::new(0.0, 0.0));
            col[j] = Complex64::new(1.0, 0.0);
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

fn one_norm(a: &[Complex64], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU-factor a dense system, estimate its 1-norm condition number and reject
/// resonant matrices.
fn checked_factor(a: &[Complex64], n: usize) -> Result<LuFactors, SolveError> {
    let factors = lu_factor(a, n).ok_or(SolveError::Resonant {
        condition: f64::INFINITY,
    })?;
    let condition = one_norm(a, n) * one_norm(&factors.inverse(), n);
    if !condition.is_finite() || condition >= CONDITION_LIMIT {
        return Err(SolveError::Resonant { condition });
    }
    Ok(factors)
}

/// Solve `Y v = i` for the node voltages, with pivoted LU, a condition check
/// and an explicit residual verification. Works for non-symmetric `Y`.
pub fn solve_direct(
    y: &AdmittanceMatrix,
    i_in: &[Complex64],
) -> Result<Vec<Complex64>, SolveError> {
    let n = y.size();
    if i_in.len() != n {
        return Err(SolveError::SizeMismatch {
            expected: n,
            got: i_in.len(),
        });
    }
    let factors = checked_factor(y.data(), n)?;
    let mut v = i_in.to_vec();
    factors.solve_in_place(&mut v);

    let i_scale = i_in.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let mut residual = 0.0f64;
    for row in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for col in 0..n {
            acc += y.get(row, col) * v[col];
        }
        residual = residual.max((acc - i_in[row]).norm());
    }
    let bound = RESIDUAL_BOUND * i_scale;
    if residual > bound {
        return Err(SolveError::Residual { residual, bound });
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Block extraction.
// ---------------------------------------------------------------------------

/// Constant and pseudospin chain parameters of a circuit at one frequency.
#[derive(Clone, Debug)]
pub struct PseudospinBlocks {
    pub frequency: Complex64,
    /// On-site constant-channel value, equal for every cell.
    pub lambda1: Complex64,
    /// On-site pseudospin value (scalar multiple of the identity block).
    pub lambda2: Complex64,
    /// Constant-channel coupling coefficients t1..t(N-1).
    pub t: Vec<Complex64>,
    /// Pseudospin blocks of the upper couplings (h12, h23, ...).
    pub h_forward: Vec<Mat2>,
    /// Pseudospin blocks of the lower couplings (h21, h32, ...).
    pub h_backward: Vec<Mat2>,
}

impl PseudospinBlocks {
    pub fn n_cells(&self) -> usize {
        self.t.len() + 1
    }
}

/// Cell-1 to cell-N transfer in the two decoupled channels.
#[derive(Clone, Copy, Debug)]
pub struct TransferResult {
    pub constant_coeff: Complex64,
    pub spin_block: Mat2,
    pub frequency: Complex64,
}

/// Conjugate every tridiagonal block with the C3 basis and read off the
/// chain parameters, verifying that nothing leaks between sectors.
pub fn extract_blocks(
    circuit: &ChainCircuit,
    catalog: &Catalog,
    s: Complex64,
) -> Result<PseudospinBlocks, SolveError> {
    let y = assemble(circuit, catalog, s)?;
    extract_blocks_from_matrix(&y)
}

/// Same as [`extract_blocks`], starting from an already assembled matrix.
pub fn extract_blocks_from_matrix(y: &AdmittanceMatrix) -> Result<PseudospinBlocks, SolveError> {
    let n = y.size() / 3;
    let basis = C3Basis::standard();
    let scale = y.max_abs().max(f64::MIN_POSITIVE);
    let tolerance = LEAKAGE_TOL * scale;

    let check_leakage = |leakage: f64| -> Result<(), SolveError> {
        if leakage > tolerance {
            return Err(SolveError::SectorLeakage { leakage, tolerance });
        }
        Ok(())
    };

    let d0 = block_decompose(&y.block(0, 0), basis);
    check_leakage(d0.offdiag_norm)?;
    let lambda1 = d0.constant;
    let spin0 = d0.spin;
    // On-site pseudospin blocks must be scalar; couplings carry the structure.
    let lambda2 = (spin0.0[0][0] + spin0.0[1][1]) * 0.5;
    let scalar_dev = (spin0 - Mat2::identity().scale(lambda2)).max_abs();
    if scalar_dev > tolerance {
        return Err(SolveError::NonScalarOnsite {
            deviation: scalar_dev,
        });
    }
    for m in 1..n {
        let dm = block_decompose(&y.block(m, m), basis);
        check_leakage(dm.offdiag_norm)?;
        let dev = (dm.constant - lambda1)
            .norm()
            .max((dm.spin - spin0).max_abs());
        if dev > tolerance {
            return Err(SolveError::UnequalDiagonals { deviation: dev });
        }
    }

    let mut t = Vec::with_capacity(n.saturating_sub(1));
    let mut h_forward = Vec::with_capacity(n.saturating_sub(1));
    let mut h_backward = Vec::with_capacity(n.saturating_sub(1));
    for m in 0..n.saturating_sub(1) {
        let up = block_decompose(&y.block(m, m + 1), basis);
        check_leakage(up.offdiag_norm)?;
        let lo = block_decompose(&y.block(m + 1, m), basis);
        check_leakage(lo.offdiag_norm)?;
        t.push(up.constant);
        h_forward.push(up.spin);
        h_backward.push(lo.spin);
    }

    Ok(PseudospinBlocks {
        frequency: y.frequency,
        lambda1,
        lambda2,
        t,
        h_forward,
        h_backward,
    })
}

// ---------------------------------------------------------------------------
// Transfer functions.
// ---------------------------------------------------------------------------

/// Dense 2N x 2N pseudospin chain matrix built from extracted blocks.
fn spin_chain(blocks: &PseudospinBlocks) -> Vec<Complex64> {
    let n = blocks.n_cells();
    let dim = 2 * n;
    let mut a = vec![Complex64::new(0.0, 0.0); dim * dim];
    let mut put = |bi: usize, bj: usize, m: &Mat2| {
        for i in 0..2 {
            for j in 0..2 {
                a[(2 * bi + i) * dim + 2 * bj + j] = m.0[i][j];
            }
        }
    };
    let onsite = Mat2::identity().scale(blocks.lambda2);
    for m in 0..n {
        put(m, m, &onsite);
    }
    for m in 0..n - 1 {
        put(m, m + 1, &blocks.h_forward[m]);
        put(m + 1, m, &blocks.h_backward[m]);
    }
    a
}

/// Cell-1 -> cell-N pseudospin transfer by direct inversion of the chain.
fn spin_transfer_numeric(blocks: &PseudospinBlocks) -> Result<Mat2, SolveError> {
    let n = blocks.n_cells();
    let dim = 2 * n;
    let a = spin_chain(blocks);
    let factors = checked_factor(&a, dim)?;
    let mut out = Mat2::zero();
    let mut col = vec![Complex64::new(0.0, 0.0); dim];
    for j in 0..2 {
        col.fill(Complex64::new(0.0, 0.0));
        col[j] = Complex64::new(1.0, 0.0);
        factors.solve_in_place(&mut col);
        out.0[0][j] = col[dim - 2];
        out.0[1][j] = col[dim - 1];
    }
    Ok(out)
}

/// Constant-channel transfer by direct inversion of the N x N tridiagonal
/// chain (any N >= 2).
fn constant_transfer_numeric(blocks: &PseudospinBlocks) -> Result<Complex64, SolveError> {
    let n = blocks.n_cells();
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    for m in 0..n {
        a[m * n + m] = blocks.lambda1;
    }
    for m in 0..n - 1 {
        a[m * n + m + 1] = blocks.t[m];
        a[(m + 1) * n + m] = blocks.t[m];
    }
    let factors = checked_factor(&a, n)?;
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    col[0] = Complex64::new(1.0, 0.0);
    factors.solve_in_place(&mut col);
    Ok(col[n - 1])
}

/// Closed-form transfer for 3- and 4-cell chains.
///
/// The constant channel uses the tridiagonal inverse corner entry —
/// `t1 t2 t3 / gamma` with `gamma = l1^2 (-l1^2 + t1^2 + t2^2 + t3^2) -
/// t1^2 t3^2` for four cells, `-t1 t2 / (l1 (t1^2 + t2^2 - l1^2))` for three.
/// The pseudospin channel always comes from the numeric chain inversion.
pub fn transfer_closed_form(blocks: &PseudospinBlocks) -> Result<TransferResult, SolveError> {
    let l1 = blocks.lambda1;
    let constant_coeff = match blocks.n_cells() {
        3 => {
            let (t1, t2) = (blocks.t[0], blocks.t[1]);
            let denom = l1 * (t1 * t1 + t2 * t2 - l1 * l1);
            if denom.norm() == 0.0 {
                return Err(SolveError::Resonant {
                    condition: f64::INFINITY,
                });
            }
            -(t1 * t2) / denom
        }
        4 => {
            let (t1, t2, t3) = (blocks.t[0], blocks.t[1], blocks.t[2]);
            let gamma = l1 * l1 * (-(l1 * l1) + t1 * t1 + t2 * t2 + t3 * t3) - t1 * t1 * t3 * t3;
            if gamma.norm() == 0.0 {
                return Err(SolveError::Resonant {
                    condition: f64::INFINITY,
                });
            }
            t1 * t2 * t3 / gamma
        }
        other => return Err(SolveError::UnsupportedChainLength(other)),
    };
    if !constant_coeff.is_finite() {
        return Err(SolveError::Resonant {
            condition: f64::INFINITY,
        });
    }
    let spin_block = spin_transfer_numeric(blocks)?;
    Ok(TransferResult {
        constant_coeff,
        spin_block,
        frequency: blocks.frequency,
    })
}

/// Numeric transfer for a chain of any length (both channels inverted
/// directly from the extracted blocks).
pub fn transfer_numeric(blocks: &PseudospinBlocks) -> Result<TransferResult, SolveError> {
    Ok(TransferResult {
        constant_coeff: constant_transfer_numeric(blocks)?,
        spin_block: spin_transfer_numeric(blocks)?,
        frequency: blocks.frequency,
    })
}

/// Printed scalar-style product form of the 4-cell pseudospin transfer:
/// `h21 h32 h43 Delta^{-1}` with
/// `Delta = l2^2 (h12 h21 + h23 h32 + h34 h43 - l2^2) - h12 h21 h34 h43`.
///
/// Matrix division is taken as right-multiplication by `Delta^{-1}`; the form
/// agrees with the chain inversion only when all blocks commute, and is kept
/// as a cross-check for that regime.
pub fn spin_chain_delta_form(blocks: &PseudospinBlocks) -> Result<Mat2, SolveError> {
    if blocks.n_cells() != 4 {
        return Err(SolveError::UnsupportedChainLength(blocks.n_cells()));
    }
    let l2 = Mat2::identity().scale(blocks.lambda2 * blocks.lambda2);
    let hf = &blocks.h_forward;
    let hb = &blocks.h_backward;
    let ring = hf[0] * hb[0] + hf[1] * hb[1] + hf[2] * hb[2] - l2;
    let delta = Mat2::identity().scale(blocks.lambda2 * blocks.lambda2) * ring
        - hf[0] * hb[0] * (hf[2] * hb[2]);
    let det = delta.det();
    if det.norm() == 0.0 {
        return Err(SolveError::Resonant {
            condition: f64::INFINITY,
        });
    }
    let inv = Mat2([
        [delta.0[1][1] / det, -delta.0[0][1] / det],
        [-delta.0[1][0] / det, delta.0[0][0] / det],
    ]);
    Ok(hb[0] * hb[1] * hb[2] * inv)
}

/// Ground-truth transfer plus the worst off-channel leakage, from three full
/// nodal solves driven by the symmetry-basis unit currents at cell 1.
#[derive(Clone, Copy, Debug)]
pub struct DirectTransfer {
    pub result: TransferResult,
    /// Largest magnitude coupling the constant channel to the spin channel.
    pub leakage: f64,
}

pub fn transfer_direct(
    circuit: &ChainCircuit,
    catalog: &Catalog,
    s: Complex64,
) -> Result<DirectTransfer, SolveError> {
    let y = assemble(circuit, catalog, s)?;
    let n = y.size();
    let basis = C3Basis::standard();
    let u = basis.u;
    let u_dag = u.adjoint();

    // Channel-in -> channel-out 3x3 transfer matrix.
    let mut t = Mat3::zero();
    for k in 0..3 {
        let mut i_in = vec![Complex64::new(0.0, 0.0); n];
        for node in 0..3 {
            i_in[node] = u.0[node][k];
        }
        let v = solve_direct(&y, &i_in)?;
        let tail = [v[n - 3], v[n - 2], v[n - 1]];
        let out = u_dag.mul_vec(&tail);
        for row in 0..3 {
            t.0[row][k] = out[row];
        }
    }

    let leakage = [t.0[0][1], t.0[0][2], t.0[1][0], t.0[2][0]]
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max);
    Ok(DirectTransfer {
        result: TransferResult {
            constant_coeff: t.0[0][0],
            spin_block: Mat2([[t.0[1][1], t.0[1][2]], [t.0[2][1], t.0[2][2]]]),
            frequency: s,
        },
        leakage,
    })
}

// ---------------------------------------------------------------------------
// Frequency sweep.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    Linear,
    Log,
}

/// Frequency grid for a sweep.
#[derive(Clone, Copy, Debug)]
pub struct SweepGrid {
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub points: usize,
    pub kind: GridKind,
}

impl SweepGrid {
    pub fn frequencies(&self) -> Result<Vec<f64>, SolveError> {
        if self.points < 2 {
            return Err(SolveError::BadGrid("at least 2 points required"));
        }
        if !(self.f_lo_hz.is_finite() && self.f_lo_hz > 0.0 && self.f_hi_hz > self.f_lo_hz) {
            return Err(SolveError::BadGrid("need 0 < f_lo < f_hi"));
        }
        let n = self.points;
        Ok((0..n)
            .map(|k| {
                let frac = k as f64 / (n - 1) as f64;
                match self.kind {
                    GridKind::Linear => self.f_lo_hz + (self.f_hi_hz - self.f_lo_hz) * frac,
                    GridKind::Log => self.f_lo_hz * (self.f_hi_hz / self.f_lo_hz).powf(frac),
                }
            })
            .collect())
    }
}

/// Outcome at one sweep frequency: last-cell node voltages, or the resonance
/// that prevented the solve.
#[derive(Clone, Debug)]
pub enum SweepOutcome {
    Voltages([Complex64; 3]),
    Resonant { condition: f64 },
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub f_hz: f64,
    pub outcome: SweepOutcome,
}

/// Evaluate the circuit on a frequency grid with a fixed drive vector
/// (length 3N). Resonant grid points are reported per row and the sweep
/// continues; rows are ordered by frequency.
pub fn frequency_sweep(
    circuit: &ChainCircuit,
    catalog: &Catalog,
    grid: &SweepGrid,
    i_in: &[Complex64],
) -> Result<Vec<SweepRow>, SolveError> {
    let freqs = grid.frequencies()?;
    circuit.validate(catalog)?;
    if i_in.len() != 3 * circuit.cells {
        return Err(SolveError::SizeMismatch {
            expected: 3 * circuit.cells,
            got: i_in.len(),
        });
    }
    let mut rows = Vec::with_capacity(freqs.len());
    for f in freqs {
        let s = crate::s_at_hz(f);
        let y = assemble(circuit, catalog, s)?;
        let outcome = match solve_direct(&y, i_in) {
            Ok(v) => {
                let n = v.len();
                SweepOutcome::Voltages([v[n - 3], v[n - 2], v[n - 1]])
            }
            Err(SolveError::Resonant { condition }) => SweepOutcome::Resonant { condition },
            Err(other) => return Err(other),
        };
        rows.push(SweepRow { f_hz: f, outcome });
    }
    Ok(rows)
}

/// CSV rendering of a sweep (`f_hz,node,re_v,im_v,mag_v,phase_deg`); resonant
/// rows carry no data and are omitted.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("f_hz,node,re_v,im_v,mag_v,phase_deg\n");
    for row in rows {
        if let SweepOutcome::Voltages(v) = &row.outcome {
            for (node, value) in v.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.f_hz,
                    node + 1,
                    value.re,
                    value.im,
                    value.norm(),
                    phase_deg(*value),
                ));
            }
        }
    }
    out
}
