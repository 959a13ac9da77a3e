//! Drive encoding, channel decomposition and transfer signatures.
//!
//! Input currents for a three-node cell are parameterized on the Bloch
//! sphere: a constant-channel amplitude plus a pseudospin amplitude whose
//! direction is given by the polar/azimuthal pair `(eta, kappa)`. Outputs
//! decompose back into the same channels by inner products with the
//! orthonormal C3 basis.
//!
//! The [`TransferSignature`] is the 3-complex search key used by inverse
//! design: the constant-channel coefficient followed by the two pseudospin
//! eigenvalues in a deterministic lexicographic order.

use crate::catalog::Catalog;
use crate::lattice::ChainCircuit;
use crate::solver::{
    extract_blocks, transfer_closed_form, transfer_numeric, SolveError, TransferResult,
};
use crate::spinspace::{C3Basis, Mat2};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use crate::spinspace::phase_deg;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("spin amplitude must be finite and >= 0, got {0}")]
    BadSpinAmplitude(f64),
    #[error("constant amplitude must be finite, got {0}")]
    BadConstantAmplitude(f64),
    #[error("eta must lie in [0, pi], got {0}")]
    BadEta(f64),
    #[error("kappa must lie in [0, 2 pi), got {0}")]
    BadKappa(f64),
    #[error("waveform needs periods >= 1, got {0}")]
    BadPeriods(usize),
    #[error("waveform needs samples_per_period >= 8, got {0}")]
    BadSampleRate(usize),
    #[error("waveform frequency must be > 0, got {0}")]
    BadFrequency(f64),
}

/// Bloch-sphere parameterization of a three-node drive current.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochState {
    /// Constant-channel amplitude, amperes.
    pub i0: f64,
    /// Pseudospin amplitude, amperes (non-negative).
    pub i_s: f64,
    /// Polar angle in radians, `[0, pi]`.
    pub eta: f64,
    /// Azimuthal angle in radians, `[0, 2 pi)`.
    pub kappa: f64,
}

impl BlochState {
    pub fn new(i0: f64, i_s: f64, eta: f64, kappa: f64) -> Result<Self, SignalError> {
        if !i0.is_finite() {
            return Err(SignalError::BadConstantAmplitude(i0));
        }
        if !(i_s.is_finite() && i_s >= 0.0) {
            return Err(SignalError::BadSpinAmplitude(i_s));
        }
        if !(0.0..=std::f64::consts::PI).contains(&eta) {
            return Err(SignalError::BadEta(eta));
        }
        if !(0.0..2.0 * std::f64::consts::PI).contains(&kappa) {
            return Err(SignalError::BadKappa(kappa));
        }
        Ok(BlochState {
            i0,
            i_s,
            eta,
            kappa,
        })
    }
}

/// Node currents of a Bloch state:
/// `i0 phi0 + i_s (cos(eta/2) phi_s1 + sin(eta/2) e^{i kappa} phi_s2)`.
pub fn encode_bloch(state: &BlochState) -> [Complex64; 3] {
    let basis = C3Basis::standard();
    let c1 = Complex64::new(state.i_s * (state.eta / 2.0).cos(), 0.0);
    let c2 = Complex64::from_polar(state.i_s * (state.eta / 2.0).sin(), state.kappa);
    let phi0 = basis.phi0();
    let phi1 = basis.phi_s1();
    let phi2 = basis.phi_s2();
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for node in 0..3 {
        out[node] = phi0[node] * state.i0 + phi1[node] * c1 + phi2[node] * c2;
    }
    out
}

/// Channel coefficients of a three-node vector by inner products with the
/// orthonormal basis; inverse of [`encode_bloch`] on its image.
pub fn decompose_channels(v: &[Complex64; 3]) -> (Complex64, Complex64, Complex64) {
    let basis = C3Basis::standard();
    let dot = |basis_vec: [Complex64; 3]| {
        basis_vec
            .iter()
            .zip(v.iter())
            .map(|(b, x)| b.conj() * x)
            .sum::<Complex64>()
    };
    (dot(basis.phi0()), dot(basis.phi_s1()), dot(basis.phi_s2()))
}

/// 3-complex search key: constant-channel coefficient plus the pseudospin
/// eigenvalue pair sorted lexicographically by `(re, im)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferSignature {
    pub vec: [Complex64; 3],
}

impl TransferSignature {
    pub fn new(constant: Complex64, spin_block: &Mat2) -> Self {
        let mut eigs = spin_block.eigenvalues();
        if (eigs[1].re, eigs[1].im) < (eigs[0].re, eigs[0].im) {
            eigs.swap(0, 1);
        }
        TransferSignature {
            vec: [constant, eigs[0], eigs[1]],
        }
    }

    pub fn from_transfer(result: &TransferResult) -> Self {
        Self::new(result.constant_coeff, &result.spin_block)
    }

    pub fn is_finite(&self) -> bool {
        self.vec.iter().all(|e| e.is_finite())
    }
}

impl Serialize for TransferSignature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw: [[f64; 2]; 3] = [
            [self.vec[0].re, self.vec[0].im],
            [self.vec[1].re, self.vec[1].im],
            [self.vec[2].re, self.vec[2].im],
        ];
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TransferSignature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw: [[f64; 2]; 3] = Deserialize::deserialize(deserializer)?;
        Ok(TransferSignature {
            vec: [
                Complex64::new(raw[0][0], raw[0][1]),
                Complex64::new(raw[1][0], raw[1][1]),
                Complex64::new(raw[2][0], raw[2][1]),
            ],
        })
    }
}

/// Transfer signature of a circuit at complex frequency `s`.
///
/// Uses the closed-form constant channel for 3- and 4-cell chains and the
/// numeric chain inversion otherwise; the pseudospin channel is always the
/// numeric inversion.
pub fn signature(
    circuit: &ChainCircuit,
    catalog: &Catalog,
    s: Complex64,
) -> Result<TransferSignature, SolveError> {
    let blocks = extract_blocks(circuit, catalog, s)?;
    let result = match blocks.n_cells() {
        3 | 4 => transfer_closed_form(&blocks)?,
        _ => transfer_numeric(&blocks)?,
    };
    Ok(TransferSignature::from_transfer(&result))
}

/// Steady-state time samples of one voltage phasor.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    /// `(t_seconds, volts)` samples, uniformly spaced.
    pub samples: Vec<(f64, f64)>,
    pub frequency: f64,
}

/// Sample `Re[phasor e^{i 2 pi f t}]` over an integer number of periods.
pub fn waveform(
    phasor: Complex64,
    f_hz: f64,
    periods: usize,
    samples_per_period: usize,
) -> Result<Waveform, SignalError> {
    if periods < 1 {
        return Err(SignalError::BadPeriods(periods));
    }
    if samples_per_period < 8 {
        return Err(SignalError::BadSampleRate(samples_per_period));
    }
    if !(f_hz.is_finite() && f_hz > 0.0) {
        return Err(SignalError::BadFrequency(f_hz));
    }
    let total = periods * samples_per_period;
    let dt = 1.0 / (f_hz * samples_per_period as f64);
    let samples = (0..total)
        .map(|k| {
            let t = k as f64 * dt;
            let angle = 2.0 * std::f64::consts::PI * f_hz * t;
            let v = (phasor * Complex64::from_polar(1.0, angle)).re;
            (t, v)
        })
        .collect();
    Ok(Waveform {
        samples,
        frequency: f_hz,
    })
}

/// CSV rendering of a waveform (`t_s,v_volts`).
pub fn waveform_csv(w: &Waveform) -> String {
    let mut out = String::from("t_s,v_volts\n");
    for (t, v) in &w.samples {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}
