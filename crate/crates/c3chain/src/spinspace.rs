//! Complex 2x2 / 3x3 matrix algebra for the C3 symmetry transform.
//!
//! Node-space operators of a triangle cell live in 3x3 complex matrices.
//! Conjugation with the [`C3Basis`] splits them into a scalar acting on the
//! symmetric (constant) channel plus a 2x2 block acting on the doubly
//! degenerate pseudospin channel; [`block_decompose`] performs that split and
//! reports how much the two sectors mix.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;
use thiserror::Error;

/// Relative off-diagonal tolerance under which a decomposition counts as clean.
///
/// Every operator in scope is exactly block-diagonal in exact arithmetic, so
/// anything above rounding noise signals a malformed pattern.
pub const CLEAN_DECOMPOSITION_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpinError {
    #[error("pauli index {0} out of range (expected 0..=3)")]
    PauliIndex(usize),
    #[error("path product of an empty block sequence")]
    EmptyPath,
}

/// Dense 2x2 complex matrix, row-major.
#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

/// Dense 3x3 complex matrix, row-major.
#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct Mat3(pub [[Complex64; 3]; 3]);

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl Mat2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for e in row.iter_mut() {
                *e *= k;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Eigenvalues from the characteristic polynomial, in `(+root, -root)`
    /// order of the discriminant square root. No ordering is implied.
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let half_tr = self.trace() * 0.5;
        let disc = (half_tr * half_tr - self.det()).sqrt();
        [half_tr + disc, half_tr - disc]
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|e| e.norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|e| e.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|e| e.is_finite())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        for (o, r) in out.0.iter_mut().zip(rhs.0.iter()) {
            for (a, b) in o.iter_mut().zip(r.iter()) {
                *a += b;
            }
        }
        out
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        for (o, r) in out.0.iter_mut().zip(rhs.0.iter()) {
            for (a, b) in o.iter_mut().zip(r.iter()) {
                *a -= b;
            }
        }
        out
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let mut out = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = ZERO;
                for k in 0..2 {
                    acc += self.0[i][k] * rhs.0[k][j];
                }
                out.0[i][j] = acc;
            }
        }
        out
    }
}

impl Mat3 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        let mut m = Self::default();
        for i in 0..3 {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn from_real(entries: [[f64; 3]; 3]) -> Self {
        let mut m = Self::default();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = Complex64::new(entries[i][j], 0.0);
            }
        }
        m
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for e in row.iter_mut() {
                *e *= k;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::default();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.0[j][i];
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::default();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.0[j][i].conj();
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|e| e.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|e| e.is_finite())
    }

    pub fn mul_vec(&self, v: &[Complex64; 3]) -> [Complex64; 3] {
        let mut out = [ZERO; 3];
        for i in 0..3 {
            for k in 0..3 {
                out[i] += self.0[i][k] * v[k];
            }
        }
        out
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, rhs: Mat3) -> Mat3 {
        let mut out = self;
        for (o, r) in out.0.iter_mut().zip(rhs.0.iter()) {
            for (a, b) in o.iter_mut().zip(r.iter()) {
                *a += b;
            }
        }
        out
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, rhs: Mat3) -> Mat3 {
        let mut out = self;
        for (o, r) in out.0.iter_mut().zip(rhs.0.iter()) {
            for (a, b) in o.iter_mut().zip(r.iter()) {
                *a -= b;
            }
        }
        out
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, rhs: Mat3) -> Mat3 {
        let mut out = Mat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = ZERO;
                for k in 0..3 {
                    acc += self.0[i][k] * rhs.0[k][j];
                }
                out.0[i][j] = acc;
            }
        }
        out
    }
}

/// Pauli matrix `sigma_k` for `k` in `0..=3` (`sigma_0` is the identity).
pub fn pauli(k: usize) -> Result<Mat2, SpinError> {
    let i = Complex64::new(0.0, 1.0);
    match k {
        0 => Ok(Mat2::identity()),
        1 => Ok(Mat2([[ZERO, ONE], [ONE, ZERO]])),
        2 => Ok(Mat2([[ZERO, -i], [i, ZERO]])),
        3 => Ok(Mat2([[ONE, ZERO], [ZERO, -ONE]])),
        _ => Err(SpinError::PauliIndex(k)),
    }
}

/// Orthonormal symmetry-adapted basis of the C3 group.
///
/// Columns of `u` are the constant mode `phi0 = (1,1,1)/sqrt(3)` followed by
/// the two degenerate pseudospin modes `phi_s1 = (e, e*, 1)/sqrt(3)` and
/// `phi_s2 = (e*, e, 1)/sqrt(3)` with `e = exp(i 2pi/3)`. The basis is built
/// once so every caller shares bit-identical values.
#[derive(Clone, Copy, Debug)]
pub struct C3Basis {
    pub epsilon: Complex64,
    pub u: Mat3,
}

static STANDARD_BASIS: OnceLock<C3Basis> = OnceLock::new();

impl C3Basis {
    /// The shared standard basis instance.
    ///
    /// `epsilon = exp(i 2 pi / 3)` is built from its closed form
    /// `(-1/2, sqrt(3)/2)`: square roots and divisions are correctly rounded,
    /// so every build of the library shares bit-identical basis values
    /// (`sin`/`cos` carry no such guarantee).
    pub fn standard() -> &'static C3Basis {
        STANDARD_BASIS.get_or_init(|| {
            let sqrt3 = 3.0_f64.sqrt();
            let epsilon = Complex64::new(-0.5, sqrt3 / 2.0);
            let es = epsilon.conj();
            let w = Complex64::new(1.0 / sqrt3, 0.0);
            let u = Mat3([
                [w, epsilon * w, es * w],
                [w, es * w, epsilon * w],
                [w, w, w],
            ]);
            C3Basis { epsilon, u }
        })
    }

    pub fn phi0(&self) -> [Complex64; 3] {
        [self.u.0[0][0], self.u.0[1][0], self.u.0[2][0]]
    }

    pub fn phi_s1(&self) -> [Complex64; 3] {
        [self.u.0[0][1], self.u.0[1][1], self.u.0[2][1]]
    }

    pub fn phi_s2(&self) -> [Complex64; 3] {
        [self.u.0[0][2], self.u.0[1][2], self.u.0[2][2]]
    }
}

/// Result of conjugating a node-space operator with the C3 basis.
///
/// `constant` is the (constant, constant) entry, `spin` the lower-right 2x2
/// pseudospin block, and `offdiag_norm` the largest magnitude among the four
/// entries mixing the two sectors.
#[derive(Clone, Copy, Debug)]
pub struct BlockDecomposition {
    pub constant: Complex64,
    pub spin: Mat2,
    pub offdiag_norm: f64,
}

impl BlockDecomposition {
    /// Whether the sector mixing is pure rounding noise for an operator of
    /// the given norm.
    pub fn is_clean_for(&self, input_norm: f64) -> bool {
        self.offdiag_norm <= CLEAN_DECOMPOSITION_TOL * input_norm.max(f64::MIN_POSITIVE)
    }
}

/// Split a node-space operator into constant and pseudospin parts.
pub fn block_decompose(m: &Mat3, basis: &C3Basis) -> BlockDecomposition {
    let b = basis.u.adjoint() * *m * basis.u;
    let spin = Mat2([[b.0[1][1], b.0[1][2]], [b.0[2][1], b.0[2][2]]]);
    let offdiag_norm = [b.0[0][1], b.0[0][2], b.0[1][0], b.0[2][0]]
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max);
    BlockDecomposition {
        constant: b.0[0][0],
        spin,
        offdiag_norm,
    }
}

/// Left-to-right product of a non-empty sequence of pseudospin blocks.
pub fn path_product(blocks: &[Mat2]) -> Result<Mat2, SpinError> {
    let (first, rest) = blocks.split_first().ok_or(SpinError::EmptyPath)?;
    Ok(rest.iter().fold(*first, |acc, b| acc * *b))
}

/// Commutator `ab - ba`.
pub fn commutator(a: &Mat2, b: &Mat2) -> Mat2 {
    *a * *b - *b * *a
}

/// Phase of a complex value in degrees, normalized to `[-180, 180)`.
pub fn phase_deg(c: Complex64) -> f64 {
    let d = c.im.atan2(c.re).to_degrees();
    if d >= 180.0 {
        d - 360.0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mat2_close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (*a - *b).max_abs() <= tol
    }

    /// Independent conjugation oracle: computes (U^H M U)_{ij} entry by entry
    /// without going through Mat3 multiplication.
    fn conjugation_oracle(m: &Mat3, basis: &C3Basis) -> [[Complex64; 3]; 3] {
        let u = &basis.u.0;
        let mut out = [[ZERO; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = ZERO;
                for k in 0..3 {
                    for l in 0..3 {
                        acc += u[k][i].conj() * m.0[k][l] * u[l][j];
                    }
                }
                out[i][j] = acc;
            }
        }
        out
    }

    #[test]
    fn pauli_identity_case() {
        assert_eq!(pauli(0).unwrap(), Mat2::identity());
    }

    #[test]
    fn pauli_commutation_identity() {
        let s1 = pauli(1).unwrap();
        let s2 = pauli(2).unwrap();
        let s3 = pauli(3).unwrap();
        let lhs = s1 * s2 - s2 * s1;
        let rhs = s3.scale(c(0.0, 2.0));
        assert!(mat2_close(&lhs, &rhs, 0.0));
    }

    #[test]
    fn pauli_involution() {
        let s3 = pauli(3).unwrap();
        assert_eq!(s3 * s3, Mat2::identity());
    }

    #[test]
    fn pauli_rejects_out_of_range() {
        assert_eq!(pauli(4), Err(SpinError::PauliIndex(4)));
    }

    #[test]
    fn basis_is_unitary() {
        let b = C3Basis::standard();
        let gram = b.u.adjoint() * b.u;
        let dev = (gram - Mat3::identity()).max_abs();
        assert!(dev <= 1e-14, "U^H U deviates from identity by {dev}");
        let gram2 = b.u * b.u.adjoint();
        assert!((gram2 - Mat3::identity()).max_abs() <= 1e-14);
    }

    #[test]
    fn basis_columns_match_definition() {
        let b = C3Basis::standard();
        let r3 = 1.0 / 3.0_f64.sqrt();
        assert_eq!(b.phi0(), [c(r3, 0.0), c(r3, 0.0), c(r3, 0.0)]);
        let e = b.epsilon;
        assert_eq!(b.phi_s1(), [e * r3, e.conj() * r3, c(r3, 0.0)]);
        assert_eq!(b.phi_s2(), [e.conj() * r3, e * r3, c(r3, 0.0)]);
    }

    #[test]
    fn triangle_operator_decomposes_to_degenerate_pair() {
        // The triangle matrix has eigenvalues -diag(0, 3, 3) in this basis.
        let m = Mat3::from_real([[-2.0, 1.0, 1.0], [1.0, -2.0, 1.0], [1.0, 1.0, -2.0]]);
        let d = block_decompose(&m, C3Basis::standard());
        assert_eq!(d.constant, ZERO);
        assert_eq!(d.offdiag_norm, 0.0);
        let expected = Mat2::identity().scale(c(-3.0, 0.0));
        assert!(mat2_close(&d.spin, &expected, 1e-14));
    }

    #[test]
    fn identity_decomposes_to_identity() {
        let d = block_decompose(&Mat3::identity(), C3Basis::standard());
        assert!((d.constant - ONE).norm() <= 1e-15);
        assert!(d.offdiag_norm <= 1e-15);
        assert!(mat2_close(&d.spin, &Mat2::identity(), 1e-15));
    }

    #[test]
    fn node_swap_pattern_decomposes_to_sigma1() {
        let m = Mat3::from_real([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let basis = C3Basis::standard();
        let d = block_decompose(&m, basis);

        // Independent route: raw entry-by-entry conjugation.
        let o = conjugation_oracle(&m, basis);
        assert!((d.constant - o[0][0]).norm() <= 1e-15);
        let spin_oracle = Mat2([[o[1][1], o[1][2]], [o[2][1], o[2][2]]]);
        assert!(mat2_close(&d.spin, &spin_oracle, 1e-15));

        assert!((d.constant - ONE).norm() <= 1e-15);
        assert!(mat2_close(&d.spin, &pauli(1).unwrap(), 1e-15));
        assert!(d.is_clean_for(1.0));
    }

    #[test]
    fn antisymmetric_circulant_decomposes_to_i_sqrt3_sigma3() {
        // Circulant with c1 = 1, c2 = -1; its eigenvalues on the spin modes
        // are c1 w^k + c2 w^{2k} for w = exp(i 2pi/3), k = 1, 2.
        let m = Mat3::from_real([[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]]);
        let basis = C3Basis::standard();
        let d = block_decompose(&m, basis);

        let w = basis.epsilon;
        let eig1 = w - w * w;
        let eig2 = w * w - w * w * w * w;
        let oracle = Mat2([[eig1, ZERO], [ZERO, eig2]]);
        assert!(mat2_close(&d.spin, &oracle, 1e-14));

        let expected = pauli(3).unwrap().scale(c(0.0, 3.0_f64.sqrt()));
        assert!(mat2_close(&d.spin, &expected, 1e-14));
        assert_eq!(d.constant, ZERO);
        assert!(d.is_clean_for(1.0));
    }

    #[test]
    fn circulant_decompositions_are_clean() {
        // Any circulant splits exactly; check a handful with mixed signs.
        let basis = C3Basis::standard();
        for (c0, c1, c2) in [
            (1.0, 0.0, 0.0),
            (0.0, 1.0, 1.0),
            (-2.0, 1.0, 1.0),
            (1.0, -1.0, 0.0),
        ] {
            let m = Mat3::from_real([[c0, c1, c2], [c2, c0, c1], [c1, c2, c0]]);
            let d = block_decompose(&m, basis);
            assert!(
                d.offdiag_norm <= 1e-13 * m.max_abs().max(1.0),
                "circulant ({c0},{c1},{c2}) leaked {}",
                d.offdiag_norm
            );
        }
    }

    #[test]
    fn decomposition_is_linear() {
        let a = Mat3::from_real([[1.0, 2.0, 0.0], [0.0, -1.0, 3.0], [4.0, 0.0, 2.0]]);
        let b = Mat3::from_real([[0.0, 1.0, 1.0], [1.0, 0.0, -2.0], [-1.0, 2.0, 0.0]]);
        let alpha = c(2.0, -1.0);
        let beta = c(-0.5, 3.0);
        let basis = C3Basis::standard();
        let combo = a.scale(alpha) + b.scale(beta);
        let dc = block_decompose(&combo, basis);
        let da = block_decompose(&a, basis);
        let db = block_decompose(&b, basis);
        let expect_const = alpha * da.constant + beta * db.constant;
        assert!((dc.constant - expect_const).norm() <= 1e-13);
        let expect_spin = da.spin.scale(alpha) + db.spin.scale(beta);
        assert!(mat2_close(&dc.spin, &expect_spin, 1e-13));
    }

    #[test]
    fn path_product_pauli_cases() {
        let s1 = pauli(1).unwrap();
        let s2 = pauli(2).unwrap();
        let s3 = pauli(3).unwrap();
        let p12 = path_product(&[s1, s2]).unwrap();
        assert!(mat2_close(&p12, &s3.scale(c(0.0, 1.0)), 0.0));
        let p21 = path_product(&[s2, s1]).unwrap();
        assert!(mat2_close(&p21, &s3.scale(c(0.0, -1.0)), 0.0));
    }

    #[test]
    fn path_product_of_identities() {
        for k in 1..=5 {
            let blocks = vec![Mat2::identity(); k];
            assert_eq!(path_product(&blocks).unwrap(), Mat2::identity());
        }
    }

    #[test]
    fn path_product_rejects_empty() {
        assert_eq!(path_product(&[]), Err(SpinError::EmptyPath));
    }

    #[test]
    fn commutator_pauli_identity() {
        let got = commutator(&pauli(1).unwrap(), &pauli(2).unwrap());
        let expected = pauli(3).unwrap().scale(c(0.0, 2.0));
        assert!(mat2_close(&got, &expected, 0.0));
    }

    #[test]
    fn identity_commutes_with_everything() {
        let a = Mat2([[c(1.0, 2.0), c(-3.0, 0.5)], [c(0.0, -1.0), c(4.0, 4.0)]]);
        let z = commutator(&pauli(0).unwrap(), &a);
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn coupling_blocks_do_not_commute() {
        // m01 = i w C (s0 + s1), m02 = i w C (s0 + s2); their commutator is
        // -2i (w C)^2 s3, expanded through the Pauli product rules.
        let omega_c = 2.0 * std::f64::consts::PI * 15_000.0 * 2.7e-9;
        let iwc = c(0.0, omega_c);
        let m01 = (pauli(0).unwrap() + pauli(1).unwrap()).scale(iwc);
        let m02 = (pauli(0).unwrap() + pauli(2).unwrap()).scale(iwc);
        let got = commutator(&m01, &m02);
        let expected = pauli(3).unwrap().scale(c(0.0, -2.0 * omega_c * omega_c));
        assert!(mat2_close(&got, &expected, 0.0));
        assert!(got.max_abs() > 0.0);
    }
}
