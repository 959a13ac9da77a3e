//! Property-based invariants across the library.

use c3chain::catalog::default_catalog;
use c3chain::datagen::{parse_prompt, prompt_text};
use c3chain::lattice::{assemble, ChainCircuit};
use c3chain::signals::{decompose_channels, encode_bloch, BlochState, TransferSignature};
use c3chain::solver::solve_direct;
use c3chain::spinspace::{block_decompose, commutator, C3Basis, Mat2, Mat3};
use num_complex::Complex64;
use proptest::prelude::*;

fn c64() -> impl Strategy<Value = Complex64> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn mat2() -> impl Strategy<Value = Mat2> {
    [c64(), c64(), c64(), c64()].prop_map(|[a, b, c, d]| Mat2([[a, b], [c, d]]))
}

fn mat3() -> impl Strategy<Value = Mat3> {
    proptest::collection::vec(c64(), 9).prop_map(|v| {
        let mut m = Mat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = v[3 * i + j];
            }
        }
        m
    })
}

/// Three distinct stock-catalog indices.
fn coupling_triple() -> impl Strategy<Value = [usize; 3]> {
    (0usize..48, 0usize..47, 0usize..46).prop_map(|(i, mut j, mut k)| {
        if j >= i {
            j += 1;
        }
        let (lo, hi) = (i.min(j), i.max(j));
        if k >= lo {
            k += 1;
        }
        if k >= hi {
            k += 1;
        }
        [i, j, k]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn commutator_is_antisymmetric(a in mat2(), b in mat2()) {
        let ab = commutator(&a, &b);
        let ba = commutator(&b, &a);
        let dev = (ab + ba).max_abs();
        prop_assert!(dev <= 1e-12 * ab.max_abs().max(1.0));
    }

    #[test]
    fn block_decomposition_is_linear(a in mat3(), b in mat3(), alpha in c64(), beta in c64()) {
        let basis = C3Basis::standard();
        let combo = a.scale(alpha) + b.scale(beta);
        let dc = block_decompose(&combo, basis);
        let da = block_decompose(&a, basis);
        let db = block_decompose(&b, basis);
        let expect_const = alpha * da.constant + beta * db.constant;
        let scale = combo.max_abs().max(1.0);
        prop_assert!((dc.constant - expect_const).norm() <= 1e-12 * scale);
        let expect_spin = da.spin.scale(alpha) + db.spin.scale(beta);
        prop_assert!((dc.spin - expect_spin).max_abs() <= 1e-12 * scale);
    }

    #[test]
    fn circulant_matrices_decompose_cleanly(c0 in c64(), c1 in c64(), c2 in c64()) {
        let m = Mat3([
            [c0, c1, c2],
            [c2, c0, c1],
            [c1, c2, c0],
        ]);
        let d = block_decompose(&m, C3Basis::standard());
        prop_assert!(d.offdiag_norm <= 1e-13 * m.max_abs().max(1.0));
    }

    #[test]
    fn bloch_roundtrip_recovers_channel_coefficients(
        i0 in -5.0..5.0f64,
        i_s in 0.0..5.0f64,
        eta in 0.0..std::f64::consts::PI,
        kappa in 0.0..(2.0 * std::f64::consts::PI - 1e-9),
    ) {
        let state = BlochState::new(i0, i_s, eta, kappa).unwrap();
        let nodes = encode_bloch(&state);
        let (v0, v1, v2) = decompose_channels(&nodes);
        let c1 = i_s * (eta / 2.0).cos();
        let c2 = Complex64::from_polar(i_s * (eta / 2.0).sin(), kappa);
        let scale = i0.abs().max(i_s).max(1.0);
        prop_assert!((v0 - Complex64::new(i0, 0.0)).norm() <= 1e-13 * scale);
        prop_assert!((v1 - Complex64::new(c1, 0.0)).norm() <= 1e-13 * scale);
        prop_assert!((v2 - c2).norm() <= 1e-13 * scale);
    }

    #[test]
    fn channel_power_matches_node_power(v in proptest::collection::vec(c64(), 3)) {
        let nodes = [v[0], v[1], v[2]];
        let (v0, v1, v2) = decompose_channels(&nodes);
        let node_power: f64 = nodes.iter().map(|e| e.norm_sqr()).sum();
        let channel_power = v0.norm_sqr() + v1.norm_sqr() + v2.norm_sqr();
        prop_assert!((node_power - channel_power).abs() <= 1e-12 * node_power.max(1.0));
    }

    #[test]
    fn node_solve_is_linear_in_the_drive(triple in coupling_triple(), alpha in c64()) {
        prop_assume!(alpha.norm() > 1e-3);
        let catalog = default_catalog();
        let ids: Vec<String> = triple
            .iter()
            .map(|&i| catalog.entries()[i].id.clone())
            .collect();
        let circuit = ChainCircuit::stock(ids);
        let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * 15_000.0);
        let y = assemble(&circuit, &catalog, s).unwrap();
        let mut i_in = vec![Complex64::new(0.0, 0.0); 12];
        i_in[0] = Complex64::new(0.02, 0.0);
        i_in[1] = Complex64::new(-0.01, 0.005);
        let (Ok(base), Ok(scaled)) = (
            solve_direct(&y, &i_in),
            solve_direct(&y, &i_in.iter().map(|e| e * alpha).collect::<Vec<_>>()),
        ) else {
            // Resonant candidates are legitimate; nothing to compare.
            return Ok(());
        };
        let vmax = base.iter().map(|e| e.norm()).fold(0.0, f64::max);
        for (b, s_) in base.iter().zip(scaled.iter()) {
            prop_assert!((b * alpha - s_).norm() <= 1e-9 * alpha.norm() * vmax.max(1e-30));
        }
    }

    #[test]
    fn signature_entries_stay_sorted(a in c64(), m in mat2()) {
        let sig = TransferSignature::new(a, &m);
        let x = (sig.vec[1].re, sig.vec[1].im);
        let y = (sig.vec[2].re, sig.vec[2].im);
        prop_assert!(x <= y);
    }

    #[test]
    fn prompt_roundtrips_signature_and_budget(
        entries in proptest::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 3),
        cap_steps in 0u8..20,
        res_steps in 0u8..20,
    ) {
        let sig = TransferSignature {
            vec: [
                Complex64::new(entries[0].0, entries[0].1),
                Complex64::new(entries[1].0, entries[1].1),
                Complex64::new(entries[2].0, entries[2].1),
            ],
        };
        let budget = (cap_steps as f64 * 0.5, res_steps as f64 * 0.5);
        let prompt = prompt_text(&sig, budget, 4, 3);
        let (parsed, parsed_budget) = parse_prompt(&prompt).expect("canonical prompt parses");
        prop_assert_eq!(parsed_budget, budget);
        for (p, orig) in parsed.vec.iter().zip(sig.vec.iter()) {
            prop_assert!((p.re - orig.re).abs() <= 5.001e-3 * orig.re.abs().max(1e-300));
            prop_assert!((p.im - orig.im).abs() <= 5.001e-3 * orig.im.abs().max(1e-300));
        }
    }
}

#[test]
fn index_signature_matches_direct_signature_bitwise() {
    use c3chain::design::{DesignQuery, SearchIndex};
    use c3chain::signals::signature as sig_fn;
    let catalog = default_catalog();
    let circuit = ChainCircuit::stock(vec![
        "s1p-CC-base".into(),
        "s2p-CC-base".into(),
        "is3p-CR-base".into(),
    ]);
    let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * 15_000.0);
    let direct = sig_fn(&circuit, &catalog, s).unwrap();
    let index = SearchIndex::build(&catalog, 15_000.0).unwrap();
    let query = DesignQuery {
        target: direct,
        tolerance: 1e-6,
        budget: None,
        frequency_hz: 15_000.0,
        max_results: 10,
    };
    let results = index.query(&query, &catalog);
    let planted = results
        .iter()
        .find(|r| r.circuit.couplings == circuit.couplings)
        .expect("planted triple present");
    for (a, b) in planted.achieved.vec.iter().zip(direct.vec.iter()) {
        assert_eq!(a.re.to_bits(), b.re.to_bits(), "re bits differ");
        assert_eq!(a.im.to_bits(), b.im.to_bits(), "im bits differ");
    }
}
