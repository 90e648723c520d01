use nalgebra::DMatrix;
use proptest::prelude::*;

use moment_split::atoms::{candidate_atoms, extract_atoms, flatness_scan, numerical_rank, ExtractOptions};
use moment_split::io::{from_json_str, to_json_string};
use moment_split::moments::{
    basis_expansion_matrices, build_moment_matrix, quadratic_form, riesz, MomentSequence, Polynomial,
};
use moment_split::multi_index::{basis_size, enumerate_basis};

/// Moments of a random finitely atomic measure: a valid sequence of any rank.
fn atomic_sequence(n: usize, degree: usize) -> impl Strategy<Value = MomentSequence> {
    prop::collection::vec((prop::collection::vec(-1.5..1.5f64, n), 0.05..1.0f64), 1..6)
        .prop_map(move |atoms| {
            let (points, weights): (Vec<_>, Vec<_>) = atoms.into_iter().unzip();
            MomentSequence::atomic(&points, &weights, degree)
        })
}

fn raw_sequence(n: usize, degree: usize) -> impl Strategy<Value = MomentSequence> {
    prop::collection::vec(-10.0..10.0f64, basis_size(n, degree))
        .prop_map(move |v| MomentSequence::new(n, degree, v, "").unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moment_matrix_is_linear(
        (a, b) in (1usize..=2).prop_flat_map(|n| (raw_sequence(n, 4), raw_sequence(n, 4))),
        s in -3.0..3.0f64,
        t in -3.0..3.0f64,
    ) {
        let combined = a.combine(s, &b, t).unwrap();
        let lhs = build_moment_matrix(&combined, 2).unwrap().into_entries();
        let rhs = build_moment_matrix(&a, 2).unwrap().into_entries() * s + build_moment_matrix(&b, 2).unwrap().into_entries() * t;
        prop_assert!((lhs - rhs).amax() <= 1e-12 * (1.0 + s.abs() + t.abs()) * 10.0);
    }

    #[test]
    fn expansion_reassembles_the_moment_matrix(z in (1usize..=3).prop_flat_map(|n| raw_sequence(n, 4))) {
        let expansion = basis_expansion_matrices(z.dim(), 2);
        let m = build_moment_matrix(&z, 2).unwrap().into_entries();
        prop_assert_eq!(expansion.assemble(z.values()), m);
    }

    #[test]
    fn riesz_of_a_square_is_the_quadratic_form(
        (z, f) in (1usize..=2).prop_flat_map(|n| (
            atomic_sequence(n, 6),
            prop::collection::vec(-2.0..2.0f64, basis_size(n, 3)),
        )),
    ) {
        let basis = enumerate_basis(z.dim(), 3);
        let poly = Polynomial::from_coefficients(&basis, &f);
        let lhs = riesz(&z, &poly.mul(&poly)).unwrap();
        let rhs = quadratic_form(build_moment_matrix(&z, 3).unwrap().entries(), &f);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()), "{} vs {}", lhs, rhs);
        // a square integrates to something nonnegative against a measure
        prop_assert!(lhs >= -1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn numerical_rank_ignores_positive_scaling(z in atomic_sequence(1, 8), scale in 1e-6..1e6f64) {
        let m = build_moment_matrix(&z, 4).unwrap().into_entries();
        let a = numerical_rank(&m, 6).unwrap();
        let b = numerical_rank(&(m * scale), 6).unwrap();
        prop_assert_eq!(a.detected_rank, b.detected_rank);
    }

    #[test]
    fn moment_files_round_trip(z in (1usize..=3).prop_flat_map(|n| raw_sequence(n, 3))) {
        let text = to_json_string(&z);
        let back = from_json_str(&text).unwrap();
        prop_assert_eq!(back.values(), z.values());
        prop_assert_eq!(to_json_string(&back), text);
    }

    #[test]
    fn separated_atoms_are_reconstructed(
        points in prop::sample::subsequence((0..9).map(|k| -0.8 + 0.2 * k as f64).collect::<Vec<_>>(), 1..4),
        weights in prop::collection::vec(0.2..1.0f64, 3),
    ) {
        let pts: Vec<Vec<f64>> = points.iter().map(|&x| vec![x]).collect();
        let w = &weights[..pts.len()];
        let z = MomentSequence::atomic(&pts, w, 12);
        let atoms = candidate_atoms(&z, 6, 6, &ExtractOptions::default()).unwrap().expect("flat");
        prop_assert_eq!(atoms.len(), pts.len());
        prop_assert!(atoms.residual <= 1e-8, "residual {}", atoms.residual);
        for (x, p) in atoms.points.iter().zip(&points) {
            prop_assert!((x[0] - p).abs() <= 1e-6);
        }
    }
}

#[test]
fn two_atom_hankel_flattens_at_order_one() {
    let z = MomentSequence::atomic(&[vec![0.4], vec![0.5]], &[0.5, 0.5], 8);
    assert_eq!(flatness_scan(&z, 4, 6).unwrap(), Some((1, 2)));
}

#[test]
fn extraction_is_deterministic_for_a_seed() {
    let z = MomentSequence::atomic(&[vec![1.0, 2.0], vec![-2.0, 1.0], vec![0.5, -0.5]], &[0.3, 0.3, 0.4], 8);
    let (k, r) = flatness_scan(&z, 4, 6).unwrap().unwrap();
    let opts = ExtractOptions { seed: 11, ..Default::default() };
    let a = extract_atoms(&z, k, r, &opts).unwrap();
    let b = extract_atoms(&z, k, r, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn numerical_rank_of_a_noisy_dirac_matrix() {
    let z = MomentSequence::atomic(&[vec![0.4]], &[1.0], 6);
    let m = build_moment_matrix(&z, 3).unwrap().into_entries() + DMatrix::identity(4, 4) * 1e-10;
    let profile = numerical_rank(&m, 6).unwrap();
    assert_eq!(profile.detected_rank, 1);
    assert!(profile.gap_ratio < 1e-6);
}
