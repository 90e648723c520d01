use moment_split::atoms::{candidate_atoms, eigen_gap_monitor, extract_atoms, flatness_scan, ExtractOptions};
use moment_split::decomposition::{solve_decomposition, SolveOptions};
use moment_split::measures::{exact_moments, MeasureSpec};
use moment_split::moments::MomentSequence;
use moment_split::scenarios::Scenario;

fn sorted_points(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p
}

#[test]
fn single_dirac_gives_one_atom() {
    let z = MomentSequence::atomic(&[vec![0.4]], &[1.0], 4);
    let atoms = extract_atoms(&z, 1, 1, &ExtractOptions::default()).unwrap();
    assert_eq!(atoms.len(), 1);
    assert!((atoms.points[0][0] - 0.4).abs() < 1e-12);
    assert!((atoms.weights[0] - 1.0).abs() < 1e-12);
}

#[test]
fn exact_two_point_singular_part() {
    let psi = MeasureSpec::mixture(vec![
        (0.5, MeasureSpec::Dirac { point: vec![0.4] }),
        (0.5, MeasureSpec::Dirac { point: vec![0.5] }),
    ]);
    let z = exact_moments(&psi, 6).unwrap();
    let atoms = extract_atoms(&z, 2, 2, &ExtractOptions::default()).unwrap();
    let pts = sorted_points(&atoms.points);
    assert!((pts[0][0] - 0.4).abs() < 1e-6 && (pts[1][0] - 0.5).abs() < 1e-6, "{pts:?}");
    for w in &atoms.weights {
        assert!((w - 0.5).abs() < 1e-6);
    }
}

#[test]
fn exact_planar_atoms() {
    let z = MomentSequence::atomic(&[vec![1.0, 2.0], vec![-2.0, 1.0]], &[0.5, 0.5], 8);
    let atoms = candidate_atoms(&z, 4, 6, &ExtractOptions::default()).unwrap().unwrap();
    let pts = sorted_points(&atoms.points);
    let expected = [[-2.0, 1.0], [1.0, 2.0]];
    for (p, e) in pts.iter().zip(expected) {
        assert!((p[0] - e[0]).abs() < 1e-6 && (p[1] - e[1]).abs() < 1e-6, "{pts:?}");
    }
    assert!(atoms.residual < 1e-8);
}

#[test]
fn small_noise_moves_atoms_little() {
    for (points, weights) in [
        (vec![vec![0.4]], vec![1.0]),
        (vec![vec![0.4], vec![0.5]], vec![0.5, 0.5]),
        (vec![vec![1.0, 2.0], vec![-2.0, 1.0]], vec![0.5, 0.5]),
    ] {
        let exact = MomentSequence::atomic(&points, &weights, 8);
        // deterministic entrywise noise of size ≤ 1e-8
        let noisy: Vec<f64> = exact.values().iter().enumerate().map(|(i, v)| v + 1e-8 * ((i * 7919 % 13) as f64 / 6.0 - 1.0)).collect();
        let noisy = MomentSequence::new(exact.dim(), 8, noisy, "").unwrap();
        let (k, r) = flatness_scan(&exact, 4, 6).unwrap().unwrap();
        let a = sorted_points(&extract_atoms(&exact, k, r, &ExtractOptions::default()).unwrap().points);
        let b = sorted_points(&extract_atoms(&noisy, k, r, &ExtractOptions::default()).unwrap().points);
        for (p, q) in a.iter().zip(&b) {
            for (x, y) in p.iter().zip(q) {
                assert!((x - y).abs() <= 1e-4, "{a:?} vs {b:?}");
            }
        }
    }
}

#[test]
fn flatness_examples() {
    let uniform = exact_moments(&MeasureSpec::UniformInterval { a: 0.0, b: 1.0 }, 8).unwrap();
    assert_eq!(flatness_scan(&uniform, 4, 6).unwrap(), None);
    assert_eq!(flatness_scan(&MomentSequence::zeros(1, 8), 4, 6).unwrap(), Some((0, 0)));
    assert!(candidate_atoms(&uniform, 4, 6, &ExtractOptions::default()).unwrap().is_none());
}

#[test]
fn gap_monitor_on_exact_diracs_and_zero() {
    let dirac = MomentSequence::atomic(&[vec![0.4]], &[1.0], 12);
    let levels: Vec<_> = (3..=6).map(|d| (d, dirac.truncate(2 * d).unwrap())).collect();
    let report = eigen_gap_monitor(&levels, 3, 6).unwrap();
    assert_eq!(report.group_size, 1);
    for level in &report.levels {
        assert_eq!(level.eigenvalues.iter().filter(|e| e.abs() > 1e-12).count(), 1);
    }
    let zero = eigen_gap_monitor(&[(3, MomentSequence::zeros(1, 6))], 3, 6).unwrap();
    assert!(zero.levels[0].eigenvalues.iter().all(|&e| e == 0.0));
}

#[test]
fn tail_shrinks_along_the_hierarchy() {
    let options = SolveOptions::default();
    let levels: Vec<_> = (3..=9)
        .map(|d| {
            let problem = Scenario::Ex1.problem(0.5, d).unwrap();
            (d, solve_decomposition(&problem, &options).unwrap().v)
        })
        .collect();
    let report = eigen_gap_monitor(&levels, 2, 6).unwrap();
    // the tail falls by orders of magnitude overall, though not at every step
    let (first, last) = (report.tail_max[0], *report.tail_max.last().unwrap());
    assert!(last < 1e-3 * first, "{:?}", report.tail_max);
    assert_eq!(report.group_size, 1);
    assert!(report.top_group_above_half_eta);
}
