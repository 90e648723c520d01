//! Independent oracles shared by the integration and acceptance tests.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use moment_split::solver::{ConicProgram, LmiBlock};

/// Optimum of `max c·x s.t. rows·x ≤ rhs` by enumerating every vertex.
pub fn lp_by_vertices(c: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> (f64, Vec<f64>) {
    let n = c.len();
    let m = rows.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |i, j| rows[subset[i]][j]);
        let b = nalgebra::DVector::from_fn(n, |i, _| rhs[subset[i]]);
        if let Some(x) = a.lu().solve(&b) {
            let feasible = rows.iter().zip(rhs).all(|(r, h)| r.iter().zip(x.iter()).map(|(a, x)| a * x).sum::<f64>() <= h + 1e-9);
            if feasible {
                let val: f64 = c.iter().zip(x.iter()).map(|(c, x)| c * x).sum();
                if best.as_ref().map_or(true, |(v, _)| val > *v) {
                    best = Some((val, x.iter().copied().collect()));
                }
            }
        }
        // next n-subset of 0..m in lexicographic order
        let mut i = n;
        while i > 0 && subset[i - 1] == m - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        subset[i - 1] += 1;
        for j in i..n {
            subset[j] = subset[j - 1] + 1;
        }
    }
    best.expect("bounded feasible LP")
}

/// A random LP `max c·x, rows·x ≤ rhs` with `x = 0` strictly feasible and a
/// box keeping it bounded, written as diagonal LMI blocks.
pub fn random_diagonal_program(rng: &mut ChaCha8Rng) -> (ConicProgram, Vec<Vec<f64>>, Vec<f64>) {
    let n = rng.gen_range(1..=3);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut r = vec![0.0; n];
            r[i] = sign;
            rows.push(r);
            rhs.push(rng.gen_range(1.0..3.0));
        }
    }
    for _ in 0..rng.gen_range(2..6) {
        rows.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        rhs.push(rng.gen_range(0.2..1.5));
    }
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

    // split the rows into up to three diagonal blocks
    let mut blocks = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let len = rng.gen_range(1..=(rows.len() - start).min(4));
        let idx: Vec<usize> = (start..start + len).collect();
        blocks.push(LmiBlock {
            constant: DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(len, idx.iter().map(|&k| rhs[k]))),
            coefficients: (0..n)
                .map(|v| DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(len, idx.iter().map(|&k| rows[k][v]))))
                .collect(),
        });
        start += len;
    }
    let labels = (0..n).map(|i| format!("x{i}")).collect();
    (ConicProgram { objective: c, blocks, labels }, rows, rhs)
}
