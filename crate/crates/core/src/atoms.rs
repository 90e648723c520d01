//! Numerical rank detection and extraction of finitely atomic measures from
//! their moments.
//!
//! The rank rule splits the spectrum of a moment matrix at the first gap of
//! `p` decades below the top; a sequence whose moment matrices have the same
//! numerical rank at two consecutive orders is taken to be atomic, and its
//! atoms are read off the joint eigenvectors of the multiplication matrices.

use nalgebra::{DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{max_asymmetry, sorted_eigen_desc};
use crate::moments::{build_moment_matrix, MomentSequence};
use crate::multi_index::{enumerate_basis, MultiIndex};

pub const DEFAULT_RANK_P: u32 = 6;
pub const DEFAULT_SEED: u64 = 0x6d6f_6d65_6e74;
/// Environment variable overriding [`DEFAULT_SEED`] in the command-line tool.
pub const SEED_ENV: &str = "MOMENT_SPLIT_SEED";

/// Eigenvalues below this multiple of the largest absolute eigenvalue (or
/// below it in absolute terms for an all-zero matrix) count as zero when the
/// matrix has no positive spectrum at all.
const ZERO_MATRIX_TOL: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankProfile {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub detected_rank: usize,
    /// Largest discarded eigenvalue over the smallest kept one; `1` when no
    /// split exists, `0` when nothing is discarded.
    pub gap_ratio: f64,
    pub threshold_p: u32,
}

/// Numerical rank of a symmetric matrix by the `10⁻ᵖ` gap rule.
///
/// Scanning from the largest eigenvalue down, the rank is the size of the
/// first leading group `A` whose smallest member `θ` dominates every
/// remaining eigenvalue `σ` by `σ/θ < 10⁻ᵖ`. Without such a split the matrix
/// is reported as full rank. Only ratios enter, so the result is invariant
/// under positive scaling.
pub fn numerical_rank(m: &DMatrix<f64>, p: u32) -> Result<RankProfile> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let scale = m.amax();
    let asym = max_asymmetry(m);
    if asym > 1e-12 * scale.max(1e-300) {
        return Err(Error::NotSymmetric(asym));
    }
    let (desc, _) = sorted_eigen_desc(m);
    let mut eigenvalues = desc.clone();
    eigenvalues.reverse();
    let size = desc.len();
    if size == 0 || desc[0] <= ZERO_MATRIX_TOL {
        return Ok(RankProfile { eigenvalues, detected_rank: 0, gap_ratio: 0.0, threshold_p: p });
    }
    let threshold = 10f64.powi(-(p as i32));
    for r in 1..size {
        let theta = desc[r - 1];
        let ratio = desc[r] / theta;
        if theta > 0.0 && ratio < threshold {
            return Ok(RankProfile { eigenvalues, detected_rank: r, gap_ratio: ratio, threshold_p: p });
        }
    }
    Ok(RankProfile { eigenvalues, detected_rank: size, gap_ratio: if size == 1 { 0.0 } else { 1.0 }, threshold_p: p })
}

/// Smallest `k ≤ d − 1` at which `M_k(v)` and `M_{k+1}(v)` have the same
/// numerical rank, as `(k, rank)`.
pub fn flatness_scan(v: &MomentSequence, d: usize, p: u32) -> Result<Option<(usize, usize)>> {
    let mut previous = numerical_rank(build_moment_matrix(v, 0)?.entries(), p)?.detected_rank;
    for k in 0..d {
        let next = numerical_rank(build_moment_matrix(v, k + 1)?.entries(), p)?.detected_rank;
        if next == previous {
            return Ok(Some((k, next)));
        }
        previous = next;
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomSet {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// `max |Σᵢ wᵢ xᵢ^α − v_α|` over the moments used by the extraction,
    /// recomputed from the points and weights.
    pub residual: f64,
}

impl AtomSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest deviation between the atoms' moments and `v` up to `degree`.
    pub fn residual_against(&self, v: &MomentSequence, degree: usize) -> f64 {
        let degree = degree.min(v.max_degree());
        v.iter()
            .filter(|(a, _)| a.total_degree() <= degree)
            .map(|(a, val)| {
                let model: f64 = self.points.iter().zip(&self.weights).map(|(x, w)| w * a.eval(x)).sum();
                (model - val).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    pub seed: u64,
    /// Relative pivot tolerance of the column echelon form.
    pub pivot_tol: f64,
    /// Largest admissible subdiagonal of the real Schur form, relative to
    /// the norm of the combined multiplication matrix.
    pub complex_tol: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { seed: DEFAULT_SEED, pivot_tol: 1e-6, complex_tol: 1e-6 }
    }
}

/// Seed from [`SEED_ENV`] when set and parseable, else [`DEFAULT_SEED`].
pub fn seed_from_env() -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_SEED)
}

/// Extracts `r` atoms from `v`, given flatness at order `k`.
///
/// The moment matrix used is `M_{k+1}(v)` when `v` reaches degree `2k + 2`
/// (rank-flat with `M_k(v)`, so every shifted pivot monomial stays inside
/// its basis) and `M_k(v)` otherwise. Weights are fitted, and the residual
/// measured, on all moments of that matrix.
pub fn extract_atoms(v: &MomentSequence, k: usize, r: usize, options: &ExtractOptions) -> Result<AtomSet> {
    if r == 0 {
        return Err(Error::ExtractionFailed("rank 0: no atoms to extract".into()));
    }
    let order = if v.max_degree() >= 2 * k + 2 { k + 1 } else { k };
    let mm = build_moment_matrix(v, order)?;
    let basis = mm.indexer().clone();
    let s = basis.len();
    if r > s {
        return Err(Error::ExtractionFailed(format!("rank {r} exceeds matrix size {s}")));
    }
    let (vals, vecs) = sorted_eigen_desc(mm.entries());
    if vals[r - 1] <= 0.0 {
        return Err(Error::ExtractionFailed(format!("eigenvalue {} of the rank-{r} factor is not positive", vals[r - 1])));
    }
    let factor = DMatrix::from_fn(s, r, |i, j| vecs[(i, j)] * vals[j].sqrt());

    let pivots = echelon_pivots(&factor, options.pivot_tol);
    if pivots.len() != r {
        return Err(Error::ExtractionFailed(format!("column echelon found {} pivots, expected {r}", pivots.len())));
    }
    let square = DMatrix::from_fn(r, r, |i, j| factor[(pivots[i], j)]);
    let inv = square
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::ExtractionFailed("singular pivot block".into()))?;
    // Echelon form: v_order(x) = U · w(x) for the pivot monomials w
    let echelon = &factor * inv;

    let n = v.dim();
    let mut mult = Vec::with_capacity(n);
    for i in 0..n {
        let shift = MultiIndex::unit(n, i);
        let mut ni = DMatrix::zeros(r, r);
        for (row, &pv) in pivots.iter().enumerate() {
            let shifted = basis.get(pv) + &shift;
            let idx = basis.index_of(&shifted).ok_or_else(|| {
                Error::ExtractionFailed(format!("shifted pivot monomial {shifted} leaves the degree-{order} basis"))
            })?;
            ni.row_mut(row).copy_from(&echelon.row(idx));
        }
        mult.push(ni);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = coeffs.iter().sum();
    coeffs.iter_mut().for_each(|c| *c /= total);
    let mut combined = DMatrix::zeros(r, r);
    for (c, ni) in coeffs.iter().zip(&mult) {
        combined += ni * *c;
    }
    let norm = combined.norm().max(1e-300);
    let (q, t) = Schur::new(combined).unpack();
    for j in 0..r.saturating_sub(1) {
        if t[(j + 1, j)].abs() > options.complex_tol * norm {
            return Err(Error::ExtractionFailed("complex eigenvalues in the multiplication matrices".into()));
        }
    }
    let mut points: Vec<Vec<f64>> = (0..r)
        .map(|j| {
            let qj = q.column(j);
            mult.iter().map(|ni| qj.dot(&(ni * qj))).collect()
        })
        .collect();
    points.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));

    // weights and residual cover every moment the extraction looked at
    let degree = (2 * order).min(v.max_degree());
    let rows = enumerate_basis(n, degree);
    let vander = DMatrix::from_fn(rows.len(), r, |a, j| rows.get(a).eval(&points[j]));
    let target = DVector::from_iterator(rows.len(), rows.iter().map(|a| v.get(a).expect("degree within v")));
    let weights = nnls(&vander, &target);
    let mass: f64 = weights.iter().sum();
    if let Some(w) = weights.iter().find(|&&w| !(w > 1e-8 * mass.abs().max(1e-300))) {
        return Err(Error::ExtractionFailed(format!("atom with non-positive weight {w:e}")));
    }
    let mut atoms = AtomSet { points, weights: weights.iter().copied().collect(), residual: 0.0 };
    atoms.residual = atoms.residual_against(v, degree);
    Ok(atoms)
}

/// Flatness scan followed by extraction; `Ok(None)` when no flat order exists
/// or the flat rank is zero.
pub fn candidate_atoms(v: &MomentSequence, d: usize, p: u32, options: &ExtractOptions) -> Result<Option<AtomSet>> {
    match flatness_scan(v, d, p)? {
        Some((k, r)) if r > 0 => extract_atoms(v, k, r, options).map(Some),
        _ => Ok(None),
    }
}

/// Rows of `f` selected greedily in basis order, keeping a row when its
/// distance to the span of the rows kept so far exceeds `tol` times the
/// largest row norm.
fn echelon_pivots(f: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let r = f.ncols();
    let max_norm = (0..f.nrows()).map(|i| f.row(i).norm()).fold(0.0, f64::max);
    let mut kept: Vec<DVector<f64>> = Vec::with_capacity(r);
    let mut pivots = Vec::with_capacity(r);
    for i in 0..f.nrows() {
        if pivots.len() == r {
            break;
        }
        let mut w = f.row(i).transpose();
        for _ in 0..2 {
            for q in &kept {
                let c = q.dot(&w);
                w -= q * c;
            }
        }
        let norm = w.norm();
        if norm > tol * max_norm {
            kept.push(w / norm);
            pivots.push(i);
        }
    }
    pivots
}

/// Lawson–Hanson nonnegative least squares: `argmin_{w ≥ 0} ‖A w − b‖`.
fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut w = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm() * b.norm().max(1.0);
    for _ in 0..3 * n + 10 {
        let grad = a.tr_mul(&(b - a * &w));
        let candidate = (0..n).filter(|&j| !passive[j] && grad[j] > tol).max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |i, k| a[(i, idx[k])]);
            let Some(z) = sub.clone().svd(true, true).solve(b, 1e-14).ok() else { return w };
            if z.iter().all(|&v| v > 0.0) {
                for (k, &j) in idx.iter().enumerate() {
                    w[j] = z[k];
                }
                break;
            }
            // step back towards the feasible region until a passive weight hits zero
            let mut alpha = 1.0f64;
            for (k, &j) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    alpha = alpha.min(w[j] / (w[j] - z[k]));
                }
            }
            for (k, &j) in idx.iter().enumerate() {
                w[j] += alpha * (z[k] - w[j]);
                if w[j] <= 1e-15 {
                    w[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapLevel {
    pub order: usize,
    /// Eigenvalues of the moment matrix at the monitored order, descending.
    pub eigenvalues: Vec<f64>,
    pub detected_rank: usize,
}

/// Eigenvalue evolution of `M_{d₀}(v^d)` across relaxation orders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapMonitorReport {
    pub monitored_order: usize,
    pub levels: Vec<GapLevel>,
    /// Numerical rank at the highest order, used as the group size `m`.
    pub group_size: usize,
    /// `η`: the smallest of the top `m` eigenvalues at the highest order.
    pub eta: f64,
    /// Whether the top `m` eigenvalues stay above `η/2` at every order.
    pub top_group_above_half_eta: bool,
    /// Largest eigenvalue outside the top group, per order.
    pub tail_max: Vec<f64>,
    /// Whether `tail_max` is nonincreasing with the order.
    pub tail_decreasing: bool,
}

/// Tracks the top eigenvalue group and the remaining tail of `M_{d₀}(v^d)`
/// over a family of solutions `(d, v^d)` sorted by `d`. Diagnostic only.
pub fn eigen_gap_monitor(levels: &[(usize, MomentSequence)], monitored_order: usize, p: u32) -> Result<GapMonitorReport> {
    let mut rows = Vec::with_capacity(levels.len());
    for (d, v) in levels {
        let m = build_moment_matrix(v, monitored_order)?;
        let profile = numerical_rank(m.entries(), p)?;
        let mut eigenvalues = profile.eigenvalues.clone();
        eigenvalues.reverse();
        rows.push(GapLevel { order: *d, eigenvalues, detected_rank: profile.detected_rank });
    }
    let group_size = rows.last().map_or(0, |l| l.detected_rank);
    let eta = match (rows.last(), group_size) {
        (Some(l), m) if m > 0 => l.eigenvalues[m - 1],
        _ => 0.0,
    };
    let top_group_above_half_eta =
        group_size == 0 || rows.iter().all(|l| l.eigenvalues.iter().take(group_size).all(|&e| e > eta / 2.0));
    let tail_max: Vec<f64> =
        rows.iter().map(|l| l.eigenvalues.iter().skip(group_size).copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let tail_decreasing = tail_max.windows(2).all(|w| w[1] <= w[0]);
    Ok(GapMonitorReport { monitored_order, levels: rows, group_size, eta, top_group_above_half_eta, tail_max, tail_decreasing })
}
