//! Double-double kernels for the few places where plain `f64` loses the
//! digits that matter: Cholesky factors of Hankel-type moment matrices,
//! congruences by their (large) inverse factors, and the orthonormalization
//! of the resulting coefficient matrices.
//!
//! Inputs and outputs are `f64`; only intermediates are carried in
//! double-double, so rounded outputs are treated as exact data downstream.

use nalgebra::DMatrix;
pub(crate) use twofloat::TwoFloat;

pub(crate) type Dd = TwoFloat;

pub(crate) fn dd(x: f64) -> Dd {
    TwoFloat::from(x)
}

/// `a / b` to full double-double accuracy.
///
/// `TwoFloat`'s own quotient of two double-doubles forms the reciprocal
/// residual without a fused multiply-add, which cancels to zero and leaves an
/// `f64`-accurate result; long division by the leading word does not.
pub(crate) fn div(a: Dd, b: Dd) -> Dd {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

/// Dense row-major square matrix of double-doubles.
#[derive(Debug, Clone)]
pub(crate) struct DdMatrix {
    pub n: usize,
    pub data: Vec<Dd>,
}

impl DdMatrix {
    pub fn zeros(n: usize) -> Self {
        DdMatrix { n, data: vec![dd(0.0); n * n] }
    }

    pub fn from_f64(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        DdMatrix { n, data: (0..n * n).map(|k| dd(m[(k / n, k % n)])).collect() }
    }

    pub fn get(&self, i: usize, j: usize) -> Dd {
        self.data[i * self.n + j]
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).into())
    }
}

/// Lower Cholesky factor `C` with `A = C Cᵀ`, or `None` if a pivot is not
/// positive.
pub(crate) fn cholesky(a: &DdMatrix) -> Option<DdMatrix> {
    let s = a.n;
    let mut c = DdMatrix::zeros(s);
    for j in 0..s {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= c.get(j, k) * c.get(j, k);
        }
        if !(f64::from(diag) > 0.0) {
            return None;
        }
        let cjj = diag.sqrt();
        c.data[j * s + j] = cjj;
        for i in j + 1..s {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= c.get(i, k) * c.get(j, k);
            }
            c.data[i * s + j] = div(v, cjj);
        }
    }
    Some(c)
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub(crate) fn lower_inverse(c: &DdMatrix) -> DdMatrix {
    let s = c.n;
    let mut l = DdMatrix::zeros(s);
    for col in 0..s {
        for i in col..s {
            let mut v = if i == col { dd(1.0) } else { dd(0.0) };
            for k in col..i {
                v -= c.get(i, k) * l.get(k, col);
            }
            l.data[i * s + col] = div(v, c.get(i, i));
        }
    }
    l
}

/// `C⁻¹` rounded to `f64`, where `A = C Cᵀ`; `T A Tᵀ ≈ I`.
pub(crate) fn inverse_cholesky(a: &DdMatrix) -> Option<DMatrix<f64>> {
    cholesky(a).map(|c| lower_inverse(&c).to_f64())
}

/// `G − Σᵢ xᵢ Aᵢ` accumulated in double-double.
pub(crate) fn affine_combination(g: &DMatrix<f64>, coefficients: &[DMatrix<f64>], x: &[f64]) -> DdMatrix {
    let mut out = DdMatrix::from_f64(g);
    let n = out.n;
    for (a, &xi) in coefficients.iter().zip(x) {
        if xi == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                let v = a[(i, j)];
                if v != 0.0 {
                    out.data[i * n + j] -= TwoFloat::new_mul(v, xi);
                }
            }
        }
    }
    out
}

/// `T A Tᵀ` for `f64` inputs, exploiting sparsity of `A`.
pub(crate) fn congruence(t: &DMatrix<f64>, a: &DdMatrix) -> DdMatrix {
    let s = t.nrows();
    let n = a.n;
    let entries: Vec<(usize, usize, Dd)> = (0..n * n)
        .filter_map(|k| {
            let v = a.data[k];
            (f64::from(v) != 0.0 || v.lo() != 0.0).then_some((k / n, k % n, v))
        })
        .collect();
    let mut out = DdMatrix::zeros(s);
    if entries.len() * 4 < n * n {
        for j in 0..s {
            for i in j..s {
                let mut acc = dd(0.0);
                for &(k, l, v) in &entries {
                    let (tik, tjl) = (t[(i, k)], t[(j, l)]);
                    if tik != 0.0 && tjl != 0.0 {
                        acc += TwoFloat::new_mul(tik, tjl) * v;
                    }
                }
                out.data[i * s + j] = acc;
                out.data[j * s + i] = acc;
            }
        }
        return out;
    }
    // dense: U = A Tᵀ, then T U
    let mut u = vec![dd(0.0); n * s];
    for k in 0..n {
        for j in 0..s {
            let mut acc = dd(0.0);
            for l in 0..n {
                let tjl = t[(j, l)];
                if tjl != 0.0 {
                    acc += a.get(k, l) * tjl;
                }
            }
            u[k * s + j] = acc;
        }
    }
    for i in 0..s {
        for j in i..s {
            let mut acc = dd(0.0);
            for k in 0..n {
                let tik = t[(i, k)];
                if tik != 0.0 {
                    acc += u[k * s + j] * tik;
                }
            }
            out.data[i * s + j] = acc;
            out.data[j * s + i] = acc;
        }
    }
    out
}

fn sqrt2() -> Dd {
    dd(2.0).sqrt()
}

pub(crate) fn svec_len(s: usize) -> usize {
    s * (s + 1) / 2
}

/// Scaled lower triangle: off-diagonals carry `√2`, so Euclidean inner
/// products of `svec`s equal Frobenius inner products of the matrices.
pub(crate) fn svec(m: &DdMatrix) -> Vec<Dd> {
    let r2 = sqrt2();
    let mut out = Vec::with_capacity(svec_len(m.n));
    for j in 0..m.n {
        for i in j..m.n {
            out.push(if i == j { m.get(i, j) } else { m.get(i, j) * r2 });
        }
    }
    out
}

pub(crate) fn unsvec(v: &[Dd], s: usize) -> DMatrix<f64> {
    unsvec_dd(v, s).to_f64()
}

pub(crate) fn unsvec_dd(v: &[Dd], s: usize) -> DdMatrix {
    let r2 = sqrt2();
    let mut m = DdMatrix::zeros(s);
    let mut idx = 0;
    for j in 0..s {
        for i in j..s {
            let x = if i == j { v[idx] } else { div(v[idx], r2) };
            m.data[i * s + j] = x;
            m.data[j * s + i] = x;
            idx += 1;
        }
    }
    m
}

pub(crate) fn dot(a: &[Dd], b: &[Dd]) -> Dd {
    a.iter().zip(b).fold(dd(0.0), |acc, (x, y)| acc + *x * *y)
}

/// Thin QR by classical Gram–Schmidt with one reorthogonalization pass.
/// Returns orthonormal columns and upper-triangular `R` (row-major, `m × m`),
/// or the index of the first numerically dependent column.
pub(crate) fn gram_schmidt(cols: Vec<Vec<Dd>>, rel_tol: f64) -> std::result::Result<(Vec<Vec<Dd>>, Vec<Dd>), usize> {
    let m = cols.len();
    let mut r = vec![dd(0.0); m * m];
    let mut q: Vec<Vec<Dd>> = Vec::with_capacity(m);
    for (k, mut v) in cols.into_iter().enumerate() {
        let own = f64::from(dot(&v, &v).sqrt());
        for _ in 0..2 {
            let coeffs: Vec<Dd> = q.iter().map(|qi| dot(qi, &v)).collect();
            for (i, (qi, c)) in q.iter().zip(&coeffs).enumerate() {
                for (vt, qt) in v.iter_mut().zip(qi) {
                    *vt -= *c * *qt;
                }
                r[i * m + k] += *c;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if !(f64::from(norm) > rel_tol * own) {
            return Err(k);
        }
        r[k * m + k] = norm;
        for vt in v.iter_mut() {
            *vt = div(*vt, norm);
        }
        q.push(v);
    }
    Ok((q, r))
}

/// Solves `R x = b` for upper-triangular row-major `R`.
pub(crate) fn upper_solve(r: &[Dd], b: &[f64]) -> Vec<f64> {
    let m = b.len();
    let mut x = vec![dd(0.0); m];
    for i in (0..m).rev() {
        let mut v = dd(b[i]);
        for k in i + 1..m {
            v -= r[i * m + k] * x[k];
        }
        x[i] = div(v, r[i * m + i]);
    }
    x.into_iter().map(f64::from).collect()
}

/// Solves `Rᵀ x = b` for upper-triangular row-major `R`.
pub(crate) fn upper_transpose_solve_dd(r: &[Dd], b: &[f64]) -> Vec<Dd> {
    let m = b.len();
    let mut x = vec![dd(0.0); m];
    for i in 0..m {
        let mut v = dd(b[i]);
        for k in 0..i {
            v -= r[k * m + i] * x[k];
        }
        x[i] = div(v, r[i * m + i]);
    }
    x
}

/// `R x` for upper-triangular row-major `R`.
pub(crate) fn upper_mul(r: &[Dd], x: &[f64]) -> Vec<f64> {
    let m = x.len();
    (0..m)
        .map(|i| {
            let mut v = dd(0.0);
            for k in i..m {
                v += r[i * m + k] * x[k];
            }
            v.into()
        })
        .collect()
}
