//! Small dense complex linear-algebra helpers shared by the solver modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Hermitian part `(m + m†) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entry of `|m - m†|`.
pub fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Ratio of extreme singular values; infinite for a singular matrix.
pub fn condition_number(m: &CMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Removes the components of `v` along the orthonormal `basis` columns,
/// two classical Gram-Schmidt passes. Returns the coefficients removed.
pub fn orthogonalize(v: &mut CVector, basis: &[CVector]) -> Vec<C64> {
    let mut coeffs = vec![C64::new(0.0, 0.0); basis.len()];
    for _ in 0..2 {
        for (c, q) in coeffs.iter_mut().zip(basis) {
            let h = q.dotc(v);
            v.axpy(-h, q, C64::new(1.0, 0.0));
            *c += h;
        }
    }
    coeffs
}

/// Column-pivoted Gram-Schmidt selection of a maximal numerically independent
/// subset. A column survives while its residual norm exceeds
/// `rel_tol * max_k ||columns[k]||`. Returned indices are ascending.
pub fn independent_subset(columns: &[CVector], rel_tol: f64) -> Vec<usize> {
    let scale = columns.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let threshold = rel_tol * scale;
    let mut residuals: Vec<CVector> = columns.to_vec();
    let mut basis: Vec<CVector> = Vec::new();
    let mut picked = vec![false; columns.len()];
    let mut chosen = Vec::new();
    loop {
        let best = (0..columns.len()).filter(|&k| !picked[k]).map(|k| (k, residuals[k].norm())).fold(
            None,
            |acc: Option<(usize, f64)>, (k, n)| match acc {
                Some((_, bn)) if bn >= n => acc,
                _ => Some((k, n)),
            },
        );
        let Some((k, norm)) = best else { break };
        if norm <= threshold {
            break;
        }
        picked[k] = true;
        chosen.push(k);
        let mut q = residuals[k].clone();
        orthogonalize(&mut q, &basis);
        let qn = q.norm();
        if qn <= threshold {
            break;
        }
        q.unscale_mut(qn);
        for (j, r) in residuals.iter_mut().enumerate() {
            if !picked[j] {
                let h = q.dotc(r);
                r.axpy(-h, &q, C64::new(1.0, 0.0));
            }
        }
        basis.push(q);
    }
    chosen.sort_unstable();
    chosen
}

/// Thin QR of independent columns: returns the orthonormal factor and the
/// upper-triangular `R` with `columns = Q R`.
pub fn thin_qr(columns: &[CVector]) -> (CMatrix, CMatrix) {
    let m = columns.len();
    let d = columns.first().map_or(0, |c| c.len());
    let mut basis: Vec<CVector> = Vec::with_capacity(m);
    let mut r = CMatrix::zeros(m, m);
    for (j, col) in columns.iter().enumerate() {
        let mut v = col.clone();
        let coeffs = orthogonalize(&mut v, &basis);
        for (i, c) in coeffs.into_iter().enumerate() {
            r[(i, j)] = c;
        }
        let n = v.norm();
        r[(j, j)] = C64::new(n, 0.0);
        if n > 0.0 {
            v.unscale_mut(n);
        }
        basis.push(v);
    }
    let q = if m == 0 { CMatrix::zeros(d, 0) } else { CMatrix::from_columns(&basis) };
    (q, r)
}

/// Solves `R x = b` for upper-triangular `R`.
pub fn solve_upper(r: &CMatrix, b: &CVector) -> Option<CVector> {
    r.solve_upper_triangular(b)
}

pub fn unit(n: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[k] = C64::new(1.0, 0.0);
    v
}
