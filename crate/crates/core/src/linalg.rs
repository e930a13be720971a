//! Small dense linear-algebra helpers on top of nalgebra.

use crate::{Mat, Vector};
use nalgebra::SymmetricEigen;

/// `(A + Aᵀ) / 2`.
pub fn sym_part(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues and eigenvectors of a symmetric matrix, ascending.
pub fn sym_eigen(a: &Mat) -> (Vector, Mat) {
    let n = a.nrows();
    if n == 0 {
        return (Vector::zeros(0), Mat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(sym_part(a));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = Vector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = Mat::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        // Fix the sign so that the largest-magnitude entry is positive.
        let mut best = 0;
        for r in 0..n {
            if v[r].abs() > v[best].abs() + 1e-12 {
                best = r;
            }
        }
        if v[best] < 0.0 {
            v = -v;
        }
        vecs.set_column(k, &v);
    }
    (vals, vecs)
}

pub fn min_eigenvalue(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(sym_part(a))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(sym_part(a))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Tolerance for PSD tests, scaled to the matrix magnitude.
pub fn psd_tol(a: &Mat, tol: f64) -> f64 {
    tol * (1.0 + a.amax())
}

/// Factor `H ⪰ 0` as `FᵀF` with `F` of full row rank. Eigenvalues below
/// `tol` are dropped; the caller is responsible for having checked PSD-ness.
pub fn psd_factor(h: &Mat, tol: f64) -> Mat {
    let (vals, vecs) = sym_eigen(h);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > tol).collect();
    let mut f = Mat::zeros(keep.len(), h.ncols());
    for (r, &i) in keep.iter().enumerate() {
        let s = vals[i].sqrt();
        for c in 0..h.ncols() {
            f[(r, c)] = s * vecs[(c, i)];
        }
    }
    f
}

/// Moore-Penrose right inverse `Bᵀ(BBᵀ)⁻¹` of a full-row-rank matrix.
pub fn right_pinv(b: &Mat) -> Option<Mat> {
    let bbt = b * b.transpose();
    let inv = bbt.try_inverse()?;
    Some(b.transpose() * inv)
}

pub fn frobenius(a: &Mat) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
