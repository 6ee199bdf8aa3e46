//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::quaternionic::C64;

/// Singular value decomposition whose right singular vectors always span the
/// whole domain.
struct FullSvd {
    singular: Vec<f64>,
    /// Columns are right singular vectors, aligned with `singular`.
    v: DMatrix<f64>,
    u: DMatrix<f64>,
}

fn full_svd(m: &DMatrix<f64>) -> FullSvd {
    let (rows, cols) = m.shape();
    // Wide matrices get zero rows appended; a thin SVD of a tall matrix
    // already yields a complete set of right singular vectors.
    let padded = if rows < cols {
        let mut sq = DMatrix::<f64>::zeros(cols, cols);
        sq.view_mut((0, 0), (rows, cols)).copy_from(m);
        sq
    } else {
        m.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let singular = svd.singular_values.iter().copied().collect();
    FullSvd {
        singular,
        v: v_t.transpose(),
        u: u.rows(0, rows).into_owned(),
    }
}

/// Largest singular value (spectral norm).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Moore–Penrose pseudoinverse with a cutoff relative to the largest singular
/// value. Returns the pseudoinverse and the numerical rank.
pub fn pinv(m: &DMatrix<f64>, rel_cutoff: f64) -> (DMatrix<f64>, usize) {
    let (rows, cols) = m.shape();
    if m.is_empty() {
        return (DMatrix::zeros(cols, rows), 0);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    let mut out = DMatrix::zeros(cols, rows);
    let mut rank = 0;
    if smax == 0.0 {
        return (out, 0);
    }
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_cutoff * smax {
            rank += 1;
            out += (v_t.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    (out, rank)
}

/// Orthonormal basis (as columns) of the null space of `m`, using singular
/// values `≤ rel_cutoff · σ_max` as zero. A zero matrix has the whole domain as
/// kernel.
pub fn null_space(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    if m.is_empty() {
        return null_space_below(m, 0.0);
    }
    null_space_below(m, rel_cutoff * spectral_norm(m))
}

/// Null space with an absolute cutoff: singular values `≤ tol` count as zero.
/// Use when the natural scale of `m` is known independently of `m` itself,
/// e.g. when `m` may be pure rounding noise.
pub fn null_space_below(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let svd = full_svd(m);
    let keep: Vec<usize> = (0..svd.singular.len()).filter(|&k| svd.singular[k] <= tol).collect();
    let mut out = DMatrix::zeros(cols, keep.len());
    for (j, &k) in keep.iter().enumerate() {
        out.set_column(j, &svd.v.column(k));
    }
    out
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn column_space(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = full_svd(m);
    let smax = svd.singular.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(rows, 0);
    }
    let keep: Vec<usize> = (0..svd.singular.len())
        .filter(|&k| svd.singular[k] > rel_cutoff * smax)
        .collect();
    let mut out = DMatrix::zeros(rows, keep.len());
    for (j, &k) in keep.iter().enumerate() {
        out.set_column(j, &svd.u.column(k));
    }
    out
}

/// Euclidean distance from `v` to the span of the orthonormal columns of
/// `basis`.
pub fn distance_to_span(v: &DVector<f64>, basis: &DMatrix<f64>) -> f64 {
    if basis.ncols() == 0 {
        return v.norm();
    }
    let coeffs = basis.transpose() * v;
    (v - basis * coeffs).norm()
}

/// Eigenvalues of a symmetric matrix in ascending order, with the matching
/// eigenvectors as columns.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

/// Real `2n × 2n` matrix of a complex `n × n` matrix in interleaved
/// `(Re, Im)` coordinates.
pub fn complex_to_real(c: &DMatrix<C64>) -> DMatrix<f64> {
    let (r, k) = c.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * k);
    for i in 0..r {
        for j in 0..k {
            let z = c[(i, j)];
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    out
}

/// Block diagonal matrix from a list of square blocks.
pub fn block_diag<T: nalgebra::Scalar + num_traits::Zero>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::from_element(n, m, T::zero());
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Frobenius norm of `a − b` relative to `scale`, or the absolute norm when
/// the scale vanishes.
pub fn relative_diff(a: &DMatrix<f64>, b: &DMatrix<f64>, scale: f64) -> f64 {
    let d = (a - b).norm();
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = null_space(&m, 1e-12);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_zero_is_everything() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert_eq!(null_space(&m, 1e-8).ncols(), 3);
    }

    #[test]
    fn pinv_of_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let (p, rank) = pinv(&m, 1e-12);
        assert_eq!(rank, 1);
        assert!((&m * &p * &m - &m).norm() < 1e-12);
    }

    #[test]
    fn complex_embedding_is_multiplicative() {
        let a = DMatrix::from_row_slice(1, 1, &[C64::new(1.0, 2.0)]);
        let b = DMatrix::from_row_slice(1, 1, &[C64::new(-0.5, 3.0)]);
        let lhs = complex_to_real(&(&a * &b));
        let rhs = complex_to_real(&a) * complex_to_real(&b);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn sorted_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
        let (vals, _) = sym_eigen_sorted(&m);
        assert!((vals[0] + 2.0).abs() < 1e-14 && (vals[1] - 2.0).abs() < 1e-14);
    }
}
