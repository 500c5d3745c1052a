//! Dense complex linear algebra helpers shared by all modules.
//!
//! Thin wrappers over nalgebra specialized to the Hermitian / isometric
//! matrices this crate works with. Everything here is dimension-small
//! (tens, not thousands), so clarity beats micro-optimization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Complex scalar from a real.
#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Conjugate transpose.
#[inline]
pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// Kronecker product, first factor most significant (row-major convention).
#[inline]
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Identity matrix of side `n`.
#[inline]
pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Max abs elementwise difference.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Max abs element of a matrix.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Max abs deviation from Hermiticity.
pub fn hermitian_residual(m: &CMat) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in descending order with matching eigenvector
/// columns. The input is symmetrized first so callers may pass matrices
/// carrying roundoff. Eigenvector phases are fixed so the largest-modulus
/// component of each column is real positive.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigh needs a square matrix");
    let sym = (m + m.adjoint()).scale(0.5);
    let se = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[j].partial_cmp(&se.eigenvalues[i]).unwrap());
    let mut vals = Vec::with_capacity(n);
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vals.push(se.eigenvalues[src]);
        let col = se.eigenvectors.column(src);
        // phase fix: largest-modulus entry real positive
        let mut pivot = 0;
        let mut best = 0.0;
        for (i, x) in col.iter().enumerate() {
            if x.norm() > best {
                best = x.norm();
                pivot = i;
            }
        }
        let phase = if best > 0.0 {
            col[pivot].conj() / re(best)
        } else {
            re(1.0)
        };
        for i in 0..n {
            vecs[(i, dst)] = col[i] * phase;
        }
    }
    (vals, vecs)
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    let sym = (m + m.adjoint()).scale(0.5);
    let mut vals: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    vals
}

/// Clip a spectrum expected to be a (sub)probability distribution:
/// eigenvalues in `[-psd_tol, 0)` become 0; anything more negative is an
/// error carrying the offending value.
pub fn clip_spectrum(vals: &[f64], psd_tol: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(vals.len());
    for &v in vals {
        if v < -psd_tol {
            return Err(Error::InvalidState {
                what: "negative eigenvalue beyond tolerance".into(),
                residual: -v,
            });
        }
        out.push(v.max(0.0));
    }
    Ok(out)
}

/// Apply a real function to the clipped spectrum of a Hermitian PSD matrix:
/// `U f(lambda) U^dag`.
pub fn func_psd(m: &CMat, psd_tol: f64, f: impl Fn(f64) -> f64) -> Result<CMat> {
    let (vals, vecs) = eigh(m);
    let clipped = clip_spectrum(&vals, psd_tol)?;
    let n = m.nrows();
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = re(f(clipped[i]));
    }
    Ok(&vecs * d * vecs.adjoint())
}

/// Principal square root of a Hermitian PSD matrix.
pub fn sqrtm_psd(m: &CMat, psd_tol: f64) -> Result<CMat> {
    func_psd(m, psd_tol, f64::sqrt)
}

/// Trace norm (sum of singular values).
pub fn trace_norm(m: &CMat) -> f64 {
    m.clone().svd(false, false).singular_values.iter().sum()
}

/// Nearest unitary in Frobenius norm (polar factor), via SVD: `U V^dag`.
pub fn polar_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    u * vt
}

/// Singular values of a matrix, descending.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Orthonormalize the columns of a tall matrix (QR with the R diagonal
/// made real positive, so the result is a deterministic function of the
/// input). Requires `nrows >= ncols` and full column rank.
pub fn qr_isometry(a: &CMat) -> CMat {
    let (n, p) = a.shape();
    assert!(n >= p, "qr_isometry needs nrows >= ncols");
    let qr = a.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = q;
    for j in 0..p {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d.conj() / re(d.norm()) } else { re(1.0) };
        for i in 0..n {
            out[(i, j)] *= phase;
        }
    }
    out
}

/// Residual of the isometry property `V^dag V = I`.
pub fn isometry_residual(v: &CMat) -> f64 {
    let p = v.ncols();
    max_abs_diff(&(v.adjoint() * v), &eye(p))
}

/// Validate `V^dag V = I` against the configured tolerance.
pub fn check_isometry(v: &CMat, tol: &Tolerances) -> Result<()> {
    let r = isometry_residual(v);
    if r > tol.isometry {
        return Err(Error::InvalidIsometry {
            what: format!("{}x{} matrix has non-orthonormal columns", v.nrows(), v.ncols()),
            residual: r,
        });
    }
    Ok(())
}

/// Row-major vectorization of a matrix.
pub fn vec_rm(m: &CMat) -> CVec {
    let (r, c) = m.shape();
    CVec::from_fn(r * c, |k, _| m[(k / c, k % c)])
}

/// Inverse of [`vec_rm`].
pub fn unvec_rm(v: &CVec, rows: usize, cols: usize) -> CMat {
    assert_eq!(v.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| v[i * cols + j])
}

/// Hilbert-Schmidt inner product `tr(A^dag B)`.
pub fn hs_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re_: f64, im: f64) -> C64 {
        C64::new(re_, im)
    }

    #[test]
    fn eigh_known_hermitian() {
        // [[2, i], [-i, 2]] has eigenvalues 3 and 1.
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let (vals, vecs) = eigh(&m);
        assert_abs_diff_eq!(vals[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-12);
        // reconstruction
        let mut d = CMat::zeros(2, 2);
        d[(0, 0)] = re(vals[0]);
        d[(1, 1)] = re(vals[1]);
        let back = &vecs * d * vecs.adjoint();
        assert!(max_abs_diff(&back, &m) < 1e-12);
        // orthonormality
        assert!(isometry_residual(&vecs) < 1e-12);
    }

    #[test]
    fn qr_isometry_orthonormal_and_deterministic() {
        let a = CMat::from_fn(6, 3, |i, j| c((i * 3 + j) as f64 * 0.3 - 2.0, (i + j) as f64 * 0.7 - 1.0));
        let v1 = qr_isometry(&a);
        let v2 = qr_isometry(&a);
        assert!(isometry_residual(&v1) < 1e-12);
        assert_eq!(max_abs_diff(&v1, &v2), 0.0);
    }

    #[test]
    fn trace_norm_of_diagonal() {
        let mut m = CMat::zeros(3, 3);
        m[(0, 0)] = c(-2.0, 0.0);
        m[(1, 1)] = c(0.5, 0.0);
        m[(2, 2)] = c(0.0, 1.0);
        assert_abs_diff_eq!(trace_norm(&m), 3.5, epsilon = 1e-12);
    }

    #[test]
    fn polar_unitary_recovers_unitary_factor() {
        // m = U * P with P positive definite; polar factor is U.
        let u = qr_isometry(&CMat::from_fn(3, 3, |i, j| c((i + 2 * j) as f64 * 0.21 - 1.0, (3 * i + j) as f64 * 0.13 - 0.5)));
        let mut p = CMat::zeros(3, 3);
        p[(0, 0)] = re(2.0);
        p[(1, 1)] = re(1.0);
        p[(2, 2)] = re(0.25);
        let m = &u * &p;
        let w = polar_unitary(&m);
        assert!(max_abs_diff(&w, &u) < 1e-10);
    }

    #[test]
    fn sqrtm_squares_back() {
        let a = CMat::from_fn(4, 4, |i, j| c((i * 7 + j * 3) as f64 * 0.1, (i as f64 - j as f64) * 0.2));
        let m = &a * a.adjoint(); // PSD
        let s = sqrtm_psd(&m, 1e-10).unwrap();
        assert!(max_abs_diff(&(&s * &s), &m) < 1e-9);
    }

    #[test]
    fn kron_convention_first_factor_major() {
        // kron(diag(1,2), I2) = diag(1,1,2,2): first factor most significant.
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = re(1.0);
        a[(1, 1)] = re(2.0);
        let k = kron(&a, &eye(2));
        let expect = [1.0, 1.0, 2.0, 2.0];
        for i in 0..4 {
            assert_abs_diff_eq!(k[(i, i)].re, expect[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn vec_rm_roundtrip() {
        let m = CMat::from_fn(3, 4, |i, j| c(i as f64, j as f64));
        let v = vec_rm(&m);
        assert_eq!(v[1 * 4 + 2], c(1.0, 2.0));
        let back = unvec_rm(&v, 3, 4);
        assert_eq!(max_abs_diff(&back, &m), 0.0);
    }
}
