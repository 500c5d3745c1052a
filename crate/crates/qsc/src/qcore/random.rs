//! Seeded random states, isometries and unitaries.
//!
//! All randomness in the crate flows through explicitly seeded ChaCha
//! generators, so every pipeline is reproducible bit-for-bit from its
//! seed. Independent streams of one seed are used for parallel restarts.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::linalg::{qr_isometry, CMat, C64};

use super::factor::{total_dim, validate_factors, Factor};
use super::state::{DensityMatrix, PureState};

/// Deterministic generator from a seed.
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator for `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard complex Gaussian via Box-Muller.
pub fn standard_complex<R: Rng>(rng: &mut R) -> C64 {
    let u1: f64 = rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    // each quadrature scaled so E|z|^2 = 1
    C64::new(r * th.cos(), r * th.sin()) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
}

/// Matrix of iid standard complex Gaussians.
pub fn ginibre<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| standard_complex(rng))
}

/// Random full-rank density matrix (Ginibre construction), deterministic
/// in the seed.
pub fn random_state(factors: Vec<Factor>, seed: u64) -> Result<DensityMatrix> {
    validate_factors(&factors)?;
    let mut rng = rng_from_seed(seed);
    random_state_rng(factors, &mut rng)
}

/// Random state drawing from a caller-provided generator.
pub fn random_state_rng<R: Rng>(factors: Vec<Factor>, rng: &mut R) -> Result<DensityMatrix> {
    validate_factors(&factors)?;
    let d = total_dim(&factors);
    let g = ginibre(d, d, rng);
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m /= C64::new(tr, 0.0);
    Ok(DensityMatrix::trusted(factors, m))
}

/// Random pure state (Haar direction).
pub fn random_pure_rng<R: Rng>(factors: Vec<Factor>, rng: &mut R) -> Result<PureState> {
    validate_factors(&factors)?;
    let d = total_dim(&factors);
    let g = ginibre(d, 1, rng);
    let n = g.column(0).norm();
    let v = nalgebra::DVector::from_fn(d, |i, _| g[(i, 0)] / C64::new(n, 0.0));
    Ok(PureState::trusted(factors, v))
}

/// Haar-random isometry with `out_dim >= in_dim`, deterministic in the
/// seed. `V^dag V = I` holds to machine precision.
pub fn random_isometry(in_dim: usize, out_dim: usize, seed: u64) -> Result<CMat> {
    let mut rng = rng_from_seed(seed);
    random_isometry_rng(in_dim, out_dim, &mut rng)
}

/// Isometry drawing from a caller-provided generator.
pub fn random_isometry_rng<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Result<CMat> {
    if out_dim < in_dim {
        return Err(Error::FactorMismatch(format!(
            "isometry needs out_dim >= in_dim, got {out_dim} < {in_dim}"
        )));
    }
    let g = ginibre(out_dim, in_dim, rng);
    Ok(qr_isometry(&g))
}

/// Haar-random unitary.
pub fn random_unitary_rng<R: Rng>(dim: usize, rng: &mut R) -> CMat {
    qr_isometry(&ginibre(dim, dim, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{isometry_residual, max_abs_diff};

    #[test]
    fn same_seed_same_output() {
        let f = vec![Factor::new("A", 3)];
        let a = random_state(f.clone(), 7).unwrap();
        let b = random_state(f, 7).unwrap();
        assert_eq!(max_abs_diff(a.matrix(), b.matrix()), 0.0);
        let v1 = random_isometry(2, 5, 9).unwrap();
        let v2 = random_isometry(2, 5, 9).unwrap();
        assert_eq!(max_abs_diff(&v1, &v2), 0.0);
    }

    #[test]
    fn random_state_is_valid() {
        let s = random_state(vec![Factor::new("A", 4)], 3).unwrap();
        let spec = s.spectrum();
        assert!(spec.iter().all(|&l| l >= -1e-12));
        let sum: f64 = spec.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_isometry_orthonormal() {
        let v = random_isometry(3, 7, 11).unwrap();
        assert!(isometry_residual(&v) < 1e-12);
    }

    #[test]
    fn dimension_order_enforced() {
        assert!(random_isometry(5, 3, 0).is_err());
    }

    #[test]
    fn streams_are_independent() {
        let mut a = rng_stream(1, 0);
        let mut b = rng_stream(1, 1);
        let xa = ginibre(2, 2, &mut a);
        let xb = ginibre(2, 2, &mut b);
        assert!(max_abs_diff(&xa, &xb) > 1e-3);
    }
}
