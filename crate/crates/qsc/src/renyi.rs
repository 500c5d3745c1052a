//! Von Neumann and Renyi entropies, plus the entropy-fidelity gap the
//! converse bounds rest on.
//!
//! All logarithms are base 2; entropies are in bits. Renyi entropies are
//! computed from the eigendecomposition (one decomposition serves every
//! alpha in a sweep), with alpha = 1 dispatched explicitly to the von
//! Neumann form rather than taken as a limit.

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::qcore::{fidelity, DensityMatrix};

/// Entropy order: von Neumann or Renyi of a given order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    VonNeumann,
    Order(f64),
}

/// An entropy value in bits together with the order it was computed at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyValue {
    pub value: f64,
    pub alpha: Alpha,
}

/// Von Neumann entropy `-sum l_i log2 l_i` over the clipped spectrum,
/// with `0 log 0 := 0`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<EntropyValue> {
    let spec = clipped_spectrum(rho)?;
    Ok(EntropyValue { value: vn_from_spectrum(&spec), alpha: Alpha::VonNeumann })
}

/// Renyi entropy `S_alpha = log2(tr rho^alpha) / (1 - alpha)`.
///
/// `alpha = 1` dispatches to [`von_neumann_entropy`]; `alpha <= 0` is an
/// error.
pub fn renyi_entropy(rho: &DensityMatrix, alpha: f64) -> Result<EntropyValue> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidAlpha { alpha, requirement: "requires alpha > 0" });
    }
    if alpha == 1.0 {
        return von_neumann_entropy(rho);
    }
    let spec = clipped_spectrum(rho)?;
    Ok(EntropyValue { value: renyi_from_spectrum(&spec, alpha), alpha: Alpha::Order(alpha) })
}

/// Gap of the entropy-fidelity inequality of van Dam and Hayden: for
/// `beta` in (1/2, 1) and `alpha = beta / (2 beta - 1)`,
///
/// `S_beta(rho) - S_alpha(sigma) - (2 beta / (1 - beta)) log2 F(rho, sigma)`
///
/// is nonnegative for all states, which is what makes the strong-converse
/// exponents work.
pub fn dam_hayden_gap(rho: &DensityMatrix, sigma: &DensityMatrix, beta: f64) -> Result<f64> {
    if !(0.5 < beta && beta < 1.0) {
        return Err(Error::InvalidBeta { beta });
    }
    let alpha = beta / (2.0 * beta - 1.0);
    let s_beta = renyi_entropy(rho, beta)?.value;
    let s_alpha = renyi_entropy(sigma, alpha)?.value;
    let f = fidelity(rho, sigma)?;
    let log_f = if f > 0.0 { f.log2() } else { f64::NEG_INFINITY };
    Ok(s_beta - s_alpha - (2.0 * beta / (1.0 - beta)) * log_f)
}

/// Per-copy log trace power `g_{alpha,n}(sigma) = log2(tr sigma^alpha) / n`
/// for `alpha > 1`, where `sigma` is declared to live at n-copy scale.
///
/// As a function of alpha this is nonincreasing, convex, and continuous.
pub fn g_alpha(sigma: &DensityMatrix, n: usize, alpha: f64) -> Result<f64> {
    if alpha <= 1.0 || !alpha.is_finite() {
        return Err(Error::InvalidAlpha { alpha, requirement: "requires alpha > 1" });
    }
    if n == 0 {
        return Err(Error::FactorMismatch("g_alpha needs n >= 1".into()));
    }
    let spec = clipped_spectrum(sigma)?;
    Ok(log2_trace_power(&spec, alpha) / n as f64)
}

/// Clipped spectrum of a state, descending.
fn clipped_spectrum(rho: &DensityMatrix) -> Result<Vec<f64>> {
    crate::linalg::clip_spectrum(&rho.spectrum(), Tolerances::default().psd)
}

/// `-sum l log2 l` over a clipped spectrum.
pub fn vn_from_spectrum(spec: &[f64]) -> f64 {
    let mut s = 0.0;
    for &l in spec {
        if l > Tolerances::LOG_CLIP {
            s -= l * l.log2();
        }
    }
    s
}

/// `log2(sum l^alpha) / (1 - alpha)` over a clipped spectrum, stable for
/// large alpha (factors out the largest eigenvalue before powering).
pub fn renyi_from_spectrum(spec: &[f64], alpha: f64) -> f64 {
    if alpha == 1.0 {
        return vn_from_spectrum(spec);
    }
    log2_trace_power(spec, alpha) / (1.0 - alpha)
}

/// `log2(sum_i l_i^alpha)`, stable against underflow. Eigenvalues at or
/// below the log-clip floor count as exact zeros so that roundoff noise
/// in rank-deficient spectra cannot leak through fractional powers.
fn log2_trace_power(spec: &[f64], alpha: f64) -> f64 {
    let m = spec.iter().copied().fold(0.0, f64::max);
    if m <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = spec
        .iter()
        .filter(|&&l| l > Tolerances::LOG_CLIP)
        .map(|&l| ((l / m).ln() * alpha).exp())
        .sum();
    alpha * m.log2() + sum.log2()
}
