//! Centralized numerical tolerances and size budgets.
//!
//! Every validation threshold in the crate comes from one [`Tolerances`]
//! record so that callers can tighten or relax the whole stack coherently.

/// Numerical tolerances shared across the toolkit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max abs elementwise deviation from Hermiticity allowed in a state.
    pub hermitian: f64,
    /// Max abs deviation of the trace from 1 allowed in a state.
    pub trace: f64,
    /// Most negative eigenvalue allowed in a state; eigenvalues in
    /// `[-psd, 0)` are clipped to 0 before matrix powers and roots.
    pub psd: f64,
    /// Max abs elementwise deviation of `V^dag V` from the identity
    /// allowed in a channel isometry.
    pub isometry: f64,
    /// Largest Hilbert-space dimension a single constructed operator may
    /// have. Guards against accidental exponential blow-ups.
    pub max_dim: usize,
    /// Largest environment dimension a channel may declare.
    pub max_env_dim: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: 1e-10,
            trace: 1e-10,
            psd: 1e-10,
            isometry: 1e-9,
            max_dim: 4096,
            max_env_dim: 4096,
        }
    }
}

impl Tolerances {
    /// Eigenvalue floor used inside logarithms and inverse powers.
    pub const LOG_CLIP: f64 = 1e-12;
}
