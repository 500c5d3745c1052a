//! Gradient descent on the complex Stiefel manifold of isometries.
//!
//! Points are `n x p` complex matrices with orthonormal columns. The
//! Euclidean gradient convention used everywhere in this crate is
//!
//! ```text
//! G_ij = df/dRe(V_ij) + i df/dIm(V_ij)
//! ```
//!
//! (twice the conjugate Wirtinger derivative), so real objectives of the
//! form `f = Re tr(C^dag V)` have `G = C`. Gradients are projected onto
//! the tangent space and steps are retracted with a QR factorization.

use crate::linalg::{qr_isometry, CMat, C64};

/// Options for the descent loop.
#[derive(Debug, Clone, Copy)]
pub struct StiefelOpts {
    pub max_iter: usize,
    /// Stop when the Riemannian gradient norm falls below this.
    pub grad_tol: f64,
    /// Stop when accepted steps improve the objective by less than this.
    pub f_tol: f64,
    /// Initial line-search step.
    pub init_step: f64,
}

impl Default for StiefelOpts {
    fn default() -> Self {
        StiefelOpts { max_iter: 300, grad_tol: 1e-9, f_tol: 1e-12, init_step: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptStatus {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct StiefelOutcome {
    pub point: CMat,
    pub value: f64,
    pub iterations: usize,
    pub status: OptStatus,
}

/// Project a Euclidean gradient onto the tangent space at `v`:
/// `G - V herm(V^dag G)`.
pub fn tangent_project(v: &CMat, g: &CMat) -> CMat {
    let vg = v.adjoint() * g;
    let herm = (&vg + vg.adjoint()).scale(0.5);
    g - v * herm
}

/// Minimize `f` over isometries starting from `v0` (columns orthonormal).
///
/// Line search is backtracking Armijo, so accepted objective values are
/// monotonically nonincreasing.
pub fn minimize_on_stiefel(
    f: &dyn Fn(&CMat) -> f64,
    egrad: &dyn Fn(&CMat) -> CMat,
    v0: CMat,
    opts: &StiefelOpts,
) -> StiefelOutcome {
    let mut v = qr_isometry(&v0);
    let mut fv = f(&v);
    let mut step = opts.init_step;
    let c1 = 1e-4;
    let mut stalled = 0usize;
    for iter in 0..opts.max_iter {
        let g = tangent_project(&v, &egrad(&v));
        let gnorm2: f64 = g.iter().map(|x| x.norm_sqr()).sum();
        let gnorm = gnorm2.sqrt();
        if gnorm <= opts.grad_tol {
            return StiefelOutcome { point: v, value: fv, iterations: iter, status: OptStatus::Converged };
        }
        // backtracking along the retracted ray
        let mut t = step;
        let mut accepted = false;
        for _ in 0..80 {
            let trial = qr_isometry(&(&v - g.scale(t)));
            let ft = f(&trial);
            if ft <= fv - c1 * t * gnorm2 {
                // Armijo alone can accept a point past the ray minimum and
                // stall; keep halving while that improves the value
                let (mut best_t, mut best_f, mut best_v) = (t, ft, trial);
                for _ in 0..10 {
                    let tt = best_t * 0.5;
                    let cand = qr_isometry(&(&v - g.scale(tt)));
                    let fc = f(&cand);
                    if fc < best_f {
                        best_t = tt;
                        best_f = fc;
                        best_v = cand;
                    } else {
                        break;
                    }
                }
                let improvement = fv - best_f;
                v = best_v;
                fv = best_f;
                step = (best_t * 2.0).min(1e2);
                accepted = true;
                // a single tiny step can just mean a cautious line search;
                // only several in a row count as convergence
                if improvement < opts.f_tol {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                break;
            }
            t *= 0.5;
            if t < 1e-18 {
                break;
            }
        }
        if !accepted || stalled >= 5 {
            return StiefelOutcome { point: v, value: fv, iterations: iter, status: OptStatus::Converged };
        }
    }
    StiefelOutcome { point: v, value: fv, iterations: opts.max_iter, status: OptStatus::MaxIter }
}

/// Maximize `f` (negates through [`minimize_on_stiefel`]).
pub fn maximize_on_stiefel(
    f: &dyn Fn(&CMat) -> f64,
    egrad: &dyn Fn(&CMat) -> CMat,
    v0: CMat,
    opts: &StiefelOpts,
) -> StiefelOutcome {
    let neg_f = |v: &CMat| -f(v);
    let neg_g = |v: &CMat| -egrad(v);
    let mut out = minimize_on_stiefel(&neg_f, &neg_g, v0, opts);
    out.value = -out.value;
    out
}

/// Central-difference Euclidean gradient in the crate's convention.
pub fn numeric_egrad(f: &dyn Fn(&CMat) -> f64, v: &CMat, eps: f64) -> CMat {
    let (n, p) = v.shape();
    let mut g = CMat::zeros(n, p);
    let mut w = v.clone();
    for i in 0..n {
        for j in 0..p {
            let orig = w[(i, j)];
            w[(i, j)] = orig + C64::new(eps, 0.0);
            let fp = f(&w);
            w[(i, j)] = orig - C64::new(eps, 0.0);
            let fm = f(&w);
            let dre = (fp - fm) / (2.0 * eps);
            w[(i, j)] = orig + C64::new(0.0, eps);
            let fip = f(&w);
            w[(i, j)] = orig - C64::new(0.0, eps);
            let fim = f(&w);
            let dim_ = (fip - fim) / (2.0 * eps);
            w[(i, j)] = orig;
            g[(i, j)] = C64::new(dre, dim_);
        }
    }
    g
}
