//! Operations on states and channels: partial trace, purification,
//! fidelity, Uhlmann unitaries, channel application, tensor plumbing.
//!
//! Fidelity follows the square-root convention `F(rho, sigma) =
//! ||sqrt(rho) sqrt(sigma)||_1`, NOT its square. Much other software
//! squares this quantity; every consumer in this crate assumes the
//! square-root form.

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{eigh, eye, kron, max_abs_diff, re, CMat, CVec};

use super::channel::Channel;
use super::factor::{permutation_index_map, position, subset_offsets, Factor};
use super::state::{DensityMatrix, PureState};

/// Trace out every factor not named in `keep`. The kept factors stay in
/// their original order.
pub fn partial_trace(state: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    let factors = state.factors();
    for label in keep {
        position(factors, label)?;
    }
    let keep_pos: Vec<usize> = factors
        .iter()
        .enumerate()
        .filter(|(_, f)| keep.contains(&f.label.as_str()))
        .map(|(i, _)| i)
        .collect();
    let tr_pos: Vec<usize> = factors
        .iter()
        .enumerate()
        .filter(|(_, f)| !keep.contains(&f.label.as_str()))
        .map(|(i, _)| i)
        .collect();
    let keep_factors: Vec<Factor> = keep_pos.iter().map(|&i| factors[i].clone()).collect();
    let keep_off = subset_offsets(factors, &keep_pos);
    let tr_off = subset_offsets(factors, &tr_pos);
    let kd = keep_off.len();
    let m = state.matrix();
    let mut out = CMat::zeros(kd, kd);
    for (r, &ro) in keep_off.iter().enumerate() {
        for (c, &co) in keep_off.iter().enumerate() {
            let mut acc = re(0.0);
            for &t in &tr_off {
                acc += m[(ro + t, co + t)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(DensityMatrix::trusted(keep_factors, out))
}

/// Reduced density matrix of a pure state on the named factors.
pub fn reduce(psi: &PureState, keep: &[&str]) -> Result<DensityMatrix> {
    let factors = psi.factors();
    for label in keep {
        position(factors, label)?;
    }
    let keep_pos: Vec<usize> = factors
        .iter()
        .enumerate()
        .filter(|(_, f)| keep.contains(&f.label.as_str()))
        .map(|(i, _)| i)
        .collect();
    let rest_pos: Vec<usize> = factors
        .iter()
        .enumerate()
        .filter(|(_, f)| !keep.contains(&f.label.as_str()))
        .map(|(i, _)| i)
        .collect();
    let keep_factors: Vec<Factor> = keep_pos.iter().map(|&i| factors[i].clone()).collect();
    let keep_off = subset_offsets(factors, &keep_pos);
    let rest_off = subset_offsets(factors, &rest_pos);
    let v = psi.vector();
    // T[k, t] = psi[keep_off[k] + rest_off[t]], rho_keep = T T^dag
    let mut t_mat = CMat::zeros(keep_off.len(), rest_off.len());
    for (k, &ko) in keep_off.iter().enumerate() {
        for (t, &to) in rest_off.iter().enumerate() {
            t_mat[(k, t)] = v[ko + to];
        }
    }
    let rho = &t_mat * t_mat.adjoint();
    Ok(DensityMatrix::trusted(keep_factors, rho))
}

/// Reorder the factors of a state. `order` must name every factor once.
pub fn permute_factors(state: &DensityMatrix, order: &[&str]) -> Result<DensityMatrix> {
    let factors = state.factors();
    if order.len() != factors.len() {
        return Err(Error::FactorMismatch(format!(
            "permutation names {} factors, state has {}",
            order.len(),
            factors.len()
        )));
    }
    let perm: Vec<usize> = order
        .iter()
        .map(|l| position(factors, l))
        .collect::<Result<_>>()?;
    {
        let mut seen = vec![false; factors.len()];
        for &p in &perm {
            if seen[p] {
                return Err(Error::DuplicateLabel(factors[p].label.clone()));
            }
            seen[p] = true;
        }
    }
    let map = permutation_index_map(factors, &perm);
    let new_factors: Vec<Factor> = perm.iter().map(|&p| factors[p].clone()).collect();
    let d = state.dim();
    let m = state.matrix();
    let mut out = CMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    Ok(DensityMatrix::trusted(new_factors, out))
}

/// Reorder the factors of a pure state.
pub fn permute_pure(psi: &PureState, order: &[&str]) -> Result<PureState> {
    let factors = psi.factors();
    if order.len() != factors.len() {
        return Err(Error::FactorMismatch(format!(
            "permutation names {} factors, state has {}",
            order.len(),
            factors.len()
        )));
    }
    let perm: Vec<usize> = order
        .iter()
        .map(|l| position(factors, l))
        .collect::<Result<_>>()?;
    let map = permutation_index_map(factors, &perm);
    let new_factors: Vec<Factor> = perm.iter().map(|&p| factors[p].clone()).collect();
    let v = psi.vector();
    let mut out = CVec::zeros(v.len());
    for i in 0..v.len() {
        out[map[i]] = v[i];
    }
    Ok(PureState::trusted(new_factors, out))
}

/// Merge a contiguous run of factors into a single labeled factor.
pub fn merge_factors(
    state: &DensityMatrix,
    labels: &[&str],
    new_label: &str,
) -> Result<DensityMatrix> {
    let factors = state.factors();
    let start = position(factors, labels[0])?;
    if start + labels.len() > factors.len() {
        return Err(Error::FactorMismatch("merge run exceeds factor list".into()));
    }
    for (k, l) in labels.iter().enumerate() {
        if factors[start + k].label != *l {
            return Err(Error::FactorMismatch(format!(
                "factors to merge must be contiguous; expected `{}` at position {}, found `{}`",
                l,
                start + k,
                factors[start + k].label
            )));
        }
    }
    let merged_dim: usize = factors[start..start + labels.len()].iter().map(|f| f.dim).product();
    let mut new_factors: Vec<Factor> = factors[..start].to_vec();
    new_factors.push(Factor::new(new_label, merged_dim));
    new_factors.extend_from_slice(&factors[start + labels.len()..]);
    super::factor::validate_factors(&new_factors)?;
    Ok(DensityMatrix::trusted(new_factors, state.matrix().clone()))
}

/// Tensor product of two states; factor labels must be disjoint.
pub fn tensor_product(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    let mut factors = a.factors().to_vec();
    factors.extend_from_slice(b.factors());
    super::factor::validate_factors(&factors)?;
    Ok(DensityMatrix::trusted(factors, kron(a.matrix(), b.matrix())))
}

/// n-fold tensor power of a bipartite source, re-merged to the same two
/// labels: `rho^{(x) n}` on A^n (x) R^n with A-copies grouped before
/// R-copies.
pub fn tensor_power_bipartite(rho: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    let factors = rho.factors();
    if factors.len() != 2 {
        return Err(Error::FactorMismatch(format!(
            "tensor_power_bipartite needs exactly two factors, got {}",
            factors.len()
        )));
    }
    if n == 0 {
        return Err(Error::FactorMismatch("tensor power needs n >= 1".into()));
    }
    if n == 1 {
        return Ok(rho.clone());
    }
    let la = factors[0].label.clone();
    let lr = factors[1].label.clone();
    // copies with suffixed labels
    let mut acc = {
        let mut c = rho.clone();
        c.relabel(&la, format!("{la}#0"))?;
        c.relabel(&lr, format!("{lr}#0"))?;
        c
    };
    for k in 1..n {
        let mut c = rho.clone();
        c.relabel(&la, format!("{la}#{k}"))?;
        c.relabel(&lr, format!("{lr}#{k}"))?;
        acc = tensor_product(&acc, &c)?;
    }
    // group A copies then R copies
    let a_labels: Vec<String> = (0..n).map(|k| format!("{la}#{k}")).collect();
    let r_labels: Vec<String> = (0..n).map(|k| format!("{lr}#{k}")).collect();
    let order: Vec<&str> = a_labels.iter().chain(r_labels.iter()).map(|s| s.as_str()).collect();
    let perm = permute_factors(&acc, &order)?;
    let a_refs: Vec<&str> = a_labels.iter().map(|s| s.as_str()).collect();
    let merged_a = merge_factors(&perm, &a_refs, &la)?;
    let r_refs: Vec<&str> = r_labels.iter().map(|s| s.as_str()).collect();
    merge_factors(&merged_a, &r_refs, &lr)
}

/// Spectral purification of `rho` with an ancilla of dimension equal to
/// the full system dimension (not the rank): `|psi> = sum_i sqrt(l_i)
/// |v_i>|i>_anc` with eigenvalues descending. Tracing out the ancilla
/// returns `rho`.
pub fn purify(rho: &DensityMatrix, anc_label: &str) -> Result<PureState> {
    if rho.factors().iter().any(|f| f.label == anc_label) {
        return Err(Error::DuplicateLabel(anc_label.to_string()));
    }
    let d = rho.dim();
    let (vals, vecs) = eigh(rho.matrix());
    let clipped = crate::linalg::clip_spectrum(&vals, Tolerances::default().psd)?;
    let mut v = CVec::zeros(d * d);
    for a in 0..d {
        let amp = clipped[a].sqrt();
        if amp == 0.0 {
            continue;
        }
        for s in 0..d {
            v[s * d + a] = vecs[(s, a)] * re(amp);
        }
    }
    // renormalize away the trace roundoff
    let norm = v.norm();
    if norm > 0.0 {
        v /= re(norm);
    }
    let mut factors = rho.factors().to_vec();
    factors.push(Factor::new(anc_label, d));
    Ok(PureState::trusted(factors, v))
}

/// Square-root fidelity `F(rho, sigma) = ||sqrt(rho) sqrt(sigma)||_1`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.factors() != sigma.factors() {
        return Err(Error::FactorMismatch(format!(
            "fidelity needs identical factor lists: {:?} vs {:?}",
            rho.factors().iter().map(|f| (&f.label, f.dim)).collect::<Vec<_>>(),
            sigma.factors().iter().map(|f| (&f.label, f.dim)).collect::<Vec<_>>()
        )));
    }
    fidelity_matrices(rho.matrix(), sigma.matrix())
}

/// Fidelity on raw Hermitian PSD matrices.
///
/// Uses `||A^dag B||_1` with truncated spectral factors `rho = A A^dag`,
/// `sigma = B B^dag`, which equals `||sqrt(rho) sqrt(sigma)||_1` and
/// avoids amplifying roundoff on rank-deficient inputs.
pub(crate) fn fidelity_matrices(rho: &CMat, sigma: &CMat) -> Result<f64> {
    let psd = Tolerances::default().psd;
    let a = spectral_factor(rho, psd)?;
    let b = spectral_factor(sigma, psd)?;
    if a.ncols() == 0 || b.ncols() == 0 {
        return Ok(0.0);
    }
    let m = a.adjoint() * b;
    let f: f64 = crate::linalg::singular_values(&m).iter().sum();
    Ok(f.min(1.0)) // guard tiny overshoot from roundoff
}

/// Factor `m = A A^dag` with `A = U sqrt(lambda)` restricted to the
/// strictly positive part of the clipped spectrum.
fn spectral_factor(m: &CMat, psd_tol: f64) -> Result<CMat> {
    let (vals, vecs) = eigh(m);
    let clipped = crate::linalg::clip_spectrum(&vals, psd_tol)?;
    let rank = clipped.iter().take_while(|&&v| v > 0.0).count();
    let mut a = CMat::zeros(m.nrows(), rank);
    for j in 0..rank {
        let s = clipped[j].sqrt();
        for i in 0..m.nrows() {
            a[(i, j)] = vecs[(i, j)] * re(s);
        }
    }
    Ok(a)
}

/// Uhlmann unitary: for pure states `psi`, `phi` with identical factor
/// layouts, returns the factor list of the complement of `pivot` and a
/// unitary `U` on it such that `|<psi| (1_pivot (x) U) |phi>|` equals the
/// fidelity of the two pivot marginals.
pub fn uhlmann_unitary(
    psi: &PureState,
    phi: &PureState,
    pivot: &[&str],
) -> Result<(Vec<Factor>, CMat)> {
    if psi.factors() != phi.factors() {
        return Err(Error::FactorMismatch(
            "uhlmann_unitary needs identical factor layouts".into(),
        ));
    }
    let factors = psi.factors();
    for l in pivot {
        position(factors, l)?;
    }
    let rest: Vec<&str> = factors
        .iter()
        .filter(|f| !pivot.contains(&f.label.as_str()))
        .map(|f| f.label.as_str())
        .collect();
    if rest.is_empty() {
        return Err(Error::FactorMismatch("pivot covers all factors".into()));
    }
    let order: Vec<&str> = pivot.iter().copied().chain(rest.iter().copied()).collect();
    let psi_p = permute_pure(psi, &order)?;
    let phi_p = permute_pure(phi, &order)?;
    let dp: usize = pivot
        .iter()
        .map(|l| factors[position(factors, l).unwrap()].dim)
        .product();
    let dr = psi.dim() / dp;
    let as_mat = |s: &PureState| -> CMat {
        CMat::from_fn(dp, dr, |i, j| s.vector()[i * dr + j])
    };
    let psi_m = as_mat(&psi_p);
    let phi_m = as_mat(&phi_p);
    let m = psi_m.adjoint() * phi_m; // dr x dr
    let svd = m.svd(true, true);
    let u_m = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    // max_X |tr(M X)| at X = V U^dag; the state-space unitary is its transpose
    let x = v_t.adjoint() * u_m.adjoint();
    let u = x.transpose();
    let rest_factors: Vec<Factor> = factors
        .iter()
        .filter(|f| !pivot.contains(&f.label.as_str()))
        .cloned()
        .collect();
    Ok((rest_factors, u))
}

/// Apply a channel to the named input factors of a state.
///
/// The output factors take the position of the first input factor;
/// environment factors are appended at the end when `keep_env` is true
/// and traced out otherwise. Untouched factors keep their order.
pub fn apply_channel(ch: &Channel, state: &DensityMatrix, keep_env: bool) -> Result<DensityMatrix> {
    let factors = state.factors();
    let mut in_pos = Vec::with_capacity(ch.input_factors().len());
    for f in ch.input_factors() {
        let p = position(factors, &f.label)?;
        if factors[p].dim != f.dim {
            return Err(Error::FactorMismatch(format!(
                "channel input `{}` has dim {}, state has {}",
                f.label, f.dim, factors[p].dim
            )));
        }
        in_pos.push(p);
    }
    let insert_at = *in_pos.iter().min().unwrap_or(&0);
    let rest: Vec<&Factor> = factors
        .iter()
        .enumerate()
        .filter(|(i, _)| !in_pos.contains(i))
        .map(|(_, f)| f)
        .collect();
    // label collisions between channel outputs/env and untouched factors
    for f in ch.output_factors().iter().chain(ch.env_factors()) {
        if rest.iter().any(|g| g.label == f.label) {
            return Err(Error::DuplicateLabel(f.label.clone()));
        }
    }

    // 1. permute state: channel inputs first (in channel order), rest after
    let mut order: Vec<&str> = ch.input_factors().iter().map(|f| f.label.as_str()).collect();
    order.extend(rest.iter().map(|f| f.label.as_str()));
    let permuted = permute_factors(state, &order)?;

    // 2. conjugate by V (x) 1_rest
    let d_rest: usize = rest.iter().map(|f| f.dim).product();
    let big = kron(ch.isometry(), &eye(d_rest));
    let out_m = &big * permuted.matrix() * big.adjoint();
    let mut out_factors: Vec<Factor> = ch.output_factors().to_vec();
    out_factors.extend(ch.env_factors().iter().cloned());
    out_factors.extend(rest.iter().map(|&f| f.clone()));
    let full = DensityMatrix::trusted(out_factors, out_m);

    // 3. drop the environment unless requested
    let reduced = if keep_env || ch.env_factors().is_empty() {
        full
    } else {
        let keep: Vec<&str> = full
            .factors()
            .iter()
            .filter(|f| !ch.env_factors().iter().any(|e| e.label == f.label))
            .map(|f| f.label.as_str())
            .collect();
        partial_trace(&full, &keep)?
    };

    // 4. final order: untouched prefix, outputs at the insertion point,
    //    untouched suffix, env (if kept) at the end
    let mut final_order: Vec<String> = Vec::new();
    for f in rest.iter().take(insert_at) {
        final_order.push(f.label.clone());
    }
    for f in ch.output_factors() {
        final_order.push(f.label.clone());
    }
    for f in rest.iter().skip(insert_at) {
        final_order.push(f.label.clone());
    }
    if keep_env {
        for f in ch.env_factors() {
            final_order.push(f.label.clone());
        }
    }
    let refs: Vec<&str> = final_order.iter().map(|s| s.as_str()).collect();
    permute_factors(&reduced, &refs)
}

/// Trace of the full state (diagnostic; equals 1 for valid states).
pub fn full_trace(state: &DensityMatrix) -> f64 {
    state.matrix().trace().re
}

/// Check two states are elementwise equal within `tol`.
pub fn states_close(a: &DensityMatrix, b: &DensityMatrix, tol: f64) -> bool {
    a.factors() == b.factors() && max_abs_diff(a.matrix(), b.matrix()) <= tol
}
