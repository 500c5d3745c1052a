//! Operator-algebra machinery behind the Koashi-Imoto decomposition.
//!
//! The block structure of a bipartite source is recovered from the set of
//! operators on A steered by measuring R:
//!
//! 1. steer with a Hermitian operator basis of B(R);
//! 2. compute the commutant of the steered set (everything commuting with
//!    every steered operator);
//! 3. split the space with a generic Hermitian commutant element, whose
//!    eigenspaces refine the blocks, and regroup eigenspaces connected
//!    through the commutant;
//! 4. factor each group into its redundant (N) and correlated (Q) tensor
//!    parts, then merge groups whose correlated parts are unitarily
//!    equivalent.
//!
//! Each step is verified with residual checks; the driver retries with
//! fresh random draws when a generic-position assumption fails.

use rand::Rng;

use crate::linalg::{
    eigh, eye, kron, max_abs, polar_unitary, singular_values, unvec_rm, CMat, C64,
};
use crate::qcore::DensityMatrix;

/// Internal failure of one decomposition attempt; the driver retries.
#[derive(Debug)]
pub(crate) struct AttemptError {
    pub what: String,
}

impl AttemptError {
    fn new(what: impl Into<String>) -> Self {
        AttemptError { what: what.into() }
    }
}

type AResult<T> = std::result::Result<T, AttemptError>;

/// One fully factored group: subspace embedding with tensor structure
/// N (x) Q (N most significant) and the correlated state on Q (x) R.
#[derive(Debug, Clone)]
pub(crate) struct RawGroup {
    /// |A| x (n_dim * q_dim) isometry into A; columns ordered n-major.
    pub embed: CMat,
    pub n_dim: usize,
    pub q_dim: usize,
    /// tr of the compressed state; zero for the common-kernel group.
    pub weight: f64,
    /// Normalized state on Q (x) R (empty for the kernel group).
    pub theta_hat: CMat,
}

/// Steered Hermitian operators `Tr_R[(1 (x) E_y) rho]` for a Hermitian
/// operator basis {E_y} of B(R).
pub(crate) fn steered_operators(rho: &CMat, a_dim: usize, r_dim: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(r_dim * r_dim);
    let steer = |weight: &dyn Fn(usize, usize) -> C64| -> CMat {
        // sigma[a,a'] = sum_{r,r''} E[r,r''] rho[(a r''),(a' r)]
        let mut s = CMat::zeros(a_dim, a_dim);
        for a in 0..a_dim {
            for ap in 0..a_dim {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..r_dim {
                    for rpp in 0..r_dim {
                        let w = weight(r, rpp);
                        if w != C64::new(0.0, 0.0) {
                            acc += w * rho[(a * r_dim + rpp, ap * r_dim + r)];
                        }
                    }
                }
                s[(a, ap)] = acc;
            }
        }
        s
    };
    for x in 0..r_dim {
        out.push(steer(&|r, rpp| {
            if r == x && rpp == x {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }));
    }
    for x in 0..r_dim {
        for y in (x + 1)..r_dim {
            // (|x><y| + |y><x|)
            out.push(steer(&|r, rpp| {
                if (r == x && rpp == y) || (r == y && rpp == x) {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }));
            // i(|x><y| - |y><x|)
            out.push(steer(&|r, rpp| {
                if r == x && rpp == y {
                    C64::new(0.0, 1.0)
                } else if r == y && rpp == x {
                    C64::new(0.0, -1.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }));
        }
    }
    out
}

/// Hermitian orthonormal basis (real span) of the commutant of a set of
/// Hermitian generators.
pub(crate) fn commutant_hermitian_basis(gens: &[CMat], dim: usize) -> Vec<CMat> {
    let d2 = dim * dim;
    let id = eye(dim);
    let mut ltl = CMat::zeros(d2, d2);
    for s in gens {
        let m = kron(s, &id) - kron(&id, &s.transpose());
        ltl += m.adjoint() * &m;
    }
    let (vals, vecs) = eigh(&ltl); // descending, all >= 0
    let lmax = vals.first().copied().unwrap_or(0.0).max(1e-30);
    let thresh = (1e-22 * lmax).max(1e-28);
    let mut herm: Vec<CMat> = Vec::new();
    for (k, &v) in vals.iter().enumerate() {
        if v > thresh {
            continue;
        }
        let x = unvec_rm(&vecs.column(k).into_owned(), dim, dim);
        herm.push((&x + x.adjoint()).scale(0.5));
        let skew = (&x - x.adjoint()).scale(0.5);
        herm.push(CMat::from_fn(dim, dim, |i, j| {
            let z = skew[(i, j)];
            C64::new(z.im, -z.re) // skew / i
        }));
    }
    gram_schmidt_real(herm)
}

/// Orthonormalize Hermitian matrices over the reals with the
/// Hilbert-Schmidt inner product; drops near-dependent elements.
fn gram_schmidt_real(cands: Vec<CMat>) -> Vec<CMat> {
    let mut basis: Vec<CMat> = Vec::new();
    for mut x in cands {
        for b in &basis {
            let ip: f64 = x
                .iter()
                .zip(b.iter())
                .map(|(u, v)| (u.conj() * v).re)
                .sum();
            x -= b.scale(ip);
        }
        let n: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(x.scale(1.0 / n));
        }
    }
    basis
}

/// Random Hermitian element of the span.
fn random_element<R: Rng>(basis: &[CMat], dim: usize, rng: &mut R) -> CMat {
    let mut k = CMat::zeros(dim, dim);
    for b in basis {
        let c = crate::qcore::random::standard_complex(rng).re;
        k += b.scale(c);
    }
    k
}

/// Cluster the eigenvectors of a Hermitian matrix by eigenvalue; returns
/// one orthonormal column block per cluster.
fn eigenvalue_clusters(k: &CMat, tol: f64) -> Vec<CMat> {
    let dim = k.nrows();
    let (vals, vecs) = eigh(k);
    let mut clusters: Vec<(usize, usize)> = Vec::new(); // (start, len)
    let mut start = 0usize;
    for i in 1..=dim {
        if i == dim || (vals[i - 1] - vals[i]).abs() > tol {
            clusters.push((start, i - start));
            start = i;
        }
    }
    clusters
        .into_iter()
        .map(|(s, len)| {
            let mut u = CMat::zeros(dim, len);
            for j in 0..len {
                u.set_column(j, &vecs.column(s + j));
            }
            u
        })
        .collect()
}

/// Union-find grouping of clusters connected through the commutant.
fn group_clusters(clusters: &[CMat], comm_basis: &[CMat]) -> Vec<Vec<usize>> {
    let n = clusters.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let p = parent[i];
            let r = find(parent, p);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut stat = 0.0f64;
            for h in comm_basis {
                let block = clusters[i].adjoint() * h * &clusters[j];
                stat += block.iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
            if stat > 1e-10 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    groups.into_iter().filter(|g| !g.is_empty()).collect()
}

/// Factor one group of equal-dimension clusters into N (x) Q structure and
/// extract the correlated state.
fn factor_group<R: Rng>(
    rho: &CMat,
    r_dim: usize,
    clusters: &[CMat],
    members: &[usize],
    comm_basis: &[CMat],
    rng: &mut R,
) -> AResult<RawGroup> {
    let a_dim = rho.nrows() / r_dim;
    let q_dim = clusters[members[0]].ncols();
    for &m in members {
        if clusters[m].ncols() != q_dim {
            return Err(AttemptError::new("cluster dimensions differ within a group"));
        }
    }
    let n_dim = members.len();
    // align the implicit Q bases of every cluster to the first one
    let pivot = members[0];
    let mut frames: Vec<CMat> = Vec::with_capacity(n_dim);
    frames.push(clusters[pivot].clone());
    for &m in &members[1..] {
        let mut aligned = None;
        for attempt in 0..8 {
            let t = random_element(comm_basis, a_dim, rng);
            let c = clusters[m].adjoint() * &t * &clusters[pivot];
            let sv = singular_values(&c);
            let smax = sv.first().copied().unwrap_or(0.0);
            let smin = sv.last().copied().unwrap_or(0.0);
            if smax < 1e-10 {
                continue; // unlucky draw, connector vanished
            }
            if smin / smax < 1.0 - 1e-6 {
                if attempt == 7 {
                    return Err(AttemptError::new("connector is not proportional to a unitary"));
                }
                continue;
            }
            aligned = Some(&clusters[m] * polar_unitary(&c));
            break;
        }
        frames.push(aligned.ok_or_else(|| AttemptError::new("no usable connector found"))?);
    }
    // assemble the embedding, columns n-major
    let mut embed = CMat::zeros(a_dim, n_dim * q_dim);
    for (n, frame) in frames.iter().enumerate() {
        for q in 0..q_dim {
            embed.set_column(n * q_dim + q, &frame.column(q));
        }
    }
    // compress the source and check the 1_N (x) theta structure
    let big = kron(&embed, &eye(r_dim)); // (a r) x (n q r)
    let theta_full = big.adjoint() * rho * &big;
    let qr = q_dim * r_dim;
    let mut theta = CMat::zeros(qr, qr);
    for n in 0..n_dim {
        for i in 0..qr {
            for j in 0..qr {
                theta[(i, j)] += theta_full[(n * qr + i, n * qr + j)];
            }
        }
    }
    theta /= C64::new(n_dim as f64, 0.0);
    let weight = theta.trace().re * n_dim as f64;
    if weight > 1e-12 {
        let expect = kron(&eye(n_dim), &theta);
        let res = max_abs(&(&theta_full - &expect));
        if res > 1e-9 {
            return Err(AttemptError::new(format!(
                "group does not factor as 1_N (x) theta (residual {res:.2e})"
            )));
        }
    }
    let theta_hat = if weight > 1e-12 {
        theta.scale(n_dim as f64 / weight)
    } else {
        CMat::zeros(qr, qr)
    };
    Ok(RawGroup { embed, n_dim, q_dim, weight, theta_hat })
}

/// Solve for a Q-side intertwiner `X` with
/// `(X (x) 1_R) theta_b = theta_a (X (x) 1_R)`; returns the unitary polar
/// factor if a (unique up to scale) unitary solution exists.
pub(crate) fn q_intertwiner(
    theta_a: &CMat,
    theta_b: &CMat,
    q_dim: usize,
    r_dim: usize,
) -> Option<CMat> {
    let q2 = q_dim * q_dim;
    let qr = q_dim * r_dim;
    // columns: vec of theta_a (E_ij (x) 1) - (E_ij (x) 1) theta_b
    let mut l = CMat::zeros(qr * qr, q2);
    for i in 0..q_dim {
        for j in 0..q_dim {
            let mut e = CMat::zeros(q_dim, q_dim);
            e[(i, j)] = C64::new(1.0, 0.0);
            let x1 = kron(&e, &eye(r_dim));
            let m = theta_a * &x1 - &x1 * theta_b;
            for (k, z) in m.iter().enumerate() {
                // nalgebra iterates column-major; index accordingly
                let (row, col) = (k % (qr), k / (qr));
                l[(row * qr + col, i * q_dim + j)] = *z;
            }
        }
    }
    let ltl = l.adjoint() * &l;
    let (vals, vecs) = eigh(&ltl);
    let lmin = *vals.last().unwrap();
    if lmin > 1e-14 {
        return None;
    }
    let xv = vecs.column(q_dim * q_dim - 1).into_owned();
    let x = CMat::from_fn(q_dim, q_dim, |i, j| xv[i * q_dim + j]);
    // unitary-proportional check
    let xx = x.adjoint() * &x;
    let c = xx.trace().re / q_dim as f64;
    if c <= 1e-12 {
        return None;
    }
    let dev = max_abs(&(&xx - eye(q_dim).scale(c)));
    if dev / c > 1e-6 {
        return None;
    }
    Some(polar_unitary(&x))
}

/// Outcome of one full structural attempt: factored groups plus the
/// common-kernel dimensions (as an embedding), before merging.
pub(crate) struct GroupedStructure {
    pub groups: Vec<RawGroup>,
    /// |A| x k embedding of the common kernel of the steered set.
    pub kernel: Option<CMat>,
}

/// One structural attempt: steer, commute, split, group, factor.
pub(crate) fn extract_groups<R: Rng>(
    rho: &CMat,
    a_dim: usize,
    r_dim: usize,
    rng: &mut R,
) -> AResult<GroupedStructure> {
    let steered = steered_operators(rho, a_dim, r_dim);
    let comm = commutant_hermitian_basis(&steered, a_dim);
    if comm.is_empty() {
        return Err(AttemptError::new("empty commutant (identity missing?)"));
    }
    let k = random_element(&comm, a_dim, rng);
    let scale = max_abs(&k).max(1.0);
    let clusters = eigenvalue_clusters(&k, 1e-7 * scale);
    let groups_idx = group_clusters(&clusters, &comm);
    let mut groups = Vec::new();
    let mut kernel_cols: Vec<CMat> = Vec::new();
    for members in &groups_idx {
        let g = factor_group(rho, r_dim, &clusters, members, &comm, rng)?;
        if g.weight <= 1e-12 {
            kernel_cols.push(g.embed.clone());
        } else {
            groups.push(g);
        }
    }
    if groups.is_empty() {
        return Err(AttemptError::new("no weight-carrying group found"));
    }
    let kernel = if kernel_cols.is_empty() {
        None
    } else {
        let total: usize = kernel_cols.iter().map(|m| m.ncols()).sum();
        let mut k_embed = CMat::zeros(a_dim, total);
        let mut at = 0;
        for m in &kernel_cols {
            for j in 0..m.ncols() {
                k_embed.set_column(at, &m.column(j));
                at += 1;
            }
        }
        Some(k_embed)
    };
    Ok(GroupedStructure { groups, kernel })
}
