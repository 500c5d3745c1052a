//! Koashi-Imoto decomposition of a bipartite source.
//!
//! For a state `rho^{AR}` there is an isometry `U_KI: A -> C (x) N (x) Q`
//! under which the state takes the block form
//!
//! ```text
//! sum_j p_j |j><j|^C (x) omega_j^N (x) rho_j^{QR}
//! ```
//!
//! where every channel on A preserving `rho^{AR}` acts as the identity on
//! the C and Q parts and as an `omega_j`-preserving isometry on each N_j
//! (Koashi & Imoto 2002; Hayden, Jozsa, Petz & Winter 2004 for general
//! reference systems). The classical part C indexes the blocks, N carries
//! the redundancy, and Q (alongside its correlation with R) is what any
//! faithful compressor must transmit.
//!
//! Blocks may be ragged; they are embedded in the rectangular
//! `C (x) N (x) Q` space with unused padding coordinates, and the reported
//! `|N|`, `|Q|` are maxima over blocks.

mod algebra;
mod preserve;
mod tau;

pub use preserve::{verify_preserving_channel, PreservingReport};
pub use tau::build_tau_extension;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{check_isometry, kron, max_abs, CMat, C64, eye, re};
use crate::qcore::state::{matrix_to_rows, rows_to_matrix};
use crate::qcore::{rng_stream, state_distance, DensityMatrix, Factor};
use crate::renyi::{renyi_from_spectrum, vn_from_spectrum};

/// One block of the decomposition.
#[derive(Debug, Clone)]
pub struct KIBlock {
    /// Block probability p_j.
    pub probability: f64,
    /// Redundant state on N_j (factor label "N").
    pub omega: DensityMatrix,
    /// Correlated state on Q_j (x) R (factor labels "Q" and the source's
    /// reference label).
    pub rho_qr: DensityMatrix,
}

impl KIBlock {
    pub fn n_dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn q_dim(&self) -> usize {
        self.rho_qr.factors()[0].dim
    }
}

/// Koashi-Imoto decomposition: the isometry into the rectangular block
/// space plus the per-block data.
#[derive(Debug, Clone)]
pub struct KIDecomposition {
    /// Isometry `A -> C (x) N (x) Q`, shape (|C| |N| |Q|) x |A|.
    pub u_ki: CMat,
    pub blocks: Vec<KIBlock>,
    a_label: String,
    r_factor: Factor,
    c_dim: usize,
    n_dim: usize,
    q_dim: usize,
}

impl KIDecomposition {
    /// (|C|, |N|, |Q|) with N and Q reported as maxima over blocks.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.c_dim, self.n_dim, self.q_dim)
    }

    pub fn a_dim(&self) -> usize {
        self.u_ki.ncols()
    }

    pub fn a_label(&self) -> &str {
        &self.a_label
    }

    pub fn r_factor(&self) -> &Factor {
        &self.r_factor
    }

    /// Factors of the rectangular block space (C, N, Q).
    pub fn block_factors(&self) -> Vec<Factor> {
        vec![
            Factor::new("C", self.c_dim),
            Factor::new("N", self.n_dim),
            Factor::new("Q", self.q_dim),
        ]
    }

    /// The block-form state on C (x) N (x) Q (x) R (ragged blocks padded
    /// with zeros).
    pub fn block_state(&self) -> DensityMatrix {
        let (c, n, q) = (self.c_dim, self.n_dim, self.q_dim);
        let r = self.r_factor.dim;
        let dim = c * n * q * r;
        let mut m = CMat::zeros(dim, dim);
        for (j, b) in self.blocks.iter().enumerate() {
            let (nj, qj) = (b.n_dim(), b.q_dim());
            let om = b.omega.matrix();
            let qr = b.rho_qr.matrix();
            let p = re(b.probability);
            for n1 in 0..nj {
                for n2 in 0..nj {
                    for q1 in 0..qj {
                        for q2 in 0..qj {
                            for r1 in 0..r {
                                for r2 in 0..r {
                                    let row = ((j * n + n1) * q + q1) * r + r1;
                                    let col = ((j * n + n2) * q + q2) * r + r2;
                                    m[(row, col)] =
                                        p * om[(n1, n2)] * qr[(q1 * r + r1, q2 * r + r2)];
                                }
                            }
                        }
                    }
                }
            }
        }
        let mut factors = self.block_factors();
        factors.push(self.r_factor.clone());
        DensityMatrix::trusted(factors, m)
    }

    /// Entropy `S_alpha(CQ)` of the classical-quantum marginal
    /// `sum_j p_j |j><j| (x) rho_j^Q`; its spectrum is the union of the
    /// scaled block spectra `{p_j lambda(rho_j^Q)}`.
    pub fn ki_entropy(&self, alpha: f64) -> Result<f64> {
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(Error::InvalidAlpha { alpha, requirement: "requires alpha > 0" });
        }
        let mut spectrum = Vec::new();
        for b in &self.blocks {
            let rq = crate::qcore::partial_trace(&b.rho_qr, &["Q"])?;
            for l in crate::linalg::clip_spectrum(&rq.spectrum(), 1e-10)? {
                spectrum.push(b.probability * l);
            }
        }
        if alpha == 1.0 {
            Ok(vn_from_spectrum(&spectrum))
        } else {
            Ok(renyi_from_spectrum(&spectrum, alpha))
        }
    }
}

/// Tensor product of two decompositions (blockwise): blocks are all
/// pairs, with probabilities multiplied and parts tensored. Used to build
/// decompositions of tensor-power sources without re-deriving them.
pub fn ki_tensor(a: &KIDecomposition, b: &KIDecomposition) -> Result<KIDecomposition> {
    let mut blocks = Vec::new();
    for ba in &a.blocks {
        for bb in &b.blocks {
            let omega_m = kron(ba.omega.matrix(), bb.omega.matrix());
            let omega = DensityMatrix::new(
                vec![Factor::new("N", ba.n_dim() * bb.n_dim())],
                omega_m,
            )?;
            // (Q1 R1) (x) (Q2 R2) -> (Q1 Q2) (x) (R1 R2)
            let q1 = ba.q_dim();
            let r1 = ba.rho_qr.factors()[1].dim;
            let q2 = bb.q_dim();
            let r2 = bb.rho_qr.factors()[1].dim;
            let m1 = ba.rho_qr.matrix();
            let m2 = bb.rho_qr.matrix();
            let qd = q1 * q2;
            let rd = r1 * r2;
            let mut m = CMat::zeros(qd * rd, qd * rd);
            for qa in 0..q1 {
                for qa2 in 0..q1 {
                    for ra in 0..r1 {
                        for ra2 in 0..r1 {
                            for qb in 0..q2 {
                                for qb2 in 0..q2 {
                                    for rb in 0..r2 {
                                        for rb2 in 0..r2 {
                                            let row = (qa * q2 + qb) * rd + (ra * r2 + rb);
                                            let col = (qa2 * q2 + qb2) * rd + (ra2 * r2 + rb2);
                                            m[(row, col)] = m1[(qa * r1 + ra, qa2 * r1 + ra2)]
                                                * m2[(qb * r2 + rb, qb2 * r2 + rb2)];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            let rho_qr = DensityMatrix::new(
                vec![
                    Factor::new("Q", qd),
                    Factor::new(&a.r_factor.label, rd),
                ],
                m,
            )?;
            blocks.push(KIBlock { probability: ba.probability * bb.probability, omega, rho_qr });
        }
    }
    // canonical order: sort the product pairs the same way as the blocks
    let (c1, n1, q1) = a.dims();
    let (c2, n2, q2) = b.dims();
    let mut order: Vec<(usize, usize)> = Vec::new();
    for j1 in 0..c1 {
        for j2 in 0..c2 {
            order.push((j1, j2));
        }
    }
    let mut keyed: Vec<((usize, usize), KIBlock)> =
        order.into_iter().zip(blocks.into_iter()).collect();
    keyed.sort_by(|x, y| cmp_blocks(&x.1, &y.1));
    let blocks: Vec<KIBlock> = keyed.iter().map(|(_, b)| b.clone()).collect();
    let c_dim = blocks.len();
    let n_dim = blocks.iter().map(|b| b.n_dim()).max().unwrap_or(1);
    let q_dim = blocks.iter().map(|b| b.q_dim()).max().unwrap_or(1);
    let a_dim = a.a_dim() * b.a_dim();
    // u_ki maps (a1 a2) through both isometries, then reindexes the pair
    // of block coordinates into the product block layout
    let mut u = CMat::zeros(c_dim * n_dim * q_dim, a_dim);
    let full = kron(&a.u_ki, &b.u_ki); // (c1 n1 q1 c2 n2 q2) x (a1 a2)
    for (jnew, ((j1, j2), _)) in keyed.iter().enumerate() {
        let (j1, j2) = (*j1, *j2);
        let (bn1, bq1) = (a.blocks[j1].n_dim(), a.blocks[j1].q_dim());
        let (bn2, bq2) = (b.blocks[j2].n_dim(), b.blocks[j2].q_dim());
        for m1 in 0..bn1 {
            for m2 in 0..bn2 {
                for x1 in 0..bq1 {
                    for x2 in 0..bq2 {
                        let nn = m1 * bn2 + m2;
                        let qq = x1 * bq2 + x2;
                        let row_new = (jnew * n_dim + nn) * q_dim + qq;
                        let row_old = ((((j1 * n1 + m1) * q1 + x1) * _c2 + j2) * n2 + m2) * q2 + x2;
                        for col in 0..a_dim {
                            u[(row_new, col)] = full[(row_old, col)];
                        }
                    }
                }
            }
        }
    }
    Ok(KIDecomposition {
        u_ki: u,
        blocks,
        a_label: a.a_label.clone(),
        r_factor: Factor::new(&a.r_factor.label, a.r_factor.dim * b.r_factor.dim),
        c_dim,
        n_dim,
        q_dim,
    })
}

/// Options for the decomposition driver.
#[derive(Debug, Clone, Copy)]
pub struct KiOpts {
    /// Retry budget for the randomized structural steps. The literature
    /// gives no convergence rate; this cap is reported in errors rather
    /// than claimed adequate.
    pub max_rounds: usize,
    /// Reconstruction residual that counts as success.
    pub reconstruction_tol: f64,
    /// Seed for the internal generic-position draws.
    pub seed: u64,
}

impl Default for KiOpts {
    fn default() -> Self {
        KiOpts { max_rounds: 64, reconstruction_tol: 1e-8, seed: 0x4B49 }
    }
}

/// Compute the Koashi-Imoto decomposition of a two-factor state.
pub fn ki_decompose(rho_ar: &DensityMatrix) -> Result<KIDecomposition> {
    ki_decompose_with(rho_ar, &KiOpts::default())
}

pub fn ki_decompose_with(rho_ar: &DensityMatrix, opts: &KiOpts) -> Result<KIDecomposition> {
    let factors = rho_ar.factors();
    if factors.len() != 2 {
        return Err(Error::FactorMismatch(format!(
            "ki_decompose needs exactly two factors (system, reference); got {}",
            factors.len()
        )));
    }
    let a_dim = factors[0].dim;
    let r_dim = factors[1].dim;
    let mut best_residual = f64::INFINITY;
    for round in 0..opts.max_rounds {
        let mut rng = rng_stream(opts.seed, round as u64);
        let attempt = algebra::extract_groups(rho_ar.matrix(), a_dim, r_dim, &mut rng);
        let grouped = match attempt {
            Ok(g) => g,
            Err(_) => continue,
        };
        match assemble(rho_ar, grouped) {
            Ok(d) => {
                let recon = ki_reconstruct(&d)?;
                let residual = state_distance(&recon, rho_ar)?;
                if residual <= opts.reconstruction_tol {
                    return Ok(d);
                }
                best_residual = best_residual.min(residual);
            }
            Err(_) => continue,
        }
    }
    Err(Error::KiNonConvergence { rounds: opts.max_rounds, residual: best_residual })
}

/// Invert the decomposition: `U_KI^dag (block state) U_KI` on A (x) R.
pub fn ki_reconstruct(d: &KIDecomposition) -> Result<DensityMatrix> {
    let block = d.block_state();
    let big = kron(&d.u_ki.adjoint(), &eye(d.r_factor.dim));
    let m = &big * block.matrix() * big.adjoint();
    DensityMatrix::new_with(
        vec![Factor::new(&d.a_label, d.a_dim()), d.r_factor.clone()],
        m,
        &crate::config::Tolerances { hermitian: 1e-8, trace: 1e-8, psd: 1e-8, ..Default::default() },
    )
}

/// Entropy `S_alpha(CQ)` of a decomposition (convenience free function).
pub fn ki_entropy(d: &KIDecomposition, alpha: f64) -> Result<f64> {
    d.ki_entropy(alpha)
}

/// Canonical block order: descending probability, then descending |Q|,
/// degenerate probabilities broken lexicographically on the vectorized
/// omega.
fn cmp_blocks(x: &KIBlock, y: &KIBlock) -> std::cmp::Ordering {
    y.probability
        .partial_cmp(&x.probability)
        .unwrap()
        .then(y.q_dim().cmp(&x.q_dim()))
        .then_with(|| {
            let key = |b: &KIBlock| -> Vec<(i64, i64)> {
                b.omega
                    .matrix()
                    .iter()
                    .map(|z| ((z.re * 1e12) as i64, (z.im * 1e12) as i64))
                    .collect()
            };
            key(x).cmp(&key(y))
        })
}

/// Merge equivalent groups, gauge-fix, attach the kernel and assemble the
/// final decomposition.
fn assemble(rho_ar: &DensityMatrix, grouped: algebra::GroupedStructure) -> Result<KIDecomposition> {
    let factors = rho_ar.factors();
    let a_label = factors[0].label.clone();
    let r_factor = factors[1].clone();
    let r_dim = r_factor.dim;
    let groups = grouped.groups;

    // union groups with unitarily equivalent correlated parts
    let mut assigned: Vec<Option<usize>> = vec![None; groups.len()];
    let mut merged: Vec<Vec<(usize, CMat)>> = Vec::new(); // (group idx, W to pivot)
    for (gi, g) in groups.iter().enumerate() {
        if assigned[gi].is_some() {
            continue;
        }
        let mut members = vec![(gi, eye(g.q_dim))];
        assigned[gi] = Some(merged.len());
        for (hi, h) in groups.iter().enumerate().skip(gi + 1) {
            if assigned[hi].is_some() || h.q_dim != g.q_dim {
                continue;
            }
            if let Some(w) = algebra::q_intertwiner(&g.theta_hat, &h.theta_hat, g.q_dim, r_dim) {
                // verify: (W (x) 1) theta_h (W (x) 1)^dag = theta_g
                let wr = kron(&w, &eye(r_dim));
                let conj = &wr * &h.theta_hat * wr.adjoint();
                if max_abs(&(&conj - &g.theta_hat)) <= 1e-9 {
                    members.push((hi, w));
                    assigned[hi] = Some(merged.len());
                }
            }
        }
        merged.push(members);
    }

    // build one block per merged set
    let mut blocks: Vec<KIBlock> = Vec::new();
    let mut embeds: Vec<CMat> = Vec::new();
    for members in &merged {
        let q_dim = groups[members[0].0].q_dim;
        let p: f64 = members.iter().map(|&(gi, _)| groups[gi].weight).sum();
        // order sub-spaces by descending omega eigenvalue
        let mut subs: Vec<(usize, &CMat, f64)> = members
            .iter()
            .map(|(gi, w)| (*gi, w, groups[*gi].weight / (p * groups[*gi].n_dim as f64)))
            .collect();
        subs.sort_by(|x, y| y.2.partial_cmp(&x.2).unwrap());

        // Q gauge: eigenbasis of the Q marginal of the pivot state,
        // eigenvalues descending
        let pivot = &groups[members[0].0];
        let mut q_marg = CMat::zeros(q_dim, q_dim);
        for q1 in 0..q_dim {
            for q2 in 0..q_dim {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..r_dim {
                    acc += pivot.theta_hat[(q1 * r_dim + r, q2 * r_dim + r)];
                }
                q_marg[(q1, q2)] = acc;
            }
        }
        let (_, gmat) = crate::linalg::eigh(&q_marg);
        let gq = kron(&gmat, &eye(r_dim));
        let base = gq.adjoint() * &pivot.theta_hat * &gq;

        let n_total: usize = subs.iter().map(|&(gi, _, _)| groups[gi].n_dim).sum();
        let a_dim = rho_ar.factors()[0].dim;
        let mut embed = CMat::zeros(a_dim, n_total * q_dim);
        let mut omega = CMat::zeros(n_total, n_total);
        let mut n_off = 0usize;
        for &(gi, w, mu) in &subs {
            let g = &groups[gi];
            // final Q basis vectors in this group's frame: b_q = W^dag G e_q
            let gauge = w.adjoint() * &gmat;
            for m in 0..g.n_dim {
                for q in 0..q_dim {
                    let mut col = nalgebra::DVector::zeros(a_dim);
                    for qp in 0..q_dim {
                        col += g.embed.column(m * q_dim + qp) * gauge[(qp, q)];
                    }
                    embed.set_column((n_off + m) * q_dim + q, &col);
                }
            }
            for m in 0..g.n_dim {
                omega[(n_off + m, n_off + m)] = re(mu);
            }
            n_off += g.n_dim;
        }
        let omega_dm = DensityMatrix::new_with(
            vec![Factor::new("N", n_total)],
            omega,
            &relaxed_tol(),
        )?;
        let rho_qr = DensityMatrix::new_with(
            vec![Factor::new("Q", q_dim), r_factor.clone()],
            base,
            &relaxed_tol(),
        )?;
        blocks.push(KIBlock { probability: p, omega: omega_dm, rho_qr });
        embeds.push(embed);
    }

    // canonical block order (keep embeds aligned)
    let mut idx: Vec<usize> = (0..blocks.len()).collect();
    {
        let mut keyed: Vec<(usize, KIBlock)> =
            idx.iter().map(|&i| (i, blocks[i].clone())).collect();
        keyed.sort_by(|x, y| cmp_blocks(&x.1, &y.1));
        idx = keyed.into_iter().map(|(i, _)| i).collect();
    }
    let mut blocks: Vec<KIBlock> = idx.iter().map(|&i| blocks[i].clone()).collect();
    let mut embeds: Vec<CMat> = idx.iter().map(|&i| embeds[i].clone()).collect();

    // attach the steered-set kernel to the first trivial-Q block, where it
    // pads omega with zero eigenvalues; reconstruction is unaffected
    if let Some(kernel) = grouped.kernel {
        let kd = kernel.ncols();
        if let Some(j) = blocks.iter().position(|b| b.q_dim() == 1) {
            let old_n = blocks[j].n_dim();
            let mut om = CMat::zeros(old_n + kd, old_n + kd);
            om.view_mut((0, 0), (old_n, old_n))
                .copy_from(blocks[j].omega.matrix());
            let omega = DensityMatrix::new_with(
                vec![Factor::new("N", old_n + kd)],
                om,
                &relaxed_tol(),
            )?;
            blocks[j] = KIBlock {
                probability: blocks[j].probability,
                omega,
                rho_qr: blocks[j].rho_qr.clone(),
            };
            let a_dim = embeds[j].nrows();
            let mut e = CMat::zeros(a_dim, old_n + kd);
            e.view_mut((0, 0), (a_dim, old_n)).copy_from(&embeds[j]);
            for k in 0..kd {
                e.set_column(old_n + k, &kernel.column(k));
            }
            embeds[j] = e;
        } else {
            // no q=1 block: keep the kernel in rectangular padding below
            embeds.push(kernel);
            // marker block-less embed handled during u_ki assembly
        }
    }
    let kernel_extra = embeds.len() > blocks.len();

    let c_dim = blocks.len();
    let mut n_dim = blocks.iter().map(|b| b.n_dim()).max().unwrap_or(1);
    let q_dim = blocks.iter().map(|b| b.q_dim()).max().unwrap_or(1);
    let a_dim = rho_ar.factors()[0].dim;
    // ensure rectangular capacity for any kernel overflow
    if kernel_extra {
        let used: usize = blocks.iter().map(|b| b.n_dim() * b.q_dim()).sum();
        let kd = embeds[c_dim].ncols();
        while c_dim * n_dim * q_dim < used + kd {
            n_dim += 1;
        }
    }

    // assemble u_ki
    let mut u = CMat::zeros(c_dim * n_dim * q_dim, a_dim);
    let mut used_slots = vec![false; c_dim * n_dim * q_dim];
    for (j, b) in blocks.iter().enumerate() {
        for m in 0..b.n_dim() {
            for q in 0..b.q_dim() {
                let row = (j * n_dim + m) * q_dim + q;
                used_slots[row] = true;
                let col = embeds[j].column(m * b.q_dim() + q);
                for a in 0..a_dim {
                    u[(row, a)] = col[a].conj();
                }
            }
        }
    }
    if kernel_extra {
        let kernel = &embeds[c_dim];
        let mut slot = 0usize;
        for k in 0..kernel.ncols() {
            while slot < used_slots.len() && used_slots[slot] {
                slot += 1;
            }
            if slot == used_slots.len() {
                return Err(Error::FactorMismatch("kernel does not fit padding".into()));
            }
            used_slots[slot] = true;
            for a in 0..a_dim {
                u[(slot, a)] = kernel[(a, k)].conj();
            }
        }
    }
    check_isometry(&u, &crate::config::Tolerances::default())?;
    Ok(KIDecomposition { u_ki: u, blocks, a_label, r_factor, c_dim, n_dim, q_dim })
}

fn relaxed_tol() -> crate::config::Tolerances {
    crate::config::Tolerances { hermitian: 1e-8, trace: 1e-8, psd: 1e-8, ..Default::default() }
}

// --- JSON wire format ---------------------------------------------------

#[derive(Serialize, Deserialize)]
struct BlockWire {
    p: f64,
    omega: DensityMatrix,
    rho_qr: DensityMatrix,
}

#[derive(Serialize, Deserialize)]
struct KiWire {
    u_ki: Vec<Vec<[f64; 2]>>,
    blocks: Vec<BlockWire>,
}

impl Serialize for KIDecomposition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KiWire {
            u_ki: matrix_to_rows(&self.u_ki),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockWire {
                    p: b.probability,
                    omega: b.omega.clone(),
                    rho_qr: b.rho_qr.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KIDecomposition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = KiWire::deserialize(d)?;
        let u = rows_to_matrix(&wire.u_ki).map_err(D::Error::custom)?;
        check_isometry(&u, &crate::config::Tolerances::default()).map_err(D::Error::custom)?;
        if wire.blocks.is_empty() {
            return Err(D::Error::custom("decomposition needs at least one block"));
        }
        let blocks: Vec<KIBlock> = wire
            .blocks
            .into_iter()
            .map(|b| KIBlock { probability: b.p, omega: b.omega, rho_qr: b.rho_qr })
            .collect();
        let psum: f64 = blocks.iter().map(|b| b.probability).sum();
        if (psum - 1.0).abs() > 1e-10 {
            return Err(D::Error::custom(format!("block probabilities sum to {psum}")));
        }
        let r_factor = blocks[0].rho_qr.factors()[1].clone();
        let c_dim = blocks.len();
        let n_dim = blocks.iter().map(|b| b.n_dim()).max().unwrap();
        let q_dim = blocks.iter().map(|b| b.q_dim()).max().unwrap();
        Ok(KIDecomposition {
            u_ki: u,
            blocks,
            a_label: "A".into(),
            r_factor,
            c_dim,
            n_dim,
            q_dim,
        })
    }
}

#[cfg(test)]
mod tests;
