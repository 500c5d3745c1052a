//! Unit tests for the qcore operations.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use crate::linalg::{eye, kron, max_abs, max_abs_diff, re, CMat, C64};

use super::*;

fn qubit(l: &str) -> Factor {
    Factor::new(l, 2)
}

fn basis_dm(l: &str, dim: usize, k: usize) -> DensityMatrix {
    let mut m = CMat::zeros(dim, dim);
    m[(k, k)] = re(1.0);
    DensityMatrix::new(vec![Factor::new(l, dim)], m).unwrap()
}

fn plus_dm(l: &str) -> DensityMatrix {
    let m = CMat::from_row_slice(2, 2, &[re(0.5), re(0.5), re(0.5), re(0.5)]);
    DensityMatrix::new(vec![qubit(l)], m).unwrap()
}

fn bell_pair(la: &str, lb: &str) -> DensityMatrix {
    let mut v = nalgebra::DVector::zeros(4);
    v[0] = re(std::f64::consts::FRAC_1_SQRT_2);
    v[3] = re(std::f64::consts::FRAC_1_SQRT_2);
    let psi = PureState::new(vec![qubit(la), qubit(lb)], v).unwrap();
    DensityMatrix::from_pure(&psi)
}

// --- partial_trace ----------------------------------------------------

#[test]
fn trace_out_product_state_returns_marginal() {
    let a = random_state(vec![Factor::new("A", 3)], 1).unwrap();
    let b = random_state(vec![Factor::new("B", 2)], 2).unwrap();
    let ab = tensor_product(&a, &b).unwrap();
    let back = partial_trace(&ab, &["A"]).unwrap();
    assert!(states_close(&back, &a, 1e-12));
}

#[test]
fn trace_out_bell_half_is_maximally_mixed() {
    let bell = bell_pair("A", "B");
    let ra = partial_trace(&bell, &["A"]).unwrap();
    let mm = DensityMatrix::maximally_mixed(vec![qubit("A")]).unwrap();
    assert!(states_close(&ra, &mm, 1e-12));
}

#[test]
fn trace_out_everything_gives_unit_scalar() {
    let s = random_state(vec![Factor::new("A", 2), Factor::new("B", 3)], 5).unwrap();
    let scalar = partial_trace(&s, &[]).unwrap();
    assert_eq!(scalar.dim(), 1);
    assert_abs_diff_eq!(scalar.matrix()[(0, 0)].re, 1.0, epsilon = 1e-10);
}

#[test]
fn partial_trace_unknown_label_errors() {
    let s = random_state(vec![qubit("A")], 0).unwrap();
    assert!(matches!(partial_trace(&s, &["Z"]), Err(crate::Error::UnknownLabel(_))));
}

#[test]
fn partial_trace_keeps_original_order() {
    let s = random_state(
        vec![Factor::new("A", 2), Factor::new("B", 2), Factor::new("C", 2)],
        9,
    )
    .unwrap();
    // keep given out of order; result must be in state order (A, C)
    let r = partial_trace(&s, &["C", "A"]).unwrap();
    let labels: Vec<&str> = r.factors().iter().map(|f| f.label.as_str()).collect();
    assert_eq!(labels, vec!["A", "C"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // tracing out A then B equals tracing out B then A
    #[test]
    fn partial_trace_commutes(seed in 0u64..1000) {
        let s = random_state(
            vec![Factor::new("A", 2), Factor::new("B", 3), Factor::new("C", 2)],
            seed,
        ).unwrap();
        let ab_first = partial_trace(&partial_trace(&s, &["B", "C"]).unwrap(), &["C"]).unwrap();
        let b_first = partial_trace(&partial_trace(&s, &["A", "C"]).unwrap(), &["C"]).unwrap();
        prop_assert!(max_abs_diff(ab_first.matrix(), b_first.matrix()) <= 1e-10);
    }

    // fidelity is symmetric, in [0,1], and isometrically invariant
    #[test]
    fn fidelity_symmetry_range_isometry(seed in 0u64..1000) {
        let f = vec![Factor::new("A", 3)];
        let rho = random_state(f.clone(), seed).unwrap();
        let sigma = random_state(f.clone(), seed.wrapping_add(10_000)).unwrap();
        let fab = fidelity(&rho, &sigma).unwrap();
        let fba = fidelity(&sigma, &rho).unwrap();
        prop_assert!((fab - fba).abs() <= 1e-10);
        prop_assert!((0.0..=1.0).contains(&fab));
        // shared isometry 3 -> 5
        let v = random_isometry(3, 5, seed.wrapping_add(77)).unwrap();
        let lift = |s: &DensityMatrix| {
            DensityMatrix::new(vec![Factor::new("A", 5)], &v * s.matrix() * v.adjoint()).unwrap()
        };
        let f2 = fidelity(&lift(&rho), &lift(&sigma)).unwrap();
        prop_assert!((fab - f2).abs() <= 1e-9);
    }

    // fidelity can only grow under partial trace
    #[test]
    fn fidelity_monotone_under_partial_trace(seed in 0u64..1000) {
        let f = vec![Factor::new("A", 2), Factor::new("B", 2)];
        let rho = random_state(f.clone(), seed).unwrap();
        let sigma = random_state(f, seed.wrapping_add(31)).unwrap();
        let joint = fidelity(&rho, &sigma).unwrap();
        let fa = fidelity(
            &partial_trace(&rho, &["A"]).unwrap(),
            &partial_trace(&sigma, &["A"]).unwrap(),
        ).unwrap();
        prop_assert!(fa >= joint - 1e-9);
    }

    // purify round-trips through partial trace
    #[test]
    fn purify_round_trip(seed in 0u64..1000, dim in 2usize..5) {
        let rho = random_state(vec![Factor::new("A", dim)], seed).unwrap();
        let psi = purify(&rho, "anc").unwrap();
        let back = reduce(&psi, &["A"]).unwrap();
        prop_assert!(max_abs_diff(back.matrix(), rho.matrix()) <= 1e-9);
    }
}

// --- purify -----------------------------------------------------------

#[test]
fn purify_maximally_mixed_is_bell_type() {
    let mm = DensityMatrix::maximally_mixed(vec![qubit("A")]).unwrap();
    let psi = purify(&mm, "B").unwrap();
    // Schmidt coefficients are (1/sqrt2, 1/sqrt2); reduction is mm on both sides
    let ra = reduce(&psi, &["A"]).unwrap();
    let rb = reduce(&psi, &["B"]).unwrap();
    assert!(max_abs_diff(ra.matrix(), mm.matrix()) < 1e-12);
    let spec_b = rb.spectrum();
    assert_abs_diff_eq!(spec_b[0], 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(spec_b[1], 0.5, epsilon = 1e-12);
}

#[test]
fn purify_pure_state_appends_ancilla_ground() {
    let phi = plus_dm("A");
    let psi = purify(&phi, "B").unwrap();
    // |psi> = |+>|0> up to a global phase: reduced ancilla is |0><0|
    let rb = reduce(&psi, &["B"]).unwrap();
    assert_abs_diff_eq!(rb.matrix()[(0, 0)].re, 1.0, epsilon = 1e-10);
    assert!(rb.matrix()[(1, 1)].norm() < 1e-10);
}

#[test]
fn purify_random_three_dim_round_trip() {
    let rho = random_state(vec![Factor::new("A", 3)], 42).unwrap();
    let psi = purify(&rho, "R").unwrap();
    assert_eq!(psi.dim(), 9);
    let back = reduce(&psi, &["A"]).unwrap();
    assert!(max_abs_diff(back.matrix(), rho.matrix()) < 1e-9);
}

#[test]
fn purify_rejects_colliding_label() {
    let rho = random_state(vec![qubit("A")], 1).unwrap();
    assert!(purify(&rho, "A").is_err());
}

// --- fidelity ---------------------------------------------------------

#[test]
fn fidelity_with_itself_is_one() {
    let rho = random_state(vec![Factor::new("A", 4)], 8).unwrap();
    assert_abs_diff_eq!(fidelity(&rho, &rho).unwrap(), 1.0, epsilon = 1e-10);
}

#[test]
fn fidelity_orthogonal_pure_states_is_zero() {
    let zero = basis_dm("A", 2, 0);
    let one = basis_dm("A", 2, 1);
    assert!(fidelity(&zero, &one).unwrap() < 1e-12);
}

#[test]
fn fidelity_zero_plus_matches_overlap_oracle() {
    // oracle: for pure states F = |<0|+>| = 1/sqrt(2)
    let oracle = (0.5f64).sqrt();
    let f = fidelity(&basis_dm("A", 2, 0), &plus_dm("A")).unwrap();
    assert_abs_diff_eq!(f, oracle, epsilon = 1e-12);
    assert_abs_diff_eq!(f, 0.70711, epsilon = 5e-6);
}

#[test]
fn fidelity_one_iff_equal() {
    let rho = random_state(vec![Factor::new("A", 3)], 4).unwrap();
    let sigma = random_state(vec![Factor::new("A", 3)], 5).unwrap();
    assert!(fidelity(&rho, &sigma).unwrap() < 1.0 - 1e-6);
    // nearly equal states have fidelity within 1e-8 of 1
    let mut m = rho.matrix().clone();
    m[(0, 0)] += re(1e-12);
    m[(1, 1)] -= re(1e-12);
    let close = DensityMatrix::new(vec![Factor::new("A", 3)], m).unwrap();
    assert!(fidelity(&rho, &close).unwrap() > 1.0 - 1e-8);
}

#[test]
fn fidelity_dimension_mismatch_errors() {
    let a = random_state(vec![Factor::new("A", 2)], 0).unwrap();
    let b = random_state(vec![Factor::new("A", 3)], 0).unwrap();
    assert!(fidelity(&a, &b).is_err());
}

// --- uhlmann_unitary ---------------------------------------------------

#[test]
fn uhlmann_identical_states_reaches_one() {
    let rho = random_state(vec![qubit("A")], 3).unwrap();
    let psi = purify(&rho, "B").unwrap();
    let (_, u) = uhlmann_unitary(&psi, &psi, &["A"]).unwrap();
    let overlap = overlap_with_unitary(&psi, &psi, &["A"], &u);
    assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-10);
}

#[test]
fn uhlmann_recovers_ancilla_basis_change() {
    let rho = random_state(vec![qubit("A")], 6).unwrap();
    let psi = purify(&rho, "B").unwrap();
    // rotate the ancilla by a fixed unitary
    let mut rng = rng_from_seed(17);
    let w = random_unitary_rng(2, &mut rng);
    let big = kron(&eye(2), &w);
    let rotated_vec = &big * psi.vector();
    let phi = PureState::new(psi.factors().to_vec(), rotated_vec).unwrap();
    let (_, u) = uhlmann_unitary(&psi, &phi, &["A"]).unwrap();
    let overlap = overlap_with_unitary(&psi, &phi, &["A"], &u);
    assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-10);
}

#[test]
fn uhlmann_overlap_equals_marginal_fidelity() {
    for seed in 0..20u64 {
        let f = vec![qubit("A"), qubit("B"), qubit("C")];
        let mut rng = rng_from_seed(seed);
        let psi = random_pure_rng(f.clone(), &mut rng).unwrap();
        let phi = random_pure_rng(f, &mut rng).unwrap();
        let (rest, u) = uhlmann_unitary(&psi, &phi, &["A", "C"]).unwrap();
        assert_eq!(rest.len(), 1);
        assert_eq!(rest[0].label, "B");
        let overlap = overlap_with_unitary(&psi, &phi, &["A", "C"], &u);
        let f_marg = fidelity(
            &reduce(&psi, &["A", "C"]).unwrap(),
            &reduce(&phi, &["A", "C"]).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(overlap, f_marg, epsilon = 1e-8);
    }
}

#[test]
fn uhlmann_missing_pivot_errors() {
    let f = vec![qubit("A"), qubit("B")];
    let mut rng = rng_from_seed(0);
    let psi = random_pure_rng(f.clone(), &mut rng).unwrap();
    let phi = random_pure_rng(f, &mut rng).unwrap();
    assert!(uhlmann_unitary(&psi, &phi, &["Z"]).is_err());
}

/// |<psi| (1_pivot (x) U) |phi>| with U on the complement of pivot.
fn overlap_with_unitary(psi: &PureState, phi: &PureState, pivot: &[&str], u: &CMat) -> f64 {
    let order: Vec<&str> = pivot
        .iter()
        .copied()
        .chain(
            psi.factors()
                .iter()
                .filter(|f| !pivot.contains(&f.label.as_str()))
                .map(|f| f.label.as_str()),
        )
        .collect();
    let psi_p = permute_pure(psi, &order).unwrap();
    let phi_p = permute_pure(phi, &order).unwrap();
    let dr = u.nrows();
    let dp = psi.dim() / dr;
    let big = kron(&eye(dp), u);
    let moved = &big * phi_p.vector();
    psi_p.vector().dotc(&moved).norm()
}

// --- apply_channel ----------------------------------------------------

#[test]
fn identity_channel_returns_input() {
    let s = random_state(vec![qubit("A"), Factor::new("R", 3)], 12).unwrap();
    let ch = Channel::identity(vec![qubit("A")]).unwrap();
    let out = apply_channel(&ch, &s, false).unwrap();
    assert!(states_close(&out, &s, 1e-12));
}

#[test]
fn depolarizing_channel_mixes_output_and_preserves_rest() {
    // fully depolarizing qubit channel via four scaled Paulis
    let h = 0.5;
    let kraus = vec![
        CMat::from_row_slice(2, 2, &[re(h), re(0.0), re(0.0), re(h)]),
        CMat::from_row_slice(2, 2, &[re(0.0), re(h), re(h), re(0.0)]),
        CMat::from_row_slice(2, 2, &[re(0.0), C64::new(0.0, -h), C64::new(0.0, h), re(0.0)]),
        CMat::from_row_slice(2, 2, &[re(h), re(0.0), re(0.0), re(-h)]),
    ];
    let ch = Channel::from_kraus(vec![qubit("A")], vec![qubit("A")], "E", &kraus).unwrap();
    let s = random_state(vec![qubit("A"), Factor::new("R", 3)], 23).unwrap();
    let out = apply_channel(&ch, &s, false).unwrap();
    let out_a = partial_trace(&out, &["A"]).unwrap();
    let mm = DensityMatrix::maximally_mixed(vec![qubit("A")]).unwrap();
    assert!(states_close(&out_a, &mm, 1e-10));
    // untouched marginal unchanged
    let r_before = partial_trace(&s, &["R"]).unwrap();
    let r_after = partial_trace(&out, &["R"]).unwrap();
    assert!(states_close(&r_after, &r_before, 1e-10));
}

#[test]
fn apply_channel_matches_kraus_oracle() {
    // independent oracle: direct Kraus-sum evaluation with explicit loops
    let mut rng = rng_from_seed(31);
    let s = random_state(vec![Factor::new("A", 3), qubit("B")], 31).unwrap();
    let v = random_isometry_rng(2, 2 * 2, &mut rng).unwrap();
    let ch = Channel::new(
        vec![qubit("B")],
        vec![qubit("Bp")],
        vec![qubit("E")],
        v,
    )
    .unwrap();
    let out = apply_channel(&ch, &s, false).unwrap();

    // oracle: result[(a o),(a' o')] = sum_e sum_{b b'} K_e[o,b] rho[(a b),(a' b')] K_e[o',b']^*
    let kraus = ch.kraus_operators();
    let m = s.matrix();
    let mut oracle = CMat::zeros(6, 6);
    for a in 0..3 {
        for ap in 0..3 {
            for o in 0..2 {
                for op in 0..2 {
                    let mut acc = re(0.0);
                    for k in &kraus {
                        for b in 0..2 {
                            for bp in 0..2 {
                                acc += k[(o, b)] * m[(a * 2 + b, ap * 2 + bp)] * k[(op, bp)].conj();
                            }
                        }
                    }
                    oracle[(a * 2 + o, ap * 2 + op)] = acc;
                }
            }
        }
    }
    assert!(max_abs(&(out.matrix() - &oracle)) < 1e-10);
    // trace preserved
    assert_abs_diff_eq!(full_trace(&out), 1.0, epsilon = 1e-10);
    // positivity preserved
    assert!(out.spectrum().iter().all(|&l| l >= -1e-9));
}

#[test]
fn apply_channel_keep_env_appends_env_factor() {
    let mut rng = rng_from_seed(5);
    let v = random_isometry_rng(2, 2 * 3, &mut rng).unwrap();
    let ch = Channel::new(vec![qubit("A")], vec![qubit("A")], vec![Factor::new("E", 3)], v).unwrap();
    let s = random_state(vec![qubit("A"), qubit("R")], 5).unwrap();
    let out = apply_channel(&ch, &s, true).unwrap();
    let labels: Vec<&str> = out.factors().iter().map(|f| f.label.as_str()).collect();
    assert_eq!(labels, vec!["A", "R", "E"]);
    // tracing env recovers the keep_env=false result
    let traced = partial_trace(&out, &["A", "R"]).unwrap();
    let direct = apply_channel(&ch, &s, false).unwrap();
    assert!(states_close(&traced, &direct, 1e-12));
}

#[test]
fn apply_channel_factor_mismatch_errors() {
    let ch = Channel::identity(vec![Factor::new("A", 3)]).unwrap();
    let s = random_state(vec![qubit("A")], 0).unwrap();
    assert!(apply_channel(&ch, &s, false).is_err());
}

// --- tensor plumbing ---------------------------------------------------

#[test]
fn tensor_power_groups_and_merges() {
    let rho = random_state(vec![qubit("A"), Factor::new("R", 3)], 2).unwrap();
    let sq = tensor_power_bipartite(&rho, 2).unwrap();
    assert_eq!(sq.factors().len(), 2);
    assert_eq!(sq.factors()[0].label, "A");
    assert_eq!(sq.factors()[0].dim, 4);
    assert_eq!(sq.factors()[1].dim, 9);
    // the A-marginal of the square equals the tensor square of the A-marginal
    let a1 = partial_trace(&rho, &["A"]).unwrap();
    let a2 = partial_trace(&sq, &["A"]).unwrap();
    let expect = kron(a1.matrix(), a1.matrix());
    assert!(max_abs_diff(a2.matrix(), &expect) < 1e-10);
}

#[test]
fn permute_factors_round_trip() {
    let s = random_state(vec![qubit("A"), Factor::new("B", 3), qubit("C")], 77).unwrap();
    let p = permute_factors(&s, &["C", "A", "B"]).unwrap();
    let back = permute_factors(&p, &["A", "B", "C"]).unwrap();
    assert!(states_close(&back, &s, 0.0));
    // trace invariant under permutation
    assert_abs_diff_eq!(full_trace(&p), 1.0, epsilon = 1e-12);
}
