//! Property tests for the linear-algebra kernel and state constructions.

use entbound::linalg::{divided_difference_log, BipartiteShape, CMatrix, HermitianOperator, C64};
use entbound::measures::{css_defect, relative_entropy, LogBase};
use entbound::states::{
    random_state, regroup, rho_r, seeded_rng, sigma_r, tensor_states, RainsPairParams,
};
use proptest::prelude::*;

fn hermitian(n: usize, entries: &[f64]) -> HermitianOperator {
    let m = CMatrix::from_fn(n, n, |i, j| {
        let k = 2 * (i * n + j);
        C64::new(entries[k], entries[k + 1])
    });
    HermitianOperator::symmetrize(m)
}

fn shaped_hermitian() -> impl Strategy<Value = (BipartiteShape, HermitianOperator)> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(da, db)| {
        let n = da * db;
        prop::collection::vec(-1.0f64..1.0, 2 * n * n).prop_map(move |v| {
            (BipartiteShape::new(da, db).unwrap(), hermitian(n, &v))
        })
    })
}

fn sized_hermitian(max: usize) -> impl Strategy<Value = HermitianOperator> {
    (1usize..=max).prop_flat_map(|n| {
        prop::collection::vec(-10.0f64..10.0, 2 * n * n).prop_map(move |v| hermitian(n, &v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_transpose_is_a_trace_preserving_involution((shape, h) in shaped_hermitian()) {
        let t = h.partial_transpose(shape).unwrap();
        prop_assert!(t.asymmetry() == 0.0);
        prop_assert!((t.trace() - h.trace()).abs() <= 1e-12);
        let back = t.partial_transpose(shape).unwrap();
        prop_assert_eq!(back.matrix(), h.matrix());
    }

    #[test]
    fn partial_transpose_is_linear(
        (shape, a) in shaped_hermitian(),
        c in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let b = random_state(shape, shape.dim(), &mut seeded_rng(seed));
        let lhs = (&(&a * c) + b.op()).partial_transpose(shape).unwrap();
        let rhs = &(&a.partial_transpose(shape).unwrap() * c) + &b.partial_transpose();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn composite_partial_transpose_keeps_trace(
        (s1, a) in shaped_hermitian(),
        (s2, b) in shaped_hermitian(),
    ) {
        prop_assume!(s1.dim() * s2.dim() <= 64);
        let joint = BipartiteShape::new(s1.da * s2.da, s1.db * s2.db).unwrap();
        let ab = HermitianOperator::symmetrize(regroup(a.kron(&b).matrix(), s1, s2));
        let t = ab.partial_transpose(joint).unwrap();
        let scale = 1.0 + a.trace().abs() * b.trace().abs();
        prop_assert!((t.trace() - a.trace() * b.trace()).abs() <= 1e-12 * scale);
        // (A⊗B)^{T_B} = A^{T_B}⊗B^{T_B} after regrouping
        let split = HermitianOperator::symmetrize(regroup(
            a.partial_transpose(s1).unwrap().kron(&b.partial_transpose(s2).unwrap()).matrix(),
            s1,
            s2,
        ));
        prop_assert!(t.max_abs_diff(&split) <= 1e-12);
    }

    #[test]
    fn norm_bounds(h in sized_hermitian(12)) {
        let (tn, on) = (h.trace_norm(), h.op_norm());
        prop_assert!(tn >= on * (1.0 - 1e-12));
        prop_assert!(tn <= h.dim() as f64 * on * (1.0 + 1e-12));
    }

    #[test]
    fn eigendecomposition_reconstructs(h in sized_hermitian(32)) {
        let e = h.eig();
        let residual = e.reconstruct().max_abs_diff(&h);
        let scale = h.op_norm().max(1.0);
        prop_assert!(residual <= 1e-10 * scale, "residual {residual:e}");
        prop_assert!(e.values.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn logarithmic_mean_lies_between_arguments(
        a in 1e-12f64..1e3,
        ratio in prop_oneof![0.5f64..2.0, (1.0 - 1e-7)..(1.0 + 1e-7), 1e-6f64..1e6],
    ) {
        let b = a * ratio;
        let l = divided_difference_log(a, b).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(l >= lo * (1.0 - 1e-15) && l <= hi * (1.0 + 1e-15), "L({a}, {b}) = {l}");
        // symmetric in its arguments
        let m = divided_difference_log(b, a).unwrap();
        prop_assert!((l - m).abs() <= 1e-15 * hi);
    }

    #[test]
    fn relative_entropy_is_nonnegative(seed in any::<u64>(), rank in 1usize..=4) {
        let shape = BipartiteShape::new(2, 2).unwrap();
        let mut rng = seeded_rng(seed);
        let rho = random_state(shape, rank, &mut rng);
        let sigma = random_state(shape, 4, &mut rng);
        let s = relative_entropy(&rho, &sigma, LogBase::Two).unwrap();
        prop_assert!(s >= -1e-10);
        prop_assert!(relative_entropy(&rho, &rho, LogBase::Two).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn tensor_of_states_is_a_state(s1 in any::<u64>(), s2 in any::<u64>()) {
        let q = BipartiteShape::new(2, 2).unwrap();
        let t = BipartiteShape::new(2, 3).unwrap();
        let rho = random_state(q, 2, &mut seeded_rng(s1));
        let sigma = random_state(t, 3, &mut seeded_rng(s2));
        let joint = tensor_states(&rho, &sigma);
        prop_assert_eq!(joint.shape(), BipartiteShape::new(4, 6).unwrap());
        prop_assert!((joint.purity() - rho.purity() * sigma.purity()).abs() <= 1e-12);
        // PPT-ness composes: the partial transpose factorizes
        let pt = joint.partial_transpose();
        let expect = HermitianOperator::symmetrize(regroup(
            rho.partial_transpose().kron(&sigma.partial_transpose()).matrix(),
            q,
            t,
        ));
        prop_assert!(pt.max_abs_diff(&expect) <= 1e-13);
    }
}

fn grid(k: usize, steps: usize, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * k as f64 / (steps - 1) as f64
}

#[test]
fn sigma_r_is_ppt_with_one_dimensional_kernel() {
    for k in 0..50 {
        let r = grid(k, 50, 0.3125, 0.548);
        let p = RainsPairParams::new(r).unwrap();
        let s = sigma_r(p).unwrap();
        let pt = s.partial_transpose();
        assert!(pt.min_eigenvalue() >= -1e-10, "r = {r}");
        let norm = pt.op_norm();
        let small = pt.eig().values.iter().filter(|v| v.abs() <= 1e-9 * norm).count();
        assert_eq!(small, 1, "r = {r}");
    }
}

#[test]
fn css_identity_on_grid() {
    for k in 0..100 {
        let r = grid(k, 100, 0.3125, 0.548);
        let d = css_defect(r).unwrap();
        assert!(d <= 1e-9, "r = {r}: defect {d:e}");
        assert!(rho_r(RainsPairParams::new(r).unwrap()).unwrap().op().min_eigenvalue() >= -1e-10);
    }
}
