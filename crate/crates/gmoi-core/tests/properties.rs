//! Property tests for the structural invariants of every module.
//!
//! Each case draws a seed and builds its fixtures with the deterministic
//! generator, so failures shrink to a reproducible seed.

use std::sync::Arc;

use gmoi_core::calculus::fd_check;
use gmoi_core::derivative::{build_expansion, ParameterPattern, Slot, TermKind};
use gmoi_core::fixtures::{Fixture, FixtureGenerator};
use gmoi_core::spectral_map::{eval_multivariate, moi_as_spectral_map};
use gmoi_core::{
    divided_difference, eval_classical_moi, eval_gmoi, GmoiProblem, JordanDecomposition, Matrix, MultiFunction, Scalar, C64, CQ,
    DEFAULT_TOL,
};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

fn int_poly<S: Scalar>(g: &mut FixtureGenerator, deg: usize) -> Vec<S> {
    let mut c: Vec<S> = (0..=deg).map(|_| S::from_i64(g.int(-3, 3))).collect();
    c[deg] = S::from_i64(g.int(1, 3));
    c
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn matrix_product_is_associative(seed in any::<u64>(), n in 1usize..6) {
        let mut g = FixtureGenerator::new(seed);
        let (a, b, c) = (g.int_matrix::<CQ>(n, -5, 5), g.int_matrix::<CQ>(n, -5, 5), g.int_matrix::<CQ>(n, -5, 5));
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        let (a, b, c) = (g.real_matrix::<C64>(n, 1.0).unwrap(), g.real_matrix::<C64>(n, 1.0).unwrap(), g.real_matrix::<C64>(n, 1.0).unwrap());
        prop_assert!((&(&(&a * &b) * &c) - &(&a * &(&b * &c))).frobenius_norm() <= 1e-12);
    }

    #[test]
    fn frobenius_norm_is_subadditive(seed in any::<u64>(), n in 1usize..6) {
        let mut g = FixtureGenerator::new(seed);
        let a = g.real_matrix::<C64>(n, 3.0).unwrap();
        let b = g.real_matrix::<C64>(n, 3.0).unwrap();
        prop_assert!((&a + &b).frobenius_norm() <= a.frobenius_norm() + b.frobenius_norm() + 1e-12);
    }

    #[test]
    fn inverse_is_an_involution(seed in any::<u64>(), n in 1usize..6) {
        let mut g = FixtureGenerator::new(seed);
        let v = g.transform::<CQ>(n).unwrap();
        prop_assert_eq!(v.inverse().unwrap().inverse().unwrap(), v);
        let w = g.transform::<C64>(n).unwrap();
        let back = w.inverse().unwrap().inverse().unwrap();
        prop_assert!((&back - &w).frobenius_norm() <= 1e-8 * w.frobenius_norm());
    }

    #[test]
    fn prescribed_decompositions_are_valid(seed in any::<u64>(), n in 1usize..7) {
        let mut g = FixtureGenerator::new(seed);
        let exact = g.random_fixture::<CQ>(n, 3, false, 0.0).unwrap();
        prop_assert_eq!(exact.decomposition.validate(Some(&exact.matrix)).max_residual(), 0.0);
        let (xp, xn) = exact.decomposition.split_parts();
        prop_assert!(xp.commutator(&xn).is_zero());
        for b in &exact.decomposition.blocks {
            prop_assert!(b.nilpotent.pow(b.order).is_zero());
        }
        let float = g.random_fixture::<C64>(n, 3, false, DEFAULT_TOL).unwrap();
        let report = float.decomposition.validate(Some(&float.matrix));
        prop_assert!(report.max_residual() <= 1e-6, "{:?}", report);
        let (xp, xn) = float.decomposition.split_parts();
        prop_assert!(xp.commutator(&xn).frobenius_norm() <= 1e-6 * (1.0 + float.matrix.frobenius_norm()));
    }

    #[test]
    fn exact_auto_mode_recovers_the_prescribed_structure(seed in any::<u64>(), n in 1usize..6) {
        let mut g = FixtureGenerator::new(seed);
        let f = g.random_fixture::<CQ>(n, 3, false, 0.0).unwrap();
        let auto = JordanDecomposition::auto(&f.matrix, 0.0).unwrap();
        prop_assert_eq!(auto.signature(), f.decomposition.signature());
        prop_assert_eq!(auto.reconstruct(), f.matrix);
    }

    #[test]
    fn fixture_json_round_trips(seed in any::<u64>(), n in 1usize..6) {
        let mut g = FixtureGenerator::new(seed);
        let f = g.random_fixture::<CQ>(n, 3, false, 0.0).unwrap();
        let text = f.to_json().to_string();
        let back = Fixture::<CQ>::from_json(&serde_json::from_str(&text).unwrap(), 0.0).unwrap();
        prop_assert_eq!(back.to_json().to_string(), text);
        let dec = JordanDecomposition::<CQ>::from_json(&f.decomposition.to_json(), 0.0).unwrap();
        prop_assert_eq!(dec.to_json(), f.decomposition.to_json());
    }

    #[test]
    fn polynomial_divided_differences(seed in any::<u64>(), deg in 0usize..7, extra in 0usize..3) {
        let mut g = FixtureGenerator::new(seed);
        let coeffs = int_poly::<CQ>(&mut g, deg);
        let f = MultiFunction::polynomial(coeffs.clone());
        let nodes: Vec<CQ> = (0..=deg + extra).map(|_| CQ::from_ratio(g.int(-6, 6), g.int(1, 3))).collect();
        let want = if extra == 0 { coeffs[deg].clone() } else { CQ::from_i64(0) };
        prop_assert_eq!(divided_difference(&f, &nodes).unwrap(), want);
        // Symmetry of the lift.
        let lift = f.lift(2).unwrap();
        let (a, b, c) = (nodes[0].clone(), CQ::from_i64(g.int(-4, 4)), CQ::from_ratio(1, 2));
        prop_assert_eq!(lift.eval(&[a.clone(), b.clone(), c.clone()]).unwrap(), lift.eval(&[c, a, b]).unwrap());
    }

    #[test]
    fn lifted_partials_match_finite_differences(seed in any::<u64>(), k in 1usize..3) {
        let mut g = FixtureGenerator::new(seed);
        let coeffs: Vec<C64> = (0..=5).map(|_| C64::new(g.real(-1.0, 1.0), 0.0)).collect();
        let lift = MultiFunction::polynomial(coeffs).lift(k).unwrap();
        let nodes: Vec<C64> = (0..=k).map(|_| C64::new(g.real(-1.5, 1.5), g.real(-0.5, 0.5))).collect();
        let mut orders = vec![0; k + 1];
        orders[g.int(0, k as i64) as usize] = 1;
        let exact = lift.partial(&orders, &nodes).unwrap();
        let residual = fd_check(&lift, &orders, &nodes, 1e-4).unwrap();
        prop_assert!(residual <= 1e-5 * exact.norm().max(1.0), "residual {residual}");
    }

    #[test]
    fn gmoi_is_linear_in_each_argument(seed in any::<u64>(), n in 1usize..5, zeta in 1usize..3) {
        let mut g = FixtureGenerator::new(seed);
        let params: Vec<Arc<JordanDecomposition<C64>>> = (0..=zeta)
            .map(|_| Arc::new(g.random_fixture::<C64>(n, 3, false, DEFAULT_TOL).unwrap().decomposition))
            .collect();
        let beta = MultiFunction::<C64>::polynomial_i64(&[1, 0, -2, 1]).lift(zeta).unwrap();
        let ys: Vec<Matrix<C64>> = (0..zeta).map(|_| g.int_matrix(n, -2, 2)).collect();
        let slot = g.int(0, zeta as i64 - 1) as usize;
        let extra = g.int_matrix::<C64>(n, -2, 2);
        let alpha = C64::new(g.real(-2.0, 2.0), g.real(-2.0, 2.0));
        let problem = GmoiProblem::new(beta, params, ys.clone()).unwrap();
        let at = |y: Matrix<C64>| {
            let mut args = ys.clone();
            args[slot] = y;
            eval_gmoi(&problem.with_args(args).unwrap()).unwrap()
        };
        let mut combined = ys[slot].scale(&alpha);
        combined = &combined + &extra;
        let lhs = at(combined);
        let mut rhs = at(extra.clone());
        rhs.add_scaled(&alpha, &at(ys[slot].clone()));
        prop_assert!((&lhs - &rhs).frobenius_norm() <= 1e-11 * lhs.frobenius_norm().max(1.0));
    }

    #[test]
    fn hermitian_moi_matches_spectral_map(seed in any::<u64>(), n in 1usize..4) {
        let mut g = FixtureGenerator::new(seed);
        let hermitian = |g: &mut FixtureGenerator| {
            let blocks: Vec<(C64, usize)> = g.structure(n, 1, 3).into_iter().map(|(l, m)| (C64::new(l as f64, 0.0), m)).collect();
            g.fixture(&blocks, true, DEFAULT_TOL).unwrap().decomposition
        };
        let params = [hermitian(&mut g), hermitian(&mut g)];
        let y = g.hermitian::<C64>(n);
        let y_dec = JordanDecomposition::auto(&y, DEFAULT_TOL).unwrap();
        let beta = MultiFunction::<C64>::polynomial_i64(&[0, 1, 1]).lift(1).unwrap();
        let problem = GmoiProblem::from_decompositions(beta.clone(), &params, std::slice::from_ref(&y)).unwrap();
        let classical = eval_classical_moi(&problem).unwrap();
        let mapped = moi_as_spectral_map(&beta, &[&params[0], &params[1]], &[&y_dec]).unwrap();
        prop_assert!((&classical - &mapped).frobenius_norm() <= 1e-10 * classical.frobenius_norm().max(1.0));
    }

    #[test]
    fn symmetric_functions_of_commuting_matrices_are_swap_invariant(seed in any::<u64>(), n in 1usize..5) {
        let mut g = FixtureGenerator::new(seed);
        let v = g.transform::<CQ>(n).unwrap();
        let diag = |g: &mut FixtureGenerator| -> Vec<(CQ, usize)> { (0..n).map(|_| (CQ::from_i64(g.int(-3, 3)), 1)).collect() };
        let a = JordanDecomposition::prescribed(&v, &diag(&mut g), 0.0).unwrap();
        let b = JordanDecomposition::prescribed(&v, &diag(&mut g), 0.0).unwrap();
        let f = MultiFunction::<CQ>::multi_polynomial(2, vec![(CQ::from_i64(1), vec![2, 1]), (CQ::from_i64(1), vec![1, 2]), (CQ::from_i64(3), vec![1, 1])]).unwrap();
        prop_assert_eq!(eval_multivariate(&f, &[&a, &b]).unwrap(), eval_multivariate(&f, &[&b, &a]).unwrap());
    }

    #[test]
    fn leading_expansion_term_carries_n_factorial(n in 1usize..7) {
        let e = build_expansion(n).unwrap();
        let all_x = TermKind::Gmoi(ParameterPattern::new(vec![Slot::X; n + 1]).unwrap());
        prop_assert_eq!(e.coefficient(&all_x), (1..=n as i64).product::<i64>());
    }
}
