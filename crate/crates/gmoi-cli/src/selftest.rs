//! Compact invariant suite behind `gmoi selftest`.

use std::sync::Arc;

use anyhow::Result;
use gmoi_core::analysis::{norm_bounds, perturbation_check_gdoi, CorrectionForm};
use gmoi_core::derivative::{build_expansion, nth_derivative_family, polynomial_oracle, DerivativeOptions, MatrixFamily, ParameterPattern, TermKind};
use gmoi_core::fixtures::FixtureGenerator;
use gmoi_core::gmoi::{decompose_by_parameters, pattern_terms};
use gmoi_core::spectral_map::{eval_univariate, horner};
use gmoi_core::{divided_difference, eval_classical_moi, eval_gmoi, GmoiProblem, JordanDecomposition, Matrix, MultiFunction, Scalar, C64, CQ};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check { name, passed, detail: detail.into() }
}

fn int_poly(g: &mut FixtureGenerator, deg: usize) -> Vec<CQ> {
    let mut c: Vec<CQ> = (0..=deg).map(|_| CQ::from_i64(g.int(-3, 3))).collect();
    c[deg] = CQ::from_i64(g.int(1, 3));
    c
}

/// Runs every check; the suite is deterministic for a given seed.
pub fn run(seed: u64) -> Result<Vec<Check>> {
    let mut g = FixtureGenerator::new(seed);
    let mut out = Vec::new();

    // Spectral map against Horner, exact.
    let mut ok = true;
    for _ in 0..8 {
        let n = g.int(1, 5) as usize;
        let f = g.random_fixture::<CQ>(n, 3, false, 0.0)?;
        let deg = g.int(0, 5) as usize;
        let coeffs = int_poly(&mut g, deg);
        ok &= eval_univariate(&MultiFunction::polynomial(coeffs.clone()), &f.decomposition)? == horner(&coeffs, &f.matrix);
    }
    out.push(check("spectral-map-horner", ok, "8 rational fixtures, exact equality"));

    // Pattern and parameter decompositions sum to the GMOI.
    let mut ok = true;
    for zeta in 1..=2 {
        let n = 3;
        let params: Vec<Arc<JordanDecomposition<CQ>>> =
            (0..=zeta).map(|_| g.random_fixture::<CQ>(n, 3, false, 0.0).map(|f| Arc::new(f.decomposition))).collect::<Result<_, _>>()?;
        let args: Vec<Matrix<CQ>> = (0..zeta).map(|_| g.int_matrix(n, -2, 2)).collect();
        let beta = MultiFunction::polynomial_i64(&[1, -1, 0, 2]).lift(zeta)?;
        let problem = GmoiProblem::new(beta, params, args)?;
        let t = eval_gmoi(&problem)?;
        let a = pattern_terms(&problem)?.into_iter().fold(Matrix::zeros(n), |acc, (_, m)| &acc + &m);
        let p = decompose_by_parameters(&problem)?.into_iter().fold(Matrix::zeros(n), |acc, s| &acc + &s.value);
        ok &= a == t && p == t;
    }
    out.push(check("gmoi-decompositions", ok, "Σ A_i′ and the parameter split reproduce T exactly (ζ = 1, 2)"));

    // Daleckii–Krein.
    let x = Arc::new(JordanDecomposition::<CQ>::from_jordan_blocks(&[(CQ::from_i64(1), 1), (CQ::from_i64(2), 1)], 0.0)?);
    let y = Matrix::<CQ>::from_i64_rows(&[&[1, 2], &[3, 4]])?;
    let problem = GmoiProblem::new(MultiFunction::polynomial_i64(&[0, 0, 1]).lift(1)?, vec![x.clone(), x], vec![y])?;
    let want = Matrix::<CQ>::from_i64_rows(&[&[2, 6], &[9, 16]])?;
    out.push(check("daleckii-krein", eval_classical_moi(&problem)? == want, "diag(1,2), f = z²"));

    // Perturbation formula, exact.
    let mut ok = true;
    for _ in 0..2 {
        let structure: Vec<(CQ, usize)> = g.structure(3, 3, 2).into_iter().map(|(l, m)| (CQ::from_i64(l), m)).collect();
        let c = g.fixture(&structure, false, 0.0)?;
        let d = g.fixture(&structure, false, 0.0)?;
        let x = g.random_fixture::<CQ>(3, 3, false, 0.0)?;
        let beta = MultiFunction::polynomial(int_poly(&mut g, 4));
        let r = perturbation_check_gdoi(
            &beta,
            Arc::new(c.decomposition),
            Arc::new(d.decomposition),
            Arc::new(x.decomposition),
            &g.int_matrix(3, -2, 2),
            CorrectionForm::Derived,
            None,
        )?;
        ok &= r.residual == 0.0;
    }
    out.push(check("perturbation-gdoi", ok, "2 rational fixtures, zero residual"));

    // Norm bounds on unitary fixtures.
    let mut ok = true;
    for _ in 0..10 {
        let params: Vec<Arc<JordanDecomposition<C64>>> =
            (0..2).map(|_| g.random_fixture::<C64>(3, 3, true, 1e-9).map(|f| Arc::new(f.decomposition))).collect::<Result<_, _>>()?;
        let problem = GmoiProblem::new(MultiFunction::polynomial_i64(&[0, 1, 1, 1]).lift(1)?, params, vec![g.int_matrix(3, -2, 2)])?;
        let r = norm_bounds(&problem)?;
        ok &= r.sorted_lower <= r.norm * (1.0 + 1e-12) && r.norm <= r.upper_bound * (1.0 + 1e-12);
    }
    out.push(check("norm-bounds", ok, "10 unitary fixtures"));

    // Derivative expansion and exact derivatives on diagonalizable families.
    let e4 = build_expansion(4)?;
    let leading: Vec<i64> = ["X,X,X,X,X", "X_N,X_N,X,X,X", "X,X_N,X_N,X,X", "X,X,X_N,X_N,X", "X,X,X,X_N,X_N"]
        .iter()
        .map(|p| Ok(e4.coefficient(&TermKind::Gmoi(ParameterPattern::parse(p)?))))
        .collect::<Result<_>>()?;
    out.push(check("expansion-order-4", leading == [24, -12, -8, -8, -12], format!("{leading:?}")));
    let mut ok = true;
    for order in 2..=3 {
        let family = g.structured_family::<CQ>(3, 1, true, 0.0)?;
        let coeffs = int_poly(&mut g, 5);
        let got = nth_derivative_family(&MultiFunction::polynomial(coeffs.clone()), &family, order, DerivativeOptions::default())?;
        ok &= got == polynomial_oracle(&coeffs, &family.base().reconstruct(), family.direction(), order);
    }
    out.push(check("nth-derivative", ok, "n = 2, 3 on diagonalizable rational families, exact"));

    // Confluent divided differences.
    let mut ok = true;
    for d in 0..=6 {
        let coeffs = int_poly(&mut g, d);
        let node = CQ::from_ratio(g.int(-5, 5), g.int(1, 3));
        ok &= divided_difference(&MultiFunction::polynomial(coeffs.clone()), &vec![node; d + 1])? == coeffs[d];
    }
    out.push(check("confluent-divided-difference", ok, "degree ≤ 6, exact leading coefficient"));
    Ok(out)
}
