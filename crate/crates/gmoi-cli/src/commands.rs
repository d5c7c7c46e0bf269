//! Subcommand implementations, generic over the scalar mode.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use gmoi_core::analysis::{continuity_experiment, dyadic_steps, lipschitz_check, norm_bounds, perturbation_check, CorrectionForm};
use gmoi_core::derivative::{
    evaluate_expansion, fd_oracle, polynomial_oracle, weighted_sum, AutoFamily, DerivativeOptions, MAX_EXPANSION_ORDER,
};
use gmoi_core::fixtures::{fixture_from_request, Fixture};
use gmoi_core::gmoi::{pattern_terms, pattern_terms_json};
use gmoi_core::jordan::{decompose, DecomposeMode};
use gmoi_core::spectral_map::{eval_multivariate, eval_univariate, horner};
use gmoi_core::{eval_classical_moi, eval_gmoi, FunctionKind, GmoiError, GmoiProblem, Matrix, Scalar};
use serde_json::{json, Value};

use crate::{input, selftest, Command, Config, FormArg, ProblemArgs};

/// A report and, if a verification failed, the reason.
pub struct Outcome {
    pub report: Value,
    pub failure: Option<String>,
    /// The report is a data file (always emitted as JSON).
    pub raw: bool,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Self { report, failure: None, raw: false }
    }

    fn checked(report: Value, failure: Option<String>) -> Self {
        Self { report, failure, raw: false }
    }
}

/// Float residuals must stay within `tol` (relative to the reference scale);
/// exact residuals must vanish.
fn acceptable<S: Scalar>(residual: f64, scale: f64, tol: f64) -> bool {
    if S::EXACT {
        residual == 0.0
    } else {
        residual <= tol * scale.max(1.0)
    }
}

fn problem<S: Scalar>(p: &ProblemArgs, config: &Config) -> Result<GmoiProblem<S>> {
    let beta = input::function::<S>(&p.function)?;
    let params = input::decompositions::<S>(&p.params, config.tol)?;
    let args = input::matrices::<S>(&p.args)?;
    Ok(GmoiProblem::new(beta, params, args)?.with_budget(config.budget))
}

pub fn execute<S: Scalar>(command: &Command, config: &Config) -> Result<Outcome> {
    let tol = config.tol;
    let mode = json!(S::MODE);
    match command {
        Command::Decompose { matrix, structure } => {
            let x = input::matrix::<S>(matrix)?;
            let j = match structure {
                Some(path) => {
                    let v = input::read_json(path)?;
                    let transform = Matrix::from_json(v.get("transform").unwrap_or(&Value::Null))
                        .with_context(|| format!("{}: field \"transform\"", path.display()))?;
                    let blocks = gmoi_core::jordan::parse_block_list::<S>(&v).with_context(|| format!("{}: field \"blocks\"", path.display()))?;
                    decompose(&x, tol, DecomposeMode::Prescribed { transform, blocks })?
                }
                None => decompose(&x, tol, DecomposeMode::Auto)?,
            };
            let validation = j.validate(Some(&x));
            let failure = (!validation.passes(if S::EXACT { 0.0 } else { tol * x.frobenius_norm().max(1.0) }))
                .then(|| format!("decomposition residual {:.3e}", validation.max_residual()));
            Ok(Outcome {
                report: json!({ "mode": mode, "decomposition": j.to_json(), "validation": validation.to_json() }),
                failure,
                raw: false,
            })
        }
        Command::Funcmat { function, matrices, verify } => {
            let f = input::function::<S>(function)?;
            let js = matrices.iter().map(|p| input::decomposition::<S>(p, tol)).collect::<Result<Vec<_>>>()?;
            let value = if js.len() == 1 {
                eval_univariate(&f, &js[0])?
            } else {
                eval_multivariate(&f, &js.iter().collect::<Vec<_>>())?
            };
            let mut report = json!({ "mode": mode, "result": value.to_json(), "frobeniusNorm": value.frobenius_norm() });
            let mut failure = None;
            if *verify {
                let FunctionKind::Polynomial(coeffs) = &f.kind else {
                    bail!(GmoiError::Unsupported("--verify compares against Horner evaluation and needs a univariate polynomial".into()));
                };
                if js.len() != 1 {
                    bail!(GmoiError::Unsupported("--verify needs exactly one matrix".into()));
                }
                let reference = horner(coeffs, &js[0].reconstruct());
                let residual = (&value - &reference).frobenius_norm();
                report["hornerResidual"] = json!(residual);
                if !acceptable::<S>(residual, reference.frobenius_norm(), tol) {
                    failure = Some(format!("Horner residual {residual:.3e}"));
                }
            }
            Ok(Outcome::checked(report, failure))
        }
        Command::Gmoi { problem: p, classical } => {
            let problem = problem::<S>(p, config)?;
            let value = if *classical { eval_classical_moi(&problem)? } else { eval_gmoi(&problem)? };
            let mut report = json!({
                "mode": mode,
                "zeta": problem.zeta(),
                "result": value.to_json(),
                "frobeniusNorm": value.frobenius_norm(),
            });
            if config.dump_terms {
                report["patternTerms"] = pattern_terms_json(&pattern_terms(&problem)?, true);
            }
            Ok(Outcome::ok(report))
        }
        Command::Bounds { problem: p } => {
            let problem = problem::<S>(p, config)?;
            let r = norm_bounds(&problem)?;
            let mut report = r.to_json();
            report["mode"] = mode;
            report["sortedLowerHolds"] = json!(r.sorted_lower <= r.norm * (1.0 + 1e-12));
            report["upperHolds"] = json!(r.norm <= r.upper_bound * (1.0 + 1e-12));
            Ok(Outcome::ok(report))
        }
        Command::Lipschitz { problem: p, args_prime } => {
            let problem = problem::<S>(p, config)?;
            let prime = input::matrices::<S>(args_prime)?;
            let r = lipschitz_check(&problem, &problem.args, &prime)?;
            let mut report = r.to_json();
            report["mode"] = mode;
            report["holds"] = json!(r.actual <= r.bound * (1.0 + 1e-12));
            Ok(Outcome::ok(report))
        }
        Command::VerifyPerturbation { function, c, d, params, args, slot, form } => {
            let beta = input::function::<S>(function)?;
            let c = Arc::new(input::decomposition::<S>(c, tol)?);
            let d = Arc::new(input::decomposition::<S>(d, tol)?);
            let params = input::decompositions::<S>(params, tol)?;
            let args = input::matrices::<S>(args)?;
            let form = match form {
                FormArg::Derived => CorrectionForm::Derived,
                FormArg::Displayed => CorrectionForm::Displayed,
            };
            let r = perturbation_check(&beta, *slot, &params, c, d, &args, form, config.budget)?;
            let passed = acceptable::<S>(r.residual, r.lhs.frobenius_norm(), tol);
            let mut report = r.to_json(config.dump_terms);
            report["mode"] = mode;
            report["passed"] = json!(passed);
            let failure = (!passed).then(|| format!("perturbation residual {:.3e}", r.residual));
            Ok(Outcome::checked(report, failure))
        }
        Command::Continuity { problem: p, directions, steps } => {
            let problem = problem::<S>(p, config)?;
            let directions = input::matrices::<S>(directions)?;
            let r = continuity_experiment(&problem, &directions, &dyadic_steps(*steps))?;
            let mut report = r.to_json();
            report["mode"] = mode;
            report["decreasingFrom3"] = json!(r.decreasing_from(3));
            Ok(Outcome::ok(report))
        }
        Command::Derivative { function, x, y, order, xstep, nilpotent_motion, verify } => {
            derivative::<S>(config, function, x, y, *order, *xstep, *nilpotent_motion, *verify)
        }
        Command::GenFixture { blocks, spec, seed, unitary, out, decomposition_out } => {
            let mut request = match (blocks, spec) {
                (Some(text), None) => {
                    let blocks: Value = serde_json::from_str(text)
                        .map_err(|e| GmoiError::InvalidInput(format!("--blocks: malformed JSON: {e}")))?;
                    json!({ "blocks": blocks })
                }
                (None, Some(path)) => input::read_json(path)?,
                _ => bail!(GmoiError::InvalidInput("gen-fixture needs --blocks or --spec".into())),
            };
            if *unitary {
                request["unitary"] = json!(true);
            }
            let fixture: Fixture<S> = fixture_from_request(&request, *seed, if S::EXACT { 0.0 } else { tol })?;
            let report = fixture.to_json();
            if let Some(path) = decomposition_out {
                write_json(path, &fixture.decomposition.to_json())?;
            }
            match out {
                Some(path) => {
                    write_json(path, &report)?;
                    Ok(Outcome::ok(json!({ "written": path.display().to_string(), "dim": fixture.matrix.dim() })))
                }
                None => Ok(Outcome { report, failure: None, raw: true }),
            }
        }
        Command::Selftest { seed } => {
            let checks = selftest::run(*seed)?;
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            let report = json!({
                "seed": seed,
                "checks": checks.iter().map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail })).collect::<Vec<_>>(),
                "passed": failed.is_empty(),
            });
            let failure = (!failed.is_empty()).then(|| format!("failing checks: {}", failed.join(", ")));
            Ok(Outcome::checked(report, failure))
        }
    }
}

fn write_json(path: &std::path::Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn derivative<S: Scalar>(
    config: &Config,
    function: &std::path::Path,
    x: &std::path::Path,
    y: &std::path::Path,
    order: usize,
    x_step: f64,
    nilpotent_motion: bool,
    verify: bool,
) -> Result<Outcome> {
    if order == 0 || order > MAX_EXPANSION_ORDER {
        bail!(GmoiError::InvalidInput(format!("--order must be in 1..={MAX_EXPANSION_ORDER} (got {order})")));
    }
    if !(x_step > 0.0 && x_step.is_finite()) {
        bail!(GmoiError::InvalidInput(format!("--xstep must be positive (got {x_step})")));
    }
    let f = input::function::<S>(function)?;
    let base = Arc::new(input::decomposition::<S>(x, config.tol)?);
    let dir = input::matrix::<S>(y)?;
    let family = AutoFamily::new(base.clone(), dir.clone())?;
    let options = DerivativeOptions { x_step, budget: config.budget, nilpotent_motion };
    let expansion = options.expansion(order)?;
    let terms = evaluate_expansion(&f, &family, &expansion, options)?;
    let value = weighted_sum(&terms, base.dim);
    let mut report = json!({
        "mode": S::MODE,
        "order": order,
        "nilpotentMotion": nilpotent_motion,
        "result": value.to_json(),
        "frobeniusNorm": value.frobenius_norm(),
    });
    if config.dump_terms {
        report["terms"] = Value::Array(
            terms
                .iter()
                .map(|(t, m)| {
                    json!({ "coefficient": t.coefficient, "label": t.kind.to_string(), "frobeniusNorm": m.frobenius_norm(), "matrix": m.to_json() })
                })
                .collect(),
        );
    } else {
        report["expansion"] = expansion.to_json();
    }
    let mut failure = None;
    if verify {
        let (oracle, kind) = match &f.kind {
            FunctionKind::Polynomial(c) => (polynomial_oracle(c, &base.reconstruct(), &dir, order), "polynomial"),
            _ => (fd_oracle(&f, &family, order, 1e-2, order + 4)?, "finite-difference"),
        };
        let residual = (&value - &oracle).frobenius_norm();
        let scale = oracle.frobenius_norm();
        report["oracle"] = json!(kind);
        report["oracleResidual"] = json!(residual);
        report["relativeResidual"] = json!(residual / scale.max(1.0));
        let bound = if kind == "polynomial" { config.tol.max(1e-6) } else { 1e-4 };
        let passed = if S::EXACT && base.is_diagonalizable() && kind == "polynomial" {
            residual == 0.0
        } else {
            residual <= bound * scale.max(1.0)
        };
        report["passed"] = json!(passed);
        if !passed {
            failure = Some(format!("derivative oracle residual {residual:.3e}"));
        }
    }
    Ok(Outcome::checked(report, failure))
}
