use std::fs;
use std::io::Write;
use std::path::Path;

use riesz_core::kernel::ClauseStatus;
use riesz_core::measure::{
    essential_limits_with, grid_windows, particles_to_grid, GridDensity, GridFunction, DEFAULT_DISCARD,
};
use riesz_core::mollify::{derivative_bound_check, mollify_density, startup_check, Mollified};
use riesz_core::potential::potential_profile;
use riesz_core::regularity::{
    build_ladder, continuity_report, critical_points, evaluate_ladder, psi_second_derivative_resolved,
    standard_kernels, sweep, ContinuityOptions, LadderCase, LadderHint, Lemma, LemmaInstance,
};
use riesz_core::solver::{kde_bandwidth, minimize, verify_el, Method, SolveConfig, StopReason, SUPPORT_THRESHOLD};
use riesz_core::{Error, Kernel, Result};
use serde_json::json;

use crate::run::Run;
use crate::{kernel_spec, CaseArg, Command, KernelArgs, LemmaArg, MethodArg, EXIT_JUMP, EXIT_NEGATIVE, EXIT_OK};

pub fn dispatch(cmd: &Command, run: &mut Run) -> Result<u8> {
    match cmd {
        Command::CheckKernel { kernel, probes } => check_kernel(run, kernel, *probes),
        Command::Minimize { kernel, method, n, window, particles, max_iters, el_tol, snapshot_every, config } => {
            let k = load_kernel(run, kernel)?;
            let cfg = match config {
                Some(path) => {
                    run.input(path)?;
                    SolveConfig::from_json_file(path)?
                }
                None => {
                    let (a, b) = (window[0], window[1]);
                    let mut cfg = match method {
                        MethodArg::Grid => SolveConfig::grid(a, b, *n),
                        MethodArg::Particles => {
                            let mut c = SolveConfig::particle(a, b, *particles, run.seed());
                            c.grid.n = *n;
                            c.snapshot_every = *snapshot_every;
                            c
                        }
                    };
                    if let Some(m) = max_iters {
                        cfg.max_iters = *m;
                    }
                    if let Some(t) = el_tol {
                        cfg.el_tol = *t;
                    }
                    cfg
                }
            };
            minimize_cmd(run, &k, &cfg)
        }
        Command::VerifyEl { kernel, density, tol } => {
            let k = load_kernel(run, kernel)?;
            let f = load_density(run, density)?;
            let rep = verify_el(&k, &f, *tol);
            let xs: Vec<f64> = (0..f.n()).map(|i| f.x(i)).collect();
            let profile = potential_profile(&k, &f, &xs);
            profile.write_csv(fs::File::create(run.path("potential.csv"))?)?;
            run.write_json("el_report.json", &rep)?;
            run.report(
                &rep,
                &format!(
                    "EL {}: residual {:.3e} (tol {:.1e}), energy {:.10}",
                    verdict(rep.passed),
                    rep.el_residual,
                    rep.tol,
                    rep.energy
                ),
            )?;
            Ok(if rep.passed { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Mollify { density, delta } => {
            let f = load_density(run, density)?;
            let props = startup_check();
            let smooth = mollify_density(&f, *delta)?;
            smooth.as_function().save_csv(&run.path("mollified.csv"))?;
            let bound = derivative_bound_check(&f, *delta)?;
            let ok = props.passed && bound.holds;
            let rep = json!({ "delta": delta, "mollifier": props, "derivative_bound": bound, "mass": smooth.mass() });
            run.write_json("mollify_report.json", &rep)?;
            run.report(
                &rep,
                &format!(
                    "mollify {}: max |f_delta'| = {:.4e} <= 2M/delta = {:.4e}",
                    verdict(ok),
                    bound.max_abs_derivative,
                    bound.bound
                ),
            )?;
            Ok(if ok { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::SecondDerivative { kernel, density, delta, x } => {
            let k = load_kernel(run, kernel)?;
            let f = load_density(run, density)?;
            second_derivative_cmd(run, &k, f.as_function(), *delta, x)
        }
        Command::CheckLemmas { kernel, trials, lemma, replay } => match replay {
            Some(path) => replay_cmd(run, path),
            None => check_lemmas(run, kernel, *trials, *lemma),
        },
        Command::BuildLadder { kernel, density, x, case, eta, delta, no_evaluate } => {
            let k = load_kernel(run, kernel)?;
            let f = load_function(run, density)?;
            let case = match case {
                CaseArg::I => LadderCase::SymmetricI,
                CaseArg::Ii => LadderCase::AntisymmetricII,
                CaseArg::Auto => return Err(Error::Config("build-ladder needs --case i or --case ii".into())),
            };
            let ladder = build_ladder(&k, &f, *x, case, LadderHint { eta: *eta, delta: *delta })?;
            let violated = ladder.violated_invariants(&k);
            let evaluation = if *no_evaluate { None } else { Some(evaluate_ladder(&k, &f, &ladder)?) };
            let rep = json!({ "ladder": ladder, "violated_invariants": violated, "evaluation": evaluation });
            run.write_json("ladder.json", &rep)?;
            run.report(
                &rep,
                &format!(
                    "ladder built: N = {}, eps = {:.4e}, eta = {:.4e}, delta = {:.4e}, margin {:.4e}; {} invariant(s) violated",
                    ladder.n,
                    ladder.epsilon,
                    ladder.eta,
                    ladder.delta,
                    ladder.margin,
                    violated.len()
                ),
            )?;
            Ok(if violated.is_empty() { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Regularity { kernel, density, points, case, el_tol, jump_tol, no_ladder } => {
            let k = load_kernel(run, kernel)?;
            let levels = density.iter().map(|p| load_density(run, p)).collect::<Result<Vec<_>>>()?;
            let opts = ContinuityOptions {
                el_tol: *el_tol,
                jump_tol: *jump_tol,
                ladder: !no_ladder,
                case: match case {
                    CaseArg::Auto => None,
                    CaseArg::I => Some(LadderCase::SymmetricI),
                    CaseArg::Ii => Some(LadderCase::AntisymmetricII),
                },
            };
            let rep = continuity_report(&k, &levels, points, &opts)?;
            run.write_json("regularity.json", &rep)?;
            let summary = if rep.continuous {
                format!("continuous at all scanned points ({} points, {} level(s))", rep.points.len(), levels.len())
            } else {
                let at: Vec<String> =
                    rep.points.iter().filter(|p| p.jump_flagged).map(|p| format!("{}", p.x)).collect();
                format!("jump detected at {}", at.join(", "))
            };
            run.report(&rep, &summary)?;
            Ok(if rep.continuous { EXIT_OK } else { EXIT_JUMP })
        }
        Command::EssentialLimits { density, x, tau } => {
            let f = load_function(run, density)?;
            let d = essential_limits_with(&f, *x, &grid_windows(&f, *x), tau.unwrap_or(DEFAULT_DISCARD))?;
            run.write_json("essential_limits.json", &d)?;
            run.report(
                &d,
                &format!(
                    "x = {}: h_L = {:.4e}, h_R = {:.4e} (tolerance {:.1e}, stabilized {})",
                    d.point, d.h_L, d.h_R, d.tolerance, d.stabilized
                ),
            )?;
            Ok(EXIT_OK)
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn load_kernel(run: &mut Run, args: &KernelArgs) -> Result<Kernel> {
    let (spec, base) = kernel_spec(args)?;
    for path in args.spec.iter().chain(args.tabulated.iter()) {
        run.input(path)?;
    }
    run.kernel(&spec);
    Kernel::from_spec(&spec, base.as_deref())
}

fn load_function(run: &mut Run, path: &Path) -> Result<GridFunction> {
    run.input(path)?;
    GridFunction::load_csv(path)
}

fn load_density(run: &mut Run, path: &Path) -> Result<GridDensity> {
    run.input(path)?;
    GridDensity::load_csv(path)
}

fn check_kernel(run: &mut Run, args: &KernelArgs, probes: usize) -> Result<u8> {
    let k = load_kernel(run, args)?;
    let cert = k.certify_hypotheses(probes)?;
    let r = k.r();
    let lambda = match k.estimate_lambda(0.5 * r, 40) {
        Ok(est) => json!(est),
        Err(Error::OscillatoryRatio { running_min }) => json!({ "oscillatory": true, "running_min": running_min }),
        Err(e) => return Err(e),
    };
    let integ = k.check_lemma31_integrability(r, 60)?;
    let closed_ok = integ.closed_form.is_none_or(|c| (integ.limit - c).abs() <= 1e-6 * c.abs().max(1.0));
    let lambda_ok = lambda.get("agrees").and_then(|a| a.as_bool()) != Some(false) && lambda.get("oscillatory").is_none();
    let ok = cert.passed && lambda_ok && integ.cauchy && closed_ok;
    let failed: Vec<&str> =
        cert.clauses.iter().filter(|c| c.status == ClauseStatus::Fail).map(|c| c.clause.as_str()).collect();
    let rep = json!({
        "kernel": k.summary(),
        "certificate": cert,
        "lambda": lambda,
        "integrability": integ,
        "passed": ok,
    });
    run.write_json("kernel_report.json", &rep)?;
    let mut summary = format!(
        "kernel {}: r = {:.6}, Lambda = {}, Lambda_bar = {:.6}, integral -> {:.10}",
        verdict(ok),
        r,
        k.lambda_ratio(),
        k.lambda_bar(),
        integ.limit
    );
    if !failed.is_empty() {
        summary.push_str(&format!("; failed clauses: {}", failed.join(", ")));
    }
    run.report(&rep, &summary)?;
    Ok(if ok { EXIT_OK } else { EXIT_NEGATIVE })
}

/// EL tolerance for the smoothed density of a particle run; the solver's own
/// tolerance there bounds particle speeds.
const KDE_EL_TOL: f64 = 1e-2;

fn minimize_cmd(run: &mut Run, k: &Kernel, cfg: &SolveConfig) -> Result<u8> {
    run.add_config("solver", cfg);
    let mut out = minimize(k, cfg)?;
    let passed = match cfg.method {
        Method::GridProjectedGradient => {
            out.density().expect("grid run yields a density").as_function().save_csv(&run.path("density.csv"))?;
            out.report.passed
        }
        Method::ParticleFlow => {
            let p = out.particles().expect("particle run yields particles");
            let mut w = std::io::BufWriter::new(fs::File::create(run.path("particles.csv"))?);
            writeln!(w, "index,x")?;
            for (i, x) in p.positions().iter().enumerate() {
                writeln!(w, "{i},{x}")?;
            }
            w.flush()?;
            let mut w = std::io::BufWriter::new(fs::File::create(run.path("trajectory.csv"))?);
            writeln!(w, "step,index,x")?;
            for (step, xs) in &out.trace.snapshots {
                for (i, x) in xs.iter().enumerate() {
                    writeln!(w, "{step},{i},{x}")?;
                }
            }
            w.flush()?;
            let kde = particles_to_grid(p, kde_bandwidth(p), cfg.grid.n)?;
            kde.as_function().save_csv(&run.path("density.csv"))?;
            out.report = verify_el(k, &kde, KDE_EL_TOL);
            out.stop == StopReason::Converged
        }
    };
    run.write_json("el_report.json", &out.report)?;
    let rep = json!({
        "stop": out.stop,
        "iterations": out.trace.iterations,
        "final_residual": out.final_residual,
        "el": out.report,
    });
    run.report(
        &rep,
        &format!(
            "minimize {}: {:?} after {} iterations, energy {:.10}, EL residual {:.3e}, support [{:.4}, {:.4}]",
            verdict(passed),
            out.stop,
            out.trace.iterations,
            out.report.energy,
            out.report.el_residual,
            out.report.support_interval.0,
            out.report.support_interval.1
        ),
    )?;
    Ok(if passed { EXIT_OK } else { EXIT_NEGATIVE })
}

fn second_derivative_cmd(run: &mut Run, k: &Kernel, f: &GridFunction, delta: f64, xs: &[f64]) -> Result<u8> {
    let m = Mollified::new(f, delta)?;
    let (lo, hi) = m.support();
    let points = if xs.is_empty() {
        // skip round-off wiggles in the tails
        let floor = SUPPORT_THRESHOLD * f.sup_abs();
        critical_points(&m, lo, hi, 20 * f.n()).into_iter().filter(|&x| m.value(x) > floor).collect()
    } else {
        xs.to_vec()
    };
    if points.is_empty() {
        return Err(Error::Precondition("mollified density has no critical points".into()));
    }
    let results = points
        .iter()
        .map(|&x| psi_second_derivative_resolved(k, &m, x, &[x], 0.25 * delta))
        .collect::<Result<Vec<_>>>()?;
    let agree = results.iter().all(|s| s.agree);
    run.write_json("second_derivative.json", &results)?;
    let lines: Vec<String> = results
        .iter()
        .map(|s| format!("x = {:.6}: psi'' = {:.8e} (gap {:.2e}, allowance {:.2e})", s.x, s.forms[0], s.max_gap, s.allowance))
        .collect();
    run.report(&results, &format!("forms {}\n{}", if agree { "agree" } else { "DISAGREE" }, lines.join("\n")))?;
    Ok(if agree { EXIT_OK } else { EXIT_NEGATIVE })
}

fn check_lemmas(run: &mut Run, args: &KernelArgs, trials: usize, only: Option<LemmaArg>) -> Result<u8> {
    let kernels = if args.given() { vec![load_kernel(run, args)?] } else { standard_kernels()? };
    let lemmas: Vec<Lemma> = match only {
        None => Lemma::ALL.to_vec(),
        Some(LemmaArg::Convex) => vec![Lemma::ConvexCancellation],
        Some(LemmaArg::Concave) => vec![Lemma::ConcaveCancellation],
        Some(LemmaArg::Rearrangement) => vec![Lemma::Rearrangement],
    };
    let seed = run.seed();
    let mut reports = Vec::new();
    let mut lines = Vec::new();
    let mut violations = 0;
    for lemma in lemmas {
        let rep = sweep(lemma, &kernels, trials, seed)?;
        for (i, inst) in rep.violations.iter().enumerate() {
            run.write_json(&format!("violation_{}_{i}.json", lemma_slug(lemma)), inst)?;
        }
        violations += rep.violations.len();
        lines.push(format!(
            "{}: {} trials, {} violations, min margin {:.3e}, rejection rate {:.1}%",
            lemma_slug(lemma),
            rep.trials,
            rep.violations.len(),
            rep.min_margin,
            100.0 * rep.rejection_rate
        ));
        reports.push(rep);
    }
    run.write_json("lemma_sweep.json", &reports)?;
    run.report(&reports, &lines.join("\n"))?;
    Ok(if violations == 0 { EXIT_OK } else { EXIT_NEGATIVE })
}

fn lemma_slug(l: Lemma) -> &'static str {
    match l {
        Lemma::ConvexCancellation => "convex",
        Lemma::ConcaveCancellation => "concave",
        Lemma::Rearrangement => "rearrangement",
    }
}

fn replay_cmd(run: &mut Run, path: &Path) -> Result<u8> {
    run.input(path)?;
    let inst = LemmaInstance::from_json_file(path)?;
    run.kernel(inst.kernel_spec());
    let out = inst.run()?;
    let rep = json!({ "instance": inst, "outcome": out, "holds": out.holds(), "margin": out.margin() });
    run.write_json("replay.json", &rep)?;
    run.report(&rep, &format!("{}: {} (margin {:.3e})", lemma_slug(inst.lemma()), verdict(out.holds()), out.margin()))?;
    Ok(if out.holds() { EXIT_OK } else { EXIT_NEGATIVE })
}
