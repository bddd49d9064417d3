use serde_json::{json, Value};
use skewdirac::continuous::{
    decay_profile, solve_inverse_continuous, uniform_grid, ContinuousPotential, DEFAULT_SAMPLES,
};
use skewdirac::corpus::run_corpus;
use skewdirac::discrete::{
    asymptotics_check, c_sequence, default_k, reduce_fully, solve_inverse_discrete, DiscretePotential,
};
use skewdirac::io::{discrete_csv, potential_csv, sweep_csv, to_json};
use skewdirac::quadruple::{AdmissibleQuadruple, Quadruple};
use skewdirac::realization::minimal_realization;
use skewdirac::stability::{run_sweep, SweepConfig};
use skewdirac::verify::{
    corrupt, default_steps, weyl_defect_continuous, weyl_defect_discrete, Verdict, WeylDefectReport,
};
use skewdirac::{CMatrix, Convention, Realization, C64};

use crate::input::{load, parse_complex, parse_grid, read_json, solver_failure, Input};
use crate::{Context, CorpusArgs, Failure, InvertContinuous, InvertDiscrete, Outcome, Stability, Verify};
use crate::{INCONCLUSIVE, NOT_MINIMAL, SCHEMA, VERIFY_FAIL};

fn json_text<T: serde::Serialize>(v: &T) -> Result<String, Failure> {
    to_json(v).map(|s| s + "\n").map_err(solver_failure)
}

fn convention_name(c: Convention) -> &'static str {
    match c {
        Convention::Continuous => "continuous",
        Convention::Discrete => "discrete",
    }
}

fn expect_convention(r: &Realization, want: Convention) -> Result<(), Failure> {
    if r.convention() != want {
        return Err(Failure::schema(format!(
            "input has convention {}, this command needs {}",
            convention_name(r.convention()),
            convention_name(want)
        )));
    }
    Ok(())
}

/// The realization itself if minimal, its minimal part under `--reduce`,
/// exit 3 otherwise. Returns the order before reduction when it changed.
fn minimal(r: Realization, reduce: bool) -> Result<(Realization, Option<usize>), Failure> {
    if r.is_minimal() {
        return Ok((r, None));
    }
    if !reduce {
        let e = r.require_minimal().unwrap_err();
        return Err(Failure::new(NOT_MINIMAL, format!("{e}; rerun with --reduce")));
    }
    let m = minimal_realization(&r).map_err(solver_failure)?;
    Ok((m, Some(r.n())))
}

fn admissible(q: Quadruple) -> Result<AdmissibleQuadruple, Failure> {
    AdmissibleQuadruple::new(q).map_err(solver_failure)
}

fn reduction_json(before: Option<usize>, after: usize) -> Value {
    match before {
        Some(n) => json!({ "n_before": n, "n_after": after }),
        None => Value::Null,
    }
}

pub fn invert_continuous(a: &InvertContinuous, ctx: &mut Context) -> Result<Outcome, Failure> {
    ctx.inputs.push(a.input.clone());
    let grid = a.grid.as_deref().map(parse_grid).transpose().map_err(Failure::schema)?;
    let (p, reduced) = match load(&a.input)? {
        Input::Realization(r) => {
            expect_convention(&r, Convention::Continuous)?;
            let (r, before) = minimal(r, a.reduce)?;
            (solve_inverse_continuous(&r).map_err(solver_failure)?, before)
        }
        Input::Quadruple { q, mode } => {
            if mode == Some(Convention::Discrete) {
                return Err(Failure::schema("quadruple is marked discrete"));
            }
            (
                ContinuousPotential::from_quadruple(admissible(q)?).map_err(solver_failure)?,
                None,
            )
        }
    };
    let xs = match grid {
        Some((lo, hi, n)) => uniform_grid(lo, hi, n),
        None => p.default_grid(),
    };
    let vs = p.on_grid(&xs).map_err(solver_failure)?;
    let decay = if p.quadruple.n() > 0 {
        let d = decay_profile(&p, p.x_max, DEFAULT_SAMPLES).map_err(solver_failure)?;
        json!({ "v_decayed": d.v_decayed(), "w_decreasing_tail": d.w_decreasing_tail() })
    } else {
        Value::Null
    };
    let q = p.quadruple.quadruple();
    let report = json!({
        "mode": "continuous",
        "n": q.n(), "m1": q.m1(), "m2": q.m2(),
        "riccati_residual": p.riccati.as_ref().map(|s| s.residual_norm),
        "identity_residual": q.identity_residual(),
        "weyl_mismatch": p.weyl_mismatch,
        "x_max": p.x_max,
        "sup_norm": p.bound,
        "decay": decay,
        "samples": xs.len(),
        "reduction": reduction_json(reduced, q.n()),
    });
    Ok(Outcome {
        files: vec![
            ("quadruple.json".into(), json_text(q)?),
            ("potential.csv".into(), potential_csv(&xs, &vs)),
            ("report.json".into(), json_text(&report)?),
        ],
        summary: report,
        code: 0,
    })
}

pub fn invert_discrete(a: &InvertDiscrete, ctx: &mut Context) -> Result<Outcome, Failure> {
    ctx.inputs.push(a.input.clone());
    let (p, reduction) = match load(&a.input)? {
        Input::Realization(r) => {
            expect_convention(&r, Convention::Discrete)?;
            let (r, before) = minimal(r, a.reduce)?;
            let k = a.k.unwrap_or_else(|| default_k(r.n()));
            let p = solve_inverse_discrete(&r, k).map_err(solver_failure)?;
            let after = p.quadruple.n();
            (p, reduction_json(before, after))
        }
        Input::Quadruple { q, mode } => {
            if mode == Some(Convention::Continuous) {
                return Err(Failure::schema("quadruple is marked continuous"));
            }
            let mut q = admissible(q)?;
            let mut reduction = Value::Null;
            if a.reduce {
                let t = reduce_fully(&q).map_err(solver_failure)?;
                reduction = json!({
                    "n_before": q.n(),
                    "n_after": t.quadruple.n(),
                    "steps": t.steps.len(),
                    "strongly_admissible": t.strongly_admissible,
                });
                q = t.quadruple;
            }
            let k = a.k.unwrap_or_else(|| default_k(q.n()));
            (c_sequence(&q, k, false).map_err(solver_failure)?, reduction)
        }
    };
    discrete_outputs(&p, reduction)
}

fn discrete_outputs(p: &DiscretePotential, reduction: Value) -> Result<Outcome, Failure> {
    let q = p.quadruple.quadruple();
    let asym = asymptotics_check(p);
    let report = json!({
        "mode": "discrete",
        "n": q.n(), "m1": q.m1(), "m2": q.m2(),
        "K": p.k(),
        "riccati_residual": p.riccati.as_ref().map(|s| s.residual_norm),
        "identity_residual": q.identity_residual(),
        "weyl_mismatch": p.weyl_mismatch,
        "invariants": p.invariants,
        "tail_distance": asym.distance.last(),
        "threshold": asym.threshold,
        "settled_at": asym.settled_at,
        "tail_ok": asym.tail_ok,
        "warnings": p.warnings,
        "reduction": reduction,
    });
    let cs = json!({ "K": p.k(), "m1": q.m1(), "m2": q.m2(), "c": p.c });
    Ok(Outcome {
        files: vec![
            ("quadruple.json".into(), json_text(q)?),
            ("c.json".into(), json_text(&cs)?),
            ("discrete.csv".into(), discrete_csv(p)),
            ("report.json".into(), json_text(&report)?),
        ],
        summary: report,
        code: 0,
    })
}

enum Target {
    Continuous(ContinuousPotential),
    Discrete(DiscretePotential),
}

pub fn verify(a: &Verify, ctx: &mut Context) -> Result<Outcome, Failure> {
    ctx.inputs.push(a.input.clone());
    let zs: Vec<C64> =
        a.z.iter()
            .map(|s| parse_complex(s))
            .collect::<Result<_, _>>()
            .map_err(Failure::schema)?;
    if let Some(z) = zs.iter().find(|z| !(z.im > 0.0)) {
        return Err(Failure::schema(format!("z = {z} must lie in the upper half-plane")));
    }
    if zs.is_empty() {
        return Err(Failure::schema("no z given"));
    }
    let flag_mode = match a.mode.as_deref() {
        Some("continuous") => Some(Convention::Continuous),
        Some("discrete") => Some(Convention::Discrete),
        _ => None,
    };
    let horizon =
        a.k.unwrap_or_else(|| zs.iter().map(|&z| default_steps(z)).max().unwrap_or(50));

    // φ source and the potential recovered from it
    let (mode, realization, quad) = match load(&a.input)? {
        Input::Realization(r) => {
            let (r, _) = minimal(r, a.reduce)?;
            (r.convention(), Some(r), None)
        }
        Input::Quadruple { q, mode } => {
            let mode = mode
                .or(flag_mode)
                .ok_or_else(|| Failure::schema("quadruple input needs --mode"))?;
            (mode, None, Some(admissible(q)?))
        }
    };
    let quad = match &a.potential {
        Some(path) => {
            ctx.inputs.push(path.clone());
            match load(path)? {
                Input::Quadruple { q, .. } => Some(admissible(q)?),
                Input::Realization(_) => return Err(Failure::schema("--potential must be a quadruple")),
            }
        }
        None => quad,
    };
    let target = match (mode, quad, &realization) {
        (Convention::Continuous, Some(q), _) => {
            Target::Continuous(ContinuousPotential::from_quadruple(q).map_err(solver_failure)?)
        }
        (Convention::Discrete, Some(q), _) => Target::Discrete(c_sequence(&q, horizon, false).map_err(solver_failure)?),
        (Convention::Continuous, None, Some(r)) => {
            Target::Continuous(solve_inverse_continuous(r).map_err(solver_failure)?)
        }
        (Convention::Discrete, None, Some(r)) => {
            Target::Discrete(solve_inverse_discrete(r, horizon).map_err(solver_failure)?)
        }
        (_, None, None) => unreachable!("input is a realization or a quadruple"),
    };
    let phi_at = |z: C64| -> Result<CMatrix, Failure> {
        let phi = match (&realization, &target) {
            (Some(r), _) => r.evaluate(z),
            (None, Target::Continuous(p)) => p.weyl(z),
            (None, Target::Discrete(p)) => p.weyl(z),
        }
        .map_err(solver_failure)?;
        Ok(match a.corrupt {
            Some(eps) => corrupt(&phi, eps),
            None => phi,
        })
    };

    let mut reports: Vec<WeylDefectReport> = Vec::new();
    for &z in &zs {
        let phi = phi_at(z)?;
        let r = match &target {
            Target::Continuous(p) => weyl_defect_continuous(p, &phi, z, a.length, a.step),
            Target::Discrete(p) => weyl_defect_discrete(p, &phi, z, a.k),
        }
        .map_err(solver_failure)?;
        reports.push(r);
    }
    let verdict = reports.iter().fold(Verdict::Pass, |v, r| v.combine(r.verdict));
    let summary = json!({
        "mode": convention_name(mode),
        "verdict": verdict,
        "points": reports.iter().map(|r| json!({
            "z": r.z,
            "ratio": r.ratio,
            "first_half": r.first_half,
            "second_half": r.second_half,
            "m_bound": r.m_bound,
            "step_error": r.step_error,
            "im_z_exceeds_m": r.im_z_exceeds_m,
            "verdict": r.verdict,
        })).collect::<Vec<_>>(),
    });
    let code = match verdict {
        Verdict::Pass => 0,
        Verdict::Fail => VERIFY_FAIL,
        Verdict::Inconclusive => INCONCLUSIVE,
    };
    Ok(Outcome {
        files: vec![(
            "report.json".into(),
            json_text(&json!({ "summary": summary, "reports": reports }))?,
        )],
        summary,
        code,
    })
}

/// `--seed`, then `SEED`, then the configured value.
fn resolve_seed(flag: Option<u64>, configured: u64) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("SEED") {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map_err(|e| Failure::new(SCHEMA, format!("SEED = '{s}': {e}"))),
        _ => Ok(configured),
    }
}

pub fn stability(a: &Stability, ctx: &mut Context) -> Result<Outcome, Failure> {
    ctx.inputs.push(a.config.clone());
    let v = read_json(&a.config)?;
    let mut cfg: SweepConfig =
        serde_json::from_value(v).map_err(|e| Failure::schema(format!("{}: {e}", a.config.display())))?;
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    cfg.seed = resolve_seed(a.seed, cfg.seed)?;
    ctx.seed = Some(cfg.seed);
    cfg.validate().map_err(|e| Failure::schema(e.to_string()))?;
    let result = run_sweep(&cfg).map_err(solver_failure)?;
    let summary = json!({
        "mode": result.mode,
        "level": result.level,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "rows": result.rows,
        "quad_trend_ok": result.quad_trend_ok,
        "potential_trend_ok": result.potential_trend_ok,
        "lipschitz_estimate": result.lipschitz_estimate,
        "verdict": result.verdict,
    });
    Ok(Outcome {
        files: vec![
            ("sweep.csv".into(), sweep_csv(&result)),
            ("summary.json".into(), json_text(&summary)?),
        ],
        summary,
        code: 0,
    })
}

pub fn corpus(a: &CorpusArgs, ctx: &mut Context) -> Result<Outcome, Failure> {
    ctx.inputs.push(a.dir.clone());
    let rows = run_corpus(&a.dir).map_err(|e| Failure::schema(e.to_string()))?;
    println!("{:<28} {:>12} {:>10}  result", "case", "deviation", "tolerance");
    for r in &rows {
        let status = match (&r.error, r.pass) {
            (Some(e), _) => format!("ERROR {e}"),
            (None, true) => "pass".into(),
            (None, false) => {
                let failed: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.what.as_str()).collect();
                format!("FAIL {}", failed.join("; "))
            }
        };
        println!("{:<28} {:>12.3e} {:>10.1e}  {status}", r.name, r.deviation, r.tolerance);
    }
    let all = rows.iter().all(|r| r.pass);
    let summary = json!({
        "pass": all,
        "rows": rows.iter().map(|r| json!({
            "name": r.name, "deviation": r.deviation, "tolerance": r.tolerance,
            "pass": r.pass, "error": r.error,
        })).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        files: vec![("corpus.json".into(), json_text(&rows)?)],
        summary,
        code: if all { 0 } else { VERIFY_FAIL },
    })
}
